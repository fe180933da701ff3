//! Maxwell-Bloch equations for a single cavity mode coupled to an
//! inhomogeneously broadened spin ensemble, with a hole-filling relaxation
//! term pulling every packet's inversion toward the ensemble mean.
//!
//! In the frame rotating at the cavity frequency:
//!
//! ```text
//! da/dt     = -(kappa + i Dc) a + g N sum_j rho_j s_j + eta(t)
//! ds_j/dt   = -(gamma + i (D_j + delta(t))) s_j + g a z_j
//! dz_j/dt   = -2 g (a* s_j + a s_j*) + J (p - z_j),   p = sum_k rho_k z_k
//! ```
//!
//! with `g = g_coll / sqrt(N)` the packet coupling, `delta(t)` the global
//! detuning offset of an active hold and `eta(t)` the constant drive plus any
//! active drive segment.

mod dopri;
mod integrate;
mod noise;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{hz, EnsembleGrid, PhysicalParams};
use crate::error::{Error, Result};

pub use dopri::{IntegrationStats, Tolerances};
pub use integrate::{evolve, integrate, integrate_full, Simulation};
pub use noise::{NoiseConfig, NoiseDrive};

/// Cavity field plus per-packet coherences and inversions.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub a: Complex64,
    pub sigma_minus: Vec<Complex64>,
    pub sigma_z: Vec<f64>,
    pub t: f64,
}

impl SystemState {
    /// Ground state: no field, no coherence, all spins down.
    pub fn ground(n: usize) -> Self {
        Self {
            a: Complex64::new(0.0, 0.0),
            sigma_minus: vec![Complex64::new(0.0, 0.0); n],
            sigma_z: vec![-1.0; n],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.sigma_z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma_z.is_empty()
    }

    /// Weighted mean inversion p = sum_j rho_j z_j.
    pub fn mean_inversion(&self, grid: &EnsembleGrid) -> f64 {
        grid.weights().zip(&self.sigma_z).map(|(w, z)| w * z).sum()
    }

    /// Largest violation of `z^2 + 4|s|^2 <= 1` over all packets.
    pub fn max_bloch_norm(&self) -> f64 {
        self.sigma_z
            .iter()
            .zip(&self.sigma_minus)
            .map(|(z, s)| z * z + 4.0 * s.norm_sqr())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.sigma_z.len() != n || self.sigma_minus.len() != n {
            return Err(Error::Structure(format!(
                "state has {} coherences and {} inversions, grid has {} packets",
                self.sigma_minus.len(),
                self.sigma_z.len(),
                n
            )));
        }
        Ok(())
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let finite = self.a.re.is_finite()
            && self.a.im.is_finite()
            && self
                .sigma_minus
                .iter()
                .all(|s| s.re.is_finite() && s.im.is_finite())
            && self.sigma_z.iter().all(|z| z.is_finite());
        if finite {
            Ok(())
        } else {
            Err(Error::NonFinite {
                t: self.t,
                what: "state".into(),
            })
        }
    }

    /// Packs into `[Re a, Im a, Re s_0, Im s_0, ..., z_0, ...]`.
    pub(crate) fn pack(&self) -> Vec<f64> {
        let n = self.len();
        let mut y = Vec::with_capacity(2 + 3 * n);
        y.push(self.a.re);
        y.push(self.a.im);
        for s in &self.sigma_minus {
            y.push(s.re);
            y.push(s.im);
        }
        y.extend_from_slice(&self.sigma_z);
        y
    }

    pub(crate) fn unpack(y: &[f64], t: f64) -> Self {
        let n = (y.len() - 2) / 3;
        Self {
            a: Complex64::new(y[0], y[1]),
            sigma_minus: (0..n)
                .map(|j| Complex64::new(y[2 + 2 * j], y[3 + 2 * j]))
                .collect(),
            sigma_z: y[2 + 2 * n..].to_vec(),
            t,
        }
    }
}

/// Finite-duration coherent drive of the cavity.
///
/// Frequencies are ordinary frequencies (Hz); times are seconds; the
/// amplitude has the units of the constant drive (field units per second).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub amplitude: f64,
    /// Drive frequency relative to the rotating frame (Hz).
    #[serde(default)]
    pub frequency_offset_hz: f64,
}

impl DriveSegment {
    /// Complex drive amplitude `A exp(-i w t)` at time `t`.
    pub fn value_at(&self, t: f64) -> Complex64 {
        let phase = -hz(self.frequency_offset_hz) * t;
        Complex64::from_polar(self.amplitude, phase)
    }
}

/// Interval during which every spin is shifted by a common detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoldSegment {
    pub t_start: f64,
    pub t_end: f64,
    /// Global spin detuning during the hold (Hz).
    pub detuning_offset_hz: f64,
    /// Duration of the linear ramps at either end (s); zero for steps.
    #[serde(default)]
    pub ramp: f64,
}

impl HoldSegment {
    /// Detuning offset (rad/s) at time `t`, including the ramps.
    pub fn offset_at(&self, t: f64) -> f64 {
        let full = hz(self.detuning_offset_hz);
        if t < self.t_start || t > self.t_end {
            return 0.0;
        }
        if self.ramp <= 0.0 {
            return full;
        }
        let up = (t - self.t_start) / self.ramp;
        let down = (self.t_end - t) / self.ramp;
        full * up.min(down).clamp(0.0, 1.0)
    }
}

/// Time derivative of a [`SystemState`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeView {
    pub da: Complex64,
    pub dsigma_minus: Vec<Complex64>,
    pub dsigma_z: Vec<f64>,
}

/// The right-hand side with all grid- and parameter-derived constants
/// precomputed, evaluated on packed state vectors.
#[derive(Debug, Clone)]
pub(crate) struct MaxwellBloch {
    detunings: Vec<f64>,
    weights: Vec<f64>,
    g: f64,
    g_field: f64,
    kappa: f64,
    cavity_detuning: f64,
    gamma: f64,
    j_fill: f64,
    eta: f64,
    pub(crate) hold: Option<HoldSegment>,
    pub(crate) drive: Option<DriveSegment>,
    pub(crate) noise: Option<NoiseDrive>,
}

impl MaxwellBloch {
    pub(crate) fn new(grid: &EnsembleGrid, params: &PhysicalParams) -> Self {
        let n = grid.len();
        let g = grid.packets.first().map_or(0.0, |p| p.coupling);
        Self {
            detunings: grid.detunings().collect(),
            weights: grid.weights().collect(),
            g,
            g_field: g * n as f64,
            kappa: params.kappa,
            cavity_detuning: params.cavity_detuning,
            gamma: params.gamma_perp,
            j_fill: params.j_fill,
            eta: params.eta,
            hold: None,
            drive: None,
            noise: None,
        }
    }

    pub(crate) fn dim(&self) -> usize {
        2 + 3 * self.detunings.len()
    }

    pub(crate) fn eval(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        let n = self.detunings.len();
        let (head, z) = y.split_at(2 + 2 * n);
        let a = Complex64::new(head[0], head[1]);
        let s = &head[2..];
        let (dhead, dz) = dy.split_at_mut(2 + 2 * n);

        let offset = self.hold.as_ref().map_or(0.0, |h| h.offset_at(t));
        let mut drive = Complex64::new(self.eta, 0.0);
        if let Some(d) = &self.drive {
            drive += d.value_at(t);
        }
        if let Some(noise) = &self.noise {
            drive += noise.value_at(t);
        }

        let mut coherence_sum = Complex64::new(0.0, 0.0);
        let mut p = 0.0;
        for j in 0..n {
            let w = self.weights[j];
            coherence_sum.re += w * s[2 * j];
            coherence_sum.im += w * s[2 * j + 1];
            p += w * z[j];
        }

        let da = -Complex64::new(self.kappa, self.cavity_detuning) * a
            + self.g_field * coherence_sum
            + drive;
        dhead[0] = da.re;
        dhead[1] = da.im;

        let ga = self.g * a;
        for j in 0..n {
            let (sr, si) = (s[2 * j], s[2 * j + 1]);
            let zj = z[j];
            let rot = self.detunings[j] + offset;
            // -(gamma + i rot) s + g a z
            dhead[2 + 2 * j] = -self.gamma * sr + rot * si + ga.re * zj;
            dhead[3 + 2 * j] = -self.gamma * si - rot * sr + ga.im * zj;
            // a* s + a s* = 2 Re(a* s)
            let re_conj_a_s = a.re * sr + a.im * si;
            dz[j] = -4.0 * self.g * re_conj_a_s + self.j_fill * (p - zj);
        }
    }
}

/// Evaluates the equations of motion at `state`.
pub fn rhs(
    state: &SystemState,
    grid: &EnsembleGrid,
    params: &PhysicalParams,
    drive: Option<&DriveSegment>,
    hold: Option<&HoldSegment>,
) -> Result<DerivativeView> {
    state.check_len(grid.len())?;
    state.check_finite()?;
    let mut system = MaxwellBloch::new(grid, params);
    system.drive = drive.cloned();
    system.hold = hold.cloned();
    let y = state.pack();
    let mut dy = vec![0.0; y.len()];
    system.eval(state.t, &y, &mut dy);
    let d = SystemState::unpack(&dy, state.t);
    Ok(DerivativeView {
        da: d.a,
        dsigma_minus: d.sigma_minus,
        dsigma_z: d.sigma_z,
    })
}

/// Default coherence seed assigned to every packet on preparation.
pub const DEFAULT_SEED_COHERENCE: f64 = 1e-6;

/// Uniformly inverted state with a small real coherence seed and an empty
/// cavity. The time of `state` is kept.
pub fn prepare_inversion(state: &SystemState, p0: f64, seed_coherence: f64) -> Result<SystemState> {
    if !(p0.is_finite() && p0.abs() <= 1.0) {
        return Err(Error::Domain(format!("|p0| must be <= 1, got {p0}")));
    }
    if !(seed_coherence.is_finite() && seed_coherence >= 0.0) {
        return Err(Error::Domain(format!(
            "seed coherence must be >= 0, got {seed_coherence}"
        )));
    }
    let n = state.len();
    Ok(SystemState {
        a: Complex64::new(0.0, 0.0),
        sigma_minus: vec![Complex64::new(seed_coherence, 0.0); n],
        sigma_z: vec![p0; n],
        t: state.t,
    })
}

/// Unit-peak Lorentzian with half-width `hwhm`.
pub fn lorentzian(x: f64, hwhm: f64) -> f64 {
    1.0 / (1.0 + (x / hwhm).powi(2))
}

/// Lowers every packet's inversion by `depth * L(D_j - center)` with a
/// unit-peak Lorentzian `L` of half-width `width` (rad/s), clamping the
/// result to [-1, 1]. Coherences are untouched.
pub fn apply_instantaneous_hole(
    state: &SystemState,
    grid: &EnsembleGrid,
    center: f64,
    width: f64,
    depth: f64,
) -> Result<SystemState> {
    state.check_len(grid.len())?;
    if !(0.0..=2.0).contains(&depth) {
        return Err(Error::Domain(format!(
            "hole depth must lie in [0, 2], got {depth}"
        )));
    }
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::Domain(format!(
            "hole width must be positive, got {width}"
        )));
    }
    let mut out = state.clone();
    if depth == 0.0 {
        return Ok(out);
    }
    for (z, det) in out.sigma_z.iter_mut().zip(grid.detunings()) {
        *z = (*z - depth * lorentzian(det - center, width)).clamp(-1.0, 1.0);
    }
    Ok(out)
}

/// Weighted instability figure sum_j rho_j N_rho z_j C_j, using the packets'
/// resting detunings.
pub fn instantaneous_threshold(
    state: &SystemState,
    grid: &EnsembleGrid,
    params: &PhysicalParams,
) -> Result<f64> {
    state.check_len(grid.len())?;
    Ok(grid
        .weighted_cooperativities(params.kappa, params.gamma_perp)
        .iter()
        .zip(&state.sigma_z)
        .map(|(c, z)| c * z)
        .sum())
}
