//! Discretized inhomogeneous spin distribution and its static collective
//! properties.
//!
//! All rates and frequencies here are angular (rad/s). Conversion from the
//! ordinary frequencies used in configuration files happens at the edges.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * PI;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permeability (T m / A).
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Carbon atom density of diamond (m^-3).
pub const CARBON_DENSITY: f64 = 1.755e29;
/// Electron-spin gyromagnetic ratio used for the dipole estimate (rad s^-1 T^-1).
pub const GYROMAGNETIC_RATIO: f64 = TWO_PI * 28.0e9;

/// Converts an ordinary frequency (Hz) into an angular frequency (rad/s).
#[inline]
pub fn hz(f: f64) -> f64 {
    TWO_PI * f
}

/// Converts an angular frequency (rad/s) into an ordinary frequency (Hz).
#[inline]
pub fn to_hz(omega: f64) -> f64 {
    omega / TWO_PI
}

/// Rates and frequencies of the coupled cavity/spin system (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalParams {
    /// Cavity angular frequency. Only carried as metadata, the simulation
    /// runs in the frame rotating at the cavity frequency.
    pub omega_c: f64,
    /// Cavity field loss rate (half-width at half-maximum).
    pub kappa: f64,
    /// Single-spin decoherence rate.
    pub gamma_perp: f64,
    /// Collective coupling strength.
    pub g_coll: f64,
    /// Single-spin coupling, used only to estimate the spin number.
    pub g0: Option<f64>,
    /// Full-width at half-maximum of the inhomogeneous distribution.
    pub w: f64,
    /// q-Gaussian shape parameter.
    pub q: f64,
    /// Center of the spin distribution relative to the cavity frame.
    pub omega0: f64,
    /// Hole-filling relaxation rate.
    pub j_fill: f64,
    /// Constant cavity drive (field units per second).
    pub eta: f64,
    /// Cavity detuning from the frame; zero in the cavity frame.
    pub cavity_detuning: f64,
    /// Number of numerical spin packets.
    pub n_rho: usize,
}

impl PhysicalParams {
    /// Parameters of the NV/cavity system in the reference experiment.
    pub fn reference() -> Self {
        Self {
            omega_c: hz(3.1e9),
            kappa: hz(418e3),
            gamma_perp: hz(0.2e6),
            g_coll: hz(4.6e6),
            g0: Some(hz(2.0)),
            w: hz(9.2e6),
            q: 1.39,
            omega0: 0.0,
            j_fill: hz(16e3),
            eta: DEFAULT_ETA,
            cavity_detuning: 0.0,
            n_rho: 501,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa", self.kappa),
            ("gamma_perp", self.gamma_perp),
            ("g_coll", self.g_coll),
            ("w", self.w),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("{name} must be positive, got {v}")));
            }
        }
        check_q(self.q)?;
        if !(self.j_fill.is_finite() && self.j_fill >= 0.0) {
            return Err(Error::Domain(format!(
                "j_fill must be >= 0, got {}",
                self.j_fill
            )));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::Domain(format!("eta must be >= 0, got {}", self.eta)));
        }
        if self.n_rho == 0 {
            return Err(Error::Domain("n_rho must be at least 1".into()));
        }
        if let Some(g0) = self.g0 {
            if !(g0.is_finite() && g0 > 0.0) {
                return Err(Error::Domain(format!("g0 must be positive, got {g0}")));
            }
        }
        if !self.omega0.is_finite() || !self.cavity_detuning.is_finite() {
            return Err(Error::Domain(
                "omega0 and cavity_detuning must be finite".into(),
            ));
        }
        Ok(())
    }

    /// Coupling of a single numerical packet, g_coll / sqrt(N_rho).
    pub fn packet_coupling(&self) -> f64 {
        self.g_coll / (self.n_rho as f64).sqrt()
    }
}

/// Default constant drive (field units per second).
///
/// Sets the drive-only cavity amplitude eta/kappa to about 1e-4 of the first
/// superradiant peak of the reference scenario (p0 = 0.3).
pub const DEFAULT_ETA: f64 = 1.2e3;

fn check_q(q: f64) -> Result<()> {
    if !(q > 1.0 && q < 3.0) {
        return Err(Error::Domain(format!("q must satisfy 1 < q < 3, got {q}")));
    }
    Ok(())
}

/// One numerical spin packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinPacket {
    /// Detuning from the frame (rad/s).
    pub detuning: f64,
    /// Normalized weight rho_j.
    pub weight: f64,
    /// Coupling g_rho (rad/s).
    pub coupling: f64,
}

/// Equally spaced spin packets spanning `center ± span`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleGrid {
    pub packets: Vec<SpinPacket>,
    pub span: f64,
    pub center: f64,
    /// FWHM of the underlying distribution (rad/s).
    pub fwhm: f64,
}

impl EnsembleGrid {
    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn detunings(&self) -> impl Iterator<Item = f64> + '_ {
        self.packets.iter().map(|p| p.detuning)
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.packets.iter().map(|p| p.weight)
    }

    /// Packet spacing, zero for a single-packet grid.
    pub fn spacing(&self) -> f64 {
        if self.packets.len() < 2 {
            0.0
        } else {
            2.0 * self.span / (self.packets.len() - 1) as f64
        }
    }

    /// Per-packet cooperativity factors C_j for the given loss rates.
    pub fn cooperativities(&self, kappa: f64, gamma_perp: f64) -> Vec<f64> {
        let n = self.packets.len();
        self.packets
            .iter()
            .map(|p| packet_cooperativity(p, n, kappa, gamma_perp).per_packet)
            .collect()
    }

    /// Weighted cooperativities rho_j N_rho C_j, whose sum is the ensemble C.
    pub fn weighted_cooperativities(&self, kappa: f64, gamma_perp: f64) -> Vec<f64> {
        let n = self.packets.len();
        self.packets
            .iter()
            .map(|p| packet_cooperativity(p, n, kappa, gamma_perp).weighted)
            .collect()
    }
}

/// Peak-normalized q-Gaussian profile with full-width at half-maximum `w`.
///
/// The width parameter is `delta_q = (w/2) sqrt((q-1)/(2^(q-1)-1))`, which puts
/// the half-maximum points at `omega0 ± w/2`.
pub fn q_gaussian_density(omega: f64, omega0: f64, w: f64, q: f64) -> Result<f64> {
    check_q(q)?;
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::Domain(format!("width must be positive, got {w}")));
    }
    Ok(q_gaussian_unchecked(omega - omega0, w, q))
}

fn q_gaussian_unchecked(x: f64, w: f64, q: f64) -> f64 {
    let delta_q = 0.5 * w * ((q - 1.0) / ((q - 1.0).exp2() - 1.0)).sqrt();
    let base = 1.0 - (1.0 - q) * (x / delta_q).powi(2);
    if base <= 0.0 {
        0.0
    } else {
        base.powf(1.0 / (1.0 - q))
    }
}

/// Default half-width of the detuning grid in units of the FWHM.
pub const DEFAULT_SPAN_FACTOR: f64 = 2.5;

/// Discretizes the q-Gaussian into `params.n_rho` equally spaced packets on
/// `[omega0 - span, omega0 + span]`.
pub fn discretize(params: &PhysicalParams, span: f64) -> Result<EnsembleGrid> {
    if params.n_rho == 0 {
        return Err(Error::Domain("n_rho must be at least 1".into()));
    }
    if !(span.is_finite() && span > 0.0) {
        return Err(Error::Domain(format!("span must be positive, got {span}")));
    }
    check_q(params.q)?;
    if !(params.w.is_finite() && params.w > 0.0) {
        return Err(Error::Domain(format!(
            "w must be positive, got {}",
            params.w
        )));
    }
    let n = params.n_rho;
    let coupling = params.packet_coupling();
    let center = params.omega0;

    // Offsets are built from integer differences so that x_{n-1-j} = -x_j exactly.
    let offsets: Vec<f64> = if n == 1 {
        vec![0.0]
    } else {
        let denom = (n - 1) as f64;
        (0..n)
            .map(|j| span * ((2 * j) as f64 - denom) / denom)
            .collect()
    };
    let density: Vec<f64> = offsets
        .iter()
        .map(|&x| q_gaussian_unchecked(x, params.w, params.q))
        .collect();
    let total: f64 = density.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Domain(
            "distribution has no weight on the grid".into(),
        ));
    }
    let packets = offsets
        .iter()
        .zip(&density)
        .map(|(&x, &d)| SpinPacket {
            detuning: center + x,
            weight: d / total,
            coupling,
        })
        .collect();
    Ok(EnsembleGrid {
        packets,
        span,
        center,
        fwhm: params.w,
    })
}

/// Cooperativity of one packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketCooperativity {
    /// C_j = g_rho^2 / (kappa (gamma_perp + Delta_j^2 / gamma_perp)).
    pub per_packet: f64,
    /// rho_j N_rho C_j, the packet's share of the ensemble cooperativity.
    pub weighted: f64,
}

pub fn packet_cooperativity(
    packet: &SpinPacket,
    n_rho: usize,
    kappa: f64,
    gamma_perp: f64,
) -> PacketCooperativity {
    let lorentz = 1.0 / (gamma_perp + packet.detuning * packet.detuning / gamma_perp);
    let per_packet = packet.coupling * packet.coupling / kappa * lorentz;
    PacketCooperativity {
        per_packet,
        weighted: packet.weight * n_rho as f64 * per_packet,
    }
}

/// Ensemble cooperativity and the effective linewidth it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cooperativity {
    pub c: f64,
    /// Gamma = g_coll^2 / (kappa C), rad/s.
    pub gamma: f64,
}

pub fn ensemble_cooperativity(grid: &EnsembleGrid, params: &PhysicalParams) -> Cooperativity {
    let c: f64 = grid
        .weighted_cooperativities(params.kappa, params.gamma_perp)
        .iter()
        .sum();
    Cooperativity {
        c,
        gamma: params.g_coll * params.g_coll / (params.kappa * c),
    }
}

/// Nearest-neighbour dipolar coupling estimate for a spin concentration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DipoleEstimate {
    /// Spin number density (m^-3).
    pub density: f64,
    /// Typical spin distance n^(-1/3) (m).
    pub distance: f64,
    /// Coupling J_n (rad/s).
    pub coupling: f64,
}

/// Estimates J_n = mu0 gamma^2 hbar / (4 pi r^3) for `concentration_ppm`
/// spins per carbon atom.
pub fn nearest_neighbor_coupling(concentration_ppm: f64) -> Result<DipoleEstimate> {
    if !(concentration_ppm.is_finite() && concentration_ppm > 0.0) {
        return Err(Error::Domain(format!(
            "concentration must be positive, got {concentration_ppm}"
        )));
    }
    let density = concentration_ppm * 1e-6 * CARBON_DENSITY;
    let distance = density.powf(-1.0 / 3.0);
    let coupling =
        MU0 / (4.0 * PI) * GYROMAGNETIC_RATIO * GYROMAGNETIC_RATIO * HBAR / distance.powi(3);
    Ok(DipoleEstimate {
        density,
        distance,
        coupling,
    })
}

/// Number of spins implied by the collective and single-spin couplings.
pub fn derive_spin_count(g_coll: f64, g0: f64) -> Result<f64> {
    if !(g0.is_finite() && g0 > 0.0) {
        return Err(Error::Domain(format!("g0 must be positive, got {g0}")));
    }
    Ok((g_coll / g0).powi(2))
}
