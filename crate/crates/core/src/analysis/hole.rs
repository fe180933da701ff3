use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleGrid;
use crate::error::{Error, Result};

/// Dips shallower than this are treated as absent.
pub const HOLE_NOISE_FLOOR: f64 = 1e-4;

/// Spectral hole in an inversion profile. Frequencies are rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoleProfile {
    /// Reference inversion minus minimum inversion.
    pub depth: f64,
    /// Full width of the dip at half depth.
    pub width: f64,
    /// Detuning of the deepest packet.
    pub center: f64,
    /// Mean inversion of the packets used as reference.
    pub reference: f64,
}

/// Locates the spectral hole in `sigma_z` over the packets of `grid`.
pub fn hole_profile(sigma_z: &[f64], grid: &EnsembleGrid) -> Result<HoleProfile> {
    let detunings: Vec<f64> = grid.detunings().collect();
    hole_profile_from(sigma_z, &detunings, grid.center, grid.fwhm)
}

/// As [`hole_profile`] with the grid given explicitly. The reference level is
/// the mean inversion of packets further than `0.75 w` from `center`.
pub fn hole_profile_from(
    sigma_z: &[f64],
    detunings: &[f64],
    center: f64,
    w: f64,
) -> Result<HoleProfile> {
    if sigma_z.len() != detunings.len() || sigma_z.is_empty() {
        return Err(Error::Structure(format!(
            "{} inversions for {} detunings",
            sigma_z.len(),
            detunings.len()
        )));
    }
    let outer: Vec<f64> = sigma_z
        .iter()
        .zip(detunings)
        .filter(|(_, d)| (*d - center).abs() > 0.75 * w)
        .map(|(z, _)| *z)
        .collect();
    if outer.is_empty() {
        return Err(Error::NotFound(
            "no packets outside the reference band".into(),
        ));
    }
    let reference = outer.iter().sum::<f64>() / outer.len() as f64;
    let (imin, &zmin) = sigma_z
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let depth = reference - zmin;
    if !(depth > HOLE_NOISE_FLOOR) {
        return Err(Error::NotFound(format!(
            "no dip below the reference (depth {depth:e})"
        )));
    }
    let level = reference - 0.5 * depth;
    let edge = |dir: isize| -> f64 {
        let mut i = imin as isize;
        loop {
            let next = i + dir;
            if next < 0 || next as usize >= sigma_z.len() {
                return detunings[i as usize];
            }
            let (zi, zn) = (sigma_z[i as usize], sigma_z[next as usize]);
            if zn >= level {
                let frac = (level - zi) / (zn - zi);
                let di = detunings[i as usize];
                return di + frac * (detunings[next as usize] - di);
            }
            i = next;
        }
    };
    Ok(HoleProfile {
        depth,
        width: edge(1) - edge(-1),
        center: detunings[imin],
        reference,
    })
}
