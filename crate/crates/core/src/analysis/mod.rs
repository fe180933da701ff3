//! Observables extracted from cavity traces: pulses and delays, rise times,
//! spectra and linewidths, and spectral-hole geometry.

mod fit;
mod hole;
mod pulses;
mod series;
mod spectrum;
mod stats;

pub use fit::{
    fit_gaussian, fit_rise, levenberg_marquardt, GaussianFit, LmOptions, LmReport, RiseFit,
};
pub use hole::{hole_profile, hole_profile_from, HoleProfile, HOLE_NOISE_FLOOR};
pub use pulses::{
    detect_pulses, first_revival_delay, revival_delay, valley_ratios, PulseFeature,
    DEFAULT_MIN_PROMINENCE, DEFAULT_MIN_SEPARATION,
};
pub use series::{SigmaZSnapshots, TimeSeries};
pub use spectrum::{
    demodulate, fit_lorentzian, power_spectrum, pulse_bandwidth, sliding_spectrum, SlidingFit,
    Spectrum, SpectrumFit, Window,
};
pub use stats::{linear_fit, spearman, LinearFit};
