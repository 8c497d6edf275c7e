//! Phase reconstruction: zero-phase bandpass, analytic signal, unwrapping,
//! and spectral estimators.

pub mod filter;
pub mod hilbert;
pub mod spectrum;

pub use filter::{bandpass_zero_phase, Bandpass, FilterSpec};
pub use hilbert::{analytic_signal, unwrap_phase, AnalyticRecord};
pub use spectrum::{carson_bandwidth, power_spectrum, spectrogram, SpectrumEstimate, Spectrogram};
