//! Residual phase-noise budget: a `a/f^2 + S_w` fit to the residual spectrum.

use serde::{Deserialize, Serialize};

use crate::dsp::{power_spectrum, SpectrumEstimate};
use crate::error::{Error, Result};

/// Split of the residual phase variance into shot and field contributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityBudget {
    /// Full-bandwidth equivalent shot-noise variance `S_shot fs / 2` (rad^2).
    pub delta_phi_shot_sq: f64,
    /// Field random-walk term `a tau` (rad^2).
    pub delta_phi_field_sq: f64,
    /// Where `a / f^2` meets `S_shot` (Hz).
    pub corner_frequency_hz: f64,
    /// White phase-noise level (rad^2/Hz).
    pub s_shot: f64,
    /// Coefficient of the `1/f^2` term (rad^2 Hz).
    pub field_coefficient: f64,
}

impl SensitivityBudget {
    /// Quadrature sum of the two contributions.
    pub fn total_sq(&self) -> f64 {
        self.delta_phi_shot_sq + self.delta_phi_field_sq
    }

    pub fn model_psd(&self, f: f64) -> f64 {
        self.field_coefficient / (f * f) + self.s_shot
    }
}

/// Weighted least-squares fit of `a / f^2 + s` to spectrum bins in
/// `[f_lo, f_hi]`, weights refined from the model (Welch bins have roughly
/// constant relative scatter). Returns `(a, s)`, both clamped at zero.
pub fn fit_phase_noise_spectrum(spectrum: &SpectrumEstimate, f_lo: f64, f_hi: f64) -> Result<(f64, f64)> {
    let bins: Vec<(f64, f64)> = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.psd)
        .filter(|(f, _)| **f >= f_lo && **f <= f_hi && **f > 0.0)
        .map(|(f, p)| (1.0 / (f * f), *p))
        .collect();
    if bins.len() < 3 {
        return Err(Error::Calibration(format!(
            "only {} spectrum bins in [{f_lo}, {f_hi}] Hz",
            bins.len()
        )));
    }
    let mut weights: Vec<f64> = bins.iter().map(|(_, p)| 1.0 / (p * p).max(1e-300)).collect();
    let (mut a, mut s) = (0.0, 0.0);
    for _ in 0..4 {
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((x, y), w) in bins.iter().zip(&weights) {
            sw += w;
            sx += w * x;
            sy += w * y;
            sxx += w * x * x;
            sxy += w * x * y;
        }
        let det = sw * sxx - sx * sx;
        a = if det > 0.0 { (sw * sxy - sx * sy) / det } else { 0.0 };
        s = (sy - a * sx) / sw;
        if a < 0.0 {
            a = 0.0;
            s = sy / sw;
        }
        if s < 0.0 {
            s = 0.0;
            a = sxy / sxx;
        }
        weights = bins.iter().map(|(x, _)| 1.0 / (a * x + s).powi(2).max(1e-300)).collect();
    }
    Ok((a, s))
}

/// Fit of `a / f^2` alone above a known white level `s`.
pub fn fit_field_coefficient(spectrum: &SpectrumEstimate, f_lo: f64, f_hi: f64, s: f64) -> Result<f64> {
    let bins: Vec<(f64, f64)> = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.psd)
        .filter(|(f, _)| **f >= f_lo && **f <= f_hi && **f > 0.0)
        .map(|(f, p)| (1.0 / (f * f), *p))
        .collect();
    if bins.len() < 2 {
        return Err(Error::Calibration(format!("only {} spectrum bins in [{f_lo}, {f_hi}] Hz", bins.len())));
    }
    let mut weights: Vec<f64> = bins.iter().map(|(_, p)| 1.0 / (p * p).max(1e-300)).collect();
    let mut a = 0.0;
    for _ in 0..4 {
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for ((x, y), w) in bins.iter().zip(&weights) {
            sxx += w * x * x;
            sxy += w * x * (y - s);
        }
        a = (sxy / sxx).max(0.0);
        weights = bins.iter().map(|(x, _)| 1.0 / (a * x + s).powi(2).max(1e-300)).collect();
    }
    Ok(a)
}

/// Budget from fit residuals of a band-limited reconstruction.
///
/// `relative_weights` (mean one) whiten a heteroskedastic residual so the
/// budget refers to the mean weight. The spectrum is fitted between a few
/// resolution bins and 0.35 ENBW, where the forward-backward passband is flat.
/// A narrow band may end below the corner, leaving the white level
/// unresolved; `known_shot` then supplies it (for SNR weights it is
/// `2 / (fs mean(w))`).
pub fn budget_from_residuals(
    residuals: &[f64],
    relative_weights: Option<&[f64]>,
    fs: f64,
    enbw_hz: f64,
    resolution_hz: f64,
    known_shot: Option<f64>,
) -> Result<(SensitivityBudget, SpectrumEstimate)> {
    let u: Vec<f64> = match relative_weights {
        Some(w) => residuals.iter().zip(w).map(|(r, w)| r * w.sqrt()).collect(),
        None => residuals.to_vec(),
    };
    let tau = residuals.len() as f64 / fs;
    let resolution = resolution_hz.max(4.0 / tau);
    let spectrum = power_spectrum(&u, fs, resolution)?;
    let f_lo = 2.0 * spectrum.resolution_hz;
    let f_hi = 0.35 * enbw_hz;
    let (a, s) = match known_shot {
        Some(s) => (fit_field_coefficient(&spectrum, f_lo, f_hi, s)?, s),
        None => fit_phase_noise_spectrum(&spectrum, f_lo, f_hi)?,
    };
    let budget = SensitivityBudget {
        delta_phi_shot_sq: s * fs / 2.0,
        delta_phi_field_sq: a * tau,
        corner_frequency_hz: if s > 0.0 { (a / s).sqrt() } else { f64::INFINITY },
        s_shot: s,
        field_coefficient: a,
    };
    Ok((budget, spectrum))
}
