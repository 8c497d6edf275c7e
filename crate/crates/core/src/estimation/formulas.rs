//! Closed-form noise, sensitivity and bound expressions.
//!
//! `gamma` arguments are gyromagnetic ratios in rad s^-1 T^-1; callers pass
//! the running value at the field of interest.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::dsp::SpectrumEstimate;
use crate::error::{Error, Result};

/// Time after which the accumulated field-noise phase exceeds pi/2 at
/// `n_sigma` confidence: `pi^2 / (2 n^2 gamma^2 S_BB)`.
pub fn critical_time(n_sigma: f64, s_bb: f64, gamma: f64) -> Result<f64> {
    if !(s_bb > 0.0) || !(n_sigma > 0.0) {
        return Err(Error::Domain("critical time needs S_BB > 0 and n > 0".into()));
    }
    Ok(PI * PI / (2.0 * n_sigma * n_sigma * gamma * gamma * s_bb))
}

/// Standard deviation of the Ramsey phase after `tau` in white field noise:
/// `gamma sqrt(S_BB tau / 2)`.
pub fn ramsey_phase_spread(s_bb: f64, tau: f64, gamma: f64) -> f64 {
    gamma.abs() * (s_bb * tau / 2.0).sqrt()
}

/// Outcome of a projective Ramsey readout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamseyReadout {
    pub inferred_rad: f64,
    pub hop: bool,
}

/// Principal-fringe inference `arcsin(sin phi)`; a hop is flagged when the
/// phase, centred into (-pi, pi], lies beyond pi/2 in magnitude.
pub fn ramsey_project(phi: f64) -> RamseyReadout {
    if phi.abs() < FRAC_PI_2 {
        return RamseyReadout { inferred_rad: phi, hop: false };
    }
    let centred = phi - TAU * ((phi + PI) / TAU).floor();
    RamseyReadout { inferred_rad: phi.sin().asin(), hop: centred.abs() > FRAC_PI_2 }
}

/// Passband limits implied by a 6 dB in-band threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassbandBudget {
    /// Widest noise bandwidth keeping the in-band SNR at threshold (Hz).
    pub max_enbw_hz: f64,
    /// Full-bandwidth SNR threshold for the band asked about (dB).
    pub threshold_snr_db: Option<f64>,
}

pub const IN_BAND_THRESHOLD_DB: f64 = 6.0;

/// `max ENBW = (fs/2) SNR / 10^(3/5)`; with `band_hz`, the threshold
/// `6 dB + 10 log10(2 band / fs)`.
pub fn passband_budget(snr: f64, fs: f64, band_hz: Option<f64>) -> Result<PassbandBudget> {
    if !(snr > 0.0) || !(fs > 0.0) {
        return Err(Error::Domain("passband budget needs SNR > 0 and fs > 0".into()));
    }
    Ok(PassbandBudget {
        max_enbw_hz: fs / 2.0 * snr / 10f64.powf(IN_BAND_THRESHOLD_DB / 10.0),
        threshold_snr_db: band_hz.map(|b| threshold_snr_db(b, fs)),
    })
}

pub fn threshold_snr_db(band_hz: f64, fs: f64) -> f64 {
    IN_BAND_THRESHOLD_DB + 10.0 * (2.0 * band_hz / fs).log10()
}

/// One-sided phase-noise PSD `gamma^2 S_BB / (4 pi^2 f^2) + 2 / (fs SNR)` (rad^2/Hz).
pub fn phase_noise_psd_model(f: f64, s_bb: f64, snr: f64, fs: f64, gamma: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::Domain("phase noise model needs f > 0".into()));
    }
    Ok(field_phase_coefficient(s_bb, gamma) / (f * f) + shot_phase_level(snr, fs))
}

/// Coefficient `a` of the `a / f^2` field term.
pub fn field_phase_coefficient(s_bb: f64, gamma: f64) -> f64 {
    gamma * gamma * s_bb / (4.0 * PI * PI)
}

/// White shot-noise phase level `2 / (fs SNR)`.
pub fn shot_phase_level(snr: f64, fs: f64) -> f64 {
    2.0 / (fs * snr)
}

/// Frequency where the two terms of the phase-noise model are equal.
pub fn corner_frequency(s_bb: f64, snr: f64, fs: f64, gamma: f64) -> f64 {
    (field_phase_coefficient(s_bb, gamma) / shot_phase_level(snr, fs)).sqrt()
}

/// `sqrt(integral_0^f_max S df)` by the trapezoid rule on the spectrum's bins.
pub fn rms_noise_amplitude(spectrum: &SpectrumEstimate, f_max: f64) -> Result<f64> {
    let f = &spectrum.frequencies;
    let last = f.last().copied().unwrap_or(0.0);
    if f.is_empty() || f[0] > 0.0 + 1e-12 || last < f_max * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "spectrum covers [{}, {last}] Hz, not [0, {f_max}] Hz",
            f.first().copied().unwrap_or(f64::NAN)
        )));
    }
    let mut total = 0.0;
    for k in 1..f.len() {
        if f[k - 1] >= f_max {
            break;
        }
        let hi = f[k].min(f_max);
        let p_hi = if f[k] > f_max {
            spectrum.psd[k - 1] + (spectrum.psd[k] - spectrum.psd[k - 1]) * (hi - f[k - 1]) / (f[k] - f[k - 1])
        } else {
            spectrum.psd[k]
        };
        total += 0.5 * (spectrum.psd[k - 1] + p_hi) * (hi - f[k - 1]);
    }
    Ok(total.sqrt())
}

/// `(2 delta_phi / gamma tau^1.5) sqrt(3 / fs)`.
pub fn dc_sensitivity_from_residuals(delta_phi: f64, tau: f64, fs: f64, gamma: f64) -> Result<f64> {
    if !(tau > 0.0) || !(fs > 0.0) {
        return Err(Error::Domain("sensitivity needs tau > 0 and fs > 0".into()));
    }
    Ok(2.0 * delta_phi / (gamma.abs() * tau.powf(1.5)) * (3.0 / fs).sqrt())
}

/// `(1 / gamma tau^1.5) sqrt(12 / (fs SNR))`.
pub fn dc_sensitivity_from_snr(snr: f64, tau: f64, fs: f64, gamma: f64) -> Result<f64> {
    if !(snr > 0.0) {
        return Err(Error::Domain("sensitivity needs SNR > 0".into()));
    }
    if !(tau > 0.0) || !(fs > 0.0) {
        return Err(Error::Domain("sensitivity needs tau > 0 and fs > 0".into()));
    }
    Ok((12.0 / (fs * snr)).sqrt() / (gamma.abs() * tau.powf(1.5)))
}

/// ac sensitivity `2 pi f / (gamma sqrt(fs tau SNR))` (T), and the
/// bandwidth-normalised value times sqrt(tau) (T/sqrt(Hz)).
pub fn ac_sensitivity(f: f64, snr: f64, fs: f64, tau: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(f >= 0.0) || f >= fs / 2.0 {
        return Err(Error::Domain(format!("ac sensitivity needs 0 <= f < fs/2, got {f}")));
    }
    if !(snr > 0.0) || !(tau > 0.0) {
        return Err(Error::Domain("ac sensitivity needs SNR > 0 and tau > 0".into()));
    }
    let db = TAU * f / (gamma.abs() * (fs * tau * snr).sqrt());
    Ok((db, db * tau.sqrt()))
}

/// Cramér-Rao bound on the variance of a single-tone frequency estimate,
/// `12 fs^2 / (SNR N (N^2 - 1))` in (rad/s)^2, or the large-N form
/// `12 fs^2 / (SNR N^3)`.
pub fn crlb_frequency_variance(snr: f64, n: usize, fs: f64, large_n: bool) -> Result<f64> {
    if n < 3 {
        return Err(Error::Domain("CRLB needs at least three samples".into()));
    }
    if !(snr > 0.0) {
        return Err(Error::Domain("CRLB needs SNR > 0".into()));
    }
    let n = n as f64;
    let per_sample = if large_n { 12.0 / (snr * n * n * n) } else { 12.0 / (snr * n * (n * n - 1.0)) };
    Ok(per_sample * fs * fs)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Normal};

    const GAMMA: f64 = TAU * 7.02369e9;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn critical_time_scaling_and_values() {
        let t100 = critical_time(2.0, 1e-20, GAMMA).unwrap();
        let t250 = critical_time(2.0, 6.25e-20, GAMMA).unwrap();
        // independent arithmetic: pi^2 / (8 gamma^2 S)
        assert!(rel(t100, 9.869604401089358 / (8.0 * GAMMA * GAMMA * 1e-20)) < 1e-12);
        assert!(rel(t250, 0.010136) < 1e-3, "{t250}");
        assert!(rel(critical_time(4.0, 1e-20, GAMMA).unwrap(), t100 / 4.0) < 1e-12);
        // phase spread at tau_c is pi/(2n)
        assert!(rel(ramsey_phase_spread(1e-20, t100, GAMMA), PI / 4.0) < 1e-12);
    }

    #[test]
    fn ramsey_readout() {
        assert_eq!(ramsey_project(0.3), RamseyReadout { inferred_rad: 0.3, hop: false });
        let r = ramsey_project(PI - 0.3);
        assert!((r.inferred_rad - 0.3).abs() < 1e-12 && r.hop);
        let r = ramsey_project(TAU + 0.2);
        assert!((r.inferred_rad - 0.2).abs() < 1e-12 && !r.hop);
        let r = ramsey_project(-2.0);
        assert!(r.hop);
    }

    #[test]
    fn passband_values() {
        let fs = 5e6;
        let b = passband_budget(10f64.powf(0.6), fs, None).unwrap();
        assert!(rel(b.max_enbw_hz, fs / 2.0) < 1e-12);
        let b = passband_budget(db_to_linear(-11.1), fs, Some(5e3)).unwrap();
        assert!(rel(b.max_enbw_hz, 48.8e3) < 0.01);
        assert!((b.threshold_snr_db.unwrap() + 21.0).abs() < 0.21);
    }

    #[test]
    fn phase_noise_model_limits() {
        let shot = shot_phase_level(0.5, 1e6);
        assert_eq!(phase_noise_psd_model(10.0, 0.0, 0.5, 1e6, GAMMA).unwrap(), shot);
        let far = phase_noise_psd_model(1e9, 6.25e-20, 0.5, 1e6, GAMMA).unwrap();
        assert!(rel(far, shot) < 1e-6);
        let fc = corner_frequency(6.25e-20, db_to_linear(-11.1), 5e6, GAMMA);
        let at = phase_noise_psd_model(fc, 6.25e-20, db_to_linear(-11.1), 5e6, GAMMA).unwrap();
        assert!(rel(at, 2.0 * shot_phase_level(db_to_linear(-11.1), 5e6)) < 1e-12);
        assert!(fc > 600.0 && fc < 1000.0, "{fc}");
    }

    #[test]
    fn sensitivity_values_and_identities() {
        let s = dc_sensitivity_from_snr(db_to_linear(-20.2), 1.0, 5e6, GAMMA).unwrap();
        assert!(rel(s, 359e-15) < 0.01, "{s}");
        let s = dc_sensitivity_from_snr(1.0, 0.1, 1e6, GAMMA).unwrap();
        assert!(rel(s, 2.482e-12) < 1e-3, "{s}");
        let r = dc_sensitivity_from_residuals(1.0, 0.1, 1e6, GAMMA).unwrap();
        assert!(rel(r, s) < 1e-12);
        let a = dc_sensitivity_from_residuals(0.01, 1.0, 1e6, GAMMA).unwrap();
        let b = dc_sensitivity_from_residuals(0.01, 4.0, 1e6, GAMMA).unwrap();
        assert!(rel(a / b, 8.0) < 1e-12);
    }

    #[test]
    fn ac_values() {
        let snr = db_to_linear(-11.1);
        let (_, norm) = ac_sensitivity(1.0, snr, 5e6, 1.0, GAMMA).unwrap();
        assert!(rel(norm, 230e-15) < 0.01, "{norm}");
        let (_, n50) = ac_sensitivity(50.0, snr, 5e6, 0.3, GAMMA).unwrap();
        assert!(rel(n50, 50.0 * norm) < 1e-12);
        assert_eq!(ac_sensitivity(0.0, snr, 5e6, 1.0, GAMMA).unwrap().0, 0.0);
        assert!(ac_sensitivity(3e6, snr, 5e6, 1.0, GAMMA).is_err());
    }

    #[test]
    fn crlb_forms_agree_and_convert() {
        let exact = crlb_frequency_variance(0.3, 100_000, 1e6, false).unwrap();
        let large = crlb_frequency_variance(0.3, 100_000, 1e6, true).unwrap();
        assert!(rel(exact, large) < 1e-4);
        let fs = 5e6;
        let tau = 1.0;
        let snr = db_to_linear(-20.2);
        let sb = crlb_frequency_variance(snr, (fs * tau) as usize, fs, true).unwrap().sqrt() / GAMMA;
        assert!(rel(sb, dc_sensitivity_from_snr(snr, tau, fs, GAMMA).unwrap()) < 1e-12);
    }

    #[test]
    fn rms_amplitude_of_flat_spectrum() {
        let spec = SpectrumEstimate {
            frequencies: (0..=1000).map(|k| k as f64 * 0.5).collect(),
            psd: vec![6.25e-20; 1001],
            resolution_hz: 0.5,
            window: "test".into(),
            segments: 1,
        };
        let d = rms_noise_amplitude(&spec, 300.0).unwrap();
        assert!(rel(d, 250e-12 * 300f64.sqrt()) < 1e-12);
        assert!(rel(d, 4.33e-9) < 1e-3);
        assert!(rms_noise_amplitude(&spec, 600.0).is_err());
        let zero = SpectrumEstimate { psd: vec![0.0; 1001], ..spec };
        assert_eq!(rms_noise_amplitude(&zero, 300.0).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_tail_oracle() {
        let n = Normal::new(0.0, 1.0).unwrap();
        assert!((2.0 * n.cdf(-2.0) - 0.0455).abs() < 1e-4);
    }
}
