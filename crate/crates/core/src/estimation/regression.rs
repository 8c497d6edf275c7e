//! Weighted linear regression of the reconstructed phase for the dc field.

use serde::{Deserialize, Serialize};

use super::formulas;
use super::sensitivity::{budget_from_residuals, SensitivityBudget};
use crate::error::{Error, Result};
use crate::physics::{self, MicrowaveDressing};
use crate::signalsim::PhaseSeries;
use crate::species::AtomicSpecies;

pub const MIN_FIT_SAMPLES: usize = 100;

/// Resolution of the residual spectrum used for the noise budget (Hz).
pub const BUDGET_RESOLUTION_HZ: f64 = 10.0;

/// Outcome of `phi(t) = omega t + phi_0` regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcEstimate {
    /// Field whose Larmor frequency equals the fitted slope (T).
    pub b_est: f64,
    /// Fitted phase at t = 0 (rad).
    pub phi_est: f64,
    /// Fitted slope (rad/s).
    pub omega_est: f64,
    /// Standard error of the slope (rad/s).
    pub sigma_omega: f64,
    /// `sigma_omega / gamma(B_est)` (T).
    pub delta_b_dc: f64,
    /// Detector-limited value from the weighted mean SNR, when weights are SNRs (T).
    pub delta_b_detector: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residuals: Vec<f64>,
    /// Rms of the residuals (rad).
    pub delta_phi: f64,
    /// SNR whose uniform-noise bound equals this fit's slope variance.
    pub weighted_mean_snr: f64,
    pub gamma: f64,
    pub n_samples: usize,
    pub tau_s: f64,
    pub fs: f64,
    /// Present for band-limited reconstructions.
    pub budget: Option<SensitivityBudget>,
}

/// Weighted straight-line fit on absolute sample times.
#[derive(Debug, Clone)]
pub(crate) struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub t_mean: f64,
    /// `sum w (t - t_mean)^2`
    pub sxx: f64,
    pub sum_w: f64,
    pub residuals: Vec<f64>,
}

pub(crate) fn line_fit(phase: &PhaseSeries, weights: Option<&[f64]>) -> Result<LineFit> {
    let n = phase.len();
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    // A two-point pre-trend keeps the accumulated sums small.
    let (p0, t_first) = (phase.values[0], phase.time(0));
    let trend = (phase.values[n - 1] - p0) / (phase.time(n - 1) - t_first);
    let y = |i: usize| phase.values[i] - p0 - trend * (phase.time(i) - t_first);

    let (mut sw, mut st, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let wi = w(i);
        sw += wi;
        st += wi * (phase.time(i) - t_first);
        sy += wi * y(i);
    }
    if !(sw > 0.0) {
        return Err(Error::Domain("weights sum to zero".into()));
    }
    let t_mean_rel = st / sw;
    let y_mean = sy / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..n {
        let dt = phase.time(i) - t_first - t_mean_rel;
        sxx += w(i) * dt * dt;
        sxy += w(i) * dt * (y(i) - y_mean);
    }
    if !(sxx > 0.0) {
        return Err(Error::Domain("sample times carry no spread; slope is undetermined".into()));
    }
    let db = sxy / sxx;
    let slope = trend + db;
    let t_mean = t_first + t_mean_rel;
    // line: phi = p0 + trend (t - t_first) + y_mean + db (t - t_mean)
    let intercept = p0 - trend * t_first + y_mean - db * t_mean;
    let residuals = (0..n).map(|i| y(i) - y_mean - db * (phase.time(i) - t_mean)).collect();
    Ok(LineFit { slope, intercept, t_mean, sxx, sum_w: sw, residuals })
}

/// Weighted least-squares fit of the phase to a line, inverted to a field.
///
/// `weights` (or the series' own) are per-sample SNRs; uniform weights give
/// ordinary least squares. Without a reconstruction bandwidth the slope
/// error follows from the regression residuals; with one, from the residual
/// spectrum budget (band-limited samples are not independent).
pub fn fit_dc_phase(
    phase: &PhaseSeries,
    weights: Option<&[f64]>,
    species: &AtomicSpecies,
    dressing: &MicrowaveDressing,
) -> Result<DcEstimate> {
    phase.validate()?;
    let n = phase.len();
    if n < MIN_FIT_SAMPLES {
        return Err(Error::Domain(format!("{n} samples; the dc fit needs at least {MIN_FIT_SAMPLES}")));
    }
    let weights = weights.or(phase.weights.as_deref());
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|x| !(*x >= 0.0)) {
            return Err(Error::Domain("weights must be non-negative and match the phase length".into()));
        }
    }
    let fit = line_fit(phase, weights)?;
    let fs = phase.fs;
    let tau = n as f64 / fs;
    let omega = fit.slope;
    if !(omega > 0.0) {
        return Err(Error::Range(format!("fitted Larmor frequency {omega} rad/s is not positive")));
    }
    let b_est = physics::invert_field(species, omega, dressing, physics::DEFAULT_INVERT_TOL)?;
    let gamma = physics::running_gamma(species, b_est, dressing)?;

    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let delta_phi = (fit.residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt();
    let w_mean = fit.sum_w / n as f64;

    let (sigma_omega, budget) = match phase.enbw_hz {
        Some(enbw) => {
            let rel: Option<Vec<f64>> = weights.map(|ws| ws.iter().map(|x| x / w_mean).collect());
            let shot = weights.map(|_| 2.0 / (fs * w_mean));
            let (budget, _) =
                budget_from_residuals(&fit.residuals, rel.as_deref(), fs, enbw, BUDGET_RESOLUTION_HZ, shot)?;
            let sxx_rel = fit.sxx / w_mean;
            ((budget.total_sq() / sxx_rel).sqrt(), Some(budget))
        }
        None => {
            let s2 = (0..n).map(|i| w(i) * fit.residuals[i].powi(2)).sum::<f64>() / (n as f64 - 2.0);
            ((s2 / fit.sxx).sqrt(), None)
        }
    };

    let bound_scale = 12.0 / (fs * tau.powi(3));
    let (weighted_mean_snr, delta_b_detector) = match weights {
        Some(_) => {
            let snr = fit.sxx * bound_scale;
            (snr, Some((1.0 / fit.sxx).sqrt() / gamma))
        }
        None => (bound_scale / (sigma_omega * sigma_omega), None),
    };

    Ok(DcEstimate {
        b_est,
        phi_est: fit.intercept,
        omega_est: omega,
        sigma_omega,
        delta_b_dc: sigma_omega / gamma,
        delta_b_detector,
        residuals: fit.residuals,
        delta_phi,
        weighted_mean_snr,
        gamma,
        n_samples: n,
        tau_s: tau,
        fs,
        budget,
    })
}

impl DcEstimate {
    /// Estimation-limited sensitivity of the uniform-weight form, from `delta_phi`.
    pub fn sensitivity_from_delta_phi(&self) -> Result<f64> {
        formulas::dc_sensitivity_from_residuals(self.delta_phi, self.tau_s, self.fs, self.gamma)
    }
}
