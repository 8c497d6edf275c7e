//! Line-harmonic interference fit in the phase domain.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use super::linalg::Cholesky;
use super::regression::{line_fit, BUDGET_RESOLUTION_HZ};
use super::sensitivity::budget_from_residuals;
use crate::error::{Error, Result};
use crate::fieldmodel::HarmonicComponent;
use crate::physics::{self, MicrowaveDressing};
use crate::signalsim::PhaseSeries;
use crate::species::AtomicSpecies;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedHarmonic {
    /// Field-domain component: rms amplitude (T) and phase of `sin` (rad).
    pub component: HarmonicComponent,
    pub rms_uncertainty_t: f64,
    pub phase_uncertainty_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicFit {
    pub components: Vec<FittedHarmonic>,
    pub line_frequency_hz: f64,
}

impl HarmonicFit {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.component.rms_t).collect()
    }
}

/// Least squares on `{t, 1, sin(2 pi k f_l t), cos(2 pi k f_l t)}` for the
/// first `n_harmonics` odd `k`.
///
/// A field term `sqrt(2) a sin(2 pi f t + theta)` integrates to the phase term
/// `-(gamma sqrt(2) a / 2 pi f) cos(2 pi f t + theta)`, which is how the
/// coefficients map back to field amplitude and phase.
pub fn fit_harmonics(
    phase: &PhaseSeries,
    line_frequency_hz: f64,
    n_harmonics: usize,
    species: &AtomicSpecies,
    dressing: &MicrowaveDressing,
) -> Result<HarmonicFit> {
    phase.validate()?;
    if !(line_frequency_hz > 0.0) || n_harmonics == 0 {
        return Err(Error::Domain("need a positive line frequency and at least one harmonic".into()));
    }
    let orders: Vec<usize> = (0..n_harmonics).map(|j| 2 * j + 1).collect();
    let duration = phase.duration();
    if duration * line_frequency_hz < 2.0 * n_harmonics as f64 {
        return Err(Error::Conditioning(format!(
            "{duration} s covers too few line cycles for {n_harmonics} harmonics"
        )));
    }
    if orders.iter().any(|&k| k as f64 * line_frequency_hz >= phase.fs / 2.0) {
        return Err(Error::Aliasing("harmonic above the phase-series Nyquist frequency".into()));
    }
    let weights = phase.weights.as_deref();
    let n = phase.len();
    let w_of = |i: usize| weights.map_or(1.0, |w| w[i]);

    let base = line_fit(phase, weights)?;
    let omega = base.slope;
    if !(omega > 0.0) {
        return Err(Error::Range("fitted Larmor frequency is not positive".into()));
    }
    let b_est = physics::invert_field(species, omega, dressing, physics::DEFAULT_INVERT_TOL)?;
    let gamma = physics::running_gamma(species, b_est, dressing)?;

    // Columns: (t - t_mean)/duration, 1, then sin/cos pairs; fit the line residual.
    let p = 2 + 2 * orders.len();
    let row = |i: usize, x: &mut [f64]| {
        let t = phase.time(i);
        x[0] = (t - base.t_mean) / duration;
        x[1] = 1.0;
        for (j, &k) in orders.iter().enumerate() {
            let arg = TAU * k as f64 * line_frequency_hz * t;
            x[2 + 2 * j] = arg.sin();
            x[3 + 2 * j] = arg.cos();
        }
    };
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    let mut x = vec![0.0; p];
    for i in 0..n {
        row(i, &mut x);
        let wi = w_of(i);
        let y = base.residuals[i];
        for a in 0..p {
            xty[a] += wi * x[a] * y;
            for b in 0..=a {
                xtx[a * p + b] += wi * x[a] * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[b * p + a] = xtx[a * p + b];
        }
    }
    let chol = Cholesky::new(&xtx, p, 1e-10)?;
    let beta = chol.solve(&xty);
    let inv = chol.inverse();

    let mut resid = Vec::with_capacity(n);
    for i in 0..n {
        row(i, &mut x);
        let fitted: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
        resid.push(base.residuals[i] - fitted);
    }
    let sum_w = base.sum_w;
    let w_mean = sum_w / n as f64;

    // Per-column noise variance scale.
    let column_var: Vec<f64> = match phase.enbw_hz {
        Some(enbw) => {
            let rel: Option<Vec<f64>> = weights.map(|ws| ws.iter().map(|x| x / w_mean).collect());
            let shot = weights.map(|_| 2.0 / (phase.fs * w_mean));
            let (budget, _) =
                budget_from_residuals(&resid, rel.as_deref(), phase.fs, enbw, BUDGET_RESOLUTION_HZ, shot)?;
            // (X' W X)^-1 with W scaled to mean one is inv * w_mean
            orders
                .iter()
                .map(|&k| budget.model_psd(k as f64 * line_frequency_hz) * phase.fs / 2.0 * w_mean)
                .collect()
        }
        None => {
            let s2 = (0..n).map(|i| w_of(i) * resid[i].powi(2)).sum::<f64>() / (n - p) as f64;
            vec![s2; orders.len()]
        }
    };

    let mut components = Vec::with_capacity(orders.len());
    for (j, &k) in orders.iter().enumerate() {
        let f = k as f64 * line_frequency_hz;
        let (cs, cc) = (beta[2 + 2 * j], beta[3 + 2 * j]);
        let (is, ic) = (2 + 2 * j, 3 + 2 * j);
        let s2 = column_var[j];
        let (vs, vc, vsc) = (s2 * inv[is * p + is], s2 * inv[ic * p + ic], s2 * inv[is * p + ic]);
        let amp = cs.hypot(cc);
        let var_amp = if amp > 0.0 {
            (cs * cs * vs + cc * cc * vc + 2.0 * cs * cc * vsc) / (amp * amp)
        } else {
            0.5 * (vs + vc)
        };
        let to_field = TAU * f / (gamma * SQRT_2);
        let sigma_amp = var_amp.max(0.0).sqrt();
        components.push(FittedHarmonic {
            component: HarmonicComponent::new(f, amp * to_field, cs.atan2(-cc)),
            rms_uncertainty_t: sigma_amp * to_field,
            phase_uncertainty_rad: if amp > 0.0 { sigma_amp / amp } else { std::f64::consts::PI },
        });
    }
    Ok(HarmonicFit { components, line_frequency_hz })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldmodel::{sample_field_trace, FieldModel};
    use crate::rng::{stream, Purpose};
    use crate::signalsim::integrate_larmor_phase;
    use rand_distr::{Distribution, Normal};

    fn simulated(harmonics: Vec<HarmonicComponent>, noise: f64, seed: u64) -> PhaseSeries {
        let mut m = FieldModel::static_field(8.6e-6);
        m.harmonics = harmonics;
        let fs = 2e4;
        let tr = sample_field_trace(&m, fs, 0.32).unwrap();
        let mut p = integrate_larmor_phase(&tr, &AtomicSpecies::rb87(), &MicrowaveDressing::none()).unwrap();
        let mut rng = stream(seed, 0, Purpose::DetectorNoise);
        let d = Normal::new(0.0, noise).unwrap();
        for v in &mut p.values {
            *v += d.sample(&mut rng);
        }
        p
    }

    #[test]
    fn recovers_injected_laboratory_harmonics() {
        let lab = FieldModel::laboratory().harmonics;
        let p = simulated(lab.clone(), 0.05, 2);
        let fit = fit_harmonics(&p, 50.0, 3, &AtomicSpecies::rb87(), &MicrowaveDressing::none()).unwrap();
        for (got, want) in fit.components.iter().zip(&lab) {
            let z = (got.component.rms_t - want.rms_t) / got.rms_uncertainty_t;
            assert!(z.abs() < 4.0, "{} Hz: z = {z}", want.frequency_hz);
            let dphi = (got.component.phase_rad - want.phase_rad + std::f64::consts::PI)
                .rem_euclid(TAU)
                - std::f64::consts::PI;
            assert!(dphi.abs() < 5.0 * got.phase_uncertainty_rad.max(1e-3));
            assert!(got.rms_uncertainty_t > 0.0);
        }
    }

    #[test]
    fn zero_harmonics_fit_consistent_with_zero() {
        let p = simulated(Vec::new(), 0.05, 3);
        let fit = fit_harmonics(&p, 50.0, 3, &AtomicSpecies::rb87(), &MicrowaveDressing::none()).unwrap();
        for c in &fit.components {
            // the amplitude is a Rayleigh magnitude; 2.5 sigma covers ~96 %
            assert!(c.component.rms_t < 3.5 * c.rms_uncertainty_t, "{c:?}");
        }
    }

    #[test]
    fn short_record_is_ill_conditioned() {
        let p = PhaseSeries::new((0..200).map(|i| i as f64 * 0.1).collect(), 1e4);
        let r = fit_harmonics(&p, 50.0, 3, &AtomicSpecies::rb87(), &MicrowaveDressing::none());
        assert!(matches!(r, Err(Error::Conditioning(_))));
    }
}
