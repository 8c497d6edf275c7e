//! Scalar magnetic field realisations: static bias, white Gaussian noise,
//! line-synchronous harmonics with grid drift, and the feed-forward
//! compensation field with first-order actuator dynamics.

use std::f64::consts::{SQRT_2, TAU};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::HarmonicFit;
use crate::rng::{self, Purpose};

/// One sinusoidal field component, amplitude stored as rms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicComponent {
    pub frequency_hz: f64,
    pub rms_t: f64,
    pub phase_rad: f64,
}

impl HarmonicComponent {
    pub fn new(frequency_hz: f64, rms_t: f64, phase_rad: f64) -> Self {
        Self { frequency_hz, rms_t, phase_rad }
    }

    pub fn peak_t(&self) -> f64 {
        SQRT_2 * self.rms_t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    pub b0_t: f64,
    /// White-noise amplitude spectral density s_B (T/sqrt(Hz)); S_BB = s_B^2 one-sided.
    pub noise_asd_t_rthz: f64,
    pub harmonics: Vec<HarmonicComponent>,
    pub line_frequency_hz: f64,
    /// Grid frequency offset (Hz), applied to each harmonic times its order.
    pub line_drift_hz: f64,
    pub seed: u64,
}

impl FieldModel {
    pub fn static_field(b0_t: f64) -> Self {
        Self {
            b0_t,
            noise_asd_t_rthz: 0.0,
            harmonics: Vec::new(),
            line_frequency_hz: 50.0,
            line_drift_hz: 0.0,
            seed: 0,
        }
    }

    /// Unshielded laboratory: 86.0121261 uT bias, 250 pT/sqrt(Hz) floor and
    /// 50/150/250 Hz line harmonics of 41.92/10.88/2.0 nT rms. Harmonic phases
    /// are not known from measurement; fixed arbitrary values are used.
    pub fn laboratory() -> Self {
        Self {
            b0_t: 86.0121261e-6,
            noise_asd_t_rthz: 250e-12,
            harmonics: vec![
                HarmonicComponent::new(50.0, 41.92e-9, 0.4),
                HarmonicComponent::new(150.0, 10.88e-9, 1.9),
                HarmonicComponent::new(250.0, 2.0e-9, -2.2),
            ],
            line_frequency_hz: 50.0,
            line_drift_hz: 0.0,
            seed: 0,
        }
    }

    pub fn noise_psd(&self) -> f64 {
        self.noise_asd_t_rthz * self.noise_asd_t_rthz
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b0_t.is_finite() {
            return Err(Error::Domain("B0 must be finite".into()));
        }
        if !(self.noise_asd_t_rthz >= 0.0) {
            return Err(Error::Domain("noise spectral density must be >= 0".into()));
        }
        if !(self.line_frequency_hz > 0.0) {
            return Err(Error::Domain("line frequency must be positive".into()));
        }
        for h in &self.harmonics {
            if !(h.frequency_hz > 0.0) || !(h.rms_t >= 0.0) || !h.phase_rad.is_finite() {
                return Err(Error::Domain(format!("invalid harmonic {h:?}")));
            }
        }
        Ok(())
    }

    /// Integer harmonic order of a component relative to the line frequency.
    pub fn order_of(&self, frequency_hz: f64) -> f64 {
        (frequency_hz / self.line_frequency_hz).round().max(1.0)
    }

    /// Frequency actually present once grid drift is applied.
    pub fn drifted_frequency(&self, h: &HarmonicComponent) -> f64 {
        h.frequency_hz + self.order_of(h.frequency_hz) * self.line_drift_hz
    }

    /// Deterministic part B0 + sum of harmonics at time `t`.
    pub fn deterministic_at(&self, t: f64) -> f64 {
        self.b0_t
            + self
                .harmonics
                .iter()
                .map(|h| h.peak_t() * (TAU * self.drifted_frequency(h) * t + h.phase_rad).sin())
                .sum::<f64>()
    }

    fn hash(&self) -> u64 {
        let text = serde_json::to_string(self).unwrap_or_default();
        // FNV-1a
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_hash: u64,
    pub seed: u64,
}

/// Sampled field B(t_i), t_i = i / fs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTrace {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub duration: f64,
    pub provenance: Provenance,
    /// Set when an actuator saturated while producing this trace.
    pub clipped: bool,
}

impl FieldTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.fs
    }

    /// Pointwise sum of two traces on the same grid.
    pub fn superpose(&self, other: &FieldTrace) -> Result<FieldTrace> {
        if self.len() != other.len() || self.fs != other.fs {
            return Err(Error::Domain("cannot superpose traces on different grids".into()));
        }
        Ok(FieldTrace {
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
            fs: self.fs,
            duration: self.duration,
            provenance: self.provenance,
            clipped: self.clipped || other.clipped,
        })
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.len() as f64
    }

    /// `t_s,b_t` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,b_t\n");
        for (i, b) in self.samples.iter().enumerate() {
            out.push_str(&format!("{},{b:e}\n", self.time(i)));
        }
        out
    }
}

fn sample_count(fs: f64, duration: f64) -> Result<usize> {
    if !(fs > 0.0) || !(duration > 0.0) {
        return Err(Error::Domain("sample rate and duration must be positive".into()));
    }
    Ok((fs * duration).round() as usize)
}

/// B(t_i) = B0 + sum sqrt(2) a_k sin(2 pi f_k t_i + phi_k) + eps_i with
/// eps_i ~ N(0, S_BB fs / 2).
pub fn sample_field_trace(model: &FieldModel, fs: f64, duration: f64) -> Result<FieldTrace> {
    model.validate()?;
    let n = sample_count(fs, duration)?;
    if let Some(h) = model
        .harmonics
        .iter()
        .find(|h| fs <= 2.0 * model.drifted_frequency(h))
    {
        return Err(Error::Aliasing(format!(
            "fs = {fs} Hz cannot represent {} Hz harmonic",
            h.frequency_hz
        )));
    }
    let sigma = (model.noise_psd() * fs / 2.0).sqrt();
    let mut noise = rng::stream(model.seed, 0, Purpose::FieldNoise);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let eps: f64 = if sigma > 0.0 { sigma * Distribution::<f64>::sample(&StandardNormal, &mut noise) } else { 0.0 };
            model.deterministic_at(t) + eps
        })
        .collect();
    Ok(FieldTrace {
        samples,
        fs,
        duration,
        provenance: Provenance { model_hash: model.hash(), seed: model.seed },
        clipped: false,
    })
}

/// Feed-forward coil drive: harmonic content plus actuator limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationField {
    pub harmonics: Vec<HarmonicComponent>,
    /// Single-pole time constant (s); zero means an ideal actuator.
    pub actuator_time_constant_s: f64,
    pub max_amplitude_t: f64,
    pub bandwidth_limit_hz: f64,
    /// Line-phase error of the start trigger (rad at the fundamental).
    pub trigger_phase_error_rad: f64,
}

impl Default for CompensationField {
    fn default() -> Self {
        Self {
            harmonics: Vec::new(),
            actuator_time_constant_s: 40e-6,
            max_amplitude_t: 6.61e-6,
            bandwidth_limit_hz: 10e3,
            trigger_phase_error_rad: 0.0,
        }
    }
}

impl CompensationField {
    pub fn ideal() -> Self {
        Self { actuator_time_constant_s: 0.0, ..Self::default() }
    }

    pub fn total_peak_t(&self) -> f64 {
        self.harmonics.iter().map(HarmonicComponent::peak_t).sum()
    }

    pub fn would_clip(&self) -> bool {
        self.total_peak_t() > self.max_amplitude_t
    }
}

/// Anti-phase replica of the fitted interference, passed through the actuator.
///
/// Harmonic k is generated at its nominal frequency, phase-locked to the line
/// trigger; a trigger error `delta` shifts harmonic k by `k * delta`.
pub fn compensation_waveform(
    fit: &HarmonicFit,
    comp: &CompensationField,
    fs: f64,
    duration: f64,
) -> Result<FieldTrace> {
    let n = sample_count(fs, duration)?;
    let components: Vec<HarmonicComponent> = fit.components.iter().map(|c| c.component).collect();
    for c in &components {
        if c.frequency_hz > comp.bandwidth_limit_hz {
            return Err(Error::Domain(format!(
                "{} Hz harmonic exceeds actuator bandwidth {} Hz",
                c.frequency_hz, comp.bandwidth_limit_hz
            )));
        }
    }
    let line = fit.line_frequency_hz;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            components
                .iter()
                .map(|c| {
                    let order = (c.frequency_hz / line).round().max(1.0);
                    -c.peak_t()
                        * (TAU * c.frequency_hz * t + c.phase_rad + order * comp.trigger_phase_error_rad)
                            .sin()
                })
                .sum()
        })
        .collect();
    let ideal = FieldTrace {
        samples,
        fs,
        duration,
        provenance: Provenance { model_hash: 0, seed: 0 },
        clipped: false,
    };
    let driven = CompensationField { harmonics: components, ..comp.clone() };
    Ok(apply_actuator(&ideal, &driven))
}

/// Single-pole low-pass response followed by saturation at +/- max amplitude.
///
/// The pole is integrated exactly for a piecewise-linear input, so the
/// response to a sampled sinusoid has the analogue gain and phase.
pub fn apply_actuator(ideal: &FieldTrace, comp: &CompensationField) -> FieldTrace {
    let tau = comp.actuator_time_constant_s;
    let mut out = Vec::with_capacity(ideal.len());
    if tau > 0.0 && !ideal.is_empty() {
        let h = 1.0 / ideal.fs;
        let alpha = (-h / tau).exp();
        let ramp = 1.0 - tau / h * (1.0 - alpha);
        let mut y = ideal.samples[0];
        out.push(y);
        for w in ideal.samples.windows(2) {
            y = alpha * y + (1.0 - alpha) * w[0] + ramp * (w[1] - w[0]);
            out.push(y);
        }
    } else {
        out.extend_from_slice(&ideal.samples);
    }
    let limit = comp.max_amplitude_t;
    let mut clipped = ideal.clipped;
    for v in &mut out {
        if v.abs() > limit {
            *v = v.signum() * limit;
            clipped = true;
        }
    }
    FieldTrace { samples: out, clipped, ..ideal.clone() }
}

/// Phase lag of the actuator at frequency `f` (rad).
pub fn actuator_lag(comp: &CompensationField, f: f64) -> f64 {
    (TAU * f * comp.actuator_time_constant_s).atan()
}

/// Gain of the actuator at frequency `f`.
pub fn actuator_gain(comp: &CompensationField, f: f64) -> f64 {
    1.0 / (1.0 + (TAU * f * comp.actuator_time_constant_s).powi(2)).sqrt()
}

/// Rms of a sum of independent components: sqrt(sum a_k^2 + S_BB f_max).
pub fn quadrature_noise_amplitude(model: &FieldModel, f_max: f64) -> f64 {
    let harmonic: f64 = model
        .harmonics
        .iter()
        .filter(|h| h.frequency_hz <= f_max)
        .map(|h| h.rms_t * h.rms_t)
        .sum();
    (harmonic + model.noise_psd() * f_max).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::FittedHarmonic;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn single_fit(freq: f64, rms: f64, phase: f64) -> HarmonicFit {
        HarmonicFit {
            components: vec![FittedHarmonic {
                component: HarmonicComponent::new(freq, rms, phase),
                rms_uncertainty_t: 1e-12,
                phase_uncertainty_rad: 1e-3,
            }],
            line_frequency_hz: 50.0,
        }
    }

    #[test]
    fn constant_trace_without_noise() {
        let m = FieldModel::static_field(50e-6);
        let tr = sample_field_trace(&m, 1e4, 0.1).unwrap();
        assert_eq!(tr.len(), 1000);
        assert!(tr.samples.iter().all(|&b| b == 50e-6));
    }

    #[test]
    fn white_noise_variance() {
        let mut m = FieldModel::static_field(0.0);
        m.noise_asd_t_rthz = 100e-12;
        m.seed = 11;
        let fs = 1e6;
        let tr = sample_field_trace(&m, fs, 1.0).unwrap();
        let n = tr.len() as f64;
        let mean = tr.mean();
        let var = tr.samples.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = 1e-20 * 5e5;
        // chi-square spread of a sample variance: sqrt(2/(n-1))
        let tol = 3.0 * expected * (2.0 / (n - 1.0)).sqrt();
        assert!((var - expected).abs() < tol, "{var} vs {expected}");
    }

    #[test]
    fn laboratory_quadrature_sum() {
        let lab = FieldModel::laboratory();
        let harmonics_only = FieldModel { noise_asd_t_rthz: 0.0, ..lab.clone() };
        let h = quadrature_noise_amplitude(&harmonics_only, 300.0);
        assert!((h - 43.39e-9).abs() < 0.05e-9, "{h}");
        let total = quadrature_noise_amplitude(&lab, 300.0);
        assert!((total - 44.4e-9).abs() < 1.0e-9, "{total}");
    }

    #[test]
    fn seed_determinism_and_superposition() {
        let mut noisy = FieldModel::laboratory();
        noisy.seed = 99;
        let a = sample_field_trace(&noisy, 1e4, 0.2).unwrap();
        let b = sample_field_trace(&noisy, 1e4, 0.2).unwrap();
        assert_eq!(a.samples, b.samples);
        let bare = FieldModel { harmonics: Vec::new(), ..noisy.clone() };
        let c = sample_field_trace(&bare, 1e4, 0.2).unwrap();
        for (i, (x, y)) in a.samples.iter().zip(&c.samples).enumerate() {
            let det = noisy.deterministic_at(i as f64 / 1e4) - noisy.b0_t;
            assert!(((x - y) - det).abs() < 1e-20, "sample {i}");
        }
    }

    #[test]
    fn noise_is_gaussian_by_ks() {
        let mut m = FieldModel::static_field(0.0);
        m.noise_asd_t_rthz = 1e-10;
        m.seed = 3;
        let mut xs = sample_field_trace(&m, 2e5, 0.5).unwrap().samples;
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        xs.sort_by(f64::total_cmp);
        let normal = Normal::new(mean, sd).unwrap();
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = normal.cdf(x);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov asymptotic tail
        let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
        let p: f64 = (1..100)
            .map(|k| {
                let k = k as f64;
                2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp()
            })
            .sum();
        assert!(p > 0.01, "D = {d}, p = {p}");
    }

    #[test]
    fn aliasing_rejected() {
        let lab = FieldModel::laboratory();
        assert!(matches!(sample_field_trace(&lab, 400.0, 1.0), Err(Error::Aliasing(_))));
    }

    #[test]
    fn actuator_dc_and_high_frequency() {
        let comp = CompensationField::default();
        let fs = 1e6;
        let dc = FieldTrace {
            samples: vec![1e-6; 1000],
            fs,
            duration: 1e-3,
            provenance: Provenance { model_hash: 0, seed: 0 },
            clipped: false,
        };
        let out = apply_actuator(&dc, &comp);
        assert!(out.samples.iter().all(|&v| (v - 1e-6).abs() < 1e-18));

        let f = 1e4;
        let n = 20_000;
        let tone = FieldTrace {
            samples: (0..n).map(|i| 1e-6 * (TAU * f * i as f64 / fs).sin()).collect(),
            ..dc.clone()
        };
        let out = apply_actuator(&tone, &comp);
        // demodulate the settled half
        let (mut i_sum, mut q_sum) = (0.0, 0.0);
        for k in n / 2..n {
            let ph = TAU * f * k as f64 / fs;
            i_sum += out.samples[k] * ph.sin();
            q_sum += out.samples[k] * ph.cos();
        }
        let m = (n / 2) as f64;
        let amp = 2.0 * (i_sum * i_sum + q_sum * q_sum).sqrt() / m / 1e-6;
        let lag = -(q_sum).atan2(i_sum);
        assert!((amp - actuator_gain(&comp, f)).abs() < 1e-3, "{amp}");
        assert!((amp - 0.37).abs() < 0.01);
        assert!((lag - 1.19).abs() < 0.01, "{lag}");
    }

    #[test]
    fn actuator_clips() {
        let comp = CompensationField::default();
        let big = FieldTrace {
            samples: vec![0.0, 1e-5, -1e-5, 1e-6],
            fs: 1e3,
            duration: 4e-3,
            provenance: Provenance { model_hash: 0, seed: 0 },
            clipped: false,
        };
        let out = apply_actuator(&big, &CompensationField { actuator_time_constant_s: 0.0, ..comp });
        assert!(out.clipped);
        assert_eq!(out.samples[1], 6.61e-6);
        assert_eq!(out.samples[2], -6.61e-6);
        assert_eq!(out.samples[3], 1e-6);
    }

    #[test]
    fn zero_fit_gives_zero_waveform() {
        let fit = single_fit(50.0, 0.0, 0.3);
        let w = compensation_waveform(&fit, &CompensationField::default(), 1e4, 0.1).unwrap();
        assert!(w.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ideal_compensation_cancels_exactly() {
        let fit = single_fit(50.0, 41.92e-9, 0.7);
        let mut src = FieldModel::static_field(0.0);
        src.harmonics = vec![HarmonicComponent::new(50.0, 41.92e-9, 0.7)];
        let fs = 1e4;
        let s = sample_field_trace(&src, fs, 0.2).unwrap();
        let w = compensation_waveform(&fit, &CompensationField::ideal(), fs, 0.2).unwrap();
        let r = s.superpose(&w).unwrap();
        assert!(r.samples.iter().all(|v| v.abs() < 1e-22));
    }

    #[test]
    fn lagged_compensation_residual() {
        let fit = single_fit(50.0, 41.92e-9, 0.0);
        let mut src = FieldModel::static_field(0.0);
        src.harmonics = vec![HarmonicComponent::new(50.0, 41.92e-9, 0.0)];
        let fs = 1e6;
        let s = sample_field_trace(&src, fs, 0.2).unwrap();
        let w = compensation_waveform(&fit, &CompensationField::default(), fs, 0.2).unwrap();
        let r = s.superpose(&w).unwrap();
        // rms over whole cycles after settling, as an rms amplitude
        let tail = &r.samples[20_000..];
        let rms = (tail.iter().map(|v| v * v).sum::<f64>() / tail.len() as f64).sqrt();
        let delta = TAU * 50.0 * 40e-6;
        let oracle = 41.92e-9 * delta;
        assert!((rms - oracle).abs() / oracle < 0.02, "{rms} vs {oracle}");
        assert!((rms - 0.53e-9).abs() < 0.01e-9);
    }
}
