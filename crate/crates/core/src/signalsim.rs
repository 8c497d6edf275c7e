//! Larmor phase integration and polarimeter record synthesis.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::{analytic_signal, power_spectrum, Bandpass, FilterSpec};
use crate::error::{Error, Result};
use crate::fieldmodel::FieldTrace;
use crate::physics::{self, MicrowaveDressing};
use crate::rng::{self, Purpose};
use crate::species::AtomicSpecies;

/// Unwrapped Larmor phase on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeries {
    pub values: Vec<f64>,
    pub fs: f64,
    /// Time of the first sample (s).
    pub t0: f64,
    /// Per-sample full-bandwidth SNR; phase variance is taken as 1/SNR.
    pub weights: Option<Vec<f64>>,
    /// Sample indices where the unwrapper saw an implausible increment.
    pub discontinuities: Vec<usize>,
    /// Noise bandwidth of the filter used in reconstruction, if any.
    pub enbw_hz: Option<f64>,
}

impl PhaseSeries {
    pub fn new(values: Vec<f64>, fs: f64) -> Self {
        Self { values, fs, t0: 0.0, weights: None, discontinuities: Vec::new(), enbw_hz: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.fs
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.fs
    }

    pub fn validate(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::Domain("phase series needs at least two samples".into()));
        }
        if !(self.fs > 0.0) {
            return Err(Error::Domain("phase series sample rate must be positive".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("phase series contains non-finite values".into()));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.len() {
                return Err(Error::Domain("weights length differs from phase length".into()));
            }
            if w.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::Domain("weights must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Sub-series `[start, end)`, carrying weights and re-indexed flags.
    pub fn slice(&self, start: usize, end: usize) -> PhaseSeries {
        PhaseSeries {
            values: self.values[start..end].to_vec(),
            fs: self.fs,
            t0: self.time(start),
            weights: self.weights.as_ref().map(|w| w[start..end].to_vec()),
            discontinuities: self
                .discontinuities
                .iter()
                .filter(|&&i| i >= start && i < end)
                .map(|i| i - start)
                .collect(),
            enbw_hz: self.enbw_hz,
        }
    }
}

/// Exponential amplitude decay of the free-induction signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayModel {
    pub a0_v: f64,
    pub lifetime_s: f64,
}

impl Default for DecayModel {
    fn default() -> Self {
        Self { a0_v: 1.0, lifetime_s: 0.530 }
    }
}

impl DecayModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.a0_v > 0.0) || !(self.lifetime_s > 0.0) {
            return Err(Error::Domain("decay needs A0 > 0 and lifetime > 0".into()));
        }
        Ok(())
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        self.a0_v * (-t / self.lifetime_s).exp()
    }
}

/// sigma giving full-bandwidth SNR `A0^2 / 2 sigma^2` equal to `snr_db`.
pub fn sigma_for_snr(a0_v: f64, snr_db: f64) -> f64 {
    a0_v / (2.0 * 10f64.powf(snr_db / 10.0)).sqrt()
}

/// Sample indices where the three record segments begin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segments {
    pub detector_start: u64,
    pub probe_on_start: u64,
    pub fid_start: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub lifetime_s: f64,
    pub a0_v: f64,
    pub sigma_v: f64,
    pub full_scale_v: f64,
    pub phi_0_rad: f64,
    pub detector_sigma_v: f64,
    pub clip_fraction: f64,
    pub warnings: Vec<String>,
}

/// Digitised polarimeter voltage with pre-tip noise segments.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarimeterRecord {
    /// Voltages; integer multiples of `scale_v_per_code` unless in float mode.
    pub volts: Vec<f64>,
    pub fs: f64,
    /// `None` is float mode (no quantisation).
    pub bit_depth: Option<u32>,
    pub scale_v_per_code: f64,
    pub segments: Segments,
    pub metadata: RecordMetadata,
}

impl PolarimeterRecord {
    pub fn len(&self) -> usize {
        self.volts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.volts.is_empty()
    }

    pub fn detector_only(&self) -> &[f64] {
        &self.volts[self.segments.detector_start as usize..self.segments.probe_on_start as usize]
    }

    pub fn probe_on(&self) -> &[f64] {
        &self.volts[self.segments.probe_on_start as usize..self.segments.fid_start as usize]
    }

    pub fn fid(&self) -> &[f64] {
        &self.volts[self.segments.fid_start as usize..]
    }

    /// Integer codes; errors in float mode.
    pub fn codes(&self) -> Result<Vec<i64>> {
        if self.bit_depth.is_none() {
            return Err(Error::Format("float-mode record has no integer codes".into()));
        }
        Ok(self.volts.iter().map(|v| (v / self.scale_v_per_code).round() as i64).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.segments;
        if !(s.detector_start <= s.probe_on_start
            && s.probe_on_start <= s.fid_start
            && s.fid_start <= self.len() as u64)
        {
            return Err(Error::Format(format!("segment markers out of order: {s:?}")));
        }
        if let Some(bits) = self.bit_depth {
            let limit = 1i64 << (bits - 1);
            if self.codes()?.iter().any(|c| *c < -limit || *c >= limit) {
                return Err(Error::Format(format!("codes exceed {bits}-bit range")));
            }
        }
        Ok(())
    }
}

/// Everything needed to turn a phase series into a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordConfig {
    pub sigma_v: f64,
    pub phi_0_rad: f64,
    /// `None` for float mode.
    pub bit_depth: Option<u32>,
    /// Digitiser range; `None` means 4 A0.
    pub full_scale_v: Option<f64>,
    pub detector_only_s: f64,
    pub probe_on_s: f64,
    /// Detector-only noise as a fraction of the probe-on sigma.
    pub detector_noise_fraction: f64,
    pub seed: u64,
}

impl Default for RecordConfig {
    fn default() -> Self {
        Self {
            sigma_v: 0.0,
            phi_0_rad: 0.0,
            bit_depth: Some(16),
            full_scale_v: None,
            detector_only_s: 0.05,
            probe_on_s: 0.05,
            detector_noise_fraction: 0.3,
            seed: 0,
        }
    }
}

/// phi(t_i) as the cumulative trapezoidal integral of the Larmor frequency of
/// the sampled field, starting from zero.
pub fn integrate_larmor_phase(
    trace: &FieldTrace,
    species: &AtomicSpecies,
    dressing: &MicrowaveDressing,
) -> Result<PhaseSeries> {
    if trace.samples.iter().any(|b| !b.is_finite()) {
        return Err(Error::Domain("field trace contains non-finite samples".into()));
    }
    let max_b = trace.samples.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if max_b >= physics::FIELD_GUARD_T {
        return Err(Error::Range(format!("field {max_b} T beyond the physics guard")));
    }
    let omega = trace
        .samples
        .iter()
        .map(|&b| physics::larmor_frequency(species, b, dressing))
        .collect::<Result<Vec<f64>>>()?;
    let half_h = 0.5 / trace.fs;
    let mut values = Vec::with_capacity(omega.len());
    let mut acc = 0.0;
    values.push(0.0);
    for w in omega.windows(2) {
        acc += half_h * (w[0] + w[1]);
        values.push(acc);
    }
    Ok(PhaseSeries::new(values, trace.fs))
}

/// V(t_i) = A0 e^(-t_i/lifetime) sin(phi(t_i) + phi_0) + eps_i, preceded by a
/// detector-only and a probe-on noise segment, then quantised.
pub fn synthesize_polarimeter_record(
    phase: &PhaseSeries,
    decay: &DecayModel,
    config: &RecordConfig,
) -> Result<PolarimeterRecord> {
    phase.validate()?;
    decay.validate()?;
    if !(config.sigma_v >= 0.0) || !(config.detector_noise_fraction >= 0.0) {
        return Err(Error::Domain("noise levels must be non-negative".into()));
    }
    if !(config.detector_only_s >= 0.0) || !(config.probe_on_s >= 0.0) {
        return Err(Error::Domain("segment durations must be non-negative".into()));
    }
    let fs = phase.fs;
    let full_scale = config.full_scale_v.unwrap_or(4.0 * decay.a0_v);
    if !(full_scale > 0.0) {
        return Err(Error::Domain("full scale must be positive".into()));
    }
    let mut warnings = Vec::new();
    if full_scale <= decay.a0_v + 5.0 * config.sigma_v {
        warnings.push(format!(
            "full scale {full_scale} V does not exceed A0 + 5 sigma = {} V",
            decay.a0_v + 5.0 * config.sigma_v
        ));
    }

    let n_det = (config.detector_only_s * fs).round() as usize;
    let n_probe = (config.probe_on_s * fs).round() as usize;
    let n_fid = phase.len();
    let det_sigma = config.detector_noise_fraction * config.sigma_v;
    let mut noise = rng::stream(config.seed, 0, Purpose::DetectorNoise);
    let mut gauss = |s: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut noise);
        s * z
    };

    let mut volts = Vec::with_capacity(n_det + n_probe + n_fid);
    volts.extend((0..n_det).map(|_| gauss(det_sigma)));
    volts.extend((0..n_probe).map(|_| gauss(config.sigma_v)));
    for (i, p) in phase.values.iter().enumerate() {
        let t = i as f64 / fs;
        volts.push(decay.amplitude(t) * (p + config.phi_0_rad).sin() + gauss(config.sigma_v));
    }

    let mut clipped = 0usize;
    let scale = match config.bit_depth {
        Some(bits) => {
            if !(2..=32).contains(&bits) {
                return Err(Error::Domain(format!("bit depth {bits} outside 2..=32")));
            }
            let half = (1i64 << (bits - 1)) as f64;
            let scale = full_scale / half;
            for v in &mut volts {
                let mut code = (*v / scale).round();
                if code > half - 1.0 || code < -half {
                    clipped += 1;
                    code = code.clamp(-half, half - 1.0);
                }
                *v = code * scale;
            }
            scale
        }
        None => 0.0,
    };
    let clip_fraction = clipped as f64 / volts.len().max(1) as f64;
    if clip_fraction > 1e-6 {
        warnings.push(format!("clipping fraction {clip_fraction:.2e} exceeds 1e-6"));
    }

    Ok(PolarimeterRecord {
        volts,
        fs,
        bit_depth: config.bit_depth,
        scale_v_per_code: scale,
        segments: Segments {
            detector_start: 0,
            probe_on_start: n_det as u64,
            fid_start: (n_det + n_probe) as u64,
        },
        metadata: RecordMetadata {
            lifetime_s: decay.lifetime_s,
            a0_v: decay.a0_v,
            sigma_v: config.sigma_v,
            full_scale_v: full_scale,
            phi_0_rad: config.phi_0_rad,
            detector_sigma_v: det_sigma,
            clip_fraction,
            warnings,
        },
    })
}

/// Windowed SNR estimates over the FID segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrTrace {
    /// Window centres relative to the FID start (s).
    pub times: Vec<f64>,
    pub snr: Vec<f64>,
    /// Probe-on noise standard deviation (V).
    pub sigma_v: f64,
}

impl SnrTrace {
    pub fn snr_db(&self) -> Vec<f64> {
        self.snr.iter().map(|s| 10.0 * s.max(1e-30).log10()).collect()
    }

    /// Least-squares fit of `SNR0 exp(-2 t / lifetime)` in linear space
    /// (late windows may have negative estimates). Returns `(SNR0, lifetime)`.
    pub fn fit_exponential(&self) -> Result<(f64, f64)> {
        if self.times.len() < 3 {
            return Err(Error::Calibration("too few SNR windows to fit a decay".into()));
        }
        let sse_at = |rate: f64| -> (f64, f64) {
            let (mut sy, mut ss) = (0.0, 0.0);
            for (t, y) in self.times.iter().zip(&self.snr) {
                let e = (-rate * t).exp();
                sy += y * e;
                ss += e * e;
            }
            let c = sy / ss;
            let sse = self
                .times
                .iter()
                .zip(&self.snr)
                .map(|(t, y)| (y - c * (-rate * t).exp()).powi(2))
                .sum::<f64>();
            (sse, c)
        };
        let span = self.times.last().unwrap() - self.times.first().unwrap();
        let (mut lo, mut hi) = (-1.0 / span.max(1e-9), 200.0 / span.max(1e-9));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..200 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if sse_at(a).0 < sse_at(b).0 {
                hi = b;
            } else {
                lo = a;
            }
        }
        let rate = 0.5 * (lo + hi);
        let (_, c) = sse_at(rate);
        if !(c > 0.0) || !(rate > 0.0) {
            return Err(Error::Calibration(format!(
                "SNR trace does not decay (SNR0 = {c:.3e}, rate = {rate:.3e}/s)"
            )));
        }
        Ok((c, 2.0 / rate))
    }
}

/// Frequency of the strongest bin of the FID spectrum after subtracting the
/// probe-on noise spectrum.
pub fn estimate_carrier(record: &PolarimeterRecord) -> Result<f64> {
    let fid = record.fid();
    let probe = record.probe_on();
    let span = fid.len().min(probe.len()).min((0.05 * record.fs) as usize);
    if span < 64 {
        return Err(Error::Calibration("segments too short to locate the carrier".into()));
    }
    let resolution = (record.fs / span as f64 * 4.0).max(1.0);
    let s_fid = power_spectrum(&fid[..span], record.fs, resolution)?;
    let s_noise = power_spectrum(&probe[..span], record.fs, resolution)?;
    let k = s_fid
        .psd
        .iter()
        .zip(&s_noise.psd)
        .enumerate()
        .skip(1)
        .max_by(|a, b| (a.1 .0 - a.1 .1).total_cmp(&(b.1 .0 - b.1 .1)))
        .map(|(k, _)| k)
        .unwrap_or(0);
    // parabolic interpolation on the peak
    let p = &s_fid.psd;
    let delta = if k > 0 && k + 1 < p.len() {
        let (a, b, c) = (p[k - 1], p[k], p[k + 1]);
        let den = a - 2.0 * b + c;
        if den.abs() > 0.0 { 0.5 * (a - c) / den } else { 0.0 }
    } else {
        0.0
    };
    Ok((k as f64 + delta) * s_fid.resolution_hz)
}

/// Full-bandwidth SNR `A^2 / 2 sigma^2` in windows of `window_s`, from the
/// analytic-signal envelope of the FID and sigma of the probe-on segment. With
/// `band`, the FID is bandpassed first and the in-band noise power
/// `2 sigma^2 ENBW / (fs/2)` is removed from the envelope power.
pub fn full_bandwidth_snr(
    record: &PolarimeterRecord,
    window_s: f64,
    band: Option<&FilterSpec>,
) -> Result<SnrTrace> {
    let fs = record.fs;
    let carrier = match band {
        Some(b) => b.center_hz(),
        None => estimate_carrier(record)?,
    };
    let fid = record.fid();
    let fid_mean = fid.iter().sum::<f64>() / fid.len().max(1) as f64;
    let centred: Vec<f64> = fid.iter().map(|v| v - fid_mean).collect();
    let (signal, enbw) = match band {
        Some(spec) => {
            let bp = Bandpass::design(spec, fs)?;
            (bp.apply(&centred)?, Some(bp.equivalent_noise_bandwidth()))
        }
        None => (centred, None),
    };
    let env2: Vec<f64> = analytic_signal(&signal, fs, 0.0).samples.iter().map(|z| z.norm_sqr()).collect();
    snr_from_envelope(record, &env2, enbw, carrier, window_s)
}

/// Windowed SNR from the squared analytic envelope of the (optionally
/// bandpassed) FID; `enbw_hz` is the passband's noise bandwidth if any.
pub(crate) fn snr_from_envelope(
    record: &PolarimeterRecord,
    env2: &[f64],
    enbw_hz: Option<f64>,
    carrier_hz: f64,
    window_s: f64,
) -> Result<SnrTrace> {
    let probe = record.probe_on();
    if probe.len() < 16 {
        return Err(Error::Calibration("record has no probe-on noise segment".into()));
    }
    if window_s * carrier_hz < 100.0 {
        return Err(Error::Domain(format!(
            "window {window_s} s spans fewer than 100 cycles of {carrier_hz:.1} Hz"
        )));
    }
    let fs = record.fs;
    let mean = probe.iter().sum::<f64>() / probe.len() as f64;
    let sigma2 = probe.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (probe.len() - 1) as f64;
    let noise_power = match enbw_hz {
        Some(enbw) => 2.0 * sigma2 * 2.0 * enbw / fs,
        None => 2.0 * sigma2,
    };
    let w = ((window_s * fs).round() as usize).max(1);
    let mut times = Vec::new();
    let mut snr = Vec::new();
    for (j, chunk) in env2.chunks_exact(w).enumerate() {
        let p = chunk.iter().sum::<f64>() / w as f64 - noise_power;
        times.push((j as f64 + 0.5) * w as f64 / fs);
        snr.push(p / (2.0 * sigma2));
    }
    Ok(SnrTrace { times, snr, sigma_v: sigma2.sqrt() })
}

/// Per-sample SNR from a fitted decay, on the grid of `phase`.
pub fn snr_weights(phase: &PhaseSeries, fid_t0: f64, snr0: f64, lifetime_s: f64) -> Vec<f64> {
    (0..phase.len())
        .map(|i| snr0 * (-2.0 * (phase.time(i) - fid_t0) / lifetime_s).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;
    use crate::fieldmodel::{sample_field_trace, FieldModel, HarmonicComponent};

    fn rb() -> AtomicSpecies {
        AtomicSpecies::rb87()
    }

    #[test]
    fn constant_field_phase_is_linear() {
        let m = FieldModel::static_field(20e-6);
        let tr = sample_field_trace(&m, 1e5, 0.1).unwrap();
        let p = integrate_larmor_phase(&tr, &rb(), &MicrowaveDressing::none()).unwrap();
        let w = physics::larmor_frequency(&rb(), 20e-6, &MicrowaveDressing::none()).unwrap();
        for (i, v) in p.values.iter().enumerate() {
            let exact = w * i as f64 / 1e5;
            assert!((v - exact).abs() <= 1e-12 * exact.max(1.0));
        }
    }

    #[test]
    fn modulated_field_matches_closed_form() {
        let rb = rb();
        let gamma = rb.gamma_0;
        let (b0, a, fl) = (1e-6, 5e-9, 50.0);
        let mut m = FieldModel::static_field(b0);
        m.harmonics = vec![HarmonicComponent::new(fl, a / 2f64.sqrt(), 0.0)];
        let fs = 5e6;
        let tr = sample_field_trace(&m, fs, 0.04).unwrap();
        // linearised Larmor frequency gamma0 * B as the integrand oracle
        let lin: Vec<f64> = tr.samples.iter().map(|b| gamma * b).collect();
        let mut phi = 0.0;
        let mut worst: f64 = 0.0;
        for i in 1..lin.len() {
            phi += 0.5 / fs * (lin[i - 1] + lin[i]);
            let t = i as f64 / fs;
            let exact = gamma * b0 * t + gamma * a / (TAU * fl) * (1.0 - (TAU * fl * t).cos());
            worst = worst.max(((phi - exact) / exact).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn one_second_at_86_microtesla() {
        let rb = rb();
        let m = FieldModel::static_field(86e-6);
        let tr = sample_field_trace(&m, 1e5, 1.0).unwrap();
        let p = integrate_larmor_phase(&tr, &rb, &MicrowaveDressing::none()).unwrap();
        let w = physics::larmor_frequency(&rb, 86e-6, &MicrowaveDressing::none()).unwrap();
        let last = *p.values.last().unwrap();
        let exact = w * (tr.len() - 1) as f64 / 1e5;
        assert!((last - exact).abs() < 1e-10 * exact);
        assert!((last / TAU / 604e3 - 1.0).abs() < 2e-3);
    }

    fn tone_phase(f: f64, fs: f64, n: usize) -> PhaseSeries {
        PhaseSeries::new((0..n).map(|i| TAU * f * i as f64 / fs).collect(), fs)
    }

    #[test]
    fn float_mode_is_exact() {
        let ph = tone_phase(1e3, 1e5, 1000);
        let decay = DecayModel { a0_v: 1.0, lifetime_s: 0.53 };
        let cfg = RecordConfig { bit_depth: None, phi_0_rad: 0.2, ..RecordConfig::default() };
        let r = synthesize_polarimeter_record(&ph, &decay, &cfg).unwrap();
        for (i, v) in r.fid().iter().enumerate() {
            let t = i as f64 / 1e5;
            assert_eq!(*v, decay.amplitude(t) * (ph.values[i] + 0.2).sin());
        }
        assert!(r.detector_only().iter().all(|v| *v == 0.0));
        assert_eq!(r.segments.fid_start, 10_000);
    }

    #[test]
    fn unit_amplitude_unit_noise_snr() {
        let fs = 1e6;
        let ph = tone_phase(50e3, fs, 200_000);
        let decay = DecayModel { a0_v: 1.0, lifetime_s: 1e9 };
        let cfg = RecordConfig { sigma_v: 1.0, bit_depth: None, seed: 4, ..RecordConfig::default() };
        let r = synthesize_polarimeter_record(&ph, &decay, &cfg).unwrap();
        let tr = full_bandwidth_snr(&r, 0.02, None).unwrap();
        let mean = tr.snr.iter().sum::<f64>() / tr.snr.len() as f64;
        assert!((mean - 0.5).abs() < 0.025, "{mean}");
    }

    #[test]
    fn snr_decay_over_320_ms() {
        let fs = 5e5;
        let ph = tone_phase(60e3, fs, 160_000);
        let decay = DecayModel { a0_v: 1.0, lifetime_s: 0.53 };
        let cfg = RecordConfig { sigma_v: 0.05, bit_depth: Some(16), seed: 8, ..RecordConfig::default() };
        let r = synthesize_polarimeter_record(&ph, &decay, &cfg).unwrap();
        let tr = full_bandwidth_snr(&r, 0.01, None).unwrap();
        let (snr0, life) = tr.fit_exponential().unwrap();
        assert!((life / 0.53 - 1.0).abs() < 0.02, "{life}");
        assert!((10.0 * (snr0 / 200.0).log10()).abs() < 0.1, "{snr0}");
        let drop_db = 10.0 * (-2.0 * 0.32 / life).exp().log10();
        assert!((drop_db + 5.24).abs() < 0.15, "{drop_db}");
    }

    #[test]
    fn snr_preset_ratio() {
        let sigma = sigma_for_snr(1.0, -11.1);
        assert!((1.0 / sigma - 0.394).abs() < 1e-3);
    }

    #[test]
    fn quantisation_noise_is_step_squared_over_twelve() {
        let fs = 1e6;
        let ph = tone_phase(12_345.6, fs, 400_000);
        let decay = DecayModel { a0_v: 1.0, lifetime_s: 1e12 };
        let cfg = RecordConfig { bit_depth: Some(10), detector_only_s: 0.0, probe_on_s: 0.0, ..RecordConfig::default() };
        let q = synthesize_polarimeter_record(&ph, &decay, &cfg).unwrap();
        let exact = synthesize_polarimeter_record(&ph, &decay, &RecordConfig { bit_depth: None, ..cfg.clone() }).unwrap();
        let err = q.volts.iter().zip(&exact.volts).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / q.len() as f64;
        let step = 4.0 / 512.0;
        assert!((err / (step * step / 12.0) - 1.0).abs() < 0.05, "{err}");
        assert!(q.validate().is_ok());
        // Parseval: signal power plus quantisation noise
        let total = q.volts.iter().map(|v| v * v).sum::<f64>() / q.len() as f64;
        assert!((total / (0.5 + step * step / 12.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn clipping_and_range_warning() {
        let ph = tone_phase(1e3, 1e5, 10_000);
        let decay = DecayModel { a0_v: 1.0, lifetime_s: 1.0 };
        let cfg = RecordConfig { full_scale_v: Some(0.5), ..RecordConfig::default() };
        let r = synthesize_polarimeter_record(&ph, &decay, &cfg).unwrap();
        assert!(r.metadata.clip_fraction > 0.1);
        assert_eq!(r.metadata.warnings.len(), 2);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn missing_probe_segment_is_calibration_error() {
        let ph = tone_phase(1e3, 1e5, 10_000);
        let cfg = RecordConfig { probe_on_s: 0.0, ..RecordConfig::default() };
        let r = synthesize_polarimeter_record(&ph, &DecayModel::default(), &cfg).unwrap();
        assert!(matches!(full_bandwidth_snr(&r, 0.01, None), Err(Error::Calibration(_))));
    }
}
