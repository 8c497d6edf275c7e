//! Record-to-phase chain: centre the passband, bandpass, analytic signal,
//! unwrap, trim the edges, and attach SNR weights.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::dsp::{analytic_signal, unwrap_phase, Bandpass, FilterSpec};
use crate::error::{Error, Result};
use crate::signalsim::{estimate_carrier, snr_from_envelope, snr_weights, PhaseSeries, PolarimeterRecord, SnrTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionOptions {
    /// Total passband width (Hz).
    pub band_hz: f64,
    /// Passband centre; located from the spectrum when absent.
    pub center_hz: Option<f64>,
    pub prototype_order: usize,
    /// Samples dropped at each end before any fit.
    pub edge_guard: usize,
    /// Attach per-sample SNR weights from a fitted envelope decay.
    pub weighted: bool,
    pub snr_window_s: f64,
}

impl Default for ReconstructionOptions {
    fn default() -> Self {
        Self {
            band_hz: 500.0,
            center_hz: None,
            prototype_order: 6,
            edge_guard: 1000,
            weighted: true,
            snr_window_s: 0.01,
        }
    }
}

impl ReconstructionOptions {
    pub fn with_band(band_hz: f64) -> Self {
        Self { band_hz, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// Trimmed phase, times measured from the FID start.
    pub phase: PhaseSeries,
    pub filter: FilterSpec,
    pub enbw_hz: f64,
    pub snr: Option<SnrTrace>,
    /// Fitted `(SNR0, lifetime)` of the envelope.
    pub snr_fit: Option<(f64, f64)>,
}

pub fn reconstruct(record: &PolarimeterRecord, opts: &ReconstructionOptions) -> Result<Reconstruction> {
    let fs = record.fs;
    let center = match opts.center_hz {
        Some(c) => c,
        None => estimate_carrier(record)?,
    };
    let spec = FilterSpec {
        prototype_order: opts.prototype_order,
        ..FilterSpec::centered(center, opts.band_hz)
    };
    let bp = Bandpass::design(&spec, fs)?;
    let enbw = bp.equivalent_noise_bandwidth();
    let fid = record.fid();
    if fid.len() <= 2 * opts.edge_guard + 2 {
        return Err(Error::Edge(format!("{} FID samples leave nothing inside the edge guard", fid.len())));
    }
    let mean = fid.iter().sum::<f64>() / fid.len() as f64;
    let centred: Vec<f64> = fid.iter().map(|v| v - mean).collect();
    let filtered = bp.apply(&centred)?;
    let analytic = analytic_signal(&filtered, fs, 0.0);
    let mut full = unwrap_phase(&analytic);
    // the record is A sin(phi + phi_0), whose analytic argument lags by pi/2
    for v in &mut full.values {
        *v += FRAC_PI_2;
    }
    full.enbw_hz = Some(enbw);

    let (snr, snr_fit) = if opts.weighted {
        let env2: Vec<f64> = analytic.samples.iter().map(|z| z.norm_sqr()).collect();
        let trace = snr_from_envelope(record, &env2, Some(enbw), center, opts.snr_window_s)?;
        let fit = trace.fit_exponential()?;
        full.weights = Some(snr_weights(&full, 0.0, fit.0, fit.1));
        (Some(trace), Some(fit))
    } else {
        (None, None)
    };
    let phase = full.slice(opts.edge_guard, full.len() - opts.edge_guard);
    Ok(Reconstruction { phase, filter: spec, enbw_hz: enbw, snr, snr_fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fieldmodel::{sample_field_trace, FieldModel};
    use crate::physics::MicrowaveDressing;
    use crate::signalsim::{integrate_larmor_phase, synthesize_polarimeter_record, DecayModel, RecordConfig};
    use crate::species::AtomicSpecies;

    #[test]
    fn noiseless_phase_recovered_on_central_record() {
        let fs = 5e5;
        let m = FieldModel::static_field(8.6e-6);
        let tr = sample_field_trace(&m, fs, 0.2).unwrap();
        let truth = integrate_larmor_phase(&tr, &AtomicSpecies::rb87(), &MicrowaveDressing::none()).unwrap();
        let cfg = RecordConfig { bit_depth: None, phi_0_rad: 0.7, ..RecordConfig::default() };
        let rec = synthesize_polarimeter_record(&truth, &DecayModel::default(), &cfg).unwrap();
        let opts = ReconstructionOptions { weighted: false, edge_guard: 0, ..ReconstructionOptions::with_band(5e3) };
        let r = reconstruct(&rec, &opts).unwrap();
        let n = truth.len();
        let lo = n / 100;
        let offset = r.phase.values[lo] - (truth.values[lo] + 0.7);
        let k = (offset / std::f64::consts::TAU).round();
        let worst = (lo..n - lo)
            .map(|i| {
                (r.phase.values[i] - truth.values[i] - 0.7 - k * std::f64::consts::TAU).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
        assert!(r.phase.discontinuities.is_empty());
    }
}
