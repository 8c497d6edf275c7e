//! Feed-forward cancellation cycle: calibrate on one shot, drive the
//! anti-phase field on the next, and compare field spectra.
//!
//! The uncompensated shot occupies more than a 500 Hz passband, so the
//! "before" spectrum is always taken through the calibration band.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{seed_of, simulate_shot, Scenario, Summary};
use crate::dsp::{power_spectrum, SpectrumEstimate};
use crate::error::{Error, Result};
use crate::estimation::{fit_harmonics, rms_noise_amplitude, HarmonicFit};
use crate::fieldmodel::compensation_waveform;
use crate::physics::{self, MicrowaveDressing};
use crate::reconstruct::reconstruct;
use crate::rng::trial_seed;
use crate::signalsim::PhaseSeries;
use crate::species::AtomicSpecies;

/// Field spectrum from the derivative of the phase, `B = (dphi/dt) / gamma`.
pub fn field_spectrum_from_phase(
    phase: &PhaseSeries,
    species: &AtomicSpecies,
    dressing: &MicrowaveDressing,
    resolution_hz: f64,
) -> Result<SpectrumEstimate> {
    let n = phase.len();
    if n < 3 {
        return Err(Error::Domain("phase too short to differentiate".into()));
    }
    let half = phase.fs / 2.0;
    let omega: Vec<f64> = (1..n - 1).map(|i| (phase.values[i + 1] - phase.values[i - 1]) * half).collect();
    let mean = omega.iter().sum::<f64>() / omega.len() as f64;
    let b0 = physics::invert_field(species, mean, dressing, physics::DEFAULT_INVERT_TOL)?;
    let gamma = physics::running_gamma(species, b0, dressing)?;
    let field: Vec<f64> = omega.iter().map(|w| (w - mean) / gamma).collect();
    power_spectrum(&field, phase.fs, resolution_hz)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSuppression {
    pub frequency_hz: f64,
    pub before_rms_t: f64,
    pub after_rms_t: f64,
    pub suppression_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfcTrial {
    pub trial: usize,
    pub seed: u64,
    pub calibration: HarmonicFit,
    /// Noise amplitude without compensation, calibration band (T).
    pub before_t: f64,
    /// With compensation, compensated band (T).
    pub after_t: f64,
    /// With compensation, calibration band (T).
    pub after_wide_t: f64,
    pub suppression_db: f64,
    pub suppression_wide_db: f64,
    pub harmonics: Vec<HarmonicSuppression>,
    pub actuator_clipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfcReport {
    pub seed: u64,
    pub line_drift_hz: f64,
    pub actuator_time_constant_s: f64,
    pub suppression_db: Summary,
    pub suppression_wide_db: Summary,
    /// Mean per-harmonic suppression, ordered by frequency (dB).
    pub harmonic_suppression_db: Vec<(f64, f64)>,
    pub trials: Vec<FfcTrial>,
    /// Field spectra of the first trial.
    pub spectrum_before: SpectrumEstimate,
    pub spectrum_after: SpectrumEstimate,
}

impl FfcReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("trial,seed,before_t,after_t,after_wide_t,suppression_db,suppression_wide_db");
        if let Some(t) = self.trials.first() {
            for h in &t.harmonics {
                s += &format!(",suppression_{}hz_db", h.frequency_hz);
            }
        }
        s.push('\n');
        for t in &self.trials {
            s += &format!(
                "{},{},{},{},{},{},{}",
                t.trial, t.seed, t.before_t, t.after_t, t.after_wide_t, t.suppression_db, t.suppression_wide_db
            );
            for h in &t.harmonics {
                s += &format!(",{}", h.suppression_db);
            }
            s.push('\n');
        }
        s
    }
}

struct TrialOutput {
    row: FfcTrial,
    before: SpectrumEstimate,
    after: SpectrumEstimate,
}

fn ffc_trial_full(scenario: &Scenario, index: usize) -> Result<TrialOutput> {
    let species = scenario.species()?;
    let dressing = scenario.dressing();
    let c = &scenario.compensation;
    let fs = scenario.record.fs_hz;
    let seed = seed_of(scenario, index);
    let line = scenario.field.line_frequency_hz;

    // calibration
    let cal = simulate_shot(scenario, &species, trial_seed(seed, 0), c.calibration_duration_s, None)?;
    let cal_rec = reconstruct(&cal.record, &scenario.reconstruction(c.calibration_band_hz, None))?;
    let fit = fit_harmonics(&cal_rec.phase, line, c.n_harmonics, &species, &dressing)?;

    // uncompensated reference
    let duration = scenario.record.duration_s;
    let bare = simulate_shot(scenario, &species, trial_seed(seed, 1), duration, None)?;
    let bare_rec = reconstruct(&bare.record, &scenario.reconstruction(c.calibration_band_hz, None))?;
    let before = field_spectrum_from_phase(&bare_rec.phase, &species, &dressing, c.spectrum_resolution_hz)?;

    // compensated shot
    let drive = compensation_waveform(&fit, &c.field(), fs, duration)?;
    let comp = simulate_shot(scenario, &species, trial_seed(seed, 2), duration, Some(&drive))?;
    let narrow = reconstruct(&comp.record, &scenario.reconstruction(c.compensated_band_hz, None))?;
    let wide = reconstruct(&comp.record, &scenario.reconstruction(c.calibration_band_hz, None))?;
    let after = field_spectrum_from_phase(&narrow.phase, &species, &dressing, c.spectrum_resolution_hz)?;
    let after_wide = field_spectrum_from_phase(&wide.phase, &species, &dressing, c.spectrum_resolution_hz)?;

    let before_t = rms_noise_amplitude(&before, c.noise_f_max_hz)?;
    let after_t = rms_noise_amplitude(&after, c.noise_f_max_hz)?;
    let after_wide_t = rms_noise_amplitude(&after_wide, c.noise_f_max_hz)?;

    // residual harmonics, read through the wide band so the narrow band's
    // edge roll-off does not flatter the highest harmonic
    let residual = fit_harmonics(&wide.phase, line, c.n_harmonics, &species, &dressing)?;
    let harmonics = fit
        .components
        .iter()
        .zip(&residual.components)
        .map(|(b, a)| HarmonicSuppression {
            frequency_hz: b.component.frequency_hz,
            before_rms_t: b.component.rms_t,
            after_rms_t: a.component.rms_t,
            suppression_db: 20.0 * (b.component.rms_t / a.component.rms_t).log10(),
        })
        .collect();

    Ok(TrialOutput {
        row: FfcTrial {
            trial: index,
            seed,
            calibration: fit,
            before_t,
            after_t,
            after_wide_t,
            suppression_db: 20.0 * (before_t / after_t).log10(),
            suppression_wide_db: 20.0 * (before_t / after_wide_t).log10(),
            harmonics,
            actuator_clipped: drive.clipped,
        },
        before,
        after,
    })
}

/// One trial of the cycle, replayable from its index.
pub fn ffc_trial(scenario: &Scenario, index: usize) -> Result<FfcTrial> {
    Ok(ffc_trial_full(scenario, index)?.row)
}

pub fn run_ffc_cycle(scenario: &Scenario) -> Result<FfcReport> {
    if scenario.field.harmonics.is_empty() {
        return Err(Error::Config("the cancellation cycle needs line harmonics".into()));
    }
    let mut outputs: Vec<TrialOutput> =
        (0..scenario.trials).into_par_iter().map(|i| ffc_trial_full(scenario, i)).collect::<Result<_>>()?;
    let first = outputs.remove(0);
    let (spectrum_before, spectrum_after) = (first.before, first.after);
    let mut trials = vec![first.row];
    trials.extend(outputs.into_iter().map(|o| o.row));

    let col = |f: &dyn Fn(&FfcTrial) -> f64| -> Vec<f64> { trials.iter().map(f).collect() };
    let harmonic_suppression_db = (0..trials[0].harmonics.len())
        .map(|j| {
            let v = col(&|t| t.harmonics[j].suppression_db);
            (trials[0].harmonics[j].frequency_hz, v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    Ok(FfcReport {
        seed: scenario.seed,
        line_drift_hz: scenario.field.line_drift_hz,
        actuator_time_constant_s: scenario.compensation.actuator_time_constant_s,
        suppression_db: Summary::of(&col(&|t| t.suppression_db)),
        suppression_wide_db: Summary::of(&col(&|t| t.suppression_wide_db)),
        harmonic_suppression_db,
        trials,
        spectrum_before,
        spectrum_after,
    })
}
