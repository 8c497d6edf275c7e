//! Full single-shot dc pipeline: field, phase, record, passband, analytic
//! signal, unwrap, weighted fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{seed_of, simulate_shot, Scenario, Shot, Summary};
use crate::dsp::SpectrumEstimate;
use crate::error::{Error, Result};
use crate::estimation::{budget_from_residuals, fit_dc_phase, formulas, DcEstimate};
use crate::reconstruct::{reconstruct, Reconstruction};
use crate::signalsim::SnrTrace;
use crate::species::AtomicSpecies;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotTrial {
    pub trial: usize,
    pub seed: u64,
    pub b_est: f64,
    /// Weighted fit of the noiseless phase over the same samples (T).
    pub b_true: f64,
    pub delta_b_dc: f64,
    pub delta_b_detector: Option<f64>,
    pub weighted_mean_snr_db: f64,
    /// `(b_est - b_true) / delta_b_dc`
    pub z: f64,
    pub snr0_db: f64,
    pub lifetime_s: f64,
}

/// Corner of the residual phase spectrum, read from an early wide-band window
/// where the white shot-noise plateau is visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KneeDiagnostic {
    pub window_s: f64,
    pub band_hz: f64,
    pub corner_hz: f64,
    /// Corner predicted from the injected field noise and the window's mean SNR.
    pub model_corner_hz: f64,
    /// Band-averaged measured over model spectrum over the fit range (dB).
    pub overlay_db: f64,
    pub spectrum: SpectrumEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleShotReport {
    pub seed: u64,
    pub b0_t: f64,
    pub trials: Vec<ShotTrial>,
    pub delta_b_dc_t: Summary,
    pub within_three_sigma: usize,
    /// First trial in full: estimate with residual budget, SNR trace,
    /// residual spectrum and the corner diagnostic.
    pub example: DcEstimate,
    pub example_snr: Option<SnrTrace>,
    pub example_residual_spectrum: SpectrumEstimate,
    pub knee: Option<KneeDiagnostic>,
}

impl SingleShotReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "trial,seed,b_est_t,b_true_t,delta_b_dc_t,delta_b_detector_t,weighted_mean_snr_db,z,snr0_db,lifetime_s\n",
        );
        for t in &self.trials {
            s += &format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                t.trial,
                t.seed,
                t.b_est,
                t.b_true,
                t.delta_b_dc,
                t.delta_b_detector.unwrap_or(f64::NAN),
                t.weighted_mean_snr_db,
                t.z,
                t.snr0_db,
                t.lifetime_s
            );
        }
        s
    }
}

/// Everything one shot produces.
pub struct ShotOutcome {
    pub shot: Shot,
    pub reconstruction: Reconstruction,
    pub estimate: DcEstimate,
    pub row: ShotTrial,
}

/// Runs one trial of the pipeline. A reconstruction with unwrap
/// discontinuities is rejected.
pub fn run_single_shot(scenario: &Scenario, index: usize) -> Result<ShotOutcome> {
    let species = scenario.species()?;
    let dressing = scenario.dressing();
    let seed = seed_of(scenario, index);
    let shot = simulate_shot(scenario, &species, seed, scenario.record.duration_s, None)?;
    let rec = reconstruct(&shot.record, &scenario.reconstruction(scenario.filter.band_hz, None))?;
    if let Some(&first) = rec.phase.discontinuities.first() {
        return Err(Error::Unwrap(format!(
            "{} phase discontinuities in the {} Hz band, first at t = {:.4} s; narrow the band or shorten the fit",
            rec.phase.discontinuities.len(),
            scenario.filter.band_hz,
            rec.phase.time(first)
        )));
    }
    let est = fit_dc_phase(&rec.phase, None, &species, &dressing)?;

    // the same fit applied to the noiseless phase on the same samples
    let guard = scenario.filter.edge_guard_samples;
    let mut truth = shot.truth.slice(guard, guard + rec.phase.len());
    truth.weights = rec.phase.weights.clone();
    let b_true = fit_dc_phase(&truth, None, &species, &dressing)?.b_est;

    let (snr0, lifetime) = rec.snr_fit.unwrap_or((f64::NAN, f64::NAN));
    let row = ShotTrial {
        trial: index,
        seed,
        b_est: est.b_est,
        b_true,
        delta_b_dc: est.delta_b_dc,
        delta_b_detector: est.delta_b_detector,
        weighted_mean_snr_db: formulas::linear_to_db(est.weighted_mean_snr),
        z: (est.b_est - b_true) / est.delta_b_dc,
        snr0_db: formulas::linear_to_db(snr0),
        lifetime_s: lifetime,
    };
    Ok(ShotOutcome { shot, reconstruction: rec, estimate: est, row })
}

fn knee(scenario: &Scenario, species: &AtomicSpecies, shot: &Shot) -> Result<KneeDiagnostic> {
    let sw = &scenario.sweep;
    let rec = reconstruct(&shot.record, &scenario.reconstruction(sw.knee_band_hz, None))?;
    let n = ((sw.knee_window_s * rec.phase.fs) as usize).min(rec.phase.len());
    let early = rec.phase.slice(0, n);
    let est = fit_dc_phase(&early, None, species, &scenario.dressing())?;
    let w = early.weights.as_deref().unwrap_or(&[]);
    let w_mean = if w.is_empty() { 1.0 } else { w.iter().sum::<f64>() / w.len() as f64 };
    let rel: Option<Vec<f64>> = early.weights.as_ref().map(|ws| ws.iter().map(|x| x / w_mean).collect());
    // both levels free here: the point is to see the corner in the data
    let (budget, spectrum) = budget_from_residuals(&est.residuals, rel.as_deref(), early.fs, rec.enbw_hz, 10.0, None)?;

    let fs = early.fs;
    let snr = if w.is_empty() { formulas::db_to_linear(scenario.record.initial_snr_db) } else { w_mean };
    let s_bb = scenario.field.noise_asd_t_rthz.powi(2);
    let model_corner = formulas::corner_frequency(s_bb, snr, fs, est.gamma);
    let (f_lo, f_hi) = (2.0 * spectrum.resolution_hz, 0.35 * rec.enbw_hz);
    let (mut measured, mut model) = (0.0, 0.0);
    for (f, p) in spectrum.frequencies.iter().zip(&spectrum.psd) {
        if *f >= f_lo && *f <= f_hi {
            measured += p;
            model += formulas::phase_noise_psd_model(*f, s_bb, snr, fs, est.gamma)?;
        }
    }
    Ok(KneeDiagnostic {
        window_s: early.duration(),
        band_hz: sw.knee_band_hz,
        corner_hz: budget.corner_frequency_hz,
        model_corner_hz: model_corner,
        overlay_db: formulas::linear_to_db(measured / model),
        spectrum,
    })
}

/// Runs the ensemble. The first trial is also reported in full, with the
/// corner diagnostic when the field carries white noise.
pub fn run_single_shot_pipeline(scenario: &Scenario) -> Result<SingleShotReport> {
    let species = scenario.species()?;
    let first = run_single_shot(scenario, 0)?;
    let mut trials = vec![first.row.clone()];
    let rest: Vec<ShotTrial> = (1..scenario.trials)
        .into_par_iter()
        .map(|i| run_single_shot(scenario, i).map(|o| o.row))
        .collect::<Result<_>>()?;
    trials.extend(rest);

    let knee = if scenario.field.noise_asd_t_rthz > 0.0 && scenario.estimator.weighted {
        Some(knee(scenario, &species, &first.shot)?)
    } else {
        None
    };
    let w_mean = first.reconstruction.phase.weights.as_ref().map(|w| w.iter().sum::<f64>() / w.len() as f64);
    let rel: Option<Vec<f64>> =
        first.reconstruction.phase.weights.as_ref().map(|ws| ws.iter().map(|x| x / w_mean.unwrap_or(1.0)).collect());
    let (_, example_residual_spectrum) = budget_from_residuals(
        &first.estimate.residuals,
        rel.as_deref(),
        first.reconstruction.phase.fs,
        first.reconstruction.enbw_hz,
        10.0,
        None,
    )?;
    let dbs: Vec<f64> = trials.iter().map(|t| t.delta_b_dc).collect();
    Ok(SingleShotReport {
        seed: scenario.seed,
        b0_t: scenario.field.b0_t,
        within_three_sigma: trials.iter().filter(|t| t.z.abs() < 3.0).count(),
        delta_b_dc_t: Summary::of(&dbs),
        trials,
        example: first.estimate,
        example_snr: first.reconstruction.snr,
        example_residual_spectrum,
        knee,
    })
}
