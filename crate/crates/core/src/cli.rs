//! Batch command-line interface. Exit codes: 0 success, 2 invalid input,
//! 3 numeric or estimation failure; failures also print a JSON object on
//! stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dsp::{power_spectrum, spectrogram};
use crate::error::{Error, Result};
use crate::estimation::{fit_dc_phase, fit_harmonics};
use crate::experiments::{self, seed_of, simulate_shot, ExperimentReport, Scenario};
use crate::fieldmodel::{compensation_waveform, CompensationField};
use crate::physics::{self, MicrowaveDressing};
use crate::reconstruct::{reconstruct, ReconstructionOptions};
use crate::record::{self, json_err};
use crate::signalsim::PolarimeterRecord;
use crate::species::AtomicSpecies;

#[derive(Debug, Parser)]
#[command(name = "fidtwin", version, about = "Free-induction-decay magnetometry simulator and phase estimator")]
pub struct Cli {
    /// Progress messages on stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one shot from a scenario and write a FIDR record.
    Simulate(SimulateArgs),
    /// Reconstruct the phase of a record and write it as CSV.
    Reconstruct(ReconstructArgs),
    /// Fit the dc field of a record.
    Estimate(EstimateArgs),
    /// Fit line harmonics on a calibration record and emit the compensation.
    CalibrateFfc(CalibrateArgs),
    /// Run the Monte Carlo experiment a scenario describes.
    Mc(McArgs),
    /// Power spectrum (and optionally a spectrogram) of a record's FID.
    Spectra(SpectraArgs),
    /// Tabulate Larmor frequency, quadratic shift and gyromagnetic ratio.
    Physics(PhysicsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Replaces the scenario's base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trial index whose seed is used.
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
    /// Also write the record as `t_s,volts` CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also write the simulated field as `t_s,b_t` CSV.
    #[arg(long)]
    pub field_csv: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct BandArgs {
    /// Passband width (Hz).
    #[arg(long, default_value_t = 500.0)]
    pub band: f64,
    /// Passband centre (Hz); located from the spectrum when omitted.
    #[arg(long)]
    pub center_hz: Option<f64>,
    /// Samples dropped at each end of the phase.
    #[arg(long, default_value_t = 1000)]
    pub edge_guard: usize,
    /// Ordinary instead of SNR-weighted least squares.
    #[arg(long)]
    pub unweighted: bool,
}

impl BandArgs {
    fn options(&self) -> ReconstructionOptions {
        ReconstructionOptions {
            band_hz: self.band,
            center_hz: self.center_hz,
            edge_guard: self.edge_guard,
            weighted: !self.unweighted,
            ..ReconstructionOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub band: BandArgs,
    /// `t_s,phi_rad,weight` CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Windowed SNR trace as CSV.
    #[arg(long)]
    pub snr_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub band: BandArgs,
    #[command(flatten)]
    pub physics: DressingArgs,
    /// DcEstimate JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Residual phase spectrum as CSV.
    #[arg(long)]
    pub residual_psd: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[command(flatten)]
    pub band: BandArgs,
    #[command(flatten)]
    pub physics: DressingArgs,
    #[arg(long, default_value_t = 50.0)]
    pub line_hz: f64,
    #[arg(long, default_value_t = 3)]
    pub harmonics: usize,
    /// HarmonicFit JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Compensation drive as `t_s,b_t` CSV.
    #[arg(long)]
    pub waveform: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub waveform_duration_s: f64,
    #[arg(long, default_value_t = 40e-6)]
    pub actuator_time_constant_s: f64,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for report.json, trials.csv and figure data.
    #[arg(long, default_value = "mc_out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, default_value_t = 10.0)]
    pub resolution_hz: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub spectrogram: Option<PathBuf>,
    #[arg(long, default_value_t = 0.02)]
    pub window_s: f64,
    #[arg(long, default_value_t = 0.01)]
    pub hop_s: f64,
    /// Spectrogram band as `low,high` in Hz.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub band: Option<Vec<f64>>,
}

#[derive(Debug, Args, Clone)]
pub struct DressingArgs {
    /// Microwave Rabi frequency (Hz); dressing is on when given.
    #[arg(long)]
    pub rabi_hz: Option<f64>,
    #[arg(long, default_value_t = 150e3)]
    pub detuning_hz: f64,
    /// Species constants file instead of the bundled table.
    #[arg(long)]
    pub species: Option<PathBuf>,
}

impl DressingArgs {
    fn resolve(&self) -> Result<(AtomicSpecies, MicrowaveDressing)> {
        let species = match &self.species {
            Some(p) => AtomicSpecies::load(p)?,
            None => AtomicSpecies::rb87(),
        };
        let dressing = match self.rabi_hz {
            Some(r) => MicrowaveDressing::new(std::f64::consts::TAU * r, std::f64::consts::TAU * self.detuning_hz)?,
            None => MicrowaveDressing::none(),
        };
        Ok((species, dressing))
    }
}

#[derive(Debug, Args)]
pub struct PhysicsArgs {
    #[arg(long, default_value_t = 0.0)]
    pub b_min_t: f64,
    #[arg(long, default_value_t = 100e-6)]
    pub b_max_t: f64,
    #[arg(long, default_value_t = 11)]
    pub points: usize,
    /// Explicit comma-separated field grid (T), overriding the range.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[command(flatten)]
    pub physics: DressingArgs,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `b_t,larmor_hz,quadratic_hz,gamma_rad_per_s_t` rows for each field.
pub fn physics_table(species: &AtomicSpecies, grid: &[f64], dressing: &MicrowaveDressing) -> Result<String> {
    let mut out = String::from("b_t,larmor_hz,quadratic_hz,gamma_rad_per_s_t\n");
    let tau = std::f64::consts::TAU;
    for &b in grid {
        let w = physics::larmor_frequency(species, b, dressing)?;
        let q = physics::quadratic_shift(species, b, dressing)?;
        // zero field reports the limiting value
        let g = physics::running_gamma(species, b.max(f64::MIN_POSITIVE), dressing)?;
        out += &format!("{b:e},{},{},{g}\n", w / tau, q / tau);
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value).map_err(json_err)?)?;
    Ok(())
}

fn read_record(path: &Path) -> Result<PolarimeterRecord> {
    if !path.exists() {
        return Err(Error::Config(format!("input {} does not exist", path.display())));
    }
    record::read_fidr(path)
}

fn note(verbose: bool, msg: &str) {
    if verbose {
        eprintln!("{msg}");
    }
}

fn simulate(a: &SimulateArgs, verbose: bool) -> Result<()> {
    let mut sc = Scenario::load(&a.config)?;
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    let species = sc.species()?;
    let seed = seed_of(&sc, a.trial);
    note(verbose, &format!("simulating {} s at {} Sa/s, trial seed {seed}", sc.record.duration_s, sc.record.fs_hz));
    let shot = simulate_shot(&sc, &species, seed, sc.record.duration_s, None)?;
    let provenance = serde_json::json!({
        "scenario": sc,
        "trial": a.trial,
        "trial_seed": seed,
        "field": shot.field.provenance,
    });
    record::write_fidr(&a.out, &shot.record, provenance)?;
    if let Some(p) = &a.csv {
        record::write_csv(p, &shot.record)?;
    }
    if let Some(p) = &a.field_csv {
        fs::write(p, shot.field.to_csv())?;
    }
    Ok(())
}

fn reconstruct_cmd(a: &ReconstructArgs) -> Result<()> {
    let rec = reconstruct(&read_record(&a.input)?, &a.band.options())?;
    let p = &rec.phase;
    let mut s = String::from("t_s,phi_rad,weight\n");
    for i in 0..p.len() {
        let w = p.weights.as_ref().map_or(1.0, |w| w[i]);
        s += &format!("{},{},{}\n", p.time(i), p.values[i], w);
    }
    fs::write(&a.out, s)?;
    if let (Some(path), Some(trace)) = (&a.snr_csv, &rec.snr) {
        let mut s = String::from("t_s,snr\n");
        for (t, v) in trace.times.iter().zip(&trace.snr) {
            s += &format!("{t},{v}\n");
        }
        fs::write(path, s)?;
    }
    if !p.discontinuities.is_empty() {
        return Err(Error::Unwrap(format!("{} discontinuities in the reconstructed phase", p.discontinuities.len())));
    }
    Ok(())
}

fn estimate_cmd(a: &EstimateArgs) -> Result<()> {
    let (species, dressing) = a.physics.resolve()?;
    let rec = reconstruct(&read_record(&a.input)?, &a.band.options())?;
    if !rec.phase.discontinuities.is_empty() {
        return Err(Error::Unwrap(format!(
            "{} discontinuities in the {} Hz band; narrow the band",
            rec.phase.discontinuities.len(),
            a.band.band
        )));
    }
    let mut est = fit_dc_phase(&rec.phase, None, &species, &dressing)?;
    if let Some(path) = &a.residual_psd {
        let spec = power_spectrum(&est.residuals, rec.phase.fs, 10f64.max(4.0 / est.tau_s))?;
        fs::write(path, spec.to_csv())?;
    }
    est.residuals.clear();
    write_json(&a.out, &est)
}

fn calibrate_cmd(a: &CalibrateArgs) -> Result<()> {
    let (species, dressing) = a.physics.resolve()?;
    let record = read_record(&a.input)?;
    let rec = reconstruct(&record, &a.band.options())?;
    let fit = fit_harmonics(&rec.phase, a.line_hz, a.harmonics, &species, &dressing)?;
    write_json(&a.out, &fit)?;
    if let Some(path) = &a.waveform {
        let comp = CompensationField { actuator_time_constant_s: a.actuator_time_constant_s, ..CompensationField::default() };
        let drive = compensation_waveform(&fit, &comp, record.fs, a.waveform_duration_s)?;
        if drive.clipped {
            eprintln!("warning: compensation drive saturates the actuator");
        }
        fs::write(path, drive.to_csv())?;
    }
    Ok(())
}

fn mc_cmd(a: &McArgs, verbose: bool) -> Result<()> {
    let mut sc = Scenario::load(&a.config)?;
    if let Some(s) = a.seed {
        sc.seed = s;
    }
    if let Some(t) = a.trials {
        sc.trials = t;
    }
    sc.validate()?;
    fs::create_dir_all(&a.out_dir)?;
    fs::write(a.out_dir.join("scenario.resolved.toml"), sc.to_toml()?)?;
    note(verbose, &format!("running {:?} with {} trials, seed {}", sc.kind, sc.trials, sc.seed));
    let report = experiments::run(&sc)?;
    write_json(&a.out_dir.join("report.json"), &report)?;
    fs::write(a.out_dir.join("trials.csv"), report.to_csv())?;
    match &report {
        ExperimentReport::Ffc(r) => {
            fs::write(a.out_dir.join("field_psd_before.csv"), r.spectrum_before.to_csv())?;
            fs::write(a.out_dir.join("field_psd_after.csv"), r.spectrum_after.to_csv())?;
        }
        ExperimentReport::SingleShot(r) => {
            fs::write(a.out_dir.join("residual_psd.csv"), r.example_residual_spectrum.to_csv())?;
            if let Some(k) = &r.knee {
                fs::write(a.out_dir.join("residual_psd_early_wide.csv"), k.spectrum.to_csv())?;
            }
            if let Some(t) = &r.example_snr {
                let mut s = String::from("t_s,snr\n");
                for (t, v) in t.times.iter().zip(&t.snr) {
                    s += &format!("{t},{v}\n");
                }
                fs::write(a.out_dir.join("snr.csv"), s)?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn spectra_cmd(a: &SpectraArgs) -> Result<()> {
    let record = read_record(&a.input)?;
    let fid = record.fid();
    fs::write(&a.out, power_spectrum(fid, record.fs, a.resolution_hz)?.to_csv())?;
    if let Some(path) = &a.spectrogram {
        let band = a.band.as_ref().map(|b| (b[0], b[1]));
        fs::write(path, spectrogram(fid, record.fs, a.window_s, a.hop_s, band)?.to_csv())?;
    }
    Ok(())
}

fn physics_cmd(a: &PhysicsArgs) -> Result<()> {
    let (species, dressing) = a.physics.resolve()?;
    let grid = match &a.grid {
        Some(g) => g.clone(),
        None if a.points < 2 => vec![a.b_min_t],
        None => (0..a.points)
            .map(|i| a.b_min_t + (a.b_max_t - a.b_min_t) * i as f64 / (a.points - 1) as f64)
            .collect(),
    };
    let table = physics_table(&species, &grid, &dressing)?;
    match &a.out {
        Some(p) => fs::write(p, table)?,
        None => print!("{table}"),
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, cli.verbose),
        Command::Reconstruct(a) => reconstruct_cmd(a),
        Command::Estimate(a) => estimate_cmd(a),
        Command::CalibrateFfc(a) => calibrate_cmd(a),
        Command::Mc(a) => mc_cmd(a, cli.verbose),
        Command::Spectra(a) => spectra_cmd(a),
        Command::Physics(a) => physics_cmd(a),
    }
}

/// Exit code for a dispatch outcome.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(e) if e.is_validation() => 2,
        Err(_) => 3,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = dispatch(&cli);
    let code = exit_code(&result);
    if let Err(e) = &result {
        let body = serde_json::json!({ "error": e.kind(), "message": e.to_string(), "exit_code": code });
        eprintln!("{body}");
    }
    code
}
