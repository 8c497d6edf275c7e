//! Scenario files: one TOML document per experiment, every physical key
//! carrying its unit as a suffix.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fieldmodel::{CompensationField, FieldModel, HarmonicComponent};
use crate::physics::MicrowaveDressing;
use crate::reconstruct::ReconstructionOptions;
use crate::signalsim::{sigma_for_snr, DecayModel};
use crate::species::AtomicSpecies;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicConfig {
    pub frequency_hz: f64,
    pub rms_t: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    pub b0_t: f64,
    pub noise_asd_t_rthz: f64,
    pub line_frequency_hz: f64,
    pub line_drift_hz: f64,
    pub harmonics: Vec<HarmonicConfig>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        let lab = FieldModel::laboratory();
        Self {
            b0_t: lab.b0_t,
            noise_asd_t_rthz: lab.noise_asd_t_rthz,
            line_frequency_hz: 50.0,
            line_drift_hz: 0.0,
            harmonics: Vec::new(),
        }
    }
}

impl FieldConfig {
    pub fn laboratory_harmonics() -> Vec<HarmonicConfig> {
        FieldModel::laboratory()
            .harmonics
            .iter()
            .map(|h| HarmonicConfig { frequency_hz: h.frequency_hz, rms_t: h.rms_t, phase_rad: h.phase_rad })
            .collect()
    }

    pub fn model(&self, seed: u64) -> FieldModel {
        FieldModel {
            b0_t: self.b0_t,
            noise_asd_t_rthz: self.noise_asd_t_rthz,
            harmonics: self
                .harmonics
                .iter()
                .map(|h| HarmonicComponent::new(h.frequency_hz, h.rms_t, h.phase_rad))
                .collect(),
            line_frequency_hz: self.line_frequency_hz,
            line_drift_hz: self.line_drift_hz,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DressingConfig {
    pub enabled: bool,
    pub rabi_hz: f64,
    pub detuning_hz: f64,
}

impl Default for DressingConfig {
    fn default() -> Self {
        Self { enabled: false, rabi_hz: 6.0e3, detuning_hz: 150.0e3 }
    }
}

impl DressingConfig {
    pub fn dressing(&self) -> MicrowaveDressing {
        MicrowaveDressing { rabi: TAU * self.rabi_hz, detuning: TAU * self.detuning_hz, enabled: self.enabled }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordSettings {
    pub fs_hz: f64,
    pub duration_s: f64,
    /// Zero selects float mode.
    pub bit_depth: u32,
    pub a0_v: f64,
    pub lifetime_s: f64,
    /// Full-bandwidth SNR at the start of the FID.
    pub initial_snr_db: f64,
    /// Zero selects 4 A0.
    pub full_scale_v: f64,
    pub detector_only_s: f64,
    pub probe_on_s: f64,
    pub detector_noise_fraction: f64,
}

impl Default for RecordSettings {
    fn default() -> Self {
        Self {
            fs_hz: 5e6,
            duration_s: 1.0,
            bit_depth: 16,
            a0_v: 1.0,
            lifetime_s: 0.530,
            initial_snr_db: -11.1,
            full_scale_v: 0.0,
            detector_only_s: 0.05,
            probe_on_s: 0.05,
            detector_noise_fraction: 0.3,
        }
    }
}

impl RecordSettings {
    pub fn decay(&self) -> DecayModel {
        DecayModel { a0_v: self.a0_v, lifetime_s: self.lifetime_s }
    }

    pub fn sigma_v(&self) -> f64 {
        sigma_for_snr(self.a0_v, self.initial_snr_db)
    }

    pub fn bit_depth(&self) -> Option<u32> {
        (self.bit_depth > 0).then_some(self.bit_depth)
    }

    pub fn full_scale(&self) -> Option<f64> {
        (self.full_scale_v > 0.0).then_some(self.full_scale_v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterConfig {
    pub band_hz: f64,
    /// Zero locates the carrier from the spectrum.
    pub center_hz: f64,
    pub prototype_order: usize,
    pub edge_guard_samples: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self { band_hz: 500.0, center_hz: 0.0, prototype_order: 6, edge_guard_samples: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub weighted: bool,
    pub snr_window_s: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { weighted: true, snr_window_s: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompensationConfig {
    pub actuator_time_constant_s: f64,
    pub max_amplitude_t: f64,
    pub bandwidth_limit_hz: f64,
    pub trigger_phase_error_rad: f64,
    pub calibration_band_hz: f64,
    pub calibration_duration_s: f64,
    pub compensated_band_hz: f64,
    pub n_harmonics: usize,
    /// Upper limit of the noise-amplitude integral (Hz).
    pub noise_f_max_hz: f64,
    /// Resolution of the field spectra (Hz).
    pub spectrum_resolution_hz: f64,
}

impl Default for CompensationConfig {
    fn default() -> Self {
        let c = CompensationField::default();
        Self {
            actuator_time_constant_s: c.actuator_time_constant_s,
            max_amplitude_t: c.max_amplitude_t,
            bandwidth_limit_hz: c.bandwidth_limit_hz,
            trigger_phase_error_rad: 0.0,
            calibration_band_hz: 5e3,
            calibration_duration_s: 0.32,
            compensated_band_hz: 500.0,
            n_harmonics: 3,
            noise_f_max_hz: 300.0,
            spectrum_resolution_hz: 2.0,
        }
    }
}

impl CompensationConfig {
    pub fn field(&self) -> CompensationField {
        CompensationField {
            harmonics: Vec::new(),
            actuator_time_constant_s: self.actuator_time_constant_s,
            max_amplitude_t: self.max_amplitude_t,
            bandwidth_limit_hz: self.bandwidth_limit_hz,
            trigger_phase_error_rad: self.trigger_phase_error_rad,
        }
    }
}

/// Parameters specific to each Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Full-bandwidth SNR points for the bound sweep (dB).
    pub snr_grid_db: Vec<f64>,
    /// Samples entering each fit in the bound sweep.
    pub fit_samples: usize,
    /// Ramsey durations (s); empty selects fractions of the critical time.
    pub tau_grid_s: Vec<f64>,
    pub ramsey_fs_hz: f64,
    /// Window for the early residual spectrum (s) and the wide band used there.
    pub knee_window_s: f64,
    pub knee_band_hz: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_grid_db: Vec::new(),
            fit_samples: 50_000,
            tau_grid_s: Vec::new(),
            ramsey_fs_hz: 1e4,
            knee_window_s: 0.2,
            knee_band_hz: 5e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SingleShot,
    CrlbSweep,
    FringeHop,
    Ffc,
    Harmonics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ExperimentKind,
    /// Base of every random stream; required.
    pub seed: u64,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub dressing: DressingConfig,
    #[serde(default)]
    pub record: RecordSettings,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub compensation: CompensationConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Path of a constants file; empty uses the bundled table.
    #[serde(default)]
    pub species_file: String,
}

fn one() -> usize {
    1
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Fully resolved TOML, defaults included.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn species(&self) -> Result<AtomicSpecies> {
        if self.species_file.is_empty() {
            Ok(AtomicSpecies::rb87())
        } else {
            AtomicSpecies::load(&self.species_file)
        }
    }

    pub fn dressing(&self) -> MicrowaveDressing {
        self.dressing.dressing()
    }

    pub fn reconstruction(&self, band_hz: f64, center_hz: Option<f64>) -> ReconstructionOptions {
        ReconstructionOptions {
            band_hz,
            center_hz: center_hz.or((self.filter.center_hz > 0.0).then_some(self.filter.center_hz)),
            prototype_order: self.filter.prototype_order,
            edge_guard: self.filter.edge_guard_samples,
            weighted: self.estimator.weighted,
            snr_window_s: self.estimator.snr_window_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        let r = &self.record;
        if !(r.fs_hz > 0.0) || !(r.duration_s > 0.0) {
            return bad("record.fs_hz and record.duration_s must be positive");
        }
        if !(r.a0_v > 0.0) || !(r.lifetime_s > 0.0) {
            return bad("record.a0_v and record.lifetime_s must be positive");
        }
        if r.bit_depth == 1 || r.bit_depth > 32 {
            return bad("record.bit_depth must be 0 (float) or 2..=32");
        }
        if !(self.filter.band_hz > 0.0) || self.filter.prototype_order == 0 {
            return bad("filter.band_hz and filter.prototype_order must be positive");
        }
        if !self.field.b0_t.is_finite() || !(self.field.noise_asd_t_rthz >= 0.0) {
            return bad("field.b0_t must be finite and field.noise_asd_t_rthz >= 0");
        }
        self.field.model(self.seed).validate()?;
        self.dressing().validate()?;
        if self.kind == ExperimentKind::CrlbSweep && self.sweep.snr_grid_db.is_empty() {
            return bad("a crlb_sweep needs sweep.snr_grid_db");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_resolves_defaults_and_round_trips() {
        let s = Scenario::from_toml("name = \"x\"\nkind = \"single_shot\"\nseed = 3\n").unwrap();
        assert_eq!(s.record.fs_hz, 5e6);
        assert_eq!(s.filter.band_hz, 500.0);
        let text = s.to_toml().unwrap();
        assert_eq!(Scenario::from_toml(&text).unwrap(), s);
    }

    #[test]
    fn seed_is_required_and_unknown_keys_rejected() {
        assert!(Scenario::from_toml("name = \"x\"\nkind = \"ffc\"\n").is_err());
        let e = Scenario::from_toml("name=\"x\"\nkind=\"ffc\"\nseed=1\n[field]\nb0=1.0\n").unwrap_err();
        assert!(e.is_validation());
    }

    #[test]
    fn harmonics_table() {
        let text = r#"
name = "lab"
kind = "ffc"
seed = 9
[field]
b0_t = 8.6e-6
harmonics = [ { frequency_hz = 50.0, rms_t = 41.92e-9, phase_rad = 0.4 } ]
"#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.field.model(1).harmonics.len(), 1);
    }
}
