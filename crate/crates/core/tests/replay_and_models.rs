use fidtwin::dsp::power_spectrum;
use fidtwin::experiments::{harmonic_trial, seed_of, simulate_shot, Scenario};
use fidtwin::fieldmodel::{sample_field_trace, FieldModel};
use fidtwin::physics::MicrowaveDressing;
use fidtwin::reconstruct::{reconstruct, ReconstructionOptions};
use fidtwin::signalsim::{integrate_larmor_phase, synthesize_polarimeter_record, DecayModel, RecordConfig};
use fidtwin::species::AtomicSpecies;

const SMALL: &str = r#"
name = "small"
kind = "harmonics"
seed = 42
trials = 4
[field]
b0_t = 8.6e-6
noise_asd_t_rthz = 50e-12
harmonics = [{ frequency_hz = 50.0, rms_t = 20e-9, phase_rad = 0.3 }]
[record]
fs_hz = 200000.0
duration_s = 0.2
initial_snr_db = 10.0
detector_only_s = 0.005
probe_on_s = 0.005
[filter]
band_hz = 3000.0
edge_guard_samples = 2000
"#;

#[test]
fn same_seed_replays_bit_for_bit() {
    let s = Scenario::from_toml(SMALL).unwrap();
    let rb = s.species().unwrap();
    let a = simulate_shot(&s, &rb, seed_of(&s, 2), 0.2, None).unwrap();
    let b = simulate_shot(&s, &rb, seed_of(&s, 2), 0.2, None).unwrap();
    assert_eq!(a.record.volts, b.record.volts);
    assert_eq!(a.field.samples, b.field.samples);
    let c = simulate_shot(&s, &rb, seed_of(&s, 3), 0.2, None).unwrap();
    assert_ne!(a.record.volts, c.record.volts);
}

#[test]
fn trial_does_not_depend_on_ensemble_size() {
    let mut s = Scenario::from_toml(SMALL).unwrap();
    let alone = harmonic_trial(&s, 3).unwrap();
    s.trials = 100;
    assert_eq!(harmonic_trial(&s, 3).unwrap(), alone);
}

#[test]
fn white_field_noise_is_flat_at_model_level() {
    let fs = 2e4;
    let model = FieldModel { noise_asd_t_rthz: 100e-12, seed: 17, ..FieldModel::static_field(8.6e-6) };
    let trace = sample_field_trace(&model, fs, 10.0).unwrap();
    let dev: Vec<f64> = trace.samples.iter().map(|b| b - model.b0_t).collect();
    let psd = power_spectrum(&dev, fs, 1.0).unwrap();
    let mean = psd.band_mean(10.0, fs / 4.0);
    assert!((mean / model.noise_psd() - 1.0).abs() < 0.1, "{mean:e}");
}

#[test]
fn scaling_amplitude_and_noise_together_leaves_phase_unchanged() {
    let fs = 2e5;
    let rb = AtomicSpecies::rb87();
    let trace = sample_field_trace(&FieldModel::static_field(8.6e-6), fs, 0.1).unwrap();
    let phase = integrate_larmor_phase(&trace, &rb, &MicrowaveDressing::none()).unwrap();
    let opts = ReconstructionOptions { weighted: true, edge_guard: 2000, ..ReconstructionOptions::with_band(3e3) };
    let run = |a0: f64| {
        let decay = DecayModel { a0_v: a0, lifetime_s: 0.2 };
        let cfg = RecordConfig { sigma_v: 0.3 * a0, bit_depth: None, seed: 8, detector_only_s: 0.005, probe_on_s: 0.005, ..RecordConfig::default() };
        reconstruct(&synthesize_polarimeter_record(&phase, &decay, &cfg).unwrap(), &opts).unwrap()
    };
    let (one, two) = (run(1.0), run(2.0));
    let worst = one.phase.values.iter().zip(&two.phase.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-9, "{worst}");
    let (w1, w2) = (one.phase.weights.unwrap(), two.phase.weights.unwrap());
    assert!(w1.iter().zip(&w2).all(|(a, b)| (a / b - 1.0).abs() < 1e-9));
}
