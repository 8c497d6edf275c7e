//! Recovers the Larmor phase from a noisy record and fits the SNR decay.

use fidtwin::experiments::{simulate_shot, Scenario};
use fidtwin::reconstruct::reconstruct;

const SCENARIO: &str = r#"
name = "reconstruct_example"
kind = "single_shot"
seed = 5
[field]
b0_t = 8.6e-6
noise_asd_t_rthz = 20e-12
[record]
fs_hz = 500000.0
duration_s = 0.3
lifetime_s = 0.2
initial_snr_db = 0.0
[filter]
band_hz = 2000.0
edge_guard_samples = 5000
"#;

fn main() -> fidtwin::Result<()> {
    let scenario = Scenario::from_toml(SCENARIO)?;
    let species = scenario.species()?;
    let shot = simulate_shot(&scenario, &species, 5, scenario.record.duration_s, None)?;
    let rec = reconstruct(&shot.record, &scenario.reconstruction(scenario.filter.band_hz, None))?;

    println!("passband {:.1}-{:.1} Hz, ENBW {:.0} Hz", rec.filter.low_edge_hz, rec.filter.high_edge_hz, rec.enbw_hz);
    println!("{} phase samples, {} discontinuities", rec.phase.len(), rec.phase.discontinuities.len());
    if let Some((snr0, lifetime)) = rec.snr_fit {
        println!("SNR fit: {:.1} dB initial, lifetime {:.0} ms", 10.0 * snr0.log10(), lifetime * 1e3);
    }
    // compare slopes: the constant phase offset is not observable
    let guard = scenario.filter.edge_guard_samples;
    let truth = shot.truth.slice(guard, guard + rec.phase.len());
    let n = rec.phase.len() - 1;
    let slope = |v: &[f64]| (v[n] - v[0]) * rec.phase.fs / n as f64;
    println!(
        "mean frequency: recovered {:.3} Hz, true {:.3} Hz",
        slope(&rec.phase.values) / std::f64::consts::TAU,
        slope(&truth.values) / std::f64::consts::TAU
    );
    Ok(())
}
