//! Fringe-hop Monte Carlo at reduced trial count, driven from a scenario.

use fidtwin::experiments::{run, ExperimentReport, Scenario};

const SCENARIO: &str = r#"
name = "fringe_example"
kind = "fringe_hop"
seed = 11
trials = 5000
[field]
b0_t = 8.6e-6
noise_asd_t_rthz = 100e-12
[sweep]
ramsey_fs_hz = 10000.0
"#;

fn main() -> fidtwin::Result<()> {
    let scenario = Scenario::from_toml(SCENARIO)?;
    let ExperimentReport::FringeHop(r) = run(&scenario)? else { unreachable!() };
    println!("critical time {:.2} ms", r.critical_time_s * 1e3);
    for p in &r.points {
        println!(
            "tau/tau_c {:.2}: hops {:.2}% (oracle {:.2}%), sigma {:.3} rad (model {:.3})",
            p.tau_over_critical,
            100.0 * p.hop_fraction,
            100.0 * p.predicted_hop_fraction,
            p.sigma_phi_rad,
            p.predicted_sigma_rad
        );
    }
    Ok(())
}
