//! Simulates a polarimeter record and writes it as a .fidr file with its
//! JSON sidecar.

use fidtwin::fieldmodel::{sample_field_trace, FieldModel};
use fidtwin::physics::MicrowaveDressing;
use fidtwin::record::{read_fidr, sidecar_path, write_fidr};
use fidtwin::signalsim::{integrate_larmor_phase, sigma_for_snr, synthesize_polarimeter_record, DecayModel, RecordConfig};
use fidtwin::species::AtomicSpecies;

fn main() -> fidtwin::Result<()> {
    let fs = 5e5;
    let field = sample_field_trace(&FieldModel { seed: 1, ..FieldModel::static_field(8.6e-6) }, fs, 0.3)?;
    let phase = integrate_larmor_phase(&field, &AtomicSpecies::rb87(), &MicrowaveDressing::none())?;
    let decay = DecayModel::default();
    let config = RecordConfig { sigma_v: sigma_for_snr(decay.a0_v, 0.0), seed: 1, ..RecordConfig::default() };
    let record = synthesize_polarimeter_record(&phase, &decay, &config)?;

    let path = std::env::temp_dir().join("fidtwin_example.fidr");
    write_fidr(&path, &record, serde_json::json!({ "example": "simulate_record" }))?;
    let back = read_fidr(&path)?;
    println!("wrote {} ({} samples at {} Sa/s)", path.display(), back.len(), back.fs);
    println!("sidecar {}", sidecar_path(&path).display());
    println!("segments {:?}", back.segments);
    println!("identical on reload: {}", back.volts == record.volts);
    Ok(())
}
