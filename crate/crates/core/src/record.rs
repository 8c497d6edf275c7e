//! FIDR binary records, their JSON sidecars, and CSV export.
//!
//! Layout (little endian): magic `FIDR`, u32 version, f64 fs, u32 bit depth,
//! f64 volts per code, u64 sample count, three u64 segment offsets
//! (detector-only, probe-on, FID), then signed integer codes whose width is
//! the bit depth rounded up to a multiple of 16.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signalsim::{PolarimeterRecord, RecordMetadata, Segments};

pub const MAGIC: &[u8; 4] = b"FIDR";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 8 + 8 + 3 * 8;

/// Everything about a record that the binary header does not carry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSidecar {
    pub format: String,
    pub version: u32,
    pub fs_hz: f64,
    pub bit_depth: u32,
    pub scale_v_per_code: f64,
    pub sample_count: u64,
    pub segments: Segments,
    pub metadata: RecordMetadata,
    /// Parameters that produced the record, echoed verbatim.
    #[serde(default)]
    pub provenance: serde_json::Value,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn code_bytes(bit_depth: u32) -> usize {
    (bit_depth.div_ceil(16) * 2) as usize
}

pub fn encode_fidr(record: &PolarimeterRecord) -> Result<Vec<u8>> {
    let bits = record
        .bit_depth
        .ok_or_else(|| Error::Format("float-mode records cannot be written as FIDR".into()))?;
    record.validate()?;
    let codes = record.codes()?;
    let width = code_bytes(bits);
    let mut out = Vec::with_capacity(HEADER_LEN + codes.len() * width);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&record.fs.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(&record.scale_v_per_code.to_le_bytes());
    out.extend_from_slice(&(codes.len() as u64).to_le_bytes());
    for s in [record.segments.detector_start, record.segments.probe_on_start, record.segments.fid_start] {
        out.extend_from_slice(&s.to_le_bytes());
    }
    for c in codes {
        if width == 2 {
            out.extend_from_slice(&(c as i16).to_le_bytes());
        } else {
            out.extend_from_slice(&(c as i32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses a FIDR byte stream. Metadata not present in the header is left
/// at neutral values unless supplied.
pub fn decode_fidr(bytes: &[u8], metadata: Option<RecordMetadata>) -> Result<PolarimeterRecord> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a FIDR stream".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported FIDR version {version}")));
    }
    let fs = f64_at(8);
    let bits = u32_at(16);
    let scale = f64_at(20);
    let count = u64_at(28) as usize;
    let segments = Segments { detector_start: u64_at(36), probe_on_start: u64_at(44), fid_start: u64_at(52) };
    if !(2..=32).contains(&bits) || !(fs > 0.0) || !(scale > 0.0) {
        return Err(Error::Format("FIDR header has invalid fs, bit depth or scale".into()));
    }
    let width = code_bytes(bits);
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * width {
        return Err(Error::Format(format!(
            "FIDR body has {} bytes, header promises {}",
            body.len(),
            count * width
        )));
    }
    let volts = body
        .chunks_exact(width)
        .map(|c| {
            let code = if width == 2 {
                i64::from(i16::from_le_bytes([c[0], c[1]]))
            } else {
                i64::from(i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            };
            code as f64 * scale
        })
        .collect();
    let metadata = metadata.unwrap_or(RecordMetadata {
        lifetime_s: f64::NAN,
        a0_v: f64::NAN,
        sigma_v: f64::NAN,
        full_scale_v: scale * (1u64 << (bits - 1)) as f64,
        phi_0_rad: f64::NAN,
        detector_sigma_v: f64::NAN,
        clip_fraction: 0.0,
        warnings: Vec::new(),
    });
    let record = PolarimeterRecord { volts, fs, bit_depth: Some(bits), scale_v_per_code: scale, segments, metadata };
    record.validate()?;
    Ok(record)
}

pub fn sidecar_for(record: &PolarimeterRecord, provenance: serde_json::Value) -> Result<RecordSidecar> {
    Ok(RecordSidecar {
        format: "FIDR".into(),
        version: VERSION,
        fs_hz: record.fs,
        bit_depth: record
            .bit_depth
            .ok_or_else(|| Error::Format("float-mode records have no FIDR sidecar".into()))?,
        scale_v_per_code: record.scale_v_per_code,
        sample_count: record.len() as u64,
        segments: record.segments,
        metadata: record.metadata.clone(),
        provenance,
    })
}

/// Writes `path` and its `.json` sidecar.
pub fn write_fidr(path: &Path, record: &PolarimeterRecord, provenance: serde_json::Value) -> Result<()> {
    let bytes = encode_fidr(record)?;
    fs::write(path, bytes)?;
    let sidecar = sidecar_for(record, provenance)?;
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar).map_err(json_err)?)?;
    Ok(())
}

/// Reads `path`, using the sidecar for metadata when it exists.
pub fn read_fidr(path: &Path) -> Result<PolarimeterRecord> {
    let bytes = fs::read(path)?;
    let side = sidecar_path(path);
    let metadata = if side.exists() {
        let sc: RecordSidecar = serde_json::from_str(&fs::read_to_string(side)?).map_err(json_err)?;
        Some(sc.metadata)
    } else {
        None
    };
    decode_fidr(&bytes, metadata)
}

/// `t_s,volts` rows; time is measured from the FID start, so pre-tip rows
/// have negative times.
pub fn write_csv(path: &Path, record: &PolarimeterRecord) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "t_s,volts")?;
    let start = record.segments.fid_start as f64;
    for (i, v) in record.volts.iter().enumerate() {
        writeln!(w, "{},{}", (i as f64 - start) / record.fs, v)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn json_err(e: serde_json::Error) -> Error {
    Error::Format(format!("JSON: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalsim::{synthesize_polarimeter_record, DecayModel, PhaseSeries, RecordConfig};

    fn record(bits: Option<u32>) -> PolarimeterRecord {
        let p = PhaseSeries::new((0..2000).map(|i| 0.3 * i as f64).collect(), 1e4);
        let cfg = RecordConfig { sigma_v: 0.1, bit_depth: bits, seed: 3, ..RecordConfig::default() };
        synthesize_polarimeter_record(&p, &DecayModel::default(), &cfg).unwrap()
    }

    #[test]
    fn round_trip_16_bit() {
        let r = record(Some(16));
        let bytes = encode_fidr(&r).unwrap();
        assert_eq!(&bytes[..4], b"FIDR");
        assert_eq!(bytes.len(), HEADER_LEN + 2 * r.len());
        let back = decode_fidr(&bytes, Some(r.metadata.clone())).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn round_trip_24_bit_uses_four_bytes() {
        let r = record(Some(24));
        let bytes = encode_fidr(&r).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 4 * r.len());
        assert_eq!(decode_fidr(&bytes, Some(r.metadata.clone())).unwrap(), r);
    }

    #[test]
    fn files_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("shot.fidr");
        let r = record(Some(16));
        write_fidr(&path, &r, serde_json::json!({"seed": 3})).unwrap();
        assert!(sidecar_path(&path).exists());
        assert_eq!(read_fidr(&path).unwrap(), r);
        let csv = dir.path().join("shot.csv");
        write_csv(&csv, &r).unwrap();
        let text = std::fs::read_to_string(csv).unwrap();
        assert_eq!(text.lines().count(), r.len() + 1);
    }

    #[test]
    fn rejects_bad_streams() {
        assert!(matches!(decode_fidr(b"NOPE", None), Err(Error::Format(_))));
        let mut bytes = encode_fidr(&record(Some(16))).unwrap();
        bytes.pop();
        assert!(matches!(decode_fidr(&bytes, None), Err(Error::Format(_))));
        assert!(encode_fidr(&record(None)).is_err());
    }
}
