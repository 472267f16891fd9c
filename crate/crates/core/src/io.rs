//! On-disk formats: the `GPRB` binary B-scan container and line-oriented
//! CSV manifests for ground truth and alarms.
//!
//! `GPRB` layout (little-endian): magic `"GPRB"` (4 bytes), format version
//! `u16 = 1`, `T: u32`, `X: u32`, `downtrack_spacing_m: f64`, `lane_id:
//! u32`, `run_id: u32`, then `T*X` samples as `f32`, row-major
//! (time-major). Samples are stored in `f32`; scans produced by the
//! generator are quantized to `f32` so a save/load round trip is
//! bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alarm::{Alarm, Label, TruthObject};
use crate::bscan::BScan;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GPRB";
const FORMAT_VERSION: u16 = 1;

/// Serialize a B-scan into the `GPRB` binary format.
pub fn write_bscan<W: Write>(bscan: &BScan, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(bscan.t_len() as u32).to_le_bytes())?;
    w.write_all(&(bscan.x_len() as u32).to_le_bytes())?;
    w.write_all(&bscan.downtrack_spacing_m().to_le_bytes())?;
    w.write_all(&bscan.lane_id().to_le_bytes())?;
    w.write_all(&bscan.run_id().to_le_bytes())?;
    for &v in bscan.samples() {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

/// Parse a B-scan from the `GPRB` binary format.
pub fn read_bscan<R: Read>(mut r: R) -> Result<BScan> {
    let mut magic = [0u8; 4];
    read_exact_or_format(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes, expected \"GPRB\"".into()));
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported format version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let t_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let x_len = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let spacing = f64::from_le_bytes(read_array(&mut r)?);
    let lane_id = u32::from_le_bytes(read_array(&mut r)?);
    let run_id = u32::from_le_bytes(read_array(&mut r)?);

    let n = t_len
        .checked_mul(x_len)
        .ok_or_else(|| Error::Format("header dimensions overflow".into()))?;
    let mut samples = Vec::with_capacity(n);
    let mut buf = [0u8; 4];
    for _ in 0..n {
        read_exact_or_format(&mut r, &mut buf)?;
        samples.push(f32::from_le_bytes(buf) as f64);
    }
    BScan::new(samples, t_len, x_len, spacing, lane_id, run_id)
        .map_err(|e| Error::Format(format!("invalid B-scan contents: {e}")))
}

pub fn save_bscan(bscan: &BScan, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bscan(bscan, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_bscan(path: &Path) -> Result<BScan> {
    read_bscan(BufReader::new(File::open(path)?))
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    read_exact_or_format(r, &mut buf)?;
    Ok(buf)
}

/// Truncation (EOF mid-record) is a format error, not an IO error.
fn read_exact_or_format<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("payload shorter than the header declares".into())
        } else {
            Error::Io(e)
        }
    })
}

// ---------------------------------------------------------------------------
// CSV manifests
// ---------------------------------------------------------------------------

/// One ground-truth CSV row; `lane_area_m2` repeats the scanned lane area so
/// per-lane truth can be regrouped losslessly on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub object_id: u32,
    pub lane_id: u32,
    pub downtrack_position_m: f64,
    pub depth_time_index: usize,
    pub amplitude: f64,
    pub lane_area_m2: f64,
}

impl TruthRow {
    pub fn from_object(object: &TruthObject, lane_area_m2: f64) -> Self {
        Self {
            object_id: object.object_id,
            lane_id: object.lane_id,
            downtrack_position_m: object.downtrack_position_m,
            depth_time_index: object.depth_time_index,
            amplitude: object.amplitude,
            lane_area_m2,
        }
    }

    pub fn to_object(&self) -> TruthObject {
        TruthObject {
            object_id: self.object_id,
            lane_id: self.lane_id,
            downtrack_position_m: self.downtrack_position_m,
            depth_time_index: self.depth_time_index,
            amplitude: self.amplitude,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AlarmRow {
    lane_id: u32,
    run_id: u32,
    downtrack_index: usize,
    downtrack_position_m: f64,
    label: Label,
    truth_object_id: Option<u32>,
    confidence: Option<f64>,
    cluster_id: Option<usize>,
}

pub fn write_truth_csv<W: Write>(rows: &[TruthRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row).map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_truth_csv<R: Read>(r: R) -> Result<Vec<TruthRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize().map(|row| row.map_err(csv_error)).collect()
}

pub fn write_alarms_csv<W: Write>(alarms: &[Alarm], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for a in alarms {
        let row = AlarmRow {
            lane_id: a.lane_id,
            run_id: a.run_id,
            downtrack_index: a.downtrack_index,
            downtrack_position_m: a.downtrack_position_m,
            label: a.label,
            truth_object_id: a.truth_object_id,
            confidence: a.confidence,
            cluster_id: a.cluster_id,
        };
        wtr.serialize(&row).map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_alarms_csv<R: Read>(r: R) -> Result<Vec<Alarm>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: AlarmRow = row.map_err(csv_error)?;
        out.push(Alarm {
            lane_id: row.lane_id,
            run_id: row.run_id,
            downtrack_index: row.downtrack_index,
            downtrack_position_m: row.downtrack_position_m,
            label: row.label,
            truth_object_id: row.truth_object_id,
            confidence: row.confidence,
            cluster_id: row.cluster_id,
        });
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}
