//! File formats: feature matrices, trajectories and CSI traces as CSV, CSI
//! traces as little-endian binary, and trained regressor weights.
//!
//! Every CSV format here is version 1. Floats are written in their shortest
//! round-trip form, so a write/read cycle is lossless.

use std::io::{Read, Write};

use baton_core::csi::{Complex64, CsiTrace, RadioConfig};
use baton_core::geometry::{LinkGeometry, Point2};
use baton_core::matrices::FeatureMatrix;
use baton_core::track::{LearnedRegressor, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{BatonError, Result};

/// Version written into binary headers and the run manifest.
pub const FORMAT_VERSION: u32 = 1;

pub const CSI_MAGIC: &[u8; 8] = b"BATONCSI";
pub const WEIGHTS_MAGIC: &[u8; 8] = b"BATONNET";

fn bad(msg: impl Into<String>) -> BatonError {
    BatonError::Format(msg.into())
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| bad(format!("{what}: `{field}` is not a number")))
}

/// Header row = link ids; one row per slot; an empty cell is missing.
pub fn write_feature_matrix<W: Write>(out: W, m: &FeatureMatrix, links: &[LinkGeometry]) -> Result<()> {
    if links.len() != m.links() {
        return Err(baton_core::Error::LengthMismatch(links.len(), m.links()).into());
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(links.iter().map(|l| l.id.to_string()))?;
    for t in 0..m.slots() {
        w.write_record(m.row(t).iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()))?;
    }
    w.flush().map_err(|e| BatonError::io("<csv>", e))?;
    Ok(())
}

/// Reads a matrix written by [`write_feature_matrix`]; returns it with the
/// link ids from the header.
pub fn read_feature_matrix<R: Read>(input: R, slot_duration: f64) -> Result<(FeatureMatrix, Vec<usize>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let ids = r
        .headers()?
        .iter()
        .map(|h| {
            h.trim()
                .parse()
                .map_err(|_| bad(format!("link id `{h}` is not an integer")))
        })
        .collect::<Result<Vec<usize>>>()?;
    let mut cells = Vec::new();
    let mut slots = 0;
    for record in r.records() {
        let record = record?;
        if record.len() != ids.len() {
            return Err(bad(format!(
                "row {slots} has {} cells, expected {}",
                record.len(),
                ids.len()
            )));
        }
        for field in record.iter() {
            cells.push(if field.trim().is_empty() {
                None
            } else {
                Some(parse_f64(field, "cell")?)
            });
        }
        slots += 1;
    }
    Ok((FeatureMatrix::from_cells(slots, ids.len(), slot_duration, &cells)?, ids))
}

/// Columns `slot,time,x,y`.
pub fn write_trajectory<W: Write>(out: W, trace: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "time", "x", "y"])?;
    for (k, p) in trace.positions.iter().enumerate() {
        let time = k as f64 * trace.slot_duration;
        w.write_record([k.to_string(), time.to_string(), p.x.to_string(), p.y.to_string()])?;
    }
    w.flush().map_err(|e| BatonError::io("<csv>", e))?;
    Ok(())
}

/// Reads `slot,time,x,y` rows; the slot duration comes from the first two
/// time stamps, or `fallback` for a single-row file.
pub fn read_trajectory<R: Read>(input: R, fallback: f64) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["slot", "time", "x", "y"] {
        return Err(bad("trajectory header must be slot,time,x,y"));
    }
    let mut times = Vec::new();
    let mut positions = Vec::new();
    for record in r.records() {
        let record = record?;
        times.push(parse_f64(&record[1], "time")?);
        positions.push(Point2::new(parse_f64(&record[2], "x")?, parse_f64(&record[3], "y")?));
    }
    let dt = if times.len() >= 2 {
        times[1] - times[0]
    } else {
        fallback
    };
    if !(dt > 0.0) {
        return Err(bad("time stamps must increase"));
    }
    Ok(Trajectory::new(positions, dt))
}

/// Columns `time,re0,im0,re1,im1,…`, one row per sample.
pub fn write_csi_csv<W: Write>(out: W, trace: &CsiTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string()];
    for s in 0..trace.streams.len() {
        header.push(format!("re{s}"));
        header.push(format!("im{s}"));
    }
    w.write_record(&header)?;
    let fs = trace.radio.sample_rate;
    for k in 0..trace.len() {
        let mut row = vec![(k as f64 / fs).to_string()];
        for s in &trace.streams {
            row.push(s[k].re.to_string());
            row.push(s[k].im.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| BatonError::io("<csv>", e))?;
    Ok(())
}

pub fn read_csi_csv<R: Read>(input: R, radio: RadioConfig) -> Result<CsiTrace> {
    let mut r = csv::Reader::from_reader(input);
    let columns = r.headers()?.len();
    if columns < 5 || (columns - 1) % 2 != 0 {
        return Err(bad(
            "CSI header must be time followed by re/im pairs for at least two streams",
        ));
    }
    let mut streams = vec![Vec::new(); (columns - 1) / 2];
    for record in r.records() {
        let record = record?;
        for (s, stream) in streams.iter_mut().enumerate() {
            let re = parse_f64(&record[1 + 2 * s], "re")?;
            let im = parse_f64(&record[2 + 2 * s], "im")?;
            stream.push(Complex64::new(re, im));
        }
    }
    Ok(CsiTrace::new(streams, radio)?)
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8]) -> Result<()> {
    input
        .read_exact(buf)
        .map_err(|e| bad(format!("truncated binary file: {e}")))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(input: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

fn io(e: std::io::Error) -> BatonError {
    BatonError::io("<binary>", e)
}

fn check_magic<R: Read>(input: &mut R, magic: &[u8; 8], what: &str) -> Result<()> {
    let mut m = [0u8; 8];
    read_exact(input, &mut m)?;
    if &m != magic {
        return Err(bad(format!("not a {what} file")));
    }
    let version = read_u32(input)?;
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported {what} version {version}")));
    }
    Ok(())
}

/// Magic, version (u32), stream count (u32), sample count (u64), sample
/// rate and carrier frequency (f64), then each stream's samples as
/// interleaved `re, im` f64 pairs. All little-endian.
pub fn write_csi_binary<W: Write>(mut out: W, trace: &CsiTrace) -> Result<()> {
    out.write_all(CSI_MAGIC).map_err(io)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(trace.streams.len() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(trace.len() as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&trace.radio.sample_rate.to_le_bytes()).map_err(io)?;
    out.write_all(&trace.radio.carrier_frequency.to_le_bytes())
        .map_err(io)?;
    for s in &trace.streams {
        for c in s {
            out.write_all(&c.re.to_le_bytes()).map_err(io)?;
            out.write_all(&c.im.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn read_csi_binary<R: Read>(mut input: R) -> Result<CsiTrace> {
    check_magic(&mut input, CSI_MAGIC, "CSI")?;
    let streams = read_u32(&mut input)? as usize;
    let samples = read_u64(&mut input)? as usize;
    let radio = RadioConfig {
        sample_rate: read_f64(&mut input)?,
        carrier_frequency: read_f64(&mut input)?,
    };
    let mut out = Vec::with_capacity(streams);
    for _ in 0..streams {
        let mut s = Vec::with_capacity(samples);
        for _ in 0..samples {
            let re = read_f64(&mut input)?;
            let im = read_f64(&mut input)?;
            s.push(Complex64::new(re, im));
        }
        out.push(s);
    }
    Ok(CsiTrace::new(out, radio)?)
}

/// Shape metadata stored as the JSON header of a weights file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsHeader {
    pub links: usize,
    pub history: usize,
    pub hidden: usize,
    pub slot_duration: f64,
    pub v_max: f64,
    pub position_scale: f64,
    pub parameters: usize,
}

/// Magic, version (u32), JSON header length (u32), JSON header, then the
/// flattened parameters as f64. All little-endian.
pub fn write_weights<W: Write>(mut out: W, model: &LearnedRegressor) -> Result<()> {
    let params = model.parameters();
    let header = WeightsHeader {
        links: model.links,
        history: model.history,
        hidden: model.hidden,
        slot_duration: model.slot_duration,
        v_max: model.v_max,
        position_scale: model.position_scale,
        parameters: params.len(),
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(WEIGHTS_MAGIC).map_err(io)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(json.len() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&json).map_err(io)?;
    for p in params {
        out.write_all(&p.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_weights<R: Read>(mut input: R) -> Result<LearnedRegressor> {
    check_magic(&mut input, WEIGHTS_MAGIC, "weights")?;
    let len = read_u32(&mut input)? as usize;
    let mut json = vec![0u8; len];
    read_exact(&mut input, &mut json)?;
    let h: WeightsHeader = serde_json::from_slice(&json)?;
    let params = (0..h.parameters)
        .map(|_| read_f64(&mut input))
        .collect::<Result<Vec<_>>>()?;
    Ok(LearnedRegressor::from_parameters(
        h.links,
        h.history,
        h.hidden,
        h.slot_duration,
        h.v_max,
        h.position_scale,
        &params,
    )?)
}
