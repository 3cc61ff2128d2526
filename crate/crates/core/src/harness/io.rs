//! CSV tables, the JSON run manifest and binary checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, SweepParam};
use super::sweep::SweepRecord;
use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::gamma::{NormReport, ProfileRow};
use crate::integrator::BreakdownReport;
use crate::spectral::{Grid, ScalarField, VectorField};

pub const SWEEP_HEADER: [&str; 7] = [
    "param_name",
    "param_value",
    "t_break",
    "reason",
    "measured_eps",
    "measured_delta",
    "wall_time_s",
];

pub const NORMS_HEADER: [&str; 15] = [
    "t",
    "E0",
    "E1",
    "E2",
    "X1",
    "X2",
    "W0",
    "W1",
    "W2",
    "cW0",
    "cW1",
    "cW2",
    "bW0",
    "sW0",
    "ghost_flux",
];

pub const PROFILE_HEADER: [&str; 2] = ["radius", "weighted_sup"];

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"CHPL1";

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Csv {
            line,
            reason: format!("{other:?}"),
        },
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// Streams sweep records; each row is flushed as it is written.
pub struct SweepCsvWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl SweepCsvWriter<File> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(File::create(path)?)
    }
}

impl<W: Write> SweepCsvWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        inner.write_record(SWEEP_HEADER).map_err(csv_err)?;
        inner.flush()?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &SweepRecord) -> Result<()> {
        self.inner
            .write_record([
                r.param_name.as_str().to_string(),
                r.param_value.to_string(),
                fmt_opt(r.t_break),
                r.reason.clone(),
                r.measured_eps.to_string(),
                r.measured_delta.to_string(),
                r.wall_time_s.to_string(),
            ])
            .map_err(csv_err)?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = found.iter().collect();
    if got != expected {
        return Err(Error::Csv {
            line: 1,
            reason: format!("header mismatch: expected {expected:?}, found {got:?}"),
        });
    }
    Ok(())
}

fn parse_f64(s: &str, line: usize, col: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Csv {
        line,
        reason: format!("{col}: '{s}': {e}"),
    })
}

pub fn read_sweep_csv<R: Read>(r: R) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    check_header(rdr.headers().map_err(csv_err)?, &SWEEP_HEADER)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = k + 2;
        let param_name: SweepParam = rec[0].parse().map_err(|e: Error| Error::Csv {
            line,
            reason: e.to_string(),
        })?;
        let t_break = match &rec[2] {
            "none" => None,
            s => Some(parse_f64(s, line, "t_break")?),
        };
        out.push(SweepRecord {
            param_name,
            param_value: parse_f64(&rec[1], line, "param_value")?,
            t_break,
            reason: rec[3].to_string(),
            measured_eps: parse_f64(&rec[4], line, "measured_eps")?,
            measured_delta: parse_f64(&rec[5], line, "measured_delta")?,
            wall_time_s: parse_f64(&rec[6], line, "wall_time_s")?,
        });
    }
    Ok(out)
}

pub fn read_sweep_file(path: &Path) -> Result<Vec<SweepRecord>> {
    read_sweep_csv(BufReader::new(File::open(path)?))
}

/// One norms row; orders above the report's `m_max` are written as NaN.
pub fn norms_row(r: &NormReport) -> [f64; 15] {
    let at = |v: &Vec<f64>, m: usize| v.get(m).copied().unwrap_or(f64::NAN);
    [
        r.t,
        at(&r.energy, 0),
        at(&r.energy, 1),
        at(&r.energy, 2),
        at(&r.cone, 1),
        at(&r.cone, 2),
        at(&r.w, 0),
        at(&r.w, 1),
        at(&r.w, 2),
        at(&r.curl, 0),
        at(&r.curl, 1),
        at(&r.curl, 2),
        at(&r.curl_lp, 0),
        at(&r.w_lp, 0),
        r.ghost_flux,
    ]
}

pub fn write_norms_csv<W: Write>(w: W, reports: &[NormReport]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wr.write_record(NORMS_HEADER).map_err(csv_err)?;
    for r in reports {
        wr.write_record(norms_row(r).iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_norms_csv<R: Read>(r: R) -> Result<Vec<[f64; 15]>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(r);
    check_header(rdr.headers().map_err(csv_err)?, &NORMS_HEADER)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let mut row = [0.0; 15];
        for (c, v) in row.iter_mut().enumerate() {
            *v = parse_f64(&rec[c], k + 2, NORMS_HEADER[c])?;
        }
        out.push(row);
    }
    Ok(out)
}

pub fn write_profile_csv<W: Write>(w: W, rows: &[ProfileRow]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wr.write_record(PROFILE_HEADER).map_err(csv_err)?;
    for r in rows {
        wr.write_record([r.radius.to_string(), r.weighted_sup.to_string()]).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridInfo {
    pub n: usize,
    pub half_width: f64,
    pub spacing: f64,
}

impl From<&Grid> for GridInfo {
    fn from(g: &Grid) -> Self {
        Self {
            n: g.n(),
            half_width: g.half_width(),
            spacing: g.spacing(),
        }
    }
}

/// Per-run entry of a manifest.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub param_value: Option<f64>,
    pub amplitude_irrotational: f64,
    pub amplitude_vortical: f64,
    pub measured_eps: f64,
    pub measured_delta: f64,
    pub normalization_iterations: usize,
    pub t_window: f64,
    pub t_end: f64,
    pub steps: usize,
    pub breakdown: BreakdownReport,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: ScenarioConfig,
    pub grid: GridInfo,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub runs: Vec<RunSummary>,
}

impl Manifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut f, self)?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// `CHPL1`, `u32 n`, `f64 L`, `f64 t`, then `σ`, `u₁`, `u₂` (little-endian,
/// row-major with the `x²` index as the row).
pub fn write_checkpoint<W: Write>(mut w: W, state: &FlowState) -> Result<()> {
    let g = state.grid();
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&g.half_width().to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    for f in [&state.sigma, &state.u.c1, &state.u.c2] {
        for v in f.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn save_checkpoint(path: &Path, state: &FlowState) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), state)
}

pub fn read_checkpoint<R: Read>(mut r: R, path: &Path) -> Result<FlowState> {
    let bad = |reason: String| Error::Checkpoint {
        path: path.to_path_buf(),
        reason,
    };
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(|e| bad(format!("header: {e}")))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4).map_err(|e| bad(format!("header: {e}")))?;
    let n = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b8).map_err(|e| bad(format!("header: {e}")))?;
    let half_width = f64::from_le_bytes(b8);
    r.read_exact(&mut b8).map_err(|e| bad(format!("header: {e}")))?;
    let t = f64::from_le_bytes(b8);
    let grid = Grid::new(n, half_width).map_err(|e| bad(e.to_string()))?;
    let mut read_field = |name: &str| -> Result<ScalarField> {
        let mut bytes = vec![0u8; 8 * grid.len()];
        r.read_exact(&mut bytes).map_err(|e| bad(format!("{name}: {e}")))?;
        let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        ScalarField::from_values(grid, values)
    };
    let sigma = read_field("sigma")?;
    let u1 = read_field("u1")?;
    let u2 = read_field("u2")?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(bad(format!("{} trailing bytes", rest.len())));
    }
    FlowState::new(sigma, VectorField::new(u1, u2)?, t)
}

pub fn load_checkpoint(path: &Path) -> Result<FlowState> {
    read_checkpoint(BufReader::new(File::open(path)?), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(v: f64, t: Option<f64>) -> SweepRecord {
        SweepRecord {
            param_name: SweepParam::Delta,
            param_value: v,
            t_break: t,
            reason: if t.is_some() { "spectral_tail" } else { "no_breakdown_in_window" }.into(),
            measured_eps: 0.1,
            measured_delta: v,
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn sweep_csv_layout() {
        let mut w = SweepCsvWriter::new(Vec::new()).unwrap();
        w.write(&record(0.04, Some(12.5))).unwrap();
        w.write(&record(0.02, None)).unwrap();
        let text = String::from_utf8(w.into_inner().unwrap()).unwrap();
        assert_eq!(
            text,
            "param_name,param_value,t_break,reason,measured_eps,measured_delta,wall_time_s\n\
             delta,0.04,12.5,spectral_tail,0.1,0.04,0\n\
             delta,0.02,none,no_breakdown_in_window,0.1,0.02,0\n"
        );
        let back = read_sweep_csv(text.as_bytes()).unwrap();
        assert_eq!(back, vec![record(0.04, Some(12.5)), record(0.02, None)]);
    }

    #[test]
    fn header_mismatch_is_reported() {
        let err = read_sweep_csv("a,b\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Csv { line: 1, .. }));
        let err = read_sweep_csv(
            "param_name,param_value,t_break,reason,measured_eps,measured_delta,wall_time_s\nkappa,1,none,x,0,0,0\n"
                .as_bytes(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Csv { line: 2, .. }));
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let g = Grid::new(16, 4.0).unwrap();
        let st = FlowState::rest(g);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &st).unwrap();
        assert_eq!(buf.len(), 5 + 4 + 8 + 8 + 3 * 8 * 256);
        let p = Path::new("mem");
        assert_eq!(read_checkpoint(&buf[..], p).unwrap(), st);
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad[..], p).is_err());
        assert!(read_checkpoint(&buf[..buf.len() - 1], p).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_checkpoint(&long[..], p).is_err());
    }
}
