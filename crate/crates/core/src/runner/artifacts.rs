//! On-disk formats. Every file carries a schema name and version that readers check.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::metrics::{CoverageCurve, Voxel};
use crate::projection::{Genome, GraspPose, PriorTag};
use crate::qd::{BehaviorGrid, EvalRecord, OutcomeArchive, OutcomeEntry};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const OUTCOME_SCHEMA: &str = "qdgrasp.outcome_archive";
pub const EVAL_LOG_SCHEMA: &str = "qdgrasp.eval_log";
pub const GRID_SCHEMA: &str = "qdgrasp.grid";
pub const VOXELS_SCHEMA: &str = "qdgrasp.voxels";
pub const METADATA_SCHEMA: &str = "qdgrasp.run_metadata";
pub const COVERAGE_SCHEMA: &str = "qdgrasp.coverage";
pub const NU_HISTOGRAM_SCHEMA: &str = "qdgrasp.nu_histogram";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema: String,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorTag>,
}

impl Header {
    pub fn new(schema: &str, prior: Option<PriorTag>) -> Self {
        Self {
            schema: schema.into(),
            version: SCHEMA_VERSION,
            prior,
        }
    }

    fn check(&self, path: &Path, schema: &str) -> Result<()> {
        if self.schema != schema || self.version != SCHEMA_VERSION {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                expected: format!("{schema} v{SCHEMA_VERSION}"),
                found: format!("{} v{}", self.schema, self.version),
            });
        }
        Ok(())
    }
}

/// One line of the outcome archive file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub eval_index: u64,
    pub position: [f64; 3],
    /// `[x, y, z, w]`
    pub quaternion: [f64; 4],
    pub synergy_id: usize,
    pub init_joints: Vec<f64>,
    pub fitness: f64,
    pub nu: Option<f64>,
    pub genome: Vec<f64>,
}

impl From<&OutcomeEntry> for OutcomeRecord {
    fn from(e: &OutcomeEntry) -> Self {
        let q = e.pose.orientation.quaternion();
        Self {
            eval_index: e.eval_index,
            position: e.pose.position.into(),
            quaternion: [q.i, q.j, q.k, q.w],
            synergy_id: e.pose.synergy_id,
            init_joints: e.pose.init_joints.clone(),
            fitness: e.fitness,
            nu: e.nu,
            genome: e.genome.values.clone(),
        }
    }
}

impl OutcomeRecord {
    fn into_entry(self, prior: PriorTag) -> OutcomeEntry {
        let [x, y, z, w] = self.quaternion;
        let position = Vec3::from(self.position);
        OutcomeEntry {
            eval_index: self.eval_index,
            pose: GraspPose {
                position,
                orientation: UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)),
                synergy_id: self.synergy_id,
                init_joints: self.init_joints,
            },
            fitness: self.fitness,
            behavior: position,
            nu: self.nu,
            genome: Genome {
                values: self.genome,
                prior,
            },
        }
    }
}

/// One line of the evaluation log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub eval_index: u64,
    pub genome: Vec<f64>,
    pub prior_tag: PriorTag,
    pub valid: bool,
    pub fitness: f64,
    pub behavior: Option<[f64; 3]>,
    pub nu: Option<f64>,
}

impl From<&EvalRecord> for LogRecord {
    fn from(r: &EvalRecord) -> Self {
        Self {
            eval_index: r.eval_index,
            genome: r.genome.values.clone(),
            prior_tag: r.genome.prior,
            valid: r.valid,
            fitness: r.fitness,
            behavior: r.behavior.map(Into::into),
            nu: r.nu,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_line<T: Serialize>(w: &mut impl Write, path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))
}

fn write_ndjson<T: Serialize>(path: &Path, header: &Header, rows: impl Iterator<Item = T>) -> Result<()> {
    let mut w = create(path)?;
    write_line(&mut w, path, header)?;
    for r in rows {
        write_line(&mut w, path, &r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_ndjson<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<(Header, Vec<T>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let malformed = |line: usize, message: String| Error::Record {
        path: path.to_path_buf(),
        line,
        message,
    };
    let first = lines
        .next()
        .ok_or_else(|| malformed(1, "missing schema header".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&first).map_err(|e| malformed(1, e.to_string()))?;
    header.check(path, schema)?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| malformed(i + 2, e.to_string()))?);
    }
    Ok((header, rows))
}

pub fn write_outcome_archive(path: &Path, archive: &OutcomeArchive, prior: PriorTag) -> Result<()> {
    write_ndjson(
        path,
        &Header::new(OUTCOME_SCHEMA, Some(prior)),
        archive.entries.iter().map(OutcomeRecord::from),
    )
}

pub fn read_outcome_archive(path: &Path) -> Result<OutcomeArchive> {
    let (header, rows) = read_ndjson::<OutcomeRecord>(path, OUTCOME_SCHEMA)?;
    let prior = header.prior.ok_or_else(|| Error::Record {
        path: path.to_path_buf(),
        line: 1,
        message: "header lacks the prior tag".into(),
    })?;
    Ok(OutcomeArchive {
        entries: rows.into_iter().map(|r| r.into_entry(prior)).collect(),
    })
}

pub fn write_eval_log(path: &Path, log: &[EvalRecord], prior: PriorTag) -> Result<()> {
    write_ndjson(
        path,
        &Header::new(EVAL_LOG_SCHEMA, Some(prior)),
        log.iter().map(LogRecord::from),
    )
}

pub fn read_eval_log(path: &Path) -> Result<Vec<LogRecord>> {
    read_ndjson(path, EVAL_LOG_SCHEMA).map(|(_, rows)| rows)
}

#[derive(Serialize, Deserialize)]
struct Tagged<T> {
    #[serde(flatten)]
    header: Header,
    #[serde(flatten)]
    body: T,
}

pub fn write_json<T: Serialize>(path: &Path, schema: &str, body: &T) -> Result<()> {
    let mut w = create(path)?;
    let tagged = Tagged {
        header: Header::new(schema, None),
        body,
    };
    serde_json::to_writer_pretty(&mut w, &tagged).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&text).map_err(|e| Error::Record {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    header.check(path, schema)?;
    serde_json::from_str::<Tagged<T>>(&text)
        .map(|t| t.body)
        .map_err(|e| Error::Record {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFile {
    pub grid: BehaviorGrid,
}

pub fn read_grid(path: &Path) -> Result<BehaviorGrid> {
    let mut g = read_json::<GridFile>(path, GRID_SCHEMA)?.grid;
    g.reindex();
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelFile {
    pub step: f64,
    /// `(voxel, max fitness)` in voxel order.
    pub voxels: Vec<(Voxel, f64)>,
}

fn write_csv(path: &Path, schema: &str, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "# schema={schema} version={SCHEMA_VERSION}").map_err(io)?;
    writeln!(w, "{header}").map_err(io)?;
    for r in rows {
        writeln!(w, "{r}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_coverage_csv(path: &Path, curve: &CoverageCurve) -> Result<()> {
    write_csv(
        path,
        COVERAGE_SCHEMA,
        "eval_index,coverage",
        curve.points.iter().map(|(i, c)| format!("{i},{c}")),
    )
}

/// Empty `hist` writes the header only (no ν data for this prior).
pub fn write_nu_histogram_csv(path: &Path, hist: &[f64]) -> Result<()> {
    let n = hist.len() as f64;
    write_csv(
        path,
        NU_HISTOGRAM_SCHEMA,
        "nu_lo,nu_hi,probability",
        hist.iter().enumerate().map(|(i, p)| {
            let lo = std::f64::consts::PI * i as f64 / n;
            let hi = std::f64::consts::PI * (i + 1) as f64 / n;
            format!("{lo},{hi},{p}")
        }),
    )
}

/// Reads a CSV written by this module, checking the schema comment.
pub fn read_csv(path: &Path, schema: &str) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let first = lines.next().unwrap_or_default();
    let expected = format!("# schema={schema} version={SCHEMA_VERSION}");
    if first != expected {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            expected,
            found: first.to_string(),
        });
    }
    lines
        .skip(1)
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Record {
                    path: path.to_path_buf(),
                    line: i + 3,
                    message: e.to_string(),
                })
        })
        .collect()
}
