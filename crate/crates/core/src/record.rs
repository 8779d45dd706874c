//! Run records: time-ordered checkpoint diagnostics plus curve snapshots, and
//! their on-disk layout (`meta.json`, `checkpoints.jsonl`, `snapshots/*.csv`).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::{self, GeneratingCurve, ProfileError};
use crate::speeds::SpeedDescriptor;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("invalid record: {0}")]
    Invalid(String),
}

/// Accumulated parabolic rescaling. A point `x` of the working frame sits at
/// `x / lambda_total + x_offset` in the original frame (radii: `u / lambda_total`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleLedger {
    pub lambda_total: f64,
    pub x_offset: f64,
    pub rescalings: u32,
}

impl Default for ScaleLedger {
    fn default() -> Self {
        Self { lambda_total: 1.0, x_offset: 0.0, rescalings: 0 }
    }
}

impl ScaleLedger {
    pub fn to_original(&self, curve: &GeneratingCurve) -> GeneratingCurve {
        curve.transformed(-self.x_offset * self.lambda_total, 1.0 / self.lambda_total)
    }

    pub fn to_working(&self, curve: &GeneratingCurve) -> GeneratingCurve {
        curve.transformed(self.x_offset, self.lambda_total)
    }

    /// Records a rescaling `x ↦ factor·(x − center)` of the working frame.
    pub fn compose(&self, center: f64, factor: f64) -> Self {
        Self {
            lambda_total: self.lambda_total * factor,
            x_offset: self.x_offset + center / self.lambda_total,
            rescalings: self.rescalings + 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckpointEvent {
    Start,
    Cadence,
    Rescale,
    RatioCrossing,
    Terminal,
}

/// Diagnostics at one instant, all in the original (unrescaled) frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: f64,
    /// Original-frame time elapsed since the previous checkpoint.
    pub dt_prev: f64,
    /// Original-frame time left until the last checkpoint of the run;
    /// accurate to full relative precision even when `t` no longer resolves
    /// the approach to the singular time.
    pub t_to_end: f64,
    pub step: u64,
    pub a: f64,
    pub b: f64,
    pub ratio: f64,
    pub min_lambda: f64,
    pub max_lambda: f64,
    pub min_mu: f64,
    pub max_mu: f64,
    pub min_mu_minus_lambda: f64,
    #[serde(rename = "minF")]
    pub min_f: f64,
    #[serde(rename = "maxF")]
    pub max_f: f64,
    #[serde(rename = "minH")]
    pub min_h: f64,
    #[serde(rename = "maxH")]
    pub max_h: f64,
    /// `max Z_{1/(n(n−1))} / H²` over nodes.
    pub z_margin: f64,
    pub f_pole: f64,
    /// Support function in the axial direction after recentring.
    pub support_axial: f64,
    pub max_curvature: f64,
    pub lambda_total: f64,
    pub event: CheckpointEvent,
}

impl Checkpoint {
    pub fn mu_spread(&self) -> f64 {
        self.max_mu / self.min_mu
    }

    /// `min(μ − λ) / max μ`; scale-invariant stretch margin.
    pub fn stretch_margin(&self) -> f64 {
        self.min_mu_minus_lambda / self.max_mu
    }
}

/// Working-frame curve plus the ledger that maps it to the original frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub checkpoint: usize,
    pub t: f64,
    pub t_to_end: f64,
    pub step: u64,
    pub ledger: ScaleLedger,
    pub curve: GeneratingCurve,
}

impl Snapshot {
    pub fn original_curve(&self) -> GeneratingCurve {
        self.ledger.to_original(&self.curve)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminalReason {
    CurvatureThreshold,
    EndTime,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub speed: SpeedDescriptor,
    pub n: usize,
    pub alpha: f64,
    pub nodes: usize,
    pub terminal: TerminalReason,
    pub steps: u64,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub meta: RunMeta,
    pub checkpoints: Vec<Checkpoint>,
    pub snapshots: Vec<Snapshot>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotEntry {
    file: String,
    checkpoint: usize,
    t: f64,
    step: u64,
    ledger: ScaleLedger,
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    #[serde(flatten)]
    meta: RunMeta,
    snapshots: Vec<SnapshotEntry>,
}

impl RunRecord {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    /// Original-frame time from checkpoint `i` to checkpoint `j`.
    pub fn elapsed(&self, i: usize, j: usize) -> f64 {
        self.checkpoints[i].t_to_end - self.checkpoints[j].t_to_end
    }

    pub fn validate(&self) -> Result<(), RecordError> {
        if self.checkpoints.is_empty() {
            return Err(RecordError::Invalid("record has no checkpoints".into()));
        }
        if let Some(w) = self.checkpoints.windows(2).find(|w| !(w[1].t_to_end < w[0].t_to_end && w[1].t >= w[0].t)) {
            return Err(RecordError::Invalid(format!("times not increasing at step {}", w[1].step)));
        }
        Ok(())
    }

    /// Checkpoints as JSON Lines.
    pub fn write_checkpoints<W: Write>(&self, mut out: W) -> Result<(), RecordError> {
        for c in &self.checkpoints {
            serde_json::to_writer(&mut out, c)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_checkpoints<R: BufRead>(input: R) -> Result<Vec<Checkpoint>, RecordError> {
        let mut out = Vec::new();
        for line in input.lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    }

    /// Writes `meta.json`, `checkpoints.jsonl` and one CSV per snapshot below
    /// `dir`. Snapshot coordinates are at original scale, with `x` measured
    /// from the ledger's `x_offset` so that tiny late-time shapes keep full
    /// precision.
    pub fn write_dir(&self, dir: &Path) -> Result<(), RecordError> {
        fs::create_dir_all(dir.join("snapshots"))?;
        let mut entries = Vec::with_capacity(self.snapshots.len());
        for (k, s) in self.snapshots.iter().enumerate() {
            let file = format!("snapshots/snap_{k:05}.csv");
            let w = BufWriter::new(fs::File::create(dir.join(&file))?);
            profile::write_csv(&s.curve.transformed(0.0, 1.0 / s.ledger.lambda_total), w)?;
            entries.push(SnapshotEntry { file, checkpoint: s.checkpoint, t: s.t, step: s.step, ledger: s.ledger });
        }
        let meta = MetaFile { meta: self.meta.clone(), snapshots: entries };
        fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
        self.write_checkpoints(BufWriter::new(fs::File::create(dir.join("checkpoints.jsonl"))?))?;
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self, RecordError> {
        let meta: MetaFile = serde_json::from_str(&fs::read_to_string(dir.join("meta.json"))?)?;
        let checkpoints = Self::read_checkpoints(BufReader::new(fs::File::open(dir.join("checkpoints.jsonl"))?))?;
        let mut snapshots = Vec::with_capacity(meta.snapshots.len());
        for e in meta.snapshots {
            let scaled = profile::read_csv(BufReader::new(fs::File::open(dir.join(&e.file))?), meta.meta.n)?;
            snapshots.push(Snapshot {
                checkpoint: e.checkpoint,
                t: e.t,
                t_to_end: checkpoints
                    .get(e.checkpoint)
                    .ok_or_else(|| RecordError::Invalid(format!("snapshot refers to missing checkpoint {}", e.checkpoint)))?
                    .t_to_end,
                step: e.step,
                ledger: e.ledger,
                curve: scaled.transformed(0.0, e.ledger.lambda_total),
            });
        }
        let record = Self { meta: meta.meta, checkpoints, snapshots };
        record.validate()?;
        Ok(record)
    }
}
