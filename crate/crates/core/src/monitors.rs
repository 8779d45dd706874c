//! Audits of run records against the inequalities that hold along the flow:
//! axial stretching, pinching, monotone minimal speed, sphere avoidance, the
//! support-function speed bound, speed/curvature comparability and the
//! minimal halving time of the eccentricity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::record::{CheckpointEvent, RunRecord};
use crate::solver::{self, SolverError};
use crate::speeds::SpeedSpec;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("record and speed disagree: {0}")]
    Mismatch(String),
}

impl From<SolverError> for AuditError {
    fn from(e: SolverError) -> Self {
        AuditError::InsufficientData(e.to_string())
    }
}

/// Relative slack per check. Margins are reported after adding the slack, so
/// a negative margin is a violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AuditTolerances {
    pub stretch: f64,
    pub pinch: f64,
    pub min_speed: f64,
    pub avoidance: f64,
    pub speed_bound: f64,
    pub comparability: f64,
    pub halving: f64,
    /// Checkpoints beyond this count are thinned before the pairwise check.
    pub max_pairs_points: usize,
}

impl Default for AuditTolerances {
    fn default() -> Self {
        Self {
            stretch: 1e-3,
            pinch: 1e-3,
            min_speed: 1e-4,
            avoidance: 0.05,
            speed_bound: 1e-3,
            comparability: 1e-3,
            halving: 0.0,
            max_pairs_points: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCheck {
    pub name: String,
    pub worst_margin: f64,
    pub worst_time: f64,
    pub worst_checkpoint: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub speed: String,
    pub checkpoints: usize,
    pub singular_time_estimate: f64,
    pub halving_time: f64,
    pub checks: Vec<AuditCheck>,
    pub pass: bool,
}

impl AuditReport {
    pub fn check(&self, name: &str) -> Option<&AuditCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub const CHECK_NAMES: [&str; 7] = [
    "axially-stretched",
    "pinching",
    "min-speed-monotone",
    "sphere-avoidance",
    "speed-lower-bound",
    "speed-comparability",
    "ratio-halving",
];

struct Worst {
    margin: f64,
    index: usize,
}

impl Worst {
    fn new() -> Self {
        Self { margin: f64::INFINITY, index: 0 }
    }

    fn push(&mut self, margin: f64, index: usize) {
        // NaN counts as a violation
        let m = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if m < self.margin {
            self.margin = m;
            self.index = index;
        }
    }

    fn finish(self, name: &str, record: &RunRecord) -> AuditCheck {
        AuditCheck {
            name: name.to_string(),
            worst_margin: self.margin,
            worst_time: record.checkpoints[self.index].t,
            worst_checkpoint: self.index,
            pass: self.margin >= 0.0,
        }
    }
}

/// Extinction time of a sphere of radius `r`: the minimal time over which the
/// eccentricity of a normalized approximant can halve when `r` is a
/// sixteenth of the comparison radius at the normalization time.
pub fn halving_time_for_radius(speed: &SpeedSpec, r: f64) -> f64 {
    r.powf(1.0 + speed.alpha()) / ((1.0 + speed.alpha()) * speed.sphere_value())
}

/// Index of the checkpoint used as the normalization time: the localized
/// crossing of `a/b = 2` if recorded, else the first checkpoint with
/// `a/b ≤ 2`, else the first checkpoint.
pub fn reference_checkpoint(record: &RunRecord) -> usize {
    let cps = &record.checkpoints;
    cps.iter()
        .position(|c| c.event == CheckpointEvent::RatioCrossing)
        .or_else(|| cps.iter().position(|c| c.ratio <= 2.0))
        .unwrap_or(0)
}

/// Halving time `T*` in the record's own frame: in the normalized frame
/// (reference time −1, singular time 0) the comparison sphere has radius
/// `R₀(−1) = ((1+α)n^α)^{1/(1+α)}`, and `T*` is the extinction time of a
/// sphere of radius `R₀(−1)/16`; it is then mapped back by the parabolic
/// scaling fixed by the time left to the singularity.
pub fn halving_time_bound(record: &RunRecord, speed: &SpeedSpec) -> Result<f64, AuditError> {
    let rp = solver::detect_round_point(record, 0.05)?;
    let i = reference_checkpoint(record);
    let gap = record.checkpoints[i].t_to_end + rp.singular_tail;
    let r0 = ((1.0 + speed.alpha()) * speed.sphere_value()).powf(1.0 / (1.0 + speed.alpha()));
    Ok(halving_time_for_radius(speed, r0 / 16.0) * gap)
}

fn thinned_indices(len: usize, max_points: usize) -> Vec<usize> {
    if len <= max_points || max_points < 2 {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..max_points).map(|k| k * (len - 1) / (max_points - 1)).collect();
    idx.dedup();
    idx
}

/// Runs every sub-check on `record`.
pub fn audit(record: &RunRecord, speed: &SpeedSpec, tol: &AuditTolerances) -> Result<AuditReport, AuditError> {
    let cps = &record.checkpoints;
    if cps.len() < 2 {
        return Err(AuditError::InsufficientData("audit needs at least 2 checkpoints".into()));
    }
    if record.meta.n != speed.n() || (record.meta.alpha - speed.alpha()).abs() > 1e-12 {
        return Err(AuditError::Mismatch(format!(
            "record has n = {}, alpha = {}; speed has n = {}, alpha = {}",
            record.meta.n,
            record.meta.alpha,
            speed.n(),
            speed.alpha()
        )));
    }
    let alpha = speed.alpha();
    let rp = solver::detect_round_point(record, 0.05)?;
    let tail = rp.singular_tail;
    let halving = halving_time_bound(record, speed)?;
    let mut checks = Vec::with_capacity(7);

    let mut w = Worst::new();
    for (i, c) in cps.iter().enumerate() {
        w.push(c.stretch_margin() + tol.stretch, i);
    }
    checks.push(w.finish(CHECK_NAMES[0], record));

    let mut w = Worst::new();
    for (i, c) in cps.iter().enumerate() {
        w.push(tol.pinch - c.z_margin, i);
    }
    checks.push(w.finish(CHECK_NAMES[1], record));

    let mut w = Worst::new();
    for i in 1..cps.len() {
        w.push(cps[i].min_f / cps[i - 1].min_f - 1.0 + tol.min_speed, i);
    }
    checks.push(w.finish(CHECK_NAMES[2], record));

    // enclosed sphere of radius b/2 and enclosing sphere of radius 2a bracket
    // the sphere that becomes extinct at the estimated singular time
    let rate = (1.0 + alpha) * speed.sphere_value();
    let mut w = Worst::new();
    for (i, c) in cps.iter().enumerate() {
        let r0 = (rate * (c.t_to_end + tail)).max(0.0).powf(1.0 / (1.0 + alpha));
        let inner = r0 / (0.5 * c.b) - 1.0;
        let outer = 2.0 * c.a / r0 - 1.0;
        w.push(inner.min(outer) + tol.avoidance, i);
    }
    checks.push(w.finish(CHECK_NAMES[3], record));

    let idx = thinned_indices(cps.len(), tol.max_pairs_points);
    let mut w = Worst::new();
    for (p, &i) in idx.iter().enumerate() {
        for &j in &idx[p + 1..] {
            let dt = record.elapsed(i, j);
            if !(dt > 0.0) {
                continue;
            }
            let bound = (cps[i].support_axial - cps[j].support_axial) / ((1.0 + alpha) * dt);
            w.push((cps[j].max_f - bound) / cps[j].max_f + tol.speed_bound, j);
        }
    }
    checks.push(w.finish(CHECK_NAMES[4], record));

    let (low, high) = (speed.cylinder_value(), speed.sphere_value());
    let mut w = Worst::new();
    for (i, c) in cps.iter().enumerate() {
        let scale = c.max_mu.powf(alpha);
        let lower = (c.max_f - low * scale) / c.max_f;
        let upper = (high * scale * (1.0 + tol.comparability) - c.max_f) / c.max_f;
        w.push(lower.min(upper) + tol.comparability, i);
    }
    checks.push(w.finish(CHECK_NAMES[5], record));

    let mut w = Worst::new();
    for i in 0..cps.len() {
        for j in i + 1..cps.len() {
            if record.elapsed(i, j) >= halving {
                break;
            }
            w.push(2.0 * cps[j].ratio / cps[i].ratio - 1.0 + tol.halving, j);
        }
    }
    if w.margin == f64::INFINITY {
        w.margin = 1.0;
    }
    checks.push(w.finish(CHECK_NAMES[6], record));

    let pass = checks.iter().all(|c| c.pass);
    Ok(AuditReport {
        speed: speed.id(),
        checkpoints: cps.len(),
        singular_time_estimate: rp.t_singular_estimate,
        halving_time: halving,
        checks,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{Checkpoint, RunMeta, TerminalReason};

    /// Closed-form record of a shrinking sphere.
    fn sphere_record(speed: &SpeedSpec, r0: f64, m: usize) -> RunRecord {
        let alpha = speed.alpha();
        let n = speed.n();
        let rate = (1.0 + alpha) * speed.sphere_value();
        let te = r0.powf(1.0 + alpha) / rate;
        let t_last = te * (1.0 - 1e-3);
        let sigma = 1.0 / (n * (n - 1)) as f64;
        let mut cps = Vec::with_capacity(m);
        for k in 0..m {
            // geometric clustering toward the singular time
            let t = te * (1.0 - 10f64.powf(-3.0 * k as f64 / (m - 1) as f64));
            let r = (rate * (te - t)).powf(1.0 / (1.0 + alpha));
            let f = speed.sphere_value() * r.powf(-alpha);
            cps.push(Checkpoint {
                t,
                dt_prev: 0.0,
                t_to_end: t_last - t,
                step: k as u64,
                a: r,
                b: r,
                ratio: 1.0,
                min_lambda: 1.0 / r,
                max_lambda: 1.0 / r,
                min_mu: 1.0 / r,
                max_mu: 1.0 / r,
                min_mu_minus_lambda: 0.0,
                min_f: f,
                max_f: f,
                min_h: n as f64 / r,
                max_h: n as f64 / r,
                z_margin: -sigma,
                f_pole: f,
                support_axial: r,
                max_curvature: 1.0 / r,
                lambda_total: 1.0,
                event: CheckpointEvent::Cadence,
            });
        }
        for k in 1..m {
            cps[k].dt_prev = cps[k - 1].t_to_end - cps[k].t_to_end;
        }
        RunRecord {
            meta: RunMeta {
                speed: speed.descriptor().unwrap(),
                n,
                alpha,
                nodes: 0,
                terminal: TerminalReason::CurvatureThreshold,
                steps: m as u64,
                t_final: t_last,
            },
            checkpoints: cps,
            snapshots: vec![],
        }
    }

    fn speed() -> SpeedSpec {
        SpeedSpec::mean_power(2.0, 2).unwrap()
    }

    fn failing(record: &RunRecord) -> Vec<String> {
        let rep = audit(record, &speed(), &AuditTolerances::default()).unwrap();
        rep.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect()
    }

    #[test]
    fn clean_sphere_record_passes() {
        let rec = sphere_record(&speed(), 1.0, 200);
        let rep = audit(&rec, &speed(), &AuditTolerances::default()).unwrap();
        assert!(rep.pass, "{rep:#?}");
        assert_eq!(rep.checks.len(), 7);
    }

    #[test]
    fn halving_time_closed_form() {
        let mp1 = SpeedSpec::mean_power(1.0, 2).unwrap();
        let r0 = (2.0f64 * 2.0).sqrt();
        assert!((halving_time_for_radius(&mp1, r0 / 16.0) - 1.0 / 256.0).abs() < 1e-15);
        assert_eq!(halving_time_for_radius(&mp1, 0.0), 0.0);
        let mp3 = SpeedSpec::mean_power(3.0, 3).unwrap();
        let r0 = (4.0f64 * 27.0).powf(0.25);
        assert!((halving_time_for_radius(&mp3, r0 / 16.0) - 16f64.powi(-4)).abs() < 1e-18);
    }

    #[test]
    fn fault_axially_stretched() {
        let mut rec = sphere_record(&speed(), 1.0, 200);
        // λ = 2μ at one checkpoint
        rec.checkpoints[50].min_mu_minus_lambda = -rec.checkpoints[50].max_mu;
        let rep = audit(&rec, &speed(), &AuditTolerances::default()).unwrap();
        let c = rep.check("axially-stretched").unwrap();
        assert!(!c.pass && c.worst_margin < 0.0);
        assert_eq!(c.worst_time, rec.checkpoints[50].t);
        assert_eq!(failing(&rec), vec!["axially-stretched"]);
    }

    #[test]
    fn fault_pinching() {
        let mut rec = sphere_record(&speed(), 1.0, 200);
        rec.checkpoints[10].z_margin = 0.05;
        assert_eq!(failing(&rec), vec!["pinching"]);
    }

    #[test]
    fn fault_min_speed() {
        let mut rec = sphere_record(&speed(), 1.0, 200);
        rec.checkpoints[80].min_f *= 0.9;
        assert_eq!(failing(&rec), vec!["min-speed-monotone"]);
    }

    #[test]
    fn fault_avoidance() {
        let mut rec = sphere_record(&speed(), 1.0, 200);
        rec.checkpoints[30].b *= 3.0;
        rec.checkpoints[30].ratio = rec.checkpoints[30].a / rec.checkpoints[30].b;
        assert!(failing(&rec).contains(&"sphere-avoidance".to_string()));
        let mut rec = sphere_record(&speed(), 1.0, 200);
        rec.checkpoints[30].a *= 0.3;
        assert!(failing(&rec).contains(&"sphere-avoidance".to_string()));
    }

    #[test]
    fn fault_speed_lower_bound() {
        let mut rec = sphere_record(&speed(), 1.0, 200);
        // support collapses far faster than the speed allows
        rec.checkpoints[100].support_axial *= 10.0;
        assert_eq!(failing(&rec), vec!["speed-lower-bound"]);
    }

    #[test]
    fn fault_comparability() {
        let mut rec = sphere_record(&speed(), 1.0, 200);
        rec.checkpoints[120].max_f *= 1.5;
        assert_eq!(failing(&rec), vec!["speed-comparability"]);
    }

    #[test]
    fn fault_ratio_halving() {
        let mut rec = sphere_record(&speed(), 1.0, 200);
        rec.checkpoints[150].ratio = 4.0;
        assert_eq!(failing(&rec), vec!["ratio-halving"]);
    }

    #[test]
    fn mismatched_speed_is_rejected() {
        let rec = sphere_record(&speed(), 1.0, 20);
        let other = SpeedSpec::mean_power(1.0, 2).unwrap();
        assert!(matches!(audit(&rec, &other, &AuditTolerances::default()), Err(AuditError::Mismatch(_))));
    }
}
