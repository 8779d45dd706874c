//! Ancient ovaloids from capped-cylinder approximants: normalization of each
//! run (a/b = 2 at t = −1, singular time 0), the family of approximants with
//! convergence and radius-bound tables, and the blowdown comparison with the
//! shrinking cylinder.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::monitors::{self, AuditError, AuditReport, AuditTolerances};
use crate::profile::{self, GeneratingCurve, ProfileError};
use crate::record::{Checkpoint, CheckpointEvent, RunRecord, ScaleLedger, Snapshot};
use crate::solver::{self, RunOptions, SolverError};
use crate::speeds::SpeedSpec;

#[derive(Debug, Error)]
pub enum OvaloidError {
    #[error("a/b never crosses 2 from above")]
    NoEccentricTime,
    #[error("round point not detected")]
    NotRound,
    #[error("normalization missed a/b = 2 by {0:e}")]
    Normalization(f64),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

/// Eccentricity at the normalization time.
pub const TARGET_RATIO: f64 = 2.0;

/// A run expressed in the normalized frame: `a/b = 2` at `t = −1` and the
/// singular time at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedRun {
    pub l: f64,
    pub record: RunRecord,
    /// Backward existence time: the run starts at `t = −t_l`.
    pub t_l: f64,
    /// Spatial scale applied to the raw run.
    pub lambda: f64,
    /// Raw singular-time estimate used for the time translation.
    pub raw_singular_time: f64,
    /// Smallest `a/b` over `[−t_l, −1]`.
    pub min_ratio_before: f64,
}

fn scale_checkpoint(c: &Checkpoint, lambda: f64, alpha: f64, tail: f64) -> Checkpoint {
    let time = lambda.powf(1.0 + alpha);
    let speed = lambda.powf(-alpha);
    Checkpoint {
        t: -time * (c.t_to_end + tail),
        dt_prev: time * c.dt_prev,
        t_to_end: time * c.t_to_end,
        a: lambda * c.a,
        b: lambda * c.b,
        min_lambda: c.min_lambda / lambda,
        max_lambda: c.max_lambda / lambda,
        min_mu: c.min_mu / lambda,
        max_mu: c.max_mu / lambda,
        min_mu_minus_lambda: c.min_mu_minus_lambda / lambda,
        min_f: speed * c.min_f,
        max_f: speed * c.max_f,
        min_h: c.min_h / lambda,
        max_h: c.max_h / lambda,
        f_pole: speed * c.f_pole,
        support_axial: lambda * c.support_axial,
        max_curvature: c.max_curvature / lambda,
        lambda_total: c.lambda_total / lambda,
        event: c.event,
        step: c.step,
        ratio: c.ratio,
        z_margin: c.z_margin,
    }
}

fn scale_ledger(ledger: &ScaleLedger, lambda: f64) -> ScaleLedger {
    ScaleLedger { lambda_total: ledger.lambda_total / lambda, x_offset: ledger.x_offset * lambda, rescalings: ledger.rescalings }
}

/// Time left until the end of the record at the first downward crossing of
/// `a/b = 2`: the localized crossing event when present, else linear
/// interpolation between the bracketing checkpoints.
fn crossing_time_to_end(record: &RunRecord) -> Result<f64, OvaloidError> {
    let cps = &record.checkpoints;
    if let Some(c) = cps.iter().find(|c| c.event == CheckpointEvent::RatioCrossing && (c.ratio - TARGET_RATIO).abs() < 1e-6) {
        return Ok(c.t_to_end);
    }
    let k = cps
        .iter()
        .position(|c| c.ratio <= TARGET_RATIO)
        .filter(|&k| k > 0)
        .ok_or(OvaloidError::NoEccentricTime)?;
    let (p, q) = (&cps[k - 1], &cps[k]);
    let w = (p.ratio - TARGET_RATIO) / (p.ratio - q.ratio);
    Ok(p.t_to_end + w * (q.t_to_end - p.t_to_end))
}

/// Rescales `raw` so that its first `a/b = 2` time maps to −1 and its
/// estimated singular time to 0. The time gap `T_s − t₂` is taken from the
/// precise clock plus the fitted singular tail.
pub fn normalize_run(raw: &RunRecord, l: f64, tol: f64) -> Result<NormalizedRun, OvaloidError> {
    let alpha = raw.meta.alpha;
    let gap_to_end = crossing_time_to_end(raw)?;
    let rp = solver::detect_round_point(raw, 0.05)?;
    if !rp.detected {
        return Err(OvaloidError::NotRound);
    }
    let tail = rp.singular_tail;
    let gap = gap_to_end + tail;
    if !(gap > 0.0) {
        return Err(OvaloidError::InsufficientData("singular time precedes the crossing".into()));
    }
    let lambda = gap.powf(-1.0 / (1.0 + alpha));
    let checkpoints: Vec<Checkpoint> = raw.checkpoints.iter().map(|c| scale_checkpoint(c, lambda, alpha, tail)).collect();
    let time = lambda.powf(1.0 + alpha);
    let snapshots = raw
        .snapshots
        .iter()
        .map(|s| Snapshot {
            checkpoint: s.checkpoint,
            t: checkpoints[s.checkpoint].t,
            t_to_end: time * s.t_to_end,
            step: s.step,
            ledger: scale_ledger(&s.ledger, lambda),
            curve: s.curve.clone(),
        })
        .collect();
    let mut meta = raw.meta.clone();
    meta.t_final = -time * tail;
    let record = RunRecord { meta, checkpoints, snapshots };

    let at_minus_one = ratio_at(&record, -1.0)?;
    if (at_minus_one - TARGET_RATIO).abs() > tol {
        return Err(OvaloidError::Normalization(at_minus_one - TARGET_RATIO));
    }
    let min_ratio_before = record.checkpoints.iter().filter(|c| c.t <= -1.0).map(|c| c.ratio).fold(at_minus_one, f64::min);
    Ok(NormalizedRun {
        l,
        t_l: time * (raw.checkpoints[0].t_to_end + tail),
        lambda,
        raw_singular_time: rp.t_singular_estimate,
        min_ratio_before,
        record,
    })
}

/// `a/b` at time `t`, interpolated linearly between checkpoints.
pub fn ratio_at(record: &RunRecord, t: f64) -> Result<f64, OvaloidError> {
    let cps = &record.checkpoints;
    let k = cps
        .iter()
        .position(|c| c.t >= t)
        .ok_or_else(|| OvaloidError::InsufficientData(format!("record ends before t = {t}")))?;
    if k == 0 {
        return if cps[0].t == t {
            Ok(cps[0].ratio)
        } else {
            Err(OvaloidError::InsufficientData(format!("record starts after t = {t}")))
        };
    }
    let (p, q) = (&cps[k - 1], &cps[k]);
    let w = if q.t > p.t { (t - p.t) / (q.t - p.t) } else { 1.0 };
    Ok(p.ratio + w * (q.ratio - p.ratio))
}

/// Recentred meridian curve at time `t`, interpolated linearly in time
/// between the two snapshots that bracket it.
pub fn profile_at(run: &NormalizedRun, t: f64) -> Result<GeneratingCurve, OvaloidError> {
    let snaps = &run.record.snapshots;
    let k = snaps
        .iter()
        .position(|s| s.t >= t)
        .ok_or_else(|| OvaloidError::InsufficientData(format!("no snapshot at or after t = {t}")))?;
    let after = snaps[k].original_curve().recentred();
    if snaps[k].t == t {
        return Ok(after);
    }
    if k == 0 {
        return Err(OvaloidError::InsufficientData(format!("no snapshot at or before t = {t}")));
    }
    let before = snaps[k - 1].original_curve().recentred();
    let w = (t - snaps[k - 1].t) / (snaps[k].t - snaps[k - 1].t);
    Ok(before.lerp(&after, w)?)
}

/// Symmetric Hausdorff distance between the recentred meridian curves of
/// two normalized runs at time `t`.
pub fn profile_distance(r1: &NormalizedRun, r2: &NormalizedRun, t: f64) -> Result<f64, OvaloidError> {
    Ok(profile::hausdorff(&profile_at(r1, t)?, &profile_at(r2, t)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub l: f64,
    #[serde(rename = "T_l")]
    pub t_l: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub audit_pass: bool,
    pub ratio_at_minus_one: f64,
    pub min_ratio_before: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub l1: f64,
    pub l2: f64,
    pub t: f64,
    pub distance: f64,
}

/// Observed radii over a compact window: `b_k = min 2b`, `a_k = max a`, and
/// the worst signed margin of `2b ≤ a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub l: f64,
    pub window: (f64, f64),
    pub b_k: f64,
    pub a_k: f64,
    pub min_a_minus_2b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowdownRow {
    #[serde(rename = "S")]
    pub s: f64,
    pub t_sample: f64,
    pub mid_radius: f64,
    pub lambda_mid: f64,
    pub cylinder_radius_ref: f64,
    pub mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct OvaloidFamily {
    pub speed: String,
    pub runs: Vec<NormalizedRun>,
    pub audits: Vec<AuditReport>,
    pub members: Vec<FamilyMember>,
    pub convergence: Vec<ConvergenceRow>,
    pub bounds: Vec<BoundsRow>,
    /// Lengths whose run, audit or normalization failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

impl OvaloidFamily {
    pub fn degraded(&self) -> bool {
        !self.failures.is_empty() || self.members.iter().any(|m| !m.audit_pass)
    }

    pub fn t_l_increasing(&self) -> bool {
        self.members.windows(2).all(|w| w[1].t_l > w[0].t_l)
    }

    /// Relative spread `(max − min)/min` of the upper radius bounds.
    pub fn a_k_spread(&self) -> f64 {
        let hi = self.bounds.iter().map(|b| b.a_k).fold(f64::NEG_INFINITY, f64::max);
        let lo = self.bounds.iter().map(|b| b.a_k).fold(f64::INFINITY, f64::min);
        (hi - lo) / lo
    }

    pub fn report(&self, blowdown: &[BlowdownRow]) -> FamilyReport {
        FamilyReport {
            speed: self.speed.clone(),
            members: self.members.clone(),
            convergence: self.convergence.clone(),
            bounds: self.bounds.clone(),
            blowdown: blowdown.to_vec(),
            failures: self.failures.iter().map(|(l, e)| FamilyFailure { l: *l, error: e.clone() }).collect(),
            degraded: self.degraded(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyFailure {
    pub l: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyReport {
    pub speed: String,
    pub members: Vec<FamilyMember>,
    pub convergence: Vec<ConvergenceRow>,
    pub bounds: Vec<BoundsRow>,
    pub blowdown: Vec<BlowdownRow>,
    pub failures: Vec<FamilyFailure>,
    pub degraded: bool,
}

/// Options for [`build_family`].
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyOptions {
    pub nodes: usize,
    pub run: RunOptions,
    pub tolerances: AuditTolerances,
    pub normalization_tol: f64,
    pub window: (f64, f64),
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self {
            nodes: 128,
            run: RunOptions { ratio_events: vec![TARGET_RATIO], snapshot_every: 1, ..RunOptions::default() },
            tolerances: AuditTolerances::default(),
            normalization_tol: 1e-2,
            window: (-2.0, -1.0),
        }
    }
}

/// One approximant: spherocylinder seed of half-length `l` and radius 1,
/// run to the curvature threshold, audited and normalized.
pub fn build_member(l: f64, speed: &SpeedSpec, opts: &FamilyOptions) -> Result<(NormalizedRun, AuditReport), OvaloidError> {
    let seed = profile::make_spherocylinder(l, 1.0, opts.nodes, speed.n())?;
    let mut run_opts = opts.run.clone();
    if !run_opts.ratio_events.contains(&TARGET_RATIO) {
        run_opts.ratio_events.push(TARGET_RATIO);
    }
    let raw = solver::run(&seed, speed, &run_opts)?;
    let audit = monitors::audit(&raw, speed, &opts.tolerances)?;
    let normalized = normalize_run(&raw, l, opts.normalization_tol)?;
    Ok((normalized, audit))
}

fn bounds_row(run: &NormalizedRun, window: (f64, f64)) -> Result<BoundsRow, OvaloidError> {
    let inside: Vec<&Checkpoint> = run.record.checkpoints.iter().filter(|c| c.t >= window.0 && c.t <= window.1).collect();
    if inside.is_empty() || run.record.checkpoints[0].t > window.0 {
        return Err(OvaloidError::InsufficientData(format!("run of l = {} does not cover the window", run.l)));
    }
    Ok(BoundsRow {
        l: run.l,
        window,
        b_k: inside.iter().map(|c| 2.0 * c.b).fold(f64::INFINITY, f64::min),
        a_k: inside.iter().map(|c| c.a).fold(f64::NEG_INFINITY, f64::max),
        min_a_minus_2b: inside.iter().map(|c| c.a - 2.0 * c.b).fold(f64::INFINITY, f64::min),
    })
}

/// Builds the approximants for increasing `l_list` in parallel and assembles
/// the convergence (consecutive members at `t = −1`) and bounds tables.
/// Failed members are listed in `failures` and leave the family degraded.
pub fn build_family(l_list: &[f64], speed: &SpeedSpec, opts: &FamilyOptions) -> Result<OvaloidFamily, OvaloidError> {
    if l_list.is_empty() || l_list.iter().any(|l| !(*l >= 1.0)) || l_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(OvaloidError::BadParam("lengths must be increasing and >= 1".into()));
    }
    let results: Vec<Result<(NormalizedRun, AuditReport), OvaloidError>> =
        l_list.par_iter().map(|&l| build_member(l, speed, opts)).collect();
    let mut runs = Vec::new();
    let mut audits = Vec::new();
    let mut failures = Vec::new();
    for (l, res) in l_list.iter().zip(results) {
        match res {
            Ok((run, audit)) => {
                runs.push(run);
                audits.push(audit);
            }
            Err(e) => failures.push((*l, e.to_string())),
        }
    }
    let mut members = Vec::with_capacity(runs.len());
    let mut bounds = Vec::with_capacity(runs.len());
    for (run, audit) in runs.iter().zip(&audits) {
        members.push(FamilyMember {
            l: run.l,
            t_l: run.t_l,
            lambda: run.lambda,
            audit_pass: audit.pass,
            ratio_at_minus_one: ratio_at(&run.record, -1.0)?,
            min_ratio_before: run.min_ratio_before,
        });
        match bounds_row(run, opts.window) {
            Ok(row) => bounds.push(row),
            Err(e) => failures.push((run.l, e.to_string())),
        }
    }
    let mut convergence = Vec::new();
    for w in runs.windows(2) {
        convergence.push(ConvergenceRow { l1: w[0].l, l2: w[1].l, t: -1.0, distance: profile_distance(&w[0], &w[1], -1.0)? });
    }
    Ok(OvaloidFamily { speed: speed.id(), runs, audits, members, convergence, bounds, failures })
}

/// Parabolic blowdowns `x ↦ x/S` of `run` sampled at `S^{1+α}·t_probe`:
/// equatorial radius and axial curvature, compared with the round cylinder
/// that becomes singular at time 0.
pub fn blowdown(run: &NormalizedRun, speed: &SpeedSpec, s_list: &[f64], t_probe: f64) -> Result<Vec<BlowdownRow>, OvaloidError> {
    if !(t_probe < 0.0) || s_list.iter().any(|s| !(*s > 0.0)) {
        return Err(OvaloidError::BadParam("need t_probe < 0 and S > 0".into()));
    }
    let alpha = speed.alpha();
    let reference = profile::exact_cylinder_radius(speed, 0.0, t_probe)?;
    s_list
        .iter()
        .map(|&s| {
            let t_sample = s.powf(1.0 + alpha) * t_probe;
            let curve = profile_at(run, t_sample)?.transformed(0.0, 1.0 / s);
            let (mid_radius, lambda_mid) = equator(&curve)?;
            Ok(BlowdownRow {
                s,
                t_sample,
                mid_radius,
                lambda_mid,
                cylinder_radius_ref: reference,
                mismatch: (mid_radius - reference).abs() / reference,
            })
        })
        .collect()
}

/// Radius and axial curvature where the recentred curve meets `x = 0`.
fn equator(curve: &GeneratingCurve) -> Result<(f64, f64), OvaloidError> {
    let geom = profile::geometry(curve)?;
    let x = curve.x();
    let k = x.iter().position(|&xi| xi >= 0.0).filter(|&k| k > 0).ok_or_else(|| OvaloidError::InsufficientData("curve does not straddle x = 0".into()))?;
    let w = -x[k - 1] / (x[k] - x[k - 1]);
    let u = curve.u();
    Ok((u[k - 1] + w * (u[k] - u[k - 1]), geom.lambda[k - 1] + w * (geom.lambda[k] - geom.lambda[k - 1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_sphere, make_spherocylinder};
    use crate::solver::StopConditions;

    fn quick_opts() -> RunOptions {
        RunOptions {
            ratio_events: vec![TARGET_RATIO],
            snapshot_every: 1,
            stop: StopConditions { max_curvature: 1e3, ..Default::default() },
            ..Default::default()
        }
    }

    fn mcf_run(l: f64) -> RunRecord {
        let speed = SpeedSpec::mean_power(1.0, 2).unwrap();
        solver::run(&make_spherocylinder(l, 1.0, 64, 2).unwrap(), &speed, &quick_opts()).unwrap()
    }

    #[test]
    fn sphere_has_no_eccentric_time() {
        let speed = SpeedSpec::mean_power(1.0, 2).unwrap();
        let raw = solver::run(&make_sphere(1.0, 64, 2).unwrap(), &speed, &quick_opts()).unwrap();
        assert!(matches!(normalize_run(&raw, 0.0, 1e-2), Err(OvaloidError::NoEccentricTime)));
    }

    #[test]
    fn normalization_and_idempotence() {
        let raw = mcf_run(2.0);
        let norm = normalize_run(&raw, 2.0, 1e-2).unwrap();
        assert!((ratio_at(&norm.record, -1.0).unwrap() - 2.0).abs() < 1e-6);
        assert!(norm.t_l > 1.0);
        assert!(norm.min_ratio_before >= 2.0 - 1e-2);
        let again = normalize_run(&norm.record, 2.0, 1e-2).unwrap();
        assert!((again.lambda - 1.0).abs() < 1e-6, "{}", again.lambda);
        assert!((again.t_l - norm.t_l).abs() < 1e-6 * norm.t_l);
        for (c1, c2) in norm.record.checkpoints.iter().zip(&again.record.checkpoints) {
            assert!((c1.t - c2.t).abs() < 1e-6 * c1.t.abs().max(1e-3));
        }
    }

    #[test]
    fn distances_and_blowdown_basics() {
        let norm = normalize_run(&mcf_run(2.0), 2.0, 1e-2).unwrap();
        assert_eq!(profile_distance(&norm, &norm, -1.0).unwrap(), 0.0);
        let speed = SpeedSpec::mean_power(1.0, 2).unwrap();
        let sphere = make_sphere(profile::exact_sphere_radius(&speed, 0.0, -1.0).unwrap(), 64, 2).unwrap();
        let at = profile_at(&norm, -1.0).unwrap();
        assert!(profile::hausdorff(&at, &sphere) > 0.1);
        let rows = blowdown(&norm, &speed, &[1.0], -1.0).unwrap();
        let m = profile::metrics(&at);
        assert!((rows[0].mid_radius - m.b).abs() < 1e-2 * m.b);
        assert!((rows[0].cylinder_radius_ref - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_member_family() {
        let speed = SpeedSpec::mean_power(1.0, 2).unwrap();
        let opts = FamilyOptions { nodes: 64, run: quick_opts(), ..Default::default() };
        let fam = build_family(&[2.0], &speed, &opts).unwrap();
        assert_eq!(fam.members.len(), 1);
        assert!(fam.convergence.is_empty());
        assert!(fam.members[0].audit_pass, "{:?}", fam.audits);
        assert!(build_family(&[4.0, 2.0], &speed, &opts).is_err());
    }
}
