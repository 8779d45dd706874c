//! Explicit time stepping of `∂φ/∂t = −f ν` on the meridian curve, with
//! tangential redistribution, continuation by parabolic rescaling, and event
//! localization for prescribed values of the eccentricity `a/b`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra;
use crate::profile::{self, GeneratingCurve, ProfileError, Redistribution};
use crate::record::{
    Checkpoint, CheckpointEvent, RecordError, RunMeta, RunRecord, ScaleLedger, Snapshot, TerminalReason,
};
use crate::speeds::{CurvatureVector, SpeedSpec};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("node {node} left the cone at t = {t}: lambda = {lambda}, mu = {mu}")]
    ConeExit { t: f64, node: usize, lambda: f64, mu: f64 },
    #[error("non-finite or collapsed geometry at t = {t}")]
    NumericalBlowup { t: f64 },
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error(transparent)]
    Record(#[from] RecordError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub cfl: f64,
    /// Cap on the working-frame step.
    pub max_dt: f64,
    pub resample_every: usize,
    pub redistribution: Redistribution,
    /// Relative cone tolerance: abort once `λ < −tol·μ` or `λ > (1+tol)·μ`.
    pub cone_tol: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            cfl: 0.2,
            max_dt: f64::INFINITY,
            resample_every: 1,
            redistribution: Redistribution::CurvatureWeighted { radial_weight: 0.05 },
            cone_tol: 0.1,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SolverError::BadParam(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.max_dt > 0.0) || self.resample_every == 0 || !(self.cone_tol >= 0.0) {
            return Err(SolverError::BadParam("max_dt, resample_every and cone_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StopConditions {
    /// Original-frame curvature at which the run is declared singular.
    pub max_curvature: f64,
    /// Tolerance on `a/b − 1` and `max μ / min μ − 1` for round-point detection.
    pub roundness_eps: f64,
    /// Original-frame end time.
    pub t_end: Option<f64>,
    pub max_steps: u64,
}

impl Default for StopConditions {
    fn default() -> Self {
        Self { max_curvature: 1e3, roundness_eps: 0.05, t_end: None, max_steps: 5_000_000 }
    }
}

impl StopConditions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let t_ok = self.t_end.map_or(true, |t| t.is_finite());
        if !(self.max_curvature > 0.0 && self.roundness_eps > 0.0 && self.max_steps > 0 && t_ok) {
            return Err(SolverError::BadParam("stop thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Rescale the working frame once its maximal curvature reaches `trigger`,
/// bringing it back to `target`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub trigger: f64,
    pub target: f64,
}

impl Default for Continuation {
    fn default() -> Self {
        Self { trigger: 8.0, target: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub control: StepControl,
    pub stop: StopConditions,
    pub continuation: Option<Continuation>,
    pub checkpoint_every: u64,
    /// A snapshot is kept at every `snapshot_every`-th checkpoint and at
    /// every event checkpoint; 0 keeps only event snapshots.
    pub snapshot_every: usize,
    /// Values of `a/b` whose first downward crossing is localized exactly.
    pub ratio_events: Vec<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            control: StepControl::default(),
            stop: StopConditions::default(),
            continuation: Some(Continuation::default()),
            checkpoint_every: 100,
            snapshot_every: 20,
            ratio_events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    /// Working-frame curve.
    pub curve: GeneratingCurve,
    /// Original-frame time.
    pub t: f64,
    pub step: u64,
    pub ledger: ScaleLedger,
}

impl FlowState {
    pub fn new(curve: GeneratingCurve) -> Self {
        Self { curve, t: 0.0, step: 0, ledger: ScaleLedger::default() }
    }

    pub fn from_snapshot(s: &Snapshot) -> Self {
        Self { curve: s.curve.clone(), t: s.t, step: s.step, ledger: s.ledger }
    }

    pub fn original_curve(&self) -> GeneratingCurve {
        self.ledger.to_original(&self.curve)
    }

    /// Working-frame time per original-frame time.
    fn time_factor(&self, alpha: f64) -> f64 {
        self.ledger.lambda_total.powf(1.0 + alpha)
    }
}

struct Stage {
    velocity: Vec<(f64, f64)>,
    min_chord: f64,
    max_diffusion: f64,
}

fn stage(curve: &GeneratingCurve, speed: &SpeedSpec, cone_tol: f64, t: f64) -> Result<Stage, SolverError> {
    let geom = profile::geometry(curve)?;
    let mut velocity = Vec::with_capacity(geom.lambda.len());
    let mut max_diffusion = 0.0f64;
    for i in 0..geom.lambda.len() {
        let (lambda, mu) = (geom.lambda[i], geom.mu[i]);
        if !(lambda.is_finite() && mu.is_finite()) {
            return Err(SolverError::NumericalBlowup { t });
        }
        if !(mu > 0.0) || lambda < -cone_tol * mu || lambda > (1.0 + cone_tol) * mu {
            return Err(SolverError::ConeExit { t, node: i, lambda, mu });
        }
        let (f, d) = speed.value_and_diffusion(lambda.clamp(0.0, mu), mu);
        max_diffusion = max_diffusion.max(d);
        let (nx, nu) = geom.normal(i);
        velocity.push((-f * nx, -f * nu));
    }
    let min_chord = curve.chords().into_iter().fold(f64::INFINITY, f64::min);
    Ok(Stage { velocity, min_chord, max_diffusion })
}

fn cfl_from_stage(st: &Stage, control: &StepControl) -> f64 {
    (control.cfl * st.min_chord * st.min_chord / st.max_diffusion).min(control.max_dt)
}

/// Stable working-frame step: `cfl · (min spacing)² / max(ḟ¹ + (n−1)ḟ²)`,
/// capped by `max_dt`.
pub fn cfl_dt(state: &FlowState, speed: &SpeedSpec, control: &StepControl) -> Result<f64, SolverError> {
    let st = stage(&state.curve, speed, control.cone_tol, state.t)?;
    Ok(cfl_from_stage(&st, control))
}

fn advance(curve: &GeneratingCurve, v: &[(f64, f64)], dt: f64, t: f64) -> Result<GeneratingCurve, SolverError> {
    let last = v.len() - 1;
    let mut x = Vec::with_capacity(v.len());
    let mut u = Vec::with_capacity(v.len());
    for (i, vi) in v.iter().enumerate() {
        x.push(curve.x()[i] + dt * vi.0);
        u.push(if i == 0 || i == last { 0.0 } else { curve.u()[i] + dt * vi.1 });
    }
    if x.iter().any(|v| !v.is_finite()) || u[1..last].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(SolverError::NumericalBlowup { t });
    }
    Ok(GeneratingCurve::from_parts(curve.n(), x, u))
}

fn midpoint(state: &FlowState, speed: &SpeedSpec, control: &StepControl, first: &Stage, dt: f64) -> Result<FlowState, SolverError> {
    let half = advance(&state.curve, &first.velocity, 0.5 * dt, state.t)?;
    let mid = stage(&half, speed, control.cone_tol, state.t)?;
    let mut curve = advance(&state.curve, &mid.velocity, dt, state.t)?;
    let step = state.step + 1;
    if step % control.resample_every as u64 == 0 {
        curve = profile::resample_with(&curve, control.redistribution)?;
    }
    Ok(FlowState { curve, t: state.t + dt / state.time_factor(speed.alpha()), step, ledger: state.ledger })
}

/// One explicit midpoint step with the CFL time step.
pub fn step(state: &FlowState, speed: &SpeedSpec, control: &StepControl) -> Result<FlowState, SolverError> {
    let first = stage(&state.curve, speed, control.cone_tol, state.t)?;
    let dt = cfl_from_stage(&first, control);
    midpoint(state, speed, control, &first, dt)
}

/// One explicit midpoint step of prescribed working-frame length `dt`.
pub fn step_with_dt(state: &FlowState, speed: &SpeedSpec, control: &StepControl, dt: f64) -> Result<FlowState, SolverError> {
    let first = stage(&state.curve, speed, control.cone_tol, state.t)?;
    midpoint(state, speed, control, &first, dt)
}

/// Parabolic rescaling of the working frame about its axial center, so that
/// the maximal curvature becomes `target`. States below `trigger` are
/// returned unchanged.
pub fn rescale_continuation(state: &FlowState, trigger_curvature: f64, target_curvature: f64) -> Result<FlowState, SolverError> {
    let geom = profile::geometry(&state.curve)?;
    let kmax = geom.max_curvature();
    if kmax < trigger_curvature {
        return Ok(state.clone());
    }
    let factor = kmax / target_curvature;
    let center = state.curve.axial_center();
    Ok(FlowState {
        curve: state.curve.transformed(center, factor),
        t: state.t,
        step: state.step,
        ledger: state.ledger.compose(center, factor),
    })
}

/// Original-frame diagnostics of a state.
pub fn diagnose(state: &FlowState, speed: &SpeedSpec, event: CheckpointEvent) -> Result<Checkpoint, SolverError> {
    let geom = profile::geometry(&state.curve)?;
    let m = profile::metrics(&state.curve);
    let lt = state.ledger.lambda_total;
    let fscale = lt.powf(speed.alpha());
    let n = speed.n();
    let sigma = 1.0 / (n * (n - 1)) as f64;
    let (mut min_l, mut max_l, mut min_m, mut max_m) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
    let (mut min_f, mut max_f, mut min_h, mut max_h) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    let (mut min_gap, mut z_margin) = (f64::INFINITY, f64::NEG_INFINITY);
    for (l, mu) in geom.lambda.iter().zip(&geom.mu) {
        let k = CurvatureVector::new(n, *l, *mu);
        let f = speed.evaluate_unchecked(l.clamp(0.0, *mu), *mu);
        let h = k.mean();
        min_l = min_l.min(*l);
        max_l = max_l.max(*l);
        min_m = min_m.min(*mu);
        max_m = max_m.max(*mu);
        min_f = min_f.min(f);
        max_f = max_f.max(f);
        min_h = min_h.min(h);
        max_h = max_h.max(h);
        min_gap = min_gap.min(mu - l);
        z_margin = z_margin.max(algebra::z_sigma(&k, sigma) / (h * h));
    }
    let last = geom.lambda.len() - 1;
    let f_pole = speed
        .evaluate_unchecked(geom.lambda[0], geom.lambda[0])
        .max(speed.evaluate_unchecked(geom.lambda[last], geom.lambda[last]));
    Ok(Checkpoint {
        t: state.t,
        dt_prev: 0.0,
        t_to_end: 0.0,
        step: state.step,
        a: m.a / lt,
        b: m.b / lt,
        ratio: m.ratio,
        min_lambda: min_l * lt,
        max_lambda: max_l * lt,
        min_mu: min_m * lt,
        max_mu: max_m * lt,
        min_mu_minus_lambda: min_gap * lt,
        min_f: min_f * fscale,
        max_f: max_f * fscale,
        min_h: min_h * lt,
        max_h: max_h * lt,
        z_margin,
        f_pole: f_pole * fscale,
        support_axial: profile::support(&state.curve, (1.0, 0.0)) / lt,
        max_curvature: geom.max_curvature() * lt,
        lambda_total: lt,
        event,
    })
}

fn ratio_of(state: &FlowState) -> f64 {
    profile::metrics(&state.curve).ratio
}

/// Re-steps from `prev` with a shortened `dt` so that `a/b` lands on `target`.
/// Returns the new state and the working-frame step actually taken.
fn localize_ratio(
    prev: &FlowState,
    speed: &SpeedSpec,
    control: &StepControl,
    dt_full: f64,
    target: f64,
) -> Result<(FlowState, f64), SolverError> {
    let (mut lo, mut hi) = (0.0, dt_full);
    let mut best = step_with_dt(prev, speed, control, dt_full)?;
    let (mut r_lo, mut r_hi) = (ratio_of(prev) - target, ratio_of(&best) - target);
    for _ in 0..60 {
        if r_hi.abs() <= 1e-12 * target || hi - lo <= 1e-14 * dt_full {
            break;
        }
        // secant guess, safeguarded by bisection
        let mut dt = hi - r_hi * (hi - lo) / (r_hi - r_lo);
        if !(dt > lo && dt < hi) {
            dt = 0.5 * (lo + hi);
        }
        let trial = step_with_dt(prev, speed, control, dt)?;
        let r = ratio_of(&trial) - target;
        if r > 0.0 {
            lo = dt;
            r_lo = r;
        } else {
            hi = dt;
            r_hi = r;
            best = trial;
        }
    }
    Ok((best, hi))
}

struct Recorder<'a> {
    speed: &'a SpeedSpec,
    snapshot_every: usize,
    checkpoints: Vec<Checkpoint>,
    snapshots: Vec<Snapshot>,
    cadence_count: usize,
    /// Original-frame time accumulated since the last checkpoint.
    since_last: f64,
}

impl Recorder<'_> {
    /// Records a checkpoint unless one already exists for this step; returns
    /// the original-frame maximal curvature.
    fn record(&mut self, state: &FlowState, event: CheckpointEvent) -> Result<f64, SolverError> {
        if let Some(last) = self.checkpoints.last_mut() {
            if last.step == state.step {
                let kmax = last.max_curvature;
                if event != CheckpointEvent::Cadence {
                    last.event = event;
                    self.ensure_snapshot(state);
                }
                return Ok(kmax);
            }
        }
        let mut cp = diagnose(state, self.speed, event)?;
        cp.dt_prev = if self.checkpoints.is_empty() { 0.0 } else { self.since_last };
        self.since_last = 0.0;
        let kmax = cp.max_curvature;
        self.checkpoints.push(cp);
        let keep = match event {
            CheckpointEvent::Cadence => {
                self.cadence_count += 1;
                self.snapshot_every > 0 && self.cadence_count % self.snapshot_every == 0
            }
            _ => true,
        };
        if keep {
            self.ensure_snapshot(state);
        }
        Ok(kmax)
    }

    fn ensure_snapshot(&mut self, state: &FlowState) {
        let idx = self.checkpoints.len() - 1;
        if self.snapshots.last().map_or(false, |s| s.checkpoint == idx) {
            return;
        }
        self.snapshots.push(Snapshot {
            checkpoint: idx,
            t: state.t,
            t_to_end: 0.0,
            step: state.step,
            ledger: state.ledger,
            curve: state.curve.clone(),
        });
    }

    fn finish(mut self, meta: RunMeta) -> RunRecord {
        let mut acc = 0.0;
        for i in (0..self.checkpoints.len()).rev() {
            self.checkpoints[i].t_to_end = acc;
            acc += self.checkpoints[i].dt_prev;
        }
        for s in &mut self.snapshots {
            s.t_to_end = self.checkpoints[s.checkpoint].t_to_end;
        }
        RunRecord { meta, checkpoints: self.checkpoints, snapshots: self.snapshots }
    }
}

/// Integrates from `initial` until a stop condition fires.
pub fn run(initial: &GeneratingCurve, speed: &SpeedSpec, opts: &RunOptions) -> Result<RunRecord, SolverError> {
    run_from(FlowState::new(initial.clone()), speed, opts)
}

fn validate_run(state: &FlowState, speed: &SpeedSpec, opts: &RunOptions) -> Result<(), SolverError> {
    opts.control.validate()?;
    opts.stop.validate()?;
    if opts.checkpoint_every == 0 {
        return Err(SolverError::BadParam("checkpoint_every must be >= 1".into()));
    }
    if state.curve.n() != speed.n() {
        return Err(SolverError::BadParam(format!(
            "curve has n = {} but the speed has n = {}",
            state.curve.n(),
            speed.n()
        )));
    }
    Ok(())
}

/// Integrates from an arbitrary state (e.g. a stored snapshot).
pub fn run_from(state: FlowState, speed: &SpeedSpec, opts: &RunOptions) -> Result<RunRecord, SolverError> {
    validate_run(&state, speed, opts)?;
    let control = &opts.control;
    let alpha = speed.alpha();
    let mut state = state;
    let mut rec = Recorder {
        speed,
        snapshot_every: opts.snapshot_every,
        checkpoints: Vec::new(),
        snapshots: Vec::new(),
        cadence_count: 0,
        since_last: 0.0,
    };
    let mut pending_events: Vec<f64> = opts.ratio_events.clone();
    pending_events.sort_by(|a, b| b.total_cmp(a));
    pending_events.retain(|r| *r < ratio_of(&state));

    let mut kmax = rec.record(&state, CheckpointEvent::Start)?;
    let terminal = loop {
        if kmax >= opts.stop.max_curvature {
            break TerminalReason::CurvatureThreshold;
        }
        if opts.stop.t_end.map_or(false, |t_end| state.t >= t_end) {
            break TerminalReason::EndTime;
        }
        if state.step >= opts.stop.max_steps {
            break TerminalReason::MaxSteps;
        }

        let first = stage(&state.curve, speed, control.cone_tol, state.t)?;
        let mut dt = cfl_from_stage(&first, control);
        let mut landing = false;
        if let Some(t_end) = opts.stop.t_end {
            let remaining = (t_end - state.t) * state.time_factor(alpha);
            if dt >= remaining {
                dt = remaining;
                landing = true;
            }
        }
        let mut next = midpoint(&state, speed, control, &first, dt)?;
        let mut event = None;
        if let Some(target) = pending_events.first().copied() {
            if ratio_of(&next) <= target {
                let (hit, dt_hit) = localize_ratio(&state, speed, control, dt, target)?;
                next = hit;
                dt = dt_hit;
                landing = false;
                pending_events.remove(0);
                pending_events.retain(|e| *e < ratio_of(&next));
                event = Some(CheckpointEvent::RatioCrossing);
            }
        }
        if landing {
            next.t = opts.stop.t_end.unwrap_or(next.t);
        }
        rec.since_last += dt / state.time_factor(alpha);
        state = next;

        if let Some(c) = opts.continuation {
            let rescaled = rescale_continuation(&state, c.trigger, c.target)?;
            if rescaled.ledger.rescalings != state.ledger.rescalings {
                state = rescaled;
                event = event.or(Some(CheckpointEvent::Rescale));
            }
        }

        kmax = if let Some(ev) = event {
            rec.record(&state, ev)?
        } else if state.step % opts.checkpoint_every == 0 || landing {
            rec.record(&state, CheckpointEvent::Cadence)?
        } else {
            profile::geometry(&state.curve)?.max_curvature() * state.ledger.lambda_total
        };
    };
    rec.record(&state, CheckpointEvent::Terminal)?;
    let descriptor = speed.descriptor().unwrap_or_else(|| crate::speeds::SpeedDescriptor {
        kind: "user-supplied".into(),
        alpha,
        coefficients: vec![],
        n: Some(speed.n()),
    });
    let meta = RunMeta {
        speed: descriptor,
        n: speed.n(),
        alpha,
        nodes: state.curve.segments(),
        terminal,
        steps: state.step,
        t_final: state.t,
    };
    Ok(rec.finish(meta))
}

/// State at `remaining` original-frame time units before the end of
/// `record`, re-integrated from the latest snapshot that precedes it.
/// Working with the time left keeps full precision near the singular time.
pub fn state_before_end(
    record: &RunRecord,
    speed: &SpeedSpec,
    opts: &RunOptions,
    remaining: f64,
) -> Result<FlowState, SolverError> {
    let snap = record
        .snapshots
        .iter()
        .filter(|s| s.t_to_end >= remaining)
        .last()
        .ok_or_else(|| SolverError::InsufficientData(format!("no snapshot {remaining} before the end of the run")))?;
    advance_for(&FlowState::from_snapshot(snap), speed, opts, snap.t_to_end - remaining)
}

/// Integrates for an original-frame `duration`, landing exactly on it.
pub fn advance_for(start: &FlowState, speed: &SpeedSpec, opts: &RunOptions, duration: f64) -> Result<FlowState, SolverError> {
    let control = &opts.control;
    let alpha = speed.alpha();
    let mut state = start.clone();
    let mut elapsed = 0.0;
    while elapsed < duration {
        let first = stage(&state.curve, speed, control.cone_tol, state.t)?;
        let factor = state.time_factor(alpha);
        let mut dt = cfl_from_stage(&first, control);
        let left = (duration - elapsed) * factor;
        let last = dt >= left;
        if last {
            dt = left;
        }
        state = midpoint(&state, speed, control, &first, dt)?;
        elapsed = if last { duration } else { elapsed + dt / factor };
        if let Some(c) = opts.continuation {
            state = rescale_continuation(&state, c.trigger, c.target)?;
        }
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundPoint {
    pub detected: bool,
    pub t_detect: Option<f64>,
    pub t_singular_estimate: f64,
    /// Estimated singular time minus the final time of the record.
    pub singular_tail: f64,
}

/// Least-squares fit of `b^{1+α}` linear in time over `checkpoints`;
/// returns the zero crossing as a time after the last checkpoint.
pub fn fit_singular_tail(checkpoints: &[Checkpoint], alpha: f64) -> Result<f64, SolverError> {
    if checkpoints.len() < 3 {
        return Err(SolverError::InsufficientData("need at least 3 checkpoints for the fit".into()));
    }
    let end = checkpoints[checkpoints.len() - 1].t_to_end;
    // time coordinate relative to the last checkpoint of the window
    let pts: Vec<(f64, f64)> = checkpoints.iter().map(|c| (end - c.t_to_end, c.b.powf(1.0 + alpha))).collect();
    let m = pts.len() as f64;
    let (st, sy) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mt, my) = (st / m, sy / m);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (t, y) in &pts {
        sxx += (t - mt) * (t - mt);
        sxy += (t - mt) * (y - my);
    }
    if !(sxx > 0.0) {
        return Err(SolverError::InsufficientData("degenerate fit window".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    if !(slope < 0.0) {
        return Err(SolverError::InsufficientData("radius is not shrinking over the fit window".into()));
    }
    Ok(-intercept / slope - end)
}

/// Number of trailing checkpoints used by [`detect_round_point`].
pub const FIT_WINDOW: usize = 12;

/// Round point: the run ended at the curvature threshold and some checkpoint
/// had `a/b ≤ 1+eps` and `max μ / min μ ≤ 1+eps`. The singular time is
/// extrapolated from the spherical law over the trailing checkpoints.
/// Errors only on an empty record.
pub fn detect_round_point(record: &RunRecord, eps: f64) -> Result<RoundPoint, SolverError> {
    let cps = &record.checkpoints;
    let last = cps.last().ok_or_else(|| SolverError::InsufficientData("empty record".into()))?;
    let window = FIT_WINDOW.min(cps.len());
    let alpha = record.meta.alpha;
    let singular_tail = fit_singular_tail(&cps[cps.len() - window..], alpha).unwrap_or_else(|_| {
        // spherical extrapolation from the last checkpoint
        let rate = (1.0 + alpha) * (record.meta.n as f64).powf(alpha);
        last.b.powf(1.0 + alpha) / rate
    });
    let reached = record.meta.terminal == TerminalReason::CurvatureThreshold;
    let t_detect = if reached {
        cps.iter().find(|c| c.ratio <= 1.0 + eps && c.mu_spread() <= 1.0 + eps).map(|c| c.t)
    } else {
        None
    };
    Ok(RoundPoint {
        detected: t_detect.is_some(),
        t_detect,
        t_singular_estimate: record.meta.t_final + singular_tail,
        singular_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{exact_sphere_radius, make_sphere, make_spherocylinder, sphere_extinction_time};

    fn mcf(n: usize) -> SpeedSpec {
        SpeedSpec::mean_power(1.0, n).unwrap()
    }

    #[test]
    fn cfl_scales_quadratically() {
        let speed = mcf(2);
        let c = StepControl::default();
        let d64 = cfl_dt(&FlowState::new(make_sphere(1.0, 64, 2).unwrap()), &speed, &c).unwrap();
        let d128 = cfl_dt(&FlowState::new(make_sphere(1.0, 128, 2).unwrap()), &speed, &c).unwrap();
        let h = std::f64::consts::PI / 64.0;
        let chord = 2.0 * (h / 2.0).sin();
        assert!((d64 - 0.2 * chord * chord / 2.0).abs() < 1e-15);
        assert!((d64 / d128 - 4.0).abs() < 1e-3);
    }

    #[test]
    fn one_step_keeps_sphere_round() {
        let speed = mcf(2);
        let s = FlowState::new(make_sphere(1.0, 64, 2).unwrap());
        let next = step(&s, &speed, &StepControl::default()).unwrap();
        let radii: Vec<f64> = (0..=64).map(|i| next.curve.x()[i].hypot(next.curve.u()[i])).collect();
        let spread = radii.iter().cloned().fold(0.0, f64::max) - radii.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-10);
    }

    #[test]
    fn rescaling_a_small_sphere() {
        let s = FlowState::new(make_sphere(0.01, 64, 2).unwrap());
        let r = rescale_continuation(&s, 50.0, 1.0).unwrap();
        let m = profile::metrics(&r.curve);
        assert!((m.b - 1.0).abs() < 1e-9);
        assert!((r.ledger.lambda_total - 100.0).abs() < 1e-9);
        let orig = profile::metrics(&r.original_curve());
        assert!((orig.b - 0.01).abs() < 1e-12);
    }

    #[test]
    fn sphere_end_time_landing() {
        let speed = mcf(2);
        let opts = RunOptions {
            stop: StopConditions { t_end: Some(0.01), ..Default::default() },
            ..Default::default()
        };
        let rec = run(&make_sphere(1.0, 64, 2).unwrap(), &speed, &opts).unwrap();
        let last = rec.last().unwrap();
        assert_eq!(rec.meta.terminal, TerminalReason::EndTime);
        assert_eq!(last.t, 0.01);
        let exact = exact_sphere_radius(&speed, 1.0, 0.01).unwrap();
        assert!((last.b - exact).abs() < 1e-6);
        assert!(!detect_round_point(&rec, 0.05).unwrap().detected);
    }

    #[test]
    fn sphere_blowup_time() {
        let speed = mcf(2);
        let opts = RunOptions::default();
        let rec = run(&make_sphere(1.0, 64, 2).unwrap(), &speed, &opts).unwrap();
        assert_eq!(rec.meta.terminal, TerminalReason::CurvatureThreshold);
        let te = sphere_extinction_time(&speed, 1.0);
        assert!((rec.meta.t_final - te).abs() < 0.01 * te);
        let rp = detect_round_point(&rec, 0.05).unwrap();
        assert!(rp.detected);
        assert_eq!(rp.t_detect, Some(0.0));
        assert!((rp.t_singular_estimate - te).abs() < 1e-3 * te);
    }

    #[test]
    fn ratio_event_is_localized() {
        let speed = mcf(2);
        let opts = RunOptions {
            ratio_events: vec![2.0],
            control: StepControl { cone_tol: 0.1, ..Default::default() },
            stop: StopConditions { max_curvature: 20.0, ..Default::default() },
            ..Default::default()
        };
        let rec = run(&make_spherocylinder(1.5, 1.0, 64, 2).unwrap(), &speed, &opts).unwrap();
        let hit: Vec<_> = rec.checkpoints.iter().filter(|c| c.event == CheckpointEvent::RatioCrossing).collect();
        assert_eq!(hit.len(), 1);
        assert!((hit[0].ratio - 2.0).abs() < 1e-9);
    }
}
