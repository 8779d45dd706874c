//! Symmetric homogeneous speed functions restricted to rotationally symmetric
//! curvature vectors `(λ, μ, …, μ)`.
//!
//! Every speed is normalized at construction so that `f(1, …, 1) = n^α`.
//! Built-in kinds carry closed-form first and second partials; user-supplied
//! speeds only provide values and fall back to central differences.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default relative slack for the `λ = 0` and `λ = μ` faces of the cone.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpeedError {
    #[error("curvature ({lambda}, {mu}) lies outside the admissible cone")]
    Domain { lambda: f64, mu: f64 },
    #[error("speed evaluated to non-positive value {value} at ({lambda}, {mu})")]
    NonPositive { lambda: f64, mu: f64, value: f64 },
    #[error("invalid speed parameters: {0}")]
    BadParam(String),
    #[error("curvature vector has dimension {got}, speed expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A point `(λ, μ, …, μ)` with one axial and `n − 1` radial curvatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureVector {
    pub n: usize,
    pub lambda: f64,
    pub mu: f64,
}

impl CurvatureVector {
    pub fn new(n: usize, lambda: f64, mu: f64) -> Self {
        Self { n, lambda, mu }
    }

    fn radial(&self) -> f64 {
        (self.n - 1) as f64
    }

    /// Mean curvature `λ + (n−1)μ`.
    pub fn mean(&self) -> f64 {
        self.lambda + self.radial() * self.mu
    }

    /// `|h|² = λ² + (n−1)μ²`.
    pub fn norm_sq(&self) -> f64 {
        self.lambda * self.lambda + self.radial() * self.mu * self.mu
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `C = λ³ + (n−1)μ³`.
    pub fn cubic(&self) -> f64 {
        self.lambda.powi(3) + self.radial() * self.mu.powi(3)
    }

    /// Second elementary symmetric polynomial.
    pub fn sigma2(&self) -> f64 {
        let r = self.radial();
        r * self.lambda * self.mu + r * (r - 1.0) / 2.0 * self.mu * self.mu
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.n, c * self.lambda, c * self.mu)
    }

    /// Full `n`-vector with the axial entry first.
    pub fn expand(&self) -> Vec<f64> {
        let mut v = vec![self.mu; self.n];
        v[0] = self.lambda;
        v
    }
}

/// Membership in the closed cone `Γ₀ = {0 ≤ λ ≤ μ, μ > 0}` with absolute slack.
pub fn cone_contains(kappa: &CurvatureVector, tol: f64) -> bool {
    kappa.mu > tol && kappa.lambda >= -tol && kappa.lambda <= kappa.mu + tol
}

/// Value callback for user-supplied speeds. Receives the full curvature
/// vector (axial entry first).
pub type SpeedFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum SpeedKind {
    /// `H^α`
    MeanPower,
    /// `σ₂^{α/2}`, admissible on `Γ₀` only for `n ≥ 3`.
    Sigma2Power,
    /// `(aH² + b|h|²)^{α/2}` with `a > 0`, `b ≥ 0`.
    BlendedQuadratic { a: f64, b: f64 },
    UserSupplied { name: String, func: SpeedFn },
}

impl fmt::Debug for SpeedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MeanPower => write!(f, "MeanPower"),
            Self::Sigma2Power => write!(f, "Sigma2Power"),
            Self::BlendedQuadratic { a, b } => write!(f, "BlendedQuadratic {{ a: {a}, b: {b} }}"),
            Self::UserSupplied { name, .. } => write!(f, "UserSupplied({name})"),
        }
    }
}

impl SpeedKind {
    pub fn label(&self) -> String {
        match self {
            Self::MeanPower => "mean-power".into(),
            Self::Sigma2Power => "sigma2-power".into(),
            Self::BlendedQuadratic { a, b } => format!("blended-quadratic(a={a},b={b})"),
            Self::UserSupplied { name, .. } => format!("user:{name}"),
        }
    }
}

/// First and second partials at `(λ, μ, …, μ)`; index 1 is axial, 2 and 3
/// are two distinct radial slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedDerivatives {
    pub f: f64,
    pub df1: f64,
    pub df2: f64,
    pub d2f11: f64,
    pub d2f12: f64,
    pub d2f22: f64,
    pub d2f23: f64,
}

/// A normalized symmetric speed of homogeneity `alpha` in dimension `n`.
#[derive(Debug, Clone)]
pub struct SpeedSpec {
    kind: SpeedKind,
    alpha: f64,
    n: usize,
    normalizer: f64,
    boundary_tol: f64,
}

/// Serializable speed description, as it appears in run configs and records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedDescriptor {
    pub kind: String,
    pub alpha: f64,
    #[serde(default)]
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

impl SpeedDescriptor {
    pub fn kind(&self) -> Result<SpeedKind, SpeedError> {
        match self.kind.as_str() {
            "mean-power" => Ok(SpeedKind::MeanPower),
            "sigma2-power" => Ok(SpeedKind::Sigma2Power),
            "blended-quadratic" => match self.coefficients.as_slice() {
                [a, b] => Ok(SpeedKind::BlendedQuadratic { a: *a, b: *b }),
                _ => Err(SpeedError::BadParam(
                    "blended-quadratic needs coefficients [a, b]".into(),
                )),
            },
            "user-supplied" => Err(SpeedError::BadParam(
                "user-supplied speeds cannot be described in a config file".into(),
            )),
            other => Err(SpeedError::BadParam(format!("unknown speed kind `{other}`"))),
        }
    }

    pub fn build(&self, n: usize) -> Result<SpeedSpec, SpeedError> {
        if let Some(m) = self.n {
            if m != n {
                return Err(SpeedError::BadParam(format!(
                    "speed declares n = {m} but the run uses n = {n}"
                )));
            }
        }
        SpeedSpec::new(self.kind()?, self.alpha, n)
    }
}

/// Base quantity `P` of a built-in speed `f = c·P^β` with its partials.
struct PowerBase {
    p: f64,
    p1: f64,
    p2: f64,
    p11: f64,
    p12: f64,
    p22: f64,
    p23: f64,
    beta: f64,
}

impl SpeedSpec {
    /// Validating constructor.
    pub fn new(kind: SpeedKind, alpha: f64, n: usize) -> Result<Self, SpeedError> {
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(SpeedError::BadParam(format!(
                "homogeneity must be >= 1 (got alpha = {alpha})"
            )));
        }
        if n < 2 {
            return Err(SpeedError::BadParam(format!("dimension n must be >= 2 (got {n})")));
        }
        match &kind {
            SpeedKind::Sigma2Power if n == 2 => {
                return Err(SpeedError::BadParam(
                    "sigma2-power vanishes on the λ = 0 face of Γ₀ when n = 2; use n >= 3".into(),
                ))
            }
            SpeedKind::BlendedQuadratic { a, b } if !(*a > 0.0 && *b >= 0.0) => {
                return Err(SpeedError::BadParam(format!(
                    "blended-quadratic needs a > 0 and b >= 0 (got a = {a}, b = {b})"
                )))
            }
            _ => {}
        }
        let spec = Self::build_unchecked(kind, alpha, n);
        if !(spec.normalizer.is_finite() && spec.normalizer > 0.0) {
            return Err(SpeedError::BadParam("speed is not positive at (1, …, 1)".into()));
        }
        Ok(spec)
    }

    /// Builds a speed without admissibility checks. Used to audit candidate
    /// speeds that may violate the structural assumptions.
    pub fn build_unchecked(kind: SpeedKind, alpha: f64, n: usize) -> Self {
        let mut spec = Self {
            kind,
            alpha,
            n,
            normalizer: 1.0,
            boundary_tol: DEFAULT_BOUNDARY_TOL,
        };
        let ones = vec![1.0; n];
        spec.normalizer = (n as f64).powf(alpha) / spec.raw_full(&ones);
        spec
    }

    pub fn mean_power(alpha: f64, n: usize) -> Result<Self, SpeedError> {
        Self::new(SpeedKind::MeanPower, alpha, n)
    }

    pub fn sigma2_power(alpha: f64, n: usize) -> Result<Self, SpeedError> {
        Self::new(SpeedKind::Sigma2Power, alpha, n)
    }

    pub fn blended_quadratic(a: f64, b: f64, alpha: f64, n: usize) -> Result<Self, SpeedError> {
        Self::new(SpeedKind::BlendedQuadratic { a, b }, alpha, n)
    }

    pub fn user_supplied(
        name: impl Into<String>,
        func: SpeedFn,
        alpha: f64,
        n: usize,
    ) -> Result<Self, SpeedError> {
        Self::new(SpeedKind::UserSupplied { name: name.into(), func }, alpha, n)
    }

    pub fn with_boundary_tol(mut self, tol: f64) -> Self {
        self.boundary_tol = tol;
        self
    }

    pub fn kind(&self) -> &SpeedKind {
        &self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn id(&self) -> String {
        format!("{}[alpha={},n={}]", self.kind.label(), self.alpha, self.n)
    }

    pub fn descriptor(&self) -> Option<SpeedDescriptor> {
        let (kind, coefficients) = match &self.kind {
            SpeedKind::MeanPower => ("mean-power", vec![]),
            SpeedKind::Sigma2Power => ("sigma2-power", vec![]),
            SpeedKind::BlendedQuadratic { a, b } => ("blended-quadratic", vec![*a, *b]),
            SpeedKind::UserSupplied { .. } => return None,
        };
        Some(SpeedDescriptor {
            kind: kind.into(),
            alpha: self.alpha,
            coefficients,
            n: Some(self.n),
        })
    }

    /// Unnormalized value on a full curvature vector.
    fn raw_full(&self, k: &[f64]) -> f64 {
        let h: f64 = k.iter().sum();
        match &self.kind {
            SpeedKind::MeanPower => h.powf(self.alpha),
            SpeedKind::Sigma2Power => {
                let sq: f64 = k.iter().map(|v| v * v).sum();
                ((h * h - sq) / 2.0).powf(self.alpha / 2.0)
            }
            SpeedKind::BlendedQuadratic { a, b } => {
                let sq: f64 = k.iter().map(|v| v * v).sum();
                (a * h * h + b * sq).powf(self.alpha / 2.0)
            }
            SpeedKind::UserSupplied { func, .. } => func(k),
        }
    }

    /// Normalized value on a full curvature vector, no domain checks.
    pub fn evaluate_full(&self, k: &[f64]) -> f64 {
        self.normalizer * self.raw_full(k)
    }

    /// Normalized value at `(λ, μ, …, μ)`, no domain checks.
    pub fn evaluate_unchecked(&self, lambda: f64, mu: f64) -> f64 {
        match self.power_base(lambda, mu) {
            Some(pb) => self.normalizer * pb.p.powf(pb.beta),
            None => self.evaluate_full(&CurvatureVector::new(self.n, lambda, mu).expand()),
        }
    }

    fn check_domain(&self, kappa: &CurvatureVector) -> Result<(), SpeedError> {
        if kappa.n != self.n {
            return Err(SpeedError::DimensionMismatch { expected: self.n, got: kappa.n });
        }
        let tol = self.boundary_tol * kappa.mu.abs();
        if !(kappa.lambda.is_finite() && kappa.mu.is_finite()) || !cone_contains(kappa, tol) {
            return Err(SpeedError::Domain { lambda: kappa.lambda, mu: kappa.mu });
        }
        Ok(())
    }

    pub fn evaluate(&self, kappa: &CurvatureVector) -> Result<f64, SpeedError> {
        self.check_domain(kappa)?;
        let value = self.evaluate_unchecked(kappa.lambda, kappa.mu);
        if !(value.is_finite() && value > 0.0) {
            return Err(SpeedError::NonPositive { lambda: kappa.lambda, mu: kappa.mu, value });
        }
        Ok(value)
    }

    fn power_base(&self, lambda: f64, mu: f64) -> Option<PowerBase> {
        let n = self.n as f64;
        let r = n - 1.0;
        let h = lambda + r * mu;
        Some(match &self.kind {
            SpeedKind::MeanPower => PowerBase {
                p: h,
                p1: 1.0,
                p2: 1.0,
                p11: 0.0,
                p12: 0.0,
                p22: 0.0,
                p23: 0.0,
                beta: self.alpha,
            },
            SpeedKind::Sigma2Power => PowerBase {
                p: r * lambda * mu + r * (r - 1.0) / 2.0 * mu * mu,
                p1: r * mu,
                p2: lambda + (n - 2.0) * mu,
                p11: 0.0,
                p12: 1.0,
                p22: 0.0,
                p23: 1.0,
                beta: self.alpha / 2.0,
            },
            SpeedKind::BlendedQuadratic { a, b } => PowerBase {
                p: a * h * h + b * (lambda * lambda + r * mu * mu),
                p1: 2.0 * a * h + 2.0 * b * lambda,
                p2: 2.0 * a * h + 2.0 * b * mu,
                p11: 2.0 * a + 2.0 * b,
                p12: 2.0 * a,
                p22: 2.0 * a + 2.0 * b,
                p23: 2.0 * a,
                beta: self.alpha / 2.0,
            },
            SpeedKind::UserSupplied { .. } => return None,
        })
    }

    /// Value together with `ḟ¹ + (n−1)ḟ²`, the diffusion scale used for
    /// explicit step control.
    pub fn value_and_diffusion(&self, lambda: f64, mu: f64) -> (f64, f64) {
        let r = (self.n - 1) as f64;
        match self.power_base(lambda, mu) {
            Some(pb) => {
                let c = self.normalizer;
                let pw = pb.p.powf(pb.beta - 1.0);
                let f = c * pw * pb.p;
                let d = c * pb.beta * pw * (pb.p1 + r * pb.p2);
                (f, d)
            }
            None => {
                let d = self.finite_difference_derivatives(lambda, mu);
                (d.f, d.df1 + r * d.df2)
            }
        }
    }

    pub fn derivatives(&self, kappa: &CurvatureVector) -> Result<SpeedDerivatives, SpeedError> {
        self.check_domain(kappa)?;
        Ok(self.derivatives_unchecked(kappa.lambda, kappa.mu))
    }

    pub fn derivatives_unchecked(&self, lambda: f64, mu: f64) -> SpeedDerivatives {
        let Some(pb) = self.power_base(lambda, mu) else {
            return self.finite_difference_derivatives(lambda, mu);
        };
        let c = self.normalizer;
        let b = pb.beta;
        let first = c * b * pb.p.powf(b - 1.0);
        // P^{β−2} blows up at P = 0 for β < 2; the product with β − 1 = 0 is still 0.
        let second = if b == 1.0 { 0.0 } else { c * b * (b - 1.0) * pb.p.powf(b - 2.0) };
        SpeedDerivatives {
            f: c * pb.p.powf(b),
            df1: first * pb.p1,
            df2: first * pb.p2,
            d2f11: second * pb.p1 * pb.p1 + first * pb.p11,
            d2f12: second * pb.p1 * pb.p2 + first * pb.p12,
            d2f22: second * pb.p2 * pb.p2 + first * pb.p22,
            d2f23: second * pb.p2 * pb.p2 + first * pb.p23,
        }
    }

    /// Central differences on the full vector: step `1e−6·|κ|` for first
    /// partials, `1e−4·|κ|` for second partials.
    fn finite_difference_derivatives(&self, lambda: f64, mu: f64) -> SpeedDerivatives {
        let base = CurvatureVector::new(self.n, lambda, mu);
        let k0 = base.expand();
        let scale = base.norm().max(f64::MIN_POSITIVE);
        let f = |k: &[f64]| self.evaluate_full(k);
        let bump = |i: usize, hi: f64, j: usize, hj: f64| {
            let mut k = k0.clone();
            k[i] += hi;
            k[j] += hj;
            f(&k)
        };
        let h1 = 1e-6 * scale;
        let d1 = |i: usize| (bump(i, h1, i, 0.0) - bump(i, -h1, i, 0.0)) / (2.0 * h1);
        let h2 = 1e-4 * scale;
        let f0 = f(&k0);
        let dii = |i: usize| (bump(i, h2, i, 0.0) - 2.0 * f0 + bump(i, -h2, i, 0.0)) / (h2 * h2);
        let dij = |i: usize, j: usize| {
            (bump(i, h2, j, h2) - bump(i, h2, j, -h2) - bump(i, -h2, j, h2) + bump(i, -h2, j, -h2))
                / (4.0 * h2 * h2)
        };
        SpeedDerivatives {
            f: f0,
            df1: d1(0),
            df2: d1(1),
            d2f11: dii(0),
            d2f12: dij(0, 1),
            d2f22: dii(1),
            d2f23: if self.n >= 3 { dij(1, 2) } else { 0.0 },
        }
    }

    /// `f(0, 1, …, 1)`, the cylinder speed.
    pub fn cylinder_value(&self) -> f64 {
        self.evaluate_unchecked(0.0, 1.0)
    }

    /// `f(1, …, 1) = n^α`.
    pub fn sphere_value(&self) -> f64 {
        self.evaluate_unchecked(1.0, 1.0)
    }
}

/// Unit-norm point of `Γ₀` with `λ/μ = t`.
fn unit_cone_point(n: usize, t: f64) -> CurvatureVector {
    let k = CurvatureVector::new(n, t, 1.0);
    k.scaled(1.0 / k.norm())
}

fn ratio_grid(grid: usize) -> impl Iterator<Item = f64> {
    let g = grid.max(2);
    (0..g).map(move |k| k as f64 / (g - 1) as f64)
}

/// Minimum over `Γ₀ ∩ S^{n−1}` of `(ḟ¹λ² + (n−1)ḟ²μ²)/f²`, sampled on
/// `grid` values of `λ/μ ∈ [0, 1]`.
pub fn tso_constant(speed: &SpeedSpec, grid: usize) -> Result<f64, SpeedError> {
    let r = (speed.n() - 1) as f64;
    let mut best = f64::INFINITY;
    let mut at = (0.0, 0.0);
    for t in ratio_grid(grid) {
        let k = unit_cone_point(speed.n(), t);
        let d = speed.derivatives(&k)?;
        let q = (d.df1 * k.lambda * k.lambda + r * d.df2 * k.mu * k.mu) / (d.f * d.f);
        if q < best {
            best = q;
            at = (k.lambda, k.mu);
        }
    }
    if !(best > 0.0 && best.is_finite()) {
        return Err(SpeedError::NonPositive { lambda: at.0, mu: at.1, value: best });
    }
    Ok(best)
}

/// Bounds `m₁ ≤ f/H^α ≤ m₂` over `Γ₀ ∩ S^{n−1}` by grid search.
pub fn comparability_bounds(speed: &SpeedSpec, grid: usize) -> (f64, f64) {
    ratio_grid(grid)
        .map(|t| {
            let k = unit_cone_point(speed.n(), t);
            speed.evaluate_unchecked(k.lambda, k.mu) / k.mean().powf(speed.alpha())
        })
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), q| (lo.min(q), hi.max(q)))
}

/// Outcome of sampling the structural assumptions of a speed on `Γ₀`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub speed: String,
    pub samples: usize,
    /// Largest relative change under swapping the axial entry with a radial one.
    pub symmetry_residual: f64,
    /// Smallest `f/|κ|^α` seen.
    pub min_scaled_value: f64,
    /// Smallest `ḟⁱ·|κ|^{1−α}` over all slots and samples.
    pub monotonicity_margin: f64,
    pub homogeneity_residual: f64,
    pub normalization_residual: f64,
    pub symmetric: bool,
    pub positive: bool,
    pub monotone: bool,
    pub homogeneous: bool,
    pub normalized: bool,
    pub failures: Vec<String>,
    pub pass: bool,
}

/// Samples `Γ₀` (interior and the `λ = 0` face) and checks symmetry,
/// positivity, strict monotonicity, homogeneity and normalization.
pub fn verify_assumptions(speed: &SpeedSpec, samples: usize) -> AssumptionReport {
    let n = speed.n();
    let alpha = speed.alpha();
    let samples = samples.max(2);
    let scales = [0.3, 1.0, 3.7];
    let mut sym_res = 0.0f64;
    let mut min_val = f64::INFINITY;
    let mut mono = f64::INFINITY;
    let mut homog = 0.0f64;
    let mut failures = Vec::new();

    for k in 0..samples {
        // first sample sits on the λ = 0 face
        let t = if k == 0 { 0.0 } else { k as f64 / (samples - 1) as f64 };
        let base = unit_cone_point(n, t).scaled(scales[k % scales.len()]);
        let norm = base.norm();
        let full = base.expand();
        let f = speed.evaluate_full(&full);

        let mut swapped = full.clone();
        swapped.swap(0, n - 1);
        let fs = speed.evaluate_full(&swapped);
        let rel = ((f - fs) / f.abs().max(f64::MIN_POSITIVE)).abs();
        sym_res = sym_res.max(if rel.is_finite() { rel } else { f64::INFINITY });

        let scaled_val = f / norm.powf(alpha);
        if !(scaled_val > 0.0) && failures.len() < 16 {
            failures.push(format!("positivity fails at (λ, μ) = ({:.4}, {:.4}): f = {f:e}", base.lambda, base.mu));
        }
        min_val = min_val.min(if scaled_val.is_nan() { f64::NEG_INFINITY } else { scaled_val });

        let d = speed.derivatives_unchecked(base.lambda, base.mu);
        let m = d.df1.min(d.df2) * norm.powf(1.0 - alpha);
        mono = mono.min(if m.is_nan() { f64::NEG_INFINITY } else { m });

        for c in [0.5, 2.0, 10.0] {
            let fc = speed.evaluate_full(&base.scaled(c).expand());
            let r = ((fc - c.powf(alpha) * f) / fc).abs();
            homog = homog.max(if r.is_finite() { r } else { f64::INFINITY });
        }
    }
    let nval = (n as f64).powf(alpha);
    let norm_res = ((speed.evaluate_full(&vec![1.0; n]) - nval) / nval).abs();

    let symmetric = sym_res <= 1e-12;
    let positive = min_val > 0.0;
    let monotone = mono > 0.0 && mono.is_finite();
    let homogeneous = homog <= 1e-10;
    let normalized = norm_res <= 1e-12;
    if !symmetric {
        failures.push(format!("symmetry residual {sym_res:e}"));
    }
    if !monotone {
        failures.push(format!("monotonicity margin {mono:e}"));
    }
    if !homogeneous {
        failures.push(format!("homogeneity residual {homog:e}"));
    }
    if !normalized {
        failures.push(format!("normalization residual {norm_res:e}"));
    }
    AssumptionReport {
        speed: speed.id(),
        samples,
        symmetry_residual: sym_res,
        min_scaled_value: min_val,
        monotonicity_margin: mono,
        homogeneity_residual: homog,
        normalization_residual: norm_res,
        symmetric,
        positive,
        monotone,
        homogeneous,
        normalized,
        pass: symmetric && positive && monotone && homogeneous && normalized,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn kv(n: usize, l: f64, m: f64) -> CurvatureVector {
        CurvatureVector::new(n, l, m)
    }

    #[test]
    fn evaluate_examples() {
        let s = SpeedSpec::mean_power(2.0, 2).unwrap();
        assert_relative_eq!(s.evaluate(&kv(2, 1.0, 1.0)).unwrap(), 4.0, epsilon = 1e-14);
        let s = SpeedSpec::mean_power(1.0, 3).unwrap();
        assert_relative_eq!(s.evaluate(&kv(3, 0.0, 1.0)).unwrap(), 2.0, epsilon = 1e-14);
        // a = 1, b = 0 reduces to H² after normalization (factor 1)
        let s = SpeedSpec::blended_quadratic(1.0, 0.0, 2.0, 2).unwrap();
        assert_relative_eq!(s.evaluate(&kv(2, 1.0, 2.0)).unwrap(), 9.0, epsilon = 1e-13);
    }

    #[test]
    fn cone_membership() {
        assert!(cone_contains(&kv(2, 0.5, 1.0), 0.0));
        assert!(!cone_contains(&kv(2, 1.1, 1.0), 0.0));
        assert!(cone_contains(&kv(2, 0.0, 1.0), 0.0));
        assert!(!cone_contains(&kv(2, -0.1, 1.0), 0.0));
        assert!(!cone_contains(&kv(2, 0.0, 0.0), 0.0));
    }

    #[test]
    fn domain_and_parameter_errors() {
        let s = SpeedSpec::mean_power(1.0, 2).unwrap();
        assert!(matches!(s.evaluate(&kv(2, 1.5, 1.0)), Err(SpeedError::Domain { .. })));
        assert!(matches!(s.evaluate(&kv(3, 0.5, 1.0)), Err(SpeedError::DimensionMismatch { .. })));
        let err = SpeedSpec::mean_power(0.5, 2).unwrap_err();
        assert!(err.to_string().contains("homogeneity must be >= 1"));
        assert!(SpeedSpec::sigma2_power(2.0, 2).is_err());
        assert!(SpeedSpec::blended_quadratic(0.0, 1.0, 2.0, 2).is_err());
        // boundary drift at λ = 0 is tolerated
        assert!(s.evaluate(&kv(2, -1e-14, 1.0)).is_ok());
    }

    #[test]
    fn mean_power_derivatives() {
        let s = SpeedSpec::mean_power(2.0, 2).unwrap();
        let d = s.derivatives(&kv(2, 1.0, 2.0)).unwrap();
        assert_relative_eq!(d.df1, 6.0, epsilon = 1e-13);
        assert_relative_eq!(d.df2, 6.0, epsilon = 1e-13);
        let lin = SpeedSpec::mean_power(1.0, 4).unwrap();
        let d = lin.derivatives(&kv(4, 0.3, 0.9)).unwrap();
        for v in [d.d2f11, d.d2f12, d.d2f22, d.d2f23] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn user_supplied_matches_builtin() {
        let func: SpeedFn = Arc::new(|k: &[f64]| {
            let h: f64 = k.iter().sum();
            let sq: f64 = k.iter().map(|v| v * v).sum();
            (h * h + sq).powf(1.5)
        });
        let user = SpeedSpec::user_supplied("blend", func, 3.0, 3).unwrap();
        let builtin = SpeedSpec::blended_quadratic(1.0, 1.0, 3.0, 3).unwrap();
        let k = kv(3, 0.4, 1.1);
        let du = user.derivatives(&k).unwrap();
        let db = builtin.derivatives(&k).unwrap();
        assert_relative_eq!(du.f, db.f, max_relative = 1e-13);
        assert_relative_eq!(du.df1, db.df1, max_relative = 1e-7);
        assert_relative_eq!(du.df2, db.df2, max_relative = 1e-7);
        assert_relative_eq!(du.d2f11, db.d2f11, max_relative = 1e-5);
        assert_relative_eq!(du.d2f12, db.d2f12, max_relative = 1e-5);
        assert_relative_eq!(du.d2f23, db.d2f23, max_relative = 1e-5);
    }

    #[test]
    fn tso_constants() {
        let s = SpeedSpec::mean_power(1.0, 2).unwrap();
        assert_relative_eq!(tso_constant(&s, 201).unwrap(), 0.5, epsilon = 1e-12);
        let s = SpeedSpec::mean_power(1.0, 3).unwrap();
        assert_relative_eq!(tso_constant(&s, 201).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn descriptor_round_trip() {
        let s = SpeedSpec::blended_quadratic(1.0, 0.5, 2.0, 3).unwrap();
        let d = s.descriptor().unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: SpeedDescriptor = serde_json::from_str(&json).unwrap();
        let s2 = back.build(3).unwrap();
        assert_eq!(s2.id(), s.id());
        assert!(back.build(2).is_err());
    }

    #[test]
    fn sigma2_fails_positivity_in_dimension_two() {
        let s = SpeedSpec::build_unchecked(SpeedKind::Sigma2Power, 2.0, 2);
        let r = verify_assumptions(&s, 50);
        assert!(!r.positive);
        assert!(!r.pass);
        let s = SpeedSpec::sigma2_power(2.0, 3).unwrap();
        assert!(verify_assumptions(&s, 50).pass);
    }
}
