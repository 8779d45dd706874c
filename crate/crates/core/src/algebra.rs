//! Closed-form algebra on the cone `Γ₀`: pinching functions, the reaction
//! estimate on `Z_σ = 0`, Euler identities and the gradient-term brackets
//! at stationary points of a curvature function `G`.
//!
//! Every bracket is the coefficient multiplying `(∇₁h₂₂)²`; that factor is
//! treated as an opaque positive multiplier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::speeds::{CurvatureVector, SpeedError, SpeedSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("no root of Z_sigma = 0 with 0 <= lambda <= mu for sigma = {sigma}, n = {n}")]
    NoRoot { sigma: f64, n: usize },
    #[error("degenerate point: {0}")]
    DegeneratePoint(String),
    #[error("point is off the G = 0 locus (|G|/H^2 = {0:e})")]
    OffLocus(f64),
    #[error("form `{form}` cannot be used with {gspec}")]
    Unsupported { form: &'static str, gspec: &'static str },
    #[error("invalid pinching parameters: {0}")]
    BadParam(String),
    #[error(transparent)]
    Speed(#[from] SpeedError),
}

/// Relative tolerance for locus and degeneracy checks (scaled by `H²`).
pub const LOCUS_TOL: f64 = 1e-9;

/// Parameters of the improved pinching function
/// `Z_l = |h|² − H²/n − σ₀ M_H^l H^{2−l}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinchParams {
    pub sigma0: f64,
    pub mh: f64,
    pub l: f64,
}

impl PinchParams {
    pub fn new(n: usize, sigma0: f64, mh: f64, l: f64) -> Result<Self, AlgebraError> {
        let cap = 1.0 / (n * (n - 1)) as f64;
        if !(sigma0 > 0.0 && sigma0 < cap) {
            return Err(AlgebraError::BadParam(format!("need 0 < sigma0 < {cap}, got {sigma0}")));
        }
        if !(l > 0.0 && l < 1.0) {
            return Err(AlgebraError::BadParam(format!("need 0 < l < 1, got {l}")));
        }
        if !(mh > 0.0) {
            return Err(AlgebraError::BadParam(format!("need M_H > 0, got {mh}")));
        }
        Ok(Self { sigma0, mh, l })
    }

    /// `Ĝ = σ₀ M_H^l H^{2−l}`.
    pub fn ghat(&self, h: f64) -> f64 {
        self.sigma0 * self.mh.powf(self.l) * h.powf(2.0 - self.l)
    }
}

/// `Z_σ = |h|² − (1/n + σ)H²`.
pub fn z_sigma(kappa: &CurvatureVector, sigma: f64) -> f64 {
    let h = kappa.mean();
    kappa.norm_sq() - (1.0 / kappa.n as f64 + sigma) * h * h
}

/// Both sides of `|h|² − H²/(n−1) = λ((n−2)/(n−1)·λ − 2μ)`.
pub fn pinch_identity(kappa: &CurvatureVector) -> (f64, f64) {
    let r = (kappa.n - 1) as f64;
    let h = kappa.mean();
    let lhs = kappa.norm_sq() - h * h / r;
    let rhs = kappa.lambda * ((kappa.n as f64 - 2.0) / r * kappa.lambda - 2.0 * kappa.mu);
    (lhs, rhs)
}

/// The root `λ ∈ [0, μ]` of `Z_σ(λ, μ) = 0`.
pub fn z_sigma_root(mu: f64, sigma: f64, n: usize) -> Result<f64, AlgebraError> {
    let nf = n as f64;
    let r = nf - 1.0;
    let cap = 1.0 / (nf * r);
    if !(sigma > 0.0 && sigma <= cap * (1.0 + 1e-14) && mu > 0.0) {
        return Err(AlgebraError::NoRoot { sigma, n });
    }
    let k = 1.0 / nf + sigma;
    // (1−k)λ² − 2k(n−1)μ λ + (n−1)(1 − k(n−1))μ² = 0
    let qa = 1.0 - k;
    let qb = -2.0 * k * r * mu;
    let qc = (r * (1.0 - k * r) * mu * mu).max(0.0);
    let lambda = if qa.abs() < 1e-15 {
        -qc / qb
    } else {
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        // smaller root, written to avoid cancellation (qb < 0)
        2.0 * qc / (-qb + disc.sqrt())
    };
    if !(lambda >= 0.0 && lambda <= mu) {
        return Err(AlgebraError::NoRoot { sigma, n });
    }
    Ok(lambda)
}

/// Reaction estimate on the `Z_σ = 0` locus. Returns
/// `(nC − (1+nσ)H|h|², σ(1+nσ)(1−√(n(n−1)σ))H³, λ)`.
pub fn reaction_gap(mu: f64, sigma: f64, n: usize) -> Result<(f64, f64, f64), AlgebraError> {
    let lambda = z_sigma_root(mu, sigma, n)?;
    let k = CurvatureVector::new(n, lambda, mu);
    let nf = n as f64;
    let h = k.mean();
    let lhs = nf * k.cubic() - (1.0 + nf * sigma) * h * k.norm_sq();
    let root = (nf * (nf - 1.0) * sigma).min(1.0).sqrt();
    let rhs = sigma * (1.0 + nf * sigma) * (1.0 - root) * h.powi(3);
    Ok((lhs, rhs, lambda))
}

/// Euler-identity residuals `(λḟ¹ + (n−1)μḟ² − αf, second-order analogue)`.
pub fn euler_residuals(speed: &SpeedSpec, kappa: &CurvatureVector) -> Result<(f64, f64), AlgebraError> {
    let d = speed.derivatives(kappa)?;
    let (l, m) = (kappa.lambda, kappa.mu);
    let r = (kappa.n - 1) as f64;
    let a = speed.alpha();
    let r1 = l * d.df1 + r * m * d.df2 - a * d.f;
    let r2 = l * l * d.d2f11 + 2.0 * r * l * m * d.d2f12 + r * m * m * d.d2f22
        + r * (r - 1.0) * m * m * d.d2f23
        - a * (a - 1.0) * d.f;
    Ok((r1, r2))
}

/// Value and partials of a rotationally symmetric curvature function `G`
/// (index 1 axial, 2 and 3 radial).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GDerivatives {
    pub g: f64,
    pub g1: f64,
    pub g2: f64,
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    pub g23: f64,
}

/// Derivatives of `Z_l` together with the residuals of its two
/// non-homogeneous Euler identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZlDerivatives {
    pub ghat: f64,
    pub derivs: GDerivatives,
    /// `λġ¹ + (n−1)μġ² − (2G + lĜ)`
    pub euler1_res: f64,
    /// second-order identity minus `2G − (l² − 3l)Ĝ`
    pub euler2_res: f64,
}

pub fn z_sigma_derivatives(kappa: &CurvatureVector, sigma: f64) -> GDerivatives {
    let k = 1.0 / kappa.n as f64 + sigma;
    let h = kappa.mean();
    GDerivatives {
        g: z_sigma(kappa, sigma),
        g1: 2.0 * (kappa.lambda - k * h),
        g2: 2.0 * (kappa.mu - k * h),
        g11: 2.0 - 2.0 * k,
        g12: -2.0 * k,
        g22: 2.0 - 2.0 * k,
        g23: -2.0 * k,
    }
}

pub fn zl_derivatives(kappa: &CurvatureVector, p: &PinchParams) -> ZlDerivatives {
    let n = kappa.n as f64;
    let r = n - 1.0;
    let (l, m) = (kappa.lambda, kappa.mu);
    let h = kappa.mean();
    let ghat = p.ghat(h);
    let g = kappa.norm_sq() - h * h / n - ghat;
    let shift = (2.0 - p.l) * ghat / h;
    let curv = (2.0 - p.l) * (1.0 - p.l) * ghat / (h * h);
    let d = GDerivatives {
        g,
        g1: 2.0 * (l - h / n) - shift,
        g2: 2.0 * (m - h / n) - shift,
        g11: 2.0 - 2.0 / n - curv,
        g12: -2.0 / n - curv,
        g22: 2.0 - 2.0 / n - curv,
        g23: -2.0 / n - curv,
    };
    let e1 = l * d.g1 + r * m * d.g2 - (2.0 * g + p.l * ghat);
    let e2 = l * l * d.g11 + 2.0 * r * l * m * d.g12 + r * m * m * d.g22 + r * (r - 1.0) * m * m * d.g23
        - (2.0 * g - (p.l * p.l - 3.0 * p.l) * ghat);
    ZlDerivatives { ghat, derivs: d, euler1_res: e1, euler2_res: e2 }
}

/// Which curvature function `G` enters the bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GSpec {
    /// Homogeneous of degree `degree`, with caller-supplied value and partials.
    Homogeneous { degree: f64, values: GDerivatives },
    ZSigma { sigma: f64 },
    ZL(PinchParams),
}

impl GSpec {
    fn name(&self) -> &'static str {
        match self {
            Self::Homogeneous { .. } => "a homogeneous G",
            Self::ZSigma { .. } => "G = Z_sigma",
            Self::ZL(_) => "G = Z_l",
        }
    }

    fn derivatives(&self, kappa: &CurvatureVector) -> GDerivatives {
        match self {
            Self::Homogeneous { values, .. } => *values,
            Self::ZSigma { sigma } => z_sigma_derivatives(kappa, *sigma),
            Self::ZL(p) => zl_derivatives(kappa, p).derivs,
        }
    }
}

/// Algebraic form used to assemble the gradient-term bracket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketForm {
    /// Stationary-point identity for homogeneous `F` and `G`.
    Evofg,
    /// Symmetry identity for general `G` (no homogeneity of `G` used).
    Evofg1,
    /// Reduction of `Evofg1` for `G = Z_l` on its zero locus.
    Gradterms,
    /// Reduction of `Evofg` for `G = Z_σ` on its zero locus.
    ZsigmaReduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketResult {
    pub value: f64,
    pub form: BracketForm,
}

/// Coefficient of `(∇₁h₂₂)²` in `(Ġ^{ij}F̈^{kl,rs} − Ḟ^{ij}G̈^{kl,rs})∇_i h_{kl}∇_j h_{rs}`
/// at a stationary point of `G`, assembled with the selected form.
pub fn bracket_eval(
    form: BracketForm,
    speed: &SpeedSpec,
    gspec: &GSpec,
    kappa: &CurvatureVector,
) -> Result<BracketResult, AlgebraError> {
    let (l, m) = (kappa.lambda, kappa.mu);
    let h = kappa.mean();
    let h2 = h * h;
    if (l - m).abs() <= LOCUS_TOL * h.abs().max(f64::MIN_POSITIVE) {
        return Err(AlgebraError::DegeneratePoint("umbilic point (lambda = mu)".into()));
    }
    let f = speed.derivatives(kappa)?;
    let g = gspec.derivatives(kappa);
    if g.g1.abs() <= LOCUS_TOL * h.abs() {
        return Err(AlgebraError::DegeneratePoint("axial derivative of G vanishes".into()));
    }
    let r = (kappa.n - 1) as f64;
    let a = speed.alpha();
    let fv = f.f;
    let a11 = g.g1 * f.d2f11 - f.df1 * g.g11;
    let a12 = g.g1 * f.d2f12 - f.df1 * g.g12;
    let on_locus = || -> Result<(), AlgebraError> {
        let rel = g.g.abs() / h2;
        if rel > LOCUS_TOL {
            Err(AlgebraError::OffLocus(rel))
        } else {
            Ok(())
        }
    };
    let unsupported = |form| Err(AlgebraError::Unsupported { form, gspec: gspec.name() });

    let value = match form {
        BracketForm::Evofg => {
            let b = match gspec {
                GSpec::Homogeneous { degree, .. } => *degree,
                GSpec::ZSigma { .. } => 2.0,
                GSpec::ZL(_) => return unsupported("evofg"),
            };
            let gv = g.g;
            g.g1 * a * (a - 1.0) * fv / (m * m) - f.df1 * b * (b - 1.0) * gv / (m * m)
                - 2.0 * g.g1 * a * fv / (m * (l - m))
                + 2.0 * f.df1 * b * gv / (m * (l - m))
                + (b * b * gv * gv / (m * m * g.g1 * g.g1) - 2.0 * b * gv * l / (m * m * g.g1)) * a11
                - 2.0 * r * b * gv / (m * g.g1) * a12
        }
        BracketForm::Evofg1 => {
            let q = g.g2 / g.g1;
            r * r * q * q * a11 - 2.0 * r * r * q * a12
                + r * (g.g1 * f.d2f22 - f.df1 * g.g22)
                + r * (r - 1.0) * (g.g1 * f.d2f23 - f.df1 * g.g23)
                + 2.0 * r * (g.g2 * f.df1 - f.df2 * g.g1) / (l - m)
        }
        BracketForm::Gradterms => {
            let GSpec::ZL(p) = gspec else { return unsupported("gradterms") };
            on_locus()?;
            let lg = p.l * p.ghat(h);
            g.g1 * a * (a - 1.0) * fv / (m * m)
                + f.df1 * (p.l * p.l - 3.0 * p.l) * p.ghat(h) / (m * m)
                - 2.0 * g.g1 * a * fv / (m * (l - m))
                + 2.0 * f.df1 * lg / (m * (l - m))
                + (lg * lg / (m * m * g.g1 * g.g1) - 2.0 * lg * l / (m * m * g.g1)) * a11
                - 2.0 * r * lg / (m * g.g1) * a12
        }
        BracketForm::ZsigmaReduced => {
            let GSpec::ZSigma { .. } = gspec else { return unsupported("zsigma_reduced") };
            on_locus()?;
            g.g1 * (a * (a - 1.0) * fv / (m * m) - 2.0 * a * fv / (m * (l - m)))
        }
    };
    Ok(BracketResult { value, form })
}

/// Point on the `Z_l = 0` locus with mean curvature `h` and `λ < μ`.
pub fn zl_locus_point(n: usize, h: f64, p: &PinchParams) -> CurvatureVector {
    let nf = n as f64;
    let s = (p.ghat(h) / (nf * (nf - 1.0))).sqrt();
    CurvatureVector::new(n, h / nf - (nf - 1.0) * s, h / nf + s)
}

/// Result of the grid search for an admissible improvement exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleL {
    /// Largest grid value with a non-positive bracket at every sample (0 if none).
    pub l: f64,
    /// Set when no grid value passes.
    pub warning: bool,
}

pub const L_GRID: [f64; 19] = [
    0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80,
    0.85, 0.90, 0.95,
];

/// Whether the `gradterms` bracket is non-positive on `samples` points of
/// the `Z_l = 0` locus with `H ∈ [M_H, 100·M_H]`.
pub fn l_passes(speed: &SpeedSpec, sigma0: f64, mh: f64, l: f64, samples: usize) -> Result<bool, AlgebraError> {
    let n = speed.n();
    let p = PinchParams::new(n, sigma0, mh, l)?;
    let samples = samples.max(2);
    for k in 0..samples {
        let h = mh * 100f64.powf(k as f64 / (samples - 1) as f64);
        let kappa = zl_locus_point(n, h, &p);
        let b = bracket_eval(BracketForm::Gradterms, speed, &GSpec::ZL(p), &kappa)?;
        if b.value > 0.0 {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn find_admissible_l(
    speed: &SpeedSpec,
    sigma0: f64,
    mh: f64,
    samples: usize,
) -> Result<AdmissibleL, AlgebraError> {
    for &l in L_GRID.iter().rev() {
        if l_passes(speed, sigma0, mh, l, samples)? {
            return Ok(AdmissibleL { l, warning: false });
        }
    }
    Ok(AdmissibleL { l: 0.0, warning: true })
}

/// One line of the algebra verification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraCheck {
    pub name: String,
    pub samples: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub seed: u64,
    pub rng: String,
    pub checks: Vec<AlgebraCheck>,
    pub violations: usize,
    pub pass: bool,
}

/// Sample counts for [`verify_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteSizes {
    pub identity: usize,
    pub reaction: usize,
    pub euler: usize,
    pub bracket: usize,
    pub sign: usize,
}

impl Default for SuiteSizes {
    fn default() -> Self {
        Self { identity: 10_000, reaction: 10_000, euler: 1_000, bracket: 1_000, sign: 10_000 }
    }
}

/// Built-in speed catalog used by the verification suite.
pub fn builtin_speeds(n: usize) -> Vec<SpeedSpec> {
    let mut v = Vec::new();
    for alpha in [1.0, 2.0, 3.0] {
        v.push(SpeedSpec::mean_power(alpha, n).unwrap());
        v.push(SpeedSpec::blended_quadratic(1.0, 1.0, alpha, n).unwrap());
        if n >= 3 {
            v.push(SpeedSpec::sigma2_power(alpha, n).unwrap());
        }
    }
    v
}

struct Tally {
    name: String,
    samples: usize,
    worst: f64,
    tolerance: f64,
    violations: usize,
}

impl Tally {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Self { name: name.into(), samples: 0, worst: 0.0, tolerance, violations: 0 }
    }

    /// Records a non-negative residual (bigger is worse).
    fn push(&mut self, residual: f64) {
        self.samples += 1;
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        self.worst = self.worst.max(r);
        if r > self.tolerance {
            self.violations += 1;
        }
    }

    fn finish(self) -> AlgebraCheck {
        AlgebraCheck {
            pass: self.violations == 0 && self.samples > 0,
            name: self.name,
            samples: self.samples,
            worst: self.worst,
            tolerance: self.tolerance,
            violations: self.violations,
        }
    }
}

/// Randomized verification of every identity and inequality of this module.
pub fn verify_suite(seed: u64, sizes: SuiteSizes) -> AlgebraReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let mut t = Tally::new("pinch_identity", 1e-12);
    for _ in 0..sizes.identity {
        let n = rng.gen_range(2..=6);
        let mu = rng.gen_range(0.01..10.0);
        let lambda = mu * rng.gen_range(0.0..=1.0);
        let (lhs, rhs) = pinch_identity(&CurvatureVector::new(n, lambda, mu));
        t.push((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    checks.push(t.finish());

    let mut t = Tally::new("reaction_estimate", 0.0);
    for _ in 0..sizes.reaction {
        let n = rng.gen_range(2..=6);
        let cap = 1.0 / (n * (n - 1)) as f64;
        let sigma = cap * rng.gen_range(1e-6..=1.0);
        let mu = rng.gen_range(0.01..10.0);
        match reaction_gap(mu, sigma, n) {
            // shortfall below rhs − 1e−10·|rhs|
            Ok((lhs, rhs, _)) => t.push((rhs - 1e-10 * rhs.abs() - lhs).max(0.0)),
            Err(_) => t.push(f64::INFINITY),
        }
    }
    checks.push(t.finish());

    let mut t1 = Tally::new("euler_first_order", 1e-9);
    let mut t2 = Tally::new("euler_second_order", 1e-9);
    for n in 2..=4 {
        for speed in builtin_speeds(n) {
            for _ in 0..sizes.euler {
                let mu = rng.gen_range(0.05..5.0);
                let lambda = mu * rng.gen_range(0.0..1.0);
                let k = CurvatureVector::new(n, lambda, mu);
                let f = speed.evaluate_unchecked(lambda, mu);
                match euler_residuals(&speed, &k) {
                    Ok((r1, r2)) => {
                        t1.push(r1.abs() / f);
                        t2.push(r2.abs() / f);
                    }
                    Err(_) => {
                        t1.push(f64::INFINITY);
                        t2.push(f64::INFINITY);
                    }
                }
            }
        }
    }
    checks.push(t1.finish());
    checks.push(t2.finish());

    let mut tz = Tally::new("evofg_vs_evofg1_zsigma", 1e-9);
    let mut tl = Tally::new("gradterms_vs_evofg1_zl", 1e-9);
    let mut tzl = Tally::new("zl_euler_identities", 1e-9);
    for n in 2..=4 {
        let cap = 1.0 / (n * (n - 1)) as f64;
        for speed in builtin_speeds(n) {
            for _ in 0..sizes.bracket {
                let sigma = cap * rng.gen_range(0.05..=1.0);
                let mu = rng.gen_range(0.1..5.0);
                let gs = GSpec::ZSigma { sigma };
                let outcome = z_sigma_root(mu, sigma, n).and_then(|lam| {
                    let k = CurvatureVector::new(n, lam, mu);
                    let a = bracket_eval(BracketForm::Evofg, &speed, &gs, &k)?;
                    let b = bracket_eval(BracketForm::Evofg1, &speed, &gs, &k)?;
                    Ok(rel_scale(a.value, b.value, &speed, &k))
                });
                tz.push(outcome.unwrap_or(f64::INFINITY));

                let p = PinchParams {
                    sigma0: cap * rng.gen_range(0.05..0.95),
                    mh: rng.gen_range(0.5..3.0),
                    l: rng.gen_range(0.05..0.95),
                };
                let h = p.mh * rng.gen_range(1.0..100.0);
                let k = zl_locus_point(n, h, &p);
                let zd = zl_derivatives(&k, &p);
                tzl.push((zd.euler1_res.abs() + zd.euler2_res.abs()) / (h * h));
                let gs = GSpec::ZL(p);
                let outcome = bracket_eval(BracketForm::Gradterms, &speed, &gs, &k).and_then(|a| {
                    let b = bracket_eval(BracketForm::Evofg1, &speed, &gs, &k)?;
                    Ok(rel_scale(a.value, b.value, &speed, &k))
                });
                tl.push(outcome.unwrap_or(f64::INFINITY));
            }
        }
    }
    checks.push(tz.finish());
    checks.push(tl.finish());
    checks.push(tzl.finish());

    let mut t = Tally::new("zsigma_reduced_sign", 0.0);
    for n in 2..=4 {
        let cap = 1.0 / (n * (n - 1)) as f64;
        for speed in builtin_speeds(n).into_iter().filter(|s| s.alpha() > 1.0) {
            for _ in 0..sizes.sign {
                let sigma = cap * rng.gen_range(1e-3..=1.0);
                let mu = rng.gen_range(0.05..10.0);
                let outcome = z_sigma_root(mu, sigma, n).and_then(|lam| {
                    let k = CurvatureVector::new(n, lam, mu);
                    bracket_eval(BracketForm::ZsigmaReduced, &speed, &GSpec::ZSigma { sigma }, &k)
                });
                match outcome {
                    Ok(b) => t.push(b.value.max(0.0)),
                    Err(_) => t.push(f64::INFINITY),
                }
            }
        }
    }
    checks.push(t.finish());

    let mut t = Tally::new("zl_axial_derivative_negative", 0.0);
    for _ in 0..sizes.sign {
        let n = rng.gen_range(2..=6);
        let cap = 1.0 / (n * (n - 1)) as f64;
        let p = PinchParams {
            sigma0: cap * rng.gen_range(0.01..0.99),
            mh: rng.gen_range(0.1..5.0),
            l: rng.gen_range(0.01..0.99),
        };
        let mu = rng.gen_range(0.01..10.0);
        let lambda = mu * rng.gen_range(0.0..=1.0);
        let zd = zl_derivatives(&CurvatureVector::new(n, lambda, mu), &p);
        t.push(if zd.derivs.g1 < 0.0 { 0.0 } else { 1.0 });
    }
    checks.push(t.finish());

    let violations = checks.iter().map(|c| c.violations).sum();
    AlgebraReport {
        seed,
        rng: "ChaCha8".into(),
        pass: checks.iter().all(|c| c.pass),
        checks,
        violations,
    }
}

/// Relative difference scaled by the natural size `α·f·H/μ²` of the bracket
/// terms, so near-cancelling brackets are not judged against roundoff.
fn rel_scale(a: f64, b: f64, speed: &SpeedSpec, k: &CurvatureVector) -> f64 {
    let f = speed.evaluate_unchecked(k.lambda, k.mu);
    let natural = speed.alpha() * f * k.mean() / (k.mu * k.mu);
    (a - b).abs() / a.abs().max(b.abs()).max(natural)
}
