//! The meridian (generating) curve of a rotationally symmetric hypersurface
//! in `R^{n+1}`, stored as a parametric polyline from one pole to the other.
//!
//! Curvatures use three-point stencils that are exact on circles and lines:
//! the axial curvature is the signed curvature of the circle through three
//! consecutive nodes, and the radial curvature is `ν_u / u` with the unit
//! normal taken from that circle's tangent. Poles are umbilic and use the
//! circle through the pole and its neighbour reflected across the axis.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::speeds::{CurvatureVector, SpeedSpec};

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("time {t} is past the extinction time {t_ext}")]
    PastSingular { t: f64, t_ext: f64 },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratingCurve {
    n: usize,
    x: Vec<f64>,
    u: Vec<f64>,
}

impl GeneratingCurve {
    /// Validates pole placement, positivity of interior radii and strictly
    /// increasing axial coordinates.
    pub fn new(n: usize, x: Vec<f64>, u: Vec<f64>) -> Result<Self, ProfileError> {
        if n < 2 {
            return Err(ProfileError::BadParam(format!("n must be >= 2, got {n}")));
        }
        if x.len() != u.len() || x.len() < 3 {
            return Err(ProfileError::BadParam("need at least 3 nodes with matching x and u".into()));
        }
        let last = x.len() - 1;
        if u[0] != 0.0 || u[last] != 0.0 {
            return Err(ProfileError::BadParam("end nodes must lie on the axis (u = 0)".into()));
        }
        if let Some(i) = (1..last).find(|&i| !(u[i] > 0.0) || !u[i].is_finite()) {
            return Err(ProfileError::BadParam(format!("interior node {i} has u = {}", u[i])));
        }
        if let Some(i) = (0..last).find(|&i| !(x[i + 1] > x[i])) {
            return Err(ProfileError::BadParam(format!("x is not strictly increasing at node {i}")));
        }
        Ok(Self { n, x, u })
    }

    pub(crate) fn from_parts(n: usize, x: Vec<f64>, u: Vec<f64>) -> Self {
        Self { n, x, u }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    /// Number of segments `N` (there are `N + 1` nodes).
    pub fn segments(&self) -> usize {
        self.x.len() - 1
    }

    pub fn point(&self, i: usize) -> (f64, f64) {
        (self.x[i], self.u[i])
    }

    pub fn chords(&self) -> Vec<f64> {
        (0..self.segments())
            .map(|i| (self.x[i + 1] - self.x[i]).hypot(self.u[i + 1] - self.u[i]))
            .collect()
    }

    pub fn length(&self) -> f64 {
        self.chords().iter().sum()
    }

    /// Midpoint of the axial extent.
    pub fn axial_center(&self) -> f64 {
        0.5 * (self.x[0] + self.x[self.segments()])
    }

    /// Affine map `x ↦ scale·(x − shift)`, `u ↦ scale·u`.
    pub fn transformed(&self, shift: f64, scale: f64) -> Self {
        Self {
            n: self.n,
            x: self.x.iter().map(|x| scale * (x - shift)).collect(),
            u: self.u.iter().map(|u| scale * u).collect(),
        }
    }

    pub fn recentred(&self) -> Self {
        self.transformed(self.axial_center(), 1.0)
    }

    /// Node-wise convex combination `(1−w)·self + w·other`.
    pub fn lerp(&self, other: &Self, w: f64) -> Result<Self, ProfileError> {
        if other.x.len() != self.x.len() {
            return Err(ProfileError::BadParam("curves have different node counts".into()));
        }
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (1.0 - w) * p + w * q).collect();
        Ok(Self { n: self.n, x: mix(&self.x, &other.x), u: mix(&self.u, &other.u) })
    }
}

/// Per-node curvatures and unit outward normals.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    /// Unit tangent, oriented from the first pole to the last.
    pub tangent: Vec<(f64, f64)>,
}

impl Geometry {
    /// Outward normal `(−t_u, t_x)`.
    pub fn normal(&self, i: usize) -> (f64, f64) {
        let (tx, tu) = self.tangent[i];
        (-tu, tx)
    }

    pub fn max_curvature(&self) -> f64 {
        self.lambda.iter().chain(&self.mu).fold(0.0f64, |m, v| m.max(*v))
    }
}

fn check_spacing(curve: &GeneratingCurve) -> Result<Vec<f64>, ProfileError> {
    let chords = curve.chords();
    let scale = curve
        .x
        .iter()
        .chain(&curve.u)
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    if let Some(i) = chords.iter().position(|c| !(*c > 1e-14 * scale)) {
        return Err(ProfileError::DegenerateMesh(format!("nodes {i} and {} coincide", i + 1)));
    }
    Ok(chords)
}

/// Curvatures and tangents at every node.
pub fn geometry(curve: &GeneratingCurve) -> Result<Geometry, ProfileError> {
    let chords = check_spacing(curve)?;
    let n_seg = curve.segments();
    let mut lambda = vec![0.0; n_seg + 1];
    let mut mu = vec![0.0; n_seg + 1];
    let mut tangent = vec![(0.0, 0.0); n_seg + 1];

    for i in 1..n_seg {
        let d1 = (curve.x[i] - curve.x[i - 1], curve.u[i] - curve.u[i - 1]);
        let d2 = (curve.x[i + 1] - curve.x[i], curve.u[i + 1] - curve.u[i]);
        let (c1, c2) = (chords[i - 1], chords[i]);
        let c3 = (d1.0 + d2.0).hypot(d1.1 + d2.1);
        let cross = d1.0 * d2.1 - d1.1 * d2.0;
        lambda[i] = -2.0 * cross / (c1 * c2 * c3);
        // tangent of the circle through the three nodes
        let t = (c2 * c2 * d1.0 + c1 * c1 * d2.0, c2 * c2 * d1.1 + c1 * c1 * d2.1);
        let tn = t.0.hypot(t.1);
        tangent[i] = (t.0 / tn, t.1 / tn);
        mu[i] = tangent[i].0 / curve.u[i];
    }
    for (pole, next) in [(0, 1), (n_seg, n_seg - 1)] {
        let d = (curve.x[next] - curve.x[pole]).abs();
        let u1 = curve.u[next];
        let k = 2.0 * d / (d * d + u1 * u1);
        lambda[pole] = k;
        mu[pole] = k;
    }
    tangent[0] = (0.0, 1.0);
    tangent[n_seg] = (0.0, -1.0);
    Ok(Geometry { lambda, mu, tangent })
}

/// Principal curvatures `(λ, μ)` at every node.
pub fn curvatures_at(curve: &GeneratingCurve) -> Result<Vec<CurvatureVector>, ProfileError> {
    let g = geometry(curve)?;
    Ok(g.lambda.iter().zip(&g.mu).map(|(l, m)| CurvatureVector::new(curve.n, *l, *m)).collect())
}

/// Semicircle of radius `r`, sampled at equal polar angle.
pub fn make_sphere(r: f64, nodes: usize, n: usize) -> Result<GeneratingCurve, ProfileError> {
    make_spherocylinder(0.0, r, nodes, n)
}

/// Cylinder of radius `r` over `[−l, l]` capped by hemispheres, sampled at
/// equal arclength.
pub fn make_spherocylinder(l: f64, r: f64, nodes: usize, n: usize) -> Result<GeneratingCurve, ProfileError> {
    if !(l >= 0.0 && l.is_finite() && r > 0.0 && r.is_finite()) {
        return Err(ProfileError::BadParam(format!("need l >= 0 and r > 0, got l = {l}, r = {r}")));
    }
    if nodes < 16 {
        return Err(ProfileError::BadParam(format!("need at least 16 segments, got {nodes}")));
    }
    if n < 2 {
        return Err(ProfileError::BadParam(format!("n must be >= 2, got {n}")));
    }
    let quarter = 0.5 * std::f64::consts::PI * r;
    let total = 2.0 * quarter + 2.0 * l;
    let mut x = Vec::with_capacity(nodes + 1);
    let mut u = Vec::with_capacity(nodes + 1);
    for k in 0..=nodes {
        let s = total * k as f64 / nodes as f64;
        let (xi, ui) = if s <= quarter {
            let th = s / r;
            (-l - r * th.cos(), r * th.sin())
        } else if s <= quarter + 2.0 * l {
            (-l + (s - quarter), r)
        } else {
            let th = (s - quarter - 2.0 * l) / r + 0.5 * std::f64::consts::PI;
            (l - r * th.cos(), r * th.sin())
        };
        x.push(xi);
        u.push(ui);
    }
    u[0] = 0.0;
    u[nodes] = 0.0;
    x[0] = -l - r;
    x[nodes] = l + r;
    GeneratingCurve::new(n, x, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeMetrics {
    /// Axial half-extent after recentring.
    pub a: f64,
    /// Maximal distance from the axis.
    pub b: f64,
    pub ratio: f64,
    /// Radius of an enclosed centred sphere (`b/2`).
    pub inner_est: f64,
    /// Radius of an enclosing centred sphere (`2a`).
    pub outer_est: f64,
}

/// Largest `u`, refined by a parabola through the top node and its neighbours.
pub fn max_radius(curve: &GeneratingCurve) -> f64 {
    let u = curve.u();
    let (imax, umax) = u.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| {
        if v > acc.1 {
            (i, v)
        } else {
            acc
        }
    });
    if imax == 0 || imax == u.len() - 1 {
        return umax;
    }
    let (um, up) = (u[imax - 1], u[imax + 1]);
    let second = up - 2.0 * umax + um;
    if umax > um && umax > up {
        umax - (up - um) * (up - um) / (8.0 * second)
    } else {
        umax
    }
}

pub fn metrics(curve: &GeneratingCurve) -> ShapeMetrics {
    let a = 0.5 * (curve.x[curve.segments()] - curve.x[0]);
    let b = max_radius(curve);
    ShapeMetrics { a, b, ratio: a / b, inner_est: b / 2.0, outer_est: 2.0 * a }
}

/// Support function of the recentred body in a direction `(z_x, z_u)` of the
/// meridian half-plane.
pub fn support(curve: &GeneratingCurve, direction: (f64, f64)) -> f64 {
    let norm = direction.0.hypot(direction.1);
    let (zx, zu) = (direction.0 / norm, direction.1.abs() / norm);
    let c = curve.axial_center();
    curve.x.iter().zip(&curve.u).map(|(x, u)| (x - c) * zx + u * zu).fold(f64::NEG_INFINITY, f64::max)
}

/// Node placement rule used by [`resample_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Redistribution {
    /// Equal chord length between consecutive nodes.
    Arclength,
    /// Equidistribution of `(λ⁺ + w·μ)·ds`. The total turning `∫λ ds` is
    /// always `π`, so tips keep a fixed share of the nodes however long and
    /// thin the body becomes; `w` sets the share left for the flat part.
    CurvatureWeighted { radial_weight: f64 },
}

struct HermiteCurve<'a> {
    curve: &'a GeneratingCurve,
    tangent: Vec<(f64, f64)>,
    chords: Vec<f64>,
}

impl HermiteCurve<'_> {
    /// Position at global parameter `s ∈ [0, N]`.
    fn eval(&self, s: f64) -> (f64, f64) {
        let n_seg = self.chords.len();
        let i = (s.floor() as usize).min(n_seg - 1);
        let t = s - i as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let c = self.chords[i];
        let (p0, p1) = (self.curve.point(i), self.curve.point(i + 1));
        let (m0, m1) = (self.tangent[i], self.tangent[i + 1]);
        (
            h00 * p0.0 + h10 * c * m0.0 + h01 * p1.0 + h11 * c * m1.0,
            h00 * p0.1 + h10 * c * m0.1 + h01 * p1.1 + h11 * c * m1.1,
        )
    }
}

/// Inverse of a piecewise-linear increasing map `knots → values` at `target`.
fn invert_cumulative(cum: &[f64], params: &[f64], target: f64) -> f64 {
    let j = cum.partition_point(|c| *c < target).clamp(1, cum.len() - 1);
    let w = (target - cum[j - 1]) / (cum[j] - cum[j - 1]);
    params[j - 1] + w * (params[j] - params[j - 1])
}

/// Largest growth rate of the local spacing `1/ρ` per unit arclength.
const GRADING: f64 = 0.2;

/// Raises `ρ` where needed so that `1/ρ` is `GRADING`-Lipschitz in arclength;
/// keeps neighbouring spacings within a factor of about `1 + GRADING`.
fn grade_density(rho: &mut [f64], chords: &[f64]) {
    let mut h: Vec<f64> = rho.iter().map(|r| 1.0 / r).collect();
    for i in 1..h.len() {
        h[i] = h[i].min(h[i - 1] + GRADING * chords[i - 1]);
    }
    for i in (0..h.len() - 1).rev() {
        h[i] = h[i].min(h[i + 1] + GRADING * chords[i]);
    }
    for (r, hi) in rho.iter_mut().zip(&h) {
        *r = 1.0 / hi;
    }
}

/// Equal-arclength redistribution; see [`resample_with`].
pub fn resample(curve: &GeneratingCurve) -> Result<GeneratingCurve, ProfileError> {
    resample_with(curve, Redistribution::Arclength)
}

/// Redistributes nodes along a cubic Hermite interpolant whose node tangents
/// come from the circle stencil (exact on circles and on straight segments).
/// The node count and the poles are preserved.
pub fn resample_with(curve: &GeneratingCurve, mode: Redistribution) -> Result<GeneratingCurve, ProfileError> {
    let geom = geometry(curve)?;
    let chords = check_spacing(curve)?;
    let n_seg = curve.segments();
    let herm = HermiteCurve { curve, tangent: geom.tangent.clone(), chords: chords.clone() };

    let params: Vec<f64> = match mode {
        Redistribution::Arclength => {
            let mut params: Vec<f64> = (0..=n_seg).map(|k| k as f64).collect();
            let mut pts: Vec<(f64, f64)> = (0..=n_seg).map(|i| curve.point(i)).collect();
            for _ in 0..50 {
                let mut cum = vec![0.0; n_seg + 1];
                for k in 0..n_seg {
                    cum[k + 1] = cum[k] + (pts[k + 1].0 - pts[k].0).hypot(pts[k + 1].1 - pts[k].1);
                }
                let h = cum[n_seg] / n_seg as f64;
                let spread = (0..n_seg).map(|k| ((cum[k + 1] - cum[k]) - h).abs()).fold(0.0, f64::max);
                if spread <= 1e-14 * h {
                    break;
                }
                let next: Vec<f64> = (0..=n_seg)
                    .map(|k| match k {
                        0 => 0.0,
                        k if k == n_seg => n_seg as f64,
                        k => invert_cumulative(&cum, &params, k as f64 * h),
                    })
                    .collect();
                params = next;
                pts = params.iter().map(|s| herm.eval(*s)).collect();
            }
            params
        }
        Redistribution::CurvatureWeighted { radial_weight } => {
            let mut rho: Vec<f64> =
                geom.mu.iter().zip(&geom.lambda).map(|(m, l)| l.max(0.0) + radial_weight * m).collect();
            grade_density(&mut rho, &chords);
            for _ in 0..2 {
                let prev = rho.clone();
                for i in 1..n_seg {
                    rho[i] = 0.25 * prev[i - 1] + 0.5 * prev[i] + 0.25 * prev[i + 1];
                }
            }
            let mut cum = vec![0.0; n_seg + 1];
            for i in 0..n_seg {
                cum[i + 1] = cum[i] + chords[i] * 0.5 * (rho[i] + rho[i + 1]);
            }
            let idx: Vec<f64> = (0..=n_seg).map(|k| k as f64).collect();
            let total = cum[n_seg];
            (0..=n_seg)
                .map(|k| match k {
                    0 => 0.0,
                    k if k == n_seg => n_seg as f64,
                    k => invert_cumulative(&cum, &idx, total * k as f64 / n_seg as f64),
                })
                .collect()
        }
    };

    let mut x = Vec::with_capacity(n_seg + 1);
    let mut u = Vec::with_capacity(n_seg + 1);
    for (k, s) in params.iter().enumerate() {
        let (px, pu) = if k == 0 || k == n_seg { curve.point(k) } else { herm.eval(*s) };
        x.push(px);
        u.push(pu);
    }
    u[0] = 0.0;
    u[n_seg] = 0.0;
    let out = GeneratingCurve::from_parts(curve.n, x, u);
    check_spacing(&out)?;
    Ok(out)
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let d = (b.0 - a.0, b.1 - a.1);
    let len2 = d.0 * d.0 + d.1 * d.1;
    let t = if len2 > 0.0 { (((p.0 - a.0) * d.0 + (p.1 - a.1) * d.1) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p.0 - a.0 - t * d.0).hypot(p.1 - a.1 - t * d.1)
}

/// Largest distance from a node of `from` to the polyline `to`.
pub fn directed_distance(from: &GeneratingCurve, to: &GeneratingCurve) -> f64 {
    (0..=from.segments())
        .map(|i| {
            let p = from.point(i);
            (0..to.segments())
                .map(|j| point_segment_distance(p, to.point(j), to.point(j + 1)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two meridian polylines.
pub fn hausdorff(a: &GeneratingCurve, b: &GeneratingCurve) -> f64 {
    directed_distance(a, b).max(directed_distance(b, a))
}

/// Extinction time of a sphere of radius `r0`.
pub fn sphere_extinction_time(speed: &SpeedSpec, r0: f64) -> f64 {
    r0.powf(1.0 + speed.alpha()) / ((1.0 + speed.alpha()) * speed.sphere_value())
}

/// Radius at time `t` of a sphere of initial radius `r0`:
/// `(r0^{1+α} − (1+α)n^α t)^{1/(1+α)}`.
pub fn exact_sphere_radius(speed: &SpeedSpec, r0: f64, t: f64) -> Result<f64, ProfileError> {
    shrink(r0, t, speed.alpha(), speed.sphere_value())
}

/// Radius at time `t` of a round cylinder of initial radius `r0`, shrinking
/// with speed `f(0, 1, …, 1)·r^{−α}`.
pub fn exact_cylinder_radius(speed: &SpeedSpec, r0: f64, t: f64) -> Result<f64, ProfileError> {
    shrink(r0, t, speed.alpha(), speed.cylinder_value())
}

fn shrink(r0: f64, t: f64, alpha: f64, rate: f64) -> Result<f64, ProfileError> {
    if !(r0 >= 0.0) {
        return Err(ProfileError::BadParam(format!("radius must be >= 0, got {r0}")));
    }
    let p = 1.0 + alpha;
    let t_ext = r0.powf(p) / (p * rate);
    let rem = r0.powf(p) - p * rate * t;
    if t > t_ext * (1.0 + 1e-12) {
        return Err(ProfileError::PastSingular { t, t_ext });
    }
    Ok(rem.max(0.0).powf(1.0 / p))
}

/// Writes a curve snapshot as CSV with header `s,x,u,lambda,mu`.
pub fn write_csv<W: Write>(curve: &GeneratingCurve, mut out: W) -> Result<(), ProfileError> {
    let geom = geometry(curve)?;
    writeln!(out, "s,x,u,lambda,mu")?;
    let mut s = 0.0;
    for i in 0..=curve.segments() {
        if i > 0 {
            s += (curve.x[i] - curve.x[i - 1]).hypot(curve.u[i] - curve.u[i - 1]);
        }
        writeln!(out, "{:e},{:e},{:e},{:e},{:e}", s, curve.x[i], curve.u[i], geom.lambda[i], geom.mu[i])?;
    }
    Ok(())
}

/// Reads a snapshot written by [`write_csv`]; only `x` and `u` are used.
pub fn read_csv<R: BufRead>(input: R, n: usize) -> Result<GeneratingCurve, ProfileError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| ProfileError::Csv("empty file".into()))??;
    if header.trim() != "s,x,u,lambda,mu" {
        return Err(ProfileError::Csv(format!("unexpected header `{header}`")));
    }
    let (mut x, mut u) = (Vec::new(), Vec::new());
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(ProfileError::Csv(format!("row {row}: expected 5 columns")));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| ProfileError::Csv(format!("row {row}: {e}")));
        x.push(parse(cols[1])?);
        u.push(parse(cols[2])?);
    }
    GeneratingCurve::new(n, x, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn sphere_is_umbilic() {
        let c = make_sphere(1.0, 64, 2).unwrap();
        for k in curvatures_at(&c).unwrap() {
            assert_relative_eq!(k.lambda, 1.0, epsilon = 1e-12);
            assert_relative_eq!(k.mu, 1.0, epsilon = 1e-12);
        }
        let c = make_sphere(2.0, 128, 3).unwrap();
        let m = metrics(&c);
        assert_relative_eq!(m.a, 2.0, epsilon = 1e-14);
        assert_relative_eq!(m.b, 2.0, epsilon = 1e-14);
        for k in curvatures_at(&c).unwrap() {
            assert!((k.lambda - 0.5).abs() < 1e-4 && (k.mu - 0.5).abs() < 1e-4);
        }
    }

    #[test]
    fn spherocylinder_geometry() {
        let c = make_spherocylinder(4.0, 1.0, 256, 2).unwrap();
        let m = metrics(&c);
        assert_relative_eq!(m.a, 5.0, epsilon = 1e-12);
        assert_relative_eq!(m.b, 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.ratio, 5.0, epsilon = 1e-12);
        let k = curvatures_at(&c).unwrap();
        let mid = k[128];
        assert!(mid.lambda.abs() < 1e-12);
        assert_relative_eq!(mid.mu, 1.0, epsilon = 1e-12);
        assert_relative_eq!(k[0].lambda, 1.0, epsilon = 1e-12);
        assert_relative_eq!(k[0].mu, 1.0, epsilon = 1e-12);

        let s = make_spherocylinder(0.0, 1.0, 64, 2).unwrap();
        let t = make_sphere(1.0, 64, 2).unwrap();
        for i in 0..=64 {
            assert!((s.x()[i] - t.x()[i]).abs() < 1e-12 && (s.u()[i] - t.u()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_inputs() {
        assert!(make_sphere(-1.0, 64, 2).is_err());
        assert!(make_sphere(1.0, 8, 2).is_err());
        assert!(GeneratingCurve::new(2, vec![0.0, 1.0, 0.5], vec![0.0, 1.0, 0.0]).is_err());
        assert!(GeneratingCurve::new(2, vec![0.0, 1.0, 2.0], vec![0.1, 1.0, 0.0]).is_err());
        let dup = GeneratingCurve::from_parts(2, vec![0.0, 1.0, 1.0, 2.0], vec![0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(geometry(&dup), Err(ProfileError::DegenerateMesh(_))));
    }

    #[test]
    fn support_values() {
        let s = make_sphere(1.0, 256, 2).unwrap();
        for th in [0.0, 0.3, 1.0, PI / 2.0] {
            assert!((support(&s, (th.cos(), th.sin())) - 1.0).abs() < 1e-4);
        }
        let c = make_spherocylinder(4.0, 1.0, 512, 2).unwrap();
        assert_relative_eq!(support(&c, (1.0, 0.0)), 5.0, epsilon = 1e-12);
        for th in [0.2f64, 0.7, 1.3] {
            assert!((support(&c, (th.cos(), th.sin())) - (4.0 * th.cos() + 1.0)).abs() < 1e-3);
        }
    }

    #[test]
    fn resample_fixed_point_and_idempotence() {
        let s = make_sphere(1.0, 64, 2).unwrap();
        let r = resample(&s).unwrap();
        for i in 0..=64 {
            assert!((r.x()[i] - s.x()[i]).abs() < 1e-12 && (r.u()[i] - s.u()[i]).abs() < 1e-12);
        }
        let c = make_spherocylinder(2.0, 1.0, 96, 2).unwrap();
        let c = resample_with(&c, Redistribution::CurvatureWeighted { radial_weight: 0.5 }).unwrap();
        let once = resample(&c).unwrap();
        let twice = resample(&once).unwrap();
        for i in 0..=96 {
            assert!((once.x()[i] - twice.x()[i]).abs() < 1e-10);
            assert!((once.u()[i] - twice.u()[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn resample_equalizes_clustered_nodes() {
        let c = make_spherocylinder(2.0, 1.0, 96, 2).unwrap();
        let clustered = resample_with(&c, Redistribution::CurvatureWeighted { radial_weight: 0.05 }).unwrap();
        let ch = clustered.chords();
        let spread = ch.iter().cloned().fold(0.0, f64::max) / ch.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 1.3, "{spread}");
        let r = resample(&clustered).unwrap();
        let ch = r.chords();
        let mean = ch.iter().sum::<f64>() / ch.len() as f64;
        assert!(ch.iter().all(|c| (c / mean - 1.0).abs() < 0.01));
        let bound = (clustered.length() / 96.0).powi(2) * 1.0;
        assert!(hausdorff(&r, &clustered) <= bound);
    }

    #[test]
    fn exact_radii() {
        let mp1 = SpeedSpec::mean_power(1.0, 2).unwrap();
        assert_eq!(exact_sphere_radius(&mp1, 1.0, 0.25).unwrap(), 0.0);
        assert_eq!(exact_sphere_radius(&mp1, 1.7, 0.0).unwrap(), 1.7);
        assert!(matches!(exact_sphere_radius(&mp1, 1.0, 0.3), Err(ProfileError::PastSingular { .. })));
        let mp2 = SpeedSpec::mean_power(2.0, 2).unwrap();
        assert_relative_eq!(sphere_extinction_time(&mp2, 1.0), 1.0 / 12.0, epsilon = 1e-15);
        for t in [0.0, 0.1, 0.3] {
            assert_relative_eq!(exact_cylinder_radius(&mp1, 1.0, t).unwrap(), (1.0 - 2.0 * t).sqrt(), epsilon = 1e-14);
        }
        let mp13 = SpeedSpec::mean_power(1.0, 3).unwrap();
        assert_relative_eq!(exact_cylinder_radius(&mp13, 1.0, 0.2).unwrap(), (1.0f64 - 0.8).sqrt(), epsilon = 1e-14);
        assert_eq!(exact_cylinder_radius(&mp13, 2.5, 0.0).unwrap(), 2.5);
    }

    #[test]
    fn csv_round_trip() {
        let c = make_spherocylinder(1.0, 0.7, 32, 3).unwrap();
        let mut buf = Vec::new();
        write_csv(&c, &mut buf).unwrap();
        let back = read_csv(&buf[..], 3).unwrap();
        for i in 0..=32 {
            assert_relative_eq!(back.x()[i], c.x()[i], max_relative = 1e-15);
            assert_relative_eq!(back.u()[i], c.u()[i], max_relative = 1e-15);
        }
        assert!(read_csv(&b"a,b\n"[..], 3).is_err());
    }
}
