//! Browser bindings: an animated flow of a capped cylinder, speed profiles
//! along the cone, and the randomized algebra check.

use axiflow::algebra::{self, SuiteSizes};
use axiflow::profile::{self, metrics};
use axiflow::solver::{self, FlowState, StepControl};
use axiflow::speeds::{SpeedDescriptor, SpeedSpec};
use wasm_bindgen::prelude::*;

/// Original-frame curvature at which the animation stops.
const CURVATURE_LIMIT: f64 = 1e4;

fn build_speed(kind: &str, alpha: f64, n: usize) -> Result<SpeedSpec, String> {
    let coefficients = if kind == "blended-quadratic" { vec![1.0, 1.0] } else { vec![] };
    SpeedDescriptor { kind: kind.to_string(), alpha, coefficients, n: None }
        .build(n)
        .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub struct Flow {
    speed: SpeedSpec,
    state: FlowState,
    control: StepControl,
    max_curvature: f64,
    error: Option<String>,
}

#[wasm_bindgen]
impl Flow {
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, alpha: f64, n: usize, half_length: f64, nodes: usize) -> Result<Flow, JsError> {
        let speed = build_speed(kind, alpha, n).map_err(|e| JsError::new(&e))?;
        let curve = profile::make_spherocylinder(half_length, 1.0, nodes, n).map_err(|e| JsError::new(&e.to_string()))?;
        Ok(Self::from_parts(speed, curve))
    }

    /// Takes up to `steps` steps; returns false once the flow has stopped.
    pub fn advance(&mut self, steps: u32) -> bool {
        for _ in 0..steps {
            if !self.running() {
                return false;
            }
            let next = solver::step(&self.state, &self.speed, &self.control)
                .and_then(|s| solver::rescale_continuation(&s, 8.0, 1.0));
            match next {
                Ok(s) => {
                    self.state = s;
                    self.max_curvature = profile::geometry(&self.state.curve)
                        .map(|g| g.max_curvature() * self.state.ledger.lambda_total)
                        .unwrap_or(f64::INFINITY);
                }
                Err(e) => self.error = Some(e.to_string()),
            }
        }
        self.running()
    }

    pub fn running(&self) -> bool {
        self.error.is_none() && self.max_curvature < CURVATURE_LIMIT
    }

    pub fn error(&self) -> Option<String> {
        self.error.clone()
    }

    pub fn time(&self) -> f64 {
        self.state.t
    }

    pub fn max_curvature(&self) -> f64 {
        self.max_curvature
    }

    /// Eccentricity `a/b` (scale-invariant).
    pub fn ratio(&self) -> f64 {
        metrics(&self.state.curve).ratio
    }

    /// Recentred working-frame meridian curve (shape at unit curvature
    /// scale) as interleaved `x, u` pairs.
    pub fn profile(&self) -> Vec<f64> {
        let c = self.state.curve.recentred();
        c.x().iter().zip(c.u()).flat_map(|(x, u)| [*x, *u]).collect()
    }
}

impl Flow {
    fn from_parts(speed: SpeedSpec, curve: profile::GeneratingCurve) -> Self {
        let max_curvature = profile::geometry(&curve).map(|g| g.max_curvature()).unwrap_or(f64::INFINITY);
        Self { speed, state: FlowState::new(curve), control: StepControl::default(), max_curvature, error: None }
    }
}

/// `f(s, 1, …, 1)` for `samples` values of `s = λ/μ` spread over `[0, 1]`.
#[wasm_bindgen]
pub fn speed_profile(kind: &str, alpha: f64, n: usize, samples: usize) -> Result<Vec<f64>, JsError> {
    let speed = build_speed(kind, alpha, n).map_err(|e| JsError::new(&e))?;
    let m = samples.max(2);
    Ok((0..m).map(|i| speed.evaluate_unchecked(i as f64 / (m - 1) as f64, 1.0)).collect())
}

/// Algebra verification with `samples` points per check, as JSON.
#[wasm_bindgen]
pub fn algebra_report(seed: u64, samples: usize) -> String {
    let sizes = SuiteSizes { identity: samples, reaction: samples, euler: samples, bracket: samples, sign: samples };
    serde_json::to_string(&algebra::verify_suite(seed, sizes)).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flow_shrinks_toward_round() {
        let mut f = Flow::from_parts(build_speed("mean-power", 1.0, 2).unwrap(), profile::make_spherocylinder(1.0, 1.0, 32, 2).unwrap());
        let r0 = f.ratio();
        while f.advance(200) {}
        assert!(f.error().is_none(), "{:?}", f.error());
        assert!(f.ratio() < r0);
        assert!(f.max_curvature() >= CURVATURE_LIMIT);
        assert_eq!(f.profile().len(), 66);
    }

    #[test]
    fn speed_profile_endpoints() {
        let p = speed_profile("mean-power", 2.0, 3, 11).unwrap();
        assert!((p[0] - 4.0).abs() < 1e-12 && (p[10] - 9.0).abs() < 1e-12);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
        assert!(build_speed("mean-power", 0.5, 2).is_err());
    }

    #[test]
    fn algebra_report_is_json() {
        let v: serde_json::Value = serde_json::from_str(&algebra_report(3, 200)).unwrap();
        assert_eq!(v["violations"], 0);
    }
}
