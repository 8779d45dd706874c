use std::f64::consts::PI;

use axiflow::algebra::{self, z_sigma};
use axiflow::profile::{self, geometry, make_sphere, make_spherocylinder, GeneratingCurve};
use axiflow::record::{Checkpoint, CheckpointEvent, RunRecord, ScaleLedger};
use axiflow::solver::{self, FlowState, StepControl};
use axiflow::speeds::{CurvatureVector, SpeedSpec};
use proptest::prelude::*;

fn ellipse(a: f64, b: f64, nodes: usize, n: usize) -> GeneratingCurve {
    let th: Vec<f64> = (0..=nodes).map(|i| PI * i as f64 / nodes as f64).collect();
    let x = th.iter().map(|t| -a * t.cos()).collect();
    let mut u: Vec<f64> = th.iter().map(|t| b * t.sin()).collect();
    u[0] = 0.0;
    u[nodes] = 0.0;
    GeneratingCurve::new(n, x, u).unwrap()
}

/// Curvatures of the graph `u = g(x)` from its first two derivatives.
fn graph_curvatures(g: f64, g1: f64, g2: f64) -> (f64, f64) {
    let w = (1.0 + g1 * g1).sqrt();
    (-g2 / (w * w * w), 1.0 / (g * w))
}

fn ellipse_error(a: f64, b: f64, nodes: usize) -> f64 {
    let c = ellipse(a, b, nodes, 2);
    let geom = geometry(&c).unwrap();
    let mut worst = 0.0f64;
    for i in 1..nodes {
        let x = c.x()[i];
        if x.abs() > 0.8 * a {
            continue;
        }
        let s = 1.0 - x * x / (a * a);
        let g = b * s.sqrt();
        let g1 = -b * x / (a * a * s.sqrt());
        let g2 = -b / (a * a * s.powf(1.5));
        let (lambda, mu) = graph_curvatures(g, g1, g2);
        worst = worst.max((geom.lambda[i] - lambda).abs() / lambda.max(mu)).max((geom.mu[i] - mu).abs() / mu);
    }
    worst
}

#[test]
fn ellipse_curvatures_converge_at_second_order() {
    let e1 = ellipse_error(2.0, 1.0, 64);
    let e2 = ellipse_error(2.0, 1.0, 128);
    assert!(e1 < 1e-2, "{e1}");
    let order = (e1 / e2).log2();
    assert!(order > 1.8, "observed order {order}");
}

#[test]
fn ellipse_poles_are_umbilic() {
    let (a, b) = (1.5, 1.0);
    let g = geometry(&ellipse(a, b, 256, 3)).unwrap();
    let exact = a / (b * b);
    for i in [0, 256] {
        assert!((g.lambda[i] - exact).abs() < 1e-3 * exact);
        assert_eq!(g.lambda[i], g.mu[i]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_formula_oracle(a in 0.5f64..3.0, b in 0.5f64..3.0) {
        let e = ellipse_error(a, b, 256);
        prop_assert!(e < 2e-3, "{}", e);
    }

    #[test]
    fn reflection_reverses_curvatures(a in 0.5f64..3.0, b in 0.5f64..3.0, nodes in 16usize..80) {
        let c = ellipse(a, b, nodes, 2);
        let x: Vec<f64> = c.x().iter().rev().map(|v| -v).collect();
        let u: Vec<f64> = c.u().iter().rev().cloned().collect();
        let m = GeneratingCurve::new(2, x, u).unwrap();
        let (g, h) = (geometry(&c).unwrap(), geometry(&m).unwrap());
        for i in 0..=nodes {
            prop_assert!((g.lambda[i] - h.lambda[nodes - i]).abs() <= 1e-9 * g.mu[i]);
            prop_assert!((g.mu[i] - h.mu[nodes - i]).abs() <= 1e-9 * g.mu[i]);
        }
    }

    #[test]
    fn curvatures_scale_inversely(l in 0.0f64..4.0, s in 0.01f64..100.0) {
        let c = make_spherocylinder(l, 1.0, 48, 2).unwrap();
        let (g, h) = (geometry(&c).unwrap(), geometry(&c.transformed(0.0, s)).unwrap());
        for i in 0..=48 {
            prop_assert!((h.mu[i] * s - g.mu[i]).abs() <= 1e-9 * g.mu[i]);
            prop_assert!((h.lambda[i] * s - g.lambda[i]).abs() <= 1e-9 * g.mu[i]);
        }
    }

    #[test]
    fn spherocylinders_lie_in_the_cone(l in 0.0f64..8.0, r in 0.1f64..3.0, nodes in 16usize..128) {
        let g = geometry(&make_spherocylinder(l, r, nodes, 2).unwrap()).unwrap();
        for i in 0..=nodes {
            prop_assert!(g.mu[i] > 0.0);
            prop_assert!(g.lambda[i] >= -1e-9 * g.mu[i] && g.lambda[i] <= g.mu[i] * (1.0 + 1e-9));
        }
    }

    #[test]
    fn arclength_resampling_is_idempotent(a in 0.5f64..3.0, b in 0.5f64..3.0) {
        let once = profile::resample(&ellipse(a, b, 64, 2)).unwrap();
        let twice = profile::resample(&once).unwrap();
        for i in 0..=64 {
            prop_assert!((once.x()[i] - twice.x()[i]).abs() < 1e-10 * a.max(b));
            prop_assert!((once.u()[i] - twice.u()[i]).abs() < 1e-10 * a.max(b));
        }
    }

    #[test]
    fn speeds_are_homogeneous_and_monotone(alpha in 1.0f64..4.0, n in 2usize..6, ratio in 0.0f64..1.0, mu in 0.1f64..10.0, s in 0.1f64..10.0) {
        for speed in [SpeedSpec::mean_power(alpha, n).unwrap(), SpeedSpec::blended_quadratic(1.0, 0.5, alpha, n).unwrap()] {
            let f = speed.evaluate_unchecked(ratio * mu, mu);
            let fs = speed.evaluate_unchecked(s * ratio * mu, s * mu);
            prop_assert!((fs - s.powf(alpha) * f).abs() <= 1e-10 * fs);
            let d = speed.derivatives_unchecked(ratio * mu, mu);
            prop_assert!(d.df1 > 0.0 && d.df2 > 0.0);
            let (e1, e2) = algebra::euler_residuals(&speed, &CurvatureVector::new(n, ratio * mu, mu)).unwrap();
            prop_assert!(e1.abs() <= 1e-9 * d.f && e2.abs() <= 1e-9 * alpha * alpha * d.f);
        }
    }

    #[test]
    fn pinching_identity(n in 2usize..8, ratio in 0.0f64..1.0, mu in 0.01f64..100.0) {
        let k = CurvatureVector::new(n, ratio * mu, mu);
        let (lhs, rhs) = algebra::pinch_identity(&k);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * k.norm_sq());
        // axially stretched points satisfy the weak pinching bound
        prop_assert!(z_sigma(&k, 1.0 / (n * (n - 1)) as f64) <= 1e-12 * k.mean().powi(2));
    }

    #[test]
    fn ledger_inverts(c1 in -1.0f64..1.0, f1 in 1.0f64..50.0, c2 in -1.0f64..1.0, f2 in 1.0f64..50.0) {
        let curve = make_spherocylinder(1.0, 1.0, 32, 2).unwrap();
        let ledger = ScaleLedger::default().compose(c1, f1).compose(c2, f2);
        let back = ledger.to_original(&ledger.to_working(&curve));
        for i in 0..=32 {
            prop_assert!((back.x()[i] - curve.x()[i]).abs() < 1e-12);
            prop_assert!((back.u()[i] - curve.u()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_json_round_trip(t in 0.0f64..1.0, a in 0.1f64..10.0, ratio in 1.0f64..5.0) {
        let c = Checkpoint {
            t, dt_prev: 1e-3, t_to_end: 1.0 - t, step: 7, a, b: a / ratio, ratio,
            min_lambda: 0.0, max_lambda: 1.0, min_mu: 0.5, max_mu: 1.0, min_mu_minus_lambda: 0.0,
            min_f: 1.0, max_f: 2.0, min_h: 1.0, max_h: 2.0, z_margin: -0.5, f_pole: 2.0,
            support_axial: a, max_curvature: 1.0, lambda_total: 1.0, event: CheckpointEvent::Cadence,
        };
        let mut buf = Vec::new();
        let rec = RunRecord { meta: sample_meta(), checkpoints: vec![c.clone()], snapshots: vec![] };
        rec.write_checkpoints(&mut buf).unwrap();
        let back = RunRecord::read_checkpoints(&buf[..]).unwrap();
        prop_assert_eq!(back, vec![c]);
    }
}

fn sample_meta() -> axiflow::record::RunMeta {
    axiflow::record::RunMeta {
        speed: SpeedSpec::mean_power(1.0, 2).unwrap().descriptor().unwrap(),
        n: 2,
        alpha: 1.0,
        nodes: 32,
        terminal: axiflow::record::TerminalReason::EndTime,
        steps: 0,
        t_final: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sphere_steps_stay_round_and_shrink_exactly(r in 0.2f64..5.0, alpha in 1.0f64..3.0) {
        let speed = SpeedSpec::mean_power(alpha, 2).unwrap();
        let mut s = FlowState::new(make_sphere(r, 64, 2).unwrap());
        for _ in 0..20 {
            s = solver::step(&s, &speed, &StepControl::default()).unwrap();
        }
        let m = profile::metrics(&s.curve);
        prop_assert!((m.ratio - 1.0).abs() < 1e-9);
        let exact = profile::exact_sphere_radius(&speed, r, s.t).unwrap();
        prop_assert!((m.b - exact).abs() < 1e-5 * r);
    }
}
