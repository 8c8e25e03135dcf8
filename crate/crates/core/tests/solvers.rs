//! Solver outputs against reference implementations in `common`.

mod common;

use common::{elastic_net_oracle, random_problem, ridge_oracle, ridge_system};
use regpoison_core::regressors::mlp::{objective_and_gradient, MlpParams};
use regpoison_core::regressors::ModelParams;
use regpoison_core::{fit, RegressorKind, RegressorSpec};

fn linear_params(spec: &RegressorSpec, data: &regpoison_core::Dataset) -> (Vec<f64>, f64) {
    match fit(spec, data).unwrap().params {
        ModelParams::Linear { weights, intercept } => (weights, intercept),
        other => panic!("expected linear parameters, got {other:?}"),
    }
}

#[test]
fn ridge_matches_normal_equation_solve() {
    let shapes = [(30, 3), (50, 8), (120, 12), (200, 20)];
    for (case, &(n, d)) in shapes.iter().enumerate() {
        for alpha in [1e-6, 1e-3, 1e-1, 1.0] {
            let data = random_problem(n, d, 0.2, 100 + case as u64);
            let (w, b) = linear_params(&RegressorSpec::new(RegressorKind::Ridge).with("alpha", alpha), &data);
            let (w_ref, b_ref) = ridge_oracle(&data, alpha);

            let (a, rhs) = ridge_system(&data, alpha);
            let residual = a
                .iter()
                .zip(&rhs)
                .map(|(row, r)| (row.iter().zip(&w).map(|(p, q)| p * q).sum::<f64>() - r).abs())
                .fold(0.0, f64::max);
            assert!(residual < 1e-8, "{n}x{d} alpha {alpha}: residual {residual:e}");
            for (p, q) in w.iter().zip(&w_ref) {
                assert!((p - q).abs() < 1e-8, "{n}x{d} alpha {alpha}: {p} vs {q}");
            }
            assert!((b - b_ref).abs() < 1e-8);
        }
    }
}

#[test]
fn lasso_and_elastic_net_match_proximal_gradient() {
    let mut max_err = 0.0f64;
    let mut zeros = 0;
    for case in 0..20u64 {
        let data = random_problem(50, 8, 0.5, 1000 + case);
        let alpha = [1e-3, 5e-3, 2e-2, 5e-2][case as usize % 4];
        for (kind, ratio) in [(RegressorKind::Lasso, 1.0), (RegressorKind::ElasticNet, 0.5)] {
            let mut spec = RegressorSpec::new(kind).with("alpha", alpha);
            if kind == RegressorKind::ElasticNet {
                spec = spec.with("l1_ratio", ratio);
            }
            let (w, _) = linear_params(&spec, &data);
            let w_ref = elastic_net_oracle(&data, alpha, ratio);
            for (p, q) in w.iter().zip(&w_ref) {
                max_err = max_err.max((p - q).abs());
                assert!((p - q).abs() < 1e-5, "case {case} {kind}: {p} vs {q}");
            }
            zeros += w.iter().filter(|v| **v == 0.0).count();
        }
    }
    // the sparse regime must actually be exercised
    assert!(zeros > 0, "no coefficient was zeroed (max error {max_err:e})");
}

#[test]
fn mlp_gradient_matches_central_differences() {
    for (inputs, hidden, seed) in [(3, 4, 1u64), (5, 16, 2), (8, 7, 3)] {
        let data = random_problem(25, inputs, 0.3, seed);
        let p = MlpParams::init(inputs, hidden, 0.4, seed);
        let alpha = 1e-2;
        let (_, grad) = objective_and_gradient(&p, &data.features, &data.targets, alpha).unwrap();
        let h = 1e-6;
        for k in 0..p.flat.len() {
            let mut plus = p.clone();
            let mut minus = p.clone();
            plus.flat[k] += h;
            minus.flat[k] -= h;
            let fp = objective_and_gradient(&plus, &data.features, &data.targets, alpha).unwrap().0;
            let fm = objective_and_gradient(&minus, &data.features, &data.targets, alpha).unwrap().0;
            let numeric = (fp - fm) / (2.0 * h);
            let rel = (numeric - grad[k]).abs() / numeric.abs().max(grad[k].abs()).max(1e-6);
            assert!(rel < 1e-4, "parameter {k} of {inputs}x{hidden}: analytic {} numeric {numeric}", grad[k]);
        }
    }
}
