use gap_core::engine::{classify_params, fit_geometric_rate, run, ParamCase, StopRule};
use gap_core::experiment::{run_experiment, ExperimentConfig, ParamSpec, Problem};
use gap_core::local::{predicted_local_rate, regularity_constants};
use gap_core::sets::ProjectableSet;
use gap_core::spectral::spectral_report;
use gap_core::subspace::{construct_pair_with_angles, DEFAULT_ZERO_TOL};
use nalgebra::DVector;
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn param_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(1.0), Just(2.0), -0.5..2.5f64]
}

fn in_open(x: f64, hi: f64) -> bool {
    x > 0.0 && x < hi
}

fn in_half_open(x: f64, hi: f64) -> bool {
    x > 0.0 && x <= hi
}

proptest! {
    #[test]
    fn classification_matches_the_case_rules(a in param_value(), a1 in param_value(), a2 in param_value()) {
        let expected = if in_half_open(a, 1.0) && in_open(a1, 2.0) && in_open(a2, 2.0) {
            ParamCase::B1
        } else if in_open(a, 1.0) && a1 == 2.0 && a2 == 2.0 {
            ParamCase::B3
        } else if in_open(a, 1.0) && in_half_open(a1, 2.0) && in_half_open(a2, 2.0) {
            ParamCase::B2
        } else {
            ParamCase::Invalid
        };
        prop_assert_eq!(classify_params(a, a1, a2).case, expected);
    }

    #[test]
    fn traces_are_nonempty_with_matching_distances(
        theta in 0.1..1.5f64,
        a1 in 0.2..1.9f64,
        seed in 0u64..1000,
        max_iter in 0usize..40,
    ) {
        let (u, v) = construct_pair_with_angles::<f64>(4, 1, 2, &[theta], seed).unwrap();
        let x0 = DVector::from_fn(4, |i, _| 1.0 / (i as f64 + 1.0));
        let params = classify_params(1.0, a1, a1);
        let mut trace = run(
            &ProjectableSet::LinearSubspace(u),
            &ProjectableSet::LinearSubspace(v),
            &params,
            &x0,
            &StopRule { tol: 1e-13, max_iter },
        )
        .unwrap();
        prop_assert!(!trace.iterates.is_empty());
        prop_assert!(trace.steps() <= max_iter);
        prop_assert_eq!(trace.face_labels.len(), trace.steps());
        trace.attach_reference(&DVector::zeros(4));
        prop_assert_eq!(trace.distances_to_solution.as_ref().map(Vec::len), Some(trace.iterates.len()));
    }

    #[test]
    fn rate_fit_recovers_geometric_sequences(rate in 0.05..0.95f64, c in 0.1..10.0f64, len in 12usize..80) {
        let d: Vec<f64> = (0..len).map(|k| c * rate.powi(k as i32)).collect();
        let fit = fit_geometric_rate(&d, 0.0, 0.5).unwrap();
        prop_assert!((fit.rate - rate).abs() < 1e-9);
        prop_assert!(fit.residual < 1e-9);
        prop_assert_eq!(fit.samples_used, len.div_ceil(2).max(3));
        prop_assert_eq!(fit.window.1, len - 1);
    }

    #[test]
    fn rate_fit_needs_ten_usable_distances(len in 0usize..10) {
        let d: Vec<f64> = (0..len).map(|k| 0.5f64.powi(k as i32)).collect();
        prop_assert!(fit_geometric_rate(&d, 0.0, 1.0).is_err());
    }

    #[test]
    fn rate_fit_ignores_nonpositive_distances(rate in 0.1..0.9f64) {
        let mut d: Vec<f64> = (0..30).map(|k| rate.powi(k)).collect();
        d.extend([0.0; 5]);
        let fit = fit_geometric_rate(&d, 0.0, 1.0).unwrap();
        prop_assert!((fit.rate - rate).abs() < 1e-9);
        prop_assert_eq!(fit.samples_used, 30);
    }

    #[test]
    fn sigma_dominates_gamma(
        t1 in 0.05..0.8f64,
        t2 in 0.8..1.5f64,
        alpha in 0.1..1.0f64,
        a1 in 0.1..1.99f64,
        a2 in 0.1..1.99f64,
        seed in 0u64..500,
    ) {
        let (u, v) = construct_pair_with_angles::<f64>(7, 2, 3, &[t1, t2], seed).unwrap();
        let r = spectral_report(&u, &v, &classify_params(alpha, a1, a2), DEFAULT_ZERO_TOL).unwrap();
        prop_assert!(r.sigma + 1e-10 >= r.gamma);
        prop_assert!(r.sigma < 1.0);
    }

    #[test]
    fn local_contraction_below_one(theta in 0.1..(FRAC_PI_2 - 0.05), a1 in 0.1..2.0f64, a2 in 0.1..2.0f64) {
        let circle = ProjectableSet::sphere(DVector::from_vec(vec![0.0, 0.0]), 1.0).unwrap();
        let line = ProjectableSet::line_through(
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![theta.sin(), theta.cos()]),
        )
        .unwrap();
        let x_star = DVector::from_vec(vec![1.0, 0.0]);
        let report = predicted_local_rate(&circle, &line, &x_star, &classify_params(0.5, a1, a2), None).unwrap();
        prop_assert!(report.regular);
        let (gamma, sigma) = (report.gamma_local.unwrap(), report.sigma_local.unwrap());
        prop_assert!(sigma < 1.0);
        prop_assert!(gamma <= sigma + 1e-10);
    }

    #[test]
    fn subregularity_constants_are_ordered(d in 0.05..1.99f64) {
        prop_assume!((d - 2.0f64.sqrt()).abs() > 1e-6);
        let a = ProjectableSet::ball(DVector::from_vec(vec![0.0, 0.0]), 1.0).unwrap();
        let b = ProjectableSet::ball(DVector::from_vec(vec![d, 0.0]), 1.0).unwrap();
        let x_star = DVector::from_vec(vec![d / 2.0, (1.0 - d * d / 4.0).sqrt()]);
        let c = regularity_constants(&a, &b, &x_star).unwrap();
        prop_assert!(c.r <= c.sr + 1e-15);
        prop_assert!((c.r_a - (1.0 - 2.0 * c.r * c.r)).abs() < 1e-15);
    }
}

#[test]
fn experiments_are_deterministic() {
    let cfg = ExperimentConfig::new(Problem::SubspaceRate { n: 9, p: 3, q: 4, angles: vec![0.3, 0.6, 1.2], finite_steps: 3 })
        .with_params(ParamSpec::Optimal)
        .with_seed(5);
    let a = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn configs_round_trip_through_json() {
    let cfg = ExperimentConfig::new(Problem::ParamSweep { theta_f: 0.3, n: 4, grid_step: 0.1, margin: 1e-10 })
        .with_params(ParamSpec::Kappa(2.5))
        .with_seed(3);
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
}
