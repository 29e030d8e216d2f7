mod common;

use elicit_core::gp::{optimize_hypers, EpOptions, GpModel, KernelSpec};
use elicit_core::elicitation::SessionConfig;
use elicit_core::oracle::OracleSpec;
use elicit_core::simulate::SimulatorSpec;

fn points(xs: &[f64]) -> Vec<Vec<f64>> {
    xs.iter().map(|&x| vec![x]).collect()
}

fn fit(xs: &[f64], ys: &[u8], ell: f64, s2: f64, m0: f64) -> GpModel {
    let mut k = KernelSpec::rbf(ell, s2);
    k.mean_constant = m0;
    GpModel::fit(&points(xs), ys, &k, &EpOptions::default()).unwrap()
}

#[test]
fn quadrature_rule_integrates_normal_moments() {
    let (x, w) = common::gauss_hermite(20);
    let m = |p: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum::<f64>();
    assert!((m(0) - 1.0).abs() < 1e-12);
    assert!(m(1).abs() < 1e-12);
    assert!((m(2) - 1.0).abs() < 1e-10);
    assert!((m(4) - 3.0).abs() < 1e-9);
    // E[Phi(X)] = 1/2 for X ~ N(0, 1)
    let e: f64 = x.iter().zip(&w).map(|(x, w)| w * common::phi(*x)).sum();
    assert!((e - 0.5).abs() < 1e-12);
}

#[test]
fn ep_matches_exact_posterior_on_fixtures() {
    let tests = common::test_points();
    for (i, fx) in common::fixtures().iter().enumerate() {
        let model = fit(&fx.xs, &fx.ys, fx.ell, fx.s2, fx.m0);
        assert!(model.converged(), "fixture {i} did not converge");
        let exact = common::reference(&fx.xs, &fx.ys, &tests, fx.ell, fx.s2, fx.m0, model.kernel().jitter, 40);
        for (t, p) in tests.iter().zip(&exact.probs) {
            let ep = model.predict_prob(&[*t]).unwrap();
            assert!((ep - p).abs() <= 0.02, "fixture {i} at {t}: EP {ep} exact {p}");
        }
    }
}

#[test]
fn single_positive_matches_exact() {
    let model = fit(&[0.5], &[1], 0.3, 1.0, 0.0);
    let exact = common::reference(&[0.5], &[1], &[0.5], 0.3, 1.0, 0.0, model.kernel().jitter, 80);
    let p = model.predict_prob(&[0.5]).unwrap();
    assert!(p > 0.5);
    assert!((p - exact.probs[0]).abs() <= 0.02);
}

#[test]
fn one_datum_evidence_is_log_half() {
    let model = fit(&[0.3], &[1], 0.2, 1.0, 0.0);
    assert!((model.log_marginal() - 0.5f64.ln()).abs() <= 0.05);
    let empty = fit(&[], &[], 0.2, 1.0, 0.0);
    assert_eq!(empty.log_marginal(), 0.0);
}

#[test]
fn ep_evidence_tracks_exact_evidence() {
    for fx in common::fixtures() {
        let model = fit(&fx.xs, &fx.ys, fx.ell, fx.s2, fx.m0);
        let exact = common::reference(&fx.xs, &fx.ys, &[], fx.ell, fx.s2, fx.m0, model.kernel().jitter, 40);
        assert!(
            (model.log_marginal() - exact.log_evidence).abs() < 0.05,
            "EP {} exact {}",
            model.log_marginal(),
            exact.log_evidence
        );
    }
}

#[test]
fn evidence_grows_with_signal_variance_on_separable_data() {
    let xs = [0.0, 0.1, 0.2, 0.7, 0.8, 0.9];
    let ys = [0, 0, 0, 1, 1, 1];
    let mut prev_ep = f64::NEG_INFINITY;
    let mut prev_exact = f64::NEG_INFINITY;
    for s2 in [0.5, 1.0, 2.0] {
        let model = fit(&xs, &ys, 0.3, s2, 0.0);
        let exact = common::reference(&xs, &ys, &[], 0.3, s2, 0.0, model.kernel().jitter, 14).log_evidence;
        assert!(exact >= prev_exact - 1e-9, "exact evidence fell at s2={s2}");
        assert!(model.log_marginal() >= prev_ep - 1e-6, "EP evidence fell at s2={s2}");
        assert!((model.log_marginal() - exact).abs() < 0.05, "s2={s2}: EP {} exact {exact}", model.log_marginal());
        prev_ep = model.log_marginal();
        prev_exact = exact;
    }
}

#[test]
fn hyper_search_on_binomial_grid_picks_moderate_lengthscale() {
    let cfg = SessionConfig::veri(SimulatorSpec::binomial(100), 0);
    let oracle = OracleSpec::default();
    let grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
    let labels: Vec<u8> = grid
        .iter()
        .enumerate()
        .map(|(i, &t)| oracle.judge_realism(&cfg.simulator.simulate(t, 1000 + i as u64).unwrap()).unwrap())
        .collect();
    let inputs = points(&grid);
    let candidates = cfg.kernel_candidates();
    let sel = optimize_hypers(&candidates, &cfg.initial_kernel(), |k| {
        GpModel::fit(&inputs, &labels, k, &EpOptions::default())
    })
    .unwrap();
    assert!(!sel.fallback);
    let ell = sel.kernel.lengthscales[0];
    assert!((0.05..=0.5).contains(&ell), "lengthscale {ell}");
}

#[test]
fn single_candidate_is_returned() {
    let k = KernelSpec::rbf(0.3, 4.0);
    let sel = optimize_hypers(std::slice::from_ref(&k), &k, |k| {
        GpModel::fit(&points(&[0.2, 0.4]), &[0, 1], k, &EpOptions::default())
    })
    .unwrap();
    assert_eq!(sel.kernel, k);
}

#[test]
fn near_duplicate_inputs_fit_with_jitter() {
    // Gram is singular to machine precision without jitter.
    let xs = [0.5, 0.5 + 1e-12, 0.5 - 1e-12];
    for ell in [0.02, 1.0] {
        let m = fit(&xs, &[1, 1, 0], ell, 4.0, 0.0);
        assert!(m.predict_prob(&[0.5]).unwrap().is_finite());
    }
}
