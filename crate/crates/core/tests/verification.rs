//! Dynamic-programming checks on deterministic instances (recursion residual
//! at merged-event times, martingale properties of the stopped sequence) and
//! the distributional laws of the signal machinery.

use dynkin::game::verification::{
    martingale_check, recursion_residual, DiscountedView, MartingaleVariant,
};
use dynkin::model::{Dynamics, MarkovModel};
use dynkin::payoff::{PayoffBundle, PayoffMap};
use dynkin::risk::RiskFunction;
use dynkin::rng::path_seed;
use dynkin::signals::{merge, SignalStream, StreamId};
use dynkin::solver::solve_ode;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn constant_model(
    r: f64,
    l: f64,
    u: f64,
    xi: f64,
    l1: f64,
    l2: f64,
    risk: RiskFunction,
) -> MarkovModel {
    MarkovModel {
        dynamics: Dynamics::frozen(),
        initial_state: 0.0,
        bundle: PayoffBundle {
            discount_rate: r,
            running: PayoffMap::Constant(0.0),
            lower: PayoffMap::Constant(l),
            upper: PayoffMap::Constant(u),
            terminal: PayoffMap::Constant(xi),
            horizon: 1.0,
        },
        risk,
        lambda1: l1,
        lambda2: l2,
    }
}

fn three_regime_model(risk: RiskFunction) -> MarkovModel {
    constant_model(0.25, 0.95, 0.98, 1.0, 2.0, 3.0, risk)
}

#[test]
fn qhat_branches() {
    let model = three_regime_model(RiskFunction::identity());
    let surface = solve_ode(&model, 400).unwrap();
    let view = DiscountedView::new(&model, &surface).unwrap();

    // Past the horizon: the discounted terminal payoff.
    let expected_xitilde = (-0.25f64).exp() * 1.0;
    assert!((view.qhat(1.5, StreamId::One).unwrap() - expected_xitilde).abs() < 1e-12);
    assert!((view.qhat(1.0, StreamId::Two).unwrap() - expected_xitilde).abs() < 1e-12);

    // Huge upper obstacle saturates the min at the value itself.
    let mut big_u = three_regime_model(RiskFunction::identity());
    big_u.bundle.upper = PayoffMap::Constant(1e9);
    let s2 = solve_ode(&big_u, 400).unwrap();
    let view2 = DiscountedView::new(&big_u, &s2).unwrap();
    let t = 0.4;
    assert!((view2.qhat(t, StreamId::One).unwrap() - view2.qtilde(t).unwrap()).abs() < 1e-12);

    // Huge lower obstacle saturates the max at the obstacle.
    let mut big_l = three_regime_model(RiskFunction::identity());
    big_l.bundle.lower = PayoffMap::Constant(1e9);
    let s3 = solve_ode(&big_l, 400).unwrap();
    let view3 = DiscountedView::new(&big_l, &s3).unwrap();
    let expected = (-0.25f64 * t).exp() * 1e9;
    assert!((view3.qhat(t, StreamId::Two).unwrap() - expected).abs() < 1e-3);
}

#[test]
fn recursion_residual_vanishes_at_fixed_point() {
    let model = constant_model(0.0, 1.0, 1.0, 1.0, 2.0, 3.0, RiskFunction::identity());
    let surface = solve_ode(&model, 400).unwrap();
    for &t in &[0.0, 0.3, 0.7, 0.95] {
        let res = recursion_residual(&model, &surface, t, 64).unwrap();
        assert!(res.abs() < 1e-13, "t = {t}, residual {res}");
    }
}

#[test]
fn recursion_residual_pure_discount_consistency() {
    // No intervention: the identity reduces to discounting of the terminal
    // value; any residual is the solver's own error.
    let model = constant_model(0.3, 0.5, 1.5, 1.0, 0.0, 0.0, RiskFunction::identity());
    let surface = solve_ode(&model, 1000).unwrap();
    for &t in &[0.1, 0.5, 0.9] {
        let res = recursion_residual(&model, &surface, t, 32).unwrap();
        assert!(res.abs() < 1e-12, "t = {t}, residual {res}");
    }
}

#[test]
fn recursion_residual_generic_instance_small() {
    for risk in [RiskFunction::identity(), RiskFunction::exponential(0.5).unwrap()] {
        let model = three_regime_model(risk);
        let surface = solve_ode(&model, 10_000).unwrap();
        let scale = 1.0f64;
        for &t in &[0.05, 0.25, 0.5, 0.75, 0.95] {
            let res = recursion_residual(&model, &surface, t, 64).unwrap();
            assert!(
                res.abs() <= 1e-6 * scale,
                "t = {t}, residual {res}"
            );
        }
    }
}

#[test]
fn recursion_residual_rejects_markov_instances() {
    let mut model = three_regime_model(RiskFunction::identity());
    model.dynamics = Dynamics::Geometric { drift: 0.05, vol: 0.2 };
    let surface = solve_ode(&three_regime_model(RiskFunction::identity()), 100).unwrap();
    assert!(recursion_residual(&model, &surface, 0.5, 32).is_err());
}

#[test]
fn martingale_constant_instance_increments_are_zero() {
    let model = constant_model(0.0, 1.0, 1.0, 1.0, 2.0, 3.0, RiskFunction::identity());
    let surface = solve_ode(&model, 100).unwrap();
    let report = martingale_check(&model, &surface, 4, 2000, 5, 3.0).unwrap();
    for e in &report.entries {
        assert_eq!(e.mean, 0.0, "{e:?}");
        assert_eq!(e.stderr, 0.0);
        assert!(e.pass);
    }
}

#[test]
fn martingale_properties_hold_on_generic_instance() {
    for risk in [RiskFunction::identity(), RiskFunction::exponential(0.5).unwrap()] {
        let model = three_regime_model(risk);
        let surface = solve_ode(&model, 4000).unwrap();
        let report = martingale_check(&model, &surface, 4, 100_000, 77, 3.0).unwrap();
        assert!(report.pass, "failing entries: {:#?}", report.entries);
        // All three variants and all steps are present.
        assert_eq!(report.entries.len(), 12);
        assert!(report
            .entries
            .iter()
            .any(|e| e.variant == MartingaleVariant::Supermartingale));
    }
}

#[test]
fn merged_superposition_is_poisson_chi_square() {
    // Merged gaps of independent streams with rates 1.7 and 2.3 follow an
    // exponential law with the summed rate; chi-square goodness of fit on
    // equiprobable bins at significance 0.001.
    let (l1, l2) = (1.7, 2.3);
    let total = l1 + l2;
    let n_samples = 10_000;
    // One long realization: truncating many short windows would censor the
    // long gaps near each cap and bias the fit.
    let cap = 1.5 * n_samples as f64 / total;
    let seed = path_seed(2026, 0);
    let s1 = SignalStream::sample(l1, cap, seed, StreamId::One).unwrap();
    let s2 = SignalStream::sample(l2, cap, seed, StreamId::Two).unwrap();
    let merged = merge(&s1, &s2);
    assert!(merged.len() > n_samples);
    let mut gaps = Vec::with_capacity(n_samples);
    let mut prev = 0.0;
    for e in merged.events.iter().take(n_samples) {
        gaps.push(e.time - prev);
        prev = e.time;
    }
    let bins = 20usize;
    let mut counts = vec![0usize; bins];
    for &g in &gaps {
        // Equiprobable exponential bins via the CDF.
        let u = 1.0 - (-total * g).exp();
        let b = ((u * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let expected = n_samples as f64 / bins as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let crit = ChiSquared::new((bins - 1) as f64)
        .unwrap()
        .inverse_cdf(0.999);
    assert!(chi2 < crit, "chi2 = {chi2}, critical = {crit}");
}

#[test]
fn merged_labels_follow_thinning_law() {
    // Each merged event's label is Bernoulli(l1/(l1+l2)); proportion z-test
    // at 3 sigma.
    let (l1, l2) = (1.7, 2.3);
    let p = l1 / (l1 + l2);
    let n_samples = 10_000usize;
    let cap = 1.5 * n_samples as f64 / (l1 + l2);
    let seed = path_seed(777, 0);
    let s1 = SignalStream::sample(l1, cap, seed, StreamId::One).unwrap();
    let s2 = SignalStream::sample(l2, cap, seed, StreamId::Two).unwrap();
    let merged = merge(&s1, &s2);
    assert!(merged.len() > n_samples);
    let ones = merged
        .events
        .iter()
        .take(n_samples)
        .filter(|e| e.label == StreamId::One)
        .count();
    let phat = ones as f64 / n_samples as f64;
    let z = (phat - p) / (p * (1.0 - p) / n_samples as f64).sqrt();
    assert!(z.abs() < 3.0, "z = {z}, phat = {phat}");
}
