//! Solver cross-checks against independent oracles: a piecewise closed-form
//! integrator for constant-payoff instances, plain Monte Carlo for the
//! discounted-martingale case, and route-vs-route comparisons.

use dynkin::model::{simulate_state_path, Dynamics, MarkovModel};
use dynkin::payoff::{PayoffBundle, PayoffMap, StatePath};
use dynkin::risk::RiskFunction;
use dynkin::rng::{path_seed, stream_rng, STREAM_STATE};
use dynkin::solver::{
    solve, solve_exponential_quadratic, solve_ode, solve_pde, solve_regression_mc,
    solve_risk_neutral, SolveMode,
};
use dynkin::Error;

fn constant_bundle(r: f64, f: f64, l: f64, u: f64, xi: f64, horizon: f64) -> PayoffBundle {
    PayoffBundle {
        discount_rate: r,
        running: PayoffMap::Constant(f),
        lower: PayoffMap::Constant(l),
        upper: PayoffMap::Constant(u),
        terminal: PayoffMap::Constant(xi),
        horizon,
    }
}

fn deterministic_model(
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
        bundle: constant_bundle(r, 0.0, l, u, xi, 1.0),
        risk,
        lambda1: l1,
        lambda2: l2,
    }
}

/// Piecewise closed-form backward integrator for the transformed equation
/// with CONSTANT transformed obstacles (identity criterion with constant
/// payoffs, or any criterion at r = 0). In each penalization regime the
/// equation is linear, dq/dt = a q + b; regime boundaries are located by
/// bisection on the current piece.
struct PiecewiseOracle {
    ubar: f64,
    lbar: f64,
    xibar: f64,
    r: f64,
    l1: f64,
    l2: f64,
    horizon: f64,
}

impl PiecewiseOracle {
    fn regime_coeffs(&self, q: f64) -> (f64, f64) {
        if q > self.ubar {
            (self.r + self.l1, -self.l1 * self.ubar)
        } else if q < self.lbar {
            (self.r + self.l2, -self.l2 * self.lbar)
        } else {
            (self.r, 0.0)
        }
    }

    /// Value at `t1 + dt` (dt < 0 integrates backward) of the linear piece
    /// anchored at `(t1, q1)`.
    fn piece(a: f64, b: f64, q1: f64, dt: f64) -> f64 {
        if a == 0.0 {
            q1 + b * dt
        } else {
            (q1 + b / a) * (a * dt).exp() - b / a
        }
    }

    fn value(&self, t: f64) -> f64 {
        let mut t1 = self.horizon;
        let mut q1 = self.xibar;
        for _ in 0..64 {
            if t >= t1 {
                break;
            }
            // Coefficients of the regime currently occupied just below t1.
            let probe = Self::piece_coeffs_probe(self, t1, q1);
            let (a, b) = probe;
            // Candidate full step to t.
            let q_t = Self::piece(a, b, q1, t - t1);
            // Does the piece cross an obstacle before reaching t?
            let crossing = self.first_crossing(a, b, q1, t1, t);
            match crossing {
                None => return q_t,
                Some((tc, qc)) => {
                    t1 = tc;
                    q1 = qc;
                }
            }
        }
        q1
    }

    /// Regime coefficients at the start of a backward piece. At a boundary
    /// the dynamics decide which side the trajectory enters.
    fn piece_coeffs_probe(&self, t1: f64, q1: f64) -> (f64, f64) {
        let eps = 1e-13 * q1.abs().max(1.0);
        if (q1 - self.ubar).abs() <= eps || (q1 - self.lbar).abs() <= eps {
            // Nudged backward with interior dynamics and re-classified.
            let q_probe = Self::piece(self.r, 0.0, q1, -1e-9);
            let _ = t1;
            self.regime_coeffs(if (q_probe - q1).abs() > 0.0 { q_probe } else { q1 })
        } else {
            self.regime_coeffs(q1)
        }
    }

    /// First time in `(t, t1)` (backward) where the current piece hits an
    /// obstacle level, found by bisection.
    fn first_crossing(&self, a: f64, b: f64, q1: f64, t1: f64, t: f64) -> Option<(f64, f64)> {
        let mut best: Option<f64> = None;
        for level in [self.ubar, self.lbar] {
            let g = |s: f64| Self::piece(a, b, q1, s - t1) - level;
            let g1 = g(t1 - 1e-12);
            let gt = g(t);
            if g1 == 0.0 || g1 * gt > 0.0 {
                continue;
            }
            let (mut lo, mut hi) = (t, t1 - 1e-12);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) * g1 > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            let tc = 0.5 * (lo + hi);
            best = Some(best.map_or(tc, |cur: f64| cur.max(tc)));
        }
        best.map(|tc| (tc, Self::piece(a, b, q1, tc - t1)))
    }
}

/// Instance crossing all three penalization regimes backward from the
/// terminal condition.
fn three_regime_model() -> MarkovModel {
    deterministic_model(0.25, 0.95, 0.98, 1.0, 2.0, 3.0, RiskFunction::identity())
}

#[test]
fn ode_fixed_point_constant_payoffs() {
    for risk in [RiskFunction::identity(), RiskFunction::exponential(1.0).unwrap()] {
        let model = deterministic_model(0.0, 1.0, 1.0, 1.0, 2.0, 3.0, risk);
        let surface = solve_ode(&model, 100).unwrap();
        for k in 0..=100 {
            assert!(
                (surface.q_node(k, 0) - 1.0).abs() < 1e-12,
                "q({k}) = {}",
                surface.q_node(k, 0)
            );
        }
    }
}

#[test]
fn ode_no_intervention_is_pure_discounting() {
    let model = deterministic_model(0.3, 0.2, 1.9, 1.2, 0.0, 0.0, RiskFunction::identity());
    let surface = solve_ode(&model, 200).unwrap();
    let xibar = 1.2f64;
    for (k, &t) in surface.times.iter().enumerate() {
        let expected = xibar * (-0.3 * (1.0 - t)).exp();
        assert!(
            (surface.qbar_node(k, 0) - expected).abs() < 1e-12,
            "t = {t}"
        );
    }
}

#[test]
fn ode_matches_piecewise_closed_form_across_regimes() {
    let model = three_regime_model();
    let oracle = PiecewiseOracle {
        ubar: 0.98,
        lbar: 0.95,
        xibar: 1.0,
        r: 0.25,
        l1: 2.0,
        l2: 3.0,
        horizon: 1.0,
    };
    // Sanity: terminal regime is above the upper obstacle, so all three
    // regimes are traversed going backward.
    assert!(oracle.value(0.99) > 0.98);
    assert!(oracle.value(0.85) < 0.98 && oracle.value(0.85) > 0.95);
    assert!(oracle.value(0.2) < 0.95);

    let mut errs = Vec::new();
    for n_t in [100usize, 200] {
        let surface = solve_ode(&model, n_t).unwrap();
        let mut max_err = 0.0f64;
        for (k, &t) in surface.times.iter().enumerate() {
            max_err = max_err.max((surface.qbar_node(k, 0) - oracle.value(t)).abs());
        }
        errs.push(max_err);
    }
    // Regime-boundary kinks limit RK4 to second order locally: the crossing
    // step carries an O(dt^2) error, so expect ~4x contraction per halving.
    assert!(errs[0] < 1e-5, "coarse error {}", errs[0]);
    assert!(errs[1] < errs[0] / 2.5, "weak contraction: {errs:?}");
}

#[test]
fn ode_exponential_closed_form_at_zero_rate() {
    // r = 0 keeps the transformed obstacles constant for any criterion.
    let model = deterministic_model(
        0.0,
        0.95,
        0.98,
        1.0,
        2.0,
        3.0,
        RiskFunction::exponential(0.8).unwrap(),
    );
    let g = |x: f64| -(-0.8 * x).exp();
    let oracle = PiecewiseOracle {
        ubar: g(0.98),
        lbar: g(0.95),
        xibar: g(1.0),
        r: 0.0,
        l1: 2.0,
        l2: 3.0,
        horizon: 1.0,
    };
    let surface = solve_ode(&model, 200).unwrap();
    for (k, &t) in surface.times.iter().enumerate() {
        assert!(
            (surface.qbar_node(k, 0) - oracle.value(t)).abs() < 1e-8,
            "t = {t}"
        );
    }
}

#[test]
fn ode_self_convergence_is_fourth_order() {
    // Interior-regime instance: smooth dynamics, clean order measurement.
    let model = deterministic_model(0.25, 0.5, 1.5, 1.0, 2.0, 3.0, RiskFunction::identity());
    let exact = 1.0 * (-0.25f64).exp();
    let err = |n: usize| (solve_ode(&model, n).unwrap().qbar_node(0, 0) - exact).abs();
    let (e1, e2) = (err(10), err(20));
    let ratio = e1 / e2;
    assert!(e1 > 1e-13, "error too close to roundoff to measure order");
    assert!((8.0..40.0).contains(&ratio), "ratio {ratio}, errors {e1} {e2}");
}

#[test]
fn ode_rejects_state_dependent_payoffs() {
    let mut model = three_regime_model();
    model.bundle.terminal = PayoffMap::Affine { intercept: 0.0, slope: 1.0 };
    match solve_ode(&model, 100) {
        Err(Error::Mode(msg)) => assert!(msg.contains("time only"), "{msg}"),
        other => panic!("expected mode error, got {other:?}"),
    }
}

#[test]
fn ode_comparison_in_obstacles_and_intensities() {
    // Driver monotonicity transfers to the solution on randomized instances.
    let mut rng = stream_rng(2024, 0);
    use rand::Rng;
    for _ in 0..20 {
        let r = rng.random_range(0.0..0.5);
        let l = rng.random_range(0.5..1.0);
        let u = rng.random_range(0.5..1.0);
        let xi = rng.random_range(0.5..1.2);
        let (l1, l2) = (rng.random_range(0.0..3.0), rng.random_range(0.0..3.0));
        let base = deterministic_model(r, l, u, xi, l1, l2, RiskFunction::identity());
        let q0 = solve_ode(&base, 60).unwrap().qbar_node(0, 0);

        let mut upped = base.clone();
        upped.bundle.upper = PayoffMap::Constant(u + 0.2);
        assert!(solve_ode(&upped, 60).unwrap().qbar_node(0, 0) >= q0 - 1e-12);

        let mut lowered = base.clone();
        lowered.bundle.lower = PayoffMap::Constant(l + 0.2);
        assert!(solve_ode(&lowered, 60).unwrap().qbar_node(0, 0) >= q0 - 1e-12);

        let mut more_l1 = base.clone();
        more_l1.lambda1 = l1 + 1.0;
        assert!(solve_ode(&more_l1, 60).unwrap().qbar_node(0, 0) <= q0 + 1e-12);

        let mut more_l2 = base.clone();
        more_l2.lambda2 = l2 + 1.0;
        assert!(solve_ode(&more_l2, 60).unwrap().qbar_node(0, 0) >= q0 - 1e-12);

        // Bounds: the value stays inside the obstacle/terminal hull with 0.
        let lo = l.min(u).min(xi).min(0.0);
        let hi = l.max(u).max(xi).max(0.0);
        assert!((lo - 1e-12..=hi + 1e-12).contains(&q0), "q0 = {q0}");
    }
}

#[test]
fn pde_matches_ode_for_state_independent_payoffs() {
    // Interior-regime instance: the only difference between the two routes
    // is the first-order time discretization of the explicit sweep, about
    // r^2 T e^{-rT} / (2 n_t), so 1e5 steps leave a comfortable margin under
    // the 1e-6 gate.
    let n_t = 100_000;
    let model = deterministic_model(0.25, 0.5, 1.5, 1.0, 2.0, 3.0, RiskFunction::identity());
    let ode = solve_ode(&model, n_t).unwrap();
    let mut markov = model.clone();
    markov.dynamics = Dynamics::Arithmetic { drift: 0.0, vol: 0.2 };
    let pde = solve_pde(&markov, n_t, 4, -1.0, 1.0).unwrap();
    let mut max_err = 0.0f64;
    for k in 0..=n_t {
        for xi in 0..=4 {
            max_err = max_err.max((pde.qbar_node(k, xi) - ode.qbar_node(k, 0)).abs());
        }
    }
    assert!(max_err < 1e-6, "max err {max_err}");

    // Regime-crossing variant: kinks degrade the constant but not the order.
    let crossing = three_regime_model();
    let ode_c = solve_ode(&crossing, 20_000).unwrap();
    let mut markov_c = crossing.clone();
    markov_c.dynamics = Dynamics::Arithmetic { drift: 0.0, vol: 0.2 };
    let pde_c = solve_pde(&markov_c, 20_000, 4, -1.0, 1.0).unwrap();
    let mut err_c = 0.0f64;
    for k in 0..=20_000 {
        err_c = err_c.max((pde_c.qbar_node(k, 0) - ode_c.qbar_node(k, 0)).abs());
    }
    assert!(err_c < 1e-5, "crossing-instance err {err_c}");
}

#[test]
fn pde_driftless_linear_terminal_is_a_martingale() {
    let model = MarkovModel {
        dynamics: Dynamics::Arithmetic { drift: 0.0, vol: 0.3 },
        initial_state: 0.4,
        bundle: PayoffBundle {
            discount_rate: 0.1,
            running: PayoffMap::Constant(0.0),
            lower: PayoffMap::Constant(-1e6),
            upper: PayoffMap::Constant(1e6),
            terminal: PayoffMap::Affine { intercept: 0.0, slope: 1.0 },
            horizon: 1.0,
        },
        risk: RiskFunction::identity(),
        lambda1: 0.0,
        lambda2: 0.0,
    };
    let surface = solve_pde(&model, 400, 40, -2.0, 2.0).unwrap();
    let expected = 0.4 * (-0.1f64).exp();
    let got = surface.value_at_initial();
    assert!((got - expected).abs() < 1e-4, "got {got}, expected {expected}");
}

#[test]
fn pde_cfl_violation_reports_required_steps() {
    let mut model = three_regime_model();
    model.dynamics = Dynamics::Arithmetic { drift: 0.0, vol: 1.0 };
    match solve_pde(&model, 10, 100, -1.0, 1.0) {
        Err(Error::CflViolation { required_n_t, .. }) => {
            assert!(required_n_t > 10);
            assert!(solve_pde(&model, required_n_t, 100, -1.0, 1.0).is_ok());
        }
        other => panic!("expected CFL violation, got {other:?}"),
    }
}

#[test]
fn pde_self_convergence_first_order() {
    let model = MarkovModel {
        dynamics: Dynamics::Geometric { drift: 0.05, vol: 0.2 },
        initial_state: 1.0,
        bundle: PayoffBundle {
            discount_rate: 0.05,
            running: PayoffMap::Constant(0.0),
            lower: PayoffMap::Call { scale: 1.0, strike: 1.1, offset: 0.0 },
            upper: PayoffMap::Call { scale: 1.2, strike: 0.9, offset: 0.1 },
            terminal: PayoffMap::Call { scale: 1.0, strike: 1.0, offset: 0.0 },
            horizon: 1.0,
        },
        risk: RiskFunction::identity(),
        lambda1: 1.0,
        lambda2: 2.0,
    };
    // Ladder refining dt by 4 and dx by 2 keeps both error terms shrinking
    // by about 4 per rung.
    let v1 = solve_pde(&model, 250, 100, -1.1, 2.4).unwrap().value_at_initial();
    let v2 = solve_pde(&model, 1000, 200, -1.1, 2.4).unwrap().value_at_initial();
    let v3 = solve_pde(&model, 4000, 400, -1.1, 2.4).unwrap().value_at_initial();
    let (d1, d2) = ((v1 - v2).abs(), (v2 - v3).abs());
    assert!(d2 < d1, "no contraction: {d1} vs {d2}");
    let ratio = d1 / d2;
    assert!((2.0..8.0).contains(&ratio), "ratio {ratio} ({v1}, {v2}, {v3})");
}

#[test]
fn terminal_slices_are_exact() {
    let model = MarkovModel {
        dynamics: Dynamics::Geometric { drift: 0.05, vol: 0.2 },
        initial_state: 1.0,
        bundle: PayoffBundle {
            discount_rate: 0.05,
            running: PayoffMap::Constant(0.0),
            lower: PayoffMap::Call { scale: 1.0, strike: 1.1, offset: 0.0 },
            upper: PayoffMap::Call { scale: 1.2, strike: 0.9, offset: 0.1 },
            terminal: PayoffMap::Call { scale: 1.0, strike: 1.0, offset: 0.0 },
            horizon: 1.0,
        },
        risk: RiskFunction::exponential(0.5).unwrap(),
        lambda1: 1.0,
        lambda2: 2.0,
    };
    let surface = solve_pde(&model, 500, 80, -1.1, 2.4).unwrap();
    let states = surface.states.clone().unwrap();
    let n_t = surface.n_t();
    let g = &model.risk;
    let r = model.bundle.discount_rate;
    for (i, &x) in states.iter().enumerate() {
        let xi = model.bundle.terminal.eval(1.0, x);
        let xibar = (r * 1.0f64).exp() * g.apply((-r * 1.0f64).exp() * xi).unwrap();
        assert!((surface.qbar_node(n_t, i) - xibar).abs() < 1e-14);
        assert!((surface.q_node(n_t, i) - xi).abs() < 1e-10);
    }
}

#[test]
fn risk_neutral_route_equals_transformed_route_for_identity() {
    let model = three_regime_model();
    let a = solve_ode(&model, 500).unwrap();
    let b = solve_risk_neutral(&model, SolveMode::Ode { n_t: 500 }).unwrap();
    let max = a.max_q_difference(&b).unwrap();
    assert!(max < 1e-9, "max diff {max}");
}

#[test]
fn risk_neutral_rejects_non_identity() {
    let mut model = three_regime_model();
    model.risk = RiskFunction::exponential(1.0).unwrap();
    assert!(matches!(
        solve_risk_neutral(&model, SolveMode::Ode { n_t: 100 }),
        Err(Error::Mode(_))
    ));
}

#[test]
fn one_player_value_is_monotone_in_lambda2() {
    // l1 = 0: the minimizer never stops; more stopping opportunities can
    // only help the maximizer. The lower obstacle is worth stopping for.
    let mut values = Vec::new();
    for &l2 in &[0.0, 1.0, 2.0] {
        let model = deterministic_model(0.3, 0.95, 2.0, 1.0, 0.0, l2, RiskFunction::identity());
        let surface = solve_risk_neutral(&model, SolveMode::Ode { n_t: 400 }).unwrap();
        values.push(surface.q_node(0, 0));
    }
    assert!(values[0] <= values[1] + 1e-12 && values[1] <= values[2] + 1e-12, "{values:?}");
    assert!(values[2] > values[0], "stopping should be strictly profitable: {values:?}");
}

#[test]
fn exponential_quadratic_route_matches_pullback_ode() {
    // Deterministic coefficients: both routes are RK4-exact to O(dt^4);
    // the difference is pure transform algebra.
    let model = deterministic_model(
        0.25,
        0.95,
        0.98,
        1.0,
        2.0,
        3.0,
        RiskFunction::exponential(0.8).unwrap(),
    );
    let transformed = solve_ode(&model, 1000).unwrap();
    let direct = solve_exponential_quadratic(&model, SolveMode::Ode { n_t: 1000 }).unwrap();
    let max = transformed.max_q_difference(&direct).unwrap();
    assert!(max < 1e-5, "max diff {max}");
}

#[test]
fn exponential_quadratic_rejects_identity() {
    let model = three_regime_model();
    assert!(matches!(
        solve_exponential_quadratic(&model, SolveMode::Ode { n_t: 100 }),
        Err(Error::Mode(_))
    ));
}

#[test]
fn exponential_quadratic_overflow_guard() {
    let model = deterministic_model(
        0.0,
        -500.0,
        500.0,
        0.0,
        1.0,
        1.0,
        RiskFunction::exponential(5.0).unwrap(),
    );
    match solve_exponential_quadratic(&model, SolveMode::Ode { n_t: 100 }) {
        Err(Error::Overflow { .. }) => {}
        Err(Error::DomainViolation { .. }) => {}
        other => panic!("expected overflow-type error, got {other:?}"),
    }
}

#[test]
fn gamma_to_zero_limit_approaches_risk_neutral() {
    let mut model = three_regime_model();
    let rn = solve_risk_neutral(&model, SolveMode::Ode { n_t: 1000 }).unwrap();
    model.risk = RiskFunction::exponential(1e-3).unwrap();
    let eu = solve_ode(&model, 1000).unwrap();
    let max = rn.max_q_difference(&eu).unwrap();
    assert!(max < 5e-3, "gamma->0 gap {max}");
}

#[test]
fn regression_mc_matches_ode_on_deterministic_instance() {
    let model = deterministic_model(
        0.25,
        0.95,
        0.98,
        1.0,
        2.0,
        3.0,
        RiskFunction::exponential(1.0).unwrap(),
    );
    let ode = solve_ode(&model, 2000).unwrap();
    let mc = solve_regression_mc(&model, 64, 4000, 3, 77).unwrap();
    let diff = (mc.value - ode.qbar_node(0, 0)).abs();
    // Deterministic payoffs leave only the driver-integration bias.
    assert!(
        diff <= (3.0 * mc.stderr).max(5e-3),
        "diff {diff}, stderr {}",
        mc.stderr
    );
}

#[test]
fn regression_mc_reduces_degree_on_degenerate_states() {
    let model = three_regime_model();
    let mc = solve_regression_mc(&model, 16, 2000, 3, 5).unwrap();
    // Frozen dynamics make every state column constant: all steps collapse
    // to degree zero with a recorded warning.
    assert!(!mc.reductions.is_empty());
    assert!(mc.coefficients.iter().all(|c| c.len() == 1));
}

#[test]
fn regression_mc_discounted_martingale_oracle() {
    // No intervention, identity criterion: the value is E[e^{-rT} xi(X_T)],
    // estimated independently by plain Monte Carlo on the same seeds.
    let model = MarkovModel {
        dynamics: Dynamics::Geometric { drift: 0.05, vol: 0.2 },
        initial_state: 1.0,
        bundle: PayoffBundle {
            discount_rate: 0.05,
            running: PayoffMap::Constant(0.0),
            lower: PayoffMap::Constant(-1e9),
            upper: PayoffMap::Constant(1e9),
            terminal: PayoffMap::Call { scale: 1.0, strike: 1.0, offset: 0.0 },
            horizon: 1.0,
        },
        risk: RiskFunction::identity(),
        lambda1: 0.0,
        lambda2: 0.0,
    };
    let n_steps = 64;
    let n_paths = 20_000;
    let seed = 31;
    let mc = solve_regression_mc(&model, n_steps, n_paths, 3, seed).unwrap();

    let mut payoffs = Vec::with_capacity(n_paths);
    for p in 0..n_paths {
        let mut rng = stream_rng(path_seed(seed, p as u64), STREAM_STATE);
        let xs = simulate_state_path(&model.dynamics, 1.0, 1.0, n_steps, &mut rng);
        let xt = *xs.last().unwrap();
        payoffs.push((-0.05f64).exp() * (xt - 1.0).max(0.0));
    }
    let mean = payoffs.iter().sum::<f64>() / n_paths as f64;
    let sd = (payoffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n_paths - 1) as f64)
        .sqrt()
        / (n_paths as f64).sqrt();
    let diff = (mc.value - mean).abs();
    let tol = 3.0 * (sd + mc.stderr);
    assert!(diff < tol.max(1e-3), "diff {diff}, tol {tol}");
}

#[test]
fn surface_csv_has_fixed_header_and_shape() {
    let model = three_regime_model();
    let surface = solve_ode(&model, 20).unwrap();
    let mut buf = Vec::new();
    surface.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x,qbar,zbar,q");
    assert_eq!(lines.count(), 21);
    // Deterministic formatting: identical solve, identical bytes.
    let again = solve_ode(&model, 20).unwrap();
    let mut buf2 = Vec::new();
    again.write_csv(&mut buf2).unwrap();
    assert_eq!(text.as_bytes(), buf2.as_slice());
}

#[test]
fn pullback_round_trip_on_surface_nodes() {
    use dynkin::payoff::value_from_qbar;
    let model = deterministic_model(
        0.25,
        0.95,
        0.98,
        1.0,
        2.0,
        3.0,
        RiskFunction::exponential(0.7).unwrap(),
    );
    let surface = solve_ode(&model, 100).unwrap();
    let path = StatePath::constant(0.0, 1.0, 100);
    for (k, &t) in surface.times.iter().enumerate() {
        let q = value_from_qbar(&model.risk, &model.bundle, t, surface.qbar_node(k, 0), &path)
            .unwrap();
        assert!((q - surface.q_node(k, 0)).abs() < 1e-10, "t = {t}");
    }
}
