//! Randomized property tests for the payoff transforms and the merge.

use dynkin::payoff::{
    auxiliary_payoff, value_from_qbar, Obstacle, PayoffBundle, PayoffMap, StatePath,
};
use dynkin::risk::{nonlinear_expectation, RiskFunction};
use dynkin::signals::{merge, SignalStream, StreamId};
use proptest::prelude::*;

fn bundle_with(r: f64, f: f64, level: f64, horizon: f64) -> PayoffBundle {
    PayoffBundle {
        discount_rate: r,
        running: PayoffMap::Constant(f),
        lower: PayoffMap::Constant(level),
        upper: PayoffMap::Constant(level),
        terminal: PayoffMap::Constant(level),
        horizon,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    /// The criterion pullback inverts the auxiliary transform: pushing a
    /// payoff level through discounting + criterion and back returns it.
    #[test]
    fn auxiliary_round_trip(
        r in 0.0f64..1.0,
        gamma in 0.1f64..5.0,
        h in -10.0f64..10.0,
        frac in 0.0f64..1.0,
        f in -1.0f64..1.0,
        identity in any::<bool>(),
    ) {
        let horizon = 1.5f64;
        let t = frac * horizon;
        let risk = if identity {
            RiskFunction::identity()
        } else {
            RiskFunction::exponential(gamma).unwrap()
        };
        let bundle = bundle_with(r, f, h, horizon);
        let path = StatePath::constant(0.0, horizon, 64);
        for which in [Obstacle::Lower, Obstacle::Upper, Obstacle::Terminal] {
            let t_eff = if which == Obstacle::Terminal { horizon } else { t };
            let hbar = auxiliary_payoff(&risk, &bundle, which, t, &path).unwrap();
            let back = value_from_qbar(&risk, &bundle, t_eff, hbar, &path).unwrap();
            let tol = 1e-9 * h.abs().max(1.0);
            prop_assert!((back - h).abs() < tol, "which {which:?}: {back} vs {h}");
        }
    }

    /// Elementwise domination is preserved by the nonlinear expectation.
    #[test]
    fn nonlinear_expectation_monotone(
        gamma in 0.1f64..5.0,
        base in proptest::collection::vec(-5.0f64..5.0, 1..40),
        bumps in proptest::collection::vec(0.0f64..2.0, 40),
    ) {
        let risk = RiskFunction::exponential(gamma).unwrap();
        let dominating: Vec<f64> = base
            .iter()
            .zip(bumps.iter())
            .map(|(x, b)| x + b)
            .collect();
        let lo = nonlinear_expectation(&risk, &base).unwrap();
        let hi = nonlinear_expectation(&risk, &dominating).unwrap();
        prop_assert!(hi >= lo - 1e-12);
    }

    /// Constant sample sets are fixed points of the nonlinear expectation.
    #[test]
    fn nonlinear_expectation_constant(
        gamma in 0.1f64..5.0,
        c in -5.0f64..5.0,
        n in 1usize..50,
    ) {
        let risk = RiskFunction::exponential(gamma).unwrap();
        let v = nonlinear_expectation(&risk, &vec![c; n]).unwrap();
        prop_assert!((v - c).abs() < 1e-10);
    }

    /// Merge keeps every labeled arrival and never reorders time.
    #[test]
    fn merge_is_lossless(
        a in proptest::collection::btree_set(1u32..10_000, 0..30),
        b in proptest::collection::btree_set(1u32..10_000, 0..30),
    ) {
        let to_times = |s: &std::collections::BTreeSet<u32>| -> Vec<f64> {
            s.iter().map(|&v| v as f64 / 100.0).collect()
        };
        let s1 = SignalStream::from_arrivals(1.0, to_times(&a), StreamId::One).unwrap();
        let s2 = SignalStream::from_arrivals(1.0, to_times(&b), StreamId::Two).unwrap();
        let m = merge(&s1, &s2);
        prop_assert_eq!(m.len(), a.len() + b.len());
        prop_assert!(m.events.windows(2).all(|w| w[0].time <= w[1].time));
        let mut from_one: Vec<f64> = m
            .events
            .iter()
            .filter(|e| e.label == StreamId::One)
            .map(|e| e.time)
            .collect();
        from_one.dedup();
        prop_assert_eq!(from_one, to_times(&a));
        // No unmerged arrival hides between consecutive events: every input
        // arrival appears exactly once.
        let mut all: Vec<f64> = m.events.iter().map(|e| e.time).collect();
        let mut expect: Vec<f64> = to_times(&a).into_iter().chain(to_times(&b)).collect();
        all.sort_by(|x, y| x.partial_cmp(y).unwrap());
        expect.sort_by(|x, y| x.partial_cmp(y).unwrap());
        prop_assert_eq!(all, expect);
    }
}
