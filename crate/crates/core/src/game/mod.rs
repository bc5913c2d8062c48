//! Pathwise game realization: policy execution on the players' own signal
//! streams, the three-regime payoff, and Monte Carlo value estimation under
//! the nonlinear expectation.

pub mod saddle;
pub mod verification;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{simulate_state_path, MarkovModel};
use crate::payoff::{PayoffBundle, StatePath};
use crate::rng::{path_seed, stream_rng, STREAM_STATE};
use crate::signals::{SignalStream, StreamId};
use crate::solver::ValueSurface;
use crate::util::{compensated_mean, standard_error};

/// The two players: `One` minimizes (pays the upper obstacle when stopping
/// first), `Two` maximizes (collects the lower obstacle).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Player {
    One,
    Two,
}

/// Stopping rule; the forced cap at the first own arrival past the horizon
/// applies to every rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopRule {
    /// Stop at the first own arrival where the value surface touches the
    /// player's obstacle (player 1: `Q >= U`; player 2: `Q <= L`).
    Threshold,
    /// Stop at the n-th own arrival (1-based).
    FixedIndex(usize),
    /// Only the forced cap stops.
    Never,
}

#[derive(Clone, Copy, Debug)]
pub struct StoppingPolicy {
    pub player: Player,
    pub rule: StopRule,
}

impl StoppingPolicy {
    pub fn label(&self) -> String {
        let rule = match self.rule {
            StopRule::Threshold => "threshold".to_string(),
            StopRule::FixedIndex(n) => format!("fixed_{n}"),
            StopRule::Never => "never".to_string(),
        };
        let player = match self.player {
            Player::One => 1,
            Player::Two => 2,
        };
        format!("p{player}_{rule}")
    }
}

/// Threshold policies read off a solved surface: player 1 stops at its first
/// own arrival with `Q >= U`, player 2 at its first with `Q <= L`, each capped
/// at the first own arrival past the horizon.
pub fn optimal_policies(
    surface: &ValueSurface,
    bundle: &PayoffBundle,
) -> Result<(StoppingPolicy, StoppingPolicy)> {
    if (surface.horizon() - bundle.horizon).abs() > 1e-12 * bundle.horizon.max(1.0) {
        return Err(Error::SurfaceMismatch(format!(
            "surface horizon {} != model horizon {}",
            surface.horizon(),
            bundle.horizon
        )));
    }
    Ok((
        StoppingPolicy {
            player: Player::One,
            rule: StopRule::Threshold,
        },
        StoppingPolicy {
            player: Player::Two,
            rule: StopRule::Threshold,
        },
    ))
}

/// State path plus both signal streams for one Monte Carlo draw.
#[derive(Clone, Debug)]
pub struct PathInputs {
    pub seed: u64,
    pub path: StatePath,
    pub stream1: SignalStream,
    pub stream2: SignalStream,
}

/// Simulate one path's inputs from a derived seed: Euler state path on a
/// uniform grid and both signal streams capped at the horizon (one arrival
/// beyond the cap retained).
pub fn simulate_inputs(model: &MarkovModel, n_steps: usize, seed: u64) -> Result<PathInputs> {
    let horizon = model.bundle.horizon;
    let mut rng = stream_rng(seed, STREAM_STATE);
    let states = simulate_state_path(
        &model.dynamics,
        model.initial_state,
        horizon,
        n_steps,
        &mut rng,
    );
    let times = (0..=n_steps)
        .map(|k| horizon * k as f64 / n_steps as f64)
        .collect();
    let path = StatePath::new(times, states)?;
    let stream1 = SignalStream::sample(model.lambda1, horizon, seed, StreamId::One)?;
    let stream2 = SignalStream::sample(model.lambda2, horizon, seed, StreamId::Two)?;
    Ok(PathInputs {
        seed,
        path,
        stream1,
        stream2,
    })
}

/// Which branch of the payoff fired; exactly one per realization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Nobody stopped before the horizon: terminal payoff.
    Terminal,
    /// The maximizer stopped first (ties included): lower obstacle.
    LowerStopped,
    /// The minimizer stopped strictly first: upper obstacle.
    UpperStopped,
}

/// One executed game path.
#[derive(Clone, Debug)]
pub struct GameRealization {
    pub seed: u64,
    pub sigma: f64,
    pub sigma_index: usize,
    pub tau: f64,
    pub tau_index: usize,
    pub regime: Regime,
    pub payoff: f64,
    /// Number of clamped surface lookups during policy evaluation.
    pub clamped_lookups: u64,
}

/// Discounted payoff of a stopped path:
/// running integral to the first stop, then exactly one of
/// terminal / lower / upper depending on who stopped first.
pub fn realized_payoff(
    bundle: &PayoffBundle,
    path: &StatePath,
    sigma: f64,
    tau: f64,
) -> Result<(f64, Regime)> {
    let horizon = bundle.horizon;
    let r = bundle.discount_rate;
    let first = sigma.min(tau).min(horizon);
    let mut value = path.discounted_running_integral(bundle, first);
    let regime;
    if sigma.min(tau) >= horizon {
        let x = path.state_at(horizon);
        let xi = bundle.terminal.eval(horizon, x);
        if !xi.is_finite() {
            return Err(Error::NonFinite { what: "terminal payoff", t: horizon, x });
        }
        value += (-r * horizon).exp() * xi;
        regime = Regime::Terminal;
    } else if tau < horizon && tau <= sigma {
        let x = path.state_at(tau);
        let l = bundle.lower.eval(tau, x);
        if !l.is_finite() {
            return Err(Error::NonFinite { what: "lower payoff", t: tau, x });
        }
        value += (-r * tau).exp() * l;
        regime = Regime::LowerStopped;
    } else {
        debug_assert!(sigma < horizon && sigma < tau);
        let x = path.state_at(sigma);
        let u = bundle.upper.eval(sigma, x);
        if !u.is_finite() {
            return Err(Error::NonFinite { what: "upper payoff", t: sigma, x });
        }
        value += (-r * sigma).exp() * u;
        regime = Regime::UpperStopped;
    }
    Ok((value, regime))
}

fn execute_policy(
    policy: &StoppingPolicy,
    model: &MarkovModel,
    surface: Option<&ValueSurface>,
    inputs: &PathInputs,
    clamps: &mut u64,
) -> Result<(f64, usize)> {
    let stream = match policy.player {
        Player::One => &inputs.stream1,
        Player::Two => &inputs.stream2,
    };
    let horizon = model.bundle.horizon;
    let cap = stream.m_index(horizon)?;
    match policy.rule {
        StopRule::Never => Ok((stream.arrival(cap), cap)),
        StopRule::FixedIndex(n) => {
            let n = n.max(1).min(cap);
            Ok((stream.arrival(n), n))
        }
        StopRule::Threshold => {
            let surface = surface.ok_or_else(|| {
                Error::SurfaceMismatch("threshold policy needs a solved value surface".into())
            })?;
            for n in 1..cap {
                let t = stream.arrival(n);
                let x = inputs.path.state_at(t);
                let q = surface.interp_q(t, x, clamps);
                let hit = match policy.player {
                    Player::One => q >= model.bundle.upper.eval(t, x),
                    Player::Two => q <= model.bundle.lower.eval(t, x),
                };
                if hit {
                    return Ok((t, n));
                }
            }
            Ok((stream.arrival(cap), cap))
        }
    }
}

/// Execute both policies on one input draw and evaluate the payoff.
pub fn realize(
    model: &MarkovModel,
    surface: Option<&ValueSurface>,
    policy1: &StoppingPolicy,
    policy2: &StoppingPolicy,
    inputs: &PathInputs,
) -> Result<GameRealization> {
    debug_assert_eq!(policy1.player, Player::One);
    debug_assert_eq!(policy2.player, Player::Two);
    let mut clamps = 0u64;
    let (sigma, sigma_index) = execute_policy(policy1, model, surface, inputs, &mut clamps)?;
    let (tau, tau_index) = execute_policy(policy2, model, surface, inputs, &mut clamps)?;
    // Control-set membership: an own arrival, at or below the forced cap.
    debug_assert_eq!(inputs.stream1.arrival(sigma_index), sigma);
    debug_assert_eq!(inputs.stream2.arrival(tau_index), tau);
    debug_assert!(sigma_index <= inputs.stream1.m_index(model.bundle.horizon)?);
    debug_assert!(tau_index <= inputs.stream2.m_index(model.bundle.horizon)?);
    let (payoff, regime) = realized_payoff(&model.bundle, &inputs.path, sigma, tau)?;
    Ok(GameRealization {
        seed: inputs.seed,
        sigma,
        sigma_index,
        tau,
        tau_index,
        regime,
        payoff,
        clamped_lookups: clamps,
    })
}

/// Monte Carlo estimate of the game value under the nonlinear expectation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct McEstimate {
    pub n: usize,
    /// Mean of the criterion-transformed payoffs.
    pub mean_g: f64,
    /// Criterion pullback of `mean_g`.
    pub value: f64,
    /// Delta-method standard error of `value`.
    pub stderr_value: f64,
}

pub(crate) fn estimate_from_g_samples(
    model: &MarkovModel,
    g_samples: &[f64],
) -> Result<McEstimate> {
    let mean_g = compensated_mean(g_samples);
    let value = model.risk.invert(mean_g)?;
    let sem = standard_error(g_samples, mean_g);
    let deriv = model.risk.derivative(value, None)?.abs();
    if deriv == 0.0 {
        return Err(Error::DegenerateDerivative { x: value });
    }
    Ok(McEstimate {
        n: g_samples.len(),
        mean_g,
        value,
        stderr_value: sem / deriv,
    })
}

/// Simulate `n_paths` games under the two policies and aggregate the payoffs
/// through the criterion. Paths are simulated in parallel from per-path seeds
/// and reduced in fixed path order.
pub fn estimate_value(
    model: &MarkovModel,
    surface: Option<&ValueSurface>,
    policy1: &StoppingPolicy,
    policy2: &StoppingPolicy,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<McEstimate> {
    let (estimate, _) = estimate_with_realizations(
        model, surface, policy1, policy2, n_paths, n_steps, seed, false,
    )?;
    Ok(estimate)
}

/// As [`estimate_value`], optionally keeping the per-path realizations.
#[allow(clippy::too_many_arguments)]
pub fn estimate_with_realizations(
    model: &MarkovModel,
    surface: Option<&ValueSurface>,
    policy1: &StoppingPolicy,
    policy2: &StoppingPolicy,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    keep_realizations: bool,
) -> Result<(McEstimate, Vec<GameRealization>)> {
    if n_paths < 100 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            message: format!("value estimation needs at least 100 paths, got {n_paths}"),
        });
    }
    let results: Vec<Result<GameRealization>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let inputs = simulate_inputs(model, n_steps, path_seed(seed, p as u64))?;
            realize(model, surface, policy1, policy2, &inputs)
        })
        .collect();

    let mut g_samples = Vec::with_capacity(n_paths);
    let mut realizations = Vec::new();
    for res in results {
        let real = res?;
        let g = model.risk.apply(real.payoff).map_err(|e| Error::PathDomain {
            seed: real.seed,
            source: Box::new(e),
        })?;
        g_samples.push(g);
        if keep_realizations {
            realizations.push(real);
        }
    }
    let estimate = estimate_from_g_samples(model, &g_samples)?;
    Ok((estimate, realizations))
}
