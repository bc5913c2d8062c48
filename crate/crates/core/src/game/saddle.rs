//! Saddle-point deviation tests with common random numbers.
//!
//! For each sampled deviation the deviating player's estimate is compared
//! against the optimal pair on the same simulated inputs, so the margin's
//! Monte Carlo noise is the noise of a paired difference.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::MarkovModel;
use crate::rng::path_seed;
use crate::solver::ValueSurface;
use crate::util::{sample_cov, sample_std};

use super::{
    estimate_from_g_samples, optimal_policies, realize, simulate_inputs, McEstimate, Player,
    StoppingPolicy,
};

/// One deviation's margin against the optimal pair.
#[derive(Clone, Debug, Serialize)]
pub struct SaddleEntry {
    pub player: Player,
    pub deviation: String,
    pub value_optimal: f64,
    pub value_deviation: f64,
    /// Expected-nonnegative margin: `J(sigma*, tau*) - J(sigma*, tau_dev)`
    /// for player-2 deviations, `J(sigma_dev, tau*) - J(sigma*, tau*)` for
    /// player-1 deviations.
    pub margin: f64,
    /// Paired delta-method standard error of the margin.
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SaddleReport {
    pub optimal: McEstimate,
    pub entries: Vec<SaddleEntry>,
    pub sigmas: f64,
    pub pass: bool,
}

/// Delta-method margin and standard error for a paired comparison of two
/// estimates sharing random numbers.
fn paired_margin(
    model: &MarkovModel,
    g_a: &[f64],
    g_b: &[f64],
) -> Result<(McEstimate, McEstimate, f64, f64)> {
    let est_a = estimate_from_g_samples(model, g_a)?;
    let est_b = estimate_from_g_samples(model, g_b)?;
    let da = model.risk.derivative(est_a.value, None)?.abs();
    let db = model.risk.derivative(est_b.value, None)?.abs();
    let n = g_a.len() as f64;
    let mean_a = est_a.mean_g;
    let mean_b = est_b.mean_g;
    let var_a = sample_std(g_a, mean_a).powi(2);
    let var_b = sample_std(g_b, mean_b).powi(2);
    let cov = sample_cov(g_a, g_b, mean_a, mean_b);
    let var_margin = (var_a / (da * da) + var_b / (db * db) - 2.0 * cov / (da * db)) / n;
    Ok((est_a, est_b, est_a.value - est_b.value, var_margin.max(0.0).sqrt()))
}

/// Estimate the deviation inequalities around the optimal threshold pair.
///
/// Deviations must carry their player tag; each is run against the optimal
/// counterpart policy with common random numbers, and the margin is required
/// to have the saddle sign within `sigmas` combined standard errors.
pub fn saddle_check(
    model: &MarkovModel,
    surface: &ValueSurface,
    deviations: &[StoppingPolicy],
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    sigmas: f64,
) -> Result<SaddleReport> {
    if n_paths < 100 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            message: format!("saddle check needs at least 100 paths, got {n_paths}"),
        });
    }
    let (opt1, opt2) = optimal_policies(surface, &model.bundle)?;

    struct PathRow {
        g_opt: f64,
        g_dev: Vec<f64>,
    }

    let rows: Vec<Result<PathRow>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let inputs = simulate_inputs(model, n_steps, path_seed(seed, p as u64))?;
            let wrap = |payoff: f64, s: u64| -> Result<f64> {
                model
                    .risk
                    .apply(payoff)
                    .map_err(|e| Error::PathDomain { seed: s, source: Box::new(e) })
            };
            let opt = realize(model, Some(surface), &opt1, &opt2, &inputs)?;
            let g_opt = wrap(opt.payoff, inputs.seed)?;
            let mut g_dev = Vec::with_capacity(deviations.len());
            for dev in deviations {
                let real = match dev.player {
                    Player::One => realize(model, Some(surface), dev, &opt2, &inputs)?,
                    Player::Two => realize(model, Some(surface), &opt1, dev, &inputs)?,
                };
                g_dev.push(wrap(real.payoff, inputs.seed)?);
            }
            Ok(PathRow { g_opt, g_dev })
        })
        .collect();

    let mut g_opt = Vec::with_capacity(n_paths);
    let mut g_devs: Vec<Vec<f64>> = vec![Vec::with_capacity(n_paths); deviations.len()];
    for row in rows {
        let row = row?;
        g_opt.push(row.g_opt);
        for (d, g) in row.g_dev.into_iter().enumerate() {
            g_devs[d].push(g);
        }
    }

    let optimal = estimate_from_g_samples(model, &g_opt)?;
    let mut entries = Vec::with_capacity(deviations.len());
    for (dev, g_dev) in deviations.iter().zip(g_devs.iter()) {
        let (est_opt, est_dev, diff, stderr) = paired_margin(model, &g_opt, g_dev)?;
        // J(s*, t_dev) <= J(s*, t*) <= J(s_dev, t*).
        let margin = match dev.player {
            Player::Two => diff,
            Player::One => -diff,
        };
        let slack = sigmas * stderr + 1e-12 * est_opt.value.abs().max(1.0);
        entries.push(SaddleEntry {
            player: dev.player,
            deviation: dev.label(),
            value_optimal: est_opt.value,
            value_deviation: est_dev.value,
            margin,
            stderr,
            pass: margin >= -slack,
        });
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(SaddleReport {
        optimal,
        entries,
        sigmas,
        pass,
    })
}

/// Default deviation set: fixed-index rules 1..=k plus "never", per player.
pub fn default_deviations(per_player: usize) -> Vec<StoppingPolicy> {
    let mut out = Vec::new();
    for player in [Player::One, Player::Two] {
        for n in 1..per_player.max(1) {
            out.push(StoppingPolicy {
                player,
                rule: super::StopRule::FixedIndex(n),
            });
        }
        out.push(StoppingPolicy {
            player,
            rule: super::StopRule::Never,
        });
    }
    out
}
