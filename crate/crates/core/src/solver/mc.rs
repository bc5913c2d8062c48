//! Least-squares regression Monte Carlo for the transformed equation.
//!
//! Euler-simulated state paths, then a backward recursion in which the
//! conditional expectation of the next value is fitted by polynomial least
//! squares in the state and the driver is integrated explicitly at the fitted
//! value. The per-path values keep their martingale increments, so the sample
//! standard error of the final mean is a genuine Monte Carlo error bar.
//!
//! Paths are simulated in parallel with per-path derived seeds; regressions
//! accumulate in fixed path order, so results are identical for a fixed seed
//! regardless of worker count.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{simulate_state_path, MarkovModel};
use crate::payoff::Obstacle;
use crate::rng::{path_seed, stream_rng, STREAM_STATE};
use crate::solver::{running_prefix, EquationKind};
use crate::util::{compensated_mean, standard_error};

/// One basis-degree reduction triggered by a rank-deficient regression.
#[derive(Clone, Copy, Debug)]
pub struct DegreeReduction {
    pub step: usize,
    pub from: usize,
    pub to: usize,
}

/// Regression Monte Carlo estimate of the transformed value at `(0, x0)`.
#[derive(Clone, Debug)]
pub struct McSolveResult {
    /// Auxiliary-coordinate value estimate.
    pub value: f64,
    /// Sample standard error of the estimate.
    pub stderr: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    /// Fitted coefficients per time step (step index ascending), in the
    /// scaled-monomial basis used at that step.
    pub coefficients: Vec<Vec<f64>>,
    /// Degree reductions applied along the recursion.
    pub reductions: Vec<DegreeReduction>,
}

impl McSolveResult {
    /// Raw game value at `(0, x0)`: the criterion pullback of `value`.
    pub fn raw_value(&self, risk: &crate::risk::RiskFunction) -> Result<f64> {
        risk.invert(self.value)
    }

    /// Delta-method standard error of [`McSolveResult::raw_value`].
    pub fn raw_stderr(&self, risk: &crate::risk::RiskFunction) -> Result<f64> {
        let v = self.raw_value(risk)?;
        Ok(self.stderr / risk.derivative(v, None)?.abs())
    }
}

/// Solve the transformed equation by regression Monte Carlo.
pub fn solve_regression_mc(
    model: &MarkovModel,
    n_t: usize,
    n_paths: usize,
    basis_degree: usize,
    seed: u64,
) -> Result<McSolveResult> {
    model.validate()?;
    if n_paths < 1000 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            message: format!("regression needs at least 1000 paths, got {n_paths}"),
        });
    }
    if n_t < 1 {
        return Err(Error::InvalidParameter {
            name: "n_t",
            message: "need at least one time step".into(),
        });
    }
    if basis_degree > 12 {
        return Err(Error::InvalidParameter {
            name: "basis_degree",
            message: format!("basis degree {basis_degree} is unreasonably large"),
        });
    }

    let bundle = &model.bundle;
    let horizon = bundle.horizon;
    let r = bundle.discount_rate;
    let dt = horizon / n_t as f64;
    let times: Vec<f64> = (0..=n_t).map(|k| horizon * k as f64 / n_t as f64).collect();
    let f_prefix = {
        if !bundle.running.is_state_independent() {
            return Err(Error::Mode(
                "regression Monte Carlo requires a state-independent running payoff".into(),
            ));
        }
        running_prefix(bundle, &times, model.initial_state)
    };

    // Paths, row-major (path, step).
    let stride = n_t + 1;
    let mut paths = vec![0.0f64; n_paths * stride];
    paths
        .par_chunks_mut(stride)
        .enumerate()
        .for_each(|(p, row)| {
            let mut rng = stream_rng(path_seed(seed, p as u64), STREAM_STATE);
            let xs =
                simulate_state_path(&model.dynamics, model.initial_state, horizon, n_t, &mut rng);
            row.copy_from_slice(&xs);
        });

    // Auxiliary-coordinate payoff transforms evaluated along the paths.
    let aux = |which: Obstacle, k: usize, x: f64| -> Result<f64> {
        let t = times[k];
        let raw = bundle.obstacle(which).eval(t, x);
        if !raw.is_finite() {
            return Err(Error::NonFinite { what: "payoff", t, x });
        }
        let discounted = (-r * t).exp() * raw + f_prefix[k];
        Ok((r * t).exp() * model.risk.apply(discounted)?)
    };

    let mut values = Vec::with_capacity(n_paths);
    for p in 0..n_paths {
        values.push(aux(Obstacle::Terminal, n_t, paths[p * stride + n_t])?);
    }

    let mut coefficients: Vec<Vec<f64>> = vec![Vec::new(); n_t];
    let mut reductions = Vec::new();
    let mut fitted = vec![0.0f64; n_paths];

    for k in (0..n_t).rev() {
        let col = |p: usize| paths[p * stride + k];

        // Scaled monomial basis in (x - mean)/std.
        let mean = {
            let mut acc = 0.0;
            for p in 0..n_paths {
                acc += col(p);
            }
            acc / n_paths as f64
        };
        let mut var = 0.0;
        for p in 0..n_paths {
            let d = col(p) - mean;
            var += d * d;
        }
        let std = (var / n_paths as f64).sqrt();
        let degenerate = std < 1e-12;
        let scale = if degenerate { 1.0 } else { std };

        let mut degree = if degenerate { 0 } else { basis_degree };
        if degenerate && basis_degree > 0 {
            reductions.push(DegreeReduction {
                step: k,
                from: basis_degree,
                to: 0,
            });
        }

        let coeffs = loop {
            let dim = degree + 1;
            let mut gram = DMatrix::<f64>::zeros(dim, dim);
            let mut rhs = DVector::<f64>::zeros(dim);
            let mut phi = vec![0.0f64; dim];
            for p in 0..n_paths {
                let u = (col(p) - mean) / scale;
                phi[0] = 1.0;
                for j in 1..dim {
                    phi[j] = phi[j - 1] * u;
                }
                for a in 0..dim {
                    for b in a..dim {
                        gram[(a, b)] += phi[a] * phi[b];
                    }
                    rhs[a] += phi[a] * values[p];
                }
            }
            for a in 0..dim {
                for b in 0..a {
                    gram[(a, b)] = gram[(b, a)];
                }
            }
            let svd = gram.clone().svd(true, true);
            let max_sv = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
            let rank = svd
                .singular_values
                .iter()
                .filter(|&&s| s > 1e-10 * max_sv)
                .count();
            if rank < dim && degree > 0 {
                reductions.push(DegreeReduction {
                    step: k,
                    from: degree,
                    to: degree - 1,
                });
                degree -= 1;
                continue;
            }
            break svd
                .solve(&rhs, 1e-12 * max_sv.max(1.0))
                .map_err(|e| Error::Mode(format!("regression solve failed: {e}")))?;
        };

        let dim = coeffs.len();
        for p in 0..n_paths {
            let u = (col(p) - mean) / scale;
            let mut acc = coeffs[dim - 1];
            for j in (0..dim - 1).rev() {
                acc = acc * u + coeffs[j];
            }
            fitted[p] = acc;
        }

        for p in 0..n_paths {
            let x = col(p);
            let ubar = aux(Obstacle::Upper, k, x)?;
            let lbar = aux(Obstacle::Lower, k, x)?;
            let d = EquationKind::Transformed.driver(
                times[k],
                fitted[p],
                0.0,
                ubar,
                lbar,
                0.0,
                model.lambda1,
                model.lambda2,
                r,
            )?;
            values[p] += dt * d;
        }
        coefficients[k] = coeffs.iter().copied().collect();
    }

    let value = compensated_mean(&values);
    let stderr = standard_error(&values, value);
    Ok(McSolveResult {
        value,
        stderr,
        n_paths,
        n_steps: n_t,
        coefficients,
        reductions,
    })
}
