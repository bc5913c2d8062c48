//! Classical RK4 backward integration for deterministic coefficients.
//!
//! With state-independent payoffs the martingale term vanishes and the
//! equation reduces to a scalar terminal-value ODE `dq/dt = -D(t, q)`. The
//! stage evaluations land exactly on a half-step grid, so the payoff
//! transforms are precomputed there once.

use crate::error::{Error, Result};
use crate::model::MarkovModel;
use crate::solver::{build_grid_arrays, complete_surface, EquationKind, ValueSurface};

pub(crate) fn sweep(model: &MarkovModel, n_t: usize, kind: EquationKind) -> Result<ValueSurface> {
    if n_t < 10 {
        return Err(Error::InvalidParameter {
            name: "n_t",
            message: format!("ODE mode needs at least 10 time steps, got {n_t}"),
        });
    }
    if !model.bundle.is_state_independent() {
        return Err(Error::Mode(
            "ODE mode requires payoffs that depend on time only".into(),
        ));
    }

    let horizon = model.bundle.horizon;
    let r = model.bundle.discount_rate;
    let (l1, l2) = (model.lambda1, model.lambda2);
    let x0 = model.initial_state;

    // Half-step grid carrying the payoff transforms for the RK4 stages.
    let half: Vec<f64> = (0..=2 * n_t)
        .map(|j| horizon * j as f64 / (2 * n_t) as f64)
        .collect();
    let arrays = build_grid_arrays(model, kind, &half, &[x0])?;

    let rhs = |j: usize, q: f64| -> Result<f64> {
        // dq/dt = -driver; stage index j addresses the half grid.
        Ok(-kind.driver(
            half[j],
            q,
            0.0,
            arrays.upper[j],
            arrays.lower[j],
            arrays.running[j],
            l1,
            l2,
            r,
        )?)
    };

    let dt = horizon / n_t as f64;
    let h = -dt;
    let mut values = vec![0.0f64; n_t + 1];
    values[n_t] = arrays.terminal[0];
    let mut y = values[n_t];
    for k in (0..n_t).rev() {
        // Step from t_{k+1} down to t_k; mid stage at half node 2k+1.
        let j1 = 2 * (k + 1);
        let jm = 2 * k + 1;
        let j0 = 2 * k;
        let k1 = rhs(j1, y)?;
        let k2 = rhs(jm, y + 0.5 * h * k1)?;
        let k3 = rhs(jm, y + 0.5 * h * k2)?;
        let k4 = rhs(j0, y + h * k3)?;
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        values[k] = y;
    }

    let times: Vec<f64> = (0..=n_t).map(|k| half[2 * k]).collect();
    let f_prefix: Vec<f64> = (0..=n_t).map(|k| arrays.f_prefix[2 * k]).collect();

    let mut surface = ValueSurface {
        times,
        states: None,
        initial_state: x0,
        qbar: Vec::new(),
        zbar: vec![0.0; n_t + 1],
        q: Vec::new(),
    };
    match kind {
        EquationKind::Transformed => surface.qbar = values,
        _ => surface.q = values,
    }
    complete_surface(&mut surface, model, kind, &f_prefix)?;
    Ok(surface)
}
