//! Explicit finite-difference backward sweep for the 1-D Markovian case.
//!
//! First-order explicit Euler in time, central differences in space. The
//! boundary model is linearity of the raw game value: ghost nodes are
//! extrapolated affinely in raw payoff coordinates and mapped into the
//! equation's own coordinates, so the transformed and raw routes impose the
//! same far-field behavior. For raw-coordinate solves this reduces exactly to
//! the usual zero-second-derivative extrapolation. The diffusive stability
//! bound `dt <= dx^2 / max(vol^2)` is enforced up front and violations are
//! refused with the required number of time steps.

use crate::error::{Error, Result};
use crate::model::MarkovModel;
use crate::solver::{build_grid_arrays, complete_surface, EquationKind, GridArrays, ValueSurface};

pub(crate) fn sweep(
    model: &MarkovModel,
    n_t: usize,
    n_x: usize,
    x_min: f64,
    x_max: f64,
    kind: EquationKind,
) -> Result<ValueSurface> {
    if n_t < 1 {
        return Err(Error::InvalidParameter {
            name: "n_t",
            message: "PDE mode needs at least one time step".into(),
        });
    }
    if n_x < 4 {
        return Err(Error::InvalidParameter {
            name: "n_x",
            message: format!("PDE mode needs at least 4 state intervals, got {n_x}"),
        });
    }
    if !(x_min < x_max) {
        return Err(Error::InvalidParameter {
            name: "x_min",
            message: format!("state interval [{x_min}, {x_max}] is empty"),
        });
    }
    if model.initial_state < x_min || model.initial_state > x_max {
        return Err(Error::SurfaceMismatch(format!(
            "initial state {} outside the grid [{x_min}, {x_max}]",
            model.initial_state
        )));
    }

    let horizon = model.bundle.horizon;
    let r = model.bundle.discount_rate;
    let (l1, l2) = (model.lambda1, model.lambda2);
    let dt = horizon / n_t as f64;
    let dx = (x_max - x_min) / n_x as f64;

    let times: Vec<f64> = (0..=n_t).map(|k| horizon * k as f64 / n_t as f64).collect();
    let states: Vec<f64> = (0..=n_x).map(|i| x_min + dx * i as f64).collect();

    // Diffusive CFL guard over the whole grid.
    let mut max_vol_sq = 0.0f64;
    for &t in &times {
        for &x in &states {
            let v = model.dynamics.vol(t, x);
            if !v.is_finite() {
                return Err(Error::NonFinite { what: "volatility", t, x });
            }
            max_vol_sq = max_vol_sq.max(v * v);
        }
    }
    if max_vol_sq > 0.0 {
        let limit = dx * dx / max_vol_sq;
        if dt > limit {
            return Err(Error::CflViolation {
                dt,
                limit,
                required_n_t: (horizon / limit).ceil() as usize,
            });
        }
    }

    let arrays = build_grid_arrays(model, kind, &times, &states)?;
    let cols = n_x + 1;

    let mut qfield = vec![0.0f64; (n_t + 1) * cols];
    qfield[n_t * cols..].copy_from_slice(&arrays.terminal);

    let needs_z = kind.uses_gradient();
    let mut next = vec![0.0f64; cols];
    for k in (0..n_t).rev() {
        let t_src = times[k + 1];
        let row_src = k + 1;
        let cur = &qfield[row_src * cols..(row_src + 1) * cols];
        let (ghost_lo, ghost_hi) =
            ghost_values(model, kind, t_src, arrays.f_prefix[row_src], cur, n_x)?;
        for i in 0..cols {
            let x = states[i];
            let mu = model.dynamics.drift(t_src, x);
            let vol = model.dynamics.vol(t_src, x);
            let left = if i == 0 { ghost_lo } else { cur[i - 1] };
            let right = if i == n_x { ghost_hi } else { cur[i + 1] };
            let dq_dx = (right - left) / (2.0 * dx);
            let d2q_dx2 = (right - 2.0 * cur[i] + left) / (dx * dx);
            let z = if needs_z { vol * dq_dx } else { 0.0 };
            let src = node_driver(&arrays, kind, t_src, row_src, i, cols, cur[i], z, l1, l2, r)?;
            next[i] = cur[i] + dt * (mu * dq_dx + 0.5 * vol * vol * d2q_dx2 + src);
        }
        qfield[k * cols..(k + 1) * cols].copy_from_slice(&next);
    }

    // Martingale integrand: volatility times the state gradient, central in
    // the interior, ghost-extended at the boundaries.
    let mut zfield = vec![0.0f64; (n_t + 1) * cols];
    for k in 0..=n_t {
        let row = &qfield[k * cols..(k + 1) * cols];
        let (ghost_lo, ghost_hi) =
            ghost_values(model, kind, times[k], arrays.f_prefix[k], row, n_x)?;
        for i in 0..cols {
            let left = if i == 0 { ghost_lo } else { row[i - 1] };
            let right = if i == n_x { ghost_hi } else { row[i + 1] };
            let grad = (right - left) / (2.0 * dx);
            zfield[k * cols + i] = model.dynamics.vol(times[k], states[i]) * grad;
        }
    }

    let mut surface = ValueSurface {
        times,
        states: Some(states),
        initial_state: model.initial_state,
        qbar: Vec::new(),
        zbar: zfield,
        q: Vec::new(),
    };
    match kind {
        EquationKind::Transformed => surface.qbar = qfield,
        _ => surface.q = qfield,
    }
    complete_surface(&mut surface, model, kind, &arrays.f_prefix)?;
    Ok(surface)
}

/// Ghost values one node beyond each boundary, from affine extrapolation of
/// the raw game value. Raw-coordinate solves extrapolate their own field; the
/// transformed solve round-trips through the criterion so that both routes
/// share one boundary model.
fn ghost_values(
    model: &MarkovModel,
    kind: EquationKind,
    t: f64,
    f_acc: f64,
    slice: &[f64],
    n_x: usize,
) -> Result<(f64, f64)> {
    match kind {
        EquationKind::RiskNeutral | EquationKind::ExpQuadratic { .. } => Ok((
            2.0 * slice[0] - slice[1],
            2.0 * slice[n_x] - slice[n_x - 1],
        )),
        EquationKind::Transformed => {
            let r = model.bundle.discount_rate;
            let grow = (r * t).exp();
            let disc = (-r * t).exp();
            let pull = |qbar: f64| -> Result<f64> {
                Ok(grow * (model.risk.invert(disc * qbar)? - f_acc))
            };
            let push = |q: f64| -> Result<f64> {
                Ok(grow * model.risk.apply(disc * q + f_acc)?)
            };
            let lo = push(2.0 * pull(slice[0])? - pull(slice[1])?)?;
            let hi = push(2.0 * pull(slice[n_x])? - pull(slice[n_x - 1])?)?;
            Ok((lo, hi))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn node_driver(
    arrays: &GridArrays,
    kind: EquationKind,
    t: f64,
    row: usize,
    col: usize,
    cols: usize,
    q: f64,
    z: f64,
    l1: f64,
    l2: f64,
    r: f64,
) -> Result<f64> {
    let k = row * cols + col;
    kind.driver(
        t,
        q,
        z,
        arrays.upper[k],
        arrays.lower[k],
        arrays.running[row],
        l1,
        l2,
        r,
    )
}
