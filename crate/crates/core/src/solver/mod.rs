//! Backward solvers for the characterizing equation in three regimes:
//! deterministic-coefficient ODE (RK4), 1-D Markovian explicit finite
//! differences, and least-squares regression Monte Carlo.
//!
//! All three solve the same penalized terminal-value problem; the transformed
//! route works in auxiliary coordinates with the Lipschitz driver
//! `-l1 (q - Ubar)^+ + l2 (Lbar - q)^+ - r q`, while the two derived routes
//! solve directly in raw payoff coordinates: the risk-neutral form (identity
//! criterion) and the exponential-utility form with its quadratic gradient
//! term. Cross-checking the routes against the pointwise pullback is the
//! purpose of the `colehopf` check.

pub mod mc;
mod ode;
mod pde;

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::MarkovModel;
use crate::payoff::{Obstacle, PayoffBundle};
use crate::risk::RiskFunction;

pub use mc::{solve_regression_mc, DegreeReduction, McSolveResult};

/// Penalization driver of the transformed equation:
/// `-l1 (q - ubar)^+ + l2 (lbar - q)^+ - r q`.
pub fn driver(q: f64, ubar: f64, lbar: f64, lambda1: f64, lambda2: f64, r: f64) -> f64 {
    -lambda1 * (q - ubar).max(0.0) + lambda2 * (lbar - q).max(0.0) - r * q
}

/// Numerical backend selection.
#[derive(Clone, Copy, Debug)]
pub enum SolveMode {
    /// Runge-Kutta 4 on deterministic coefficients.
    Ode { n_t: usize },
    /// Explicit finite differences on a uniform `(t, x)` grid.
    Pde {
        n_t: usize,
        n_x: usize,
        x_min: f64,
        x_max: f64,
    },
}

/// Which equation a backward sweep integrates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum EquationKind {
    /// Auxiliary coordinates; any criterion.
    Transformed,
    /// Raw coordinates with identity criterion (running payoff as source).
    RiskNeutral,
    /// Raw coordinates with exponential criterion; quadratic gradient term.
    ExpQuadratic { gamma: f64 },
}

impl EquationKind {
    /// Driver value at `(t, q)` given the obstacle levels in the equation's
    /// own coordinates, the running payoff `f_val` and the gradient `z`
    /// (raw-coordinate routes only).
    pub(crate) fn driver(
        &self,
        t: f64,
        q: f64,
        z: f64,
        upper: f64,
        lower: f64,
        f_val: f64,
        lambda1: f64,
        lambda2: f64,
        r: f64,
    ) -> Result<f64> {
        match *self {
            EquationKind::Transformed => Ok(driver(q, upper, lower, lambda1, lambda2, r)),
            EquationKind::RiskNeutral => {
                Ok(f_val - lambda1 * (q - upper).max(0.0) + lambda2 * (lower - q).max(0.0) - r * q)
            }
            EquationKind::ExpQuadratic { gamma } => {
                let disc = (-r * t).exp();
                let grow = (r * t).exp();
                let e_up = gamma * disc * (q - upper);
                let e_lo = gamma * disc * (q - lower);
                let max_exp = e_up.abs().max(e_lo.abs());
                if max_exp > 700.0 {
                    return Err(Error::Overflow { exponent: max_exp });
                }
                let pen_up = (lambda1 / gamma) * grow * (e_up.exp() - 1.0).max(0.0);
                let pen_lo = (lambda2 / gamma) * grow * (1.0 - e_lo.exp()).max(0.0);
                Ok(f_val - pen_up + pen_lo - r * q - 0.5 * gamma * disc * z * z)
            }
        }
    }

    pub(crate) fn uses_gradient(&self) -> bool {
        matches!(self, EquationKind::ExpQuadratic { .. })
    }
}

/// Solved field on a uniform grid: the solver-coordinate value `qbar`, the
/// martingale integrand `zbar` (volatility times the state gradient of the
/// solved field; identically zero in ODE mode) and the raw game value `q`.
#[derive(Clone, Debug)]
pub struct ValueSurface {
    pub times: Vec<f64>,
    /// State grid; `None` for deterministic-coefficient solves.
    pub states: Option<Vec<f64>>,
    /// State reported in the CSV `x` column when no state grid exists.
    pub initial_state: f64,
    /// Row-major over `(t, x)`: auxiliary-coordinate value.
    pub qbar: Vec<f64>,
    /// Row-major over `(t, x)`: martingale integrand of the solved equation.
    pub zbar: Vec<f64>,
    /// Row-major over `(t, x)`: raw game value.
    pub q: Vec<f64>,
}

impl ValueSurface {
    pub fn n_t(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub(crate) fn cols(&self) -> usize {
        self.states.as_ref().map_or(1, |s| s.len())
    }

    #[inline]
    pub(crate) fn node(&self, ti: usize, xi: usize) -> usize {
        ti * self.cols() + xi
    }

    pub fn qbar_node(&self, ti: usize, xi: usize) -> f64 {
        self.qbar[self.node(ti, xi)]
    }

    pub fn q_node(&self, ti: usize, xi: usize) -> f64 {
        self.q[self.node(ti, xi)]
    }

    /// Bilinear interpolation of `qbar`; `t` past the horizon reads the
    /// terminal slice, `x` outside the grid clamps to the boundary and bumps
    /// `clamped`.
    pub fn interp_qbar(&self, t: f64, x: f64, clamped: &mut u64) -> f64 {
        self.interp(&self.qbar, t, x, clamped)
    }

    /// Bilinear interpolation of the raw value field.
    pub fn interp_q(&self, t: f64, x: f64, clamped: &mut u64) -> f64 {
        self.interp(&self.q, t, x, clamped)
    }

    fn interp(&self, field: &[f64], t: f64, x: f64, clamped: &mut u64) -> f64 {
        let n_t = self.n_t();
        let horizon = self.horizon();
        let tt = t.clamp(0.0, horizon);
        let ft = tt / horizon * n_t as f64;
        let ti = (ft.floor() as usize).min(n_t.saturating_sub(1));
        let wt = (ft - ti as f64).clamp(0.0, 1.0);
        match &self.states {
            None => {
                let a = field[self.node(ti, 0)];
                let b = field[self.node(ti + 1, 0)];
                a + wt * (b - a)
            }
            Some(states) => {
                let n_x = states.len() - 1;
                let (x_min, x_max) = (states[0], states[n_x]);
                let xx = if x < x_min || x > x_max {
                    *clamped += 1;
                    x.clamp(x_min, x_max)
                } else {
                    x
                };
                let fx = (xx - x_min) / (x_max - x_min) * n_x as f64;
                let xi = (fx.floor() as usize).min(n_x - 1);
                let wx = (fx - xi as f64).clamp(0.0, 1.0);
                let v00 = field[self.node(ti, xi)];
                let v01 = field[self.node(ti, xi + 1)];
                let v10 = field[self.node(ti + 1, xi)];
                let v11 = field[self.node(ti + 1, xi + 1)];
                let a = v00 + wx * (v01 - v00);
                let b = v10 + wx * (v11 - v10);
                a + wt * (b - a)
            }
        }
    }

    /// Raw game value at `(0, x0)` with `x0` the recorded initial state.
    pub fn value_at_initial(&self) -> f64 {
        let mut clamps = 0;
        self.interp_q(0.0, self.initial_state, &mut clamps)
    }

    /// Auxiliary-coordinate value at `(0, x0)`.
    pub fn qbar_at_initial(&self) -> f64 {
        let mut clamps = 0;
        self.interp_qbar(0.0, self.initial_state, &mut clamps)
    }

    /// Largest absolute node difference between the raw value fields of two
    /// surfaces on matching grids.
    pub fn max_q_difference(&self, other: &ValueSurface) -> Result<f64> {
        if self.times.len() != other.times.len() || self.cols() != other.cols() {
            return Err(Error::SurfaceMismatch(format!(
                "grid shapes differ: {}x{} vs {}x{}",
                self.times.len(),
                self.cols(),
                other.times.len(),
                other.cols()
            )));
        }
        Ok(self
            .q
            .iter()
            .zip(other.q.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// CSV rows `t,x,qbar,zbar,q`, row-major over `(t, x)`, 17 significant
    /// digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x,qbar,zbar,q")?;
        let cols = self.cols();
        for (ti, &t) in self.times.iter().enumerate() {
            for xi in 0..cols {
                let x = match &self.states {
                    Some(states) => states[xi],
                    None => self.initial_state,
                };
                let k = ti * cols + xi;
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    t, x, self.qbar[k], self.zbar[k], self.q[k]
                )?;
            }
        }
        Ok(())
    }

    fn assert_finite(&self) -> Result<()> {
        for (name, field) in [("qbar", &self.qbar), ("zbar", &self.zbar), ("q", &self.q)] {
            if let Some(pos) = field.iter().position(|v| !v.is_finite()) {
                let cols = self.cols();
                let ti = pos / cols;
                let xi = pos % cols;
                return Err(Error::NonFinite {
                    what: if name == "qbar" {
                        "qbar"
                    } else if name == "zbar" {
                        "zbar"
                    } else {
                        "q"
                    },
                    t: self.times[ti],
                    x: self
                        .states
                        .as_ref()
                        .map_or(self.initial_state, |s| s[xi]),
                });
            }
        }
        Ok(())
    }
}

/// Precomputed payoff arrays on a solve grid, in the coordinates used by the
/// equation kind (auxiliary for the transformed route, raw otherwise).
pub(crate) struct GridArrays {
    /// `int_0^{t_k} e^{-ru} f(u) du` per time node.
    pub f_prefix: Vec<f64>,
    /// Row-major (t, x).
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    /// One entry per state node.
    pub terminal: Vec<f64>,
    /// Running payoff `f(t_k)` per time node (raw routes).
    pub running: Vec<f64>,
}

/// Trapezoid prefix of `e^{-ru} f(u)` over `times` (running payoff must be
/// state-independent; the state argument is a placeholder).
pub(crate) fn running_prefix(bundle: &PayoffBundle, times: &[f64], x_dummy: f64) -> Vec<f64> {
    let r = bundle.discount_rate;
    let mut prefix = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut prev_t = times[0];
    let mut prev_v = (-r * prev_t).exp() * bundle.running.eval(prev_t, x_dummy);
    prefix.push(acc);
    for &t in &times[1..] {
        let v = (-r * t).exp() * bundle.running.eval(t, x_dummy);
        acc += 0.5 * (prev_v + v) * (t - prev_t);
        prefix.push(acc);
        prev_t = t;
        prev_v = v;
    }
    prefix
}

pub(crate) fn build_grid_arrays(
    model: &MarkovModel,
    kind: EquationKind,
    times: &[f64],
    states: &[f64],
) -> Result<GridArrays> {
    let bundle = &model.bundle;
    if !bundle.running.is_state_independent() {
        return Err(Error::Mode(
            "grid solvers require a state-independent running payoff".into(),
        ));
    }
    let r = bundle.discount_rate;
    let horizon = bundle.horizon;
    let f_prefix = running_prefix(bundle, times, model.initial_state);
    let running: Vec<f64> = times
        .iter()
        .map(|&t| bundle.running.eval(t, model.initial_state))
        .collect();

    let n_cols = states.len();
    let mut upper = Vec::with_capacity(times.len() * n_cols);
    let mut lower = Vec::with_capacity(times.len() * n_cols);
    let eval = |which: Obstacle, t: f64, x: f64, f_acc: f64| -> Result<f64> {
        let raw = bundle.obstacle(which).eval(t, x);
        if !raw.is_finite() {
            return Err(Error::NonFinite { what: "payoff", t, x });
        }
        match kind {
            EquationKind::Transformed => {
                let discounted = (-r * t).exp() * raw + f_acc;
                Ok((r * t).exp() * model.risk.apply(discounted)?)
            }
            _ => Ok(raw),
        }
    };
    for (ti, &t) in times.iter().enumerate() {
        for &x in states {
            upper.push(eval(Obstacle::Upper, t, x, f_prefix[ti])?);
            lower.push(eval(Obstacle::Lower, t, x, f_prefix[ti])?);
        }
    }
    let f_end = *f_prefix.last().unwrap();
    let mut terminal = Vec::with_capacity(n_cols);
    for &x in states {
        terminal.push(eval(Obstacle::Terminal, horizon, x, f_end)?);
    }
    Ok(GridArrays {
        f_prefix,
        upper,
        lower,
        terminal,
        running,
    })
}

/// Fill the `q`/`qbar` complement of a freshly swept surface.
///
/// The transformed route pulls `qbar` back to raw values; the raw routes push
/// their solution forward through the criterion. Both directions use the
/// deterministic running-payoff prefix of the solve grid.
pub(crate) fn complete_surface(
    surface: &mut ValueSurface,
    model: &MarkovModel,
    kind: EquationKind,
    f_prefix: &[f64],
) -> Result<()> {
    let r = model.bundle.discount_rate;
    let cols = surface.cols();
    match kind {
        EquationKind::Transformed => {
            surface.q = vec![0.0; surface.qbar.len()];
            for ti in 0..surface.times.len() {
                let t = surface.times[ti];
                let grow = (r * t).exp();
                let disc = (-r * t).exp();
                for xi in 0..cols {
                    let k = ti * cols + xi;
                    let pulled = model.risk.invert(disc * surface.qbar[k])?;
                    surface.q[k] = grow * (pulled - f_prefix[ti]);
                }
            }
        }
        EquationKind::RiskNeutral | EquationKind::ExpQuadratic { .. } => {
            surface.qbar = vec![0.0; surface.q.len()];
            for ti in 0..surface.times.len() {
                let t = surface.times[ti];
                let grow = (r * t).exp();
                let disc = (-r * t).exp();
                for xi in 0..cols {
                    let k = ti * cols + xi;
                    let discounted = disc * surface.q[k] + f_prefix[ti];
                    surface.qbar[k] = grow * model.risk.apply(discounted)?;
                }
            }
        }
    }
    surface.assert_finite()
}

/// Solve the transformed equation (any criterion) with the chosen backend.
pub fn solve(model: &MarkovModel, mode: SolveMode) -> Result<ValueSurface> {
    solve_kind(model, mode, EquationKind::Transformed)
}

/// RK4 backward integration of the transformed equation on deterministic
/// coefficients.
pub fn solve_ode(model: &MarkovModel, n_t: usize) -> Result<ValueSurface> {
    solve(model, SolveMode::Ode { n_t })
}

/// Explicit finite-difference sweep of the transformed equation on a 1-D
/// Markovian state.
pub fn solve_pde(
    model: &MarkovModel,
    n_t: usize,
    n_x: usize,
    x_min: f64,
    x_max: f64,
) -> Result<ValueSurface> {
    solve(model, SolveMode::Pde { n_t, n_x, x_min, x_max })
}

/// Direct solve of the penalized double-obstacle equation in raw payoff
/// coordinates; requires the identity criterion.
pub fn solve_risk_neutral(model: &MarkovModel, mode: SolveMode) -> Result<ValueSurface> {
    match model.risk {
        RiskFunction::Identity => solve_kind(model, mode, EquationKind::RiskNeutral),
        _ => Err(Error::Mode(
            "the risk-neutral equation requires the identity criterion".into(),
        )),
    }
}

/// Direct solve of the exponential-utility equation with its quadratic
/// gradient term; requires the exponential criterion.
pub fn solve_exponential_quadratic(model: &MarkovModel, mode: SolveMode) -> Result<ValueSurface> {
    match model.risk {
        RiskFunction::Exponential { gamma } => {
            solve_kind(model, mode, EquationKind::ExpQuadratic { gamma })
        }
        _ => Err(Error::Mode(
            "the exponential-quadratic equation requires the exponential criterion".into(),
        )),
    }
}

fn solve_kind(model: &MarkovModel, mode: SolveMode, kind: EquationKind) -> Result<ValueSurface> {
    model.validate()?;
    match mode {
        SolveMode::Ode { n_t } => ode::sweep(model, n_t, kind),
        SolveMode::Pde {
            n_t,
            n_x,
            x_min,
            x_max,
        } => pde::sweep(model, n_t, n_x, x_min, x_max, kind),
    }
}
