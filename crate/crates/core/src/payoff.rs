//! Payoff data and the coordinate transforms between raw, discounted and
//! auxiliary payoffs.
//!
//! For a payoff process `h` in {lower obstacle L, upper obstacle U, terminal
//! xi} the three coordinate systems are
//!
//! * raw:        `h_t`,
//! * discounted: `h~_t = e^{-rt} h_t + int_0^t e^{-ru} f_u du`,
//! * auxiliary:  `h¯_t = e^{rt} g(h~_t)`,
//!
//! and the game value pulls back from auxiliary coordinates via
//! `Q_t = e^{r(t^T)} g^{-1}(e^{-r(t^T)} Qbar_t) - int_0^{t^T} e^{-r(u-t^T)} f_u du`.
//!
//! Payoff maps are pure functions of `(t, x)`; path dependence enters only
//! through the accumulated running-payoff integral, evaluated by the trapezoid
//! rule on the path's own time grid.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::risk::RiskFunction;

/// A payoff map `(t, x) -> value`. The named variants form the builtin
/// catalog exposed by the CLI; `Custom` is for library use and tests.
#[derive(Clone)]
pub enum PayoffMap {
    Constant(f64),
    /// `intercept + slope * x`
    Affine { intercept: f64, slope: f64 },
    /// `scale * max(x - strike, 0) + offset`
    Call { scale: f64, strike: f64, offset: f64 },
    /// `scale * max(strike - x, 0) + offset`
    Put { scale: f64, strike: f64, offset: f64 },
    Custom {
        map: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        state_dependent: bool,
    },
}

impl std::fmt::Debug for PayoffMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PayoffMap::Constant(c) => write!(f, "Constant({c})"),
            PayoffMap::Affine { intercept, slope } => write!(f, "Affine({intercept}, {slope})"),
            PayoffMap::Call { scale, strike, offset } => {
                write!(f, "Call({scale}, {strike}, {offset})")
            }
            PayoffMap::Put { scale, strike, offset } => {
                write!(f, "Put({scale}, {strike}, {offset})")
            }
            PayoffMap::Custom { state_dependent, .. } => {
                write!(f, "Custom(state_dependent={state_dependent})")
            }
        }
    }
}

impl PayoffMap {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            PayoffMap::Constant(c) => *c,
            PayoffMap::Affine { intercept, slope } => intercept + slope * x,
            PayoffMap::Call { scale, strike, offset } => scale * (x - strike).max(0.0) + offset,
            PayoffMap::Put { scale, strike, offset } => scale * (strike - x).max(0.0) + offset,
            PayoffMap::Custom { map, .. } => map(t, x),
        }
    }

    /// Whether the map is identically zero (fast path for running payoffs).
    pub fn is_zero(&self) -> bool {
        match self {
            PayoffMap::Constant(c) => *c == 0.0,
            PayoffMap::Affine { intercept, slope } => *intercept == 0.0 && *slope == 0.0,
            PayoffMap::Call { scale, offset, .. } | PayoffMap::Put { scale, offset, .. } => {
                *scale == 0.0 && *offset == 0.0
            }
            PayoffMap::Custom { .. } => false,
        }
    }

    /// Whether the map ignores the state argument.
    pub fn is_state_independent(&self) -> bool {
        match self {
            PayoffMap::Constant(_) => true,
            PayoffMap::Affine { slope, .. } => *slope == 0.0,
            PayoffMap::Call { scale, .. } | PayoffMap::Put { scale, .. } => *scale == 0.0,
            PayoffMap::Custom { state_dependent, .. } => !state_dependent,
        }
    }
}

/// Which payoff a transform addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Obstacle {
    /// Lower obstacle, paid when the maximizer stops first (or on a tie).
    Lower,
    /// Upper obstacle, paid when the minimizer stops strictly first.
    Upper,
    /// Terminal payoff, paid when nobody stops before the horizon.
    Terminal,
}

/// Discount rate, payoff maps and horizon of one game instance.
#[derive(Clone, Debug)]
pub struct PayoffBundle {
    /// Discount rate `r >= 0` (1/time).
    pub discount_rate: f64,
    /// Running payoff `f(t, x)` (payoff/time).
    pub running: PayoffMap,
    /// Lower obstacle `L(t, x)`.
    pub lower: PayoffMap,
    /// Upper obstacle `U(t, x)`; no ordering against `L` is assumed.
    pub upper: PayoffMap,
    /// Terminal payoff `xi(x)`, evaluated at `(T, x)`.
    pub terminal: PayoffMap,
    /// Deterministic finite horizon `T > 0`.
    pub horizon: f64,
}

impl PayoffBundle {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "horizon",
                message: format!("horizon must be positive and finite, got {}", self.horizon),
            });
        }
        if !(self.discount_rate >= 0.0) || !self.discount_rate.is_finite() {
            return Err(Error::InvalidParameter {
                name: "discount_rate",
                message: format!("discount rate must be >= 0, got {}", self.discount_rate),
            });
        }
        Ok(())
    }

    pub fn obstacle(&self, which: Obstacle) -> &PayoffMap {
        match which {
            Obstacle::Lower => &self.lower,
            Obstacle::Upper => &self.upper,
            Obstacle::Terminal => &self.terminal,
        }
    }

    /// True when every payoff map (including the running payoff) is a pure
    /// function of time.
    pub fn is_state_independent(&self) -> bool {
        self.running.is_state_independent()
            && self.lower.is_state_independent()
            && self.upper.is_state_independent()
            && self.terminal.is_state_independent()
    }
}

/// A state trajectory sampled on a strictly increasing time grid.
#[derive(Clone, Debug)]
pub struct StatePath {
    times: Vec<f64>,
    states: Vec<f64>,
}

impl StatePath {
    pub fn new(times: Vec<f64>, states: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() {
            return Err(Error::InvalidParameter {
                name: "path",
                message: format!(
                    "times/states must be equally long and non-empty ({} vs {})",
                    times.len(),
                    states.len()
                ),
            });
        }
        if !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter {
                name: "path",
                message: "path times must be strictly increasing".into(),
            });
        }
        Ok(StatePath { times, states })
    }

    /// Constant path `X_t = x0` on a uniform grid over `[0, t_end]`.
    pub fn constant(x0: f64, t_end: f64, n_steps: usize) -> Self {
        let n = n_steps.max(1);
        let times = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        let states = vec![x0; n + 1];
        StatePath { times, states }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Linear interpolation of the state at `t`, clamped to the path's span.
    pub fn state_at(&self, t: f64) -> f64 {
        if t <= self.times[0] {
            return self.states[0];
        }
        if t >= self.end_time() {
            return *self.states.last().unwrap();
        }
        let idx = self.times.partition_point(|&u| u <= t);
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let (x0, x1) = (self.states[idx - 1], self.states[idx]);
        let w = (t - t0) / (t1 - t0);
        x0 + w * (x1 - x0)
    }

    /// `int_0^t e^{-ru} f(u, X_u) du` by the trapezoid rule on the path grid,
    /// with a partial trapezoid for the final sub-interval.
    pub fn discounted_running_integral(&self, bundle: &PayoffBundle, t: f64) -> f64 {
        if bundle.running.is_zero() {
            return 0.0;
        }
        let r = bundle.discount_rate;
        let integrand =
            |u: f64, x: f64| -> f64 { (-r * u).exp() * bundle.running.eval(u, x) };
        let mut acc = 0.0;
        let mut prev_t = self.times[0];
        let mut prev_v = integrand(prev_t, self.states[0]);
        if t <= prev_t {
            return 0.0;
        }
        for i in 1..self.times.len() {
            let ti = self.times[i];
            if ti >= t {
                let xe = self.state_at(t);
                let ve = integrand(t, xe);
                acc += 0.5 * (prev_v + ve) * (t - prev_t);
                return acc;
            }
            let vi = integrand(ti, self.states[i]);
            acc += 0.5 * (prev_v + vi) * (ti - prev_t);
            prev_t = ti;
            prev_v = vi;
        }
        // t beyond the grid: integrate to the last node and extend flat.
        let xe = *self.states.last().unwrap();
        let ve = integrand(t, xe);
        acc + 0.5 * (prev_v + ve) * (t - prev_t)
    }
}

/// Discounted payoff `h~_t = e^{-rt} h_t + int_0^t e^{-ru} f_u du`.
///
/// For `which = Terminal` the evaluation time is forced to the horizon.
pub fn discounted_payoff(
    bundle: &PayoffBundle,
    which: Obstacle,
    t: f64,
    path: &StatePath,
) -> Result<f64> {
    let horizon = bundle.horizon;
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            lo: 0.0,
            hi: horizon,
        });
    }
    let t_eff = if which == Obstacle::Terminal { horizon } else { t };
    let x = path.state_at(t_eff);
    let h = bundle.obstacle(which).eval(t_eff, x);
    if !h.is_finite() {
        return Err(Error::NonFinite {
            what: "payoff",
            t: t_eff,
            x,
        });
    }
    let r = bundle.discount_rate;
    Ok((-r * t_eff).exp() * h + path.discounted_running_integral(bundle, t_eff))
}

/// Auxiliary payoff `h¯_t = e^{rt} g(h~_t)`.
pub fn auxiliary_payoff(
    g: &RiskFunction,
    bundle: &PayoffBundle,
    which: Obstacle,
    t: f64,
    path: &StatePath,
) -> Result<f64> {
    let t_eff = if which == Obstacle::Terminal { bundle.horizon } else { t };
    let discounted = discounted_payoff(bundle, which, t, path)?;
    Ok((bundle.discount_rate * t_eff).exp() * g.apply(discounted)?)
}

/// Pullback of an auxiliary-coordinate value to a raw game value:
/// `Q_t = e^{r(t^T)} g^{-1}(e^{-r(t^T)} qbar) - int_0^{t^T} e^{-r(u-t^T)} f_u du`.
pub fn value_from_qbar(
    g: &RiskFunction,
    bundle: &PayoffBundle,
    t: f64,
    qbar: f64,
    path: &StatePath,
) -> Result<f64> {
    let r = bundle.discount_rate;
    let t_eff = t.min(bundle.horizon);
    let discounted_value = g.invert((-r * t_eff).exp() * qbar)?;
    let running = path.discounted_running_integral(bundle, t_eff);
    Ok((r * t_eff).exp() * (discounted_value - running))
}
