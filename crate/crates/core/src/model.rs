//! State dynamics, the full game model, and the builtin catalog used by the
//! declarative experiment format.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::payoff::PayoffBundle;
use crate::risk::RiskFunction;
use crate::util::edit_distance;

/// Drift and volatility of the 1-D state diffusion `dX = mu dt + vol dW`.
#[derive(Clone)]
pub enum Dynamics {
    /// `mu(t,x) = drift`, `vol(t,x) = vol` (constants).
    Arithmetic { drift: f64, vol: f64 },
    /// `mu(t,x) = drift * x`, `vol(t,x) = vol * x`.
    Geometric { drift: f64, vol: f64 },
    Custom {
        drift: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
        vol: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    },
}

impl std::fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Dynamics::Arithmetic { drift, vol } => write!(f, "Arithmetic({drift}, {vol})"),
            Dynamics::Geometric { drift, vol } => write!(f, "Geometric({drift}, {vol})"),
            Dynamics::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Dynamics {
    pub fn frozen() -> Self {
        Dynamics::Arithmetic { drift: 0.0, vol: 0.0 }
    }

    pub fn drift(&self, t: f64, x: f64) -> f64 {
        match self {
            Dynamics::Arithmetic { drift, .. } => *drift,
            Dynamics::Geometric { drift, .. } => drift * x,
            Dynamics::Custom { drift, .. } => drift(t, x),
        }
    }

    pub fn vol(&self, t: f64, x: f64) -> f64 {
        match self {
            Dynamics::Arithmetic { vol, .. } => *vol,
            Dynamics::Geometric { vol, .. } => vol * x,
            Dynamics::Custom { vol, .. } => vol(t, x),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Dynamics::Arithmetic { vol, .. } => *vol == 0.0,
            Dynamics::Geometric { vol, .. } => *vol == 0.0,
            Dynamics::Custom { .. } => false,
        }
    }
}

/// One game instance: state dynamics, payoffs, criterion and the two
/// intervention intensities.
#[derive(Clone, Debug)]
pub struct MarkovModel {
    pub dynamics: Dynamics,
    pub initial_state: f64,
    pub bundle: PayoffBundle,
    pub risk: RiskFunction,
    /// Signal intensity of the minimizing player (stream 1).
    pub lambda1: f64,
    /// Signal intensity of the maximizing player (stream 2).
    pub lambda2: f64,
}

impl MarkovModel {
    pub fn validate(&self) -> Result<()> {
        self.bundle.validate()?;
        for (name, value) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if value < 0.0 || !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name: if name == "lambda1" { "lambda1" } else { "lambda2" },
                    message: format!("intensity must be >= 0, got {value}"),
                });
            }
        }
        if !self.initial_state.is_finite() {
            return Err(Error::InvalidParameter {
                name: "initial_state",
                message: "initial state must be finite".into(),
            });
        }
        Ok(())
    }

    /// True when payoffs and dynamics make the whole instance deterministic
    /// apart from the signal streams.
    pub fn is_deterministic(&self) -> bool {
        self.bundle.is_state_independent() && self.dynamics.is_deterministic()
    }
}

/// Euler scheme for the state diffusion on a uniform grid over `[0, horizon]`.
///
/// Returns the `n_steps + 1` node values including the initial state. Draws
/// one standard normal per step from `rng`, so a fixed generator state yields
/// a fixed path.
pub fn simulate_state_path<R: rand::Rng>(
    dynamics: &Dynamics,
    x0: f64,
    horizon: f64,
    n_steps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let dt = horizon / n_steps as f64;
    let sq_dt = dt.sqrt();
    let mut xs = Vec::with_capacity(n_steps + 1);
    let mut x = x0;
    xs.push(x);
    for k in 0..n_steps {
        let t = dt * k as f64;
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        x += dynamics.drift(t, x) * dt + dynamics.vol(t, x) * sq_dt * z;
        xs.push(x);
    }
    xs
}

/// Parameter of a builtin, for `list-builtins` output and diagnostics.
pub struct BuiltinParam {
    pub name: &'static str,
    pub description: &'static str,
}

/// One entry of the builtin catalog.
pub struct Builtin {
    pub name: &'static str,
    pub kind: &'static str,
    pub params: &'static [BuiltinParam],
    pub description: &'static str,
}

pub const PAYOFF_BUILTINS: &[Builtin] = &[
    Builtin {
        name: "constant",
        kind: "payoff",
        params: &[BuiltinParam { name: "value", description: "the constant payoff level" }],
        description: "constant payoff: value",
    },
    Builtin {
        name: "affine",
        kind: "payoff",
        params: &[
            BuiltinParam { name: "intercept", description: "payoff at x = 0" },
            BuiltinParam { name: "slope", description: "payoff change per unit of state" },
        ],
        description: "affine payoff: intercept + slope * x",
    },
    Builtin {
        name: "call",
        kind: "payoff",
        params: &[
            BuiltinParam { name: "scale", description: "multiplier on the positive part" },
            BuiltinParam { name: "strike", description: "kink location" },
            BuiltinParam { name: "offset", description: "additive shift" },
        ],
        description: "call-style payoff: scale * max(x - strike, 0) + offset",
    },
    Builtin {
        name: "put",
        kind: "payoff",
        params: &[
            BuiltinParam { name: "scale", description: "multiplier on the positive part" },
            BuiltinParam { name: "strike", description: "kink location" },
            BuiltinParam { name: "offset", description: "additive shift" },
        ],
        description: "put-style payoff: scale * max(strike - x, 0) + offset",
    },
];

pub const DYNAMICS_BUILTINS: &[Builtin] = &[
    Builtin {
        name: "arithmetic",
        kind: "dynamics",
        params: &[
            BuiltinParam { name: "drift", description: "constant drift" },
            BuiltinParam { name: "vol", description: "constant volatility (>= 0)" },
        ],
        description: "arithmetic diffusion: dX = drift dt + vol dW",
    },
    Builtin {
        name: "geometric",
        kind: "dynamics",
        params: &[
            BuiltinParam { name: "drift", description: "proportional drift" },
            BuiltinParam { name: "vol", description: "proportional volatility (>= 0)" },
        ],
        description: "geometric diffusion: dX = drift X dt + vol X dW",
    },
];

pub const RISK_BUILTINS: &[Builtin] = &[
    Builtin {
        name: "identity",
        kind: "risk",
        params: &[],
        description: "risk-neutral criterion g(x) = x",
    },
    Builtin {
        name: "exponential",
        kind: "risk",
        params: &[BuiltinParam {
            name: "gamma",
            description: "absolute risk aversion (> 0)",
        }],
        description: "exponential criterion g(x) = -exp(-gamma x)",
    },
];

/// Closest catalog name of the given kind, for "did you mean" messages.
pub fn nearest_builtin(name: &str, kind: &str) -> Option<&'static str> {
    let pool: &[Builtin] = match kind {
        "payoff" => PAYOFF_BUILTINS,
        "dynamics" => DYNAMICS_BUILTINS,
        "risk" => RISK_BUILTINS,
        _ => return None,
    };
    if let Some(b) = pool.iter().find(|b| b.name.starts_with(name)) {
        return Some(b.name);
    }
    pool.iter()
        .map(|b| (edit_distance(name, b.name), b.name))
        .min_by_key(|(d, _)| *d)
        .map(|(_, n)| n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_contains_constant() {
        assert!(PAYOFF_BUILTINS.iter().any(|b| b.name == "constant"));
    }

    #[test]
    fn nearest_builtin_suggests() {
        assert_eq!(nearest_builtin("consant", "payoff"), Some("constant"));
        assert_eq!(nearest_builtin("geometrc", "dynamics"), Some("geometric"));
        assert_eq!(nearest_builtin("exp", "risk"), Some("exponential"));
    }
}
