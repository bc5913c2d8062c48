//! Risk-sensitive criterion functions and the nonlinear expectation
//! `g^{-1}(E[g(.)])`.
//!
//! A criterion is a strictly increasing scalar map `g`. Identity recovers the
//! risk-neutral mean; `g(x) = -exp(-gamma x)` gives the entropic certainty
//! equivalent with constant absolute risk aversion `gamma`. Custom criteria
//! supply the forward map (and optionally its inverse) together with a
//! validity interval; when no inverse is given it is recovered by bracketed
//! bisection, which strict monotonicity makes well defined.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::util::compensated_mean;

/// Inverse-domain cutoff for the exponential criterion: `g^{-1}(y)` requires
/// `y <= EXP_INVERSE_SUP` so that `ln(-y)` stays representable.
pub const EXP_INVERSE_SUP: f64 = -1e-300;

/// Absolute tolerance of the bisection fallback for custom inverses.
pub const BISECTION_TOL: f64 = 1e-12;

/// Scalar map used by custom criteria.
pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A strictly increasing risk-sensitivity function with its inverse.
#[derive(Clone)]
pub enum RiskFunction {
    /// `g(x) = x`: risk neutrality.
    Identity,
    /// `g(x) = -exp(-gamma x)`, `gamma > 0`.
    Exponential { gamma: f64 },
    /// User-supplied strictly increasing map on `domain`; `inverse` may be
    /// omitted, in which case bisection on `domain` is used.
    Custom {
        forward: ScalarMap,
        inverse: Option<ScalarMap>,
        domain: (f64, f64),
    },
}

impl std::fmt::Debug for RiskFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RiskFunction::Identity => write!(f, "Identity"),
            RiskFunction::Exponential { gamma } => write!(f, "Exponential({gamma})"),
            RiskFunction::Custom { domain, .. } => write!(f, "Custom(domain={domain:?})"),
        }
    }
}

impl RiskFunction {
    pub fn identity() -> Self {
        RiskFunction::Identity
    }

    pub fn exponential(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                message: format!("risk sensitivity must be positive and finite, got {gamma}"),
            });
        }
        Ok(RiskFunction::Exponential { gamma })
    }

    pub fn custom(forward: ScalarMap, inverse: Option<ScalarMap>, domain: (f64, f64)) -> Result<Self> {
        if !(domain.0 < domain.1) {
            return Err(Error::InvalidParameter {
                name: "domain",
                message: format!("empty validity interval [{}, {}]", domain.0, domain.1),
            });
        }
        Ok(RiskFunction::Custom {
            forward,
            inverse,
            domain,
        })
    }

    /// Validity interval of the forward map.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            RiskFunction::Identity | RiskFunction::Exponential { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            RiskFunction::Custom { domain, .. } => *domain,
        }
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if !x.is_finite() || x < lo || x > hi {
            return Err(Error::DomainViolation { value: x, lo, hi });
        }
        Ok(())
    }

    /// `g(x)`; errors when `x` leaves the validity interval.
    pub fn apply(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match self {
            RiskFunction::Identity => x,
            RiskFunction::Exponential { gamma } => -(-gamma * x).exp(),
            RiskFunction::Custom { forward, .. } => forward(x),
        })
    }

    /// `g^{-1}(y)`; errors when `y` leaves the image of the validity interval.
    pub fn invert(&self, y: f64) -> Result<f64> {
        match self {
            RiskFunction::Identity => {
                if !y.is_finite() {
                    return Err(Error::DomainViolation {
                        value: y,
                        lo: f64::NEG_INFINITY,
                        hi: f64::INFINITY,
                    });
                }
                Ok(y)
            }
            RiskFunction::Exponential { gamma } => {
                if !y.is_finite() || y > EXP_INVERSE_SUP {
                    return Err(Error::DomainViolation {
                        value: y,
                        lo: f64::NEG_INFINITY,
                        hi: EXP_INVERSE_SUP,
                    });
                }
                Ok(-(-y).ln() / gamma)
            }
            RiskFunction::Custom {
                forward,
                inverse,
                domain,
            } => {
                if let Some(inv) = inverse {
                    return Ok(inv(y));
                }
                bisect_inverse(forward, *domain, y)
            }
        }
    }

    /// First derivative `g'(x)`; closed form where available, central finite
    /// differences with step `fd_step` for custom criteria.
    pub fn derivative(&self, x: f64, fd_step: Option<f64>) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match self {
            RiskFunction::Identity => 1.0,
            RiskFunction::Exponential { gamma } => gamma * (-gamma * x).exp(),
            RiskFunction::Custom { forward, .. } => {
                let h = fd_step.unwrap_or(1e-6);
                (forward(x + h) - forward(x - h)) / (2.0 * h)
            }
        })
    }
}

fn bisect_inverse(forward: &ScalarMap, domain: (f64, f64), y: f64) -> Result<f64> {
    let (mut lo, mut hi) = domain;
    let (flo, fhi) = (forward(lo), forward(hi));
    if !y.is_finite() || y < flo || y > fhi {
        return Err(Error::DomainViolation {
            value: y,
            lo: flo,
            hi: fhi,
        });
    }
    for _ in 0..200 {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if forward(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nonlinear expectation `g^{-1}(mean of g(sample_i))`.
///
/// The mean is taken sequentially in sample order with compensated summation,
/// so the result is bitwise reproducible regardless of worker count.
pub fn nonlinear_expectation(g: &RiskFunction, samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::NoSamples);
    }
    let mut transformed = Vec::with_capacity(samples.len());
    for &s in samples {
        transformed.push(g.apply(s)?);
    }
    g.invert(compensated_mean(&transformed))
}

/// Arrow-Pratt coefficient of absolute risk aversion `-g''(x)/g'(x)`.
///
/// Closed form for the identity (0) and exponential (`gamma`) criteria;
/// second-order central differences with step `fd_step` otherwise.
pub fn arrow_pratt(g: &RiskFunction, x: f64, fd_step: Option<f64>) -> Result<f64> {
    match g {
        RiskFunction::Identity => {
            g.apply(x)?;
            Ok(0.0)
        }
        RiskFunction::Exponential { gamma } => {
            g.apply(x)?;
            Ok(*gamma)
        }
        RiskFunction::Custom { forward, domain, .. } => {
            let h = fd_step.unwrap_or(1e-5);
            let (lo, hi) = domain;
            if x - h < *lo || x + h > *hi {
                return Err(Error::DomainViolation {
                    value: x,
                    lo: *lo,
                    hi: *hi,
                });
            }
            let fp = (forward(x + h) - forward(x - h)) / (2.0 * h);
            let fpp = (forward(x + h) - 2.0 * forward(x) + forward(x - h)) / (h * h);
            if fp.abs() < 1e-12 {
                return Err(Error::DegenerateDerivative { x });
            }
            Ok(-fpp / fp)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_custom() -> RiskFunction {
        // Same map as Exponential { gamma: 1 } but supplied as a black box
        // without its inverse, to exercise the bisection path.
        RiskFunction::custom(Arc::new(|x: f64| -(-x).exp()), None, (-20.0, 20.0)).unwrap()
    }

    #[test]
    fn identity_reduces_to_arithmetic_mean() {
        let g = RiskFunction::identity();
        let samples = [1.0, 2.0, 3.0];
        assert_eq!(nonlinear_expectation(&g, &samples).unwrap(), 2.0);
        // Bit-for-bit equal to the compensated mean in the same order.
        let direct = compensated_mean(&samples);
        assert_eq!(nonlinear_expectation(&g, &samples).unwrap(), direct);
    }

    #[test]
    fn exponential_constant_samples_are_fixed_points() {
        let g = RiskFunction::exponential(1.0).unwrap();
        let v = nonlinear_expectation(&g, &[0.0, 0.0]).unwrap();
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn exponential_two_point_value() {
        // mean of g over {0, ln 2} is -(1 + 1/2)/2 = -0.75; pullback -ln(0.75).
        let g = RiskFunction::exponential(1.0).unwrap();
        let v = nonlinear_expectation(&g, &[0.0, 2.0f64.ln()]).unwrap();
        let expected = -(0.75f64.ln());
        assert!((v - expected).abs() < 1e-12, "v = {v}, expected {expected}");
        assert!((expected - 0.287682).abs() < 1e-6);
    }

    #[test]
    fn empty_sample_list_errors() {
        let g = RiskFunction::identity();
        let err = nonlinear_expectation(&g, &[]).unwrap_err();
        assert!(err.to_string().contains("no samples"));
    }

    #[test]
    fn domain_violation_names_value() {
        let g = exp_custom();
        let err = nonlinear_expectation(&g, &[0.0, 25.0]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("domain violation"), "{msg}");
        assert!(msg.contains("25"), "{msg}");
    }

    #[test]
    fn custom_inverse_by_bisection_round_trips() {
        let g = exp_custom();
        for &x in &[-5.0, -1.0, 0.0, 0.5, 3.0, 10.0] {
            let y = g.apply(x).unwrap();
            let back = g.invert(y).unwrap();
            assert!((back - x).abs() < 1e-9, "x = {x}, back = {back}");
        }
    }

    #[test]
    fn arrow_pratt_identity_is_zero() {
        let g = RiskFunction::identity();
        assert_eq!(arrow_pratt(&g, 5.0, None).unwrap(), 0.0);
    }

    #[test]
    fn arrow_pratt_exponential_is_gamma() {
        let g = RiskFunction::exponential(2.0).unwrap();
        assert_eq!(arrow_pratt(&g, -1.0, None).unwrap(), 2.0);
    }

    #[test]
    fn arrow_pratt_custom_matches_closed_form() {
        // g(x) = -exp(-x) has constant absolute risk aversion 1.
        let g = exp_custom();
        let v = arrow_pratt(&g, 0.0, Some(1e-5)).unwrap();
        assert!((v - 1.0).abs() < 1e-4, "v = {v}");
    }

    #[test]
    fn monotonicity_of_nonlinear_expectation() {
        let g = RiskFunction::exponential(0.7).unwrap();
        let a = [1.0, 2.0, 3.5, -0.5];
        let b = [0.5, 1.5, 3.5, -1.0]; // dominated elementwise
        let va = nonlinear_expectation(&g, &a).unwrap();
        let vb = nonlinear_expectation(&g, &b).unwrap();
        assert!(va >= vb);
    }

    #[test]
    fn constant_consistency() {
        let g = RiskFunction::exponential(2.5).unwrap();
        let c = 1.234567;
        let v = nonlinear_expectation(&g, &[c; 9]).unwrap();
        assert!((v - c).abs() < 1e-12);
    }

    #[test]
    fn exponential_inverse_domain_guard() {
        let g = RiskFunction::exponential(1.0).unwrap();
        assert!(g.invert(-1e-301).is_err());
        assert!(g.invert(0.5).is_err());
        assert!(g.invert(-1.0).unwrap().abs() < 1e-15);
    }
}
