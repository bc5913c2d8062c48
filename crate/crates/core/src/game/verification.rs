//! Dynamic-programming verifications on deterministic-coefficient instances:
//! the quadrature form of the recursive equation at merged signal times, and
//! Monte Carlo martingale tests of the stopped value sequence.
//!
//! Everything here works in criterion scale (`g` applied), where the stopped
//! value sequence is an ordinary (super/sub)martingale and sample means of
//! increments are the natural test statistic.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::MarkovModel;
use crate::payoff::Obstacle;
use crate::quad::{break_list, integrate_panels};
use crate::rng::path_seed;
use crate::signals::{merge, SignalStream, StreamId};
use crate::solver::{running_prefix, ValueSurface};
use crate::util::{compensated_mean, standard_error};

/// Time-indexed views of the discounted processes of a deterministic
/// instance, all in criterion scale:
/// `g(Q~_t) = e^{-rt} Qbar_t`, `g(U~_t) = e^{-rt} Ubar_t`, etc.
pub struct DiscountedView<'a> {
    model: &'a MarkovModel,
    surface: &'a ValueSurface,
    f_prefix: Vec<f64>,
}

impl<'a> DiscountedView<'a> {
    pub fn new(model: &'a MarkovModel, surface: &'a ValueSurface) -> Result<Self> {
        if !model.is_deterministic() {
            return Err(Error::Mode(
                "dynamic-programming verification requires deterministic coefficients".into(),
            ));
        }
        if (surface.horizon() - model.bundle.horizon).abs()
            > 1e-12 * model.bundle.horizon.max(1.0)
        {
            return Err(Error::SurfaceMismatch(format!(
                "surface horizon {} != model horizon {}",
                surface.horizon(),
                model.bundle.horizon
            )));
        }
        let f_prefix = running_prefix(&model.bundle, &surface.times, model.initial_state);
        Ok(DiscountedView {
            model,
            surface,
            f_prefix,
        })
    }

    fn running_at(&self, t: f64) -> f64 {
        // Partial trapezoid inside the surface's time cell containing t.
        let times = &self.surface.times;
        let horizon = self.model.bundle.horizon;
        let tt = t.clamp(0.0, horizon);
        let n_t = times.len() - 1;
        let ft = tt / horizon * n_t as f64;
        let k = (ft.floor() as usize).min(n_t - 1);
        let t0 = times[k];
        let r = self.model.bundle.discount_rate;
        let x0 = self.model.initial_state;
        let f = |u: f64| (-r * u).exp() * self.model.bundle.running.eval(u, x0);
        self.f_prefix[k] + 0.5 * (f(t0) + f(tt)) * (tt - t0)
    }

    /// `g(Q~_t) = e^{-r (t ^ T)} Qbar_{t ^ T}` read from the surface.
    pub fn g_qtilde(&self, t: f64) -> f64 {
        let horizon = self.model.bundle.horizon;
        let tt = t.min(horizon);
        let mut clamps = 0;
        let qbar = self.surface.interp_qbar(tt, self.model.initial_state, &mut clamps);
        (-self.model.bundle.discount_rate * tt).exp() * qbar
    }

    fn g_obstacle(&self, which: Obstacle, t: f64) -> Result<f64> {
        let bundle = &self.model.bundle;
        let t_eff = if which == Obstacle::Terminal { bundle.horizon } else { t };
        let raw = bundle.obstacle(which).eval(t_eff, self.model.initial_state);
        let discounted = (-bundle.discount_rate * t_eff).exp() * raw + self.running_at(t_eff);
        self.model.risk.apply(discounted)
    }

    /// `g(U~_t)`.
    pub fn g_utilde(&self, t: f64) -> Result<f64> {
        self.g_obstacle(Obstacle::Upper, t)
    }

    /// `g(L~_t)`.
    pub fn g_ltilde(&self, t: f64) -> Result<f64> {
        self.g_obstacle(Obstacle::Lower, t)
    }

    /// `g(xi~)`.
    pub fn g_xitilde(&self) -> Result<f64> {
        self.g_obstacle(Obstacle::Terminal, self.model.bundle.horizon)
    }

    /// Discounted value `Q~_t` in payoff scale.
    pub fn qtilde(&self, t: f64) -> Result<f64> {
        self.model.risk.invert(self.g_qtilde(t))
    }

    /// Stopped-event value in criterion scale: the terminal payoff past the
    /// horizon, otherwise `min` against the upper obstacle at a player-1
    /// event and `max` against the lower obstacle at a player-2 event.
    pub fn g_qhat(&self, t: f64, label: StreamId) -> Result<f64> {
        if t >= self.model.bundle.horizon {
            return self.g_xitilde();
        }
        let q = self.g_qtilde(t);
        Ok(match label {
            StreamId::One => q.min(self.g_utilde(t)?),
            StreamId::Two => q.max(self.g_ltilde(t)?),
        })
    }

    /// Stopped-event value in payoff scale.
    pub fn qhat(&self, t: f64, label: StreamId) -> Result<f64> {
        self.model.risk.invert(self.g_qhat(t, label)?)
    }

    /// Times in `(a, b)` where the value crosses an obstacle, located by
    /// bisection on the surface's interpolant within each grid cell.
    pub fn crossing_times(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        for which in [Obstacle::Upper, Obstacle::Lower] {
            let diff = |t: f64| -> Result<f64> {
                Ok(self.g_qtilde(t) - self.g_obstacle(which, t)?)
            };
            let times = &self.surface.times;
            for w in times.windows(2) {
                let (lo, hi) = (w[0].max(a), w[1].min(b));
                if lo >= hi {
                    continue;
                }
                let (mut t0, mut t1) = (lo, hi);
                let (d0, d1) = (diff(t0)?, diff(t1)?);
                if d0 == 0.0 {
                    out.push(t0);
                    continue;
                }
                if d0 * d1 >= 0.0 {
                    continue;
                }
                let mut s0 = d0.signum();
                for _ in 0..80 {
                    let mid = 0.5 * (t0 + t1);
                    let dm = diff(mid)?;
                    if dm == 0.0 {
                        t0 = mid;
                        t1 = mid;
                        break;
                    }
                    if dm.signum() == s0 {
                        t0 = mid;
                        s0 = dm.signum();
                    } else {
                        t1 = mid;
                    }
                }
                out.push(0.5 * (t0 + t1));
            }
        }
        out.sort_by(|p, q| p.partial_cmp(q).unwrap());
        Ok(out)
    }
}

/// Magnitude of the discounted payoffs in criterion scale over the surface's
/// time grid, used to scale residual tolerances.
pub fn payoff_scale(model: &MarkovModel, surface: &ValueSurface) -> Result<f64> {
    let view = DiscountedView::new(model, surface)?;
    let mut scale = view.g_xitilde()?.abs();
    for &t in &surface.times {
        let t = t.min(model.bundle.horizon);
        scale = scale.max(view.g_utilde(t)?.abs());
        scale = scale.max(view.g_ltilde(t)?.abs());
    }
    Ok(scale.max(1e-30))
}

/// Residual of the recursive equation at time `t` in criterion scale:
/// Gauss-Legendre evaluation of
/// `e^{-(l1+l2)(T-t)} g(xi~) + int_t^T e^{-(l1+l2)(s-t)}
///  [l1 min(g(U~_s), g(Q~_s)) + l2 max(g(L~_s), g(Q~_s))] ds  -  g(Q~_t)`,
/// with panels split where the value crosses an obstacle.
pub fn recursion_residual(
    model: &MarkovModel,
    surface: &ValueSurface,
    t: f64,
    quad_points: usize,
) -> Result<f64> {
    let horizon = model.bundle.horizon;
    if !(0.0..horizon).contains(&t) {
        return Err(Error::OutOfRange {
            what: "t",
            value: t,
            lo: 0.0,
            hi: horizon,
        });
    }
    let view = DiscountedView::new(model, surface)?;
    let total = model.lambda1 + model.lambda2;

    let crossings = view.crossing_times(t, horizon)?;
    let breaks = break_list(t, horizon, &crossings);

    let mut err: Option<Error> = None;
    let integrand = |s: f64| -> f64 {
        let inner = (|| -> Result<f64> {
            let gq = view.g_qtilde(s);
            let up = view.g_utilde(s)?;
            let lo = view.g_ltilde(s)?;
            Ok(model.lambda1 * gq.min(up) + model.lambda2 * gq.max(lo))
        })();
        match inner {
            Ok(v) => (-total * (s - t)).exp() * v,
            Err(e) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let integral = integrate_panels(integrand, &breaks, quad_points.max(2));
    if let Some(e) = err {
        return Err(e);
    }
    let rhs = (-total * (horizon - t)).exp() * view.g_xitilde()? + integral;
    Ok(rhs - view.g_qtilde(t))
}

/// Which martingale property a row tests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MartingaleVariant {
    /// Optimal pair: increments are zero in mean.
    Martingale,
    /// Optimal stop for player 1, fixed deviation for player 2: nonpositive.
    Supermartingale,
    /// Fixed deviation for player 1, optimal stop for player 2: nonnegative.
    Submartingale,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleEntry {
    pub variant: MartingaleVariant,
    /// Increment from merged event `m` to `m + 1`.
    pub m: usize,
    pub mean: f64,
    pub stderr: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    pub entries: Vec<MartingaleEntry>,
    pub n_samples: usize,
    pub sigmas: f64,
    pub pass: bool,
}

struct StopTimes {
    optimal1: f64,
    optimal2: f64,
    deviation1: f64,
    deviation2: f64,
}

fn threshold_stop(
    view: &DiscountedView,
    stream: &SignalStream,
    horizon: f64,
    player: StreamId,
) -> Result<f64> {
    let cap = stream.m_index(horizon)?;
    for n in 1..cap {
        let t = stream.arrival(n);
        let gq = view.g_qtilde(t);
        let hit = match player {
            StreamId::One => gq >= view.g_utilde(t)?,
            StreamId::Two => gq <= view.g_ltilde(t)?,
        };
        if hit {
            return Ok(t);
        }
    }
    Ok(stream.arrival(cap))
}

/// Monte Carlo test of the martingale / supermartingale / submartingale
/// properties of the stopped value sequence along merged events, in criterion
/// scale, averaging over the signal randomness with the deterministic state
/// frozen. Deviations are "never stop" for player 2 and "first arrival" for
/// player 1.
pub fn martingale_check(
    model: &MarkovModel,
    surface: &ValueSurface,
    k_max: usize,
    n_samples: usize,
    seed: u64,
    sigmas: f64,
) -> Result<MartingaleReport> {
    if k_max == 0 {
        return Err(Error::InvalidParameter {
            name: "k_max",
            message: "need at least one merged-event step".into(),
        });
    }
    let view = DiscountedView::new(model, surface)?;
    let horizon = model.bundle.horizon;

    // Per-sample stopped sequences for the three variants; the state is
    // deterministic so only the signal randomness is sampled.
    let increments: Vec<Result<Vec<[f64; 3]>>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let pseed = path_seed(seed, i as u64);
            let s1 = SignalStream::sample(model.lambda1, horizon, pseed, StreamId::One)?;
            let s2 = SignalStream::sample(model.lambda2, horizon, pseed, StreamId::Two)?;
            let merged = merge(&s1, &s2);
            let stops = StopTimes {
                optimal1: threshold_stop(&view, &s1, horizon, StreamId::One)?,
                optimal2: threshold_stop(&view, &s2, horizon, StreamId::Two)?,
                deviation1: s1.arrival(1.min(s1.m_index(horizon)?)),
                deviation2: s2.arrival(s2.m_index(horizon)?),
            };
            let pairs = [
                (stops.optimal1, stops.optimal2),
                (stops.optimal1, stops.deviation2),
                (stops.deviation1, stops.optimal2),
            ];
            let mut rows = Vec::with_capacity(k_max);
            let mut prev = [0.0f64; 3];
            for (v, &(sig, tau)) in pairs.iter().enumerate() {
                prev[v] = stopped_value(&view, &merged, 1, sig, tau)?;
            }
            for m in 1..=k_max {
                let mut row = [0.0f64; 3];
                for (v, &(sig, tau)) in pairs.iter().enumerate() {
                    let next = stopped_value(&view, &merged, m + 1, sig, tau)?;
                    row[v] = next - prev[v];
                    prev[v] = next;
                }
                rows.push(row);
            }
            Ok(rows)
        })
        .collect();

    let mut per_m: Vec<[Vec<f64>; 3]> = (0..k_max)
        .map(|_| [Vec::new(), Vec::new(), Vec::new()])
        .collect();
    for rows in increments {
        let rows = rows?;
        for (m, row) in rows.into_iter().enumerate() {
            for v in 0..3 {
                per_m[m][v].push(row[v]);
            }
        }
    }

    let scale = view.g_xitilde()?.abs().max(1.0);
    let eps = 1e-12 * scale;
    let variants = [
        MartingaleVariant::Martingale,
        MartingaleVariant::Supermartingale,
        MartingaleVariant::Submartingale,
    ];
    let mut entries = Vec::new();
    for (m, samples) in per_m.iter().enumerate() {
        for (v, variant) in variants.iter().enumerate() {
            let mean = compensated_mean(&samples[v]);
            let sem = standard_error(&samples[v], mean);
            let slack = sigmas * sem + eps;
            let pass = match variant {
                MartingaleVariant::Martingale => mean.abs() <= slack,
                MartingaleVariant::Supermartingale => mean <= slack,
                MartingaleVariant::Submartingale => mean >= -slack,
            };
            entries.push(MartingaleEntry {
                variant: *variant,
                m: m + 1,
                mean,
                stderr: sem,
                pass,
            });
        }
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(MartingaleReport {
        entries,
        n_samples,
        sigmas,
        pass,
    })
}

/// `g(Qhat)` at `theta_m ^ sigma ^ tau`: frozen at the first stop, otherwise
/// the merged event's own stopped value.
fn stopped_value(
    view: &DiscountedView,
    merged: &crate::signals::MergedSequence,
    m: usize,
    sigma: f64,
    tau: f64,
) -> Result<f64> {
    let rho = sigma.min(tau);
    let rho_label = if tau <= sigma { StreamId::Two } else { StreamId::One };
    let theta = merged.theta(m);
    if theta >= rho {
        view.g_qhat(rho, rho_label)
    } else {
        let event = merged.events[m - 1];
        view.g_qhat(event.time, event.label)
    }
}
