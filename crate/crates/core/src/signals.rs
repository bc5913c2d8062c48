//! Poisson signal streams and their merged, labeled event sequence.
//!
//! Each player may stop only at the arrival times of their own stream. The
//! stream sampler keeps one arrival beyond the requested cap so that the first
//! arrival after the game horizon (the strategy cap `T_{M_i}`) always exists.
//! A zero-intensity stream never signals; its single sentinel arrival is the
//! largest finite time, which keeps all comparisons total without NaNs.

use std::io::Write;

use rand::Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Sentinel standing in for "+infinity": the largest finite time.
pub const SENTINEL_TIME: f64 = f64::MAX;

/// Whether a time value is the +infinity sentinel.
pub fn is_sentinel(t: f64) -> bool {
    t >= SENTINEL_TIME
}

/// Which player's stream an arrival belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StreamId {
    /// Minimizing player.
    One = 1,
    /// Maximizing player.
    Two = 2,
}

impl StreamId {
    pub fn label(self) -> u8 {
        self as u8
    }
}

/// Arrival times of one player's Poisson signal stream.
#[derive(Clone, Debug)]
pub struct SignalStream {
    pub intensity: f64,
    /// Strictly increasing arrivals, all > 0. The implicit convention
    /// `T_0 = 0` is not stored.
    pub arrivals: Vec<f64>,
    pub stream_id: StreamId,
}

impl SignalStream {
    /// Sample a stream of rate `intensity` with i.i.d. exponential gaps,
    /// truncated at the first arrival strictly beyond `horizon_cap`, which is
    /// retained. The generator is ChaCha8 addressed by `(seed, stream_id)`.
    pub fn sample(intensity: f64, horizon_cap: f64, seed: u64, id: StreamId) -> Result<Self> {
        if intensity < 0.0 || !intensity.is_finite() {
            return Err(Error::InvalidParameter {
                name: "intensity",
                message: format!("intensity must be >= 0, got {intensity}"),
            });
        }
        if !(horizon_cap > 0.0) {
            return Err(Error::InvalidParameter {
                name: "horizon_cap",
                message: format!("horizon cap must be positive, got {horizon_cap}"),
            });
        }
        if intensity == 0.0 {
            return Ok(SignalStream {
                intensity,
                arrivals: vec![SENTINEL_TIME],
                stream_id: id,
            });
        }
        let mut rng = stream_rng(seed, id.label() as u64);
        let exp = Exp::new(intensity).expect("positive rate");
        let mut arrivals = Vec::new();
        let mut t = 0.0f64;
        loop {
            t += rng.sample::<f64, _>(exp);
            arrivals.push(t);
            if t > horizon_cap {
                break;
            }
        }
        Ok(SignalStream {
            intensity,
            arrivals,
            stream_id: id,
        })
    }

    /// Build a stream from explicit arrivals (strictly increasing, > 0).
    pub fn from_arrivals(intensity: f64, arrivals: Vec<f64>, id: StreamId) -> Result<Self> {
        if arrivals.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidParameter {
                name: "arrivals",
                message: "all arrivals must be strictly positive".into(),
            });
        }
        if !arrivals.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParameter {
                name: "arrivals",
                message: "arrivals must be strictly increasing".into(),
            });
        }
        Ok(SignalStream {
            intensity,
            arrivals,
            stream_id: id,
        })
    }

    /// First arrival strictly after `t`; the retained past-cap arrival or the
    /// sentinel when the stream is exhausted.
    pub fn next_arrival(&self, t: f64) -> f64 {
        let idx = self.arrivals.partition_point(|&a| a <= t);
        self.arrivals.get(idx).copied().unwrap_or(SENTINEL_TIME)
    }

    /// 1-based arrival `T_n`; sentinel beyond the sampled range.
    pub fn arrival(&self, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        self.arrivals.get(n - 1).copied().unwrap_or(SENTINEL_TIME)
    }

    /// The unique index `n` with `T_{n-1} <= horizon < T_n` (and `T_0 = 0`),
    /// so that `T_n` is the first arrival strictly after the horizon.
    pub fn m_index(&self, horizon: f64) -> Result<usize> {
        if horizon < 0.0 {
            return Err(Error::OutOfRange {
                what: "horizon",
                value: horizon,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        let idx = self.arrivals.partition_point(|&a| a <= horizon);
        if idx == self.arrivals.len() {
            return Err(Error::StreamTruncated {
                last_arrival: self.arrivals.last().copied().unwrap_or(0.0),
                horizon,
            });
        }
        Ok(idx + 1)
    }
}

/// One labeled event of the merged sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MergedEvent {
    pub time: f64,
    pub label: StreamId,
}

/// Order-preserving interleaving of both streams' arrivals.
///
/// Event times are non-decreasing; ties (a probability-zero event under
/// continuous sampling) put stream 2 first, matching the payoff convention
/// that awards the lower obstacle when both players stop simultaneously.
#[derive(Clone, Debug, Default)]
pub struct MergedSequence {
    pub events: Vec<MergedEvent>,
}

impl MergedSequence {
    /// 1-based event time `theta_k`; sentinel past the sampled range.
    pub fn theta(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.events
            .get(k - 1)
            .map(|e| e.time)
            .unwrap_or(SENTINEL_TIME)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// CSV rows `time,label`, fixed column order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,label")?;
        for e in &self.events {
            writeln!(w, "{:.16e},{}", e.time, e.label.label())?;
        }
        Ok(())
    }
}

/// Two-way merge of the arrival lists with stream labels.
pub fn merge(s1: &SignalStream, s2: &SignalStream) -> MergedSequence {
    let (a, b) = (&s1.arrivals, &s2.arrivals);
    let mut events = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() || j < b.len() {
        let take_two = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => y <= x,
            (None, Some(_)) => true,
            (Some(_), None) => false,
            (None, None) => unreachable!(),
        };
        if take_two {
            events.push(MergedEvent {
                time: b[j],
                label: s2.stream_id,
            });
            j += 1;
        } else {
            events.push(MergedEvent {
                time: a[i],
                label: s1.stream_id,
            });
            i += 1;
        }
    }
    MergedSequence { events }
}
