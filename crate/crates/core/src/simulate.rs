//! Sampling of the Markov jump process with generator
//! `Lf(i) = sum_{j ~ i} W_ij (f(j) - f(i))`.
//!
//! Every replica owns a ChaCha8 stream addressed by `(seed, stream_id)`, so a
//! batch is reproducible regardless of how rayon schedules it.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{VertexId, WeightedGraph};

/// Default cap on the number of recorded jumps per path.
pub const DEFAULT_EVENT_CAP: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("UnknownVertex: index {0}")]
    UnknownVertex(VertexId),
    #[error("InvalidRule: {0}")]
    InvalidRule(String),
    #[error("EventCapExceeded: path exceeded {0} jumps")]
    EventCapExceeded(usize),
}

/// Address of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StoppingRule {
    /// Stop at the deterministic time `sigma`.
    FixedTime { sigma: f64 },
    /// Stop at `inf{t : local time at site exceeds u}`.
    InverseLocalTime { site: VertexId, u: f64 },
}

impl StoppingRule {
    fn validate(&self, g: &WeightedGraph) -> Result<(), SimError> {
        match *self {
            StoppingRule::FixedTime { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                Err(SimError::InvalidRule(format!("sigma must be positive, got {sigma}")))
            }
            StoppingRule::InverseLocalTime { site, .. } if site >= g.n() => {
                Err(SimError::UnknownVertex(site))
            }
            StoppingRule::InverseLocalTime { u, .. } if !(u > 0.0 && u.is_finite()) => {
                Err(SimError::InvalidRule(format!("u must be positive, got {u}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: f64,
    pub target: VertexId,
}

/// Right-continuous piecewise-constant trajectory observed on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpPath {
    pub start: VertexId,
    pub events: Vec<Jump>,
    pub horizon: f64,
}

impl JumpPath {
    /// State at the horizon.
    pub fn end(&self) -> VertexId {
        self.events.last().map_or(self.start, |j| j.target)
    }

    /// Sequence of visited states, including the start.
    pub fn states(&self) -> impl Iterator<Item = VertexId> + '_ {
        std::iter::once(self.start).chain(self.events.iter().map(|j| j.target))
    }

    /// Checks ordering, horizon and adjacency invariants against `g`.
    pub fn validate(&self, g: &WeightedGraph) -> Result<(), String> {
        if self.start >= g.n() {
            return Err(format!("start {} out of range", self.start));
        }
        if !(self.horizon > 0.0) {
            return Err(format!("horizon {} not positive", self.horizon));
        }
        let mut prev_t = 0.0;
        let mut prev_x = self.start;
        for (m, jump) in self.events.iter().enumerate() {
            if !(jump.time > prev_t) || jump.time > self.horizon {
                return Err(format!("event {m} at time {} out of order", jump.time));
            }
            if jump.target >= g.n() || g.weight(prev_x, jump.target).is_none() {
                return Err(format!("event {m}: {prev_x} -> {} is not an edge", jump.target));
            }
            prev_t = jump.time;
            prev_x = jump.target;
        }
        Ok(())
    }
}

/// Samples one path of the jump process started at `start`.
pub fn simulate_path(
    g: &WeightedGraph,
    start: VertexId,
    rule: StoppingRule,
    stream: RngStream,
) -> Result<JumpPath, SimError> {
    simulate_path_capped(g, start, rule, stream, DEFAULT_EVENT_CAP)
}

pub fn simulate_path_capped(
    g: &WeightedGraph,
    start: VertexId,
    rule: StoppingRule,
    stream: RngStream,
    event_cap: usize,
) -> Result<JumpPath, SimError> {
    if start >= g.n() {
        return Err(SimError::UnknownVertex(start));
    }
    rule.validate(g)?;
    let mut rng = stream.rng();
    run(g, start, rule, &mut rng, event_cap)
}

fn exp_sample<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln() / rate
}

/// Picks `j ~ i` with probability `W_ij / W_i`.
pub(crate) fn pick_neighbor<R: Rng>(g: &WeightedGraph, i: VertexId, rng: &mut R) -> VertexId {
    let nbs = g.neighbors(i);
    let mut target = rng.random::<f64>() * g.rates()[i];
    for nb in nbs {
        if target < nb.weight {
            return nb.vertex;
        }
        target -= nb.weight;
    }
    nbs[nbs.len() - 1].vertex
}

fn run<R: Rng>(
    g: &WeightedGraph,
    start: VertexId,
    rule: StoppingRule,
    rng: &mut R,
    event_cap: usize,
) -> Result<JumpPath, SimError> {
    let rates = g.rates();
    let mut events = Vec::new();
    let mut t = 0.0f64;
    let mut x = start;
    let horizon = match rule {
        StoppingRule::FixedTime { sigma } => loop {
            let hold = exp_sample(rng, rates[x]);
            if t + hold >= sigma {
                break sigma;
            }
            t += hold;
            if events.len() == event_cap {
                return Err(SimError::EventCapExceeded(event_cap));
            }
            x = pick_neighbor(g, x, rng);
            events.push(Jump { time: t, target: x });
        },
        StoppingRule::InverseLocalTime { site, u } => {
            let mut budget = u;
            loop {
                let hold = exp_sample(rng, rates[x]);
                if x == site {
                    if hold >= budget {
                        break t + budget;
                    }
                    budget -= hold;
                }
                t += hold;
                if events.len() == event_cap {
                    return Err(SimError::EventCapExceeded(event_cap));
                }
                x = pick_neighbor(g, x, rng);
                events.push(Jump { time: t, target: x });
            }
        }
    };
    Ok(JumpPath { start, events, horizon })
}

/// Samples `n` replicas; replica `r` uses stream `(base_seed, r)`.
pub fn simulate_batch(
    g: &WeightedGraph,
    start: VertexId,
    rule: StoppingRule,
    base_seed: u64,
    n: usize,
) -> Result<Vec<JumpPath>, SimError> {
    batch_map(g, start, rule, base_seed, n, |_, p| p)
}

/// Samples `n` replicas in parallel and maps each through `f`, keeping replica order.
pub fn batch_map<T, F>(
    g: &WeightedGraph,
    start: VertexId,
    rule: StoppingRule,
    base_seed: u64,
    n: usize,
    f: F,
) -> Result<Vec<T>, SimError>
where
    T: Send,
    F: Fn(usize, JumpPath) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|r| {
            simulate_path(g, start, rule, RngStream::new(base_seed, r as u64)).map(|p| f(r, p))
        })
        .collect()
}

/// Number of replicas among `n` for which `pred` holds.
pub fn batch_count<F>(
    g: &WeightedGraph,
    start: VertexId,
    rule: StoppingRule,
    base_seed: u64,
    n: usize,
    pred: F,
) -> Result<u64, SimError>
where
    F: Fn(&JumpPath) -> bool + Sync + Send,
{
    if start >= g.n() {
        return Err(SimError::UnknownVertex(start));
    }
    rule.validate(g)?;
    (0..n)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(base_seed, r as u64).rng();
            run(g, start, rule, &mut rng, DEFAULT_EVENT_CAP).map(|p| u64::from(pred(&p)))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}
