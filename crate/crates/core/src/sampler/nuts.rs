//! Multinomial No-U-Turn transitions.
//!
//! Trajectories grow by doubling in a random direction. Within a subtree the
//! proposal is drawn with probability proportional to `exp(-H)`; across the
//! top-level doublings the new subtree's draw is preferred (biased progressive
//! sampling). Doubling stops at the first U-turn between the end points of
//! any subtree or of the whole trajectory, at a divergence, or at
//! `max_tree_depth`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::leapfrog::{leapfrog, Phase};
use super::LogDensity;

/// Energy error beyond which a trajectory counts as divergent.
const MAX_ENERGY_ERROR: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub q: Vec<f64>,
    pub grad: Vec<f64>,
    pub logp: f64,
    pub accept_stat: f64,
    pub depth: usize,
    pub n_steps: usize,
    pub divergent: bool,
}

struct Subtree {
    /// Earliest and latest states in integration order of this subtree.
    first: Phase,
    last: Phase,
    proposal: Phase,
    log_weight: f64,
}

struct Walk<'a, D: ?Sized> {
    density: &'a D,
    eps: f64,
    h0: f64,
    sum_accept: f64,
    n_steps: usize,
    divergent: bool,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Original no-U-turn criterion on a span ordered in time.
fn is_turning(minus: &Phase, plus: &Phase) -> bool {
    let mut dot_minus = 0.0;
    let mut dot_plus = 0.0;
    for i in 0..minus.q.len() {
        let dq = plus.q[i] - minus.q[i];
        dot_minus += dq * minus.p[i];
        dot_plus += dq * plus.p[i];
    }
    dot_minus < 0.0 || dot_plus < 0.0
}

/// Orders two spans' ends in physical time given the integration direction.
fn time_ordered<'p>(first: &'p Phase, last: &'p Phase, forward: bool) -> (&'p Phase, &'p Phase) {
    if forward {
        (first, last)
    } else {
        (last, first)
    }
}

impl<D: LogDensity + ?Sized> Walk<'_, D> {
    /// Builds a subtree of `2^depth` steps continuing from `from`. Returns
    /// `None` when the subtree diverged or contains a U-turn.
    fn build<R: Rng>(&mut self, from: &Phase, depth: usize, forward: bool, rng: &mut R) -> Option<Subtree> {
        if depth == 0 {
            let mut next = from.clone();
            leapfrog(self.density, &mut next, if forward { self.eps } else { -self.eps });
            self.n_steps += 1;
            let h = next.energy();
            let delta = h - self.h0;
            if !next.is_finite() || !h.is_finite() || delta > MAX_ENERGY_ERROR {
                self.divergent = true;
                return None;
            }
            self.sum_accept += (-delta).exp().min(1.0);
            return Some(Subtree {
                first: next.clone(),
                last: next.clone(),
                proposal: next,
                log_weight: -delta,
            });
        }
        let inner = self.build(from, depth - 1, forward, rng)?;
        let outer = self.build(&inner.last, depth - 1, forward, rng)?;
        let log_weight = log_add_exp(inner.log_weight, outer.log_weight);
        let take_outer = rng.random::<f64>() < (outer.log_weight - log_weight).exp();
        let (minus, plus) = time_ordered(&inner.first, &outer.last, forward);
        if is_turning(minus, plus) {
            return None;
        }
        Some(Subtree {
            first: inner.first,
            last: outer.last,
            proposal: if take_outer { outer.proposal } else { inner.proposal },
            log_weight,
        })
    }
}

/// One NUTS transition from `current` (position with cached gradient).
pub fn transition<D: LogDensity + ?Sized, R: Rng>(
    density: &D,
    current: &Phase,
    eps: f64,
    max_depth: usize,
    rng: &mut R,
) -> Transition {
    let p: Vec<f64> = (0..current.q.len()).map(|_| rng.sample(StandardNormal)).collect();
    let start = Phase {
        q: current.q.clone(),
        p,
        grad: current.grad.clone(),
        logp: current.logp,
    };
    let mut walk = Walk {
        density,
        eps,
        h0: start.energy(),
        sum_accept: 0.0,
        n_steps: 0,
        divergent: false,
    };
    // `back` is the earliest state in time, `front` the latest
    let mut back = start.clone();
    let mut front = start.clone();
    let mut proposal = start;
    let mut log_weight = 0.0;
    let mut depth = 0;
    while depth < max_depth {
        let forward = rng.random::<bool>();
        let from = if forward { &front } else { &back };
        let Some(sub) = walk.build(from, depth, forward, rng) else {
            depth += 1;
            break;
        };
        depth += 1;
        if rng.random::<f64>() < (sub.log_weight - log_weight).exp() {
            proposal = sub.proposal;
        }
        log_weight = log_add_exp(log_weight, sub.log_weight);
        if forward {
            front = sub.last;
        } else {
            back = sub.last;
        }
        if is_turning(&back, &front) {
            break;
        }
    }
    let accept_stat = if walk.n_steps > 0 {
        walk.sum_accept / walk.n_steps as f64
    } else {
        0.0
    };
    Transition {
        q: proposal.q,
        grad: proposal.grad,
        logp: proposal.logp,
        accept_stat,
        depth,
        n_steps: walk.n_steps,
        divergent: walk.divergent,
    }
}
