//! Turning a set of orderings into a window graph.

mod discover;
mod prune;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{temporal_filter, EdgeSet, NodeSpace, Ordering};

pub use discover::{
    assemble, discover, extract, fit, prepare, Assembled, Diagnostics, DiscoverConfig, Discovery,
    Prepared, Timings,
};
pub use prune::{prune, ParentTest, PruneConfig, PruneOutcome};

/// Share of orderings placing `i` before `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteMatrix {
    counts: Array2<u32>,
    orderings: usize,
}

impl VoteMatrix {
    pub fn n(&self) -> usize {
        self.counts.nrows()
    }

    pub fn orderings(&self) -> usize {
        self.orderings
    }

    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[[i, j]]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.counts[[i, j]] as f64 / self.orderings as f64
    }

    pub fn weights(&self) -> Array2<f64> {
        self.counts.mapv(|c| c as f64 / self.orderings as f64)
    }
}

pub fn vote(orderings: &[Ordering]) -> Result<VoteMatrix> {
    let first = orderings
        .first()
        .ok_or_else(|| Error::invalid("no orderings to vote over"))?;
    let n = first.len();
    let mut counts = Array2::zeros((n, n));
    for o in orderings {
        if o.len() != n {
            return Err(Error::NodeMismatch(n, o.len()));
        }
        let seq = o.sequence();
        for (p, &a) in seq.iter().enumerate() {
            for &b in &seq[p + 1..] {
                counts[[a, b]] += 1;
            }
        }
    }
    Ok(VoteMatrix {
        counts,
        orderings: orderings.len(),
    })
}

/// `theta = 0` keeps every pair with a vote; otherwise `W >= theta`.
pub fn threshold(votes: &VoteMatrix, theta: f64) -> Result<EdgeSet> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("threshold {theta} outside [0, 1]")));
    }
    let n = votes.n();
    let mut out = EdgeSet::new();
    for i in 0..n {
        for j in 0..n {
            let c = votes.count(i, j);
            let keep = if theta == 0.0 {
                c > 0
            } else {
                votes.weight(i, j) >= theta
            };
            if i != j && keep {
                out.insert((i, j));
            }
        }
    }
    Ok(out)
}

/// Time-respecting candidates that end in the present slice.
pub fn constrain(space: NodeSpace, edges: &EdgeSet, strict: bool) -> EdgeSet {
    temporal_filter(space, edges, strict)
        .into_iter()
        .filter(|&(_, b)| space.lag_of(b) == 0)
        .collect()
}
