//! Temporal DAG algebra over (variable, lag) nodes.
//!
//! Nodes are addressed by a flat index `var + d * lag`, so the lag-0 block
//! occupies `0..d`, the lag-1 block `d..2d` and so on. Every matrix and edge
//! set in the crate uses this indexing.

mod io;

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{
    parse_adjacency_csv, parse_edge_list, parse_summary_csv, write_adjacency_csv, write_edge_list,
    write_summary_csv,
};

/// A directed edge between flat node indices.
pub type Edge = (usize, usize);

/// Edge sets iterate in sorted order so that anything written to disk is
/// reproducible.
pub type EdgeSet = BTreeSet<Edge>;

/// One variable observed at one lag; lag 0 is time `t`, lag `τ` is `t - τ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId {
    pub var: usize,
    pub lag: usize,
}

impl NodeId {
    pub fn new(var: usize, lag: usize) -> Self {
        NodeId { var, lag }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}(t-{})", self.var, self.lag)
    }
}

/// The node universe of a lag window: `d` variables at lags `0..=tau_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpace {
    d: usize,
    tau_max: usize,
}

impl NodeSpace {
    pub fn new(d: usize, tau_max: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("variable count must be positive"));
        }
        Ok(NodeSpace { d, tau_max })
    }

    /// A plain node set without lag structure.
    pub fn flat(n: usize) -> Result<Self> {
        NodeSpace::new(n, 0)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tau_max(&self) -> usize {
        self.tau_max
    }

    pub fn len(&self) -> usize {
        self.d * (self.tau_max + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, node: NodeId) -> usize {
        debug_assert!(self.contains(node));
        node.var + self.d * node.lag
    }

    pub fn node(&self, index: usize) -> NodeId {
        NodeId {
            var: index % self.d,
            lag: index / self.d,
        }
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.var < self.d && node.lag <= self.tau_max
    }

    pub fn lag_of(&self, index: usize) -> usize {
        index / self.d
    }

    pub fn var_of(&self, index: usize) -> usize {
        index % self.d
    }

    /// `source.lag >= target.lag`, or strictly greater when `strict`.
    pub fn is_temporal(&self, (from, to): Edge, strict: bool) -> bool {
        let (a, b) = (self.lag_of(from), self.lag_of(to));
        if strict {
            a > b
        } else {
            a >= b
        }
    }
}

/// A directed acyclic graph over a [`NodeSpace`] whose edges never point
/// backward in time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemporalDag {
    space: NodeSpace,
    edges: EdgeSet,
}

impl TemporalDag {
    pub fn new(
        space: NodeSpace,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self> {
        let mut flat = EdgeSet::new();
        for (a, b) in edges {
            if !space.contains(a) || !space.contains(b) {
                return Err(Error::invalid(format!(
                    "edge {a} -> {b} outside node space"
                )));
            }
            flat.insert((space.index(a), space.index(b)));
        }
        Self::from_edges(space, flat)
    }

    pub fn from_edges(space: NodeSpace, edges: EdgeSet) -> Result<Self> {
        let n = space.len();
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::invalid(format!("edge ({a},{b}) outside {n} nodes")));
            }
            if a == b {
                return Err(Error::Cycle(a));
            }
            if !space.is_temporal((a, b), false) {
                return Err(Error::invalid(format!(
                    "edge {} -> {} points backward in time",
                    space.node(a),
                    space.node(b)
                )));
            }
        }
        topological_order(n, &edges)?;
        Ok(TemporalDag { space, edges })
    }

    pub fn empty(space: NodeSpace) -> Self {
        TemporalDag {
            space,
            edges: EdgeSet::new(),
        }
    }

    pub fn space(&self) -> NodeSpace {
        self.space
    }

    pub fn n_nodes(&self) -> usize {
        self.space.len()
    }

    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn into_edges(self) -> EdgeSet {
        self.edges
    }

    pub fn node_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.edges
            .iter()
            .map(|&(a, b)| (self.space.node(a), self.space.node(b)))
    }

    pub fn contains(&self, from: NodeId, to: NodeId) -> bool {
        self.edges
            .contains(&(self.space.index(from), self.space.index(to)))
    }

    pub fn transitive_closure(&self) -> TemporalDag {
        let edges = transitive_closure(self.n_nodes(), &self.edges)
            .expect("TemporalDag is acyclic by construction");
        TemporalDag {
            space: self.space,
            edges,
        }
    }

    pub fn enumerate_orderings(&self, cap: usize) -> Result<Enumeration> {
        enumerate_orderings(self.n_nodes(), &self.edges, cap)
    }

    pub fn summarize(&self) -> SummaryAdjacency {
        summarize(self.space, &self.edges)
    }

    /// Edges terminating at lag 0, the window template used for evaluation.
    pub fn window_template(&self) -> EdgeSet {
        self.edges
            .iter()
            .copied()
            .filter(|&(_, b)| self.space.lag_of(b) == 0)
            .collect()
    }

    /// Re-express the lag-0 template of this graph inside a (possibly wider)
    /// window and add every stationary repeat that fits: a template link
    /// `x_i(t-τ) -> x_j(t)` yields `x_i(t-l-τ) -> x_j(t-l)` for each
    /// `l + τ <= window.tau_max()`.
    pub fn unroll(&self, window: NodeSpace) -> Result<TemporalDag> {
        if window.d() != self.space.d() {
            return Err(Error::NodeMismatch(self.space.d(), window.d()));
        }
        let mut edges = EdgeSet::new();
        for (a, b) in self.node_edges().filter(|(_, b)| b.lag == 0) {
            for shift in 0..=window.tau_max() {
                if a.lag + shift > window.tau_max() {
                    break;
                }
                edges.insert((
                    window.index(NodeId::new(a.var, a.lag + shift)),
                    window.index(NodeId::new(b.var, shift)),
                ));
            }
        }
        TemporalDag::from_edges(window, edges)
    }
}

impl Serialize for TemporalDag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            d: usize,
            tau_max: usize,
            edges: Vec<(NodeId, NodeId)>,
        }
        Repr {
            d: self.space.d(),
            tau_max: self.space.tau_max(),
            edges: self.node_edges().collect(),
        }
        .serialize(s)
    }
}

/// Kahn's algorithm; fails on the first node found on a cycle.
pub fn topological_order(n: usize, edges: &EdgeSet) -> Result<Vec<usize>> {
    let (children, mut indegree) = adjacency(n, edges);
    let mut ready: Vec<usize> = (0..n).rev().filter(|&v| indegree[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop() {
        order.push(v);
        for &c in children[v].iter().rev() {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&v| indegree[v] > 0).unwrap_or(0);
        return Err(Error::Cycle(stuck));
    }
    Ok(order)
}

fn adjacency(n: usize, edges: &EdgeSet) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut children = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for &(a, b) in edges {
        children[a].push(b);
        indegree[b] += 1;
    }
    (children, indegree)
}

/// All pairs `(x, y)`, `x != y`, joined by a directed path.
pub fn transitive_closure(n: usize, edges: &EdgeSet) -> Result<EdgeSet> {
    if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(Error::invalid(format!("edge ({a},{b}) outside {n} nodes")));
    }
    let order = topological_order(n, edges)?;
    let (children, _) = adjacency(n, edges);
    let mut reach: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &v in order.iter().rev() {
        let mut r = BTreeSet::new();
        for &c in &children[v] {
            r.insert(c);
            r.extend(reach[c].iter().copied());
        }
        reach[v] = r;
    }
    Ok(reach
        .iter()
        .enumerate()
        .flat_map(|(v, r)| r.iter().map(move |&w| (v, w)))
        .collect())
}

/// Result of [`enumerate_orderings`]. `overflow` is set when more orderings
/// exist than the cap allowed to collect.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub orderings: Vec<Ordering>,
    pub overflow: bool,
}

pub const DEFAULT_ENUMERATION_CAP: usize = 100_000;

/// Every topological ordering of the graph, by Kahn's algorithm with
/// backtracking over the ready set (smallest index first).
pub fn enumerate_orderings(n: usize, edges: &EdgeSet, cap: usize) -> Result<Enumeration> {
    if cap == 0 {
        return Err(Error::invalid("enumeration cap must be positive"));
    }
    topological_order(n, edges)?;
    let (children, indegree) = adjacency(n, edges);

    struct Search<'a> {
        children: &'a [Vec<usize>],
        indegree: Vec<usize>,
        placed: Vec<bool>,
        prefix: Vec<usize>,
        out: Vec<Ordering>,
        cap: usize,
        overflow: bool,
    }

    impl Search<'_> {
        fn run(&mut self) {
            let n = self.placed.len();
            if self.prefix.len() == n {
                if self.out.len() == self.cap {
                    self.overflow = true;
                } else {
                    self.out.push(Ordering::from_valid(self.prefix.clone()));
                }
                return;
            }
            for v in 0..n {
                if self.overflow {
                    return;
                }
                if self.placed[v] || self.indegree[v] != 0 {
                    continue;
                }
                self.placed[v] = true;
                self.prefix.push(v);
                for &c in &self.children[v] {
                    self.indegree[c] -= 1;
                }
                self.run();
                for &c in &self.children[v] {
                    self.indegree[c] += 1;
                }
                self.prefix.pop();
                self.placed[v] = false;
            }
        }
    }

    let mut search = Search {
        children: &children,
        indegree,
        placed: vec![false; n],
        prefix: Vec::with_capacity(n),
        out: Vec::new(),
        cap,
        overflow: false,
    };
    search.run();
    Ok(Enumeration {
        orderings: search.out,
        overflow: search.overflow,
    })
}

/// A permutation of the node set, read left to right as causes before
/// effects.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ordering {
    sequence: Vec<usize>,
    position: Vec<usize>,
}

impl Ordering {
    pub fn new(sequence: Vec<usize>) -> Result<Self> {
        let n = sequence.len();
        let mut position = vec![usize::MAX; n];
        for (rank, &v) in sequence.iter().enumerate() {
            if v >= n || position[v] != usize::MAX {
                return Err(Error::invalid(format!(
                    "sequence is not a permutation of 0..{n}"
                )));
            }
            position[v] = rank;
        }
        Ok(Ordering { sequence, position })
    }

    fn from_valid(sequence: Vec<usize>) -> Self {
        let mut position = vec![0; sequence.len()];
        for (rank, &v) in sequence.iter().enumerate() {
            position[v] = rank;
        }
        Ordering { sequence, position }
    }

    pub fn identity(n: usize) -> Self {
        Ordering::from_valid((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    pub fn position(&self, node: usize) -> usize {
        self.position[node]
    }

    pub fn precedes(&self, a: usize, b: usize) -> bool {
        self.position[a] < self.position[b]
    }

    /// Does every edge of the graph run forward in this ordering?
    pub fn respects(&self, edges: &EdgeSet) -> bool {
        edges
            .iter()
            .all(|&(a, b)| a < self.len() && b < self.len() && self.precedes(a, b))
    }

    /// The complete DAG consistent with this ordering.
    pub fn implied_edges(&self) -> EdgeSet {
        let mut out = EdgeSet::new();
        for (i, &a) in self.sequence.iter().enumerate() {
            for &b in &self.sequence[i + 1..] {
                out.insert((a, b));
            }
        }
        out
    }

    /// Normalized Kendall distance: the fraction of node pairs the two
    /// orderings rank differently.
    pub fn kendall_tau(&self, other: &Ordering) -> Result<f64> {
        let n = self.len();
        if other.len() != n {
            return Err(Error::NodeMismatch(n, other.len()));
        }
        if n < 2 {
            return Ok(0.0);
        }
        let mut discordant = 0usize;
        for a in 0..n {
            for b in a + 1..n {
                if self.precedes(a, b) != other.precedes(a, b) {
                    discordant += 1;
                }
            }
        }
        Ok(discordant as f64 / (n * (n - 1) / 2) as f64)
    }
}

impl TryFrom<Vec<usize>> for Ordering {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Ordering::new(v)
    }
}

impl From<Ordering> for Vec<usize> {
    fn from(o: Ordering) -> Self {
        o.sequence
    }
}

fn common_len(orderings: &[Ordering]) -> Result<usize> {
    let first = orderings
        .first()
        .ok_or_else(|| Error::invalid("ordering list is empty"))?;
    let n = first.len();
    if let Some(o) = orderings.iter().find(|o| o.len() != n) {
        return Err(Error::NodeMismatch(n, o.len()));
    }
    Ok(n)
}

/// Pairs ordered the same way by every ordering in the list.
pub fn intersect_implied(orderings: &[Ordering]) -> Result<EdgeSet> {
    let n = common_len(orderings)?;
    let mut out = EdgeSet::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && orderings.iter().all(|o| o.precedes(a, b)) {
                out.insert((a, b));
            }
        }
    }
    Ok(out)
}

/// Pairs ordered `a` before `b` by at least one ordering.
pub fn union_implied(orderings: &[Ordering]) -> Result<EdgeSet> {
    let n = common_len(orderings)?;
    let mut out = EdgeSet::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && orderings.iter().any(|o| o.precedes(a, b)) {
                out.insert((a, b));
            }
        }
    }
    Ok(out)
}

/// Keep edges that do not point backward in time; with `strict`, drop
/// contemporaneous edges too.
pub fn temporal_filter(space: NodeSpace, edges: &EdgeSet, strict: bool) -> EdgeSet {
    edges
        .iter()
        .copied()
        .filter(|&e| space.is_temporal(e, strict))
        .collect()
}

/// Variable-level graph: lags dropped, autocorrelation kept as self-loops.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryAdjacency {
    pub d: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

pub fn summarize(space: NodeSpace, edges: &EdgeSet) -> SummaryAdjacency {
    SummaryAdjacency {
        d: space.d(),
        edges: edges
            .iter()
            .map(|&(a, b)| (space.var_of(a), space.var_of(b)))
            .collect(),
    }
}

/// Random DAG on `n` nodes: a uniformly random node order with each forward
/// pair joined independently with probability `density`.
pub fn random_dag<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> EdgeSet {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut edges = EdgeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < density {
                edges.insert((perm[i], perm[j]));
            }
        }
    }
    edges
}
