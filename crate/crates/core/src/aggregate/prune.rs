//! Regression pruning of candidate parents.
//!
//! Each child is regressed on a cubic spline expansion of every candidate
//! parent. A parent survives when dropping its block raises the residual sum
//! of squares significantly under a nested-model F-test.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::VoteMatrix;
use crate::error::{Error, Result};
use crate::graph::EdgeSet;
use crate::lagembed::LagMatrix;

/// Pivots below this share of the column's own energy count as dependent.
const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PruneConfig {
    pub alpha: f64,
    /// Interior knots per parent; reduced when rows are scarce.
    pub knots: usize,
    /// Candidates above this count are cut by vote weight before testing.
    pub max_parents: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            alpha: 0.05,
            knots: 10,
            max_parents: 20,
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("significance level must lie in (0, 1)"));
        }
        if self.max_parents == 0 {
            return Err(Error::invalid("max_parents must be positive"));
        }
        Ok(())
    }
}

/// Outcome of testing one candidate edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParentTest {
    pub parent: usize,
    pub child: usize,
    pub f_stat: f64,
    pub df: (usize, usize),
    /// `None` when the model left no residual degrees of freedom.
    pub p_value: Option<f64>,
    pub kept: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub edges: EdgeSet,
    pub tests: Vec<ParentTest>,
    pub warnings: Vec<String>,
}

/// Empirical quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `x, x², x³` and `(x - κ)³₊` at `knots` interior quantiles, each column
/// centred and scaled to unit root-mean-square. Constant columns are left
/// out.
fn spline_basis(x: ArrayView1<f64>, knots: usize) -> Vec<Array1<f64>> {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..=knots)
        .map(|m| quantile(&sorted, m as f64 / (knots + 1) as f64))
        .collect();
    cuts.dedup();
    let mut cols = vec![x.to_owned(), x.mapv(|v| v * v), x.mapv(|v| v * v * v)];
    cols.extend(cuts.iter().map(|&c| x.mapv(|v| (v - c).max(0.0).powi(3))));
    cols.into_iter()
        .filter_map(|mut c| {
            let mean = c.mean().unwrap_or(0.0);
            c -= mean;
            let rms = (c.dot(&c) / c.len() as f64).sqrt();
            (rms > 1e-12).then(|| c / rms)
        })
        .collect()
}

/// Residual sum of squares of `y` regressed on the selected columns, plus
/// the number of independent columns used.
fn fit_rss(gram: &Array2<f64>, xty: &Array1<f64>, yty: f64, cols: &[usize]) -> (f64, usize) {
    let m = cols.len();
    let mut l = Array2::<f64>::zeros((m, m));
    let mut z = Vec::with_capacity(m);
    let mut kept: Vec<usize> = Vec::with_capacity(m);
    for (a, &ca) in cols.iter().enumerate() {
        for (r, &b) in kept.iter().enumerate() {
            let s: f64 = (0..r).map(|q| l[[a, q]] * l[[b, q]]).sum();
            l[[a, r]] = (gram[[ca, cols[b]]] - s) / l[[b, r]];
        }
        let r = kept.len();
        let pivot = gram[[ca, ca]] - (0..r).map(|q| l[[a, q]] * l[[a, q]]).sum::<f64>();
        if pivot <= PIVOT_TOLERANCE * gram[[ca, ca]] {
            l.row_mut(a).fill(0.0);
            continue;
        }
        let diag = pivot.sqrt();
        l[[a, r]] = diag;
        let s: f64 = (0..r).map(|q| l[[a, q]] * z[q]).sum();
        z.push((xty[ca] - s) / diag);
        kept.push(a);
    }
    let explained: f64 = z.iter().map(|v| v * v).sum();
    ((yty - explained).max(0.0), kept.len())
}

/// Parents of one child, strongest votes first when there are too many.
fn rank_parents(
    parents: &mut Vec<usize>,
    child: usize,
    votes: Option<&VoteMatrix>,
    max: usize,
) -> Vec<usize> {
    if let Some(v) = votes {
        parents.sort_by(|&a, &b| v.count(b, child).cmp(&v.count(a, child)).then(a.cmp(&b)));
    }
    let dropped = if parents.len() > max {
        parents.split_off(max)
    } else {
        Vec::new()
    };
    parents.sort_unstable();
    dropped
}

fn prune_child(
    child: usize,
    parents: &[usize],
    data: &LagMatrix,
    cfg: &PruneConfig,
    out: &mut PruneOutcome,
) -> Result<()> {
    let rows = data.rows();
    let x = data.data();
    // leave at least half the rows as residual degrees of freedom
    let per_parent = ((rows / 2).saturating_sub(1) / parents.len()).saturating_sub(3);
    let knots = cfg.knots.min(per_parent);
    if knots < cfg.knots {
        out.warnings.push(format!(
            "child {child}: {} rows allow only {knots} knots per parent",
            rows
        ));
    }
    let mut columns = Vec::new();
    let mut blocks = Vec::with_capacity(parents.len());
    for &p in parents {
        let basis = spline_basis(x.column(p), knots);
        let start = columns.len();
        columns.extend(basis);
        blocks.push(start..columns.len());
    }
    let y = x.column(child).to_owned();
    let y = &y - y.mean().unwrap_or(0.0);
    let design = ndarray::stack(
        Axis(1),
        &columns.iter().map(|c| c.view()).collect::<Vec<_>>(),
    )
    .map_err(|e| Error::Numerical(e.to_string()))?;
    let gram = design.t().dot(&design);
    let xty = design.t().dot(&y);
    let yty = y.dot(&y);
    if !gram.iter().chain(xty.iter()).all(|v| v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite design for child {child}"
        )));
    }
    let all: Vec<usize> = (0..columns.len()).collect();
    let (rss_full, rank_full) = fit_rss(&gram, &xty, yty, &all);
    if rank_full < columns.len() {
        out.warnings.push(format!(
            "child {child}: {} of {} basis columns dropped as dependent",
            columns.len() - rank_full,
            columns.len()
        ));
    }
    let df2 = rows as i64 - 1 - rank_full as i64;
    for (&p, block) in parents.iter().zip(&blocks) {
        let reduced: Vec<usize> = all.iter().copied().filter(|c| !block.contains(c)).collect();
        let (rss_red, rank_red) = fit_rss(&gram, &xty, yty, &reduced);
        let df1 = rank_full.saturating_sub(rank_red);
        let (f_stat, p_value) = if df1 == 0 {
            (0.0, Some(1.0))
        } else if df2 < 1 {
            (f64::NAN, None)
        } else if rss_full == 0.0 {
            (f64::INFINITY, Some(0.0))
        } else {
            let f = ((rss_red - rss_full).max(0.0) / df1 as f64) / (rss_full / df2 as f64);
            let dist = FisherSnedecor::new(df1 as f64, df2 as f64)
                .map_err(|e| Error::Numerical(e.to_string()))?;
            (f, Some(dist.sf(f)))
        };
        let kept = match p_value {
            Some(pv) => pv < cfg.alpha,
            None => {
                out.warnings.push(format!(
                    "child {child}: no residual degrees of freedom, parent {p} kept untested"
                ));
                true
            }
        };
        if kept {
            out.edges.insert((p, child));
        }
        out.tests.push(ParentTest {
            parent: p,
            child,
            f_stat,
            df: (df1, df2.max(0) as usize),
            p_value,
            kept,
        });
    }
    Ok(())
}

/// Keep the candidate edges whose parent block is significant for its child.
pub fn prune(
    candidates: &EdgeSet,
    data: &LagMatrix,
    cfg: &PruneConfig,
    votes: Option<&VoteMatrix>,
) -> Result<PruneOutcome> {
    cfg.validate()?;
    let n = data.cols();
    if let Some(&(a, b)) = candidates.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(Error::invalid(format!(
            "edge ({a}, {b}) outside {n} columns"
        )));
    }
    if let Some(v) = votes.filter(|v| v.n() != n) {
        return Err(Error::NodeMismatch(v.n(), n));
    }
    if data.rows() < 3 && !candidates.is_empty() {
        return Err(Error::invalid("too few rows to test parents"));
    }
    let mut out = PruneOutcome::default();
    for child in 0..n {
        let mut parents: Vec<usize> = candidates
            .iter()
            .filter(|&&(_, b)| b == child)
            .map(|&(a, _)| a)
            .collect();
        if parents.is_empty() {
            continue;
        }
        let dropped = rank_parents(&mut parents, child, votes, cfg.max_parents);
        if !dropped.is_empty() {
            out.warnings.push(format!(
                "child {child}: {} weakest candidates dropped before testing",
                dropped.len()
            ));
        }
        prune_child(child, &parents, data, cfg, &mut out)?;
    }
    Ok(out)
}
