//! Causal orderings from the trained score network, one per noise scale.
//!
//! At a fixed step `k` the node with the smallest Hessian-diagonal variance
//! is taken as a leaf, masked out, and the search repeats on the remaining
//! nodes. Leaves are prepended, so the first node removed ends up last.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffusion::{hessian_diag_variance, HessianInput, NoiseSchedule, ScoreNet};
use crate::error::{Error, Result};
use crate::graph::Ordering;
use crate::lagembed::LagMatrix;
use crate::rng;

const STREAM_ORDER: u64 = 20;

/// Relative gap under which two variances count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// The noise steps at which orderings are extracted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleSet {
    scales: Vec<usize>,
}

impl ScaleSet {
    pub fn new(mut scales: Vec<usize>, k_max: usize) -> Result<Self> {
        if scales.is_empty() {
            return Err(Error::invalid("scale set is empty"));
        }
        scales.sort_unstable();
        if scales.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("scales must be distinct"));
        }
        if let Some(&k) = scales.last().filter(|&&k| k > k_max) {
            return Err(Error::invalid(format!("scale {k} above k_max = {k_max}")));
        }
        Ok(ScaleSet { scales })
    }

    pub fn scales(&self) -> &[usize] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }
}

/// `count` evenly spaced steps over `[1, ceil(low_fraction * k_max)]`; a
/// single scale sits at the midpoint.
pub fn select_scales(k_max: usize, count: usize, low_fraction: f64) -> Result<ScaleSet> {
    if count == 0 || count > k_max {
        return Err(Error::invalid(format!(
            "need 1 <= S <= k_max, got S = {count}"
        )));
    }
    if !(low_fraction > 0.0 && low_fraction <= 1.0) {
        return Err(Error::invalid("low_fraction must lie in (0, 1]"));
    }
    let hi = ((low_fraction * k_max as f64).ceil() as usize).clamp(1, k_max);
    if count > hi {
        return Err(Error::invalid(format!(
            "{count} distinct scales do not fit in [1, {hi}]"
        )));
    }
    let scales = if count == 1 {
        vec![((1 + hi) as f64 / 2.0).round() as usize]
    } else {
        let step = (hi - 1) as f64 / (count - 1) as f64;
        (0..count)
            .map(|i| (1.0 + step * i as f64).round() as usize)
            .collect()
    };
    ScaleSet::new(scales, k_max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrderingConfig {
    /// Rows subsampled for each Hessian evaluation.
    pub batch_rows: usize,
    pub input: HessianInput,
    pub seed: u64,
}

impl Default for OrderingConfig {
    fn default() -> Self {
        OrderingConfig {
            batch_rows: 512,
            input: HessianInput::Perturbed,
            seed: 0,
        }
    }
}

/// One extracted ordering with the variances that decided each removal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleOrdering {
    pub k: usize,
    pub ordering: Ordering,
    /// Leaf variances in removal order.
    pub leaf_variances: Vec<f64>,
}

/// Position of the smallest variance, ties going to the earliest entry.
fn pick_leaf(variances: &[f64]) -> usize {
    let min = variances.iter().copied().fold(f64::INFINITY, f64::min);
    let limit = min + TIE_TOLERANCE * min.abs();
    variances
        .iter()
        .position(|&v| v <= limit)
        .expect("variances are non-empty")
}

fn hessian_batch(
    data: &LagMatrix,
    schedule: &NoiseSchedule,
    k: usize,
    active: &[usize],
    iteration: usize,
    cfg: &OrderingConfig,
) -> Result<Array2<f64>> {
    let mut r = rng::stream(cfg.seed, &[STREAM_ORDER, k as u64, iteration as u64]);
    let rows = data.rows();
    let mut batch = if rows <= cfg.batch_rows {
        data.data().clone()
    } else {
        let mut idx = sample(&mut r, rows, cfg.batch_rows).into_vec();
        idx.sort_unstable();
        data.data().select(ndarray::Axis(0), &idx)
    };
    if cfg.input == HessianInput::Perturbed {
        let noise = Array2::from_shape_fn(batch.raw_dim(), |_| r.sample::<f64, _>(StandardNormal));
        schedule.perturb_columns(batch.view_mut(), k, noise.view(), active)?;
    }
    Ok(batch)
}

/// Extract one ordering at noise step `k`.
pub fn order_at_scale(
    net: &ScoreNet,
    data: &LagMatrix,
    k: usize,
    cfg: &OrderingConfig,
) -> Result<ScaleOrdering> {
    let n = data.cols();
    if net.dim() != n {
        return Err(Error::NodeMismatch(net.dim(), n));
    }
    if cfg.batch_rows == 0 {
        return Err(Error::invalid("Hessian batch needs at least one row"));
    }
    let schedule = NoiseSchedule::new(net.k_max())?;
    schedule.check(k)?;
    let mut active: Vec<usize> = (0..n).collect();
    let mut removed = Vec::with_capacity(n);
    let mut leaf_variances = Vec::with_capacity(n);
    for iteration in 0..n {
        let batch = hessian_batch(data, &schedule, k, &active, iteration, cfg)?;
        let variances = hessian_diag_variance(net, batch.view(), k, &active)?;
        let pos = pick_leaf(&variances);
        leaf_variances.push(variances[pos]);
        removed.push(active.remove(pos));
    }
    removed.reverse();
    Ok(ScaleOrdering {
        k,
        ordering: Ordering::new(removed)?,
        leaf_variances,
    })
}

/// One ordering per scale, each starting from the full node set.
pub fn multi_scale_orderings(
    net: &ScoreNet,
    data: &LagMatrix,
    scales: &ScaleSet,
    cfg: &OrderingConfig,
) -> Result<Vec<ScaleOrdering>> {
    scales
        .scales()
        .par_iter()
        .map(|&k| order_at_scale(net, data, k, cfg))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeSpace;

    #[test]
    fn scale_selection_examples() {
        let one = select_scales(100, 1, 0.5).unwrap();
        assert_eq!(one.scales(), &[26]);
        let all = select_scales(100, 100, 1.0).unwrap();
        assert_eq!(all.scales(), (1..=100).collect::<Vec<_>>().as_slice());
        let ten = select_scales(100, 10, 0.5).unwrap();
        assert_eq!(ten.scales(), &[1, 6, 12, 17, 23, 28, 34, 39, 45, 50]);
        assert_eq!(select_scales(100, 20, 0.5).unwrap().len(), 20);
        assert!(select_scales(100, 0, 0.5).is_err());
        assert!(select_scales(100, 101, 1.0).is_err());
        assert!(select_scales(100, 60, 0.5).is_err());
    }

    #[test]
    fn scale_set_validation() {
        assert!(ScaleSet::new(vec![3, 3], 10).is_err());
        assert!(ScaleSet::new(vec![11], 10).is_err());
        assert_eq!(ScaleSet::new(vec![5, 2], 10).unwrap().scales(), &[2, 5]);
    }

    #[test]
    fn ties_break_to_the_first_entry() {
        assert_eq!(pick_leaf(&[0.3, 0.1, 0.1]), 1);
        assert_eq!(pick_leaf(&[0.2, 0.2 * (1.0 + 1e-12), 0.5]), 0);
        assert_eq!(pick_leaf(&[0.2 * (1.0 + 1e-12), 0.2, 0.5]), 0);
        assert_eq!(pick_leaf(&[0.0, 0.0]), 0);
    }

    fn random_setup(d: usize, rows: usize) -> (ScoreNet, LagMatrix) {
        let space = NodeSpace::new(d, 0).unwrap();
        let mut r = rng::stream(4, &[]);
        let data = Array2::from_shape_fn((rows, d), |_| r.sample::<f64, _>(StandardNormal));
        let net = ScoreNet::new(d, 100, 3, 16, &mut rng::stream(5, &[])).unwrap();
        (net, LagMatrix::from_columns(data, space).unwrap())
    }

    #[test]
    fn orderings_are_full_permutations() {
        let (net, data) = random_setup(5, 300);
        let cfg = OrderingConfig {
            batch_rows: 64,
            ..Default::default()
        };
        let o = order_at_scale(&net, &data, 30, &cfg).unwrap();
        assert_eq!(o.ordering.len(), 5);
        assert_eq!(o.leaf_variances.len(), 5);
        let again = order_at_scale(&net, &data, 30, &cfg).unwrap();
        assert_eq!(o, again);
        assert!(order_at_scale(&net, &data, 101, &cfg).is_err());
    }

    #[test]
    fn single_variable_gives_trivial_ordering() {
        let (net, data) = random_setup(1, 50);
        let o = order_at_scale(&net, &data, 10, &OrderingConfig::default()).unwrap();
        assert_eq!(o.ordering.sequence(), &[0]);
    }

    #[test]
    fn removal_order_is_reversed_into_the_sequence() {
        let (net, data) = random_setup(4, 200);
        let cfg = OrderingConfig {
            input: HessianInput::Clean,
            ..Default::default()
        };
        let o = order_at_scale(&net, &data, 15, &cfg).unwrap();
        // recompute the first removal by hand
        let v = hessian_diag_variance(&net, data.data().view(), 15, &[0, 1, 2, 3]).unwrap();
        let first = pick_leaf(&v);
        assert_eq!(o.ordering.position(first), 3);
    }

    #[test]
    fn multi_scale_matches_single_scale_runs() {
        let (net, data) = random_setup(3, 200);
        let cfg = OrderingConfig::default();
        let scales = ScaleSet::new(vec![5, 40], 100).unwrap();
        let many = multi_scale_orderings(&net, &data, &scales, &cfg).unwrap();
        assert_eq!(many.len(), 2);
        assert_eq!(many[1], order_at_scale(&net, &data, 40, &cfg).unwrap());
        let single = ScaleSet::new(vec![5], 100).unwrap();
        assert_eq!(
            multi_scale_orderings(&net, &data, &single, &cfg).unwrap()[0],
            many[0]
        );
    }
}
