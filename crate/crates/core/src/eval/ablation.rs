//! One network fit, many graphs: sweeps over the ordering count, the vote
//! threshold, the lag window and single noise scales.

use std::collections::BTreeMap;
use std::sync::Mutex;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{score_graph, GraphScores};
use crate::aggregate::{assemble, fit, prepare, Assembled, DiscoverConfig, Prepared};
use crate::diffusion::TrainedNet;
use crate::error::{Error, Result};
use crate::graph::{Ordering, TemporalDag};
use crate::ordering::{multi_scale_orderings, select_scales, ScaleOrdering, ScaleSet};

/// A trained network with its data, caching orderings by noise step.
#[derive(Debug)]
pub struct FittedInstance {
    pub cfg: DiscoverConfig,
    pub prepared: Prepared,
    pub net: TrainedNet,
    cache: Mutex<BTreeMap<usize, ScaleOrdering>>,
}

impl FittedInstance {
    pub fn fit(trajectories: &[ArrayView2<f64>], cfg: &DiscoverConfig) -> Result<Self> {
        cfg.validate()?;
        let prepared = prepare(trajectories, cfg)?;
        let net = fit(&prepared, cfg)?;
        Ok(Self::from_parts(cfg.clone(), prepared, net))
    }

    pub fn from_parts(cfg: DiscoverConfig, prepared: Prepared, net: TrainedNet) -> Self {
        FittedInstance {
            cfg,
            prepared,
            net,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// Orderings at the given steps. A step's ordering depends only on the
    /// network, the data and the seed, so it is computed once.
    pub fn orderings(&self, scales: &ScaleSet) -> Result<Vec<ScaleOrdering>> {
        let mut cache = self.cache.lock().expect("ordering cache poisoned");
        let missing: Vec<usize> = scales
            .scales()
            .iter()
            .copied()
            .filter(|k| !cache.contains_key(k))
            .collect();
        if !missing.is_empty() {
            let set = ScaleSet::new(missing, self.net.net.k_max())?;
            let hessian = crate::ordering::OrderingConfig {
                seed: self.cfg.seed,
                ..self.cfg.hessian.clone()
            };
            for o in multi_scale_orderings(&self.net.net, &self.prepared.data, &set, &hessian)? {
                cache.insert(o.k, o);
            }
        }
        Ok(scales.scales().iter().map(|k| cache[k].clone()).collect())
    }

    pub fn scales_for(&self, count: usize) -> Result<ScaleSet> {
        select_scales(self.cfg.train.k_max, count, self.cfg.low_fraction)
    }

    pub fn assemble(&self, scales: &ScaleSet, theta: f64) -> Result<Assembled> {
        let orderings: Vec<Ordering> = self
            .orderings(scales)?
            .into_iter()
            .map(|o| o.ordering)
            .collect();
        let cfg = DiscoverConfig {
            theta,
            ..self.cfg.clone()
        };
        assemble(&self.prepared, &orderings, &cfg)
    }

    /// The window graph for `count` orderings at threshold `theta`.
    pub fn graph(&self, count: usize, theta: f64) -> Result<TemporalDag> {
        Ok(self.assemble(&self.scales_for(count)?, theta)?.window)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "parameter", content = "values", rename_all = "kebab-case")]
pub enum Ablation {
    Orderings(Vec<usize>),
    Theta(Vec<f64>),
    TauMax(Vec<usize>),
    /// One ordering at each listed noise step.
    Scale(Vec<usize>),
}

impl Ablation {
    pub fn name(&self) -> &'static str {
        match self {
            Ablation::Orderings(_) => "orderings",
            Ablation::Theta(_) => "theta",
            Ablation::TauMax(_) => "tau_max",
            Ablation::Scale(_) => "scale",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub parameter: String,
    pub value: f64,
    pub edges: usize,
    pub scores: GraphScores,
}

fn row(ab: &Ablation, value: f64, pred: &TemporalDag, truth: &TemporalDag) -> Result<AblationRow> {
    Ok(AblationRow {
        parameter: ab.name().to_string(),
        value,
        edges: super::window_edges(pred).len(),
        scores: score_graph(pred, truth)?,
    })
}

/// Score every setting of one hyperparameter against a known graph. All
/// settings except `TauMax` share one network fit.
pub fn run_ablation(
    trajectories: &[ArrayView2<f64>],
    truth: &TemporalDag,
    cfg: &DiscoverConfig,
    ablation: &Ablation,
) -> Result<Vec<AblationRow>> {
    if let Ablation::TauMax(values) = ablation {
        return values
            .iter()
            .map(|&tau_max| {
                let c = DiscoverConfig {
                    tau_max,
                    ..cfg.clone()
                };
                let fitted = FittedInstance::fit(trajectories, &c)?;
                let g = fitted.graph(c.orderings, c.theta)?;
                row(ablation, tau_max as f64, &g, truth)
            })
            .collect();
    }
    let fitted = FittedInstance::fit(trajectories, cfg)?;
    sweep_fitted(&fitted, truth, ablation)
}

/// Sweeps that reuse an existing fit.
pub fn sweep_fitted(
    fitted: &FittedInstance,
    truth: &TemporalDag,
    ablation: &Ablation,
) -> Result<Vec<AblationRow>> {
    let cfg = &fitted.cfg;
    match ablation {
        Ablation::Orderings(counts) => counts
            .iter()
            .map(|&s| row(ablation, s as f64, &fitted.graph(s, cfg.theta)?, truth))
            .collect(),
        Ablation::Theta(thetas) => thetas
            .iter()
            .map(|&t| row(ablation, t, &fitted.graph(cfg.orderings, t)?, truth))
            .collect(),
        Ablation::Scale(ks) => ks
            .iter()
            .map(|&k| {
                let set = ScaleSet::new(vec![k], cfg.train.k_max)?;
                row(
                    ablation,
                    k as f64,
                    &fitted.assemble(&set, cfg.theta)?.window,
                    truth,
                )
            })
            .collect(),
        Ablation::TauMax(_) => Err(Error::invalid(
            "a lag-window sweep needs a fresh fit per value",
        )),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub scales: Vec<usize>,
    /// Normalized Kendall distances between the orderings.
    pub kendall: Vec<Vec<f64>>,
    pub mean_pairwise: f64,
    /// Window F1 of each ordering run alone through constrain and prune.
    pub per_scale_f1: Option<Vec<f64>>,
}

pub fn diversity_report(
    orderings: &[ScaleOrdering],
    truth: Option<(&FittedInstance, &TemporalDag)>,
) -> Result<DiversityReport> {
    let s = orderings.len();
    let mut kendall = vec![vec![0.0; s]; s];
    let mut total = 0.0;
    for i in 0..s {
        for j in i + 1..s {
            let d = orderings[i].ordering.kendall_tau(&orderings[j].ordering)?;
            kendall[i][j] = d;
            kendall[j][i] = d;
            total += d;
        }
    }
    let pairs = s * s.saturating_sub(1) / 2;
    let per_scale_f1 = match truth {
        Some((fitted, dag)) => Some(
            orderings
                .iter()
                .map(|o| {
                    let a = assemble(
                        &fitted.prepared,
                        std::slice::from_ref(&o.ordering),
                        &fitted.cfg,
                    )?;
                    super::window_f1(&a.window, dag)
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok(DiversityReport {
        scales: orderings.iter().map(|o| o.k).collect(),
        kendall,
        mean_pairwise: if pairs == 0 {
            0.0
        } else {
            total / pairs as f64
        },
        per_scale_f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate, DgpConfig};
    use crate::diffusion::TrainConfig;

    fn so(k: usize, seq: &[usize]) -> ScaleOrdering {
        ScaleOrdering {
            k,
            ordering: Ordering::new(seq.to_vec()).unwrap(),
            leaf_variances: vec![0.0; seq.len()],
        }
    }

    #[test]
    fn identical_orderings_have_zero_distance() {
        let r = diversity_report(&[so(1, &[0, 1, 2]), so(5, &[0, 1, 2])], None).unwrap();
        assert_eq!(r.kendall, vec![vec![0.0; 2]; 2]);
        assert_eq!(r.mean_pairwise, 0.0);
    }

    #[test]
    fn distance_matrix_is_symmetric_with_zero_diagonal() {
        let os = [
            so(1, &[0, 1, 2, 3]),
            so(2, &[3, 2, 1, 0]),
            so(3, &[1, 0, 3, 2]),
        ];
        let r = diversity_report(&os, None).unwrap();
        for i in 0..3 {
            assert_eq!(r.kendall[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(r.kendall[i][j], r.kendall[j][i]);
            }
        }
        assert_eq!(r.kendall[0][1], 1.0);
    }

    fn quick_cfg() -> DiscoverConfig {
        DiscoverConfig {
            train: TrainConfig {
                max_epochs: 10,
                width: Some(16),
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn cached_orderings_match_a_fresh_extraction() {
        let inst = generate(&DgpConfig::new(300, 2, 1, 1)).unwrap();
        let cfg = quick_cfg();
        let fitted = FittedInstance::fit(&[inst.series.view()], &cfg).unwrap();
        let four = fitted.orderings(&fitted.scales_for(4).unwrap()).unwrap();
        let two = fitted
            .orderings(&ScaleSet::new(vec![four[1].k, 7], 100).unwrap())
            .unwrap();
        let reused = two.iter().find(|o| o.k == four[1].k).unwrap();
        assert_eq!(reused, &four[1]);
        let hessian = crate::ordering::OrderingConfig {
            seed: cfg.seed,
            ..cfg.hessian.clone()
        };
        let direct =
            crate::ordering::order_at_scale(&fitted.net.net, &fitted.prepared.data, 7, &hessian)
                .unwrap();
        assert_eq!(two.iter().find(|o| o.k == 7).unwrap(), &direct);
    }

    #[test]
    fn sweeps_emit_one_row_per_value() {
        let inst = generate(&DgpConfig::new(300, 2, 1, 2)).unwrap();
        let cfg = quick_cfg();
        let fitted = FittedInstance::fit(&[inst.series.view()], &cfg).unwrap();
        let rows = sweep_fitted(&fitted, &inst.dag, &Ablation::Theta(vec![0.0, 0.5, 1.0])).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.parameter == "theta"));
        let rows = sweep_fitted(&fitted, &inst.dag, &Ablation::Orderings(vec![1, 2])).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(sweep_fitted(&fitted, &inst.dag, &Ablation::TauMax(vec![1])).is_err());
    }
}
