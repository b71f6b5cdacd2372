//! The full discovery pipeline, split into stages so sweeps can reuse a
//! fitted network.

use std::time::Instant;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{constrain, prune, threshold, vote, PruneConfig, PruneOutcome, VoteMatrix};
use crate::diffusion::{train, TrainConfig, TrainReport, TrainedNet};
use crate::error::{Error, Result, StageExt};
use crate::graph::{summarize, Edge, EdgeSet, Ordering, SummaryAdjacency, TemporalDag};
use crate::lagembed::{stack_trajectories, standardize, LagMatrix, Standardization};
use crate::ordering::{
    multi_scale_orderings, select_scales, OrderingConfig, ScaleOrdering, ScaleSet,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscoverConfig {
    pub tau_max: usize,
    pub standardize: bool,
    /// Number of orderings `S`.
    pub orderings: usize,
    /// Scales are spread over the lowest `low_fraction` of the schedule.
    pub low_fraction: f64,
    /// Explicit noise steps, overriding `orderings` and `low_fraction`.
    pub scales: Option<Vec<usize>>,
    pub theta: f64,
    /// Drop contemporaneous candidates.
    pub strict: bool,
    /// Drives every random stream; the seeds inside the stage configs are
    /// ignored.
    pub seed: u64,
    pub train: TrainConfig,
    pub hessian: OrderingConfig,
    pub prune: PruneConfig,
}

impl Default for DiscoverConfig {
    fn default() -> Self {
        DiscoverConfig {
            tau_max: 1,
            standardize: true,
            orderings: 10,
            low_fraction: 0.5,
            scales: None,
            theta: 0.0,
            strict: true,
            seed: 0,
            train: TrainConfig::default(),
            hessian: OrderingConfig::default(),
            prune: PruneConfig::default(),
        }
    }
}

impl DiscoverConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.prune.validate()?;
        self.scale_set()?;
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::invalid(format!(
                "threshold {} outside [0, 1]",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn scale_set(&self) -> Result<ScaleSet> {
        match &self.scales {
            Some(k) => ScaleSet::new(k.clone(), self.train.k_max),
            None => select_scales(self.train.k_max, self.orderings, self.low_fraction),
        }
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    fn hessian_config(&self) -> OrderingConfig {
        OrderingConfig {
            seed: self.seed,
            ..self.hessian.clone()
        }
    }
}

/// Lag-embedded (and optionally standardized) training data.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub data: LagMatrix,
    pub standardization: Option<Standardization>,
    pub skipped_trajectories: Vec<usize>,
}

pub fn prepare(trajectories: &[ArrayView2<f64>], cfg: &DiscoverConfig) -> Result<Prepared> {
    let (raw, skipped) = stack_trajectories(trajectories, cfg.tau_max)?;
    let (data, standardization) = if cfg.standardize {
        let (z, tf) = standardize(&raw)?;
        (z, Some(tf))
    } else {
        (raw, None)
    };
    Ok(Prepared {
        data,
        standardization,
        skipped_trajectories: skipped,
    })
}

pub fn fit(prepared: &Prepared, cfg: &DiscoverConfig) -> Result<TrainedNet> {
    train(prepared.data.data().view(), &cfg.train_config())
}

pub fn extract(
    net: &TrainedNet,
    prepared: &Prepared,
    scales: &ScaleSet,
    cfg: &DiscoverConfig,
) -> Result<Vec<ScaleOrdering>> {
    multi_scale_orderings(&net.net, &prepared.data, scales, &cfg.hessian_config())
}

/// Everything downstream of the orderings.
#[derive(Clone, Debug, Serialize)]
pub struct Assembled {
    pub votes: VoteMatrix,
    pub candidates: EdgeSet,
    pub pruned: PruneOutcome,
    pub window: TemporalDag,
}

/// Greedy acyclic subset, heaviest votes first.
fn break_cycles(n: usize, edges: &EdgeSet, votes: &VoteMatrix) -> EdgeSet {
    let mut ranked: Vec<Edge> = edges.iter().copied().collect();
    ranked.sort_by(|&(a, b), &(c, d)| {
        votes
            .count(c, d)
            .cmp(&votes.count(a, b))
            .then((a, b).cmp(&(c, d)))
    });
    let mut kept = EdgeSet::new();
    for e in ranked {
        kept.insert(e);
        if crate::graph::topological_order(n, &kept).is_err() {
            kept.remove(&e);
        }
    }
    kept
}

pub fn assemble(
    prepared: &Prepared,
    orderings: &[Ordering],
    cfg: &DiscoverConfig,
) -> Result<Assembled> {
    let space = prepared.data.space();
    let votes = vote(orderings)?;
    let soft = threshold(&votes, cfg.theta)?;
    let candidates = constrain(space, &soft, cfg.strict);
    let pruned = prune(&candidates, &prepared.data, &cfg.prune, Some(&votes)).stage("prune")?;
    let edges = if cfg.strict {
        pruned.edges.clone()
    } else {
        break_cycles(space.len(), &pruned.edges, &votes)
    };
    let window = TemporalDag::from_edges(space, edges)?;
    Ok(Assembled {
        votes,
        candidates,
        pruned,
        window,
    })
}

/// Wall-clock seconds per stage.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timings {
    pub prepare: f64,
    pub train: f64,
    pub orderings: f64,
    pub aggregate: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Diagnostics {
    pub scales: Vec<usize>,
    pub orderings: Vec<ScaleOrdering>,
    pub votes: Vec<Vec<f64>>,
    pub candidates: EdgeSet,
    pub prune: PruneOutcome,
    pub train: TrainReport,
    pub standardization: Option<Standardization>,
    pub skipped_trajectories: Vec<usize>,
    pub timings: Timings,
}

#[derive(Clone, Debug, Serialize)]
pub struct Discovery {
    pub window: TemporalDag,
    pub summary: SummaryAdjacency,
    pub diagnostics: Diagnostics,
    /// The trained network, kept for reuse.
    #[serde(skip)]
    pub net: TrainedNet,
}

/// Embed, standardize, train, extract orderings, vote, threshold,
/// constrain, prune and summarize.
pub fn discover(trajectories: &[ArrayView2<f64>], cfg: &DiscoverConfig) -> Result<Discovery> {
    cfg.validate().stage("config")?;
    let start = Instant::now();
    let mut timings = Timings::default();

    let t = Instant::now();
    let prepared = prepare(trajectories, cfg).stage("embed")?;
    timings.prepare = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let net = fit(&prepared, cfg).stage("train")?;
    timings.train = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let scales = cfg.scale_set()?;
    let orderings = extract(&net, &prepared, &scales, cfg).stage("orderings")?;
    timings.orderings = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let plain: Vec<Ordering> = orderings.iter().map(|o| o.ordering.clone()).collect();
    let assembled = assemble(&prepared, &plain, cfg).stage("aggregate")?;
    timings.aggregate = t.elapsed().as_secs_f64();
    timings.total = start.elapsed().as_secs_f64();

    let space = prepared.data.space();
    let summary = summarize(space, assembled.window.edges());
    let votes = assembled
        .votes
        .weights()
        .outer_iter()
        .map(|r| r.to_vec())
        .collect();
    Ok(Discovery {
        window: assembled.window,
        summary,
        diagnostics: Diagnostics {
            scales: scales.scales().to_vec(),
            orderings,
            votes,
            candidates: assembled.candidates,
            prune: assembled.pruned,
            train: net.report.clone(),
            standardization: prepared.standardization,
            skipped_trajectories: prepared.skipped_trajectories,
            timings,
        },
        net,
    })
}
