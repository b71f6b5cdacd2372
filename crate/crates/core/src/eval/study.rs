//! How many valid orderings it takes for their intersection to reach the
//! transitive closure.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion, mean_ci, prf1};
use crate::dgp::{sample_structure, DgpConfig};
use crate::error::{Error, Result};
use crate::graph::{enumerate_orderings, temporal_filter, transitive_closure, EdgeSet, NodeSpace};
use crate::rng;

const STREAM_STUDY_DAG: u64 = 40;
const STREAM_STUDY_SAMPLE: u64 = 41;
const MAX_REDRAWS: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub d: usize,
    /// Lag of every link in the sampled template.
    pub tau: usize,
    /// Window the template is unrolled into.
    pub tau_max: usize,
    pub density: f64,
    /// Percentages of the enumerated orderings, in `(0, 100]`.
    pub fractions: Vec<f64>,
    pub repetitions: usize,
    /// Contemporaneous pairs are removed as well by the temporal filter.
    pub strict: bool,
    pub cap: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            d: 3,
            tau: 1,
            tau_max: 2,
            density: 0.3,
            fractions: vec![
                1.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0,
            ],
            repetitions: 50,
            strict: true,
            cap: 400_000,
            seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() || self.fractions.iter().any(|&f| !(f > 0.0 && f <= 100.0)) {
            return Err(Error::invalid("fractions must lie in (0, 100]"));
        }
        if self.repetitions == 0 || self.cap == 0 {
            return Err(Error::invalid("repetitions and cap must be positive"));
        }
        if self.tau < 1 || self.tau_max < self.tau {
            return Err(Error::invalid("need 1 <= tau <= tau_max"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::invalid("density must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// One repetition at one fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub repetition: usize,
    pub fraction: f64,
    /// Orderings intersected.
    pub m: usize,
    /// Orderings of the sampled graph.
    pub total: usize,
    pub constrained: bool,
    pub f1: f64,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyCurve {
    pub constrained: bool,
    pub fractions: Vec<f64>,
    pub f1_mean: Vec<f64>,
    /// Half-width of the 95% interval.
    pub f1_ci: Vec<f64>,
    pub exact_rate: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub records: Vec<StudyRecord>,
    /// Repetitions dropped, with the reason.
    pub skipped: Vec<(usize, String)>,
    pub unconstrained: StudyCurve,
    pub constrained: StudyCurve,
}

impl StudyOutcome {
    pub fn curve(&self, constrained: bool) -> &StudyCurve {
        if constrained {
            &self.constrained
        } else {
            &self.unconstrained
        }
    }
}

/// Draw a temporal DAG with at least one edge in the window.
fn sample_window(cfg: &StudyConfig, rep: usize) -> Result<(NodeSpace, EdgeSet)> {
    let window = NodeSpace::new(cfg.d, cfg.tau_max)?;
    for attempt in 0..MAX_REDRAWS {
        let dgp = DgpConfig {
            edge_density: cfg.density,
            ..DgpConfig::new(
                cfg.tau + 1,
                cfg.d,
                cfg.tau,
                rng::mix(cfg.seed, &[STREAM_STUDY_DAG, rep as u64, attempt]),
            )
        };
        let dag = sample_structure(&dgp)?.unroll(window)?;
        if !dag.edges().is_empty() {
            return Ok((window, dag.into_edges()));
        }
    }
    Err(Error::invalid("density too low to draw a graph with edges"))
}

fn run_repetition(
    cfg: &StudyConfig,
    rep: usize,
) -> Result<std::result::Result<Vec<StudyRecord>, String>> {
    let (space, edges) = sample_window(cfg, rep)?;
    let n = space.len();
    let closure = transitive_closure(n, &edges)?;
    let mut all = enumerate_orderings(n, &edges, cfg.cap)?;
    if all.overflow {
        return Ok(Err(format!("more than {} orderings", cfg.cap)));
    }
    let total = all.orderings.len();
    all.orderings.shuffle(&mut rng::stream(
        cfg.seed,
        &[STREAM_STUDY_SAMPLE, rep as u64],
    ));

    // running intersection over nested prefixes of the shuffled list
    let mut before = vec![true; n * n];
    for a in 0..n {
        before[a * n + a] = false;
    }
    let mut used = 0;
    let mut records = Vec::with_capacity(2 * cfg.fractions.len());
    let mut fractions = cfg.fractions.clone();
    fractions.sort_by(f64::total_cmp);
    for &fraction in &fractions {
        let m = ((fraction / 100.0 * total as f64).ceil() as usize).clamp(1, total);
        for o in &all.orderings[used..m] {
            for a in 0..n {
                for b in 0..n {
                    before[a * n + b] &= o.precedes(a, b);
                }
            }
        }
        used = used.max(m);
        let est: EdgeSet = (0..n * n)
            .filter(|&i| before[i])
            .map(|i| (i / n, i % n))
            .collect();
        for constrained in [false, true] {
            let pred = if constrained {
                temporal_filter(space, &est, cfg.strict)
            } else {
                est.clone()
            };
            let f1 = prf1(confusion(&pred, &closure)).f1;
            records.push(StudyRecord {
                repetition: rep,
                fraction,
                m,
                total,
                constrained,
                f1,
                exact: pred == closure,
            });
        }
    }
    Ok(Ok(records))
}

fn curve(records: &[StudyRecord], fractions: &[f64], constrained: bool) -> StudyCurve {
    let mut out = StudyCurve {
        constrained,
        fractions: fractions.to_vec(),
        f1_mean: Vec::new(),
        f1_ci: Vec::new(),
        exact_rate: Vec::new(),
    };
    for &f in fractions {
        let rows: Vec<&StudyRecord> = records
            .iter()
            .filter(|r| r.fraction == f && r.constrained == constrained)
            .collect();
        let f1s: Vec<f64> = rows.iter().map(|r| r.f1).collect();
        let (mean, ci) = mean_ci(&f1s);
        out.f1_mean.push(mean);
        out.f1_ci.push(ci);
        out.exact_rate
            .push(rows.iter().filter(|r| r.exact).count() as f64 / rows.len().max(1) as f64);
    }
    out
}

/// Intersect growing random subsets of all valid orderings of random
/// temporal DAGs and score them against the transitive closure.
pub fn ordering_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let results: Vec<_> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, rep))
        .collect::<Result<_>>()?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (rep, r) in results.into_iter().enumerate() {
        match r {
            Ok(rows) => records.extend(rows),
            Err(reason) => skipped.push((rep, reason)),
        }
    }
    let mut fractions = cfg.fractions.clone();
    fractions.sort_by(f64::total_cmp);
    fractions.dedup();
    Ok(StudyOutcome {
        unconstrained: curve(&records, &fractions, false),
        constrained: curve(&records, &fractions, true),
        records,
        skipped,
    })
}
