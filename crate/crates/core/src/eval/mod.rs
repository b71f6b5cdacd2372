//! Scoring predicted graphs, the ordering-count study and ablation sweeps.

mod ablation;
mod study;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{summarize, NodeId, SummaryAdjacency, TemporalDag};

pub use ablation::{
    diversity_report, run_ablation, sweep_fitted, Ablation, AblationRow, DiversityReport,
    FittedInstance,
};
pub use study::{ordering_study, StudyConfig, StudyCurve, StudyOutcome, StudyRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

pub fn confusion<T: Ord>(pred: &BTreeSet<T>, truth: &BTreeSet<T>) -> Confusion {
    let tp = pred.intersection(truth).count();
    Confusion {
        tp,
        fp: pred.len() - tp,
        fn_: truth.len() - tp,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1, each 0 when its denominator is 0.
pub fn prf1(c: Confusion) -> Scores {
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores {
        precision,
        recall,
        f1,
    }
}

/// Edges of a window graph that end at lag 0, keyed by variable and lag so
/// graphs over different lag windows compare directly.
pub fn window_edges(dag: &TemporalDag) -> BTreeSet<(NodeId, NodeId)> {
    dag.node_edges().filter(|(_, to)| to.lag == 0).collect()
}

fn same_vars(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::NodeMismatch(a, b));
    }
    Ok(())
}

/// Window-graph scores over edges that end at lag 0.
pub fn window_scores(pred: &TemporalDag, truth: &TemporalDag) -> Result<(Confusion, Scores)> {
    same_vars(pred.space().d(), truth.space().d())?;
    let c = confusion(&window_edges(pred), &window_edges(truth));
    Ok((c, prf1(c)))
}

pub fn window_f1(pred: &TemporalDag, truth: &TemporalDag) -> Result<f64> {
    Ok(window_scores(pred, truth)?.1.f1)
}

/// Variable-level summary of the lag-0-terminating part of a window graph.
pub fn summary_of(dag: &TemporalDag) -> SummaryAdjacency {
    let space = dag.space();
    let edges = dag
        .edges()
        .iter()
        .copied()
        .filter(|&(_, b)| space.lag_of(b) == 0)
        .collect();
    summarize(space, &edges)
}

pub fn summary_scores(
    pred: &SummaryAdjacency,
    truth: &SummaryAdjacency,
) -> Result<(Confusion, Scores)> {
    same_vars(pred.d, truth.d)?;
    let c = confusion(&pred.edges, &truth.edges);
    Ok((c, prf1(c)))
}

pub fn summary_f1(pred: &TemporalDag, truth: &TemporalDag) -> Result<f64> {
    Ok(summary_scores(&summary_of(pred), &summary_of(truth))?.1.f1)
}

/// Window and summary scores in one record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphScores {
    pub window: Scores,
    pub window_confusion: Confusion,
    pub summary: Scores,
    pub summary_confusion: Confusion,
}

pub fn score_graph(pred: &TemporalDag, truth: &TemporalDag) -> Result<GraphScores> {
    let (window_confusion, window) = window_scores(pred, truth)?;
    let (summary_confusion, summary) = summary_scores(&summary_of(pred), &summary_of(truth))?;
    Ok(GraphScores {
        window,
        window_confusion,
        summary,
        summary_confusion,
    })
}

/// Mean and half-width of the normal-approximation 95% interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeSpace;
    use proptest::prelude::*;

    fn set(v: &[u8]) -> BTreeSet<u8> {
        v.iter().copied().collect()
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(
            confusion(&set(&[1, 2, 3]), &set(&[1, 2, 3])),
            Confusion {
                tp: 3,
                fp: 0,
                fn_: 0
            }
        );
        assert_eq!(
            confusion(&set(&[]), &set(&[1, 2])),
            Confusion {
                tp: 0,
                fp: 0,
                fn_: 2
            }
        );
        assert_eq!(
            confusion(&set(&[1, 2, 3]), &set(&[1, 2, 4])),
            Confusion {
                tp: 2,
                fp: 1,
                fn_: 1
            }
        );
    }

    #[test]
    fn prf1_examples() {
        let s = prf1(Confusion {
            tp: 2,
            fp: 1,
            fn_: 1,
        });
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            prf1(Confusion {
                tp: 4,
                fp: 0,
                fn_: 0
            }),
            Scores {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        assert_eq!(prf1(Confusion::default()), Scores::default());
    }

    fn dag(space: NodeSpace, edges: &[((usize, usize), (usize, usize))]) -> TemporalDag {
        TemporalDag::new(
            space,
            edges
                .iter()
                .map(|&((a, la), (b, lb))| (NodeId::new(a, la), NodeId::new(b, lb))),
        )
        .unwrap()
    }

    #[test]
    fn summary_can_beat_window() {
        let space = NodeSpace::new(2, 2).unwrap();
        // truth has x0 -> x1 at two lags, prediction finds one of them
        let truth = dag(space, &[((0, 1), (1, 0)), ((0, 2), (1, 0))]);
        let pred = dag(space, &[((0, 1), (1, 0))]);
        let fw = window_f1(&pred, &truth).unwrap();
        let fs = summary_f1(&pred, &truth).unwrap();
        assert!((fw - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(fs, 1.0);
        assert!(fs > fw);
    }

    #[test]
    fn windows_of_different_depth_compare_by_node() {
        let truth = dag(NodeSpace::new(2, 1).unwrap(), &[((0, 1), (1, 0))]);
        let pred = dag(
            NodeSpace::new(2, 3).unwrap(),
            &[((0, 1), (1, 0)), ((1, 3), (1, 2))],
        );
        // the edge into lag 2 is a stationary repeat and is not scored
        assert_eq!(window_f1(&pred, &truth).unwrap(), 1.0);
        let other = dag(NodeSpace::new(3, 1).unwrap(), &[]);
        assert!(window_f1(&other, &truth).is_err());
    }

    #[test]
    fn interval_of_constant_values_is_zero() {
        assert_eq!(mean_ci(&[0.5; 10]), (0.5, 0.0));
        let (m, h) = mean_ci(&[0.0, 1.0]);
        assert_eq!(m, 0.5);
        assert!((h - 1.96 * 0.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn scores_stay_in_range(tp in 0..50usize, fp in 0..50usize, fn_ in 0..50usize) {
            let s = prf1(Confusion { tp, fp, fn_ });
            for v in [s.precision, s.recall, s.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(s.f1 == 1.0, tp > 0 && fp == 0 && fn_ == 0);
        }

        #[test]
        fn swapping_sets_swaps_errors(
            a in prop::collection::btree_set(0..20u8, 0..12),
            b in prop::collection::btree_set(0..20u8, 0..12),
        ) {
            let ab = confusion(&a, &b);
            let ba = confusion(&b, &a);
            prop_assert_eq!(ab.tp, ba.tp);
            prop_assert_eq!(ab.fp, ba.fn_);
            prop_assert_eq!(ab.fn_, ba.fp);
            prop_assert_eq!(prf1(ab).f1 == 1.0, !a.is_empty() && a == b);
        }
    }
}
