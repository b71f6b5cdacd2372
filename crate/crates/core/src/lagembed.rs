//! Lag-embedded design matrix.
//!
//! Row `r` of the embedding of a `T x d` series holds
//! `[x(t), x(t-1), ..., x(t-tau_max)]` for `t = tau_max + r`, so column
//! `var + d * lag` matches the flat node index of `(var, lag)`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::graph::{NodeId, NodeSpace};

#[derive(Clone, Debug, PartialEq)]
pub struct LagMatrix {
    data: Array2<f64>,
    space: NodeSpace,
}

impl LagMatrix {
    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn space(&self) -> NodeSpace {
        self.space
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column_node(&self, col: usize) -> NodeId {
        self.space.node(col)
    }

    /// Build from a ready-made matrix whose columns follow the flat node
    /// indexing of `space`.
    pub fn from_columns(data: Array2<f64>, space: NodeSpace) -> Result<Self> {
        if data.ncols() != space.len() {
            return Err(Error::invalid(format!(
                "matrix has {} columns, node space needs {}",
                data.ncols(),
                space.len()
            )));
        }
        check_finite(data.view())?;
        Ok(LagMatrix { data, space })
    }
}

fn check_finite(x: ArrayView2<f64>) -> Result<()> {
    for (r, row) in x.axis_iter(Axis(0)).enumerate() {
        if let Some(c) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at row {r}, column {c}"
            )));
        }
    }
    Ok(())
}

pub fn embed(series: ArrayView2<f64>, tau_max: usize) -> Result<LagMatrix> {
    let (t, d) = series.dim();
    if t <= tau_max {
        return Err(Error::invalid(format!(
            "series has {t} rows, need more than tau_max = {tau_max}"
        )));
    }
    check_finite(series)?;
    let space = NodeSpace::new(d, tau_max)?;
    let rows = t - tau_max;
    let mut data = Array2::zeros((rows, space.len()));
    for lag in 0..=tau_max {
        data.slice_mut(s![.., lag * d..(lag + 1) * d])
            .assign(&series.slice(s![tau_max - lag..t - lag, ..]));
    }
    Ok(LagMatrix { data, space })
}

/// Embed each trajectory on its own and concatenate the rows, so no row
/// mixes values from two trajectories. Trajectories too short for the
/// window are skipped and reported by index.
pub fn stack_trajectories(
    trajectories: &[ArrayView2<f64>],
    tau_max: usize,
) -> Result<(LagMatrix, Vec<usize>)> {
    let d = trajectories
        .first()
        .ok_or_else(|| Error::invalid("no trajectories"))?
        .ncols();
    let mut blocks = Vec::new();
    let mut skipped = Vec::new();
    for (i, tr) in trajectories.iter().enumerate() {
        if tr.ncols() != d {
            return Err(Error::NodeMismatch(d, tr.ncols()));
        }
        if tr.nrows() <= tau_max {
            skipped.push(i);
            continue;
        }
        blocks.push(embed(*tr, tau_max)?);
    }
    if blocks.is_empty() {
        return Err(Error::invalid(
            "every trajectory is shorter than the lag window",
        ));
    }
    let views: Vec<_> = blocks.iter().map(|b| b.data.view()).collect();
    let data = ndarray::concatenate(Axis(0), &views).expect("blocks share width");
    Ok((
        LagMatrix {
            data,
            space: blocks[0].space,
        },
        skipped,
    ))
}

/// Per-column affine map applied by [`standardize`].
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Zero mean and unit (population) variance per column.
pub fn standardize(m: &LagMatrix) -> Result<(LagMatrix, Standardization)> {
    let mean: Array1<f64> = m
        .data
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::invalid("empty matrix"))?;
    let std: Array1<f64> = m.data.std_axis(Axis(0), 0.0);
    for (c, (&sd, &mu)) in std.iter().zip(mean.iter()).enumerate() {
        if !(sd > 1e-12 * mu.abs().max(1.0)) {
            return Err(Error::ConstantColumn(c));
        }
    }
    let data = (&m.data - &mean) / &std;
    Ok((
        LagMatrix {
            data,
            space: m.space,
        },
        Standardization {
            mean: mean.to_vec(),
            std: std.to_vec(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn shape_formula() {
        let x = Array2::from_shape_fn((10, 3), |(i, j)| (i * 3 + j) as f64);
        let m = embed(x.view(), 2).unwrap();
        assert_eq!(m.data().dim(), (8, 9));
    }

    #[test]
    fn zero_lag_is_identity() {
        let x = Array2::from_shape_fn((6, 2), |(i, j)| (i + 10 * j) as f64);
        assert_eq!(embed(x.view(), 0).unwrap().data(), &x);
    }

    #[test]
    fn small_example() {
        let x = array![[1., 2.], [3., 4.], [5., 6.]];
        let m = embed(x.view(), 1).unwrap();
        assert_eq!(m.data(), &array![[3., 4., 1., 2.], [5., 6., 3., 4.]]);
        assert_eq!(m.column_node(2), NodeId::new(0, 1));
    }

    #[test]
    fn rejects_short_or_non_finite() {
        let x = array![[1., 2.], [3., 4.]];
        assert!(embed(x.view(), 2).is_err());
        let y = array![[1., f64::NAN], [3., 4.], [5., 6.]];
        assert!(embed(y.view(), 1).is_err());
    }

    #[test]
    fn stacking_adds_rows_per_trajectory() {
        let a = Array2::from_shape_fn((5, 2), |(i, j)| (i + j) as f64);
        let b = Array2::from_shape_fn((7, 2), |(i, j)| (100 + i + j) as f64);
        let (single, _) = stack_trajectories(&[a.view()], 1).unwrap();
        assert_eq!(single, embed(a.view(), 1).unwrap());
        let (m, skipped) = stack_trajectories(&[a.view(), b.view()], 1).unwrap();
        assert_eq!(m.rows(), 10);
        assert!(skipped.is_empty());
        // no row mixes trajectory a (<100) with trajectory b (>=100)
        for row in m.data().rows() {
            let big = row.iter().filter(|&&v| v >= 100.0).count();
            assert!(big == 0 || big == row.len());
        }
    }

    #[test]
    fn many_short_trajectories() {
        let trs: Vec<Array2<f64>> = (0..480)
            .map(|k| Array2::from_shape_fn((40, 3), |(i, j)| (k * 1000 + i * 3 + j) as f64))
            .collect();
        let views: Vec<_> = trs.iter().map(|t| t.view()).collect();
        let (m, _) = stack_trajectories(&views, 1).unwrap();
        assert_eq!(m.rows(), 480 * 39);
    }

    #[test]
    fn short_trajectories_are_skipped() {
        let a = Array2::<f64>::ones((1, 2));
        let b = Array2::from_shape_fn((4, 2), |(i, j)| (i * j) as f64);
        let (m, skipped) = stack_trajectories(&[a.view(), b.view()], 1).unwrap();
        assert_eq!(skipped, vec![0]);
        assert_eq!(m.rows(), 3);
    }

    #[test]
    fn standardize_examples() {
        let space = NodeSpace::new(2, 0).unwrap();
        let m = LagMatrix::from_columns(array![[0., 1.], [2., -1.]], space).unwrap();
        let (z, tf) = standardize(&m).unwrap();
        assert_eq!(z.data(), &array![[-1., 1.], [1., -1.]]);
        assert_eq!(tf.mean, vec![1.0, 0.0]);
        let (again, _) = standardize(&z).unwrap();
        assert!(again
            .data()
            .iter()
            .zip(z.data().iter())
            .all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn constant_column_is_rejected() {
        let space = NodeSpace::new(2, 0).unwrap();
        let m = LagMatrix::from_columns(array![[0., 5.], [2., 5.], [1., 5.]], space).unwrap();
        assert!(matches!(standardize(&m), Err(Error::ConstantColumn(1))));
    }

    proptest! {
        #[test]
        fn lag_blocks_shift_rows(t in 2..30usize, d in 1..4usize, tau_max in 0..4usize) {
            prop_assume!(t > tau_max);
            // sentinel padding around the series catches out-of-range reads
            let padded = Array2::from_shape_fn((t + 2, d), |(i, j)| {
                if i == 0 || i == t + 1 { f64::NAN } else { (i * 7 + j) as f64 }
            });
            let x = padded.slice(s![1..t + 1, ..]);
            let m = embed(x, tau_max).unwrap();
            prop_assert!(m.data().iter().all(|v| v.is_finite()));
            for r in 0..m.rows() {
                for lag in 0..=tau_max {
                    for v in 0..d {
                        prop_assert_eq!(m.data()[[r, v + d * lag]], x[[tau_max + r - lag, v]]);
                        if r >= lag {
                            prop_assert_eq!(m.data()[[r, v + d * lag]], m.data()[[r - lag, v]]);
                        }
                    }
                }
            }
        }
    }
}
