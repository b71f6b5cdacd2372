use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::net::ScoreNet;
use crate::error::{Error, Result};

/// Which rows the Jacobian is evaluated on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianInput {
    /// Active columns noised to the evaluation step, as during training.
    #[default]
    Perturbed,
    /// Clean rows, with the step only entering through the embedding.
    Clean,
}

/// Variance over the rows of `∂ε_j/∂x_j` for each active coordinate `j`.
///
/// `rows` are evaluated as given. Inactive coordinates stay in the input but
/// are neither differentiated nor read from the output. The noise-prediction
/// Jacobian is a negative multiple of the score Jacobian at a fixed step, so
/// the ranking of the variances is that of the Hessian diagonal of
/// `log p`.
pub fn hessian_diag_variance(
    net: &ScoreNet,
    rows: ArrayView2<f64>,
    k: usize,
    active: &[usize],
) -> Result<Vec<f64>> {
    if active.is_empty() {
        return Err(Error::invalid("no active variables"));
    }
    if k > net.k_max() {
        return Err(Error::invalid(format!(
            "noise step {k} outside 0..={}",
            net.k_max()
        )));
    }
    if rows.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let h = net.jacobian_diag(rows, k, active)?;
    Ok(column_variances(&h))
}

/// Population variance per column, summed in row order.
pub(crate) fn column_variances(h: &Array2<f64>) -> Vec<f64> {
    let rows = h.nrows() as f64;
    h.axis_iter(Axis(1))
        .map(|col| {
            let mean = col.sum() / rows;
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows
        })
        .collect()
}
