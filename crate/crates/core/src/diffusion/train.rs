use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::net::{default_width, ScoreNet};
use super::schedule::NoiseSchedule;
use crate::error::{Error, Result};
use crate::rng;

const STREAM_INIT: u64 = 10;
const STREAM_SPLIT: u64 = 11;
const STREAM_VALID: u64 = 12;
const STREAM_EPOCH: u64 = 13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub k_max: usize,
    /// Hidden layers.
    pub depth: usize,
    /// Hidden width; `None` picks `max(64, 4n)`.
    pub width: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Epochs without validation improvement before stopping.
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    /// Share of rows held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k_max: 100,
            depth: 3,
            width: None,
            batch_size: 1024,
            learning_rate: 0.001,
            early_stop_patience: 300,
            max_epochs: 3000,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.k_max > 0
            && self.depth > 0
            && self.width.is_none_or(|w| w > 0)
            && self.batch_size > 0
            && self.learning_rate > 0.0
            && self.early_stop_patience > 0
            && self.max_epochs > 0;
        if !positive {
            return Err(Error::invalid("training hyperparameters must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation fraction must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub best_epoch: usize,
    pub steps: usize,
    pub initial_val_loss: f64,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedNet {
    pub net: ScoreNet,
    pub report: TrainReport,
}

/// Adam with the usual β₁ = 0.9, β₂ = 0.999.
struct Adam {
    lr: f64,
    t: i32,
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(net: &ScoreNet, lr: f64) -> Self {
        let zeros: Vec<_> = net
            .layers()
            .iter()
            .map(|l| (Array2::zeros(l.w.raw_dim()), Array1::zeros(l.b.raw_dim())))
            .collect();
        Adam {
            lr,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, net: &mut ScoreNet, grads: &[(Array2<f64>, Array1<f64>)]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        let lr = self.lr;
        for (((layer, (gw, gb)), (mw, mb)), (vw, vb)) in net
            .layers_mut()
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = Self::B1 * *m + (1.0 - Self::B1) * g;
                *v = Self::B2 * *v + (1.0 - Self::B2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
            };
            ndarray::Zip::from(&mut layer.w)
                .and(gw)
                .and(mw)
                .and(vw)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.b)
                .and(gb)
                .and(mb)
                .and(vb)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// A noised batch: inputs, steps and the noise to recover.
struct NoisedBatch {
    x: Array2<f64>,
    steps: Vec<usize>,
    noise: Array2<f64>,
}

fn noised_batch<R: Rng + ?Sized>(
    data: ArrayView2<f64>,
    rows: &[usize],
    schedule: &NoiseSchedule,
    rng: &mut R,
) -> NoisedBatch {
    let n = data.ncols();
    let mut x = Array2::zeros((rows.len(), n));
    let mut noise = Array2::zeros((rows.len(), n));
    let mut steps = Vec::with_capacity(rows.len());
    for (i, &r) in rows.iter().enumerate() {
        let k = rng.random_range(1..=schedule.k_max());
        let ab = schedule.alpha_bar(k).expect("step in range");
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        for c in 0..n {
            let e: f64 = rng.sample(StandardNormal);
            noise[[i, c]] = e;
            x[[i, c]] = a * data[[r, c]] + b * e;
        }
        steps.push(k);
    }
    NoisedBatch { x, steps, noise }
}

fn mse(pred: &Array2<f64>, target: &Array2<f64>) -> f64 {
    let diff = pred - target;
    diff.mapv(|v| v * v).sum() / diff.len() as f64
}

/// Fixed held-out rows, steps and noise, drawn once so the validation loss
/// is comparable across epochs.
pub struct ValidationSet {
    batch: NoisedBatch,
}

impl ValidationSet {
    pub fn loss(&self, net: &ScoreNet) -> Result<f64> {
        let pred = net.forward_steps(self.batch.x.view(), &self.batch.steps)?;
        Ok(mse(&pred, &self.batch.noise))
    }

    /// Loss of the optimal denoiser when the clean rows are independent
    /// standard Gaussians: `E[ε | x_k] = sqrt(1 - ᾱ_k) x_k`.
    pub fn gaussian_optimum_loss(&self, schedule: &NoiseSchedule) -> f64 {
        let mut pred = self.batch.x.clone();
        for (mut row, &k) in pred.axis_iter_mut(Axis(0)).zip(&self.batch.steps) {
            let ab = schedule.alpha_bar(k).expect("step in range");
            row *= (1.0 - ab).sqrt();
        }
        mse(&pred, &self.batch.noise)
    }
}

/// Split rows into training and validation index sets.
fn split_rows(rows: usize, cfg: &TrainConfig) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.shuffle(&mut rng::stream(cfg.seed, &[STREAM_SPLIT]));
    let n_val = ((rows as f64 * cfg.validation_fraction).round() as usize).clamp(1, rows - 1);
    let val = idx.split_off(rows - n_val);
    (idx, val)
}

/// Fit the denoiser by minibatch Adam on the ε-prediction loss, keeping the
/// parameters with the best validation loss.
pub fn train(data: ArrayView2<f64>, cfg: &TrainConfig) -> Result<TrainedNet> {
    train_with_validation(data, cfg).map(|(t, _)| t)
}

pub fn train_with_validation(
    data: ArrayView2<f64>,
    cfg: &TrainConfig,
) -> Result<(TrainedNet, ValidationSet)> {
    cfg.validate()?;
    let (rows, n) = data.dim();
    if rows < 2 {
        return Err(Error::invalid("need at least two rows to train"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training data contains non-finite values"));
    }
    let schedule = NoiseSchedule::new(cfg.k_max)?;
    let width = cfg.width.unwrap_or_else(|| default_width(n));
    let mut net = ScoreNet::new(
        n,
        cfg.k_max,
        cfg.depth,
        width,
        &mut rng::stream(cfg.seed, &[STREAM_INIT]),
    )?;
    let (mut train_rows, val_rows) = split_rows(rows, cfg);
    let val = ValidationSet {
        batch: noised_batch(
            data,
            &val_rows,
            &schedule,
            &mut rng::stream(cfg.seed, &[STREAM_VALID]),
        ),
    };

    let initial = val.loss(&net)?;
    let mut best = (initial, net.clone(), 0usize);
    let mut adam = Adam::new(&net, cfg.learning_rate);
    let mut since_best = 0;
    let mut steps = 0;
    let mut epochs = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        epochs = epoch;
        let mut er = rng::stream(cfg.seed, &[STREAM_EPOCH, epoch as u64]);
        train_rows.shuffle(&mut er);
        for chunk in train_rows.chunks(cfg.batch_size) {
            let batch = noised_batch(data, chunk, &schedule, &mut er);
            let trace = net.trace(batch.x.view(), &batch.steps)?;
            let scale = 2.0 / (trace.output.len() as f64);
            let grad_out = (&trace.output - &batch.noise) * scale;
            let grads = net.backward(&trace, grad_out);
            adam.step(&mut net, &grads);
            steps += 1;
        }
        let loss = val.loss(&net)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "validation loss became {loss} at epoch {epoch} (seed {})",
                cfg.seed
            )));
        }
        if loss < best.0 {
            best = (loss, net.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (best_val_loss, net, best_epoch) = best;
    net.check_finite()?;
    Ok((
        TrainedNet {
            net,
            report: TrainReport {
                epochs,
                best_epoch,
                steps,
                initial_val_loss: initial,
                best_val_loss,
                stopped_early,
            },
        },
        val,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_data(rows: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::stream(seed, &[]);
        Array2::from_shape_fn((rows, n), |_| r.sample(StandardNormal))
    }

    fn quick(seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: 256,
            max_epochs: 30,
            early_stop_patience: 10,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_improves_validation_loss() {
        let x = gaussian_data(1000, 3, 1);
        let t = train(x.view(), &quick(4)).unwrap();
        assert!(t.report.best_val_loss < t.report.initial_val_loss);
        assert!(t.report.best_epoch >= 1);
    }

    #[test]
    fn training_is_deterministic() {
        let x = gaussian_data(600, 2, 2);
        let a = train(x.view(), &quick(9)).unwrap();
        let b = train(x.view(), &quick(9)).unwrap();
        assert_eq!(a, b);
        let c = train(x.view(), &quick(10)).unwrap();
        assert_ne!(a.net, c.net);
    }

    #[test]
    fn gaussian_data_reaches_the_analytic_optimum() {
        let x = gaussian_data(5000, 2, 3);
        let cfg = TrainConfig {
            max_epochs: 150,
            early_stop_patience: 30,
            seed: 1,
            ..TrainConfig::default()
        };
        let (t, val) = train_with_validation(x.view(), &cfg).unwrap();
        let schedule = NoiseSchedule::new(cfg.k_max).unwrap();
        let optimum = val.gaussian_optimum_loss(&schedule);
        let gap = (t.report.best_val_loss - optimum) / optimum;
        assert!(
            gap < 0.10,
            "gap {gap}: trained {} optimum {optimum}",
            t.report.best_val_loss
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = gaussian_data(10, 2, 0);
        let bad = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train(x.view(), &bad).is_err());
        let mut y = x.clone();
        y[[3, 1]] = f64::INFINITY;
        assert!(train(y.view(), &quick(0)).is_err());
    }
}
