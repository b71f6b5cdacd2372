//! Fully connected noise-prediction network with hand-written forward,
//! backward and input-Jacobian passes.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sinusoid pairs in the step embedding.
const EMBED_FREQS: usize = 8;
/// Width of the step embedding: one linear feature plus the sinusoids.
pub const EMBED_DIM: usize = 1 + 2 * EMBED_FREQS;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`
    pub(crate) w: Array2<f64>,
    pub(crate) b: Array1<f64>,
}

impl Dense {
    fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Dense {
            w: Array2::from_shape_fn((inputs, outputs), |_| rng.random_range(-bound..bound)),
            b: Array1::from_shape_fn(outputs, |_| rng.random_range(-bound..bound)),
        }
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

#[inline]
fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// `ε_θ(x, k)`: predicts the unit Gaussian noise mixed into `x` at step `k`.
///
/// The input is the data row concatenated with an embedding of `k / k_max`
/// (the scalar itself plus sines and cosines at octave frequencies). Hidden
/// layers use SiLU so the input Jacobian is smooth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreNet {
    n: usize,
    k_max: usize,
    layers: Vec<Dense>,
}

/// Activations kept from a forward pass.
pub(crate) struct Trace {
    /// Layer inputs, starting with the assembled network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    pub(crate) output: Array2<f64>,
}

pub fn default_width(n: usize) -> usize {
    (4 * n).max(64)
}

impl ScoreNet {
    pub fn new<R: Rng + ?Sized>(
        n: usize,
        k_max: usize,
        depth: usize,
        width: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 || k_max == 0 || depth == 0 || width == 0 {
            return Err(Error::invalid("network dimensions must be positive"));
        }
        let mut layers = Vec::with_capacity(depth + 1);
        let mut inputs = n + EMBED_DIM;
        for _ in 0..depth {
            layers.push(Dense::init(inputs, width, rng));
            inputs = width;
        }
        layers.push(Dense::init(inputs, n, rng));
        Ok(ScoreNet { n, k_max, layers })
    }

    /// A network from explicit layers; the first takes `n + EMBED_DIM`
    /// inputs and the last returns `n` outputs.
    pub fn from_layers(
        n: usize,
        k_max: usize,
        layers: Vec<(Array2<f64>, Array1<f64>)>,
    ) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::invalid("need at least one hidden layer"));
        }
        let mut inputs = n + EMBED_DIM;
        let mut out = Vec::new();
        for (w, b) in layers {
            if w.nrows() != inputs || w.ncols() != b.len() {
                return Err(Error::invalid("layer shapes do not chain"));
            }
            inputs = w.ncols();
            out.push(Dense { w, b });
        }
        if inputs != n {
            return Err(Error::invalid("output width must equal input dimension"));
        }
        let net = ScoreNet {
            n,
            k_max,
            layers: out,
        };
        net.check_finite()?;
        Ok(net)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn width(&self) -> usize {
        self.layers[0].w.ncols()
    }

    pub(crate) fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let ok = self
            .layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()));
        if ok {
            Ok(())
        } else {
            Err(Error::Numerical("network parameters are not finite".into()))
        }
    }

    fn embed_step(&self, k: usize, out: &mut [f64]) {
        let s = k as f64 / self.k_max as f64;
        out[0] = s;
        for i in 0..EMBED_FREQS {
            let arg = std::f64::consts::PI * (1u64 << i) as f64 * s;
            out[1 + 2 * i] = arg.sin();
            out[2 + 2 * i] = arg.cos();
        }
    }

    fn assemble(&self, x: ArrayView2<f64>, steps: &[usize]) -> Result<Array2<f64>> {
        if x.ncols() != self.n {
            return Err(Error::invalid(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.n
            )));
        }
        if steps.len() != x.nrows() {
            return Err(Error::invalid("one step per row required"));
        }
        if let Some(&k) = steps.iter().find(|&&k| k > self.k_max) {
            return Err(Error::invalid(format!(
                "noise step {k} outside 0..={}",
                self.k_max
            )));
        }
        let mut input = Array2::zeros((x.nrows(), self.n + EMBED_DIM));
        input.slice_mut(s![.., ..self.n]).assign(&x);
        let mut emb = [0.0; EMBED_DIM];
        let mut last = usize::MAX;
        for (r, &k) in steps.iter().enumerate() {
            if k != last {
                self.embed_step(k, &mut emb);
                last = k;
            }
            input
                .slice_mut(s![r, self.n..])
                .assign(&ndarray::ArrayView1::from(&emb[..]));
        }
        Ok(input)
    }

    pub(crate) fn trace(&self, x: ArrayView2<f64>, steps: &[usize]) -> Result<Trace> {
        let mut h = self.assemble(x, steps)?;
        let hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(hidden);
        for layer in &self.layers[..hidden] {
            let z = h.dot(&layer.w) + &layer.b;
            let a = z.mapv(silu);
            inputs.push(h);
            pre.push(z);
            h = a;
        }
        let last = &self.layers[hidden];
        let output = h.dot(&last.w) + &last.b;
        inputs.push(h);
        Ok(Trace {
            inputs,
            pre,
            output,
        })
    }

    /// Predicted noise for each row, every row at step `k`.
    pub fn forward(&self, x: ArrayView2<f64>, k: usize) -> Result<Array2<f64>> {
        let steps = vec![k; x.nrows()];
        Ok(self.trace(x, &steps)?.output)
    }

    pub fn forward_steps(&self, x: ArrayView2<f64>, steps: &[usize]) -> Result<Array2<f64>> {
        Ok(self.trace(x, steps)?.output)
    }

    /// Parameter gradients of a loss whose gradient with respect to the
    /// output is `grad_out`. Returned in layer order as `(dW, db)`.
    pub(crate) fn backward(
        &self,
        trace: &Trace,
        grad_out: Array2<f64>,
    ) -> Vec<(Array2<f64>, Array1<f64>)> {
        let hidden = self.layers.len() - 1;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out;
        for l in (0..=hidden).rev() {
            let dw = trace.inputs[l].t().dot(&g);
            let db = g.sum_axis(Axis(0));
            grads.push((dw, db));
            if l > 0 {
                let mut da = g.dot(&self.layers[l].w.t());
                da.zip_mut_with(&trace.pre[l - 1], |d, &z| *d *= silu_grad(z));
                g = da;
            }
        }
        grads.reverse();
        grads
    }

    /// `∂ε_j/∂x_j` for every row and every `j` in `coords`, by one reverse
    /// pass per coordinate. Returns a `rows x coords.len()` matrix.
    pub fn jacobian_diag(
        &self,
        x: ArrayView2<f64>,
        k: usize,
        coords: &[usize],
    ) -> Result<Array2<f64>> {
        if let Some(&j) = coords.iter().find(|&&j| j >= self.n) {
            return Err(Error::invalid(format!(
                "coordinate {j} outside 0..{}",
                self.n
            )));
        }
        let steps = vec![k; x.nrows()];
        let trace = self.trace(x, &steps)?;
        let hidden = self.layers.len() - 1;
        let slopes: Vec<Array2<f64>> = trace.pre.iter().map(|z| z.mapv(silu_grad)).collect();
        let rows = x.nrows();
        let mut out = Array2::zeros((rows, coords.len()));
        for (c, &j) in coords.iter().enumerate() {
            // seed e_j at the output: the gradient into the last hidden layer
            // is column j of the output weights, the same for every row
            let w_out = self.layers[hidden].w.column(j);
            let mut g = &slopes[hidden - 1] * &w_out;
            for l in (1..hidden).rev() {
                g = g.dot(&self.layers[l].w.t());
                g *= &slopes[l - 1];
            }
            let w_in = self.layers[0].w.row(j);
            out.column_mut(c).assign(&g.dot(&w_in));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn net(n: usize) -> ScoreNet {
        ScoreNet::new(n, 100, 3, 16, &mut rng::stream(3, &[])).unwrap()
    }

    fn random_rows(rows: usize, n: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::stream(seed, &[]);
        Array2::from_shape_fn((rows, n), |_| r.random_range(-2.0..2.0))
    }

    #[test]
    fn shapes() {
        let net = net(5);
        assert_eq!(net.depth(), 3);
        assert_eq!(net.width(), 16);
        let x = random_rows(7, 5, 1);
        assert_eq!(net.forward(x.view(), 10).unwrap().dim(), (7, 5));
        assert!(net.forward(x.view(), 101).is_err());
        assert!(net.forward(random_rows(2, 4, 0).view(), 1).is_err());
        assert_eq!(default_width(3), 64);
        assert_eq!(default_width(40), 160);
    }

    #[test]
    fn parameter_gradients_match_finite_differences() {
        let mut net = net(3);
        let x = random_rows(4, 3, 2);
        let steps = [3, 50, 99, 0];
        let target = random_rows(4, 3, 5);
        let loss = |net: &ScoreNet| -> f64 {
            let out = net.forward_steps(x.view(), &steps).unwrap();
            (&out - &target).mapv(|v| v * v).sum() * 0.5
        };
        let trace = net.trace(x.view(), &steps).unwrap();
        let grads = net.backward(&trace, &trace.output - &target);
        let h = 1e-6;
        for (l, (dw, db)) in grads.iter().enumerate() {
            for &(i, j) in &[(0, 0), (1, 2), (2, 1)] {
                let orig = net.layers[l].w[[i, j]];
                net.layers[l].w[[i, j]] = orig + h;
                let up = loss(&net);
                net.layers[l].w[[i, j]] = orig - h;
                let down = loss(&net);
                net.layers[l].w[[i, j]] = orig;
                let fd = (up - down) / (2.0 * h);
                assert!(
                    (fd - dw[[i, j]]).abs() < 1e-6 * (1.0 + fd.abs()),
                    "layer {l}"
                );
            }
            let orig = net.layers[l].b[1];
            net.layers[l].b[1] = orig + h;
            let up = loss(&net);
            net.layers[l].b[1] = orig - h;
            let down = loss(&net);
            net.layers[l].b[1] = orig;
            assert!(((up - down) / (2.0 * h) - db[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn jacobian_diagonal_matches_central_differences() {
        let net = net(4);
        let x = random_rows(6, 4, 7);
        let jd = net.jacobian_diag(x.view(), 40, &[0, 1, 2, 3]).unwrap();
        let h = 1e-4;
        for r in 0..6 {
            for j in 0..4 {
                let mut up = x.row(r).to_owned().insert_axis(Axis(0));
                let mut down = up.clone();
                up[[0, j]] += h;
                down[[0, j]] -= h;
                let fd = (net.forward(up.view(), 40).unwrap()[[0, j]]
                    - net.forward(down.view(), 40).unwrap()[[0, j]])
                    / (2.0 * h);
                assert!((fd - jd[[r, j]]).abs() <= 1e-3 * fd.abs().max(1e-3));
            }
        }
        assert!(net.jacobian_diag(x.view(), 40, &[4]).is_err());
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let net = net(3);
        let text = serde_json::to_string(&net).unwrap();
        let back: ScoreNet = serde_json::from_str(&text).unwrap();
        assert_eq!(back, net);
    }
}
