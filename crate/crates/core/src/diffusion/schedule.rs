use ndarray::{Array1, ArrayView1, ArrayViewMut2};

use crate::error::{Error, Result};

pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 0.02;

/// Linear-β variance-preserving schedule. Step 0 is the clean data
/// (`alpha_bar(0) = 1`); steps `1..=k_max` add noise.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(k_max: usize) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::invalid("k_max must be at least 1"));
        }
        let betas: Vec<f64> = (0..k_max)
            .map(|i| {
                if k_max == 1 {
                    BETA_START
                } else {
                    BETA_START + (BETA_END - BETA_START) * i as f64 / (k_max - 1) as f64
                }
            })
            .collect();
        let mut alpha_bar = Vec::with_capacity(k_max + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for b in &betas {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        Ok(NoiseSchedule { betas, alpha_bar })
    }

    pub fn k_max(&self) -> usize {
        self.betas.len()
    }

    /// β for step `k` in `1..=k_max`.
    pub fn beta(&self, k: usize) -> Result<f64> {
        self.check(k)?;
        if k == 0 {
            return Err(Error::invalid("step 0 has no β"));
        }
        Ok(self.betas[k - 1])
    }

    pub fn alpha_bar(&self, k: usize) -> Result<f64> {
        self.check(k)?;
        Ok(self.alpha_bar[k])
    }

    pub fn check(&self, k: usize) -> Result<()> {
        if k > self.k_max() {
            return Err(Error::invalid(format!(
                "noise step {k} outside 0..={}",
                self.k_max()
            )));
        }
        Ok(())
    }

    /// `sqrt(ᾱ_k) x + sqrt(1 - ᾱ_k) noise`.
    pub fn perturb(
        &self,
        x: ArrayView1<f64>,
        k: usize,
        noise: ArrayView1<f64>,
    ) -> Result<Array1<f64>> {
        if x.len() != noise.len() {
            return Err(Error::invalid("row and noise lengths differ"));
        }
        let ab = self.alpha_bar(k)?;
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(ndarray::Zip::from(&x)
            .and(&noise)
            .map_collect(|&xi, &ni| a * xi + b * ni))
    }

    /// In-place perturbation of whole rows at one step, restricted to the
    /// listed columns.
    pub(crate) fn perturb_columns(
        &self,
        mut rows: ArrayViewMut2<f64>,
        k: usize,
        noise: ndarray::ArrayView2<f64>,
        cols: &[usize],
    ) -> Result<()> {
        let ab = self.alpha_bar(k)?;
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        for &c in cols {
            let mut col = rows.column_mut(c);
            col.zip_mut_with(&noise.column(c), |x, &e| *x = a * *x + b * e);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn alpha_bar_is_a_decreasing_product() {
        let s = NoiseSchedule::new(100).unwrap();
        assert_eq!(s.alpha_bar(0).unwrap(), 1.0);
        for k in 1..=100 {
            let (prev, cur) = (s.alpha_bar(k - 1).unwrap(), s.alpha_bar(k).unwrap());
            assert!(cur < prev && cur > 0.0 && cur < 1.0);
        }
        assert!((s.alpha_bar(1).unwrap() - (1.0 - 1e-4)).abs() < 1e-15);
        assert!((s.beta(100).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn alpha_bar_at_k_max_matches_direct_product() {
        // independent evaluation: product of (1 - β_i), β on the linear grid
        let mut direct = 1.0f64;
        for i in 1..=100 {
            let beta = 1e-4 + (0.02 - 1e-4) * ((i - 1) as f64) / 99.0;
            direct *= 1.0 - beta;
        }
        let s = NoiseSchedule::new(100).unwrap();
        assert!((s.alpha_bar(100).unwrap() - direct).abs() < 1e-14);
        // frozen value of the product
        assert!((direct - 0.363_563_248_055_492_2).abs() < 1e-12, "{direct}");
    }

    #[test]
    fn perturb_examples() {
        let s = NoiseSchedule::new(100).unwrap();
        let x = array![1.0, -2.0];
        let z = array![0.5, 0.25];
        let ab = s.alpha_bar(30).unwrap();
        let zero = s.perturb(x.view(), 30, Array1::zeros(2).view()).unwrap();
        assert_eq!(zero, x.mapv(|v| ab.sqrt() * v));
        assert_eq!(s.perturb(x.view(), 0, z.view()).unwrap(), x);
        let only_noise = s.perturb(Array1::zeros(2).view(), 30, z.view()).unwrap();
        assert_eq!(only_noise, z.mapv(|v| (1.0 - ab).sqrt() * v));
        assert!(s.perturb(x.view(), 101, z.view()).is_err());
        assert!(NoiseSchedule::new(0).is_err());
    }

    #[test]
    fn perturbation_mean_is_scaled_input() {
        let s = NoiseSchedule::new(100).unwrap();
        let x = array![0.7, -1.3, 2.0];
        let k = 60;
        let mut rng = crate::rng::stream(9, &[]);
        let draws = 20_000;
        let mut sum = Array1::<f64>::zeros(3);
        for _ in 0..draws {
            let e = Array1::from_shape_fn(3, |_| StandardNormal.sample(&mut rng));
            sum += &s.perturb(x.view(), k, e.view()).unwrap();
        }
        let ab = s.alpha_bar(k).unwrap();
        let se = (1.0 - ab).sqrt() / (draws as f64).sqrt();
        for i in 0..3 {
            let m = sum[i] / draws as f64;
            assert!((m - ab.sqrt() * x[i]).abs() < 3.0 * se, "{m}");
        }
    }
}
