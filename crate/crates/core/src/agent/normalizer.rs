use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature running mean and standard deviation. Normalized features are
/// clipped to `[-clip, clip]`; the standard deviation is floored at `min_std`
/// so constant features map to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: f64,
    mean: Vec<f64>,
    std: Vec<f64>,
    pub clip: f64,
    pub min_std: f64,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: vec![0.0; dim],
            sum_sq: vec![0.0; dim],
            count: 0.0,
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
            clip: 5.0,
            min_std: 1e-2,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Accumulates samples; statistics take effect after `recompute`.
    pub fn update(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Shape(format!(
                "normalizer expects {} features, got {}",
                self.dim(),
                x.len()
            )));
        }
        for ((s, q), v) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(x) {
            *s += v;
            *q += v * v;
        }
        self.count += 1.0;
        Ok(())
    }

    pub fn recompute(&mut self) {
        if self.count == 0.0 {
            return;
        }
        for i in 0..self.dim() {
            let m = self.sum[i] / self.count;
            let var = (self.sum_sq[i] / self.count - m * m).max(0.0);
            self.mean[i] = m;
            self.std[i] = var.sqrt().max(self.min_std);
        }
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| ((v - m) / s).clamp(-self.clip, self.clip))
            .collect()
    }

    pub fn normalize_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape(format!(
                "normalizer expects {} features, batch has {}",
                self.dim(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = ((*v - m) / s).clamp(-self.clip, self.clip);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matches_sample_moments() {
        let mut n = Normalizer::new(2);
        let xs = [[1.0, 10.0], [2.0, 10.0], [3.0, 10.0], [6.0, 10.0]];
        for x in &xs {
            n.update(x).unwrap();
        }
        n.recompute();
        assert!((n.mean()[0] - 3.0).abs() < 1e-12);
        let var = (4.0 + 1.0 + 0.0 + 9.0) / 4.0;
        assert!((n.std()[0] - f64::sqrt(var)).abs() < 1e-12);
        // Constant feature: floored std, maps to zero.
        assert_eq!(n.std()[1], 1e-2);
        assert_eq!(n.normalize(&[3.0, 10.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn output_is_clipped() {
        let mut n = Normalizer::new(1);
        n.update(&[0.0]).unwrap();
        n.update(&[1.0]).unwrap();
        n.recompute();
        assert_eq!(n.normalize(&[1e6]), vec![5.0]);
        assert_eq!(n.normalize(&[-1e6]), vec![-5.0]);
    }

    #[test]
    fn batch_agrees_with_rows() {
        let mut n = Normalizer::new(3);
        for i in 0..10 {
            let f = i as f64;
            n.update(&[f, f * f, -f]).unwrap();
        }
        n.recompute();
        let b = array![[1.0, 2.0, 3.0], [4.0, 50.0, -6.0]];
        let nb = n.normalize_batch(b.view()).unwrap();
        for (r, row) in b.rows().into_iter().enumerate() {
            assert_eq!(nb.row(r).to_vec(), n.normalize(&row.to_vec()));
        }
    }

    #[test]
    fn untrained_is_identity_within_clip() {
        let n = Normalizer::new(2);
        assert_eq!(n.normalize(&[0.5, -2.0]), vec![0.5, -2.0]);
    }
}
