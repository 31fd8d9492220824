//! Base estimators run on each subsample: Bradley–Terry ranking paths,
//! k-means partitions and a BIC hill-climbing DAG search.

pub mod bradley_terry;
pub mod hillclimb;
pub mod kmeans;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub use bradley_terry::{bradley_terry_mle, ranking_path_estimate, BtWeights, ComparisonData};
pub use hillclimb::{bic_hillclimb_cpdag, bic_hillclimb_dag, holdout_log_likelihood};
pub use kmeans::{kmeans_estimate, silhouette_select_k};

/// Row-major `n × d` observations.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * d {
            return Err(Error::Domain(format!("{} values for a {n} × {d} matrix", values.len())));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite entry in row {}, column {}",
                k / d.max(1),
                k % d.max(1)
            )));
        }
        Ok(FeatureMatrix { n, d, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Domain(format!(
                "row {i} has {} columns, expected {d}",
                rows[i].len()
            )));
        }
        FeatureMatrix::new(n, d, rows.into_iter().flatten().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// The matrix restricted to the given rows, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let values = rows.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        FeatureMatrix {
            n: rows.len(),
            d: self.d,
            values,
        }
    }

    /// Column means.
    pub fn means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for i in 0..self.n {
            for (s, x) in m.iter_mut().zip(self.row(i)) {
                *s += x;
            }
        }
        m.iter_mut().for_each(|s| *s /= self.n.max(1) as f64);
        m
    }

    /// Maximum-likelihood covariance (divides by `n`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.means();
        let mut c = DMatrix::zeros(self.d, self.d);
        for i in 0..self.n {
            let r = self.row(i);
            for a in 0..self.d {
                for b in a..self.d {
                    c[(a, b)] += (r[a] - mu[a]) * (r[b] - mu[b]);
                }
            }
        }
        for a in 0..self.d {
            for b in a..self.d {
                let v = c[(a, b)] / self.n.max(1) as f64;
                c[(a, b)] = v;
                c[(b, a)] = v;
            }
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(FeatureMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(FeatureMatrix::from_rows(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(FeatureMatrix::from_rows(vec![vec![f64::NAN]]).is_err());
        let m = FeatureMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(m.means(), vec![2.0, 4.0]);
        let c = m.covariance();
        assert_eq!((c[(0, 0)], c[(0, 1)], c[(1, 1)]), (1.0, 2.0, 4.0));
        assert_eq!(m.select_rows(&[1]).row(0), &[3.0, 6.0]);
    }
}
