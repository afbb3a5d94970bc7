//! Bagged ensembles of regression trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cart::{fit_cart, CartParams, Tree};
use crate::features::Matrix;
use crate::{Result, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub cart: CartParams,
    /// Fraction of features examined per split, in `(0, 1]`.
    pub feature_fraction: f64,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 10,
            cart: CartParams::default(),
            feature_fraction: 1.0,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Mean of the member trees, clamped at zero.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.rows()];
        for tree in &self.trees {
            if x.cols() != tree.n_features() {
                return Err(TreeError::DimensionMismatch {
                    expected: tree.n_features(),
                    got: x.cols(),
                });
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += tree.predict_row(x.row(i));
            }
        }
        let n = self.trees.len() as f64;
        Ok(out.into_iter().map(|v| (v / n).max(0.0)).collect())
    }
}

/// Tree `i` is fitted on a bootstrap resample drawn from `seed + i`.
pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    if params.n_estimators == 0 {
        return Err(TreeError::NoEstimators);
    }
    if !(params.feature_fraction > 0.0 && params.feature_fraction <= 1.0) {
        return Err(TreeError::InvalidParameter(format!(
            "feature_fraction {} outside (0, 1]",
            params.feature_fraction
        )));
    }
    if x.rows() != y.len() {
        return Err(TreeError::LengthMismatch {
            rows: x.rows(),
            targets: y.len(),
        });
    }
    if y.is_empty() {
        return Err(TreeError::EmptyTrainingSet);
    }
    let mut cart = params.cart;
    if params.feature_fraction < 1.0 {
        cart.max_features = Some(((params.feature_fraction * x.cols() as f64).ceil() as usize).max(1));
    }
    let n = y.len();
    let mut trees = Vec::with_capacity(params.n_estimators);
    for i in 0..params.n_estimators {
        let tree_seed = seed.wrapping_add(i as u64);
        let tree = if params.bootstrap {
            let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
            let picks: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut data = Vec::with_capacity(n * x.cols());
            for &r in &picks {
                data.extend_from_slice(x.row(r));
            }
            let ys: Vec<f64> = picks.iter().map(|&r| y[r]).collect();
            fit_cart(&Matrix::new(n, x.cols(), data)?, &ys, &cart, tree_seed)?
        } else {
            fit_cart(x, y, &cart, tree_seed)?
        };
        trees.push(tree);
    }
    Ok(ForestModel { trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64, ((i * 7) % 13) as f64]).collect();
        let y = (0..60).map(|i| if i < 30 { 10.0 } else { 50.0 } + ((i * 7) % 13) as f64).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn deterministic_per_seed() {
        let (x, y) = data();
        let p = ForestParams::default();
        assert_eq!(fit_forest(&x, &y, &p, 3).unwrap(), fit_forest(&x, &y, &p, 3).unwrap());
        assert_ne!(fit_forest(&x, &y, &p, 3).unwrap(), fit_forest(&x, &y, &p, 4).unwrap());
    }

    #[test]
    fn single_unbootstrapped_tree_equals_cart() {
        let (x, y) = data();
        let p = ForestParams {
            n_estimators: 1,
            bootstrap: false,
            ..Default::default()
        };
        let forest = fit_forest(&x, &y, &p, 0).unwrap();
        let tree = fit_cart(&x, &y, &p.cart, 0).unwrap();
        assert_eq!(forest.predict(&x).unwrap(), tree.predict(&x).unwrap());
    }

    #[test]
    fn rejects_bad_params() {
        let (x, y) = data();
        let zero = ForestParams {
            n_estimators: 0,
            ..Default::default()
        };
        assert_eq!(fit_forest(&x, &y, &zero, 0).unwrap_err(), TreeError::NoEstimators);
        let frac = ForestParams {
            feature_fraction: 0.0,
            ..Default::default()
        };
        assert!(fit_forest(&x, &y, &frac, 0).is_err());
    }
}
