use nilm_trees::{fit_cart, fit_forest, split_gain, CartParams, Criterion, ForestParams, Matrix, TreeNode};
use proptest::prelude::*;

fn sse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum()
}

/// Every (feature, midpoint) candidate scored by direct SSE reduction.
fn exhaustive_root(rows: &[Vec<f64>], y: &[f64]) -> Vec<(usize, f64, f64)> {
    let parent = sse(y);
    let mut out = Vec::new();
    for f in 0..rows[0].len() {
        let mut xs: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        for w in xs.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            let left: Vec<f64> = rows.iter().zip(y).filter(|(r, _)| r[f] < thr).map(|(_, v)| *v).collect();
            let right: Vec<f64> = rows.iter().zip(y).filter(|(r, _)| r[f] >= thr).map(|(_, v)| *v).collect();
            out.push((f, thr, parent - sse(&left) - sse(&right)));
        }
    }
    out
}

fn small_dataset() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (3usize..12).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(0u8..6, 2), n),
            prop::collection::vec(0u16..500, n),
        )
            .prop_map(|(rows, y)| {
                (
                    rows.into_iter().map(|r| r.into_iter().map(f64::from).collect()).collect(),
                    y.into_iter().map(f64::from).collect(),
                )
            })
    })
}

proptest! {
    #[test]
    fn root_split_matches_exhaustive_search((rows, y) in small_dataset()) {
        let x = Matrix::from_rows(&rows).unwrap();
        let params = CartParams { max_depth: Some(1), ..Default::default() };
        let tree = fit_cart(&x, &y, &params, 0).unwrap();
        let candidates = exhaustive_root(&rows, &y);
        let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-9 * (1.0 + sse(&y));
        match tree.root() {
            TreeNode::Internal { feature, threshold, .. } => {
                let first_best = candidates.iter().find(|c| c.2 >= best - tol).unwrap();
                prop_assert_eq!((*feature, *threshold), (first_best.0, first_best.1));
            }
            TreeNode::Leaf { .. } => prop_assert!(candidates.is_empty() || best <= tol),
        }
    }

    #[test]
    fn criteria_agree_on_gain(left in prop::collection::vec(0.0f64..1000.0, 1..20),
                              right in prop::collection::vec(0.0f64..1000.0, 1..20)) {
        let all: Vec<f64> = left.iter().chain(&right).copied().collect();
        let direct = sse(&all) - sse(&left) - sse(&right);
        let a = split_gain(Criterion::SquaredError, &left, &right);
        let b = split_gain(Criterion::FriedmanMse, &left, &right);
        let tol = 1e-6 * (1.0 + sse(&all));
        prop_assert!((a - direct).abs() <= tol);
        prop_assert!((b - direct).abs() <= tol);
    }

    #[test]
    fn predictions_non_negative((rows, y) in small_dataset(), seed in 0u64..100) {
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = y.iter().map(|v| v - 250.0).collect();
        let f = fit_forest(&x, &y, &ForestParams::default(), seed).unwrap();
        prop_assert!(f.predict(&x).unwrap().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn larger_forests_vary_less_across_seeds() {
    // Noisy one-feature regression; spread measured at fixed probe rows.
    let n = 200;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![(i % 50) as f64]).collect();
    let y: Vec<f64> = (0..n).map(|i| 100.0 + ((i * 7919) % 97) as f64).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    let spread = |n_estimators: usize| {
        let preds: Vec<Vec<f64>> = (0..20)
            .map(|s| {
                let p = ForestParams { n_estimators, ..Default::default() };
                fit_forest(&x, &y, &p, 1000 * s).unwrap().predict(&x).unwrap()
            })
            .collect();
        (0..n)
            .map(|i| {
                let col: Vec<f64> = preds.iter().map(|p| p[i]).collect();
                sse(&col) / col.len() as f64
            })
            .sum::<f64>()
    };
    assert!(spread(30) <= spread(10));
}

#[test]
fn tree_serde_round_trip() {
    let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
    let t = fit_cart(&x, &[0.0, 5.0, 9.0], &CartParams::default(), 0).unwrap();
    let json = serde_json::to_string(&t).unwrap();
    assert_eq!(serde_json::from_str::<nilm_trees::Tree>(&json).unwrap(), t);
}
