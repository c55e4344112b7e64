//! CART-style regression tree grown by greedy sum-of-squares minimization.

use super::{ContinuationEstimator, RegressionError, check_predict_dim, check_training_shapes};
use ndarray::{Array1, ArrayView1, ArrayView2};

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig {
    /// Maximum split depth; `None` grows until leaves are pure or too small.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

impl TreeConfig {
    pub fn describe(&self) -> String {
        let depth = match self.max_depth {
            Some(d) => d.to_string(),
            None => "none".to_string(),
        };
        format!(
            "tree(max_depth={depth}, min_samples_leaf={})",
            self.min_samples_leaf
        )
    }

    pub(crate) fn validate(&self) -> Result<(), RegressionError> {
        if self.min_samples_leaf == 0 {
            return Err(RegressionError::InvalidConfig(
                "min_samples_leaf must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct FittedTree {
    pub(crate) dim: usize,
    pub(crate) nodes: Vec<Node>,
}

impl FittedTree {
    pub(crate) fn predict_row(&self, x: ArrayView1<f64>) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

fn sse(sum: f64, sum_sq: f64, n: f64) -> f64 {
    (sum_sq - sum * sum / n).max(0.0)
}

struct Builder<'a, F> {
    features: ArrayView2<'a, f64>,
    targets: ArrayView1<'a, f64>,
    config: &'a TreeConfig,
    /// Candidate features for one split, ascending. Called once per split
    /// attempt, in depth-first left-to-right build order, so any RNG inside
    /// is consumed deterministically.
    pick_features: F,
    nodes: Vec<Node>,
}

impl<F: FnMut(usize) -> Vec<usize>> Builder<'_, F> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&r| self.targets[r]).sum();
        let mean = sum / n;
        let sum_sq: f64 = rows.iter().map(|&r| self.targets[r] * self.targets[r]).sum();
        let node_sse = sse(sum, sum_sq, n);

        let depth_allows = self.config.max_depth.is_none_or(|d| depth < d);
        let msl = self.config.min_samples_leaf;
        if !depth_allows || rows.len() < 2 * msl || node_sse == 0.0 {
            self.nodes.push(Node::Leaf { value: mean });
            return self.nodes.len() - 1;
        }

        let mut best: Option<(f64, usize, f64)> = None;
        for feature in (self.pick_features)(self.features.ncols()) {
            let mut order: Vec<usize> = rows.clone();
            order.sort_by(|&a, &b| {
                self.features[[a, feature]]
                    .total_cmp(&self.features[[b, feature]])
                    .then(a.cmp(&b))
            });
            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for i in 0..order.len() - 1 {
                let r = order[i];
                left_sum += self.targets[r];
                left_sq += self.targets[r] * self.targets[r];
                let v = self.features[[r, feature]];
                let v_next = self.features[[order[i + 1], feature]];
                if v == v_next {
                    continue;
                }
                let left_n = i + 1;
                let right_n = order.len() - left_n;
                if left_n < msl || right_n < msl {
                    continue;
                }
                let split_sse = sse(left_sum, left_sq, left_n as f64)
                    + sse(sum - left_sum, sum_sq - left_sq, right_n as f64);
                // Strict < keeps the first (lowest feature, lowest threshold)
                // among equal-quality splits.
                if best.is_none_or(|(b, _, _)| split_sse < b) {
                    best = Some((split_sse, feature, 0.5 * (v + v_next)));
                }
            }
        }

        let improves = |(split_sse, _, _): (f64, usize, f64)| {
            node_sse - split_sse > 1e-12 * (node_sse + 1.0)
        };
        match best {
            Some(found) if improves(found) => {
                let (_, feature, threshold) = found;
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&r| self.features[[r, feature]] <= threshold);
                // Reserve this node's slot before recursing.
                self.nodes.push(Node::Leaf { value: mean });
                let slot = self.nodes.len() - 1;
                let left = self.build(left_rows, depth + 1);
                let right = self.build(right_rows, depth + 1);
                self.nodes[slot] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                };
                slot
            }
            _ => {
                self.nodes.push(Node::Leaf { value: mean });
                self.nodes.len() - 1
            }
        }
    }
}

pub(crate) fn grow_tree<F: FnMut(usize) -> Vec<usize>>(
    features: ArrayView2<f64>,
    targets: ArrayView1<f64>,
    rows: Vec<usize>,
    config: &TreeConfig,
    pick_features: F,
) -> FittedTree {
    let mut builder = Builder {
        features,
        targets,
        config,
        pick_features,
        nodes: Vec::new(),
    };
    builder.build(rows, 0);
    FittedTree {
        dim: features.ncols(),
        nodes: builder.nodes,
    }
}

/// Regression tree estimator. Splits are midpoints between consecutive
/// distinct sorted feature values; ties on split quality break toward the
/// lower feature index and lower threshold; leaves predict the mean target.
#[derive(Debug, Clone)]
pub struct TreeEstimator {
    config: TreeConfig,
    fitted: Option<FittedTree>,
}

impl TreeEstimator {
    pub fn new(config: TreeConfig) -> Self {
        Self {
            config,
            fitted: None,
        }
    }

    /// Flat node storage, root at index 0. Available after `fit`.
    pub fn nodes(&self) -> Option<&[Node]> {
        self.fitted.as_ref().map(|f| f.nodes.as_slice())
    }

    /// (feature, threshold) of the root split, if the tree split at all.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.fitted.as_ref()?.nodes.first()? {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

impl ContinuationEstimator for TreeEstimator {
    fn fit(
        &mut self,
        features: ArrayView2<f64>,
        targets: ArrayView1<f64>,
    ) -> Result<(), RegressionError> {
        check_training_shapes(features, targets)?;
        self.config.validate()?;
        let rows: Vec<usize> = (0..features.nrows()).collect();
        self.fitted = Some(grow_tree(features, targets, rows, &self.config, |d| {
            (0..d).collect()
        }));
        Ok(())
    }

    fn predict(&self, features: ArrayView2<f64>) -> Result<Array1<f64>, RegressionError> {
        let fitted = self.fitted.as_ref().ok_or(RegressionError::NotFitted)?;
        check_predict_dim(fitted.dim, features)?;
        Ok(Array1::from_iter(
            features.rows().into_iter().map(|x| fitted.predict_row(x)),
        ))
    }

    fn describe(&self) -> String {
        self.config.describe()
    }
}

/// Fit in one call.
pub fn fit_tree(
    config: TreeConfig,
    features: ArrayView2<f64>,
    targets: ArrayView1<f64>,
) -> Result<TreeEstimator, RegressionError> {
    let mut est = TreeEstimator::new(config);
    est.fit(features, targets)?;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn constant_targets_make_a_single_leaf() {
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let y = array![5.0, 5.0, 5.0, 5.0];
        let est = fit_tree(TreeConfig::default(), x.view(), y.view()).unwrap();
        assert_eq!(est.nodes().unwrap(), &[Node::Leaf { value: 5.0 }]);
    }

    #[test]
    fn unlimited_tree_overfits_distinct_rows() {
        let x = array![[1.0], [2.5], [3.0], [4.2], [9.0], [12.0]];
        let y = array![3.0, -1.0, 4.0, 4.0, 0.5, 2.0];
        let est = fit_tree(TreeConfig::default(), x.view(), y.view()).unwrap();
        let pred = est.predict(x.view()).unwrap();
        for (p, t) in pred.iter().zip(y.iter()) {
            assert_eq!(p, t);
        }
    }

    #[test]
    fn stump_on_sign_data_splits_at_zero() {
        let x = array![[-2.0], [-1.0], [1.0], [2.0]];
        let y = array![-1.0, -1.0, 1.0, 1.0];
        let cfg = TreeConfig {
            max_depth: Some(1),
            min_samples_leaf: 1,
        };
        let est = fit_tree(cfg, x.view(), y.view()).unwrap();
        assert_eq!(est.root_split(), Some((0, 0.0)));
        let pred = est.predict(array![[-0.5], [0.5]].view()).unwrap();
        assert_eq!(pred[0], -1.0);
        assert_eq!(pred[1], 1.0);
    }

    #[test]
    fn equal_gain_splits_break_toward_lower_threshold() {
        // Thresholds 1.5 and 3.5 both give total SSE 2/3; 2.5 gives 1.
        let x = array![[1.0], [2.0], [3.0], [4.0]];
        let y = array![0.0, 1.0, 1.0, 0.0];
        let cfg = TreeConfig {
            max_depth: Some(1),
            min_samples_leaf: 1,
        };
        let est = fit_tree(cfg, x.view(), y.view()).unwrap();
        assert_eq!(est.root_split(), Some((0, 1.5)));
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x = array![[1.0], [2.0], [3.0], [4.0], [5.0], [6.0]];
        let y = array![0.0, 0.0, 10.0, 10.0, 20.0, 20.0];
        let cfg = TreeConfig {
            max_depth: None,
            min_samples_leaf: 3,
        };
        let est = fit_tree(cfg, x.view(), y.view()).unwrap();
        // Count training rows per leaf.
        let nodes = est.nodes().unwrap();
        let mut counts = vec![0usize; nodes.len()];
        for r in 0..6 {
            let mut idx = 0;
            loop {
                match &nodes[idx] {
                    Node::Leaf { .. } => {
                        counts[idx] += 1;
                        break;
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        idx = if x[[r, *feature]] <= *threshold {
                            *left
                        } else {
                            *right
                        };
                    }
                }
            }
        }
        for (node, count) in nodes.iter().zip(&counts) {
            if matches!(node, Node::Leaf { .. }) {
                assert!(*count >= 3, "leaf holds {count} rows");
            }
        }
    }

    #[test]
    fn depth_zero_is_the_mean() {
        let x = array![[1.0], [2.0]];
        let y = array![3.0, 5.0];
        let cfg = TreeConfig {
            max_depth: Some(0),
            min_samples_leaf: 1,
        };
        let est = fit_tree(cfg, x.view(), y.view()).unwrap();
        let pred = est.predict(array![[0.0]].view()).unwrap();
        assert_eq!(pred[0], 4.0);
    }

    #[test]
    fn predictions_stay_within_target_hull() {
        let x = array![[1.0, 4.0], [2.0, -1.0], [3.0, 2.0], [4.0, 0.0], [5.0, 9.0]];
        let y = array![2.0, -7.0, 4.5, 1.0, 3.0];
        let est = fit_tree(TreeConfig::default(), x.view(), y.view()).unwrap();
        let queries = array![[0.0, 0.0], [10.0, 10.0], [2.5, 3.0], [-3.0, 4.0]];
        for p in est.predict(queries.view()).unwrap() {
            assert!((-7.0..=4.5).contains(&p));
        }
    }
}
