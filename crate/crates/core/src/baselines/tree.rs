//! CART trees: a Gini classification tree and the least-squares regression tree used
//! by gradient boosting.
//!
//! Both search axis-aligned splits with thresholds at midpoints between consecutive
//! distinct sorted values; a row goes left when `x[f] <= threshold`. Among equally
//! good splits the lowest feature index wins, then the lowest threshold.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::FeatureTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Flat binary tree, root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// `(feature, threshold)` of every split in pre-order.
    pub fn splits(&self) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(at) = stack.pop() {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
            } = self.nodes[at]
            {
                out.push((feature, threshold));
                stack.push(right);
                stack.push(left);
            }
        }
        out
    }
}

/// Gini impurity `1 - p0^2 - p1^2` of a label multiset.
pub fn gini_impurity(labels: &[u8]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::arg("Gini impurity of an empty set"));
    }
    let n = labels.len() as f64;
    let p1 = labels.iter().filter(|&&l| l == 1).count() as f64 / n;
    let p0 = 1.0 - p1;
    Ok(1.0 - p0 * p0 - p1 * p1)
}

/// Majority label, ties to 1 (the PD class).
pub fn prior_label(labels: &[u8]) -> u8 {
    let ones = labels.iter().filter(|&&l| l == 1).count();
    u8::from(2 * ones >= labels.len())
}

/// Chosen split of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Rows going left.
    pub n_left: usize,
}

/// Midpoint that stays strictly below `hi` under rounding.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

fn sorted_by_feature(x: &DMatrix<f64>, rows: &[usize], f: usize) -> Vec<usize> {
    let mut order = rows.to_vec();
    // stable: rows with equal values keep the caller's order
    order.sort_by(|&a, &b| x[(a, f)].total_cmp(&x[(b, f)]));
    order
}

/// Split minimising weighted Gini impurity over `features`, compared exactly in
/// integer arithmetic.
///
/// Minimising `sum n_side/n * gini_side` is maximising
/// `(a_l^2 + b_l^2)/n_l + (a_r^2 + b_r^2)/n_r`, a ratio of integers.
pub fn best_gini_split(
    x: &DMatrix<f64>,
    y: &[u8],
    rows: &[usize],
    features: &[usize],
) -> Option<SplitChoice> {
    let n = rows.len() as u128;
    let ones = rows.iter().filter(|&&r| y[r] == 1).count() as u128;
    let mut best: Option<(SplitChoice, u128, u128)> = None;
    for &f in features {
        let order = sorted_by_feature(x, rows, f);
        let mut left_ones = 0u128;
        for i in 0..order.len() - 1 {
            left_ones += u128::from(y[order[i]] == 1);
            let (lo, hi) = (x[(order[i], f)], x[(order[i + 1], f)]);
            if lo == hi {
                continue;
            }
            let nl = i as u128 + 1;
            let nr = n - nl;
            let (al, bl) = (left_ones, nl - left_ones);
            let (ar, br) = (ones - left_ones, nr - (ones - left_ones));
            let num = (al * al + bl * bl) * nr + (ar * ar + br * br) * nl;
            let den = nl * nr;
            let better = match best {
                None => true,
                Some((_, bn, bd)) => num * bd > bn * den,
            };
            if better {
                let choice = SplitChoice {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    n_left: i + 1,
                };
                best = Some((choice, num, den));
            }
        }
    }
    best.map(|(c, _, _)| c)
}

/// Least-squares split of targets `r`: maximises `S_l^2/n_l + S_r^2/n_r`.
pub fn best_sse_split(
    x: &DMatrix<f64>,
    r: &[f64],
    rows: &[usize],
    features: &[usize],
) -> Option<(SplitChoice, f64)> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&i| r[i]).sum();
    let mut best: Option<(SplitChoice, f64)> = None;
    for &f in features {
        let order = sorted_by_feature(x, rows, f);
        let mut left = 0.0;
        for i in 0..n - 1 {
            left += r[order[i]];
            let (lo, hi) = (x[(order[i], f)], x[(order[i + 1], f)]);
            if lo == hi {
                continue;
            }
            let nl = (i + 1) as f64;
            let nr = (n - i - 1) as f64;
            let right = total - left;
            let score = left * left / nl + right * right / nr;
            if best.is_none_or(|(_, s)| score > s) {
                let choice = SplitChoice {
                    feature: f,
                    threshold: midpoint(lo, hi),
                    n_left: i + 1,
                };
                best = Some((choice, score));
            }
        }
    }
    best
}

/// Feature candidates at each split: all, or a fresh random subset of `m`.
pub(crate) enum FeaturePicker<'a, R: Rng> {
    All(usize),
    Subset { d: usize, m: usize, rng: &'a mut R },
}

impl<R: Rng> FeaturePicker<'_, R> {
    fn pick(&mut self) -> Vec<usize> {
        match self {
            FeaturePicker::All(d) => (0..*d).collect(),
            FeaturePicker::Subset { d, m, rng } => {
                let mut v = sample(*rng, *d, *m).into_vec();
                v.sort_unstable();
                v
            }
        }
    }
}

/// Grows a Gini tree over `rows` (duplicates allowed, as in a bootstrap sample).
pub(crate) fn grow_classifier<R: Rng>(
    x: &DMatrix<f64>,
    y: &[u8],
    rows: Vec<usize>,
    params: &TreeParams,
    fallback: u8,
    picker: &mut FeaturePicker<'_, R>,
) -> Tree {
    let mut nodes = Vec::new();
    grow_class_node(x, y, rows, 0, params, fallback, picker, &mut nodes);
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_class_node<R: Rng>(
    x: &DMatrix<f64>,
    y: &[u8],
    rows: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    fallback: u8,
    picker: &mut FeaturePicker<'_, R>,
    nodes: &mut Vec<Node>,
) -> usize {
    let at = nodes.len();
    let ones = rows.iter().filter(|&&r| y[r] == 1).count();
    let zeros = rows.len() - ones;
    let label = match ones.cmp(&zeros) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => fallback,
    };
    nodes.push(Node::Leaf {
        value: f64::from(label),
    });
    if depth >= params.max_depth
        || rows.len() < params.min_samples_split.max(2)
        || ones == 0
        || zeros == 0
    {
        return at;
    }
    let features = picker.pick();
    let Some(choice) = best_gini_split(x, y, &rows, &features) else {
        return at;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&r| x[(r, choice.feature)] <= choice.threshold);
    let left = grow_class_node(x, y, left_rows, depth + 1, params, fallback, picker, nodes);
    let right = grow_class_node(x, y, right_rows, depth + 1, params, fallback, picker, nodes);
    nodes[at] = Node::Split {
        feature: choice.feature,
        threshold: choice.threshold,
        left,
        right,
    };
    at
}

/// Grows a least-squares regression tree on targets `r`; leaves get `leaf(rows)`.
///
/// A node is split only when the best split strictly improves the squared error.
pub(crate) fn grow_regressor(
    x: &DMatrix<f64>,
    r: &[f64],
    rows: Vec<usize>,
    max_depth: usize,
    leaf: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let mut nodes = Vec::new();
    grow_reg_node(x, r, rows, 0, max_depth, leaf, &mut nodes);
    Tree { nodes }
}

fn grow_reg_node(
    x: &DMatrix<f64>,
    r: &[f64],
    rows: Vec<usize>,
    depth: usize,
    max_depth: usize,
    leaf: &dyn Fn(&[usize]) -> f64,
    nodes: &mut Vec<Node>,
) -> usize {
    let at = nodes.len();
    nodes.push(Node::Leaf { value: leaf(&rows) });
    if depth >= max_depth || rows.len() < 2 {
        return at;
    }
    let features: Vec<usize> = (0..x.ncols()).collect();
    // zero-gain splits are kept: on symmetric patterns such as XOR the first split
    // only pays off one level down
    let Some((choice, _)) = best_sse_split(x, r, &rows, &features) else {
        return at;
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .iter()
        .partition(|&&i| x[(i, choice.feature)] <= choice.threshold);
    let left = grow_reg_node(x, r, left_rows, depth + 1, max_depth, leaf, nodes);
    let right = grow_reg_node(x, r, right_rows, depth + 1, max_depth, leaf, nodes);
    nodes[at] = Node::Split {
        feature: choice.feature,
        threshold: choice.threshold,
        left,
        right,
    };
    at
}

/// Fitted classification tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub tree: Tree,
    pub prior: u8,
}

impl TreeModel {
    pub fn predict_one(&self, x: &[f64]) -> u8 {
        u8::from(self.tree.value(x) >= 0.5)
    }

    pub fn predict(&self, samples: &DMatrix<f64>) -> Vec<u8> {
        samples
            .row_iter()
            .map(|r| self.predict_one(&r.iter().copied().collect::<Vec<_>>()))
            .collect()
    }
}

pub(crate) fn require_both_classes(train: &FeatureTable, what: &str) -> Result<()> {
    let [n0, n1] = train.class_counts();
    if n0 == 0 || n1 == 0 {
        return Err(Error::arg(format!(
            "{what} training set must contain both classes"
        )));
    }
    Ok(())
}

pub fn dtree_fit(train: &FeatureTable, params: &TreeParams) -> Result<TreeModel> {
    require_both_classes(train, "decision tree")?;
    let prior = prior_label(train.labels());
    let mut picker = FeaturePicker::<rand_chacha::ChaCha8Rng>::All(train.n_features());
    let tree = grow_classifier(
        train.values(),
        train.labels(),
        (0..train.n_rows()).collect(),
        params,
        prior,
        &mut picker,
    );
    Ok(TreeModel { tree, prior })
}

pub fn dtree_predict(model: &TreeModel, sample: &[f64]) -> u8 {
    model.predict_one(sample)
}
