use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_row, sample_weights, validate_training, Classifier, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate columns per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
    pub balanced_class_weights: bool,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            max_depth: Some(12),
            min_leaf: 2,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
            balanced_class_weights: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    /// `[P(negative), P(positive)]`.
    Leaf { probability: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Node 0 is the root.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_probability(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { probability } => return probability[1],
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub params: RfParams,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

/// Random forest of CART trees split on weighted Gini impurity decrease.
///
/// Tree `t` draws its bootstrap sample and candidate columns from ChaCha8
/// seeded with `seed` on stream `t`, so parallel and sequential training
/// give the same forest. Unlike the linear models, a single-class input is
/// accepted and yields one-leaf trees.
pub fn rf_fit(x: &[Vec<f64>], y: &[bool], params: &RfParams) -> Result<RfModel, ModelError> {
    let d = validate_training(x, y, false)?;
    if params.n_trees == 0 || params.min_leaf == 0 || params.features_per_split == Some(0) {
        return Err(ModelError::Hyperparameter("rf needs n_trees, min_leaf and features_per_split >= 1".into()));
    }
    let sw = sample_weights(y, params.balanced_class_weights);
    let mtry = params.features_per_split.unwrap_or_else(|| (d as f64).sqrt().ceil() as usize).clamp(1, d.max(1));
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            grow_tree(x, y, &sw, params, mtry, &mut rng)
        })
        .collect();
    Ok(RfModel { params: *params, n_features: d, trees })
}

/// A row of the node's sample with its bootstrap multiplicity.
#[derive(Clone, Copy)]
struct Item {
    row: usize,
    count: usize,
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    left: Vec<Item>,
    right: Vec<Item>,
}

fn grow_tree(x: &[Vec<f64>], y: &[bool], sw: &[f64], params: &RfParams, mtry: usize, rng: &mut ChaCha8Rng) -> Tree {
    let n = x.len();
    let d = x[0].len();
    let mut counts = vec![0usize; n];
    if params.bootstrap {
        for _ in 0..n {
            counts[rng.random_range(0..n)] += 1;
        }
    } else {
        counts.fill(1);
    }
    let root: Vec<Item> = counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(row, &count)| Item { row, count }).collect();
    let mut nodes = vec![Node::Leaf { probability: [0.0, 0.0] }];
    let mut stack = vec![(0usize, root, 0usize)];
    while let Some((id, items, depth)) = stack.pop() {
        let (w0, w1, total) = class_mass(&items, y, sw);
        let p1 = if w0 + w1 > 0.0 { w1 / (w0 + w1) } else { 0.5 };
        let leaf = Node::Leaf { probability: [1.0 - p1, p1] };
        let pure = w0 == 0.0 || w1 == 0.0;
        let depth_ok = params.max_depth.is_none_or(|m| depth < m);
        if pure || !depth_ok || total < 2 * params.min_leaf {
            nodes[id] = leaf;
            continue;
        }
        let mut features: Vec<usize> = rand::seq::index::sample(rng, d, mtry).into_vec();
        features.sort_unstable();
        match best_split(x, y, sw, &items, &features, params.min_leaf) {
            Some(s) => {
                let (l, r) = (nodes.len(), nodes.len() + 1);
                nodes.push(Node::Leaf { probability: [0.0, 0.0] });
                nodes.push(Node::Leaf { probability: [0.0, 0.0] });
                nodes[id] = Node::Split { feature: s.feature, threshold: s.threshold, left: l, right: r };
                stack.push((r, s.right, depth + 1));
                stack.push((l, s.left, depth + 1));
            }
            None => nodes[id] = leaf,
        }
    }
    Tree { nodes }
}

/// `(negative mass, positive mass, sample count)`.
fn class_mass(items: &[Item], y: &[bool], sw: &[f64]) -> (f64, f64, usize) {
    let (mut w0, mut w1, mut c) = (0.0, 0.0, 0);
    for it in items {
        let w = it.count as f64 * sw[it.row];
        if y[it.row] { w1 += w } else { w0 += w }
        c += it.count;
    }
    (w0, w1, c)
}

/// Gini impurity times node mass: `W - (W0^2 + W1^2) / W`.
fn weighted_gini(w0: f64, w1: f64) -> f64 {
    let w = w0 + w1;
    if w <= 0.0 {
        0.0
    } else {
        w - (w0 * w0 + w1 * w1) / w
    }
}

/// Best Gini decrease over `features` (ascending). Ties keep the lower
/// feature, then the lower threshold. Splits with zero gain are allowed so
/// an impure node always splits when any column separates its rows.
fn best_split(x: &[Vec<f64>], y: &[bool], sw: &[f64], items: &[Item], features: &[usize], min_leaf: usize) -> Option<SplitChoice> {
    let (w0, w1, total) = class_mass(items, y, sw);
    let parent = weighted_gini(w0, w1);
    let eps = 1e-12 * (w0 + w1);
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted: Vec<(f64, Item)> = Vec::with_capacity(items.len());
    for &f in features {
        sorted.clear();
        sorted.extend(items.iter().map(|&it| (x[it.row][f], it)));
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.row.cmp(&b.1.row)));
        let (mut l0, mut l1, mut lc) = (0.0, 0.0, 0usize);
        for k in 0..sorted.len() - 1 {
            let (v, it) = sorted[k];
            let w = it.count as f64 * sw[it.row];
            if y[it.row] { l1 += w } else { l0 += w }
            lc += it.count;
            let next = sorted[k + 1].0;
            if v == next || lc < min_leaf || total - lc < min_leaf {
                continue;
            }
            let gain = parent - weighted_gini(l0, l1) - weighted_gini(w0 - l0, w1 - l1);
            if gain < -eps {
                continue;
            }
            if best.is_none_or(|(g, _, _)| gain > g + eps) {
                best = Some((gain, f, v + (next - v) / 2.0));
            }
        }
    }
    let (_, feature, threshold) = best?;
    let (left, right) = items.iter().partition(|it| x[it.row][feature] <= threshold);
    Some(SplitChoice { feature, threshold, left, right })
}

impl Classifier for RfModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        check_row(x, self.n_features)?;
        let sum: f64 = self.trees.iter().map(|t| t.leaf_probability(x)).sum();
        Ok((sum / self.trees.len() as f64).clamp(0.0, 1.0))
    }
}
