use serde::{Deserialize, Serialize};

use super::Dendrogram;

/// Stand-in for λ = +∞ on zero-distance merges.
pub const LAMBDA_CAP: f64 = 1e12;

fn lambda_of(distance: f64) -> f64 {
    if distance > 0.0 {
        (1.0 / distance).min(LAMBDA_CAP)
    } else {
        LAMBDA_CAP
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub lambda_birth: f64,
    /// λ at which the cluster split into children or lost its last point.
    pub lambda_death: f64,
    pub size: usize,
    pub children: Vec<usize>,
    /// Points that fell out of this cluster directly, with the λ at which
    /// they left.
    pub points: Vec<(usize, f64)>,
}

impl CondensedNode {
    fn new(id: usize, parent: Option<usize>, lambda_birth: f64, size: usize) -> Self {
        CondensedNode { id, parent, lambda_birth, lambda_death: lambda_birth, size, children: Vec::new(), points: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondensedTree {
    pub n_points: usize,
    pub min_cluster_size: usize,
    /// Node 0 is the root; children always have larger ids than parents.
    pub nodes: Vec<CondensedNode>,
}

impl CondensedTree {
    /// Σ over the cluster's points of (λ_leave − λ_birth). Points leaving
    /// inside a child cluster count as leaving at the child's birth.
    pub fn stability(&self, id: usize) -> f64 {
        let node = &self.nodes[id];
        let fallen: f64 = node.points.iter().map(|&(_, l)| l - node.lambda_birth).sum();
        let split: f64 = node
            .children
            .iter()
            .map(|&c| (self.nodes[c].lambda_birth - node.lambda_birth) * self.nodes[c].size as f64)
            .sum();
        fallen + split
    }
}

/// Walks the dendrogram top-down. A split only creates two new clusters when
/// both sides have at least `min_cluster_size` points and the split happens
/// at a positive distance; otherwise the smaller side's points fall out of
/// the current cluster.
pub fn condense_tree(dendrogram: &Dendrogram, min_cluster_size: usize) -> CondensedTree {
    let n = dendrogram.n_points;
    let mut nodes = vec![CondensedNode::new(0, None, 0.0, n)];
    let mut stack = vec![(dendrogram.root(), 0usize)];

    while let Some((node, cluster)) = stack.pop() {
        if node < n {
            nodes[cluster].points.push((node, 0.0));
            continue;
        }
        let merge = dendrogram.merges[node - n];
        let lambda = lambda_of(merge.distance);
        nodes[cluster].lambda_death = nodes[cluster].lambda_death.max(lambda);
        let (left, right) = (merge.left, merge.right);
        let left_big = dendrogram.size_of(left) >= min_cluster_size;
        let right_big = dendrogram.size_of(right) >= min_cluster_size;

        match (left_big, right_big) {
            (true, true) if lambda < LAMBDA_CAP => {
                // push right first so the left child gets the smaller id and
                // is expanded first
                let mut ids = [0usize; 2];
                for (slot, child) in [left, right].into_iter().enumerate() {
                    let id = nodes.len();
                    nodes.push(CondensedNode::new(id, Some(cluster), lambda, dendrogram.size_of(child)));
                    nodes[cluster].children.push(id);
                    ids[slot] = id;
                }
                stack.push((right, ids[1]));
                stack.push((left, ids[0]));
            }
            (true, false) => {
                fall_out(dendrogram, right, lambda, &mut nodes[cluster]);
                stack.push((left, cluster));
            }
            (false, true) => {
                fall_out(dendrogram, left, lambda, &mut nodes[cluster]);
                stack.push((right, cluster));
            }
            _ => {
                fall_out(dendrogram, left, lambda, &mut nodes[cluster]);
                fall_out(dendrogram, right, lambda, &mut nodes[cluster]);
            }
        }
    }
    CondensedTree { n_points: n, min_cluster_size, nodes }
}

fn fall_out(dendrogram: &Dendrogram, node: usize, lambda: f64, cluster: &mut CondensedNode) {
    cluster.points.extend(dendrogram.leaves(node).into_iter().map(|p| (p, lambda)));
}
