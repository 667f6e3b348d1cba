use serde::{Deserialize, Serialize};

use super::CondensedTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    /// `-1` for noise, otherwise `0..n_clusters`.
    pub labels: Vec<i32>,
    /// Stability of each selected cluster, indexed by label.
    pub stabilities: Vec<f64>,
}

impl ClusterLabeling {
    pub fn all_noise(n: usize) -> Self {
        ClusterLabeling { labels: vec![-1; n], stabilities: Vec::new() }
    }

    pub fn n_clusters(&self) -> usize {
        self.stabilities.len()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l < 0).count()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_clusters()];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    /// Point indices of each cluster, indexed by label.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            if l >= 0 {
                out[l as usize].push(i);
            }
        }
        out
    }
}

/// Excess-of-mass selection: keep the set of clusters, none an ancestor of
/// another, with maximal total stability.
///
/// The root is only eligible when nothing ever split off it; in that case the
/// points that persist to the root's highest density level form the single
/// cluster if there are at least `min_cluster_size` of them.
pub fn extract_clusters(tree: &CondensedTree) -> ClusterLabeling {
    let n = tree.n_points;
    let nodes = &tree.nodes;
    if nodes.len() == 1 {
        // only the points that survive to the root's last density level belong
        let max_lambda = nodes[0].points.iter().map(|&(_, l)| l).fold(f64::NEG_INFINITY, f64::max);
        let mut labels = vec![-1i32; n];
        let mut size = 0;
        for &(p, l) in &nodes[0].points {
            if l >= max_lambda {
                labels[p] = 0;
                size += 1;
            }
        }
        return if size >= tree.min_cluster_size && size > 0 {
            ClusterLabeling { labels, stabilities: vec![tree.stability(0)] }
        } else {
            ClusterLabeling::all_noise(n)
        };
    }

    let own: Vec<f64> = (0..nodes.len()).map(|id| tree.stability(id)).collect();
    let mut best = own.clone();
    let mut selected = vec![false; nodes.len()];
    // children have larger ids, so a reverse sweep sees them first
    for id in (1..nodes.len()).rev() {
        let children = &nodes[id].children;
        if children.is_empty() {
            selected[id] = true;
            continue;
        }
        let subtree: f64 = children.iter().map(|&c| best[c]).sum();
        if subtree > own[id] {
            best[id] = subtree;
        } else {
            selected[id] = true;
            let mut stack = children.clone();
            while let Some(c) = stack.pop() {
                selected[c] = false;
                stack.extend(nodes[c].children.iter().copied());
            }
        }
    }

    let mut label_of = vec![-1i32; nodes.len()];
    let mut stabilities = Vec::new();
    for id in 1..nodes.len() {
        if selected[id] {
            label_of[id] = stabilities.len() as i32;
            stabilities.push(own[id]);
        }
    }

    // Resolve each cluster to its selected ancestor (parents precede children).
    let mut resolved = vec![-1i32; nodes.len()];
    for id in 1..nodes.len() {
        resolved[id] = if selected[id] { label_of[id] } else { nodes[id].parent.map_or(-1, |p| resolved[p]) };
    }
    let mut labels = vec![-1i32; n];
    for node in nodes {
        for &(p, _) in &node.points {
            labels[p] = resolved[node.id];
        }
    }
    ClusterLabeling { labels, stabilities }
}
