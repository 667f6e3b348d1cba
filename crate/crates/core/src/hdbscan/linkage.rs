use super::{HdbscanError, MstEdge};

/// Disjoint sets with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns the new root, or `None` when
    /// they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        Some(big)
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// One agglomeration step. Node ids below `n_points` are points; merge `i`
/// creates node `n_points + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    pub n_points: usize,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn root(&self) -> usize {
        if self.merges.is_empty() {
            0
        } else {
            self.n_points + self.merges.len() - 1
        }
    }

    pub fn size_of(&self, node: usize) -> usize {
        if node < self.n_points {
            1
        } else {
            self.merges[node - self.n_points].size
        }
    }

    /// Points under `node`, in left-to-right order.
    pub fn leaves(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.size_of(node));
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            if x < self.n_points {
                out.push(x);
            } else {
                let m = &self.merges[x - self.n_points];
                stack.push(m.right);
                stack.push(m.left);
            }
        }
        out
    }
}

/// Single-linkage hierarchy from a spanning tree. Edges are merged in
/// ascending weight, ties broken by the smaller then larger endpoint.
pub fn single_linkage(edges: &[MstEdge]) -> Result<Dendrogram, HdbscanError> {
    let n = edges.len() + 1;
    let mut order: Vec<&MstEdge> = edges.iter().collect();
    for e in &order {
        for index in [e.u, e.v] {
            if index >= n {
                return Err(HdbscanError::EdgeOutOfRange { index, n });
            }
        }
    }
    order.sort_by(|a, b| {
        a.weight
            .total_cmp(&b.weight)
            .then(a.u.min(a.v).cmp(&b.u.min(b.v)))
            .then(a.u.max(a.v).cmp(&b.u.max(b.v)))
    });

    let mut uf = UnionFind::new(n);
    // dendrogram node currently representing each union-find root
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for e in order {
        let (ra, rb) = (uf.find(e.u.min(e.v)), uf.find(e.u.max(e.v)));
        if ra == rb {
            return Err(HdbscanError::Disconnected { n });
        }
        let (left, right) = (node_of[ra], node_of[rb]);
        let root = uf.union(ra, rb).expect("distinct roots");
        merges.push(Merge { left, right, distance: e.weight, size: uf.set_size(root) });
        node_of[root] = n + merges.len() - 1;
    }
    Ok(Dendrogram { n_points: n, merges })
}
