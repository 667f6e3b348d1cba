use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{validate_points, Distance, HdbscanError, HdbscanParams, Metric};
use crate::geo::EarthModel;

/// Above this size the Prim relaxation step is split across threads.
const PARALLEL_PRIM_THRESHOLD: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MstEdge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Distance from each point to its `k`-th nearest other point.
pub fn core_distances(points: &[[f64; 2]], k: usize, metric: Metric, earth: EarthModel) -> Result<Vec<f64>, HdbscanError> {
    let n = points.len();
    if k == 0 {
        return Err(HdbscanError::MinSamples(0));
    }
    if n <= k {
        return Err(HdbscanError::TooFewPoints { n, k });
    }
    validate_points(points, metric)?;
    let dist = Distance { metric, radius_km: earth.radius_km() };
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist.between(&points[i], &points[j])).collect();
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect())
}

/// `max(core[i], core[j], d(i, j))`, evaluated lazily.
pub struct MutualReachability<'a> {
    points: &'a [[f64; 2]],
    core: &'a [f64],
    dist: Distance,
}

impl<'a> MutualReachability<'a> {
    pub(crate) fn new(points: &'a [[f64; 2]], core: &'a [f64], dist: Distance) -> Self {
        debug_assert_eq!(points.len(), core.len());
        MutualReachability { points, core, dist }
    }

    pub fn with_metric(points: &'a [[f64; 2]], core: &'a [f64], metric: Metric, earth: EarthModel) -> Self {
        Self::new(points, core, Distance { metric, radius_km: earth.radius_km() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let d = if i == j { 0.0 } else { self.dist.between(&self.points[i], &self.points[j]) };
        d.max(self.core[i]).max(self.core[j])
    }
}

/// Minimum spanning tree of the mutual-reachability graph.
pub fn build_mst(points: &[[f64; 2]], params: &HdbscanParams) -> Result<Vec<MstEdge>, HdbscanError> {
    params.validate()?;
    let n = points.len();
    if n < 2 {
        return Err(HdbscanError::TooFewPoints { n, k: 1 });
    }
    let k = params.min_samples().min(n - 1);
    let core = core_distances(points, k, params.metric, params.earth)?;
    Ok(prim(&MutualReachability::new(points, &core, params.distance_fn())))
}

/// Dense O(n²) Prim starting from point 0. Ties pick the lowest index.
pub(crate) fn prim(mreach: &MutualReachability<'_>) -> Vec<MstEdge> {
    let n = mreach.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0usize;
    in_tree[0] = true;

    for _ in 1..n {
        let relax = |l: usize, best_l: &mut f64, from_l: &mut usize| {
            let d = mreach.distance(current, l);
            if d < *best_l {
                *best_l = d;
                *from_l = current;
            }
        };
        if n >= PARALLEL_PRIM_THRESHOLD {
            best.par_iter_mut().zip(from.par_iter_mut()).enumerate().filter(|(l, _)| !in_tree[*l]).for_each(|(l, (b, f))| relax(l, b, f));
        } else {
            for l in 0..n {
                if !in_tree[l] {
                    relax(l, &mut best[l], &mut from[l]);
                }
            }
        }
        let mut next = usize::MAX;
        for l in 0..n {
            if !in_tree[l] && (next == usize::MAX || best[l] < best[next]) {
                next = l;
            }
        }
        in_tree[next] = true;
        edges.push(MstEdge { u: from[next], v: next, weight: best[next] });
        current = next;
    }
    edges
}
