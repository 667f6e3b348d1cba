//! HDBSCAN: density-based hierarchical clustering with stability-based
//! (excess-of-mass) cluster extraction.
//!
//! The pipeline is split into its classical stages, each exposed on its own:
//! core distances, mutual reachability, a minimum spanning tree (dense Prim),
//! the single-linkage dendrogram, the condensed tree and finally cluster
//! extraction. [`fit`] composes them.
//!
//! Points are 2-D. Under [`Metric::Haversine`] they are `[lat, lon]` in
//! degrees and distances are kilometres.

mod condense;
mod extract;
mod linkage;
mod mst;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{haversine_deg, EarthModel};

pub use condense::{condense_tree, CondensedNode, CondensedTree, LAMBDA_CAP};
pub use extract::{extract_clusters, ClusterLabeling};
pub use linkage::{single_linkage, Dendrogram, Merge, UnionFind};
pub use mst::{build_mst, core_distances, MstEdge, MutualReachability};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HdbscanError {
    #[error("min_cluster_size must be at least 2, got {0}")]
    MinClusterSize(usize),
    #[error("min_samples must be at least 1, got {0}")]
    MinSamples(usize),
    #[error("need more than {k} points for k = {k} neighbours, got {n}")]
    TooFewPoints { n: usize, k: usize },
    #[error("point {index} is not a valid coordinate for the {metric:?} metric")]
    InvalidPoint { index: usize, metric: Metric },
    #[error("edge list does not form a spanning tree over {n} points")]
    Disconnected { n: usize },
    #[error("edge endpoint {index} out of range for {n} points")]
    EdgeOutOfRange { index: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// Great-circle kilometres over `[lat, lon]` degree pairs.
    Haversine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Neighbour count for core distances (self excluded). `None` means
    /// `min_cluster_size`.
    #[serde(default)]
    pub min_samples: Option<usize>,
    pub metric: Metric,
    #[serde(default)]
    pub earth: EarthModel,
}

impl HdbscanParams {
    pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 10;

    pub fn new(min_cluster_size: usize, metric: Metric) -> Self {
        HdbscanParams { min_cluster_size, min_samples: None, metric, earth: EarthModel::default() }
    }

    pub fn with_min_samples(mut self, min_samples: usize) -> Self {
        self.min_samples = Some(min_samples);
        self
    }

    pub fn min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }

    pub fn validate(&self) -> Result<(), HdbscanError> {
        if self.min_cluster_size < 2 {
            return Err(HdbscanError::MinClusterSize(self.min_cluster_size));
        }
        if self.min_samples() < 1 {
            return Err(HdbscanError::MinSamples(self.min_samples()));
        }
        Ok(())
    }

    pub(crate) fn distance_fn(&self) -> Distance {
        Distance { metric: self.metric, radius_km: self.earth.radius_km() }
    }
}

impl Default for HdbscanParams {
    fn default() -> Self {
        HdbscanParams::new(Self::DEFAULT_MIN_CLUSTER_SIZE, Metric::Haversine)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Distance {
    metric: Metric,
    radius_km: f64,
}

impl Distance {
    pub(crate) fn between(&self, a: &[f64; 2], b: &[f64; 2]) -> f64 {
        match self.metric {
            Metric::Euclidean => (a[0] - b[0]).hypot(a[1] - b[1]),
            Metric::Haversine => {
                // canonical argument order keeps the distance bitwise symmetric
                let (a, b) = if (a[0], a[1]) <= (b[0], b[1]) { (a, b) } else { (b, a) };
                haversine_deg(a[0], a[1], b[0], b[1], self.radius_km)
            }
        }
    }
}

pub(crate) fn validate_points(points: &[[f64; 2]], metric: Metric) -> Result<(), HdbscanError> {
    for (index, p) in points.iter().enumerate() {
        let ok = match metric {
            Metric::Euclidean => p[0].is_finite() && p[1].is_finite(),
            Metric::Haversine => crate::geo::GeoPoint::new(p[0], p[1]).is_ok(),
        };
        if !ok {
            return Err(HdbscanError::InvalidPoint { index, metric });
        }
    }
    Ok(())
}

/// Full HDBSCAN clustering. Fewer points than `min_cluster_size` yields all
/// noise. The neighbour count is clamped to `n - 1` for small inputs.
pub fn fit(points: &[[f64; 2]], params: &HdbscanParams) -> Result<ClusterLabeling, HdbscanError> {
    params.validate()?;
    validate_points(points, params.metric)?;
    let n = points.len();
    if n < params.min_cluster_size {
        return Ok(ClusterLabeling::all_noise(n));
    }
    let k = params.min_samples().min(n - 1);
    let core = core_distances(points, k, params.metric, params.earth)?;
    let mreach = MutualReachability::new(points, &core, params.distance_fn());
    let edges = mst::prim(&mreach);
    let dendrogram = single_linkage(&edges)?;
    let condensed = condense_tree(&dendrogram, params.min_cluster_size);
    Ok(extract_clusters(&condensed))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn blobs(seed: u64, centers: &[[f64; 2]], per: usize, sd: f64) -> (Vec<[f64; 2]>, Vec<i32>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sd).unwrap();
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        for (c, center) in centers.iter().enumerate() {
            for _ in 0..per {
                pts.push([center[0] + normal.sample(&mut rng), center[1] + normal.sample(&mut rng)]);
                truth.push(c as i32);
            }
        }
        (pts, truth)
    }

    /// Partition equality up to label renaming; noise must match exactly.
    pub(crate) fn same_partition(a: &[i32], b: &[i32]) -> bool {
        use std::collections::HashMap;
        if a.len() != b.len() {
            return false;
        }
        let mut fwd = HashMap::new();
        let mut back = HashMap::new();
        a.iter().zip(b).all(|(&x, &y)| {
            if (x == -1) != (y == -1) {
                return false;
            }
            *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x
        })
    }

    #[test]
    fn params_validation() {
        assert!(HdbscanParams::new(1, Metric::Euclidean).validate().is_err());
        assert!(HdbscanParams::new(2, Metric::Euclidean).with_min_samples(0).validate().is_err());
        assert_eq!(HdbscanParams::new(7, Metric::Euclidean).min_samples(), 7);
        assert_eq!(HdbscanParams::default().min_cluster_size, 10);
    }

    #[test]
    fn single_point_is_noise() {
        let l = fit(&[[1.0, 2.0]], &HdbscanParams::new(5, Metric::Euclidean)).unwrap();
        assert_eq!(l.labels, vec![-1]);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let pts = vec![[3.0, 4.0]; 20];
        let l = fit(&pts, &HdbscanParams::new(5, Metric::Euclidean)).unwrap();
        assert_eq!(l.labels, vec![0; 20]);
    }

    #[test]
    fn three_blobs() {
        let (pts, truth) = blobs(3, &[[0.0, 0.0], [10.0, 0.0], [5.0, 9.0]], 60, 0.7);
        let l = fit(&pts, &HdbscanParams::new(10, Metric::Euclidean)).unwrap();
        assert_eq!(l.n_clusters(), 3);
        let ari = crate::evaluation::adjusted_rand_index(&truth, &l.labels);
        assert!(ari >= 0.95, "ari {ari}");
    }

    #[test]
    fn invalid_points_rejected() {
        assert!(fit(&[[f64::NAN, 0.0]; 3], &HdbscanParams::new(2, Metric::Euclidean)).is_err());
        assert!(fit(&[[95.0, 0.0]; 3], &HdbscanParams::new(2, Metric::Haversine)).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let (pts, _) = blobs(5, &[[0.0, 0.0], [8.0, 1.0], [3.0, 7.0]], 40, 0.8);
        let params = HdbscanParams::new(8, Metric::Euclidean);
        let base = fit(&pts, &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let mut order: Vec<usize> = (0..pts.len()).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let shuffled: Vec<_> = order.iter().map(|&i| pts[i]).collect();
            let l = fit(&shuffled, &params).unwrap();
            let mut unshuffled = vec![0; pts.len()];
            for (pos, &orig) in order.iter().enumerate() {
                unshuffled[orig] = l.labels[pos];
            }
            assert!(same_partition(&base.labels, &unshuffled));
        }
    }

    #[test]
    fn noise_monotone_in_min_cluster_size() {
        let (mut pts, _) = blobs(8, &[[0.0, 0.0], [10.0, 0.0], [5.0, 9.0]], 60, 0.9);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..18 {
            pts.push([rng.random_range(-5.0..15.0), rng.random_range(-5.0..14.0)]);
        }
        let mut last = 0;
        for mcs in [2, 4, 6, 10, 15, 20, 30, 45, 60, 61, 90] {
            let l = fit(&pts, &HdbscanParams::new(mcs, Metric::Euclidean).with_min_samples(10)).unwrap();
            let noise = l.noise_count();
            assert!(noise >= last, "mcs {mcs}: noise {noise} < {last}");
            last = noise;
            for size in l.cluster_sizes() {
                assert!(size >= mcs);
            }
        }
    }

    #[test]
    fn haversine_small_patch_matches_projected_euclidean() {
        let (offsets, _) = blobs(21, &[[0.0, 0.0], [0.006, 0.001], [0.002, 0.007]], 30, 0.0005);
        let (lat0, lon0) = (44.65, -63.58);
        let geo: Vec<[f64; 2]> = offsets.iter().map(|o| [lat0 + o[0], lon0 + o[1]]).collect();
        let r = EarthModel::MEAN_RADIUS_KM;
        let projected: Vec<[f64; 2]> = geo
            .iter()
            .map(|p| {
                let y = (p[0] - lat0).to_radians() * r;
                let x = (p[1] - lon0).to_radians() * r * lat0.to_radians().cos();
                [x, y]
            })
            .collect();
        let hv = fit(&geo, &HdbscanParams::new(8, Metric::Haversine)).unwrap();
        let eu = fit(&projected, &HdbscanParams::new(8, Metric::Euclidean)).unwrap();
        assert_eq!(hv.n_clusters(), 3);
        assert!(same_partition(&hv.labels, &eu.labels));
    }
}
