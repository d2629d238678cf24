//! Cluster-weight families: k-nearest-neighbor, bandwidth (local sample
//! average), and regression-tree leaves. Each maps a query decision/context
//! pair to a set of historical indices carrying uniform weight `1/k`.
//!
//! Cluster queries deliberately accept only the uncertainty-affecting part
//! of the decision: the uncertainty-independent part cannot influence
//! cluster membership by construction.

pub mod cart;
pub mod kdtree;

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::dataset::HistoricalDataset;
pub use cart::{train_cart, CartOptions, CartTree};
pub use kdtree::{build_index, KdIndex};

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("empty cluster{}", candidate.map(|c| format!(" at candidate {c}")).unwrap_or_default())]
    EmptyCluster { candidate: Option<usize> },
    #[error("k = {k} out of range for dataset of size {n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("invalid weight spec: {0}")]
    InvalidSpec(String),
}

/// A neighborhood of historical samples, each carrying weight `1/k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    members: Vec<usize>,
}

impl Cluster {
    /// Builds a cluster from member indices; sorts and validates them.
    pub fn new(mut members: Vec<usize>, n: usize) -> Result<Self, WeightError> {
        if members.is_empty() {
            return Err(WeightError::EmptyCluster { candidate: None });
        }
        members.sort_unstable();
        members.dedup();
        if let Some(&max) = members.last() {
            if max >= n {
                return Err(WeightError::KOutOfRange { k: max, n });
            }
        }
        Ok(Self { members })
    }

    fn from_sorted(members: Vec<usize>) -> Self {
        debug_assert!(members.windows(2).all(|w| w[0] < w[1]));
        Self { members }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    /// Uniform weight of each member.
    pub fn weight(&self) -> f64 {
        1.0 / self.members.len() as f64
    }

    /// Member outcomes in member order.
    pub fn outcomes(&self, ds: &HistoricalDataset) -> Vec<f64> {
        self.members.iter().map(|&i| ds.y(i)).collect()
    }
}

/// Cluster size given either directly or as the rate `ceil(C * N^delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SizeRule {
    Count(usize),
    Rate { c: f64, delta: f64 },
}

impl SizeRule {
    fn resolve(&self, n: usize) -> usize {
        match *self {
            SizeRule::Count(k) => k,
            SizeRule::Rate { c, delta } => (c * (n as f64).powf(delta)).ceil() as usize,
        }
    }
}

/// Bandwidth given either directly or as the rate `C * N^(-delta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    Fixed(f64),
    Rate { c: f64, delta: f64 },
}

impl BandwidthRule {
    fn resolve(&self, n: usize) -> f64 {
        match *self {
            BandwidthRule::Fixed(h) => h,
            BandwidthRule::Rate { c, delta } => c * (n as f64).powf(-delta),
        }
    }
}

/// Which weight family to use and with what parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    Knn { k: SizeRule },
    Lsa { h: BandwidthRule },
    Cart {
        min_leaf: SizeRule,
        random_split: bool,
        honest: bool,
        split_seed: u64,
    },
}

/// A weight family plus the per-dimension scaling applied inside the
/// distance metric (ignored by the tree family). Empty scaling means all
/// ones.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub scaling: Vec<f64>,
}

impl WeightSpec {
    pub fn knn_k(k: usize) -> Self {
        Self {
            kind: WeightKind::Knn {
                k: SizeRule::Count(k),
            },
            scaling: vec![],
        }
    }

    pub fn knn_rate(c: f64, delta: f64) -> Self {
        Self {
            kind: WeightKind::Knn {
                k: SizeRule::Rate { c, delta },
            },
            scaling: vec![],
        }
    }

    pub fn lsa_h(h: f64) -> Self {
        Self {
            kind: WeightKind::Lsa {
                h: BandwidthRule::Fixed(h),
            },
            scaling: vec![],
        }
    }

    pub fn lsa_rate(c: f64, delta: f64) -> Self {
        Self {
            kind: WeightKind::Lsa {
                h: BandwidthRule::Rate { c, delta },
            },
            scaling: vec![],
        }
    }

    pub fn cart_min_leaf(min_leaf: usize) -> Self {
        Self {
            kind: WeightKind::Cart {
                min_leaf: SizeRule::Count(min_leaf),
                random_split: false,
                honest: false,
                split_seed: 0,
            },
            scaling: vec![],
        }
    }

    pub fn with_scaling(mut self, scaling: Vec<f64>) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<(), WeightError> {
        if self.scaling.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
            return Err(WeightError::InvalidSpec(
                "scaling entries must be positive".into(),
            ));
        }
        match &self.kind {
            WeightKind::Knn { k } => match *k {
                SizeRule::Count(k) if k >= 1 => Ok(()),
                SizeRule::Count(_) => Err(WeightError::InvalidSpec("k must be >= 1".into())),
                SizeRule::Rate { c, delta } => {
                    if c > 0.0 && c < 1.0 && delta > 0.5 && delta < 1.0 {
                        Ok(())
                    } else {
                        Err(WeightError::InvalidSpec(
                            "knn rate requires C in (0,1) and delta in (0.5,1)".into(),
                        ))
                    }
                }
            },
            WeightKind::Lsa { h } => match *h {
                BandwidthRule::Fixed(h) if h > 0.0 => Ok(()),
                BandwidthRule::Fixed(_) => {
                    Err(WeightError::InvalidSpec("bandwidth must be positive".into()))
                }
                BandwidthRule::Rate { c, delta } => {
                    if c > 0.0 && delta > 0.0 && delta < 1.0 {
                        Ok(())
                    } else {
                        Err(WeightError::InvalidSpec(
                            "lsa rate requires C > 0 and delta in (0,1)".into(),
                        ))
                    }
                }
            },
            WeightKind::Cart { min_leaf, .. } => match *min_leaf {
                SizeRule::Count(m) if m >= 1 => Ok(()),
                SizeRule::Count(_) => {
                    Err(WeightError::InvalidSpec("min_leaf must be >= 1".into()))
                }
                SizeRule::Rate { c, delta } => {
                    if c > 0.0 && delta > 0.0 && delta < 1.0 {
                        Ok(())
                    } else {
                        Err(WeightError::InvalidSpec(
                            "cart rate requires C > 0 and delta in (0,1)".into(),
                        ))
                    }
                }
            },
        }
    }

    /// Resolved neighbor count for a dataset of size `n` (kNN only).
    pub fn resolve_k(&self, n: usize) -> Option<usize> {
        match &self.kind {
            WeightKind::Knn { k } => Some(k.resolve(n).min(n)),
            _ => None,
        }
    }

    /// Resolved bandwidth for a dataset of size `n` (bandwidth family only).
    pub fn resolve_h(&self, n: usize) -> Option<f64> {
        match &self.kind {
            WeightKind::Lsa { h } => Some(h.resolve(n)),
            _ => None,
        }
    }

    /// Resolved minimum leaf size `min(ceil(C N^delta), N-1)` (tree only).
    pub fn resolve_min_leaf(&self, n: usize) -> Option<usize> {
        match &self.kind {
            WeightKind::Cart { min_leaf, .. } => {
                Some(min_leaf.resolve(n).min(n.saturating_sub(1)).max(1))
            }
            _ => None,
        }
    }
}

/// The `k` historical points nearest to (z1, x) in the scaled metric,
/// ties broken toward lower indices.
pub fn knn_cluster(index: &KdIndex, z1: &[f64], x: &[f64], k: usize) -> Result<Cluster, WeightError> {
    if k < 1 || k > index.n() {
        return Err(WeightError::KOutOfRange { k, n: index.n() });
    }
    Ok(Cluster::from_sorted(index.k_nearest(z1, x, k)))
}

/// All historical points within scaled distance `h` of (z1, x), boundary
/// inclusive. An empty result is surfaced as an error; the caller decides
/// whether to widen the bandwidth or fall back to another weight family.
pub fn lsa_cluster(index: &KdIndex, z1: &[f64], x: &[f64], h: f64) -> Result<Cluster, WeightError> {
    if h <= 0.0 {
        return Err(WeightError::InvalidSpec("bandwidth must be positive".into()));
    }
    let members = index.within_radius(z1, x, h);
    if members.is_empty() {
        return Err(WeightError::EmptyCluster { candidate: None });
    }
    Ok(Cluster::from_sorted(members))
}

/// Cluster of the tree leaf the query routes to.
pub fn cart_cluster(tree: &CartTree, z1: &[f64], x: &[f64]) -> Result<Cluster, WeightError> {
    let members = tree.leaf_members(z1, x);
    if members.is_empty() {
        return Err(WeightError::EmptyCluster { candidate: None });
    }
    Ok(Cluster::from_sorted(members.to_vec()))
}

/// Precomputed candidate -> cluster map for a fixed query context.
#[derive(Debug, Clone)]
pub struct ClusterTable {
    pub x: Vec<f64>,
    pub candidates: Vec<Vec<f64>>,
    pub clusters: Vec<Cluster>,
}

impl ClusterTable {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn cluster(&self, t: usize) -> &Cluster {
        &self.clusters[t]
    }

    /// Debug serialization: one `candidate_index,member_index` row per
    /// membership.
    pub fn save_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut out = String::from("candidate_index,member_index\n");
        for (t, cluster) in self.clusters.iter().enumerate() {
            for &i in cluster.members() {
                writeln!(out, "{t},{i}").unwrap();
            }
        }
        std::fs::write(path, out)
    }
}

/// Builds the per-candidate cluster table for a fixed context. Nearest and
/// bandwidth families share one index; the tree family trains one tree.
pub fn precompute_clusters(
    dataset: &HistoricalDataset,
    candidates: &[Vec<f64>],
    x: &[f64],
    spec: &WeightSpec,
) -> Result<ClusterTable, WeightError> {
    assert!(!candidates.is_empty(), "candidate list must be nonempty");
    spec.validate()?;
    let n = dataset.n();
    let clusters: Vec<Cluster> = match &spec.kind {
        WeightKind::Knn { .. } => {
            let index = build_index(dataset, &spec.scaling);
            let k = spec.resolve_k(n).unwrap();
            candidates
                .iter()
                .map(|z1| knn_cluster(&index, z1, x, k))
                .collect::<Result<_, _>>()?
        }
        WeightKind::Lsa { .. } => {
            let index = build_index(dataset, &spec.scaling);
            let h = spec.resolve_h(n).unwrap();
            candidates
                .iter()
                .enumerate()
                .map(|(t, z1)| {
                    lsa_cluster(&index, z1, x, h).map_err(|e| match e {
                        WeightError::EmptyCluster { .. } => {
                            WeightError::EmptyCluster { candidate: Some(t) }
                        }
                        other => other,
                    })
                })
                .collect::<Result<_, _>>()?
        }
        WeightKind::Cart {
            min_leaf,
            random_split,
            honest,
            split_seed,
        } => {
            let opts = CartOptions {
                min_leaf: min_leaf
                    .resolve(n)
                    .min(n.saturating_sub(1))
                    .max(1),
                random_split: *random_split,
                honest: *honest,
                split_seed: *split_seed,
            };
            let tree = train_cart(dataset, &opts);
            candidates
                .iter()
                .enumerate()
                .map(|(t, z1)| {
                    cart_cluster(&tree, z1, x).map_err(|e| match e {
                        WeightError::EmptyCluster { .. } => {
                            WeightError::EmptyCluster { candidate: Some(t) }
                        }
                        other => other,
                    })
                })
                .collect::<Result<_, _>>()?
        }
    };
    Ok(ClusterTable {
        x: x.to_vec(),
        candidates: candidates.to_vec(),
        clusters,
    })
}
