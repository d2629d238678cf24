//! Binary regression tree over the joint (z1, x) features with a minimum
//! leaf size, used as a cluster map: the cluster of a query point is the
//! member list of the leaf it routes to.

use crate::dataset::HistoricalDataset;
use crate::rng::derive_seed;
use rand::seq::SliceRandom;
use rand::Rng;

/// Training options. Defaults are greedy SSE splits on a non-honest tree;
/// random-split and honest modes exist to mirror the theory's tree
/// construction.
#[derive(Debug, Clone)]
pub struct CartOptions {
    pub min_leaf: usize,
    /// Pick the split dimension uniformly at random (seeded) instead of
    /// greedily minimizing SSE across dimensions.
    pub random_split: bool,
    /// Fit the structure on a random half of the data and fill leaf
    /// membership from the other half.
    pub honest: bool,
    pub split_seed: u64,
}

impl Default for CartOptions {
    fn default() -> Self {
        Self {
            min_leaf: 1,
            random_split: false,
            honest: false,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum CartNode {
    Split {
        dim: usize,
        /// Largest feature value routed left; routing uses `feat <= threshold`.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        members: Vec<usize>,
    },
}

/// A trained regression tree with per-leaf member lists.
#[derive(Debug, Clone)]
pub struct CartTree {
    nodes: Vec<CartNode>,
    root: usize,
    dims: usize,
    d_z1: usize,
}

fn feature(ds: &HistoricalDataset, i: usize, dim: usize) -> f64 {
    if dim < ds.d_z1() {
        ds.z1(i)[dim]
    } else {
        ds.x(i)[dim - ds.d_z1()]
    }
}

struct BestSplit {
    dim: usize,
    /// Position in the per-dim sorted order; items[..pos] go left.
    pos: usize,
    threshold: f64,
    children_sse: f64,
}

/// Best SSE threshold on one dimension subject to both children holding at
/// least `min_leaf` items. Returns `None` when no legal split exists.
fn best_split_on_dim(
    ds: &HistoricalDataset,
    items: &[usize],
    dim: usize,
    min_leaf: usize,
) -> Option<BestSplit> {
    let n = items.len();
    let mut order: Vec<usize> = items.to_vec();
    order.sort_by(|&a, &b| {
        feature(ds, a, dim)
            .total_cmp(&feature(ds, b, dim))
            .then(a.cmp(&b))
    });
    let mut prefix_y = vec![0.0; n + 1];
    let mut prefix_y2 = vec![0.0; n + 1];
    for (t, &i) in order.iter().enumerate() {
        prefix_y[t + 1] = prefix_y[t] + ds.y(i);
        prefix_y2[t + 1] = prefix_y2[t] + ds.y(i) * ds.y(i);
    }
    let total_y = prefix_y[n];
    let total_y2 = prefix_y2[n];
    let mut best: Option<BestSplit> = None;
    for t in min_leaf..=(n - min_leaf) {
        let lo = feature(ds, order[t - 1], dim);
        let hi = feature(ds, order[t], dim);
        if lo >= hi {
            continue;
        }
        let (nl, nr) = (t as f64, (n - t) as f64);
        let sse_l = prefix_y2[t] - prefix_y[t] * prefix_y[t] / nl;
        let sse_r = (total_y2 - prefix_y2[t]) - (total_y - prefix_y[t]).powi(2) / nr;
        let sse = sse_l + sse_r;
        if best.as_ref().map_or(true, |b| sse < b.children_sse) {
            best = Some(BestSplit {
                dim,
                pos: t,
                threshold: lo,
                children_sse: sse,
            });
        }
    }
    best
}

fn node_sse(ds: &HistoricalDataset, items: &[usize]) -> f64 {
    let n = items.len() as f64;
    let sum: f64 = items.iter().map(|&i| ds.y(i)).sum();
    let sum2: f64 = items.iter().map(|&i| ds.y(i) * ds.y(i)).sum();
    sum2 - sum * sum / n
}

fn build(
    ds: &HistoricalDataset,
    items: Vec<usize>,
    opts: &CartOptions,
    node_path: u64,
    nodes: &mut Vec<CartNode>,
) -> usize {
    let dims = ds.d_z1() + ds.d_x();
    let legal = items.len() >= 2 * opts.min_leaf;
    let chosen = if !legal {
        None
    } else if opts.random_split {
        // Seeded per-node dimension order; take the first dimension that
        // admits a legal split.
        let mut rng = crate::rng::stream_rng(derive_seed(opts.split_seed, &[node_path]), 0);
        let mut dims_order: Vec<usize> = (0..dims).collect();
        dims_order.shuffle(&mut rng);
        // consume one draw so sibling nodes with equal dim orders still differ
        let _: u64 = rng.random();
        dims_order
            .into_iter()
            .find_map(|dim| best_split_on_dim(ds, &items, dim, opts.min_leaf))
    } else {
        let mut best: Option<BestSplit> = None;
        for dim in 0..dims {
            if let Some(cand) = best_split_on_dim(ds, &items, dim, opts.min_leaf) {
                if best.as_ref().map_or(true, |b| cand.children_sse < b.children_sse) {
                    best = Some(cand);
                }
            }
        }
        // Greedy mode splits only on a strict SSE improvement.
        best.filter(|b| node_sse(ds, &items) - b.children_sse > 1e-12)
    };
    match chosen {
        None => {
            nodes.push(CartNode::Leaf { members: items });
            nodes.len() - 1
        }
        Some(split) => {
            let (left_items, right_items): (Vec<usize>, Vec<usize>) = items
                .iter()
                .partition(|&&i| feature(ds, i, split.dim) <= split.threshold);
            debug_assert_eq!(left_items.len(), split.pos);
            let id = nodes.len();
            nodes.push(CartNode::Leaf { members: vec![] }); // placeholder
            let left = build(ds, left_items, opts, node_path.wrapping_mul(2).wrapping_add(1), nodes);
            let right = build(ds, right_items, opts, node_path.wrapping_mul(2).wrapping_add(2), nodes);
            nodes[id] = CartNode::Split {
                dim: split.dim,
                threshold: split.threshold,
                left,
                right,
            };
            id
        }
    }
}

/// Trains a tree on the full dataset (or, in honest mode, fits structure on
/// a seeded half and assigns leaf membership from the other half).
pub fn train_cart(ds: &HistoricalDataset, opts: &CartOptions) -> CartTree {
    assert!(opts.min_leaf >= 1, "min_leaf must be at least 1");
    assert!(
        opts.min_leaf <= ds.n().saturating_sub(1).max(1),
        "min_leaf must be at most N-1"
    );
    let dims = ds.d_z1() + ds.d_x();
    let mut nodes = Vec::new();
    let root;
    if opts.honest && ds.n() >= 2 {
        let mut all: Vec<usize> = (0..ds.n()).collect();
        let mut rng = crate::rng::stream_rng(derive_seed(opts.split_seed, &[0x4057]), 1);
        all.shuffle(&mut rng);
        let half = ds.n() / 2;
        let structure: Vec<usize> = all[..half].to_vec();
        let estimate: Vec<usize> = all[half..].to_vec();
        root = build(ds, structure, opts, 0, &mut nodes);
        let mut tree = CartTree {
            nodes,
            root,
            dims,
            d_z1: ds.d_z1(),
        };
        tree.clear_members();
        for i in estimate {
            let leaf = tree.route_features(|dim| feature(ds, i, dim));
            if let CartNode::Leaf { members } = &mut tree.nodes[leaf] {
                members.push(i);
            }
        }
        for node in &mut tree.nodes {
            if let CartNode::Leaf { members } = node {
                members.sort_unstable();
            }
        }
        tree
    } else {
        let items: Vec<usize> = (0..ds.n()).collect();
        root = build(ds, items, opts, 0, &mut nodes);
        let mut tree = CartTree {
            nodes,
            root,
            dims,
            d_z1: ds.d_z1(),
        };
        for node in &mut tree.nodes {
            if let CartNode::Leaf { members } = node {
                members.sort_unstable();
            }
        }
        tree
    }
}

impl CartTree {
    fn clear_members(&mut self) {
        for node in &mut self.nodes {
            if let CartNode::Leaf { members } = node {
                members.clear();
            }
        }
    }

    fn route_features(&self, feat: impl Fn(usize) -> f64) -> usize {
        let mut node = self.root;
        loop {
            match &self.nodes[node] {
                CartNode::Leaf { .. } => return node,
                CartNode::Split {
                    dim,
                    threshold,
                    left,
                    right,
                } => {
                    node = if feat(*dim) <= *threshold { *left } else { *right };
                }
            }
        }
    }

    /// Routes a query to its leaf and returns the leaf's member indices.
    pub fn leaf_members(&self, z1: &[f64], x: &[f64]) -> &[usize] {
        assert_eq!(z1.len(), self.d_z1, "z1 dimension mismatch");
        assert_eq!(z1.len() + x.len(), self.dims, "query dimension mismatch");
        let leaf = self.route_features(|dim| {
            if dim < self.d_z1 {
                z1[dim]
            } else {
                x[dim - self.d_z1]
            }
        });
        match &self.nodes[leaf] {
            CartNode::Leaf { members } => members,
            CartNode::Split { .. } => unreachable!(),
        }
    }

    /// All leaf member lists (for partition checks).
    pub fn leaves(&self) -> Vec<&[usize]> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                CartNode::Leaf { members } => Some(members.as_slice()),
                CartNode::Split { .. } => None,
            })
            .collect()
    }
}
