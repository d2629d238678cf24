//! Balanced k-d tree over the joint (scaled z1, scaled x) coordinates.
//!
//! The tree is an accelerator, never an approximation: k-nearest and radius
//! queries return exactly the brute-force answer, including the
//! lowest-index rule under distance ties. All comparisons happen on squared
//! distances in the scaled metric.

use crate::dataset::HistoricalDataset;

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact nearest-neighbor / radius index over a dataset.
#[derive(Debug, Clone)]
pub struct KdIndex {
    coords: Vec<f64>, // scaled, row-major, n x dims
    dims: usize,
    n: usize,
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: usize,
    scaling: Vec<f64>,
}

/// Candidate ordering used everywhere: nearer first, lower index on ties.
#[derive(Clone, Copy, PartialEq)]
struct Entry {
    d2: f64,
    idx: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Builds the index. `scaling` holds one positive multiplier per joint
/// dimension (`d_z1` then `d_x`); pass an empty slice for the unscaled
/// metric.
pub fn build_index(dataset: &HistoricalDataset, scaling: &[f64]) -> KdIndex {
    let dims = dataset.d_z1() + dataset.d_x();
    let scaling = if scaling.is_empty() {
        vec![1.0; dims]
    } else {
        assert_eq!(scaling.len(), dims, "scaling length must match d_z1 + d_x");
        assert!(scaling.iter().all(|s| *s > 0.0), "scaling must be positive");
        scaling.to_vec()
    };
    let n = dataset.n();
    let mut coords = vec![0.0; n * dims];
    for i in 0..n {
        let row = &mut coords[i * dims..(i + 1) * dims];
        for (j, v) in dataset.z1(i).iter().enumerate() {
            row[j] = v * scaling[j];
        }
        for (j, v) in dataset.x(i).iter().enumerate() {
            row[dataset.d_z1() + j] = v * scaling[dataset.d_z1() + j];
        }
    }
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut nodes = Vec::new();
    let root = build_node(&coords, dims, &mut order, 0, n, &mut nodes);
    KdIndex {
        coords,
        dims,
        n,
        order,
        nodes,
        root,
        scaling,
    }
}

fn build_node(
    coords: &[f64],
    dims: usize,
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let len = end - start;
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf { start, end });
        return nodes.len() - 1;
    }
    // Split on the axis with the largest spread; a zero spread on every axis
    // means all points coincide and the range becomes a leaf.
    let mut best_axis = 0;
    let mut best_spread = 0.0;
    for axis in 0..dims {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in &order[start..end] {
            let v = coords[i as usize * dims + axis];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let spread = hi - lo;
        if spread > best_spread {
            best_spread = spread;
            best_axis = axis;
        }
    }
    if best_spread == 0.0 {
        nodes.push(Node::Leaf { start, end });
        return nodes.len() - 1;
    }
    let mid = len / 2;
    order[start..end].select_nth_unstable_by(mid, |a, b| {
        coords[*a as usize * dims + best_axis].total_cmp(&coords[*b as usize * dims + best_axis])
    });
    let value = coords[order[start + mid] as usize * dims + best_axis];
    let id = nodes.len();
    nodes.push(Node::Leaf { start, end }); // placeholder
    let left = build_node(coords, dims, order, start, start + mid, nodes);
    let right = build_node(coords, dims, order, start + mid, end, nodes);
    nodes[id] = Node::Split {
        axis: best_axis,
        value,
        left,
        right,
    };
    id
}

impl KdIndex {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn scaling(&self) -> &[f64] {
        &self.scaling
    }

    fn scale_query(&self, z1: &[f64], x: &[f64]) -> Vec<f64> {
        assert_eq!(z1.len() + x.len(), self.dims, "query dimension mismatch");
        let mut q = Vec::with_capacity(self.dims);
        for (j, v) in z1.iter().enumerate() {
            q.push(v * self.scaling[j]);
        }
        for (j, v) in x.iter().enumerate() {
            q.push(v * self.scaling[z1.len() + j]);
        }
        q
    }

    fn dist2(&self, i: usize, q: &[f64]) -> f64 {
        let row = &self.coords[i * self.dims..(i + 1) * self.dims];
        row.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Indices of the `k` nearest points, ascending by index.
    pub fn k_nearest(&self, z1: &[f64], x: &[f64], k: usize) -> Vec<usize> {
        assert!(k >= 1 && k <= self.n, "k out of range");
        let q = self.scale_query(z1, x);
        let mut heap: std::collections::BinaryHeap<Entry> =
            std::collections::BinaryHeap::with_capacity(k + 1);
        self.knn_walk(self.root, &q, k, &mut heap);
        let mut out: Vec<usize> = heap.into_iter().map(|e| e.idx as usize).collect();
        out.sort_unstable();
        out
    }

    fn knn_walk(
        &self,
        node: usize,
        q: &[f64],
        k: usize,
        heap: &mut std::collections::BinaryHeap<Entry>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let cand = Entry {
                        d2: self.dist2(i as usize, q),
                        idx: i,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
                self.knn_walk(near, q, k, heap);
                // The far side must be visited on equality too: it may hold a
                // point at the exact boundary distance with a lower index.
                if heap.len() < k || delta * delta <= heap.peek().unwrap().d2 {
                    self.knn_walk(far, q, k, heap);
                }
            }
        }
    }

    /// Indices of all points with scaled distance <= `h` (inclusive),
    /// ascending by index.
    pub fn within_radius(&self, z1: &[f64], x: &[f64], h: f64) -> Vec<usize> {
        assert!(h >= 0.0, "radius must be nonnegative");
        let q = self.scale_query(z1, x);
        let h2 = h * h;
        let mut out = Vec::new();
        self.radius_walk(self.root, &q, h2, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_walk(&self, node: usize, q: &[f64], h2: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if self.dist2(i as usize, q) <= h2 {
                        out.push(i as usize);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[axis] - value;
                let (near, far) = if delta <= 0.0 { (left, right) } else { (right, left) };
                self.radius_walk(near, q, h2, out);
                if delta * delta <= h2 {
                    self.radius_walk(far, q, h2, out);
                }
            }
        }
    }
}
