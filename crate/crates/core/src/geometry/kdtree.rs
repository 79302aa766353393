//! Static k-d tree for k-nearest-neighbour queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::{Error, Result};

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<KdNode>,
        right: Box<KdNode>,
    },
}

/// Candidate ordered by squared distance, then by node index.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    dist2: f64,
    index: usize,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

/// Euclidean k-nearest-neighbour index over a fixed point cloud.
///
/// Results are sorted by distance with ties broken towards the lower point
/// index, so queries are deterministic.
#[derive(Debug)]
pub struct NeighborIndex {
    dim: usize,
    coords: Vec<f64>,
    order: Vec<usize>,
    root: KdNode,
}

impl NeighborIndex {
    /// Builds the tree over `coords`, a flat row-major array of points.
    pub fn new(coords: &[f64], dim: usize) -> Self {
        assert!(dim > 0 && coords.len() % dim == 0);
        let n = coords.len() / dim;
        let mut order: Vec<usize> = (0..n).collect();
        let root = build(coords, dim, &mut order, 0);
        Self {
            dim,
            coords: coords.to_vec(),
            order,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Indices of the `k` points closest to `x`.
    pub fn nearest_neighbors(&self, x: &[f64], k: usize) -> Result<Vec<usize>> {
        if k > self.len() {
            return Err(Error::InsufficientNodes {
                requested: k,
                available: self.len(),
            });
        }
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "query of dimension {} against a {}-dimensional index",
                x.len(),
                self.dim
            )));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.search(&self.root, x, k, &mut heap, 0.0);
        let mut found = heap.into_sorted_vec();
        found.truncate(k);
        Ok(found.into_iter().map(|c| c.index).collect())
    }

    fn dist2(&self, i: usize, x: &[f64]) -> f64 {
        self.point(i)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    fn search(
        &self,
        node: &KdNode,
        x: &[f64],
        k: usize,
        heap: &mut BinaryHeap<Candidate>,
        plane_dist2: f64,
    ) {
        if heap.len() == k && plane_dist2 > heap.peek().map_or(f64::INFINITY, |c| c.dist2) {
            return;
        }
        match node {
            KdNode::Leaf { start, end } => {
                for &index in &self.order[*start..*end] {
                    let cand = Candidate {
                        dist2: self.dist2(index, x),
                        index,
                    };
                    if heap.len() < k {
                        heap.push(cand);
                    } else if cand < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(cand);
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = x[*axis] - value;
                let (near, far) = if delta <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, x, k, heap, plane_dist2);
                self.search(far, x, k, heap, plane_dist2.max(delta * delta));
            }
        }
    }
}

fn build(coords: &[f64], dim: usize, order: &mut [usize], offset: usize) -> KdNode {
    let n = order.len();
    if n <= LEAF_SIZE {
        return KdNode::Leaf {
            start: offset,
            end: offset + n,
        };
    }
    let mut axis = 0;
    let mut widest = -1.0;
    for a in 0..dim {
        let (lo, hi) = order.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            let v = coords[i * dim + a];
            (lo.min(v), hi.max(v))
        });
        if hi - lo > widest {
            widest = hi - lo;
            axis = a;
        }
    }
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&i, &j| {
        coords[i * dim + axis]
            .total_cmp(&coords[j * dim + axis])
            .then(i.cmp(&j))
    });
    let value = coords[order[mid] * dim + axis];
    let (lo, hi) = order.split_at_mut(mid);
    KdNode::Split {
        axis,
        value,
        left: Box::new(build(coords, dim, lo, offset)),
        right: Box::new(build(coords, dim, hi, offset + mid)),
    }
}
