//! Truncated domains, Cartesian node sets and nearest-neighbour search.

mod kdtree;

pub use kdtree::NeighborIndex;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Axis-aligned box `[lower, upper]` in 1 to 3 dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() || lower.len() > 3 {
            return Err(Error::InvalidDomain(format!(
                "bounds of lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        for (axis, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "axis {axis}: lower {lo} must be below upper {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.extent(i)).product()
    }

    /// Closed-box membership with a relative slack of `1e-12` per axis.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && (0..self.dim()).all(|i| {
                let tol = 1e-12 * self.extent(i);
                x[i] >= self.lower[i] - tol && x[i] <= self.upper[i] + tol
            })
    }

    /// The box mirrored through the origin along axis 0.
    pub fn reflect_axis0(&self) -> Self {
        let mut lower = self.lower.clone();
        let mut upper = self.upper.clone();
        lower[0] = -self.upper[0];
        upper[0] = -self.lower[0];
        Self { lower, upper }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeTag {
    Interior,
    Face { axis: usize, side: Side },
}

impl NodeTag {
    pub fn is_boundary(&self) -> bool {
        matches!(self, NodeTag::Face { .. })
    }
}

/// Cartesian nodes in interior-first canonical order.
///
/// Nodes `0..n_interior()` are interior; the rest lie on the boundary. Each
/// block is in lexicographic grid order with the last axis varying fastest.
/// A node on several faces carries the tag of the lowest axis it touches.
#[derive(Clone, Debug)]
pub struct NodeSet {
    domain: DomainBox,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    coords: Vec<f64>,
    tags: Vec<NodeTag>,
    grid_index: Vec<usize>,
    n_interior: usize,
}

/// Smallest per-axis count for which a uniform spacing is defined.
pub const MIN_AXIS_COUNT: usize = 2;

impl NodeSet {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn n_boundary(&self) -> usize {
        self.len() - self.n_interior
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn tag(&self, i: usize) -> NodeTag {
        self.tags[i]
    }

    pub fn tags(&self) -> &[NodeTag] {
        &self.tags
    }

    /// Lexicographic tensor-grid position of node `i`.
    pub fn grid_index(&self, i: usize) -> usize {
        self.grid_index[i]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim())
    }
}

/// Uniform tensor grid with `counts[i]` nodes along axis `i`, endpoints
/// included.
pub fn generate_nodes(domain: &DomainBox, counts: &[usize]) -> Result<NodeSet> {
    let d = domain.dim();
    if counts.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "{} counts for a {d}-dimensional box",
            counts.len()
        )));
    }
    if let Some(axis) = counts.iter().position(|&c| c < MIN_AXIS_COUNT) {
        return Err(Error::InvalidResolution(format!(
            "axis {axis} has {} nodes, need at least {MIN_AXIS_COUNT}",
            counts[axis]
        )));
    }
    let spacing: Vec<f64> = (0..d)
        .map(|i| domain.extent(i) / (counts[i] - 1) as f64)
        .collect();
    let total: usize = counts.iter().product();

    let mut interior = Vec::new();
    let mut boundary = Vec::new();
    let mut multi = vec![0usize; d];
    for lin in 0..total {
        let mut rem = lin;
        for axis in (0..d).rev() {
            multi[axis] = rem % counts[axis];
            rem /= counts[axis];
        }
        let mut tag = NodeTag::Interior;
        for axis in 0..d {
            if multi[axis] == 0 {
                tag = NodeTag::Face { axis, side: Side::Lower };
                break;
            }
            if multi[axis] == counts[axis] - 1 {
                tag = NodeTag::Face { axis, side: Side::Upper };
                break;
            }
        }
        let point: Vec<f64> = (0..d)
            .map(|axis| {
                if multi[axis] == counts[axis] - 1 {
                    domain.upper[axis]
                } else {
                    domain.lower[axis] + multi[axis] as f64 * spacing[axis]
                }
            })
            .collect();
        if tag == NodeTag::Interior {
            interior.push((lin, tag, point));
        } else {
            boundary.push((lin, tag, point));
        }
    }

    let n_interior = interior.len();
    let mut coords = Vec::with_capacity(total * d);
    let mut tags = Vec::with_capacity(total);
    let mut grid_index = Vec::with_capacity(total);
    for (lin, tag, point) in interior.into_iter().chain(boundary) {
        coords.extend_from_slice(&point);
        tags.push(tag);
        grid_index.push(lin);
    }
    Ok(NodeSet {
        domain: domain.clone(),
        counts: counts.to_vec(),
        spacing,
        coords,
        tags,
        grid_index,
        n_interior,
    })
}

/// Reads a discrete solution off at arbitrary points of the domain.
pub trait SolutionEvaluator {
    fn domain(&self) -> &DomainBox;

    /// Value of the approximant built from nodal values `u` at `x`. The
    /// point has already been checked against the domain.
    fn evaluate_at(&self, u: &[f64], x: &[f64]) -> Result<f64>;
}

/// Evaluates the approximant of `u` at each of `points`.
pub fn evaluate_solution<E: SolutionEvaluator + ?Sized>(
    evaluator: &E,
    u: &[f64],
    points: &[Vec<f64>],
) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|x| {
            if !evaluator.domain().contains(x) {
                return Err(Error::OutOfDomain { point: x.clone() });
            }
            evaluator.evaluate_at(u, x)
        })
        .collect()
}
