//! RBF partition-of-unity discretization with multiquadric local
//! approximants and Wendland-generated Shepard weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{DomainBox, NodeSet, SolutionEvaluator};
use crate::kernels::{rbf_derivatives, rbf_value, wendland_patch, OperatorCoeffs, PatchDerivatives, RbfKind, MAX_DIM};
use crate::models::ProblemSpec;
use crate::numerics::{CsrMatrix, DenseMatrix, LuFactors};
use crate::stepper::SparseSystem;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PumConfig {
    /// Desired node count of an interior patch.
    pub target_nodes: usize,
    /// Relative patch overlap.
    pub overlap: f64,
    /// Added to `0.17 / h - 0.8` when choosing the shape parameter.
    pub epsilon_adjust: f64,
    pub epsilon_min: f64,
    /// Relative pivot threshold for the local interpolation matrices.
    pub pivot_tolerance: f64,
}

impl Default for PumConfig {
    fn default() -> Self {
        Self {
            target_nodes: 130,
            overlap: 0.2,
            epsilon_adjust: 0.0,
            epsilon_min: 0.1,
            pivot_tolerance: crate::numerics::SINGULAR_PIVOT,
        }
    }
}

impl PumConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.overlap > 0.0) || self.target_nodes == 0 || !(self.epsilon_min > 0.0) {
            return Err(Error::InvalidParameters(format!("invalid PUM configuration {self:?}")));
        }
        Ok(())
    }

    /// Multiquadric shape parameter for node spacing `h` along the spot axis.
    pub fn epsilon(&self, h: f64) -> f64 {
        (0.17 / h - 0.8 + self.epsilon_adjust).max(self.epsilon_min)
    }

    pub fn kernel(&self, nodes: &NodeSet) -> RbfKind {
        RbfKind::Multiquadric {
            epsilon: self.epsilon(nodes.spacing()[0]),
        }
    }
}

/// Balls of a common radius centred on a Cartesian grid over the domain.
#[derive(Clone, Debug)]
pub struct PatchCover {
    domain: DomainBox,
    counts: Vec<usize>,
    radius: f64,
    centers: Vec<Vec<f64>>,
    members: Vec<Vec<usize>>,
    /// Patch id for each grid slot, `None` where the patch held no node.
    slots: Vec<Option<usize>>,
}

impl PatchCover {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Patch grid counts per axis.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self, j: usize) -> &[f64] {
        &self.centers[j]
    }

    /// Node indices inside patch `j`, ascending.
    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    fn grid_center(&self, axis: usize, i: usize) -> f64 {
        let lo = self.domain.lower()[axis];
        lo + (i as f64 + 0.5) * self.domain.extent(axis) / self.counts[axis] as f64
    }

    /// Ids of the patches whose open ball contains `x`, ascending.
    pub fn patches_containing(&self, x: &[f64]) -> Vec<usize> {
        let dim = self.dim();
        let mut ranges = Vec::with_capacity(dim);
        for a in 0..dim {
            let idx: Vec<usize> = (0..self.counts[a])
                .filter(|&i| (x[a] - self.grid_center(a, i)).abs() < self.radius)
                .collect();
            ranges.push(idx);
        }
        let mut out = Vec::new();
        let mut cursor = vec![0usize; dim];
        if ranges.iter().any(Vec::is_empty) {
            return out;
        }
        loop {
            let mut slot = 0;
            for a in 0..dim {
                slot = slot * self.counts[a] + ranges[a][cursor[a]];
            }
            if let Some(j) = self.slots[slot] {
                if dist2(x, &self.centers[j]) < self.radius * self.radius {
                    out.push(j);
                }
            }
            let mut a = dim;
            loop {
                if a == 0 {
                    out.sort_unstable();
                    return out;
                }
                a -= 1;
                cursor[a] += 1;
                if cursor[a] < ranges[a].len() {
                    break;
                }
                cursor[a] = 0;
            }
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => 4.0 / 3.0 * std::f64::consts::PI,
    }
}

fn patch_counts(dim: usize, p_s: usize) -> Vec<usize> {
    let mut counts = vec![(p_s / 2).max(1); dim];
    counts[0] = p_s;
    counts
}

fn cover_radius(domain: &DomainBox, counts: &[usize], overlap: f64) -> f64 {
    let dim = domain.dim();
    let h = (0..dim)
        .map(|a| domain.extent(a) / counts[a] as f64)
        .fold(0.0, f64::max)
        / 2.0;
    (dim as f64).sqrt() * h * (1.0 + overlap)
}

/// Chooses the patch grid and builds the cover.
///
/// The spot-axis count runs over 1, 2, 4, 6, ... with half as many patches
/// along the other axes; the largest grid whose expected interior-patch
/// population still reaches the target is taken.
pub fn build_cover(nodes: &NodeSet, cfg: &PumConfig) -> Result<PatchCover> {
    cfg.validate()?;
    let domain = nodes.domain();
    let dim = nodes.dim();
    let density: f64 = nodes.spacing().iter().product();
    let expected = |p_s: usize| {
        let counts = patch_counts(dim, p_s);
        let rho = cover_radius(domain, &counts, cfg.overlap);
        unit_ball_volume(dim) * rho.powi(dim as i32) / density
    };
    let mut best = 1;
    let mut p_s = 2;
    while p_s <= nodes.counts()[0] && expected(p_s) >= cfg.target_nodes as f64 {
        best = p_s;
        p_s += 2;
    }
    build_cover_with_counts(nodes, &patch_counts(dim, best), cfg.overlap)
}

/// Cover with an explicit patch grid.
pub fn build_cover_with_counts(nodes: &NodeSet, counts: &[usize], overlap: f64) -> Result<PatchCover> {
    let domain = nodes.domain().clone();
    let dim = domain.dim();
    if counts.len() != dim || counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidCover(format!("bad patch grid {counts:?}")));
    }
    let radius = cover_radius(&domain, counts, overlap);
    let total: usize = counts.iter().product();
    let mut cover = PatchCover {
        domain,
        counts: counts.to_vec(),
        radius,
        centers: Vec::new(),
        members: Vec::new(),
        slots: vec![None; total],
    };
    let r2 = radius * radius;
    let mut covered = vec![false; nodes.len()];
    for slot in 0..total {
        let mut rest = slot;
        let mut c = vec![0.0; dim];
        for a in (0..dim).rev() {
            c[a] = cover.grid_center(a, rest % counts[a]);
            rest /= counts[a];
        }
        let members: Vec<usize> = (0..nodes.len())
            .filter(|&i| dist2(nodes.point(i), &c) < r2)
            .collect();
        if members.is_empty() {
            continue;
        }
        for &i in &members {
            covered[i] = true;
        }
        cover.slots[slot] = Some(cover.centers.len());
        cover.centers.push(c);
        cover.members.push(members);
    }
    if let Some(i) = covered.iter().position(|&c| !c) {
        return Err(Error::InvalidCover(format!(
            "node {i} at {:?} lies in no patch",
            nodes.point(i)
        )));
    }
    Ok(cover)
}

/// Shepard weights `w_j = phi_j / sum_i phi_i` with first and second
/// derivatives, for every patch containing `x`.
pub fn pu_weights(cover: &PatchCover, x: &[f64]) -> Result<Vec<(usize, PatchDerivatives)>> {
    let ids = cover.patches_containing(x);
    let gens: Vec<PatchDerivatives> = ids
        .iter()
        .map(|&j| wendland_patch(x, cover.center(j), cover.radius()))
        .collect();
    let weights = shepard(&gens, cover.dim())
        .ok_or_else(|| Error::InvalidCover(format!("point {x:?} is not covered")))?;
    Ok(ids.into_iter().zip(weights).collect())
}

/// Normalizes generating functions by their sum, differentiating the
/// quotient; `None` when the sum vanishes.
fn shepard(gens: &[PatchDerivatives], dim: usize) -> Option<Vec<PatchDerivatives>> {
    let mut s = PatchDerivatives::default();
    for g in gens {
        s.value += g.value;
        for a in 0..dim {
            s.grad[a] += g.grad[a];
            for b in 0..dim {
                s.hess[a][b] += g.hess[a][b];
            }
        }
    }
    if !(s.value > 0.0) {
        return None;
    }
    let inv = 1.0 / s.value;
    Some(
        gens.iter()
            .map(|g| {
                let mut w = PatchDerivatives {
                    value: g.value * inv,
                    ..Default::default()
                };
                for a in 0..dim {
                    w.grad[a] = (g.grad[a] - w.value * s.grad[a]) * inv;
                }
                for a in 0..dim {
                    for b in 0..dim {
                        w.hess[a][b] = (g.hess[a][b]
                            - w.value * s.hess[a][b]
                            - w.grad[a] * s.grad[b]
                            - s.grad[a] * w.grad[b])
                            * inv;
                    }
                }
                w
            })
            .collect(),
    )
}

/// `L (w phi)` from the value, gradient and Hessian of both factors.
fn apply_to_product(
    op: &OperatorCoeffs,
    w: &PatchDerivatives,
    phi: (f64, &[f64; MAX_DIM], &[[f64; MAX_DIM]; MAX_DIM]),
) -> f64 {
    let (pv, pg, ph) = phi;
    let dim = op.dim;
    let mut grad = [0.0; MAX_DIM];
    let mut hess = [[0.0; MAX_DIM]; MAX_DIM];
    for a in 0..dim {
        grad[a] = w.value * pg[a] + pv * w.grad[a];
        for b in 0..dim {
            hess[a][b] = w.value * ph[a][b] + w.grad[a] * pg[b] + pg[a] * w.grad[b] + pv * w.hess[a][b];
        }
    }
    op.apply(w.value * pv, &grad, &hess)
}

/// Local differentiation block `D_j = B_j A_j^{-1}` for the rows of
/// `patch` that carry an operator.
struct PatchBlock {
    rows: Vec<usize>,
    cols: Vec<usize>,
    /// `rows.len() x cols.len()`, row-major.
    values: Vec<f64>,
}

fn local_lu(
    kernel: RbfKind,
    nodes: &NodeSet,
    members: &[usize],
    pivot_tolerance: f64,
) -> Result<LuFactors> {
    let n = members.len();
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        a[(i, i)] = rbf_value(kernel, 0.0)?;
        for k in 0..i {
            let r = dist2(nodes.point(members[i]), nodes.point(members[k])).sqrt();
            let v = rbf_value(kernel, r)?;
            a[(i, k)] = v;
            a[(k, i)] = v;
        }
    }
    a.lu_with_tolerance(pivot_tolerance)
}

fn patch_block(
    j: usize,
    nodes: &NodeSet,
    cover: &PatchCover,
    kernel: RbfKind,
    pivot_tolerance: f64,
    weights: &[Vec<(usize, PatchDerivatives)>],
    ops: &[Option<OperatorCoeffs>],
) -> Result<PatchBlock> {
    let members = cover.members(j);
    let n = members.len();
    let rows: Vec<usize> = members.iter().copied().filter(|&k| ops[k].is_some()).collect();
    let mut bt = DenseMatrix::zeros(n, rows.len());
    for (r, &k) in rows.iter().enumerate() {
        let op = ops[k].as_ref().unwrap();
        let w = &weights[k]
            .iter()
            .find(|(id, _)| *id == j)
            .expect("patch member carries its weight")
            .1;
        let xk = nodes.point(k);
        for (i, &node) in members.iter().enumerate() {
            let (v, g, h) = rbf_derivatives(kernel, nodes.point(node), xk)?;
            bt[(i, r)] = apply_to_product(op, w, (v, &g, &h));
        }
    }
    let y = local_lu(kernel, nodes, members, pivot_tolerance)
        .map_err(|e| e.with_context(format!("patch {j}")))?
        .solve_matrix(&bt);
    let mut values = vec![0.0; rows.len() * n];
    for i in 0..n {
        for r in 0..rows.len() {
            values[r * n + i] = y[(i, r)];
        }
    }
    Ok(PatchBlock {
        rows,
        cols: members.to_vec(),
        values,
    })
}

/// Assembles the nodal-value form of the global operator.
///
/// `op_at(k)` gives the operator collocated at node `k`, or `None` for a
/// Dirichlet node. Patch blocks are built on the current rayon pool and
/// accumulated in patch order.
pub fn assemble_operator<F>(
    nodes: &NodeSet,
    cover: &PatchCover,
    kernel: RbfKind,
    pivot_tolerance: f64,
    op_at: F,
) -> Result<SparseSystem>
where
    F: Fn(usize) -> Result<Option<OperatorCoeffs>> + Sync,
{
    kernel.validate()?;
    let ops: Vec<Option<OperatorCoeffs>> =
        (0..nodes.len()).into_par_iter().map(&op_at).collect::<Result<_>>()?;
    let weights: Vec<Vec<(usize, PatchDerivatives)>> = (0..nodes.len())
        .into_par_iter()
        .map(|k| pu_weights(cover, nodes.point(k)))
        .collect::<Result<_>>()?;
    let blocks: Vec<PatchBlock> = (0..cover.len())
        .into_par_iter()
        .map(|j| patch_block(j, nodes, cover, kernel, pivot_tolerance, &weights, &ops))
        .collect::<Result<_>>()?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
    for b in &blocks {
        let n = b.cols.len();
        for (r, &k) in b.rows.iter().enumerate() {
            let vals = &b.values[r * n..(r + 1) * n];
            rows[k].extend(b.cols.iter().copied().zip(vals.iter().copied()));
        }
    }
    let dirichlet = (0..nodes.len()).filter(|&k| ops[k].is_none()).collect();
    SparseSystem::new(CsrMatrix::from_rows(nodes.len(), rows)?, dirichlet)
}

/// Global operator with rows from [`ProblemSpec::collocation_operator`].
pub fn assemble_system(
    nodes: &NodeSet,
    cover: &PatchCover,
    spec: &ProblemSpec,
    cfg: &PumConfig,
) -> Result<SparseSystem> {
    assemble_operator(nodes, cover, cfg.kernel(nodes), cfg.pivot_tolerance, |k| {
        spec.collocation_operator(nodes.tag(k), nodes.point(k))
    })
}

/// Evaluates the global approximant `sum_j w_j s_j` off the nodes.
pub struct PumEvaluator {
    nodes: NodeSet,
    cover: PatchCover,
    kernel: RbfKind,
    pivot_tolerance: f64,
}

impl PumEvaluator {
    pub fn new(nodes: NodeSet, cover: PatchCover, kernel: RbfKind, pivot_tolerance: f64) -> Self {
        Self {
            nodes,
            cover,
            kernel,
            pivot_tolerance,
        }
    }

    pub fn cover(&self) -> &PatchCover {
        &self.cover
    }
}

impl SolutionEvaluator for PumEvaluator {
    fn domain(&self) -> &DomainBox {
        self.nodes.domain()
    }

    fn evaluate_at(&self, u: &[f64], x: &[f64]) -> Result<f64> {
        if u.len() != self.nodes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} nodal values for {} nodes",
                u.len(),
                self.nodes.len()
            )));
        }
        let mut acc = 0.0;
        for (j, w) in pu_weights(&self.cover, x)? {
            let members = self.cover.members(j);
            let data: Vec<f64> = members.iter().map(|&k| u[k]).collect();
            let lambda = local_lu(self.kernel, &self.nodes, members, self.pivot_tolerance)
                .map_err(|e| e.with_context(format!("patch {j}")))?
                .solve(&data);
            let mut s = 0.0;
            for (&k, l) in members.iter().zip(&lambda) {
                s += l * rbf_value(self.kernel, dist2(self.nodes.point(k), x).sqrt())?;
            }
            acc += w.value * s;
        }
        Ok(acc)
    }
}
