//! RBF-FD discretization with polyharmonic splines and monomial augmentation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{DomainBox, NeighborIndex, NodeSet, SolutionEvaluator};
use crate::kernels::{apply_operator_to_monomial, apply_operator_to_rbf, rbf_value, MonomialBasis, OperatorCoeffs, RbfKind};
use crate::models::ProblemSpec;
use crate::numerics::{CsrMatrix, DenseMatrix};
use crate::stepper::SparseSystem;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FdConfig {
    pub phs_degree: u32,
    pub poly_degree: u32,
    /// Nodes per stencil, centre included.
    pub stencil_size: usize,
}

impl FdConfig {
    pub fn for_dim(dim: usize) -> Self {
        match dim {
            3 => Self {
                phs_degree: 3,
                poly_degree: 3,
                stencil_size: 100,
            },
            _ => Self {
                phs_degree: 5,
                poly_degree: 5,
                stencil_size: 63,
            },
        }
    }

    pub fn basis(&self, dim: usize) -> MonomialBasis {
        MonomialBasis::new(dim, self.poly_degree)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.phs_degree % 2 == 0 {
            return Err(Error::InvalidParameters(format!(
                "PHS degree must be odd, got {}",
                self.phs_degree
            )));
        }
        let m = self.basis(dim).len();
        if self.stencil_size < m {
            return Err(Error::InvalidParameters(format!(
                "stencil size {} is below the {m} monomials of degree {}",
                self.stencil_size, self.poly_degree
            )));
        }
        Ok(())
    }

    fn kernel(&self) -> RbfKind {
        RbfKind::PolyharmonicSpline {
            degree: self.phs_degree,
        }
    }
}

/// One row of the differentiation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct StencilWeights {
    pub center: usize,
    pub neighbors: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Weights `w` with `sum_i w_i u(x_i) ~ (L u)(center)`.
///
/// The stencil is shifted to `center` and scaled by its radius before the
/// saddle system is formed, so the weights apply to unscaled values.
pub fn compute_stencil_weights(
    center: &[f64],
    neighbors: &[&[f64]],
    coeffs: &OperatorCoeffs,
    cfg: &FdConfig,
) -> Result<Vec<f64>> {
    let dim = center.len();
    let basis = cfg.basis(dim);
    let n = neighbors.len();
    let m = basis.len();
    if n < m {
        return Err(Error::InsufficientNodes {
            requested: m,
            available: n,
        });
    }
    let mut local = vec![0.0; n * dim];
    let mut radius: f64 = 0.0;
    for (k, x) in neighbors.iter().enumerate() {
        let mut d2 = 0.0;
        for a in 0..dim {
            let d = x[a] - center[a];
            local[k * dim + a] = d;
            d2 += d * d;
        }
        radius = radius.max(d2.sqrt());
    }
    if radius == 0.0 {
        return Err(Error::SingularSystem {
            context: "degenerate stencil".into(),
            row: 0,
            pivot: 0.0,
        });
    }
    for v in &mut local {
        *v /= radius;
    }
    let scaled = coeffs.scaled(radius);
    let kernel = cfg.kernel();
    let origin = [0.0; 3];
    let origin = &origin[..dim];
    let pt = |k: usize| &local[k * dim..(k + 1) * dim];

    let size = n + m;
    let mut sys = DenseMatrix::zeros(size, size);
    let mut rhs = vec![0.0; size];
    let mut mono = vec![0.0; m];
    for i in 0..n {
        for j in 0..i {
            let r = dist(pt(i), pt(j));
            let v = rbf_value(kernel, r)?;
            sys[(i, j)] = v;
            sys[(j, i)] = v;
        }
        sys[(i, i)] = rbf_value(kernel, 0.0)?;
        basis.eval_into(pt(i), &mut mono);
        for (l, &p) in mono.iter().enumerate() {
            sys[(i, n + l)] = p;
            sys[(n + l, i)] = p;
        }
        rhs[i] = apply_operator_to_rbf(kernel, &scaled, pt(i), origin)?;
    }
    for (l, e) in basis.exponents().iter().enumerate() {
        rhs[n + l] = apply_operator_to_monomial(&e[..dim], &scaled, origin);
    }
    let lu = sys.lu()?;
    let mut w = lu.solve(&rhs);
    w.truncate(n);
    Ok(w)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Stencil rows of every node for which `op_at` yields an operator.
pub fn assemble_stencils<F>(nodes: &NodeSet, op_at: F, cfg: &FdConfig) -> Result<Vec<StencilWeights>>
where
    F: Fn(usize) -> Result<Option<OperatorCoeffs>> + Sync,
{
    cfg.validate(nodes.dim())?;
    let index = NeighborIndex::new(nodes.coords(), nodes.dim());
    let rows: Vec<Option<StencilWeights>> = (0..nodes.len())
        .into_par_iter()
        .map(|i| match op_at(i)? {
            Some(op) => stencil_at(nodes, &index, i, &op, cfg).map(Some),
            None => Ok(None),
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Sparse semi-discrete system; `op_at(k)` is the operator collocated at
/// node `k`, `None` marking a Dirichlet row.
pub fn assemble_operator<F>(nodes: &NodeSet, op_at: F, cfg: &FdConfig) -> Result<SparseSystem>
where
    F: Fn(usize) -> Result<Option<OperatorCoeffs>> + Sync,
{
    cfg.validate(nodes.dim())?;
    if nodes.len() < cfg.stencil_size {
        return Err(Error::InsufficientNodes {
            requested: cfg.stencil_size,
            available: nodes.len(),
        });
    }
    let index = NeighborIndex::new(nodes.coords(), nodes.dim());
    let rows: Vec<Option<Vec<(usize, f64)>>> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let Some(op) = op_at(i)? else {
                return Ok(None);
            };
            let s = stencil_at(nodes, &index, i, &op, cfg)?;
            Ok(Some(s.neighbors.into_iter().zip(s.weights).collect()))
        })
        .collect::<Result<_>>()?;
    let dirichlet = (0..nodes.len()).filter(|&i| rows[i].is_none()).collect();
    let rows = rows.into_iter().map(Option::unwrap_or_default).collect();
    SparseSystem::new(CsrMatrix::from_rows(nodes.len(), rows)?, dirichlet)
}

fn stencil_at(
    nodes: &NodeSet,
    index: &NeighborIndex,
    i: usize,
    op: &OperatorCoeffs,
    cfg: &FdConfig,
) -> Result<StencilWeights> {
    let x = nodes.point(i);
    let neighbors = index.nearest_neighbors(x, cfg.stencil_size)?;
    let pts: Vec<&[f64]> = neighbors.iter().map(|&j| nodes.point(j)).collect();
    let weights = compute_stencil_weights(x, &pts, op, cfg)
        .map_err(|e| e.with_context(format!("stencil at node {i}")))?;
    Ok(StencilWeights {
        center: i,
        neighbors,
        weights,
    })
}

/// Differentiation matrix with rows from
/// [`ProblemSpec::collocation_operator`].
pub fn assemble_system(nodes: &NodeSet, spec: &ProblemSpec, cfg: &FdConfig) -> Result<SparseSystem> {
    assemble_operator(nodes, |k| spec.collocation_operator(nodes.tag(k), nodes.point(k)), cfg)
}

/// Local PHS interpolation on the `n` nodes nearest to the query point.
pub struct FdEvaluator {
    nodes: NodeSet,
    index: NeighborIndex,
    cfg: FdConfig,
}

impl FdEvaluator {
    pub fn new(nodes: NodeSet, cfg: FdConfig) -> Self {
        let index = NeighborIndex::new(nodes.coords(), nodes.dim());
        Self { nodes, index, cfg }
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.nodes
    }
}

impl SolutionEvaluator for FdEvaluator {
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
        let n = self.cfg.stencil_size.min(self.nodes.len());
        let neighbors = self.index.nearest_neighbors(x, n)?;
        if let Some(&j) = neighbors.first() {
            if dist(self.nodes.point(j), x) == 0.0 {
                return Ok(u[j]);
            }
        }
        let pts: Vec<&[f64]> = neighbors.iter().map(|&j| self.nodes.point(j)).collect();
        let w = compute_stencil_weights(x, &pts, &OperatorCoeffs::identity(x.len()), &self.cfg)?;
        Ok(neighbors.iter().zip(&w).map(|(&j, wj)| wj * u[j]).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::generate_nodes;
    use crate::models::builtin;
    use rand::{seq::SliceRandom, Rng, SeedableRng};

    #[test]
    fn second_difference_in_one_dimension() {
        let h = 0.01;
        let cfg = FdConfig {
            phs_degree: 3,
            poly_degree: 2,
            stencil_size: 3,
        };
        let pts = [[-h], [0.0], [h]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let w = compute_stencil_weights(&[0.0], &refs, &OperatorCoeffs::laplacian(1), &cfg).unwrap();
        let expect = [1.0 / (h * h), -2.0 / (h * h), 1.0 / (h * h)];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9 * b.abs(), "{a} vs {b}");
        }
    }

    fn random_stencil(rng: &mut impl Rng, dim: usize, n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
        let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut pts = vec![center.clone()];
        while pts.len() < n {
            pts.push(center.iter().map(|c| c + rng.gen_range(-0.1..0.1)).collect());
        }
        (center, pts)
    }

    #[test]
    fn identity_reproduces_constants() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let cfg = FdConfig::for_dim(2);
        let (_, pts) = random_stencil(&mut rng, 2, cfg.stencil_size);
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let x = [pts[0][0] + 0.013, pts[0][1] - 0.007];
        let w = compute_stencil_weights(&x, &refs, &OperatorCoeffs::identity(2), &cfg).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let basis = cfg.basis(2);
        let mut at_x = vec![0.0; basis.len()];
        basis.eval_into(&x, &mut at_x);
        let mut acc = vec![0.0; basis.len()];
        let mut row = vec![0.0; basis.len()];
        for (p, wi) in pts.iter().zip(&w) {
            basis.eval_into(p, &mut row);
            for (a, r) in acc.iter_mut().zip(&row) {
                *a += wi * r;
            }
        }
        for (a, b) in acc.iter().zip(&at_x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_derivative_of_product() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(4);
        let cfg = FdConfig::for_dim(2);
        let (c, pts) = random_stencil(&mut rng, 2, cfg.stencil_size);
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let mut op = OperatorCoeffs::zero(2);
        op.a[0][1] = 1.0;
        let w = compute_stencil_weights(&c, &refs, &op, &cfg).unwrap();
        let sum: f64 = pts.iter().zip(&w).map(|(p, wi)| wi * p[0] * p[1]).sum();
        assert!((sum - 1.0).abs() < 1e-8, "{sum}");
    }

    #[test]
    fn permuting_neighbours_permutes_weights() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for dim in [2, 3] {
            let cfg = FdConfig::for_dim(dim);
            let (c, pts) = random_stencil(&mut rng, dim, cfg.stencil_size);
            let mut op = OperatorCoeffs::laplacian(dim);
            op.b[0] = 0.3;
            op.c = -0.1;
            let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
            let w = compute_stencil_weights(&c, &refs, &op, &cfg).unwrap();
            let mut perm: Vec<usize> = (0..pts.len()).collect();
            perm.shuffle(&mut rng);
            let shuffled: Vec<&[f64]> = perm.iter().map(|&k| &pts[k][..]).collect();
            let wp = compute_stencil_weights(&c, &shuffled, &op, &cfg).unwrap();
            let scale = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (k, &src) in perm.iter().enumerate() {
                assert!((wp[k] - w[src]).abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn coincident_nodes_are_singular() {
        let cfg = FdConfig {
            phs_degree: 3,
            poly_degree: 1,
            stencil_size: 4,
        };
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
        let err = compute_stencil_weights(&[0.0, 0.0], &refs, &OperatorCoeffs::laplacian(2), &cfg);
        assert!(matches!(err, Err(Error::SingularSystem { .. })));
    }

    #[test]
    fn config_validation() {
        assert_eq!(FdConfig::for_dim(2).basis(2).len(), 21);
        assert_eq!(FdConfig::for_dim(3).basis(3).len(), 20);
        let bad = FdConfig {
            phs_degree: 4,
            ..FdConfig::for_dim(2)
        };
        assert!(bad.validate(2).is_err());
        let small = FdConfig {
            stencil_size: 20,
            ..FdConfig::for_dim(2)
        };
        assert!(small.validate(2).is_err());
    }

    #[test]
    fn heston_system_shape_and_constant_field() {
        let spec = builtin("qlsv1").unwrap();
        let nodes = generate_nodes(&spec.domain, &[20, 10]).unwrap();
        let cfg = FdConfig::for_dim(2);
        let system = assemble_system(&nodes, &spec, &cfg).unwrap();
        assert_eq!(system.len(), 200);
        assert!(system.operator().nnz() <= 200 * 63);
        for i in 0..200 {
            let (cols, _) = system.operator().row(i);
            if system.is_dirichlet(i) {
                assert!(cols.is_empty());
            } else {
                assert_eq!(cols.len(), 63);
            }
        }
        // c = -r = 0 for this problem
        let ones = vec![1.0; 200];
        for (i, v) in system.operator().mul_vec(&ones).iter().enumerate() {
            let (_, vals) = system.operator().row(i);
            let scale = vals.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
            assert!(v.abs() < 1e-8 * scale, "row {i}: {v}");
        }
    }

    #[test]
    fn all_dirichlet_gives_identity() {
        let domain = DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let nodes = generate_nodes(&domain, &[9, 9]).unwrap();
        let cfg = FdConfig::for_dim(2);
        let system = assemble_operator(
            &nodes,
            |k| Ok((!nodes.tag(k).is_boundary()).then(|| OperatorCoeffs::laplacian(2))),
            &cfg,
        )
        .unwrap();
        let m = system.system_matrix(0.1);
        for i in 0..nodes.len() {
            if nodes.tag(i).is_boundary() {
                assert_eq!(m.row(i), (&[i][..], &[1.0][..]));
            }
        }
    }

    #[test]
    fn evaluator_interpolates_polynomials() {
        let domain = DomainBox::new(vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let nodes = generate_nodes(&domain, &[20, 10]).unwrap();
        let f = |x: &[f64]| 1.0 + x[0] - 2.0 * x[1] * x[1] + x[0] * x[0] * x[1];
        let u: Vec<f64> = nodes.points().map(f).collect();
        let ev = FdEvaluator::new(nodes, FdConfig::for_dim(2));
        for x in [[0.75, 0.114], [1.0, 0.5], [1.999, 0.001]] {
            assert!((ev.evaluate_at(&u, &x).unwrap() - f(&x)).abs() < 1e-9);
        }
        let pts = vec![vec![3.0, 0.5]];
        assert!(matches!(
            crate::geometry::evaluate_solution(&ev, &u, &pts),
            Err(Error::OutOfDomain { .. })
        ));
    }

    proptest::proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(32))]
        #[test]
        fn random_stencils_reproduce_the_polynomial_space(seed in 0u64..1_000_000, dim in 2usize..4) {
            let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
            let cfg = FdConfig::for_dim(dim);
            let (c, pts) = random_stencil(&mut rng, dim, cfg.stencil_size);
            let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
            let mut op = OperatorCoeffs::zero(dim);
            for i in 0..dim {
                op.b[i] = rng.gen_range(-1.0..1.0);
                for j in i..dim {
                    op.a[i][j] = rng.gen_range(-1.0..1.0);
                }
            }
            op.c = rng.gen_range(-1.0..1.0);
            let w = compute_stencil_weights(&c, &refs, &op, &cfg).unwrap();
            let basis = cfg.basis(dim);
            let mut row = vec![0.0; basis.len()];
            let mut acc = vec![0.0; basis.len()];
            for (p, wi) in pts.iter().zip(&w) {
                basis.eval_into(p, &mut row);
                for (a, r) in acc.iter_mut().zip(&row) {
                    *a += wi * r;
                }
            }
            for (e, a) in basis.exponents().iter().zip(&acc) {
                let exact = crate::kernels::apply_operator_to_monomial(&e[..dim], &op, &c);
                proptest::prop_assert!((a - exact).abs() <= 1e-8 * exact.abs().max(1.0), "{a} vs {exact}");
            }
        }
    }
}
