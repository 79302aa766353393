//! BDF-2 time integration with a constant leading coefficient.
//!
//! The step sizes are chosen so that `beta0` is the same at every step,
//! hence the system matrix `I - beta0 L` is assembled and ILU-factorized
//! once per solve. The first step is backward Euler with `k1 = beta0`.

use std::io::Write;

use crate::numerics::{gmres, CsrMatrix, GmresConfig, Ilu0Factors};
use crate::{Error, Result};

/// Variable step sequence with constant `beta0`.
#[derive(Clone, Debug)]
pub struct TimeGrid {
    steps: Vec<f64>,
    ratios: Vec<f64>,
    beta0: f64,
}

impl TimeGrid {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Step lengths `k^1 .. k^{N_t}`.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    /// `omega_n = k^n / k^{n-1}`; the first entry is zero (no previous step).
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    /// `(beta0^n, beta1^n, beta2^n)` for step `n` (0-based).
    pub fn weights(&self, n: usize) -> (f64, f64, f64) {
        if n == 0 {
            return (self.steps[0], 1.0, 0.0);
        }
        bdf2_weights(self.steps[n], self.ratios[n])
    }

    /// Backward times `tau^1 .. tau^{N_t}` at the end of each step.
    pub fn times(&self) -> Vec<f64> {
        self.steps
            .iter()
            .scan(0.0, |t, k| {
                *t += k;
                Some(*t)
            })
            .collect()
    }
}

/// Variable-step BDF-2 weights for step length `k` and ratio `omega`.
pub fn bdf2_weights(k: f64, omega: f64) -> (f64, f64, f64) {
    let denom = 1.0 + 2.0 * omega;
    (
        k * (1.0 + omega) / denom,
        (1.0 + omega) * (1.0 + omega) / denom,
        omega * omega / denom,
    )
}

/// Splits `[0, maturity]` into `n_steps` steps with a common `beta0`.
///
/// Each ratio is the positive root of
/// `k^{n-1} w^2 + (k^{n-1} - 2 beta0) w - beta0 = 0`. The recursion is
/// homogeneous in `beta0`, so the sequence is generated for `beta0 = 1` and
/// rescaled to sum to the maturity.
pub fn build_time_grid(maturity: f64, n_steps: usize) -> Result<TimeGrid> {
    if n_steps < 2 {
        return Err(Error::InvalidTimeGrid(format!("need at least 2 steps, got {n_steps}")));
    }
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::InvalidTimeGrid(format!("maturity must be positive, got {maturity}")));
    }
    let mut steps: Vec<f64> = Vec::with_capacity(n_steps);
    let mut ratios = Vec::with_capacity(n_steps);
    steps.push(1.0f64);
    ratios.push(0.0);
    for _ in 1..n_steps {
        let prev = *steps.last().unwrap();
        let b = prev - 2.0;
        let omega = (-b + (b * b + 4.0 * prev).sqrt()) / (2.0 * prev);
        ratios.push(omega);
        steps.push(prev * omega);
    }
    let total: f64 = steps.iter().sum();
    let beta0 = maturity / total;
    for k in &mut steps {
        *k *= beta0;
    }
    Ok(TimeGrid {
        steps,
        ratios,
        beta0,
    })
}

/// Semi-discrete system `du/dtau = L u` with algebraic Dirichlet rows.
///
/// Rows of `operator` belonging to Dirichlet nodes are ignored.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    operator: CsrMatrix,
    dirichlet: Vec<usize>,
    is_dirichlet: Vec<bool>,
}

impl SparseSystem {
    pub fn new(operator: CsrMatrix, dirichlet: Vec<usize>) -> Result<Self> {
        let n = operator.n_rows();
        if operator.n_cols() != n {
            return Err(Error::DimensionMismatch("operator must be square".into()));
        }
        let mut is_dirichlet = vec![false; n];
        for &i in &dirichlet {
            if i >= n {
                return Err(Error::DimensionMismatch(format!("Dirichlet node {i} out of range")));
            }
            is_dirichlet[i] = true;
        }
        Ok(Self {
            operator,
            dirichlet,
            is_dirichlet,
        })
    }

    pub fn len(&self) -> usize {
        self.operator.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn operator(&self) -> &CsrMatrix {
        &self.operator
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, i: usize) -> bool {
        self.is_dirichlet[i]
    }

    /// `I - beta0 L` on PDE rows, identity on Dirichlet rows.
    pub fn system_matrix(&self, beta0: f64) -> CsrMatrix {
        let rows = (0..self.len())
            .map(|i| {
                if self.is_dirichlet[i] {
                    return vec![(i, 1.0)];
                }
                let (cols, vals) = self.operator.row(i);
                let mut row: Vec<(usize, f64)> =
                    cols.iter().zip(vals).map(|(&j, &v)| (j, -beta0 * v)).collect();
                row.push((i, 1.0));
                row
            })
            .collect();
        CsrMatrix::from_rows(self.len(), rows).expect("operator indices are in range")
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepperOptions {
    pub gmres: GmresConfig,
    /// Start GMRES from the previous solution instead of zero.
    pub warm_start: bool,
}

impl Default for StepperOptions {
    fn default() -> Self {
        Self {
            gmres: GmresConfig::default(),
            warm_start: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub tau: f64,
    pub k: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug)]
pub struct Integration {
    /// Nodal values at `tau = T`.
    pub u: Vec<f64>,
    pub steps: Vec<StepRecord>,
    /// Number of ILU(0) factorizations performed (always one).
    pub factorizations: usize,
}

impl Integration {
    pub fn total_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.iterations).sum()
    }

    pub fn max_residual(&self) -> f64 {
        self.steps.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    /// Per-step diagnostics as CSV: `step,k,iterations,residual`.
    pub fn write_step_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "tau", "k", "iterations", "residual"])?;
        for s in &self.steps {
            w.write_record([
                s.step.to_string(),
                s.tau.to_string(),
                s.k.to_string(),
                s.iterations.to_string(),
                s.residual.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Marches `du/dtau = L u` from `u0` over `grid`.
///
/// `boundary(node, tau)` supplies the value of each Dirichlet node at the
/// end of every step.
pub fn integrate<F>(
    system: &SparseSystem,
    grid: &TimeGrid,
    u0: &[f64],
    boundary: F,
    options: &StepperOptions,
) -> Result<Integration>
where
    F: Fn(usize, f64) -> f64,
{
    let n = system.len();
    if u0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial vector of length {} for a system of size {n}",
            u0.len()
        )));
    }
    let matrix = system.system_matrix(grid.beta0());
    let ilu = Ilu0Factors::new(&matrix)?;
    let factorizations = 1;

    let mut prev2 = u0.to_vec();
    let mut prev = u0.to_vec();
    let mut rhs = vec![0.0; n];
    let mut records = Vec::with_capacity(grid.len());
    let zero = vec![0.0; n];
    let mut tau = 0.0;
    for step in 0..grid.len() {
        let k = grid.steps()[step];
        tau += k;
        let (_, beta1, beta2) = grid.weights(step);
        for i in 0..n {
            rhs[i] = if system.is_dirichlet(i) {
                boundary(i, tau)
            } else {
                beta1 * prev[i] - beta2 * prev2[i]
            };
        }
        let guess = if options.warm_start { &prev } else { &zero };
        let out = gmres(&matrix, &rhs, guess, &ilu, &options.gmres).map_err(|e| {
            Error::Integration {
                step: step + 1,
                source: Box::new(e),
            }
        })?;
        records.push(StepRecord {
            step: step + 1,
            tau,
            k,
            iterations: out.iterations,
            residual: out.residual,
        });
        prev2 = std::mem::replace(&mut prev, out.x);
    }
    Ok(Integration {
        u: prev,
        steps: records,
        factorizations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sums_to_maturity_with_constant_beta0() {
        for &(t, n) in &[(1.0, 2), (1.0, 200), (0.37, 57), (5.0, 1000)] {
            let g = build_time_grid(t, n).unwrap();
            assert_eq!(g.len(), n);
            let total: f64 = g.steps().iter().sum();
            assert!((total - t).abs() <= 1e-12 * t);
            assert!((g.weights(0).0 - g.beta0()).abs() <= 1e-12 * g.beta0());
            for step in 1..n {
                let (b0, b1, b2) = g.weights(step);
                assert!((b0 - g.beta0()).abs() <= 1e-12 * g.beta0(), "step {step}");
                let w = g.ratios()[step];
                assert!((b1 - (1.0 + w).powi(2) / (1.0 + 2.0 * w)).abs() < 1e-15);
                assert!((b2 - w * w / (1.0 + 2.0 * w)).abs() < 1e-15);
            }
            assert!((g.times()[n - 1] - t).abs() <= 1e-12 * t);
        }
    }

    #[test]
    fn two_step_grid_solves_quadratic() {
        let g = build_time_grid(1.0, 2).unwrap();
        let (k1, k2) = (g.steps()[0], g.steps()[1]);
        // independent root: with k1 = beta0 the ratio satisfies w^2 - w - 1 = 0
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((k2 / k1 - golden).abs() < 1e-14);
        assert!((k1 + k2 - 1.0).abs() < 1e-15);
        // residual of the defining quadratic with beta0 = k1
        let w = k2 / k1;
        assert!((k1 * w * w + (k1 - 2.0 * k1) * w - k1).abs() < 1e-14);
    }

    #[test]
    fn uniform_weights() {
        let (b0, b1, b2) = bdf2_weights(0.3, 1.0);
        assert!((b0 - 0.2).abs() < 1e-15);
        assert!((b1 - 4.0 / 3.0).abs() < 1e-15);
        assert!((b2 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_short_grids() {
        assert!(matches!(build_time_grid(1.0, 1), Err(Error::InvalidTimeGrid(_))));
        assert!(matches!(build_time_grid(0.0, 10), Err(Error::InvalidTimeGrid(_))));
    }

    fn scalar_decay_error(n_steps: usize) -> f64 {
        let op = CsrMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap();
        let system = SparseSystem::new(op, vec![]).unwrap();
        let grid = build_time_grid(1.0, n_steps).unwrap();
        let out = integrate(&system, &grid, &[1.0], |_, _| 0.0, &StepperOptions::default()).unwrap();
        assert_eq!(out.factorizations, 1);
        (out.u[0] - (-1.0f64).exp()).abs()
    }

    #[test]
    fn scalar_decay_is_second_order() {
        assert!(scalar_decay_error(200) < 1e-4);
        let errors: Vec<f64> = [50, 100, 200, 400].iter().map(|&n| scalar_decay_error(n)).collect();
        for pair in errors.windows(2) {
            let ratio = pair[0] / pair[1];
            assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn zero_operator_keeps_initial_data() {
        let op = CsrMatrix::from_rows(4, vec![vec![]; 4]).unwrap();
        let system = SparseSystem::new(op, vec![]).unwrap();
        let grid = build_time_grid(1.0, 13).unwrap();
        let u0 = [0.0, 0.25, 1.5, -3.0];
        let out = integrate(&system, &grid, &u0, |_, _| 0.0, &StepperOptions::default()).unwrap();
        assert_eq!(out.u, u0);
    }

    #[test]
    fn dirichlet_rows_take_supplied_values() {
        // u0' = -u0 + u1 with u1 held at tau
        let op = CsrMatrix::from_triplets(2, 2, &[(0, 0, -1.0), (0, 1, 1.0), (1, 1, 5.0)]).unwrap();
        let system = SparseSystem::new(op, vec![1]).unwrap();
        let m = system.system_matrix(0.5);
        assert_eq!(m.row(1), (&[1usize][..], &[1.0][..]));
        let grid = build_time_grid(2.0, 40).unwrap();
        let out = integrate(&system, &grid, &[0.0, 0.0], |_, tau| tau, &StepperOptions::default()).unwrap();
        assert!((out.u[1] - 2.0).abs() < 1e-12);
        // exact: u0 = tau - 1 + e^{-tau}
        assert!((out.u[0] - (1.0 + (-2.0f64).exp())).abs() < 5e-3);
        let mut csv_out = Vec::new();
        out.write_step_csv(&mut csv_out).unwrap();
        assert_eq!(String::from_utf8(csv_out).unwrap().lines().count(), 41);
    }

    proptest::proptest! {
        #[test]
        fn grid_invariants(t in 0.01f64..10.0, n in 2usize..400) {
            let g = build_time_grid(t, n).unwrap();
            let total: f64 = g.steps().iter().sum();
            proptest::prop_assert!((total - t).abs() <= 1e-12 * t);
            proptest::prop_assert!(g.steps().iter().all(|&k| k > 0.0));
            for step in 1..n {
                let w = g.ratios()[step];
                let (b0, b1, b2) = g.weights(step);
                proptest::prop_assert!((b0 - g.beta0()).abs() <= 1e-12 * g.beta0());
                proptest::prop_assert!((b1 - (1.0 + w).powi(2) / (1.0 + 2.0 * w)).abs() < 1e-12 * b1);
                proptest::prop_assert!((b2 - w * w / (1.0 + 2.0 * w)).abs() < 1e-12 * b1);
            }
        }
    }
}
