//! Helpers shared by the integration test targets.

#![allow(dead_code)]

use std::f64::consts::PI;

use rbfprice::geometry::{generate_nodes, DomainBox, NodeSet};
use rbfprice::harness::Method;
use rbfprice::kernels::OperatorCoeffs;
use rbfprice::numerics::{CsrMatrix, GmresConfig};
use rbfprice::rbffd::{self, FdConfig};
use rbfprice::rbfpum::{self, PumConfig};
use rbfprice::stepper::{build_time_grid, integrate, SparseSystem, StepperOptions, TimeGrid};

const HEAT_T: f64 = 0.05;
const HEAT_STEPS: usize = 100;

fn mode(x: &[f64]) -> f64 {
    (PI * x[0]).sin() * (PI * x[1]).sin()
}

/// Amplitude of the eigenmode after the full time-discrete march, so that
/// comparing against it leaves only the spatial error.
fn discrete_amplitude(grid: &TimeGrid) -> f64 {
    let lambda = 2.0 * PI * PI;
    let (mut prev2, mut prev) = (1.0, 1.0);
    for n in 0..grid.len() {
        let (b0, b1, b2) = grid.weights(n);
        let next = (b1 * prev - b2 * prev2) / (1.0 + b0 * lambda);
        prev2 = prev;
        prev = next;
    }
    prev
}

fn unit_square(n: usize) -> NodeSet {
    let unit = DomainBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    generate_nodes(&unit, &[n, n]).unwrap()
}

/// Max nodal error for `u_t = Laplacian u` on the unit square with the
/// manufactured solution `exp(-2 pi^2 t) sin(pi x) sin(pi y)`.
pub fn heat_error(method: Method, n: usize) -> f64 {
    let nodes = unit_square(n);
    let rows = |i: usize| {
        Ok(if nodes.tag(i).is_boundary() {
            None
        } else {
            Some(OperatorCoeffs::laplacian(2))
        })
    };
    let system = match method {
        Method::RbfFd => rbffd::assemble_operator(&nodes, rows, &FdConfig::for_dim(2)).unwrap(),
        Method::RbfPum => {
            let cfg = PumConfig::default();
            let cover = rbfpum::build_cover(&nodes, &cfg).unwrap();
            rbfpum::assemble_operator(&nodes, &cover, cfg.kernel(&nodes), cfg.pivot_tolerance, rows)
                .unwrap()
        }
    };
    let grid = build_time_grid(HEAT_T, HEAT_STEPS).unwrap();
    let u0: Vec<f64> = nodes.points().map(mode).collect();
    let amplitude = discrete_amplitude(&grid);
    let opts = StepperOptions {
        gmres: GmresConfig {
            tolerance: 1e-12,
            ..GmresConfig::default()
        },
        warm_start: true,
    };
    let run = integrate(&system, &grid, &u0, |_, _| 0.0, &opts).unwrap();
    nodes
        .points()
        .zip(&run.u)
        .map(|(x, u)| (u - amplitude * mode(x)).abs())
        .fold(0.0, f64::max)
}

/// Grids used for the spatial-order check. RBF-PUM starts at 21 because
/// coarser unit-square grids give flat multiquadric patches that fail the
/// pivot test.
pub fn heat_grids(method: Method) -> [usize; 3] {
    match method {
        Method::RbfFd => [11, 21, 41],
        Method::RbfPum => [21, 31, 41],
    }
}

/// Error of `y' = -y, y(0) = 1` at `t = 1` with `n` steps.
pub fn scalar_decay_error(n: usize) -> f64 {
    let op = CsrMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap();
    let system = SparseSystem::new(op, vec![]).unwrap();
    let grid = build_time_grid(1.0, n).unwrap();
    let out = integrate(&system, &grid, &[1.0], |_, _| 0.0, &StepperOptions::default()).unwrap();
    (out.u[0] - (-1.0f64).exp()).abs()
}
