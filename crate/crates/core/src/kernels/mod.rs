//! Radial kernels, monomial bases and exact application of second-order
//! differential operators to them.

mod monomial;
mod operator;
mod wendland;

pub use monomial::{apply_operator_to_monomial, MonomialBasis};
pub use operator::{OperatorCoeffs, MAX_DIM};
pub use wendland::{wendland, wendland_derivatives, wendland_patch, PatchDerivatives};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The radial basis functions in common use.
///
/// Shaped kernels carry `epsilon > 0`; polyharmonic splines carry an odd
/// degree `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RbfKind {
    Gaussian { epsilon: f64 },
    Multiquadric { epsilon: f64 },
    InverseMultiquadric { epsilon: f64 },
    InverseQuadratic { epsilon: f64 },
    PolyharmonicSpline { degree: u32 },
}

impl RbfKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RbfKind::Gaussian { epsilon }
            | RbfKind::Multiquadric { epsilon }
            | RbfKind::InverseMultiquadric { epsilon }
            | RbfKind::InverseQuadratic { epsilon } => {
                if epsilon > 0.0 && epsilon.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameters(format!(
                        "shape parameter must be positive, got {epsilon}"
                    )))
                }
            }
            RbfKind::PolyharmonicSpline { degree } => {
                if degree % 2 == 1 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameters(format!(
                        "polyharmonic spline degree must be odd, got {degree}"
                    )))
                }
            }
        }
    }
}

/// `phi(r)` for a nonnegative radius.
pub fn rbf_value(kind: RbfKind, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("negative radius {r}")));
    }
    Ok(phi(kind, r))
}

#[inline]
pub(crate) fn phi(kind: RbfKind, r: f64) -> f64 {
    match kind {
        RbfKind::Gaussian { epsilon } => (-(epsilon * r).powi(2)).exp(),
        RbfKind::Multiquadric { epsilon } => (1.0 + (epsilon * r).powi(2)).sqrt(),
        RbfKind::InverseMultiquadric { epsilon } => 1.0 / (1.0 + (epsilon * r).powi(2)).sqrt(),
        RbfKind::InverseQuadratic { epsilon } => 1.0 / (1.0 + (epsilon * r).powi(2)),
        RbfKind::PolyharmonicSpline { degree } => r.powi(degree as i32),
    }
}

/// Radial derivative factors: with `d = x - c` and `r = |d|`,
/// `grad phi = g1 * d` and `hess phi = g1 * I + g2 * d d^T`.
///
/// Returns `(phi, g1, g2 * r^2, r)` so the `d d^T / r^2` direction can be
/// formed without dividing by zero at the center.
#[inline]
fn radial_factors(kind: RbfKind, r: f64) -> Result<(f64, f64, f64)> {
    Ok(match kind {
        RbfKind::Gaussian { epsilon } => {
            let e2 = epsilon * epsilon;
            let v = (-e2 * r * r).exp();
            (v, -2.0 * e2 * v, 4.0 * e2 * e2 * v * r * r)
        }
        RbfKind::Multiquadric { epsilon } => {
            let e2 = epsilon * epsilon;
            let v = (1.0 + e2 * r * r).sqrt();
            (v, e2 / v, -e2 * e2 * r * r / (v * v * v))
        }
        RbfKind::InverseMultiquadric { epsilon } => {
            let e2 = epsilon * epsilon;
            let v = 1.0 / (1.0 + e2 * r * r).sqrt();
            let v3 = v * v * v;
            (v, -e2 * v3, 3.0 * e2 * e2 * v3 * v * v * r * r)
        }
        RbfKind::InverseQuadratic { epsilon } => {
            let e2 = epsilon * epsilon;
            let v = 1.0 / (1.0 + e2 * r * r);
            (v, -2.0 * e2 * v * v, 8.0 * e2 * e2 * v * v * v * r * r)
        }
        RbfKind::PolyharmonicSpline { degree } => {
            let q = degree as i32;
            if r == 0.0 {
                if q < 2 {
                    return Err(Error::SingularKernel(format!(
                        "derivatives of r^{q} are undefined at r = 0"
                    )));
                }
                // r^q is C^2 at the origin for q >= 3: value, gradient and
                // Hessian all vanish there.
                (0.0, 0.0, 0.0)
            } else {
                let rq2 = r.powi(q - 2);
                (rq2 * r * r, q as f64 * rq2, (q * (q - 2)) as f64 * rq2)
            }
        }
    })
}

/// Value, gradient and Hessian of `phi(|x - center|)` at `x`.
pub fn rbf_derivatives(
    kind: RbfKind,
    center: &[f64],
    x: &[f64],
) -> Result<(f64, [f64; MAX_DIM], [[f64; MAX_DIM]; MAX_DIM])> {
    let dim = x.len();
    let mut d = [0.0; MAX_DIM];
    let mut r2 = 0.0;
    for i in 0..dim {
        d[i] = x[i] - center[i];
        r2 += d[i] * d[i];
    }
    let r = r2.sqrt();
    let (v, g1, g2r2) = radial_factors(kind, r)?;
    let mut grad = [0.0; MAX_DIM];
    let mut hess = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..dim {
        grad[i] = g1 * d[i];
        for j in 0..dim {
            let dir = if r2 > 0.0 { d[i] * d[j] / r2 } else { 0.0 };
            hess[i][j] = g2r2 * dir + if i == j { g1 } else { 0.0 };
        }
    }
    Ok((v, grad, hess))
}

/// `(L phi(|. - center|))(x)` with the operator coefficients frozen at `x`.
pub fn apply_operator_to_rbf(
    kind: RbfKind,
    coeffs: &OperatorCoeffs,
    center: &[f64],
    x: &[f64],
) -> Result<f64> {
    if coeffs.is_zeroth_order() {
        let r = x
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        return Ok(coeffs.c * phi(kind, r));
    }
    let (v, g, h) = rbf_derivatives(kind, center, x)?;
    Ok(coeffs.apply(v, &g, &h))
}
