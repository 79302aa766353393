use serde::{Deserialize, Serialize};

/// Largest spatial dimension handled by the fixed-size coefficient storage.
pub const MAX_DIM: usize = 3;

/// Pointwise coefficients of a second-order operator
///
/// `L u = sum_{i <= j} a[i][j] d2u/dx_i dx_j + sum_i b[i] du/dx_i + c u`.
///
/// Only the upper triangle of `a` is read; a cross term is counted once.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorCoeffs {
    pub dim: usize,
    pub a: [[f64; MAX_DIM]; MAX_DIM],
    pub b: [f64; MAX_DIM],
    pub c: f64,
}

impl OperatorCoeffs {
    pub fn zero(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM);
        Self {
            dim,
            a: [[0.0; MAX_DIM]; MAX_DIM],
            b: [0.0; MAX_DIM],
            c: 0.0,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            c: 1.0,
            ..Self::zero(dim)
        }
    }

    pub fn laplacian(dim: usize) -> Self {
        let mut op = Self::zero(dim);
        for i in 0..dim {
            op.a[i][i] = 1.0;
        }
        op
    }

    pub fn is_zeroth_order(&self) -> bool {
        (0..self.dim).all(|i| self.b[i] == 0.0 && (i..self.dim).all(|j| self.a[i][j] == 0.0))
    }

    /// Applies the operator to a function given its value, gradient and
    /// (symmetric) Hessian at a point.
    #[inline]
    pub fn apply(
        &self,
        value: f64,
        grad: &[f64; MAX_DIM],
        hess: &[[f64; MAX_DIM]; MAX_DIM],
    ) -> f64 {
        let mut acc = self.c * value;
        for i in 0..self.dim {
            acc += self.b[i] * grad[i];
            for j in i..self.dim {
                acc += self.a[i][j] * hess[i][j];
            }
        }
        acc
    }

    /// Rewrites the operator for the coordinates `y = (x - x0) / scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        let mut out = *self;
        for i in 0..self.dim {
            out.b[i] /= scale;
            for j in i..self.dim {
                out.a[i][j] /= scale * scale;
            }
        }
        out
    }

    /// The symmetric diffusion matrix implied by the upper-triangle storage
    /// (cross coefficients split evenly between the two entries).
    pub fn diffusion_matrix(&self) -> [[f64; MAX_DIM]; MAX_DIM] {
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..self.dim {
            m[i][i] = self.a[i][i];
            for j in i + 1..self.dim {
                m[i][j] = 0.5 * self.a[i][j];
                m[j][i] = 0.5 * self.a[i][j];
            }
        }
        m
    }
}
