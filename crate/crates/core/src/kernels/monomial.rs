use super::operator::{OperatorCoeffs, MAX_DIM};

/// All monomials of total degree at most `degree` in `dim` variables,
/// ordered by total degree and then lexicographically (descending powers of
/// the first variable).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis {
    dim: usize,
    degree: u32,
    exponents: Vec<[u32; MAX_DIM]>,
}

impl MonomialBasis {
    pub fn new(dim: usize, degree: u32) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM);
        assert!(degree < 16, "monomial degree {degree} too large");
        let mut exponents = Vec::new();
        for total in 0..=degree {
            let mut current = [0u32; MAX_DIM];
            push_compositions(dim, 0, total, &mut current, &mut exponents);
        }
        Self {
            dim,
            degree,
            exponents,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn exponents(&self) -> &[[u32; MAX_DIM]] {
        &self.exponents
    }

    /// Values of every basis monomial at `x`, written into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let mut powers = [[1.0; 16]; MAX_DIM];
        for axis in 0..self.dim {
            for p in 1..=self.degree as usize {
                powers[axis][p] = powers[axis][p - 1] * x[axis];
            }
        }
        for (slot, e) in out.iter_mut().zip(&self.exponents) {
            *slot = (0..self.dim).map(|a| powers[a][e[a] as usize]).product();
        }
    }
}

fn push_compositions(
    dim: usize,
    axis: usize,
    remaining: u32,
    current: &mut [u32; MAX_DIM],
    out: &mut Vec<[u32; MAX_DIM]>,
) {
    if axis + 1 == dim {
        current[axis] = remaining;
        out.push(*current);
        current[axis] = 0;
        return;
    }
    for p in (0..=remaining).rev() {
        current[axis] = p;
        push_compositions(dim, axis + 1, remaining - p, current, out);
    }
    current[axis] = 0;
}

fn ipow(x: f64, p: i64) -> f64 {
    if p < 0 {
        0.0
    } else {
        x.powi(p as i32)
    }
}

/// `(L x^e)(x)` evaluated exactly with the coefficients frozen at `x`.
pub fn apply_operator_to_monomial(exponent: &[u32], coeffs: &OperatorCoeffs, x: &[f64]) -> f64 {
    let dim = coeffs.dim;
    let e: Vec<i64> = exponent.iter().take(dim).map(|&p| p as i64).collect();
    let mono = |shift: &[(usize, i64)]| -> f64 {
        // product over axes of x_a^(e_a - k_a) times the falling factorials
        let mut factor = 1.0;
        let mut k = [0i64; MAX_DIM];
        for &(axis, n) in shift {
            k[axis] += n;
        }
        for a in 0..dim {
            let mut ff = 1.0;
            for t in 0..k[a] {
                ff *= (e[a] - t) as f64;
            }
            factor *= ff * ipow(x[a], e[a] - k[a]);
        }
        factor
    };
    let value = mono(&[]);
    let mut grad = [0.0; MAX_DIM];
    let mut hess = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..dim {
        grad[i] = mono(&[(i, 1)]);
        for j in i..dim {
            hess[i][j] = mono(&[(i, 1), (j, 1)]);
            hess[j][i] = hess[i][j];
        }
    }
    coeffs.apply(value, &grad, &hess)
}
