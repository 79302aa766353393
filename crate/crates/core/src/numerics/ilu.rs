use super::csr::CsrMatrix;
use super::gmres::Preconditioner;
use crate::{Error, Result};

/// Incomplete LU factorization with zero fill-in.
///
/// The unit lower factor lives strictly below the diagonal and the upper
/// factor on and above it, both inside the pattern of the input matrix.
#[derive(Clone, Debug)]
pub struct Ilu0Factors {
    n: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
    diag: Vec<usize>,
}

impl Ilu0Factors {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch("ILU(0) needs a square matrix".into()));
        }
        let n = a.n_rows();
        let offsets = a.offsets().to_vec();
        let indices = a.indices().to_vec();
        let mut values = a.values().to_vec();
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            let cols = &indices[offsets[i]..offsets[i + 1]];
            match cols.binary_search(&i) {
                Ok(k) => diag.push(offsets[i] + k),
                Err(_) => return Err(Error::PreconditionerBreakdown { row: i }),
            }
        }
        // position lookup for the current row
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (offsets[i], offsets[i + 1]);
            for k in start..end {
                marker[indices[k]] = k;
            }
            for k in start..diag[i] {
                let col = indices[k];
                let pivot = values[diag[col]];
                if pivot == 0.0 {
                    return Err(Error::PreconditionerBreakdown { row: col });
                }
                let factor = values[k] / pivot;
                values[k] = factor;
                for kk in diag[col] + 1..offsets[col + 1] {
                    let target = marker[indices[kk]];
                    if target != usize::MAX {
                        values[target] -= factor * values[kk];
                    }
                }
            }
            for k in start..end {
                marker[indices[k]] = usize::MAX;
            }
            if values[diag[i]] == 0.0 || !values[diag[i]].is_finite() {
                return Err(Error::PreconditionerBreakdown { row: i });
            }
        }
        Ok(Self {
            n,
            offsets,
            indices,
            values,
            diag,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Unit lower triangular factor.
    pub fn lower(&self) -> CsrMatrix {
        let rows = (0..self.n)
            .map(|i| {
                let mut row: Vec<(usize, f64)> = (self.offsets[i]..self.diag[i])
                    .map(|k| (self.indices[k], self.values[k]))
                    .collect();
                row.push((i, 1.0));
                row
            })
            .collect();
        CsrMatrix::from_rows(self.n, rows).expect("valid factor")
    }

    /// Upper triangular factor including the diagonal.
    pub fn upper(&self) -> CsrMatrix {
        let rows = (0..self.n)
            .map(|i| {
                (self.diag[i]..self.offsets[i + 1])
                    .map(|k| (self.indices[k], self.values[k]))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(self.n, rows).expect("valid factor")
    }

    /// `z = (L U)^{-1} r`
    pub fn solve_into(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        for i in 0..self.n {
            let mut acc = z[i];
            for k in self.offsets[i]..self.diag[i] {
                acc -= self.values[k] * z[self.indices[k]];
            }
            z[i] = acc;
        }
        for i in (0..self.n).rev() {
            let mut acc = z[i];
            for k in self.diag[i] + 1..self.offsets[i + 1] {
                acc -= self.values[k] * z[self.indices[k]];
            }
            z[i] = acc / self.values[self.diag[i]];
        }
    }
}

impl Preconditioner for Ilu0Factors {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.solve_into(r, z);
    }
}
