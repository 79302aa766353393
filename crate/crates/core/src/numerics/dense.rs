use crate::{Error, Result};

/// Default relative pivot threshold of [`DenseMatrix::lu`].
pub const SINGULAR_PIVOT: f64 = 1e-14;

/// Row-major dense matrix for the small local systems.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        Self {
            n_rows,
            n_cols,
            data,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.n_cols, other.n_rows);
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, s) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * s;
                }
            }
        }
        out
    }

    /// LU factorization with partial pivoting.
    ///
    /// Fails when a pivot falls below `1e-14 * ||A||_inf`.
    pub fn lu(self) -> Result<LuFactors> {
        self.lu_with_tolerance(SINGULAR_PIVOT)
    }

    /// LU factorization failing when a pivot is at most `rel * ||A||_inf`.
    pub fn lu_with_tolerance(mut self, rel: f64) -> Result<LuFactors> {
        assert_eq!(self.n_rows, self.n_cols, "LU needs a square matrix");
        let n = self.n_rows;
        let norm = self.norm_inf();
        let threshold = rel * norm;
        let mut min_pivot = f64::INFINITY;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, self.data[i * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pmax > threshold) {
                return Err(Error::SingularSystem {
                    context: "dense LU".into(),
                    row: k,
                    pivot: pmax,
                });
            }
            min_pivot = min_pivot.min(pmax);
            if p != k {
                for j in 0..n {
                    self.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = self.data[k * n + k];
            let (upper, lower) = self.data.split_at_mut((k + 1) * n);
            let pivot_row = &upper[k * n + k + 1..k * n + n];
            for row in lower.chunks_exact_mut(n) {
                let f = row[k] / pivot;
                row[k] = f;
                if f != 0.0 {
                    for (x, &u) in row[k + 1..].iter_mut().zip(pivot_row) {
                        *x -= f * u;
                    }
                }
            }
        }
        Ok(LuFactors {
            n,
            lu: self.data,
            perm,
            pivot_ratio: if norm > 0.0 { min_pivot / norm } else { 0.0 },
        })
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n_cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n_cols + j]
    }
}

/// `P A = L U` with unit-diagonal `L` stored below the diagonal.
#[derive(Clone, Debug)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    pivot_ratio: f64,
}

impl LuFactors {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Smallest pivot magnitude relative to `||A||_inf`.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, v)| l * v).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, v)| u * v).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }

    /// Solves `A X = B` column by column of `B`, row-major in and out.
    pub fn solve_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        let n = self.n;
        let k = b.n_cols();
        assert_eq!(b.n_rows(), n);
        let mut x = DenseMatrix::zeros(n, k);
        for (dst, &src) in self.perm.iter().enumerate() {
            x.row_mut(dst).copy_from_slice(b.row(src));
        }
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[i * n + j];
                if l == 0.0 {
                    continue;
                }
                let (head, tail) = x.data.split_at_mut(i * k);
                let src = &head[j * k..(j + 1) * k];
                for (t, s) in tail[..k].iter_mut().zip(src) {
                    *t -= l * s;
                }
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[i * n + j];
                if u == 0.0 {
                    continue;
                }
                let (head, tail) = x.data.split_at_mut(j * k);
                let dst = &mut head[i * k..(i + 1) * k];
                for (d, s) in dst.iter_mut().zip(&tail[..k]) {
                    *d -= u * s;
                }
            }
            let inv = 1.0 / self.lu[i * n + i];
            for v in x.row_mut(i) {
                *v *= inv;
            }
        }
        x
    }
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn dense_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(a.clone().lu()?.solve_matrix(b))
}
