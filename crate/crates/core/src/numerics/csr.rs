use std::io::Write;

use crate::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays, checking the structural
    /// invariants.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != n_rows + 1 || offsets[0] != 0 {
            return Err(Error::DimensionMismatch("bad row offsets".into()));
        }
        if offsets.windows(2).any(|w| w[0] > w[1]) || offsets[n_rows] != indices.len() {
            return Err(Error::DimensionMismatch("row offsets are not monotone".into()));
        }
        if indices.len() != values.len() {
            return Err(Error::DimensionMismatch("indices and values differ in length".into()));
        }
        for row in 0..n_rows {
            let cols = &indices[offsets[row]..offsets[row + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n_cols) {
                return Err(Error::DimensionMismatch(format!(
                    "row {row}: column indices must be strictly increasing and in range"
                )));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            offsets,
            indices,
            values,
        })
    }

    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(i, j, v) in triplets {
            if i >= n_rows || j >= n_cols {
                return Err(Error::DimensionMismatch(format!(
                    "entry ({i}, {j}) outside a {n_rows}x{n_cols} matrix"
                )));
            }
            rows[i].push((j, v));
        }
        Self::from_rows(n_cols, rows)
    }

    /// Assembles from per-row entry lists; each row is sorted and its
    /// duplicate columns summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n_rows = rows.len();
        let mut offsets = Vec::with_capacity(n_rows + 1);
        offsets.push(0);
        let nnz_hint = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz_hint);
        let mut values = Vec::with_capacity(nnz_hint);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|e| e.0);
            let start = indices.len();
            for (j, v) in row {
                if j >= n_cols {
                    return Err(Error::DimensionMismatch(format!(
                        "entry ({i}, {j}) outside a matrix with {n_cols} columns"
                    )));
                }
                if indices.len() > start && *indices.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            offsets,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            offsets: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.offsets[self.n_rows]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.offsets[i]..self.offsets[i + 1];
        (&self.indices[range.clone()], &self.values[range])
    }

    /// Stored value at `(i, j)`, or zero if the entry is not in the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.offsets[i]..self.offsets[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| {
            (self.offsets[i]..self.offsets[i + 1]).map(move |k| (i, self.indices[k], self.values[k]))
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, j, v) in self.triplets() {
            out[i][j] = v;
        }
        out
    }

    /// Largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }

    /// `P A P^T` for the permutation with `perm[new] = old`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        assert_eq!(self.n_rows, self.n_cols);
        assert_eq!(perm.len(), self.n_rows);
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let rows = perm
            .iter()
            .map(|&old| {
                let (cols, vals) = self.row(old);
                cols.iter().zip(vals).map(|(&j, &v)| (inverse[j], v)).collect()
            })
            .collect();
        Self::from_rows(self.n_cols, rows).expect("permutation keeps indices in range")
    }

    /// Writes one `row col value` line per stored entry (0-based indices).
    pub fn write_coordinate_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (i, j, v) in self.triplets() {
            writeln!(out, "{i} {j} {v:e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (1, 1, -1.0)])
            .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![6.5, -2.0]);
    }

    #[test]
    fn invariants_enforced() {
        assert!(CsrMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(1, 3, vec![0, 2], vec![0, 2], vec![1.0, 1.0]).is_ok());
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn coordinate_export() {
        let m = CsrMatrix::from_triplets(2, 2, &[(1, 0, 2.5), (0, 1, -1.0)]).unwrap();
        let mut buf = Vec::new();
        m.write_coordinate_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed: Vec<(usize, usize, f64)> = text
            .lines()
            .map(|l| {
                let f: Vec<&str> = l.split_whitespace().collect();
                (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
            })
            .collect();
        assert_eq!(parsed, vec![(0, 1, -1.0), (1, 0, 2.5)]);
    }

    proptest! {
        #[test]
        fn triplet_round_trip(entries in prop::collection::vec((0usize..6, 0usize..5, -10i32..10), 0..40)) {
            let triplets: Vec<_> = entries.iter().map(|&(i, j, v)| (i, j, v as f64)).collect();
            let m = CsrMatrix::from_triplets(6, 5, &triplets).unwrap();
            let mut expected: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for &(i, j, v) in &triplets {
                *expected.entry((i, j)).or_default() += v;
            }
            let got: BTreeMap<(usize, usize), f64> = m.triplets().map(|(i, j, v)| ((i, j), v)).collect();
            prop_assert_eq!(got, expected);
        }
    }
}
