use serde::{Deserialize, Serialize};

use super::csr::CsrMatrix;
use crate::{Error, Result};

/// Approximate inverse applied as `z = M^{-1} r`.
pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

/// `M = I`
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmresConfig {
    /// Target for `||b - A x|| / ||b||`.
    pub tolerance: f64,
    pub restart: usize,
    pub max_iterations: usize,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            restart: 50,
            max_iterations: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Relative true residual `||b - A x|| / ||b||` of the returned iterate.
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
    a.matvec(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    norm(r)
}

/// Restarted GMRES with right preconditioning, `A M^{-1} y = b`, `x = M^{-1} y`.
///
/// Convergence is declared on the true residual, recomputed at the end of
/// every restart cycle.
pub fn gmres<P: Preconditioner + ?Sized>(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &P,
    cfg: &GmresConfig,
) -> Result<GmresOutcome> {
    let n = a.n_rows();
    if a.n_cols() != n || b.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "GMRES on a {}x{} matrix with rhs {} and guess {}",
            a.n_rows(),
            a.n_cols(),
            b.len(),
            x0.len()
        )));
    }
    if !(cfg.tolerance > 0.0) || cfg.restart == 0 {
        return Err(Error::InvalidParameters("GMRES tolerance and restart must be positive".into()));
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
        });
    }
    let m = cfg.restart.min(n.max(1));
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    let mut beta = residual(a, b, &x, &mut r);
    let mut rel = beta / bnorm;
    let mut iterations = 0;

    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut w = vec![0.0; n];

    while rel > cfg.tolerance {
        if iterations >= cfg.max_iterations {
            return Err(Error::NotConverged {
                iterations,
                residual: rel,
                best: x,
            });
        }
        v.clear();
        z.clear();
        v.push(r.iter().map(|ri| ri / beta).collect());
        g.iter_mut().for_each(|gi| *gi = 0.0);
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < cfg.max_iterations {
            let mut zk = vec![0.0; n];
            precond.apply(&v[k], &mut zk);
            a.matvec(&zk, &mut w);
            z.push(zk);
            iterations += 1;
            // modified Gram-Schmidt
            for i in 0..=k {
                let hik = dot(&w, &v[i]);
                h[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&v[i]) {
                    *wj -= hik * vj;
                }
            }
            let hnext = norm(&w);
            h[k + 1][k] = hnext;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + hnext * hnext).sqrt();
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = hnext / denom;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * hnext;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            if hnext == 0.0 || g[k].abs() / bnorm <= cfg.tolerance {
                break;
            }
            v.push(w.iter().map(|wi| wi / hnext).collect());
        }
        // back substitution for the k x k triangular system
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] != 0.0 { (g[i] - s) / h[i][i] } else { 0.0 };
        }
        for (yi, zi) in y.iter().zip(&z) {
            for (xj, zj) in x.iter_mut().zip(zi) {
                *xj += yi * zj;
            }
        }
        beta = residual(a, b, &x, &mut r);
        let new_rel = beta / bnorm;
        if new_rel >= rel && k < m && iterations < cfg.max_iterations {
            // breakdown without progress
            return Err(Error::NotConverged {
                iterations,
                residual: new_rel,
                best: x,
            });
        }
        rel = new_rel;
    }
    Ok(GmresOutcome {
        x,
        iterations,
        residual: rel,
    })
}
