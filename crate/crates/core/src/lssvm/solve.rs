//! Linear systems with `H = K + I / C`, `K` a Gaussian kernel matrix.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt;
use faer::{Mat, Par};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    /// Dense Cholesky up to `dense_limit` points, PCG beyond.
    Auto,
    Dense,
    Pcg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub dense_limit: usize,
    pub pcg_tol: f64,
    pub pcg_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { kind: SolverKind::Auto, dense_limit: 20_000, pcg_tol: 1e-11, pcg_max_iter: 20_000 }
    }
}

/// Outcome of a solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub dense: bool,
    /// Diagonal loading added after a failed factorization (0 if none).
    pub ridge: f64,
    pub iterations: usize,
    /// Relative residual of the full KKT system, against the unloaded matrix.
    pub residual: f64,
}

pub fn gaussian(x: &[f64], y: &[f64], inv_two_gamma2: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 * inv_two_gamma2).exp()
}

/// `H = K + diag I` for a point set, either stored densely and factored or
/// applied on the fly.
pub(crate) struct KernelSystem<'a> {
    xs: &'a [Vec<f64>],
    inv_two_gamma2: f64,
    diag: f64,
    ridge: f64,
    /// Cholesky factor in the lower triangle.
    dense: Option<Mat<f64>>,
    cfg: SolverConfig,
}

impl<'a> KernelSystem<'a> {
    pub fn new(xs: &'a [Vec<f64>], gamma: f64, c: f64, cfg: &SolverConfig) -> Result<Self> {
        let mut sys = Self {
            xs,
            inv_two_gamma2: 1.0 / (2.0 * gamma * gamma),
            diag: 1.0 + 1.0 / c,
            ridge: 0.0,
            dense: None,
            cfg: cfg.clone(),
        };
        let dense = match cfg.kind {
            SolverKind::Dense => true,
            SolverKind::Pcg => false,
            SolverKind::Auto => xs.len() <= cfg.dense_limit,
        };
        if dense {
            sys.factor()?;
        }
        Ok(sys)
    }

    pub fn n(&self) -> usize {
        self.xs.len()
    }

    pub fn is_dense(&self) -> bool {
        self.dense.is_some()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    fn build(&self, ridge: f64) -> Mat<f64> {
        let n = self.n();
        let mut m = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            m[(j, j)] = self.diag + ridge;
            for i in 0..j {
                let k = gaussian(&self.xs[i], &self.xs[j], self.inv_two_gamma2);
                m[(i, j)] = k;
                m[(j, i)] = k;
            }
        }
        m
    }

    fn try_factor(m: &mut Mat<f64>) -> bool {
        let n = m.nrows();
        let mut buf = MemBuffer::new(llt::factor::cholesky_in_place_scratch::<f64>(n, Par::Seq, Default::default()));
        llt::factor::cholesky_in_place(m.as_mut(), Default::default(), Par::Seq, MemStack::new(&mut buf), Default::default())
            .is_ok()
    }

    fn factor(&mut self) -> Result<()> {
        let mut m = self.build(0.0);
        if !Self::try_factor(&mut m) {
            // Rebuild: the failed factorization overwrote the lower triangle.
            let ridge = 1e-10 * self.diag;
            log::warn!("kernel system not positive definite, adding {ridge:e} to the diagonal");
            m = self.build(ridge);
            if !Self::try_factor(&mut m) {
                return Err(Error::SingularSystem(format!("Cholesky failed with diagonal loading {ridge:e}")));
            }
            self.ridge = ridge;
        }
        self.dense = Some(m);
        Ok(())
    }

    /// `H v` with the unloaded matrix, kernel entries recomputed.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n())
            .into_par_iter()
            .map(|i| {
                let xi = &self.xs[i];
                let mut s = self.diag * v[i];
                for (j, xj) in self.xs.iter().enumerate() {
                    if j != i {
                        s += gaussian(xi, xj, self.inv_two_gamma2) * v[j];
                    }
                }
                s
            })
            .collect()
    }

    fn dense_solve(&self, m: &Mat<f64>, rhs: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut x = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        llt::solve::solve_in_place(m.as_ref(), x.as_mut(), Par::Seq, MemStack::new(&mut MemBuffer::new(
            llt::solve::solve_in_place_scratch::<f64>(n, 1, Par::Seq),
        )));
        (0..n).map(|i| x[(i, 0)]).collect()
    }

    fn pcg(&self, rhs: &[f64]) -> Result<(Vec<f64>, usize)> {
        // Jacobi preconditioning: the diagonal of H is constant.
        let n = self.n();
        let inv_d = 1.0 / self.diag;
        let norm_b = norm(rhs);
        let mut x = vec![0.0; n];
        if norm_b == 0.0 {
            return Ok((x, 0));
        }
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().map(|v| v * inv_d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for it in 1..=self.cfg.pcg_max_iter {
            let hp = self.apply(&p);
            let alpha = rz / dot(&p, &hp);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * hp[i];
            }
            if norm(&r) <= self.cfg.pcg_tol * norm_b {
                return Ok((x, it));
            }
            z.iter_mut().zip(&r).for_each(|(z, r)| *z = r * inv_d);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        Err(Error::NonConvergence { residual: norm(&r) / norm_b })
    }

    /// Solves `H x = rhs`. Dense solves get one step of iterative refinement.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, usize)> {
        if rhs.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: rhs.len() });
        }
        match &self.dense {
            Some(m) => {
                let mut x = self.dense_solve(m, rhs);
                let hx = self.apply(&x);
                let r: Vec<f64> = rhs.iter().zip(&hx).map(|(b, h)| b - h).collect();
                let dx = self.dense_solve(m, &r);
                x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
                Ok((x, 1))
            }
            None => self.pcg(rhs),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
