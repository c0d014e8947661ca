//! Dense Gaussian elimination with partial pivoting.
//!
//! The taboo-probability and hitting-mean systems are small (order `u - 2`)
//! and dense, so a straightforward LU solve with one step of iterative
//! refinement is all that is needed.

use crate::error::{Error, Result};

const PIVOT_MIN: f64 = 1e-13;

/// A square system `A x = b`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSystem {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl DenseSystem {
    /// An all-zero system of order `n`.
    pub fn zeros(n: usize) -> Self {
        DenseSystem {
            n,
            a: vec![0.0; n * n],
            b: vec![0.0; n],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        let n = b.len();
        if n == 0 {
            return Err(Error::invalid("rhs", "system must have order >= 1"));
        }
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix", format!("must be {n}x{n}")));
        }
        Ok(DenseSystem {
            n,
            a: rows.into_iter().flatten().collect(),
            b,
        })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn a_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.a[i * self.n + j]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn rhs_mut(&mut self) -> &mut [f64] {
        &mut self.b
    }

    /// `‖A x − b‖∞`
    pub fn residual(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let row = &self.a[i * self.n..(i + 1) * self.n];
                let ax: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
                (ax - self.b[i]).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Solves the system, refining once if the residual exceeds
    /// `1e-9 (1 + ‖b‖∞)`.
    pub fn solve(&self, op: &'static str) -> Result<Vec<f64>> {
        let lu = Lu::factor(op, self)?;
        Ok(self.solve_factored(&lu, &self.b))
    }

    /// Solves `A x = b` for each right-hand side in `rhs`, factoring `A`
    /// once. The stored right-hand side is ignored.
    pub fn solve_many(&self, op: &'static str, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if let Some(bad) = rhs.iter().find(|b| b.len() != self.n) {
            return Err(Error::invalid(
                "rhs",
                format!("length {} != order {}", bad.len(), self.n),
            ));
        }
        let lu = Lu::factor(op, self)?;
        Ok(rhs.iter().map(|b| self.solve_factored(&lu, b)).collect())
    }

    fn solve_factored(&self, lu: &Lu, b: &[f64]) -> Vec<f64> {
        let mut x = lu.solve(b);
        let residual = |x: &[f64]| -> Vec<f64> {
            (0..self.n)
                .map(|i| {
                    let row = &self.a[i * self.n..(i + 1) * self.n];
                    b[i] - row.iter().zip(x).map(|(a, x)| a * x).sum::<f64>()
                })
                .collect()
        };
        let tol = 1e-9 * (1.0 + b.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        let r = residual(&x);
        if r.iter().fold(0.0_f64, |m, v| m.max(v.abs())) > tol {
            let dx = lu.solve(&r);
            x.iter_mut().zip(dx).for_each(|(x, d)| *x += d);
        }
        x
    }
}

struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(op: &'static str, sys: &DenseSystem) -> Result<Lu> {
        let n = sys.n;
        let mut lu = sys.a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, mag) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if !(mag > PIVOT_MIN) {
                return Err(Error::Singular {
                    op,
                    pivot: k,
                    magnitude: mag,
                });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = lu[k * n + k];
            for i in k + 1..n {
                let f = lu[i * n + k] / pivot;
                lu[i * n + k] = f;
                if f != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= f * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * y[j]).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * y[j]).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        y
    }
}
