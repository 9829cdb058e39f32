//! Symmetric pentadiagonal matrices and their `L D L^T` factorisation.

/// Symmetric matrix with bandwidth 2, stored by diagonals.
#[derive(Clone, Debug)]
pub struct Pentadiagonal {
    pub diag: Vec<f64>,
    /// `(k, k+1)` entries, length `n - 1`.
    pub off1: Vec<f64>,
    /// `(k, k+2)` entries, length `n - 2`.
    pub off2: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
    pub value: f64,
}

impl Pentadiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off1: vec![0.0; n.saturating_sub(1)],
            off2: vec![0.0; n.saturating_sub(2)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for k in 0..n {
            let mut s = self.diag[k] * x[k];
            if k + 1 < n {
                s += self.off1[k] * x[k + 1];
            }
            if k >= 1 {
                s += self.off1[k - 1] * x[k - 1];
            }
            if k + 2 < n {
                s += self.off2[k] * x[k + 2];
            }
            if k >= 2 {
                s += self.off2[k - 2] * x[k - 2];
            }
            y[k] = s;
        }
        y
    }

    /// Solves `A x = b` by banded `L D L^T`. Fails on a non-positive pivot.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, NotPositiveDefinite> {
        let n = self.dim();
        // L has unit diagonal and two sub-diagonals l1, l2.
        let mut d = vec![0.0; n];
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        for k in 0..n {
            let mut dk = self.diag[k];
            if k >= 1 {
                dk -= l1[k] * l1[k] * d[k - 1];
            }
            if k >= 2 {
                dk -= l2[k] * l2[k] * d[k - 2];
            }
            if !(dk > 0.0) || !dk.is_finite() {
                return Err(NotPositiveDefinite {
                    pivot: k,
                    value: dk,
                });
            }
            d[k] = dk;
            if k + 1 < n {
                // A[k+1][k] = l1[k+1] d[k] + l2[k+1] d[k-1] l1[k]
                let mut a = self.off1[k];
                if k >= 1 {
                    a -= l2[k + 1] * d[k - 1] * l1[k];
                }
                l1[k + 1] = a / dk;
            }
            if k + 2 < n {
                l2[k + 2] = self.off2[k] / dk;
            }
        }
        // Forward substitution.
        let mut y = b.to_vec();
        for k in 0..n {
            if k >= 1 {
                y[k] -= l1[k] * y[k - 1];
            }
            if k >= 2 {
                y[k] -= l2[k] * y[k - 2];
            }
        }
        for k in 0..n {
            y[k] /= d[k];
        }
        for k in (0..n).rev() {
            if k + 1 < n {
                y[k] -= l1[k + 1] * y[k + 1];
            }
            if k + 2 < n {
                y[k] -= l2[k + 2] * y[k + 2];
            }
        }
        Ok(y)
    }
}
