// Householder QR for small dense least-squares problems.

use alloc::vec;
use alloc::vec::Vec;

const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RankDeficient {
    pub column: usize,
}

/// Column-major factorisation of a `rows × cols` matrix, `rows >= cols`.
#[derive(Debug, Clone)]
pub(crate) struct Qr {
    rows: usize,
    cols: usize,
    // Householder vectors below the diagonal, R above it.
    a: Vec<f64>,
    betas: Vec<f64>,
    rdiag: Vec<f64>,
}

impl Qr {
    pub(crate) fn new(mut a: Vec<f64>, rows: usize, cols: usize) -> Result<Self, RankDeficient> {
        debug_assert_eq!(a.len(), rows * cols);
        if rows < cols {
            return Err(RankDeficient { column: rows });
        }
        let mut betas = vec![0.0; cols];
        let mut rdiag = vec![0.0; cols];
        let mut scale = 0.0f64;
        for k in 0..cols {
            let col = k * rows;
            let norm = libm::sqrt(a[col + k..col + rows].iter().map(|x| x * x).sum::<f64>());
            if norm == 0.0 {
                return Err(RankDeficient { column: k });
            }
            let alpha = if a[col + k] > 0.0 { -norm } else { norm };
            a[col + k] -= alpha;
            let vtv: f64 = a[col + k..col + rows].iter().map(|x| x * x).sum();
            let beta = 2.0 / vtv;
            for j in (k + 1)..cols {
                let cj = j * rows;
                let dot: f64 = (k..rows).map(|i| a[col + i] * a[cj + i]).sum();
                let f = beta * dot;
                for i in k..rows {
                    a[cj + i] -= f * a[col + i];
                }
            }
            betas[k] = beta;
            rdiag[k] = alpha;
            scale = scale.max(alpha.abs());
        }
        if let Some(column) = rdiag.iter().position(|d| d.abs() <= RANK_TOL * scale) {
            return Err(RankDeficient { column });
        }
        Ok(Self { rows, cols, a, betas, rdiag })
    }

    /// Least-squares solution of `A x ≈ b`.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (rows, cols) = (self.rows, self.cols);
        let mut y = b.to_vec();
        for k in 0..cols {
            let col = k * rows;
            let dot: f64 = (k..rows).map(|i| self.a[col + i] * y[i]).sum();
            let f = self.betas[k] * dot;
            for i in k..rows {
                y[i] -= f * self.a[col + i];
            }
        }
        let mut x = vec![0.0; cols];
        for k in (0..cols).rev() {
            let mut s = y[k];
            for j in (k + 1)..cols {
                s -= self.a[j * rows + k] * x[j];
            }
            x[k] = s / self.rdiag[k];
        }
        x
    }
}
