//! Cubic B-spline basis with clamped, equally spaced knots, and
//! least-squares coefficient fits of discretized curves.

use alloc::vec;
use alloc::vec::Vec;

use super::ExpansionError;
use crate::linalg::Qr;

const DEGREE: usize = 3;
/// Cubic B-splines have order 4; fewer basis functions cannot form a basis.
pub const MIN_BASIS: usize = DEGREE + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    knots: Vec<f64>,
    n_basis: usize,
}

impl BSplineBasis {
    /// `n_basis` cubic B-splines on `[lo, hi]` with `n_basis - 4` equally
    /// spaced interior knots and four-fold boundary knots.
    pub fn uniform(lo: f64, hi: f64, n_basis: usize) -> Result<Self, ExpansionError> {
        if n_basis < MIN_BASIS {
            return Err(ExpansionError::TooFewBasis(n_basis));
        }
        if !(lo < hi) {
            return Err(ExpansionError::EmptyDomain);
        }
        let segments = n_basis - DEGREE;
        let mut knots = Vec::with_capacity(n_basis + DEGREE + 1);
        knots.extend_from_slice(&[lo; DEGREE]);
        for i in 0..=segments {
            knots.push(if i == segments {
                hi
            } else {
                lo + (hi - lo) * i as f64 / segments as f64
            });
        }
        knots.extend_from_slice(&[hi; DEGREE]);
        Ok(Self { knots, n_basis })
    }

    pub fn from_knots(knots: Vec<f64>) -> Result<Self, ExpansionError> {
        if knots.len() < 2 * (DEGREE + 1) || knots.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(ExpansionError::BadKnots);
        }
        let n_basis = knots.len() - DEGREE - 1;
        Ok(Self { knots, n_basis })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    fn span(&self, t: f64) -> usize {
        let last = self.n_basis - 1;
        if t >= self.knots[last + 1] {
            return last;
        }
        let mut span = DEGREE;
        while span < last && self.knots[span + 1] <= t {
            span += 1;
        }
        span
    }

    /// Values of all basis functions at `t` (clamped to the domain).
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        let lo = self.knots[DEGREE];
        let hi = self.knots[self.n_basis];
        let t = t.clamp(lo, hi);
        let span = self.span(t);
        let mut local = [0.0; DEGREE + 1];
        let mut left = [0.0; DEGREE + 1];
        let mut right = [0.0; DEGREE + 1];
        local[0] = 1.0;
        for j in 1..=DEGREE {
            left[j] = t - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = local[r] / (right[r + 1] + left[j - r]);
                local[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            local[j] = saved;
        }
        let mut out = vec![0.0; self.n_basis];
        out[span - DEGREE..=span].copy_from_slice(&local);
        out
    }

    pub fn reconstruct(&self, coefficients: &[f64], t: f64) -> f64 {
        self.evaluate(t).iter().zip(coefficients).map(|(b, c)| b * c).sum()
    }
}

/// Least-squares projector onto a B-spline basis for one fixed grid.
#[derive(Debug, Clone)]
pub struct BSplineFitter {
    basis: BSplineBasis,
    grid_len: usize,
    qr: Qr,
}

impl BSplineFitter {
    /// Basis with knots spanning `[grid[0], grid[last]]`.
    pub fn new(grid: &[f64], n_basis: usize) -> Result<Self, ExpansionError> {
        if grid.len() < 2 {
            return Err(ExpansionError::RankDeficient { grid_len: grid.len(), n_basis });
        }
        let basis = BSplineBasis::uniform(grid[0], grid[grid.len() - 1], n_basis)?;
        Self::with_basis(grid, basis)
    }

    pub fn with_basis(grid: &[f64], basis: BSplineBasis) -> Result<Self, ExpansionError> {
        let (rows, cols) = (grid.len(), basis.n_basis());
        let rank_err = ExpansionError::RankDeficient { grid_len: rows, n_basis: cols };
        if rows < cols || grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(rank_err);
        }
        let mut design = vec![0.0; rows * cols];
        for (r, &t) in grid.iter().enumerate() {
            for (c, v) in basis.evaluate(t).into_iter().enumerate() {
                design[c * rows + r] = v;
            }
        }
        let qr = Qr::new(design, rows, cols).map_err(|_| rank_err)?;
        Ok(Self { basis, grid_len: rows, qr })
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn coefficients(&self, curve: &[f64]) -> Result<Vec<f64>, ExpansionError> {
        if curve.len() != self.grid_len {
            return Err(ExpansionError::CurveLength { expected: self.grid_len, found: curve.len() });
        }
        Ok(self.qr.solve(curve))
    }
}
