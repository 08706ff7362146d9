//! Dense linear algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// A factored symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdSolver {
    matrix: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdSolver {
    pub fn new(matrix: DMatrix<f64>, what: &str) -> Result<Self> {
        Cholesky::new(matrix.clone())
            .map(|chol| SpdSolver { matrix, chol })
            .ok_or_else(|| Error::Internal(format!("{what} is not positive definite")))
    }

    /// Cholesky solve followed by one step of iterative refinement.
    ///
    /// The refinement keeps the rounding error of repeated field solves
    /// from accumulating in the conserved quadratic energies.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let mut x = self.chol.solve(rhs);
        let r = rhs - &self.matrix * &x;
        x += self.chol.solve(&r);
        x
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }
}

/// `x^T A x`.
pub fn quadratic_form(a: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(a * x))
}

/// `max_i |x_i|`, zero for an empty vector.
pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Fixed-point change measure: `max |new - old| / max(1, max |new|)`.
pub fn scaled_change(new: &[f64], old: &[f64]) -> f64 {
    let diff = new.iter().zip(old).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    diff / max_abs(new).max(1.0)
}

/// Largest absolute asymmetry `|A_ij - A_ji|`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// Factorizations of `A + s * B` cached by the exact bits of `s`.
///
/// The midpoint field solves reuse one operator per distinct time step,
/// and Strang splitting only ever needs two of them.
#[derive(Debug, Clone, Default)]
pub struct ShiftedCache {
    entries: Vec<(u64, SpdSolver)>,
}

impl ShiftedCache {
    pub fn get_or_factor(
        &mut self,
        base: &DMatrix<f64>,
        shift_matrix: &DMatrix<f64>,
        shift: f64,
        what: &str,
    ) -> Result<&SpdSolver> {
        let key = shift.to_bits();
        if let Some(pos) = self.entries.iter().position(|(k, _)| *k == key) {
            return Ok(&self.entries[pos].1);
        }
        let solver = SpdSolver::new(base + shift_matrix * shift, what)?;
        if self.entries.len() >= 4 {
            self.entries.remove(0);
        }
        self.entries.push((key, solver));
        Ok(&self.entries.last().unwrap().1)
    }
}
