//! Uniform periodic B-splines on one axis.
//!
//! The degree-`q` basis function `N^q_j` is the cardinal B-spline supported
//! on `[x_j, x_{j+q+1})`, with `x_j = j * dx` and indices taken modulo the
//! number of cells. Inside cell `c` exactly `q + 1` functions are active,
//! namely `j = c - q, ..., c`.

use crate::quadrature::GaussLegendre;

/// Largest spline degree supported by the fixed-size local buffers.
pub const MAX_DEGREE: usize = 7;

const SUPPORT: usize = MAX_DEGREE + 1;

/// Values (or derivatives) of the active basis functions at one point.
#[derive(Debug, Clone, Copy)]
pub struct LocalBasis {
    /// Index of the first active function before the periodic wrap.
    pub first: i64,
    /// Number of active functions (`degree + 1`).
    pub len: usize,
    pub values: [f64; SUPPORT],
}

impl LocalBasis {
    /// `(global index, value)` pairs, wrapped into `0..cells`.
    pub fn iter(&self, cells: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let m = cells as i64;
        (0..self.len).map(move |i| (((self.first + i as i64).rem_euclid(m)) as usize, self.values[i]))
    }

    /// `sum_j coeffs[j] * value_j`.
    pub fn dot(&self, cells: usize, coeffs: &[f64]) -> f64 {
        self.iter(cells).map(|(j, v)| coeffs[j] * v).sum()
    }
}

/// Values of the `degree + 1` cardinal B-splines active at local coordinate
/// `t in [0, 1]`, differentiated `order` times with respect to `t`.
///
/// Entry `i` belongs to the spline whose support starts `degree - i` cells
/// to the left of the current cell.
pub fn cardinal_values(degree: usize, order: usize, t: f64) -> [f64; SUPPORT] {
    debug_assert!(degree <= MAX_DEGREE);
    let mut v = [0.0; SUPPORT];
    if order > degree {
        return v;
    }
    let base = degree - order;
    v[0] = 1.0;
    for p in 1..=base {
        let pf = p as f64;
        for i in (0..=p).rev() {
            let left = if i >= 1 { v[i - 1] } else { 0.0 };
            let right = if i < p { v[i] } else { 0.0 };
            let fi = i as f64;
            v[i] = ((t + pf - fi) * left + (1.0 - t + fi) * right) / pf;
        }
    }
    // d/du B_p(u) = B_{p-1}(u) - B_{p-1}(u - 1)
    for len in base + 1..=degree {
        for i in (0..=len).rev() {
            let left = if i >= 1 { v[i - 1] } else { 0.0 };
            let right = if i < len { v[i] } else { 0.0 };
            v[i] = left - right;
        }
    }
    v
}

/// A uniform periodic grid on `[0, length)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicAxis {
    pub cells: usize,
    pub length: f64,
    pub dx: f64,
}

impl PeriodicAxis {
    pub fn new(cells: usize, length: f64) -> Self {
        PeriodicAxis {
            cells,
            length,
            dx: length / cells as f64,
        }
    }

    /// Cell index (not wrapped) and local coordinate of `x`.
    pub fn locate(&self, x: f64) -> (i64, f64) {
        let s = x / self.dx;
        let c = s.floor();
        let mut t = s - c;
        let mut c = c as i64;
        if t >= 1.0 {
            t -= 1.0;
            c += 1;
        }
        (c, t)
    }

    /// Map `x` into `[0, length)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let r = x.rem_euclid(self.length);
        if r >= self.length {
            0.0
        } else {
            r
        }
    }

    /// Active degree-`degree` basis functions at `x`, differentiated `order`
    /// times in `x`. Orders above the degree give zeros.
    pub fn basis(&self, degree: usize, order: usize, x: f64) -> LocalBasis {
        let (c, t) = self.locate(x);
        self.basis_in_cell(degree, order, c, t)
    }

    /// Same as [`PeriodicAxis::basis`] with the cell fixed by the caller.
    pub fn basis_in_cell(&self, degree: usize, order: usize, cell: i64, t: f64) -> LocalBasis {
        let mut values = cardinal_values(degree, order, t.clamp(0.0, 1.0));
        if order > 0 {
            let scale = self.dx.powi(-(order as i32));
            for v in values.iter_mut().take(degree + 1) {
                *v *= scale;
            }
        }
        LocalBasis {
            first: cell - degree as i64,
            len: degree + 1,
            values,
        }
    }

    /// Evaluate `sum_j coeffs[j] * d^order/dx^order N^degree_j(x)`.
    pub fn eval(&self, degree: usize, order: usize, coeffs: &[f64], x: f64) -> f64 {
        debug_assert_eq!(coeffs.len(), self.cells);
        self.basis(degree, order, x).dot(self.cells, coeffs)
    }

    /// Quadrature points of the segment average `(1/(b-a)) int_a^b g(x) dx`.
    ///
    /// The segment (unwrapped; either orientation) is split at every knot it
    /// crosses and `rule` is applied on each piece. `visit` receives the cell
    /// index, local coordinate and the normalized weight; the weights sum to
    /// one. A segment shorter than `degenerate` collapses to its midpoint.
    pub fn segment_average<F>(&self, a: f64, b: f64, rule: &GaussLegendre, degenerate: f64, mut visit: F)
    where
        F: FnMut(i64, f64, f64),
    {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let len = hi - lo;
        if len < degenerate || len == 0.0 {
            let (c, t) = self.locate(0.5 * (lo + hi));
            visit(c, t, 1.0);
            return;
        }
        let (mut cell, _) = self.locate(lo);
        let mut start = lo;
        loop {
            let knot = (cell + 1) as f64 * self.dx;
            let end = if knot < hi { knot } else { hi };
            if end > start {
                let scale = 1.0 / len;
                for (x, w) in rule.on_interval(start, end) {
                    let t = x / self.dx - cell as f64;
                    visit(cell, t.clamp(0.0, 1.0), w * scale);
                }
            }
            if end >= hi {
                break;
            }
            start = end;
            cell += 1;
        }
    }
}
