use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SpdSolver;
use crate::quadrature::GaussLegendre;
use crate::spline::{LocalBasis, PeriodicAxis, MAX_DEGREE};

/// Relative segment length below which difference quotients and segment
/// averages collapse to midpoint evaluations.
pub const DEFAULT_DEGENERACY_EPS: f64 = 1e-10;

/// Periodic spline spaces `V0` (degree `k`) and `V1` (degree `k - 1`) on a
/// uniform grid of `cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplineSpace1D {
    pub degree: usize,
    pub axis: PeriodicAxis,
}

pub(crate) fn check_axis(cells: usize, degree: usize, length: f64, suffix: &str) -> Result<()> {
    if degree < 1 {
        return Err(Error::config(format!("degree{suffix}"), "spline degree must be at least 1"));
    }
    if degree > MAX_DEGREE {
        return Err(Error::config(
            format!("degree{suffix}"),
            format!("spline degree must be at most {MAX_DEGREE}"),
        ));
    }
    if cells < degree + 1 {
        return Err(Error::config(
            format!("cells{suffix}"),
            format!("need at least degree + 1 = {} cells, got {cells}", degree + 1),
        ));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::config(format!("length{suffix}"), "domain length must be positive"));
    }
    Ok(())
}

impl SplineSpace1D {
    pub fn new(cells: usize, degree: usize, length: f64) -> Result<Self> {
        check_axis(cells, degree, length, "")?;
        Ok(SplineSpace1D {
            degree,
            axis: PeriodicAxis::new(cells, length),
        })
    }

    pub fn cells(&self) -> usize {
        self.axis.cells
    }

    pub fn length(&self) -> f64 {
        self.axis.length
    }

    pub fn dx(&self) -> f64 {
        self.axis.dx
    }

    /// Dimension of `V0`; equal to the dimension of `V1` for periodic splines.
    pub fn dim(&self) -> usize {
        self.axis.cells
    }

    pub fn basis0(&self, x: f64) -> LocalBasis {
        self.axis.basis(self.degree, 0, x)
    }

    pub fn basis1(&self, x: f64) -> LocalBasis {
        self.axis.basis(self.degree - 1, 0, x)
    }

    pub fn eval_0form(&self, coeffs: &[f64], x: f64) -> f64 {
        self.axis.eval(self.degree, 0, coeffs, x)
    }

    pub fn eval_1form(&self, coeffs: &[f64], x: f64) -> f64 {
        self.axis.eval(self.degree - 1, 0, coeffs, x)
    }

    pub fn eval_0form_derivative(&self, coeffs: &[f64], x: f64) -> f64 {
        self.axis.eval(self.degree, 1, coeffs, x)
    }

    pub fn eval_0form_second_derivative(&self, coeffs: &[f64], x: f64) -> Result<f64> {
        if self.degree < 2 {
            return Err(Error::UnsupportedOrder {
                order: 2,
                degree: self.degree,
            });
        }
        Ok(self.axis.eval(self.degree, 2, coeffs, x))
    }

    /// Pointwise derivative of a 1-form; zero almost everywhere for degree 0.
    pub fn eval_1form_derivative(&self, coeffs: &[f64], x: f64) -> f64 {
        self.axis.eval(self.degree - 1, 1, coeffs, x)
    }
}

/// The discrete complex `V0 --d/dx--> V1` with its mass matrices.
#[derive(Debug, Clone)]
pub struct DeRhamComplex1D {
    pub space: SplineSpace1D,
    /// Mass matrix of `V0`.
    pub m0: DMatrix<f64>,
    /// Mass matrix of `V1`.
    pub m1: DMatrix<f64>,
    /// Derivative matrix, `N1 x N0`.
    pub g: DMatrix<f64>,
    /// `G^T M1 G`.
    pub stiffness: DMatrix<f64>,
    /// `b_j = int Lambda0_j dx`, the neutralizing background.
    pub background: DVector<f64>,
    m0_solver: SpdSolver,
    m1_solver: SpdSolver,
    segment_rule: GaussLegendre,
}

/// Mass matrix of the periodic degree-`degree` spline space on `axis`.
pub(crate) fn periodic_mass(axis: &PeriodicAxis, degree: usize, rule: &GaussLegendre) -> DMatrix<f64> {
    let n = axis.cells;
    let mut m = DMatrix::zeros(n, n);
    for cell in 0..n as i64 {
        let a = cell as f64 * axis.dx;
        for (x, w) in rule.on_interval(a, a + axis.dx) {
            let b = axis.basis_in_cell(degree, 0, cell, x / axis.dx - cell as f64);
            for (i, vi) in b.iter(n) {
                for (j, vj) in b.iter(n) {
                    m[(i, j)] += w * vi * vj;
                }
            }
        }
    }
    m
}

/// Cyclic difference matrix with `+1/dx` on the diagonal and `-1/dx` on
/// the cyclic subdiagonal.
pub(crate) fn periodic_difference(axis: &PeriodicAxis) -> DMatrix<f64> {
    let n = axis.cells;
    let inv = 1.0 / axis.dx;
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        g[(i, i)] += inv;
        g[(i, (i + n - 1) % n)] -= inv;
    }
    g
}

/// Build the periodic 1D complex with `cells` cells, 0-form degree `degree`
/// and domain length `length`.
pub fn build_complex_1d(cells: usize, degree: usize, length: f64) -> Result<DeRhamComplex1D> {
    let space = SplineSpace1D::new(cells, degree, length)?;
    let axis = space.axis;
    let rule = GaussLegendre::new(degree + 1);
    let m0 = periodic_mass(&axis, degree, &rule);
    let m1 = periodic_mass(&axis, degree - 1, &rule);
    let g = periodic_difference(&axis);
    let stiffness = g.transpose() * &m1 * &g;

    let mut background = DVector::zeros(cells);
    for cell in 0..cells as i64 {
        let a = cell as f64 * axis.dx;
        for (x, w) in rule.on_interval(a, a + axis.dx) {
            let b = axis.basis_in_cell(degree, 0, cell, x / axis.dx - cell as f64);
            for (j, v) in b.iter(cells) {
                background[j] += w * v;
            }
        }
    }

    let m0_solver = SpdSolver::new(m0.clone(), "M0")?;
    let m1_solver = SpdSolver::new(m1.clone(), "M1")?;
    Ok(DeRhamComplex1D {
        space,
        m0,
        m1,
        g,
        stiffness,
        background,
        m0_solver,
        m1_solver,
        segment_rule: GaussLegendre::new((degree - 1) / 2 + 1),
    })
}

impl DeRhamComplex1D {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn solve_m0(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.m0_solver.solve(rhs)
    }

    pub fn solve_m1(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.m1_solver.solve(rhs)
    }

    /// Gauss rule used on each knot-free piece of a particle segment.
    pub fn segment_rule(&self) -> &GaussLegendre {
        &self.segment_rule
    }

    /// L2 projection of a periodic function onto `V0`.
    pub fn l2_project_0form<F: Fn(f64) -> f64>(&self, f: F) -> DVector<f64> {
        let axis = self.space.axis;
        let n = axis.cells;
        let rule = GaussLegendre::new(self.space.degree + 2);
        let mut rhs = DVector::zeros(n);
        for cell in 0..n as i64 {
            let a = cell as f64 * axis.dx;
            for (x, w) in rule.on_interval(a, a + axis.dx) {
                let fx = f(x);
                let b = axis.basis_in_cell(self.space.degree, 0, cell, x / axis.dx - cell as f64);
                for (j, v) in b.iter(n) {
                    rhs[j] += w * v * fx;
                }
            }
        }
        self.solve_m0(&rhs)
    }

    /// Visit `(index, weight)` pairs of the segment average of the `V1`
    /// basis along `[x0, x1]`.
    pub fn segment_average_1form<F: FnMut(usize, f64)>(&self, x0: f64, x1: f64, eps: f64, mut visit: F) {
        let axis = self.space.axis;
        let q = self.space.degree - 1;
        axis.segment_average(x0, x1, &self.segment_rule, eps * axis.dx, |cell, t, w| {
            let b = axis.basis_in_cell(q, 0, cell, t);
            for (i, v) in b.iter(axis.cells) {
                visit(i, w * v);
            }
        });
    }

    /// `v_i = (1/(x1 - x0)) int_{x0}^{x1} Lambda1_i(x) dx`.
    ///
    /// Positions are unwrapped; segments shorter than `1e-10 * dx` return the
    /// basis values at the midpoint.
    pub fn line_integral_1form(&self, x0: f64, x1: f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        self.segment_average_1form(x0, x1, DEFAULT_DEGENERACY_EPS, |i, w| v[i] += w);
        v
    }

    /// Segment average of a 1-form field with coefficients `coeffs`.
    pub fn segment_average_of_1form(&self, coeffs: &[f64], x0: f64, x1: f64, eps: f64) -> f64 {
        let mut acc = 0.0;
        self.segment_average_1form(x0, x1, eps, |i, w| acc += w * coeffs[i]);
        acc
    }

    /// Values of all `V0` basis functions at `x` as a dense vector.
    pub fn basis0_dense(&self, x: f64) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        for (j, val) in self.space.basis0(x).iter(self.dim()) {
            v[j] += val;
        }
        v
    }
}
