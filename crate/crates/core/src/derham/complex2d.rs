use nalgebra::{DMatrix, DVector};

use super::complex1d::{check_axis, periodic_difference, periodic_mass, SplineSpace1D, DEFAULT_DEGENERACY_EPS};
use crate::error::Result;
use crate::linalg::SpdSolver;
use crate::quadrature::GaussLegendre;
use crate::spline::{LocalBasis, PeriodicAxis};

/// Product of two one-axis bases; flattened index `i1 * n2 + i2`.
#[derive(Debug, Clone, Copy)]
pub struct TensorBasis {
    pub first: LocalBasis,
    pub second: LocalBasis,
}

impl TensorBasis {
    pub fn iter(&self, n1: usize, n2: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.first
            .iter(n1)
            .flat_map(move |(i1, v1)| self.second.iter(n2).map(move |(i2, v2)| (i1 * n2 + i2, v1 * v2)))
    }

    pub fn dot(&self, n1: usize, n2: usize, coeffs: &[f64]) -> f64 {
        self.iter(n1, n2).map(|(i, v)| coeffs[i] * v).sum()
    }
}

/// Discrete complex on the periodic rectangle:
/// `V0 --grad--> V1 --curl--> V2` plus the rotated space `V1*` of
/// in-plane magnetic fields reached from `V0` by `Gstar`.
///
/// `V1` and `V1*` vectors stack the first component block on top of the
/// second. With degrees `(k1, k2)`:
///
/// | space | first component | second component |
/// |-------|-----------------|------------------|
/// | V0    | `N^k1 N^k2` | |
/// | V1    | `N^(k1-1) N^k2` | `N^k1 N^(k2-1)` |
/// | V2    | `N^(k1-1) N^(k2-1)` | |
/// | V1*   | `N^k1 N^(k2-1)` | `-N^(k1-1) N^k2` |
#[derive(Debug, Clone)]
pub struct DeRhamComplex2D {
    pub axes: [SplineSpace1D; 2],
    pub m0: DMatrix<f64>,
    pub m1: DMatrix<f64>,
    pub m2: DMatrix<f64>,
    pub m1star: DMatrix<f64>,
    /// Gradient `V0 -> V1`.
    pub g: DMatrix<f64>,
    /// Scalar curl `V1 -> V2`.
    pub c: DMatrix<f64>,
    /// Rotated gradient `V0 -> V1*`, `A_z -> (d2 A_z, d1 A_z)` in coefficients.
    pub gstar: DMatrix<f64>,
    /// `G^T M1 G`.
    pub stiffness: DMatrix<f64>,
    /// `Gstar^T M1star Gstar`.
    pub stiffness_star: DMatrix<f64>,
    /// `C^T M2 C`.
    pub curl_curl: DMatrix<f64>,
    /// `b_j = int Lambda0_j dx`.
    pub background: DVector<f64>,
    m0_solver: SpdSolver,
    m1_solver: SpdSolver,
    segment_rule: GaussLegendre,
    axis_rules: [GaussLegendre; 2],
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut m = DMatrix::zeros(ra + rb, ca + cb);
    m.view_mut((0, 0), (ra, ca)).copy_from(a);
    m.view_mut((ra, ca), (rb, cb)).copy_from(b);
    m
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

fn side_by_side(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

/// Build the periodic 2D complex with `cells` per axis, 0-form degrees
/// `degrees` and side lengths `lengths`.
pub fn build_complex_2d(cells: [usize; 2], degrees: [usize; 2], lengths: [f64; 2]) -> Result<DeRhamComplex2D> {
    for d in 0..2 {
        check_axis(cells[d], degrees[d], lengths[d], &format!("[{d}]"))?;
    }
    let axes = [
        SplineSpace1D::new(cells[0], degrees[0], lengths[0])?,
        SplineSpace1D::new(cells[1], degrees[1], lengths[1])?,
    ];
    let rule = GaussLegendre::new(degrees[0].max(degrees[1]) + 1);
    let mass = |d: usize, q: usize| periodic_mass(&axes[d].axis, q, &rule);
    let (a0, a1) = (mass(0, degrees[0]), mass(0, degrees[0] - 1));
    let (b0, b1) = (mass(1, degrees[1]), mass(1, degrees[1] - 1));

    let m0 = a0.kronecker(&b0);
    let m1 = block_diag(&a1.kronecker(&b0), &a0.kronecker(&b1));
    let m2 = a1.kronecker(&b1);
    let m1star = block_diag(&a0.kronecker(&b1), &a1.kronecker(&b0));

    let d1 = periodic_difference(&axes[0].axis);
    let d2 = periodic_difference(&axes[1].axis);
    let i1 = DMatrix::<f64>::identity(cells[0], cells[0]);
    let i2 = DMatrix::<f64>::identity(cells[1], cells[1]);
    let grad1 = d1.kronecker(&i2);
    let grad2 = i1.kronecker(&d2);
    let g = stack(&grad1, &grad2);
    let c = side_by_side(&(-&grad2), &grad1);
    let gstar = stack(&grad2, &grad1);

    let stiffness = g.transpose() * &m1 * &g;
    let stiffness_star = gstar.transpose() * &m1star * &gstar;
    let curl_curl = c.transpose() * &m2 * &c;

    let row_sums = |m: &DMatrix<f64>| DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()));
    let background = row_sums(&a0).kronecker(&row_sums(&b0));

    let m0_solver = SpdSolver::new(m0.clone(), "M0")?;
    let m1_solver = SpdSolver::new(m1.clone(), "M1")?;
    Ok(DeRhamComplex2D {
        axes,
        m0,
        m1,
        m2,
        m1star,
        g,
        c,
        gstar,
        stiffness,
        stiffness_star,
        curl_curl,
        background,
        m0_solver,
        m1_solver,
        segment_rule: GaussLegendre::new((degrees[0] + degrees[1]).div_ceil(2)),
        axis_rules: [
            GaussLegendre::new((degrees[0] - 1) / 2 + 1),
            GaussLegendre::new((degrees[1] - 1) / 2 + 1),
        ],
    })
}

/// Which of the per-axis degree shifts a 2D field uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form2 {
    Zero,
    OneFirst,
    OneSecond,
    Two,
}

impl DeRhamComplex2D {
    pub fn n(&self) -> [usize; 2] {
        [self.axes[0].cells(), self.axes[1].cells()]
    }

    pub fn dim0(&self) -> usize {
        self.axes[0].cells() * self.axes[1].cells()
    }

    pub fn dim1(&self) -> usize {
        2 * self.dim0()
    }

    pub fn dim2(&self) -> usize {
        self.dim0()
    }

    pub fn lengths(&self) -> [f64; 2] {
        [self.axes[0].length(), self.axes[1].length()]
    }

    pub fn degrees(&self) -> [usize; 2] {
        [self.axes[0].degree, self.axes[1].degree]
    }

    fn axis(&self, d: usize) -> &PeriodicAxis {
        &self.axes[d].axis
    }

    fn form_degrees(&self, form: Form2) -> [usize; 2] {
        let [k1, k2] = self.degrees();
        match form {
            Form2::Zero => [k1, k2],
            Form2::OneFirst => [k1 - 1, k2],
            Form2::OneSecond => [k1, k2 - 1],
            Form2::Two => [k1 - 1, k2 - 1],
        }
    }

    pub fn solve_m0(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.m0_solver.solve(rhs)
    }

    pub fn solve_m1(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.m1_solver.solve(rhs)
    }

    /// Active basis functions of `form` at `x`, differentiated `orders[d]`
    /// times along axis `d`.
    pub fn basis(&self, form: Form2, orders: [usize; 2], x: [f64; 2]) -> TensorBasis {
        let deg = self.form_degrees(form);
        TensorBasis {
            first: self.axis(0).basis(deg[0], orders[0], x[0]),
            second: self.axis(1).basis(deg[1], orders[1], x[1]),
        }
    }

    /// Evaluate a scalar field of type `form` (or one 1-form component)
    /// stored in `coeffs` of length `dim0`.
    pub fn eval(&self, form: Form2, orders: [usize; 2], coeffs: &[f64], x: [f64; 2]) -> f64 {
        let [n1, n2] = self.n();
        self.basis(form, orders, x).dot(n1, n2, coeffs)
    }

    pub fn eval_0form(&self, coeffs: &[f64], x: [f64; 2]) -> f64 {
        self.eval(Form2::Zero, [0, 0], coeffs, x)
    }

    pub fn eval_0form_gradient(&self, coeffs: &[f64], x: [f64; 2]) -> [f64; 2] {
        [
            self.eval(Form2::Zero, [1, 0], coeffs, x),
            self.eval(Form2::Zero, [0, 1], coeffs, x),
        ]
    }

    pub fn eval_1form(&self, coeffs: &[f64], x: [f64; 2]) -> [f64; 2] {
        let n = self.dim0();
        [
            self.eval(Form2::OneFirst, [0, 0], &coeffs[..n], x),
            self.eval(Form2::OneSecond, [0, 0], &coeffs[n..], x),
        ]
    }

    pub fn eval_2form(&self, coeffs: &[f64], x: [f64; 2]) -> f64 {
        self.eval(Form2::Two, [0, 0], coeffs, x)
    }

    /// Evaluate a `V1*` field; the second component carries the minus sign
    /// of its basis.
    pub fn eval_1star(&self, coeffs: &[f64], x: [f64; 2]) -> [f64; 2] {
        let n = self.dim0();
        [
            self.eval(Form2::OneSecond, [0, 0], &coeffs[..n], x),
            -self.eval(Form2::OneFirst, [0, 0], &coeffs[n..], x),
        ]
    }

    pub fn l2_project_0form<F: Fn([f64; 2]) -> f64>(&self, f: F) -> DVector<f64> {
        let [n1, n2] = self.n();
        let [k1, k2] = self.degrees();
        let rule = GaussLegendre::new(k1.max(k2) + 2);
        let (ax, ay) = (self.axis(0), self.axis(1));
        let mut rhs = DVector::zeros(self.dim0());
        for c1 in 0..n1 as i64 {
            let a1 = c1 as f64 * ax.dx;
            for (x1, w1) in rule.on_interval(a1, a1 + ax.dx) {
                let b1 = ax.basis_in_cell(k1, 0, c1, x1 / ax.dx - c1 as f64);
                for c2 in 0..n2 as i64 {
                    let a2 = c2 as f64 * ay.dx;
                    for (x2, w2) in rule.on_interval(a2, a2 + ay.dx) {
                        let b2 = ay.basis_in_cell(k2, 0, c2, x2 / ay.dx - c2 as f64);
                        let fw = f([x1, x2]) * w1 * w2;
                        for (i, v) in (TensorBasis { first: b1, second: b2 }).iter(n1, n2) {
                            rhs[i] += fw * v;
                        }
                    }
                }
            }
        }
        self.solve_m0(&rhs)
    }

    /// Gauss points of the average over the straight segment `a -> b`
    /// (unwrapped), split at every knot line of either axis.
    ///
    /// `visit` receives the point and its normalized weight. When both
    /// displacements are below `eps` cells the midpoint is used.
    pub fn segment_points<F: FnMut([f64; 2], f64)>(&self, a: [f64; 2], b: [f64; 2], eps: f64, mut visit: F) {
        let delta = [b[0] - a[0], b[1] - a[1]];
        let dx = [self.axis(0).dx, self.axis(1).dx];
        if delta[0].abs() < eps * dx[0] && delta[1].abs() < eps * dx[1] {
            visit([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])], 1.0);
            return;
        }
        // parameters in (0, 1) where the segment crosses a knot line
        let mut cuts = vec![0.0, 1.0];
        for d in 0..2 {
            if delta[d] == 0.0 {
                continue;
            }
            let (lo, hi) = if delta[d] > 0.0 { (a[d], b[d]) } else { (b[d], a[d]) };
            let mut k = (lo / dx[d]).floor() + 1.0;
            while k * dx[d] < hi {
                let s = (k * dx[d] - a[d]) / delta[d];
                if s > 0.0 && s < 1.0 {
                    cuts.push(s);
                }
                k += 1.0;
            }
        }
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            let (s0, s1) = (w[0], w[1]);
            if s1 <= s0 {
                continue;
            }
            for (s, wt) in self.segment_rule.on_interval(s0, s1) {
                visit([a[0] + s * delta[0], a[1] + s * delta[1]], wt);
            }
        }
    }

    /// Gauss points of the average along axis `d` from `from` to `to`, which
    /// must agree in the other coordinate. Exact for polynomial degree
    /// `k_d - 1` along the leg; legs below `eps` cells use the midpoint.
    pub fn leg_points<F: FnMut([f64; 2], f64)>(&self, from: [f64; 2], to: [f64; 2], d: usize, eps: f64, mut visit: F) {
        let axis = self.axis(d);
        axis.segment_average(from[d], to[d], &self.axis_rules[d], eps * axis.dx, |cell, t, w| {
            let mut x = from;
            x[d] = (cell as f64 + t) * axis.dx;
            visit(x, w);
        });
    }

    /// Segment averages of the two `V1` component bases along `a -> b`,
    /// visited as `(flat V1 index, weight)`.
    pub fn segment_average_1form<F: FnMut(usize, f64)>(&self, a: [f64; 2], b: [f64; 2], eps: f64, mut visit: F) {
        let [n1, n2] = self.n();
        let n = self.dim0();
        let (ax, ay) = (self.axis(0), self.axis(1));
        let [k1, k2] = self.degrees();
        self.segment_points(a, b, eps, |x, w| {
            // cell from the point itself is safe: pieces never straddle knots
            let (c1, t1) = ax.locate(x[0]);
            let (c2, t2) = ay.locate(x[1]);
            let first = TensorBasis {
                first: ax.basis_in_cell(k1 - 1, 0, c1, t1),
                second: ay.basis_in_cell(k2, 0, c2, t2),
            };
            for (i, v) in first.iter(n1, n2) {
                visit(i, w * v);
            }
            let second = TensorBasis {
                first: ax.basis_in_cell(k1, 0, c1, t1),
                second: ay.basis_in_cell(k2 - 1, 0, c2, t2),
            };
            for (i, v) in second.iter(n1, n2) {
                visit(n + i, w * v);
            }
        });
    }

    /// Dense segment average of the `V1` basis along `a -> b`.
    pub fn line_integral_1form(&self, a: [f64; 2], b: [f64; 2]) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim1());
        self.segment_average_1form(a, b, DEFAULT_DEGENERACY_EPS, |i, w| v[i] += w);
        v
    }

    /// Values of all `V0` basis functions at `x` as a dense vector.
    pub fn basis0_dense(&self, x: [f64; 2]) -> DVector<f64> {
        let [n1, n2] = self.n();
        let mut v = DVector::zeros(self.dim0());
        for (i, val) in self.basis(Form2::Zero, [0, 0], x).iter(n1, n2) {
            v[i] += val;
        }
        v
    }

    pub fn wrap(&self, x: [f64; 2]) -> [f64; 2] {
        [self.axis(0).wrap(x[0]), self.axis(1).wrap(x[1])]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::asymmetry;

    #[test]
    fn curl_of_gradient_vanishes() {
        let c = build_complex_2d([4, 4], [2, 2], [1.0, 1.0]).unwrap();
        assert!((&c.c * &c.g).amax() <= 1e-14);
        let c = build_complex_2d([5, 7], [3, 2], [1.3, 0.4]).unwrap();
        assert!((&c.c * &c.g).amax() <= 1e-14 * 1e3);
    }

    #[test]
    fn gradients_annihilate_constants() {
        let c = build_complex_2d([6, 5], [2, 3], [2.0, 1.0]).unwrap();
        let ones = DVector::from_element(c.dim0(), 1.0);
        assert!((&c.g * &ones).amax() <= 1e-13);
        assert!((&c.gstar * &ones).amax() <= 1e-13);
    }

    #[test]
    fn m2_row_sums_equal_cell_area() {
        let c = build_complex_2d([4, 6], [2, 3], [1.0, 3.0]).unwrap();
        let area = 0.25 * 0.5;
        for r in c.m2.row_iter() {
            assert!((r.sum() - area).abs() < 1e-13);
        }
    }

    #[test]
    fn mass_matrices_symmetric() {
        let c = build_complex_2d([4, 5], [2, 2], [1.0, 1.0]).unwrap();
        for m in [&c.m0, &c.m1, &c.m2, &c.m1star] {
            assert!(asymmetry(m) <= 1e-15);
        }
    }

    #[test]
    fn rejects_bad_axis() {
        let err = build_complex_2d([4, 2], [2, 2], [1.0, 1.0]).unwrap_err();
        assert!(err.to_string().contains("cells[1]"), "{err}");
    }

    #[test]
    fn segment_average_weights_sum_to_one() {
        let c = build_complex_2d([8, 8], [3, 3], [1.0, 1.0]).unwrap();
        let mut total = 0.0;
        c.segment_points([0.05, 0.93], [0.61, 1.37], 1e-10, |_, w| total += w);
        assert!((total - 1.0).abs() < 1e-14);
    }
}
