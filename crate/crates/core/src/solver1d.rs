//! Time stepping for the one-dimensional reduced model.
//!
//! The state is `u = (X, P, S, e_x, e_y, e_z, a_y, a_z)`. The Poisson
//! matrix is split into three parts:
//!
//! * Subsystem I moves `(X, P, e_x)`: particle push along `x` coupled to the
//!   longitudinal field. Implicit, discrete-gradient in `(x, p)`, midpoint in
//!   `e_x`, with charge deposited along the straight particle path so the
//!   discrete Gauss law is carried over exactly.
//! * Subsystem II moves `(e_y, e_z, a_y, a_z)` with the particles frozen.
//!   Implicit midpoint on the wave part plus a discrete gradient of the
//!   nonlinear `gamma(A)` coupling.
//! * Subsystem III rotates the spins; solved exactly.

use std::sync::Arc;

use nalgebra::DVector;

use crate::derham::{DeRhamComplex1D, SplineSpace1D};
use crate::discrete_gradient::{dg_kinetic_p, dg_kinetic_x, gamma_1d};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, scaled_change, ShiftedCache, SpdSolver};
use crate::parallel::{pairwise, Workers};
use crate::particles::Ensemble1D;
use crate::rotation::rodrigues;

/// Composition of the subsystem flows into one time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Splitting {
    /// Subsystems in presentation order with the full step each.
    #[default]
    Lie,
    /// Symmetric composition with half steps around the last subsystem.
    Strang,
}

/// Numerical parameters shared by the 1D and 2D steppers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub dt: f64,
    /// Fixed-point tolerance on the scaled max-norm change of every block.
    pub tol: f64,
    pub max_iter: usize,
    /// Displacements below `degeneracy_eps * dx` use midpoint derivatives.
    pub degeneracy_eps: f64,
    pub splitting: Splitting,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            dt: 0.02,
            tol: 1e-13,
            max_iter: 100,
            degeneracy_eps: crate::derham::DEFAULT_DEGENERACY_EPS,
            splitting: Splitting::Lie,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("time.dt", "time step must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("solver.tol", "tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::config("solver.max_iter", "need at least one iteration"));
        }
        if !(self.degeneracy_eps >= 0.0) {
            return Err(Error::config("solver.degeneracy_eps", "threshold must be non-negative"));
        }
        Ok(())
    }
}

/// Field coefficients: `e_x` in `V1`, the transverse components in `V0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState1D {
    pub ex: DVector<f64>,
    pub ey: DVector<f64>,
    pub ez: DVector<f64>,
    pub ay: DVector<f64>,
    pub az: DVector<f64>,
}

impl FieldState1D {
    pub fn zeros(n: usize) -> Self {
        let z = DVector::zeros(n);
        FieldState1D {
            ex: z.clone(),
            ey: z.clone(),
            ez: z.clone(),
            ay: z.clone(),
            az: z,
        }
    }
}

#[derive(Debug, Clone)]
pub struct State1D {
    pub ensemble: Ensemble1D,
    pub fields: FieldState1D,
    pub complex: Arc<DeRhamComplex1D>,
    pub hbar: f64,
    pub time: f64,
}

impl State1D {
    /// Zero fields, no particles.
    pub fn new(complex: Arc<DeRhamComplex1D>, hbar: f64) -> Self {
        let n = complex.dim();
        State1D {
            ensemble: Ensemble1D::empty(),
            fields: FieldState1D::zeros(n),
            complex,
            hbar,
            time: 0.0,
        }
    }
}

/// `A_perp = (A_y, A_z)` and its first two `x` derivatives at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Transverse {
    pub a: [f64; 2],
    pub da: [f64; 2],
    pub d2a: [f64; 2],
}

impl Transverse {
    pub fn sample(space: &SplineSpace1D, ay: &[f64], az: &[f64], x: f64, order: usize) -> Self {
        let mut out = Transverse::default();
        let n = space.cells();
        for o in 0..=order.min(2) {
            let b = space.axis.basis(space.degree, o, x);
            let v = [b.dot(n, ay), b.dot(n, az)];
            match o {
                0 => out.a = v,
                1 => out.da = v,
                _ => out.d2a = v,
            }
        }
        out
    }

    pub fn a_sq(&self) -> f64 {
        self.a[0] * self.a[0] + self.a[1] * self.a[1]
    }

    /// Spin rotation axis `(0, dA_z/dx, -dA_y/dx)`.
    pub fn spin_axis(&self) -> [f64; 3] {
        [0.0, self.da[1], -self.da[0]]
    }

    /// `s . spin_axis`, the Zeeman energy per unit weight and unit `hbar`.
    pub fn zeeman(&self, s: [f64; 3]) -> f64 {
        s[1] * self.da[1] - s[2] * self.da[0]
    }
}

/// Discrete `x`-gradient of `gamma(p0, A(x)) + hbar * s . r(x)` between
/// `x0` and `x1`, per unit weight.
///
/// Differences `f(x1) - f(x0)` of splines are never formed explicitly: the
/// quotient `(f(x1) - f(x0)) / (x1 - x0)` equals the average of `f'` over the
/// segment, which is integrated exactly by knot-split Gauss quadrature. This
/// keeps the quotient well conditioned for short displacements, and
/// segments below `eps * dx` reduce to the midpoint derivative.
pub fn position_quotient_1d(
    cx: &DeRhamComplex1D,
    fields: &FieldState1D,
    hbar: f64,
    s: [f64; 3],
    p0: f64,
    x0: f64,
    x1: f64,
    eps: f64,
) -> f64 {
    let space = &cx.space;
    let axis = space.axis;
    let n = space.cells();
    let (ay, az) = (fields.ay.as_slice(), fields.az.as_slice());
    let k = space.degree;
    let smooth_spin = k >= 2;
    let mut da = [0.0; 2];
    let mut d2a = [0.0; 2];
    axis.segment_average(x0, x1, cx.segment_rule(), eps * axis.dx, |cell, t, w| {
        let b1 = axis.basis_in_cell(k, 1, cell, t);
        da[0] += w * b1.dot(n, ay);
        da[1] += w * b1.dot(n, az);
        if smooth_spin && hbar != 0.0 {
            let b2 = axis.basis_in_cell(k, 2, cell, t);
            d2a[0] += w * b2.dot(n, ay);
            d2a[1] += w * b2.dot(n, az);
        }
    });
    let t0 = Transverse::sample(space, ay, az, x0, 1);
    let t1 = Transverse::sample(space, ay, az, x1, 1);
    let kinetic = dg_kinetic_x(p0, t0.a, t1.a, da);
    if hbar == 0.0 {
        return kinetic;
    }
    let spin = if smooth_spin {
        s[1] * d2a[1] - s[2] * d2a[0]
    } else if (x1 - x0).abs() < eps * axis.dx {
        // dA/dx is piecewise constant: zero derivative away from knots
        0.0
    } else {
        (t1.zeeman(s) - t0.zeeman(s)) / (x1 - x0)
    };
    kinetic + hbar * spin
}

#[derive(Debug, Clone, Copy)]
struct Track {
    x0: f64,
    p0: f64,
    x: f64,
    p: f64,
    s: [f64; 3],
    w: f64,
}

/// Stepper for [`State1D`]. Caches the implicit field operators per step
/// size; each subsystem either commits a converged update or leaves the
/// state untouched and returns an error.
#[derive(Debug)]
pub struct Solver1D {
    pub params: SolverParams,
    workers: Workers,
    transverse_ops: ShiftedCache,
}

impl Solver1D {
    pub fn new(params: SolverParams) -> Result<Self> {
        Self::with_workers(params, 1)
    }

    pub fn with_workers(params: SolverParams, workers: usize) -> Result<Self> {
        params.validate()?;
        Ok(Solver1D {
            params,
            workers: Workers::new(workers),
            transverse_ops: ShiftedCache::default(),
        })
    }

    fn non_convergence(&self, stage: &'static str, residual: f64) -> Error {
        Error::NonConvergence {
            stage,
            iterations: self.params.max_iter,
            residual,
        }
    }

    /// Subsystem I over `dt`; returns the number of fixed-point sweeps.
    pub fn step_subsystem1(&mut self, state: &mut State1D, dt: f64) -> Result<usize> {
        if dt == 0.0 {
            return Ok(0);
        }
        let cx = &*state.complex;
        let space = &cx.space;
        let fields = &state.fields;
        let hbar = state.hbar;
        let eps = self.params.degeneracy_eps;
        let n = cx.dim();
        let ens = &state.ensemble;
        let mut tracks: Vec<Track> = (0..ens.len())
            .map(|a| Track {
                x0: ens.x[a][0],
                p0: ens.p[a][0],
                x: ens.x[a][0],
                p: ens.p[a][0],
                s: ens.s[a],
                w: ens.w[a],
            })
            .collect();
        let e_n = fields.ex.clone();
        let mut e_k = e_n.clone();
        let (ay, az) = (fields.ay.as_slice(), fields.az.as_slice());
        let mut last = f64::INFINITY;

        for iter in 1..=self.params.max_iter {
            // positions from the current momentum iterate, and the current
            let parts = self.workers.map_blocks(&mut tracks, |_, chunk| {
                let mut j = DVector::zeros(n);
                let (mut change, mut size) = (0.0_f64, 0.0_f64);
                for t in chunk.iter_mut() {
                    let a1 = Transverse::sample(space, ay, az, t.x, 0).a_sq();
                    let x_new = t.x0 + dt * dg_kinetic_p(t.p0, t.p, a1);
                    let scale = t.w * (x_new - t.x0);
                    cx.segment_average_1form(t.x0, x_new, eps, |i, v| j[i] += scale * v);
                    change = change.max((x_new - t.x).abs());
                    size = size.max(x_new.abs());
                    t.x = x_new;
                }
                (j, change, size)
            });
            let (j, dx_change, x_size) = pairwise(parts, |a, b| (a.0 + b.0, a.1.max(b.1), a.2.max(b.2)))
                .unwrap_or((DVector::zeros(n), 0.0, 0.0));
            let e_new = &e_n - cx.solve_m1(&j);
            let e_mid = (&e_n + &e_new) * 0.5;

            let parts = self.workers.map_blocks(&mut tracks, |_, chunk| {
                let (mut change, mut size) = (0.0_f64, 0.0_f64);
                for t in chunk.iter_mut() {
                    let e_avg = cx.segment_average_of_1form(e_mid.as_slice(), t.x0, t.x, eps);
                    let force = position_quotient_1d(cx, fields, hbar, t.s, t.p0, t.x0, t.x, eps);
                    let p_new = t.p0 + dt * (e_avg - force);
                    change = change.max((p_new - t.p).abs());
                    size = size.max(p_new.abs());
                    t.p = p_new;
                }
                (change, size)
            });
            let (dp_change, p_size) = parts.into_iter().fold((0.0_f64, 0.0_f64), |a, b| (a.0.max(b.0), a.1.max(b.1)));

            let residual = (dx_change / x_size.max(1.0))
                .max(dp_change / p_size.max(1.0))
                .max(scaled_change(e_new.as_slice(), e_k.as_slice()));
            e_k = e_new;
            last = residual;
            if residual <= self.params.tol {
                let axis = space.axis;
                let ens = &mut state.ensemble;
                for (a, t) in tracks.iter().enumerate() {
                    ens.x[a][0] = axis.wrap(t.x);
                    ens.p[a][0] = t.p;
                }
                state.fields.ex = e_k;
                return Ok(iter);
            }
        }
        Err(self.non_convergence("subsystem I", last))
    }

    /// Subsystem II over `dt`; returns the number of fixed-point sweeps.
    pub fn step_subsystem2(&mut self, state: &mut State1D, dt: f64) -> Result<usize> {
        if dt == 0.0 {
            return Ok(0);
        }
        let cx = &*state.complex;
        let space = &cx.space;
        let n = cx.dim();
        let ens = &state.ensemble;
        let f = &state.fields;
        let hbar = state.hbar;

        let bases: Vec<_> = ens.x.iter().map(|x| space.basis0(x[0])).collect();
        let a_n: Vec<[f64; 2]> = bases.iter().map(|b| [b.dot(n, f.ay.as_slice()), b.dot(n, f.az.as_slice())]).collect();

        let k = &cx.stiffness;
        // solve for the increment of E so rounding scales with the change
        // rather than the field itself
        let lin = |e: &DVector<f64>, a: &DVector<f64>| k * (a * dt - e * (0.5 * dt * dt));
        let mut rhs_y = lin(&f.ey, &f.ay);
        let mut rhs_z = lin(&f.ez, &f.az);
        if hbar != 0.0 {
            let (q_y, q_z) = spin_loads(space, ens, &self.workers);
            rhs_y -= q_z * (dt * hbar);
            rhs_z += q_y * (dt * hbar);
        }
        let op: &SpdSolver = self.transverse_ops.get_or_factor(&cx.m0, k, 0.25 * dt * dt, "M0 + dt^2/4 K")?;

        let mut e_y = f.ey.clone();
        let mut e_z = f.ez.clone();
        let mut last = f64::INFINITY;
        for iter in 1..=self.params.max_iter {
            let a_y = &f.ay - (&f.ey + &e_y) * (0.5 * dt);
            let a_z = &f.az - (&f.ez + &e_z) * (0.5 * dt);
            let parts = self.workers.map_ranges(ens.len(), |range| {
                let mut ny = DVector::zeros(n);
                let mut nz = DVector::zeros(n);
                for a in range {
                    let b = &bases[a];
                    let ak = [b.dot(n, a_y.as_slice()), b.dot(n, a_z.as_slice())];
                    let an = a_n[a];
                    let p = ens.p[a][0];
                    let g_n = gamma_1d(p, an[0] * an[0] + an[1] * an[1]);
                    let g_k = gamma_1d(p, ak[0] * ak[0] + ak[1] * ak[1]);
                    let scale = ens.w[a] / (g_n + g_k);
                    let (cy, cz) = (scale * (ak[0] + an[0]), scale * (ak[1] + an[1]));
                    for (j, v) in b.iter(n) {
                        ny[j] += cy * v;
                        nz[j] += cz * v;
                    }
                }
                (ny, nz)
            });
            let (ny, nz) = pairwise(parts, |a, b| (a.0 + b.0, a.1 + b.1)).unwrap_or((DVector::zeros(n), DVector::zeros(n)));
            let y_new = &f.ey + op.solve(&(&rhs_y + ny * dt));
            let z_new = &f.ez + op.solve(&(&rhs_z + nz * dt));
            let residual = scaled_change(y_new.as_slice(), e_y.as_slice()).max(scaled_change(z_new.as_slice(), e_z.as_slice()));
            e_y = y_new;
            e_z = z_new;
            last = residual;
            if residual <= self.params.tol {
                let f = &mut state.fields;
                f.ay -= (&f.ey + &e_y) * (0.5 * dt);
                f.az -= (&f.ez + &e_z) * (0.5 * dt);
                f.ey = e_y;
                f.ez = e_z;
                return Ok(iter);
            }
        }
        Err(self.non_convergence("subsystem II", last))
    }

    /// Subsystem III: exact spin rotation about `(0, dA_z/dx, -dA_y/dx)`.
    pub fn step_subsystem3(&mut self, state: &mut State1D, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let space = &state.complex.space;
        let f = &state.fields;
        let (ay, az) = (f.ay.as_slice(), f.az.as_slice());
        let x = &state.ensemble.x;
        self.workers.map_blocks(&mut state.ensemble.s, |offset, chunk| {
            for (i, s) in chunk.iter_mut().enumerate() {
                let t = Transverse::sample(space, ay, az, x[offset + i][0], 1);
                *s = rodrigues(t.spin_axis(), *s, dt);
            }
        });
    }

    /// One Lie–Trotter step `I(dt) II(dt) III(dt)`.
    ///
    /// A failing subsystem leaves the earlier ones applied; clone the state
    /// first if the step may need to be retried.
    pub fn lie_trotter_step(&mut self, state: &mut State1D, dt: f64) -> Result<()> {
        self.step_subsystem1(state, dt)?;
        self.step_subsystem2(state, dt)?;
        self.step_subsystem3(state, dt);
        state.time += dt;
        Ok(())
    }

    /// One Strang step `I(dt/2) II(dt/2) III(dt) II(dt/2) I(dt/2)`.
    pub fn strang_step(&mut self, state: &mut State1D, dt: f64) -> Result<()> {
        let h = 0.5 * dt;
        self.step_subsystem1(state, h)?;
        self.step_subsystem2(state, h)?;
        self.step_subsystem3(state, dt);
        self.step_subsystem2(state, h)?;
        self.step_subsystem1(state, h)?;
        state.time += dt;
        Ok(())
    }

    /// One step with the configured splitting and step size `dt`.
    pub fn step(&mut self, state: &mut State1D, dt: f64) -> Result<()> {
        match self.params.splitting {
            Splitting::Lie => self.lie_trotter_step(state, dt),
            Splitting::Strang => self.strang_step(state, dt),
        }
    }
}

/// `q_c = sum_a w_a s_{a,c} dLambda0/dx(x_a)` for `c = y, z`, the
/// coefficient-space gradient of the Zeeman energy with respect to
/// `a_z` (from `s_y`) and `-a_y` (from `s_z`).
pub fn spin_loads(space: &SplineSpace1D, ens: &Ensemble1D, workers: &Workers) -> (DVector<f64>, DVector<f64>) {
    let n = space.cells();
    let parts = workers.map_ranges(ens.len(), |range| {
        let mut qy = DVector::zeros(n);
        let mut qz = DVector::zeros(n);
        for a in range {
            let b = space.axis.basis(space.degree, 1, ens.x[a][0]);
            let (cy, cz) = (ens.w[a] * ens.s[a][1], ens.w[a] * ens.s[a][2]);
            for (j, v) in b.iter(n) {
                qy[j] += cy * v;
                qz[j] += cz * v;
            }
        }
        (qy, qz)
    });
    pairwise(parts, |a, b| (a.0 + b.0, a.1 + b.1)).unwrap_or((DVector::zeros(n), DVector::zeros(n)))
}

/// Deposited charge `rho_j = sum_a w_a Lambda0_j(x_a)`.
pub fn charge_density_1d(cx: &DeRhamComplex1D, ens: &Ensemble1D) -> DVector<f64> {
    let n = cx.dim();
    let mut rho = DVector::zeros(n);
    for (x, w) in ens.x.iter().zip(&ens.w) {
        for (j, v) in cx.space.basis0(x[0]).iter(n) {
            rho[j] += w * v;
        }
    }
    rho
}

/// Solve `(K + c 1 1^T) phi = rho - b` and return `e = -G phi`; `c` fixes
/// the constant null vector of `K = G^T M1 G`.
pub(crate) fn potential_field(
    stiffness: &nalgebra::DMatrix<f64>,
    g: &nalgebra::DMatrix<f64>,
    source: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = stiffness.nrows();
    let c = stiffness.diagonal().mean().max(1.0);
    let mut op = stiffness.clone();
    op.add_scalar_mut(c);
    let solver = SpdSolver::new(op, "G^T M1 G + c 1 1^T")?;
    let phi = solver.solve(source);
    debug_assert_eq!(phi.len(), n);
    Ok(-(g * phi))
}

/// Set `e_x` so that the discrete Gauss law `G^T M1 e_x = b - rho` holds.
pub fn solve_initial_poisson(state: &mut State1D) -> Result<()> {
    let cx = &*state.complex;
    let rho = charge_density_1d(cx, &state.ensemble);
    let mismatch = rho.sum() - cx.background.sum();
    if mismatch.abs() > 1e-10 {
        return Err(Error::config(
            "particles",
            format!("total charge differs from the background by {mismatch:e}"),
        ));
    }
    let source = &rho - &cx.background;
    if max_abs(source.as_slice()) == 0.0 {
        state.fields.ex.fill(0.0);
        return Ok(());
    }
    state.fields.ex = potential_field(&cx.stiffness, &cx.g, &source)?;
    Ok(())
}
