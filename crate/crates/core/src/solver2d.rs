//! Time stepping for the two-dimensional reduced model.
//!
//! The state is `u = (X, P, S, e_xy, b_z, e_z, a_z)` with in-plane electric
//! field `e_xy` in `V1`, `B_z` in `V2` and `(E_z, A_z)` in `V0`. The in-plane
//! magnetic field `(d A_z/dx2, -d A_z/dx1)` lives in `V1*`. Four subsystems:
//!
//! * I: `(X, P, e_xy)`, discrete-gradient particle push with the Gauss law
//!   carried over exactly.
//! * II: momentum rotation by `B_z` and spin rotation about `B`; exact.
//! * III: `(e_z, a_z)`, implicit midpoint plus discrete gradient.
//! * IV: `(e_xy, b_z)`, implicit midpoint Maxwell step.

use std::sync::Arc;

use nalgebra::DVector;

use crate::derham::{DeRhamComplex2D, Form2};
use crate::discrete_gradient::{gamma_2d, gamma_minus_one};
use crate::error::{Error, Result};
use crate::linalg::{scaled_change, ShiftedCache, SpdSolver};
use crate::parallel::{pairwise, Workers};
use crate::particles::Ensemble2D;
use crate::rotation::{rodrigues, rotate_clockwise};
use crate::solver1d::{potential_field, SolverParams};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState2D {
    /// `(E_x, E_y)` in `V1`, first component block first.
    pub exy: DVector<f64>,
    pub bz: DVector<f64>,
    pub ez: DVector<f64>,
    pub az: DVector<f64>,
}

impl FieldState2D {
    pub fn zeros(cx: &DeRhamComplex2D) -> Self {
        FieldState2D {
            exy: DVector::zeros(cx.dim1()),
            bz: DVector::zeros(cx.dim2()),
            ez: DVector::zeros(cx.dim0()),
            az: DVector::zeros(cx.dim0()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct State2D {
    pub ensemble: Ensemble2D,
    pub fields: FieldState2D,
    pub complex: Arc<DeRhamComplex2D>,
    pub hbar: f64,
    pub time: f64,
}

impl State2D {
    pub fn new(complex: Arc<DeRhamComplex2D>, hbar: f64) -> Self {
        State2D {
            ensemble: Ensemble2D::empty(),
            fields: FieldState2D::zeros(&complex),
            complex,
            hbar,
            time: 0.0,
        }
    }
}

/// `A_z`, `B_z` and their derivatives at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MagneticSample {
    pub az: f64,
    pub grad_az: [f64; 2],
    /// `[d11, d12, d22]` of `A_z`.
    pub hess_az: [f64; 3],
    pub bz: f64,
    pub grad_bz: [f64; 2],
}

impl MagneticSample {
    /// `order` 0 gives values, 1 adds `grad A_z`, 2 adds the rest.
    pub fn sample(cx: &DeRhamComplex2D, f: &FieldState2D, x: [f64; 2], order: usize) -> Self {
        let (az, bz) = (f.az.as_slice(), f.bz.as_slice());
        let mut m = MagneticSample {
            az: cx.eval(Form2::Zero, [0, 0], az, x),
            bz: cx.eval(Form2::Two, [0, 0], bz, x),
            ..Default::default()
        };
        if order >= 1 {
            m.grad_az = [cx.eval(Form2::Zero, [1, 0], az, x), cx.eval(Form2::Zero, [0, 1], az, x)];
        }
        if order >= 2 {
            m.hess_az = [
                cx.eval(Form2::Zero, [2, 0], az, x),
                cx.eval(Form2::Zero, [1, 1], az, x),
                cx.eval(Form2::Zero, [0, 2], az, x),
            ];
            m.grad_bz = [cx.eval(Form2::Two, [1, 0], bz, x), cx.eval(Form2::Two, [0, 1], bz, x)];
        }
        m
    }

    /// `B = (dA_z/dx2, -dA_z/dx1, B_z)`.
    pub fn field(&self) -> [f64; 3] {
        [self.grad_az[1], -self.grad_az[0], self.bz]
    }

    /// Gradient of `s . B` in the plane.
    pub fn zeeman_gradient(&self, s: [f64; 3]) -> [f64; 2] {
        let [h11, h12, h22] = self.hess_az;
        [
            s[0] * h12 - s[1] * h11 + s[2] * self.grad_bz[0],
            s[0] * h22 - s[1] * h12 + s[2] * self.grad_bz[1],
        ]
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Staggered coordinate quotients of `gamma(p0, A_z(x)) + hbar s . B(x)`
/// from `x0` to `x1`, per unit weight: the first component moves along
/// `x1` at the new second coordinate, the second along `x2` at the old
/// first coordinate.
///
/// As in 1D each quotient is the average of the exact partial derivative
/// along its leg, so short legs stay well conditioned and legs below `eps`
/// cells reduce to the midpoint derivative.
pub fn position_quotient_2d(
    cx: &DeRhamComplex2D,
    f: &FieldState2D,
    hbar: f64,
    s: [f64; 3],
    p0: [f64; 2],
    x0: [f64; 2],
    x1: [f64; 2],
    eps: f64,
) -> [f64; 2] {
    let corner = [x0[0], x1[1]];
    let legs = [(corner, x1), (x0, corner)];
    let degrees = cx.degrees();
    let dx = [cx.axes[0].dx(), cx.axes[1].dx()];
    let az = f.az.as_slice();
    let mut out = [0.0; 2];
    for d in 0..2 {
        let (from, to) = legs[d];
        let smooth_spin = degrees[d] >= 2;
        let mut orders = [0, 0];
        orders[d] = 1;
        let mut slope = 0.0;
        let mut spin = 0.0;
        cx.leg_points(from, to, d, eps, |x, w| {
            slope += w * cx.eval(Form2::Zero, orders, az, x);
            if smooth_spin && hbar != 0.0 {
                spin += w * MagneticSample::sample(cx, f, x, 2).zeeman_gradient(s)[d];
            }
        });
        let a0 = cx.eval_0form(az, from);
        let a1 = cx.eval_0form(az, to);
        let kinetic = (a0 + a1) * slope / (gamma_2d(p0, a0 * a0) + gamma_2d(p0, a1 * a1));
        if hbar != 0.0 && !smooth_spin {
            let delta = to[d] - from[d];
            spin = if delta.abs() < eps * dx[d] {
                0.0
            } else {
                let m0 = MagneticSample::sample(cx, f, from, 1);
                let m1 = MagneticSample::sample(cx, f, to, 1);
                (dot3(s, m1.field()) - dot3(s, m0.field())) / delta
            };
        }
        out[d] = kinetic + hbar * spin;
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Track {
    x0: [f64; 2],
    p0: [f64; 2],
    x: [f64; 2],
    p: [f64; 2],
    s: [f64; 3],
    w: f64,
}

/// Stepper for [`State2D`]; same commit-on-success contract as
/// [`crate::solver1d::Solver1D`].
#[derive(Debug)]
pub struct Solver2D {
    pub params: SolverParams,
    workers: Workers,
    potential_ops: ShiftedCache,
    maxwell_ops: ShiftedCache,
}

impl Solver2D {
    pub fn new(params: SolverParams) -> Result<Self> {
        Self::with_workers(params, 1)
    }

    pub fn with_workers(params: SolverParams, workers: usize) -> Result<Self> {
        params.validate()?;
        Ok(Solver2D {
            params,
            workers: Workers::new(workers),
            potential_ops: ShiftedCache::default(),
            maxwell_ops: ShiftedCache::default(),
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
    pub fn step_subsystem1(&mut self, state: &mut State2D, dt: f64) -> Result<usize> {
        if dt == 0.0 {
            return Ok(0);
        }
        let cx = &*state.complex;
        let f = &state.fields;
        let hbar = state.hbar;
        let eps = self.params.degeneracy_eps;
        let n1 = cx.dim1();
        let n0 = cx.dim0();
        let ens = &state.ensemble;
        let mut tracks: Vec<Track> = (0..ens.len())
            .map(|a| Track {
                x0: ens.x[a],
                p0: ens.p[a],
                x: ens.x[a],
                p: ens.p[a],
                s: ens.s[a],
                w: ens.w[a],
            })
            .collect();
        let e_n = f.exy.clone();
        let mut e_k = e_n.clone();
        let az = f.az.as_slice();
        let mut last = f64::INFINITY;

        for iter in 1..=self.params.max_iter {
            let parts = self.workers.map_blocks(&mut tracks, |_, chunk| {
                let mut j = DVector::zeros(n1);
                let (mut change, mut size) = (0.0_f64, 0.0_f64);
                for t in chunk.iter_mut() {
                    let a1 = cx.eval_0form(az, t.x);
                    let a1_sq = a1 * a1;
                    let denom = gamma_2d(t.p0, a1_sq) + gamma_2d(t.p, a1_sq);
                    let x_new = [
                        t.x0[0] + dt * (t.p0[0] + t.p[0]) / denom,
                        t.x0[1] + dt * (t.p0[1] + t.p[1]) / denom,
                    ];
                    let scale = [t.w * (x_new[0] - t.x0[0]), t.w * (x_new[1] - t.x0[1])];
                    cx.segment_average_1form(t.x0, x_new, eps, |i, v| j[i] += scale[(i >= n0) as usize] * v);
                    for d in 0..2 {
                        change = change.max((x_new[d] - t.x[d]).abs());
                        size = size.max(x_new[d].abs());
                    }
                    t.x = x_new;
                }
                (j, change, size)
            });
            let (j, dx_change, x_size) = pairwise(parts, |a, b| (a.0 + b.0, a.1.max(b.1), a.2.max(b.2)))
                .unwrap_or((DVector::zeros(n1), 0.0, 0.0));
            let e_new = &e_n - cx.solve_m1(&j);
            let e_mid = (&e_n + &e_new) * 0.5;

            let parts = self.workers.map_blocks(&mut tracks, |_, chunk| {
                let (mut change, mut size) = (0.0_f64, 0.0_f64);
                for t in chunk.iter_mut() {
                    let mut e_avg = [0.0; 2];
                    cx.segment_average_1form(t.x0, t.x, eps, |i, v| e_avg[(i >= n0) as usize] += e_mid[i] * v);
                    let force = position_quotient_2d(cx, f, hbar, t.s, t.p0, t.x0, t.x, eps);
                    for d in 0..2 {
                        let p_new = t.p0[d] + dt * (e_avg[d] - force[d]);
                        change = change.max((p_new - t.p[d]).abs());
                        size = size.max(p_new.abs());
                        t.p[d] = p_new;
                    }
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
                let ens = &mut state.ensemble;
                for (a, t) in tracks.iter().enumerate() {
                    ens.x[a] = cx.wrap(t.x);
                    ens.p[a] = t.p;
                }
                state.fields.exy = e_k;
                return Ok(iter);
            }
        }
        Err(self.non_convergence("subsystem I", last))
    }

    /// Subsystem II: rotate momenta clockwise by `dt B_z / gamma` and spins
    /// about `B`, both exactly.
    pub fn step_subsystem2(&mut self, state: &mut State2D, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let cx = &*state.complex;
        let f = &state.fields;
        let ens = &mut state.ensemble;
        let x = &ens.x;
        let mut ps: Vec<([f64; 2], [f64; 3])> = ens.p.iter().copied().zip(ens.s.iter().copied()).collect();
        self.workers.map_blocks(&mut ps, |offset, chunk| {
            for (i, (p, s)) in chunk.iter_mut().enumerate() {
                let m = MagneticSample::sample(cx, f, x[offset + i], 1);
                let g = gamma_2d(*p, m.az * m.az);
                *p = rotate_clockwise(*p, dt * m.bz / g);
                *s = rodrigues(m.field(), *s, dt);
            }
        });
        for (a, (p, s)) in ps.into_iter().enumerate() {
            ens.p[a] = p;
            ens.s[a] = s;
        }
    }

    /// Subsystem III over `dt`; returns the number of fixed-point sweeps.
    pub fn step_subsystem3(&mut self, state: &mut State2D, dt: f64) -> Result<usize> {
        if dt == 0.0 {
            return Ok(0);
        }
        let cx = &*state.complex;
        let n = cx.dim0();
        let [c1, c2] = cx.n();
        let ens = &state.ensemble;
        let f = &state.fields;

        let bases: Vec<_> = ens.x.iter().map(|x| cx.basis(Form2::Zero, [0, 0], *x)).collect();
        let a_n: Vec<f64> = bases.iter().map(|b| b.dot(c1, c2, f.az.as_slice())).collect();
        let k = &cx.stiffness_star;
        // increment form, as in the 1D transverse step
        let mut rhs = k * (&f.az * dt - &f.ez * (0.5 * dt * dt));
        if state.hbar != 0.0 {
            rhs += in_plane_spin_load(cx, ens, &self.workers) * (dt * state.hbar);
        }
        let op: &SpdSolver = self.potential_ops.get_or_factor(&cx.m0, k, 0.25 * dt * dt, "M0 + dt^2/4 K*")?;

        let mut e = f.ez.clone();
        let mut last = f64::INFINITY;
        for iter in 1..=self.params.max_iter {
            let a_k = &f.az - (&f.ez + &e) * (0.5 * dt);
            let parts = self.workers.map_ranges(ens.len(), |range| {
                let mut nl = DVector::zeros(n);
                for a in range {
                    let b = &bases[a];
                    let ak = b.dot(c1, c2, a_k.as_slice());
                    let an = a_n[a];
                    let p = ens.p[a];
                    let c = ens.w[a] * (ak + an) / (gamma_2d(p, an * an) + gamma_2d(p, ak * ak));
                    for (j, v) in b.iter(c1, c2) {
                        nl[j] += c * v;
                    }
                }
                nl
            });
            let nl = pairwise(parts, |a, b| a + b).unwrap_or_else(|| DVector::zeros(n));
            let e_new = &f.ez + op.solve(&(&rhs + nl * dt));
            let residual = scaled_change(e_new.as_slice(), e.as_slice());
            e = e_new;
            last = residual;
            if residual <= self.params.tol {
                let f = &mut state.fields;
                f.az -= (&f.ez + &e) * (0.5 * dt);
                f.ez = e;
                return Ok(iter);
            }
        }
        Err(self.non_convergence("subsystem III", last))
    }

    /// Subsystem IV: implicit midpoint Maxwell step for `(e_xy, b_z)`.
    ///
    /// The system is linear and is solved with the exact operator, so a
    /// single sweep converges.
    pub fn step_subsystem4(&mut self, state: &mut State2D, dt: f64) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let cx = &*state.complex;
        let f = &state.fields;
        let ct = cx.c.transpose();
        let mut source = &cx.m2 * &f.bz;
        if state.hbar != 0.0 {
            source += spin_density_2form(cx, &state.ensemble, &self.workers) * state.hbar;
        }
        let rhs = &ct * source * dt - &cx.curl_curl * &f.exy * (0.5 * dt * dt);
        let op = self.maxwell_ops.get_or_factor(&cx.m1, &cx.curl_curl, 0.25 * dt * dt, "M1 + dt^2/4 C^T M2 C")?;
        let e_new = &f.exy + op.solve(&rhs);
        let f = &mut state.fields;
        f.bz -= &cx.c * (&f.exy + &e_new) * (0.5 * dt);
        f.exy = e_new;
        Ok(())
    }

    /// One Lie–Trotter step `I II III IV` with the full `dt` each.
    ///
    /// A failing subsystem leaves the earlier ones applied.
    pub fn lie_trotter_step(&mut self, state: &mut State2D, dt: f64) -> Result<()> {
        self.step_subsystem1(state, dt)?;
        self.step_subsystem2(state, dt);
        self.step_subsystem3(state, dt)?;
        self.step_subsystem4(state, dt)?;
        state.time += dt;
        Ok(())
    }
}

/// `sum_a w_a (s_x dLambda0/dx2 - s_y dLambda0/dx1)(x_a)`, the gradient of
/// the in-plane Zeeman energy with respect to `a_z`.
pub fn in_plane_spin_load(cx: &DeRhamComplex2D, ens: &Ensemble2D, workers: &Workers) -> DVector<f64> {
    let n = cx.dim0();
    let [c1, c2] = cx.n();
    let parts = workers.map_ranges(ens.len(), |range| {
        let mut q = DVector::zeros(n);
        for a in range {
            let (x, s, w) = (ens.x[a], ens.s[a], ens.w[a]);
            for (j, v) in cx.basis(Form2::Zero, [0, 1], x).iter(c1, c2) {
                q[j] += w * s[0] * v;
            }
            for (j, v) in cx.basis(Form2::Zero, [1, 0], x).iter(c1, c2) {
                q[j] -= w * s[1] * v;
            }
        }
        q
    });
    pairwise(parts, |a, b| a + b).unwrap_or_else(|| DVector::zeros(n))
}

/// `sum_a w_a s_{a,z} Lambda2(x_a)`.
pub fn spin_density_2form(cx: &DeRhamComplex2D, ens: &Ensemble2D, workers: &Workers) -> DVector<f64> {
    let n = cx.dim2();
    let [c1, c2] = cx.n();
    let parts = workers.map_ranges(ens.len(), |range| {
        let mut q = DVector::zeros(n);
        for a in range {
            let c = ens.w[a] * ens.s[a][2];
            for (j, v) in cx.basis(Form2::Two, [0, 0], ens.x[a]).iter(c1, c2) {
                q[j] += c * v;
            }
        }
        q
    });
    pairwise(parts, |a, b| a + b).unwrap_or_else(|| DVector::zeros(n))
}

/// Deposited charge `rho_j = sum_a w_a Lambda0_j(x_a)`.
pub fn charge_density_2d(cx: &DeRhamComplex2D, ens: &Ensemble2D) -> DVector<f64> {
    let [c1, c2] = cx.n();
    let mut rho = DVector::zeros(cx.dim0());
    for (x, w) in ens.x.iter().zip(&ens.w) {
        for (j, v) in cx.basis(Form2::Zero, [0, 0], *x).iter(c1, c2) {
            rho[j] += w * v;
        }
    }
    rho
}

/// Set `e_xy` to the gradient field satisfying the discrete Gauss law.
pub fn solve_initial_poisson_2d(state: &mut State2D) -> Result<()> {
    let cx = &*state.complex;
    let rho = charge_density_2d(cx, &state.ensemble);
    let mismatch = rho.sum() - cx.background.sum();
    if mismatch.abs() > 1e-10 {
        return Err(Error::config(
            "particles",
            format!("total charge differs from the background by {mismatch:e}"),
        ));
    }
    let source = &rho - &cx.background;
    if source.amax() == 0.0 {
        state.fields.exy.fill(0.0);
        return Ok(());
    }
    state.fields.exy = potential_field(&cx.stiffness, &cx.g, &source)?;
    Ok(())
}

/// Kinetic energy `sum_a w_a (gamma_a - 1)`.
pub fn kinetic_energy_2d(state: &State2D) -> f64 {
    let cx = &*state.complex;
    let ens = &state.ensemble;
    (0..ens.len())
        .map(|a| {
            let p = ens.p[a];
            let az = cx.eval_0form(state.fields.az.as_slice(), ens.x[a]);
            ens.w[a] * gamma_minus_one(p[0] * p[0] + p[1] * p[1] + az * az)
        })
        .sum()
}
