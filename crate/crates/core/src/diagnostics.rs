//! Monitored quantities: discrete energies, Gauss-law residuals, Fourier
//! mode amplitudes and spin moments.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::derham::{DeRhamComplex1D, DeRhamComplex2D, Form2};
use crate::discrete_gradient::gamma_minus_one;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, quadratic_form};
use crate::particles::ParticleEnsemble;
use crate::solver1d::{charge_density_1d, State1D, Transverse};
use crate::solver2d::{charge_density_2d, kinetic_energy_2d, MagneticSample, State2D};

/// Energy of a 1D state split by contribution.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyParts1D {
    pub kinetic: f64,
    pub ex: f64,
    pub ey: f64,
    pub ez: f64,
    pub ay: f64,
    pub az: f64,
    pub zeeman: f64,
}

impl EnergyParts1D {
    pub fn total(&self) -> f64 {
        self.kinetic + self.ex + self.ey + self.ez + self.ay + self.az + self.zeeman
    }
}

pub fn energy_parts_1d(state: &State1D) -> EnergyParts1D {
    let cx = &*state.complex;
    let f = &state.fields;
    let ens = &state.ensemble;
    let (ay, az) = (f.ay.as_slice(), f.az.as_slice());
    let mut kinetic = 0.0;
    let mut zeeman = 0.0;
    for a in 0..ens.len() {
        let t = Transverse::sample(&cx.space, ay, az, ens.x[a][0], 1);
        let p = ens.p[a][0];
        kinetic += ens.w[a] * gamma_minus_one(p * p + t.a_sq());
        zeeman += ens.w[a] * t.zeeman(ens.s[a]);
    }
    EnergyParts1D {
        kinetic,
        ex: 0.5 * quadratic_form(&cx.m1, &f.ex),
        ey: 0.5 * quadratic_form(&cx.m0, &f.ey),
        ez: 0.5 * quadratic_form(&cx.m0, &f.ez),
        ay: 0.5 * quadratic_form(&cx.stiffness, &f.ay),
        az: 0.5 * quadratic_form(&cx.stiffness, &f.az),
        zeeman: state.hbar * zeeman,
    }
}

/// Discrete Hamiltonian of the 1D model.
pub fn hamiltonian_1d(state: &State1D) -> f64 {
    energy_parts_1d(state).total()
}

/// Discrete Hamiltonian of the 2D model.
pub fn hamiltonian_2d(state: &State2D) -> f64 {
    let cx = &*state.complex;
    let f = &state.fields;
    let ens = &state.ensemble;
    let mut zeeman = 0.0;
    if state.hbar != 0.0 {
        for a in 0..ens.len() {
            let m = MagneticSample::sample(cx, f, ens.x[a], 1);
            let b = m.field();
            let s = ens.s[a];
            zeeman += ens.w[a] * (s[0] * b[0] + s[1] * b[1] + s[2] * b[2]);
        }
    }
    kinetic_energy_2d(state)
        + 0.5 * quadratic_form(&cx.m1, &f.exy)
        + 0.5 * quadratic_form(&cx.m2, &f.bz)
        + 0.5 * quadratic_form(&cx.m0, &f.ez)
        + 0.5 * quadratic_form(&cx.stiffness_star, &f.az)
        + state.hbar * zeeman
}

/// `|H - H0| / |H0|`, or the absolute difference when `|H0| < 1e-14`.
pub fn relative_energy_error(h: f64, h0: f64) -> f64 {
    if h0.abs() < 1e-14 {
        (h - h0).abs()
    } else {
        ((h - h0) / h0).abs()
    }
}

/// Gauss-law residual `r = G^T M1 e_x + rho - b` and its max norm.
pub fn poisson_residual_1d(state: &State1D) -> (DVector<f64>, f64) {
    let cx = &*state.complex;
    let r = cx.g.transpose() * (&cx.m1 * &state.fields.ex) + charge_density_1d(cx, &state.ensemble) - &cx.background;
    let norm = max_abs(r.as_slice());
    (r, norm)
}

/// 2D Gauss-law residual `r = G^T M1 e_xy + rho - b` and its max norm.
pub fn poisson_residual_2d(state: &State2D) -> (DVector<f64>, f64) {
    let cx = &*state.complex;
    let r = cx.g.transpose() * (&cx.m1 * &state.fields.exy) + charge_density_2d(cx, &state.ensemble) - &cx.background;
    let norm = max_abs(r.as_slice());
    (r, norm)
}

/// Which spline space a 1D coefficient vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormDegree {
    Zero,
    One,
}

/// Amplitude of Fourier mode `m` of a sampled signal: `(2/M)|c_m|`, or
/// `(1/M)|c_0|` for the mean, so a cosine of amplitude `A` reports `A`.
pub fn dft_amplitude(samples: &[f64], m: usize) -> f64 {
    let len = samples.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (j, v) in samples.iter().enumerate() {
        // reduce the phase index first to keep the angle small
        let phase = 2.0 * PI * ((j * m) % len) as f64 / len as f64;
        re += v * phase.cos();
        im -= v * phase.sin();
    }
    let scale = if m == 0 || 2 * m == len { 1.0 } else { 2.0 };
    scale * re.hypot(im) / len as f64
}

/// Amplitude of mode `m` of a 1D spline field sampled at the `M` grid
/// points.
pub fn fourier_mode_amplitude(cx: &DeRhamComplex1D, coeffs: &[f64], form: FormDegree, m: usize) -> Result<f64> {
    let cells = cx.dim();
    if m > cells / 2 {
        return Err(Error::config("output.modes", format!("mode {m} exceeds M/2 = {}", cells / 2)));
    }
    let dx = cx.space.dx();
    let samples: Vec<f64> = (0..cells)
        .map(|j| {
            let x = j as f64 * dx;
            match form {
                FormDegree::Zero => cx.space.eval_0form(coeffs, x),
                FormDegree::One => cx.space.eval_1form(coeffs, x),
            }
        })
        .collect();
    Ok(dft_amplitude(&samples, m))
}

/// Amplitude of the 2D mode `(m1, m2)` of one scalar field of type `form`
/// sampled on the grid; same normalization as the 1D version per axis
/// (a product of cosines of amplitude `A` reports `A`).
pub fn fourier_mode_amplitude_2d(
    cx: &DeRhamComplex2D,
    coeffs: &[f64],
    form: Form2,
    modes: [usize; 2],
) -> Result<f64> {
    let [n1, n2] = cx.n();
    if modes[0] > n1 / 2 || modes[1] > n2 / 2 {
        return Err(Error::config("output.modes", format!("mode {modes:?} exceeds the grid Nyquist limit")));
    }
    let dx = [cx.axes[0].dx(), cx.axes[1].dx()];
    let (mut re, mut im) = (0.0, 0.0);
    for i in 0..n1 {
        for j in 0..n2 {
            let v = cx.eval(form, [0, 0], coeffs, [i as f64 * dx[0], j as f64 * dx[1]]);
            let phase = 2.0 * PI
                * (((i * modes[0]) % n1) as f64 / n1 as f64 + ((j * modes[1]) % n2) as f64 / n2 as f64);
            re += v * phase.cos();
            im -= v * phase.sin();
        }
    }
    let axis_scale = |m: usize, n: usize| if m == 0 || 2 * m == n { 1.0 } else { 2.0 };
    Ok(axis_scale(modes[0], n1) * axis_scale(modes[1], n2) * re.hypot(im) / (n1 * n2) as f64)
}

/// `(sum w s_x, sum w s_y, sum w s_z)`.
pub fn spin_moments<const D: usize>(ens: &ParticleEnsemble<D>) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (s, w) in ens.s.iter().zip(&ens.w) {
        for c in 0..3 {
            out[c] += w * s[c];
        }
    }
    out
}

/// One sample of every monitored quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub time: f64,
    pub hamiltonian: f64,
    pub rel_energy_err: f64,
    pub poisson_res_inf: f64,
    /// `(column name, amplitude)` in output order.
    pub mode_amp: Vec<(String, f64)>,
    pub spin_moments: [f64; 3],
}
