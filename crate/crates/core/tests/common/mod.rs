#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use spinpic::derham::{build_complex_1d, build_complex_2d};
use spinpic::particles::{sample_maxwellian_1d, sample_maxwellian_2d};
use spinpic::solver1d::{solve_initial_poisson, State1D};
use spinpic::solver2d::{solve_initial_poisson_2d, State2D};

pub const E0: f64 = 1.7320508075688772;
pub const TEMPERATURE: f64 = 3.0 / 511.0;

pub fn pump_length() -> f64 {
    2.0 * PI * 2f64.sqrt()
}

/// Circularly polarized pump on a Maxwellian plasma.
pub fn pump_state_1d(cells: usize, count: usize, hbar: f64, seed: u64) -> State1D {
    let length = pump_length();
    let k = 2.0 * PI / length;
    let cx = Arc::new(build_complex_1d(cells, 3, length).unwrap());
    let mut state = State1D::new(cx.clone(), hbar);
    if count > 0 {
        state.ensemble = sample_maxwellian_1d(count, TEMPERATURE, length, seed).unwrap();
        if hbar > 0.0 {
            state.ensemble.init_spin_delta([0.0, 0.0, 1.0]).unwrap();
        }
    }
    let f = &mut state.fields;
    f.ey = cx.l2_project_0form(|x| E0 * (k * x).cos());
    f.ez = cx.l2_project_0form(|x| E0 * (k * x).sin());
    f.ay = cx.l2_project_0form(|x| -E0 * (k * x).sin());
    f.az = cx.l2_project_0form(|x| E0 * (k * x).cos());
    if count > 0 {
        solve_initial_poisson(&mut state).unwrap();
    }
    state
}

/// Small 2D plasma with a transverse pump in `E_z`, `A_z`.
pub fn pump_state_2d(cells: usize, count: usize, hbar: f64, seed: u64) -> State2D {
    let length = 2.0 * PI;
    let cx = Arc::new(build_complex_2d([cells, cells], [2, 2], [length, length]).unwrap());
    let mut state = State2D::new(cx.clone(), hbar);
    if count > 0 {
        state.ensemble = sample_maxwellian_2d(count, TEMPERATURE, [length, length], seed).unwrap();
        if hbar > 0.0 {
            state.ensemble.init_spin_delta([0.0, 0.0, 1.0]).unwrap();
        }
    }
    let amp = 0.5;
    let f = &mut state.fields;
    f.ez = cx.l2_project_0form(|x| amp * x[0].sin());
    f.az = cx.l2_project_0form(|x| amp * x[0].cos());
    if count > 0 {
        solve_initial_poisson_2d(&mut state).unwrap();
    }
    state
}

/// Seeded uniform deviates for fixtures.
pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }

    pub fn vector(&mut self, n: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(n, |_, _| self.uniform(-scale, scale))
    }

    pub fn unit3(&mut self) -> [f64; 3] {
        loop {
            let v = [self.uniform(-1.0, 1.0), self.uniform(-1.0, 1.0), self.uniform(-1.0, 1.0)];
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if n > 0.1 && n <= 1.0 {
                return [v[0] / n, v[1] / n, v[2] / n];
            }
        }
    }
}

/// Cardinal B-spline of degree `q` on `[0, q + 1)` by the Cox-de Boor
/// recursion.
pub fn cardinal(q: usize, u: f64) -> f64 {
    if q == 0 {
        return if (0.0..1.0).contains(&u) { 1.0 } else { 0.0 };
    }
    let qf = q as f64;
    (u * cardinal(q - 1, u) + (qf + 1.0 - u) * cardinal(q - 1, u - 1.0)) / qf
}

/// Derivative of [`cardinal`] in `u`.
pub fn cardinal_derivative(q: usize, u: f64) -> f64 {
    if q == 0 {
        return 0.0;
    }
    cardinal(q - 1, u) - cardinal(q - 1, u - 1.0)
}

/// Periodic basis function `j` of degree `q` on `cells` cells of width `dx`.
pub fn periodic_bspline(q: usize, j: usize, cells: usize, dx: f64, x: f64) -> f64 {
    let m = cells as f64;
    let u = (x / dx - j as f64).rem_euclid(m);
    // the support may wrap around once
    cardinal(q, u) + cardinal(q, u - m) + cardinal(q, u + m)
}
