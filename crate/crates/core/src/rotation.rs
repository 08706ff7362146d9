//! Exact rotations for the spin and magnetic subsystems.

/// `a x b`.
pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Flow of `ds/dt = r x s` over time `dt`, i.e. `exp(dt * hat(r)) s`
/// by Rodrigues' formula. A zero axis gives the identity.
pub fn rodrigues(r: [f64; 3], s: [f64; 3], dt: f64) -> [f64; 3] {
    let theta = dt * dot3(r, r).sqrt();
    let rs = cross(r, s);
    let rrs = cross(r, rs);
    let a = dt * sinc(theta);
    let half = sinc(0.5 * theta);
    let b = 0.5 * dt * dt * half * half;
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = s[i] + a * rs[i] + b * rrs[i];
    }
    out
}

/// Clockwise rotation of a plane vector by `theta`:
/// the flow of `dp/dt = omega (p_y, -p_x)` with `theta = omega * dt`.
pub fn rotate_clockwise(p: [f64; 2], theta: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [p[0] * c + p[1] * s, -p[0] * s + p[1] * c]
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_axis_is_identity() {
        let s = [0.3, -0.4, 0.5];
        assert_eq!(rodrigues([0.0; 3], s, 0.7), s);
    }

    #[test]
    fn quarter_turn_about_y() {
        let omega = 2.0;
        let s = rodrigues([0.0, omega, 0.0], [1.0, 0.0, 0.0], FRAC_PI_2 / omega);
        assert!(s[0].abs() < 1e-15 && s[1].abs() < 1e-15 && (s[2] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn clockwise_quarter_turn() {
        let p = rotate_clockwise([1.0, 0.0], FRAC_PI_2);
        assert!(p[0].abs() < 1e-15 && (p[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_angle_matches_series() {
        let r = [1e-7, -2e-7, 3e-7];
        let s = [0.0, 0.6, 0.8];
        let out = rodrigues(r, s, 0.5);
        let rs = cross(r, s);
        for i in 0..3 {
            assert!((out[i] - (s[i] + 0.5 * rs[i])).abs() < 1e-13);
        }
    }
}
