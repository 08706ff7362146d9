//! Two-point (discrete) gradients of the relativistic kinetic energy.
//!
//! For a function `H` a discrete gradient `g(y0, y1)` satisfies
//! `(y1 - y0) * g = H(y1) - H(y0)`. The quotients here are written so that
//! the cancellation in `H(y1) - H(y0)` happens analytically: differences of
//! square roots are turned into differences of squares.

/// `sqrt(1 + p^2 + |A_perp|^2)`.
pub fn gamma_1d(p: f64, aperp_sq: f64) -> f64 {
    (1.0 + p * p + aperp_sq).sqrt()
}

/// `sqrt(1 + |p|^2 + A_z^2)`.
pub fn gamma_2d(p: [f64; 2], az_sq: f64) -> f64 {
    (1.0 + p[0] * p[0] + p[1] * p[1] + az_sq).sqrt()
}

/// `gamma - 1` without cancellation for small arguments.
pub fn gamma_minus_one(norm_sq: f64) -> f64 {
    norm_sq / ((1.0 + norm_sq).sqrt() + 1.0)
}

/// Momentum discrete gradient of `gamma(p, A)` at fixed `A`:
/// `(p0 + p1) / (gamma(p0) + gamma(p1))`.
pub fn dg_kinetic_p(p0: f64, p1: f64, aperp_sq: f64) -> f64 {
    (p0 + p1) / (gamma_1d(p0, aperp_sq) + gamma_1d(p1, aperp_sq))
}

/// Position quotient of `gamma(p, A(x))` at fixed `p`, per unit weight.
///
/// `a0`, `a1` are `A_perp` at the segment ends and `slope` the segment
/// average of `dA_perp/dx`, so that `slope * (x1 - x0) = a1 - a0` and the
/// result times `x1 - x0` equals `gamma(p, a1) - gamma(p, a0)`.
pub fn dg_kinetic_x(p: f64, a0: [f64; 2], a1: [f64; 2], slope: [f64; 2]) -> f64 {
    let sq = |a: [f64; 2]| a[0] * a[0] + a[1] * a[1];
    ((a0[0] + a1[0]) * slope[0] + (a0[1] + a1[1]) * slope[1]) / (gamma_1d(p, sq(a0)) + gamma_1d(p, sq(a1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_1d(0.0, 0.0), 1.0);
        assert!((gamma_1d(3f64.sqrt(), 0.0) - 2.0).abs() < 1e-15);
        assert_eq!(gamma_1d(1.0, 2.0), 2.0);
        assert_eq!(gamma_2d([0.0, 0.0], 0.0), 1.0);
        assert_eq!(gamma_2d([1.0, 1.0], 1.0), 2.0);
        assert!((gamma_2d([3f64.sqrt(), 0.0], 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn momentum_gradient_examples() {
        assert_eq!(dg_kinetic_p(0.0, 0.0, 0.7), 0.0);
        let g = dg_kinetic_p(0.0, 3f64.sqrt(), 0.0);
        assert!((g - 3f64.sqrt() / 3.0).abs() < 1e-16);
        assert!((3f64.sqrt() * g - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_minus_one_small() {
        let v: f64 = 1e-20;
        assert_eq!(gamma_minus_one(v), 0.5e-20);
    }
}
