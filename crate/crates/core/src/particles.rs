//! Marker particles and initial-condition samplers.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Particles in `D` space dimensions. Momenta have as many components as
/// positions; spins are always 3-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble<const D: usize> {
    pub x: Vec<[f64; D]>,
    pub p: Vec<[f64; D]>,
    pub s: Vec<[f64; 3]>,
    pub w: Vec<f64>,
}

pub type Ensemble1D = ParticleEnsemble<1>;
pub type Ensemble2D = ParticleEnsemble<2>;

impl<const D: usize> ParticleEnsemble<D> {
    pub fn empty() -> Self {
        ParticleEnsemble {
            x: Vec::new(),
            p: Vec::new(),
            s: Vec::new(),
            w: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn push(&mut self, x: [f64; D], p: [f64; D], s: [f64; 3], w: f64) {
        self.x.push(x);
        self.p.push(p);
        self.s.push(s);
        self.w.push(w);
    }

    pub fn total_weight(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Set every spin to `direction`, which must be a unit vector.
    pub fn init_spin_delta(&mut self, direction: [f64; 3]) -> Result<()> {
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::config(
                "particles.spin_direction",
                format!("spin direction must have unit length, got {norm}"),
            ));
        }
        self.s.iter_mut().for_each(|s| *s = direction);
        Ok(())
    }
}

/// Uniform deviates for particle `index`, independent of any other particle.
fn particle_stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn unit_open(rng: &mut ChaCha8Rng) -> f64 {
    // 53 random bits mapped into (0, 1)
    ((rng.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

fn check_common(count: usize, temperature: f64) -> Result<Normal> {
    if count == 0 {
        return Err(Error::config("particles.count", "need at least one particle"));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::config("particles.temperature", "temperature must be positive"));
    }
    Normal::new(0.0, temperature.sqrt()).map_err(|e| Error::config("particles.temperature", e.to_string()))
}

/// Maxwellian with temperature `temperature` on `[0, length)`: particle
/// `a` sits at `(a + u) * length / count` and has momentum drawn by inverse
/// CDF. Spins are zero.
pub fn sample_maxwellian_1d(count: usize, temperature: f64, length: f64, seed: u64) -> Result<Ensemble1D> {
    let normal = check_common(count, temperature)?;
    let w = length / count as f64;
    let mut ens = Ensemble1D::empty();
    for a in 0..count {
        let mut rng = particle_stream(seed, a);
        let u = unit_open(&mut rng);
        let x = ((a as f64 + u) * w).min(length * (1.0 - f64::EPSILON));
        let p = normal.inverse_cdf(unit_open(&mut rng));
        ens.push([x], [p], [0.0; 3], w);
    }
    Ok(ens)
}

/// Two-dimensional analogue of [`sample_maxwellian_1d`]. Particles fill an
/// `n1 x n2` lattice with `n1 = floor(sqrt(count))`, one jittered particle
/// per lattice cell in row-major order; momentum components are independent.
pub fn sample_maxwellian_2d(count: usize, temperature: f64, lengths: [f64; 2], seed: u64) -> Result<Ensemble2D> {
    let normal = check_common(count, temperature)?;
    let n1 = ((count as f64).sqrt().floor() as usize).max(1);
    let n2 = count.div_ceil(n1);
    let h = [lengths[0] / n1 as f64, lengths[1] / n2 as f64];
    let w = lengths[0] * lengths[1] / count as f64;
    let mut ens = Ensemble2D::empty();
    for a in 0..count {
        let mut rng = particle_stream(seed, a);
        let cell = [(a % n1) as f64, (a / n1) as f64];
        let mut x = [0.0; 2];
        for d in 0..2 {
            x[d] = ((cell[d] + unit_open(&mut rng)) * h[d]).min(lengths[d] * (1.0 - f64::EPSILON));
        }
        let p = [normal.inverse_cdf(unit_open(&mut rng)), normal.inverse_cdf(unit_open(&mut rng))];
        ens.push(x, p, [0.0; 3], w);
    }
    Ok(ens)
}
