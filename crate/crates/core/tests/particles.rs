use statrs::distribution::{ContinuousCDF, Normal};

use spinpic::particles::{sample_maxwellian_1d, sample_maxwellian_2d};
use spinpic::Error;

#[test]
fn momenta_have_maxwellian_moments() {
    let (n, temperature) = (20_000, 0.01);
    let ens = sample_maxwellian_1d(n, temperature, 5.0, 3).unwrap();
    let p: Vec<f64> = ens.p.iter().map(|p| p[0]).collect();
    let mean = p.iter().sum::<f64>() / n as f64;
    let var = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sigma = temperature.sqrt();
    assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "{mean}");
    assert!((var / temperature - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "{var}");

    // fraction within one standard deviation
    let inside = p.iter().filter(|v| v.abs() < sigma).count() as f64 / n as f64;
    let want = Normal::new(0.0, 1.0).unwrap().cdf(1.0) * 2.0 - 1.0;
    assert!((inside - want).abs() < 0.015);
}

#[test]
fn positions_are_stratified() {
    let (n, length) = (1000, 2.5);
    let ens = sample_maxwellian_1d(n, 0.01, length, 7).unwrap();
    let h = length / n as f64;
    for (a, x) in ens.x.iter().enumerate() {
        assert!(x[0] >= a as f64 * h && x[0] < (a + 1) as f64 * h + 1e-15);
    }
    assert!((ens.total_weight() - length).abs() < 1e-12);
    assert!(ens.s.iter().all(|s| *s == [0.0; 3]));
}

#[test]
fn sampling_is_deterministic_per_seed() {
    let a = sample_maxwellian_1d(300, 0.02, 1.0, 11).unwrap();
    let b = sample_maxwellian_1d(300, 0.02, 1.0, 11).unwrap();
    let c = sample_maxwellian_1d(300, 0.02, 1.0, 12).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.p, c.p);
    let a2 = sample_maxwellian_2d(300, 0.02, [1.0, 2.0], 11).unwrap();
    assert_eq!(a2, sample_maxwellian_2d(300, 0.02, [1.0, 2.0], 11).unwrap());
}

#[test]
fn two_dimensional_lattice_fills_the_box() {
    let lengths = [2.0, 3.0];
    let ens = sample_maxwellian_2d(400, 0.01, lengths, 5).unwrap();
    assert_eq!(ens.len(), 400);
    assert!((ens.total_weight() - 6.0).abs() < 1e-12);
    // 20 x 20 lattice, one particle per lattice cell
    let mut seen = vec![false; 400];
    for x in &ens.x {
        let i = (x[0] / 0.1) as usize;
        let j = (x[1] / 0.15) as usize;
        assert!(!seen[i + 20 * j]);
        seen[i + 20 * j] = true;
    }
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(matches!(sample_maxwellian_1d(0, 0.1, 1.0, 0), Err(Error::Config { .. })));
    assert!(matches!(sample_maxwellian_1d(10, 0.0, 1.0, 0), Err(Error::Config { .. })));
    assert!(matches!(sample_maxwellian_2d(10, -1.0, [1.0, 1.0], 0), Err(Error::Config { .. })));
}
