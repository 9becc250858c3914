//! Analytic per-sample gradients against central finite differences.

use d2p2_core::{Dataset, Objective, ParamVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const POINTS: usize = 10;
const COORDS: usize = 100;
const STEP: f64 = 1e-5;
/// Denominator floor so coordinates with a vanishing gradient are compared
/// on an absolute scale instead of amplifying rounding noise.
const FLOOR: f64 = 1e-6;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng)).collect()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FLOOR)
}

/// Worst relative error over `POINTS` random iterates and `COORDS` random coordinates each.
fn worst_error(obj: &Objective, data: &Dataset, point_scale: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = obj.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..POINTS {
        let x = ParamVector::new(gaussian(&mut rng, d, point_scale)).unwrap();
        let idx = rng.random_range(0..data.len());
        let coords = index::sample(&mut rng, d, COORDS.min(d)).into_vec();
        let analytic = obj.per_sample_gradient(&x, data, idx).unwrap();
        let numeric = obj.finite_diff_coordinates(&x, data, idx, STEP, coords.iter().copied()).unwrap();
        for (&c, fd) in coords.iter().zip(numeric) {
            worst = worst.max(rel_err(analytic[c], fd));
        }
    }
    worst
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, width: usize, scale: f64) -> Vec<f64> {
    gaussian(rng, n * width, scale)
}

#[test]
fn quadratic_matches_finite_differences() {
    let d = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let obj = Objective::Quadratic { center: gaussian(&mut rng, d, 1.0), curvature: 2.5 };
    let data = Dataset::new(random_rows(&mut rng, 20, d, 0.3), d, vec![0.0; 20], None).unwrap();
    let err = worst_error(&obj, &data, 1.0, 1);
    assert!(err <= 1e-5, "quadratic worst relative error {err:e}");
}

#[test]
fn logistic_matches_finite_differences() {
    let d = 120;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let features = random_rows(&mut rng, 40, d, 1.0 / (d as f64).sqrt());
    let labels = (0..40).map(|i| (i % 2) as f64).collect();
    let data = Dataset::new(features, d, labels, Some(2)).unwrap();
    let err = worst_error(&Objective::Logistic { dim: d }, &data, 1.0, 2);
    assert!(err <= 1e-5, "logistic worst relative error {err:e}");
}

#[test]
fn mlp_matches_finite_differences() {
    let (inputs, hidden, classes) = (20, 8, 3);
    let obj = Objective::mlp(inputs, hidden, classes);
    assert!(obj.dim() >= 100);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let features = random_rows(&mut rng, 30, inputs, 1.0);
    let labels = (0..30).map(|i| (i % classes) as f64).collect();
    let data = Dataset::new(features, inputs, labels, Some(classes)).unwrap();
    let err = worst_error(&obj, &data, 0.3, 3);
    assert!(err <= 1e-4, "mlp worst relative error {err:e}");
}

#[test]
fn full_gradient_is_mean_of_per_sample() {
    let d = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let data = Dataset::new(random_rows(&mut rng, 9, d, 1.0), d, vec![1.0; 9], Some(2)).unwrap();
    let obj = Objective::Logistic { dim: d };
    let x = ParamVector::new(gaussian(&mut rng, d, 1.0)).unwrap();
    let full = obj.full_gradient(&x, &data).unwrap();
    for (j, g) in full.iter().enumerate() {
        let mean = (0..9).map(|i| obj.per_sample_gradient(&x, &data, i).unwrap()[j]).sum::<f64>() / 9.0;
        assert!((g - mean).abs() <= 1e-14, "coordinate {j}");
    }
}
