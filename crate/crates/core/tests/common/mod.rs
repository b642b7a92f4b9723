#![allow(dead_code)]

use std::sync::Arc;

use contmeas::fock::{pure_density, DensityOperator, TruncatedSpace};
use contmeas::measurement::dpo_observables;
use contmeas::{dpo_model, DpoParams, FieldProfile, GeneratorContext, TestFunction};
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type C = Complex64;

pub fn unit_vector3(rng: &mut ChaCha8Rng) -> [C; 3] {
    let mut v = [C::new(0.0, 0.0); 3];
    for z in &mut v {
        *z = C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    }
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.map(|z| z / n)
}

/// Random valid oscillator parameters with thermal occupations and
/// arbitrary splitting of the decay channels.
pub fn random_dpo(rng: &mut ChaCha8Rng) -> DpoParams {
    DpoParams::from_splits(
        0.5 + rng.random::<f64>(),
        0.1 + 0.5 * rng.random::<f64>(),
        0.5 + rng.random::<f64>(),
        0.3 * rng.random::<f64>(),
        0.5 + rng.random::<f64>(),
        0.3 * rng.random::<f64>(),
        unit_vector3(rng),
        unit_vector3(rng),
        std::f64::consts::TAU * rng.random::<f64>(),
        C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
    )
    .expect("valid parameters")
}

/// Mild oscillator parameters: weak drive and cold baths, so that low
/// truncations stay well inside the numerically exact regime.
pub fn mild_dpo(lambda: f64, nbar: f64) -> DpoParams {
    let s = 1.0 / 3f64.sqrt();
    let split = [C::new(s, 0.0), C::new(0.0, s), C::new(s * 0.6, s * 0.8)];
    DpoParams::from_splits(1.0, 0.3, 1.0, nbar, 1.0, nbar, split, split, 0.4, C::new(lambda, 0.0)).expect("valid")
}

pub fn dpo_context(p: &DpoParams, space: TruncatedSpace, window_end: f64, k: TestFunction) -> GeneratorContext {
    let model = dpo_model(p, space).expect("model");
    let spec = dpo_observables(p.theta3, p.omega_c);
    let field = FieldProfile::dpo_laser(p, window_end).expect("field");
    GeneratorContext::new(Arc::new(model), Arc::new(spec), field, k).expect("context")
}

pub fn vacuum(space: TruncatedSpace) -> DensityOperator {
    pure_density(&space.basis(0, 0).unwrap())
}

pub fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> Array2<C> {
    Array2::from_shape_fn((dim, dim), |_| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> Array2<C> {
    let x = random_matrix(rng, dim);
    let xh = x.t().mapv(|z| z.conj());
    (&x + &xh).mapv(|z| z * 0.5)
}

/// Random density matrix (positive, unit trace).
pub fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> DensityOperator {
    let x = random_matrix(rng, dim);
    let rho = x.dot(&x.t().mapv(|z| z.conj()));
    let tr: C = rho.diag().sum();
    rho.mapv(|z| z / tr)
}

/// Piecewise-constant test function with `pieces` random intervals covering
/// `[0, t)` and values in `[-amp, amp]`.
pub fn random_k(rng: &mut ChaCha8Rng, m: usize, t: f64, pieces: usize, amp: f64) -> TestFunction {
    let mut cuts: Vec<f64> = (1..pieces).map(|_| t * (0.05 + 0.9 * rng.random::<f64>())).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut bps = vec![0.0];
    for c in cuts {
        if c - bps.last().unwrap() > 1e-3 * t {
            bps.push(c);
        }
    }
    bps.push(t);
    let values =
        (0..bps.len() - 1).map(|_| (0..m).map(|_| amp * (2.0 * rng.random::<f64>() - 1.0)).collect()).collect();
    TestFunction::new(bps, values).unwrap()
}

pub fn max_abs_diff(a: &Array2<C>, b: &Array2<C>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
