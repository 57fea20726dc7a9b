//! Random small decoding instances shared by oracle comparisons.

use nalgebra::{DMatrix, DVector};
use qnc_core::messages::sample_ensemble_with;
use qnc_core::{seed, SourceModel};
use rand_distr::{Distribution, StandardNormal};

pub struct Instance {
    pub a: DMatrix<f64>,
    pub s: DVector<f64>,
    pub z: DVector<f64>,
    pub noise_var: DVector<f64>,
}

/// `z = A·s + w` with `A` i.i.d. `N(0, 1/m)`, `s` drawn from `model`, and
/// `w ~ N(0, noise_var·I)`.
pub fn gaussian_instance(model: &SourceModel, m: usize, noise_var: f64, seed_value: u64) -> Instance {
    let n = model.n;
    let mut rng = seed::rng(seed_value);
    let a = DMatrix::from_fn(m, n, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        g / (m as f64).sqrt()
    });
    let s = sample_ensemble_with(model, &DMatrix::identity(n, n), &mut rng).s;
    let w = DVector::from_fn(m, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        g * noise_var.sqrt()
    });
    let z = &a * &s + w;
    Instance { a, s, z, noise_var: DVector::from_element(m, noise_var) }
}
