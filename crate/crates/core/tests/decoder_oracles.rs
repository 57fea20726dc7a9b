mod common {
    pub mod instances;
    pub mod lp_oracle;
}

use common::instances::gaussian_instance;
use common::lp_oracle::l1_equality_lp;
use nalgebra::{DMatrix, DVector};
use qnc_core::decoders::linear_posterior;
use qnc_core::{exact_mmse_oracle, l1_decode, mixture_mmse_decode, DecoderProblem, MmseOptions, SourceModel};

#[test]
fn l1_matches_simplex_oracle() {
    let model = SourceModel::new(10, 0.2, 1.0, 0.01).unwrap();
    let phi = DMatrix::identity(10, 10);
    for i in 0..50u64 {
        let inst = gaussian_instance(&model, 8, 0.0, 500 + i);
        let lp = l1_equality_lp(&inst.a, &inst.z).expect("feasible LP");
        let p = DecoderProblem::new(inst.a, inst.z, DVector::zeros(8), model, &phi).unwrap();
        let r = l1_decode(&p, 0.0).unwrap();
        let rel = (&r.s_hat - &lp).norm() / lp.norm();
        assert!(rel < 1e-6, "instance {i}: relative gap {rel}");
    }
}

struct Mse {
    mean: f64,
    se: f64,
}

fn mse(errors: &[f64]) -> Mse {
    let k = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / k;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Mse { mean, se: (var / k).sqrt() }
}

#[test]
fn mixture_mmse_sits_between_linear_mmse_and_oracle() {
    let model = SourceModel::new(10, 0.2, 1.0, 0.01).unwrap();
    let phi = DMatrix::identity(10, 10);
    let (mut vs_linear, mut vs_oracle) = (Vec::new(), Vec::new());
    for i in 0..200u64 {
        let inst = gaussian_instance(&model, 7, 1e-3, 900 + i);
        let p = DecoderProblem::new(inst.a.clone(), inst.z.clone(), inst.noise_var.clone(), model, &phi).unwrap();
        let err = |s: &DVector<f64>| (s - &inst.s).norm_squared();
        let ours = err(&mixture_mmse_decode(&p, &MmseOptions::default()).s_hat);
        // Single Gaussian prior with the mixture's variance.
        let lin = linear_posterior(&inst.a, &inst.z, &inst.noise_var, &DVector::from_element(10, model.coefficient_variance()));
        vs_linear.push(ours - err(&lin.mean));
        vs_oracle.push(ours - err(&exact_mmse_oracle(&p).unwrap().s_hat));
    }
    let (lin, orc) = (mse(&vs_linear), mse(&vs_oracle));
    assert!(lin.mean < -3.0 * lin.se, "no gain over linear MMSE: {} ± {}", lin.mean, lin.se);
    assert!(orc.mean >= -3.0 * orc.se, "mixture beats the oracle: {} ± {}", orc.mean, orc.se);
}

#[test]
fn oracle_is_not_beaten_by_any_decoder() {
    let model = SourceModel::new(8, 0.25, 1.0, 0.01).unwrap();
    let phi = DMatrix::identity(8, 8);
    let (mut d_mmse, mut d_l1) = (Vec::new(), Vec::new());
    for i in 0..500u64 {
        let inst = gaussian_instance(&model, 5, 1e-2, 2000 + i);
        let p = DecoderProblem::new(inst.a, inst.z, inst.noise_var, model, &phi).unwrap();
        let err = |s: &DVector<f64>| (s - &inst.s).norm_squared();
        let base = err(&exact_mmse_oracle(&p).unwrap().s_hat);
        d_mmse.push(err(&mixture_mmse_decode(&p, &MmseOptions::default()).s_hat) - base);
        let eps = qnc_core::default_epsilon(&p, 1.2).unwrap();
        d_l1.push(err(&l1_decode(&p, eps).unwrap().s_hat) - base);
    }
    for (name, d) in [("mmse", mse(&d_mmse)), ("l1", mse(&d_l1))] {
        assert!(d.mean >= -3.0 * d.se, "{name} beats the oracle by {} ± {}", -d.mean, d.se);
    }
}
