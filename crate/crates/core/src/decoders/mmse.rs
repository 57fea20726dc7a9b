//! Mixture-MMSE decoder.
//!
//! Alternates between the exact linear-Gaussian posterior of `s` under a
//! diagonal prior `diag(σ_v²)` and an update of the soft states `q_v`. The
//! state update evaluates the two-state likelihood ratio on each
//! coordinate's cavity marginal: the Gaussian posterior of `s_v` with its
//! own prior factor divided out.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{ln_normal, DecodeResult, DecoderProblem};

const JITTER: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MmseOptions {
    pub max_iters: usize,
    /// Stop when `‖σ²_new − σ²‖ / ‖σ²‖` falls below this.
    pub tol: f64,
    /// Fix the states instead of estimating them (linear MMSE given `Q`).
    pub clamp_states: Option<Vec<bool>>,
    /// Weight of the previous `q` in each update.
    pub damping: f64,
}

impl Default for MmseOptions {
    fn default() -> Self {
        Self { max_iters: 50, tol: 1e-6, clamp_states: None, damping: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: DVector<f64>,
    /// Marginal posterior variances.
    pub var: DVector<f64>,
    pub regularized: bool,
}

fn factor(mut c: DMatrix<f64>) -> (Cholesky<f64, Dyn>, bool) {
    if let Some(ch) = Cholesky::new(c.clone()) {
        return (ch, false);
    }
    let m = c.nrows();
    let scale = (c.trace() / m as f64).max(1.0);
    let mut jitter = JITTER * scale;
    loop {
        for i in 0..m {
            c[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(c.clone()) {
            return (ch, true);
        }
        jitter *= 10.0;
    }
}

/// Posterior of `s` given `z = A·s + noise`, `s ~ N(0, diag(prior_var))`,
/// `noise ~ N(0, diag(noise_var))`, computed through the `m × m` covariance
/// of `z`.
pub fn linear_posterior(a: &DMatrix<f64>, z: &DVector<f64>, noise_var: &DVector<f64>, prior_var: &DVector<f64>) -> Posterior {
    let (m, n) = a.shape();
    if m == 0 {
        return Posterior { mean: DVector::zeros(n), var: prior_var.clone(), regularized: false };
    }
    let mut b = a.clone();
    for (j, mut col) in b.column_iter_mut().enumerate() {
        col *= prior_var[j];
    }
    let mut c = &b * a.transpose();
    for i in 0..m {
        c[(i, i)] += noise_var[i];
    }
    let (chol, regularized) = factor(c);
    let w = chol.solve(z);
    let mean = b.tr_mul(&w);
    let y = chol
        .l_dirty()
        .solve_lower_triangular(a)
        .expect("Cholesky factor has a positive diagonal");
    let var = DVector::from_iterator(
        n,
        y.column_iter().zip(prior_var.iter()).map(|(col, &d)| (d - d * d * col.norm_squared()).max(d * 1e-15)),
    );
    Posterior { mean, var, regularized }
}

fn prior_variances(q: &[f64], sigma_s2: f64, sigma_z2: f64) -> DVector<f64> {
    DVector::from_iterator(q.len(), q.iter().map(|&qv| qv * sigma_s2 + (1.0 - qv) * sigma_z2))
}

/// Large-state probability from the cavity marginal of one coordinate.
fn state_update(mean: f64, var: f64, prior_var: f64, p: f64, sigma_s2: f64, sigma_z2: f64) -> f64 {
    let ext_precision = 1.0 / var - 1.0 / prior_var;
    if !(ext_precision > 1e-12 / prior_var) {
        return p;
    }
    let tau = 1.0 / ext_precision;
    let r = tau * mean / var;
    let llr = ln_normal(r, sigma_s2 + tau) - ln_normal(r, sigma_z2 + tau);
    let logit = (p / (1.0 - p)).ln() + llr;
    1.0 / (1.0 + (-logit).exp())
}

pub fn mixture_mmse_decode(p: &DecoderProblem<'_>, opts: &MmseOptions) -> DecodeResult {
    let prior = p.prior;
    let n = p.n();
    let mut q: Vec<f64> = match &opts.clamp_states {
        Some(states) => states.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect(),
        None => vec![prior.sparsity_prob; n],
    };
    let mut d = prior_variances(&q, prior.sigma_s2, prior.sigma_z2);
    if p.m() == 0 {
        return p.result(DVector::zeros(n), 0, true, Vec::new());
    }

    let mut trace = Vec::new();
    let mut regularized = false;
    let mut converged = false;
    let mut iterations = 0;
    let mut post;
    loop {
        post = linear_posterior(&p.a, &p.z, &p.noise_var, &d);
        iterations += 1;
        regularized |= post.regularized;
        if opts.clamp_states.is_some() {
            converged = true;
            break;
        }
        for v in 0..n {
            let fresh = state_update(post.mean[v], post.var[v], d[v], prior.sparsity_prob, prior.sigma_s2, prior.sigma_z2);
            q[v] = opts.damping * q[v] + (1.0 - opts.damping) * fresh;
        }
        let d_new = prior_variances(&q, prior.sigma_s2, prior.sigma_z2);
        let change = (&d_new - &d).norm() / d.norm();
        trace.push(change);
        d = d_new;
        if change < opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iters {
            break;
        }
    }
    let mut result = p.result(post.mean, iterations, converged, trace);
    result.regularized = regularized;
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::messages::{random_orthonormal, sample_ensemble, SourceModel};
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::seed::rng(seed);
        DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    #[test]
    fn clamped_states_give_linear_mmse() {
        let n = 12;
        let prior = SourceModel::new(n, 0.2, 1.0, 0.01).unwrap();
        let phi = random_orthonormal(n, 1);
        let e = sample_ensemble(&prior, &phi, 2);
        let a = gaussian(7, n, 3);
        let nv = DVector::from_element(7, 1e-3);
        let z = &a * &e.s;
        let p = DecoderProblem::new(a.clone(), z.clone(), nv.clone(), prior, &phi).unwrap();
        let opts = MmseOptions { clamp_states: Some(e.states.clone()), ..Default::default() };
        let r = mixture_mmse_decode(&p, &opts);
        // Closed form via the n x n information matrix.
        let d = DMatrix::from_diagonal(&DVector::from_iterator(n, e.states.iter().map(|&s| if s { 1.0 } else { 0.01 })));
        let ninv = DMatrix::from_diagonal(&nv.map(|v| 1.0 / v));
        let info = d.clone().try_inverse().unwrap() + a.transpose() * &ninv * &a;
        let expect = info.try_inverse().unwrap() * a.transpose() * ninv * z;
        assert!((&r.s_hat - &expect).amax() < 1e-9);
        assert!((&r.x_hat - &phi * &r.s_hat).amax() < 1e-9);
    }

    #[test]
    fn no_measurements_returns_prior_mean() {
        let phi = DMatrix::identity(6, 6);
        let prior = SourceModel::new(6, 0.2, 1.0, 0.01).unwrap();
        let p = DecoderProblem::new(DMatrix::zeros(0, 6), DVector::zeros(0), DVector::zeros(0), prior, &phi).unwrap();
        let r = mixture_mmse_decode(&p, &MmseOptions::default());
        assert_eq!(r.x_hat, DVector::zeros(6));
    }

    #[test]
    fn equal_variances_converge_in_one_iteration() {
        let n = 10;
        let prior = SourceModel::unchecked(n, 0.3, 1.0, 1.0);
        let phi = DMatrix::identity(n, n);
        let a = gaussian(6, n, 5);
        let z = DVector::from_fn(6, |i, _| i as f64 * 0.1);
        let p = DecoderProblem::new(a, z, DVector::from_element(6, 0.01), prior, &phi).unwrap();
        let r = mixture_mmse_decode(&p, &MmseOptions::default());
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn posterior_variance_matches_dense_formula() {
        let a = gaussian(4, 6, 8);
        let d = DVector::from_vec(vec![1.0, 0.5, 0.01, 2.0, 0.3, 0.01]);
        let nv = DVector::from_element(4, 0.05);
        let z = DVector::from_vec(vec![0.3, -1.0, 0.2, 0.7]);
        let post = linear_posterior(&a, &z, &nv, &d);
        let info = DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) + a.transpose() * &a / 0.05;
        let cov = info.try_inverse().unwrap();
        for v in 0..6 {
            assert_abs_diff_eq!(post.var[v], cov[(v, v)], epsilon = 1e-10);
        }
    }

    #[test]
    fn singular_covariance_is_regularized() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        let post = linear_posterior(&a, &DVector::from_vec(vec![1.0, 1.0]), &DVector::zeros(2), &DVector::from_vec(vec![1.0, 1.0]));
        assert!(post.regularized);
        assert!(post.mean.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn soft_states_stay_in_unit_interval() {
        for &(mean, var, prior_var) in &[(3.0, 0.01, 1.0), (0.0, 0.5, 1.0), (1e3, 1e-9, 0.01), (0.1, 0.01, 0.01)] {
            let q = state_update(mean, var, prior_var, 0.05, 1.0, 0.01);
            assert!((0.0..=1.0).contains(&q));
        }
    }
}
