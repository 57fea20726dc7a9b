//! Bayes-optimal estimate by enumerating all `2^n` state vectors.

use nalgebra::DVector;

use super::mmse::linear_posterior;
use super::{DecodeResult, DecoderProblem};
use crate::error::{QncError, Result};

pub const ORACLE_MAX_N: usize = 14;

/// Posterior-weighted average of the conditional Gaussian means, with
/// `w(q) ∝ P(q)·N(z; 0, A·Σ(q)·Aᵀ + Σ_N)`.
pub fn exact_mmse_oracle(p: &DecoderProblem<'_>) -> Result<DecodeResult> {
    let n = p.n();
    if n > ORACLE_MAX_N {
        return Err(QncError::ProblemTooLarge { n, limit: ORACLE_MAX_N });
    }
    let m = p.m();
    if m == 0 {
        return Ok(p.result(DVector::zeros(n), 0, true, Vec::new()));
    }
    let prior = p.prior;
    let (ln_p, ln_1p) = (prior.sparsity_prob.ln(), (1.0 - prior.sparsity_prob).ln());
    let mut log_w = Vec::with_capacity(1 << n);
    let mut means = Vec::with_capacity(1 << n);
    let mut regularized = false;
    for mask in 0u32..(1u32 << n) {
        let large = mask.count_ones() as f64;
        let d = DVector::from_fn(n, |v, _| prior.state_variance(mask >> v & 1 == 1));
        // Evidence through the Cholesky factor of C = A·diag(d)·Aᵀ + Σ_N.
        let mut c = p.a.clone();
        for (j, mut col) in c.column_iter_mut().enumerate() {
            col *= d[j];
        }
        let mut cov = &c * p.a.transpose();
        for i in 0..m {
            cov[(i, i)] += p.noise_var[i];
        }
        let (log_det, quad) = match cov.clone().cholesky() {
            Some(ch) => {
                let l = ch.l_dirty();
                let log_det = 2.0 * (0..m).map(|i| l[(i, i)].ln()).sum::<f64>();
                let y = l.solve_lower_triangular(&p.z).expect("positive diagonal");
                (log_det, y.norm_squared())
            }
            None => {
                regularized = true;
                (f64::INFINITY, 0.0)
            }
        };
        let lw = large * ln_p + (n as f64 - large) * ln_1p - 0.5 * log_det - 0.5 * quad;
        log_w.push(lw);
        let post = linear_posterior(&p.a, &p.z, &p.noise_var, &d);
        regularized |= post.regularized;
        means.push(post.mean);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut s_hat = DVector::zeros(n);
    for (lw, mean) in log_w.iter().zip(&means) {
        let w = (lw - max).exp();
        if w > 0.0 {
            total += w;
            s_hat.axpy(w, mean, 1.0);
        }
    }
    s_hat /= total;
    let mut r = p.result(s_hat, 1 << n, true, Vec::new());
    r.regularized = regularized;
    Ok(r)
}
