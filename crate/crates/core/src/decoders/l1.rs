//! Basis-pursuit denoising: `min ‖s‖₁` subject to `‖z − A·s‖₂ ≤ ε`.
//!
//! Accelerated shrinkage-thresholding (monotone FISTA with restart, step
//! `1/‖A‖²`) on the penalized objective `½‖z − As‖² + λ‖s‖₁`, with `λ`
//! halved after each stage from `‖Aᵀz‖∞`. After every stage the current support and signs are used to
//! solve the constrained problem in closed form; the candidate is accepted
//! only if it passes the optimality conditions, otherwise the path continues.
//! The penalized objective trace is non-increasing: accepted iterates never
//! raise the objective for a fixed `λ`, and lowering `λ` lowers it at the
//! current iterate.

use nalgebra::{DMatrix, DVector};

use super::{DecodeResult, DecoderProblem};
use crate::error::{QncError, Result};

pub const L1_MAX_ITERS: usize = 5000;
pub const L1_REL_TOL: f64 = 1e-8;
const STAGE_MAX_ITERS: usize = 400;
const LAMBDA_DECAY: f64 = 0.5;
const LAMBDA_FLOOR: f64 = 1e-13;
const FEAS_SLACK: f64 = 1e-6;

fn soft(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

fn feasible(residual: f64, eps: f64, z_norm: f64) -> bool {
    residual <= eps * (1.0 + FEAS_SLACK) + 1e-12 * z_norm
}

enum Step {
    Done(DVector<f64>),
    Drop(usize),
    Add(usize, f64, DVector<f64>),
    Fail,
}

/// Closed-form constrained solution for a fixed support and sign pattern,
/// followed by the optimality checks: signs must hold on the support and
/// `|a_jᵀy| ≤ 1` off it, with `y` the scaled residual.
fn solve_on(a: &DMatrix<f64>, z: &DVector<f64>, support: &[usize], signs: &[f64], eps: f64) -> Step {
    let n = a.ncols();
    let a_t = a.select_columns(support);
    let Some(gram) = a_t.tr_mul(&a_t).cholesky() else { return Step::Fail };
    let sg = DVector::from_column_slice(signs);
    let ls = gram.solve(&a_t.tr_mul(z));
    let h = gram.solve(&sg);
    let r0 = z - &a_t * &ls;
    let w = &a_t * &h;
    let z_norm = z.norm();
    let res0_sq = r0.norm_squared();
    let w_sq = w.norm_squared();
    if w_sq == 0.0 {
        return Step::Fail;
    }
    let lambda = if res0_sq.sqrt() <= 1e-12 * z_norm {
        (eps * eps / w_sq).sqrt()
    } else if eps * eps > res0_sq {
        ((eps * eps - res0_sq) / w_sq).sqrt()
    } else {
        // Infeasible on this support: grow it along the residual correlation.
        let corr = a.tr_mul(&r0);
        let j = (0..n)
            .filter(|j| !support.contains(j))
            .max_by(|&i, &j| corr[i].abs().total_cmp(&corr[j].abs()));
        return match j {
            Some(j) if corr[j] != 0.0 => Step::Add(j, corr[j].signum(), ls),
            _ => Step::Fail,
        };
    };
    let s_t = &ls - &h * lambda;
    let worst = (0..support.len()).min_by(|&i, &j| (s_t[i] * sg[i]).total_cmp(&(s_t[j] * sg[j])));
    if let Some(k) = worst.filter(|&k| s_t[k] * sg[k] <= 0.0) {
        return Step::Drop(k);
    }
    let r = &r0 + &w * lambda;
    if !feasible(r.norm(), eps, z_norm) {
        return Step::Fail;
    }
    // With λ = 0 the limiting dual direction is w.
    let y = if lambda > 1e-14 * a.tr_mul(z).amax() { r / lambda } else { w };
    let corr = a.tr_mul(&y);
    let mut in_support = vec![false; n];
    for &j in support {
        in_support[j] = true;
    }
    let violator = (0..n)
        .filter(|&j| !in_support[j] && corr[j].abs() > 1.0 + 1e-7)
        .max_by(|&i, &j| corr[i].abs().total_cmp(&corr[j].abs()));
    if let Some(j) = violator {
        return Step::Add(j, corr[j].signum(), s_t);
    }
    let mut out = DVector::zeros(n);
    for (k, &j) in support.iter().enumerate() {
        out[j] = s_t[k];
    }
    Step::Done(out)
}

/// Exact solution reached from the support of the proximal iterate `s` by
/// single-coordinate swaps, or `None` if the swaps do not settle.
fn polish(a: &DMatrix<f64>, z: &DVector<f64>, s: &DVector<f64>, eps: f64) -> Option<DVector<f64>> {
    let (m, n) = a.shape();
    let mut support: Vec<usize> = (0..n).filter(|&j| s[j] != 0.0).collect();
    support.sort_by(|&i, &j| s[j].abs().total_cmp(&s[i].abs()));
    support.truncate(m);
    let mut signs: Vec<f64> = support.iter().map(|&j| s[j].signum()).collect();
    if support.is_empty() {
        return None;
    }
    for _ in 0..2 * (n + m) {
        match solve_on(a, z, &support, &signs, eps) {
            Step::Done(out) => return Some(out),
            Step::Drop(k) if support.len() > 1 => {
                support.remove(k);
                signs.remove(k);
            }
            Step::Add(j, sign, _) if support.len() < m => {
                support.push(j);
                signs.push(sign);
            }
            Step::Add(j, sign, current) => {
                // Square support: pivot `j` in along the direction that keeps
                // A·s fixed and leave at the first coordinate to reach zero.
                let lu = a.select_columns(&support).lu();
                let d = lu.solve(&(a.column(j) * -sign))?;
                let leave = (0..m)
                    .filter(|&k| current[k] * d[k] < 0.0)
                    .min_by(|&p, &q| (current[p] / d[p]).abs().total_cmp(&(current[q] / d[q]).abs()))?;
                support[leave] = j;
                signs[leave] = sign;
            }
            _ => return None,
        }
    }
    None
}

pub fn l1_decode(p: &DecoderProblem<'_>, eps: f64) -> Result<DecodeResult> {
    if !(eps >= 0.0) {
        return Err(QncError::InvalidParameter(format!("epsilon must be non-negative, got {eps}")));
    }
    let n = p.n();
    let a = &p.a;
    let z = &p.z;
    let z_norm = z.norm();
    if p.m() == 0 || feasible(z_norm, eps, 0.0) {
        return Ok(p.result(DVector::zeros(n), 0, true, Vec::new()));
    }
    let lambda_max = a.tr_mul(z).amax();
    if lambda_max == 0.0 {
        // z is orthogonal to the range of A, so no s does better than 0.
        return Ok(p.result(DVector::zeros(n), 0, false, Vec::new()));
    }
    let lipschitz = (a * a.transpose()).symmetric_eigenvalues().max();
    let step = 1.0 / lipschitz;

    let objective = |v: &DVector<f64>, lambda: f64| {
        let r = (z - a * v).norm();
        0.5 * r * r + lambda * v.lp_norm(1)
    };
    let mut s = DVector::zeros(n);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut lambda = lambda_max;
    loop {
        lambda *= LAMBDA_DECAY;
        // Monotone FISTA, restarted whenever a step fails to descend.
        let mut y = s.clone();
        let mut prev = s.clone();
        let mut f_s = objective(&s, lambda);
        let mut t = 1.0f64;
        for _ in 0..STAGE_MAX_ITERS {
            let grad = a.tr_mul(&(a * &y - z));
            let cand = DVector::from_fn(n, |j, _| soft(y[j] - step * grad[j], step * lambda));
            let f_cand = objective(&cand, lambda);
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            prev.copy_from(&s);
            if f_cand <= f_s {
                s.copy_from(&cand);
                f_s = f_cand;
                y = &s + (&s - &prev) * ((t - 1.0) / t_next);
                t = t_next;
            } else {
                y.copy_from(&s);
                t = 1.0;
            }
            iterations += 1;
            trace.push(f_s);
            let change = (&cand - &prev).norm() / cand.norm().max(f64::MIN_POSITIVE);
            if change < L1_REL_TOL || iterations >= L1_MAX_ITERS {
                break;
            }
        }
        if let Some(polished) = polish(a, z, &s, eps) {
            return Ok(p.result(polished, iterations, true, trace));
        }
        let resid = (z - a * &s).norm();
        if feasible(resid, eps, z_norm) {
            return Ok(p.result(s, iterations, true, trace));
        }
        if lambda < LAMBDA_FLOOR * lambda_max || iterations >= L1_MAX_ITERS {
            return Ok(p.result(s, iterations, false, trace));
        }
    }
}
