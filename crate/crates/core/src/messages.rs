//! Correlated near-sparse Gaussian messages `X = φS`.
//!
//! Each sparse-domain coefficient `S_v` has a hidden state `Q_v`; large
//! states draw from `N(0, σs²)` and small states from `N(0, σz²)`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{QncError, Result};
use crate::seed;

/// How the large-state positions are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateLaw {
    /// `Q_v` i.i.d. Bernoulli(p).
    Bernoulli,
    /// Exactly `round(p·n)` large states at uniformly random positions.
    ExactK,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceModel {
    pub n: usize,
    pub sparsity_prob: f64,
    pub sigma_s2: f64,
    pub sigma_z2: f64,
    pub law: StateLaw,
}

impl SourceModel {
    pub fn new(n: usize, sparsity_prob: f64, sigma_s2: f64, sigma_z2: f64) -> Result<Self> {
        let model = Self { n, sparsity_prob, sigma_s2, sigma_z2, law: StateLaw::Bernoulli };
        model.validate()?;
        Ok(model)
    }

    /// Same model without the `σs² ≥ 10·σz²` separation check; used for
    /// degenerate-mixture tests and oracles.
    pub fn unchecked(n: usize, sparsity_prob: f64, sigma_s2: f64, sigma_z2: f64) -> Self {
        Self { n, sparsity_prob, sigma_s2, sigma_z2, law: StateLaw::Bernoulli }
    }

    pub fn with_law(mut self, law: StateLaw) -> Self {
        self.law = law;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(QncError::InvalidParameter("source needs n >= 1".into()));
        }
        if !(self.sparsity_prob > 0.0 && self.sparsity_prob < 1.0) {
            return Err(QncError::InvalidParameter(format!(
                "sparsity probability must lie in (0, 1), got {}",
                self.sparsity_prob
            )));
        }
        if !(self.sigma_z2 > 0.0 && self.sigma_s2 >= 10.0 * self.sigma_z2) {
            return Err(QncError::InvalidParameter(format!(
                "need sigma_s2 >= 10 * sigma_z2 > 0, got sigma_s2 = {}, sigma_z2 = {}",
                self.sigma_s2, self.sigma_z2
            )));
        }
        Ok(())
    }

    /// Expected number of large states, `k = p·n`.
    pub fn expected_k(&self) -> f64 {
        self.sparsity_prob * self.n as f64
    }

    /// Marginal variance of a sparse-domain coefficient.
    pub fn coefficient_variance(&self) -> f64 {
        self.sparsity_prob * self.sigma_s2 + (1.0 - self.sparsity_prob) * self.sigma_z2
    }

    pub fn sigma_s(&self) -> f64 {
        self.sigma_s2.sqrt()
    }

    pub fn state_variance(&self, large: bool) -> f64 {
        if large {
            self.sigma_s2
        } else {
            self.sigma_z2
        }
    }
}

/// One realisation of the source. The transform `φ` is shared across
/// ensembles and held by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageEnsemble {
    pub states: Vec<bool>,
    pub s: DVector<f64>,
    pub x: DVector<f64>,
}

impl MessageEnsemble {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn large_count(&self) -> usize {
        self.states.iter().filter(|&&q| q).count()
    }
}

pub fn sample_ensemble_with<R: Rng + ?Sized>(
    model: &SourceModel,
    phi: &DMatrix<f64>,
    rng: &mut R,
) -> MessageEnsemble {
    let n = model.n;
    assert_eq!(phi.nrows(), n, "transform size must match the source");
    let states: Vec<bool> = match model.law {
        StateLaw::Bernoulli => (0..n).map(|_| rng.random_bool(model.sparsity_prob)).collect(),
        StateLaw::ExactK => {
            let k = (model.expected_k().round() as usize).min(n);
            let mut q = vec![false; n];
            for i in sample(rng, n, k) {
                q[i] = true;
            }
            q
        }
    };
    let s = DVector::from_iterator(
        n,
        states.iter().map(|&large| {
            let z: f64 = StandardNormal.sample(rng);
            z * model.state_variance(large).sqrt()
        }),
    );
    let x = phi * &s;
    MessageEnsemble { states, s, x }
}

pub fn sample_ensemble(model: &SourceModel, phi: &DMatrix<f64>, seed: u64) -> MessageEnsemble {
    let mut rng = seed::rng(seed::derive(seed, &[seed::MESSAGES]));
    sample_ensemble_with(model, phi, &mut rng)
}

/// Haar-distributed orthonormal matrix: QR of an i.i.d. standard Gaussian
/// matrix, with the columns of `Q` signed so that `R` has a non-negative
/// diagonal.
pub fn random_orthonormal_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    assert!(n >= 1, "transform needs n >= 1");
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

pub fn random_orthonormal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = seed::rng(seed::derive(seed, &[seed::TRANSFORM]));
    random_orthonormal_with(n, &mut rng)
}

/// Empirical frequencies of the norm events used in the recovery proof.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub samples: usize,
    pub k: usize,
    pub gamma: f64,
    /// `‖X‖² < kσs²`
    pub below_lower: f64,
    /// `‖X‖² > 2kσs² + (n−k)σz²`
    pub above_upper: f64,
    /// `‖X‖∞ ≥ √(2k·ln(k·n^γ))·σs`
    pub linf_exceeds: f64,
    pub linf_threshold: f64,
}

impl NormReport {
    /// Binomial standard error of a frequency at this sample size.
    pub fn std_error(&self, freq: f64) -> f64 {
        (freq * (1.0 - freq) / self.samples as f64).sqrt()
    }
}

pub fn norm_statistics(samples: &[DVector<f64>], model: &SourceModel, k: usize, gamma: f64) -> NormReport {
    let n = model.n as f64;
    let kf = k as f64;
    let lower = kf * model.sigma_s2;
    let upper = 2.0 * kf * model.sigma_s2 + (n - kf) * model.sigma_z2;
    let linf_threshold = (2.0 * kf * (kf * n.powf(gamma)).ln()).sqrt() * model.sigma_s();
    let (mut lo, mut hi, mut inf) = (0usize, 0usize, 0usize);
    for x in samples {
        let e = x.norm_squared();
        lo += usize::from(e < lower);
        hi += usize::from(e > upper);
        inf += usize::from(x.amax() >= linf_threshold);
    }
    let total = samples.len().max(1) as f64;
    NormReport {
        samples: samples.len(),
        k,
        gamma,
        below_lower: lo as f64 / total,
        above_upper: hi as f64 / total,
        linf_exceeds: inf as f64 / total,
        linf_threshold,
    }
}
