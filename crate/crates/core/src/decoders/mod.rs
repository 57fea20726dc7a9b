//! Recovery of the messages from `(Ψ, Z)`.
//!
//! Every decoder works in the sparse domain with `A = Ψ·φ` and reports both
//! `ŝ` and `x̂ = φ·ŝ`. Quantization noise is modelled as independent
//! zero-mean Gaussian with the per-row variances carried by the problem.

mod l1;
mod mmse;
mod oracle;

pub use l1::{l1_decode, L1_MAX_ITERS, L1_REL_TOL};
pub use mmse::{linear_posterior, mixture_mmse_decode, MmseOptions, Posterior};
pub use oracle::{exact_mmse_oracle, ORACLE_MAX_N};

use nalgebra::{DMatrix, DVector};

use crate::error::{QncError, Result};
use crate::messages::SourceModel;
use crate::qnc::MeasurementSystem;

/// SNR reported for an exact reconstruction in CSV output.
pub const SNR_CAP_DB: f64 = 120.0;

#[derive(Debug, Clone)]
pub struct DecoderProblem<'a> {
    /// `m × n` sensing matrix in the sparse domain.
    pub a: DMatrix<f64>,
    pub z: DVector<f64>,
    pub noise_var: DVector<f64>,
    pub prior: SourceModel,
    pub phi: &'a DMatrix<f64>,
}

impl<'a> DecoderProblem<'a> {
    pub fn new(
        a: DMatrix<f64>,
        z: DVector<f64>,
        noise_var: DVector<f64>,
        prior: SourceModel,
        phi: &'a DMatrix<f64>,
    ) -> Result<Self> {
        let n = prior.n;
        if a.ncols() != n || phi.nrows() != n || phi.ncols() != n {
            return Err(QncError::InvalidParameter(format!(
                "dimension mismatch: A is {}x{}, phi is {}x{}, prior n = {n}",
                a.nrows(),
                a.ncols(),
                phi.nrows(),
                phi.ncols()
            )));
        }
        if z.len() != a.nrows() || noise_var.len() != a.nrows() {
            return Err(QncError::InvalidParameter("z and noise_var must have one entry per row of A".into()));
        }
        if noise_var.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(QncError::InvalidParameter("noise variances must be finite and non-negative".into()));
        }
        Ok(Self { a, z, noise_var, prior, phi })
    }

    /// Sparse-domain problem for the first `rows` received packets.
    pub fn from_measurements(
        sys: &MeasurementSystem,
        rows: usize,
        prior: SourceModel,
        phi: &'a DMatrix<f64>,
    ) -> Result<Self> {
        let rows = rows.min(sys.m());
        let a = sys.psi.rows(0, rows) * phi;
        Self::new(
            a,
            sys.z.rows(0, rows).into_owned(),
            DVector::from_column_slice(&sys.row_noise_var[..rows]),
            prior,
            phi,
        )
    }

    /// The same problem restricted to its first `rows` measurements.
    pub fn truncated(&self, rows: usize) -> Self {
        let rows = rows.min(self.m());
        Self {
            a: self.a.rows(0, rows).into_owned(),
            z: self.z.rows(0, rows).into_owned(),
            noise_var: self.noise_var.rows(0, rows).into_owned(),
            prior: self.prior,
            phi: self.phi,
        }
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    fn result(&self, s_hat: DVector<f64>, iterations: usize, converged: bool, objective_trace: Vec<f64>) -> DecodeResult {
        let x_hat = self.phi * &s_hat;
        DecodeResult { x_hat, s_hat, iterations, converged, objective_trace, regularized: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub x_hat: DVector<f64>,
    pub s_hat: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    /// A singular covariance was regularized with jitter.
    pub regularized: bool,
}

/// Noise budget `safety·√(Σ noise_var)` for basis-pursuit denoising.
pub fn default_epsilon(p: &DecoderProblem<'_>, safety: f64) -> Result<f64> {
    if !(safety >= 1.0) {
        return Err(QncError::InvalidParameter(format!("safety factor must be >= 1, got {safety}")));
    }
    Ok(safety * p.noise_var.sum().sqrt())
}

/// `10·log10(‖x‖² / ‖x − x̂‖²)`; `+∞` for an exact reconstruction.
pub fn snr_db(x_true: &DVector<f64>, x_hat: &DVector<f64>) -> f64 {
    let mut acc = SnrAccumulator::default();
    acc.add(x_true, x_hat);
    acc.snr_db()
}

/// Pools signal and error energies over trials before taking the ratio.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnrAccumulator {
    pub signal: f64,
    pub error: f64,
}

impl SnrAccumulator {
    pub fn add(&mut self, x_true: &DVector<f64>, x_hat: &DVector<f64>) {
        self.signal += x_true.norm_squared();
        self.error += (x_true - x_hat).norm_squared();
    }

    pub fn merge(&mut self, other: &SnrAccumulator) {
        self.signal += other.signal;
        self.error += other.error;
    }

    pub fn snr_db(&self) -> f64 {
        if self.error == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (self.signal / self.error).log10()
        }
    }

    /// SNR clamped to `±SNR_CAP_DB` for CSV output.
    pub fn capped_db(&self) -> f64 {
        self.snr_db().clamp(-SNR_CAP_DB, SNR_CAP_DB)
    }
}

/// Log-density of a zero-mean Gaussian evaluated at `x`.
fn ln_normal(x: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + x * x / var)
}
