//! Midrise uniform quantizers.

use crate::error::{QncError, Result};

/// Default dynamic range, in standard deviations of the quantized signal.
pub const DEFAULT_RANGE_SIGMA: f64 = 4.0;

/// Largest supported `L·C_e`.
pub const MAX_BITS: u32 = 30;

/// Midrise quantizer on `[lo, hi]` with `levels` cells reproduced at their
/// centers. Inputs outside the range saturate to the extreme cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformQuantizer {
    lo: f64,
    hi: f64,
    levels: u64,
    step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantized {
    pub value: f64,
    /// `value − x`
    pub error: f64,
}

impl UniformQuantizer {
    pub fn new(lo: f64, hi: f64, levels: u64) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(QncError::InvalidParameter(format!("bad quantizer range [{lo}, {hi}]")));
        }
        if levels < 2 {
            return Err(QncError::InvalidParameter(format!("quantizer needs >= 2 levels, got {levels}")));
        }
        Ok(Self { lo, hi, levels, step: (hi - lo) / levels as f64 })
    }

    /// Quantizer with (approximately) the requested step, rounded so that an
    /// integer number of cells tiles the range. Used as the near-noiseless
    /// surrogate in the recovery audits.
    pub fn with_step(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) {
            return Err(QncError::InvalidParameter(format!("quantizer step must be positive, got {step}")));
        }
        let levels = ((hi - lo) / step).ceil().max(2.0) as u64;
        Self::new(lo, hi, levels)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn levels(&self) -> u64 {
        self.levels
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `Δ²/12`
    pub fn noise_var(&self) -> f64 {
        self.step * self.step / 12.0
    }

    pub fn quantize(&self, x: f64) -> Quantized {
        let cell = ((x - self.lo) / self.step).floor();
        let idx = if cell.is_nan() { 0.0 } else { cell.clamp(0.0, (self.levels - 1) as f64) };
        let value = self.lo + (idx + 0.5) * self.step;
        Quantized { value, error: value - x }
    }
}

/// Quantizer on `±range_sigma·sigma` with `2^(L·capacity)` levels.
pub fn make_quantizer(range_sigma: f64, sigma: f64, block_length: u32, capacity: u32) -> Result<UniformQuantizer> {
    let bits = block_length
        .checked_mul(capacity)
        .ok_or(QncError::LevelOverflow { bits: u32::MAX })?;
    if bits < 1 {
        return Err(QncError::InvalidParameter("need L * capacity >= 1".into()));
    }
    if bits > MAX_BITS {
        return Err(QncError::LevelOverflow { bits });
    }
    if !(range_sigma > 0.0 && sigma > 0.0) {
        return Err(QncError::InvalidParameter(format!(
            "quantizer range needs positive range_sigma and sigma, got {range_sigma} and {sigma}"
        )));
    }
    let half = range_sigma * sigma;
    UniformQuantizer::new(-half, half, 1u64 << bits)
}
