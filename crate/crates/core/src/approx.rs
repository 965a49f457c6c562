//! Closed-form queueing approximations and waiting-train thresholds.

use thiserror::Error;

/// Coefficient of variation of the arrival process used when none is given.
pub const DEFAULT_V_A: f64 = 0.8;
/// Coefficient of variation of the service process used when none is given.
pub const DEFAULT_V_B: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApproxError {
    #[error("occupancy {0} is not in [0, 1); the infinite queue is unstable")]
    Unstable(f64),
    #[error("invalid correction parameters: {0}")]
    Params(&'static str),
    #[error("correction factor undefined: c·v_B² + v_A² = {0} is not positive")]
    Degenerate(f64),
    #[error("correction factor must be positive, got {0}")]
    Gamma(f64),
    #[error("passenger ratio {0} outside [0, 1]")]
    PassengerRatio(f64),
}

/// Expected queue length of M/M/1/∞, `ρ² / (1 − ρ)`.
pub fn mm1_inf_queue_length(rho: f64) -> Result<f64, ApproxError> {
    if !(0.0..1.0).contains(&rho) {
        return Err(ApproxError::Unstable(rho));
    }
    Ok(rho * rho / (1.0 - rho))
}

/// Scaling `(v_A² + v_B²) / 2` that turns the M/M/1/∞ queue length into the
/// GI/GI/1/∞ estimate.
pub fn gi_scaling(v_a: f64, v_b: f64) -> f64 {
    (v_a * v_a + v_b * v_b) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionParams {
    pub rho: f64,
    /// Parallel service channels; one per route queue.
    pub channels: u32,
    pub v_a: f64,
    pub v_b: f64,
}

impl CorrectionParams {
    pub fn single_channel(rho: f64, v_a: f64, v_b: f64) -> Self {
        Self {
            rho,
            channels: 1,
            v_a,
            v_b,
        }
    }
}

/// `γ = 2 / (c·v_B² + v_A²)` with `c = (ρ/s)^{1−v_A²}·(1+v_A²) − v_A²`.
///
/// `ρ = 0` is accepted so that routes without traffic still get a threshold.
pub fn gi_correction_factor(params: &CorrectionParams) -> Result<f64, ApproxError> {
    let CorrectionParams {
        rho,
        channels,
        v_a,
        v_b,
    } = *params;
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(ApproxError::Params("occupancy must be finite and non-negative"));
    }
    if channels == 0 {
        return Err(ApproxError::Params("at least one service channel is required"));
    }
    if !(v_a >= 0.0 && v_b >= 0.0) {
        return Err(ApproxError::Params("coefficients of variation must be non-negative"));
    }
    let va2 = v_a * v_a;
    let c = (rho / f64::from(channels)).powf(1.0 - va2) * (1.0 + va2) - va2;
    let denom = c * v_b * v_b + va2;
    if !(denom > 0.0) {
        return Err(ApproxError::Degenerate(denom));
    }
    Ok(2.0 / denom)
}

/// GI/GI estimate from the Markovian queue length, `e_mm / γ`.
pub fn corrected_queue_length(e_mm: f64, gamma: f64) -> Result<f64, ApproxError> {
    if !(gamma > 0.0) {
        return Err(ApproxError::Gamma(gamma));
    }
    Ok(e_mm / gamma)
}

/// Tolerable number of waiting trains, `0.479 · exp(−1.3 · p_pt)`.
pub fn waiting_threshold(p_pt: f64) -> Result<f64, ApproxError> {
    if !(0.0..=1.0).contains(&p_pt) {
        return Err(ApproxError::PassengerRatio(p_pt));
    }
    Ok(0.479 * (-1.3 * p_pt).exp())
}

/// Threshold in the Markovian model, `γ · L*`.
pub fn model_threshold(l_star: f64, gamma: f64) -> Result<f64, ApproxError> {
    if !(gamma > 0.0) {
        return Err(ApproxError::Gamma(gamma));
    }
    Ok(gamma * l_star)
}
