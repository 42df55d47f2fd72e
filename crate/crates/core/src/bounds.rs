//! Hyperparameter and error-bound calculators for PF and MN neural TD.
//!
//! All logarithms are natural. The implicit width `m₀` (and the MN width
//! threshold) is resolved by fixed-point iteration started at `m = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::NetworkState;

const FIXED_POINT_RTOL: f64 = 1e-9;
const FIXED_POINT_MAX_ITERS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub nu_bar: f64,
    pub gamma: f64,
    pub eps: f64,
    pub delta: f64,
    pub d: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfBounds {
    pub inputs: BoundInputs,
    pub lambda: f64,
    pub m0: f64,
    pub ell_m0: f64,
    pub alpha0: f64,
    /// `ν̄² / (4 α₀ (1−γ) ε²)`, unrounded.
    pub horizon: f64,
    pub m0_residual: f64,
    pub fixed_point_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnBounds {
    pub inputs: BoundInputs,
    pub radius: f64,
    pub horizon: u64,
    pub m_min: f64,
    pub ell_m_min: f64,
    pub alpha: f64,
    pub predicted_error: f64,
    pub m_min_residual: f64,
    pub fixed_point_iterations: usize,
}

/// `ℓ(m, δ) = 4 √(d log(2m+1)) + 4 √(log(1/δ))`.
pub fn ell(m: f64, delta: f64, d: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {delta}")));
    }
    if !(m >= 1.0) {
        return Err(Error::InvalidParameter(format!("m must be >= 1, got {m}")));
    }
    Ok(4.0 * (d as f64 * (2.0 * m + 1.0).ln()).sqrt() + 4.0 * (1.0 / delta).ln().sqrt())
}

fn check_inputs(inp: &BoundInputs) -> Result<()> {
    let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} out of range: {v}")));
    if !(inp.nu_bar > 0.0 && inp.nu_bar.is_finite()) {
        return bad("nu_bar", inp.nu_bar);
    }
    if !(inp.gamma > 0.0 && inp.gamma < 1.0) {
        return bad("gamma", inp.gamma);
    }
    if !(inp.eps > 0.0 && inp.eps.is_finite()) {
        return bad("eps", inp.eps);
    }
    if !(inp.delta > 0.0 && inp.delta < 1.0) {
        return bad("delta", inp.delta);
    }
    if inp.d == 0 {
        return Err(Error::InvalidParameter("d must be positive".into()));
    }
    Ok(())
}

/// `16 (ν̄ + (b + ℓ(m, δ)) (ν̄ + b))² / ((1−γ)² ε²)` for a drift scale `b` (λ or R).
fn width_map(m: f64, drift: f64, inp: &BoundInputs) -> Result<f64> {
    let l = ell(m, inp.delta, inp.d)?;
    let num = inp.nu_bar + (drift + l) * (inp.nu_bar + drift);
    let den = (1.0 - inp.gamma) * inp.eps;
    Ok(16.0 * num * num / (den * den))
}

/// Returns `(m, residual, iterations)` with `m = width_map(m)`.
fn solve_width(drift: f64, inp: &BoundInputs) -> Result<(f64, f64, usize)> {
    let mut m = 1.0;
    for it in 1..=FIXED_POINT_MAX_ITERS {
        let next = width_map(m, drift, inp)?;
        if !next.is_finite() {
            return Err(Error::FixedPointDiverged { iterations: it, last: next });
        }
        let rel = (next - m).abs() / next;
        m = next;
        if rel < FIXED_POINT_RTOL {
            let residual = (width_map(m, drift, inp)? - m).abs() / m;
            return Ok((m, residual, it));
        }
    }
    Err(Error::FixedPointDiverged { iterations: FIXED_POINT_MAX_ITERS, last: m })
}

pub fn pf_bounds(nu_bar: f64, gamma: f64, eps: f64, delta: f64, d: usize) -> Result<PfBounds> {
    let inputs = BoundInputs { nu_bar, gamma, eps, delta, d };
    check_inputs(&inputs)?;
    let lambda = 3.0 * nu_bar * nu_bar / ((1.0 - gamma) * eps * delta);
    let (m0, m0_residual, iters) = solve_width(lambda, &inputs)?;
    let root = (d as f64).sqrt() + (2.0 * (m0 / delta).ln()).sqrt();
    let ratio = lambda * lambda / (32.0 * nu_bar * nu_bar * root * root);
    let alpha0 = (1.0 - gamma) * eps * eps / ((1.0 + 2.0 * lambda).powi(2)) * ratio.min(1.0);
    let horizon = nu_bar * nu_bar / (4.0 * alpha0 * (1.0 - gamma) * eps * eps);
    Ok(PfBounds {
        ell_m0: ell(m0, delta, d)?,
        inputs,
        lambda,
        m0,
        alpha0,
        horizon,
        m0_residual,
        fixed_point_iterations: iters,
    })
}

pub fn mn_bounds(
    nu_bar: f64,
    gamma: f64,
    eps: f64,
    delta: f64,
    d: usize,
    radius: f64,
    horizon: u64,
) -> Result<MnBounds> {
    let inputs = BoundInputs { nu_bar, gamma, eps, delta, d };
    check_inputs(&inputs)?;
    if !(radius > nu_bar) {
        return Err(Error::RadiusBelowRealizability { radius, nu_bar });
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let (m_min, m_min_residual, iters) = solve_width(radius, &inputs)?;
    Ok(MnBounds {
        ell_m_min: ell(m_min, delta, d)?,
        inputs,
        radius,
        horizon,
        m_min,
        alpha: mn_step_size(gamma, eps, radius),
        predicted_error: (1.0 + 2.0 * radius) * nu_bar / (eps * (horizon as f64).sqrt()) + 3.0 * eps,
        m_min_residual,
        fixed_point_iterations: iters,
    })
}

/// `α = ε² (1−γ) / (1 + 2R)²`.
pub fn mn_step_size(gamma: f64, eps: f64, radius: f64) -> f64 {
    eps * eps * (1.0 - gamma) / ((1.0 + 2.0 * radius) * (1.0 + 2.0 * radius))
}

/// Whether the initialization event `E₁` holds on the given inputs:
/// `max_x (1/m) Σ_i 𝕀{|W_i(0)ᵀx| ≤ b/√m} ≤ (b + ℓ(m, δ)) / √m`.
pub fn initialization_event(net: &NetworkState, inputs: &[Vec<f64>], drift: f64, delta: f64) -> Result<bool> {
    let m = net.width() as f64;
    let threshold = (drift + ell(m, delta, net.input_dim())?) / m.sqrt();
    for x in inputs {
        if net.active_fraction(x, drift / m.sqrt())? > threshold {
            return Ok(false);
        }
    }
    Ok(true)
}
