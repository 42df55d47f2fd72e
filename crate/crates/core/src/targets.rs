//! Value functions in the NTK-realizable class `V(x) = E[v(w)ᵀφ(x; w)]`,
//! `w ~ N(0, I_d)`, `φ(x; w) = 𝕀{wᵀx ≥ 0} x`, with `sup_w ‖v(w)‖ ≤ ν̄`.
//!
//! Each family has a closed form:
//!
//! * constant direction, `v(w) = ν̄ u`: `V(x) = (ν̄/2) uᵀx`
//! * sign gated, `v(w) = ν̄ u sign(wᵀz)`: `V(x) = ν̄ uᵀx (π − 2θ(x, z)) / (2π)`
//! * mixtures combine linearly, with `ν̄ = Σ |coef_k| ν̄_k`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrp::{l2_norm, weighted_norm_unchecked, MarkovRewardProcess};
use crate::network::{active, angle, dot, NetworkState};

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum TargetSpec {
    ConstantDirection { nu_bar: f64, u: Vec<f64> },
    SignGated { nu_bar: f64, u: Vec<f64>, z: Vec<f64> },
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub coef: f64,
    pub target: TargetSpec,
}

/// A validated realizable target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetValueFn {
    spec: TargetSpec,
    nu_bar: f64,
    dim: usize,
}

pub fn make_target(spec: TargetSpec, dim: usize) -> Result<TargetValueFn> {
    let nu_bar = validate(&spec, dim)?;
    Ok(TargetValueFn { spec, nu_bar, dim })
}

fn validate(spec: &TargetSpec, dim: usize) -> Result<f64> {
    let check_dir = |v: &[f64]| -> Result<()> {
        if v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.len() });
        }
        let n = l2_norm(v);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::NonUnitDirection(n));
        }
        Ok(())
    };
    let check_nu = |nu: f64| -> Result<()> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidParameter(format!("nu_bar must be positive, got {nu}")));
        }
        Ok(())
    };
    match spec {
        TargetSpec::ConstantDirection { nu_bar, u } => {
            check_nu(*nu_bar)?;
            check_dir(u)?;
            Ok(*nu_bar)
        }
        TargetSpec::SignGated { nu_bar, u, z } => {
            check_nu(*nu_bar)?;
            check_dir(u)?;
            check_dir(z)?;
            Ok(*nu_bar)
        }
        TargetSpec::Mixture { components } => {
            if components.is_empty() {
                return Err(Error::InvalidParameter("mixture needs at least one component".into()));
            }
            let mut total = 0.0;
            for c in components {
                if !c.coef.is_finite() {
                    return Err(Error::InvalidParameter("mixture coefficient must be finite".into()));
                }
                total += c.coef.abs() * validate(&c.target, dim)?;
            }
            Ok(total)
        }
    }
}

impl TargetValueFn {
    pub fn nu_bar(&self) -> f64 {
        self.nu_bar
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    /// `v(w)`, the feature-space coefficient function.
    pub fn v(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        accumulate_v(&self.spec, 1.0, w, &mut out);
        out
    }

    /// Closed-form `V(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        closed_form(&self.spec, x)
    }

    /// `V` at every state of `mrp`.
    pub fn values_on(&self, mrp: &MarkovRewardProcess) -> Vec<f64> {
        mrp.features().iter().map(|x| self.value(x)).collect()
    }

    /// Monte Carlo estimate of `E[v(w)ᵀφ(x; w)]` with its standard error.
    pub fn evaluate_mc<R: Rng + ?Sized>(&self, x: &[f64], n_samples: usize, rng: &mut R) -> (f64, f64) {
        assert!(n_samples >= 2, "need at least two samples");
        let mut w = vec![0.0; self.dim];
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for k in 0..n_samples {
            for wi in w.iter_mut() {
                *wi = rng.sample(StandardNormal);
            }
            let f = if active(dot(&w, x)) { dot(&self.v(&w), x) } else { 0.0 };
            let delta = f - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (f - mean);
        }
        let var = m2 / (n_samples - 1) as f64;
        (mean, (var / n_samples as f64).sqrt())
    }

    /// `W̄ = [W_i(0) + a_i v(W_i(0)) / √m]`.
    pub fn attraction_point(&self, net: &NetworkState) -> Result<Vec<f64>> {
        if net.input_dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: net.input_dim() });
        }
        let d = self.dim;
        let scale = 1.0 / (net.width() as f64).sqrt();
        let mut out = net.init_weights().to_vec();
        for i in 0..net.width() {
            let v = self.v(net.neuron(net.init_weights(), i));
            let a = net.signs()[i];
            for (o, vk) in out[i * d..(i + 1) * d].iter_mut().zip(&v) {
                *o += a * vk * scale;
            }
        }
        Ok(out)
    }

    /// `‖V − ∇ᵀQ₀ W̄‖_π` over the states of `mrp`, with `V` the closed form.
    pub fn realization_error(&self, net: &NetworkState, mrp: &MarkovRewardProcess) -> Result<f64> {
        let w_bar = self.attraction_point(net)?;
        let diff = mrp
            .features()
            .iter()
            .map(|x| Ok(self.value(x) - net.linearized_forward(&w_bar, x)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(weighted_norm_unchecked(mrp.stationary_distribution().probs(), &diff))
    }
}

fn sign(z: f64) -> f64 {
    if z >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn accumulate_v(spec: &TargetSpec, coef: f64, w: &[f64], out: &mut [f64]) {
    match spec {
        TargetSpec::ConstantDirection { nu_bar, u } => {
            for (o, uk) in out.iter_mut().zip(u) {
                *o += coef * nu_bar * uk;
            }
        }
        TargetSpec::SignGated { nu_bar, u, z } => {
            let s = sign(dot(w, z));
            for (o, uk) in out.iter_mut().zip(u) {
                *o += coef * nu_bar * s * uk;
            }
        }
        TargetSpec::Mixture { components } => {
            for c in components {
                accumulate_v(&c.target, coef * c.coef, w, out);
            }
        }
    }
}

fn closed_form(spec: &TargetSpec, x: &[f64]) -> f64 {
    match spec {
        TargetSpec::ConstantDirection { nu_bar, u } => 0.5 * nu_bar * dot(u, x),
        TargetSpec::SignGated { nu_bar, u, z } => {
            let nx = l2_norm(x);
            if nx == 0.0 {
                return 0.0;
            }
            let theta = angle(x, nx, z, l2_norm(z));
            nu_bar * dot(u, x) * (PI - 2.0 * theta) / (2.0 * PI)
        }
        TargetSpec::Mixture { components } => {
            components.iter().map(|c| c.coef * closed_form(&c.target, x)).sum()
        }
    }
}
