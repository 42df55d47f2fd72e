//! Two-layer ReLU value network `Q(x; W, a) = (1/√m) Σ_i a_i σ(W_iᵀx)`.
//!
//! Weights are stored as contiguous `d`-blocks per neuron, so a flattened
//! `m·d` slice is the concatenation `[W_1, …, W_m]`. Output signs `a` are
//! drawn once and never change. The ReLU derivative uses `𝕀{z ≥ 0}`.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ReLU activation indicator, shared by forward, gradient and kernel code.
#[inline]
pub fn active(z: f64) -> bool {
    z >= 0.0
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    width: usize,
    input_dim: usize,
    signs: Vec<f64>,
    init_weights: Vec<f64>,
    weights: Vec<f64>,
    avg_weights: Vec<f64>,
    seed: Option<u64>,
}

impl NetworkState {
    /// Symmetric initialization: for `i < m/2`, `a_i = -a_{i+m/2} ~ Unif{±1}` and
    /// `W_i(0) = W_{i+m/2}(0) ~ N(0, I_d)`. Sets `W = Ŵ = W(0)`.
    pub fn init_symmetric<R: Rng + ?Sized>(width: usize, input_dim: usize, rng: &mut R) -> Result<Self> {
        if width == 0 || width % 2 != 0 {
            return Err(Error::WidthNotEven(width));
        }
        if input_dim == 0 {
            return Err(Error::InvalidParameter("input dimension must be positive".into()));
        }
        let half = width / 2;
        let mut signs = vec![0.0; width];
        let mut init = vec![0.0; width * input_dim];
        for i in 0..half {
            let a = if rng.random::<bool>() { 1.0 } else { -1.0 };
            signs[i] = a;
            signs[i + half] = -a;
            for k in 0..input_dim {
                let w: f64 = rng.sample(StandardNormal);
                init[i * input_dim + k] = w;
                init[(i + half) * input_dim + k] = w;
            }
        }
        Ok(Self {
            width,
            input_dim,
            signs,
            weights: init.clone(),
            avg_weights: init.clone(),
            init_weights: init,
            seed: None,
        })
    }

    /// Same as [`init_symmetric`](Self::init_symmetric) with a ChaCha8 stream
    /// seeded from `seed`; the seed is kept for checkpoints.
    pub fn init_seeded(width: usize, input_dim: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Self::init_symmetric(width, input_dim, &mut rng)?;
        net.seed = Some(seed);
        Ok(net)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn init_weights(&self) -> &[f64] {
        &self.init_weights
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn avg_weights(&self) -> &[f64] {
        &self.avg_weights
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn n_params(&self) -> usize {
        self.width * self.input_dim
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub(crate) fn parts_mut(&mut self) -> (&[f64], &mut [f64], &mut [f64]) {
        (&self.init_weights, &mut self.weights, &mut self.avg_weights)
    }

    pub fn neuron<'a>(&self, weights: &'a [f64], i: usize) -> &'a [f64] {
        &weights[i * self.input_dim..(i + 1) * self.input_dim]
    }

    /// Replaces the current weights, e.g. to evaluate a perturbed network.
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        self.check_params(&weights)?;
        self.weights = weights;
        Ok(())
    }

    /// `Q(x; W(t), a)`.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.eval(&self.weights, x))
    }

    /// `Q(x; Ŵ, a)`, the averaged-iterate output.
    pub fn forward_avg(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.eval(&self.avg_weights, x))
    }

    /// `Q(x; weights, a)` for an arbitrary weight matrix.
    pub fn forward_with(&self, weights: &[f64], x: &[f64]) -> Result<f64> {
        self.check_params(weights)?;
        self.check_input(x)?;
        Ok(self.eval(weights, x))
    }

    /// Sums each symmetric pair before accumulating, so paired neurons with
    /// identical weights cancel exactly.
    pub(crate) fn eval(&self, weights: &[f64], x: &[f64]) -> f64 {
        let d = self.input_dim;
        let half = self.width / 2;
        let mut acc = 0.0;
        for i in 0..half {
            let j = i + half;
            let zi = dot(&weights[i * d..(i + 1) * d], x);
            let zj = dot(&weights[j * d..(j + 1) * d], x);
            acc += self.signs[i] * zi.max(0.0) + self.signs[j] * zj.max(0.0);
        }
        acc / (self.width as f64).sqrt()
    }

    /// `∇_W Q(x)` at the current weights, flattened.
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut out = vec![0.0; self.n_params()];
        self.grad_into(&self.weights, x, &mut out);
        Ok(out)
    }

    /// `∇_W Q(x)` evaluated at `weights` (activation pattern of `weights`).
    pub fn grad_at(&self, weights: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_params(weights)?;
        self.check_input(x)?;
        let mut out = vec![0.0; self.n_params()];
        self.grad_into(weights, x, &mut out);
        Ok(out)
    }

    pub(crate) fn grad_into(&self, weights: &[f64], x: &[f64], out: &mut [f64]) {
        let d = self.input_dim;
        let scale = 1.0 / (self.width as f64).sqrt();
        for i in 0..self.width {
            let block = &mut out[i * d..(i + 1) * d];
            if active(dot(&weights[i * d..(i + 1) * d], x)) {
                let c = self.signs[i] * scale;
                for (b, xk) in block.iter_mut().zip(x) {
                    *b = c * xk;
                }
            } else {
                block.fill(0.0);
            }
        }
    }

    /// `∇_W Q₀(x) · weights`: the network linearized around `W(0)`.
    pub fn linearized_forward(&self, weights: &[f64], x: &[f64]) -> Result<f64> {
        self.check_params(weights)?;
        self.check_input(x)?;
        let d = self.input_dim;
        let half = self.width / 2;
        let term = |i: usize| {
            let r = i * d..(i + 1) * d;
            if active(dot(&self.init_weights[r.clone()], x)) {
                self.signs[i] * dot(&weights[r], x)
            } else {
                0.0
            }
        };
        let acc: f64 = (0..half).map(|i| term(i) + term(i + half)).sum();
        Ok(acc / (self.width as f64).sqrt())
    }

    /// `K̂(x, y) = (1/m) Σ_i 𝕀{W_iᵀx ≥ 0} 𝕀{W_iᵀy ≥ 0} xᵀy` at the current weights.
    pub fn empirical_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        self.check_input(y)?;
        let d = self.input_dim;
        let both = (0..self.width)
            .filter(|&i| {
                let w = &self.weights[i * d..(i + 1) * d];
                active(dot(w, x)) && active(dot(w, y))
            })
            .count();
        Ok(both as f64 / self.width as f64 * dot(x, y))
    }

    /// `(1/m) Σ_i 𝕀{|W_i(0)ᵀx| ≤ eps}`.
    pub fn active_fraction(&self, x: &[f64], eps: f64) -> Result<f64> {
        self.check_input(x)?;
        let d = self.input_dim;
        let near = (0..self.width)
            .filter(|&i| dot(&self.init_weights[i * d..(i + 1) * d], x).abs() <= eps)
            .count();
        Ok(near as f64 / self.width as f64)
    }

    /// Neurons whose activation indicator at `x` differs between `W(0)` and `weights`.
    pub fn flip_set_at(&self, weights: &[f64], x: &[f64]) -> Result<Vec<usize>> {
        self.check_params(weights)?;
        self.check_input(x)?;
        let d = self.input_dim;
        Ok((0..self.width)
            .filter(|&i| {
                let r = i * d..(i + 1) * d;
                active(dot(&self.init_weights[r.clone()], x)) != active(dot(&weights[r], x))
            })
            .collect())
    }

    /// `|S_x(t)|` at the current weights.
    pub fn flip_set_size(&self, x: &[f64]) -> Result<usize> {
        self.flip_set_at(&self.weights, x).map(|s| s.len())
    }

    /// `‖W_i − W_i(0)‖₂` for neuron `i` of `weights`.
    pub fn neuron_drift(&self, weights: &[f64], i: usize) -> f64 {
        let d = self.input_dim;
        let r = i * d..(i + 1) * d;
        weights[r.clone()]
            .iter()
            .zip(&self.init_weights[r])
            .map(|(w, w0)| (w - w0) * (w - w0))
            .sum::<f64>()
            .sqrt()
    }

    /// `max_i ‖W_i(t) − W_i(0)‖₂`.
    pub fn max_drift(&self) -> f64 {
        (0..self.width).map(|i| self.neuron_drift(&self.weights, i)).fold(0.0, f64::max)
    }

    /// Flattened `‖W(t) − W(0)‖₂`.
    pub fn total_drift(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.init_weights)
            .map(|(w, w0)| (w - w0) * (w - w0))
            .sum::<f64>()
            .sqrt()
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let net: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        if self.width == 0 || self.width % 2 != 0 {
            return Err(Error::WidthNotEven(self.width));
        }
        let n = self.n_params();
        for len in [self.init_weights.len(), self.weights.len(), self.avg_weights.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        if self.signs.len() != self.width {
            return Err(Error::DimensionMismatch { expected: self.width, got: self.signs.len() });
        }
        let half = self.width / 2;
        let d = self.input_dim;
        for i in 0..half {
            let j = i + half;
            let paired = self.signs[i] == -self.signs[j]
                && self.signs[i].abs() == 1.0
                && self.init_weights[i * d..(i + 1) * d] == self.init_weights[j * d..(j + 1) * d];
            if !paired {
                return Err(Error::InvalidParameter(format!(
                    "checkpoint violates symmetric pairing at neuron {i}"
                )));
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.len() });
        }
        Ok(())
    }

    fn check_params(&self, w: &[f64]) -> Result<()> {
        if w.len() != self.n_params() {
            return Err(Error::DimensionMismatch { expected: self.n_params(), got: w.len() });
        }
        Ok(())
    }
}

/// Closed form of the NTK `K(x, y) = E[𝕀{wᵀx ≥ 0} 𝕀{wᵀy ≥ 0}] xᵀy` for
/// `w ~ N(0, I)`: `xᵀy (π − θ) / (2π)` with `θ` the angle between `x` and `y`.
pub fn ntk_closed_form(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let nx = dot(x, x).sqrt();
    let ny = dot(y, y).sqrt();
    if nx == 0.0 || ny == 0.0 {
        return Err(Error::ZeroVector);
    }
    let xy = dot(x, y);
    let theta = angle(x, nx, y, ny);
    Ok(xy * (PI - theta) / (2.0 * PI))
}

/// Angle between `x` and `y` via `2 atan2(‖x̂ − ŷ‖, ‖x̂ + ŷ‖)`, accurate near 0 and π.
pub(crate) fn angle(x: &[f64], nx: f64, y: &[f64], ny: f64) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (u, v) = (a / nx, b / ny);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}
