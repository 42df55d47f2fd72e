//! Finite Markov reward processes with per-state feature vectors.
//!
//! The process is the environment for TD learning and also the exact oracle:
//! the stationary distribution and the value function are obtained by direct
//! linear solves, so every error reported downstream is free of sampling noise.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;
const FEATURE_NORM_TOL: f64 = 1e-12;
const BIAS_TOL: f64 = 1e-12;
const STATIONARITY_TOL: f64 = 1e-10;

/// Stationary distribution of a unichain, stored as a probability vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    probs: Vec<f64>,
}

impl StationaryDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// One i.i.d. observation `(s_t, s'_t)` with `s_t ~ π` and `s'_t ~ P(s_t, ·)`.
#[derive(Debug, Clone, Copy)]
pub struct SamplePair<'a> {
    pub state: usize,
    pub next_state: usize,
    pub features: &'a [f64],
    pub reward: f64,
    pub next_features: &'a [f64],
}

/// A validated finite Markov reward process.
///
/// Features are `d`-vectors whose last coordinate is the shared bias `c`.
#[derive(Debug, Clone)]
pub struct MarkovRewardProcess {
    n_states: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    discount: f64,
    features: Vec<Vec<f64>>,
    stationary: StationaryDistribution,
    state_sampler: WeightedIndex<f64>,
    row_samplers: Vec<WeightedIndex<f64>>,
}

impl MarkovRewardProcess {
    /// Validates and builds a process. `transition` is given as rows.
    pub fn new(
        transition: Vec<Vec<f64>>,
        reward: Vec<f64>,
        discount: f64,
        features: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = transition.len();
        if n == 0 {
            return Err(Error::InvalidParameter("process needs at least one state".into()));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::InvalidDiscount(discount));
        }
        if reward.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: reward.len() });
        }
        if features.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: features.len() });
        }

        let mut flat = Vec::with_capacity(n * n);
        for (row_idx, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: row.len() });
            }
            for (col, &p) in row.iter().enumerate() {
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::NegativeProbability { row: row_idx, col, value: p });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::RowNotStochastic { row: row_idx, sum });
            }
            flat.extend_from_slice(row);
        }

        for (state, &r) in reward.iter().enumerate() {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::RewardOutOfRange { state, value: r });
            }
        }

        let d = features[0].len();
        if d == 0 {
            return Err(Error::InvalidParameter("feature dimension must be positive".into()));
        }
        let bias = features[0][d - 1];
        if !(bias > 0.0 && bias < 1.0) {
            return Err(Error::InvalidBias { state: 0, value: bias });
        }
        for (state, x) in features.iter().enumerate() {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
            let norm = l2_norm(x);
            if !(norm <= 1.0 + FEATURE_NORM_TOL) {
                return Err(Error::FeatureNormTooLarge { state, norm });
            }
            if (x[d - 1] - bias).abs() > BIAS_TOL {
                return Err(Error::InvalidBias { state, value: x[d - 1] });
            }
        }

        let stationary = solve_stationary(n, &flat)?;
        let state_sampler = WeightedIndex::new(stationary.probs.iter().copied())
            .map_err(|e| Error::NotUnichain(format!("stationary distribution unusable: {e}")))?;
        let row_samplers = transition
            .iter()
            .map(|row| WeightedIndex::new(row.iter().copied()))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidParameter(format!("transition row unusable: {e}")))?;

        Ok(Self {
            n_states: n,
            transition: flat,
            reward,
            discount,
            features,
            stationary,
            state_sampler,
            row_samplers,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn feature_dim(&self) -> usize {
        self.features[0].len()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn bias(&self) -> f64 {
        self.features[0][self.feature_dim() - 1]
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature(&self, state: usize) -> &[f64] {
        &self.features[state]
    }

    pub fn transition_row(&self, state: usize) -> &[f64] {
        &self.transition[state * self.n_states..(state + 1) * self.n_states]
    }

    pub fn transition_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_states).map(|s| self.transition_row(s).to_vec()).collect()
    }

    pub fn stationary_distribution(&self) -> &StationaryDistribution {
        &self.stationary
    }

    /// Value function `V = (I - γP)^{-1} r`, the fixed point of the Bellman operator.
    pub fn exact_value(&self) -> Vec<f64> {
        let n = self.n_states;
        let a = DMatrix::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - self.discount * self.transition[i * n + j]
        });
        let b = DVector::from_column_slice(&self.reward);
        // I - γP is strictly diagonally dominant for γ < 1, so LU never fails here.
        let v = a.lu().solve(&b).expect("I - γP is nonsingular for γ < 1");
        v.iter().copied().collect()
    }

    /// `r + γ P v`.
    pub fn bellman_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        Ok((0..self.n_states)
            .map(|s| {
                let expected: f64 =
                    self.transition_row(s).iter().zip(v).map(|(p, x)| p * x).sum();
                self.reward[s] + self.discount * expected
            })
            .collect())
    }

    /// `sqrt(Σ_s π(s) f(s)²)`.
    pub fn weighted_norm(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f)?;
        Ok(weighted_norm_unchecked(self.stationary.probs(), f))
    }

    /// Mean-squared Bellman error `‖v - 𝒯v‖²_π`.
    pub fn msbe(&self, v: &[f64]) -> Result<f64> {
        let tv = self.bellman_apply(v)?;
        let diff: Vec<f64> = v.iter().zip(&tv).map(|(a, b)| a - b).collect();
        let norm = weighted_norm_unchecked(self.stationary.probs(), &diff);
        Ok(norm * norm)
    }

    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> SamplePair<'_> {
        let state = self.state_sampler.sample(rng);
        let next_state = self.row_samplers[state].sample(rng);
        SamplePair {
            state,
            next_state,
            features: &self.features[state],
            reward: self.reward[state],
            next_features: &self.features[next_state],
        }
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: MrpFile = serde_json::from_str(&text)?;
        file.into_mrp()
    }

    pub fn to_file(&self) -> MrpFile {
        let d = self.feature_dim();
        MrpFile {
            n_states: self.n_states,
            gamma: self.discount,
            transition: self.transition.clone(),
            reward: self.reward.clone(),
            features: self.features.iter().flat_map(|x| x[..d - 1].iter().copied()).collect(),
            bias_c: self.bias(),
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_states {
            return Err(Error::DimensionMismatch { expected: self.n_states, got: v.len() });
        }
        Ok(())
    }
}

/// On-disk description of a process.
///
/// `features` holds the raw per-state coordinates row-major; `bias_c` is
/// appended to every row on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrpFile {
    pub n_states: usize,
    pub gamma: f64,
    pub transition: Vec<f64>,
    pub reward: Vec<f64>,
    pub features: Vec<f64>,
    pub bias_c: f64,
}

impl MrpFile {
    pub fn into_mrp(self) -> Result<MarkovRewardProcess> {
        let n = self.n_states;
        if n == 0 {
            return Err(Error::InvalidParameter("n_states must be positive".into()));
        }
        if self.transition.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: self.transition.len() });
        }
        if self.features.len() % n != 0 {
            return Err(Error::InvalidParameter(format!(
                "features length {} is not a multiple of n_states {n}",
                self.features.len()
            )));
        }
        let raw_dim = self.features.len() / n;
        let rows = self.transition.chunks(n).map(<[f64]>::to_vec).collect();
        let features = (0..n)
            .map(|s| {
                let mut x = self.features[s * raw_dim..(s + 1) * raw_dim].to_vec();
                x.push(self.bias_c);
                x
            })
            .collect();
        MarkovRewardProcess::new(rows, self.reward, self.gamma, features)
    }
}

/// Affine map relating an engineered process's value function to the target:
/// `exact_value = scale * v_target + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub scale: f64,
    pub shift: f64,
}

impl Rescale {
    pub fn apply(&self, v: f64) -> f64 {
        self.scale * v + self.shift
    }
}

/// Builds a process whose value function is an affine image of `v_target`.
///
/// Raw rewards `u = (I - γP) v_target` are scaled by the largest `a <= 1`
/// that fits their range into `[0,1]`, then shifted by the constant `β`
/// closest to zero that puts them inside `[0,1]`. The value function is
/// then `a * v_target + β / (1 - γ)`.
pub fn mrp_from_target_value(
    transition: Vec<Vec<f64>>,
    discount: f64,
    v_target: &[f64],
    features: Vec<Vec<f64>>,
) -> Result<(MarkovRewardProcess, Rescale)> {
    let n = transition.len();
    if v_target.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v_target.len() });
    }
    if v_target.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("target value must be finite".into()));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::InvalidDiscount(discount));
    }
    for row in &transition {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: row.len() });
        }
    }
    let raw: Vec<f64> = (0..n)
        .map(|s| {
            let next: f64 = transition[s].iter().zip(v_target).map(|(p, v)| p * v).sum();
            v_target[s] - discount * next
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let scale = if range > 1.0 { 1.0 / range } else { 1.0 };
    // feasible β: scale*lo + β >= 0 and scale*hi + β <= 1
    let beta_lo = -scale * lo;
    let beta_hi = 1.0 - scale * hi;
    let beta = 0.0_f64.clamp(beta_lo, beta_hi.max(beta_lo));
    let reward: Vec<f64> = raw.iter().map(|u| (scale * u + beta).clamp(0.0, 1.0)).collect();
    let mrp = MarkovRewardProcess::new(transition, reward, discount, features)?;
    Ok((mrp, Rescale { scale, shift: beta / (1.0 - discount) }))
}

/// Scales raw feature rows by a common factor so every row has norm at most
/// `sqrt(1 - c²)`, then appends the bias `c`. The result satisfies `‖x‖ ≤ 1`.
pub fn build_features(raw: &[Vec<f64>], bias_c: f64) -> Result<Vec<Vec<f64>>> {
    if !(bias_c > 0.0 && bias_c < 1.0) {
        return Err(Error::InvalidBias { state: 0, value: bias_c });
    }
    let max_norm = raw.iter().map(|x| l2_norm(x)).fold(0.0, f64::max);
    let mut factor = if max_norm > 0.0 { (1.0 - bias_c * bias_c).sqrt() / max_norm } else { 0.0 };
    loop {
        let out: Vec<Vec<f64>> = raw
            .iter()
            .map(|x| {
                let mut v: Vec<f64> = x.iter().map(|xi| xi * factor).collect();
                v.push(bias_c);
                v
            })
            .collect();
        if out.iter().all(|x| l2_norm(x) <= 1.0) {
            return Ok(out);
        }
        factor *= 1.0 - 4.0 * f64::EPSILON;
    }
}

/// Dense random row-stochastic matrix with strictly positive entries (hence ergodic).
pub fn random_transition<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let sum: f64 = row.iter().sum();
            row.into_iter().map(|p| p / sum).collect()
        })
        .collect()
}

/// Gaussian raw features of dimension `raw_dim`, passed through [`build_features`].
pub fn random_features<R: Rng + ?Sized>(
    n: usize,
    raw_dim: usize,
    bias_c: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let raw: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..raw_dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    build_features(&raw, bias_c)
}

/// Random ergodic process with uniform rewards in `[0,1]`.
pub fn random_mrp<R: Rng + ?Sized>(
    n: usize,
    raw_dim: usize,
    discount: f64,
    bias_c: f64,
    rng: &mut R,
) -> Result<MarkovRewardProcess> {
    let transition = random_transition(n, rng);
    let reward = (0..n).map(|_| rng.random::<f64>()).collect();
    let features = random_features(n, raw_dim, bias_c, rng)?;
    MarkovRewardProcess::new(transition, reward, discount, features)
}

pub(crate) fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn weighted_norm_unchecked(probs: &[f64], f: &[f64]) -> f64 {
    probs.iter().zip(f).map(|(p, v)| p * v * v).sum::<f64>().sqrt()
}

/// Solves `πᵀ(P - I) = 0`, `Σπ = 1` directly by replacing one balance equation
/// with the normalization row.
fn solve_stationary(n: usize, p: &[f64]) -> Result<StationaryDistribution> {
    let mut a = DMatrix::from_fn(n, n, |i, j| p[j * n + i] - if i == j { 1.0 } else { 0.0 });
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;

    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax.max(1.0)) {
        return Err(Error::NotUnichain(format!(
            "stationary system is singular (smallest singular value {smin:e})"
        )));
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NotUnichain("stationary system is singular".into()))?;

    let mut probs: Vec<f64> = x.iter().copied().collect();
    if probs.iter().any(|&v| v < -1e-10) {
        return Err(Error::NotUnichain("solve produced negative mass".into()));
    }
    for v in probs.iter_mut() {
        *v = v.max(0.0);
    }
    let sum: f64 = probs.iter().sum();
    for v in probs.iter_mut() {
        *v /= sum;
    }

    let residual = (0..n)
        .map(|j| {
            let pj: f64 = (0..n).map(|i| probs[i] * p[i * n + j]).sum();
            (pj - probs[j]).abs()
        })
        .fold(0.0, f64::max);
    if residual > STATIONARITY_TOL {
        return Err(Error::NotUnichain(format!("stationarity residual {residual:e}")));
    }
    Ok(StationaryDistribution { probs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_state(p: Vec<Vec<f64>>) -> Result<MarkovRewardProcess> {
        MarkovRewardProcess::new(p, vec![0.2, 0.7], 0.9, vec![vec![0.3, 0.5], vec![-0.3, 0.5]])
    }

    #[test]
    fn degenerate_single_state() {
        let mrp =
            MarkovRewardProcess::new(vec![vec![1.0]], vec![1.0], 0.5, vec![vec![0.0, 0.5]]).unwrap();
        assert_eq!(mrp.stationary_distribution().probs(), &[1.0]);
        let v = mrp.exact_value();
        assert!((v[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_stochastic_row() {
        let err = two_state(vec![vec![0.5, 0.6], vec![0.5, 0.5]]).unwrap_err();
        assert!(matches!(err, Error::RowNotStochastic { row: 0, .. }));
        assert!(err.to_string().contains("row not stochastic"));
    }

    #[test]
    fn rejects_reward_outside_unit_interval() {
        let err = MarkovRewardProcess::new(vec![vec![1.0]], vec![1.2], 0.5, vec![vec![0.0, 0.5]])
            .unwrap_err();
        assert!(err.to_string().contains("reward outside unit interval"));
    }

    #[test]
    fn rejects_large_feature_norm() {
        let err = MarkovRewardProcess::new(vec![vec![1.0]], vec![0.5], 0.5, vec![vec![1.0, 0.5]])
            .unwrap_err();
        assert!(matches!(err, Error::FeatureNormTooLarge { .. }));
    }

    #[test]
    fn rejects_inconsistent_bias() {
        let err = MarkovRewardProcess::new(
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![0.5, 0.5],
            0.5,
            vec![vec![0.1, 0.5], vec![0.1, 0.4]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidBias { state: 1, .. }));
    }

    #[test]
    fn rejects_reducible_chain() {
        let err = two_state(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NotUnichain(_)));
    }

    #[test]
    fn rejects_bad_discount() {
        let err = MarkovRewardProcess::new(vec![vec![1.0]], vec![0.5], 1.0, vec![vec![0.0, 0.5]])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidDiscount(_)));
    }

    #[test]
    fn stationary_symmetric_and_absorbing() {
        let mrp = two_state(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let pi = mrp.stationary_distribution().probs();
        assert!((pi[0] - 0.5).abs() < 1e-15 && (pi[1] - 0.5).abs() < 1e-15);

        let mrp = two_state(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let pi = mrp.stationary_distribution().probs();
        assert!((pi[0] - 1.0).abs() < 1e-15 && pi[1].abs() < 1e-15);
    }

    #[test]
    fn periodic_chain_has_unique_stationary() {
        let mrp = two_state(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let pi = mrp.stationary_distribution().probs();
        assert!((pi[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn zero_reward_gives_zero_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_transition(4, &mut rng);
        let f = random_features(4, 2, 0.5, &mut rng).unwrap();
        let mrp = MarkovRewardProcess::new(p, vec![0.0; 4], 0.7, f).unwrap();
        assert!(mrp.exact_value().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn bellman_zero_input_returns_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mrp = random_mrp(5, 3, 0.8, 0.5, &mut rng).unwrap();
        assert_eq!(mrp.bellman_apply(&[0.0; 5]).unwrap(), mrp.reward());
        assert!(matches!(
            mrp.bellman_apply(&[0.0; 4]),
            Err(Error::DimensionMismatch { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn weighted_norm_examples() {
        let mrp = two_state(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(mrp.weighted_norm(&[0.0, 0.0]).unwrap(), 0.0);
        assert!((mrp.weighted_norm(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((mrp.weighted_norm(&[1.0, 2.0]).unwrap() - 2.5_f64.sqrt()).abs() < 1e-15);
        assert!(mrp.weighted_norm(&[1.0]).is_err());
    }

    #[test]
    fn single_state_sampling_is_trivial() {
        let mrp =
            MarkovRewardProcess::new(vec![vec![1.0]], vec![1.0], 0.5, vec![vec![0.0, 0.5]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let s = mrp.sample_pair(&mut rng);
            assert_eq!((s.state, s.next_state), (0, 0));
        }
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mrp = random_mrp(6, 2, 0.9, 0.5, &mut rng).unwrap();
        let draw = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            (0..500).map(|_| {
                let s = mrp.sample_pair(&mut r);
                (s.state, s.next_state)
            }).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn target_engineering_zero_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_transition(4, &mut rng);
        let f = random_features(4, 2, 0.5, &mut rng).unwrap();
        let (mrp, rescale) = mrp_from_target_value(p, 0.6, &[0.0; 4], f).unwrap();
        assert_eq!(rescale, Rescale { scale: 1.0, shift: 0.0 });
        assert!(mrp.reward().iter().all(|&r| r == 0.0));
        assert!(mrp.exact_value().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn target_engineering_direct_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = random_transition(5, &mut rng);
        let f = random_features(5, 3, 0.5, &mut rng).unwrap();
        let target = [0.3, 0.1, 0.2, 0.4, 0.25];
        let (mrp, rescale) = mrp_from_target_value(p, 0.5, &target, f).unwrap();
        assert_eq!(rescale.scale, 1.0);
        let v = mrp.exact_value();
        for (vs, ts) in v.iter().zip(&target) {
            assert!((vs - rescale.apply(*ts)).abs() < 1e-12);
        }
    }

    #[test]
    fn file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mrp = random_mrp(3, 2, 0.9, 0.5, &mut rng).unwrap();
        let text = serde_json::to_string(&mrp.to_file()).unwrap();
        let back: MrpFile = serde_json::from_str(&text).unwrap();
        let back = back.into_mrp().unwrap();
        assert_eq!(back.features(), mrp.features());
        assert_eq!(back.reward(), mrp.reward());
        assert_eq!(back.transition_rows(), mrp.transition_rows());
    }

    #[test]
    fn build_features_respects_unit_ball() {
        let raw = vec![vec![3.0, 4.0], vec![1.0, 0.0], vec![0.0, 0.0]];
        let f = build_features(&raw, 0.5).unwrap();
        for x in &f {
            assert!(l2_norm(x) <= 1.0);
            assert_eq!(*x.last().unwrap(), 0.5);
        }
        assert!((l2_norm(&f[0]) - 1.0).abs() < 1e-12);
    }
}
