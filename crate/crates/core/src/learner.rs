//! Neural TD learning: semi-gradient steps, the projection-free (PF) and
//! max-norm (MN) branches, iterate averaging, and per-step monitoring.
//!
//! A run of horizon `T` takes the steps `t = 0, …, T−2`, producing
//! `W(1), …, W(T−1)`, and outputs `Q̄_T = Q(·; Ŵ(T−1), a)` where
//! `Ŵ(T−1)` is the mean of `W(0), …, W(T−1)`.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrp::{weighted_norm_unchecked, MarkovRewardProcess, SamplePair};
use crate::network::NetworkState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "PF")]
    ProjectionFree,
    #[serde(rename = "MN")]
    MaxNorm,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PF" | "pf" => Ok(Variant::ProjectionFree),
            "MN" | "mn" => Ok(Variant::MaxNorm),
            other => Err(Error::Config(format!("unknown variant {other:?} (expected PF or MN)"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::ProjectionFree => "PF",
            Variant::MaxNorm => "MN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub variant: Variant,
    pub step_size: f64,
    pub horizon: u64,
    /// Max-norm radius `R`; neuron `i` stays within `R/√m` of `W_i(0)`.
    pub radius: Option<f64>,
    /// Drift budget `λ` defining the stopping time `t₁`.
    pub drift_budget: Option<f64>,
    /// Seed of the sampling stream.
    pub seed: u64,
    pub log_every: u64,
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!("step_size must be finite and >= 0, got {}", self.step_size)));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be positive".into()));
        }
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if !(x > 0.0 && x.is_finite()) => {
                    Err(Error::Config(format!("{name} must be positive, got {x}")))
                }
                _ => Ok(()),
            }
        };
        positive("radius", self.radius)?;
        positive("drift_budget", self.drift_budget)?;
        match self.variant {
            Variant::MaxNorm if self.radius.is_none() => {
                Err(Error::Config("MN variant requires radius".into()))
            }
            Variant::ProjectionFree if self.drift_budget.is_none() => {
                Err(Error::Config("PF variant requires drift_budget for monitoring".into()))
            }
            _ => Ok(()),
        }
    }

    /// Budget against which the drift event and `t₁` are judged: `λ` when
    /// given, otherwise `R`.
    pub fn monitor_budget(&self) -> f64 {
        self.drift_budget.or(self.radius).unwrap_or(f64::INFINITY)
    }
}

/// `g = Δ · ∇_W Q(x)` with the Bellman error `Δ = r + γQ(x') − Q(x)`.
#[derive(Debug, Clone)]
pub struct SemiGradient {
    pub delta: f64,
    pub grad: Vec<f64>,
}

impl SemiGradient {
    pub fn norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

pub fn semi_gradient(net: &NetworkState, sample: &SamplePair<'_>, gamma: f64) -> Result<SemiGradient> {
    let q = net.forward(sample.features)?;
    let q_next = net.forward(sample.next_features)?;
    let delta = sample.reward + gamma * q_next - q;
    let mut grad = net.grad(sample.features)?;
    for g in grad.iter_mut() {
        *g *= delta;
    }
    Ok(SemiGradient { delta, grad })
}

/// Per-neuron projection onto `{W_i : ‖W_i − W_i(0)‖ ≤ R/√m}`.
pub fn max_norm_project(weights: &[f64], init: &[f64], radius: f64, width: usize) -> Vec<f64> {
    let mut out = weights.to_vec();
    project_in_place(&mut out, init, radius, width);
    out
}

/// In-place version of [`max_norm_project`].
///
/// Boundary points are nudged inward until both `‖W_i − W_i(0)‖ ≤ R/√m` and
/// `√m ‖W_i − W_i(0)‖ ≤ R` hold in floating point.
pub fn project_in_place(weights: &mut [f64], init: &[f64], radius: f64, width: usize) {
    assert_eq!(weights.len(), init.len());
    assert!(width > 0 && weights.len() % width == 0);
    let d = weights.len() / width;
    let sqrt_m = (width as f64).sqrt();
    let ball = radius / sqrt_m;
    let inside = |n: f64| n <= ball && n * sqrt_m <= radius;
    for i in 0..width {
        let r = i * d..(i + 1) * d;
        let (w, w0) = (&mut weights[r.clone()], &init[r]);
        let norm = diff_norm(w, w0);
        if inside(norm) {
            continue;
        }
        let dir: Vec<f64> = w.iter().zip(w0).map(|(a, b)| (a - b) / norm).collect();
        let mut scale = ball;
        let mut shrink = f64::EPSILON;
        loop {
            for ((wk, w0k), uk) in w.iter_mut().zip(w0).zip(&dir) {
                *wk = w0k + scale * uk;
            }
            if inside(diff_norm(w, w0)) {
                break;
            }
            scale *= 1.0 - shrink;
            shrink = (shrink * 2.0).min(0.5);
        }
    }
}

fn diff_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub delta: f64,
    pub g_norm: f64,
}

/// Reusable buffers for [`step`].
#[derive(Debug, Default)]
pub struct Workspace {
    grad: Vec<f64>,
}

/// One iteration of the algorithm at time `t`: semi-gradient step, optional
/// max-norm projection, then `Ŵ(t+1) = (1 − 1/(t+2)) Ŵ(t) + W(t+1)/(t+2)`.
pub fn step(
    net: &mut NetworkState,
    sample: &SamplePair<'_>,
    gamma: f64,
    config: &LearnerConfig,
    t: u64,
    ws: &mut Workspace,
) -> Result<StepInfo> {
    let (delta, g_norm) = semi_gradient_into(net, sample, gamma, &mut ws.grad)?;
    let width = net.width();
    let alpha = config.step_size;
    {
        let w = net.weights_mut();
        for (wk, gk) in w.iter_mut().zip(&ws.grad) {
            *wk += alpha * gk;
        }
    }
    let (init, w, avg) = net.parts_mut();
    if config.variant == Variant::MaxNorm {
        let radius = config.radius.ok_or_else(|| Error::Config("MN variant requires radius".into()))?;
        project_in_place(w, init, radius, width);
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t, trace: None });
    }
    let k = (t + 2) as f64;
    for (a, wk) in avg.iter_mut().zip(w.iter()) {
        *a = (1.0 - 1.0 / k) * *a + (1.0 / k) * wk;
    }
    Ok(StepInfo { delta, g_norm })
}

fn semi_gradient_into(
    net: &NetworkState,
    sample: &SamplePair<'_>,
    gamma: f64,
    buf: &mut Vec<f64>,
) -> Result<(f64, f64)> {
    let q = net.forward(sample.features)?;
    let q_next = net.forward(sample.next_features)?;
    let delta = sample.reward + gamma * q_next - q;
    buf.resize(net.n_params(), 0.0);
    net.grad_into(net.weights(), sample.features, buf);
    let mut sq = 0.0;
    for g in buf.iter_mut() {
        *g *= delta;
        sq += *g * *g;
    }
    Ok((delta, sq.sqrt()))
}

/// One logged row. Every quantity refers to `W(t)` / `Ŵ(t)`; `delta`,
/// `g_norm` and `flip_count` use the sample observed at `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: u64,
    pub delta: f64,
    pub g_norm: f64,
    pub max_drift_sqrt_m: f64,
    pub err_pi: f64,
    pub avg_err_pi: f64,
    pub msbe: f64,
    pub flip_count: usize,
    /// No drift-budget violation has occurred at or before `t`.
    pub event_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps: u64,
    pub t1: Option<u64>,
    pub final_err_pi: f64,
    pub final_avg_err_pi: f64,
    pub final_msbe: f64,
    pub peak_drift_sqrt_m: f64,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    /// `max_i √m ‖W_i(t) − W_i(0)‖` for every `t = 0, …, steps`.
    pub drift_path: Vec<f64>,
    pub summary: RunSummary,
}

impl RunTrace {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// First `t > 0` with `max_i √m ‖W_i(t) − W_i(0)‖ > λ`.
pub fn stopping_time(trace: &RunTrace, lambda: f64) -> Option<u64> {
    trace.drift_path.iter().enumerate().skip(1).find(|(_, &d)| d > lambda).map(|(t, _)| t as u64)
}

pub fn flip_set_size(net: &NetworkState, x: &[f64]) -> Result<usize> {
    net.flip_set_size(x)
}

/// State handed to a run observer at every `t`, before the step at `t` is applied.
pub struct StepView<'a> {
    pub t: u64,
    pub net: &'a NetworkState,
    pub sample: &'a SamplePair<'a>,
    pub delta: f64,
    pub g_norm: f64,
    pub logged: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub net: NetworkState,
}

impl RunOutput {
    /// `Q̄_T(x) = Q(x; Ŵ(T−1), a)`.
    pub fn averaged_value(&self, x: &[f64]) -> Result<f64> {
        self.net.forward_avg(x)
    }
}

pub fn run(
    mrp: &MarkovRewardProcess,
    net: NetworkState,
    config: &LearnerConfig,
    target_value: &[f64],
) -> Result<RunOutput> {
    run_observed(mrp, net, config, target_value, |_| {})
}

/// [`run`] with a callback invoked at every iteration and at the final time.
pub fn run_observed<F>(
    mrp: &MarkovRewardProcess,
    mut net: NetworkState,
    config: &LearnerConfig,
    target_value: &[f64],
    mut observer: F,
) -> Result<RunOutput>
where
    F: FnMut(&StepView<'_>),
{
    config.validate()?;
    if net.input_dim() != mrp.feature_dim() {
        return Err(Error::DimensionMismatch { expected: mrp.feature_dim(), got: net.input_dim() });
    }
    if target_value.len() != mrp.n_states() {
        return Err(Error::DimensionMismatch { expected: mrp.n_states(), got: target_value.len() });
    }
    let started = Instant::now();
    let gamma = mrp.discount();
    let sqrt_m = (net.width() as f64).sqrt();
    let budget = config.monitor_budget();
    let steps = config.horizon.saturating_sub(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ws = Workspace::default();

    let mut rows = Vec::new();
    let mut drift_path = Vec::with_capacity(steps as usize + 1);
    drift_path.push(net.max_drift() * sqrt_m);
    let mut t1 = None;

    for t in 0..=steps {
        let sample = mrp.sample_pair(&mut rng);
        let logged = t % config.log_every == 0 || t == steps;
        let (delta, g_norm) = semi_gradient_into(&net, &sample, gamma, &mut ws.grad)?;
        observer(&StepView { t, net: &net, sample: &sample, delta, g_norm, logged });
        if logged {
            rows.push(trace_row(mrp, &net, target_value, &sample, t, delta, g_norm, drift_path[t as usize], t1.is_none())?);
        }
        if t == steps {
            break;
        }
        if let Err(err) = step(&mut net, &sample, gamma, config, t, &mut ws) {
            let Error::Divergence { t, .. } = err else { return Err(err) };
            let summary = summarize(&rows, &drift_path, t1, t, started);
            return Err(Error::Divergence {
                t,
                trace: Some(Box::new(RunTrace { rows, drift_path, summary })),
            });
        }
        let drift = net.max_drift() * sqrt_m;
        drift_path.push(drift);
        if t1.is_none() && drift > budget {
            t1 = Some(t + 1);
        }
    }

    let summary = summarize(&rows, &drift_path, t1, steps, started);
    Ok(RunOutput { trace: RunTrace { rows, drift_path, summary }, net })
}

#[allow(clippy::too_many_arguments)]
fn trace_row(
    mrp: &MarkovRewardProcess,
    net: &NetworkState,
    target: &[f64],
    sample: &SamplePair<'_>,
    t: u64,
    delta: f64,
    g_norm: f64,
    drift: f64,
    event_ok: bool,
) -> Result<TraceRow> {
    let pi = mrp.stationary_distribution().probs();
    let q: Vec<f64> = mrp.features().iter().map(|x| net.eval(net.weights(), x)).collect();
    let q_avg: Vec<f64> = mrp.features().iter().map(|x| net.eval(net.avg_weights(), x)).collect();
    let err: Vec<f64> = q.iter().zip(target).map(|(a, b)| a - b).collect();
    let avg_err: Vec<f64> = q_avg.iter().zip(target).map(|(a, b)| a - b).collect();
    Ok(TraceRow {
        t,
        delta,
        g_norm,
        max_drift_sqrt_m: drift,
        err_pi: weighted_norm_unchecked(pi, &err),
        avg_err_pi: weighted_norm_unchecked(pi, &avg_err),
        msbe: mrp.msbe(&q)?,
        flip_count: net.flip_set_size(sample.features)?,
        event_ok,
    })
}

fn summarize(rows: &[TraceRow], drift_path: &[f64], t1: Option<u64>, steps: u64, started: Instant) -> RunSummary {
    let last = rows.last();
    RunSummary {
        steps,
        t1,
        final_err_pi: last.map_or(f64::NAN, |r| r.err_pi),
        final_avg_err_pi: last.map_or(f64::NAN, |r| r.avg_err_pi),
        final_msbe: last.map_or(f64::NAN, |r| r.msbe),
        peak_drift_sqrt_m: drift_path.iter().copied().fold(0.0, f64::max),
        wall_clock_secs: started.elapsed().as_secs_f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mrp::random_mrp;

    fn cfg(variant: Variant, alpha: f64, horizon: u64) -> LearnerConfig {
        LearnerConfig {
            variant,
            step_size: alpha,
            horizon,
            radius: Some(1.0),
            drift_budget: Some(10.0),
            seed: 7,
            log_every: 10,
        }
    }

    fn one_state() -> MarkovRewardProcess {
        MarkovRewardProcess::new(vec![vec![1.0]], vec![1.0], 0.5, vec![vec![0.6, 0.5]]).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(Variant::MaxNorm, 0.1, 10);
        c.radius = None;
        assert!(c.validate().is_err());
        let mut c = cfg(Variant::ProjectionFree, 0.1, 10);
        c.drift_budget = None;
        assert!(c.validate().is_err());
        let mut c = cfg(Variant::ProjectionFree, 0.1, 10);
        c.log_every = 0;
        assert!(c.validate().is_err());
        assert!(cfg(Variant::ProjectionFree, -1.0, 10).validate().is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("PF".parse::<Variant>().unwrap(), Variant::ProjectionFree);
        assert_eq!("mn".parse::<Variant>().unwrap(), Variant::MaxNorm);
        assert!("L2".parse::<Variant>().is_err());
    }

    #[test]
    fn semi_gradient_at_init_is_reward_times_grad() {
        let mrp = one_state();
        let net = NetworkState::init_seeded(16, 2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = mrp.sample_pair(&mut rng);
        let g = semi_gradient(&net, &s, 0.5).unwrap();
        assert_eq!(g.delta, 1.0);
        assert!(g.norm() <= 1.0);
    }

    #[test]
    fn semi_gradient_with_zero_reward_and_discount() {
        let mrp = MarkovRewardProcess::new(vec![vec![1.0]], vec![0.0], 0.5, vec![vec![0.6, 0.5]]).unwrap();
        let mut net = NetworkState::init_seeded(16, 2, 2).unwrap();
        let w: Vec<f64> = net.weights().iter().map(|w| w + 0.3).collect();
        net.set_weights(w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = mrp.sample_pair(&mut rng);
        let g = semi_gradient(&net, &s, 0.0).unwrap();
        assert_eq!(g.delta, -net.forward(s.features).unwrap());
    }

    #[test]
    fn projection_hand_example() {
        let p = max_norm_project(&[3.0, 4.0], &[0.0, 0.0], 1.0, 1);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let inside = [0.1, 0.2, 0.0, -0.1];
        assert_eq!(max_norm_project(&inside, &[0.0; 4], 1.0, 2), inside.to_vec());
    }

    #[test]
    fn zero_step_size_only_averages() {
        let mrp = one_state();
        let mut net = NetworkState::init_seeded(8, 2, 3).unwrap();
        let w0 = net.weights().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ws = Workspace::default();
        for t in 0..5 {
            let s = mrp.sample_pair(&mut rng);
            step(&mut net, &s, 0.5, &cfg(Variant::ProjectionFree, 0.0, 10), t, &mut ws).unwrap();
        }
        assert_eq!(net.weights(), &w0[..]);
        for (a, w) in net.avg_weights().iter().zip(&w0) {
            assert!((a - w).abs() <= 1e-15 * w.abs().max(1.0));
        }
    }

    #[test]
    fn first_step_moves_along_reward_gradient() {
        let mrp = one_state();
        let mut net = NetworkState::init_seeded(8, 2, 4).unwrap();
        let w0 = net.weights().to_vec();
        let grad0 = net.grad(&[0.6, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = mrp.sample_pair(&mut rng);
        let alpha = 0.25;
        step(&mut net, &s, 0.5, &cfg(Variant::ProjectionFree, alpha, 10), 0, &mut Workspace::default()).unwrap();
        for ((w, w0), g) in net.weights().iter().zip(&w0).zip(&grad0) {
            assert_eq!(*w, w0 + alpha * (1.0 * g));
        }
    }

    #[test]
    fn tiny_radius_puts_every_moved_neuron_on_boundary() {
        let mrp = one_state();
        let mut net = NetworkState::init_seeded(8, 2, 5).unwrap();
        let mut c = cfg(Variant::MaxNorm, 100.0, 10);
        c.radius = Some(1e-3);
        let moved: Vec<bool> = {
            let g = net.grad(&[0.6, 0.5]).unwrap();
            (0..8).map(|i| g[2 * i..2 * i + 2].iter().any(|v| *v != 0.0)).collect()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = mrp.sample_pair(&mut rng);
        step(&mut net, &s, 0.5, &c, 0, &mut Workspace::default()).unwrap();
        let ball = 1e-3 / 8f64.sqrt();
        for (i, &mv) in moved.iter().enumerate() {
            let drift = net.neuron_drift(net.weights(), i);
            if mv {
                assert!(drift <= ball && (drift - ball).abs() < 1e-15, "neuron {i}: {drift}");
            } else {
                assert_eq!(drift, 0.0);
            }
        }
    }

    #[test]
    fn divergence_is_reported_with_trace() {
        let mrp = one_state();
        let net = NetworkState::init_seeded(8, 2, 6).unwrap();
        let mut c = cfg(Variant::ProjectionFree, 1e300, 50);
        c.drift_budget = Some(1.0);
        let err = run(&mrp, net, &c, &[2.0]).unwrap_err();
        match err {
            Error::Divergence { t, trace } => {
                assert!(t < 50);
                assert!(!trace.unwrap().rows.is_empty());
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_horizon_returns_zero_network() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mrp = random_mrp(4, 2, 0.8, 0.5, &mut rng).unwrap();
        let v = mrp.exact_value();
        let net = NetworkState::init_seeded(16, 3, 1).unwrap();
        let out = run(&mrp, net, &cfg(Variant::MaxNorm, 0.1, 0), &v).unwrap();
        for x in mrp.features() {
            assert_eq!(out.averaged_value(x).unwrap(), 0.0);
        }
        let norm_v = mrp.weighted_norm(&v).unwrap();
        assert_eq!(out.trace.summary.final_avg_err_pi, norm_v);
        assert_eq!(out.trace.rows.len(), 1);
    }

    #[test]
    fn stopping_time_none_without_motion() {
        let mrp = one_state();
        let net = NetworkState::init_seeded(8, 2, 1).unwrap();
        let out = run(&mrp, net, &cfg(Variant::ProjectionFree, 0.0, 100), &[2.0]).unwrap();
        assert_eq!(stopping_time(&out.trace, 1e-12), None);
        assert_eq!(out.trace.drift_path.len(), 100);
    }

    #[test]
    fn stopping_time_finite_for_huge_step() {
        let mrp = one_state();
        let net = NetworkState::init_seeded(8, 2, 1).unwrap();
        let mut c = cfg(Variant::ProjectionFree, 50.0, 100);
        c.drift_budget = Some(1.0);
        let out = run(&mrp, net, &c, &[2.0]).unwrap();
        let t1 = stopping_time(&out.trace, 1.0).expect("drift budget exceeded");
        assert!(t1 <= 2);
        assert_eq!(out.trace.summary.t1, Some(t1));
    }

    #[test]
    fn csv_header_matches_contract() {
        let mrp = one_state();
        let net = NetworkState::init_seeded(8, 2, 1).unwrap();
        let out = run(&mrp, net, &cfg(Variant::MaxNorm, 0.1, 25), &[2.0]).unwrap();
        let bytes = out.trace.to_csv_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "t,delta,g_norm,max_drift_sqrt_m,err_pi,avg_err_pi,msbe,flip_count,event_ok"
        );
        let ts: Vec<u64> = out.trace.rows.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 10, 20, 24]);
    }
}
