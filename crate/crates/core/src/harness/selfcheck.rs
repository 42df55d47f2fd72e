//! Fast invariant battery behind `ntd selfcheck`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::learner::{max_norm_project, run_observed, LearnerConfig, Variant};
use crate::mrp::random_mrp;
use crate::network::{ntk_closed_form, NetworkState};

/// Gradient implementation under test: `(net, weights, x) -> ∇_W Q`.
pub type GradFn = fn(&NetworkState, &[f64], &[f64]) -> Vec<f64>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfcheckReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SelfcheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn library_grad(net: &NetworkState, weights: &[f64], x: &[f64]) -> Vec<f64> {
    net.grad_at(weights, x).expect("dimension checked by caller")
}

pub fn run_selfcheck(seed: u64) -> SelfcheckReport {
    run_selfcheck_with(seed, library_grad)
}

pub fn run_selfcheck_with(seed: u64, grad: GradFn) -> SelfcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let checks = vec![
        check_init_zero(&mut rng),
        check_gradient_fd(&mut rng, grad),
        check_projection_laws(&mut rng),
        check_contraction(&mut rng),
        check_kernel_mc(&mut rng),
        check_averaging_identity(&mut rng),
    ];
    SelfcheckReport { seed, checks }
}

fn gaussian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Uniform draw from the unit ball.
pub fn unit_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let g = gaussian(d, rng);
    let r = rng.random::<f64>().powf(1.0 / d as f64);
    let n = norm(&g);
    g.iter().map(|a| a / n * r).collect()
}

fn unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let g = gaussian(d, rng);
    let n = norm(&g);
    g.iter().map(|a| a / n).collect()
}

pub fn check_init_zero<R: Rng + ?Sized>(rng: &mut R) -> CheckResult {
    let mut worst = 0.0f64;
    for (m, d) in [(2, 2), (64, 5), (512, 2), (512, 5)] {
        let net = NetworkState::init_symmetric(m, d, rng).expect("valid width");
        for _ in 0..200 {
            let x = unit_ball(d, rng);
            worst = worst.max(net.forward(&x).expect("dims match").abs());
        }
    }
    CheckResult { name: "init_zero_output", passed: worst == 0.0, detail: format!("max |Q0(x)| = {worst:e}") }
}

pub fn check_gradient_fd<R: Rng + ?Sized>(rng: &mut R, grad: GradFn) -> CheckResult {
    let h = 1e-6;
    let (m, d) = (16, 4);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let net = NetworkState::init_symmetric(m, d, rng).expect("valid width");
        let w: Vec<f64> = net.init_weights().iter().map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
        let x = unit_ball(d, rng);
        let g = grad(&net, &w, &x);
        let mut fd = vec![0.0; g.len()];
        let mut keep = vec![false; g.len()];
        for i in 0..m {
            let z: f64 = (0..d).map(|k| w[i * d + k] * x[k]).sum();
            if z.abs() < 1e-4 {
                continue;
            }
            for k in 0..d {
                let idx = i * d + k;
                let mut wp = w.clone();
                wp[idx] += h;
                let mut wm = w.clone();
                wm[idx] -= h;
                let qp = net.forward_with(&wp, &x).expect("dims match");
                let qm = net.forward_with(&wm, &x).expect("dims match");
                fd[idx] = (qp - qm) / (2.0 * h);
                keep[idx] = true;
            }
        }
        let diff: f64 = (0..g.len()).filter(|&k| keep[k]).map(|k| (g[k] - fd[k]).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = (0..g.len()).filter(|&k| keep[k]).map(|k| fd[k].powi(2)).sum::<f64>().sqrt();
        if scale > 0.0 {
            worst = worst.max(diff / scale);
        }
    }
    CheckResult { name: "gradient_fd", passed: worst <= 1e-5, detail: format!("max relative error {worst:e}") }
}

pub fn check_projection_laws<R: Rng + ?Sized>(rng: &mut R) -> CheckResult {
    let (m, d) = (8usize, 3usize);
    let mut failures = 0usize;
    for _ in 0..1000 {
        let radius = rng.random_range(0.1..3.0);
        let init = gaussian(m * d, rng);
        let scale = rng.random_range(0.01..2.0);
        let u: Vec<f64> = init.iter().map(|v| v + scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let v: Vec<f64> = init.iter().map(|v| v + scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let pu = max_norm_project(&u, &init, radius, m);
        let pv = max_norm_project(&v, &init, radius, m);
        let ppu = max_norm_project(&pu, &init, radius, m);
        let idem = pu.iter().zip(&ppu).all(|(a, b)| (a - b).abs() <= 1e-12);
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let nonexp = dist(&pu, &pv) <= dist(&u, &v) + 1e-12;
        let in_set = (0..m).all(|i| {
            let r: Vec<f64> = (0..d).map(|k| pu[i * d + k] - init[i * d + k]).collect();
            norm(&r) <= radius / (m as f64).sqrt()
        });
        if !(idem && nonexp && in_set) {
            failures += 1;
        }
    }
    CheckResult { name: "projection_laws", passed: failures == 0, detail: format!("{failures} violations in 1000 cases") }
}

pub fn check_contraction<R: Rng + ?Sized>(rng: &mut R) -> CheckResult {
    let mut failures = 0usize;
    let mut worst_fixed = 0.0f64;
    for _ in 0..5 {
        let n = rng.random_range(3..8);
        let gamma = rng.random_range(0.1..0.95);
        let mrp = random_mrp(n, 2, gamma, 0.5, rng).expect("generator output is valid");
        let v = mrp.exact_value();
        let tv = mrp.bellman_apply(&v).expect("dims match");
        worst_fixed = worst_fixed.max(v.iter().zip(&tv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        for _ in 0..200 {
            let a = gaussian(n, rng);
            let b = gaussian(n, rng);
            let ta = mrp.bellman_apply(&a).expect("dims match");
            let tb = mrp.bellman_apply(&b).expect("dims match");
            let lhs = mrp.weighted_norm(&ta.iter().zip(&tb).map(|(x, y)| x - y).collect::<Vec<_>>()).expect("dims match");
            let rhs = mrp.weighted_norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>()).expect("dims match");
            if lhs > gamma * rhs + 1e-12 {
                failures += 1;
            }
        }
    }
    CheckResult {
        name: "bellman_contraction",
        passed: failures == 0 && worst_fixed <= 1e-10,
        detail: format!("{failures} contraction violations, max |V - TV| = {worst_fixed:e}"),
    }
}

/// Monte Carlo estimate of `E_w[xᵀy 𝕀{wᵀx ≥ 0} 𝕀{wᵀy ≥ 0}]` with its standard error.
pub fn kernel_mc<R: Rng + ?Sized>(x: &[f64], y: &[f64], n: usize, rng: &mut R) -> (f64, f64) {
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let mut hits = 0usize;
    for _ in 0..n {
        let w = gaussian(x.len(), rng);
        let zx: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        let zy: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
        if zx >= 0.0 && zy >= 0.0 {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    (xy * p, xy.abs() * (p * (1.0 - p) / n as f64).sqrt())
}

pub fn check_kernel_mc<R: Rng + ?Sized>(rng: &mut R) -> CheckResult {
    let d = 4;
    let mut worst_z = 0.0f64;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let x = unit_sphere(d, rng);
    pairs.push((x.clone(), x.clone()));
    pairs.push((x.clone(), x.iter().map(|a| -a).collect()));
    for _ in 0..8 {
        pairs.push((unit_ball(d, rng), unit_ball(d, rng)));
    }
    for (x, y) in &pairs {
        let exact = ntk_closed_form(x, y).expect("nonzero inputs");
        let (est, se) = kernel_mc(x, y, 20_000, rng);
        let z = if se > 0.0 { (est - exact).abs() / se } else if (est - exact).abs() < 1e-12 { 0.0 } else { f64::INFINITY };
        worst_z = worst_z.max(z);
    }
    CheckResult { name: "kernel_closed_form", passed: worst_z <= 4.0, detail: format!("max deviation {worst_z:.3} standard errors") }
}

pub fn check_averaging_identity<R: Rng + ?Sized>(rng: &mut R) -> CheckResult {
    let mrp = random_mrp(4, 2, 0.8, 0.5, rng).expect("generator output is valid");
    let value = mrp.exact_value();
    let net = NetworkState::init_symmetric(32, mrp.feature_dim(), rng).expect("valid width");
    let config = LearnerConfig {
        variant: Variant::MaxNorm,
        step_size: 0.05,
        horizon: 300,
        radius: Some(2.0),
        drift_budget: None,
        seed: rng.random(),
        log_every: 10,
    };
    let mut sum = vec![0.0; net.n_params()];
    let mut worst = 0.0f64;
    let out = run_observed(&mrp, net, &config, &value, |view| {
        for (s, w) in sum.iter_mut().zip(view.net.weights()) {
            *s += w;
        }
        let k = (view.t + 1) as f64;
        for (s, a) in sum.iter().zip(view.net.avg_weights()) {
            worst = worst.max((s / k - a).abs());
        }
    });
    match out {
        Ok(_) => CheckResult {
            name: "averaging_identity",
            passed: worst <= 1e-10,
            detail: format!("max |mean(W) - W_avg| = {worst:e}"),
        },
        Err(e) => CheckResult { name: "averaging_identity", passed: false, detail: e.to_string() },
    }
}
