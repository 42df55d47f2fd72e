#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let g = gaussian(d, rng);
    let n = norm(&g);
    g.into_iter().map(|a| a / n).collect()
}

pub fn unit_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let r = rng.random::<f64>().powf(1.0 / d as f64);
    unit_sphere(d, rng).into_iter().map(|a| a * r).collect()
}

/// `E[xᵀy 𝕀{wᵀx ≥ 0} 𝕀{wᵀy ≥ 0}]` over `w ~ N(0, I)`, with standard error.
pub fn kernel_mc<R: Rng + ?Sized>(x: &[f64], y: &[f64], n: usize, rng: &mut R) -> (f64, f64) {
    let xy = dot(x, y);
    let mut hits = 0u64;
    for _ in 0..n {
        let w = gaussian(x.len(), rng);
        if dot(&w, x) >= 0.0 && dot(&w, y) >= 0.0 {
            hits += 1;
        }
    }
    let p = hits as f64 / n as f64;
    (xy * p, xy.abs() * (p * (1.0 - p) / n as f64).sqrt())
}

/// `Q(x; W, a) = (1/√m) Σ a_i max(W_iᵀx, 0)`, evaluated term by term.
pub fn network_value(signs: &[f64], weights: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let m = signs.len();
    let s: f64 = (0..m).map(|i| signs[i] * dot(&weights[i * d..(i + 1) * d], x).max(0.0)).sum();
    s / (m as f64).sqrt()
}
