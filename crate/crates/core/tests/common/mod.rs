//! Independent reference computations shared by the integration tests and
//! the acceptance suite. Nothing here calls the library's rate, belief or
//! policy code.

#![allow(dead_code)]

use std::collections::HashMap;

use infotaxis::{Cell, EnvParams, GridSpec};
use rand::Rng;

/// `K0(x) = ∫_0^∞ exp(-x cosh t) dt`, trapezoid rule. The integrand is
/// analytic and decays double-exponentially, so the rule converges
/// geometrically in the step.
pub fn k0_quadrature(x: f64) -> f64 {
    let h = 1.0 / 256.0;
    let mut sum = 0.5 * (-x).exp();
    let mut t: f64 = h;
    loop {
        let term = (-x * t.cosh()).exp();
        sum += term;
        if term < 1e-300 || term < sum * 1e-19 {
            break;
        }
        t += h;
    }
    sum * h
}

/// Mean detections per step from the closed-form rate, written out directly
/// from the model definition with the distance floored at `a`.
pub struct OracleRate {
    params: EnvParams,
    dt: f64,
    cache: HashMap<(i32, i32), f64>,
}

impl OracleRate {
    pub fn new(params: EnvParams, dt: f64) -> Self {
        Self {
            params,
            dt,
            cache: HashMap::new(),
        }
    }

    pub fn mu(&mut self, agent: Cell, source: Cell) -> f64 {
        let key = (source.x - agent.x, source.y - agent.y);
        let p = self.params;
        let dt = self.dt;
        *self.cache.entry(key).or_insert_with(|| {
            let (dx, dy) = (f64::from(key.0), f64::from(key.1));
            let lambda = (p.diffusivity() * p.lifetime()
                / (1.0 + p.wind() * p.wind() * p.lifetime() / (4.0 * p.diffusivity())))
            .sqrt();
            let a = p.searcher_size();
            let dist = (dx * dx + dy * dy).sqrt().max(a);
            let rate = p.gamma() / (lambda / a).ln()
                * (p.wind() * dy / (2.0 * p.diffusivity())).exp()
                * k0_quadrature(dist / lambda);
            rate * dt
        })
    }
}

pub fn cells(grid: &GridSpec) -> Vec<Cell> {
    let mut out = Vec::new();
    for y in grid.y_min()..=grid.y_max() {
        for x in grid.x_min()..=grid.x_max() {
            out.push(Cell::new(x, y));
        }
    }
    out
}

pub fn naive_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

fn ln_factorial(k: u64) -> f64 {
    (1..=k).map(|i| (i as f64).ln()).sum()
}

/// Full-trace posterior: prior times the product of Poisson likelihoods of
/// every `(position, count)` in the trace, normalised once at the end.
pub fn trace_posterior(
    grid: &GridSpec,
    prior: &[f64],
    trace: &[(Cell, u64)],
    rate: &mut OracleRate,
) -> Vec<f64> {
    let cells = cells(grid);
    let log_w: Vec<f64> = cells
        .iter()
        .zip(prior)
        .map(|(&r0, &p)| {
            let mut l = p.ln();
            for &(pos, k) in trace {
                let mu = rate.mu(pos, r0);
                l += -mu + k as f64 * mu.ln() - ln_factorial(k);
            }
            l
        })
        .collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

/// Expected entropy variation for moving to `target`, by explicit
/// enumeration: one full posterior per `k`, summed until the Poisson mass
/// reaches `1 - tail`.
pub fn delta_s_bar(
    grid: &GridSpec,
    belief: &[f64],
    target: Cell,
    rate: &mut OracleRate,
    tail: f64,
) -> f64 {
    let cells = cells(grid);
    let s = naive_entropy(belief);
    let idx = cells.iter().position(|&c| c == target).unwrap();
    let h: f64 = cells
        .iter()
        .zip(belief)
        .map(|(&r0, &p)| p * rate.mu(target, r0))
        .sum();
    let mut mass = 0.0;
    let mut info = 0.0;
    let mut k = 0u64;
    while mass < 1.0 - tail && k < 10_000 {
        let rho = (-h + k as f64 * h.ln() - ln_factorial(k)).exp();
        let posterior = trace_posterior(grid, belief, &[(target, k)], rate);
        info += rho * (naive_entropy(&posterior) - s);
        mass += rho;
        k += 1;
    }
    -belief[idx] * s + (1.0 - belief[idx]) * info
}

/// Random normalised belief with a spread of magnitudes.
pub fn random_belief<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n)
        .map(|_| {
            let e: f64 = rng.random_range(-6.0..0.0);
            10f64.powf(e)
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

/// Random parameters with `λ` comfortably above `a`.
pub fn random_params<R: Rng>(rng: &mut R) -> EnvParams {
    loop {
        let gamma = rng.random_range(0.2..5.0);
        let d = rng.random_range(0.05..2.0);
        let v = rng.random_range(-0.6..0.6);
        let eta = rng.random_range(50.0..3000.0);
        if let Ok(p) = EnvParams::new(gamma, d, v, eta, 1.0) {
            if p.correlation_length() > 1.5 {
                return p;
            }
        }
    }
}

/// `(x, K0(x))` pairs from the high-precision reference table.
pub fn k0_reference() -> Vec<(f64, f64)> {
    let text = include_str!("../data/k0_reference.txt");
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace().map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect()
}
