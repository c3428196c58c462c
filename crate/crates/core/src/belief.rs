//! Posterior over source positions.
//!
//! The grid keeps both the probabilities and their logarithms. Each update
//! adds the Poisson log-likelihood `k ln μ - μ` to the log-probabilities,
//! shifts by the maximum and renormalises, so cells whose mass underflows
//! in linear space keep a finite log-probability and can recover if later
//! evidence favours them.

use crate::env_model::RateTable;
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::grid::{Cell, GridSpec};
use crate::numeric::{lane_dot, lane_sum, CompensatedSum};

/// Normalisers below this switch the update to log space.
const MIN_SAFE_NORMALISER: f64 = 1e-250;
/// `ln(f64::MIN_POSITIVE)`.
const LN_MIN_POSITIVE: f64 = -708.0;
/// Stored in place of `ln 0`; finite, so `0 * LN_ZERO` is still zero.
const LN_ZERO: f64 = f64::MIN;

#[derive(Clone, Debug, PartialEq)]
pub struct BeliefGrid {
    grid: GridSpec,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
    entropy: f64,
}

/// Most probable cell. `ties` counts every cell sharing the maximal mass;
/// `cell` is the smallest of them in `(y, x)` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArgMax {
    pub cell: Cell,
    pub mass: f64,
    pub ties: usize,
}

impl ArgMax {
    pub fn is_unique(&self) -> bool {
        self.ties == 1
    }
}

impl BeliefGrid {
    /// Maximal-entropy prior.
    pub fn uniform(grid: GridSpec) -> Self {
        let n = grid.len();
        let p = 1.0 / n as f64;
        Self {
            grid,
            probs: vec![p; n],
            log_probs: vec![-(n as f64).ln(); n],
            entropy: (n as f64).ln(),
        }
    }

    /// Normalises arbitrary non-negative weights into a belief.
    pub fn from_weights(grid: GridSpec, weights: &[f64]) -> Result<Self> {
        if weights.len() != grid.len() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidWeights);
        }
        let total: CompensatedSum = weights.iter().copied().collect();
        let total = total.value();
        if !(total > 0.0) {
            return Err(Error::InvalidWeights);
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_probs = weights
            .iter()
            .map(|&w| if w > 0.0 { w.ln() - total.ln() } else { LN_ZERO })
            .collect();
        let entropy = entropy(&probs);
        Ok(Self {
            grid,
            probs,
            log_probs,
            entropy,
        })
    }

    /// All mass on one cell.
    pub fn delta(grid: GridSpec, cell: Cell) -> Result<Self> {
        grid.check(cell)?;
        let mut w = vec![0.0; grid.len()];
        w[grid.index(cell)] = 1.0;
        Self::from_weights(grid, &w)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_probabilities(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn prob(&self, cell: Cell) -> f64 {
        self.probs[self.grid.index(cell)]
    }

    /// Shannon entropy in nats, cached since the last update.
    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    /// In-place Bayesian update for `k` detections observed at `agent`.
    ///
    /// On failure the belief is left untouched.
    pub fn update(&mut self, agent: Cell, k: u64, model: &RateTable) -> Result<()> {
        let next = bayes_update(self, agent, k, model)?;
        *self = next;
        Ok(())
    }

    /// Conditions on the source not being at `cell`.
    ///
    /// Fails, leaving the belief untouched, if `cell` holds all the mass.
    pub fn exclude(&mut self, cell: Cell) -> Result<()> {
        self.grid.check(cell)?;
        let c = self.grid.index(cell);
        let rest = lane_sum(&self.probs[..c]) + lane_sum(&self.probs[c + 1..]);
        if rest > MIN_SAFE_NORMALISER {
            let (inv, ln_rest) = (1.0 / rest, rest.ln());
            self.probs[c] = 0.0;
            self.log_probs[c] = LN_ZERO;
            for (p, lp) in self.probs.iter_mut().zip(&mut self.log_probs) {
                *p *= inv;
                *lp -= ln_rest;
            }
        } else {
            let max = self
                .log_probs
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != c)
                .map(|(_, &lp)| lp)
                .fold(LN_ZERO, f64::max);
            if max <= LN_ZERO {
                return Err(Error::InvalidWeights);
            }
            self.probs[c] = 0.0;
            self.log_probs[c] = LN_ZERO;
            let z: f64 = self.log_probs.iter().map(|lp| (lp - max).exp()).sum();
            let ln_rest = max + z.ln();
            for (p, lp) in self.probs.iter_mut().zip(&mut self.log_probs) {
                *lp -= ln_rest;
                *p = lp.exp();
            }
        }
        self.entropy = entropy_from_logs(&self.probs, &self.log_probs);
        Ok(())
    }

    pub fn argmax(&self) -> ArgMax {
        let mut best = 0;
        let mut ties = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
                ties = 1;
            } else if p == self.probs[best] {
                ties += 1;
            }
        }
        ArgMax {
            cell: self.grid.cell(best),
            mass: self.probs[best],
            ties,
        }
    }

    pub fn snapshot(&self) -> GridField {
        GridField::new(self.grid, self.probs.clone())
    }
}

/// Posterior after observing `k` detections at `agent`, using the agent's
/// rate model:
///
/// `P'(r0) ∝ P(r0) · exp(-μ(agent, r0)) · μ(agent, r0)^k`
pub fn bayes_update(
    belief: &BeliefGrid,
    agent: Cell,
    k: u64,
    model: &RateTable,
) -> Result<BeliefGrid> {
    let grid = belief.grid;
    if *model.grid() != grid {
        return Err(Error::GridMismatch);
    }
    grid.check(agent)?;
    match update_linear(belief, agent, k, model) {
        Some(next) => Ok(next),
        None => update_log_space(belief, agent, k, model),
    }
}

/// Multiplies the linear probabilities by `e^{-μ} (μ/s)^k` with `s = max(k, 1)`,
/// so each factor is at most `e^{-k}`. Returns `None` when the normaliser
/// leaves the safe floating-point range.
fn update_linear(
    belief: &BeliefGrid,
    agent: Cell,
    k: u64,
    model: &RateTable,
) -> Option<BeliefGrid> {
    let grid = belief.grid;
    let width = grid.width();
    let kf = k as f64;
    let scale = kf.max(1.0);
    let inv_scale = 1.0 / scale;
    let exponent = i32::try_from(k).ok()?;
    let mut probs = vec![0.0; grid.len()];
    let mut log_w = vec![0.0; grid.len()];
    for row in 0..grid.height() {
        let (mu, ln_mu) = model.row(agent, row);
        let survival = model.survival_row(agent, row);
        let span = row * width..(row + 1) * width;
        let prior = &belief.probs[span.clone()];
        let prior_log = &belief.log_probs[span.clone()];
        let (w, lw) = (&mut probs[span.clone()], &mut log_w[span]);
        for i in 0..width {
            lw[i] = prior_log[i] - mu[i] + kf * ln_mu[i];
        }
        match k {
            0 => {
                for i in 0..width {
                    w[i] = prior[i] * survival[i];
                }
            }
            1 => {
                for i in 0..width {
                    w[i] = prior[i] * survival[i] * (mu[i] * inv_scale);
                }
            }
            _ => {
                for i in 0..width {
                    if prior[i] > 0.0 {
                        w[i] = prior[i] * survival[i] * (mu[i] * inv_scale).powi(exponent);
                    }
                }
            }
        }
    }
    let norm = lane_sum(&probs);
    if !(norm.is_finite() && norm > MIN_SAFE_NORMALISER) {
        return None;
    }
    let ln_norm = norm.ln() + kf * scale.ln();
    let inv_norm = 1.0 / norm;
    for (w, lw) in probs.iter_mut().zip(&mut log_w) {
        *lw -= ln_norm;
        if *w > 0.0 {
            *w *= inv_norm;
            if *w > 0.5 {
                // at most one cell; keeps a delta belief at exactly zero entropy
                *lw = w.ln();
            }
        } else if *lw > LN_MIN_POSITIVE {
            // mass that had underflowed can come back
            *w = lw.exp();
        }
    }
    let entropy = entropy_from_logs(&probs, &log_w);
    Some(BeliefGrid {
        grid,
        probs,
        log_probs: log_w,
        entropy,
    })
}

fn update_log_space(
    belief: &BeliefGrid,
    agent: Cell,
    k: u64,
    model: &RateTable,
) -> Result<BeliefGrid> {
    let grid = belief.grid;
    let degenerate = || Error::DegenerateUpdate {
        x: agent.x,
        y: agent.y,
        k,
    };
    let kf = k as f64;
    let width = grid.width();
    let mut log_w = vec![0.0; grid.len()];
    let mut max = f64::NEG_INFINITY;
    for row in 0..grid.height() {
        let (mu, ln_mu) = model.row(agent, row);
        let span = row * width..(row + 1) * width;
        for (((lw, &lp), &m), &lm) in log_w[span.clone()]
            .iter_mut()
            .zip(&belief.log_probs[span])
            .zip(mu)
            .zip(ln_mu)
        {
            *lw = if k == 0 { lp - m } else { lp - m + kf * lm };
            if *lw > max {
                max = *lw;
            }
        }
    }
    if !max.is_finite() {
        return Err(degenerate());
    }

    let mut probs = Vec::with_capacity(log_w.len());
    let mut norm = CompensatedSum::default();
    for lw in &log_w {
        let e = (lw - max).exp();
        norm.add(e);
        probs.push(e);
    }
    let norm = norm.value();
    if !(norm.is_finite() && norm >= 1.0) {
        return Err(degenerate());
    }
    let ln_norm = norm.ln();
    for p in &mut probs {
        *p /= norm;
    }
    for lw in &mut log_w {
        *lw -= max + ln_norm;
    }
    let entropy = entropy_from_logs(&probs, &log_w);
    Ok(BeliefGrid {
        grid,
        probs,
        log_probs: log_w,
        entropy,
    })
}

fn entropy_from_logs(probs: &[f64], log_probs: &[f64]) -> f64 {
    // log-probabilities are always finite (LN_ZERO for empty cells)
    (-lane_dot(probs, log_probs)).max(0.0)
}

/// `-Σ p ln p` with `0 ln 0 = 0`, compensated.
pub fn entropy(probs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::default();
    for &p in probs {
        if p > 0.0 {
            acc.add(-p * p.ln());
        }
    }
    acc.value().max(0.0)
}
