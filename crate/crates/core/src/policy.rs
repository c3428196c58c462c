//! Greedy infotactic move selection.
//!
//! For a candidate cell `r'` the expected entropy variation is
//!
//! ```text
//! ΔS̄(r → r') = -P(r') S + (1 - P(r')) Σ_k ρ_k(r') ΔS_k
//! ρ_k        = h^k e^{-h} / k!
//! h          = Σ_r0 P(r0) μ(r', r0)
//! ΔS_k       = S[posterior after k detections at r'] - S
//! ```
//!
//! The agent takes the admissible move with the smallest `ΔS̄`.
//!
//! Each hypothetical posterior is unnormalised weights
//! `w_k(r0) = P(r0) e^{-μ} (μ/s)^k` for a per-move scale `s`, and its
//! entropy follows from two sums, `S_k = ln Z_k - (Σ w ln w) / Z_k`. All `k`
//! are accumulated in one pass over the grid. Sums that leave the normal
//! floating-point range are recomputed in log space with a max shift.

use crate::belief::BeliefGrid;
use crate::env_model::RateTable;
use crate::error::{Error, Result};
use crate::grid::{Cell, Direction, GridSpec};

/// Differences in `ΔS̄` at or below this are treated as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Sums whose normaliser falls below this are redone in log space.
const MIN_SAFE_NORMALISER: f64 = 1e-250;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    /// Sum `k` until the accumulated Poisson mass reaches the threshold.
    Cumulative(f64),
    /// Sum `k = 0..=k_max` regardless of the accumulated mass.
    HardCap(u32),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyConfig {
    truncation: Truncation,
    move_order: [Direction; 5],
}

impl PolicyConfig {
    pub fn new(truncation: Truncation, move_order: [Direction; 5]) -> Result<Self> {
        if let Truncation::Cumulative(t) = truncation {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidParameter {
                    name: "policy.threshold",
                    value: t,
                    requirement: "in (0, 1)",
                });
            }
        }
        for d in Direction::ALL {
            if !move_order.contains(&d) {
                return Err(Error::InvalidParameter {
                    name: "policy.move_order",
                    value: f64::NAN,
                    requirement: "a permutation of down, up, left, right, stay",
                });
            }
        }
        Ok(Self {
            truncation,
            move_order,
        })
    }

    pub fn cumulative(threshold: f64) -> Result<Self> {
        Self::new(Truncation::Cumulative(threshold), Direction::ALL)
    }

    pub fn hard_cap(k_max: u32) -> Self {
        Self {
            truncation: Truncation::HardCap(k_max),
            move_order: Direction::ALL,
        }
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn move_order(&self) -> &[Direction; 5] {
        &self.move_order
    }

    pub fn with_move_order(&self, order: [Direction; 5]) -> Result<Self> {
        Self::new(self.truncation, order)
    }
}

/// Cumulative threshold 0.999, move order down, up, left, right, stay.
impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            truncation: Truncation::Cumulative(0.999),
            move_order: Direction::ALL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveEvaluation {
    pub direction: Direction,
    pub target: Cell,
    pub delta_s_bar: f64,
    /// Expected detections at the target during one step.
    pub expected_hits: f64,
    pub k_terms_used: usize,
}

/// `h(r') = Σ P(r0) μ(r', r0)`.
pub fn expected_hits(belief: &BeliefGrid, target: Cell, model: &RateTable) -> f64 {
    let grid = belief.grid();
    let width = grid.width();
    let probs = belief.probabilities();
    let mut h = 0.0;
    for row in 0..grid.height() {
        let (mu, _) = model.row(target, row);
        let p = &probs[row * width..(row + 1) * width];
        h += p.iter().zip(mu).map(|(p, m)| p * m).sum::<f64>();
    }
    h
}

/// Number of Poisson terms `K` such that `k = 0..=K` is summed.
fn last_term(h: f64, truncation: Truncation) -> usize {
    match truncation {
        Truncation::HardCap(k_max) => k_max as usize,
        Truncation::Cumulative(threshold) => {
            let ln_h = h.ln();
            let cap = (h + 40.0 * h.sqrt() + 40.0) as usize;
            let mut ln_rho = -h;
            let mut mass = ln_rho.exp();
            let mut k = 0;
            while mass < threshold && k < cap {
                k += 1;
                ln_rho += ln_h - (k as f64).ln();
                mass += ln_rho.exp();
            }
            k
        }
    }
}

fn poisson_weights(h: f64, last: usize) -> Vec<f64> {
    let ln_h = h.ln();
    let mut ln_rho = -h;
    let mut out = Vec::with_capacity(last + 1);
    for k in 0..=last {
        if k > 0 {
            ln_rho += ln_h - (k as f64).ln();
        }
        out.push(if h > 0.0 { ln_rho.exp() } else if k == 0 { 1.0 } else { 0.0 });
    }
    out
}

/// Entropies of the hypothetical posteriors after `k = 0..=last` detections
/// at `target`.
fn posterior_entropies(
    belief: &BeliefGrid,
    target: Cell,
    model: &RateTable,
    scale: f64,
    last: usize,
) -> Result<Vec<f64>> {
    let ln_scale = scale.ln();
    let terms = last + 1;
    let mut z = vec![0.0; terms];
    let mut a = vec![0.0; terms];
    let inv_scale = 1.0 / scale;
    let mut first = 0;
    while first < terms {
        let block = BLOCK.min(terms - first);
        let (zb, ab) = (&mut z[first..first + block], &mut a[first..first + block]);
        let (bz, ba) = match block {
            1 => accumulate::<1>(belief, target, model, inv_scale, ln_scale, first),
            2 => accumulate::<2>(belief, target, model, inv_scale, ln_scale, first),
            3 => accumulate::<3>(belief, target, model, inv_scale, ln_scale, first),
            4 => accumulate::<4>(belief, target, model, inv_scale, ln_scale, first),
            5 => accumulate::<5>(belief, target, model, inv_scale, ln_scale, first),
            6 => accumulate::<6>(belief, target, model, inv_scale, ln_scale, first),
            7 => accumulate::<7>(belief, target, model, inv_scale, ln_scale, first),
            _ => accumulate::<BLOCK>(belief, target, model, inv_scale, ln_scale, first),
        };
        zb.copy_from_slice(&bz[..block]);
        ab.copy_from_slice(&ba[..block]);
        first += block;
    }

    let mut out = Vec::with_capacity(terms);
    for k in 0..terms {
        let (zk, ak) = (z[k], a[k]);
        let s = if zk.is_finite() && zk >= MIN_SAFE_NORMALISER && ak.is_finite() {
            zk.ln() - ak / zk
        } else {
            posterior_entropy_log_space(belief, target, model, k as u64)?
        };
        out.push(s.max(0.0));
    }
    Ok(out)
}

const BLOCK: usize = 8;

/// Sums `w_k` and `w_k ln w_k` for `k = first..first + N` over the grid, where
/// `w_k = P e^{-μ} (μ/s)^k`.
fn accumulate<const N: usize>(
    belief: &BeliefGrid,
    target: Cell,
    model: &RateTable,
    inv_scale: f64,
    ln_scale: f64,
    first: usize,
) -> ([f64; BLOCK], [f64; BLOCK]) {
    let grid = belief.grid();
    let width = grid.width();
    let probs = belief.probabilities();
    let log_probs = belief.log_probabilities();
    let kf = first as f64;
    let power = i32::try_from(first).unwrap_or(i32::MAX);
    let mut z = [0.0; N];
    let mut a = [0.0; N];
    for row in 0..grid.height() {
        let (mu, ln_mu) = model.row(target, row);
        let survival = model.survival_row(target, row);
        let span = row * width..(row + 1) * width;
        for ((((&p, &lp), &m), &lm), &surv) in probs[span.clone()]
            .iter()
            .zip(&log_probs[span])
            .zip(mu)
            .zip(ln_mu)
            .zip(survival)
        {
            if p == 0.0 {
                continue;
            }
            let ratio = m * inv_scale;
            let step = lm - ln_scale;
            let (mut w, mut lw) = if first == 0 {
                (p * surv, lp - m)
            } else {
                (p * surv * ratio.powi(power), lp - m + kf * step)
            };
            for j in 0..N {
                z[j] += w;
                a[j] += w * lw;
                w *= ratio;
                lw += step;
            }
        }
    }
    let mut zs = [0.0; BLOCK];
    let mut as_ = [0.0; BLOCK];
    zs[..N].copy_from_slice(&z);
    as_[..N].copy_from_slice(&a);
    (zs, as_)
}

fn posterior_entropy_log_space(
    belief: &BeliefGrid,
    target: Cell,
    model: &RateTable,
    k: u64,
) -> Result<f64> {
    let grid = belief.grid();
    let width = grid.width();
    let kf = k as f64;
    let mut log_w = Vec::with_capacity(grid.len());
    for row in 0..grid.height() {
        let (mu, ln_mu) = model.row(target, row);
        let lp = &belief.log_probabilities()[row * width..(row + 1) * width];
        log_w.extend(lp.iter().zip(mu).zip(ln_mu).map(|((lp, m), lm)| {
            if k == 0 {
                lp - m
            } else {
                lp - m + kf * lm
            }
        }));
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateUpdate {
            x: target.x,
            y: target.y,
            k,
        });
    }
    let mut z = 0.0;
    let mut a = 0.0;
    for lw in log_w {
        let shifted = lw - max;
        let e = shifted.exp();
        if e > 0.0 {
            z += e;
            a += e * shifted;
        }
    }
    Ok(z.ln() - a / z)
}

/// Expected entropy variation for moving to `target`. Negative is better.
pub fn expected_delta_s(
    belief: &BeliefGrid,
    target: Cell,
    model: &RateTable,
    cfg: &PolicyConfig,
) -> Result<MoveEvaluation> {
    belief.grid().check(target)?;
    if model.grid() != belief.grid() {
        return Err(Error::GridMismatch);
    }
    let s = belief.entropy();
    let p_target = belief.prob(target);
    let h = expected_hits(belief, target, model);
    let last = last_term(h, cfg.truncation);
    let rho = poisson_weights(h, last);
    let scale = if h > 0.0 && h.is_finite() { h } else { 1.0 };
    let entropies = posterior_entropies(belief, target, model, scale, last)?;
    let info: f64 = rho.iter().zip(&entropies).map(|(r, sk)| r * (sk - s)).sum();
    Ok(MoveEvaluation {
        direction: Direction::Stay,
        target,
        delta_s_bar: -p_target * s + (1.0 - p_target) * info,
        expected_hits: h,
        k_terms_used: last + 1,
    })
}

/// Evaluates `stay` and every move that stays on the lattice, in the
/// configured preference order.
pub fn evaluate_moves(
    belief: &BeliefGrid,
    agent: Cell,
    model: &RateTable,
    cfg: &PolicyConfig,
) -> Result<Vec<MoveEvaluation>> {
    let grid: &GridSpec = belief.grid();
    grid.check(agent)?;
    cfg.move_order
        .iter()
        .filter(|&&d| grid.admits(agent, d))
        .map(|&d| {
            let mut eval = expected_delta_s(belief, agent.step(d), model, cfg)?;
            eval.direction = d;
            Ok(eval)
        })
        .collect()
}

/// Picks the evaluation with the smallest `ΔS̄`; values within
/// [`TIE_TOLERANCE`] of the running best go to the earlier entry.
pub fn select(evaluations: &[MoveEvaluation]) -> Option<&MoveEvaluation> {
    let mut best: Option<&MoveEvaluation> = None;
    for e in evaluations {
        match best {
            Some(b) if e.delta_s_bar >= b.delta_s_bar - TIE_TOLERANCE => {}
            _ => best = Some(e),
        }
    }
    best
}

pub fn choose_move(
    belief: &BeliefGrid,
    agent: Cell,
    model: &RateTable,
    cfg: &PolicyConfig,
) -> Result<Direction> {
    let evals = evaluate_moves(belief, agent, model, cfg)?;
    Ok(select(&evals).map_or(Direction::Stay, |e| e.direction))
}
