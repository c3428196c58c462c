//! A single infotactic search, from the first detection to termination.
//!
//! Each step samples detections from the true environment at the current
//! cell, updates the belief with the agent's model, checks the entropy
//! threshold, then moves. The search stops at the first step whose belief
//! entropy falls below the threshold (success or a type I failure, decided
//! by the belief maximum) or when the step budget runs out (type II).

use std::fmt;
use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::belief::BeliefGrid;
use crate::env_model::{EnvParams, RateTable};
use crate::error::{Error, Result};
use crate::grid::{Cell, Direction, GridSpec};
use crate::policy::{self, PolicyConfig};

pub const DEFAULT_ENTROPY_THRESHOLD: f64 = 1e-4;
pub const DEFAULT_MAX_STEPS: u32 = 10_000;
pub const DEFAULT_SOURCE: Cell = Cell::new(0, 35);
pub const DEFAULT_START: Cell = Cell::new(0, -47);

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    pub grid: GridSpec,
    /// Generates the detections.
    pub params_real: EnvParams,
    /// Drives inference and planning.
    pub params_agent: EnvParams,
    pub source: Cell,
    pub start: Cell,
    pub dt: f64,
    pub entropy_threshold: f64,
    pub max_steps: u32,
    pub policy: PolicyConfig,
    pub forced_initial_detection: bool,
    /// The agent learns whether the source is in its own cell: arriving
    /// there collapses the belief onto it, otherwise that cell is ruled out.
    pub observe_colocation: bool,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::standard(),
            params_real: EnvParams::default(),
            params_agent: EnvParams::default(),
            source: DEFAULT_SOURCE,
            start: DEFAULT_START,
            dt: 1.0,
            entropy_threshold: DEFAULT_ENTROPY_THRESHOLD,
            max_steps: DEFAULT_MAX_STEPS,
            policy: PolicyConfig::default(),
            forced_initial_detection: true,
            observe_colocation: true,
            seed: 0,
        }
    }
}

impl SearchConfig {
    /// Same agent and real parameters.
    pub fn matched(params: EnvParams) -> Self {
        Self {
            params_real: params,
            params_agent: params,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.check(self.source)?;
        self.grid.check(self.start)?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                value: self.dt,
                requirement: "finite and > 0",
            });
        }
        if !(self.entropy_threshold.is_finite() && self.entropy_threshold > 0.0) {
            return Err(Error::InvalidParameter {
                name: "entropy_threshold",
                value: self.entropy_threshold,
                requirement: "finite and > 0",
            });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "max_steps",
                value: 0.0,
                requirement: ">= 1",
            });
        }
        Ok(())
    }

    /// The same configuration reflected through `x = 0`.
    pub fn mirrored_x(&self) -> Self {
        Self {
            source: self.source.mirror_x(),
            start: self.start.mirror_x(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SearchStatus {
    Success,
    /// Entropy threshold reached with the belief maximum off the source
    /// (or tied).
    FailTypeI,
    /// Step budget exhausted.
    FailTypeII,
    /// Numerical failure of the belief update; not a search result.
    Aborted,
}

impl fmt::Display for SearchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchStatus::Success => "success",
            SearchStatus::FailTypeI => "fail_type_I",
            SearchStatus::FailTypeII => "fail_type_II",
            SearchStatus::Aborted => "aborted",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub cell: Cell,
    pub detections: u64,
    /// Belief entropy after this step's update.
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub status: SearchStatus,
    /// Number of observe-and-update steps performed.
    pub search_time: u32,
    pub trajectory: Vec<StepRecord>,
    /// `None` when the search ended before the first move.
    pub first_step: Option<Direction>,
    pub final_entropy: f64,
    pub final_argmax: Cell,
    pub final_argmax_mass: f64,
    pub argmax_ties: usize,
    pub detections_total: u64,
    pub min_distance_to_source: f64,
    pub abort_reason: Option<Error>,
}

impl SearchOutcome {
    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.trajectory.iter().map(|s| s.cell)
    }

    /// Tab-separated `step x y k entropy`, one line per step.
    pub fn write_trajectory<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (i, s) in self.trajectory.iter().enumerate() {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.17e}",
                i, s.cell.x, s.cell.y, s.detections, s.entropy
            )?;
        }
        Ok(())
    }
}

/// Rate tables for one configuration, reusable across seeds.
#[derive(Clone, Debug)]
pub struct PreparedSearch {
    cfg: SearchConfig,
    real: RateTable,
    agent: RateTable,
}

impl PreparedSearch {
    pub fn new(cfg: &SearchConfig) -> Result<Self> {
        cfg.validate()?;
        let real = RateTable::new(cfg.grid, cfg.params_real, cfg.dt)?;
        let agent = if cfg.params_agent == cfg.params_real {
            real.clone()
        } else {
            RateTable::new(cfg.grid, cfg.params_agent, cfg.dt)?
        };
        Ok(Self {
            cfg: cfg.clone(),
            real,
            agent,
        })
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn agent_model(&self) -> &RateTable {
        &self.agent
    }

    /// Runs the search with the configured seed.
    pub fn run(&self) -> SearchOutcome {
        self.run_with_seed(self.cfg.seed)
    }

    pub fn run_with_seed(&self, seed: u64) -> SearchOutcome {
        let cfg = &self.cfg;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut belief = BeliefGrid::uniform(cfg.grid);
        let mut pos = cfg.start;
        let mut track = Track::default();

        loop {
            let k = if track.steps.is_empty() && cfg.forced_initial_detection {
                1
            } else {
                self.real.sample(pos, cfg.source, &mut rng)
            };
            track.detections_total += k;
            track.min_distance = track.min_distance.min(pos.distance(cfg.source));
            if let Err(e) = self.observe(&mut belief, pos, k) {
                return track.finish(SearchStatus::Aborted, &belief, Some(e));
            }
            track.steps.push(StepRecord {
                cell: pos,
                detections: k,
                entropy: belief.entropy(),
            });

            if belief.entropy() < cfg.entropy_threshold {
                let am = belief.argmax();
                let status = if am.is_unique() && am.cell == cfg.source {
                    SearchStatus::Success
                } else {
                    SearchStatus::FailTypeI
                };
                return track.finish(status, &belief, None);
            }
            if track.steps.len() >= cfg.max_steps as usize {
                return track.finish(SearchStatus::FailTypeII, &belief, None);
            }

            match policy::choose_move(&belief, pos, &self.agent, &cfg.policy) {
                Ok(dir) => {
                    track.first_step.get_or_insert(dir);
                    pos = pos.step(dir);
                }
                Err(e) => return track.finish(SearchStatus::Aborted, &belief, Some(e)),
            }
        }
    }

    /// The move taken after the first observation.
    pub fn first_step(&self) -> Result<Direction> {
        let cfg = &self.cfg;
        let mut belief = BeliefGrid::uniform(cfg.grid);
        let k = if cfg.forced_initial_detection {
            1
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            self.real.sample(cfg.start, cfg.source, &mut rng)
        };
        self.observe(&mut belief, cfg.start, k)?;
        policy::choose_move(&belief, cfg.start, &self.agent, &cfg.policy)
    }

    fn observe(&self, belief: &mut BeliefGrid, pos: Cell, k: u64) -> Result<()> {
        belief.update(pos, k, &self.agent)?;
        if self.cfg.observe_colocation {
            if pos == self.cfg.source {
                *belief = BeliefGrid::delta(self.cfg.grid, pos)?;
            } else {
                belief.exclude(pos)?;
            }
        }
        Ok(())
    }
}

struct Track {
    steps: Vec<StepRecord>,
    first_step: Option<Direction>,
    detections_total: u64,
    min_distance: f64,
}

impl Default for Track {
    fn default() -> Self {
        Self {
            steps: Vec::new(),
            first_step: None,
            detections_total: 0,
            min_distance: f64::INFINITY,
        }
    }
}

impl Track {
    fn finish(self, status: SearchStatus, belief: &BeliefGrid, abort_reason: Option<Error>) -> SearchOutcome {
        let am = belief.argmax();
        SearchOutcome {
            status,
            search_time: self.steps.len() as u32,
            trajectory: self.steps,
            first_step: self.first_step,
            final_entropy: belief.entropy(),
            final_argmax: am.cell,
            final_argmax_mass: am.mass,
            argmax_ties: am.ties,
            detections_total: self.detections_total,
            min_distance_to_source: self.min_distance,
            abort_reason,
        }
    }
}

pub fn run_search(cfg: &SearchConfig) -> Result<SearchOutcome> {
    Ok(PreparedSearch::new(cfg)?.run())
}

pub fn first_step(cfg: &SearchConfig) -> Result<Direction> {
    PreparedSearch::new(cfg)?.first_step()
}
