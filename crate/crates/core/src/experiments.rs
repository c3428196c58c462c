//! Monte Carlo campaigns: parameter sweeps, model-mismatch studies and
//! density maps of visited cells.
//!
//! Every run has a seed fixed in advance from `(seed_base, value index, run
//! index)`, so results do not depend on the number of worker threads or on
//! scheduling.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::env_model::{self, EnvParams};
use crate::error::{Error, Result};
use crate::field::GridField;
use crate::grid::{Cell, Direction, GridSpec};
use crate::policy::PolicyConfig;
use crate::search::{PreparedSearch, SearchConfig, SearchOutcome, SearchStatus};

pub const DEFAULT_RUNS_PER_VALUE: u32 = 100;
pub const CSV_VERSION: u32 = 1;
pub const CSV_HEADER: [&str; 11] = [
    "value",
    "n_runs",
    "n_success",
    "n_type1",
    "n_type2",
    "n_aborted",
    "success_rate",
    "mean_time_success",
    "std_time_success",
    "mean_time_all",
    "first_step_mode",
];

/// Which part of the configuration a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    /// `D` of both the real and the agent's environment.
    Diffusivity,
    /// `V` of both environments.
    Wind,
    /// `γ` of both environments.
    Gamma,
    /// `λ_agent / λ_real`, realised through `D_agent`.
    LambdaRatio,
    /// `γ_agent / γ_real`.
    GammaRatio,
    /// Hard cap on the detection sum of the policy.
    KMax,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 6] = [
        SweepParameter::Diffusivity,
        SweepParameter::Wind,
        SweepParameter::Gamma,
        SweepParameter::LambdaRatio,
        SweepParameter::GammaRatio,
        SweepParameter::KMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Diffusivity => "D_real_and_agent",
            SweepParameter::Wind => "V_real_and_agent",
            SweepParameter::Gamma => "gamma_real_and_agent",
            SweepParameter::LambdaRatio => "lambda_agent_over_lambda_real",
            SweepParameter::GammaRatio => "gamma_agent_over_gamma_real",
            SweepParameter::KMax => "k_max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s)
    }

    /// The configuration for one swept value.
    pub fn apply(self, base: &SearchConfig, value: f64) -> Result<SearchConfig> {
        let invalid = |e: Error| Error::InvalidSweepValue {
            value,
            reason: e.to_string(),
        };
        let mut cfg = base.clone();
        match self {
            SweepParameter::Diffusivity => {
                cfg.params_real = base.params_real.with_diffusivity(value).map_err(invalid)?;
                cfg.params_agent = base.params_agent.with_diffusivity(value).map_err(invalid)?;
            }
            SweepParameter::Wind => {
                cfg.params_real = base.params_real.with_wind(value).map_err(invalid)?;
                cfg.params_agent = base.params_agent.with_wind(value).map_err(invalid)?;
            }
            SweepParameter::Gamma => {
                cfg.params_real = base.params_real.with_gamma(value).map_err(invalid)?;
                cfg.params_agent = base.params_agent.with_gamma(value).map_err(invalid)?;
            }
            SweepParameter::LambdaRatio => {
                let lambda = value * base.params_real.correlation_length();
                cfg.params_agent = base
                    .params_agent
                    .with_correlation_length(lambda)
                    .map_err(invalid)?;
            }
            SweepParameter::GammaRatio => {
                let gamma = value * base.params_real.gamma();
                cfg.params_agent = base.params_agent.with_gamma(gamma).map_err(invalid)?;
            }
            SweepParameter::KMax => {
                if !(value >= 0.0 && value.fract() == 0.0 && value <= f64::from(u32::MAX)) {
                    return Err(Error::InvalidSweepValue {
                        value,
                        reason: "k_max must be a non-negative integer".into(),
                    });
                }
                cfg.policy = PolicyConfig::hard_cap(value as u32)
                    .with_move_order(*base.policy.move_order())?;
            }
        }
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub base: SearchConfig,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub runs_per_value: u32,
    pub seed_base: u64,
}

impl SweepSpec {
    pub fn new(base: SearchConfig, parameter: SweepParameter, values: Vec<f64>) -> Self {
        Self {
            base,
            parameter,
            values,
            runs_per_value: DEFAULT_RUNS_PER_VALUE,
            seed_base: 0,
        }
    }

    pub fn with_runs(self, runs_per_value: u32) -> Self {
        Self {
            runs_per_value,
            ..self
        }
    }

    pub fn with_seed_base(self, seed_base: u64) -> Self {
        Self { seed_base, ..self }
    }

    /// Checks the spec and every swept value.
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidSweep("no values to sweep".into()));
        }
        if self.runs_per_value == 0 {
            return Err(Error::InvalidSweep("runs_per_value must be >= 1".into()));
        }
        self.base.validate()?;
        for &v in &self.values {
            self.parameter.apply(&self.base, v)?;
        }
        Ok(())
    }

    pub fn config_for(&self, value_index: usize) -> Result<SearchConfig> {
        let mut cfg = self.parameter.apply(&self.base, self.values[value_index])?;
        cfg.seed = run_seed(self.seed_base, value_index, 0);
        Ok(cfg)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of run `run_index` at swept value `value_index`.
pub fn run_seed(seed_base: u64, value_index: usize, run_index: usize) -> u64 {
    seed_base ^ splitmix64(splitmix64(value_index as u64) ^ run_index as u64)
}

/// Runs one prepared configuration once per seed; output order follows
/// `seeds`. `threads == 0` uses all available cores.
pub fn run_batch(prepared: &PreparedSearch, seeds: &[u64], threads: usize) -> Vec<SearchOutcome> {
    with_pool(threads, || {
        seeds
            .par_iter()
            .map(|&seed| prepared.run_with_seed(seed))
            .collect()
    })
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> T {
    if threads == 1 {
        return job();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(job),
        // running serially gives the same results
        Err(_) => job(),
    }
}

/// Counts of the first move, with left and right pooled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FirstStepHistogram {
    pub down: u32,
    pub left_right: u32,
    pub up: u32,
    pub stay: u32,
    /// Runs that ended before moving.
    pub none: u32,
}

impl FirstStepHistogram {
    pub fn add(&mut self, step: Option<Direction>) {
        match step {
            Some(Direction::Down) => self.down += 1,
            Some(Direction::Left | Direction::Right) => self.left_right += 1,
            Some(Direction::Up) => self.up += 1,
            Some(Direction::Stay) => self.stay += 1,
            None => self.none += 1,
        }
    }

    /// Most frequent bin among the moves; ties go to the earlier of
    /// down, left_right, up, stay.
    pub fn mode(&self) -> Option<&'static str> {
        let bins = [
            ("down", self.down),
            ("left_right", self.left_right),
            ("up", self.up),
            ("stay", self.stay),
        ];
        let mut best: Option<(&'static str, u32)> = None;
        for (name, n) in bins {
            if n > 0 && best.is_none_or(|(_, m)| n > m) {
                best = Some((name, n));
            }
        }
        best.map(|(name, _)| name)
    }

    /// Number of non-empty move bins.
    pub fn occupied_bins(&self) -> usize {
        [self.down, self.left_right, self.up, self.stay]
            .iter()
            .filter(|&&n| n > 0)
            .count()
    }
}

/// Aggregate statistics at one swept value.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub n_runs: u32,
    pub n_success: u32,
    pub n_type1: u32,
    pub n_type2: u32,
    pub n_aborted: u32,
    /// Over successful runs; `None` without successes.
    pub mean_time: Option<f64>,
    /// Sample standard deviation over successful runs (0 for a single one).
    pub std_time: Option<f64>,
    pub mean_time_all: f64,
    pub first_steps: FirstStepHistogram,
    /// Successful runs that never stood on the source.
    pub n_success_at_distance: u32,
}

impl SweepPoint {
    pub fn from_outcomes(value: f64, outcomes: &[SearchOutcome]) -> Self {
        let mut point = SweepPoint {
            value,
            n_runs: outcomes.len() as u32,
            n_success: 0,
            n_type1: 0,
            n_type2: 0,
            n_aborted: 0,
            mean_time: None,
            std_time: None,
            mean_time_all: 0.0,
            first_steps: FirstStepHistogram::default(),
            n_success_at_distance: 0,
        };
        let mut success_times = Vec::new();
        for o in outcomes {
            match o.status {
                SearchStatus::Success => {
                    point.n_success += 1;
                    success_times.push(f64::from(o.search_time));
                    if o.min_distance_to_source > 0.0 {
                        point.n_success_at_distance += 1;
                    }
                }
                SearchStatus::FailTypeI => point.n_type1 += 1,
                SearchStatus::FailTypeII => point.n_type2 += 1,
                SearchStatus::Aborted => point.n_aborted += 1,
            }
            point.first_steps.add(o.first_step);
        }
        if !outcomes.is_empty() {
            let total: f64 = outcomes.iter().map(|o| f64::from(o.search_time)).sum();
            point.mean_time_all = total / outcomes.len() as f64;
        }
        if !success_times.is_empty() {
            let n = success_times.len() as f64;
            let mean = success_times.iter().sum::<f64>() / n;
            let std = if success_times.len() > 1 {
                let ss: f64 = success_times.iter().map(|t| (t - mean).powi(2)).sum();
                (ss / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            point.mean_time = Some(mean);
            point.std_time = Some(std);
        }
        point
    }

    pub fn success_rate(&self) -> f64 {
        if self.n_runs == 0 {
            0.0
        } else {
            f64::from(self.n_success) / f64::from(self.n_runs)
        }
    }

    pub fn n_failures(&self) -> u32 {
        self.n_type1 + self.n_type2 + self.n_aborted
    }

    /// Standard error of the success-only mean time.
    pub fn std_error(&self) -> Option<f64> {
        self.std_time.map(|s| s / f64::from(self.n_success).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Versioned CSV: one `#` comment line, then the header and one row per
    /// value. Undefined statistics are empty fields.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "# infotaxis sweep v{CSV_VERSION} parameter={}",
            self.parameter
        )?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for p in &self.points {
            w.write_record([
                p.value.to_string(),
                p.n_runs.to_string(),
                p.n_success.to_string(),
                p.n_type1.to_string(),
                p.n_type2.to_string(),
                p.n_aborted.to_string(),
                p.success_rate().to_string(),
                opt(p.mean_time),
                opt(p.std_time),
                p.mean_time_all.to_string(),
                p.first_steps.mode().unwrap_or("").to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Outcomes of every run, grouped by swept value in spec order.
pub fn run_sweep_outcomes(spec: &SweepSpec, threads: usize) -> Result<Vec<Vec<SearchOutcome>>> {
    spec.validate()?;
    let runs = spec.runs_per_value as usize;
    let mut all = Vec::with_capacity(spec.values.len());
    for j in 0..spec.values.len() {
        let prepared = PreparedSearch::new(&spec.config_for(j)?)?;
        let seeds: Vec<u64> = (0..runs).map(|i| run_seed(spec.seed_base, j, i)).collect();
        all.push(run_batch(&prepared, &seeds, threads));
    }
    Ok(all)
}

pub fn aggregate(spec: &SweepSpec, outcomes: &[Vec<SearchOutcome>]) -> SweepResult {
    SweepResult {
        parameter: spec.parameter,
        points: spec
            .values
            .iter()
            .zip(outcomes)
            .map(|(&v, o)| SweepPoint::from_outcomes(v, o))
            .collect(),
    }
}

pub fn run_sweep(spec: &SweepSpec, threads: usize) -> Result<SweepResult> {
    let outcomes = run_sweep_outcomes(spec, threads)?;
    Ok(aggregate(spec, &outcomes))
}

fn reference_params() -> EnvParams {
    EnvParams::default()
}

/// `D` swept with `V = 0`, `γ = 1`, matched models, default geometry.
pub fn diffusion_sweep(values: Vec<f64>) -> SweepSpec {
    SweepSpec::new(
        SearchConfig::matched(reference_params()),
        SweepParameter::Diffusivity,
        values,
    )
}

/// `V` swept with `D = 1`, `γ = 1`, matched models, starting at `start`.
pub fn wind_sweep(values: Vec<f64>, start: Cell) -> SweepSpec {
    let base = SearchConfig {
        start,
        ..SearchConfig::matched(reference_params())
    };
    SweepSpec::new(base, SweepParameter::Wind, values)
}

/// `γ` swept at wind `wind` with `D = 1` and the given policy.
pub fn gamma_sweep(values: Vec<f64>, wind: f64, policy: PolicyConfig) -> Result<SweepSpec> {
    let params = reference_params().with_wind(wind)?;
    let base = SearchConfig {
        policy,
        ..SearchConfig::matched(params)
    };
    Ok(SweepSpec::new(base, SweepParameter::Gamma, values))
}

/// `λ_agent / λ_real` swept with the real environment at `D = 1`, `γ = 1`,
/// `V = 0`.
pub fn lambda_mismatch(ratios: Vec<f64>) -> SweepSpec {
    SweepSpec::new(
        SearchConfig::matched(reference_params()),
        SweepParameter::LambdaRatio,
        ratios,
    )
}

/// `γ_agent / γ_real` swept with `D = 1`, `V = 0`.
pub fn gamma_mismatch(ratios: Vec<f64>, gamma_real: f64) -> Result<SweepSpec> {
    let params = reference_params().with_gamma(gamma_real)?;
    Ok(SweepSpec::new(
        SearchConfig::matched(params),
        SweepParameter::GammaRatio,
        ratios,
    ))
}

/// Which trajectories a density map aggregates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrajectoryFilter {
    Successful,
    Unsuccessful,
    All,
}

impl TrajectoryFilter {
    pub fn name(self) -> &'static str {
        match self {
            TrajectoryFilter::Successful => "success",
            TrajectoryFilter::Unsuccessful => "failure",
            TrajectoryFilter::All => "all",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            TrajectoryFilter::Successful,
            TrajectoryFilter::Unsuccessful,
            TrajectoryFilter::All,
        ]
        .into_iter()
        .find(|f| f.name() == s)
    }

    pub fn accepts(self, status: SearchStatus) -> bool {
        match self {
            TrajectoryFilter::Successful => status == SearchStatus::Success,
            TrajectoryFilter::Unsuccessful => status != SearchStatus::Success,
            TrajectoryFilter::All => true,
        }
    }
}

/// Visit counts per cell, one count per observation step.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    grid: GridSpec,
    counts: Vec<u64>,
    trajectories: usize,
}

impl DensityMap {
    pub fn new(grid: GridSpec) -> Self {
        Self {
            grid,
            counts: vec![0; grid.len()],
            trajectories: 0,
        }
    }

    pub fn from_outcomes<'a>(
        grid: GridSpec,
        outcomes: impl IntoIterator<Item = &'a SearchOutcome>,
        filter: TrajectoryFilter,
    ) -> Result<Self> {
        let mut map = Self::new(grid);
        for o in outcomes {
            if filter.accepts(o.status) {
                map.add_trajectory(o.cells())?;
            }
        }
        Ok(map)
    }

    pub fn add_trajectory(&mut self, cells: impl IntoIterator<Item = Cell>) -> Result<()> {
        for c in cells {
            self.grid.check(c)?;
            self.counts[self.grid.index(c)] += 1;
        }
        self.trajectories += 1;
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn count(&self, cell: Cell) -> u64 {
        self.counts[self.grid.index(cell)]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn trajectories(&self) -> usize {
        self.trajectories
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn nonzero_cells(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Counts divided by the largest count (all zeros for an empty map).
    pub fn normalized(&self) -> GridField {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        let scale = if max == 0 { 0.0 } else { 1.0 / max as f64 };
        GridField::new(
            self.grid,
            self.counts.iter().map(|&c| c as f64 * scale).collect(),
        )
    }
}

/// A density-map campaign with its mean-rate overlay.
#[derive(Clone, Debug)]
pub struct DensityCampaign {
    pub map: DensityMap,
    /// Mean detection rate of the real environment.
    pub mean_field: GridField,
    pub summary: SweepPoint,
    pub outcomes: Vec<SearchOutcome>,
}

/// Runs `n_traj` searches of `cfg` and maps the trajectories that pass
/// `filter`.
pub fn density_map(
    cfg: &SearchConfig,
    n_traj: u32,
    seed_base: u64,
    filter: TrajectoryFilter,
    threads: usize,
) -> Result<DensityCampaign> {
    if n_traj == 0 {
        return Err(Error::InvalidSweep("n_traj must be >= 1".into()));
    }
    let prepared = PreparedSearch::new(cfg)?;
    let seeds: Vec<u64> = (0..n_traj as usize)
        .map(|i| run_seed(seed_base, 0, i))
        .collect();
    let outcomes = run_batch(&prepared, &seeds, threads);
    let map = DensityMap::from_outcomes(cfg.grid, &outcomes, filter)?;
    Ok(DensityCampaign {
        map,
        mean_field: env_model::mean_field(cfg.source, &cfg.grid, &cfg.params_real),
        summary: SweepPoint::from_outcomes(f64::NAN, &outcomes),
        outcomes,
    })
}
