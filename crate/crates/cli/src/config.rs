//! Experiment configuration files.
//!
//! The format is flat `key = value` lines. Sections are spelled as dotted
//! keys (`env_real.D = 0.5`), `#` starts a comment, blank lines are ignored.
//! Unknown or repeated keys are errors. Every `env_agent.*` key defaults to
//! the matching `env_real.*` value.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use infotaxis::experiments::{SweepParameter, SweepSpec, TrajectoryFilter, DEFAULT_RUNS_PER_VALUE};
use infotaxis::search::{DEFAULT_ENTROPY_THRESHOLD, DEFAULT_MAX_STEPS, DEFAULT_SOURCE, DEFAULT_START};
use infotaxis::{Cell, Direction, EnvParams, GridSpec, PolicyConfig, SearchConfig, Truncation};

pub const DEFAULT_CUMULATIVE_THRESHOLD: f64 = 0.999;
pub const DEFAULT_K_MAX: u32 = 20;
pub const DEFAULT_MAP_TRAJECTORIES: u32 = 200;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` is set twice (first on line {first})")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: `{key}`: {message}")]
    BadValue { line: usize, key: String, message: String },
    #[error("`{key}`: {message}")]
    Constraint { key: String, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Run,
    Map,
    Sweep,
    SweepDiffusion,
    SweepWind,
    SweepGamma,
    MismatchLambda,
    MismatchGamma,
}

impl Experiment {
    const ALL: [Experiment; 8] = [
        Experiment::Run,
        Experiment::Map,
        Experiment::Sweep,
        Experiment::SweepDiffusion,
        Experiment::SweepWind,
        Experiment::SweepGamma,
        Experiment::MismatchLambda,
        Experiment::MismatchGamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Run => "run",
            Experiment::Map => "map",
            Experiment::Sweep => "sweep",
            Experiment::SweepDiffusion => "sweep_diffusion",
            Experiment::SweepWind => "sweep_wind",
            Experiment::SweepGamma => "sweep_gamma",
            Experiment::MismatchLambda => "mismatch_lambda",
            Experiment::MismatchGamma => "mismatch_gamma",
        }
    }

    pub fn is_sweep(self) -> bool {
        !matches!(self, Experiment::Run | Experiment::Map)
    }

    /// Swept parameter and default values of the preset sweeps.
    fn preset(self) -> Option<(SweepParameter, &'static [f64])> {
        match self {
            Experiment::SweepDiffusion => Some((
                SweepParameter::Diffusivity,
                &[0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0],
            )),
            Experiment::SweepWind => Some((SweepParameter::Wind, &[0.0, 0.5, 1.0, 1.5])),
            Experiment::SweepGamma => Some((SweepParameter::Gamma, &[0.2, 0.5, 1.0, 2.0, 5.0])),
            Experiment::MismatchLambda => Some((
                SweepParameter::LambdaRatio,
                &[0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0],
            )),
            Experiment::MismatchGamma => Some((
                SweepParameter::GammaRatio,
                &[0.1, 0.5, 1.0, 2.0, 2.5, 3.5],
            )),
            _ => None,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub runs_per_value: u32,
    pub seed_base: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MapSettings {
    pub trajectories: u32,
    pub filter: TrajectoryFilter,
    pub seed_base: u64,
}

/// A fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub experiment: Experiment,
    pub search: SearchConfig,
    /// Present for sweep experiments.
    pub sweep: Option<SweepSettings>,
    pub map: MapSettings,
}

impl Config {
    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|s| SweepSpec {
            base: self.search.clone(),
            parameter: s.parameter,
            values: s.values.clone(),
            runs_per_value: s.runs_per_value,
            seed_base: s.seed_base,
        })
    }

    /// Canonical text with every key spelled out; parses back to `self`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let s = &self.search;
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("experiment", self.experiment.to_string());
        line("grid.width", s.grid.width().to_string());
        line("grid.height", s.grid.height().to_string());
        line("source.x", s.source.x.to_string());
        line("source.y", s.source.y.to_string());
        line("start.x", s.start.x.to_string());
        line("start.y", s.start.y.to_string());
        for (section, p) in [("env_real", &s.params_real), ("env_agent", &s.params_agent)] {
            line(&format!("{section}.gamma"), p.gamma().to_string());
            line(&format!("{section}.D"), p.diffusivity().to_string());
            line(&format!("{section}.V"), p.wind().to_string());
            line(&format!("{section}.eta"), p.lifetime().to_string());
            line(&format!("{section}.a"), p.searcher_size().to_string());
        }
        line("search.dt", s.dt.to_string());
        line("search.entropy_threshold", s.entropy_threshold.to_string());
        line("search.max_steps", s.max_steps.to_string());
        line("search.forced_initial_detection", s.forced_initial_detection.to_string());
        line("search.observe_colocation", s.observe_colocation.to_string());
        line("search.seed", s.seed.to_string());
        match s.policy.truncation() {
            Truncation::Cumulative(t) => {
                line("policy.truncation", "cumulative".into());
                line("policy.threshold", t.to_string());
            }
            Truncation::HardCap(k) => {
                line("policy.truncation", "hard_cap".into());
                line("policy.k_max", k.to_string());
            }
        }
        let order: Vec<&str> = s.policy.move_order().iter().map(|d| d.name()).collect();
        line("policy.move_order", order.join(", "));
        if let Some(sw) = &self.sweep {
            line("sweep.parameter", sw.parameter.to_string());
            let values: Vec<String> = sw.values.iter().map(|v| v.to_string()).collect();
            line("sweep.values", values.join(", "));
            line("sweep.runs_per_value", sw.runs_per_value.to_string());
            line("sweep.seed_base", sw.seed_base.to_string());
        }
        line("map.trajectories", self.map.trajectories.to_string());
        line("map.filter", self.map.filter.name().to_string());
        line("map.seed_base", self.map.seed_base.to_string());
        out
    }
}

const ENV_KEYS: [&str; 5] = ["gamma", "D", "V", "eta", "a"];

fn is_known(key: &str) -> bool {
    const PLAIN: [&str; 24] = [
        "experiment",
        "grid.width",
        "grid.height",
        "source.x",
        "source.y",
        "start.x",
        "start.y",
        "search.dt",
        "search.entropy_threshold",
        "search.max_steps",
        "search.forced_initial_detection",
        "search.observe_colocation",
        "search.seed",
        "policy.truncation",
        "policy.threshold",
        "policy.k_max",
        "policy.move_order",
        "sweep.parameter",
        "sweep.values",
        "sweep.runs_per_value",
        "sweep.seed_base",
        "map.trajectories",
        "map.filter",
        "map.seed_base",
    ];
    if PLAIN.contains(&key) {
        return true;
    }
    match key.split_once('.') {
        Some(("env_real" | "env_agent", name)) => ENV_KEYS.contains(&name),
        _ => false,
    }
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "missing key before `=`".into(),
                });
            }
            if !is_known(key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.into(),
                });
            }
            if let Some((_, first)) = map.get(key) {
                return Err(ConfigError::Duplicate {
                    line,
                    key: key.into(),
                    first: *first,
                });
            }
            map.insert(key.into(), (value.into(), line));
        }
        Ok(Self { map })
    }

    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.get_with(key, |v| v.parse::<T>().ok())
    }

    fn get_with<T>(
        &self,
        key: &str,
        parse: impl FnOnce(&str) -> Option<T>,
    ) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((value, line)) => parse(value).map(Some).ok_or_else(|| ConfigError::BadValue {
                line,
                key: key.into(),
                message: format!("cannot parse `{value}`"),
            }),
        }
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn bad(&self, key: &str, message: impl Into<String>) -> ConfigError {
        match self.raw(key) {
            Some((_, line)) => ConfigError::BadValue {
                line,
                key: key.into(),
                message: message.into(),
            },
            None => ConfigError::Constraint {
                key: key.into(),
                message: message.into(),
            },
        }
    }
}

fn parse_list<T: FromStr>(value: &str) -> Option<Vec<T>> {
    value
        .split(',')
        .map(|item| item.trim().parse().ok())
        .collect()
}

fn parse_bool(value: &str) -> Option<bool> {
    match value {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn env_params(
    entries: &Entries,
    section: &str,
    fallback: Option<&EnvParams>,
) -> Result<EnvParams, ConfigError> {
    let reference = EnvParams::default();
    let base = fallback.unwrap_or(&reference);
    let key = |name: &str| format!("{section}.{name}");
    let gamma = entries.or(&key("gamma"), base.gamma())?;
    let d = entries.or(&key("D"), base.diffusivity())?;
    let v = entries.or(&key("V"), base.wind())?;
    let eta = entries.or(&key("eta"), base.lifetime())?;
    let a = entries.or(&key("a"), base.searcher_size())?;
    let constraint = |e: infotaxis::Error| match e {
        infotaxis::Error::InvalidParameter { name, .. } => entries.bad(&key(name), e.to_string()),
        infotaxis::Error::CorrelationTooShort { .. } => {
            let culprit = ["D", "V", "eta", "a"]
                .into_iter()
                .map(key)
                .find(|k| entries.has(k))
                .unwrap_or_else(|| key("D"));
            entries.bad(&culprit, format!("{e} (lambda depends on D, V and eta)"))
        }
        other => ConfigError::Constraint {
            key: section.into(),
            message: other.to_string(),
        },
    };
    EnvParams::new(gamma, d, v, eta, a).map_err(constraint)
}

fn cell(entries: &Entries, prefix: &str, default: Cell) -> Result<Cell, ConfigError> {
    Ok(Cell::new(
        entries.or(&format!("{prefix}.x"), default.x)?,
        entries.or(&format!("{prefix}.y"), default.y)?,
    ))
}

fn policy(entries: &Entries) -> Result<PolicyConfig, ConfigError> {
    let mode = entries
        .raw("policy.truncation")
        .map(|(v, _)| v)
        .unwrap_or("cumulative");
    let truncation = match mode {
        "cumulative" => {
            if entries.has("policy.k_max") {
                return Err(entries.bad("policy.k_max", "requires policy.truncation = hard_cap"));
            }
            Truncation::Cumulative(entries.or("policy.threshold", DEFAULT_CUMULATIVE_THRESHOLD)?)
        }
        "hard_cap" => {
            if entries.has("policy.threshold") {
                return Err(entries.bad(
                    "policy.threshold",
                    "requires policy.truncation = cumulative",
                ));
            }
            Truncation::HardCap(entries.or("policy.k_max", DEFAULT_K_MAX)?)
        }
        other => {
            return Err(entries.bad(
                "policy.truncation",
                format!("expected `cumulative` or `hard_cap`, got `{other}`"),
            ))
        }
    };
    let order = match entries.get_with("policy.move_order", |v| {
        let dirs: Option<Vec<Direction>> = v.split(',').map(|d| Direction::parse(d.trim())).collect();
        dirs.and_then(|d| <[Direction; 5]>::try_from(d).ok())
    })? {
        Some(order) => order,
        None => Direction::ALL,
    };
    PolicyConfig::new(truncation, order).map_err(|e| {
        let key = match e {
            infotaxis::Error::InvalidParameter { name, .. } => name,
            _ => "policy",
        };
        entries.bad(key, e.to_string())
    })
}

/// Parses and resolves a configuration. `default_experiment` applies when the
/// file does not set `experiment`.
pub fn parse_config(text: &str, default_experiment: Experiment) -> Result<Config, ConfigError> {
    let entries = Entries::parse(text)?;
    let experiment = match entries.get_with("experiment", |v| {
        Experiment::ALL.into_iter().find(|e| e.name() == v)
    })? {
        Some(e) => e,
        None => default_experiment,
    };

    let width = entries.or("grid.width", 100usize)?;
    let height = entries.or("grid.height", 100usize)?;
    let grid = GridSpec::new(width, height).map_err(|e| entries.bad("grid.width", e.to_string()))?;
    let source = cell(&entries, "source", DEFAULT_SOURCE)?;
    let start = cell(&entries, "start", DEFAULT_START)?;
    for (key, c) in [("source.x", source), ("start.x", start)] {
        grid.check(c).map_err(|e| entries.bad(key, e.to_string()))?;
    }
    let params_real = env_params(&entries, "env_real", None)?;
    let params_agent = env_params(&entries, "env_agent", Some(&params_real))?;

    let search = SearchConfig {
        grid,
        params_real,
        params_agent,
        source,
        start,
        dt: entries.or("search.dt", 1.0)?,
        entropy_threshold: entries.or("search.entropy_threshold", DEFAULT_ENTROPY_THRESHOLD)?,
        max_steps: entries.or("search.max_steps", DEFAULT_MAX_STEPS)?,
        policy: policy(&entries)?,
        forced_initial_detection: entries
            .get_with("search.forced_initial_detection", parse_bool)?
            .unwrap_or(true),
        observe_colocation: entries
            .get_with("search.observe_colocation", parse_bool)?
            .unwrap_or(true),
        seed: entries.or("search.seed", 0u64)?,
    };
    search.validate().map_err(|e| {
        let key = match &e {
            infotaxis::Error::InvalidParameter { name, .. } => format!("search.{name}"),
            _ => "search".into(),
        };
        entries.bad(&key, e.to_string())
    })?;

    let sweep_keys = ["sweep.parameter", "sweep.values", "sweep.runs_per_value", "sweep.seed_base"];
    let sweep = if experiment.is_sweep() {
        let preset = experiment.preset();
        let parameter = match entries.get_with("sweep.parameter", SweepParameter::parse)? {
            Some(p) => {
                if let Some((preset_param, _)) = preset {
                    if p != preset_param {
                        return Err(entries.bad(
                            "sweep.parameter",
                            format!("experiment {experiment} sweeps {preset_param}"),
                        ));
                    }
                }
                p
            }
            None => match preset {
                Some((p, _)) => p,
                None => {
                    return Err(ConfigError::Constraint {
                        key: "sweep.parameter".into(),
                        message: "required for experiment = sweep".into(),
                    })
                }
            },
        };
        let values = match entries.get_with("sweep.values", parse_list::<f64>)? {
            Some(v) => v,
            None => match preset {
                Some((_, v)) => v.to_vec(),
                None => {
                    return Err(ConfigError::Constraint {
                        key: "sweep.values".into(),
                        message: "required for experiment = sweep".into(),
                    })
                }
            },
        };
        let settings = SweepSettings {
            parameter,
            values,
            runs_per_value: entries.or("sweep.runs_per_value", DEFAULT_RUNS_PER_VALUE)?,
            seed_base: entries.or("sweep.seed_base", 0u64)?,
        };
        let spec = SweepSpec {
            base: search.clone(),
            parameter: settings.parameter,
            values: settings.values.clone(),
            runs_per_value: settings.runs_per_value,
            seed_base: settings.seed_base,
        };
        if settings.runs_per_value == 0 {
            return Err(entries.bad("sweep.runs_per_value", "must be >= 1"));
        }
        spec.validate()
            .map_err(|e| entries.bad("sweep.values", e.to_string()))?;
        Some(settings)
    } else {
        if let Some(key) = sweep_keys.iter().find(|k| entries.has(k)) {
            return Err(entries.bad(key, format!("not used by experiment = {experiment}")));
        }
        None
    };

    let map = MapSettings {
        trajectories: entries.or("map.trajectories", DEFAULT_MAP_TRAJECTORIES)?,
        filter: entries
            .get_with("map.filter", TrajectoryFilter::parse)?
            .unwrap_or(TrajectoryFilter::Successful),
        seed_base: entries.or("map.seed_base", 0u64)?,
    };
    if map.trajectories == 0 {
        return Err(entries.bad("map.trajectories", "must be >= 1"));
    }

    Ok(Config {
        experiment,
        search,
        sweep,
        map,
    })
}
