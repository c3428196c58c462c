//! `infotaxis` command-line driver: single searches, parameter sweeps and
//! density-map campaigns, each writing its artifacts plus a manifest into an
//! output directory.

mod config;
mod manifest;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{parse_config, Config, ConfigError, Experiment};
use infotaxis::experiments::{self, SweepPoint};
use infotaxis::{GridField, SearchOutcome, SearchStatus};
use manifest::Manifest;

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORTED: u8 = 3;

#[derive(Parser)]
#[command(name = "infotaxis", version, about = "Infotactic source search simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One search; writes its trajectory and outcome.
    Run(Args),
    /// A parameter sweep or mismatch study; writes a CSV.
    Sweep(Args),
    /// A density map of visited cells; writes matrix and PGM files.
    Map(Args),
}

#[derive(clap::Args)]
struct Args {
    /// Configuration file (`key = value` lines); defaults apply without one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed of the run, or seed base of a sweep or map (overrides the file).
    #[arg(long)]
    seed: Option<u64>,
    /// Runs per swept value, or trajectories of a map (overrides the file).
    #[arg(long)]
    runs: Option<u32>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "INFOTAXIS_THREADS", default_value_t = 0)]
    threads: usize,
    /// Exit with status 3 if any search aborted.
    #[arg(long)]
    strict: bool,
    /// Also write every trajectory of a sweep or map.
    #[arg(long)]
    dump_trajectories: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("cannot read {path}: {source}")]
    ReadConfig { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Model(#[from] infotaxis::Error),
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::ReadConfig { .. } | CliError::Model(_) => EXIT_CONFIG,
            CliError::Io(_) => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Run(a) => (Experiment::Run, a),
        Command::Sweep(a) => (Experiment::Sweep, a),
        Command::Map(a) => (Experiment::Map, a),
    };
    match execute(kind, args) {
        Ok(aborted) => {
            if aborted > 0 {
                eprintln!("{aborted} search(es) aborted");
                if args.strict {
                    return ExitCode::from(EXIT_ABORTED);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load(kind: Experiment, args: &Args) -> Result<Config, CliError> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
            path: path.clone(),
            source,
        })?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text, kind)?;
    let compatible = match kind {
        Experiment::Sweep => cfg.experiment.is_sweep(),
        other => cfg.experiment == other,
    };
    if !compatible {
        return Err(ConfigError::Constraint {
            key: "experiment".into(),
            message: format!("`{}` cannot be run by this subcommand", cfg.experiment),
        }
        .into());
    }
    match kind {
        Experiment::Run => {
            if let Some(seed) = args.seed {
                cfg.search.seed = seed;
            }
            if args.runs.is_some() {
                return Err(ConfigError::Constraint {
                    key: "--runs".into(),
                    message: "not used by a single run".into(),
                }
                .into());
            }
        }
        Experiment::Map => {
            if let Some(seed) = args.seed {
                cfg.map.seed_base = seed;
            }
            if let Some(runs) = args.runs {
                cfg.map.trajectories = runs;
            }
            if cfg.map.trajectories == 0 {
                return Err(ConfigError::Constraint {
                    key: "--runs".into(),
                    message: "must be >= 1".into(),
                }
                .into());
            }
        }
        _ => {
            let sweep = cfg.sweep.as_mut().expect("sweep experiments carry sweep settings");
            if let Some(seed) = args.seed {
                sweep.seed_base = seed;
            }
            if let Some(runs) = args.runs {
                sweep.runs_per_value = runs;
            }
            if sweep.runs_per_value == 0 {
                return Err(ConfigError::Constraint {
                    key: "--runs".into(),
                    message: "must be >= 1".into(),
                }
                .into());
            }
        }
    }
    Ok(cfg)
}

/// Tracks the files written into the output directory.
struct Artifacts<'a> {
    dir: &'a Path,
    written: Vec<String>,
}

impl<'a> Artifacts<'a> {
    fn create(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>,
    ) -> io::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut out = BufWriter::new(File::create(&path)?);
        write(&mut out)?;
        out.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn trajectory(&mut self, name: &str, outcome: &SearchOutcome) -> io::Result<()> {
        self.create(name, |w| {
            writeln!(w, "step\tx\ty\tk\tentropy")?;
            outcome.write_trajectory(w)
        })
    }

    fn field(&mut self, stem: &str, field: &GridField) -> io::Result<()> {
        self.create(&format!("{stem}.txt"), |w| field.write_matrix(w))?;
        self.create(&format!("{stem}.pgm"), |w| field.write_pgm(w))
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> io::Result<()> {
        self.create(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}

fn outcome_json(o: &SearchOutcome) -> serde_json::Value {
    json!({
        "status": o.status.to_string(),
        "search_time": o.search_time,
        "first_step": o.first_step.map(|d| d.name()),
        "final_entropy": o.final_entropy,
        "final_argmax": [o.final_argmax.x, o.final_argmax.y],
        "final_argmax_mass": o.final_argmax_mass,
        "argmax_ties": o.argmax_ties,
        "detections_total": o.detections_total,
        "min_distance_to_source": o.min_distance_to_source,
        "abort_reason": o.abort_reason.as_ref().map(|e| e.to_string()),
    })
}

fn point_json(p: &SweepPoint) -> serde_json::Value {
    json!({
        "n_runs": p.n_runs,
        "n_success": p.n_success,
        "n_type1": p.n_type1,
        "n_type2": p.n_type2,
        "n_aborted": p.n_aborted,
        "success_rate": p.success_rate(),
        "mean_time_success": p.mean_time,
        "std_time_success": p.std_time,
        "mean_time_all": p.mean_time_all,
        "n_success_at_distance": p.n_success_at_distance,
        "first_step_mode": p.first_steps.mode(),
    })
}

/// Runs the command and returns the number of aborted searches.
fn execute(kind: Experiment, args: &Args) -> Result<usize, CliError> {
    let cfg = load(kind, args)?;
    let started = Instant::now();
    let started_at = manifest::unix_time();
    fs::create_dir_all(&args.out)?;
    let mut files = Artifacts {
        dir: &args.out,
        written: Vec::new(),
    };

    let (seed, aborted) = match kind {
        Experiment::Run => {
            let outcome = infotaxis::search::run_search(&cfg.search)?;
            files.trajectory("trajectory.tsv", &outcome)?;
            files.json("outcome.json", &outcome_json(&outcome))?;
            println!(
                "{} after {} steps (final entropy {:.3e})",
                outcome.status, outcome.search_time, outcome.final_entropy
            );
            let aborted = usize::from(outcome.status == SearchStatus::Aborted);
            (cfg.search.seed, aborted)
        }
        Experiment::Map => {
            let m = &cfg.map;
            let campaign =
                experiments::density_map(&cfg.search, m.trajectories, m.seed_base, m.filter, args.threads)?;
            files.field("density", &campaign.map.normalized())?;
            files.field("mean_field", &campaign.mean_field)?;
            let mut summary = point_json(&campaign.summary);
            summary["filter"] = json!(m.filter.name());
            summary["mapped_trajectories"] = json!(campaign.map.trajectories());
            summary["visits"] = json!(campaign.map.total());
            files.json("map_summary.json", &summary)?;
            if args.dump_trajectories {
                for (i, o) in campaign.outcomes.iter().enumerate() {
                    files.trajectory(&format!("trajectories/run{i:04}.tsv"), o)?;
                }
            }
            println!(
                "{} of {} searches successful; {} trajectories mapped",
                campaign.summary.n_success,
                campaign.summary.n_runs,
                campaign.map.trajectories()
            );
            (m.seed_base, campaign.summary.n_aborted as usize)
        }
        _ => {
            let spec = cfg.sweep_spec().expect("sweep experiments carry sweep settings");
            let outcomes = experiments::run_sweep_outcomes(&spec, args.threads)?;
            let result = experiments::aggregate(&spec, &outcomes);
            files.create("sweep.csv", |w| result.write_csv(w))?;
            if args.dump_trajectories {
                for (j, runs) in outcomes.iter().enumerate() {
                    for (i, o) in runs.iter().enumerate() {
                        files.trajectory(&format!("trajectories/value{j:03}_run{i:04}.tsv"), o)?;
                    }
                }
            }
            for p in &result.points {
                println!(
                    "{} = {}: {}/{} successful",
                    spec.parameter, p.value, p.n_success, p.n_runs
                );
            }
            let aborted = result.points.iter().map(|p| p.n_aborted as usize).sum();
            (spec.seed_base, aborted)
        }
    };

    let resolved = cfg.render();
    files.create("config.resolved.txt", |w| w.write_all(resolved.as_bytes()))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: kind_name(kind).into(),
        experiment: cfg.experiment.to_string(),
        config_path: args.config.as_ref().map(|p| p.display().to_string()),
        output_dir: args.out.display().to_string(),
        seed_base: seed,
        threads: args.threads,
        started_unix_seconds: started_at,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        aborted_runs: aborted,
        artifacts: files.written.clone(),
        resolved_config: resolved,
    };
    manifest.write(&args.out.join(manifest::FILE_NAME))?;
    Ok(aborted)
}

fn kind_name(kind: Experiment) -> &'static str {
    match kind {
        Experiment::Run => "run",
        Experiment::Map => "map",
        _ => "sweep",
    }
}
