use std::path::{Path, PathBuf};

use clap::Args;
use hetnet::curve::{curve_of_trajectory, write_curve_csv};
use hetnet::sde::{monte_carlo, sequence_label, PreparedNetwork, SimConfig};
use hetnet::{NetworkSpec, Vector};
use serde::Serialize;

use crate::manifest::{Manifest, SimEcho};
use crate::system::{load_system, parse_x0};
use crate::{code, Failure, Format, SystemArgs};

/// Censoring fraction above which the run ends with the warning exit code.
const CENSORING_WARNING: f64 = 0.1;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Noise amplitude; repeat for a sweep, largest first
    #[arg(long = "epsilon", required = true)]
    pub epsilons: Vec<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e4)]
    pub max_time: f64,
    /// Escape distance from the connection orbits (default: half the smallest box radius)
    #[arg(long)]
    pub tube_radius: Option<f64>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Also record the first N trials as rescaled curves under paths/
    #[arg(long, default_value_t = 0)]
    pub save_paths: usize,
    /// Keep every k-th step of saved paths
    #[arg(long, default_value_t = 10)]
    pub record_stride: usize,
    /// csv writes sequences/dwell/exits CSVs; json also writes ensemble.json
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Directory name for one noise level, e.g. `eps_1e-2`.
pub fn eps_dir(out: &Path, eps: f64) -> PathBuf {
    out.join(format!("eps_{eps:e}"))
}

#[derive(Serialize)]
struct PathIndex {
    trial: usize,
    sequence: String,
    terminal: String,
}

fn check_epsilons(eps: &[f64]) -> anyhow::Result<()> {
    if eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        anyhow::bail!("every --epsilon must lie in (0, 1)");
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        anyhow::bail!("--epsilon values must be strictly descending");
    }
    Ok(())
}

fn save_paths(spec: &NetworkSpec, x0: &Vector, cfg: &SimConfig, depth: usize, n: usize, dir: &Path) -> anyhow::Result<()> {
    let dir = dir.join("paths");
    std::fs::create_dir_all(&dir)?;
    let prep = PreparedNetwork::new(spec, Some(x0), &SimConfig { record: true, ..*cfg })?;
    let mut index = csv::Writer::from_path(dir.join("index.csv"))?;
    for trial in 0..n.min(cfg.trials) {
        let traj = prep.walk(trial as u64, depth)?;
        write_curve_csv(&dir.join(format!("trial_{trial}.csv")), &curve_of_trajectory(&traj, cfg.epsilon)?)?;
        let terminal = serde_json::to_value(&traj.terminal)?["kind"].as_str().unwrap_or_default().to_string();
        index.serialize(PathIndex { trial, sequence: sequence_label(spec, &traj.passages, depth), terminal })?;
    }
    index.flush()?;
    Ok(())
}

pub fn run(args: &SimulateArgs) -> Result<u8, Failure> {
    let a = &args.system;
    if a.depth == 0 {
        return Err(Failure::usage(anyhow::anyhow!("--depth must be at least 1")));
    }
    check_epsilons(&args.epsilons).map_err(Failure::usage)?;
    let spec = load_system(&a.system, a.params.as_deref())?;
    if spec.field.is_none() {
        return Err(Failure::usage(anyhow::anyhow!("simulation needs a concrete network with a vector field")));
    }
    let x0 = parse_x0(&spec, a.x0.as_deref())
        .map_err(Failure::usage)?
        .ok_or_else(|| Failure::usage(anyhow::anyhow!("--x0 is required for this system")))?;
    let tube_radius = args.tube_radius.unwrap_or(0.5 * spec.min_radius());
    let mut censored = Vec::new();
    let mut warn = false;
    for &eps in &args.epsilons {
        let cfg = SimConfig {
            epsilon: eps,
            dt: args.dt,
            seed: a.seed,
            trials: args.trials,
            max_time: args.max_time,
            record_stride: args.record_stride,
            record: false,
            tube_radius: Some(tube_radius),
            workers: args.workers,
        };
        cfg.validate(&spec).map_err(Failure::usage)?;
        let stats = monte_carlo(&spec, &x0, &cfg, a.depth).map_err(Failure::validation)?;
        let dir = eps_dir(&a.out, eps);
        let write = || -> anyhow::Result<()> {
            stats.write_csvs(&dir)?;
            if args.format == Format::Json {
                std::fs::write(dir.join("ensemble.json"), serde_json::to_string_pretty(&stats)? + "\n")?;
            }
            if args.save_paths > 0 {
                save_paths(&spec, &x0, &cfg, a.depth, args.save_paths, &dir)?;
            }
            Ok(())
        };
        write().map_err(Failure::usage)?;
        println!(
            "epsilon={eps:e}: {} trials, {} censored ({} max-time, {} escaped)",
            stats.trials, stats.censored, stats.censored_max_time, stats.censored_escaped
        );
        for s in &stats.sequences {
            println!("  {}  {}  freq={:.4} [{:.4}, {:.4}]", s.sequence, s.count, s.freq, s.ci_lo, s.ci_hi);
        }
        if stats.censored_fraction() > CENSORING_WARNING {
            eprintln!("warning: {:.1}% of trials censored at epsilon={eps:e}", 100.0 * stats.censored_fraction());
            warn = true;
        }
        censored.push(stats.censored);
    }
    let mut manifest = Manifest::new("simulate", a, Some(&x0));
    manifest.sim = Some(SimEcho {
        epsilons: args.epsilons.clone(),
        dt: args.dt,
        trials: args.trials,
        max_time: args.max_time,
        tube_radius,
        censored,
        saved_paths: args.save_paths.min(args.trials),
    });
    manifest.write(&a.out).map_err(Failure::usage)?;
    Ok(if warn { code::CENSORING } else { code::PASS })
}
