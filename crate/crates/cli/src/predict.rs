use std::path::Path;

use clap::Args;
use hetnet::exitmap::{
    classify_set, enumerate_sequences, exit_measure, AdmissibleSequence, EnumerationMode, ExitMeasure, PredictConfig,
    SetClassification,
};
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::system::{load_system, parse_x0};
use crate::{code, Failure, Format, SystemArgs};

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Follow every branch to an exit leaf instead of stopping at --depth
    #[arg(long)]
    pub until_exit: bool,
    /// Draws per branch when a split probability has to be sampled
    #[arg(long, default_value_t = 100_000)]
    pub n_kappa: usize,
    /// Drop children of zero-probability branches
    #[arg(long)]
    pub prune: bool,
    /// json writes report.json; csv also writes the predicted.csv mirror
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub manifest: Manifest,
    pub sequences: Vec<AdmissibleSequence>,
    pub classification: SetClassification,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_measure: Option<ExitMeasure>,
}

impl Report {
    pub fn read(path: &Path) -> anyhow::Result<Report> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    path: &'a str,
    pi: f64,
    pi_stderr: f64,
    dwell: String,
    alphas: String,
    betas: String,
    tags: String,
    terminal_exit: String,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

pub fn run(args: &PredictArgs) -> Result<u8, Failure> {
    let a = &args.system;
    if a.depth == 0 {
        return Err(Failure::usage(anyhow::anyhow!("--depth must be at least 1")));
    }
    let spec = load_system(&a.system, a.params.as_deref())?;
    let x0 = parse_x0(&spec, a.x0.as_deref()).map_err(Failure::usage)?;
    let cfg = PredictConfig { n_kappa: args.n_kappa, seed: a.seed, prune_zero: args.prune, ..PredictConfig::default() };
    let mode = if args.until_exit { EnumerationMode::UntilExit } else { EnumerationMode::Depth(a.depth) };
    let sequences = enumerate_sequences(&spec, x0.as_ref(), &mode, &cfg).map_err(Failure::validation)?;
    let classification = classify_set(&sequences);
    let exit_measure = if spec.exits.is_empty() {
        None
    } else {
        Some(exit_measure(&spec, x0.as_ref(), &cfg).map_err(Failure::validation)?)
    };
    let manifest = Manifest::new("predict", a, x0.as_ref());
    std::fs::create_dir_all(&a.out).map_err(|e| Failure::usage(anyhow::Error::from(e)))?;
    let report = Report { manifest: manifest.clone(), sequences, classification, exit_measure };
    let write = || -> anyhow::Result<()> {
        manifest.write(&a.out)?;
        std::fs::write(a.out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        if args.format == Format::Csv {
            let mut w = csv::Writer::from_path(a.out.join("predicted.csv"))?;
            for s in &report.sequences {
                let tags: Vec<String> = s.tags.iter().map(|t| serde_json::to_value(t).unwrap().as_str().unwrap().to_string()).collect();
                w.serialize(CsvRow {
                    path: &s.path,
                    pi: s.pi,
                    pi_stderr: s.pi_stderr,
                    dwell: join(&s.dwell),
                    alphas: join(&s.alphas),
                    betas: join(&s.betas),
                    tags: tags.join(";"),
                    terminal_exit: s.terminal_exit.map_or_else(String::new, |e| e.to_string()),
                })?;
            }
            w.flush()?;
        }
        Ok(())
    };
    write().map_err(Failure::usage)?;
    for s in &report.sequences {
        let flag = s.degenerate.as_deref().map_or(String::new(), |d| format!("  degenerate: {d}"));
        println!("{}  pi={}{}", s.path, s.pi, flag);
    }
    let c = &report.classification;
    println!("free={} complete={} conservative={} total_pi={}", c.free, c.complete, c.conservative, c.total_pi);
    if let Some(m) = &report.exit_measure {
        for atom in &m.atoms {
            println!("exit {} weight={}", atom.name, atom.weight);
        }
        if let Some(w) = &m.warning {
            eprintln!("warning: {w}");
        }
    }
    Ok(code::PASS)
}
