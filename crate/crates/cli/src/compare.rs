use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use hetnet::curve::{curve_of_sequence, read_curve_csv, rho};
use hetnet::sde::{DwellStat, SequenceFreq};
use hetnet::stats::{median, wilson_interval};
use hetnet::Vector;
use serde::{Deserialize, Serialize};

use crate::manifest::Manifest;
use crate::predict::Report;
use crate::simulate::eps_dir;
use crate::system::load_system;
use crate::{code, Failure};

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// report.json written by `hetnet predict`
    #[arg(long)]
    pub predict: PathBuf,
    /// Output directory of `hetnet simulate`
    #[arg(long)]
    pub ensemble: PathBuf,
    /// Largest accepted |z| of a sequence frequency; judged at the smallest epsilon
    #[arg(long, default_value_t = 3.0)]
    pub tolerance: f64,
    /// Largest relative error of the fitted dwell coefficient (needs two or more epsilons)
    #[arg(long, default_value_t = 0.15)]
    pub dwell_tolerance: f64,
    /// Smallest accepted empirical mass of the predicted support
    #[arg(long, default_value_t = 0.9)]
    pub min_support: f64,
    /// Where to write comparison.json (default: the ensemble directory)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequenceRow {
    pub epsilon: f64,
    pub path: String,
    pub pi_pred: f64,
    pub pi_emp: f64,
    pub count: u64,
    pub n: u64,
    /// Absent when the predicted probability is 0 or 1.
    pub z: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupportRow {
    pub epsilon: f64,
    pub mass: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DwellRow {
    pub saddle_ordinal: usize,
    pub predicted: f64,
    /// Per epsilon, mean passage time over `ln(1/ε)`.
    pub rescaled: Vec<f64>,
    /// Slope of mean passage time against `ln(1/ε)`.
    pub fitted: Option<f64>,
    pub relative_error: Option<f64>,
    /// Absent when the row is informational.
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RhoRow {
    pub epsilon: f64,
    pub matched: usize,
    pub median: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub system: String,
    pub epsilons: Vec<f64>,
    pub censored_fraction: Vec<f64>,
    pub sequences: Vec<SequenceRow>,
    pub support: Vec<SupportRow>,
    pub dwell: Vec<DwellRow>,
    pub rho: Vec<RhoRow>,
    pub rho_decreasing: Option<bool>,
    pub pass: bool,
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().map(|row| row.with_context(|| format!("parsing {}", path.display()))).collect()
}

fn check_manifests(pred: &Manifest, sim: &Manifest) -> anyhow::Result<()> {
    if sim.sim.is_none() {
        bail!("ensemble manifest was not written by `hetnet simulate`");
    }
    if pred.system != sim.system || pred.params != sim.params {
        bail!("config mismatch: predicted {} {:?}, simulated {} {:?}", pred.system, pred.params, sim.system, sim.params);
    }
    if let (Some(a), Some(b)) = (&pred.x0, &sim.x0) {
        if a != b {
            bail!("config mismatch: starting points differ");
        }
    }
    if pred.depth > sim.depth {
        bail!("config mismatch: predicted depth {} exceeds simulated depth {}", pred.depth, sim.depth);
    }
    Ok(())
}

/// Empirical counts of each predicted path, matched on the first passages.
fn sequence_rows(report: &Report, freqs: &[SequenceFreq], eps: f64, tol: f64) -> Vec<SequenceRow> {
    let n: u64 = freqs.iter().map(|f| f.count).sum();
    report
        .sequences
        .iter()
        .map(|s| {
            let k = s.steps.len();
            let count: u64 = freqs
                .iter()
                .filter(|f| f.sequence.split(';').take(k).collect::<Vec<_>>().join(";") == s.path)
                .map(|f| f.count)
                .sum();
            let pi_emp = if n > 0 { count as f64 / n as f64 } else { 0.0 };
            let sd = (s.pi * (1.0 - s.pi) / n as f64).sqrt();
            let (z, pass) = if n == 0 {
                (None, false)
            } else if sd > 0.0 {
                let z = (pi_emp - s.pi) / sd;
                (Some(z), z.abs() <= tol)
            } else {
                let (lo, hi) = wilson_interval(count, n, tol);
                (None, (lo..=hi).contains(&s.pi))
            };
            SequenceRow { epsilon: eps, path: s.path.clone(), pi_pred: s.pi, pi_emp, count, n, z, pass }
        })
        .collect()
}

fn predicted_dwell(report: &Report, j: usize) -> Option<f64> {
    let (mut w, mut m) = (0.0, 0.0);
    for s in report.sequences.iter().filter(|s| s.dwell.len() > j) {
        w += s.pi;
        m += s.pi * s.dwell[j];
    }
    (w > 0.0).then(|| m / w)
}

fn dwell_rows(report: &Report, dwell: &[Vec<DwellStat>], eps: &[f64], tol: f64) -> Vec<DwellRow> {
    let depth = report.sequences.iter().map(|s| s.dwell.len()).max().unwrap_or(0);
    (0..depth)
        .filter_map(|j| {
            let predicted = predicted_dwell(report, j)?;
            let rescaled: Vec<f64> = dwell
                .iter()
                .map(|rows| rows.iter().find(|r| r.saddle_ordinal == j + 1).map_or(f64::NAN, |r| r.mean_rescaled))
                .collect();
            let pts: Vec<(f64, f64)> = eps
                .iter()
                .zip(&rescaled)
                .filter(|(_, m)| m.is_finite())
                .map(|(e, m)| {
                    let l = (1.0 / e).ln();
                    (l, m * l)
                })
                .collect();
            let fitted = (pts.len() >= 2).then(|| {
                let n = pts.len() as f64;
                let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
                let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
                let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
                sxy / sxx
            });
            let estimate = fitted.or_else(|| rescaled.last().copied().filter(|m| m.is_finite()));
            let relative_error = estimate.filter(|_| predicted > 0.0).map(|e| (e - predicted).abs() / predicted);
            let pass = fitted.and(relative_error).map(|r| r <= tol);
            Some(DwellRow { saddle_ordinal: j + 1, predicted, rescaled, fitted, relative_error, pass })
        })
        .collect()
}

#[derive(Deserialize)]
struct PathIndex {
    trial: usize,
    sequence: String,
}

fn rho_row(report: &Report, sim: &Manifest, dir: &Path, eps: f64) -> anyhow::Result<Option<RhoRow>> {
    let paths = dir.join("paths");
    if !paths.join("index.csv").exists() {
        return Ok(None);
    }
    let spec = load_system(&sim.system, sim.params.as_deref()).map_err(|f| f.error)?;
    let x0 = sim.x0.clone().map(Vector::from_vec);
    let mut jumps = Vec::new();
    for s in report.sequences.iter().filter(|s| s.pi > 0.0 && s.degenerate.is_none()) {
        let (jump, _) = curve_of_sequence(s, &spec, x0.as_ref())?;
        jumps.push((s, jump.flatten()));
    }
    let mut dists = Vec::new();
    for row in read_rows::<PathIndex>(&paths.join("index.csv"))? {
        let Some((_, target)) = jumps.iter().find(|(s, _)| {
            row.sequence.split(';').take(s.steps.len()).collect::<Vec<_>>().join(";") == s.path
        }) else {
            continue;
        };
        let curve = read_curve_csv(&paths.join(format!("trial_{}.csv", row.trial)))?;
        dists.push(rho(&curve, target));
    }
    let med = (!dists.is_empty()).then(|| median(&dists));
    Ok(Some(RhoRow { epsilon: eps, matched: dists.len(), median: med }))
}

pub fn compare(args: &CompareArgs) -> Result<Comparison, Failure> {
    let report = Report::read(&args.predict).map_err(Failure::usage)?;
    let sim = Manifest::read(&args.ensemble).map_err(Failure::usage)?;
    check_manifests(&report.manifest, &sim).map_err(Failure::usage)?;
    let echo = sim.sim.as_ref().expect("checked above");
    let mut sequences = Vec::new();
    let mut support = Vec::new();
    let mut dwell = Vec::new();
    let mut rho_rows = Vec::new();
    let mut censored_fraction = Vec::new();
    for (i, &eps) in echo.epsilons.iter().enumerate() {
        let dir = eps_dir(&args.ensemble, eps);
        let freqs: Vec<SequenceFreq> = read_rows(&dir.join("sequences.csv")).map_err(Failure::validation)?;
        let rows = sequence_rows(&report, &freqs, eps, args.tolerance);
        let mass: f64 = rows.iter().filter(|r| r.pi_pred > 0.0).map(|r| r.pi_emp).sum();
        support.push(SupportRow { epsilon: eps, mass, pass: mass >= args.min_support });
        sequences.extend(rows);
        dwell.push(read_rows(&dir.join("dwell.csv")).map_err(Failure::validation)?);
        if let Some(r) = rho_row(&report, &sim, &dir, eps).map_err(Failure::validation)? {
            rho_rows.push(r);
        }
        censored_fraction.push(echo.censored.get(i).map_or(0.0, |c| *c as f64 / echo.trials as f64));
    }
    let dwell = dwell_rows(&report, &dwell, &echo.epsilons, args.dwell_tolerance);
    let medians: Vec<f64> = rho_rows.iter().filter_map(|r| r.median).collect();
    let rho_decreasing =
        (medians.len() >= 2 && medians.len() == rho_rows.len()).then(|| medians.windows(2).all(|w| w[1] < w[0]));
    let smallest = echo.epsilons.last().copied().unwrap_or(f64::NAN);
    let pass = sequences.iter().filter(|r| r.epsilon == smallest).all(|r| r.pass)
        && support.last().map_or(false, |s| s.pass)
        && dwell.iter().all(|d| d.pass != Some(false));
    Ok(Comparison {
        system: sim.system.clone(),
        epsilons: echo.epsilons.clone(),
        censored_fraction,
        sequences,
        support,
        dwell,
        rho: rho_rows,
        rho_decreasing,
        pass,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

pub fn run(args: &CompareArgs) -> Result<u8, Failure> {
    let c = compare(args)?;
    let out = args.out.clone().unwrap_or_else(|| args.ensemble.clone());
    let write = || -> anyhow::Result<()> {
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("comparison.json"), serde_json::to_string_pretty(&c)? + "\n")?;
        Ok(())
    };
    write().map_err(Failure::usage)?;
    for r in &c.sequences {
        println!(
            "epsilon={:e}  {}  pred={:.4} emp={:.4} z={} {}",
            r.epsilon,
            r.path,
            r.pi_pred,
            r.pi_emp,
            fmt_opt(r.z),
            if r.pass { "ok" } else { "FAIL" }
        );
    }
    for s in &c.support {
        println!("epsilon={:e}  support mass={:.4} {}", s.epsilon, s.mass, if s.pass { "ok" } else { "FAIL" });
    }
    for d in &c.dwell {
        let verdict = match d.pass {
            Some(true) => "ok",
            Some(false) => "FAIL",
            None => "info",
        };
        println!(
            "dwell #{}  predicted={:.4} fitted={} relative_error={} {verdict}",
            d.saddle_ordinal,
            d.predicted,
            fmt_opt(d.fitted),
            fmt_opt(d.relative_error)
        );
    }
    for r in &c.rho {
        println!("epsilon={:e}  rho median={} over {} paths", r.epsilon, fmt_opt(r.median), r.matched);
    }
    if let Some(dec) = c.rho_decreasing {
        println!("rho decreasing: {dec}");
    }
    println!("overall: {}", if c.pass { "pass" } else { "fail" });
    Ok(if c.pass { code::PASS } else { code::COMPARISON_FAIL })
}
