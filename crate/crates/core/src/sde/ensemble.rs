use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sequence_label, PassageRecord, PreparedNetwork, SimConfig, Terminal};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::NetworkSpec;
use crate::stats::{mean_var, wilson_interval, Z95};

/// What an ensemble keeps of each trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u64,
    pub passages: Vec<PassageRecord>,
    pub open_passage: Option<(usize, f64)>,
    pub terminal: Terminal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceFreq {
    pub sequence: String,
    pub count: u64,
    pub freq: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellStat {
    /// 1-based position of the passage along the path.
    pub saddle_ordinal: usize,
    /// Mean of `(t_out − t_in)/ln(1/ε)`.
    pub mean_rescaled: f64,
    pub var: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitFreq {
    pub exit_id: usize,
    pub freq: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub epsilon: f64,
    pub dt: f64,
    pub seed: u64,
    pub trials: usize,
    pub depth: usize,
    pub censored: usize,
    pub censored_max_time: usize,
    pub censored_escaped: usize,
    pub sequences: Vec<SequenceFreq>,
    pub dwell: Vec<DwellStat>,
    pub exits: Vec<ExitFreq>,
    #[serde(skip)]
    pub summaries: Vec<TrialSummary>,
    #[serde(skip)]
    labels: Vec<Vec<String>>,
}

impl EnsembleStats {
    pub fn uncensored(&self) -> impl Iterator<Item = &TrialSummary> {
        self.summaries.iter().filter(|s| !s.terminal.is_censored())
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.trials as f64
    }

    /// Frequencies of the first `k` passages over uncensored trials, sorted by label.
    pub fn sequence_frequencies(&self, k: usize) -> Vec<SequenceFreq> {
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut total = 0;
        for (s, labels) in self.summaries.iter().zip(&self.labels) {
            if s.terminal.is_censored() {
                continue;
            }
            total += 1;
            let label = labels[..k.min(labels.len())].join(";");
            *counts.entry(label).or_default() += 1;
        }
        counts
            .into_iter()
            .map(|(sequence, count)| {
                let (ci_lo, ci_hi) = wilson_interval(count, total, Z95);
                SequenceFreq { sequence, count, freq: count as f64 / total as f64, ci_lo, ci_hi }
            })
            .collect()
    }

    pub fn write_csvs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("sequences.csv"), &self.sequences)?;
        write_rows(&dir.join("dwell.csv"), &self.dwell)?;
        write_rows(&dir.join("exits.csv"), &self.exits)?;
        Ok(())
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let header: &[&str] = match name {
            "sequences.csv" => &["sequence", "count", "freq", "ci_lo", "ci_hi"],
            "dwell.csv" => &["saddle_ordinal", "mean_rescaled", "var"],
            _ => &["exit_id", "freq"],
        };
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `cfg.trials` independent walks of `depth` passages from `x0`. Trial
/// `i` uses substream `i` of `cfg.seed`, so results do not depend on the
/// number of workers.
pub fn monte_carlo(spec: &NetworkSpec, x0: &Vector, cfg: &SimConfig, depth: usize) -> Result<EnsembleStats> {
    if depth == 0 {
        return Err(Error::Config("depth must be at least 1".into()));
    }
    let prep = PreparedNetwork::new(spec, Some(x0), &SimConfig { record: false, ..*cfg })?;
    let run = || -> Result<Vec<TrialSummary>> {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|i| {
                let t = prep.walk(i, depth)?;
                Ok(TrialSummary { trial: i, passages: t.passages, open_passage: t.open_passage, terminal: t.terminal })
            })
            .collect()
    };
    let summaries = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run)?,
        None => run()?,
    };
    Ok(summarize(spec, cfg, depth, summaries))
}

fn summarize(spec: &NetworkSpec, cfg: &SimConfig, depth: usize, summaries: Vec<TrialSummary>) -> EnsembleStats {
    let labels: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| (1..=s.passages.len()).map(|k| sequence_label(spec, &s.passages[k - 1..k], 1)).collect())
        .collect();
    let censored_max_time = summaries.iter().filter(|s| s.terminal == Terminal::MaxTime).count();
    let censored_escaped = summaries.iter().filter(|s| s.terminal == Terminal::EscapedNetwork).count();
    let unit = cfg.time_scale().unwrap_or(1.0);
    let mut per_ordinal: Vec<Vec<f64>> = vec![Vec::new(); depth];
    let mut exit_counts = vec![0u64; spec.exits.len()];
    let mut kept = 0u64;
    for s in summaries.iter().filter(|s| !s.terminal.is_censored()) {
        kept += 1;
        for (j, p) in s.passages.iter().enumerate().take(depth) {
            per_ordinal[j].push((p.t_out - p.t_in) / unit);
        }
        if let Terminal::ExitedDomain { exit, .. } = s.terminal {
            exit_counts[exit] += 1;
        }
    }
    let dwell = per_ordinal
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(j, v)| {
            let (mean_rescaled, var) = mean_var(v);
            DwellStat { saddle_ordinal: j + 1, mean_rescaled, var }
        })
        .collect();
    let exits = exit_counts
        .iter()
        .enumerate()
        .map(|(exit_id, c)| ExitFreq { exit_id, freq: if kept > 0 { *c as f64 / kept as f64 } else { 0.0 } })
        .collect();
    let mut stats = EnsembleStats {
        epsilon: cfg.epsilon,
        dt: cfg.dt,
        seed: cfg.seed,
        trials: summaries.len(),
        depth,
        censored: censored_max_time + censored_escaped,
        censored_max_time,
        censored_escaped,
        sequences: Vec::new(),
        dwell,
        exits,
        summaries,
        labels,
    };
    stats.sequences = stats.sequence_frequencies(depth);
    stats
}
