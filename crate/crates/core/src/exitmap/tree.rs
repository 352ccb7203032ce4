//! The tree of admissible saddle sequences and the quantities attached to it.

use serde::{Deserialize, Serialize};

use super::dist::{Distribution, Gaussian, SymmetryTag};
use super::saddle::{beta_exponent, exit_distribution, kappa_dist, split_probabilities, ExitCase, Split};
use crate::error::{Error, Result};
use crate::field::DiffusionSpec;
use crate::flow::{initial_entrance, pushforward_connection, EntranceData, FlowConfig};
use crate::linalg::{Matrix, Vector};
use crate::model::{Mode, NetworkSpec, Sign, Target};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictConfig {
    /// Draws used when a branch probability has to be estimated by sampling.
    pub n_kappa: usize,
    pub seed: u64,
    /// Skip children of zero-probability branches.
    pub prune_zero: bool,
    /// Depth cap when following sequences to exit leaves.
    pub max_exit_depth: usize,
    pub flow: FlowConfig,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self { n_kappa: 100_000, seed: 0, prune_zero: false, max_exit_depth: 32, flow: FlowConfig::default() }
    }
}

/// Exit tuple for one branch of a saddle.
#[derive(Clone, Debug)]
pub struct ExitData {
    /// Rescaled dwell time `α/λ_1`.
    pub t: f64,
    pub p: f64,
    /// Entry point downstream (or the exit leaf).
    pub x: Vector,
    pub beta: f64,
    /// Limiting fluctuation law at `x`.
    pub law: Distribution,
    pub target: Target,
}

/// Both branches of one saddle passage.
#[derive(Clone, Debug)]
pub struct PsiOutput {
    pub minus: ExitData,
    pub plus: ExitData,
    pub case: ExitCase,
    pub split: Split,
}

impl PsiOutput {
    pub fn branch(&self, sign: Sign) -> &ExitData {
        match sign {
            Sign::Minus => &self.minus,
            Sign::Plus => &self.plus,
        }
    }
}

fn noise(spec: &NetworkSpec) -> DiffusionSpec {
    spec.diffusion.clone().unwrap_or_else(|| DiffusionSpec::identity(spec.dim()))
}

/// Entrance-exit map of one saddle.
pub fn psi(spec: &NetworkSpec, saddle: usize, entrance: &EntranceData, cfg: &PredictConfig, seed: u64) -> Result<PsiOutput> {
    let s = spec.saddle(saddle);
    let sigma = noise(spec);
    let kappa = kappa_dist(s, &sigma, entrance)?;
    let split = split_probabilities(&kappa, cfg.n_kappa, seed)?;
    let (beta, case) = beta_exponent(s, entrance.alpha);
    let t = entrance.alpha / s.eigenvalues[0];
    let mut out = Vec::with_capacity(2);
    for sign in Sign::BOTH {
        let conn = spec
            .connection(saddle, sign)
            .ok_or_else(|| Error::InvalidParams(format!("saddle {saddle} has no {sign} connection")))?;
        let (law_q, _) = exit_distribution(s, &sigma, entrance, &kappa, sign)?;
        let (x, law) = match (conn.to, spec.mode) {
            (Target::Exit(e), _) => (spec.exit(e).point.clone(), law_q),
            (Target::Saddle(_), Mode::Concrete) => {
                let next = pushforward_connection(spec, conn, beta, law_q)?;
                (next.point, next.mu)
            }
            (Target::Saddle(to), Mode::Abstract) => {
                let tgt = spec.saddle(to);
                let d = tgt.dim();
                let transfer = conn.transfer.clone().unwrap_or_else(|| Matrix::identity(d, d));
                let src_inv = s.eigenvectors.clone().try_inverse().expect("validated eigenvectors");
                let map = &tgt.eigenvectors * transfer * src_inv;
                let mut law = law_q.pushforward(map);
                if beta == 1.0 {
                    let cov = conn.transport_cov.clone().unwrap_or_else(|| Matrix::identity(d, d));
                    let cov = &tgt.eigenvectors * cov * tgt.eigenvectors.transpose();
                    law = Distribution::Sum(vec![law, Distribution::Gaussian(Gaussian::centered(cov))]);
                }
                let coord = conn.entrance_nu_coord.unwrap_or(0.0);
                let x = &tgt.position + tgt.eigenvectors.column(tgt.nu - 1) * coord;
                (x, law)
            }
        };
        out.push(ExitData { t, p: split.p(sign), x, beta, law, target: conn.to });
    }
    let plus = out.pop().unwrap();
    let minus = out.pop().unwrap();
    Ok(PsiOutput { minus, plus, case, split })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub saddle: usize,
    pub name: String,
    pub sign: Sign,
}

/// A root orbit followed by saddle/branch choices, with the limiting data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleSequence {
    pub root_orbit: String,
    pub path: String,
    pub steps: Vec<Step>,
    pub pi: f64,
    pub pi_stderr: f64,
    /// `Δt_j = α_{j−1}/λ_1` at each visited saddle.
    pub dwell: Vec<f64>,
    /// Entrance exponents `α_{j−1}` at each visited saddle.
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub tags: Vec<SymmetryTag>,
    pub cases: Vec<ExitCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_exit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degenerate: Option<String>,
}

impl AdmissibleSequence {
    pub fn signs(&self) -> Vec<Sign> {
        self.steps.iter().map(|s| s.sign).collect()
    }
}

pub fn path_string(steps: &[Step]) -> String {
    steps.iter().map(|s| format!("{}:{}", s.name, s.sign)).collect::<Vec<_>>().join(";")
}

#[derive(Clone, Debug, PartialEq)]
pub enum EnumerationMode {
    /// All sequences of length `k`, or shorter ones ending at an exit leaf.
    Depth(usize),
    /// Exactly the listed branch-sign paths.
    Set(Vec<Vec<Sign>>),
    /// Follow every branch until an exit leaf or the configured depth cap.
    UntilExit,
}

/// Entrance of the root orbit: saddle, entrance data and a label.
pub fn root_entrance(spec: &NetworkSpec, x0: Option<&Vector>, flow: &FlowConfig) -> Result<(usize, EntranceData, String)> {
    match spec.mode {
        Mode::Concrete => {
            let x0 = x0.ok_or_else(|| Error::Config("a concrete network needs a starting point".into()))?;
            let e = initial_entrance(spec, x0, flow)?;
            Ok((e.saddle, e.entrance, format!("x0->{}", spec.saddle(e.saddle).label())))
        }
        Mode::Abstract => {
            let root = spec.root.as_ref().ok_or_else(|| Error::Config("abstract network without a root".into()))?;
            let s = spec.saddle(root.saddle);
            let d = s.dim();
            let cov = root.cov.clone().unwrap_or_else(|| Matrix::identity(d, d));
            let cov = &s.eigenvectors * cov * s.eigenvectors.transpose();
            let point = &s.position + s.eigenvectors.column(s.nu - 1) * root.entrance_nu_coord;
            let entrance = EntranceData { point, alpha: 1.0, mu: Distribution::Gaussian(Gaussian::centered(cov)) };
            Ok((root.saddle, entrance, format!("root->{}", s.label())))
        }
    }
}

/// Seed for the branch identified by `path`.
pub fn branch_seed(seed: u64, path: &[Sign]) -> u64 {
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    let mix = |mut z: u64| {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    h = mix(h.wrapping_add(path.len() as u64));
    for s in path {
        h = mix(h.wrapping_add(if *s == Sign::Plus { 2 } else { 1 }));
    }
    h
}

#[derive(Clone, Debug, Default)]
struct Prefix {
    steps: Vec<Step>,
    pi: f64,
    rel_var: f64,
    dwell: Vec<f64>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    probabilities: Vec<f64>,
    tags: Vec<SymmetryTag>,
    cases: Vec<ExitCase>,
}

struct Walker<'a> {
    spec: &'a NetworkSpec,
    cfg: &'a PredictConfig,
    root: String,
    mode: &'a EnumerationMode,
    out: Vec<AdmissibleSequence>,
}

impl Walker<'_> {
    fn emit(&mut self, p: &Prefix, exit: Option<usize>, degenerate: Option<String>) {
        self.out.push(AdmissibleSequence {
            root_orbit: self.root.clone(),
            path: path_string(&p.steps),
            steps: p.steps.clone(),
            pi: p.pi,
            pi_stderr: p.pi * p.rel_var.sqrt(),
            dwell: p.dwell.clone(),
            alphas: p.alphas.clone(),
            betas: p.betas.clone(),
            probabilities: p.probabilities.clone(),
            tags: p.tags.clone(),
            cases: p.cases.clone(),
            terminal_exit: exit,
            terminal_point: exit.map(|e| self.spec.exit(e).point.as_slice().to_vec()),
            degenerate,
        });
    }

    fn signs(p: &Prefix) -> Vec<Sign> {
        p.steps.iter().map(|s| s.sign).collect()
    }

    fn is_wanted(&self, signs: &[Sign]) -> (bool, bool) {
        match self.mode {
            EnumerationMode::Depth(k) => (signs.len() == *k, signs.len() < *k),
            EnumerationMode::UntilExit => (signs.len() == self.cfg.max_exit_depth, signs.len() < self.cfg.max_exit_depth),
            EnumerationMode::Set(list) => (
                list.iter().any(|l| l.as_slice() == signs),
                list.iter().any(|l| l.len() > signs.len() && l.starts_with(signs)),
            ),
        }
    }

    fn visit(&mut self, saddle: usize, entrance: &EntranceData, prefix: Prefix) {
        let signs = Self::signs(&prefix);
        let out = match psi(self.spec, saddle, entrance, self.cfg, branch_seed(self.cfg.seed, &signs)) {
            Ok(o) => o,
            Err(e) => {
                self.emit(&prefix, None, Some(e.to_string()));
                return;
            }
        };
        let s = self.spec.saddle(saddle);
        for sign in Sign::BOTH {
            let branch = out.branch(sign);
            if self.cfg.prune_zero && branch.p == 0.0 {
                continue;
            }
            let mut child_signs = signs.clone();
            child_signs.push(sign);
            let (emit_here, go_deeper) = self.is_wanted(&child_signs);
            let terminal = matches!(branch.target, Target::Exit(_));
            if !emit_here && !(go_deeper || terminal && matches!(self.mode, EnumerationMode::Depth(_) | EnumerationMode::UntilExit)) {
                continue;
            }
            let mut p = prefix.clone();
            p.steps.push(Step { saddle, name: s.label(), sign });
            p.pi *= branch.p;
            if !out.split.exact && branch.p > 0.0 {
                p.rel_var += (out.split.stderr / branch.p).powi(2);
            }
            p.dwell.push(branch.t);
            p.alphas.push(entrance.alpha);
            p.betas.push(branch.beta);
            p.probabilities.push(branch.p);
            p.tags.push(branch.law.tag());
            p.cases.push(out.case);
            match branch.target {
                Target::Exit(e) => self.emit(&p, Some(e), None),
                Target::Saddle(_) if emit_here && !go_deeper => self.emit(&p, None, None),
                Target::Saddle(next) => {
                    if emit_here {
                        self.emit(&p, None, None);
                    }
                    let entrance = EntranceData { point: branch.x.clone(), alpha: branch.beta, mu: branch.law.clone() };
                    self.visit(next, &entrance, p);
                }
            }
        }
    }
}

/// Walks the binary tree of branch choices from the root orbit.
pub fn enumerate_sequences(spec: &NetworkSpec, x0: Option<&Vector>, mode: &EnumerationMode, cfg: &PredictConfig) -> Result<Vec<AdmissibleSequence>> {
    let (saddle, entrance, root) = root_entrance(spec, x0, &cfg.flow)?;
    let mut walker = Walker { spec, cfg, root, mode, out: Vec::new() };
    walker.visit(saddle, &entrance, Prefix { pi: 1.0, ..Prefix::default() });
    Ok(walker.out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetClassification {
    pub free: bool,
    pub complete: bool,
    pub conservative: bool,
    pub total_pi: f64,
    pub pi_stderr: f64,
}

fn is_prefix(a: &[Sign], b: &[Sign]) -> bool {
    a.len() <= b.len() && b.starts_with(a)
}

/// Free: no member is a prefix of another. Complete: every branch path from
/// the root meets a member. Conservative: free with total probability one.
pub fn classify_set(sequences: &[AdmissibleSequence]) -> SetClassification {
    let keys: Vec<Vec<Sign>> = sequences.iter().map(AdmissibleSequence::signs).collect();
    let free = keys
        .iter()
        .enumerate()
        .all(|(i, a)| keys.iter().enumerate().all(|(j, b)| i == j || !is_prefix(a, b)));
    fn covered(node: &mut Vec<Sign>, keys: &[Vec<Sign>]) -> bool {
        if keys.iter().any(|k| k == node) {
            return true;
        }
        if !keys.iter().any(|k| k.len() > node.len() && k.starts_with(node)) {
            return false;
        }
        Sign::BOTH.iter().all(|s| {
            node.push(*s);
            let ok = covered(node, keys);
            node.pop();
            ok
        })
    }
    let complete = free && !keys.is_empty() && covered(&mut Vec::new(), &keys);
    let total_pi: f64 = sequences.iter().map(|s| s.pi).sum();
    let pi_stderr = sequences.iter().map(|s| s.pi_stderr.powi(2)).sum::<f64>().sqrt();
    let tol = 3.0 * pi_stderr + 1e-12;
    SetClassification { free, complete, conservative: free && (total_pi - 1.0).abs() <= tol, total_pi, pi_stderr }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitAtom {
    pub exit: usize,
    pub name: String,
    pub point: Vec<f64>,
    pub weight: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitMeasure {
    pub atoms: Vec<ExitAtom>,
    pub total_pi: f64,
    pub conservative: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Limiting distribution of the exit point: `Σ π(z) δ_{q(z)}` over sequences
/// ending at exit leaves, merged by leaf.
pub fn exit_measure(spec: &NetworkSpec, x0: Option<&Vector>, cfg: &PredictConfig) -> Result<ExitMeasure> {
    let cfg = PredictConfig { prune_zero: true, ..*cfg };
    let seqs = enumerate_sequences(spec, x0, &EnumerationMode::UntilExit, &cfg)?;
    let mut atoms: Vec<ExitAtom> = spec
        .exits
        .iter()
        .map(|e| ExitAtom { exit: e.id, name: e.label(), point: e.point.as_slice().to_vec(), weight: 0.0, stderr: 0.0 })
        .collect();
    for s in &seqs {
        if let Some(e) = s.terminal_exit {
            atoms[e].weight += s.pi;
            atoms[e].stderr = (atoms[e].stderr.powi(2) + s.pi_stderr.powi(2)).sqrt();
        }
    }
    let total_pi: f64 = atoms.iter().map(|a| a.weight).sum();
    let stderr = atoms.iter().map(|a| a.stderr.powi(2)).sum::<f64>().sqrt();
    let conservative = (total_pi - 1.0).abs() <= 3.0 * stderr + 1e-12;
    let warning = (!conservative).then(|| {
        format!("sequences ending at exit leaves carry total probability {total_pi}; the exit measure is partial")
    });
    Ok(ExitMeasure { atoms, total_pi, conservative, warning })
}
