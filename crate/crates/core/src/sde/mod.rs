//! Euler–Maruyama simulation of `dX = b(X) dt + ε σ(X) dW` with saddle-passage
//! detection and seeded Monte Carlo ensembles.

mod engine;
mod ensemble;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NetworkSpec, Sign};

pub use engine::{em_path, run_network_walk, run_saddle_passage, PreparedNetwork};
pub use ensemble::{monte_carlo, DwellStat, EnsembleStats, ExitFreq, SequenceFreq, TrialSummary};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Noise amplitude; zero gives the deterministic Euler flow.
    pub epsilon: f64,
    pub dt: f64,
    pub seed: u64,
    pub trials: usize,
    pub max_time: f64,
    /// Keep every `record_stride`-th state when recording.
    pub record_stride: usize,
    pub record: bool,
    /// Distance from the connection polylines beyond which a trajectory is
    /// declared escaped. Defaults to half the smallest box radius.
    pub tube_radius: Option<f64>,
    /// Worker threads for ensembles; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            dt: 1e-3,
            seed: 0,
            trials: 1000,
            max_time: 1e4,
            record_stride: 10,
            record: false,
            tube_radius: None,
            workers: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, spec: &NetworkSpec) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon must be a nonnegative number, got {}", self.epsilon));
        }
        if self.epsilon >= spec.min_radius() {
            return bad(format!("epsilon {} is not below the smallest box radius {}", self.epsilon, spec.min_radius()));
        }
        let guard = 0.1 / spec.max_rate();
        if !(self.dt > 0.0 && self.dt <= guard) {
            return bad(format!("dt must lie in (0, {guard}], got {}", self.dt));
        }
        if self.trials == 0 || self.record_stride == 0 {
            return bad("trials and record_stride must be positive".into());
        }
        if !(self.max_time > 0.0) {
            return bad("max_time must be positive".into());
        }
        if let Some(r) = self.tube_radius {
            if !(r > 0.0) {
                return bad("tube_radius must be positive".into());
            }
        }
        Ok(())
    }

    /// `ln(1/ε)`, the time unit of the rescaled process.
    pub fn time_scale(&self) -> Result<f64> {
        if self.epsilon > 0.0 && self.epsilon < 1.0 {
            Ok((1.0 / self.epsilon).ln())
        } else {
            Err(Error::InvalidRescaling(self.epsilon))
        }
    }
}

/// Generator for trial `trial` of an ensemble seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// One crossing of a saddle box, entered at `t_in` and left through the face
/// `y¹ = ±R` at `t_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub saddle: usize,
    pub t_in: f64,
    pub t_out: f64,
    pub face_sign: Sign,
    pub exit_state: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Terminal {
    /// The requested number of passages was recorded.
    Completed,
    /// Left through a connection routed to an exit leaf.
    ExitedDomain { exit: usize, point: Vec<f64> },
    MaxTime,
    /// Left every box and connection tube, or produced a non-finite state.
    EscapedNetwork,
    /// The caller's stopping predicate fired.
    Stopped,
}

impl Terminal {
    pub fn is_censored(&self) -> bool {
        matches!(self, Terminal::MaxTime | Terminal::EscapedNetwork)
    }
}

/// A sample path with its passages. States are stored row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dim: usize,
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    pub passages: Vec<PassageRecord>,
    /// Saddle and entry time of a passage still in progress at termination.
    pub open_passage: Option<(usize, f64)>,
    pub terminal: Terminal,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }
}

/// Label of the first `k` passages, e.g. `z2+:+;z3+:-`.
pub fn sequence_label(spec: &NetworkSpec, passages: &[PassageRecord], k: usize) -> String {
    passages
        .iter()
        .take(k)
        .map(|p| format!("{}:{}", spec.saddle(p.saddle).label(), p.face_sign))
        .collect::<Vec<_>>()
        .join(";")
}
