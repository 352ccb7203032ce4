//! Space-time curves, jump curves and the distance between them.

mod convert;
mod io;
mod metric;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use convert::{curve_of_sequence, curve_of_trajectory};
pub use io::{read_curve_csv, read_jump_json, write_curve_csv, write_jump_json};
pub use metric::{proximity_check, rho, rho_refined, REFINE_TOL};

/// Polyline in `[0, ∞) × R^d` with nondecreasing time. Vertices are stored as
/// rows `(t, x_1, …, x_d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeCurve {
    dim: usize,
    data: Vec<f64>,
}

impl SpaceTimeCurve {
    /// Builds a curve from `(t, x)` rows, checking the time order.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        let stride = dim + 1;
        if data.len() % stride != 0 || data.len() < stride {
            return Err(Error::InvalidParams(format!("a curve needs at least one vertex of length {stride}")));
        }
        let c = Self { dim, data };
        if c.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("curve vertices must be finite".into()));
        }
        for i in 1..c.len() {
            if c.time(i) < c.time(i - 1) {
                return Err(Error::InvalidParams(format!("time decreases at vertex {i}")));
            }
        }
        if c.time(0) < 0.0 {
            return Err(Error::InvalidParams("time must be nonnegative".into()));
        }
        Ok(c)
    }

    pub fn from_vertices(vertices: &[Vec<f64>]) -> Result<Self> {
        let dim = vertices.first().map_or(0, |v| v.len().saturating_sub(1));
        if vertices.iter().any(|v| v.len() != dim + 1) {
            return Err(Error::InvalidParams("vertices differ in length".into()));
        }
        Self::new(dim, vertices.concat())
    }

    /// Graph `{(t_i, f(t_i))}` of a sampled function.
    pub fn graph(times: &[f64], values: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = times
            .iter()
            .zip(values)
            .map(|(t, x)| std::iter::once(*t).chain(x.iter().copied()).collect())
            .collect();
        Self::from_vertices(&rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.dim + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        let s = self.dim + 1;
        &self.data[i * s..(i + 1) * s]
    }

    pub fn time(&self, i: usize) -> f64 {
        self.data[i * (self.dim + 1)]
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.vertex(i)[1..]
    }

    pub fn vertices(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim + 1)
    }

    pub fn duration(&self) -> f64 {
        self.time(self.len() - 1) - self.time(0)
    }
}

/// Removes consecutive repeated vertices.
pub fn normalize(c: &SpaceTimeCurve) -> SpaceTimeCurve {
    let mut data = Vec::with_capacity(c.data.len());
    let mut last: Option<&[f64]> = None;
    for v in c.vertices() {
        if last != Some(v) {
            data.extend_from_slice(v);
            last = Some(v);
        }
    }
    SpaceTimeCurve { dim: c.dim, data }
}

/// Inserts equally spaced points so that no segment is longer than `max_len`.
pub fn densify(c: &SpaceTimeCurve, max_len: f64) -> SpaceTimeCurve {
    let s = c.dim + 1;
    let mut data = Vec::with_capacity(c.data.len());
    data.extend_from_slice(c.vertex(0));
    for i in 1..c.len() {
        let (a, b) = (c.vertex(i - 1), c.vertex(i));
        let len = dist(a, b);
        let pieces = if max_len > 0.0 && len > max_len { (len / max_len).ceil() as usize } else { 1 };
        for k in 1..pieces {
            let f = k as f64 / pieces as f64;
            data.extend((0..s).map(|j| a[j] + f * (b[j] - a[j])));
        }
        data.extend_from_slice(b);
    }
    SpaceTimeCurve { dim: c.dim, data }
}

/// Inserts the midpoint of every segment.
pub fn bisect(c: &SpaceTimeCurve) -> SpaceTimeCurve {
    let s = c.dim + 1;
    let mut data = Vec::with_capacity(2 * c.data.len());
    data.extend_from_slice(c.vertex(0));
    for i in 1..c.len() {
        let (a, b) = (c.vertex(i - 1), c.vertex(i));
        data.extend((0..s).map(|j| 0.5 * (a[j] + b[j])));
        data.extend_from_slice(b);
    }
    SpaceTimeCurve { dim: c.dim, data }
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Piecewise-constant curve: jump `γ_0`, rest at `y_1` for `Δt_1`, jump `γ_1`
/// at the frozen time, and so on up to the final jump `γ_k`. Jumps hold
/// spatial points only; their time is fixed by the preceding rests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpCurve {
    pub dim: usize,
    #[serde(default)]
    pub start_time: f64,
    pub rests: Vec<Vec<f64>>,
    pub dwell: Vec<f64>,
    pub jumps: Vec<Vec<Vec<f64>>>,
}

impl JumpCurve {
    /// Checks lengths, nonnegative dwell times and endpoint matching.
    pub fn new(start_time: f64, rests: Vec<Vec<f64>>, dwell: Vec<f64>, jumps: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let dim = rests
            .first()
            .map(Vec::len)
            .or_else(|| jumps.first().and_then(|j| j.first()).map(Vec::len))
            .unwrap_or(0);
        let c = Self { dim, start_time, rests, dwell, jumps };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        let k = self.rests.len();
        if self.dwell.len() != k || self.jumps.len() != k + 1 {
            return bad(format!("{k} rests need {k} dwell times and {} jumps", k + 1));
        }
        if self.dwell.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("dwell times must be nonnegative".into());
        }
        if self.jumps.iter().any(Vec::is_empty) {
            return bad("every jump needs at least one point".into());
        }
        let all_points = self.rests.iter().chain(self.jumps.iter().flatten());
        if all_points.clone().any(|p| p.len() != self.dim) || all_points.flatten().any(|v| !v.is_finite()) {
            return bad(format!("points must be finite with dimension {}", self.dim));
        }
        for j in 0..k {
            let into = self.jumps[j].last().unwrap();
            let out = self.jumps[j + 1].first().unwrap();
            if dist(into, &self.rests[j]) > 1e-9 || dist(out, &self.rests[j]) > 1e-9 {
                return bad(format!("jumps do not meet rest point {}", j + 1));
            }
        }
        Ok(())
    }

    /// Start and end times of rest `j` (0-based).
    pub fn rest_window(&self, j: usize) -> (f64, f64) {
        let start = self.start_time + self.dwell[..j].iter().sum::<f64>();
        (start, start + self.dwell[j])
    }

    /// Time at which jump `j` happens.
    pub fn jump_time(&self, j: usize) -> f64 {
        self.start_time + self.dwell[..j].iter().sum::<f64>()
    }

    pub fn flatten(&self) -> SpaceTimeCurve {
        let mut data = Vec::new();
        let mut push = |t: f64, x: &[f64]| {
            data.push(t);
            data.extend_from_slice(x);
        };
        for (j, jump) in self.jumps.iter().enumerate() {
            let t = self.jump_time(j);
            for p in jump {
                push(t, p);
            }
            if j < self.rests.len() {
                let (_, end) = self.rest_window(j);
                push(end, &self.rests[j]);
            }
        }
        SpaceTimeCurve { dim: self.dim, data }
    }
}
