use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{trial_rng, PassageRecord, SimConfig, Terminal, Trajectory};
use crate::error::{Error, Result};
use crate::field::{DiffusionSpec, FieldSpec, NoiseField, VectorField};
use crate::flow::{orbit_until, sample_orbit, FlowConfig};
use crate::linalg::{Matrix, Vector};
use crate::model::{Chart, NetworkSpec, Sign, Target, CHART_DOMAIN_SCALE};

/// Row-major copy of an affine chart for the inner loop.
#[derive(Clone, Debug)]
struct FastChart {
    d: usize,
    origin: Vec<f64>,
    inverse: Vec<f64>,
    radius: f64,
}

impl FastChart {
    fn new(c: &Chart) -> Self {
        let d = c.origin.len();
        let inverse = (0..d * d).map(|i| c.inverse[(i / d, i % d)]).collect();
        Self { d, origin: c.origin.as_slice().to_vec(), inverse, radius: c.radius }
    }

    #[inline]
    fn coord(&self, k: usize, x: &[f64]) -> f64 {
        let row = &self.inverse[k * self.d..(k + 1) * self.d];
        row.iter().zip(x).zip(&self.origin).map(|((a, x), o)| a * (x - o)).sum()
    }

    #[inline]
    fn max_abs(&self, x: &[f64]) -> f64 {
        (0..self.d).map(|k| self.coord(k, x).abs()).fold(0.0, f64::max)
    }

    #[inline]
    fn face(&self, x: &[f64]) -> f64 {
        self.max_abs(x) - self.radius
    }
}

/// Sampled deterministic orbit used for the escape test.
#[derive(Clone, Debug)]
struct Polyline {
    d: usize,
    pts: Vec<f64>,
}

impl Polyline {
    fn from_samples(samples: &[(f64, Vector)]) -> Self {
        let d = samples[0].1.len();
        Self { d, pts: samples.iter().flat_map(|(_, x)| x.iter().copied()).collect() }
    }

    fn n(&self) -> usize {
        self.pts.len() / self.d
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.pts[i * self.d..(i + 1) * self.d]
    }

    fn segment_dist2(&self, i: usize, x: &[f64]) -> f64 {
        let a = self.point(i);
        if self.n() == 1 {
            return a.iter().zip(x).map(|(a, x)| (x - a).powi(2)).sum();
        }
        let b = self.point(i + 1);
        let (mut ab2, mut ax_ab) = (0.0, 0.0);
        for k in 0..self.d {
            ab2 += (b[k] - a[k]).powi(2);
            ax_ab += (x[k] - a[k]) * (b[k] - a[k]);
        }
        let s = if ab2 > 0.0 { (ax_ab / ab2).clamp(0.0, 1.0) } else { 0.0 };
        (0..self.d).map(|k| (x[k] - a[k] - s * (b[k] - a[k])).powi(2)).sum()
    }

    /// Distance from `x`, searching near `cursor` first.
    fn distance(&self, x: &[f64], cursor: &mut usize, tube: f64) -> f64 {
        let segs = self.n().saturating_sub(1).max(1);
        let lo = cursor.saturating_sub(4);
        let hi = (*cursor + 64).min(segs);
        let mut best = (f64::INFINITY, *cursor);
        for i in lo..hi {
            let d2 = self.segment_dist2(i, x);
            if d2 < best.0 {
                best = (d2, i);
            }
        }
        if best.0 > tube * tube {
            for i in 0..segs {
                let d2 = self.segment_dist2(i, x);
                if d2 < best.0 {
                    best = (d2, i);
                }
            }
        }
        *cursor = best.1;
        best.0.sqrt()
    }
}

/// Euler–Maruyama stepper with preallocated buffers.
struct Stepper<'a, F: ?Sized, S: ?Sized> {
    field: &'a F,
    sigma: &'a S,
    eps: f64,
    dt: f64,
    sqrt_dt: f64,
    drift: Vec<f64>,
    xi: Vec<f64>,
    smat: Matrix,
}

impl<'a, F: VectorField + ?Sized, S: NoiseField + ?Sized> Stepper<'a, F, S> {
    fn new(field: &'a F, sigma: &'a S, eps: f64, dt: f64) -> Self {
        let (d, m) = (field.dim(), sigma.noise_dim());
        let mut smat = Matrix::zeros(d, m);
        if let Some(c) = sigma.constant() {
            smat.copy_from(c);
        }
        Self { field, sigma, eps, dt, sqrt_dt: dt.sqrt(), drift: vec![0.0; d], xi: vec![0.0; m], smat }
    }

    /// Advances `x` in place; returns false on a non-finite state.
    #[inline]
    fn step(&mut self, x: &mut [f64], rng: &mut ChaCha8Rng) -> bool {
        self.field.drift(x, &mut self.drift);
        let noisy = self.eps > 0.0;
        if noisy {
            if self.sigma.constant().is_none() {
                self.sigma.sigma(x, &mut self.smat);
            }
            for v in self.xi.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
        }
        let scale = self.eps * self.sqrt_dt;
        let mut finite = true;
        for i in 0..x.len() {
            let mut inc = self.drift[i] * self.dt;
            if noisy {
                let mut n = 0.0;
                for (j, xi) in self.xi.iter().enumerate() {
                    n += self.smat[(i, j)] * xi;
                }
                inc += scale * n;
            }
            x[i] += inc;
            finite &= x[i].is_finite();
        }
        finite
    }
}

struct Recorder {
    on: bool,
    stride: usize,
    count: usize,
    times: Vec<f64>,
    states: Vec<f64>,
}

impl Recorder {
    fn new(cfg: &SimConfig, t: f64, x: &[f64]) -> Self {
        let mut r = Self { on: cfg.record, stride: cfg.record_stride, count: 0, times: Vec::new(), states: Vec::new() };
        r.force(t, x);
        r
    }

    #[inline]
    fn push(&mut self, t: f64, x: &[f64]) {
        self.count += 1;
        if self.on && self.count % self.stride == 0 {
            self.force(t, x);
        }
    }

    fn force(&mut self, t: f64, x: &[f64]) {
        if self.on && self.times.last() != Some(&t) {
            self.times.push(t);
            self.states.extend_from_slice(x);
        }
    }

    fn finish(mut self, t: f64, x: &[f64], passages: Vec<PassageRecord>, open: Option<(usize, f64)>, terminal: Terminal) -> Trajectory {
        if x.iter().all(|v| v.is_finite()) {
            self.force(t, x);
        }
        Trajectory { dim: x.len(), times: self.times, states: self.states, passages, open_passage: open, terminal }
    }
}

/// Simulates from `x0` until `stop(t, x)` holds, `max_time` passes or the state
/// stops being finite. Every `record_stride`-th state is kept.
pub fn em_path<F, S, P>(field: &F, sigma: &S, x0: &Vector, cfg: &SimConfig, trial: u64, mut stop: P) -> Trajectory
where
    F: VectorField + ?Sized,
    S: NoiseField + ?Sized,
    P: FnMut(f64, &[f64]) -> bool,
{
    let cfg = SimConfig { record: true, ..*cfg };
    let mut rng = trial_rng(cfg.seed, trial);
    let mut stepper = Stepper::new(field, sigma, cfg.epsilon, cfg.dt);
    let mut x = x0.as_slice().to_vec();
    let mut rec = Recorder::new(&cfg, 0.0, &x);
    let mut n: u64 = 0;
    loop {
        let t = n as f64 * cfg.dt;
        if stop(t, &x) {
            return rec.finish(t, &x, Vec::new(), None, Terminal::Stopped);
        }
        if t >= cfg.max_time {
            return rec.finish(t, &x, Vec::new(), None, Terminal::MaxTime);
        }
        if !stepper.step(&mut x, &mut rng) {
            return rec.finish(t, &x, Vec::new(), None, Terminal::EscapedNetwork);
        }
        n += 1;
        rec.push(n as f64 * cfg.dt, &x);
    }
}

/// A concrete network with everything the walk needs precomputed.
#[derive(Clone, Debug)]
pub struct PreparedNetwork {
    pub spec: NetworkSpec,
    pub cfg: SimConfig,
    field: FieldSpec,
    sigma: DiffusionSpec,
    charts: Vec<FastChart>,
    /// Orbit polylines indexed by `2·saddle + (sign == +)`.
    tubes: Vec<Polyline>,
    root: Option<(Vector, Polyline)>,
    tube_radius: f64,
}

enum Passage {
    Exited(PassageRecord),
    Open,
    Escaped,
}

fn tube_index(saddle: usize, sign: Sign) -> usize {
    2 * saddle + usize::from(sign == Sign::Plus)
}

impl PreparedNetwork {
    /// Validates `cfg` against `spec` and samples the connection orbits. The
    /// root orbit is followed from `x0` when given.
    pub fn new(spec: &NetworkSpec, x0: Option<&Vector>, cfg: &SimConfig) -> Result<Self> {
        let (field, sigma) = spec.require_concrete()?;
        cfg.validate(spec)?;
        let flow = FlowConfig::default();
        let charts: Vec<Chart> = spec.charts()?;
        let mut tubes = Vec::with_capacity(2 * spec.saddles.len());
        for s in &spec.saddles {
            for sign in Sign::BOTH {
                let conn = spec
                    .connection(s.id, sign)
                    .ok_or_else(|| Error::InvalidParams(format!("saddle {} has no {sign} connection", s.id)))?;
                let q = s.exit_point(sign);
                let samples = match conn.to {
                    Target::Saddle(_) => {
                        let h = conn.travel_time.ok_or(Error::ModeMismatch { expected: "populated concrete" })?;
                        sample_orbit(field, &q, h, flow.step, 20)?
                    }
                    Target::Exit(_) => vec![(0.0, q)],
                };
                tubes.push(Polyline::from_samples(&samples));
            }
        }
        let root = match x0 {
            Some(x0) => {
                let event = |x: &[f64]| charts.iter().map(|c| c.face(x)).fold(f64::INFINITY, f64::min);
                let (samples, _) = orbit_until(field, x0, event, 0.0, &flow)?.ok_or(Error::NoEntrance { t_max: flow.t_max })?;
                let pts: Vec<(f64, Vector)> = samples
                    .times
                    .iter()
                    .zip(&samples.states)
                    .enumerate()
                    .filter(|(i, _)| i % 20 == 0 || *i + 1 == samples.times.len())
                    .map(|(_, (t, x))| (*t, x.clone()))
                    .collect();
                Some((x0.clone(), Polyline::from_samples(&pts)))
            }
            None => None,
        };
        Ok(Self {
            spec: spec.clone(),
            cfg: *cfg,
            field: field.clone(),
            sigma: sigma.clone(),
            charts: charts.iter().map(FastChart::new).collect(),
            tubes,
            root,
            tube_radius: cfg.tube_radius.unwrap_or(0.5 * spec.min_radius()),
        })
    }

    /// Runs inside the box of `saddle` until `|y¹| ≥ R`, interpolating the
    /// crossing linearly between the bracketing steps.
    #[allow(clippy::too_many_arguments)]
    fn passage(
        &self,
        saddle: usize,
        t_in: f64,
        n: &mut u64,
        x: &mut [f64],
        prev: &mut [f64],
        stepper: &mut Stepper<'_, FieldSpec, DiffusionSpec>,
        rng: &mut ChaCha8Rng,
        rec: &mut Recorder,
    ) -> Passage {
        let chart = &self.charts[saddle];
        let r = chart.radius;
        let domain = CHART_DOMAIN_SCALE * r;
        let dt = self.cfg.dt;
        let mut g_prev = chart.coord(0, x).abs() - r;
        if g_prev >= 0.0 {
            let y1 = chart.coord(0, x);
            return Passage::Exited(PassageRecord {
                saddle,
                t_in,
                t_out: t_in,
                face_sign: Sign::of(y1),
                exit_state: x.to_vec(),
            });
        }
        loop {
            let t = *n as f64 * dt;
            if t >= self.cfg.max_time {
                return Passage::Open;
            }
            prev.copy_from_slice(x);
            if !stepper.step(x, rng) {
                return Passage::Escaped;
            }
            *n += 1;
            rec.push(*n as f64 * dt, x);
            let y1 = chart.coord(0, x);
            let g = y1.abs() - r;
            if g >= 0.0 {
                let theta = if g - g_prev > 0.0 { -g_prev / (g - g_prev) } else { 1.0 };
                let exit_state = prev.iter().zip(x.iter()).map(|(a, b)| a + theta * (b - a)).collect();
                return Passage::Exited(PassageRecord {
                    saddle,
                    t_in,
                    t_out: t + theta * dt,
                    face_sign: Sign::of(y1),
                    exit_state,
                });
            }
            if chart.max_abs(x) > domain {
                return Passage::Escaped;
            }
            g_prev = g;
        }
    }

    /// Single passage through the box of `saddle` from `x_start`.
    pub fn saddle_passage(&self, saddle: usize, x_start: &Vector, trial: u64) -> Result<(Option<PassageRecord>, Trajectory)> {
        if self.charts[saddle].face(x_start.as_slice()) > 0.0 {
            return Err(Error::Config(format!("start point is outside the box of saddle {saddle}")));
        }
        let mut rng = trial_rng(self.cfg.seed, trial);
        let mut stepper = Stepper::new(&self.field, &self.sigma, self.cfg.epsilon, self.cfg.dt);
        let mut x = x_start.as_slice().to_vec();
        let mut prev = x.clone();
        let mut rec = Recorder::new(&self.cfg, 0.0, &x);
        let mut n = 0;
        let out = self.passage(saddle, 0.0, &mut n, &mut x, &mut prev, &mut stepper, &mut rng, &mut rec);
        let t = n as f64 * self.cfg.dt;
        Ok(match out {
            Passage::Exited(p) => {
                let traj = rec.finish(t, &x, vec![p.clone()], None, Terminal::Completed);
                (Some(p), traj)
            }
            Passage::Open => (None, rec.finish(t, &x, Vec::new(), Some((saddle, 0.0)), Terminal::MaxTime)),
            Passage::Escaped => (None, rec.finish(t, &x, Vec::new(), None, Terminal::EscapedNetwork)),
        })
    }

    /// Alternates free flight and saddle passages from the root point until
    /// `depth` passages are recorded, an exit leaf is reached, the path
    /// escapes or `max_time` passes.
    pub fn walk(&self, trial: u64, depth: usize) -> Result<Trajectory> {
        let (x0, root_tube) = self.root.as_ref().ok_or_else(|| Error::Config("network prepared without a start point".into()))?;
        let mut rng = trial_rng(self.cfg.seed, trial);
        let mut stepper = Stepper::new(&self.field, &self.sigma, self.cfg.epsilon, self.cfg.dt);
        let dt = self.cfg.dt;
        let mut x = x0.as_slice().to_vec();
        let mut prev = x.clone();
        let mut rec = Recorder::new(&self.cfg, 0.0, &x);
        let mut passages = Vec::new();
        let mut n: u64 = 0;
        let mut tube = root_tube;
        let mut source: Option<usize> = None;
        loop {
            // free flight until some box other than the one just left is entered
            let mut cursor = 0usize;
            let mut entered = self
                .charts
                .iter()
                .enumerate()
                .find(|(i, c)| Some(*i) != source && c.face(&x) <= 0.0)
                .map(|(i, _)| (i, n as f64 * dt));
            while entered.is_none() {
                let t = n as f64 * dt;
                if t >= self.cfg.max_time {
                    return Ok(rec.finish(t, &x, passages, None, Terminal::MaxTime));
                }
                prev.copy_from_slice(&x);
                if !stepper.step(&mut x, &mut rng) {
                    return Ok(rec.finish(t, &prev, passages, None, Terminal::EscapedNetwork));
                }
                n += 1;
                rec.push(n as f64 * dt, &x);
                for (i, c) in self.charts.iter().enumerate() {
                    if Some(i) == source {
                        continue;
                    }
                    let g = c.face(&x);
                    if g <= 0.0 {
                        let g0 = c.face(&prev);
                        let theta = if g0 > g { g0 / (g0 - g) } else { 1.0 };
                        entered = Some((i, t + theta * dt));
                        break;
                    }
                }
                if entered.is_none() && tube.distance(&x, &mut cursor, self.tube_radius) > self.tube_radius {
                    let near_source = source.is_some_and(|s| self.charts[s].face(&x) <= self.tube_radius);
                    if !near_source {
                        return Ok(rec.finish(n as f64 * dt, &x, passages, None, Terminal::EscapedNetwork));
                    }
                }
            }
            let (saddle, t_in) = entered.unwrap();
            match self.passage(saddle, t_in, &mut n, &mut x, &mut prev, &mut stepper, &mut rng, &mut rec) {
                Passage::Open => {
                    return Ok(rec.finish(n as f64 * dt, &x, passages, Some((saddle, t_in)), Terminal::MaxTime));
                }
                Passage::Escaped => {
                    return Ok(rec.finish(n as f64 * dt, &x, passages, None, Terminal::EscapedNetwork));
                }
                Passage::Exited(p) => {
                    let sign = p.face_sign;
                    let exit_state = p.exit_state.clone();
                    passages.push(p);
                    let conn = self.spec.connection(saddle, sign).expect("prepared networks have both connections");
                    if let Target::Exit(e) = conn.to {
                        let t = n as f64 * dt;
                        return Ok(rec.finish(t, &x, passages, None, Terminal::ExitedDomain { exit: e, point: exit_state }));
                    }
                    if passages.len() >= depth {
                        return Ok(rec.finish(n as f64 * dt, &x, passages, None, Terminal::Completed));
                    }
                    tube = &self.tubes[tube_index(saddle, sign)];
                    source = Some(saddle);
                }
            }
        }
    }
}

/// One passage through the box of `saddle`; `None` when the path stays
/// inside until `max_time` or escapes the chart domain.
pub fn run_saddle_passage(spec: &NetworkSpec, saddle: usize, x_start: &Vector, cfg: &SimConfig, trial: u64) -> Result<Option<PassageRecord>> {
    let prep = PreparedNetwork::new(spec, None, cfg)?;
    Ok(prep.saddle_passage(saddle, x_start, trial)?.0)
}

/// Walk of `depth` passages from `x0` for one trial.
pub fn run_network_walk(spec: &NetworkSpec, x0: &Vector, cfg: &SimConfig, depth: usize, trial: u64) -> Result<Trajectory> {
    PreparedNetwork::new(spec, Some(x0), cfg)?.walk(trial, depth)
}
