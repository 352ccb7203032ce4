//! Deterministic flow, variational equation and connection geometry.
//!
//! Everything here uses the classical fixed-step fourth-order Runge–Kutta
//! method so that results are reproducible bit for bit.

use crate::error::{Error, Result};
use crate::exitmap::{Distribution, Gaussian};
use crate::field::{NoiseField, VectorField};
use crate::linalg::{Matrix, Vector};
use crate::model::{Chart, ConnectionSpec, Mode, NetworkSpec, Sign, Target};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowConfig {
    pub step: f64,
    /// Give up searching for a box entry after this much time.
    pub t_max: f64,
    /// Bisection tolerance for event times.
    pub time_tol: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self { step: 1e-3, t_max: 100.0, time_tol: 1e-10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariationalState {
    pub state: Vector,
    pub fundamental: Matrix,
    pub time: f64,
}

/// Entrance triple at a saddle: entry point, noise exponent and the limiting
/// law of the rescaled fluctuation (ambient coordinates).
#[derive(Clone, Debug)]
pub struct EntranceData {
    pub point: Vector,
    pub alpha: f64,
    pub mu: Distribution,
}

fn check_finite(x: &Vector, time: f64) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { time, last: x.as_slice().to_vec() })
    }
}

fn drift<F: VectorField + ?Sized>(field: &F, x: &Vector) -> Vector {
    let mut out = Vector::zeros(x.len());
    field.drift(x.as_slice(), out.as_mut_slice());
    out
}

fn rk4<F: VectorField + ?Sized>(field: &F, x: &Vector, h: f64) -> Vector {
    let k1 = drift(field, x);
    let k2 = drift(field, &(x + &k1 * (h / 2.0)));
    let k3 = drift(field, &(x + &k2 * (h / 2.0)));
    let k4 = drift(field, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// One RK4 step of the joint system `ẋ = b(x)`, `Φ̇ = Db(x) Φ`.
fn rk4_variational<F: VectorField + ?Sized>(field: &F, x: &Vector, phi: &Matrix, h: f64) -> (Vector, Matrix) {
    let d = x.len();
    let mut jac = Matrix::zeros(d, d);
    let mut rhs = |x: &Vector, phi: &Matrix| {
        field.jacobian(x.as_slice(), &mut jac);
        (drift(field, x), &jac * phi)
    };
    let (k1, m1) = rhs(x, phi);
    let (k2, m2) = rhs(&(x + &k1 * (h / 2.0)), &(phi + &m1 * (h / 2.0)));
    let (k3, m3) = rhs(&(x + &k2 * (h / 2.0)), &(phi + &m2 * (h / 2.0)));
    let (k4, m4) = rhs(&(x + &k3 * h), &(phi + &m3 * h));
    (
        x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0),
        phi + (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (h / 6.0),
    )
}

fn substeps(t: f64, step: f64) -> usize {
    (t / step).ceil().max(0.0) as usize
}

/// `S^t x0` by ⌈t/step⌉ equal RK4 steps.
pub fn integrate_flow<F: VectorField + ?Sized>(field: &F, x0: &Vector, t: f64, step: f64) -> Result<Vector> {
    assert!(t >= 0.0 && step > 0.0, "integrate_flow needs t >= 0 and step > 0");
    let n = substeps(t, step);
    let mut x = x0.clone();
    for i in 0..n {
        let next = rk4(field, &x, t / n as f64);
        check_finite(&next, (i + 1) as f64 * t / n as f64).map_err(|_| Error::Divergence {
            time: i as f64 * t / n as f64,
            last: x.as_slice().to_vec(),
        })?;
        x = next;
    }
    Ok(x)
}

/// State and fundamental matrix `Φ_{x0}(t)` with `Φ(0) = I`.
pub fn integrate_variational<F: VectorField + ?Sized>(
    field: &F,
    x0: &Vector,
    t: f64,
    step: f64,
) -> Result<VariationalState> {
    assert!(t >= 0.0 && step > 0.0, "integrate_variational needs t >= 0 and step > 0");
    let d = x0.len();
    let n = substeps(t, step);
    let (mut x, mut phi) = (x0.clone(), Matrix::identity(d, d));
    for i in 0..n {
        let (nx, nphi) = rk4_variational(field, &x, &phi, t / n as f64);
        if !nx.iter().chain(nphi.iter()).all(|v| v.is_finite()) {
            return Err(Error::Divergence { time: i as f64 * t / n as f64, last: x.as_slice().to_vec() });
        }
        x = nx;
        phi = nphi;
    }
    Ok(VariationalState { state: x, fundamental: phi, time: t })
}

/// Variational samples along an orbit on the integrator grid.
#[derive(Clone, Debug)]
pub struct OrbitSamples {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub phis: Vec<Matrix>,
}

impl OrbitSamples {
    pub fn last(&self) -> VariationalState {
        VariationalState {
            state: self.states.last().unwrap().clone(),
            fundamental: self.phis.last().unwrap().clone(),
            time: *self.times.last().unwrap(),
        }
    }

    /// `∫_0^T Φ(T)Φ(s)⁻¹ σσᵀ(x(s)) Φ(s)⁻ᵀ Φ(T)ᵀ ds` by the trapezoid rule on the sample grid.
    pub fn transport_covariance<S: NoiseField + ?Sized>(&self, sigma: &S) -> Result<Matrix> {
        let d = self.states[0].len();
        let phi_t = self.phis.last().unwrap();
        let mut s_mat = Matrix::zeros(d, sigma.noise_dim());
        let mut integrand = |i: usize| -> Result<Matrix> {
            let inv = self.phis[i]
                .clone()
                .try_inverse()
                .ok_or(Error::Divergence { time: self.times[i], last: self.states[i].as_slice().to_vec() })?;
            sigma.sigma(self.states[i].as_slice(), &mut s_mat);
            let m = phi_t * inv * &s_mat;
            Ok(&m * m.transpose())
        };
        let mut total = Matrix::zeros(d, d);
        let mut prev = integrand(0)?;
        for i in 1..self.times.len() {
            let cur = integrand(i)?;
            total += (&prev + &cur) * (0.5 * (self.times[i] - self.times[i - 1]));
            prev = cur;
        }
        Ok((&total + total.transpose()) * 0.5)
    }
}

/// Integrates from `x0` until `event(x) ≤ 0`, locates the crossing by
/// bisection, then continues for `extra` more time. Returns the samples and
/// the event time, or `None` if the orbit blows up or `t_max` passes first.
pub fn orbit_until<F, E>(
    field: &F,
    x0: &Vector,
    event: E,
    extra: f64,
    cfg: &FlowConfig,
) -> Result<Option<(OrbitSamples, f64)>>
where
    F: VectorField + ?Sized,
    E: Fn(&[f64]) -> f64,
{
    let d = x0.len();
    let mut samples = OrbitSamples { times: vec![0.0], states: vec![x0.clone()], phis: vec![Matrix::identity(d, d)] };
    let mut t = 0.0;
    let mut x = x0.clone();
    let mut phi = Matrix::identity(d, d);
    let t_event;
    if event(x0.as_slice()) <= 0.0 {
        t_event = 0.0;
    } else {
        loop {
            if t >= cfg.t_max {
                return Ok(None);
            }
            let (nx, nphi) = rk4_variational(field, &x, &phi, cfg.step);
            if !nx.iter().all(|v| v.is_finite()) {
                return Ok(None);
            }
            if event(nx.as_slice()) <= 0.0 {
                let (mut lo, mut hi) = (0.0, cfg.step);
                while hi - lo > cfg.time_tol {
                    let mid = 0.5 * (lo + hi);
                    let (mx, _) = rk4_variational(field, &x, &phi, mid);
                    if event(mx.as_slice()) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let (ex, ephi) = rk4_variational(field, &x, &phi, hi);
                t += hi;
                x = ex;
                phi = ephi;
                samples.times.push(t);
                samples.states.push(x.clone());
                samples.phis.push(phi.clone());
                t_event = t;
                break;
            }
            t += cfg.step;
            x = nx;
            phi = nphi;
            samples.times.push(t);
            samples.states.push(x.clone());
            samples.phis.push(phi.clone());
        }
    }
    if extra > 0.0 {
        let n = substeps(extra, cfg.step);
        let h = extra / n as f64;
        for i in 1..=n {
            let (nx, nphi) = rk4_variational(field, &x, &phi, h);
            check_finite(&nx, t)?;
            x = nx;
            phi = nphi;
            samples.times.push(t_event + i as f64 * h);
            samples.states.push(x.clone());
            samples.phis.push(phi.clone());
        }
        t = t_event + extra;
    }
    debug_assert!((samples.times.last().unwrap() - t).abs() < 1e-9);
    Ok(Some((samples, t_event)))
}

/// Geometry of one connection.
#[derive(Clone, Debug)]
pub struct ConnectionGeometry {
    pub travel_time: f64,
    pub entry_point: Vector,
    pub fundamental_matrix: Matrix,
    pub transport_cov: Matrix,
}

/// First entry of the orbit of `q^± = z ± R v_1` into the target box.
pub fn connection_entry(spec: &NetworkSpec, saddle: usize, sign: Sign, cfg: &FlowConfig) -> Result<ConnectionGeometry> {
    let (field, sigma) = spec.require_concrete()?;
    let conn = spec
        .connection(saddle, sign)
        .ok_or_else(|| Error::InvalidParams(format!("saddle {saddle} has no {sign} connection")))?;
    let q = spec.saddle(saddle).exit_point(sign);
    let d = q.len();
    let Target::Saddle(to) = conn.to else {
        return Ok(ConnectionGeometry {
            travel_time: 0.0,
            entry_point: q,
            fundamental_matrix: Matrix::identity(d, d),
            transport_cov: Matrix::zeros(d, d),
        });
    };
    let target = spec.saddle(to).chart()?;
    let found = orbit_until(field, &q, |x| target.face(x), 0.0, cfg)?;
    let (samples, h) = found.ok_or(Error::ConnectionNotFound { from: saddle, sign, t_max: cfg.t_max })?;
    let last = samples.last();
    Ok(ConnectionGeometry {
        travel_time: h,
        entry_point: last.state,
        fundamental_matrix: last.fundamental,
        transport_cov: samples.transport_covariance(sigma)?,
    })
}

/// Fills travel times, entry points, fundamental matrices, transport
/// covariances and entrance ν-coordinates of every connection.
pub fn populate_connections(spec: &mut NetworkSpec, cfg: &FlowConfig) -> Result<()> {
    spec.require_concrete()?;
    let charts: Vec<Chart> = spec.charts()?;
    let keys: Vec<(usize, Sign)> = spec.connections.iter().map(|c| (c.from, c.sign)).collect();
    for (from, sign) in keys {
        let geo = connection_entry(spec, from, sign, cfg)?;
        let to = spec.connection(from, sign).unwrap().to;
        let nu_coord = match to {
            Target::Saddle(t) => Some(charts[t].coord(spec.saddle(t).nu - 1, geo.entry_point.as_slice())),
            Target::Exit(_) => None,
        };
        let conn = spec.connection_mut(from, sign).unwrap();
        conn.travel_time = Some(geo.travel_time);
        conn.entry_point = Some(geo.entry_point);
        conn.fundamental_matrix = Some(geo.fundamental_matrix);
        conn.transport_cov = Some(geo.transport_cov);
        conn.entrance_nu_coord = nu_coord;
    }
    Ok(())
}

/// Result of following the deterministic orbit of `x0` into the network.
#[derive(Clone, Debug)]
pub struct InitialEntrance {
    pub saddle: usize,
    /// First entry time into the box of `saddle`, plus one.
    pub t_tilde: f64,
    pub entrance: EntranceData,
}

fn first_box_entered(charts: &[Chart], x: &[f64]) -> Option<usize> {
    charts.iter().position(|c| c.face(x) <= 0.0)
}

/// Deterministic entrance from a point on a heteroclinic orbit: α = 1 and
/// a centred Gaussian accumulated over `[0, t̃]`.
pub fn initial_entrance(spec: &NetworkSpec, x0: &Vector, cfg: &FlowConfig) -> Result<InitialEntrance> {
    let (field, sigma) = spec.require_concrete()?;
    let charts = spec.charts()?;
    let event = |x: &[f64]| if first_box_entered(&charts, x).is_some() { -1.0 } else { 1.0 };
    let found = orbit_until(field, x0, event, 1.0, cfg)?;
    let (samples, t_entry) = found.ok_or(Error::NoEntrance { t_max: cfg.t_max })?;
    // the bisection above lands on the entry step of the first box hit
    let idx = samples.times.iter().position(|t| *t >= t_entry).unwrap();
    let saddle = first_box_entered(&charts, samples.states[idx].as_slice())
        .or_else(|| first_box_entered(&charts, samples.states.last().unwrap().as_slice()))
        .ok_or(Error::NoEntrance { t_max: cfg.t_max })?;
    let cov = samples.transport_covariance(sigma)?;
    Ok(InitialEntrance {
        saddle,
        t_tilde: t_entry + 1.0,
        entrance: EntranceData {
            point: samples.last().state,
            alpha: 1.0,
            mu: Distribution::Gaussian(Gaussian::centered(cov)),
        },
    })
}

/// Entrance at the downstream saddle produced by an exit law at `q^±`:
/// `Φ·F`, plus an independent transport Gaussian when `β = 1`.
pub fn pushforward_connection(spec: &NetworkSpec, conn: &ConnectionSpec, beta: f64, exit_law: Distribution) -> Result<EntranceData> {
    if spec.mode != Mode::Concrete {
        return Err(Error::ModeMismatch { expected: "concrete" });
    }
    let (Some(phi), Some(point)) = (&conn.fundamental_matrix, &conn.entry_point) else {
        return Err(Error::ModeMismatch { expected: "populated concrete" });
    };
    let mut mu = exit_law.pushforward(phi.clone());
    if beta == 1.0 {
        let cov = conn.transport_cov.clone().unwrap_or_else(|| Matrix::zeros(phi.nrows(), phi.nrows()));
        mu = Distribution::Sum(vec![mu, Distribution::Gaussian(Gaussian::centered(cov))]);
    }
    Ok(EntranceData { point: point.clone(), alpha: beta, mu })
}

/// The point `S^{f h} q^±` a fraction `f` of the way along a connection.
pub fn orbit_anchor(spec: &NetworkSpec, saddle: usize, sign: Sign, fraction: f64, cfg: &FlowConfig) -> Result<Vector> {
    let (field, _) = spec.require_concrete()?;
    let conn = spec
        .connection(saddle, sign)
        .ok_or_else(|| Error::InvalidParams(format!("saddle {saddle} has no {sign} connection")))?;
    let h = conn.travel_time.ok_or(Error::ModeMismatch { expected: "populated concrete" })?;
    integrate_flow(field, &spec.saddle(saddle).exit_point(sign), fraction.clamp(0.0, 1.0) * h, cfg.step)
}

/// Orbit samples `S^{k·every·step} x0` for `t ∈ [0, t_end]`, always including the endpoint.
pub fn sample_orbit<F: VectorField + ?Sized>(field: &F, x0: &Vector, t_end: f64, step: f64, every: usize) -> Result<Vec<(f64, Vector)>> {
    let n = substeps(t_end, step);
    let h = if n == 0 { 0.0 } else { t_end / n as f64 };
    let mut out = vec![(0.0, x0.clone())];
    let mut x = x0.clone();
    for i in 1..=n {
        x = rk4(field, &x, h);
        check_finite(&x, i as f64 * h)?;
        if i % every.max(1) == 0 || i == n {
            out.push((i as f64 * h, x.clone()));
        }
    }
    Ok(out)
}
