use super::{JumpCurve, SpaceTimeCurve};
use crate::error::{Error, Result};
use crate::exitmap::AdmissibleSequence;
use crate::flow::{orbit_until, sample_orbit, FlowConfig};
use crate::linalg::Vector;
use crate::model::{Mode, NetworkSpec, Target};
use crate::sde::Trajectory;

const ORBIT_STRIDE: usize = 50;

/// Graph `(t/ln(1/ε), X(t))` of a recorded path.
pub fn curve_of_trajectory(traj: &Trajectory, epsilon: f64) -> Result<SpaceTimeCurve> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidRescaling(epsilon));
    }
    let unit = (1.0 / epsilon).ln();
    let stride = traj.dim + 1;
    let mut data = Vec::with_capacity(traj.len() * stride);
    for i in 0..traj.len() {
        data.push(traj.times[i] / unit);
        data.extend_from_slice(traj.state(i));
    }
    if traj.len() == 1 {
        data.extend_from_within(..stride);
    }
    SpaceTimeCurve::new(traj.dim, data)
}

fn points(v: &[(f64, Vector)]) -> impl Iterator<Item = Vec<f64>> + '_ {
    v.iter().map(|(_, x)| x.as_slice().to_vec())
}

/// Limiting jump curve of a sequence: rests at the visited saddles for the
/// predicted rescaled dwell times, joined by the heteroclinic orbits. The
/// last jump runs from the final saddle to its exit point `q^±` (concrete) or
/// to the connection target (abstract). Abstract networks carry no orbits, so
/// their jumps are straight segments; the second value is then a warning.
pub fn curve_of_sequence(seq: &AdmissibleSequence, spec: &NetworkSpec, x0: Option<&Vector>) -> Result<(JumpCurve, Option<String>)> {
    if seq.steps.is_empty() {
        return Err(Error::InvalidParams("empty sequence".into()));
    }
    let flow = FlowConfig::default();
    let rests: Vec<Vec<f64>> = seq.steps.iter().map(|s| spec.saddle(s.saddle).position.as_slice().to_vec()).collect();
    let mut jumps: Vec<Vec<Vec<f64>>> = Vec::with_capacity(rests.len() + 1);
    let mut warning = None;
    match spec.mode {
        Mode::Concrete => {
            let (field, _) = spec.require_concrete()?;
            let first = &rests[0];
            let mut j0: Vec<Vec<f64>> = match x0 {
                Some(x0) => {
                    let chart = spec.saddle(seq.steps[0].saddle).chart()?;
                    let (samples, _) = orbit_until(field, x0, |x| chart.face(x), 0.0, &flow)?
                        .ok_or(Error::NoEntrance { t_max: flow.t_max })?;
                    samples
                        .states
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| i % ORBIT_STRIDE == 0)
                        .map(|(_, x)| x.as_slice().to_vec())
                        .chain(samples.states.last().map(|x| x.as_slice().to_vec()))
                        .collect()
                }
                None => Vec::new(),
            };
            j0.push(first.clone());
            jumps.push(j0);
            for (k, step) in seq.steps.iter().enumerate() {
                let s = spec.saddle(step.saddle);
                let q = s.exit_point(step.sign);
                let mut path = vec![rests[k].clone()];
                if k + 1 == seq.steps.len() {
                    path.push(q.as_slice().to_vec());
                } else {
                    let conn = spec.connection(step.saddle, step.sign).ok_or(Error::ModeMismatch { expected: "populated concrete" })?;
                    let h = conn.travel_time.ok_or(Error::ModeMismatch { expected: "populated concrete" })?;
                    path.extend(points(&sample_orbit(field, &q, h, flow.step, ORBIT_STRIDE)?));
                    path.push(rests[k + 1].clone());
                }
                jumps.push(path);
            }
        }
        Mode::Abstract => {
            warning = Some("abstract network: jumps drawn as straight segments between saddles".to_string());
            jumps.push(vec![rests[0].clone()]);
            for (k, step) in seq.steps.iter().enumerate() {
                let end = if k + 1 < seq.steps.len() {
                    rests[k + 1].clone()
                } else {
                    let conn = spec.connection(step.saddle, step.sign).ok_or(Error::ModeMismatch { expected: "connection" })?;
                    match conn.to {
                        Target::Saddle(t) => spec.saddle(t).position.as_slice().to_vec(),
                        Target::Exit(e) => spec.exit(e).point.as_slice().to_vec(),
                    }
                };
                jumps.push(vec![rests[k].clone(), end]);
            }
        }
    }
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok((JumpCurve::new(0.0, rests, seq.dwell.clone(), jumps)?, warning))
}
