//! Seeded generators shared by the integration and acceptance suites.
#![allow(dead_code)]

use hetnet::curve::{densify, JumpCurve, SpaceTimeCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Polyline with `n` vertices, nondecreasing times and coordinates in [-2, 2].
pub fn random_polyline<R: Rng>(rng: &mut R, dim: usize, n: usize) -> SpaceTimeCurve {
    let mut t = rng.random_range(0.0..1.0);
    let mut data = Vec::with_capacity(n * (dim + 1));
    for _ in 0..n {
        t += if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..0.5) };
        data.push(t);
        data.extend((0..dim).map(|_| rng.random_range(-2.0..2.0)));
    }
    SpaceTimeCurve::new(dim, data).unwrap()
}

/// Random jump curve in the plane with 1 to 4 rests.
pub fn random_jump<R: Rng>(rng: &mut R) -> JumpCurve {
    let mut point = || -> Vec<f64> { vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)] };
    let k = 1 + (point()[0].abs() * 4.0) as usize % 4;
    let rests: Vec<Vec<f64>> = (0..k).map(|_| point()).collect();
    let mut ends = vec![point()];
    ends.extend(rests.iter().cloned());
    ends.push(point());
    let jumps: Vec<Vec<Vec<f64>>> = ends
        .windows(2)
        .map(|w| {
            let mut path = vec![w[0].clone()];
            if point()[0] > 0.0 {
                path.push(point());
            }
            path.push(w[1].clone());
            path
        })
        .collect();
    let dwell = (0..k).map(|_| rng.random_range(0.2..2.0)).collect();
    JumpCurve::new(rng.random_range(0.0..1.0), rests, dwell, jumps).unwrap()
}

/// The flattened jump curve, densified and disturbed by a monotone time warp
/// of amplitude `warp` and independent spatial noise of amplitude `noise`.
pub fn disturbed<R: Rng>(rng: &mut R, jump: &JumpCurve, warp: f64, noise: f64, spacing: f64) -> SpaceTimeCurve {
    let base = densify(&jump.flatten(), spacing);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut data = Vec::with_capacity(base.len() * 3);
    let mut t = 0.0f64;
    for v in base.vertices() {
        t = t.max(v[0] + warp * (1.0 + (v[0] + phase).sin()));
        data.push(t);
        data.extend(v[1..].iter().map(|x| x + rng.random_range(-noise..=noise)));
    }
    SpaceTimeCurve::new(2, data).unwrap()
}

pub fn graph(times: &[f64], f: impl Fn(f64) -> f64) -> SpaceTimeCurve {
    let values: Vec<Vec<f64>> = times.iter().map(|t| vec![f(*t)]).collect();
    SpaceTimeCurve::graph(times, &values).unwrap()
}
