use super::{bisect, densify, dist, JumpCurve, SpaceTimeCurve};

/// Default stopping tolerance of [`rho_refined`].
pub const REFINE_TOL: f64 = 1e-6;

const MAX_REFINE_VERTICES: usize = 1 << 14;

/// Discrete Fréchet distance between the vertex sequences of `a` and `b` under
/// the Euclidean norm on `(t, x)`.
pub fn rho(a: &SpaceTimeCurve, b: &SpaceTimeCurve) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for i in 0..n {
        let va = a.vertex(i);
        for j in 0..m {
            let d = dist(va, b.vertex(j));
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m - 1]
}

/// [`rho`] after repeated midpoint insertion, stopping once successive values
/// differ by less than `tol` or the curves grow past a size cap.
pub fn rho_refined(a: &SpaceTimeCurve, b: &SpaceTimeCurve, tol: f64) -> f64 {
    let (mut a, mut b) = (a.clone(), b.clone());
    let mut value = rho(&a, &b);
    while a.len().max(b.len()) * 2 <= MAX_REFINE_VERTICES {
        a = bisect(&a);
        b = bisect(&b);
        let next = rho(&a, &b);
        let done = (value - next).abs() < tol;
        value = next;
        if done {
            break;
        }
    }
    value
}

/// Indices `i` of `f` reachable at the last vertex of `path` by a monotone
/// coupling within `delta`, starting from any source index paired with the
/// first vertex of `path`.
fn coupled_ends(f: &SpaceTimeCurve, sources: &[bool], path: &[Vec<f64>], delta: f64) -> Vec<bool> {
    let n = f.len();
    let m = path.len();
    let mut reach = vec![false; n * m];
    for i in 0..n {
        let v = f.vertex(i);
        for j in 0..m {
            if dist(v, &path[j]) > delta {
                continue;
            }
            let from_prev = i > 0 && (reach[(i - 1) * m + j] || (j > 0 && reach[(i - 1) * m + j - 1]));
            let from_left = j > 0 && reach[i * m + j - 1];
            reach[i * m + j] = (j == 0 && sources[i]) || from_prev || from_left;
        }
    }
    (0..n).map(|i| reach[i * m + m - 1]).collect()
}

fn space_time(t: f64, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    points.iter().map(|p| std::iter::once(t).chain(p.iter().copied()).collect()).collect()
}

fn densify_points(points: Vec<Vec<f64>>, max_len: f64) -> Vec<Vec<f64>> {
    if points.len() < 2 {
        return points;
    }
    let c = SpaceTimeCurve::from_vertices(&points).expect("jump points share one time");
    densify(&c, max_len).vertices().map(<[f64]>::to_vec).collect()
}

/// Searches for a witness that `f` follows `jump` within `delta`: times
/// bracketing every rest to within `delta`, `f` within `delta` of the rest
/// point in between, and the pieces of `f` between rests coupled to the jump
/// paths within `delta`. Both curves are densified to `delta/4` first. A
/// witness bounds the distance between `f` and the flattened jump curve by
/// `3·delta`.
pub fn proximity_check(f: &SpaceTimeCurve, jump: &JumpCurve, delta: f64) -> bool {
    if !(delta > 0.0) || f.dim() != jump.dim {
        return false;
    }
    let f = densify(f, delta / 4.0);
    let n = f.len();
    let mut sources = vec![false; n];
    sources[0] = true;
    for (j, path) in jump.jumps.iter().enumerate() {
        let path = densify_points(space_time(jump.jump_time(j), path), delta / 4.0);
        let ends = coupled_ends(&f, &sources, &path, delta);
        if j == jump.rests.len() {
            return ends[n - 1];
        }
        let (t0, t1) = jump.rest_window(j);
        let y = &jump.rests[j];
        let mut active = false;
        for i in 0..n {
            let near = dist(f.point(i), y) <= delta;
            if !near {
                active = false;
            } else if ends[i] && (f.time(i) - t0).abs() <= delta {
                active = true;
            }
            sources[i] = active && (f.time(i) - t1).abs() <= delta;
        }
        if !sources.iter().any(|s| *s) {
            return false;
        }
    }
    unreachable!("a jump curve has one more jump than rests")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(points: &[[f64; 2]]) -> SpaceTimeCurve {
        SpaceTimeCurve::from_vertices(&points.iter().map(|p| p.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn identity_and_constant_curves() {
        let a = curve(&[[0.0, 1.0], [0.5, 1.5], [1.0, 0.0]]);
        assert_eq!(rho(&a, &a), 0.0);
        let p = curve(&[[0.0, 2.0], [1.0, 2.0]]);
        let q = curve(&[[0.0, -1.0], [1.0, -1.0]]);
        assert_eq!(rho(&p, &q), 3.0);
    }

    #[test]
    fn refinement_removes_vertex_bias() {
        let a = curve(&[[0.0, 0.0], [1.0, 0.0]]);
        let b = curve(&[[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]);
        assert_eq!(rho(&a, &b), 0.5);
        assert!(rho_refined(&a, &b, REFINE_TOL) < 1e-3);
    }

    fn plateau() -> JumpCurve {
        JumpCurve::new(0.0, vec![vec![1.0]], vec![1.0], vec![vec![vec![0.0], vec![1.0]], vec![vec![1.0], vec![2.0]]]).unwrap()
    }

    #[test]
    fn proximity_of_own_flattening() {
        let j = plateau();
        assert!(proximity_check(&j.flatten(), &j, 1e-3));
    }

    #[test]
    fn displaced_plateau_fails() {
        let j = plateau();
        let f = curve(&[[0.0, 0.0], [0.0, 1.4], [1.0, 1.4], [1.0, 2.0]]);
        assert!(!proximity_check(&f, &j, 0.2));
        assert!(proximity_check(&f, &j, 0.45));
    }

    #[test]
    fn late_plateau_fails() {
        let j = plateau();
        let f = curve(&[[0.0, 0.0], [0.0, 1.0], [1.5, 1.0], [1.5, 2.0]]);
        assert!(!proximity_check(&f, &j, 0.2));
    }
}
