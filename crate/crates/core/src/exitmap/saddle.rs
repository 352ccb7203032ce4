//! Single-saddle asymptotics: the Gaussian laws along stable and unstable
//! directions, the branch-selecting vector `κ`, the exit exponent `β` and the
//! limiting exit law.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dist::{Distribution, EtaLaw, EtaTerm, Gaussian, Symmetry};
use crate::error::{Error, Result};
use crate::field::NoiseField;
use crate::flow::EntranceData;
use crate::linalg::{Matrix, Vector};
use crate::model::{SaddleSpec, Sign};

/// Weight below which the covariance integrands are truncated.
const TRUNCATION: f64 = 1e-12;
/// Simpson panels for covariance quadrature.
const PANELS: usize = 40_000;
/// Relative tolerance for detecting the boundary cases of the exit law.
const BOUNDARY_TOL: f64 = 1e-9;

/// Local diffusion `B(y) = V⁻¹ σ(z + V y)`.
fn local_b<S: NoiseField + ?Sized>(saddle: &SaddleSpec, inverse: &Matrix, sigma: &S, y: &Vector) -> Matrix {
    let x = &saddle.position + &saddle.eigenvectors * y;
    let mut s = Matrix::zeros(saddle.dim(), sigma.noise_dim());
    sigma.sigma(x.as_slice(), &mut s);
    inverse * s
}

fn inverse(saddle: &SaddleSpec) -> Matrix {
    saddle.eigenvectors.clone().try_inverse().expect("validated eigenvector matrix")
}

/// `∫ e^{−(λk+λj)s} (BB*)^{kj}(S_A^s y) ds` over `s ∈ [0, ∞)` (`forward`) or
/// `(−∞, 0]`, for the index set `idx`, by composite Simpson on the range where
/// the exponential weight exceeds the truncation level.
fn quadrature<F: Fn(f64) -> Matrix>(saddle: &SaddleSpec, idx: &[usize], forward: bool, bb: F) -> Matrix {
    let n = idx.len();
    let mut out = Matrix::zeros(n, n);
    for (a, &k) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate().skip(a) {
            let rate = saddle.eigenvalues[k] + saddle.eigenvalues[j];
            let decay = if forward { rate } else { -rate };
            assert!(decay > 0.0, "covariance integral diverges for indices {k}, {j}");
            let t_end = -TRUNCATION.ln() / decay;
            let h = t_end / PANELS as f64;
            let f = |u: f64| {
                let s = if forward { u } else { -u };
                (-rate * s).exp() * bb(s)[(k, j)]
            };
            let mut acc = f(0.0) + f(t_end);
            for i in 1..PANELS {
                acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            out[(a, b)] = acc * h / 3.0;
            out[(b, a)] = out[(a, b)];
        }
    }
    out
}

fn closed_form(saddle: &SaddleSpec, idx: &[usize], bb: &Matrix, forward: bool) -> Matrix {
    let n = idx.len();
    Matrix::from_fn(n, n, |a, b| {
        let rate = saddle.eigenvalues[idx[a]] + saddle.eigenvalues[idx[b]];
        bb[(idx[a], idx[b])] / if forward { rate } else { -rate }
    })
}

fn stable_indices(saddle: &SaddleSpec) -> Vec<usize> {
    (0..saddle.nu - 1).collect()
}

fn unstable_indices(saddle: &SaddleSpec) -> Vec<usize> {
    (saddle.nu - 1..saddle.dim()).collect()
}

/// Covariance of `N_0` along the expanding directions, by quadrature.
pub fn stable_cov_quadrature<S: NoiseField + ?Sized>(saddle: &SaddleSpec, sigma: &S, y0: &Vector) -> Matrix {
    let inv = inverse(saddle);
    let lam = Vector::from_vec(saddle.eigenvalues.clone());
    quadrature(saddle, &stable_indices(saddle), true, |s| {
        let y = y0.component_mul(&lam.map(|l| (l * s).exp()));
        let b = local_b(saddle, &inv, sigma, &y);
        &b * b.transpose()
    })
}

/// Covariance of `N_0`, the Gaussian picked up along the expanding directions
/// while the orbit approaches the saddle. `(ν−1)×(ν−1)`.
pub fn stable_cov<S: NoiseField + ?Sized>(saddle: &SaddleSpec, sigma: &S, y0: &Vector) -> Matrix {
    match sigma.constant() {
        Some(s) => {
            let b = inverse(saddle) * s;
            closed_form(saddle, &stable_indices(saddle), &(&b * b.transpose()), true)
        }
        None => stable_cov_quadrature(saddle, sigma, y0),
    }
}

/// Covariance of `N̄` along the contracting directions by quadrature.
pub fn unstable_cov_quadrature<S: NoiseField + ?Sized>(saddle: &SaddleSpec, sigma: &S, sign: Sign) -> Matrix {
    let inv = inverse(saddle);
    let l1 = saddle.eigenvalues[0];
    let r = sign.value() * saddle.radius;
    quadrature(saddle, &unstable_indices(saddle), false, |s| {
        let mut y = Vector::zeros(saddle.dim());
        y[0] = r * (l1 * s).exp();
        let b = local_b(saddle, &inv, sigma, &y);
        &b * b.transpose()
    })
}

/// Covariance of `N̄`, the Gaussian along the contracting directions at the
/// exit face `±R v_1`. `(d−ν+1)×(d−ν+1)`.
pub fn unstable_cov<S: NoiseField + ?Sized>(saddle: &SaddleSpec, sigma: &S, sign: Sign) -> Matrix {
    match sigma.constant() {
        Some(s) => {
            let b = inverse(saddle) * s;
            closed_form(saddle, &unstable_indices(saddle), &(&b * b.transpose()), false)
        }
        None => unstable_cov_quadrature(saddle, sigma, sign),
    }
}

fn is_one(alpha: f64) -> bool {
    (alpha - 1.0).abs() < 1e-12
}

/// Law of `κ = (κ¹,…,κ^{ν−1})`: the chart image of the entrance fluctuation,
/// plus the independent Gaussian `N_0` when `α = 1`.
pub fn kappa_dist<S: NoiseField + ?Sized>(saddle: &SaddleSpec, sigma: &S, entrance: &EntranceData) -> Result<Distribution> {
    let inv = inverse(saddle);
    let m = saddle.nu - 1;
    let proj = inv.rows(0, m).into_owned();
    let image = entrance.mu.clone().pushforward(proj);
    if is_one(entrance.alpha) {
        let y0 = &inv * (&entrance.point - &saddle.position);
        let n0 = Gaussian::centered(stable_cov(saddle, sigma, &y0));
        return Ok(Distribution::Sum(vec![image, Distribution::Gaussian(n0)]));
    }
    if !(entrance.alpha > 0.0 && entrance.alpha < 1.0) {
        return Err(Error::InvalidEntrance(format!("alpha = {} outside (0, 1]", entrance.alpha)));
    }
    match image.symmetry() {
        Symmetry::Ray(d) if d.iter().any(|v| *v == 0.0) => Err(Error::InvalidEntrance(
            "entrance fluctuation has no component along an expanding direction".into(),
        )),
        Symmetry::Symmetric if matches!(&image, Distribution::Dirac(_)) => Err(Error::InvalidEntrance(
            "entrance fluctuation vanishes along the expanding directions".into(),
        )),
        _ => Ok(image),
    }
}

/// Which asymptotic regime produced the exit law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExitCase {
    /// One expanding direction, `−αλ_ν > λ_1`: fresh Gaussian `N`.
    OneUnstableNoise,
    /// One expanding direction, `−αλ_ν = λ_1`: `N + η₋`.
    OneUnstableBoundary,
    /// One expanding direction, `−αλ_ν < λ_1`: `η₋`.
    OneUnstableEtaMinus,
    /// Several expanding directions, `−λ_ν > λ_1 − λ_2`: `η₊`.
    MultiUnstableEtaPlus,
    /// Several expanding directions, `−λ_ν = λ_1 − λ_2`: `η₊ + η₋`.
    MultiUnstableBoundary,
    /// Several expanding directions, `−λ_ν < λ_1 − λ_2`: `η₋`.
    MultiUnstableEtaMinus,
}

impl ExitCase {
    pub fn is_boundary(self) -> bool {
        matches!(self, ExitCase::OneUnstableBoundary | ExitCase::MultiUnstableBoundary)
    }

    pub fn has_noise(self) -> bool {
        matches!(self, ExitCase::OneUnstableNoise | ExitCase::OneUnstableBoundary)
    }

    pub fn has_eta_minus(self) -> bool {
        !matches!(self, ExitCase::OneUnstableNoise | ExitCase::MultiUnstableEtaPlus)
    }

    pub fn has_eta_plus(self) -> bool {
        matches!(self, ExitCase::MultiUnstableEtaPlus | ExitCase::MultiUnstableBoundary)
    }
}

/// `a` vs `b` with the relative boundary tolerance: −1, 0 or 1.
fn compare(a: f64, b: f64) -> i8 {
    if (a - b).abs() <= BOUNDARY_TOL * a.abs().max(b.abs()) {
        0
    } else if a > b {
        1
    } else {
        -1
    }
}

/// Exit exponent `β` and the regime that determines it.
pub fn beta_exponent(saddle: &SaddleSpec, alpha: f64) -> (f64, ExitCase) {
    let l1 = saddle.eigenvalues[0];
    let ln = saddle.lambda_nu();
    if saddle.nu == 2 {
        match compare(-alpha * ln, l1) {
            1 => (1.0, ExitCase::OneUnstableNoise),
            0 => (1.0, ExitCase::OneUnstableBoundary),
            _ => (-alpha * ln / l1, ExitCase::OneUnstableEtaMinus),
        }
    } else {
        let l2 = saddle.eigenvalues[1];
        match compare(-ln, l1 - l2) {
            1 => (alpha * (1.0 - l2 / l1), ExitCase::MultiUnstableEtaPlus),
            0 => (alpha * (1.0 - l2 / l1), ExitCase::MultiUnstableBoundary),
            _ => (-alpha * ln / l1, ExitCase::MultiUnstableEtaMinus),
        }
    }
}

/// Limiting law of the exit fluctuation at `q^±` in ambient coordinates,
/// conditioned on leaving through the `sign` face.
pub fn exit_distribution<S: NoiseField + ?Sized>(
    saddle: &SaddleSpec,
    sigma: &S,
    entrance: &EntranceData,
    kappa: &Distribution,
    sign: Sign,
) -> Result<(Distribution, ExitCase)> {
    let d = saddle.dim();
    let nu = saddle.nu;
    let l1 = saddle.eigenvalues[0];
    let ln = saddle.lambda_nu();
    let r = saddle.radius;
    let (_, case) = beta_exponent(saddle, entrance.alpha);
    let inv = inverse(saddle);
    let y0 = &inv * (&entrance.point - &saddle.position);

    let mut terms = Vec::new();
    if case.has_eta_minus() {
        let y_nu = y0[nu - 1];
        if y_nu == 0.0 {
            return Err(Error::InvalidEntrance("entry point has zero nu-coordinate".into()));
        }
        let mut dir = Vector::zeros(d);
        dir[nu - 1] = y_nu;
        terms.push(EtaTerm { scale: r.powf(ln / l1), exponent: -ln / l1, direction: dir, times_kappa2: false });
    }
    if case.has_eta_plus() {
        let l2 = saddle.eigenvalues[1];
        let mut dir = Vector::zeros(d);
        dir[1] = 1.0;
        terms.push(EtaTerm { scale: r.powf(l2 / l1), exponent: -l2 / l1, direction: dir, times_kappa2: true });
    }
    let mut parts = Vec::new();
    if !terms.is_empty() {
        parts.push(Distribution::Eta(EtaLaw { kappa: Box::new(kappa.clone()), sign, terms }));
    }
    if case.has_noise() {
        let block = unstable_cov(saddle, sigma, sign);
        let mut cov = Matrix::zeros(d, d);
        cov.view_mut((nu - 1, nu - 1), block.shape()).copy_from(&block);
        parts.push(Distribution::Gaussian(Gaussian::centered(cov)));
    }
    let local = if parts.len() == 1 { parts.pop().unwrap() } else { Distribution::Sum(parts) };
    Ok((local.pushforward(saddle.eigenvectors.clone()), case))
}

/// Branch probabilities `P{sgn κ¹ = ∓1}` with their standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Split {
    pub p_minus: f64,
    pub p_plus: f64,
    pub stderr: f64,
    /// Decided by symmetry rather than sampling.
    pub exact: bool,
}

impl Split {
    pub fn p(&self, sign: Sign) -> f64 {
        match sign {
            Sign::Minus => self.p_minus,
            Sign::Plus => self.p_plus,
        }
    }
}

pub fn split_probabilities(kappa: &Distribution, n_kappa: usize, seed: u64) -> Result<Split> {
    match kappa.symmetry() {
        Symmetry::Symmetric => return Ok(Split { p_minus: 0.5, p_plus: 0.5, stderr: 0.0, exact: true }),
        Symmetry::Ray(d) => {
            return match d[0] {
                v if v > 0.0 => Ok(Split { p_minus: 0.0, p_plus: 1.0, stderr: 0.0, exact: true }),
                v if v < 0.0 => Ok(Split { p_minus: 1.0, p_plus: 0.0, stderr: 0.0, exact: true }),
                _ => Err(Error::InvalidEntrance("kappa^1 vanishes identically".into())),
            };
        }
        Symmetry::General => {}
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut plus, mut zero) = (0usize, 0usize);
    for _ in 0..n_kappa {
        let k1 = kappa.sample(&mut rng)?[0];
        if k1.abs() < 1e-12 {
            zero += 1;
        }
        if k1 > 0.0 {
            plus += 1;
        }
    }
    if zero as f64 > 1e-3 * n_kappa as f64 {
        return Err(Error::InvalidEntrance("kappa^1 has an atom at zero".into()));
    }
    let p = plus as f64 / n_kappa as f64;
    Ok(Split { p_minus: 1.0 - p, p_plus: p, stderr: (p * (1.0 - p) / n_kappa as f64).sqrt(), exact: false })
}

/// Samples of `−ln|κ¹|/λ_1`, the O(1) correction to the rescaled dwell time.
pub fn dwell_fluctuation_samples(saddle: &SaddleSpec, kappa: &Distribution, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Ok(-kappa.sample(&mut rng)?[0].abs().ln() / saddle.eigenvalues[0]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DiffusionSpec;

    fn saddle(eigenvalues: Vec<f64>, nu: usize) -> SaddleSpec {
        let d = eigenvalues.len();
        SaddleSpec {
            id: 0,
            name: "s".into(),
            position: Vector::zeros(d),
            eigenvalues,
            eigenvectors: Matrix::identity(d, d),
            nu,
            radius: 1.0,
        }
    }

    #[test]
    fn linear_saddle_closed_forms() {
        let s = saddle(vec![1.0, -2.0], 2);
        let sigma = DiffusionSpec::identity(2);
        assert_eq!(stable_cov(&s, &sigma, &Vector::from_vec(vec![0.0, 1.0]))[(0, 0)], 0.5);
        assert_eq!(unstable_cov(&s, &sigma, Sign::Plus)[(0, 0)], 0.25);
        assert_eq!(unstable_cov(&s, &sigma, Sign::Minus), unstable_cov(&s, &sigma, Sign::Plus));
    }

    #[test]
    fn scaling_noise_scales_covariances_quadratically() {
        let s = saddle(vec![1.0, -2.0], 2);
        let y0 = Vector::from_vec(vec![0.0, 1.0]);
        let a = stable_cov(&s, &DiffusionSpec::identity(2), &y0);
        let b = stable_cov(&s, &DiffusionSpec::identity(2).scaled(3.0), &y0);
        assert!((b - a * 9.0).amax() < 1e-15);
    }

    #[test]
    fn beta_cases() {
        let markov = saddle(vec![0.5, -1.0, -2.0], 2);
        assert_eq!(beta_exponent(&markov, 1.0), (1.0, ExitCase::OneUnstableNoise));
        let cycling = saddle(vec![0.5, -0.2, -2.0], 2);
        let (b, c) = beta_exponent(&cycling, 1.0);
        assert!((b - 0.4).abs() < 1e-15);
        assert_eq!(c, ExitCase::OneUnstableEtaMinus);
        let high = saddle(vec![2.0, 1.0, -0.5], 3);
        assert_eq!(beta_exponent(&high, 1.0), (0.25, ExitCase::MultiUnstableEtaMinus));
        let plus = saddle(vec![2.0, 1.0, -3.0], 3);
        assert_eq!(beta_exponent(&plus, 0.8), (0.4, ExitCase::MultiUnstableEtaPlus));
        let edge = saddle(vec![2.0, 1.0, -1.0], 3);
        assert_eq!(beta_exponent(&edge, 1.0), (0.5, ExitCase::MultiUnstableBoundary));
        let planar_edge = saddle(vec![1.0, -1.0], 2);
        assert_eq!(beta_exponent(&planar_edge, 1.0), (1.0, ExitCase::OneUnstableBoundary));
    }

    #[test]
    fn beta_is_in_unit_interval() {
        for l2 in [0.1, 0.5, 0.9] {
            for ln in [-0.1, -0.5, -1.0, -3.0] {
                let s = saddle(vec![1.0, l2, ln], 3);
                for alpha in [0.1, 0.5, 1.0] {
                    let (b, _) = beta_exponent(&s, alpha);
                    assert!(b > 0.0 && b <= 1.0, "beta {b} for l2={l2} ln={ln} alpha={alpha}");
                }
            }
        }
    }

    #[test]
    fn split_fast_paths() {
        let g = Distribution::Gaussian(Gaussian::centered(Matrix::identity(1, 1)));
        assert_eq!(split_probabilities(&g, 10, 0).unwrap().p_plus, 0.5);
        let emp = Distribution::Empirical([-1.0, -1.0, 1.0, 1.0].iter().map(|v| Vector::from_vec(vec![*v])).collect());
        let s = split_probabilities(&emp, 100_000, 4).unwrap();
        assert!((s.p_plus - 0.5).abs() < 4.0 * s.stderr);
        let half_normal = Distribution::Eta(EtaLaw {
            kappa: Box::new(g),
            sign: Sign::Plus,
            terms: vec![EtaTerm { scale: 1.0, exponent: 1.0, direction: Vector::from_vec(vec![1.0]), times_kappa2: false }],
        });
        assert_eq!(split_probabilities(&half_normal, 10, 0).unwrap().p_plus, 1.0);
        assert!(split_probabilities(&Distribution::Dirac(Vector::zeros(1)), 10, 0).unwrap().exact);
    }

    #[test]
    fn atom_at_zero_is_rejected() {
        let emp = Distribution::Empirical(vec![Vector::zeros(1), Vector::from_vec(vec![1.0])]);
        assert!(matches!(split_probabilities(&emp, 1000, 1), Err(Error::InvalidEntrance(_))));
    }

    #[test]
    fn kappa_with_and_without_n0() {
        let s = saddle(vec![1.0, -2.0], 2);
        let sigma = DiffusionSpec::identity(2);
        let point = Vector::from_vec(vec![0.0, 1.0]);
        let e = EntranceData { point: point.clone(), alpha: 1.0, mu: Distribution::Dirac(Vector::zeros(2)) };
        let k = kappa_dist(&s, &sigma, &e).unwrap();
        assert!(matches!(&k, Distribution::Sum(p) if p.len() == 2));
        assert_eq!(k.tag(), super::super::SymmetryTag::Symmetric);
        let g = Distribution::Gaussian(Gaussian::centered(Matrix::identity(2, 2)));
        let e = EntranceData { point, alpha: 0.5, mu: g };
        assert!(matches!(kappa_dist(&s, &sigma, &e).unwrap(), Distribution::Gaussian(_)));
    }

    #[test]
    fn degenerate_entrance_is_rejected() {
        let s = saddle(vec![1.0, -2.0], 2);
        let sigma = DiffusionSpec::identity(2);
        let e = EntranceData {
            point: Vector::from_vec(vec![0.0, 1.0]),
            alpha: 0.5,
            mu: Distribution::Dirac(Vector::from_vec(vec![0.0, 3.0])),
        };
        assert!(matches!(kappa_dist(&s, &sigma, &e), Err(Error::InvalidEntrance(_))));
    }
}
