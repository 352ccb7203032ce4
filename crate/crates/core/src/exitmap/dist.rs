//! Distributions of rescaled fluctuations.
//!
//! The variants are closed under the operations the exit map needs:
//! linear images, independent sums, sign conditioning on `κ¹` and power-law
//! transforms of `|κ¹|`. Every variant can be sampled; a structural symmetry
//! tag lets branch probabilities be decided without sampling when possible.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, Matrix, Vector};
use crate::model::Sign;

/// Attempts allowed when sampling `κ` conditioned on the sign of `κ¹`.
const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Clone, Debug)]
pub struct Gaussian {
    pub mean: Vector,
    pub cov: Matrix,
    factor: Matrix,
}

impl Gaussian {
    pub fn new(mean: Vector, cov: Matrix) -> Self {
        let cov = (&cov + cov.transpose()) * 0.5;
        let factor = psd_sqrt(&cov);
        Self { mean, cov, factor }
    }

    pub fn centered(cov: Matrix) -> Self {
        Self::new(Vector::zeros(cov.nrows()), cov)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let z = Vector::from_fn(self.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.factor * z
    }
}

/// One term `c |κ¹|^e v` (or `c |κ¹|^e κ² v`) of an exit law.
#[derive(Clone, Debug)]
pub struct EtaTerm {
    pub scale: f64,
    pub exponent: f64,
    pub direction: Vector,
    pub times_kappa2: bool,
}

/// Sum of η-terms driven by one draw of `κ` conditioned on `sgn κ¹`.
#[derive(Clone, Debug)]
pub struct EtaLaw {
    pub kappa: Box<Distribution>,
    pub sign: Sign,
    pub terms: Vec<EtaTerm>,
}

impl EtaLaw {
    fn dim(&self) -> usize {
        self.terms[0].direction.len()
    }

    pub fn sample_kappa<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        for _ in 0..MAX_REJECTIONS {
            let k = self.kappa.sample(rng)?;
            if k[0] != 0.0 && Sign::of(k[0]) == self.sign {
                return Ok(k);
            }
        }
        Err(Error::InvalidEntrance(format!(
            "the {} branch has vanishing probability; cannot condition on it",
            self.sign
        )))
    }
}

/// Structural symmetry of a law.
#[derive(Clone, Debug, PartialEq)]
pub enum Symmetry {
    /// `X` and `−X` have the same law.
    Symmetric,
    /// `X` lies a.s. on the open ray `{t·d : t > 0}`.
    Ray(Vector),
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryTag {
    Symmetric,
    StronglyAsymmetric,
    General,
}

impl Symmetry {
    pub fn tag(&self) -> SymmetryTag {
        match self {
            Symmetry::Symmetric => SymmetryTag::Symmetric,
            Symmetry::Ray(_) => SymmetryTag::StronglyAsymmetric,
            Symmetry::General => SymmetryTag::General,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Distribution {
    Dirac(Vector),
    Gaussian(Gaussian),
    Eta(EtaLaw),
    /// Independent sum.
    Sum(Vec<Distribution>),
    Pushforward { map: Matrix, inner: Box<Distribution> },
    Empirical(Vec<Vector>),
}

impl Distribution {
    pub fn dim(&self) -> usize {
        match self {
            Distribution::Dirac(p) => p.len(),
            Distribution::Gaussian(g) => g.mean.len(),
            Distribution::Eta(e) => e.dim(),
            Distribution::Sum(parts) => parts[0].dim(),
            Distribution::Pushforward { map, .. } => map.nrows(),
            Distribution::Empirical(s) => s[0].len(),
        }
    }

    /// Image under the linear map `m`.
    pub fn pushforward(self, m: Matrix) -> Distribution {
        match self {
            Distribution::Dirac(p) => Distribution::Dirac(&m * p),
            Distribution::Gaussian(g) => {
                let cov = &m * &g.cov * m.transpose();
                Distribution::Gaussian(Gaussian::new(&m * &g.mean, cov))
            }
            Distribution::Pushforward { map, inner } => Distribution::Pushforward { map: m * map, inner },
            other => Distribution::Pushforward { map: m, inner: Box::new(other) },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vector> {
        Ok(match self {
            Distribution::Dirac(p) => p.clone(),
            Distribution::Gaussian(g) => g.sample(rng),
            Distribution::Eta(e) => {
                let k = e.sample_kappa(rng)?;
                let a = k[0].abs();
                let mut out = Vector::zeros(e.dim());
                for t in &e.terms {
                    let mut c = t.scale * a.powf(t.exponent);
                    if t.times_kappa2 {
                        c *= k[1];
                    }
                    out.axpy(c, &t.direction, 1.0);
                }
                out
            }
            Distribution::Sum(parts) => {
                let mut out = parts[0].sample(rng)?;
                for p in &parts[1..] {
                    out += p.sample(rng)?;
                }
                out
            }
            Distribution::Pushforward { map, inner } => map * inner.sample(rng)?,
            Distribution::Empirical(s) => s[rng.random_range(0..s.len())].clone(),
        })
    }

    pub fn symmetry(&self) -> Symmetry {
        match self {
            Distribution::Dirac(p) if p.iter().all(|v| *v == 0.0) => Symmetry::Symmetric,
            Distribution::Dirac(p) => Symmetry::Ray(p.clone()),
            Distribution::Gaussian(g) if g.mean.iter().all(|v| *v == 0.0) => Symmetry::Symmetric,
            Distribution::Gaussian(_) => Symmetry::General,
            Distribution::Eta(e) => match e.terms.as_slice() {
                [t] if !t.times_kappa2 && t.scale > 0.0 => Symmetry::Ray(t.direction.clone()),
                _ => Symmetry::General,
            },
            Distribution::Sum(parts) => {
                let tags: Vec<Symmetry> = parts.iter().map(Distribution::symmetry).collect();
                let rays: Vec<&Vector> = tags
                    .iter()
                    .filter_map(|s| match s {
                        Symmetry::Ray(d) => Some(d),
                        _ => None,
                    })
                    .collect();
                let zero_rest = parts.iter().zip(&tags).all(|(p, s)| {
                    matches!(s, Symmetry::Ray(_)) || matches!(p, Distribution::Dirac(v) if v.iter().all(|x| *x == 0.0))
                });
                if tags.iter().all(|s| *s == Symmetry::Symmetric) {
                    Symmetry::Symmetric
                } else if rays.len() == 1 && zero_rest {
                    Symmetry::Ray(rays[0].clone())
                } else {
                    Symmetry::General
                }
            }
            Distribution::Pushforward { map, inner } => match inner.symmetry() {
                // a zero image stays a (degenerate) ray so consumers can reject it
                Symmetry::Ray(d) => Symmetry::Ray(map * d),
                other => other,
            },
            Distribution::Empirical(_) => Symmetry::General,
        }
    }

    pub fn tag(&self) -> SymmetryTag {
        self.symmetry().tag()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_normal_kappa() -> Distribution {
        Distribution::Gaussian(Gaussian::centered(Matrix::identity(1, 1)))
    }

    #[test]
    fn gaussian_sample_moments() {
        let cov = Matrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let g = Gaussian::new(Vector::from_vec(vec![1.0, -1.0]), cov.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let draws: Vec<Vector> = (0..n).map(|_| g.sample(&mut rng)).collect();
        let mean = draws.iter().fold(Vector::zeros(2), |a, x| a + x) / n as f64;
        let mut c = Matrix::zeros(2, 2);
        for x in &draws {
            let e = x - &mean;
            c += &e * e.transpose();
        }
        c /= n as f64;
        assert!((mean - g.mean.clone()).amax() < 0.02);
        assert!((c - cov).amax() < 0.03);
    }

    #[test]
    fn eta_minus_law_is_a_ray() {
        let law = Distribution::Eta(EtaLaw {
            kappa: Box::new(half_normal_kappa()),
            sign: Sign::Minus,
            terms: vec![EtaTerm {
                scale: 2.0,
                exponent: 0.4,
                direction: Vector::from_vec(vec![0.0, -0.3]),
                times_kappa2: false,
            }],
        });
        let Symmetry::Ray(d) = law.symmetry() else { panic!("expected a ray") };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = law.sample(&mut rng).unwrap();
            assert_eq!(x[0], 0.0);
            assert!(x.dot(&d) > 0.0);
        }
    }

    #[test]
    fn symmetric_tag_is_honest() {
        let g = Distribution::Gaussian(Gaussian::centered(Matrix::identity(2, 2) * 0.5));
        let law = Distribution::Sum(vec![g.clone(), g]).pushforward(Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]));
        assert_eq!(law.symmetry(), Symmetry::Symmetric);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 40_000;
        let pos = (0..n).filter(|_| law.sample(&mut rng).unwrap()[0] > 0.0).count();
        assert!((pos as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn ray_survives_invertible_maps() {
        let ray = Distribution::Dirac(Vector::from_vec(vec![0.0, 1.0]));
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(ray.pushforward(m).symmetry(), Symmetry::Ray(Vector::from_vec(vec![1.0, 0.0])));
    }

    #[test]
    fn mixtures_are_general() {
        let g = Distribution::Gaussian(Gaussian::centered(Matrix::identity(1, 1)));
        let r = Distribution::Dirac(Vector::from_vec(vec![1.0]));
        assert_eq!(Distribution::Sum(vec![g, r]).tag(), SymmetryTag::General);
        assert_eq!(Distribution::Empirical(vec![Vector::zeros(1)]).tag(), SymmetryTag::General);
    }

    #[test]
    fn impossible_conditioning_is_reported() {
        let law = Distribution::Eta(EtaLaw {
            kappa: Box::new(Distribution::Dirac(Vector::from_vec(vec![1.0]))),
            sign: Sign::Minus,
            terms: vec![EtaTerm { scale: 1.0, exponent: 1.0, direction: Vector::from_vec(vec![1.0]), times_kappa2: false }],
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(law.sample(&mut rng), Err(Error::InvalidEntrance(_))));
    }
}
