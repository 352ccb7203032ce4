//! Drift and diffusion coefficients.

use serde::{Deserialize, Serialize};

use crate::linalg::{serde_rows, Matrix};

/// Smooth drift `b` of `dX = b(X) dt + ε σ(X) dW`.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn drift(&self, x: &[f64], out: &mut [f64]);
    /// Writes `Db(x)` into `out` (d×d).
    fn jacobian(&self, x: &[f64], out: &mut Matrix);
}

/// Diffusion coefficient `σ`, a d×m matrix field.
pub trait NoiseField: Sync {
    fn dim(&self) -> usize;
    fn noise_dim(&self) -> usize;
    fn sigma(&self, x: &[f64], out: &mut Matrix);
    /// Constant coefficients allow closed-form covariance integrals.
    fn constant(&self) -> Option<&Matrix> {
        None
    }
}

/// Drift families that can be stored in a network file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    /// `b_i = x_i (1 + a1 x_i² + a2 x_{i+1}² + a3 x_{i+2}²)`, indices cyclic in R³.
    KrupaCubic { a: [f64; 3] },
    /// `b = A x`.
    Linear {
        #[serde(with = "serde_rows::matrix")]
        matrix: Matrix,
    },
}

impl VectorField for FieldSpec {
    fn dim(&self) -> usize {
        match self {
            FieldSpec::KrupaCubic { .. } => 3,
            FieldSpec::Linear { matrix } => matrix.nrows(),
        }
    }

    #[inline]
    fn drift(&self, x: &[f64], out: &mut [f64]) {
        match self {
            FieldSpec::KrupaCubic { a } => {
                let sq = [x[0] * x[0], x[1] * x[1], x[2] * x[2]];
                for i in 0..3 {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    out[i] = x[i] * (1.0 + a[0] * sq[i] + a[1] * sq[j] + a[2] * sq[k]);
                }
            }
            FieldSpec::Linear { matrix } => {
                let d = matrix.nrows();
                for (i, o) in out.iter_mut().enumerate().take(d) {
                    *o = (0..d).map(|j| matrix[(i, j)] * x[j]).sum();
                }
            }
        }
    }

    fn jacobian(&self, x: &[f64], out: &mut Matrix) {
        match self {
            FieldSpec::KrupaCubic { a } => {
                let sq = [x[0] * x[0], x[1] * x[1], x[2] * x[2]];
                for i in 0..3 {
                    let (j, k) = ((i + 1) % 3, (i + 2) % 3);
                    out[(i, i)] = 1.0 + 3.0 * a[0] * sq[i] + a[1] * sq[j] + a[2] * sq[k];
                    out[(i, j)] = 2.0 * a[1] * x[i] * x[j];
                    out[(i, k)] = 2.0 * a[2] * x[i] * x[k];
                }
            }
            FieldSpec::Linear { matrix } => out.copy_from(matrix),
        }
    }
}

/// Constant diffusion matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    #[serde(with = "serde_rows::matrix")]
    pub matrix: Matrix,
}

impl DiffusionSpec {
    pub fn identity(d: usize) -> Self {
        Self { matrix: Matrix::identity(d, d) }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { matrix: &self.matrix * c }
    }
}

impl NoiseField for DiffusionSpec {
    fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    fn noise_dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn sigma(&self, _x: &[f64], out: &mut Matrix) {
        out.copy_from(&self.matrix);
    }

    fn constant(&self) -> Option<&Matrix> {
        Some(&self.matrix)
    }
}

/// The time-reversed field `-b`.
pub struct Reversed<'a, F: ?Sized>(pub &'a F);

impl<F: VectorField + ?Sized> VectorField for Reversed<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.0.drift(x, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }

    fn jacobian(&self, x: &[f64], out: &mut Matrix) {
        self.0.jacobian(x, out);
        out.neg_mut();
    }
}
