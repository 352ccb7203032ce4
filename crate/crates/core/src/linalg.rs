//! Dense linear-algebra aliases and helpers shared across modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Builds a matrix from row slices. Panics on ragged input.
pub fn from_rows(rows: &[Vec<f64>]) -> Matrix {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    assert!(rows.iter().all(|r| r.len() == ncols), "ragged matrix rows");
    Matrix::from_fn(nrows, ncols, |i, j| rows[i][j])
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Square root factor `L` with `L Lᵀ = c` for a symmetric positive
/// semidefinite `c`. Small negative eigenvalues from round-off are clamped.
pub fn psd_sqrt(c: &Matrix) -> Matrix {
    let sym = (c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&roots)
}

/// True when `c` is symmetric to `tol` and has no eigenvalue below `-tol`.
pub fn is_psd(c: &Matrix, tol: f64) -> bool {
    if !c.is_square() {
        return false;
    }
    let scale = c.amax().max(1.0);
    if (c - c.transpose()).amax() > tol * scale {
        return false;
    }
    SymmetricEigen::new(c.clone())
        .eigenvalues
        .iter()
        .all(|&l| l >= -tol * scale)
}

/// Serde adaptors: vectors as flat arrays, matrices as arrays of rows.
pub mod serde_rows {
    use super::{from_rows, to_rows, Matrix, Vector};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub mod vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
            v.as_slice().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
            Ok(Vector::from_vec(Vec::<f64>::deserialize(d)?))
        }
    }

    pub mod opt_vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<Vector>, s: S) -> Result<S::Ok, S::Error> {
            v.as_ref().map(|v| v.as_slice().to_vec()).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vector>, D::Error> {
            Ok(Option::<Vec<f64>>::deserialize(d)?.map(Vector::from_vec))
        }
    }

    fn parse(rows: Vec<Vec<f64>>) -> Result<Matrix, String> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err("matrix rows have different lengths".into());
        }
        Ok(from_rows(&rows))
    }

    pub mod matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
            to_rows(m).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
            parse(Vec::<Vec<f64>>::deserialize(d)?).map_err(D::Error::custom)
        }
    }

    pub mod opt_matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(to_rows).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix>, D::Error> {
            match Option::<Vec<Vec<f64>>>::deserialize(d)? {
                Some(rows) => parse(rows).map(Some).map_err(D::Error::custom),
                None => Ok(None),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_sqrt_reproduces_covariance() {
        let c = from_rows(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.2], vec![0.0, 0.2, 0.3]]);
        let l = psd_sqrt(&c);
        assert!((&l * l.transpose() - &c).amax() < 1e-12);
        assert!(is_psd(&c, 1e-12));
    }

    #[test]
    fn psd_sqrt_of_singular_matrix() {
        let c = from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let l = psd_sqrt(&c);
        assert!((&l * l.transpose() - &c).amax() < 1e-12);
    }

    #[test]
    fn rows_round_trip() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let m = from_rows(&rows);
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(to_rows(&m), rows);
    }
}
