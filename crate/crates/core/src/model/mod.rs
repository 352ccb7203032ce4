//! Heteroclinic network specifications.
//!
//! A network is a list of hyperbolic saddles, each with an affine eigen-chart
//! `y = V⁻¹(x − z)` and a box `max_k |y^k| ≤ R`, plus two outgoing
//! connections per saddle (one for each sign of the unstable direction).
//! Connections end either at another saddle or at an exit leaf.

mod builtin;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DiffusionSpec, FieldSpec};
use crate::linalg::{serde_rows, Matrix, Vector};

pub use builtin::{builtin_system, default_x0, Params, BUILTIN_NAMES};
pub use validate::{validate_network, Subject, ValidationReport, Violation};

/// Points with `max_k |y^k|` above this multiple of `R` are outside the chart domain.
pub const CHART_DOMAIN_SCALE: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Minus, Sign::Plus];

    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn of(v: f64) -> Sign {
        if v < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Minus => '-',
            Sign::Plus => '+',
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Abstract,
    Concrete,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaddleSpec {
    pub id: usize,
    #[serde(default)]
    pub name: String,
    #[serde(with = "serde_rows::vector")]
    pub position: Vector,
    /// Sorted strictly decreasing.
    pub eigenvalues: Vec<f64>,
    /// Unit eigenvectors as columns, in eigenvalue order.
    #[serde(with = "serde_rows::matrix")]
    pub eigenvectors: Matrix,
    /// 1-based index of the first negative eigenvalue.
    pub nu: usize,
    pub radius: f64,
}

/// Affine eigen-chart of one saddle with its inverse cached.
#[derive(Clone, Debug)]
pub struct Chart {
    pub origin: Vector,
    pub basis: Matrix,
    pub inverse: Matrix,
    pub radius: f64,
}

impl Chart {
    /// Local coordinates without the domain check.
    pub fn local(&self, x: &Vector) -> Vector {
        &self.inverse * (x - &self.origin)
    }

    pub fn ambient(&self, y: &Vector) -> Vector {
        &self.origin + &self.basis * y
    }

    /// `max_k |y^k| − R`: negative inside the box, zero on its boundary.
    pub fn face(&self, x: &[f64]) -> f64 {
        let d = self.origin.len();
        let mut m: f64 = 0.0;
        for k in 0..d {
            let mut y = 0.0;
            for j in 0..d {
                y += self.inverse[(k, j)] * (x[j] - self.origin[j]);
            }
            m = m.max(y.abs());
        }
        m - self.radius
    }

    /// Local coordinate `k` (0-based) of `x`.
    #[inline]
    pub fn coord(&self, k: usize, x: &[f64]) -> f64 {
        let d = self.origin.len();
        let mut y = 0.0;
        for j in 0..d {
            y += self.inverse[(k, j)] * (x[j] - self.origin[j]);
        }
        y
    }
}

impl SaddleSpec {
    pub fn dim(&self) -> usize {
        self.position.len()
    }

    pub fn lambda(&self, k: usize) -> f64 {
        self.eigenvalues[k - 1]
    }

    pub fn lambda_nu(&self) -> f64 {
        self.eigenvalues[self.nu - 1]
    }

    pub fn label(&self) -> String {
        if self.name.is_empty() {
            format!("s{}", self.id)
        } else {
            self.name.clone()
        }
    }

    pub fn chart(&self) -> Result<Chart> {
        let inverse = self
            .eigenvectors
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParams(format!("saddle {}: singular eigenvector matrix", self.id)))?;
        Ok(Chart {
            origin: self.position.clone(),
            basis: self.eigenvectors.clone(),
            inverse,
            radius: self.radius,
        })
    }

    /// `q^± = z ± R v_1`, the exit point on the unstable axis.
    pub fn exit_point(&self, sign: Sign) -> Vector {
        &self.position + self.eigenvectors.column(0) * (sign.value() * self.radius)
    }
}

/// `y = V⁻¹(x − z)`, rejecting points outside the chart domain.
pub fn chart_to_local(saddle: &SaddleSpec, x: &Vector) -> Result<Vector> {
    let y = saddle.chart()?.local(x);
    if y.amax() > CHART_DOMAIN_SCALE * saddle.radius {
        return Err(Error::OutOfChartDomain { saddle: saddle.id });
    }
    Ok(y)
}

/// `x = z + V y`.
pub fn chart_from_local(saddle: &SaddleSpec, y: &Vector) -> Vector {
    &saddle.position + &saddle.eigenvectors * y
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExitLeaf {
    pub id: usize,
    #[serde(default)]
    pub name: String,
    #[serde(with = "serde_rows::vector")]
    pub point: Vector,
}

impl ExitLeaf {
    pub fn label(&self) -> String {
        if self.name.is_empty() {
            format!("y{}", self.id)
        } else {
            self.name.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Saddle(usize),
    Exit(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectionSpec {
    pub from: usize,
    pub sign: Sign,
    pub to: Target,
    /// Time from `q^±` to the first entry into the target box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub travel_time: Option<f64>,
    #[serde(default, with = "serde_rows::opt_vector", skip_serializing_if = "Option::is_none")]
    pub entry_point: Option<Vector>,
    /// Fundamental matrix of the variational equation along the connection.
    #[serde(default, with = "serde_rows::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub fundamental_matrix: Option<Matrix>,
    /// Covariance of the Gaussian picked up along the connection when the
    /// incoming fluctuation has exponent one.
    #[serde(default, with = "serde_rows::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub transport_cov: Option<Matrix>,
    /// Abstract networks only: linear map from source-local to target-local coordinates.
    #[serde(default, with = "serde_rows::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub transfer: Option<Matrix>,
    /// Coordinate `ν` of the entry point in the target chart.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entrance_nu_coord: Option<f64>,
}

impl ConnectionSpec {
    pub fn new(from: usize, sign: Sign, to: Target) -> Self {
        Self {
            from,
            sign,
            to,
            travel_time: None,
            entry_point: None,
            fundamental_matrix: None,
            transport_cov: None,
            transfer: None,
            entrance_nu_coord: None,
        }
    }
}

/// Root entrance of an abstract network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootSpec {
    pub saddle: usize,
    pub entrance_nu_coord: f64,
    #[serde(default, with = "serde_rows::opt_matrix", skip_serializing_if = "Option::is_none")]
    pub cov: Option<Matrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub saddles: Vec<SaddleSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exits: Vec<ExitLeaf>,
    #[serde(default)]
    pub connections: Vec<ConnectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<RootSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<DiffusionSpec>,
}

impl NetworkSpec {
    pub fn dim(&self) -> usize {
        self.saddles.first().map_or(0, SaddleSpec::dim)
    }

    pub fn saddle(&self, id: usize) -> &SaddleSpec {
        &self.saddles[id]
    }

    pub fn exit(&self, id: usize) -> &ExitLeaf {
        &self.exits[id]
    }

    pub fn connection(&self, from: usize, sign: Sign) -> Option<&ConnectionSpec> {
        self.connections.iter().find(|c| c.from == from && c.sign == sign)
    }

    pub fn connection_mut(&mut self, from: usize, sign: Sign) -> Option<&mut ConnectionSpec> {
        self.connections.iter_mut().find(|c| c.from == from && c.sign == sign)
    }

    pub fn saddle_by_name(&self, name: &str) -> Option<&SaddleSpec> {
        self.saddles.iter().find(|s| s.name == name)
    }

    pub fn charts(&self) -> Result<Vec<Chart>> {
        self.saddles.iter().map(SaddleSpec::chart).collect()
    }

    pub fn min_radius(&self) -> f64 {
        self.saddles.iter().map(|s| s.radius).fold(f64::INFINITY, f64::min)
    }

    /// Largest eigenvalue magnitude over all saddles.
    pub fn max_rate(&self) -> f64 {
        self.saddles
            .iter()
            .flat_map(|s| s.eigenvalues.iter())
            .fold(0.0_f64, |m, l| m.max(l.abs()))
    }

    pub fn require_concrete(&self) -> Result<(&FieldSpec, &DiffusionSpec)> {
        match (self.mode, &self.field, &self.diffusion) {
            (Mode::Concrete, Some(f), Some(s)) => Ok((f, s)),
            _ => Err(Error::ModeMismatch { expected: "concrete" }),
        }
    }

    /// Copy with the diffusion matrix multiplied by `c` and connection data recomputed.
    pub fn with_noise_scale(&self, c: f64) -> Result<NetworkSpec> {
        let mut spec = self.clone();
        match self.mode {
            Mode::Concrete => {
                let d = spec.diffusion.as_ref().ok_or(Error::ModeMismatch { expected: "concrete" })?;
                spec.diffusion = Some(d.scaled(c));
                crate::flow::populate_connections(&mut spec, &crate::flow::FlowConfig::default())?;
            }
            Mode::Abstract => {
                for conn in &mut spec.connections {
                    if let Some(cov) = &mut conn.transport_cov {
                        *cov *= c * c;
                    }
                }
                if let Some(root) = &mut spec.root {
                    if let Some(cov) = &mut root.cov {
                        *cov *= c * c;
                    }
                }
            }
        }
        Ok(spec)
    }

    /// Abstract copy carrying the same eigen-data and the local transfer maps
    /// of a populated concrete network.
    pub fn to_abstract(&self, x0: &Vector) -> Result<NetworkSpec> {
        self.require_concrete()?;
        let charts = self.charts()?;
        let entrance = crate::flow::initial_entrance(self, x0, &crate::flow::FlowConfig::default())?;
        let mut spec = self.clone();
        spec.mode = Mode::Abstract;
        spec.field = None;
        spec.diffusion = None;
        let root_chart = &charts[entrance.saddle];
        let y0 = root_chart.local(&entrance.entrance.point);
        let cov = match &entrance.entrance.mu {
            crate::exitmap::Distribution::Gaussian(g) => g.cov.clone(),
            _ => unreachable!("initial entrance is Gaussian"),
        };
        let nu = self.saddles[entrance.saddle].nu;
        spec.root = Some(RootSpec {
            saddle: entrance.saddle,
            entrance_nu_coord: y0[nu - 1],
            cov: Some(&root_chart.inverse * cov * root_chart.inverse.transpose()),
        });
        for (conn, orig) in spec.connections.iter_mut().zip(&self.connections) {
            if let Target::Saddle(to) = orig.to {
                let phi = orig
                    .fundamental_matrix
                    .as_ref()
                    .ok_or(Error::ModeMismatch { expected: "populated concrete" })?;
                let src = &charts[orig.from];
                let dst = &charts[to];
                conn.transfer = Some(&dst.inverse * phi * &src.basis);
                conn.transport_cov = orig
                    .transport_cov
                    .as_ref()
                    .map(|c| &dst.inverse * c * dst.inverse.transpose());
            }
            conn.fundamental_matrix = None;
        }
        for s in &mut spec.saddles {
            s.eigenvectors = Matrix::identity(s.dim(), s.dim());
        }
        Ok(spec)
    }

    /// Parses a network file. Files naming a builtin without saddles are expanded.
    pub fn from_json(text: &str) -> Result<NetworkSpec> {
        let spec: NetworkSpec = serde_json::from_str(text)?;
        match (&spec.builtin, spec.saddles.is_empty()) {
            (Some(name), true) => builtin_system(name, &Params::from_json(&spec.params)?),
            _ => Ok(spec),
        }
    }

    pub fn load(path: &Path) -> Result<NetworkSpec> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
