use std::fmt;

use serde::Serialize;

use super::{Mode, NetworkSpec, SaddleSpec, Sign, Target};
use crate::linalg::Vector;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subject {
    Network,
    Saddle(usize),
    Exit(usize),
    Connection { from: usize, sign: Sign },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub subject: Subject,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }

    fn push(&mut self, subject: Subject, message: impl Into<String>) {
        self.violations.push(Violation { subject, message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            match &v.subject {
                Subject::Network => write!(f, "network")?,
                Subject::Saddle(id) => write!(f, "saddle {id}")?,
                Subject::Exit(id) => write!(f, "exit {id}")?,
                Subject::Connection { from, sign } => write!(f, "connection {from}{sign}")?,
            }
            writeln!(f, ": {}", v.message)?;
        }
        Ok(())
    }
}

const UNIT_TOL: f64 = 1e-9;
const FACE_TOL: f64 = 1e-6;

/// Lists every violated structural requirement. Never fails.
pub fn validate_network(spec: &NetworkSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    if spec.saddles.is_empty() {
        report.push(Subject::Network, "network has no saddles");
        return report;
    }
    let d = spec.dim();
    if d < 2 {
        report.push(Subject::Network, "state dimension must be at least 2");
    }
    for (idx, s) in spec.saddles.iter().enumerate() {
        check_saddle(&mut report, s, idx, d);
    }
    for (idx, e) in spec.exits.iter().enumerate() {
        if e.id != idx {
            report.push(Subject::Exit(e.id), format!("exit id {} stored at index {idx}", e.id));
        }
        if e.point.len() != d {
            report.push(Subject::Exit(e.id), "exit point has wrong dimension");
        }
    }
    check_connections(&mut report, spec, d);
    match spec.mode {
        Mode::Concrete => check_concrete(&mut report, spec, d),
        Mode::Abstract => check_abstract(&mut report, spec),
    }
    report
}

fn check_saddle(report: &mut ValidationReport, s: &SaddleSpec, idx: usize, d: usize) {
    let subject = Subject::Saddle(s.id);
    if s.id != idx {
        report.push(subject.clone(), format!("saddle id {} stored at index {idx}", s.id));
    }
    if s.position.len() != d {
        report.push(subject.clone(), "position has wrong dimension");
    }
    let lam = &s.eigenvalues;
    if lam.len() != d {
        report.push(subject.clone(), format!("expected {d} eigenvalues, found {}", lam.len()));
        return;
    }
    if lam.iter().any(|l| !l.is_finite() || *l == 0.0) {
        report.push(subject.clone(), "eigenvalues must be finite and nonzero");
    }
    if lam.windows(2).any(|w| w[0] <= w[1]) {
        report.push(subject.clone(), "eigenvalues not strictly decreasing");
    }
    if !(2..=d).contains(&s.nu) {
        report.push(subject.clone(), format!("nu = {} outside 2..={d}", s.nu));
    } else if !(lam[s.nu - 2] > 0.0 && lam[s.nu - 1] < 0.0) {
        report.push(subject.clone(), "nu is not the index of the first negative eigenvalue");
    }
    let v = &s.eigenvectors;
    if v.nrows() != d || v.ncols() != d {
        report.push(subject.clone(), "eigenvector matrix has wrong shape");
    } else {
        if v.column_iter().any(|c| (c.norm() - 1.0).abs() > UNIT_TOL) {
            report.push(subject.clone(), "eigenvectors must have unit norm");
        }
        if v.determinant().abs() < 1e-12 {
            report.push(subject.clone(), "eigenvector matrix is singular");
        }
    }
    if !(s.radius.is_finite() && s.radius > 0.0) {
        report.push(subject, "radius must be positive");
    }
}

fn check_connections(report: &mut ValidationReport, spec: &NetworkSpec, d: usize) {
    for s in &spec.saddles {
        for sign in Sign::BOTH {
            let n = spec.connections.iter().filter(|c| c.from == s.id && c.sign == sign).count();
            if n != 1 {
                report.push(
                    Subject::Saddle(s.id),
                    format!("expected exactly one {sign} connection, found {n}"),
                );
            }
        }
    }
    for c in &spec.connections {
        let subject = Subject::Connection { from: c.from, sign: c.sign };
        if c.from >= spec.saddles.len() {
            report.push(subject, "source saddle does not exist");
            continue;
        }
        match c.to {
            Target::Saddle(to) if to >= spec.saddles.len() => {
                report.push(subject.clone(), format!("target saddle {to} does not exist"));
            }
            Target::Exit(to) if to >= spec.exits.len() => {
                report.push(subject.clone(), format!("target exit {to} does not exist"));
            }
            Target::Saddle(_) => match c.entrance_nu_coord {
                None => report.push(subject.clone(), "entrance nu-coordinate missing"),
                Some(v) if v == 0.0 || !v.is_finite() => report.push(
                    subject.clone(),
                    "entrance nu-coordinate must be nonzero (nondegeneracy in the nu coordinate)",
                ),
                _ => {}
            },
            Target::Exit(_) => {}
        }
        for (name, m) in [("transfer", &c.transfer), ("transport covariance", &c.transport_cov)] {
            if let Some(m) = m {
                if m.nrows() != d || m.ncols() != d {
                    report.push(subject.clone(), format!("{name} has wrong shape"));
                }
            }
        }
    }
}

fn check_concrete(report: &mut ValidationReport, spec: &NetworkSpec, d: usize) {
    use crate::field::{NoiseField, VectorField};
    match &spec.field {
        None => report.push(Subject::Network, "concrete network without a vector field"),
        Some(f) if f.dim() != d => report.push(Subject::Network, "vector field dimension mismatch"),
        _ => {}
    }
    match &spec.diffusion {
        None => report.push(Subject::Network, "concrete network without a diffusion matrix"),
        Some(s) if s.dim() != d => report.push(Subject::Network, "diffusion dimension mismatch"),
        _ => {}
    }
    for c in &spec.connections {
        let subject = Subject::Connection { from: c.from, sign: c.sign };
        let (Some(h), Some(x), Some(phi)) = (c.travel_time, &c.entry_point, &c.fundamental_matrix) else {
            report.push(subject, "connection geometry not populated");
            continue;
        };
        if !(h >= 0.0) {
            report.push(subject.clone(), "negative travel time");
        }
        if phi.nrows() != d || phi.ncols() != d {
            report.push(subject.clone(), "fundamental matrix has wrong shape");
        }
        if let Target::Saddle(to) = c.to {
            if let Some(target) = spec.saddles.get(to) {
                if let Ok(chart) = target.chart() {
                    let gap = chart.face(x.as_slice());
                    if gap.abs() > FACE_TOL * target.radius {
                        report.push(subject, "entry point is not on the boundary of the target box");
                    }
                }
            }
        }
    }
    for i in 0..spec.saddles.len() {
        for j in i + 1..spec.saddles.len() {
            if !boxes_disjoint(&spec.saddles[i], &spec.saddles[j]) {
                report.push(
                    Subject::Saddle(i),
                    format!("box around saddle {i} may overlap the box around saddle {j}"),
                );
            }
        }
    }
}

fn check_abstract(report: &mut ValidationReport, spec: &NetworkSpec) {
    match &spec.root {
        None => report.push(Subject::Network, "abstract network without a root entrance"),
        Some(r) => {
            if r.saddle >= spec.saddles.len() {
                report.push(Subject::Network, "root saddle does not exist");
            }
            if r.entrance_nu_coord == 0.0 {
                report.push(Subject::Network, "root entrance nu-coordinate must be nonzero");
            }
        }
    }
}

/// Separating-axis test for the two parallelepipeds `{z + V y : |y|_∞ ≤ R}`.
/// Face normals are always tried; in three dimensions edge cross products too,
/// which makes the test exact there and in the plane.
fn boxes_disjoint(a: &SaddleSpec, b: &SaddleSpec) -> bool {
    let d = a.dim();
    let mut axes: Vec<Vector> = Vec::new();
    for s in [a, b] {
        if let Some(inv) = s.eigenvectors.clone().try_inverse() {
            axes.extend(inv.row_iter().map(|r| r.transpose()));
        }
    }
    if d == 3 {
        for i in 0..3 {
            for j in 0..3 {
                let u = a.eigenvectors.column(i);
                let v = b.eigenvectors.column(j);
                let n = u.cross(&v);
                if n.norm() > 1e-12 {
                    axes.push(n.into_owned());
                }
            }
        }
    }
    let half_width = |s: &SaddleSpec, n: &Vector| -> f64 {
        s.radius * (0..d).map(|k| n.dot(&s.eigenvectors.column(k)).abs()).sum::<f64>()
    };
    axes.iter().any(|n| {
        let gap = (n.dot(&a.position) - n.dot(&b.position)).abs();
        gap > half_width(a, n) + half_width(b, n)
    })
}
