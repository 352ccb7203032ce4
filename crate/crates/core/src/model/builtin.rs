use std::collections::BTreeMap;

use super::{ConnectionSpec, ExitLeaf, Mode, NetworkSpec, RootSpec, SaddleSpec, Sign, Target};
use crate::error::{Error, Result};
use crate::field::{DiffusionSpec, FieldSpec, VectorField};
use crate::flow::{self, FlowConfig};
use crate::linalg::{Matrix, Vector};

pub const BUILTIN_NAMES: [&str; 3] = ["krupa-cubic", "linear-saddle-2d", "cellular-2d"];

/// Scalar or keyword parameters of a shipped system.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    /// Parses `key=value` pairs separated by commas, e.g. `a1=-1,a2=-2`.
    pub fn parse(text: &str) -> Result<Params> {
        let mut map = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidParams(format!("expected key=value, got `{item}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Params(map))
    }

    pub fn from_json(map: &BTreeMap<String, serde_json::Value>) -> Result<Params> {
        let mut out = BTreeMap::new();
        for (k, v) in map {
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                other => return Err(Error::InvalidParams(format!("{k}: unsupported value {other}"))),
            };
            out.insert(k.clone(), text);
        }
        Ok(Params(out))
    }

    pub fn to_json(&self) -> BTreeMap<String, serde_json::Value> {
        self.0
            .iter()
            .map(|(k, v)| {
                let value = v
                    .parse::<f64>()
                    .ok()
                    .and_then(serde_json::Number::from_f64)
                    .map_or_else(|| serde_json::Value::String(v.clone()), serde_json::Value::Number);
                (k.clone(), value)
            })
            .collect()
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Params {
        self.0.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn number(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidParams(format!("{key}: `{v}` is not a number"))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.0.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::InvalidParams(format!("unknown parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

/// Constructs one of the shipped networks with all derived data filled in.
pub fn builtin_system(name: &str, params: &Params) -> Result<NetworkSpec> {
    let mut spec = match name {
        "krupa-cubic" => krupa_cubic(params)?,
        "linear-saddle-2d" => linear_saddle(params)?,
        "cellular-2d" => cellular(params)?,
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    spec.builtin = Some(name.to_string());
    spec.params = params.to_json();
    if spec.mode == Mode::Concrete {
        flow::populate_connections(&mut spec, &FlowConfig::default())?;
    }
    Ok(spec)
}

/// Default starting point of a concrete builtin.
pub fn default_x0(spec: &NetworkSpec) -> Option<Vector> {
    match spec.builtin.as_deref()? {
        "krupa-cubic" => {
            let z = spec.saddle_by_name("z1+")?;
            flow::orbit_anchor(spec, z.id, Sign::Plus, 0.5, &FlowConfig::default()).ok()
        }
        "linear-saddle-2d" => Some(Vector::from_vec(vec![0.0, 1.0])),
        _ => None,
    }
}

/// Saddle data from a diagonal linearisation: eigenvalues sorted decreasing,
/// eigenvectors the matching coordinate axes.
fn diagonal_saddle(id: usize, name: String, position: Vector, jac: &Matrix, radius: f64) -> Result<SaddleSpec> {
    let d = position.len();
    let off_diag = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .map(|(i, j)| jac[(i, j)].abs())
        .fold(0.0, f64::max);
    if off_diag > 1e-12 {
        return Err(Error::InvalidParams(format!("{name}: linearisation is not diagonal")));
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| jac[(j, j)].total_cmp(&jac[(i, i)]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| jac[(i, i)]).collect();
    let mut eigenvectors = Matrix::zeros(d, d);
    for (col, &axis) in order.iter().enumerate() {
        eigenvectors[(axis, col)] = 1.0;
    }
    let positives = eigenvalues.iter().filter(|l| **l > 0.0).count();
    Ok(SaddleSpec { id, name, position, eigenvalues, eigenvectors, nu: positives + 1, radius })
}

fn krupa_cubic(params: &Params) -> Result<NetworkSpec> {
    params.check_keys(&["preset", "a1", "a2", "a3", "radius", "sigma_scale"])?;
    let preset = match params.get("preset").unwrap_or("markov") {
        "markov" => [-1.0, -2.0, -0.5],
        "cycling" => [-1.0, -1.2, -0.5],
        other => return Err(Error::InvalidParams(format!("unknown preset `{other}`"))),
    };
    let a = [
        params.number("a1", preset[0])?,
        params.number("a2", preset[1])?,
        params.number("a3", preset[2])?,
    ];
    if !(a[0] < 0.0 && a[2] > a[0] && a[1] < a[0]) {
        return Err(Error::InvalidParams(format!(
            "krupa-cubic needs a1 < 0, a3 > a1 and a2 < a1; got a = {a:?}"
        )));
    }
    let r = (-1.0 / a[0]).sqrt();
    let radius = params.number("radius", 0.1 * r * 2f64.sqrt())?;
    let sigma_scale = params.number("sigma_scale", 1.0)?;
    let field = FieldSpec::KrupaCubic { a };

    let mut saddles = Vec::new();
    for axis in 0..3 {
        for sign in [Sign::Plus, Sign::Minus] {
            let mut z = Vector::zeros(3);
            z[axis] = sign.value() * r;
            let mut jac = Matrix::zeros(3, 3);
            field.jacobian(z.as_slice(), &mut jac);
            let name = format!("z{}{}", axis + 1, sign);
            saddles.push(diagonal_saddle(saddles.len(), name, z, &jac, radius)?);
        }
    }
    let mut connections = Vec::new();
    for s in &saddles {
        for sign in Sign::BOTH {
            let aim = s.eigenvectors.column(0) * (sign.value() * r);
            let to = saddles
                .iter()
                .min_by(|p, q| (&p.position - &aim).norm().total_cmp(&(&q.position - &aim).norm()))
                .map(|t| t.id)
                .unwrap();
            connections.push(ConnectionSpec::new(s.id, sign, Target::Saddle(to)));
        }
    }
    Ok(NetworkSpec {
        mode: Mode::Concrete,
        builtin: None,
        params: BTreeMap::new(),
        saddles,
        exits: Vec::new(),
        connections,
        root: None,
        field: Some(field),
        diffusion: Some(DiffusionSpec::identity(3).scaled(sigma_scale)),
    })
}

fn linear_saddle(params: &Params) -> Result<NetworkSpec> {
    params.check_keys(&["lambda1", "lambda2", "radius", "sigma_scale"])?;
    let l1 = params.number("lambda1", 1.0)?;
    let l2 = params.number("lambda2", -2.0)?;
    if !(l1 > 0.0 && l2 < 0.0) {
        return Err(Error::InvalidParams("linear-saddle-2d needs lambda1 > 0 > lambda2".into()));
    }
    let radius = params.number("radius", 1.0)?;
    let sigma_scale = params.number("sigma_scale", 1.0)?;
    let a = Matrix::from_diagonal(&Vector::from_vec(vec![l1, l2]));
    let saddle = diagonal_saddle(0, "z".into(), Vector::zeros(2), &a, radius)?;
    let exits = vec![
        ExitLeaf { id: 0, name: "y-".into(), point: saddle.exit_point(Sign::Minus) },
        ExitLeaf { id: 1, name: "y+".into(), point: saddle.exit_point(Sign::Plus) },
    ];
    let connections = vec![
        ConnectionSpec::new(0, Sign::Minus, Target::Exit(0)),
        ConnectionSpec::new(0, Sign::Plus, Target::Exit(1)),
    ];
    Ok(NetworkSpec {
        mode: Mode::Concrete,
        builtin: None,
        params: BTreeMap::new(),
        saddles: vec![saddle],
        exits,
        connections,
        root: None,
        field: Some(FieldSpec::Linear { matrix: a }),
        diffusion: Some(DiffusionSpec::identity(2).scaled(sigma_scale)),
    })
}

fn cellular(params: &Params) -> Result<NetworkSpec> {
    params.check_keys(&["regime", "lambda1", "lambda2", "radius", "sigma_scale"])?;
    let default_l2 = match params.get("regime").unwrap_or("contraction") {
        "contraction" => -2.0,
        "expansion" => -0.5,
        "boundary" => -1.0,
        other => return Err(Error::InvalidParams(format!("unknown regime `{other}`"))),
    };
    let l1 = params.number("lambda1", 1.0)?;
    let l2 = params.number("lambda2", default_l2 * l1)?;
    if !(l1 > 0.0 && l2 < 0.0) {
        return Err(Error::InvalidParams("cellular-2d needs lambda1 > 0 > lambda2".into()));
    }
    let radius = params.number("radius", 0.25)?;
    let noise = params.number("sigma_scale", 1.0)?.powi(2);
    let saddles: Vec<SaddleSpec> = (0..3)
        .map(|i| SaddleSpec {
            id: i,
            name: format!("z{}", i + 1),
            position: Vector::from_vec(vec![i as f64, 0.0]),
            eigenvalues: vec![l1, l2],
            eigenvectors: Matrix::identity(2, 2),
            nu: 2,
            radius,
        })
        .collect();
    let exit_points = [[0.0, -1.0], [1.0, -1.0], [2.0, -1.0], [3.0, 0.0]];
    let exits = exit_points
        .iter()
        .enumerate()
        .map(|(i, p)| ExitLeaf { id: i, name: format!("y{}", i + 1), point: Vector::from_row_slice(p) })
        .collect();
    // the stable coordinate of one saddle feeds the unstable coordinate of the next
    let transfer = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let mut connections = Vec::new();
    for i in 0..3 {
        connections.push(ConnectionSpec::new(i, Sign::Minus, Target::Exit(i)));
        let plus = if i < 2 {
            let mut c = ConnectionSpec::new(i, Sign::Plus, Target::Saddle(i + 1));
            c.transfer = Some(transfer.clone());
            c.transport_cov = Some(Matrix::identity(2, 2) * noise);
            c.entrance_nu_coord = Some(radius);
            c
        } else {
            ConnectionSpec::new(i, Sign::Plus, Target::Exit(3))
        };
        connections.push(plus);
    }
    Ok(NetworkSpec {
        mode: Mode::Abstract,
        builtin: None,
        params: BTreeMap::new(),
        saddles,
        exits,
        connections,
        root: Some(RootSpec { saddle: 0, entrance_nu_coord: radius, cov: Some(Matrix::identity(2, 2) * noise) }),
        field: None,
        diffusion: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn krupa_markov_saddles() {
        let spec = builtin_system("krupa-cubic", &Params::default()).unwrap();
        assert_eq!(spec.saddles.len(), 6);
        for s in &spec.saddles {
            assert_eq!(s.eigenvalues, vec![0.5, -1.0, -2.0]);
            assert_eq!(s.nu, 2);
            assert!((s.position.norm() - 1.0).abs() < 1e-15);
        }
        assert!((spec.saddles[0].radius - 0.1 * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn krupa_cycling_eigenvalues() {
        let spec = builtin_system("krupa-cubic", &Params::default().with("preset", "cycling")).unwrap();
        let lam = &spec.saddles[3].eigenvalues;
        for (l, e) in lam.iter().zip([0.5, -0.2, -2.0]) {
            assert!((l - e).abs() < 1e-12);
        }
    }

    #[test]
    fn krupa_topology_follows_the_unstable_axis() {
        let spec = builtin_system("krupa-cubic", &Params::default()).unwrap();
        let name = |t: Target| match t {
            Target::Saddle(i) => spec.saddles[i].name.clone(),
            Target::Exit(_) => unreachable!(),
        };
        let z1 = spec.saddle_by_name("z1-").unwrap().id;
        assert_eq!(name(spec.connection(z1, Sign::Plus).unwrap().to), "z2+");
        assert_eq!(name(spec.connection(z1, Sign::Minus).unwrap().to), "z2-");
        let z3 = spec.saddle_by_name("z3+").unwrap().id;
        assert_eq!(name(spec.connection(z3, Sign::Minus).unwrap().to), "z1-");
    }

    #[test]
    fn saddle_conditions_are_enforced() {
        let bad = Params::default().with("a3", -1.5);
        assert!(matches!(builtin_system("krupa-cubic", &bad), Err(Error::InvalidParams(_))));
        assert!(matches!(builtin_system("lorenz", &Params::default()), Err(Error::UnknownSystem(_))));
    }

    #[test]
    fn linear_saddle_has_identity_noise() {
        let spec = builtin_system("linear-saddle-2d", &Params::default()).unwrap();
        assert_eq!(spec.saddles.len(), 1);
        assert_eq!(spec.saddles[0].position.amax(), 0.0);
        assert_eq!(spec.diffusion.unwrap().matrix, Matrix::identity(2, 2));
    }

    #[test]
    fn cellular_topology() {
        let spec = builtin_system("cellular-2d", &Params::default()).unwrap();
        assert_eq!(spec.mode, Mode::Abstract);
        let targets: Vec<Target> = (0..3)
            .flat_map(|i| Sign::BOTH.map(|s| spec.connection(i, s).unwrap().to))
            .collect();
        assert_eq!(
            targets,
            vec![
                Target::Exit(0),
                Target::Saddle(1),
                Target::Exit(1),
                Target::Saddle(2),
                Target::Exit(2),
                Target::Exit(3)
            ]
        );
    }

    #[test]
    fn params_parsing() {
        let p = Params::parse("a1=-1, a2=-2.5,preset=cycling").unwrap();
        assert_eq!(p.number("a2", 0.0).unwrap(), -2.5);
        assert_eq!(p.get("preset"), Some("cycling"));
        assert!(Params::parse("a1").is_err());
    }
}
