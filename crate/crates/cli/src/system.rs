//! Loading systems and starting points from command-line arguments.

use std::path::Path;

use anyhow::{bail, Context};
use hetnet::flow::{orbit_anchor, FlowConfig};
use hetnet::model::{builtin_system, default_x0, validate_network, Params, BUILTIN_NAMES};
use hetnet::{NetworkSpec, Sign, Vector};

use crate::Failure;

/// A builtin name, or a path to a network file.
pub fn load_system(system: &str, params: Option<&str>) -> Result<NetworkSpec, Failure> {
    let params = Params::parse(params.unwrap_or("")).map_err(Failure::usage)?;
    let spec = if BUILTIN_NAMES.contains(&system) {
        builtin_system(system, &params).map_err(Failure::validation)?
    } else if Path::new(system).exists() {
        load_file(Path::new(system), &params)?
    } else {
        return Err(Failure::usage(anyhow::anyhow!(
            "`{system}` is neither a builtin ({}) nor a network file",
            BUILTIN_NAMES.join(", ")
        )));
    };
    let report = validate_network(&spec);
    if !report.is_empty() {
        return Err(Failure::validation(anyhow::anyhow!("network is not admissible:\n{report}")));
    }
    Ok(spec)
}

fn load_file(path: &Path, params: &Params) -> Result<NetworkSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::usage)?;
    let raw: serde_json::Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(Failure::validation)?;
    let builtin = raw.get("builtin").and_then(|b| b.as_str());
    let bare = raw.get("saddles").and_then(|s| s.as_array()).map_or(true, |s| s.is_empty());
    match builtin {
        Some(name) if bare => {
            let mut merged = match raw.get("params") {
                Some(p) => Params::from_json(&serde_json::from_value(p.clone()).map_err(Failure::validation)?)
                    .map_err(Failure::validation)?,
                None => Params::default(),
            };
            for (k, v) in params.to_json() {
                merged = merged.with(&k, v.as_str().map_or_else(|| v.to_string(), str::to_string));
            }
            builtin_system(name, &merged).map_err(Failure::validation)
        }
        _ => {
            if *params != Params::default() {
                return Err(Failure::usage(anyhow::anyhow!("--params only applies to builtin systems")));
            }
            NetworkSpec::from_json(&text).map_err(Failure::validation)
        }
    }
}

/// Parses `x,y,z` or `anchor:NAME:SIGN:FRAC`; falls back to the system default.
pub fn parse_x0(spec: &NetworkSpec, text: Option<&str>) -> anyhow::Result<Option<Vector>> {
    let Some(text) = text else {
        return Ok(default_x0(spec));
    };
    if let Some(rest) = text.strip_prefix("anchor:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [name, sign, frac] = parts[..] else {
            bail!("anchor syntax is anchor:NAME:SIGN:FRAC");
        };
        let saddle = spec.saddle_by_name(name).with_context(|| format!("no saddle named `{name}`"))?;
        let sign = match sign {
            "+" => Sign::Plus,
            "-" => Sign::Minus,
            other => bail!("sign must be + or -, got `{other}`"),
        };
        let frac: f64 = frac.parse().with_context(|| format!("bad fraction `{frac}`"))?;
        return Ok(Some(orbit_anchor(spec, saddle.id, sign, frac, &FlowConfig::default())?));
    }
    let coords: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("bad point `{text}`"))?;
    if coords.len() != spec.dim() {
        bail!("point has {} coordinates, the system has {}", coords.len(), spec.dim());
    }
    Ok(Some(Vector::from_vec(coords)))
}
