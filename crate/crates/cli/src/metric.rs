use std::path::PathBuf;

use anyhow::anyhow;
use clap::Args;
use hetnet::curve::{proximity_check, read_curve_csv, read_jump_json, rho, rho_refined, REFINE_TOL};

use crate::{code, Failure};

#[derive(Args, Debug)]
pub struct MetricArgs {
    /// Curve CSV with header `t,x1,...`
    pub a: PathBuf,
    /// Second curve CSV (default: the flattened --jump curve)
    pub b: Option<PathBuf>,
    /// Bisect both polylines until the distance settles
    #[arg(long)]
    pub refine: bool,
    /// Jump curve JSON for the proximity verdict
    #[arg(long)]
    pub jump: Option<PathBuf>,
    /// Proximity radius; requires --jump
    #[arg(long)]
    pub delta: Option<f64>,
}

pub fn run(args: &MetricArgs) -> Result<u8, Failure> {
    if args.delta.is_some() != args.jump.is_some() {
        return Err(Failure::usage(anyhow!("--delta and --jump go together")));
    }
    if args.b.is_none() && args.jump.is_none() {
        return Err(Failure::usage(anyhow!("need a second curve or --jump")));
    }
    if let Some(d) = args.delta {
        if !(d > 0.0) {
            return Err(Failure::usage(anyhow!("--delta must be positive")));
        }
    }
    let a = read_curve_csv(&args.a).map_err(Failure::validation)?;
    let jump = args.jump.as_deref().map(read_jump_json).transpose().map_err(Failure::validation)?;
    let b = match (&args.b, &jump) {
        (Some(p), _) => read_curve_csv(p).map_err(Failure::validation)?,
        (None, Some(j)) => j.flatten(),
        (None, None) => unreachable!(),
    };
    if a.dim() != b.dim() {
        return Err(Failure::validation(anyhow!("curves live in different dimensions ({} and {})", a.dim(), b.dim())));
    }
    let d = if args.refine { rho_refined(&a, &b, REFINE_TOL) } else { rho(&a, &b) };
    println!("rho: {d}");
    if let (Some(j), Some(delta)) = (&jump, args.delta) {
        if j.rests.first().map_or(true, |r| r.len() != a.dim()) {
            return Err(Failure::validation(anyhow!("jump curve and curve dimensions differ")));
        }
        if proximity_check(&a, j, delta) {
            let bound = format!("{:.10}", 3.0 * delta);
            println!("proximity: true, bound {}", bound.trim_end_matches('0').trim_end_matches('.'));
        } else {
            println!("proximity: false");
        }
    }
    Ok(code::PASS)
}
