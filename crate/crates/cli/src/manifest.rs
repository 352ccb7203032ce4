//! Provenance record written next to every output.

use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub git_describe: String,
    pub command: String,
    pub system: String,
    pub params: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub depth: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimEcho>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimEcho {
    pub epsilons: Vec<f64>,
    pub dt: f64,
    pub trials: usize,
    pub max_time: f64,
    pub tube_radius: f64,
    pub censored: Vec<usize>,
    pub saved_paths: usize,
}

impl Manifest {
    pub fn new(command: &str, args: &crate::SystemArgs, x0: Option<&hetnet::Vector>) -> Self {
        Self {
            tool: "hetnet".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            git_describe: env!("HETNET_GIT_DESCRIBE").into(),
            command: command.into(),
            system: args.system.clone(),
            params: args.params.clone(),
            x0: x0.map(|v| v.as_slice().to_vec()),
            depth: args.depth,
            seed: args.seed,
            sim: None,
        }
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}
