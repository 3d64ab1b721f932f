use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use kpzlab::representations::{Model, RepSpec};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Run a replica experiment and summarise the probes.
    Simulate,
    /// Run the structural property suite.
    Verify,
    /// Backtrack a geodesic out of a point-to-point action.
    Geodesic,
    /// Rescale one representation to the fixed point.
    Scale,
    /// Build and dump one melon.
    Melon,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Verify => "verify",
            Command::Geodesic => "geodesic",
            Command::Scale => "scale",
            Command::Melon => "melon",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "kpzlab", version, about = "Actions, melons and scaling diagnostics for KPZ-class models")]
pub struct Cli {
    /// Command to run; may instead be given as `command` in the config file.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "N", allow_negative_numbers = true)]
    pub replicas: Option<i64>,
    #[arg(long, value_parser = parse_model)]
    pub model: Option<Model>,
    /// Number of levels.
    #[arg(long, value_name = "N", allow_negative_numbers = true)]
    pub n: Option<i64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

fn parse_model(s: &str) -> Result<Model, String> {
    s.parse::<Model>().map_err(|e| e.to_string())
}

/// Points of the geodesic command as `(position, level)`. The source
/// defaults to the origin on the deepest level and the query to the right
/// end of level 1.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicConfig {
    pub source: Option<(f64, usize)>,
    pub query: Option<(f64, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub model: Model,
    pub seed: u64,
    pub num_replicas: usize,
    pub rep: RepSpec,
    /// `(x, y)` points at which `simulate` records `Z(x, y, 1)`.
    pub probes: Vec<(f64, f64)>,
    /// Record the fixed-point rescaled sheet in `simulate`.
    pub scaled: bool,
    pub geodesic: GeodesicConfig,
    pub out: PathBuf,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            model: Model::Bl,
            seed: 0,
            num_replicas: 100,
            rep: RepSpec::default(),
            probes: vec![(0.0, 1.0)],
            scaled: false,
            geodesic: GeodesicConfig::default(),
            out: PathBuf::from("kpzlab-out"),
            format: Format::Csv,
        }
    }
}

/// Parse a JSON config; errors name the offending field path.
pub fn parse_config(text: &str) -> Result<RunConfig, Failure> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::Config(format!("{path}: {}", e.into_inner()))
    })
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        if self.num_replicas == 0 {
            return Err(Failure::Config("num_replicas: must be at least 1".into()));
        }
        if self.probes.is_empty() {
            return Err(Failure::Config("probes: need at least one probe".into()));
        }
        self.rep.validate().map_err(|e| match e {
            kpzlab::Error::Config(msg) => Failure::Config(format!("rep.{msg}")),
            other => Failure::Config(other.to_string()),
        })
    }
}

/// Merge the config file (if any) with the flags. Flags win; each applied
/// flag is returned with its value for the provenance record.
pub fn resolve(cli: &Cli) -> Result<(RunConfig, BTreeMap<String, Value>), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
            parse_config(&text)?
        }
        None => RunConfig::default(),
    };
    let mut overrides = BTreeMap::new();
    if let Some(c) = cli.command {
        cfg.command = Some(c);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
        overrides.insert("seed".into(), json!(s));
    }
    if let Some(r) = cli.replicas {
        if r < 1 {
            return Err(Failure::Config(format!("num_replicas: must be at least 1, got {r}")));
        }
        cfg.num_replicas = r as usize;
        overrides.insert("num_replicas".into(), json!(r));
    }
    if let Some(m) = cli.model {
        cfg.model = m;
        overrides.insert("model".into(), json!(m));
    }
    if let Some(n) = cli.n {
        if n < 1 {
            return Err(Failure::Config(format!("rep.n: must be at least 1, got {n}")));
        }
        cfg.rep.n = n as usize;
        overrides.insert("rep.n".into(), json!(n));
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
        overrides.insert("out".into(), json!(o));
    }
    if let Some(f) = cli.format {
        cfg.format = f;
        overrides.insert("format".into(), json!(f));
    }
    if cfg.command.is_none() {
        return Err(Failure::Usage("no command given on the command line or in the config".into()));
    }
    cfg.validate()?;
    Ok((cfg, overrides))
}
