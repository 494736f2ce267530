//! Run configuration: one JSON object per line, tagged by command.

use asep_core::identities::SuiteConfig;
use asep_core::oracle::{InitialCondition, SimulationSpec};
use asep_core::{Error, ParticleConfig, Result};
use asep_core::formulas::{Method, WallQuery};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

/// A configuration as written in a file: positions plus per-particle colours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    pub positions: Vec<i64>,
    pub species: Vec<u8>,
}

impl RawConfig {
    pub fn build(&self) -> Result<ParticleConfig> {
        ParticleConfig::new(self.positions.clone(), self.species.clone())
    }
}

impl From<&ParticleConfig> for RawConfig {
    fn from(c: &ParticleConfig) -> Self {
        Self { positions: c.positions().to_vec(), species: c.species().to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum GreenPayload {
    /// Two-species TASEP transition.
    TwoSpecies {
        initial: RawConfig,
        #[serde(rename = "final")]
        target: RawConfig,
        t: f64,
        #[serde(default)]
        method: Method,
    },
    /// Rainbow ASEP: colour `i` starts at `mu[i-1]` (strictly decreasing) and ends at `nu[i-1]`.
    Rainbow { mu: Vec<i64>, nu: Vec<i64>, q: f64, t: f64 },
    /// Every two-species configuration inside `[lo, hi]` with the same particle count.
    Table { initial: RawConfig, lo: i64, hi: i64, t: f64 },
}

/// Which block formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockFormula {
    #[default]
    Auto,
    Symmetric,
    Determinant,
    SingleSpecies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum CrossingPayload {
    /// Colour blocks; `mu` lists block 1 rightmost, `lambda` lists block 1 leftmost.
    Blocks {
        mu: Vec<Vec<i64>>,
        lambda: Vec<Vec<i64>>,
        q: f64,
        t: f64,
        #[serde(default)]
        formula: BlockFormula,
    },
    /// Two-species TASEP total crossing; the `m` leftmost particles are type 2.
    TwoTasep { mu: Vec<i64>, nu: Vec<i64>, m: usize, t: f64 },
    /// Rainbow total crossing with `mu` decreasing and `nu` increasing.
    Rainbow { mu: Vec<i64>, nu: Vec<i64>, q: f64, t: f64 },
}

/// Cumulative crossing evaluators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum WallPayload {
    /// Picks the determinant form when the left wall is irrelevant, the direct form otherwise.
    Auto(WallQuery),
    Bernoulli(WallQuery),
    Inverted(WallQuery),
    OneWall(WallQuery),
    OneWallDet(WallQuery),
    /// Fixed initial positions; the first `m` particles are type 2.
    Step { mu: Vec<i64>, m: usize, s1: i64, s2: i64, t: f64 },
    /// All `n` single-species particles started on `1..=n` are at or beyond `s`.
    Gamma { n: usize, s: i64, t: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RawInitial {
    Fixed(RawConfig),
    BernoulliStep { rho: f64, m: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimEvent {
    /// Final configuration equals this one.
    Config(RawConfig),
    /// Type-1 particles end in `[s1, s2)` and type-2 particles at or beyond `s2`.
    Wall { s1: i64, s2: i64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatePayload {
    pub initial: RawInitial,
    #[serde(default)]
    pub q: f64,
    pub t: f64,
    pub samples: u64,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Without an event the empirical distribution is reported.
    #[serde(default)]
    pub event: Option<SimEvent>,
}

impl SimulatePayload {
    pub fn spec(&self, seed: u64) -> Result<SimulationSpec> {
        let initial = match &self.initial {
            RawInitial::Fixed(c) => InitialCondition::Fixed(c.build()?),
            RawInitial::BernoulliStep { rho, m, n } => InitialCondition::BernoulliStep { rho: *rho, m: *m, n: *n },
        };
        let spec = SimulationSpec { initial, q: self.q, horizon: self.t, seed, samples: self.samples };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyPayload {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Identity names to report; `["all"]` selects everything.
    #[serde(default = "default_select")]
    pub select: Vec<String>,
    /// Scale one vertex weight family by this factor.
    #[serde(default)]
    pub perturb: Option<f64>,
}

fn default_samples() -> usize {
    asep_core::identities::DEFAULT_SAMPLES
}

fn default_select() -> Vec<String> {
    vec!["all".into()]
}

impl Default for VerifyPayload {
    fn default() -> Self {
        Self { samples: default_samples(), seed: None, select: default_select(), perturb: None }
    }
}

impl VerifyPayload {
    pub fn suite(&self, seed: u64) -> SuiteConfig {
        SuiteConfig { seed, samples: self.samples, perturb: self.perturb }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "query", rename_all = "snake_case")]
pub enum Payload {
    Green(GreenPayload),
    Crossing(CrossingPayload),
    Wall(WallPayload),
    Simulate(SimulatePayload),
    Verify(VerifyPayload),
}

impl Payload {
    pub fn command(&self) -> &'static str {
        match self {
            Payload::Green(_) => "green",
            Payload::Crossing(_) => "crossing",
            Payload::Wall(_) => "wall",
            Payload::Simulate(_) => "simulate",
            Payload::Verify(_) => "verify",
        }
    }
}

/// Quadrature settings that override the library defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct QuadratureOverrides {
    pub tol: Option<f64>,
    pub start_nodes: Option<usize>,
    pub max_nodes: Option<usize>,
}

/// One line of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub payload: Payload,
    #[serde(default)]
    pub quadrature: Option<QuadratureOverrides>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(payload: Payload) -> Self {
        Self { payload, quadrature: None, seed: None, out: None }
    }
}

/// Parse a configuration file: one JSON object per non-empty line (`#` starts a comment line).
pub fn parse_configs(text: &str) -> Result<Vec<RunConfig>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cfg: RunConfig =
            serde_json::from_str(line).map_err(|e| Error::InvalidInput(format!("config line {}: {e}", i + 1)))?;
        out.push(cfg);
    }
    if out.is_empty() {
        return Err(Error::InvalidInput("configuration contains no runs".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_command() {
        let text = r#"
# comment
{"command":"green","query":{"model":"two_species","initial":{"positions":[0],"species":[1]},"final":{"positions":[2],"species":[1]},"t":1.0}}
{"command":"crossing","query":{"model":"blocks","mu":[[2,1],[0]],"lambda":[[3,2],[4]],"q":0.0,"t":1.0}}
{"command":"wall","query":{"form":"auto","s1":-3,"s2":2,"rho":0.5,"n":2,"m":1,"t":2.0},"seed":4}
{"command":"simulate","query":{"initial":{"bernoulli_step":{"rho":0.5,"m":1,"n":2}},"t":2.0,"samples":10,"event":{"wall":{"s1":-3,"s2":2}}}}
{"command":"verify","query":{"samples":3}}
"#;
        let cfgs = parse_configs(text).unwrap();
        let cmds: Vec<&str> = cfgs.iter().map(|c| c.payload.command()).collect();
        assert_eq!(cmds, ["green", "crossing", "wall", "simulate", "verify"]);
        assert_eq!(cfgs[2].seed, Some(4));
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfgs[1]).unwrap()).unwrap();
        assert_eq!(back, cfgs[1]);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_configs("").is_err());
        assert!(parse_configs(r#"{"command":"fly","query":{}}"#).is_err());
        let e = parse_configs("{not json").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
