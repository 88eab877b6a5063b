//! Run configuration, loaded from JSON and overridden by flags.

use std::fmt;
use std::path::{Path, PathBuf};

use hyperbary::{ModelConfig, SolverConfig};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Barycenter,
    Circumcenter,
    Extend,
    ConvergeP,
    ConvergeFlow,
    Audit,
    Verify,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Barycenter => "barycenter",
            Command::Circumcenter => "circumcenter",
            Command::Extend => "extend",
            Command::ConvergeP => "converge-p",
            Command::ConvergeFlow => "converge-flow",
            Command::Audit => "audit",
            Command::Verify => "verify",
        };
        f.write_str(s)
    }
}

/// An exponent `p >= 1`, written in JSON as a number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct P(pub f64);

impl Serialize for P {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for P {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(P(p)),
            Raw::Str(s) if s == "inf" => Ok(P(f64::INFINITY)),
            Raw::Str(s) => Err(serde::de::Error::custom(format!(
                "expected a number or \"inf\", got {s:?}"
            ))),
        }
    }
}

/// Input files, resolved relative to the config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// Measure file (space, boundary or tangent kind).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<PathBuf>,
    /// Boundary map file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<PathBuf>,
    /// Space measure whose atoms are the points to extend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    #[serde(default = "default_p")]
    pub p: P,
    #[serde(default = "default_p_schedule")]
    pub p_schedule: Vec<f64>,
    #[serde(default = "default_t_schedule")]
    pub t_schedule: Vec<f64>,
    /// Random pairs per audit.
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_tolerance_scale")]
    pub tolerance_scale: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_seed() -> u64 {
    20_240_601
}

fn default_grid() -> usize {
    64
}

fn default_p() -> P {
    P(2.0)
}

fn default_p_schedule() -> Vec<f64> {
    hyperbary::solver::continuation_schedule()
}

fn default_t_schedule() -> Vec<f64> {
    (1..=10).map(f64::from).collect()
}

fn default_pairs() -> usize {
    20
}

fn default_tolerance_scale() -> f64 {
    1.0
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        self.model.validate()?;
        self.solver.validate()?;
        anyhow::ensure!(self.grid_n >= 2, "grid_n must be at least 2, got {}", self.grid_n);
        anyhow::ensure!(self.p.0 >= 1.0, "p must be >= 1, got {}", self.p.0);
        anyhow::ensure!(self.pairs >= 1, "pairs must be at least 1");
        anyhow::ensure!(
            self.tolerance_scale > 0.0 && self.tolerance_scale.is_finite(),
            "tolerance_scale must be positive and finite"
        );
        for (name, s) in [("p_schedule", &self.p_schedule), ("t_schedule", &self.t_schedule)] {
            anyhow::ensure!(!s.is_empty(), "{name} is empty");
            anyhow::ensure!(s.windows(2).all(|w| w[1] > w[0]), "{name} must be strictly increasing");
        }
        anyhow::ensure!(self.p_schedule[0] >= 1.0, "p_schedule entries must be >= 1");
        Ok(())
    }

    /// Makes input paths absolute with respect to `dir`.
    pub fn resolve_inputs(&mut self, dir: &Path) {
        for p in [&mut self.inputs.measure, &mut self.inputs.map, &mut self.inputs.points]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}
