//! JSON schemas for instances, graphs, outcomes and ordered-MPC specs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use datashare_core::mechanism::FasGraph;
use datashare_core::model::{GeneralBounds, ModelError};
use datashare_core::ordered::{OrderFn, OrderedSpec, OutputFn};
use datashare_core::{Instance, LearningBounds, Permutation, ProposedOutcome};

use crate::error::CliError;

/// Reads and parses a JSON file; parse errors carry line and column.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    parse_json(&text, &path.display().to_string())
}

pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T, CliError> {
    serde_json::from_str(text).map_err(|e| {
        CliError::Usage(format!(
            "{origin}: line {} column {}: {e}",
            e.line(),
            e.column()
        ))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsFile {
    Ndim(Vec<f64>),
    Nsq(Vec<Vec<f64>>),
    /// One entry per (order, player).
    General(Vec<GeneralEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralEntry {
    pub order: Vec<usize>,
    pub player: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub alpha: Vec<f64>,
    pub beta: f64,
    pub bounds: BoundsFile,
    pub s0: f64,
    pub smax: f64,
    #[serde(default)]
    pub epsilon: f64,
}

impl InstanceFile {
    pub fn to_instance(&self, tolerance: f64) -> Result<Instance, CliError> {
        if self.alpha.len() != self.n {
            return Err(CliError::Usage(format!(
                "n = {} but alpha has {} entries",
                self.n,
                self.alpha.len()
            )));
        }
        let bounds = match &self.bounds {
            BoundsFile::Ndim(mu) => LearningBounds::NDim(mu.clone()),
            BoundsFile::Nsq(mu) => LearningBounds::NSquared(mu.clone()),
            BoundsFile::General(entries) => {
                let mut g = GeneralBounds::new();
                for e in entries {
                    let pi = Permutation::new(e.order.clone()).map_err(usage)?;
                    g.insert(&pi, e.player, e.lambda);
                }
                LearningBounds::General(g)
            }
        };
        let inst = Instance::new(
            self.alpha.clone(),
            self.beta,
            bounds,
            self.s0,
            self.smax,
            self.epsilon,
        )
        .map_err(usage)?;
        Ok(inst.with_tolerance(tolerance))
    }

    /// Inverse of [`InstanceFile::to_instance`] for NDim and NSquared bounds.
    pub fn from_instance(inst: &Instance) -> Option<Self> {
        let bounds = match &inst.bounds {
            LearningBounds::NDim(mu) => BoundsFile::Ndim(mu.clone()),
            LearningBounds::NSquared(mu) => BoundsFile::Nsq(mu.clone()),
            LearningBounds::General(_) => return None,
        };
        Some(InstanceFile {
            n: inst.n(),
            alpha: inst.alpha.clone(),
            beta: inst.beta,
            bounds,
            s0: inst.s0,
            smax: inst.smax,
            epsilon: inst.epsilon,
        })
    }
}

pub fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl GraphFile {
    pub fn to_graph(&self) -> FasGraph {
        FasGraph {
            n: self.n,
            edges: self.edges.clone(),
        }
    }
}

/// Result of `mech solve` / `mech brute`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeFile {
    pub feasible: bool,
    /// Delivery order, `pi[t-1]` is the player served at time `t`.
    pub pi: Option<Vec<usize>>,
    /// Publication score of every player.
    pub delta: Option<Vec<f64>>,
    /// Whether the outcome passes the equilibrium check.
    pub equilibrium: Option<bool>,
}

impl OutcomeFile {
    pub fn infeasible() -> Self {
        OutcomeFile {
            feasible: false,
            pi: None,
            delta: None,
            equilibrium: None,
        }
    }

    pub fn from_outcome(o: &ProposedOutcome, equilibrium: bool) -> Self {
        OutcomeFile {
            feasible: true,
            pi: Some(o.pi.as_slice().to_vec()),
            delta: Some(o.delta.clone()),
            equilibrium: Some(equilibrium),
        }
    }

    pub fn to_outcome(&self) -> Result<Option<ProposedOutcome>, ModelError> {
        match (&self.pi, &self.delta) {
            (Some(pi), Some(delta)) => Ok(Some(ProposedOutcome {
                pi: Permutation::new(pi.clone())?,
                delta: delta.clone(),
            })),
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFnFile {
    Identity,
    XorSum,
    /// Hex-encoded input vectors mapped to hex-encoded output vectors.
    Table(Vec<OutputRow>),
    Fixed(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRow {
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderFnFile {
    Identity,
    /// Larger inputs first.
    SortOrderP,
    Table(Vec<OrderRow>),
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderRow {
    pub inputs: Vec<String>,
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub f: OutputFnFile,
    pub p: OrderFnFile,
    pub output_len: usize,
}

pub fn decode_hex(s: &str) -> Result<Vec<u8>, CliError> {
    hex::decode(s).map_err(|e| CliError::Usage(format!("bad hex {s:?}: {e}")))
}

fn decode_all(v: &[String]) -> Result<Vec<Vec<u8>>, CliError> {
    v.iter().map(|s| decode_hex(s)).collect()
}

impl SpecFile {
    pub fn to_spec(&self) -> Result<OrderedSpec, CliError> {
        let f = match &self.f {
            OutputFnFile::Identity => OutputFn::Identity,
            OutputFnFile::XorSum => OutputFn::XorSum,
            OutputFnFile::Fixed(v) => OutputFn::Fixed(decode_all(v)?),
            OutputFnFile::Table(rows) => {
                let mut t = BTreeMap::new();
                for r in rows {
                    t.insert(decode_all(&r.inputs)?, decode_all(&r.outputs)?);
                }
                OutputFn::Table(t)
            }
        };
        let p = match &self.p {
            OrderFnFile::Identity => OrderFn::Identity,
            OrderFnFile::SortOrderP => OrderFn::SortDescending,
            OrderFnFile::Fixed(v) => OrderFn::Fixed(Permutation::new(v.clone()).map_err(usage)?),
            OrderFnFile::Table(rows) => {
                let mut t = BTreeMap::new();
                for r in rows {
                    t.insert(
                        decode_all(&r.inputs)?,
                        Permutation::new(r.order.clone()).map_err(usage)?,
                    );
                }
                OrderFn::Table(t)
            }
        };
        Ok(OrderedSpec {
            f,
            p,
            output_len: self.output_len,
        })
    }
}

/// A JSON array of hex strings.
pub fn read_hex_list(path: &Path) -> Result<Vec<Vec<u8>>, CliError> {
    let v: Vec<String> = read_json(path)?;
    decode_all(&v)
}
