//! The four worked collaboration scenarios, run end to end: score model ->
//! instance -> mechanism -> realized releases -> ordered delivery.

use serde::{Deserialize, Serialize};

use datashare_core::mechanism::share_data;
use datashare_core::model::{GaussianMean, GeneLoci, PathFlow, ScoreModel, XorSecret};
use datashare_core::model::{is_collaborative_equilibrium, Instance, LearningBounds, ProposedOutcome};
use datashare_core::ordered::{
    run_ordered_ideal, verify_ordered_delivery, verify_prefix_fairness, OrderFn, OrderedOptions, OrderedSpec,
    OutputFn,
};
use datashare_core::simnet::{SimConfig, Transcript};

use crate::error::CliError;
use crate::formats::{parse_json, usage, InstanceFile, OutcomeFile};

pub const SCENARIOS: [&str; 4] = ["xor_secret", "path_flow_diamond", "gene_loci", "gaussian_mean"];

/// Built-in fixture text for a scenario name.
pub fn fixture(name: &str) -> Option<&'static str> {
    match name {
        "xor_secret" => Some(include_str!("../fixtures/xor_secret.json")),
        "path_flow_diamond" => Some(include_str!("../fixtures/path_flow_diamond.json")),
        "gene_loci" => Some(include_str!("../fixtures/gene_loci.json")),
        "gaussian_mean" => Some(include_str!("../fixtures/gaussian_mean.json")),
        _ => None,
    }
}

/// Model parameters plus the mechanism parameters not implied by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioParams {
    XorSecret {
        players: usize,
        bits: usize,
        beta: f64,
        mu: Vec<f64>,
        #[serde(default)]
        epsilon: f64,
    },
    PathFlow {
        vertices: usize,
        edges: Vec<(usize, usize)>,
        source: usize,
        sink: usize,
        beta: f64,
        mu: Vec<f64>,
        #[serde(default)]
        epsilon: f64,
    },
    GeneLoci {
        truth: Vec<bool>,
        evidence: Vec<Vec<f64>>,
        beta: f64,
        mu: Vec<f64>,
        #[serde(default)]
        epsilon: f64,
    },
    GaussianMean {
        sigma: f64,
        counts: Vec<u64>,
        beta: f64,
        mu: Vec<f64>,
        #[serde(default)]
        epsilon: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolReport {
    /// Parties in the order their outputs were delivered.
    pub delivery_order: Vec<usize>,
    pub ordered_delivery: bool,
    pub prefix_fair: bool,
    /// Hex-encoded release delivered to each player.
    pub outputs: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub instance: InstanceFile,
    pub budget: f64,
    pub outcome: OutcomeFile,
    /// Worst-case reward minus outside option at each time step.
    pub slack: Option<Vec<f64>>,
    /// Score of each player's realized release.
    pub realized_scores: Option<Vec<f64>>,
    pub protocol: Option<ProtocolReport>,
    /// Model-specific facts (paths per player, consensus loci, ...).
    pub details: serde_json::Value,
}

impl ScenarioReport {
    /// Feasible, in equilibrium, and delivered in order.
    pub fn success(&self) -> bool {
        self.outcome.feasible
            && self.outcome.equilibrium == Some(true)
            && self
                .protocol
                .as_ref()
                .is_some_and(|p| p.ordered_delivery && p.prefix_fair)
    }
}

pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub transcript: Option<Transcript>,
}

pub fn load_params(name: &str) -> Result<ScenarioParams, CliError> {
    let text = fixture(name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown scenario {name:?}; expected one of {}",
            SCENARIOS.join(", ")
        ))
    })?;
    parse_json(text, name)
}

pub fn run_named(name: &str, seed: u64, tolerance: f64) -> Result<ScenarioRun, CliError> {
    run(name, &load_params(name)?, seed, tolerance)
}

fn instance_for<M: ScoreModel>(m: &M, beta: f64, mu: &[f64], epsilon: f64, tol: f64) -> Result<Instance, CliError> {
    Instance::new(
        m.alphas(),
        beta,
        LearningBounds::NDim(mu.to_vec()),
        m.prior_score(),
        m.max_score(),
        epsilon,
    )
    .map(|i| i.with_tolerance(tol))
    .map_err(usage)
}

fn f64_bytes(v: f64) -> [u8; 8] {
    v.to_le_bytes()
}

pub fn run(name: &str, params: &ScenarioParams, seed: u64, tolerance: f64) -> Result<ScenarioRun, CliError> {
    match params {
        ScenarioParams::XorSecret {
            players,
            bits,
            beta,
            mu,
            epsilon,
        } => {
            let m = XorSecret::new(*players, *bits).map_err(usage)?;
            let inst = instance_for(&m, *beta, mu, *epsilon, tolerance)?;
            drive(name, &m, inst, seed, |r| {
                let mut out = vec![r.exact_bits as u8];
                out.extend_from_slice(&f64_bytes(r.flip_probability));
                out
            }, |_, _| serde_json::Value::Null)
        }
        ScenarioParams::PathFlow {
            vertices,
            edges,
            source,
            sink,
            beta,
            mu,
            epsilon,
        } => {
            let m = PathFlow::new(*vertices, edges.clone(), *source, *sink).map_err(usage)?;
            let inst = instance_for(&m, *beta, mu, *epsilon, tolerance)?;
            let paths = m.paths().to_vec();
            drive(
                name,
                &m,
                inst,
                seed,
                |r| {
                    let mask: u16 = r.edges.iter().map(|&e| 1u16 << e).sum();
                    mask.to_le_bytes().to_vec()
                },
                move |_, releases| {
                    // Paths each player knows with certainty.
                    let known: Vec<Vec<Vec<usize>>> = releases
                        .iter()
                        .map(|r| {
                            paths
                                .iter()
                                .filter(|p| p.iter().all(|e| r.edges.contains(e)))
                                .cloned()
                                .collect()
                        })
                        .collect();
                    serde_json::json!({ "paths": paths, "known_paths": known })
                },
            )
        }
        ScenarioParams::GeneLoci {
            truth,
            evidence,
            beta,
            mu,
            epsilon,
        } => {
            let m = GeneLoci::new(truth.clone(), evidence.clone()).map_err(usage)?;
            let inst = instance_for(&m, *beta, mu, *epsilon, tolerance)?;
            let consensus = m.consensus_loci();
            drive(
                name,
                &m,
                inst,
                seed,
                |r| r.inclusion.iter().flat_map(|p| f64_bytes(*p)).collect(),
                move |_, _| serde_json::json!({ "consensus_loci": consensus }),
            )
        }
        ScenarioParams::GaussianMean {
            sigma,
            counts,
            beta,
            mu,
            epsilon,
        } => {
            let m = GaussianMean::new(*sigma, counts.clone()).map_err(usage)?;
            let inst = instance_for(&m, *beta, mu, *epsilon, tolerance)?;
            let sum_alone: f64 = m.alphas().iter().sum();
            let details = serde_json::json!({
                "pooled_reward": m.max_score(),
                "sum_of_alone_rewards": sum_alone,
            });
            drive(
                name,
                &m,
                inst,
                seed,
                |r| {
                    let mut out = r.samples.to_le_bytes().to_vec();
                    out.extend_from_slice(&f64_bytes(r.noise_variance));
                    out
                },
                move |_, _| details,
            )
        }
    }
}

fn drive<M: ScoreModel>(
    name: &str,
    model: &M,
    inst: Instance,
    seed: u64,
    encode: impl Fn(&M::Release) -> Vec<u8>,
    details: impl FnOnce(&ProposedOutcome, &[M::Release]) -> serde_json::Value,
) -> Result<ScenarioRun, CliError> {
    let instance = InstanceFile::from_instance(&inst).expect("ndim bounds");
    let budget = inst.budget();
    let outcome = share_data(&inst).map_err(usage)?;
    let Some(outcome) = outcome else {
        let details = details(
            &ProposedOutcome {
                pi: datashare_core::Permutation::identity(inst.n()),
                delta: Vec::new(),
            },
            &[],
        );
        return Ok(ScenarioRun {
            report: ScenarioReport {
                scenario: name.to_string(),
                instance,
                budget,
                outcome: OutcomeFile::infeasible(),
                slack: None,
                realized_scores: None,
                protocol: None,
                details,
            },
            transcript: None,
        });
    };
    let verdict = is_collaborative_equilibrium(&inst, &outcome).map_err(usage)?;

    let releases = outcome
        .delta
        .iter()
        .map(|&d| model.realize(d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let realized_scores: Vec<f64> = releases.iter().map(|r| model.score(r)).collect();
    let outputs: Vec<Vec<u8>> = releases.iter().map(&encode).collect();
    let output_len = outputs.iter().map(Vec::len).max().unwrap_or(0);
    if outputs.iter().any(|o| o.len() != output_len) {
        return Err(CliError::Internal("releases encode to different lengths".into()));
    }

    let n = inst.n();
    let spec = OrderedSpec {
        f: OutputFn::Fixed(outputs),
        p: OrderFn::Fixed(outcome.pi.clone()),
        output_len,
    };
    let inputs: Vec<Vec<u8>> = (0..n).map(|i| vec![i as u8; output_len]).collect();
    let (run, _) = run_ordered_ideal(&spec, &inputs, &SimConfig::new(n, seed), OrderedOptions::default())
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let protocol = ProtocolReport {
        delivery_order: run.transcript.outputs().iter().map(|o| o.0).collect(),
        ordered_delivery: verify_ordered_delivery(&run.transcript, &outcome.pi),
        prefix_fair: verify_prefix_fairness(&run.transcript, &outcome.pi),
        outputs: run.outputs.iter().map(|o| o.as_ref().map(hex::encode)).collect(),
    };
    let details = details(&outcome, &releases);
    Ok(ScenarioRun {
        report: ScenarioReport {
            scenario: name.to_string(),
            instance,
            budget,
            outcome: OutcomeFile::from_outcome(&outcome, verdict.holds),
            slack: Some(verdict.slack),
            realized_scores: Some(realized_scores),
            protocol: Some(protocol),
            details,
        },
        transcript: Some(run.transcript),
    })
}
