//! Command-line entry point.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use datashare_core::delay::{
    dummy_gaps_ok, puzzles_issued_together, run_dummy_delay, run_timelock_delay, SolverProfile, TimelockParams,
};
use datashare_core::mechanism::{
    brute_force_equilibrium, decide_nsq, fas_to_instance, min_feedback_arc_weight, share_data,
};
use datashare_core::model::is_collaborative_equilibrium;
use datashare_core::ordered::{
    audit_leakage, run_ordered_ideal, verify_ordered_delivery, verify_prefix_fairness, OrderedOptions,
    ThresholdMode,
};
use datashare_core::rng;
use datashare_core::simnet::{AbortPoint, AdversaryConfig, SimConfig, Transcript};
use datashare_core::timed::{lock, lock_line, solve, Scheme, DEFAULT_KAPPA};
use datashare_core::{Instance, DEFAULT_TOLERANCE};

use crate::error::{exit, CliError};
use crate::formats::{decode_hex, read_hex_list, read_json, usage, GraphFile, InstanceFile, OutcomeFile, SpecFile};
use crate::puzzle_file::PuzzleFile;
use crate::scenario::{self, ScenarioParams};
use crate::transcript::write_jsonl;

#[derive(Debug, Parser)]
#[command(name = "datashare", version, about = "Incentive-compatible data sharing: mechanism, MPC simulator, timed puzzles")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Compact single-line JSON output.
    #[arg(long, global = true)]
    pub json: bool,
    /// Absolute tolerance for real comparisons.
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mechanism: compute an ordering and publication schedule.
    #[command(subcommand)]
    Mech(MechCmd),
    /// Simulate ordered and timed-delay MPC.
    #[command(subcommand)]
    Mpc(MpcCmd),
    /// Time-lock and time-line puzzles.
    #[command(subcommand)]
    Puzzle(PuzzleCmd),
    /// Run a built-in scenario end to end.
    Scenario {
        /// xor_secret, path_flow_diamond, gene_loci or gaussian_mean.
        name: String,
        /// Parameter file overriding the built-in fixture.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Write the protocol transcript here (JSON lines).
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MechCmd {
    /// Polynomial-time mechanism (n-dimensional bounds).
    Solve { instance: PathBuf },
    /// Exhaustive search over orders (n <= 8).
    Brute { instance: PathBuf },
    /// Exact decision for n^2-dimensional bounds (n <= 10).
    Nsq { instance: PathBuf },
    /// Feedback-arc-set instance: is there a FAS of weight <= gamma?
    Fas {
        graph: PathBuf,
        #[arg(long)]
        gamma: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    HonestMajority,
    DishonestMajority,
}

impl From<ModeArg> for ThresholdMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::HonestMajority => ThresholdMode::HonestMajority,
            ModeArg::DishonestMajority => ThresholdMode::DishonestMajority,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Square,
    Hash,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Square => Scheme::Square,
            SchemeArg::Hash => Scheme::Hash,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Function spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Inputs: JSON array of hex strings, one per party.
    #[arg(long)]
    inputs: PathBuf,
    /// Corrupt parties, comma separated.
    #[arg(long, value_delimiter = ',')]
    corrupt: Vec<usize>,
    /// Corrupt parties stop sending from this phase on.
    #[arg(long)]
    abort_phase: Option<u32>,
    /// Round within the abort phase.
    #[arg(long, default_value_t = 0)]
    abort_round: u32,
    /// Corrupt parties see honest messages of the same round.
    #[arg(long)]
    rushing: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::HonestMajority)]
    mode: ModeArg,
    /// Write the transcript here instead of stdout.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum MpcCmd {
    /// Ordered MPC.
    Ordered(RunArgs),
    /// Ordered MPC with G dummy rounds before every output.
    Dummy {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "G", short = 'G')]
        g: u32,
    },
    /// Time-lock construction with per-party solving speeds.
    Timelock {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "B", short = 'B')]
        b: u64,
        #[arg(long = "G", short = 'G')]
        g: u64,
        /// Steps per tick for each party, e.g. 1,1.5,2.
        #[arg(long)]
        speeds: Option<String>,
        #[arg(long, value_enum, default_value_t = SchemeArg::Hash)]
        scheme: SchemeArg,
        /// Prime size in bits for the squaring scheme.
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: u32,
    },
}

#[derive(Debug, Subcommand)]
pub enum PuzzleCmd {
    /// Lock hex data for t steps.
    Lock {
        #[arg(long)]
        data: String,
        #[arg(long)]
        t: u64,
        #[arg(long, value_enum, default_value_t = SchemeArg::Square)]
        scheme: SchemeArg,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: u32,
        /// Write the puzzle here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve a puzzle file by running the chain.
    Solve { file: PathBuf },
    /// Lock several items on one chain.
    Line {
        /// JSON array of hex strings.
        #[arg(long)]
        items: PathBuf,
        #[arg(long, value_delimiter = ',')]
        delays: Vec<u64>,
        #[arg(long, value_enum, default_value_t = SchemeArg::Square)]
        scheme: SchemeArg,
        #[arg(long, default_value_t = DEFAULT_KAPPA)]
        kappa: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command, and
/// returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, value: &T) -> Result<(), CliError> {
    let text = if json {
        serde_json::to_string(value)
    } else {
        serde_json::to_string_pretty(value)
    }
    .map_err(|e| CliError::Internal(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn verdict_code(ok: bool) -> i32 {
    if ok {
        exit::OK
    } else {
        exit::VERDICT
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    match &cli.command {
        Command::Mech(m) => mech(cli, m, out),
        Command::Mpc(m) => mpc(cli, m, out),
        Command::Puzzle(p) => puzzle(cli, p, out),
        Command::Scenario {
            name,
            params,
            transcript,
        } => {
            let params: ScenarioParams = match params {
                Some(p) => read_json(p)?,
                None => scenario::load_params(name)?,
            };
            let run = scenario::run(name, &params, cli.seed, cli.tolerance)?;
            if let (Some(path), Some(t)) = (transcript, &run.transcript) {
                write_transcript_file(path, t)?;
            }
            emit(out, cli.json, &run.report)?;
            Ok(verdict_code(run.report.success()))
        }
    }
}

fn load_instance(path: &Path, tol: f64) -> Result<Instance, CliError> {
    read_json::<InstanceFile>(path)?.to_instance(tol)
}

#[derive(Serialize)]
struct NsqReport {
    feasible: bool,
    witness: Option<Vec<usize>>,
}

#[derive(Serialize)]
struct FasReport {
    gamma: f64,
    feasible: bool,
    witness: Option<Vec<usize>>,
    min_fas_weight: f64,
}

fn mech(cli: &Cli, cmd: &MechCmd, out: &mut dyn Write) -> Result<i32, CliError> {
    let tol = cli.tolerance;
    match cmd {
        MechCmd::Solve { instance } | MechCmd::Brute { instance } => {
            let inst = load_instance(instance, tol)?;
            let result = if matches!(cmd, MechCmd::Solve { .. }) {
                share_data(&inst)
            } else {
                brute_force_equilibrium(&inst)
            }
            .map_err(usage)?;
            let report = match &result {
                Some(o) => {
                    let v = is_collaborative_equilibrium(&inst, o).map_err(usage)?;
                    OutcomeFile::from_outcome(o, v.holds)
                }
                None => OutcomeFile::infeasible(),
            };
            emit(out, cli.json, &report)?;
            Ok(verdict_code(report.feasible))
        }
        MechCmd::Nsq { instance } => {
            let inst = load_instance(instance, tol)?;
            let d = decide_nsq(&inst).map_err(usage)?;
            let report = NsqReport {
                feasible: d.feasible,
                witness: d.witness.map(|w| w.into_vec()),
            };
            emit(out, cli.json, &report)?;
            Ok(verdict_code(report.feasible))
        }
        MechCmd::Fas { graph, gamma } => {
            let g = read_json::<GraphFile>(graph)?.to_graph();
            let inst = fas_to_instance(&g, *gamma).map_err(usage)?.with_tolerance(tol);
            let d = decide_nsq(&inst).map_err(usage)?;
            let (w, _) = min_feedback_arc_weight(&g).map_err(usage)?;
            let report = FasReport {
                gamma: *gamma,
                feasible: d.feasible,
                witness: d.witness.map(|w| w.into_vec()),
                min_fas_weight: w,
            };
            emit(out, cli.json, &report)?;
            Ok(verdict_code(report.feasible))
        }
    }
}

fn sim_config(cli: &Cli, args: &RunArgs, n: usize) -> Result<SimConfig, CliError> {
    if let Some(&bad) = args.corrupt.iter().find(|&&c| c >= n) {
        return Err(CliError::Usage(format!("corrupt party {bad} out of range 0..{n}")));
    }
    let adversary = AdversaryConfig {
        corrupt: args.corrupt.iter().copied().collect(),
        abort_at: args.abort_phase.map(|phase| AbortPoint {
            phase,
            round: args.abort_round,
        }),
        rushing: args.rushing,
    };
    Ok(SimConfig::new(n, cli.seed).with_adversary(adversary))
}

fn write_transcript_file(path: &Path, t: &Transcript) -> Result<(), CliError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_jsonl(t, &mut f)?;
    f.flush()?;
    Ok(())
}

fn emit_transcript(args: &RunArgs, t: &Transcript, out: &mut dyn Write) -> Result<(), CliError> {
    match &args.transcript {
        Some(p) => write_transcript_file(p, t),
        None => Ok(write_jsonl(t, out)?),
    }
}

#[derive(Serialize)]
struct OrderedVerdict {
    ordered_delivery: bool,
    prefix_fair: bool,
    /// Parties holding an output at the end, in delivery order.
    received: Vec<usize>,
    leakage_ok: bool,
    aborted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    gaps_ok: Option<bool>,
}

#[derive(Serialize)]
struct TimelockVerdict {
    order_ok: bool,
    gaps_ok: bool,
    unlock_ticks: Vec<Option<u64>>,
    order: Vec<usize>,
    speed_ratio: f64,
    compliant: bool,
    issued_together: bool,
}

fn mpc(cli: &Cli, cmd: &MpcCmd, out: &mut dyn Write) -> Result<i32, CliError> {
    let args = match cmd {
        MpcCmd::Ordered(a) => a,
        MpcCmd::Dummy { run, .. } | MpcCmd::Timelock { run, .. } => run,
    };
    let spec = read_json::<SpecFile>(&args.spec)?.to_spec()?;
    let inputs = read_hex_list(&args.inputs)?;
    let n = inputs.len();
    let config = sim_config(cli, args, n)?;
    let corrupt: BTreeSet<usize> = config.adversary.corrupt.clone();
    let (pi, _) = spec.evaluate(&inputs).map_err(usage)?;
    let mode: ThresholdMode = args.mode.into();

    match cmd {
        MpcCmd::Ordered(_) | MpcCmd::Dummy { .. } => {
            let g = match cmd {
                MpcCmd::Dummy { g, .. } => *g,
                _ => 0,
            };
            let (run, ledger) = if g == 0 {
                run_ordered_ideal(&spec, &inputs, &config, OrderedOptions { mode, dummy_rounds: 0 })
                    .map_err(usage)?
            } else {
                let run = run_dummy_delay(&spec, &inputs, &config, g, mode).map_err(usage)?;
                (run, Vec::new())
            };
            let t = &run.transcript;
            emit_transcript(args, t, out)?;
            let verdict = OrderedVerdict {
                ordered_delivery: verify_ordered_delivery(t, &pi),
                prefix_fair: verify_prefix_fairness(t, &pi),
                received: t.outputs().iter().map(|o| o.0).collect(),
                leakage_ok: audit_leakage(&ledger, &corrupt).is_ok(),
                aborted: t.aborted(),
                gaps_ok: matches!(cmd, MpcCmd::Dummy { .. })
                    .then(|| dummy_gaps_ok(t, n, g as u64, &corrupt)),
            };
            let must_deliver = mode == ThresholdMode::HonestMajority && corrupt.len() * 2 < n;
            let ok = verdict.prefix_fair
                && (!must_deliver || verdict.ordered_delivery)
                && verdict.gaps_ok.unwrap_or(true);
            emit(out, cli.json, &verdict)?;
            Ok(verdict_code(ok))
        }
        MpcCmd::Timelock {
            b,
            g,
            speeds,
            scheme,
            kappa,
            ..
        } => {
            let profile = match speeds {
                Some(s) => SolverProfile::parse(s).map_err(usage)?,
                None => SolverProfile::uniform(n),
            };
            let params = TimelockParams {
                b: *b,
                g: *g,
                scheme: (*scheme).into(),
                kappa: *kappa,
            };
            let run = run_timelock_delay(&spec, &inputs, &config, &profile, params).map_err(usage)?;
            emit_transcript(args, &run.transcript, out)?;
            let verdict = TimelockVerdict {
                order_ok: run.verdict.order_ok,
                gaps_ok: run.verdict.gaps_ok,
                unlock_ticks: run.unlock_ticks.clone(),
                order: run.order.as_slice().to_vec(),
                speed_ratio: profile.ratio(),
                compliant: profile.compliant(*b),
                issued_together: puzzles_issued_together(&run.transcript),
            };
            emit(out, cli.json, &verdict)?;
            Ok(verdict_code(verdict.order_ok && verdict.gaps_ok))
        }
    }
}

#[derive(Serialize)]
struct SolveReport {
    items: Vec<String>,
    steps: u64,
}

fn write_puzzle(cli: &Cli, file: &PuzzleFile, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut f = std::fs::File::create(p)?;
            emit(&mut f, cli.json, file)
        }
        None => emit(out, cli.json, file),
    }
}

fn puzzle(cli: &Cli, cmd: &PuzzleCmd, out: &mut dyn Write) -> Result<i32, CliError> {
    let mut rng = rng::stream(cli.seed, "cli/puzzle");
    match cmd {
        PuzzleCmd::Lock {
            data,
            t,
            scheme,
            kappa,
            out: path,
        } => {
            let data = decode_hex(data)?;
            let p = lock((*scheme).into(), *kappa, &data, *t, &mut rng).map_err(usage)?;
            write_puzzle(cli, &PuzzleFile::from_puzzle(&p), path.as_ref(), out)?;
            Ok(exit::OK)
        }
        PuzzleCmd::Solve { file } => {
            let p = read_json::<PuzzleFile>(file)?.to_puzzle()?;
            let (items, steps) = solve(&p).map_err(usage)?;
            let report = SolveReport {
                items: items.iter().map(hex::encode).collect(),
                steps,
            };
            emit(out, cli.json, &report)?;
            Ok(exit::OK)
        }
        PuzzleCmd::Line {
            items,
            delays,
            scheme,
            kappa,
            out: path,
        } => {
            let items = read_hex_list(items)?;
            let p = lock_line((*scheme).into(), *kappa, &items, delays, &mut rng).map_err(usage)?;
            write_puzzle(cli, &PuzzleFile::from_puzzle(&p), path.as_ref(), out)?;
            Ok(exit::OK)
        }
    }
}
