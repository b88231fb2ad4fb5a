//! Timed-delay MPC: ordered delivery with at least `G` clock evaluations
//! between consecutive outputs.
//!
//! Two constructions: dummy challenge/response rounds before every output
//! phase ([`run_dummy_delay`]), and time-lock puzzles with a geometric delay
//! schedule, solved concurrently at per-party speeds ([`run_timelock_delay`]).

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use thiserror::Error;

use crate::model::Permutation;
use crate::ordered::{
    run_ordered_ideal, OrderedError, OrderedOptions, OrderedRun, OrderedSpec, ThresholdMode,
};
use crate::simnet::{
    self, Ctx, Envelope, Event, NodeId, Payload, Protocol, SimConfig, SimError, Speed, Status,
    Transcript,
};
use crate::timed::{lock, unlock_line_at, Scheme, TimeLinePuzzle, TimedError, Work, WorkFunction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DelayError {
    #[error("invalid delay schedule: {0}")]
    Schedule(String),
    #[error("invalid solver profile: {0}")]
    Profile(String),
    #[error(transparent)]
    Ordered(#[from] OrderedError),
    #[error(transparent)]
    Timed(#[from] TimedError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Puzzle delays `t_1 = 1`, `t_{i+1} = (B*G + 1) * t_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelaySchedule {
    pub n: usize,
    pub b: u64,
    pub g: u64,
    pub t: Vec<u64>,
}

pub fn delay_schedule(n: usize, b: u64, g: u64) -> Result<DelaySchedule, DelayError> {
    if n == 0 {
        return Err(DelayError::Schedule("need at least one party".into()));
    }
    if b == 0 || g == 0 {
        return Err(DelayError::Schedule("B and G must be at least 1".into()));
    }
    let ratio = b
        .checked_mul(g)
        .and_then(|v| v.checked_add(1))
        .ok_or_else(|| DelayError::Schedule("B*G+1 overflows".into()))?;
    let mut t = vec![1u64];
    for _ in 1..n {
        let next = t[t.len() - 1]
            .checked_mul(ratio)
            .ok_or_else(|| DelayError::Schedule(format!("t_{} overflows u64", t.len() + 1)))?;
        t.push(next);
    }
    Ok(DelaySchedule { n, b, g, t })
}

impl DelaySchedule {
    /// Slowest-party evaluations guaranteed between unlocks `i` and `i+1`:
    /// `floor((t_{i+1} - t_i) / B)`.
    pub fn guaranteed_gaps(&self) -> Vec<u64> {
        self.t.windows(2).map(|w| (w[1] - w[0]) / self.b).collect()
    }

    pub fn max_delay(&self) -> u64 {
        self.t[self.n - 1]
    }
}

/// Per-party solving speeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverProfile {
    pub speeds: Vec<Speed>,
}

impl SolverProfile {
    pub fn new(speeds: Vec<Speed>) -> Result<Self, DelayError> {
        if speeds.is_empty() {
            return Err(DelayError::Profile("empty profile".into()));
        }
        Ok(SolverProfile { speeds })
    }

    pub fn uniform(n: usize) -> Self {
        SolverProfile {
            speeds: vec![Speed::ONE; n],
        }
    }

    /// Parses comma-separated decimals such as `1,1.5,2`.
    pub fn parse(s: &str) -> Result<Self, DelayError> {
        let speeds = s
            .split(',')
            .map(|p| parse_decimal(p.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(speeds)
    }

    pub fn slowest(&self) -> Speed {
        *self.speeds.iter().min().expect("non-empty")
    }

    pub fn fastest(&self) -> Speed {
        *self.speeds.iter().max().expect("non-empty")
    }

    /// `max / min`, as a float for reporting.
    pub fn ratio(&self) -> f64 {
        self.fastest().as_f64() / self.slowest().as_f64()
    }

    /// No party is more than `b` times faster than another.
    pub fn compliant(&self, b: u64) -> bool {
        self.fastest().at_most_times(b, &self.slowest())
    }

    /// Rescales so the slowest party makes exactly one step per tick.
    pub fn normalised(&self) -> Self {
        let m = self.slowest();
        let speeds = self
            .speeds
            .iter()
            .map(|s| Speed::new(s.num() * m.den(), s.den() * m.num()).expect("positive"))
            .collect();
        SolverProfile { speeds }
    }
}

fn parse_decimal(s: &str) -> Result<Speed, DelayError> {
    let bad = || DelayError::Profile(format!("bad speed {s:?}"));
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > 9 {
        return Err(bad());
    }
    let digits = |d: &str| d.is_empty() || d.bytes().all(|c| c.is_ascii_digit());
    if !digits(int) || !digits(frac) {
        return Err(bad());
    }
    let den = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let frac: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    let num = int
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(bad)?;
    Speed::new(num, den).map_err(|_| bad())
}

/// Ordered MPC with `g` dummy challenge/response rounds before each output.
pub fn run_dummy_delay(
    spec: &OrderedSpec,
    inputs: &[Vec<u8>],
    config: &SimConfig,
    g: u32,
    mode: ThresholdMode,
) -> Result<OrderedRun, DelayError> {
    let opts = OrderedOptions {
        mode,
        dummy_rounds: g,
    };
    Ok(run_ordered_ideal(spec, inputs, config, opts)?.0)
}

/// Every honest party logs at least `g` clock evaluations in every window
/// between consecutive checkpoints. Vacuous with fewer than two checkpoints.
pub fn dummy_gaps_ok(transcript: &Transcript, n: usize, g: u64, corrupt: &BTreeSet<usize>) -> bool {
    if transcript.checkpoints().len() < 2 {
        return true;
    }
    match simnet::clock_window_counts(transcript, n) {
        Ok(w) => w.iter().all(|row| {
            row.iter()
                .enumerate()
                .all(|(p, &c)| corrupt.contains(&p) || c >= g)
        }),
        Err(_) => false,
    }
}

/// Messages of the time-lock construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimelockMsg {
    Input { x: Vec<u8>, mask: Vec<u8> },
    Puzzle(TimeLinePuzzle),
}

impl Payload for TimelockMsg {
    fn label(&self) -> &'static str {
        match self {
            TimelockMsg::Input { .. } => "input",
            TimelockMsg::Puzzle(_) => "puzzle",
        }
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut put = |b: &[u8]| {
            out.extend_from_slice(&(b.len() as u32).to_le_bytes());
            out.extend_from_slice(b);
        };
        match self {
            TimelockMsg::Input { x, mask } => {
                put(&[0]);
                put(x);
                put(mask);
            }
            TimelockMsg::Puzzle(p) => {
                put(&[1, p.scheme as u8]);
                put(&p.kappa.to_le_bytes());
                put(&p.x);
                for t in &p.t {
                    put(&t.to_le_bytes());
                }
                for b in &p.b {
                    put(b);
                }
                put(&p.a);
            }
        }
        out
    }
}

/// Round in which the hub issues every puzzle.
const ISSUE_ROUND: u64 = 1;

struct Solving {
    puzzle: TimeLinePuzzle,
    work: Work,
    state: Vec<u8>,
    steps: u64,
}

#[derive(Default)]
struct TimelockParty {
    mask: Vec<u8>,
    solving: Option<Solving>,
    unlocked: Option<u64>,
    output: Option<Vec<u8>>,
}

struct TimelockProtocol<'a> {
    spec: &'a OrderedSpec,
    inputs: &'a [Vec<u8>],
    schedule: &'a DelaySchedule,
    scheme: Scheme,
    kappa: u32,
    parties: Vec<TimelockParty>,
    order: Option<Permutation>,
    unlocks: usize,
    failure: Option<DelayError>,
}

impl TimelockProtocol<'_> {
    fn party(
        &mut self,
        j: usize,
        ctx: &mut Ctx<'_, TimelockMsg>,
        inbox: Vec<Envelope<TimelockMsg>>,
    ) -> Status {
        let round = ctx.round();
        if round == 0 {
            let mut mask = vec![0u8; self.spec.output_len];
            ctx.rng().fill_bytes(&mut mask);
            self.parties[j].mask = mask.clone();
            ctx.send(
                NodeId::Hub,
                TimelockMsg::Input {
                    x: self.inputs[j].clone(),
                    mask,
                },
            );
            return Status::Running;
        }
        let st = &mut self.parties[j];
        for env in inbox {
            if let TimelockMsg::Puzzle(p) = env.msg {
                match p.work() {
                    Ok(work) => {
                        st.solving = Some(Solving {
                            state: p.x.clone(),
                            puzzle: p,
                            work,
                            steps: 0,
                        })
                    }
                    Err(e) => self.failure = Some(e.into()),
                }
            }
        }
        let Some(s) = st.solving.as_mut() else {
            // Nothing can arrive any more once the issue round is over.
            return if round > ISSUE_ROUND {
                Status::Halted
            } else {
                Status::Running
            };
        };
        let target = s.puzzle.t[0];
        let allowed = ctx.speed().steps_in(round - ISSUE_ROUND).min(target);
        let count = allowed - s.steps;
        s.state = s.work.iterate(s.steps, &s.state, count);
        s.steps = allowed;
        ctx.clock(count);
        if s.steps < target {
            return Status::Running;
        }
        let masked = unlock_line_at(&s.puzzle, 0, &s.state);
        let value: Vec<u8> = masked.iter().zip(&st.mask).map(|(a, b)| a ^ b).collect();
        st.unlocked = Some(round - ISSUE_ROUND);
        st.output = Some(value.clone());
        ctx.output(value);
        self.unlocks += 1;
        ctx.checkpoint(self.unlocks);
        Status::Halted
    }

    fn hub(&mut self, ctx: &mut Ctx<'_, TimelockMsg>, inbox: Vec<Envelope<TimelockMsg>>) -> Status {
        if ctx.round() < ISSUE_ROUND {
            return Status::Running;
        }
        let n = self.schedule.n;
        let l = self.spec.output_len;
        // Missing inputs and masks default to zeros.
        let mut xs = vec![vec![0u8; l]; n];
        let mut masks = vec![vec![0u8; l]; n];
        for env in inbox {
            if let (NodeId::Party(j), TimelockMsg::Input { x, mask }) = (env.from, env.msg) {
                xs[j] = x;
                if mask.len() == l {
                    masks[j] = mask;
                }
            }
        }
        let (order, ys) = match self.spec.evaluate(&xs) {
            Ok(v) => v,
            Err(e) => {
                ctx.abort(format!("{e}"));
                self.failure = Some(e.into());
                return Status::Halted;
            }
        };
        let positions = order.positions();
        for j in 0..n {
            let item: Vec<u8> = ys[j].iter().zip(&masks[j]).map(|(a, b)| a ^ b).collect();
            let delay = self.schedule.t[positions[j] - 1];
            match lock(self.scheme, self.kappa, &item, delay, ctx.rng()) {
                Ok(p) => ctx.send(NodeId::Party(j), TimelockMsg::Puzzle(p)),
                Err(e) => {
                    ctx.abort(format!("{e}"));
                    self.failure = Some(e.into());
                    return Status::Halted;
                }
            }
        }
        self.order = Some(order);
        Status::Halted
    }
}

impl Protocol for TimelockProtocol<'_> {
    type Msg = TimelockMsg;

    fn locate(&self, round: u64) -> (u32, u32) {
        if round <= ISSUE_ROUND {
            (0, round as u32)
        } else {
            (1, (round - ISSUE_ROUND - 1).min(u32::MAX as u64) as u32)
        }
    }

    fn step(
        &mut self,
        node: NodeId,
        ctx: &mut Ctx<'_, TimelockMsg>,
        inbox: Vec<Envelope<TimelockMsg>>,
    ) -> Status {
        match node {
            NodeId::Party(j) => self.party(j, ctx, inbox),
            NodeId::Hub => self.hub(ctx, inbox),
        }
    }
}

/// Outcome checks of a time-lock run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayVerdict {
    /// Every party unlocked, strictly in the order `pi`.
    pub order_ok: bool,
    /// See [`verify_delay_gaps`].
    pub gaps_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimelockRun {
    pub transcript: Transcript,
    pub schedule: DelaySchedule,
    /// The normalised profile the parties ran with.
    pub profile: SolverProfile,
    pub order: Permutation,
    /// Ticks after issue at which each party opened its puzzle.
    pub unlock_ticks: Vec<Option<u64>>,
    pub outputs: Vec<Option<Vec<u8>>>,
    pub verdict: DelayVerdict,
}

/// Parameters of [`run_timelock_delay`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimelockParams {
    pub b: u64,
    pub g: u64,
    pub scheme: Scheme,
    pub kappa: u32,
}

/// Runs the time-lock construction. The hub locks party `j`'s masked output
/// with delay `t_{pos(j)}` and issues every puzzle in the same round; each
/// party then makes `floor(speed * ticks)` chain steps. Speeds come from
/// `profile`, normalised so the slowest party makes one step per tick; the
/// speeds in `config` are ignored.
pub fn run_timelock_delay(
    spec: &OrderedSpec,
    inputs: &[Vec<u8>],
    config: &SimConfig,
    profile: &SolverProfile,
    params: TimelockParams,
) -> Result<TimelockRun, DelayError> {
    let n = inputs.len();
    if n != config.n || profile.speeds.len() != n {
        return Err(DelayError::Profile(format!(
            "{} inputs, {} parties, {} speeds",
            n,
            config.n,
            profile.speeds.len()
        )));
    }
    let schedule = delay_schedule(n, params.b, params.g)?;
    let profile = profile.normalised();
    let mut cfg = config.clone().with_speeds(profile.speeds.clone());
    cfg.max_rounds = cfg.max_rounds.max(schedule.max_delay() + ISSUE_ROUND + 2);

    let mut proto = TimelockProtocol {
        spec,
        inputs,
        schedule: &schedule,
        scheme: params.scheme,
        kappa: params.kappa,
        parties: (0..n).map(|_| TimelockParty::default()).collect(),
        order: None,
        unlocks: 0,
        failure: None,
    };
    let transcript = simnet::run(&mut proto, &cfg)?;
    if let Some(e) = proto.failure {
        return Err(e);
    }
    let order = proto.order.expect("hub issued puzzles");
    let unlock_ticks: Vec<Option<u64>> = proto.parties.iter().map(|p| p.unlocked).collect();
    let order_ok = unlock_order_ok(&unlock_ticks, &order);
    let gaps_ok = verify_delay_gaps(&transcript, params.g, &schedule, &profile);
    Ok(TimelockRun {
        transcript,
        schedule: schedule.clone(),
        profile,
        order,
        unlock_ticks,
        outputs: proto.parties.into_iter().map(|p| p.output).collect(),
        verdict: DelayVerdict { order_ok, gaps_ok },
    })
}

fn unlock_order_ok(ticks: &[Option<u64>], order: &Permutation) -> bool {
    let mut last = None;
    for &p in order.as_slice() {
        let Some(t) = ticks[p] else {
            return false;
        };
        if last.is_some_and(|l| t <= l) {
            return false;
        }
        last = Some(t);
    }
    true
}

/// True iff the transcript has `n` checkpoints and the slowest party of
/// `profile` (after normalisation) could make at least `g` clock
/// evaluations between every two consecutive ones.
pub fn verify_delay_gaps(
    transcript: &Transcript,
    g: u64,
    schedule: &DelaySchedule,
    profile: &SolverProfile,
) -> bool {
    let cps = transcript.checkpoints();
    if cps.len() != schedule.n {
        return false;
    }
    let slowest = profile.normalised().slowest();
    cps.windows(2)
        .all(|w| slowest.steps_in(w[1].1 - w[0].1) >= g)
}

/// Every puzzle message was sent in one round.
pub fn puzzles_issued_together(transcript: &Transcript) -> bool {
    let ticks: BTreeSet<u64> = transcript
        .events
        .iter()
        .filter_map(|e| match e {
            Event::Msg {
                tick,
                label: "puzzle",
                ..
            } => Some(*tick),
            _ => None,
        })
        .collect();
    ticks.len() == 1
}
