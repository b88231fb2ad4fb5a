//! Deterministic synchronous network simulator.
//!
//! Time advances in rounds; one round is one tick. A message sent in round
//! `r` is delivered at the start of round `r + 1`, except that rushing
//! corrupt parties see honest messages of their own round. Within a round the
//! nodes step in a fixed order: honest parties by index, the hub (a trusted
//! functionality node, never corrupt), then corrupt parties by index.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rng;

/// Default cap on the number of simulated rounds.
pub const DEFAULT_MAX_ROUNDS: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Party(usize),
    Hub,
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Party(i) => write!(f, "P{i}"),
            NodeId::Hub => f.write_str("hub"),
        }
    }
}

/// A message type carried by the simulator.
pub trait Payload: Clone {
    /// Short message kind recorded in the transcript.
    fn label(&self) -> &'static str;
    /// Canonical bytes; the transcript records a digest of them.
    fn encode(&self) -> Vec<u8>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<M> {
    pub from: NodeId,
    pub to: NodeId,
    pub sent: u64,
    pub msg: M,
}

/// Local computation speed in steps per tick, as a positive rational.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Speed {
    num: u64,
    den: u64,
}

impl Speed {
    pub const ONE: Speed = Speed { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self, SimError> {
        if num == 0 || den == 0 {
            return Err(SimError::Config("speed must be a positive rational".into()));
        }
        let g = gcd(num, den);
        Ok(Speed {
            num: num / g,
            den: den / g,
        })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    /// Steps completed after `ticks` ticks: `floor(speed * ticks)`.
    pub fn steps_in(&self, ticks: u64) -> u64 {
        (self.num as u128 * ticks as u128 / self.den as u128) as u64
    }

    /// Ticks needed for `steps` steps: `ceil(steps / speed)`.
    pub fn ticks_for(&self, steps: u64) -> u64 {
        (steps as u128 * self.den as u128).div_ceil(self.num as u128) as u64
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `self <= factor * other`.
    pub fn at_most_times(&self, factor: u64, other: &Speed) -> bool {
        self.num as u128 * other.den as u128
            <= factor as u128 * other.num as u128 * self.den as u128
    }
}

impl PartialOrd for Speed {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Speed {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(phase, round within phase)`; ordered lexicographically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbortPoint {
    pub phase: u32,
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdversaryConfig {
    pub corrupt: BTreeSet<usize>,
    /// From this point on, corrupt parties send nothing.
    pub abort_at: Option<AbortPoint>,
    pub rushing: bool,
}

impl AdversaryConfig {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn is_corrupt(&self, party: usize) -> bool {
        self.corrupt.contains(&party)
    }

    fn silenced(&self, party: usize, at: (u32, u32)) -> bool {
        self.is_corrupt(party) && self.abort_at.is_some_and(|a| (a.phase, a.round) <= at)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub seed: u64,
    pub adversary: AdversaryConfig,
    /// Per-party speeds; empty means every party runs one step per tick.
    pub speeds: Vec<Speed>,
    pub max_rounds: u64,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        SimConfig {
            n,
            seed,
            adversary: AdversaryConfig::honest(),
            speeds: Vec::new(),
            max_rounds: DEFAULT_MAX_ROUNDS,
        }
    }

    pub fn with_adversary(mut self, adversary: AdversaryConfig) -> Self {
        self.adversary = adversary;
        self
    }

    pub fn with_speeds(mut self, speeds: Vec<Speed>) -> Self {
        self.speeds = speeds;
        self
    }

    pub fn speed(&self, party: usize) -> Speed {
        self.speeds.get(party).copied().unwrap_or(Speed::ONE)
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.n == 0 {
            return Err(SimError::Config("need at least one party".into()));
        }
        if !self.speeds.is_empty() && self.speeds.len() != self.n {
            return Err(SimError::Config("one speed per party required".into()));
        }
        if let Some(&c) = self.adversary.corrupt.iter().next_back() {
            if c >= self.n {
                return Err(SimError::Config("corrupt party out of range".into()));
            }
        }
        Ok(())
    }
}

/// A single transcript entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Msg {
        tick: u64,
        delivered: u64,
        from: NodeId,
        to: NodeId,
        label: &'static str,
        digest: u64,
    },
    Checkpoint {
        tick: u64,
        index: usize,
    },
    Output {
        tick: u64,
        party: usize,
        value: Vec<u8>,
    },
    Clock {
        tick: u64,
        party: usize,
        count: u64,
    },
    Abort {
        tick: u64,
        phase: u32,
        reason: String,
    },
}

impl Event {
    pub fn tick(&self) -> u64 {
        match self {
            Event::Msg { tick, .. }
            | Event::Checkpoint { tick, .. }
            | Event::Output { tick, .. }
            | Event::Clock { tick, .. }
            | Event::Abort { tick, .. } => *tick,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    pub events: Vec<Event>,
    /// Number of rounds executed.
    pub rounds: u64,
}

impl Transcript {
    /// `(party, tick, value)` for every output event, in order.
    pub fn outputs(&self) -> Vec<(usize, u64, &[u8])> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Output { tick, party, value } => Some((*party, *tick, value.as_slice())),
                _ => None,
            })
            .collect()
    }

    /// `(index, tick)` for every checkpoint, in order.
    pub fn checkpoints(&self) -> Vec<(usize, u64)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Checkpoint { tick, index } => Some((*index, *tick)),
                _ => None,
            })
            .collect()
    }

    pub fn aborted(&self) -> bool {
        self.events.iter().any(|e| matches!(e, Event::Abort { .. }))
    }

    /// Ticks never decrease and checkpoint indices strictly increase.
    pub fn check_invariants(&self) -> Result<(), SimError> {
        let mut last_tick = 0;
        for e in &self.events {
            if e.tick() < last_tick {
                return Err(SimError::Invariant("tick went backwards".into()));
            }
            last_tick = e.tick();
        }
        let cps = self.checkpoints();
        if cps.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(SimError::Invariant(
                "checkpoint indices not increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Per-window, per-party clock evaluations between consecutive checkpoints:
/// `result[w][p]` counts party `p`'s evaluations with tick in
/// `(C_w.tick, C_{w+1}.tick]`.
pub fn clock_window_counts(transcript: &Transcript, n: usize) -> Result<Vec<Vec<u64>>, SimError> {
    let cps = transcript.checkpoints();
    if cps.len() < 2 {
        return Err(SimError::Invariant(alloc::format!(
            "need at least two checkpoints, found {}",
            cps.len()
        )));
    }
    let mut out = vec![vec![0u64; n]; cps.len() - 1];
    for e in &transcript.events {
        if let Event::Clock { tick, party, count } = e {
            if *party >= n {
                return Err(SimError::Invariant("clock event for unknown party".into()));
            }
            for (w, pair) in cps.windows(2).enumerate() {
                if *tick > pair[0].1 && *tick <= pair[1].1 {
                    out[w][*party] += count;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("no termination within {rounds} rounds")]
    Timeout { rounds: u64, transcript: Transcript },
    #[error("transcript invariant violated: {0}")]
    Invariant(String),
}

/// Whether a node keeps running after this round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Halted,
}

/// What a node may do during its step.
pub struct Ctx<'a, M> {
    node: NodeId,
    round: u64,
    phase: u32,
    sub: u32,
    n: usize,
    speed: Speed,
    rng: &'a mut ChaCha20Rng,
    outbox: Vec<(NodeId, M)>,
    events: Vec<Event>,
}

impl<M> Ctx<'_, M> {
    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn phase(&self) -> u32 {
        self.phase
    }

    pub fn sub_round(&self) -> u32 {
        self.sub
    }

    pub fn parties(&self) -> usize {
        self.n
    }

    pub fn speed(&self) -> Speed {
        self.speed
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        self.rng
    }

    pub fn send(&mut self, to: NodeId, msg: M) {
        self.outbox.push((to, msg));
    }

    pub fn output(&mut self, value: Vec<u8>) {
        if let NodeId::Party(party) = self.node {
            self.events.push(Event::Output {
                tick: self.round,
                party,
                value,
            });
        }
    }

    pub fn checkpoint(&mut self, index: usize) {
        self.events.push(Event::Checkpoint {
            tick: self.round,
            index,
        });
    }

    pub fn clock(&mut self, count: u64) {
        if let NodeId::Party(party) = self.node {
            if count > 0 {
                self.events.push(Event::Clock {
                    tick: self.round,
                    party,
                    count,
                });
            }
        }
    }

    pub fn abort(&mut self, reason: impl Into<String>) {
        self.events.push(Event::Abort {
            tick: self.round,
            phase: self.phase,
            reason: reason.into(),
        });
    }
}

/// A protocol: the state machines of all parties and of the hub.
pub trait Protocol {
    type Msg: Payload;

    /// Maps a global round to `(phase, round within phase)`.
    fn locate(&self, round: u64) -> (u32, u32);

    fn step(
        &mut self,
        node: NodeId,
        ctx: &mut Ctx<'_, Self::Msg>,
        inbox: Vec<Envelope<Self::Msg>>,
    ) -> Status;
}

fn digest(bytes: &[u8]) -> u64 {
    let d: [u8; 32] = Sha256::digest(bytes).into();
    u64::from_be_bytes(d[..8].try_into().unwrap())
}

/// Runs `protocol` until every honest party and the hub have halted.
pub fn run<P: Protocol>(protocol: &mut P, config: &SimConfig) -> Result<Transcript, SimError> {
    config.validate()?;
    let n = config.n;
    let adv = &config.adversary;

    let mut order: Vec<NodeId> = (0..n)
        .filter(|&i| !adv.is_corrupt(i))
        .map(NodeId::Party)
        .collect();
    order.push(NodeId::Hub);
    order.extend(adv.corrupt.iter().map(|&i| NodeId::Party(i)));

    let slot = |id: NodeId| match id {
        NodeId::Party(i) => i,
        NodeId::Hub => n,
    };
    let mut rngs: Vec<ChaCha20Rng> = (0..n)
        .map(|i| rng::indexed_stream(config.seed, "simnet/party", i as u64))
        .collect();
    rngs.push(rng::stream(config.seed, "simnet/hub"));

    let mut halted = vec![false; n + 1];
    let mut pending: Vec<Vec<Envelope<P::Msg>>> = vec![Vec::new(); n + 1];
    let mut transcript = Transcript::default();

    let mut round = 0u64;
    loop {
        let done = order
            .iter()
            .filter(|id| !matches!(id, NodeId::Party(i) if adv.is_corrupt(*i)))
            .all(|&id| halted[slot(id)]);
        if done {
            transcript.rounds = round;
            return Ok(transcript);
        }
        if round >= config.max_rounds {
            transcript.rounds = round;
            return Err(SimError::Timeout {
                rounds: round,
                transcript,
            });
        }

        let (phase, sub) = protocol.locate(round);
        let mut next: Vec<Vec<Envelope<P::Msg>>> = vec![Vec::new(); n + 1];
        let mut rushed: Vec<Vec<Envelope<P::Msg>>> = vec![Vec::new(); n + 1];
        let mut inboxes = core::mem::replace(&mut pending, vec![Vec::new(); n + 1]);

        for &id in &order {
            let s = slot(id);
            let mut inbox = core::mem::take(&mut inboxes[s]);
            inbox.append(&mut rushed[s]);
            if halted[s] {
                continue;
            }
            let sender_corrupt = matches!(id, NodeId::Party(i) if adv.is_corrupt(i));
            let mut ctx = Ctx {
                node: id,
                round,
                phase,
                sub,
                n,
                speed: match id {
                    NodeId::Party(i) => config.speed(i),
                    NodeId::Hub => Speed::ONE,
                },
                rng: &mut rngs[s],
                outbox: Vec::new(),
                events: Vec::new(),
            };
            let status = protocol.step(id, &mut ctx, inbox);
            let Ctx { outbox, events, .. } = ctx;
            transcript.events.extend(events);
            if status == Status::Halted {
                halted[s] = true;
            }
            let silenced = match id {
                NodeId::Party(i) => adv.silenced(i, (phase, sub)),
                NodeId::Hub => false,
            };
            if silenced {
                continue;
            }
            for (to, msg) in outbox {
                let to_corrupt = matches!(to, NodeId::Party(j) if adv.is_corrupt(j));
                let rush = adv.rushing && to_corrupt && !sender_corrupt;
                let delivered = if rush { round } else { round + 1 };
                transcript.events.push(Event::Msg {
                    tick: round,
                    delivered,
                    from: id,
                    to,
                    label: msg.label(),
                    digest: digest(&msg.encode()),
                });
                let env = Envelope {
                    from: id,
                    to,
                    sent: round,
                    msg,
                };
                if rush {
                    rushed[slot(to)].push(env);
                } else {
                    next[slot(to)].push(env);
                }
            }
        }
        pending = next;
        round += 1;
    }
}
