//! Ordered MPC: every party learns its output of `f`, and the outputs are
//! released one per phase in the order chosen by `p`.
//!
//! The computation itself runs on a [`MpcBackend`]; [`IdealBackend`] plays a
//! trusted party and keeps a ledger of what the corrupt coalition learns.
//! After a share phase that secret-shares `(pi, y)`, phase `i` hands every
//! party a vector of masked, tagged values in which only the slot of the
//! player served at time `i` carries a real value. With `dummy_rounds > 0`
//! each phase starts with that many challenge/response rounds (the
//! dummy-round variant for timed delays).

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use thiserror::Error;

use crate::model::Permutation;
use crate::sharing::{reconstruct_bytes, share_bytes, ByteShare};
use crate::simnet::{
    self, Ctx, Envelope, NodeId, Payload, Protocol, SimConfig, SimError, Status, Transcript,
};

/// Tag byte of a real output.
pub const TAG_VALUE: u8 = 0;
/// Tag byte of the "no output this phase" marker.
pub const TAG_BOTTOM: u8 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrderedError {
    #[error("invalid ordered-MPC spec: {0}")]
    InvalidSpec(String),
    #[error("function evaluation failed: {0}")]
    Evaluation(String),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("backend failure: {0}")]
pub struct BackendError(pub String);

/// The output function `f`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputFn {
    /// `y_i = x_i`.
    Identity,
    /// Every party gets the XOR of all inputs.
    XorSum,
    /// Outputs looked up by the full input vector.
    Table(BTreeMap<Vec<Vec<u8>>, Vec<Vec<u8>>>),
    /// Fixed outputs, independent of the inputs.
    Fixed(Vec<Vec<u8>>),
}

/// The ordering function `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderFn {
    Identity,
    /// Parties with larger inputs (bytewise) are served first; ties by index.
    SortDescending,
    Table(BTreeMap<Vec<Vec<u8>>, Permutation>),
    Fixed(Permutation),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedSpec {
    pub f: OutputFn,
    pub p: OrderFn,
    /// Output length `L` in bytes.
    pub output_len: usize,
}

impl OrderedSpec {
    /// Reference evaluation of `(p(x), f(x))`.
    pub fn evaluate(
        &self,
        inputs: &[Vec<u8>],
    ) -> Result<(Permutation, Vec<Vec<u8>>), OrderedError> {
        let n = inputs.len();
        let l = self.output_len;
        let outputs = match &self.f {
            OutputFn::Identity => inputs.to_vec(),
            OutputFn::XorSum => {
                let mut acc = vec![0u8; l];
                for x in inputs {
                    if x.len() != l {
                        return Err(OrderedError::Evaluation(format!(
                            "xor_sum input of {} bytes, expected {l}",
                            x.len()
                        )));
                    }
                    acc.iter_mut().zip(x).for_each(|(a, b)| *a ^= b);
                }
                vec![acc; n]
            }
            OutputFn::Table(t) => t
                .get(inputs)
                .cloned()
                .ok_or_else(|| OrderedError::Evaluation("input vector not in table".into()))?,
            OutputFn::Fixed(v) => v.clone(),
        };
        if outputs.len() != n || outputs.iter().any(|y| y.len() != l) {
            return Err(OrderedError::Evaluation(format!(
                "f must give {n} outputs of {l} bytes"
            )));
        }
        let order = match &self.p {
            OrderFn::Identity => Permutation::identity(n),
            OrderFn::SortDescending => {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| inputs[b].cmp(&inputs[a]).then(a.cmp(&b)));
                Permutation::new(idx).expect("sorted indices")
            }
            OrderFn::Table(t) => t.get(inputs).cloned().ok_or_else(|| {
                OrderedError::Evaluation("input vector not in order table".into())
            })?,
            OrderFn::Fixed(pi) => pi.clone(),
        };
        if order.len() != n {
            return Err(OrderedError::Evaluation(
                "order has the wrong length".into(),
            ));
        }
        Ok((order, outputs))
    }
}

/// Reconstruction threshold policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    /// `k = ceil(n / 2)`; honest parties continue after an abort.
    HonestMajority,
    /// `k = n`; an abort stops every later phase.
    DishonestMajority,
}

impl ThresholdMode {
    pub fn threshold(&self, n: usize) -> usize {
        match self {
            ThresholdMode::HonestMajority => n.div_ceil(2).max(1),
            ThresholdMode::DishonestMajority => n,
        }
    }
}

/// Something the corrupt coalition learns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Leak {
    Input {
        party: usize,
    },
    Output {
        party: usize,
        value: Vec<u8>,
    },
    Position {
        party: usize,
        position: usize,
    },
    NotAtPosition {
        party: usize,
        position: usize,
    },
    /// Fewer shares than the threshold: no information.
    SharesBelowThreshold {
        count: usize,
        threshold: usize,
    },
    /// Enough shares to reconstruct every output and the order.
    Reconstructable {
        count: usize,
        threshold: usize,
    },
}

impl Leak {
    fn subject(&self) -> Option<usize> {
        match self {
            Leak::Input { party }
            | Leak::Output { party, .. }
            | Leak::Position { party, .. }
            | Leak::NotAtPosition { party, .. } => Some(*party),
            Leak::SharesBelowThreshold { .. } | Leak::Reconstructable { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakRecord {
    pub phase: u32,
    pub leak: Leak,
}

/// Checks that the coalition learned only its own inputs, outputs and
/// positions. Returns the first offending record.
pub fn audit_leakage(ledger: &[LeakRecord], corrupt: &BTreeSet<usize>) -> Result<(), LeakRecord> {
    for r in ledger {
        let ok = match &r.leak {
            Leak::Reconstructable { .. } => false,
            Leak::SharesBelowThreshold { .. } => true,
            other => other.subject().is_some_and(|p| corrupt.contains(&p)),
        };
        if !ok {
            return Err(r.clone());
        }
    }
    Ok(())
}

/// A function computed by the backend on behalf of the parties.
pub trait Functionality {
    fn name(&self) -> &'static str;
    fn compute(
        &self,
        inputs: &[Option<Vec<u8>>],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Option<Vec<u8>>>, BackendError>;
    /// What the coalition learns from its own inputs and outputs.
    fn leakage(
        &self,
        inputs: &[Option<Vec<u8>>],
        outputs: &[Option<Vec<u8>>],
        corrupt: &BTreeSet<usize>,
    ) -> Vec<Leak>;
}

/// Executes functionalities for the protocol.
pub trait MpcBackend {
    fn evaluate(
        &mut self,
        phase: u32,
        functionality: &dyn Functionality,
        inputs: &[Option<Vec<u8>>],
        corrupt: &BTreeSet<usize>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Option<Vec<u8>>>, BackendError>;
}

/// A trusted party: evaluates directly and records the coalition's view.
#[derive(Debug, Clone, Default)]
pub struct IdealBackend {
    ledger: Vec<LeakRecord>,
}

impl IdealBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leakage(&self) -> &[LeakRecord] {
        &self.ledger
    }
}

impl MpcBackend for IdealBackend {
    fn evaluate(
        &mut self,
        phase: u32,
        functionality: &dyn Functionality,
        inputs: &[Option<Vec<u8>>],
        corrupt: &BTreeSet<usize>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Option<Vec<u8>>>, BackendError> {
        let outputs = functionality.compute(inputs, rng)?;
        for &c in corrupt {
            if inputs.get(c).is_some_and(Option::is_some) {
                self.ledger.push(LeakRecord {
                    phase,
                    leak: Leak::Input { party: c },
                });
            }
        }
        for leak in functionality.leakage(inputs, &outputs, corrupt) {
            self.ledger.push(LeakRecord { phase, leak });
        }
        Ok(outputs)
    }
}

/// Fixed-layout encoding of `(pi, y)`: `n` order bytes, then each output.
fn encode_result(order: &Permutation, outputs: &[Vec<u8>]) -> Vec<u8> {
    let mut out: Vec<u8> = order.as_slice().iter().map(|&p| p as u8).collect();
    for y in outputs {
        out.extend_from_slice(y);
    }
    out
}

fn decode_result(bytes: &[u8], n: usize, l: usize) -> Option<(Permutation, Vec<Vec<u8>>)> {
    if bytes.len() != n + n * l {
        return None;
    }
    let order = Permutation::new(bytes[..n].iter().map(|&b| b as usize).collect()).ok()?;
    let outputs = bytes[n..]
        .chunks(l.max(1))
        .take(n)
        .map(<[u8]>::to_vec)
        .collect::<Vec<_>>();
    let outputs = if l == 0 { vec![Vec::new(); n] } else { outputs };
    Some((order, outputs))
}

fn shares_leak(outputs: &[Option<Vec<u8>>], corrupt: &BTreeSet<usize>, k: usize) -> Leak {
    let count = corrupt
        .iter()
        .filter(|&&c| outputs.get(c).is_some_and(Option::is_some))
        .count();
    if count >= k {
        Leak::Reconstructable {
            count,
            threshold: k,
        }
    } else {
        Leak::SharesBelowThreshold {
            count,
            threshold: k,
        }
    }
}

/// Evaluates `(pi, y)` and deals Shamir shares of it.
pub struct ShareFunctionality<'a> {
    pub spec: &'a OrderedSpec,
    pub n: usize,
    pub k: usize,
    pub mode: ThresholdMode,
}

impl Functionality for ShareFunctionality<'_> {
    fn name(&self) -> &'static str {
        "share"
    }

    fn compute(
        &self,
        inputs: &[Option<Vec<u8>>],
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Option<Vec<u8>>>, BackendError> {
        if self.mode == ThresholdMode::DishonestMajority && inputs.iter().any(Option::is_none) {
            return Err(BackendError("missing input".into()));
        }
        let xs: Vec<Vec<u8>> = inputs
            .iter()
            .map(|x| x.clone().unwrap_or_else(|| vec![0u8; self.spec.output_len]))
            .collect();
        let (order, ys) = self
            .spec
            .evaluate(&xs)
            .map_err(|e| BackendError(format!("{e}")))?;
        let shares = share_bytes(&encode_result(&order, &ys), self.k, self.n, rng)
            .map_err(|e| BackendError(format!("{e}")))?;
        Ok(shares.into_iter().map(|s| Some(s.encode())).collect())
    }

    fn leakage(
        &self,
        _: &[Option<Vec<u8>>],
        outputs: &[Option<Vec<u8>>],
        corrupt: &BTreeSet<usize>,
    ) -> Vec<Leak> {
        if corrupt.is_empty() {
            return Vec::new();
        }
        vec![shares_leak(outputs, corrupt, self.k)]
    }
}

/// Phase `i`: reconstructs `(pi, y)` and returns the masked vector `z_i`
/// to everyone.
pub struct PhaseFunctionality {
    pub phase: usize,
    pub n: usize,
    pub k: usize,
    pub output_len: usize,
}

/// Splits a phase input into `(share bytes, mask)`.
fn split_phase_input(bytes: &[u8], mask_len: usize) -> Option<(&[u8], &[u8])> {
    if bytes.len() < mask_len {
        return None;
    }
    let (share, mask) = bytes.split_at(bytes.len() - mask_len);
    Some((share, mask))
}

/// Broadcast of phase `i`: the defaulted parties and every masked slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedVector {
    pub defaulted: Vec<usize>,
    pub slots: Vec<Vec<u8>>,
}

impl MaskedVector {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        put_u32(&mut out, self.defaulted.len() as u32);
        for &d in &self.defaulted {
            put_u32(&mut out, d as u32);
        }
        put_u32(&mut out, self.slots.len() as u32);
        for s in &self.slots {
            put_bytes(&mut out, s);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader(bytes);
        let nd = r.u32()? as usize;
        let defaulted = (0..nd)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Option<Vec<_>>>()?;
        let ns = r.u32()? as usize;
        let slots = (0..ns).map(|_| r.bytes()).collect::<Option<Vec<_>>>()?;
        r.0.is_empty().then_some(MaskedVector { defaulted, slots })
    }
}

fn xor(a: &[u8], b: &[u8]) -> Vec<u8> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

impl PhaseFunctionality {
    fn mask_len(&self) -> usize {
        self.output_len + 1
    }
}

impl Functionality for PhaseFunctionality {
    fn name(&self) -> &'static str {
        "phase"
    }

    fn compute(
        &self,
        inputs: &[Option<Vec<u8>>],
        _: &mut dyn RngCore,
    ) -> Result<Vec<Option<Vec<u8>>>, BackendError> {
        let ml = self.mask_len();
        let mut shares = Vec::new();
        let mut masks = vec![vec![0u8; ml]; self.n];
        let mut defaulted = Vec::new();
        for (j, inp) in inputs.iter().enumerate() {
            match inp.as_deref().and_then(|b| split_phase_input(b, ml)) {
                Some((share, mask)) => {
                    let s = ByteShare::decode(share)
                        .ok_or_else(|| BackendError(format!("bad share from {j}")))?;
                    shares.push(s);
                    masks[j] = mask.to_vec();
                }
                None => defaulted.push(j),
            }
        }
        let bytes = reconstruct_bytes(&shares, self.k)
            .map_err(|e| BackendError(format!("{e}")))?
            .ok_or_else(|| {
                BackendError(format!(
                    "{} shares below threshold {}",
                    shares.len(),
                    self.k
                ))
            })?;
        let (order, ys) = decode_result(&bytes, self.n, self.output_len)
            .ok_or_else(|| BackendError("reconstructed value malformed".into()))?;
        let served = order.player_at(self.phase);
        let slots = (0..self.n)
            .map(|j| {
                let mut plain = vec![0u8; ml];
                if j == served {
                    plain[0] = TAG_VALUE;
                    plain[1..].copy_from_slice(&ys[j]);
                } else {
                    plain[0] = TAG_BOTTOM;
                }
                xor(&plain, &masks[j])
            })
            .collect();
        let msg = MaskedVector { defaulted, slots }.encode();
        Ok(vec![Some(msg); self.n])
    }

    fn leakage(
        &self,
        inputs: &[Option<Vec<u8>>],
        outputs: &[Option<Vec<u8>>],
        corrupt: &BTreeSet<usize>,
    ) -> Vec<Leak> {
        let ml = self.mask_len();
        let Some(mv) = corrupt
            .iter()
            .find_map(|&c| outputs.get(c).cloned().flatten())
            .and_then(|b| MaskedVector::decode(&b))
        else {
            return Vec::new();
        };
        let mut leaks = Vec::new();
        for (l, slot) in mv.slots.iter().enumerate() {
            // The coalition can open slot l only if it knows l's mask.
            let mask = if mv.defaulted.contains(&l) {
                vec![0u8; ml]
            } else if corrupt.contains(&l) {
                match inputs[l].as_deref().and_then(|b| split_phase_input(b, ml)) {
                    Some((_, m)) => m.to_vec(),
                    None => continue,
                }
            } else {
                continue;
            };
            let plain = xor(slot, &mask);
            if plain[0] == TAG_VALUE {
                leaks.push(Leak::Output {
                    party: l,
                    value: plain[1..].to_vec(),
                });
                leaks.push(Leak::Position {
                    party: l,
                    position: self.phase,
                });
            } else {
                leaks.push(Leak::NotAtPosition {
                    party: l,
                    position: self.phase,
                });
            }
        }
        leaks
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

struct Reader<'a>(&'a [u8]);

impl Reader<'_> {
    fn u32(&mut self) -> Option<u32> {
        if self.0.len() < 4 {
            return None;
        }
        let (h, t) = self.0.split_at(4);
        self.0 = t;
        Some(u32::from_le_bytes(h.try_into().ok()?))
    }

    fn bytes(&mut self) -> Option<Vec<u8>> {
        let len = self.u32()? as usize;
        if self.0.len() < len {
            return None;
        }
        let (h, t) = self.0.split_at(len);
        self.0 = t;
        Some(h.to_vec())
    }
}

/// Messages of the ordered protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderedMsg {
    Input(Vec<u8>),
    Share(Vec<u8>),
    Challenge { phase: u32, round: u32 },
    Response { phase: u32, round: u32 },
    PhaseInput(Vec<u8>),
    Masked { phase: u32, vector: Vec<u8> },
    Abort { phase: u32 },
}

impl Payload for OrderedMsg {
    fn label(&self) -> &'static str {
        match self {
            OrderedMsg::Input(_) => "input",
            OrderedMsg::Share(_) => "share",
            OrderedMsg::Challenge { .. } => "challenge",
            OrderedMsg::Response { .. } => "response",
            OrderedMsg::PhaseInput(_) => "phase_input",
            OrderedMsg::Masked { .. } => "masked",
            OrderedMsg::Abort { .. } => "abort",
        }
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            OrderedMsg::Input(b) => {
                out.push(0);
                put_bytes(&mut out, b);
            }
            OrderedMsg::Share(b) => {
                out.push(1);
                put_bytes(&mut out, b);
            }
            OrderedMsg::Challenge { phase, round } => {
                out.push(2);
                put_u32(&mut out, *phase);
                put_u32(&mut out, *round);
            }
            OrderedMsg::Response { phase, round } => {
                out.push(3);
                put_u32(&mut out, *phase);
                put_u32(&mut out, *round);
            }
            OrderedMsg::PhaseInput(b) => {
                out.push(4);
                put_bytes(&mut out, b);
            }
            OrderedMsg::Masked { phase, vector } => {
                out.push(5);
                put_u32(&mut out, *phase);
                put_bytes(&mut out, vector);
            }
            OrderedMsg::Abort { phase } => {
                out.push(6);
                put_u32(&mut out, *phase);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
struct PartyState {
    share: Option<Vec<u8>>,
    masks: BTreeMap<u32, Vec<u8>>,
    challenges: BTreeMap<(u32, u32), BTreeSet<usize>>,
    responses: BTreeMap<(u32, u32), BTreeSet<usize>>,
    abort_seen: bool,
    output: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Default)]
struct HubState {
    delivered: Option<u32>,
}

const SHARE_PHASE_ROUNDS: u64 = 2;

struct OrderedProtocol<'a, B: MpcBackend + ?Sized> {
    spec: &'a OrderedSpec,
    inputs: &'a [Vec<u8>],
    n: usize,
    k: usize,
    mode: ThresholdMode,
    dummy_rounds: u32,
    corrupt: BTreeSet<usize>,
    backend: &'a mut B,
    parties: Vec<PartyState>,
    hub: HubState,
}

impl<B: MpcBackend + ?Sized> OrderedProtocol<'_, B> {
    fn phase_len(&self) -> u64 {
        2 * self.dummy_rounds as u64 + 3
    }

    fn input_sub(&self) -> u32 {
        2 * self.dummy_rounds
    }

    fn party_step(
        &mut self,
        j: usize,
        ctx: &mut Ctx<'_, OrderedMsg>,
        inbox: Vec<Envelope<OrderedMsg>>,
    ) -> Status {
        let phase = ctx.phase();
        let sub = ctx.sub_round();
        let strict = self.mode == ThresholdMode::DishonestMajority;
        let ml = self.spec.output_len + 1;
        let n = self.n;
        let st = &mut self.parties[j];

        for env in inbox {
            let NodeId::Party(from) = env.from else {
                match env.msg {
                    OrderedMsg::Share(b) => st.share = Some(b),
                    OrderedMsg::Abort { .. } => st.abort_seen = true,
                    OrderedMsg::Masked { phase: i, vector } => {
                        let Some(mv) = MaskedVector::decode(&vector) else {
                            continue;
                        };
                        let mask = if mv.defaulted.contains(&j) {
                            vec![0u8; ml]
                        } else {
                            match st.masks.get(&i) {
                                Some(m) => m.clone(),
                                None => continue,
                            }
                        };
                        let plain = xor(&mv.slots[j], &mask);
                        if plain.first() == Some(&TAG_VALUE) && st.output.is_none() {
                            st.output = Some(plain[1..].to_vec());
                            ctx.output(plain[1..].to_vec());
                        }
                    }
                    _ => {}
                }
                continue;
            };
            match env.msg {
                OrderedMsg::Challenge { phase, round } => {
                    st.challenges
                        .entry((phase, round))
                        .or_default()
                        .insert(from);
                }
                OrderedMsg::Response { phase, round } => {
                    st.responses.entry((phase, round)).or_default().insert(from);
                }
                _ => {}
            }
        }

        if strict && st.abort_seen {
            return Status::Halted;
        }
        if phase == 0 {
            if sub == 0 {
                ctx.send(NodeId::Hub, OrderedMsg::Input(self.inputs[j].clone()));
            }
            return Status::Running;
        }

        let g_total = self.dummy_rounds;
        let others = |set: Option<&BTreeSet<usize>>| set.map_or(0, BTreeSet::len) >= n - 1;
        if sub < 2 * g_total {
            let g = sub / 2;
            if sub.is_multiple_of(2) {
                if g > 0 && strict && !others(st.responses.get(&(phase, g - 1))) {
                    ctx.abort(format!("P{j}: missing dummy response"));
                    return Status::Halted;
                }
                for o in (0..n).filter(|&o| o != j) {
                    ctx.send(NodeId::Party(o), OrderedMsg::Challenge { phase, round: g });
                }
            } else {
                let from: Vec<usize> = st
                    .challenges
                    .get(&(phase, g))
                    .map(|s| s.iter().copied().collect())
                    .unwrap_or_default();
                if strict && from.len() < n - 1 {
                    ctx.abort(format!("P{j}: missing dummy challenge"));
                    return Status::Halted;
                }
                for &o in &from {
                    ctx.send(NodeId::Party(o), OrderedMsg::Response { phase, round: g });
                }
                ctx.clock(from.len() as u64);
            }
            return Status::Running;
        }
        let input_sub = 2 * g_total;
        if sub == input_sub {
            if g_total > 0 && strict && !others(st.responses.get(&(phase, g_total - 1))) {
                ctx.abort(format!("P{j}: missing dummy response"));
                return Status::Halted;
            }
            if let Some(share) = st.share.clone() {
                let mut mask = vec![0u8; ml];
                ctx.rng().fill_bytes(&mut mask);
                st.masks.insert(phase, mask.clone());
                let mut payload = share;
                payload.extend_from_slice(&mask);
                ctx.send(NodeId::Hub, OrderedMsg::PhaseInput(payload));
            }
            return Status::Running;
        }
        if sub == input_sub + 2 && phase as usize == n {
            return Status::Halted;
        }
        Status::Running
    }

    fn hub_step(
        &mut self,
        ctx: &mut Ctx<'_, OrderedMsg>,
        inbox: Vec<Envelope<OrderedMsg>>,
    ) -> Status {
        let phase = ctx.phase();
        let sub = ctx.sub_round();
        let n = self.n;
        let strict = self.mode == ThresholdMode::DishonestMajority;
        let mut received: Vec<Option<Vec<u8>>> = vec![None; n];
        for env in inbox {
            if let NodeId::Party(from) = env.from {
                match env.msg {
                    OrderedMsg::Input(b) | OrderedMsg::PhaseInput(b) => received[from] = Some(b),
                    _ => {}
                }
            }
        }

        let evaluate = |this: &mut Self, ctx: &mut Ctx<'_, OrderedMsg>, f: &dyn Functionality| {
            let corrupt = this.corrupt.clone();
            this.backend
                .evaluate(phase, f, &received, &corrupt, ctx.rng())
        };

        if phase == 0 {
            if sub == 1 {
                let f = ShareFunctionality {
                    spec: self.spec,
                    n,
                    k: self.k,
                    mode: self.mode,
                };
                match evaluate(self, ctx, &f) {
                    Ok(outs) => {
                        for (j, o) in outs.into_iter().enumerate() {
                            if let Some(b) = o {
                                ctx.send(NodeId::Party(j), OrderedMsg::Share(b));
                            }
                        }
                    }
                    Err(e) => {
                        ctx.abort(format!("{e}"));
                        for j in 0..n {
                            ctx.send(NodeId::Party(j), OrderedMsg::Abort { phase });
                        }
                        if strict {
                            return Status::Halted;
                        }
                    }
                }
            }
            return Status::Running;
        }

        let input_sub = self.input_sub();
        if sub == input_sub + 1 {
            let f = PhaseFunctionality {
                phase: phase as usize,
                n,
                k: self.k,
                output_len: self.spec.output_len,
            };
            match evaluate(self, ctx, &f) {
                Ok(outs) => {
                    self.hub.delivered = Some(phase);
                    for (j, o) in outs.into_iter().enumerate() {
                        if let Some(vector) = o {
                            ctx.send(NodeId::Party(j), OrderedMsg::Masked { phase, vector });
                        }
                    }
                }
                Err(e) => {
                    ctx.abort(format!("{e}"));
                    for j in 0..n {
                        ctx.send(NodeId::Party(j), OrderedMsg::Abort { phase });
                    }
                    if strict {
                        return Status::Halted;
                    }
                }
            }
        } else if sub == input_sub + 2 {
            if self.hub.delivered == Some(phase) {
                ctx.checkpoint(phase as usize);
            }
            if phase as usize == n {
                return Status::Halted;
            }
        }
        Status::Running
    }
}

impl<B: MpcBackend + ?Sized> Protocol for OrderedProtocol<'_, B> {
    type Msg = OrderedMsg;

    fn locate(&self, round: u64) -> (u32, u32) {
        if round < SHARE_PHASE_ROUNDS {
            return (0, round as u32);
        }
        let r = round - SHARE_PHASE_ROUNDS;
        (
            (1 + r / self.phase_len()) as u32,
            (r % self.phase_len()) as u32,
        )
    }

    fn step(
        &mut self,
        node: NodeId,
        ctx: &mut Ctx<'_, OrderedMsg>,
        inbox: Vec<Envelope<OrderedMsg>>,
    ) -> Status {
        match node {
            NodeId::Party(j) => self.party_step(j, ctx, inbox),
            NodeId::Hub => self.hub_step(ctx, inbox),
        }
    }
}

/// Result of one protocol execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderedRun {
    pub transcript: Transcript,
    /// What each party recovered.
    pub outputs: Vec<Option<Vec<u8>>>,
    /// Reconstruction threshold used.
    pub threshold: usize,
}

/// Options of [`run_ordered`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderedOptions {
    pub mode: ThresholdMode,
    /// Challenge/response rounds at the start of every output phase.
    pub dummy_rounds: u32,
}

impl Default for OrderedOptions {
    fn default() -> Self {
        OrderedOptions {
            mode: ThresholdMode::HonestMajority,
            dummy_rounds: 0,
        }
    }
}

/// Runs the ordered protocol for `inputs` under `config`.
pub fn run_ordered<B: MpcBackend + ?Sized>(
    spec: &OrderedSpec,
    inputs: &[Vec<u8>],
    config: &SimConfig,
    options: OrderedOptions,
    backend: &mut B,
) -> Result<OrderedRun, OrderedError> {
    let n = inputs.len();
    if n == 0 || n != config.n {
        return Err(OrderedError::InvalidSpec(
            "one input per party required".into(),
        ));
    }
    if n > 255 {
        return Err(OrderedError::InvalidSpec("at most 255 parties".into()));
    }
    let k = options.mode.threshold(n);
    let mut proto = OrderedProtocol {
        spec,
        inputs,
        n,
        k,
        mode: options.mode,
        dummy_rounds: options.dummy_rounds,
        corrupt: config.adversary.corrupt.clone(),
        backend,
        parties: vec![PartyState::default(); n],
        hub: HubState::default(),
    };
    let transcript = simnet::run(&mut proto, config)?;
    Ok(OrderedRun {
        transcript,
        outputs: proto.parties.into_iter().map(|p| p.output).collect(),
        threshold: k,
    })
}

/// Like [`run_ordered`] with a fresh [`IdealBackend`]; also returns its ledger.
pub fn run_ordered_ideal(
    spec: &OrderedSpec,
    inputs: &[Vec<u8>],
    config: &SimConfig,
    options: OrderedOptions,
) -> Result<(OrderedRun, Vec<LeakRecord>), OrderedError> {
    let mut backend = IdealBackend::new();
    let run = run_ordered(spec, inputs, config, options, &mut backend)?;
    Ok((run, backend.ledger))
}

/// True iff every party has an output event and the output ticks strictly
/// increase along `pi`.
pub fn verify_ordered_delivery(transcript: &Transcript, pi: &Permutation) -> bool {
    let outs = transcript.outputs();
    let mut tick_of = vec![None; pi.len()];
    for (party, tick, _) in outs {
        if party < pi.len() && tick_of[party].is_none() {
            tick_of[party] = Some(tick);
        }
    }
    let mut last: Option<u64> = None;
    for &p in pi.as_slice() {
        let Some(t) = tick_of[p] else {
            return false;
        };
        if last.is_some_and(|l| t <= l) {
            return false;
        }
        last = Some(t);
    }
    true
}

/// True iff the set of parties with an output is `{pi(1), ..., pi(j)}` for
/// some `j`.
pub fn verify_prefix_fairness(transcript: &Transcript, pi: &Permutation) -> bool {
    let received: BTreeSet<usize> = transcript
        .outputs()
        .into_iter()
        .map(|(p, _, _)| p)
        .collect();
    let j = received.len();
    j <= pi.len() && pi.as_slice()[..j].iter().all(|p| received.contains(p))
}

/// A backend that fails from a given phase on; for exercising abort paths.
#[derive(Debug, Clone)]
pub struct FailingBackend {
    pub fail_from_phase: u32,
    inner: IdealBackend,
}

impl FailingBackend {
    pub fn new(fail_from_phase: u32) -> Self {
        FailingBackend {
            fail_from_phase,
            inner: IdealBackend::new(),
        }
    }
}

impl MpcBackend for FailingBackend {
    fn evaluate(
        &mut self,
        phase: u32,
        functionality: &dyn Functionality,
        inputs: &[Option<Vec<u8>>],
        corrupt: &BTreeSet<usize>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Option<Vec<u8>>>, BackendError> {
        if phase >= self.fail_from_phase {
            return Err(BackendError(format!("injected failure in phase {phase}")));
        }
        self.inner
            .evaluate(phase, functionality, inputs, corrupt, rng)
    }
}
