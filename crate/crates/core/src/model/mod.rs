//! The collaboration model: instances, delivery orders, rewards and the
//! collaborative-equilibrium check.

mod scores;
mod superadd;

pub use scores::{
    GaussianMean, GaussianRelease, GeneLoci, LociRelease, PathFlow, PathRelease, ScoreModel,
    XorRelease, XorSecret,
};
pub use superadd::{auxiliary_score_is_superadditive, SubsetTable, Superadditivity};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::DEFAULT_TOLERANCE;

/// Largest `n` accepted for fully general learning bounds.
pub const GENERAL_BOUNDS_MAX_N: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("not a permutation of 0..{n}: {detail}")]
    InvalidPermutation { n: usize, detail: String },
    #[error("time index {t} outside 1..={n}")]
    TimeOutOfRange { t: usize, n: usize },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no learning bound for player {player} under the given order")]
    MissingBound { player: usize },
    #[error("invalid subset table: {0}")]
    InvalidTable(String),
    #[error("score {target} cannot be realized: {reason}")]
    Divisibility { target: f64, reason: String },
}

/// A delivery order: `order[t - 1]` is the player served at time `t`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self, ModelError> {
        let n = order.len();
        let mut seen = alloc::vec![false; n];
        for &p in &order {
            if p >= n || seen[p] {
                return Err(ModelError::InvalidPermutation {
                    n,
                    detail: format!("{order:?}"),
                });
            }
            seen[p] = true;
        }
        Ok(Permutation(order))
    }

    pub fn identity(n: usize) -> Self {
        Permutation((0..n).collect())
    }

    /// Builds the delivery order from a player-to-position map
    /// (`position[i]` is the 1-based time at which player `i` is served).
    pub fn from_positions(position: &[usize]) -> Result<Self, ModelError> {
        let n = position.len();
        let mut order = alloc::vec![usize::MAX; n];
        for (player, &t) in position.iter().enumerate() {
            if t == 0 || t > n || order[t - 1] != usize::MAX {
                return Err(ModelError::InvalidPermutation {
                    n,
                    detail: format!("positions {position:?}"),
                });
            }
            order[t - 1] = player;
        }
        Ok(Permutation(order))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// Player served at 1-based time `t`.
    pub fn player_at(&self, t: usize) -> usize {
        self.0[t - 1]
    }

    /// 1-based positions indexed by player.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = alloc::vec![0; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            pos[p] = i + 1;
        }
        pos
    }

    /// Advances to the next permutation in lexicographic order.
    pub fn next_lexicographic(&mut self) -> bool {
        next_permutation(&mut self.0)
    }
}

/// In-place lexicographic successor. Returns `false` (leaving the slice
/// sorted ascending) after the last permutation.
pub fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        v.reverse();
        return false;
    }
    let mut j = n - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Explicit learning bounds `lambda_{pi, i}` keyed by delivery order and player.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GeneralBounds {
    values: BTreeMap<(Vec<usize>, usize), f64>,
}

impl GeneralBounds {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, pi: &Permutation, player: usize, lambda: f64) {
        self.values.insert((pi.as_slice().to_vec(), player), lambda);
    }

    pub fn get(&self, pi: &Permutation, player: usize) -> Option<f64> {
        self.values.get(&(pi.as_slice().to_vec(), player)).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fills the map from a function over every (order, player) pair.
    pub fn from_fn(n: usize, mut f: impl FnMut(&Permutation, usize) -> f64) -> Self {
        let mut out = Self::new();
        let mut order: Vec<usize> = (0..n).collect();
        loop {
            let pi = Permutation(order.clone());
            for player in 0..n {
                let v = f(&pi, player);
                out.insert(&pi, player, v);
            }
            if !next_permutation(&mut order) {
                break;
            }
        }
        out
    }
}

/// How much a player can learn from the publications made before it.
#[derive(Debug, Clone, PartialEq)]
pub enum LearningBounds {
    /// `lambda_{pi, pi(t)} = sum_{tau < t} mu[pi(tau)]`.
    NDim(Vec<f64>),
    /// `lambda_{pi, pi(t)} = sum_{tau < t} mu[pi(t)][pi(tau)]`; the diagonal is ignored.
    NSquared(Vec<Vec<f64>>),
    General(GeneralBounds),
}

impl LearningBounds {
    /// Learning bound of the player served at time `t` (1-based).
    pub fn lambda_at(&self, pi: &Permutation, t: usize) -> Result<f64, ModelError> {
        let n = pi.len();
        if t == 0 || t > n {
            return Err(ModelError::TimeOutOfRange { t, n });
        }
        let order = pi.as_slice();
        let p = order[t - 1];
        Ok(match self {
            LearningBounds::NDim(mu) => order[..t - 1].iter().map(|&q| mu[q]).sum(),
            LearningBounds::NSquared(mu) => order[..t - 1].iter().map(|&q| mu[p][q]).sum(),
            LearningBounds::General(g) => {
                g.get(pi, p).ok_or(ModelError::MissingBound { player: p })?
            }
        })
    }

    fn validate(&self, n: usize) -> Result<(), ModelError> {
        let bad = |what: &str| {
            Err(ModelError::InvalidInstance(format!(
                "learning bounds: {what}"
            )))
        };
        match self {
            LearningBounds::NDim(mu) => {
                if mu.len() != n {
                    return bad("ndim length differs from n");
                }
                if mu.iter().any(|m| !m.is_finite() || *m < 0.0) {
                    return bad("mu must be finite and non-negative");
                }
            }
            LearningBounds::NSquared(mu) => {
                if mu.len() != n || mu.iter().any(|row| row.len() != n) {
                    return bad("nsq matrix must be n x n");
                }
                for (i, row) in mu.iter().enumerate() {
                    for (j, m) in row.iter().enumerate() {
                        if i != j && (!m.is_finite() || *m < 0.0) {
                            return bad("mu must be finite and non-negative");
                        }
                    }
                }
            }
            LearningBounds::General(g) => {
                if n > GENERAL_BOUNDS_MAX_N {
                    return bad("general bounds limited to n <= 6");
                }
                if g.values.values().any(|m| !m.is_finite() || *m < 0.0) {
                    return bad("lambda must be finite and non-negative");
                }
                let mut order: Vec<usize> = (0..n).collect();
                loop {
                    let pi = Permutation(order.clone());
                    for p in 0..n {
                        if g.get(&pi, p).is_none() {
                            return Err(ModelError::MissingBound { player: p });
                        }
                    }
                    if !next_permutation(&mut order) {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

/// A collaboration instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// Stand-alone gains `alpha_i`.
    pub alpha: Vec<f64>,
    /// Discount factor in `(0, 1]`.
    pub beta: f64,
    pub bounds: LearningBounds,
    /// Prior score `s0`.
    pub s0: f64,
    /// Best attainable score `smax`.
    pub smax: f64,
    /// Strictness margin added to every step.
    pub epsilon: f64,
    /// Absolute tolerance for every comparison made against this instance.
    pub tolerance: f64,
}

impl Instance {
    pub fn new(
        alpha: Vec<f64>,
        beta: f64,
        bounds: LearningBounds,
        s0: f64,
        smax: f64,
        epsilon: f64,
    ) -> Result<Self, ModelError> {
        let inst = Instance {
            alpha,
            beta,
            bounds,
            s0,
            smax,
            epsilon,
            tolerance: DEFAULT_TOLERANCE,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |s: &str| Err(ModelError::InvalidInstance(s.into()));
        let n = self.n();
        if n == 0 {
            return bad("n must be at least 1");
        }
        if self.alpha.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return bad("alpha must be finite and non-negative");
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad("beta must lie in (0, 1]");
        }
        if !self.s0.is_finite() || !self.smax.is_finite() || self.s0 > self.smax {
            return bad("need finite s0 <= smax");
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return bad("epsilon must be finite and non-negative");
        }
        if !self.tolerance.is_finite() || self.tolerance < 0.0 {
            return bad("tolerance must be finite and non-negative");
        }
        self.bounds.validate(n)
    }

    /// `beta^t`.
    pub fn discount(&self, t: usize) -> f64 {
        libm::pow(self.beta, t as f64)
    }

    /// Budget available to the order: `smax - s0 - n * epsilon`.
    pub fn budget(&self) -> f64 {
        self.smax - self.s0 - self.n() as f64 * self.epsilon
    }

    fn check_order(&self, pi: &Permutation) -> Result<(), ModelError> {
        if pi.len() != self.n() {
            return Err(ModelError::LengthMismatch {
                expected: self.n(),
                got: pi.len(),
            });
        }
        Ok(())
    }
}

/// An order together with the score each player is given.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposedOutcome {
    pub pi: Permutation,
    /// `delta[i]` is the score delivered to player `i`.
    pub delta: Vec<f64>,
}

impl ProposedOutcome {
    /// Score of the player served at time `t`.
    pub fn delta_at(&self, t: usize) -> f64 {
        self.delta[self.pi.player_at(t)]
    }

    /// Checks that scores are non-decreasing along the order with gaps of at
    /// least `epsilon` and stay inside `[s0, smax]`.
    pub fn validate(&self, inst: &Instance) -> Result<(), ModelError> {
        inst.check_order(&self.pi)?;
        if self.delta.len() != inst.n() {
            return Err(ModelError::LengthMismatch {
                expected: inst.n(),
                got: self.delta.len(),
            });
        }
        let tol = inst.tolerance;
        let mut prev = inst.s0;
        for t in 1..=inst.n() {
            let d = self.delta_at(t);
            let gap = if t == 1 { 0.0 } else { inst.epsilon };
            if d < prev + gap - tol || d > inst.smax + tol {
                return Err(ModelError::InvalidInstance(format!(
                    "score {d} at time {t} breaks monotonicity or exceeds smax"
                )));
            }
            prev = d;
        }
        Ok(())
    }
}

/// Closed score interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

/// `R_t = beta^t * (z[pi(t)] - z[pi(t-1)])`, with `z[pi(0)] = s0`.
pub fn reward(
    inst: &Instance,
    pi: &Permutation,
    scores: &[f64],
    t: usize,
) -> Result<f64, ModelError> {
    inst.check_order(pi)?;
    if scores.len() != inst.n() {
        return Err(ModelError::LengthMismatch {
            expected: inst.n(),
            got: scores.len(),
        });
    }
    if t == 0 || t > inst.n() {
        return Err(ModelError::TimeOutOfRange { t, n: inst.n() });
    }
    let prev = if t == 1 {
        inst.s0
    } else {
        scores[pi.player_at(t - 1)]
    };
    Ok(inst.discount(t) * (scores[pi.player_at(t)] - prev))
}

/// `lambda_{pi, pi(t)}` for the instance's learning bounds.
pub fn lambda_of(inst: &Instance, pi: &Permutation, t: usize) -> Result<f64, ModelError> {
    inst.check_order(pi)?;
    inst.bounds.lambda_at(pi, t)
}

/// Per-player interval of scores the player may end up with:
/// `[delta_i, delta_i + lambda_{pi, i}]`.
pub fn inferred_envelope(
    inst: &Instance,
    outcome: &ProposedOutcome,
) -> Result<Vec<Interval>, ModelError> {
    outcome.validate(inst)?;
    let mut out = alloc::vec![Interval { lo: 0.0, hi: 0.0 }; inst.n()];
    for t in 1..=inst.n() {
        let p = outcome.pi.player_at(t);
        let lam = inst.bounds.lambda_at(&outcome.pi, t)?;
        out[p] = Interval {
            lo: outcome.delta[p],
            hi: outcome.delta[p] + lam,
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumVerdict {
    pub holds: bool,
    /// First 1-based time whose worst-case reward falls short.
    pub first_violation: Option<usize>,
    /// `worst_reward_t - alpha_{pi(t)}` for every `t`.
    pub slack: Vec<f64>,
}

/// Worst-case reward of the player served at time `t`:
/// `beta^t * (delta_{pi(t)} - delta_{pi(t-1)} - lambda_{pi, pi(t-1)})`.
pub fn worst_case_reward(
    inst: &Instance,
    outcome: &ProposedOutcome,
    t: usize,
) -> Result<f64, ModelError> {
    let (prev, lam) = if t == 1 {
        (inst.s0, 0.0)
    } else {
        (
            outcome.delta_at(t - 1),
            inst.bounds.lambda_at(&outcome.pi, t - 1)?,
        )
    };
    Ok(inst.discount(t) * (outcome.delta_at(t) - prev - lam))
}

/// Checks that no player gains by deviating from the proposed outcome, even
/// when every earlier player learned as much as its bound allows.
pub fn is_collaborative_equilibrium(
    inst: &Instance,
    outcome: &ProposedOutcome,
) -> Result<EquilibriumVerdict, ModelError> {
    inst.check_order(&outcome.pi)?;
    if outcome.delta.len() != inst.n() {
        return Err(ModelError::LengthMismatch {
            expected: inst.n(),
            got: outcome.delta.len(),
        });
    }
    let mut slack = Vec::with_capacity(inst.n());
    let mut first_violation = None;
    for t in 1..=inst.n() {
        let s = worst_case_reward(inst, outcome, t)? - inst.alpha[outcome.pi.player_at(t)];
        if s < -inst.tolerance && first_violation.is_none() {
            first_violation = Some(t);
        }
        slack.push(s);
    }
    Ok(EquilibriumVerdict {
        holds: first_violation.is_none(),
        first_violation,
        slack,
    })
}

fn discounted_alpha(inst: &Instance, pi: &Permutation) -> f64 {
    (1..=inst.n())
        .map(|t| inst.alpha[pi.player_at(t)] / inst.discount(t))
        .sum()
}

/// `sum_t alpha_{pi(t)} / beta^t + sum_t lambda_{pi, pi(t)}`; for `NDim`
/// bounds the second sum equals `sum_t (n - t) * mu_{pi(t)}`.
pub fn requirement(inst: &Instance, pi: &Permutation) -> Result<f64, ModelError> {
    inst.check_order(pi)?;
    let mut total = discounted_alpha(inst, pi);
    for t in 1..=inst.n() {
        total += inst.bounds.lambda_at(pi, t)?;
    }
    Ok(total)
}

/// Like [`requirement`] but without the last player's learning bound, which
/// nobody after it has to compensate. The tight schedule for `pi` passes the
/// equilibrium check iff this is at most `budget() + epsilon` (the first step
/// needs no strict margin).
pub fn exact_requirement(inst: &Instance, pi: &Permutation) -> Result<f64, ModelError> {
    inst.check_order(pi)?;
    let mut total = discounted_alpha(inst, pi);
    for t in 1..inst.n() {
        total += inst.bounds.lambda_at(pi, t)?;
    }
    Ok(total)
}

/// Whether the order `pi` supports a collaborative equilibrium:
/// `requirement(pi) <= smax - s0 - n * epsilon`.
pub fn supports_equilibrium(inst: &Instance, pi: &Permutation) -> Result<bool, ModelError> {
    Ok(requirement(inst, pi)? <= inst.budget() + inst.tolerance)
}

/// Builds the tight schedule for `pi`: `delta_{pi(n)} = smax` and each earlier
/// score sits exactly `alpha/beta^t + lambda + epsilon` below its successor.
pub fn tight_schedule(inst: &Instance, pi: &Permutation) -> Result<ProposedOutcome, ModelError> {
    inst.check_order(pi)?;
    let n = inst.n();
    let mut delta = alloc::vec![0.0; n];
    let mut current = inst.smax;
    delta[pi.player_at(n)] = current;
    for t in (2..=n).rev() {
        let step = inst.alpha[pi.player_at(t)] / inst.discount(t)
            + inst.bounds.lambda_at(pi, t - 1)?
            + inst.epsilon;
        current -= step;
        delta[pi.player_at(t - 1)] = current;
    }
    Ok(ProposedOutcome {
        pi: pi.clone(),
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ndim(alpha: Vec<f64>, beta: f64, mu: Vec<f64>, smax: f64, eps: f64) -> Instance {
        Instance::new(alpha, beta, LearningBounds::NDim(mu), 0.0, smax, eps).unwrap()
    }

    #[test]
    fn reward_example() {
        let inst = ndim(vec![0.0; 2], 0.5, vec![0.0; 2], 10.0, 0.0);
        let pi = Permutation::identity(2);
        assert_eq!(reward(&inst, &pi, &[2.0, 6.0], 2).unwrap(), 1.0);
        assert_eq!(reward(&inst, &pi, &[2.0, 6.0], 1).unwrap(), 1.0);
        assert!(matches!(
            reward(&inst, &pi, &[2.0, 6.0], 3),
            Err(ModelError::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn lambda_ndim_and_nsq() {
        let inst = ndim(vec![0.0; 3], 1.0, vec![1.0, 2.0, 4.0], 10.0, 0.0);
        let pi = Permutation::new(vec![2, 0, 1]).unwrap();
        assert_eq!(lambda_of(&inst, &pi, 1).unwrap(), 0.0);
        assert_eq!(lambda_of(&inst, &pi, 3).unwrap(), 5.0);

        let m = vec![
            vec![9.0, 1.0, 2.0],
            vec![3.0, 9.0, 4.0],
            vec![5.0, 6.0, 9.0],
        ];
        let b = LearningBounds::NSquared(m);
        assert_eq!(b.lambda_at(&pi, 2).unwrap(), 2.0);
        assert_eq!(b.lambda_at(&pi, 3).unwrap(), 7.0);
    }

    #[test]
    fn rejects_bad_instances() {
        let bad_beta = Instance::new(
            vec![0.0],
            0.0,
            LearningBounds::NDim(vec![0.0]),
            0.0,
            1.0,
            0.0,
        );
        assert!(bad_beta.is_err());
        let bad_order = Instance::new(
            vec![0.0],
            1.0,
            LearningBounds::NDim(vec![0.0]),
            2.0,
            1.0,
            0.0,
        );
        assert!(bad_order.is_err());
        let mismatch = Instance::new(
            vec![0.0; 2],
            1.0,
            LearningBounds::NDim(vec![0.0]),
            0.0,
            1.0,
            0.0,
        );
        assert!(mismatch.is_err());
        assert!(Permutation::new(vec![0, 0]).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
    }

    #[test]
    fn permutation_positions_roundtrip() {
        let pi = Permutation::new(vec![1, 0, 2]).unwrap();
        assert_eq!(pi.positions(), vec![2, 1, 3]);
        assert_eq!(Permutation::from_positions(&pi.positions()).unwrap(), pi);
    }

    #[test]
    fn next_permutation_counts() {
        let mut v = vec![0, 1, 2, 3];
        let mut count = 1;
        while next_permutation(&mut v) {
            count += 1;
        }
        assert_eq!(count, 24);
        assert_eq!(v, vec![0, 1, 2, 3]);
    }

    #[test]
    fn tight_schedule_passes_check() {
        let inst = ndim(vec![0.1, 0.2, 0.3], 0.9, vec![0.1, 0.0, 0.2], 5.0, 0.05);
        let pi = Permutation::new(vec![1, 2, 0]).unwrap();
        assert!(supports_equilibrium(&inst, &pi).unwrap());
        let out = tight_schedule(&inst, &pi).unwrap();
        out.validate(&inst).unwrap();
        let v = is_collaborative_equilibrium(&inst, &out).unwrap();
        assert!(v.holds, "{v:?}");
        for t in 2..=3 {
            let expected = inst.discount(t) * inst.epsilon;
            assert!((v.slack[t - 1] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn violation_reports_first_step() {
        let inst = ndim(vec![1.0, 1.0], 1.0, vec![0.0, 0.0], 2.0, 0.0);
        let pi = Permutation::identity(2);
        let out = ProposedOutcome {
            pi,
            delta: vec![0.5, 2.0],
        };
        let v = is_collaborative_equilibrium(&inst, &out).unwrap();
        assert_eq!(v.first_violation, Some(1));
    }

    #[test]
    fn envelope_widths_are_lambdas() {
        let inst = ndim(vec![0.0; 3], 1.0, vec![0.5, 0.25, 1.0], 3.0, 0.0);
        let pi = Permutation::new(vec![2, 1, 0]).unwrap();
        let out = tight_schedule(&inst, &pi).unwrap();
        let env = inferred_envelope(&inst, &out).unwrap();
        assert_eq!(env[2].hi - env[2].lo, 0.0);
        assert_eq!(env[1].hi - env[1].lo, 1.0);
        assert_eq!(env[0].hi - env[0].lo, 1.25);
    }

    #[test]
    fn requirement_vs_exact() {
        let inst = ndim(vec![0.0; 3], 1.0, vec![1.0, 1.0, 1.0], 3.0, 0.0);
        let pi = Permutation::identity(3);
        assert_eq!(requirement(&inst, &pi).unwrap(), 3.0);
        assert_eq!(exact_requirement(&inst, &pi).unwrap(), 1.0);
    }

    #[test]
    fn general_bounds_must_cover_all_orders() {
        let mut g = GeneralBounds::new();
        g.insert(&Permutation::identity(2), 0, 0.0);
        let r = Instance::new(vec![0.0; 2], 1.0, LearningBounds::General(g), 0.0, 1.0, 0.0);
        assert!(matches!(r, Err(ModelError::MissingBound { .. })));
        let g = GeneralBounds::from_fn(2, |_, _| 0.5);
        assert_eq!(g.len(), 4);
        assert!(
            Instance::new(vec![0.0; 2], 1.0, LearningBounds::General(g), 0.0, 1.0, 0.0).is_ok()
        );
    }
}
