//! Choosing an order and per-player scores that form a collaborative
//! equilibrium.
//!
//! [`share_data`] solves the `NDim` case exactly in polynomial time via a
//! minimum-cost assignment of players to times. [`brute_force_equilibrium`]
//! covers every kind of learning bound for small `n`, and [`decide_nsq`]
//! decides the (NP-hard) `NSquared` case by branch and bound.

mod hungarian;

pub use hungarian::{min_cost_assignment, Assignment};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::model::{
    next_permutation, requirement, tight_schedule, Instance, LearningBounds, ModelError,
    Permutation, ProposedOutcome,
};

pub const BRUTE_FORCE_MAX_N: usize = 8;
pub const NSQ_MAX_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("n = {n} exceeds the limit {max} for this operation")]
    TooLarge { n: usize, max: usize },
    #[error("operation requires {0} learning bounds")]
    WrongBounds(&'static str),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
}

/// `w[i][t-1] = alpha_i / beta^t + (n - t) * mu_i`: the cost of serving
/// player `i` at time `t`.
pub fn assignment_weights(inst: &Instance) -> Result<Vec<Vec<f64>>, MechanismError> {
    inst.validate()?;
    let LearningBounds::NDim(mu) = &inst.bounds else {
        return Err(MechanismError::WrongBounds("NDim"));
    };
    let n = inst.n();
    Ok((0..n)
        .map(|i| {
            (1..=n)
                .map(|t| inst.alpha[i] / inst.discount(t) + (n - t) as f64 * mu[i])
                .collect()
        })
        .collect())
}

/// Finds an order and scores forming a collaborative equilibrium for `NDim`
/// learning bounds, or `None` when no order supports one.
///
/// The order minimises the total assignment weight (ties go to the
/// lexicographically smallest order). Scores are then filled in backwards from
/// `smax` so every step is tight up to `epsilon`.
pub fn share_data(inst: &Instance) -> Result<Option<ProposedOutcome>, MechanismError> {
    let weights = assignment_weights(inst)?;
    let assignment = min_cost_assignment(&weights);
    if assignment.cost > inst.budget() + inst.tolerance {
        return Ok(None);
    }
    let pi = Permutation::new(assignment.col_to_row)?;
    Ok(Some(tight_schedule(inst, &pi)?))
}

/// Exhaustive search over all orders, for any learning bounds (`n <= 8`).
/// Returns the lexicographically first order of minimum requirement, if it
/// fits the budget.
pub fn brute_force_equilibrium(inst: &Instance) -> Result<Option<ProposedOutcome>, MechanismError> {
    inst.validate()?;
    let n = inst.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(MechanismError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }
    let mut pi = Permutation::identity(n);
    let mut best: Option<(Permutation, f64)> = None;
    loop {
        let req = requirement(inst, &pi)?;
        if best
            .as_ref()
            .is_none_or(|(_, b)| req < *b - inst.tolerance)
        {
            best = Some((pi.clone(), req));
        }
        if !pi.next_lexicographic() {
            break;
        }
    }
    let (pi, req) = best.expect("at least one order");
    if req > inst.budget() + inst.tolerance {
        return Ok(None);
    }
    Ok(Some(tight_schedule(inst, &pi)?))
}

/// Outcome of [`decide_nsq`].
#[derive(Debug, Clone, PartialEq)]
pub struct NsqDecision {
    pub feasible: bool,
    /// Lexicographically first order within budget.
    pub witness: Option<Permutation>,
}

/// Decides whether some order satisfies
/// `sum_t alpha_{pi(t)} / beta^t + sum_t sum_{s > t} mu[pi(s)][pi(t)] <= smax - s0 - n * epsilon`.
pub fn decide_nsq(inst: &Instance) -> Result<NsqDecision, MechanismError> {
    inst.validate()?;
    let LearningBounds::NSquared(mu) = &inst.bounds else {
        return Err(MechanismError::WrongBounds("NSquared"));
    };
    let n = inst.n();
    if n > NSQ_MAX_N {
        return Err(MechanismError::TooLarge { n, max: NSQ_MAX_N });
    }
    let mut search = NsqSearch {
        inst,
        mu,
        limit: inst.budget() + inst.tolerance,
        order: Vec::with_capacity(n),
        used: vec![false; n],
        discount: (0..=n).map(|t| inst.discount(t)).collect(),
    };
    let found = search.dfs(0.0);
    Ok(NsqDecision {
        feasible: found,
        witness: if found {
            Some(Permutation::new(search.order)?)
        } else {
            None
        },
    })
}

struct NsqSearch<'a> {
    inst: &'a Instance,
    mu: &'a [Vec<f64>],
    limit: f64,
    order: Vec<usize>,
    used: Vec<bool>,
    discount: Vec<f64>,
}

impl NsqSearch<'_> {
    fn dfs(&mut self, accrued: f64) -> bool {
        let n = self.inst.n();
        let t = self.order.len() + 1;
        if t > n {
            return true;
        }
        // alpha / beta^t >= alpha, so the remaining alphas bound the rest.
        let rest: f64 = (0..n)
            .filter(|&p| !self.used[p])
            .map(|p| self.inst.alpha[p])
            .sum();
        if accrued + rest > self.limit {
            return false;
        }
        for p in 0..n {
            if self.used[p] {
                continue;
            }
            let learned: f64 = self.order.iter().map(|&q| self.mu[p][q]).sum();
            let next = accrued + self.inst.alpha[p] / self.discount[t] + learned;
            if next > self.limit {
                continue;
            }
            self.used[p] = true;
            self.order.push(p);
            if self.dfs(next) {
                return true;
            }
            self.order.pop();
            self.used[p] = false;
        }
        false
    }
}

/// A weighted digraph for the feedback-arc-set reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct FasGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl FasGraph {
    pub fn validate(&self) -> Result<(), MechanismError> {
        if self.n == 0 {
            return Err(MechanismError::InvalidGraph("graph has no vertices".into()));
        }
        for &(u, v, w) in &self.edges {
            if u >= self.n || v >= self.n {
                return Err(MechanismError::InvalidGraph(format!(
                    "edge ({u}, {v}) out of range"
                )));
            }
            if u == v {
                return Err(MechanismError::InvalidGraph(format!("self-loop at {u}")));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(MechanismError::InvalidGraph(format!(
                    "weight {w} on ({u}, {v})"
                )));
            }
        }
        Ok(())
    }

    /// Total weight of edges pointing backwards along `order`.
    pub fn back_edge_weight(&self, order: &Permutation) -> f64 {
        let pos = order.positions();
        self.edges
            .iter()
            .filter(|&&(u, v, _)| pos[u] > pos[v])
            .map(|&(_, _, w)| w)
            .sum()
    }
}

/// Maps a weighted digraph and threshold to an `NSquared` instance whose
/// feasibility equals "a feedback arc set of weight <= gamma exists":
/// `alpha = 0`, `beta = 1`, `mu[i][j] = w(i, j)`, `smax - s0 = gamma`, `epsilon = 0`.
pub fn fas_to_instance(graph: &FasGraph, gamma: f64) -> Result<Instance, MechanismError> {
    graph.validate()?;
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(MechanismError::InvalidGraph(format!(
            "gamma {gamma} must be >= 0"
        )));
    }
    let n = graph.n;
    let mut mu = vec![vec![0.0; n]; n];
    for &(u, v, w) in &graph.edges {
        mu[u][v] += w;
    }
    Ok(Instance::new(
        vec![0.0; n],
        1.0,
        LearningBounds::NSquared(mu),
        0.0,
        gamma,
        0.0,
    )?)
}

/// Minimum back-edge weight over all orders (`n <= 10`); the weight of a
/// minimum feedback arc set.
pub fn min_feedback_arc_weight(graph: &FasGraph) -> Result<(f64, Permutation), MechanismError> {
    graph.validate()?;
    if graph.n > NSQ_MAX_N {
        return Err(MechanismError::TooLarge {
            n: graph.n,
            max: NSQ_MAX_N,
        });
    }
    let mut order: Vec<usize> = (0..graph.n).collect();
    let mut best = (f64::INFINITY, Permutation::identity(graph.n));
    loop {
        let pi = Permutation::new(order.clone())?;
        let w = graph.back_edge_weight(&pi);
        if w < best.0 {
            best = (w, pi);
        }
        if !next_permutation(&mut order) {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::is_collaborative_equilibrium;

    fn ndim(alpha: Vec<f64>, beta: f64, mu: Vec<f64>, s0: f64, smax: f64, eps: f64) -> Instance {
        Instance::new(alpha, beta, LearningBounds::NDim(mu), s0, smax, eps).unwrap()
    }

    #[test]
    fn three_player_tight_example() {
        let inst = ndim(vec![1.0, 1.0, 1.0], 1.0, vec![0.0; 3], 0.0, 3.0, 0.0);
        let out = share_data(&inst).unwrap().unwrap();
        assert_eq!(out.pi, Permutation::identity(3));
        assert_eq!(out.delta, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn insufficient_budget_is_none() {
        let inst = ndim(vec![1.0, 1.0, 1.0], 1.0, vec![0.0; 3], 0.0, 2.9, 0.0);
        assert_eq!(share_data(&inst).unwrap(), None);
        assert_eq!(brute_force_equilibrium(&inst).unwrap(), None);
    }

    #[test]
    fn largest_learner_goes_last() {
        // Ordering mu descending pushes the big learner to the end, where
        // (n - t) vanishes.
        let inst = ndim(vec![0.0; 3], 1.0, vec![0.1, 2.0, 0.5], 0.0, 10.0, 0.0);
        let out = share_data(&inst).unwrap().unwrap();
        assert_eq!(out.pi.as_slice(), &[0, 2, 1]);
        assert!(is_collaborative_equilibrium(&inst, &out).unwrap().holds);
    }

    #[test]
    fn weights_formula() {
        let inst = ndim(vec![1.0, 0.0], 0.5, vec![0.0, 3.0], 0.0, 10.0, 0.0);
        let w = assignment_weights(&inst).unwrap();
        assert_eq!(w, vec![vec![2.0, 4.0], vec![3.0, 0.0]]);
    }

    #[test]
    fn share_data_rejects_other_bounds() {
        let inst = Instance::new(
            vec![0.0; 2],
            1.0,
            LearningBounds::NSquared(vec![vec![0.0; 2]; 2]),
            0.0,
            1.0,
            0.0,
        )
        .unwrap();
        assert!(matches!(
            share_data(&inst),
            Err(MechanismError::WrongBounds(_))
        ));
    }

    #[test]
    fn brute_force_size_limit() {
        let inst = ndim(vec![0.0; 9], 1.0, vec![0.0; 9], 0.0, 1.0, 0.0);
        assert!(matches!(
            brute_force_equilibrium(&inst),
            Err(MechanismError::TooLarge { .. })
        ));
    }

    #[test]
    fn triangle_fas() {
        let g = FasGraph {
            n: 3,
            edges: vec![(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)],
        };
        let (w, _) = min_feedback_arc_weight(&g).unwrap();
        assert_eq!(w, 1.0);
        let yes = decide_nsq(&fas_to_instance(&g, 1.0).unwrap()).unwrap();
        assert!(yes.feasible);
        let witness = yes.witness.unwrap();
        assert!(g.back_edge_weight(&witness) <= 1.0);
        assert!(
            !decide_nsq(&fas_to_instance(&g, 0.5).unwrap())
                .unwrap()
                .feasible
        );
    }

    #[test]
    fn dag_needs_nothing() {
        let g = FasGraph {
            n: 4,
            edges: vec![(0, 1, 1.0), (1, 2, 1.0), (0, 3, 2.0)],
        };
        assert!(
            decide_nsq(&fas_to_instance(&g, 0.0).unwrap())
                .unwrap()
                .feasible
        );
    }

    #[test]
    fn rejects_self_loops() {
        let g = FasGraph {
            n: 2,
            edges: vec![(1, 1, 1.0)],
        };
        assert!(matches!(
            fas_to_instance(&g, 1.0),
            Err(MechanismError::InvalidGraph(_))
        ));
    }

    #[test]
    fn nsq_matches_brute_force_requirement() {
        let mu = vec![
            vec![0.0, 0.3, 0.9],
            vec![0.2, 0.0, 0.1],
            vec![0.4, 0.8, 0.0],
        ];
        let base = Instance::new(
            vec![0.1, 0.2, 0.0],
            0.9,
            LearningBounds::NSquared(mu),
            0.0,
            0.0,
            0.0,
        )
        .unwrap();
        for smax in [0.3, 0.5, 0.7, 0.9, 1.2, 2.0] {
            let inst = Instance {
                smax,
                ..base.clone()
            };
            let nsq = decide_nsq(&inst).unwrap();
            let brute = brute_force_equilibrium(&inst).unwrap();
            assert_eq!(nsq.feasible, brute.is_some(), "smax {smax}");
        }
    }
}
