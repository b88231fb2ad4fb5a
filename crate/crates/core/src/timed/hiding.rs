//! Harness for the time-line hiding experiment.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use rand::{Rng, RngCore};

use super::puzzle::{lock_line, unlock_line_at, TimeLinePuzzle, Work};
use super::work::WorkFunction;
use super::{Scheme, TimedError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HidingVariant {
    /// The adversary sees `(x, a)` and only the masks it queries.
    Standard,
    /// Every mask `b_i` is handed out up front (strong-hiding form); used to
    /// calibrate the harness against an adversary that can solve chains.
    MasksRevealed,
}

/// The adversary's interface to one trial.
pub struct HidingView<'a> {
    puzzle: &'a TimeLinePuzzle,
    work: Work,
    variant: HidingVariant,
    queried: BTreeSet<usize>,
    budget: Option<u64>,
    state: Vec<u8>,
    position: u64,
}

impl<'a> HidingView<'a> {
    fn new(
        puzzle: &'a TimeLinePuzzle,
        variant: HidingVariant,
        budget: Option<u64>,
    ) -> Result<Self, TimedError> {
        Ok(HidingView {
            work: puzzle.work()?,
            puzzle,
            variant,
            queried: BTreeSet::new(),
            budget,
            state: puzzle.x.clone(),
            position: 0,
        })
    }

    pub fn items(&self) -> usize {
        self.puzzle.items()
    }

    pub fn delays(&self) -> &[u64] {
        &self.puzzle.t
    }

    pub fn seed(&self) -> &[u8] {
        &self.puzzle.x
    }

    pub fn aux(&self) -> &[u8] {
        &self.puzzle.a
    }

    /// Asks the challenger for `b_i`.
    pub fn query(&mut self, i: usize) -> Option<Vec<u8>> {
        let b = self.puzzle.b.get(i)?.clone();
        self.queried.insert(i);
        Some(b)
    }

    /// `b_i` if the variant hands masks out without a query.
    pub fn revealed_mask(&self, i: usize) -> Option<&[u8]> {
        match self.variant {
            HidingVariant::MasksRevealed => self.puzzle.b.get(i).map(Vec::as_slice),
            HidingVariant::Standard => None,
        }
    }

    /// Runs the chain forward to `position`, within the step budget.
    /// Returns the chain value there, or `None` if the budget forbids it.
    pub fn run_chain_to(&mut self, position: u64) -> Option<&[u8]> {
        if position < self.position {
            self.state = self.puzzle.x.clone();
            self.position = 0;
        }
        if self.budget.is_some_and(|b| position > b) {
            return None;
        }
        self.state = self
            .work
            .iterate(self.position, &self.state, position - self.position);
        self.position = position;
        Some(&self.state)
    }
}

/// An adversary for the hiding experiment: outputs `(i', beta')`.
pub trait HidingAdversary {
    fn play(
        &mut self,
        view: &mut HidingView<'_>,
        d0: &[Vec<u8>],
        d1: &[Vec<u8>],
        rng: &mut dyn RngCore,
    ) -> (usize, bool);
}

/// Guesses an index and a bit uniformly.
#[derive(Debug, Default, Clone, Copy)]
pub struct RandomGuessAdversary;

impl HidingAdversary for RandomGuessAdversary {
    fn play(
        &mut self,
        view: &mut HidingView<'_>,
        _: &[Vec<u8>],
        _: &[Vec<u8>],
        rng: &mut dyn RngCore,
    ) -> (usize, bool) {
        (rng.random_range(0..view.items()), rng.random())
    }
}

/// Solves the chain up to the earliest item and compares the opened value
/// against both candidates; needs the item's mask to be visible.
#[derive(Debug, Default, Clone, Copy)]
pub struct ChainSolvingAdversary;

impl HidingAdversary for ChainSolvingAdversary {
    fn play(
        &mut self,
        view: &mut HidingView<'_>,
        d0: &[Vec<u8>],
        d1: &[Vec<u8>],
        rng: &mut dyn RngCore,
    ) -> (usize, bool) {
        let target = (0..view.items())
            .min_by_key(|&i| view.delays()[i])
            .unwrap_or(0);
        let t = view.delays()[target];
        let Some(mask) = view.revealed_mask(target).map(<[u8]>::to_vec) else {
            return (target, rng.random());
        };
        let Some(chain) = view.run_chain_to(t).map(<[u8]>::to_vec) else {
            return (target, rng.random());
        };
        let opened: Vec<u8> = mask.iter().zip(&chain).map(|(b, c)| b ^ c).collect();
        if opened == d1[target] && opened != d0[target] {
            (target, true)
        } else if opened == d0[target] {
            (target, false)
        } else {
            (target, rng.random())
        }
    }
}

/// Queries every mask except the last item's and guesses the last item's bit.
#[derive(Debug, Default, Clone, Copy)]
pub struct QueryingAdversary {
    /// Also query the final mask (the trial is then lost by definition).
    pub query_all: bool,
}

impl HidingAdversary for QueryingAdversary {
    fn play(
        &mut self,
        view: &mut HidingView<'_>,
        _: &[Vec<u8>],
        _: &[Vec<u8>],
        rng: &mut dyn RngCore,
    ) -> (usize, bool) {
        let m = view.items();
        let queries = if self.query_all { m } else { m - 1 };
        for i in 0..queries {
            view.query(i);
        }
        // The opened items say nothing about the last one's bit.
        (m - 1, rng.random())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HidingReport {
    pub trials: u64,
    pub wins: u64,
    pub rate: f64,
    /// Standard deviation of the rate under a fair coin.
    pub sigma: f64,
}

/// Runs `trials` independent hiding experiments.
///
/// Each trial samples `beta`, locks item `i` as `d_{beta_i}[i]` under a fresh
/// key, lets the adversary play with at most `budget` chain steps, and
/// counts a win iff the guessed index was not queried and the bit matches.
#[allow(clippy::too_many_arguments)]
pub fn hiding_experiment<A: HidingAdversary + ?Sized, R: RngCore>(
    adversary: &mut A,
    scheme: Scheme,
    kappa: u32,
    d0: &[Vec<u8>],
    d1: &[Vec<u8>],
    delays: &[u64],
    trials: u64,
    variant: HidingVariant,
    budget: Option<u64>,
    rng: &mut R,
) -> Result<HidingReport, TimedError> {
    let m = delays.len();
    if d0.len() != m || d1.len() != m {
        return Err(TimedError::LengthMismatch {
            delays: m,
            items: d0.len().min(d1.len()),
        });
    }
    let mut wins = 0u64;
    for _ in 0..trials {
        let beta: Vec<bool> = (0..m).map(|_| rng.random()).collect();
        let items: Vec<Vec<u8>> = (0..m)
            .map(|i| {
                if beta[i] {
                    d1[i].clone()
                } else {
                    d0[i].clone()
                }
            })
            .collect();
        let puzzle = lock_line(scheme, kappa, &items, delays, rng)?;
        debug_assert_eq!(
            unlock_line_at(&puzzle, 0, &puzzle.work()?.iterate(0, &puzzle.x, delays[0])),
            items[0]
        );
        let mut view = HidingView::new(&puzzle, variant, budget)?;
        let (guess_i, guess_b) = adversary.play(&mut view, d0, d1, rng);
        if guess_i < m && !view.queried.contains(&guess_i) && guess_b == beta[guess_i] {
            wins += 1;
        }
    }
    let rate = if trials == 0 {
        0.0
    } else {
        wins as f64 / trials as f64
    };
    Ok(HidingReport {
        trials,
        wins,
        rate,
        sigma: if trials == 0 {
            0.0
        } else {
            libm::sqrt(0.25 / trials as f64)
        },
    })
}
