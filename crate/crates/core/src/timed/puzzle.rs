use alloc::vec::Vec;

use rand::RngCore;
use sha2::{Digest, Sha256};

use super::work::{HashChainWork, SquaringTrapdoor, SquaringWork, WorkFunction};
use super::{Scheme, TimedError};

/// Items locked on one chain: item `i` is `b[i] XOR x_{t[i]}` (truncated to
/// the item's length), where `x_0 = x` and `x_{j+1} = step(j, x_j)`.
/// A time-lock puzzle is the single-item case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeLinePuzzle {
    pub scheme: Scheme,
    /// Security parameter: prime size in bits for squaring, hash output size
    /// for the hash chain.
    pub kappa: u32,
    pub x: Vec<u8>,
    pub t: Vec<u64>,
    pub b: Vec<Vec<u8>>,
    /// Public auxiliary data: the modulus `N` or the hash key.
    pub a: Vec<u8>,
}

/// The work function named by a puzzle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Work {
    Square(SquaringWork),
    Hash(HashChainWork),
}

impl WorkFunction for Work {
    fn width(&self) -> usize {
        match self {
            Work::Square(w) => w.width(),
            Work::Hash(w) => w.width(),
        }
    }

    fn step(&self, index: u64, x: &[u8]) -> Vec<u8> {
        match self {
            Work::Square(w) => w.step(index, x),
            Work::Hash(w) => w.step(index, x),
        }
    }
}

impl TimeLinePuzzle {
    pub fn work(&self) -> Result<Work, TimedError> {
        let w = match self.scheme {
            Scheme::Square => Work::Square(SquaringWork::from_bytes(&self.a)?),
            Scheme::Hash => Work::Hash(HashChainWork::from_bytes(&self.a)?),
        };
        if self.x.len() != w.width() {
            return Err(TimedError::Malformed(
                "chain seed has the wrong width".into(),
            ));
        }
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), TimedError> {
        if self.t.is_empty() {
            return Err(TimedError::EmptyLine);
        }
        if self.t.len() != self.b.len() {
            return Err(TimedError::LengthMismatch {
                delays: self.t.len(),
                items: self.b.len(),
            });
        }
        let w = self.work()?;
        if let Some(b) = self.b.iter().find(|b| b.len() > w.width()) {
            return Err(TimedError::DataTooLong {
                len: b.len(),
                width: w.width(),
            });
        }
        Ok(())
    }

    pub fn items(&self) -> usize {
        self.t.len()
    }

    /// Steps needed to open every item: `max t`.
    pub fn total_steps(&self) -> u64 {
        self.t.iter().copied().max().unwrap_or(0)
    }

    pub fn delays_sorted(&self) -> bool {
        self.t.windows(2).all(|w| w[0] <= w[1])
    }
}

fn xor_prefix(data: &[u8], mask: &[u8]) -> Vec<u8> {
    data.iter().zip(mask).map(|(d, m)| d ^ m).collect()
}

/// Opens item `i` given the chain value at step `t[i]`.
pub fn unlock_line_at(puzzle: &TimeLinePuzzle, i: usize, chain_value: &[u8]) -> Vec<u8> {
    xor_prefix(&puzzle.b[i], chain_value)
}

fn check_items(items: &[Vec<u8>], delays: &[u64], width: usize) -> Result<(), TimedError> {
    if items.is_empty() {
        return Err(TimedError::EmptyLine);
    }
    if items.len() != delays.len() {
        return Err(TimedError::LengthMismatch {
            delays: delays.len(),
            items: items.len(),
        });
    }
    if let Some(d) = items.iter().find(|d| d.len() > width) {
        return Err(TimedError::DataTooLong {
            len: d.len(),
            width,
        });
    }
    Ok(())
}

/// Locks `items` with the squaring scheme. With the factorisation the lock
/// costs one modular exponentiation per item instead of `max t` squarings.
pub fn lock_line_square<R: RngCore + ?Sized>(
    trapdoor: &SquaringTrapdoor,
    kappa: u32,
    items: &[Vec<u8>],
    delays: &[u64],
    rng: &mut R,
) -> Result<TimeLinePuzzle, TimedError> {
    let work = trapdoor.work();
    check_items(items, delays, work.width())?;
    let x = trapdoor.random_seed(rng);
    let b = items
        .iter()
        .zip(delays)
        .map(|(d, &t)| xor_prefix(d, &work.encode(&trapdoor.fast_power(&x, t))))
        .collect();
    Ok(TimeLinePuzzle {
        scheme: Scheme::Square,
        kappa,
        x: work.encode(&x),
        t: delays.to_vec(),
        b,
        a: work.encode(work.modulus()),
    })
}

/// Locks `items` on a fresh keyed hash chain. Without a trapdoor, the locker
/// runs the chain itself once, up to `max t`.
pub fn lock_line_hash<R: RngCore + ?Sized>(
    items: &[Vec<u8>],
    delays: &[u64],
    rng: &mut R,
) -> Result<TimeLinePuzzle, TimedError> {
    let mut key = [0u8; 32];
    rng.fill_bytes(&mut key);
    let work = HashChainWork::new(key);
    check_items(items, delays, work.width())?;
    let mut x = [0u8; 32];
    rng.fill_bytes(&mut x);

    let mut order: Vec<usize> = (0..delays.len()).collect();
    order.sort_by_key(|&i| delays[i]);
    let mut b = alloc::vec![Vec::new(); items.len()];
    let mut cur = x.to_vec();
    let mut at = 0u64;
    for i in order {
        cur = work.iterate(at, &cur, delays[i] - at);
        at = delays[i];
        b[i] = xor_prefix(&items[i], &cur);
    }
    Ok(TimeLinePuzzle {
        scheme: Scheme::Hash,
        kappa: 256,
        x: x.to_vec(),
        t: delays.to_vec(),
        b,
        a: key.to_vec(),
    })
}

/// Locks `items` with a fresh instance of `scheme`; any trapdoor is dropped
/// before returning.
pub fn lock_line<R: RngCore + ?Sized>(
    scheme: Scheme,
    kappa: u32,
    items: &[Vec<u8>],
    delays: &[u64],
    rng: &mut R,
) -> Result<TimeLinePuzzle, TimedError> {
    match scheme {
        Scheme::Square => {
            let td = SquaringTrapdoor::generate(kappa, rng)?;
            lock_line_square(&td, kappa, items, delays, rng)
        }
        Scheme::Hash => lock_line_hash(items, delays, rng),
    }
}

/// Single-item time-lock puzzle.
pub fn lock<R: RngCore + ?Sized>(
    scheme: Scheme,
    kappa: u32,
    data: &[u8],
    t: u64,
    rng: &mut R,
) -> Result<TimeLinePuzzle, TimedError> {
    lock_line(scheme, kappa, &[data.to_vec()], &[t], rng)
}

/// Sequential solver that counts every step it performs.
#[derive(Debug, Clone)]
pub struct ChainSolver<'p> {
    puzzle: &'p TimeLinePuzzle,
    work: Work,
    state: Vec<u8>,
    steps: u64,
    opened: Vec<Option<Vec<u8>>>,
}

impl<'p> ChainSolver<'p> {
    pub fn new(puzzle: &'p TimeLinePuzzle) -> Result<Self, TimedError> {
        puzzle.validate()?;
        let work = puzzle.work()?;
        let mut s = ChainSolver {
            puzzle,
            work,
            state: puzzle.x.clone(),
            steps: 0,
            opened: alloc::vec![None; puzzle.items()],
        };
        s.open_ready();
        Ok(s)
    }

    fn open_ready(&mut self) {
        for i in 0..self.puzzle.items() {
            if self.opened[i].is_none() && self.puzzle.t[i] == self.steps {
                self.opened[i] = Some(unlock_line_at(self.puzzle, i, &self.state));
            }
        }
    }

    /// Performs up to `count` steps, stopping early once every item is open.
    /// Returns the number of steps actually taken.
    pub fn advance(&mut self, count: u64) -> u64 {
        let mut done = 0;
        while done < count && !self.finished() {
            self.state = self.work.step(self.steps, &self.state);
            self.steps += 1;
            done += 1;
            self.open_ready();
        }
        done
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn state(&self) -> &[u8] {
        &self.state
    }

    pub fn finished(&self) -> bool {
        self.opened.iter().all(Option::is_some)
    }

    pub fn item(&self, i: usize) -> Option<&[u8]> {
        self.opened[i].as_deref()
    }

    pub fn into_items(self) -> Vec<Option<Vec<u8>>> {
        self.opened
    }
}

/// Opens every item. Returns the items and the number of steps spent.
pub fn solve(puzzle: &TimeLinePuzzle) -> Result<(Vec<Vec<u8>>, u64), TimedError> {
    let mut s = ChainSolver::new(puzzle)?;
    s.advance(puzzle.total_steps());
    let steps = s.steps();
    let items = s
        .into_items()
        .into_iter()
        .map(|o| o.expect("all items open after max t steps"))
        .collect();
    Ok((items, steps))
}

/// A time-lock on a short key plus the data encrypted under it, for data
/// longer than one mask element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HybridPuzzle {
    pub puzzle: TimeLinePuzzle,
    pub ciphertext: Vec<u8>,
}

fn keystream_xor(key: &[u8], data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len());
    for (block, chunk) in data.chunks(32).enumerate() {
        let mut h = Sha256::new();
        h.update(key);
        h.update((block as u64).to_le_bytes());
        let pad: [u8; 32] = h.finalize().into();
        out.extend(chunk.iter().zip(pad.iter()).map(|(d, p)| d ^ p));
    }
    out
}

pub fn lock_hybrid<R: RngCore + ?Sized>(
    scheme: Scheme,
    kappa: u32,
    data: &[u8],
    t: u64,
    rng: &mut R,
) -> Result<HybridPuzzle, TimedError> {
    let width = match scheme {
        Scheme::Square => (2 * kappa as usize).div_ceil(8),
        Scheme::Hash => 32,
    };
    let mut key = alloc::vec![0u8; width.min(32)];
    rng.fill_bytes(&mut key);
    let puzzle = lock(scheme, kappa, &key, t, rng)?;
    Ok(HybridPuzzle {
        puzzle,
        ciphertext: keystream_xor(&key, data),
    })
}

pub fn unlock_hybrid(h: &HybridPuzzle) -> Result<Vec<u8>, TimedError> {
    let (items, _) = solve(&h.puzzle)?;
    Ok(keystream_xor(&items[0], &h.ciphertext))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use num_bigint::BigUint;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn hash_line_opens_in_order_with_max_t_steps() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let items = vec![b"one".to_vec(), b"two".to_vec(), b"four".to_vec()];
        let p = lock_line_hash(&items, &[1, 2, 4], &mut rng).unwrap();
        let mut s = ChainSolver::new(&p).unwrap();
        s.advance(1);
        assert_eq!(s.item(0), Some(&b"one"[..]));
        assert_eq!(s.item(1), None);
        s.advance(1);
        assert_eq!(s.item(1), Some(&b"two"[..]));
        s.advance(10);
        assert_eq!(s.steps(), 4);
        assert_eq!(s.item(2), Some(&b"four"[..]));
    }

    #[test]
    fn unsorted_delays_still_open() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let items = vec![b"late".to_vec(), b"early".to_vec()];
        let p = lock_line_hash(&items, &[9, 3], &mut rng).unwrap();
        assert!(!p.delays_sorted());
        let (got, steps) = solve(&p).unwrap();
        assert_eq!(got, items);
        assert_eq!(steps, 9);
    }

    #[test]
    fn square_lock_roundtrip_and_early_unlock_fails() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let td = SquaringTrapdoor::generate(16, &mut rng).unwrap();
        for _ in 0..20 {
            let t = rng.random_range(1..300);
            let data: Vec<u8> = (0..4).map(|_| rng.random()).collect();
            let p = lock_line_square(&td, 16, core::slice::from_ref(&data), &[t], &mut rng).unwrap();
            let (got, steps) = solve(&p).unwrap();
            assert_eq!(got[0], data);
            assert_eq!(steps, t);
            let w = p.work().unwrap();
            let early = w.iterate(0, &p.x, t - 1);
            assert_ne!(unlock_line_at(&p, 0, &early), data);
        }
    }

    #[test]
    fn too_long_data_needs_hybrid() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let long = vec![7u8; 40];
        assert!(matches!(
            lock(Scheme::Hash, 256, &long, 5, &mut rng),
            Err(TimedError::DataTooLong { len: 40, width: 32 })
        ));
        let h = lock_hybrid(Scheme::Hash, 256, &long, 5, &mut rng).unwrap();
        assert_eq!(unlock_hybrid(&h).unwrap(), long);
        let hs = lock_hybrid(Scheme::Square, 16, &long, 5, &mut rng).unwrap();
        assert_eq!(unlock_hybrid(&hs).unwrap(), long);
    }

    #[test]
    fn modulus_is_published() {
        let td = SquaringTrapdoor::from_primes(BigUint::from(65519u32), BigUint::from(65521u32));
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let p = lock_line_square(&td, 16, &[vec![1, 2]], &[3], &mut rng).unwrap();
        assert_eq!(BigUint::from_bytes_be(&p.a), td.modulus());
        assert_eq!(p.x.len(), 4);
    }

    #[test]
    fn malformed_puzzles_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut p = lock(Scheme::Hash, 256, b"x", 2, &mut rng).unwrap();
        p.b.push(vec![]);
        assert!(matches!(
            p.validate(),
            Err(TimedError::LengthMismatch { .. })
        ));
        let mut q = lock(Scheme::Hash, 256, b"x", 2, &mut rng).unwrap();
        q.a.pop();
        assert!(q.validate().is_err());
    }
}
