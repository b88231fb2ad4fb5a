//! Sequential work functions: one call of `step` is one unit of delay.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use rand::RngCore;
use sha2::{Digest, Sha256};

use super::prime::{random_below, random_prime};
use super::TimedError;

/// One step of an inherently sequential chain `x_{i+1} = step(i, x_i)`.
pub trait WorkFunction {
    /// Length in bytes of every chain value (and so of one mask element).
    fn width(&self) -> usize;
    fn step(&self, index: u64, x: &[u8]) -> Vec<u8>;

    /// `count` sequential steps starting at chain position `from`.
    fn iterate(&self, from: u64, x: &[u8], count: u64) -> Vec<u8> {
        let mut cur = x.to_vec();
        for i in 0..count {
            cur = self.step(from + i, &cur);
        }
        cur
    }
}

/// Repeated squaring modulo `N = p * q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquaringWork {
    modulus: BigUint,
    width: usize,
}

impl SquaringWork {
    pub fn new(modulus: BigUint) -> Result<Self, TimedError> {
        if modulus.bits() < 8 {
            return Err(TimedError::Malformed("modulus too small".into()));
        }
        let width = (modulus.bits() as usize).div_ceil(8);
        Ok(SquaringWork { modulus, width })
    }

    pub fn from_bytes(a: &[u8]) -> Result<Self, TimedError> {
        Self::new(BigUint::from_bytes_be(a))
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn encode(&self, v: &BigUint) -> Vec<u8> {
        let raw = v.to_bytes_be();
        let mut out = vec![0u8; self.width - raw.len()];
        out.extend_from_slice(&raw);
        out
    }

    pub fn decode(&self, x: &[u8]) -> BigUint {
        BigUint::from_bytes_be(x)
    }
}

impl WorkFunction for SquaringWork {
    fn width(&self) -> usize {
        self.width
    }

    fn step(&self, _index: u64, x: &[u8]) -> Vec<u8> {
        let v = self.decode(x);
        self.encode(&(&v * &v % &self.modulus))
    }
}

/// The factorisation of a squaring modulus. Knowing it turns `t` squarings
/// into one exponentiation by `2^t mod phi(N)`.
#[derive(Clone, PartialEq, Eq)]
pub struct SquaringTrapdoor {
    p: BigUint,
    q: BigUint,
}

impl core::fmt::Debug for SquaringTrapdoor {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("SquaringTrapdoor(..)")
    }
}

impl SquaringTrapdoor {
    /// Two distinct random `kappa`-bit primes.
    pub fn generate<R: RngCore + ?Sized>(kappa: u32, rng: &mut R) -> Result<Self, TimedError> {
        if kappa < 8 {
            return Err(TimedError::BadKappa(kappa));
        }
        let p = random_prime(kappa, rng);
        loop {
            let q = random_prime(kappa, rng);
            if q != p {
                return Ok(SquaringTrapdoor { p, q });
            }
        }
    }

    /// For fixed test vectors only; `p` and `q` must be distinct primes.
    pub fn from_primes(p: BigUint, q: BigUint) -> Self {
        SquaringTrapdoor { p, q }
    }

    pub fn modulus(&self) -> BigUint {
        &self.p * &self.q
    }

    pub fn phi(&self) -> BigUint {
        (&self.p - 1u32) * (&self.q - 1u32)
    }

    pub fn work(&self) -> SquaringWork {
        SquaringWork::new(self.modulus()).expect("modulus of two primes")
    }

    /// `x^(2^t) mod N` via `e = 2^t mod phi(N)`; valid for `x` coprime to `N`.
    pub fn fast_power(&self, x: &BigUint, t: u64) -> BigUint {
        let phi = self.phi();
        let e = BigUint::from(2u32).modpow(&BigUint::from(t), &phi);
        x.modpow(&e, &self.modulus())
    }

    /// A random chain seed in `[2, N - 1)` coprime to `N`.
    pub fn random_seed<R: RngCore + ?Sized>(&self, rng: &mut R) -> BigUint {
        let n = self.modulus();
        loop {
            let x = random_below(&(&n - 3u32), rng) + 2u32;
            if x.gcd(&n).is_one() {
                return x;
            }
        }
    }
}

/// Iterated keyed SHA-256: `x_{i+1} = H(key || i || x_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashChainWork {
    key: [u8; 32],
}

impl HashChainWork {
    pub fn new(key: [u8; 32]) -> Self {
        HashChainWork { key }
    }

    pub fn from_bytes(a: &[u8]) -> Result<Self, TimedError> {
        let key: [u8; 32] = a
            .try_into()
            .map_err(|_| TimedError::Malformed("hash-chain key must be 32 bytes".into()))?;
        Ok(Self::new(key))
    }

    pub fn key(&self) -> &[u8; 32] {
        &self.key
    }
}

impl WorkFunction for HashChainWork {
    fn width(&self) -> usize {
        32
    }

    fn step(&self, index: u64, x: &[u8]) -> Vec<u8> {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(index.to_le_bytes());
        h.update(x);
        let out: [u8; 32] = h.finalize().into();
        out.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn worked_squaring_values() {
        let td = SquaringTrapdoor::from_primes(BigUint::from(11u32), BigUint::from(23u32));
        assert_eq!(td.modulus(), BigUint::from(253u32));
        assert_eq!(td.phi(), BigUint::from(220u32));
        let w = td.work();
        let step = |v: u32| w.decode(&w.step(0, &w.encode(&BigUint::from(v))));
        assert_eq!(step(2), BigUint::from(4u32));
        assert_eq!(step(16), BigUint::from(3u32));
    }

    #[test]
    fn fast_path_matches_sequential() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        let td = SquaringTrapdoor::generate(16, &mut rng).unwrap();
        let w = td.work();
        for t in [0u64, 1, 2, 5, 64, 333] {
            let x = td.random_seed(&mut rng);
            let slow = w.decode(&w.iterate(0, &w.encode(&x), t));
            assert_eq!(td.fast_power(&x, t), slow, "t = {t}");
        }
    }

    #[test]
    fn hash_steps_depend_on_index_and_key() {
        let w = HashChainWork::new([1; 32]);
        let x = [0u8; 32];
        assert_ne!(w.step(0, &x), w.step(1, &x));
        assert_ne!(w.step(0, &x), HashChainWork::new([2; 32]).step(0, &x));
        assert_eq!(w.iterate(0, &x, 2), w.step(1, &w.step(0, &x)));
    }
}
