//! Shamir secret sharing over a prime field.

use alloc::vec::Vec;

use rand::{Rng, RngCore};
use thiserror::Error;

/// The Mersenne prime `2^61 - 1`, the default field modulus.
pub const MERSENNE_61: u64 = (1 << 61) - 1;

/// Bytes packed into one field element by the byte-string helpers; fits
/// below [`MERSENNE_61`].
pub const LIMB_BYTES: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SharingError {
    #[error("threshold k = {k} must satisfy 1 <= k <= n = {n}")]
    BadThreshold { k: usize, n: usize },
    #[error("modulus {0} is not a usable prime")]
    BadModulus(u64),
    #[error("value {value} is not reduced modulo {modulus}")]
    Unreduced { value: u64, modulus: u64 },
    #[error("duplicate share index {0}")]
    DuplicateIndex(u64),
    #[error("share index must be non-zero")]
    ZeroIndex,
    #[error("shares use different moduli")]
    MixedModuli,
    #[error("byte shares have inconsistent lengths")]
    RaggedShares,
}

/// An element of `Z_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    pub value: u64,
    pub modulus: u64,
}

impl FieldElement {
    pub fn new(value: u64, modulus: u64) -> Result<Self, SharingError> {
        check_modulus(modulus)?;
        if value >= modulus {
            return Err(SharingError::Unreduced { value, modulus });
        }
        Ok(FieldElement { value, modulus })
    }

    fn raw(value: u64, modulus: u64) -> Self {
        FieldElement { value, modulus }
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = Self::raw(1 % self.modulus, self.modulus);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via Fermat; `None` for zero.
    pub fn inv(self) -> Option<Self> {
        if self.value == 0 {
            None
        } else {
            Some(self.pow(self.modulus - 2))
        }
    }
}

impl core::ops::Add for FieldElement {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self::raw(
            ((self.value as u128 + o.value as u128) % self.modulus as u128) as u64,
            self.modulus,
        )
    }
}

impl core::ops::Sub for FieldElement {
    type Output = Self;

    fn sub(self, o: Self) -> Self {
        Self::raw(
            ((self.value as u128 + self.modulus as u128 - o.value as u128) % self.modulus as u128)
                as u64,
            self.modulus,
        )
    }
}

impl core::ops::Mul for FieldElement {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        Self::raw(
            ((self.value as u128 * o.value as u128) % self.modulus as u128) as u64,
            self.modulus,
        )
    }
}

fn check_modulus(p: u64) -> Result<(), SharingError> {
    // Products are formed in u128, so any prime below 2^64 works.
    if p < 2 || !is_prime_u64(p) {
        return Err(SharingError::BadModulus(p));
    }
    Ok(())
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut r = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                r = mulmod(r, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        r
    };
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// A point `(index, value)` on the sharing polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Share {
    pub index: u64,
    pub value: FieldElement,
}

/// Shares `secret` with a fresh random polynomial of degree `k - 1`,
/// evaluated at `x = 1..=n`.
pub fn share<R: RngCore + ?Sized>(
    secret: FieldElement,
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Share>, SharingError> {
    let p = secret.modulus;
    let coeffs: Vec<FieldElement> = (1..k)
        .map(|_| FieldElement::raw(rng.random_range(0..p), p))
        .collect();
    share_with_coefficients(secret, &coeffs, k, n)
}

/// Shares `secret` with the explicit higher coefficients `a_1..a_{k-1}`.
pub fn share_with_coefficients(
    secret: FieldElement,
    coefficients: &[FieldElement],
    k: usize,
    n: usize,
) -> Result<Vec<Share>, SharingError> {
    let p = secret.modulus;
    check_modulus(p)?;
    if k == 0 || k > n || coefficients.len() + 1 != k {
        return Err(SharingError::BadThreshold { k, n });
    }
    if (n as u64) >= p {
        return Err(SharingError::BadModulus(p));
    }
    if coefficients.iter().any(|c| c.modulus != p) {
        return Err(SharingError::MixedModuli);
    }
    Ok((1..=n as u64)
        .map(|x| {
            let xe = FieldElement::raw(x, p);
            // Horner from the top coefficient down to the secret.
            let mut acc = FieldElement::raw(0, p);
            for c in coefficients.iter().rev() {
                acc = acc * xe + *c;
            }
            acc = acc * xe + secret;
            Share {
                index: x,
                value: acc,
            }
        })
        .collect())
}

/// Lagrange interpolation at zero. `Ok(None)` when fewer than `k` shares are
/// supplied.
pub fn reconstruct(shares: &[Share], k: usize) -> Result<Option<FieldElement>, SharingError> {
    if k == 0 {
        return Err(SharingError::BadThreshold { k, n: shares.len() });
    }
    if shares.len() < k {
        return Ok(None);
    }
    let p = shares[0].value.modulus;
    for (i, s) in shares.iter().enumerate() {
        if s.value.modulus != p {
            return Err(SharingError::MixedModuli);
        }
        if s.index % p == 0 {
            return Err(SharingError::ZeroIndex);
        }
        if shares[..i].iter().any(|o| o.index == s.index) {
            return Err(SharingError::DuplicateIndex(s.index));
        }
    }
    let used = &shares[..k];
    let mut acc = FieldElement::raw(0, p);
    for (j, sj) in used.iter().enumerate() {
        let xj = FieldElement::raw(sj.index % p, p);
        let mut num = FieldElement::raw(1, p);
        let mut den = FieldElement::raw(1, p);
        for (m, sm) in used.iter().enumerate() {
            if m == j {
                continue;
            }
            let xm = FieldElement::raw(sm.index % p, p);
            num = num * xm;
            den = den * (xm - xj);
        }
        let inv = den.inv().ok_or(SharingError::DuplicateIndex(sj.index))?;
        acc = acc + sj.value * num * inv;
    }
    Ok(Some(acc))
}

/// One party's share of a byte string: the byte length plus one share per
/// [`LIMB_BYTES`]-byte limb, all at the same index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteShare {
    pub index: u64,
    pub len: usize,
    pub limbs: Vec<u64>,
}

impl ByteShare {
    /// Length-prefixed little-endian encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.limbs.len());
        out.extend_from_slice(&self.index.to_le_bytes());
        out.extend_from_slice(&(self.len as u64).to_le_bytes());
        for l in &self.limbs {
            out.extend_from_slice(&l.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        if bytes.len() < 16 || !(bytes.len() - 16).is_multiple_of(8) {
            return None;
        }
        let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let index = word(0);
        let len = word(8) as usize;
        let limbs: Vec<u64> = (16..bytes.len()).step_by(8).map(word).collect();
        if limbs.len() != len.div_ceil(LIMB_BYTES) {
            return None;
        }
        Some(ByteShare { index, len, limbs })
    }
}

/// Shares an arbitrary byte string over `GF(2^61 - 1)`, limb by limb.
pub fn share_bytes<R: RngCore + ?Sized>(
    secret: &[u8],
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<ByteShare>, SharingError> {
    if k == 0 || k > n {
        return Err(SharingError::BadThreshold { k, n });
    }
    let mut out: Vec<ByteShare> = (1..=n as u64)
        .map(|index| ByteShare {
            index,
            len: secret.len(),
            limbs: Vec::new(),
        })
        .collect();
    for chunk in secret.chunks(LIMB_BYTES) {
        let mut buf = [0u8; 8];
        buf[..chunk.len()].copy_from_slice(chunk);
        let limb = FieldElement::raw(u64::from_le_bytes(buf), MERSENNE_61);
        for (party, s) in share(limb, k, n, rng)?.into_iter().enumerate() {
            out[party].limbs.push(s.value.value);
        }
    }
    Ok(out)
}

/// Inverse of [`share_bytes`]; `Ok(None)` below the threshold.
pub fn reconstruct_bytes(shares: &[ByteShare], k: usize) -> Result<Option<Vec<u8>>, SharingError> {
    if shares.len() < k {
        return Ok(None);
    }
    let len = shares[0].len;
    let limbs = shares[0].limbs.len();
    if shares
        .iter()
        .any(|s| s.len != len || s.limbs.len() != limbs)
    {
        return Err(SharingError::RaggedShares);
    }
    let mut out = Vec::with_capacity(len);
    for l in 0..limbs {
        let points: Vec<Share> = shares
            .iter()
            .map(|s| Share {
                index: s.index,
                value: FieldElement::raw(s.limbs[l] % MERSENNE_61, MERSENNE_61),
            })
            .collect();
        let v = match reconstruct(&points, k)? {
            Some(v) => v.value,
            None => return Ok(None),
        };
        out.extend_from_slice(&v.to_le_bytes()[..LIMB_BYTES]);
    }
    out.truncate(len);
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn fe(v: u64, p: u64) -> FieldElement {
        FieldElement::new(v, p).unwrap()
    }

    #[test]
    fn worked_example_mod_7() {
        let shares = share_with_coefficients(fe(3, 7), &[fe(2, 7)], 2, 3).unwrap();
        let pts: Vec<(u64, u64)> = shares.iter().map(|s| (s.index, s.value.value)).collect();
        assert_eq!(pts, vec![(1, 5), (2, 0), (3, 2)]);
        assert_eq!(reconstruct(&shares[1..], 2).unwrap(), Some(fe(3, 7)));
        assert_eq!(reconstruct(&shares[..1], 2).unwrap(), None);
    }

    #[test]
    fn duplicate_indices_rejected() {
        let s = Share {
            index: 1,
            value: fe(5, 7),
        };
        assert_eq!(
            reconstruct(&[s, s], 2),
            Err(SharingError::DuplicateIndex(1))
        );
    }

    #[test]
    fn threshold_validation() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert!(share(fe(1, 7), 0, 3, &mut rng).is_err());
        assert!(share(fe(1, 7), 4, 3, &mut rng).is_err());
        assert!(FieldElement::new(7, 7).is_err());
        assert!(FieldElement::new(1, 8).is_err());
    }

    #[test]
    fn mersenne_is_prime() {
        assert!(is_prime_u64(MERSENNE_61));
        assert!(!is_prime_u64(MERSENNE_61 - 2));
        assert!(is_prime_u64(65521));
        assert!(!is_prime_u64(65535));
    }

    #[test]
    fn bytes_roundtrip_any_subset() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let secret = b"ordered delivery, 23 bytes".to_vec();
        let shares = share_bytes(&secret, 3, 5, &mut rng).unwrap();
        for s in &shares {
            assert_eq!(ByteShare::decode(&s.encode()).as_ref(), Some(s));
        }
        let picked = vec![shares[4].clone(), shares[0].clone(), shares[2].clone()];
        assert_eq!(reconstruct_bytes(&picked, 3).unwrap(), Some(secret.clone()));
        assert_eq!(reconstruct_bytes(&picked[..2], 3).unwrap(), None);
        let empty = share_bytes(&[], 2, 2, &mut rng).unwrap();
        assert_eq!(reconstruct_bytes(&empty, 2).unwrap(), Some(vec![]));
    }
}
