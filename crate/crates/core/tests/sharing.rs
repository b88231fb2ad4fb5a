use std::collections::BTreeMap;

use datashare_core::sharing::{
    reconstruct, reconstruct_bytes, share, share_bytes, share_with_coefficients, FieldElement,
    Share, MERSENNE_61,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fe(v: u64, p: u64) -> FieldElement {
    FieldElement::new(v, p).unwrap()
}

/// Every k-subset of `0..n`, as index lists.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).collect())
        .collect()
}

proptest! {
    #[test]
    fn any_k_shares_reconstruct(secret in 0u64..MERSENNE_61, n in 1usize..=6, seed: u64) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        for k in 1..=n {
            let shares = share(fe(secret, MERSENNE_61), k, n, &mut r).unwrap();
            for idx in subsets(n, k) {
                let pick: Vec<Share> = idx.iter().map(|&i| shares[i]).collect();
                prop_assert_eq!(reconstruct(&pick, k).unwrap(), Some(fe(secret, MERSENNE_61)));
                prop_assert_eq!(reconstruct(&pick[1..], k).unwrap(), None);
            }
        }
    }

    #[test]
    fn byte_sharing_roundtrips(data in prop::collection::vec(any::<u8>(), 0..40), seed: u64) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let shares = share_bytes(&data, 3, 5, &mut r).unwrap();
        prop_assert_eq!(reconstruct_bytes(&shares[2..], 3).unwrap(), Some(data.clone()));
        prop_assert_eq!(reconstruct_bytes(&shares[..2], 3).unwrap(), None);
    }
}

#[test]
fn one_share_is_uniform_over_all_secrets() {
    let p = 7;
    let mut marginals = Vec::new();
    for s in 0..p {
        // Multiset of (index, value) for each single share, over all a_1.
        let mut counts: BTreeMap<(u64, u64), usize> = BTreeMap::new();
        for a1 in 0..p {
            for sh in share_with_coefficients(fe(s, p), &[fe(a1, p)], 2, 3).unwrap() {
                *counts.entry((sh.index, sh.value.value)).or_default() += 1;
            }
        }
        marginals.push(counts);
    }
    assert!(marginals.windows(2).all(|w| w[0] == w[1]));
    assert!(marginals[0].values().all(|&c| c == 1));
}

#[test]
fn worked_polynomial() {
    // q(x) = 3 + 2x over GF(7): shares 5, 0, 2.
    let shares = share_with_coefficients(fe(3, 7), &[fe(2, 7)], 2, 3).unwrap();
    let values: Vec<u64> = shares.iter().map(|s| s.value.value).collect();
    assert_eq!(values, vec![5, 0, 2]);
    assert_eq!(reconstruct(&shares[1..], 2).unwrap(), Some(fe(3, 7)));
}
