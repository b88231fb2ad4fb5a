use datashare_core::timed::{
    hiding_experiment, lock, lock_hybrid, lock_line, lock_line_square, solve, unlock_hybrid,
    unlock_line_at, ChainSolver, HidingVariant, QueryingAdversary, RandomGuessAdversary, Scheme,
    SquaringTrapdoor, WorkFunction, TOY_KAPPA,
};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn time_locks_roundtrip_both_schemes() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    for i in 0..40 {
        let t = r.random_range(0..200);
        let data: Vec<u8> = (0..r.random_range(0..=4)).map(|_| r.random()).collect();
        let scheme = if i % 2 == 0 { Scheme::Square } else { Scheme::Hash };
        let kappa = if scheme == Scheme::Square { TOY_KAPPA } else { 256 };
        let p = lock(scheme, kappa, &data, t, &mut r).unwrap();
        let (items, steps) = solve(&p).unwrap();
        assert_eq!(items, vec![data]);
        assert_eq!(steps, t);
    }
}

#[test]
fn fast_power_equals_repeated_squaring() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let td = SquaringTrapdoor::generate(TOY_KAPPA, &mut r).unwrap();
        let n = td.modulus();
        let x = td.random_seed(&mut r);
        let t = r.random_range(0..1000u64);
        let mut y = x.clone();
        for _ in 0..t {
            y = &y * &y % &n;
        }
        assert_eq!(td.fast_power(&x, t), y);
    }
}

#[test]
fn line_opens_each_item_at_its_delay() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let delays = [1u64, 2, 4, 8, 16, 32, 64, 128];
    let items: Vec<Vec<u8>> = (0..8u8).map(|i| vec![i, i ^ 0xff]).collect();
    let p = lock_line(Scheme::Hash, 256, &items, &delays, &mut r).unwrap();
    let mut s = ChainSolver::new(&p).unwrap();
    for (i, &t) in delays.iter().enumerate() {
        s.advance(t - s.steps());
        assert_eq!(s.steps(), t);
        assert_eq!(s.item(i), Some(&items[i][..]));
        if i + 1 < delays.len() {
            assert_eq!(s.item(i + 1), None);
        }
    }
    assert!(s.finished());
    assert_eq!(s.steps(), 128);

    // Separate locks cost the sum of the delays.
    let separate: u64 = items
        .iter()
        .zip(delays)
        .map(|(d, t)| solve(&lock(Scheme::Hash, 256, d, t, &mut r).unwrap()).unwrap().1)
        .sum();
    assert_eq!(separate, 255);
}

#[test]
fn wrong_chain_value_does_not_open() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let td = SquaringTrapdoor::generate(TOY_KAPPA, &mut r).unwrap();
    let items = vec![vec![7, 7], vec![8, 8]];
    let p = lock_line_square(&td, TOY_KAPPA, &items, &[3, 6], &mut r).unwrap();
    let w = p.work().unwrap();
    let at3 = w.iterate(0, &p.x, 3);
    let at6 = w.iterate(3, &at3, 3);
    assert_eq!(unlock_line_at(&p, 0, &at3), items[0]);
    assert_eq!(unlock_line_at(&p, 1, &at6), items[1]);
    assert_ne!(unlock_line_at(&p, 1, &at3), items[1]);
    // The published modulus is the trapdoor's.
    assert_eq!(BigUint::from_bytes_be(&p.a), td.modulus());
}

#[test]
fn hybrid_carries_long_data() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    let data: Vec<u8> = (0..100).map(|_| r.random()).collect();
    for scheme in [Scheme::Square, Scheme::Hash] {
        let h = lock_hybrid(scheme, 64, &data, 17, &mut r).unwrap();
        assert_eq!(unlock_hybrid(&h).unwrap(), data);
    }
}

#[test]
fn queried_masks_do_not_reveal_the_rest() {
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let d0 = vec![vec![0u8; 2]; 4];
    let d1 = vec![vec![1u8; 2]; 4];
    let rep = hiding_experiment(
        &mut QueryingAdversary { query_all: false },
        Scheme::Hash,
        256,
        &d0,
        &d1,
        &[1, 2, 3, 4],
        2000,
        HidingVariant::Standard,
        Some(0),
        &mut r,
    )
    .unwrap();
    assert!((rep.rate - 0.5).abs() <= 3.0 * rep.sigma, "{rep:?}");

    let rep = hiding_experiment(
        &mut RandomGuessAdversary,
        Scheme::Hash,
        256,
        &d0,
        &d1,
        &[1, 2, 3, 4],
        2000,
        HidingVariant::Standard,
        None,
        &mut r,
    )
    .unwrap();
    assert!((rep.rate - 0.5).abs() <= 3.0 * rep.sigma, "{rep:?}");
}
