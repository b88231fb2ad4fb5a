use datashare_core::mechanism::{
    brute_force_equilibrium, decide_nsq, fas_to_instance, min_feedback_arc_weight, share_data,
    FasGraph,
};
use datashare_core::model::{
    auxiliary_score_is_superadditive, exact_requirement, is_collaborative_equilibrium,
    next_permutation, reward, supports_equilibrium, worst_case_reward, SubsetTable,
};
use datashare_core::{Instance, LearningBounds, Permutation};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn perms(n: usize) -> Vec<Vec<usize>> {
    let mut v: Vec<usize> = (0..n).collect();
    let mut out = vec![v.clone()];
    while next_permutation(&mut v) {
        out.push(v.clone());
    }
    out
}

/// Minimum over orders of `sum alpha/beta^t + sum (n-t) mu`, written out
/// directly from the condition.
fn ndim_oracle(alpha: &[f64], beta: f64, mu: &[f64]) -> f64 {
    let n = alpha.len();
    perms(n)
        .iter()
        .map(|o| {
            o.iter()
                .enumerate()
                .map(|(i, &p)| {
                    let t = i + 1;
                    alpha[p] / beta.powi(t as i32) + (n - t) as f64 * mu[p]
                })
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn ndim_instance() -> impl Strategy<Value = Instance> {
    (1usize..=6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..1.0, n),
                prop::sample::select(vec![0.5, 0.9, 1.0]),
                prop::collection::vec(0.0f64..1.0, n),
                0.0f64..12.0,
                prop::sample::select(vec![0.0, 0.01, 0.1]),
            )
        })
        .prop_map(|(alpha, beta, mu, smax, eps)| {
            Instance::new(alpha, beta, LearningBounds::NDim(mu), 0.0, smax, eps).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn share_data_agrees_with_permutation_oracle(inst in ndim_instance()) {
        let LearningBounds::NDim(mu) = &inst.bounds else { unreachable!() };
        let best = ndim_oracle(&inst.alpha, inst.beta, mu);
        let out = share_data(&inst).unwrap();
        prop_assume!((best - inst.budget()).abs() > 1e-7);
        prop_assert_eq!(out.is_some(), best <= inst.budget());
        if let Some(o) = out {
            let v = is_collaborative_equilibrium(&inst, &o).unwrap();
            prop_assert!(v.holds, "{:?}", v);
            prop_assert!((o.delta_at(inst.n()) - inst.smax).abs() < TOL);
            prop_assert!(supports_equilibrium(&inst, &o.pi).unwrap());
        }
    }

    #[test]
    fn share_data_agrees_with_brute_force(inst in ndim_instance()) {
        let a = share_data(&inst).unwrap();
        let b = brute_force_equilibrium(&inst).unwrap();
        prop_assert_eq!(a.is_some(), b.is_some());
    }

    #[test]
    fn rewards_telescope(inst in ndim_instance()) {
        // With beta = 1 the undiscounted rewards sum to delta_{pi(n)} - s0.
        let inst = Instance { beta: 1.0, ..inst };
        if let Some(o) = share_data(&inst).unwrap() {
            let total: f64 = (1..=inst.n())
                .map(|t| reward(&inst, &o.pi, &o.delta, t).unwrap())
                .sum();
            prop_assert!((total - (inst.smax - inst.s0)).abs() < 1e-9);
        }
    }

    #[test]
    fn steps_after_the_first_are_tight(inst in ndim_instance()) {
        if let Some(o) = share_data(&inst).unwrap() {
            for t in 2..=inst.n() {
                let s = worst_case_reward(&inst, &o, t).unwrap() - inst.alpha[o.pi.player_at(t)];
                let want = inst.discount(t) * inst.epsilon;
                prop_assert!((s - want).abs() < 1e-9, "t={} slack={} want={}", t, s, want);
            }
        }
    }

    #[test]
    fn exact_requirement_is_iff(
        inst in ndim_instance(),
        order in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
    ) {
        let n = inst.n();
        let pi = Permutation::new(order.into_iter().filter(|&p| p < n).collect()).unwrap();
        let tight = datashare_core::model::tight_schedule(&inst, &pi).unwrap();
        let holds = is_collaborative_equilibrium(&inst, &tight).unwrap().holds;
        let req = exact_requirement(&inst, &pi).unwrap();
        let limit = inst.budget() + inst.epsilon;
        prop_assume!((req - limit).abs() > 1e-7);
        // The first step needs slack >= 0, not >= eps, so one eps of the
        // n * eps reserved by the budget is spare.
        prop_assert_eq!(holds, req <= limit);
    }
}

fn random_graph(n: usize, density: f64, seed: u64) -> FasGraph {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && r.random_bool(density) {
                edges.push((u, v, (r.random_range(0..=8) as f64) / 8.0));
            }
        }
    }
    FasGraph { n, edges }
}

/// Smallest total weight of an edge subset whose removal leaves a DAG.
fn fas_by_subsets(g: &FasGraph) -> f64 {
    let m = g.edges.len();
    assert!(m <= 16);
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << m) {
        let w: f64 = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| g.edges[i].2).sum();
        if w >= best {
            continue;
        }
        let kept: Vec<(usize, usize)> = (0..m)
            .filter(|i| mask >> i & 1 == 0)
            .map(|i| (g.edges[i].0, g.edges[i].1))
            .collect();
        if is_acyclic(g.n, &kept) {
            best = w;
        }
    }
    best
}

fn is_acyclic(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut indeg = vec![0; n];
    for &(_, v) in edges {
        indeg[v] += 1;
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(u) = stack.pop() {
        seen += 1;
        for &(a, b) in edges {
            if a == u {
                indeg[b] -= 1;
                if indeg[b] == 0 {
                    stack.push(b);
                }
            }
        }
    }
    seen == n
}

#[test]
fn fas_weight_matches_subset_enumeration() {
    for seed in 0..25 {
        let g = random_graph(2 + (seed as usize % 4), 0.5, seed);
        let (w, order) = min_feedback_arc_weight(&g).unwrap();
        assert!((w - fas_by_subsets(&g)).abs() < 1e-12, "seed {seed}");
        assert!((g.back_edge_weight(&order) - w).abs() < 1e-12);
    }
}

#[test]
fn nsq_decides_fas_threshold() {
    for seed in 0..20 {
        let g = random_graph(3 + (seed as usize % 3), 0.4, 100 + seed);
        let opt = fas_by_subsets(&g);
        for gamma in [0.0, opt - 0.0625, opt, opt + 0.0625, 2.0] {
            if gamma < 0.0 {
                continue;
            }
            let d = decide_nsq(&fas_to_instance(&g, gamma).unwrap()).unwrap();
            assert_eq!(d.feasible, opt <= gamma + 1e-9, "seed {seed} gamma {gamma}");
            if let Some(w) = d.witness {
                assert!(g.back_edge_weight(&w) <= gamma + 1e-9);
            }
        }
    }
}

#[test]
fn superadditive_tables_support_every_order() {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let n = r.random_range(1..=5);
        let w: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let bonus: f64 = r.random_range(0.0..0.5);
        let table = SubsetTable::from_fn(n, |m| {
            let k = m.count_ones() as f64;
            (0..n).filter(|i| m >> i & 1 == 1).map(|i| w[i]).sum::<f64>() + bonus * k * k
        })
        .unwrap();
        assert!(auxiliary_score_is_superadditive(&table, 1e-12).holds);
        let alpha: Vec<f64> = (0..n).map(|i| table.get(1 << i)).collect();
        let inst = Instance::new(
            alpha,
            1.0,
            LearningBounds::NDim(vec![0.0; n]),
            0.0,
            table.get(table.full()),
            0.0,
        )
        .unwrap();
        for o in perms(n) {
            assert!(supports_equilibrium(&inst, &Permutation::new(o).unwrap()).unwrap());
        }
    }
}

#[test]
fn brute_force_handles_general_bounds() {
    use datashare_core::model::GeneralBounds;
    // The learning bound of a player depends on who went right before it.
    let n = 3;
    let g = GeneralBounds::from_fn(n, |pi, p| {
        let pos = pi.positions()[p];
        if pos == 0 {
            0.0
        } else {
            0.1 * (pi.player_at(pos) + 1) as f64
        }
    });
    let inst = Instance::new(vec![0.2; 3], 0.9, LearningBounds::General(g), 0.0, 2.0, 0.0).unwrap();
    let o = brute_force_equilibrium(&inst).unwrap().expect("feasible");
    assert!(is_collaborative_equilibrium(&inst, &o).unwrap().holds);
}
