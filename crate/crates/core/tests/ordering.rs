//! Ordering properties checked against independent oracles: a brute-force
//! search for the true minimum swap count and a linear-scan Belady policy.

mod oracles;

use graphvec_core::ordering::belady_replay;
use graphvec_core::{
    elimination_order, elimination_swaps, hilbert_order, hilbert_symmetric_order, lower_bound_swaps, random_order,
    OrderingKind,
};
use oracles::{brute_force_min_swaps, oracle_replay};

#[test]
fn elimination_within_one_of_true_optimum() {
    for p in 2..=5u32 {
        for c in 2..=p.min(3) {
            let best = brute_force_min_swaps(p, c);
            let lb = lower_bound_swaps(p, c).unwrap();
            let elim = elimination_order(p, c, 0).unwrap().swap_count;
            assert!(best >= lb, "p={p} c={c}: optimum {best} below bound {lb}");
            assert!(elim >= best);
            assert!(elim <= best + 1, "p={p} c={c}: elimination {elim} optimum {best}");
        }
    }
}

#[test]
fn elimination_closed_form_exhaustive() {
    for p in 2..=64u32 {
        for c in 2..=p {
            let plan = elimination_order(p, c, u64::from(p * 131 + c)).unwrap();
            assert_eq!(plan.swap_count, elimination_swaps(p, c).unwrap(), "p={p} c={c}");
        }
    }
}

#[test]
fn near_optimal_ratio() {
    for p in [8u32, 16, 32, 64, 128] {
        let c = p / 4;
        let plan = elimination_order(p, c, 1).unwrap();
        let lb = lower_bound_swaps(p, c).unwrap();
        let ratio = plan.swap_count as f64 / lb as f64;
        assert!(ratio <= 1.25, "p={p} c={c} ratio {ratio}");
    }
}

#[test]
fn all_generators_valid_and_above_bound() {
    for p in 2..=32u32 {
        for c in 2..=p {
            let lb = lower_bound_swaps(p, c).unwrap();
            for kind in OrderingKind::ALL {
                let plan = kind.generate(p, c, 5).unwrap();
                plan.check().unwrap_or_else(|e| panic!("{kind} p={p} c={c}: {e}"));
                assert!(plan.swap_count >= lb, "{kind} p={p} c={c}");
            }
        }
    }
}

#[test]
fn belady_matches_oracle_on_random_plans() {
    for seed in 0..100u64 {
        let p = 2 + (seed % 7) as u32;
        let c = 2 + (seed / 7) as u32 % (p - 1);
        let plan = random_order(p, c, seed).unwrap();
        let replay = belady_replay(&plan.buckets, p, c).unwrap();
        assert_eq!(replay.events, oracle_replay(&plan.buckets, c as usize), "seed {seed}");
    }
}

#[test]
fn random_worse_than_elimination_at_scale() {
    let (p, c) = (32u32, 8u32);
    let elim = elimination_order(p, c, 0).unwrap().swap_count as f64;
    let mean = (0..20u64).map(|s| random_order(p, c, s).unwrap().swap_count as f64).sum::<f64>() / 20.0;
    assert!(mean > elim, "random mean {mean} vs elimination {elim}");
}

#[test]
fn hilbert_plans_match_oracle() {
    for p in [4u32, 6, 8] {
        for c in 2..=p {
            for plan in [hilbert_order(p, c).unwrap(), hilbert_symmetric_order(p, c).unwrap()] {
                let oracle = oracle_replay(&plan.buckets, c as usize);
                assert_eq!(plan.events, oracle);
            }
        }
    }
}
