//! Property tests for the structural invariants: serialization round trips,
//! bivalued rescaling, cycle cancellation conservation laws, earning views,
//! generator determinism, and oracle consistency of the algorithm outputs.

use chores::instances::{
    normalize_bivalued, random_instance, ErInstance, Instance, IntegralAllocation, PaymentVector,
    ValueModel,
};
use chores::market::{earning_views, make_acyclic, ErEquilibrium, PaymentGraph};
use chores::verify::{minimal_alpha_oracle, OracleCriterion};
use chores::{qi, Q};
use num::{One, Signed, Zero};
use proptest::prelude::*;

fn small_q() -> impl Strategy<Value = Q> {
    (1i64..=12, 1i64..=4).prop_map(|(n, d)| Q::new(n.into(), d.into()))
}

fn instance_strategy(max_n: usize, max_m: usize) -> impl Strategy<Value = Instance> {
    (1..=max_n, 1..=max_m).prop_flat_map(|(n, m)| {
        proptest::collection::vec(proptest::collection::vec(small_q(), m), n)
            .prop_map(move |d| Instance::validate(n, m, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instance_json_round_trip(inst in instance_strategy(4, 6)) {
        let back = Instance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(inst, back);
    }

    #[test]
    fn allocation_json_round_trip(owner in proptest::collection::vec(0usize..3, 1..8)) {
        let alloc = IntegralAllocation::from_owner(&owner, 3).unwrap();
        let p = PaymentVector::new(vec![qi(1); owner.len()]).unwrap();
        let (back, back_p) = IntegralAllocation::from_json(&alloc.to_json(Some(&p))).unwrap();
        prop_assert_eq!(&alloc, &back);
        prop_assert_eq!(Some(p), back_p);
    }

    #[test]
    fn bivalued_rescale_is_exact(inst in instance_strategy(3, 5)) {
        match normalize_bivalued(&inst) {
            Ok(bform) => {
                prop_assert!(bform.k > Q::one());
                for i in 0..inst.n() {
                    for j in 0..inst.m() {
                        let back = bform.scaled.d(i, j) * &bform.a;
                        prop_assert_eq!(&back, inst.d(i, j));
                        let v = bform.scaled.d(i, j);
                        prop_assert!(v == &Q::one() || v == &bform.k);
                    }
                }
            }
            Err(_) => {} // not two-valued
        }
    }

    #[test]
    fn generator_is_pure(n in 1usize..4, m in 1usize..6, seed in 0u64..500) {
        let a = random_instance(n, m, &ValueModel::Uniform, seed);
        let b = random_instance(n, m, &ValueModel::Uniform, seed);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn earning_views_are_consistent(pays in proptest::collection::vec(small_q(), 0..6), k in 0usize..3) {
        let m = pays.len();
        let p = PaymentVector::new(pays.clone()).unwrap_or_else(|_| PaymentVector::new(vec![qi(1)]).unwrap());
        if p.len() != m { return Ok(()); }
        let bundle: Vec<usize> = (0..m).collect();
        let views = earning_views(&bundle, &p, k);
        let total: Q = pays.iter().cloned().sum();
        prop_assert_eq!(&views.total, &total);
        // dropping more never increases the remainder, and all views are
        // bounded by the total
        prop_assert!(views.drop_top_k <= total);
        prop_assert!(views.drop_bottom <= total);
        if m > 0 {
            let more = earning_views(&bundle, &p, k + 1);
            prop_assert!(more.drop_top_k <= views.drop_top_k);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// cycle cancellation preserves both earning marginals exactly, never
    /// grows support, and ends acyclic
    #[test]
    fn make_acyclic_conservation(seed in 0u64..600) {
        let n = 2 + (seed % 2) as usize;
        let m = n + (seed % 3) as usize;
        let inst = random_instance(n, m, &ValueModel::Uniform, seed);
        let er = ErInstance::uniform(inst, qi(1)).unwrap();
        let Ok(eq) = chores::enumerate::find_er_equilibrium_enum(&er, 4) else {
            return Ok(());
        };
        let out = make_acyclic(&eq, &er).unwrap();
        for i in 0..n {
            prop_assert_eq!(out.agent_earning(i), eq.agent_earning(i));
            for j in 0..m {
                if out.q(i, j).is_positive() {
                    prop_assert!(eq.q(i, j).is_positive());
                }
            }
        }
        for j in 0..m {
            prop_assert_eq!(out.chore_earning(j), eq.chore_earning(j));
        }
        prop_assert!(PaymentGraph::of(&out).find_cycle().is_none());
    }

    /// every algorithm's achieved factor is consistent with the exhaustive
    /// oracle on tiny instances: never below the optimum
    #[test]
    fn outputs_never_beat_the_oracle(seed in 0u64..400) {
        let n = 2;
        let m = 2 + (seed % 3) as usize;
        let inst = random_instance(n, m, &ValueModel::Uniform, 31_000 + seed);
        let order: Vec<usize> = (0..n).collect();
        let alloc = chores::efx::efx_small(&inst, &order).unwrap();
        let ours = chores::efx::efx_factor(&inst, &alloc).unwrap();
        let (best, _) = minimal_alpha_oracle(&inst, OracleCriterion::Efx, 1 << 20).unwrap();
        prop_assert!(ours >= best, "output factor beats the exhaustive optimum");
        prop_assert_eq!(ours, Q::one());
    }

    /// equilibrium payments and earnings scale together with (e, c)
    #[test]
    fn equilibrium_scaling(seed in 0u64..200) {
        let inst = random_instance(2, 3, &ValueModel::Uniform, 33_000 + seed);
        let er = ErInstance::uniform(inst.clone(), qi(1)).unwrap();
        let eq = chores::enumerate::find_er_equilibrium_enum(&er, 4).unwrap();
        let er2 = ErInstance::new(inst, vec![qi(2); 2], vec![qi(2); 3]).unwrap();
        // the doubled instance accepts the doubled equilibrium
        let p2 = PaymentVector::new(eq.p.iter().map(|v| v * &qi(2)).collect()).unwrap();
        let q2: Vec<Vec<Q>> = (0..2)
            .map(|i| (0..3).map(|j| eq.q(i, j) * &qi(2)).collect())
            .collect();
        let doubled = ErEquilibrium::from_earnings(&er2, p2, q2);
        prop_assert!(doubled.is_ok());
    }
}

/// the named edge cases of the spec examples that don't fit proptest shapes
#[test]
fn empty_and_singleton_views() {
    let p = PaymentVector::new(vec![qi(2)]).unwrap();
    let empty = earning_views(&[], &p, 1);
    assert!(empty.total.is_zero());
    assert!(empty.drop_top_k.is_zero());
    assert!(empty.drop_bottom.is_zero());
}
