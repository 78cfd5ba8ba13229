mod common;

use bilevel_core::setreal::{minimal_members, ExtendedRealSet, SetOrder};
use bilevel_core::RealSet;
use common::{oracle_leq_l, oracle_leq_u, random_set};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sets(seed: u64, n: usize) -> Vec<RealSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_set(&mut rng)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn both_orders_are_preorders(seed in any::<u64>()) {
        let s = sets(seed, 3);
        let (a, b, c) = (&s[0], &s[1], &s[2]);
        for order in [SetOrder::Lower, SetOrder::Upper] {
            prop_assert!(a.leq(a, order));
            if a.leq(b, order) && b.leq(c, order) {
                prop_assert!(a.leq(c, order));
            }
        }
    }

    #[test]
    fn orders_match_cone_inclusion(seed in any::<u64>()) {
        let s = sets(seed, 2);
        prop_assert_eq!(s[0].leq_l(&s[1]), oracle_leq_l(&s[0], &s[1]));
        prop_assert_eq!(s[0].leq_u(&s[1]), oracle_leq_u(&s[0], &s[1]));
    }

    #[test]
    fn negation_swaps_the_orders(seed in any::<u64>()) {
        let s = sets(seed, 2);
        prop_assert_eq!(s[0].leq_l(&s[1]), s[1].negate().leq_u(&s[0].negate()));
        prop_assert_eq!(s[0].leq_u(&s[1]), s[1].negate().leq_l(&s[0].negate()));
    }

    #[test]
    fn extrema_are_monotone(seed in any::<u64>()) {
        let s = sets(seed, 2);
        if s[0].leq_l(&s[1]) {
            prop_assert!(s[0].inf_of().value <= s[1].inf_of().value);
        }
        if s[0].leq_u(&s[1]) {
            prop_assert!(s[0].sup_of().value <= s[1].sup_of().value);
        }
    }

    #[test]
    fn canonical_form_is_idempotent_and_order_free(seed in any::<u64>()) {
        let s = sets(seed, 2);
        let mut raw: Vec<_> = s[0].intervals().iter().chain(s[1].intervals()).cloned().collect();
        let once = ExtendedRealSet::canonicalize(raw.clone()).unwrap();
        prop_assert_eq!(&ExtendedRealSet::canonicalize(once.intervals().to_vec()).unwrap(), &once);
        raw.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        prop_assert_eq!(&ExtendedRealSet::canonicalize(raw).unwrap(), &once);
        prop_assert_eq!(&once, &s[0].union(&s[1]));
    }

    #[test]
    fn text_form_round_trips(seed in any::<u64>()) {
        let s = sets(seed, 1);
        let back: RealSet = s[0].to_string().parse().unwrap();
        prop_assert_eq!(back, s[0].clone());
    }

    #[test]
    fn minimal_members_are_undominated(seed in any::<u64>(), n in 1usize..8) {
        let fam = sets(seed, n);
        for order in [SetOrder::Lower, SetOrder::Upper] {
            let min = minimal_members(&fam, order);
            prop_assert!(!min.is_empty());
            for i in 0..n {
                let strictly_beaten = (0..n).any(|j| fam[j].leq(&fam[i], order) && !fam[i].leq(&fam[j], order));
                prop_assert_eq!(min.contains(&i), !strictly_beaten);
            }
        }
    }
}
