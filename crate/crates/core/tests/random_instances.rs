mod common;

use bilevel_core::Instance;
use common::{check_finite_case, random_finite_problem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn finite_instances_match_brute_force_and_keep_every_implication() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for id in 0..500 {
        let case = random_finite_problem(&mut rng, id);
        if let Err(e) = check_finite_case(&case) {
            panic!("{e}\n{}", case.text);
        }
    }
}

#[test]
fn generated_problems_parse_with_their_own_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for id in 0..50 {
        let case = random_finite_problem(&mut rng, id);
        let inst = Instance::load(&case.text).unwrap();
        assert_eq!(inst.leader_grid().len(), case.nx);
        assert_eq!(inst.follower_grid(&[case.nx as f64 - 1.0]).unwrap().len(), case.slack.map_or(case.ny, |k| case.ny.min(case.nx + k)));
    }
}
