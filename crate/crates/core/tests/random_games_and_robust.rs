mod common;

use common::{check_game, check_robust, random_game, random_robust};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn game_trees_match_brute_force_equilibria() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..200 {
        let text = random_game(&mut rng);
        if let Err(e) = check_game(&text) {
            panic!("{e}\n{text}");
        }
    }
}

#[test]
fn robust_counterparts_match_double_loop_and_reformulations() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for id in 0..200 {
        let text = random_robust(&mut rng, id);
        if let Err(e) = check_robust(&text) {
            panic!("{e}\n{text}");
        }
    }
}
