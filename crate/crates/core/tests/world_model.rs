mod common;

use common::rule_learnability;

#[test]
fn world_model_learns_a_deterministic_rule() {
    for seed in 0..3 {
        let (acc, mse) = rule_learnability(seed, 50);
        assert!(acc > 0.8, "seed {seed}: accuracy {acc}");
        assert!(mse < 1.0, "seed {seed}: reward mse {mse}");
    }
}

#[test]
fn untrained_world_model_does_not_know_the_rule() {
    let (acc, _) = rule_learnability(0, 0);
    assert!(acc < 0.5, "accuracy {acc}");
}
