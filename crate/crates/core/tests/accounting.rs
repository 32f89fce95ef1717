mod common;

use common::reward_accounting;

#[test]
fn every_return_is_the_terminal_reward_minus_the_turn_count() {
    let (successes, failures, violations) = reward_accounting(1000, 42);
    assert_eq!(violations, Vec::<String>::new());
    assert_eq!(successes + failures, 1000);
    assert!(successes > 0 && failures > 0, "both outcomes must occur: {successes}/{failures}");
}
