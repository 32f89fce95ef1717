//! One dialogue between the rule-based agent and the agenda-based user
//! simulator, with the tracked state encoding after each turn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ddq::trainer::{run_rule_dialogue, Domain, TrainerConfig};

fn main() -> ddq::Result<()> {
    let config = TrainerConfig::default();
    let domain = Domain::build(&config.domain, config.max_turns)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trace = run_rule_dialogue(&domain, &mut rng)?;

    println!("goal constraints: {:?}", trace.goal.constraints);
    println!("goal requests:    {:?}", trace.goal.requests);
    println!("user:  {}", trace.opening);
    for t in &trace.turns {
        let active = t.next_state.iter().filter(|x| **x > 0.0).count();
        println!("agent: {}", t.agent_act);
        println!("user:  {}   (reward {:+}, {active}/{} features set)", t.user_act, t.reward, t.next_state.len());
    }
    println!(
        "{} after {} turns, return {}",
        if trace.success { "success" } else { "failure" },
        trace.len(),
        trace.total_reward()
    );
    Ok(())
}
