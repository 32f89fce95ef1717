//! Pretrains the world model on rule-based-agent dialogues and reports how
//! well it predicts the user's reply, the reward and termination on
//! held-out dialogues.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ddq::nn::OptimizerKind;
use ddq::policy::{Experience, Origin};
use ddq::trainer::{run_rule_dialogue, Domain, TrainerConfig};
use ddq::world_model::{pretrain, WorldModel, WorldModelOptimizer};

fn corpus(domain: &Domain, dialogues: usize, rng: &mut ChaCha8Rng) -> ddq::Result<Vec<Experience>> {
    let mut out = Vec::new();
    for _ in 0..dialogues {
        out.extend(run_rule_dialogue(domain, rng)?.experiences(Origin::Real));
    }
    Ok(out)
}

fn main() -> ddq::Result<()> {
    let config = TrainerConfig::default();
    let domain = Domain::build(&config.domain, config.max_turns)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let train = corpus(&domain, 100, &mut rng)?;
    let held_out = corpus(&domain, 50, &mut rng)?;
    let mut model = WorldModel::new(
        domain.state_dim(),
        domain.agent_actions.len(),
        domain.user_actions.len(),
        config.hidden,
        &mut rng,
    );
    let mut opt = WorldModelOptimizer::new(OptimizerKind::RmsProp);
    println!("{} training and {} held-out transitions", train.len(), held_out.len());
    for round in 0..5 {
        let l = model.losses(&held_out.iter().collect::<Vec<_>>());
        println!(
            "after {:>2} epochs: user-action accuracy {:.3}, reward MSE {:>8.3}, losses {:.3}/{:.3}/{:.3}",
            round * 10,
            model.accuracy(&held_out),
            model.reward_mse(&held_out),
            l.user_action,
            l.reward,
            l.termination
        );
        pretrain(&mut model, &mut opt, &train, 10, config.batch_size, config.pretrain.learning_rate, &mut rng)?;
    }
    Ok(())
}
