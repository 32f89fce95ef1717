//! Trains one DDQ(5) agent and prints the evaluation curve.
//!
//! `cargo run --release --example train_ddq -- 150` sets the number of epochs.

use ddq::trainer::{Trainer, TrainerConfig, Variant};

fn main() -> ddq::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let mut config = TrainerConfig::for_variant(Variant::Ddq, 5);
    config.epochs = epochs;
    config.eval_every = 10;
    config.eval_dialogues = 200;
    let mut trainer = Trainer::new(config)?;
    println!("rule-based agent: {:.3}", trainer.evaluate_rule_agent(200)?.success_rate);
    trainer.train(|m| {
        if let Some(e) = m.eval {
            println!(
                "epoch {:>4}  K {:>2}  success {:.3}  reward {:>7.2}  turns {:>5.2}",
                m.epoch, m.k, e.success_rate, e.avg_reward, e.avg_turns
            );
        }
        Ok(())
    })?;
    let audit = trainer.audit();
    println!(
        "{} direct, {} planning and {} world-model updates",
        audit.direct_updates, audit.planning_updates, audit.world_model_updates
    );
    Ok(())
}
