//! Saves a trained agent and reloads it into a fresh trainer; both give the
//! same greedy evaluation.

use ddq::nn::Checkpoint;
use ddq::trainer::{Trainer, TrainerConfig, Variant};

fn main() -> ddq::Result<()> {
    let mut config = TrainerConfig::for_variant(Variant::Ddq, 5);
    config.epochs = 30;
    config.eval_dialogues = 100;
    let mut trained = Trainer::new(config.clone())?;
    trained.train(|_| Ok(()))?;

    let dir = std::env::temp_dir().join("ddq_checkpoint_example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("agent.json");
    trained.save_checkpoint(&path)?;
    let ckpt = Checkpoint::load(&path)?;
    println!("{} holds {:?}", path.display(), ckpt.names().collect::<Vec<_>>());

    config.seed = 1;
    let mut restored = Trainer::new(config)?;
    restored.load_checkpoint(&ckpt)?;
    assert_eq!(restored.qnet(), trained.qnet());
    let a = trained.evaluate(200)?;
    println!("trained:  success {:.3}, reward {:.2}", a.success_rate, a.avg_reward);
    let b = restored.evaluate(200)?;
    println!("restored: success {:.3}, reward {:.2} (different evaluation seed)", b.success_rate, b.avg_reward);
    Ok(())
}
