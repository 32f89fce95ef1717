//! Drives the human-in-the-loop service in-process with the agenda-based
//! simulator standing in for people, then prints what each run learned.
//!
//! `cargo run --release -p ddq-hitl --example scripted_users -- 200`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ddq::experiment::RunSpec;
use ddq::trainer::{TrainerConfig, Variant};
use ddq_hitl::{HitlConfig, HitlService, TurnOutcome};

fn main() -> ddq_hitl::Result<()> {
    let sessions: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60);
    let runs = vec![RunSpec::new(Variant::Dqn, 0), RunSpec::new(Variant::Ddq, 5)];
    let service = HitlService::open(HitlConfig::new(TrainerConfig::default(), runs))?;
    let domain = service.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    for i in 0..sessions {
        let created = service.create_session()?;
        let id = created.session_id;
        let (mut user, mut act) = domain.simulator.start(&created.goal, &mut rng);
        let mut turn_id = 0;
        let record = loop {
            match service.post_user_turn(&id, turn_id, &act)? {
                TurnOutcome::AgentTurn { act: agent, .. } => {
                    let (reply, done) = domain.simulator.respond(&mut user, &agent, &domain.kb, &mut rng);
                    if done {
                        break service.post_feedback(&id, domain.simulator.judge(&user, &domain.kb))?;
                    }
                    act = reply;
                    turn_id += 1;
                }
                TurnOutcome::AwaitingFeedback { .. } => {
                    break service.post_feedback(&id, domain.simulator.judge(&user, &domain.kb))?;
                }
                TurnOutcome::Terminal { feedback } => break feedback,
            }
        };
        if i % 20 == 0 {
            println!("{id} run {} {}: {} turns, return {}", created.run, created.variant, record.turns, record.episode_return);
        }
    }
    service.flush();
    for s in service.run_status() {
        println!(
            "{:<8} epochs {:>4}  successes {:>4}/{:<4}  real buffer {:>5}  simulated buffer {:>5}",
            s.label, s.epoch, s.successes, s.sessions_committed, s.real_buffer, s.simulated_buffer
        );
    }
    Ok(())
}
