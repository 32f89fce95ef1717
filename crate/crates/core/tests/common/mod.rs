#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddq::policy::{td_loss_and_gradient, Experience, Origin, QNetwork};
use ddq::world_model::{TaskWeights, WorldModel};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// Central finite differences of `loss` around `params`.
pub fn numeric_gradient(params: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + FD_STEP;
            let plus = loss(&p);
            p[i] = orig - FD_STEP;
            let minus = loss(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * FD_STEP)
        })
        .collect()
}

/// `‖a − n‖ / max(‖a‖, ‖n‖)`, or 0 when both vanish.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()).max(norm(&mut numeric.iter().copied()));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn random_batch(rng: &mut ChaCha8Rng, dim: usize, n_actions: usize, n_user: usize, size: usize) -> Vec<Experience> {
    (0..size)
        .map(|_| Experience {
            state: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            action: rng.gen_range(0..n_actions),
            reward: rng.gen_range(-45.0..80.0),
            user_action: rng.gen_range(0..n_user),
            next_state: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            terminal: rng.gen_bool(0.3),
            origin: Origin::Real,
        })
        .collect()
}

/// Relative gradient error of the TD loss on a random network and batch.
pub fn td_gradient_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(2..10);
    let hidden = rng.gen_range(2..10);
    let n_actions = rng.gen_range(2..7);
    let qnet = QNetwork::new(dim, hidden, n_actions, &mut rng);
    let target = QNetwork::new(dim, hidden, n_actions, &mut rng);
    let gamma = rng.gen_range(0.0..1.0);
    let size = rng.gen_range(1..17);
    let batch = random_batch(&mut rng, dim, n_actions, 2, size);
    let refs: Vec<&Experience> = batch.iter().collect();
    let (_, grads) = td_loss_and_gradient(&qnet, &target, &refs, gamma);
    let numeric = numeric_gradient(&qnet.mlp().flat_params(), |p| {
        let mut q = qnet.clone();
        q.mlp_mut().set_flat_params(p);
        td_loss_and_gradient(&q, &target, &refs, gamma).0
    });
    assert!(numeric.iter().any(|g| g.abs() > 1e-6), "seed {seed}: degenerate case");
    relative_error(&grads.flatten(), &numeric)
}

/// Relative gradient error of the unit-weighted world-model loss.
pub fn wm_gradient_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.gen_range(2..8);
    let n_actions = rng.gen_range(2..5);
    let n_user = rng.gen_range(2..6);
    let hidden = rng.gen_range(2..7);
    let model = WorldModel::new(dim, n_actions, n_user, hidden, &mut rng);
    let size = rng.gen_range(1..17);
    let batch = random_batch(&mut rng, dim, n_actions, n_user, size);
    let refs: Vec<&Experience> = batch.iter().collect();
    let (_, grads) = model.loss_and_gradient(&refs, TaskWeights::UNIT);
    let numeric = numeric_gradient(&model.flat_params(), |p| {
        let mut m = model.clone();
        m.set_flat_params(p);
        m.losses(&refs).total()
    });
    assert!(numeric.iter().any(|g| g.abs() > 1e-6), "seed {seed}: degenerate case");
    relative_error(&grads.flatten(), &numeric)
}

/// Held-out user-action accuracy and reward MSE after pretraining a
/// production-sized world model on a 1000-tuple rule corpus.
pub fn rule_learnability(seed: u64, epochs: usize) -> (f64, f64) {
    use ddq::nn::OptimizerKind;
    use ddq::trainer::{Domain, TrainerConfig};
    use ddq::world_model::{pretrain, rule_corpus, WorldModelOptimizer};

    let config = TrainerConfig::default();
    let domain = Domain::build(&config.domain, config.max_turns).unwrap();
    let (dim, n_agent, n_user) = (domain.state_dim(), domain.agent_actions.len(), domain.user_actions.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = rule_corpus(1000, dim, n_agent, n_user, &mut rng);
    let held_out = rule_corpus(500, dim, n_agent, n_user, &mut rng);
    let mut model = WorldModel::new(dim, n_agent, n_user, config.hidden, &mut rng);
    let mut opt = WorldModelOptimizer::new(OptimizerKind::RmsProp);
    pretrain(&mut model, &mut opt, &train, epochs, config.batch_size, config.pretrain.learning_rate, &mut rng).unwrap();
    (model.accuracy(&held_out), model.reward_mse(&held_out))
}

/// Runs `epochs` epochs of one variant, checking after every epoch which
/// parameters changed and which buffers were read. Returns every violation.
pub fn audit_run(variant: ddq::trainer::Variant, k: usize, epochs: usize, seed: u64) -> Vec<String> {
    use ddq::trainer::{Trainer, TrainerConfig, Variant};

    let mut config = TrainerConfig::for_variant(variant, k);
    config.seed = seed;
    config.epochs = epochs;
    config.eval_dialogues = 20;
    let mut trainer = Trainer::new(config).unwrap();
    let mut violations = Vec::new();
    let initial_wm = trainer.world_model().fingerprint();
    let mut wm_changed = false;
    for _ in 0..epochs {
        let wm_before = trainer.world_model().fingerprint();
        let sim_reads = trainer.simulated_buffer().samples_drawn();
        let audit = trainer.audit().clone();
        trainer.run_epoch().unwrap();
        let epoch = trainer.epoch();
        let wm_after = trainer.world_model().fingerprint();
        wm_changed |= wm_after != wm_before;
        let now = trainer.audit();
        if !variant.learns_world_model() && wm_after != wm_before {
            violations.push(format!("epoch {epoch}: world model mutated"));
        }
        if !variant.plans() {
            if trainer.simulated_buffer().samples_drawn() != sim_reads {
                violations.push(format!("epoch {epoch}: simulated buffer read"));
            }
            if !trainer.simulated_buffer().is_empty() || now.planning_updates != 0 {
                violations.push(format!("epoch {epoch}: planning happened"));
            }
        }
        if now.origin_violations != 0 {
            violations.push(format!("epoch {epoch}: {} mixed minibatches", now.origin_violations));
        }
        if trainer.real_buffer().iter().any(|e| e.origin != Origin::Real) {
            violations.push(format!("epoch {epoch}: simulated experience in the real buffer"));
        }
        if trainer.simulated_buffer().iter().any(|e| e.origin != Origin::Simulated) {
            violations.push(format!("epoch {epoch}: real experience in the simulated buffer"));
        }
        let real_dialogues = if variant == Variant::DqnK { 1 + k } else { 1 } as u64;
        if now.direct_updates - audit.direct_updates != real_dialogues {
            violations.push(format!("epoch {epoch}: wrong number of direct updates"));
        }
    }
    if variant.learns_world_model() && !wm_changed {
        violations.push("world model never learned".into());
    }
    if !variant.learns_world_model() && trainer.world_model().fingerprint() != initial_wm {
        violations.push("world model differs from its initial value".into());
    }
    violations
}

/// Plays `n` seeded dialogues, cycling random, rule-based and ε-greedy
/// untrained-Q agents, and checks every return against `80 − T` / `−40 − T`.
/// Returns (successes, failures, violations).
pub fn reward_accounting(n: usize, seed: u64) -> (usize, usize, Vec<String>) {
    use ddq::policy::select_action;
    use ddq::trainer::{run_dialogue, run_exploring_rule_dialogue, Domain, TrainerConfig};

    let config = TrainerConfig::default();
    let domain = Domain::build(&config.domain, config.max_turns).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qnet = QNetwork::new(domain.state_dim(), 16, domain.agent_actions.len(), &mut rng);
    let n_actions = domain.agent_actions.len();
    let (mut successes, mut failures, mut violations) = (0, 0, Vec::new());
    for i in 0..n {
        let trace = match i % 4 {
            0 => run_dialogue(&domain, &mut rng, |_, _, r| r.gen_range(0..n_actions)),
            1 => run_exploring_rule_dialogue(&domain, 0.0, &mut rng),
            2 => run_exploring_rule_dialogue(&domain, 0.3, &mut rng),
            _ => run_dialogue(&domain, &mut rng, |_, s, r| select_action(&qnet, s, 0.2, r)),
        }
        .unwrap();
        let t = trace.len() as f64;
        let expected = if trace.success { 80.0 - t } else { -40.0 - t };
        if trace.total_reward() != expected {
            violations.push(format!("dialogue {i}: return {} with T = {t}, success {}", trace.total_reward(), trace.success));
        }
        if trace.len() > config.max_turns as usize {
            violations.push(format!("dialogue {i}: {t} turns exceeds the limit"));
        }
        let last = trace.len() - 1;
        if trace.turns.iter().enumerate().any(|(j, turn)| turn.terminal != (j == last)) {
            violations.push(format!("dialogue {i}: terminal flag not on the last turn only"));
        }
        if trace.success {
            successes += 1;
        } else {
            failures += 1;
        }
    }
    (successes, failures, violations)
}

/// A short plan covering every variant, for runner and plotting tests.
pub fn small_plan(epochs: usize, seeds: Vec<u64>) -> ddq::experiment::ExperimentPlan {
    use ddq::experiment::{ExperimentPlan, RunSpec};
    use ddq::trainer::{TrainerConfig, Variant};

    let mut base = TrainerConfig::default();
    base.epochs = epochs;
    base.eval_dialogues = 40;
    base.rbs_dialogues = 30;
    base.pretrain.dialogues = 30;
    base.pretrain.epochs = 5;
    let runs = vec![
        RunSpec::new(Variant::Dqn, 0),
        RunSpec::new(Variant::Ddq, 3),
        RunSpec::new(Variant::Ddq, 6),
        RunSpec::new(Variant::DdqRandInit, 3),
        RunSpec::new(Variant::DdqFixedWm, 3),
        RunSpec::new(Variant::DqnK, 3),
    ];
    ExperimentPlan::new(base, runs, seeds)
}

/// File names in `a` and `b` whose contents differ or exist on one side only.
pub fn differing_files(a: &std::path::Path, b: &std::path::Path) -> Vec<String> {
    use std::collections::BTreeSet;
    use std::fs;

    let names = |d: &std::path::Path| -> BTreeSet<String> {
        fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect()
    };
    let (na, nb) = (names(a), names(b));
    na.union(&nb)
        .filter(|n| !(na.contains(*n) && nb.contains(*n)) || fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).unwrap())
        .cloned()
        .collect()
}
