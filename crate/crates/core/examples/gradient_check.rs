//! Compares the analytic TD-loss gradient of a small Q-network with central
//! finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ddq::policy::{td_loss_and_gradient, Experience, Origin, QNetwork};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let qnet = QNetwork::new(6, 8, 4, &mut rng);
    let target = QNetwork::new(6, 8, 4, &mut rng);
    let batch: Vec<Experience> = (0..16)
        .map(|i| Experience {
            state: (0..6).map(|_| rng.gen_range(0.0..1.0)).collect(),
            action: rng.gen_range(0..4),
            reward: if i % 5 == 0 { 60.0 } else { -1.0 },
            user_action: 0,
            next_state: (0..6).map(|_| rng.gen_range(0.0..1.0)).collect(),
            terminal: i % 5 == 0,
            origin: Origin::Real,
        })
        .collect();
    let refs: Vec<&Experience> = batch.iter().collect();
    let (loss, grads) = td_loss_and_gradient(&qnet, &target, &refs, 0.95);
    let analytic = grads.flatten();
    let params = qnet.mlp().flat_params();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..params.len() {
        let eval = |delta: f64| {
            let mut p = params.clone();
            p[i] += delta;
            let mut q = qnet.clone();
            q.mlp_mut().set_flat_params(&p);
            td_loss_and_gradient(&q, &target, &refs, 0.95).0
        };
        let numeric = (eval(h) - eval(-h)) / (2.0 * h);
        worst = worst.max((numeric - analytic[i]).abs() / numeric.abs().max(analytic[i].abs()).max(1e-8));
    }
    println!("loss {loss:.4}, {} parameters, worst relative error {worst:.2e}", params.len());
}
