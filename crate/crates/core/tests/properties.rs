use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;

use ddq::nn::{softmax_in_place, Activation, Checkpoint, LayerSpec, Mlp};
use ddq::policy::{argmax, select_action, td_targets, Experience, Origin, QNetwork, ReplayBuffer};
use ddq::trainer::{run_dialogue, Domain, TrainerConfig};

fn domain() -> &'static Domain {
    static DOMAIN: OnceLock<Domain> = OnceLock::new();
    DOMAIN.get_or_init(|| {
        let c = TrainerConfig::default();
        Domain::build(&c.domain, c.max_turns).unwrap()
    })
}

fn tagged(tag: usize) -> Experience {
    Experience {
        state: vec![0.0],
        action: 0,
        reward: tag as f64,
        user_action: 0,
        next_state: vec![0.0],
        terminal: false,
        origin: Origin::Real,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_dialogues_stay_well_formed(seed in any::<u64>()) {
        let d = domain();
        let n = d.agent_actions.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trace = run_dialogue(d, &mut rng, |_, _, r| r.gen_range(0..n)).unwrap();
        prop_assert!(!trace.is_empty() && trace.len() <= d.max_turns() as usize);
        for t in &trace.turns {
            for s in [&t.state, &t.next_state] {
                prop_assert_eq!(s.len(), d.state_dim());
                prop_assert!(s.iter().all(|x| (0.0..=1.0).contains(x)));
            }
            prop_assert!(t.agent_act.validate().is_ok(), "{}", t.agent_act);
            prop_assert!(t.user_act.validate().is_ok(), "{}", t.user_act);
            prop_assert_eq!(d.user_actions.template_of(&t.user_act), Some(t.user_action));
        }
    }

    #[test]
    fn replay_buffer_keeps_the_newest_items_in_order(capacity in 1usize..40, pushes in 0usize..120) {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            buf.push(tagged(i));
        }
        prop_assert_eq!(buf.len(), pushes.min(capacity));
        let tags: Vec<usize> = buf.iter().map(|e| e.reward as usize).collect();
        let expected: Vec<usize> = (pushes.saturating_sub(capacity)..pushes).collect();
        prop_assert_eq!(tags, expected);
    }

    #[test]
    fn replay_samples_come_from_the_buffer(seed in any::<u64>(), len in 1usize..30, batch in 1usize..40) {
        let mut buf = ReplayBuffer::new(64);
        for i in 0..len {
            buf.push(tagged(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match buf.sample(batch, &mut rng) {
            None => prop_assert!(batch > len),
            Some(b) => {
                prop_assert_eq!(b.len(), batch);
                prop_assert!(b.iter().all(|e| (e.reward as usize) < len));
            }
        }
    }

    #[test]
    fn argmax_is_the_first_maximum(values in prop::collection::vec(-5i32..5, 1..20)) {
        let v: Vec<f64> = values.iter().map(|x| *x as f64).collect();
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(argmax(&v), v.iter().position(|x| *x == max).unwrap());
    }

    #[test]
    fn softmax_is_a_shift_invariant_distribution(z in prop::collection::vec(-30.0f64..30.0, 1..12), shift in -100.0f64..100.0) {
        let mut p = z.clone();
        softmax_in_place(&mut p);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| *x > 0.0));
        prop_assert_eq!(argmax(&p), argmax(&z));
        let mut q: Vec<f64> = z.iter().map(|x| x + shift).collect();
        softmax_in_place(&mut q);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn checkpoints_round_trip_exactly(seed in any::<u64>(), dims in prop::collection::vec(1usize..9, 2..5)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs: Vec<LayerSpec> = dims.windows(2).map(|w| LayerSpec::new(w[0], w[1], Activation::Tanh)).collect();
        let net = Mlp::new(&specs, &mut rng);
        let mut ckpt = Checkpoint::new();
        ckpt.insert("net", &net);
        let back = Checkpoint::from_json(&ckpt.to_json()).unwrap();
        let restored = back.get("net", &specs).unwrap();
        prop_assert_eq!(restored.flat_params(), net.flat_params());
        let mut wrong = specs.clone();
        wrong[0].output_dim += 1;
        prop_assert!(back.get("net", &wrong).is_err());
    }

    #[test]
    fn greedy_selection_ignores_the_rng(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = QNetwork::new(5, 4, 6, &mut rng);
        let s: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..1.0)).collect();
        prop_assert_eq!(select_action(&q, &s, 0.0, &mut rng), q.greedy(&s));
    }

    #[test]
    fn td_targets_bootstrap_only_non_terminal_transitions(seed in any::<u64>(), gamma in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target = QNetwork::new(3, 4, 5, &mut rng);
        let batch: Vec<Experience> = (0..8)
            .map(|i| Experience {
                state: vec![0.0; 3],
                action: 0,
                reward: rng.gen_range(-40.0..80.0),
                user_action: 0,
                next_state: (0..3).map(|_| rng.gen_range(0.0..1.0)).collect(),
                terminal: i % 2 == 0,
                origin: Origin::Real,
            })
            .collect();
        let refs: Vec<&Experience> = batch.iter().collect();
        for (e, y) in batch.iter().zip(td_targets(&target, &refs, gamma)) {
            let q = target.q_values(&e.next_state);
            let expected = if e.terminal { e.reward } else { e.reward + gamma * q[argmax(&q)] };
            prop_assert!((y - expected).abs() < 1e-12);
        }
    }
}
