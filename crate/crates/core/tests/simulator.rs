use dynamix_core::mixture::sample_from_arm;
use dynamix_core::reward::contract;
use dynamix_core::rng::{mix64, stream, Stream};
use dynamix_core::sim::{TULU_SCIENCE_BUNDLE, TULU_V2_COUNTS};
use dynamix_core::{
    lookahead_round, make_tulu_registry, make_tulu_registry_merged, BanditConfig, Draw, Learner,
    LrSchedule, QState, RewardKind, SimParams, SimWorld,
};
use proptest::prelude::*;

fn world(k: usize, seed: u64) -> SimWorld {
    SimWorld::new(
        &SimParams::default(),
        k,
        LrSchedule::new(0.5, 0.03, 1000).unwrap(),
        seed,
    )
    .unwrap()
}

fn probe(k: usize) -> Vec<Draw> {
    (0..4 * k as u64)
        .map(|i| Draw {
            arm: (i % k as u64) as usize,
            example: mix64(i) % 1000,
        })
        .collect()
}

fn batch_from(h: u64, k: usize, len: usize) -> Vec<Draw> {
    (0..len as u64)
        .map(|i| {
            let x = mix64(h ^ i);
            Draw {
                arm: (x % k as u64) as usize,
                example: x >> 40,
            }
        })
        .collect()
}

#[test]
fn contract_suite() {
    let mut w = world(16, 1);
    let p = probe(16);
    contract::round_trip_identity(&mut w, &p).unwrap();
    contract::loss_purity(&w, &p).unwrap();
    contract::mutate_restore(&mut w, &p, |w| w.train_step(&batch_from(3, 16, 64), 0.4)).unwrap();
    contract::mutate_restore(&mut w, &p, |w| w.virtual_step(&batch_from(4, 16, 64), 0.4)).unwrap();
}

#[test]
fn thousand_mutate_restore_cycles() {
    let mut w = world(8, 42);
    w.train_step(&batch_from(0, 8, 32), 0.1).unwrap();
    let initial = w.state();
    let p = probe(8);
    let before = w.loss(&p);
    for cycle in 0..1000u64 {
        let h = mix64(cycle);
        let outer = w.snapshot();
        w.train_step(&batch_from(h, 8, 1 + (h % 40) as usize), 0.5)
            .unwrap();
        if h % 3 == 0 {
            let inner = w.snapshot();
            w.virtual_step(&batch_from(h >> 7, 8, 16), 0.9).unwrap();
            w.restore(inner).unwrap();
        }
        w.restore(outer).unwrap();
    }
    assert_eq!(w.state(), initial);
    let after = w.loss(&p);
    assert!(before
        .iter()
        .zip(&after)
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn lookahead_leaves_permanent_state_unchanged() {
    let registry = make_tulu_registry();
    let mut w = world(16, 8);
    let p = probe(16);
    let before = w.loss(&p);
    let state = w.state();
    let cfg = BanditConfig::with_defaults(16, 100);
    let mut q = QState::new(16);
    let reports = lookahead_round(
        &mut w,
        &registry,
        &mut q,
        &cfg,
        RewardKind::DeltaLoss,
        0.3,
        50,
        &mut stream(8, Stream::RewardBatches),
    )
    .unwrap();
    assert_eq!(reports.len(), 16);
    assert!(reports.iter().all(|r| r.reward > 0.0));
    for (a, b) in before.iter().zip(w.loss(&p)) {
        assert!((a - b).abs() <= 1e-12);
    }
    assert_eq!(w.state(), state);
}

#[test]
fn identity_transfer_single_arm_closed_form() {
    let params = SimParams {
        initial_loss: Some(vec![3.0, 2.0, 4.0]),
        floor: Some(vec![1.0, 0.5, 1.0]),
        transfer: Some(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]),
        noise_scale: 0.0,
        ..Default::default()
    };
    let mut w = SimWorld::new(&params, 3, LrSchedule::new(0.5, 0.0, 10).unwrap(), 0).unwrap();
    let lr = 0.25;
    let b = 4.0;
    w.train_step(
        &[
            Draw { arm: 2, example: 0 },
            Draw { arm: 2, example: 1 },
            Draw { arm: 2, example: 2 },
            Draw { arm: 2, example: 3 },
        ],
        lr,
    )
    .unwrap();
    let mut expected = 4.0;
    for _ in 0..4 {
        expected -= lr * (expected - 1.0) / b;
    }
    assert_eq!(w.losses()[0], 3.0);
    assert_eq!(w.losses()[1], 2.0);
    assert!((w.losses()[2] - expected).abs() <= 1e-15);
}

#[test]
fn training_on_an_arm_lowers_its_losses() {
    let w = world(6, 17);
    for j in 0..6 {
        let batch: Vec<Draw> = (0..32).map(|i| Draw { arm: j, example: i }).collect();
        let before = w.loss(&batch);
        let mut v = w.clone();
        v.virtual_step(&batch, 0.5).unwrap();
        let after = v.loss(&batch);
        assert!(before.iter().zip(&after).all(|(a, b)| b < a), "arm {j}");
    }
}

#[test]
fn tulu_registry_counts() {
    let r = make_tulu_registry();
    assert_eq!(r.len(), 16);
    let share_gpt = r.index_of("ShareGPT").unwrap();
    assert_eq!(r.arm(share_gpt).instance_count, 114_000);
    assert_eq!(r.arm(r.index_of("FLAN").unwrap()).instance_count, 50_000);
    assert_eq!(r.arm(r.index_of("LIMA").unwrap()).instance_count, 1_000);
    assert_eq!(r.arm(r.index_of("Hardcoded").unwrap()).instance_count, 140);
    let total: u64 = r.instance_counts().iter().sum();
    assert_eq!(
        total,
        TULU_V2_COUNTS.iter().map(|(_, c)| c).sum::<u64>() + TULU_SCIENCE_BUNDLE.0
    );
    assert_eq!(total, 329_140);
    assert_eq!(r.prior()[share_gpt], 114_000.0 / total as f64);

    let merged = make_tulu_registry_merged();
    assert_eq!(merged.len(), 11);
    assert_eq!(merged.total_instances(), total);
}

#[test]
fn world_state_round_trips() {
    let mut w = world(5, 77);
    w.train_step(&batch_from(1, 5, 20), 0.3).unwrap();
    let json = serde_json::to_string(&w.state()).unwrap();
    let mut back = SimWorld::from_state(serde_json::from_str(&json).unwrap()).unwrap();
    let p = probe(5);
    assert_eq!(w.loss(&p), back.loss(&p));
    let b = batch_from(2, 5, 20);
    w.train_step(&b, 0.3).unwrap();
    back.train_step(&b, 0.3).unwrap();
    assert_eq!(w.state(), back.state());
}

#[test]
fn reward_batches_come_from_their_arm() {
    let registry = make_tulu_registry();
    let mut rng = stream(3, Stream::RewardBatches);
    for arm in 0..registry.len() {
        for d in sample_from_arm(&registry, arm, 64, &mut rng) {
            assert_eq!(d.arm, arm);
            assert!(d.example < registry.arm(arm).instance_count);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_never_cross_floor(seed in any::<u64>(), steps in 1usize..60, lr in 0.0f64..2.0) {
        let mut w = world(4, seed);
        for s in 0..steps {
            w.train_step(&batch_from(seed ^ s as u64, 4, 16), lr).unwrap();
        }
        for (l, f) in w.losses().iter().zip(w.floors()) {
            prop_assert!(l >= f);
        }
        prop_assert!(w.loss(&probe(4)).iter().all(|l| *l >= 0.0));
    }

    #[test]
    fn virtual_step_never_increases_any_arm(seed in any::<u64>(), lr in 0.0f64..1.0) {
        let mut w = world(5, seed);
        let before = w.losses().to_vec();
        w.virtual_step(&batch_from(seed, 5, 32), lr).unwrap();
        for (a, b) in before.iter().zip(w.losses()) {
            prop_assert!(b <= a);
        }
    }
}
