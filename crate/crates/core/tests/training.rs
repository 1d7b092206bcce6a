use pinet_core::controller::tiny_instance;
use pinet_core::envs::{initial_linear_models, sample_linear_teacher};
use pinet_core::models::{CONTROL_WEIGHT_ID, DYNAMICS_ID};
use pinet_core::training::{
    build_linear_dataset, evaluate_pinet, train_pinet, MpcSample, OpenLoopSample, OptimizerConfig, TrainConfig,
    TrainData,
};
use pinet_core::types::{ControlSequence, PiHyperParams};
use pinet_core::{PiError, SeededRng};

fn one_sample(rng: &SeededRng) -> (pinet_core::models::PiModels<f64>, PiHyperParams<f64>, Vec<OpenLoopSample<f64>>) {
    let (x0, models, hp) = tiny_instance::<f64>(rng).unwrap();
    let demo = ControlSequence::from_vec(3, 1, vec![0.4, -0.3, 0.2]).unwrap();
    (models, hp, vec![OpenLoopSample { x0, controls: demo }])
}

#[test]
fn one_epoch_on_one_sample_decreases_its_loss() {
    let rng = SeededRng::new(21);
    let (mut models, hp, train) = one_sample(&rng);
    let data = TrainData::OpenLoop { train: &train, test: &[] };
    let cfg = TrainConfig {
        epochs: 1,
        batch: 1,
        optimizer: OptimizerConfig { lr: 1e-4, ..Default::default() },
        ..Default::default()
    };
    let (before, _) = evaluate_pinet(&models, &hp, &data, &cfg, &rng).unwrap();
    let out = train_pinet(&mut models, &hp, &data, &cfg, &rng, None, 0).unwrap();
    let after = out.history[0].train.ctrl.unwrap();
    assert!(after < before.ctrl.unwrap(), "{after} vs {:?}", before.ctrl);
    assert_eq!(out.history[0].test.ctrl, None);
}

#[test]
fn frozen_segments_are_bit_identical() {
    let rng = SeededRng::new(22);
    let (mut models, hp, train) = one_sample(&rng);
    let before = models.pack();
    let data = TrainData::OpenLoop { train: &train, test: &[] };
    let cfg = TrainConfig {
        epochs: 2,
        batch: 1,
        freeze: [DYNAMICS_ID.to_string(), CONTROL_WEIGHT_ID.to_string()].into(),
        ..Default::default()
    };
    train_pinet(&mut models, &hp, &data, &cfg, &rng, None, 0).unwrap();
    let after = models.pack();
    for id in [DYNAMICS_ID, CONTROL_WEIGHT_ID] {
        let (a, b) = (before.segment(id).unwrap(), after.segment(id).unwrap());
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()), "{id} moved");
    }
    assert_ne!(before.values(), after.values());
}

#[test]
fn memory_budget_refusal_names_reduction() {
    let rng = SeededRng::new(23);
    let (mut models, hp, train) = one_sample(&rng);
    let data = TrainData::OpenLoop { train: &train, test: &[] };
    let cfg = TrainConfig { memory_budget_bytes: 100, ..Default::default() };
    let before = models.pack();
    match train_pinet(&mut models, &hp, &data, &cfg, &rng, None, 0) {
        Err(PiError::MemoryBudget(msg)) => assert!(msg.contains("factor"), "{msg}"),
        other => panic!("expected a memory-budget refusal, got {:?}", other.map(|o| o.history)),
    }
    assert_eq!(before.values(), models.pack().values());
}

#[test]
fn mismatched_regime_settings_are_rejected() {
    let rng = SeededRng::new(24);
    let (mut models, hp, train) = one_sample(&rng);
    let data = TrainData::OpenLoop { train: &train, test: &[] };
    let mut cfg = TrainConfig { freeze: ["nonexistent".to_string()].into(), ..Default::default() };
    assert!(matches!(train_pinet(&mut models, &hp, &data, &cfg, &rng, None, 0), Err(PiError::Parameter(_))));
    cfg.freeze.clear();
    cfg.weights.cost = 1e-3;
    assert!(matches!(train_pinet(&mut models, &hp, &data, &cfg, &rng, None, 0), Err(PiError::Parameter(_))));
    let empty: Vec<MpcSample<f64>> = Vec::new();
    let data = TrainData::Mpc { train: &empty, test: &[] };
    assert!(matches!(
        train_pinet(&mut models, &hp, &data, &TrainConfig::default(), &rng, None, 0),
        Err(PiError::Parameter(_))
    ));
}

#[test]
fn resume_matches_uninterrupted_run() {
    let rng = SeededRng::new(25);
    let teacher = sample_linear_teacher::<f64>(&rng.substream(0)).unwrap();
    let (train, test) = build_linear_dataset(&teacher, &rng.substream(1), 12, 3, 6).unwrap();
    let hp = PiHyperParams { lambda: 0.01, nu: 1500.0, sigma: 0.2, trajectories: 10, horizon: 6, iterations: 4 };
    let data = TrainData::OpenLoop { train: &train, test: &test };
    let init = initial_linear_models::<f64>(&rng.substream(2)).unwrap();
    let cfg = |epochs| TrainConfig { epochs, batch: 4, ..Default::default() };

    let mut full = init.clone();
    let whole = train_pinet(&mut full, &hp, &data, &cfg(3), &rng, None, 0).unwrap();

    let mut part = init.clone();
    let first = train_pinet(&mut part, &hp, &data, &cfg(2), &rng, None, 0).unwrap();
    let state: pinet_core::training::OptimizerState =
        serde_json::from_str(&serde_json::to_string(&first.optimizer).unwrap()).unwrap();
    let rest = train_pinet(&mut part, &hp, &data, &cfg(1), &rng, Some(state), 2).unwrap();

    assert_eq!(full.pack().values(), part.pack().values());
    assert_eq!(whole.history[2], rest.history[0]);
}

#[test]
fn evaluation_is_independent_of_sample_order_and_threads() {
    let rng = SeededRng::new(26);
    let teacher = sample_linear_teacher::<f64>(&rng.substream(0)).unwrap();
    let (train, _) = build_linear_dataset(&teacher, &rng.substream(1), 8, 0, 5).unwrap();
    let hp = PiHyperParams { lambda: 0.01, nu: 1500.0, sigma: 0.2, trajectories: 10, horizon: 5, iterations: 3 };
    let models = initial_linear_models::<f64>(&rng.substream(2)).unwrap();
    let cfg = TrainConfig::default();
    let eval = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            evaluate_pinet(&models, &hp, &TrainData::OpenLoop { train: &train, test: &[] }, &cfg, &rng).unwrap()
        })
    };
    let (a, _) = eval(1);
    let (b, _) = eval(3);
    assert_eq!(a.ctrl.unwrap().to_bits(), b.ctrl.unwrap().to_bits());
}
