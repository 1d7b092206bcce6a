use pinet_core::controller::{gradcheck, pi_net_backward, pi_net_forward, tiny_instance};
use pinet_core::linalg::Mat;
use pinet_core::models::{
    ControlCostWeight, FreezeSet, LinearDynamics, PiModels, QuadraticCost, TerminalCost, CONTROL_WEIGHT_ID, DYNAMICS_ID,
};
use pinet_core::types::{ControlSequence, PiHyperParams};
use pinet_core::SeededRng;

#[test]
fn neural_models_match_finite_differences() {
    for seed in 0..5 {
        let rng = SeededRng::new(seed);
        let (x0, models, hp) = tiny_instance::<f64>(&rng).unwrap();
        let report = gradcheck(&x0, &models, &hp, &rng.substream(9), &FreezeSet::new(), 1e-6, 1e-4, 1e-7).unwrap();
        assert!(report.passed, "seed {seed}: {report:#?}");
    }
}

#[test]
fn linear_models_match_finite_differences() {
    let rng = SeededRng::new(77);
    let mut g = rng.generator();
    let mut rand_mat = |r, c, s: f64| Mat::from_fn(r, c, |_, _| pinet_core::rng::normal(&mut g, 0.0, s));
    let f = Mat::identity(3).add(&rand_mat(3, 3, 0.1));
    let gm = rand_mat(3, 2, 0.5);
    let q = Mat::identity(3).add(&rand_mat(3, 3, 0.2));
    let phi = Mat::identity(3).scale(2.0);
    let models = PiModels::new(
        Box::new(LinearDynamics::new(f, gm).unwrap()),
        Box::new(QuadraticCost::new(q).unwrap()),
        TerminalCost::Separate(Box::new(QuadraticCost::new(phi).unwrap())),
        ControlCostWeight::from_matrix(&Mat::from_rows(&[&[1.0, 0.3], &[0.3, 0.8]]).unwrap()).unwrap(),
    )
    .unwrap();
    let hp = PiHyperParams { lambda: 2.0, nu: 10.0, sigma: 0.4, trajectories: 6, horizon: 4, iterations: 3 };
    let report =
        gradcheck(&[0.5, -1.0, 0.2], &models, &hp, &rng.substream(1), &FreezeSet::new(), 1e-6, 1e-4, 1e-7).unwrap();
    assert!(report.passed, "{report:#?}");
}

#[test]
fn frozen_segments_are_exactly_zero() {
    let rng = SeededRng::new(3);
    let (x0, models, hp) = tiny_instance::<f64>(&rng).unwrap();
    let frozen: FreezeSet = [DYNAMICS_ID.to_string(), CONTROL_WEIGHT_ID.to_string()].into();
    let report = gradcheck(&x0, &models, &hp, &rng.substream(9), &frozen, 1e-6, 1e-4, 1e-7).unwrap();
    assert!(report.passed, "{report:#?}");
    let frozen_segs: Vec<_> = report.segments.iter().filter(|s| s.frozen).collect();
    assert_eq!(frozen_segs.len(), 2);
    assert!(frozen_segs.iter().all(|s| s.worst_analytic == 0.0));
}

#[test]
fn output_independent_loss_gives_zero_gradient() {
    let rng = SeededRng::new(4);
    let (x0, models, hp) = tiny_instance::<f64>(&rng).unwrap();
    let init = ControlSequence::zeros(hp.horizon, 1);
    let (_, tape) = pi_net_forward(&x0, &init, &models, &hp, &rng, true).unwrap();
    let grad =
        pi_net_backward(&tape.unwrap(), &models, &ControlSequence::zeros(hp.horizon, 1), &FreezeSet::new()).unwrap();
    assert!(grad.values().iter().all(|&v| v == 0.0));
}

#[test]
fn mismatched_models_are_rejected() {
    let rng = SeededRng::new(5);
    let (x0, models, hp) = tiny_instance::<f64>(&rng).unwrap();
    let init = ControlSequence::zeros(hp.horizon, 1);
    let (_, tape) = pi_net_forward(&x0, &init, &models, &hp, &rng, true).unwrap();
    let mut other = models.clone();
    let mut pv = other.pack();
    pv.values_mut()[0] += 1e-3;
    other.unpack(&pv).unwrap();
    let err = pi_net_backward(&tape.unwrap(), &other, &ControlSequence::zeros(hp.horizon, 1), &FreezeSet::new());
    assert!(matches!(err, Err(pinet_core::PiError::Consistency(_))));
}

#[test]
fn corrupted_gradient_fails_the_check() {
    use pinet_core::controller::{compare_gradients, finite_difference_gradient};
    let rng = SeededRng::new(6);
    let (x0, models, hp) = tiny_instance::<f64>(&rng).unwrap();
    let init = ControlSequence::zeros(hp.horizon, 1);
    let (out, tape) = pi_net_forward(&x0, &init, &models, &hp, &rng, true).unwrap();
    let cot = ControlSequence::from_vec(hp.horizon, 1, out.as_slice().to_vec()).unwrap();
    let mut analytic = pi_net_backward(&tape.unwrap(), &models, &cot, &FreezeSet::new()).unwrap();
    let loss = |u: &ControlSequence<f64>| 0.5 * u.as_slice().iter().map(|v| v * v).sum::<f64>();
    let numeric = finite_difference_gradient(&x0, &init, &models, &hp, &rng, &loss, 1e-6, &FreezeSet::new()).unwrap();
    assert!(compare_gradients(&analytic, &numeric, &FreezeSet::new(), 1e-4, 1e-7).passed);
    // the largest coordinate, off by one percent
    let (idx, _) = analytic
        .values()
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |b, (i, v)| if v.abs() > b.1 { (i, v.abs()) } else { b });
    analytic.values_mut()[idx] *= 1.01;
    let report = compare_gradients(&analytic, &numeric, &FreezeSet::new(), 1e-4, 1e-7);
    assert!(!report.passed);
}

#[test]
fn training_gradient_matches_finite_differences() {
    use pinet_core::controller::{compare_gradients, finite_difference_gradient};
    use pinet_core::training::{batch_gradient, loss_ctrl, OpenLoopSample, TrainConfig, TrainData};
    let rng = SeededRng::new(8);
    let (x0, models, hp) = tiny_instance::<f64>(&rng).unwrap();
    let demo = ControlSequence::from_vec(3, 1, vec![0.3, -0.2, 0.1]).unwrap();
    let train = vec![OpenLoopSample { x0: x0.clone(), controls: demo.clone() }];
    let data = TrainData::OpenLoop { train: &train, test: &[] };
    let cfg = TrainConfig::default();
    let noise = rng.substream(2);
    let analytic = batch_gradient(&models, &hp, &data, &cfg, &noise, &[0]).unwrap();
    let loss = |u: &ControlSequence<f64>| loss_ctrl(u, &demo).unwrap();
    let init = ControlSequence::zeros(3, 1);
    let numeric =
        finite_difference_gradient(&x0, &init, &models, &hp, &noise.substream(0), &loss, 1e-6, &FreezeSet::new())
            .unwrap();
    let report = compare_gradients(&analytic, &numeric, &FreezeSet::new(), 1e-4, 1e-7);
    assert!(report.passed, "{report:#?}");
    assert!(analytic.values().iter().any(|v| v.abs() > 1e-4));
}
