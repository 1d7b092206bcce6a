use super::rollout::{cost_to_go, monte_carlo_rollout, RolloutCosts};
use super::update::update_controls_weighted;
use crate::error::{shape_err, Result};
use crate::models::{ModelsSpec, PiModels};
use crate::params::ParamVector;
use crate::rng::{gaussian_noise, SeededRng};
use crate::scalar::Real;
use crate::types::{ControlSequence, NoiseTensor, PiHyperParams};

/// Everything one kernel iteration produced, enough to run its reverse pass.
#[derive(Debug, Clone)]
pub struct KernelRecord<T> {
    pub input: ControlSequence<T>,
    pub noise: NoiseTensor<T>,
    /// `K x (N+1) x n`
    pub states: Vec<T>,
    pub costs: RolloutCosts<T>,
    /// Normalised update weights `p[k * N + i]`.
    pub weights: Vec<T>,
}

/// Stored intermediates of a full recorded forward pass.
#[derive(Debug, Clone)]
pub struct RolloutTape<T> {
    pub x0: Vec<T>,
    pub hp: PiHyperParams<T>,
    pub spec: ModelsSpec,
    /// Model parameters the pass ran with.
    pub params: ParamVector<T>,
    pub records: Vec<KernelRecord<T>>,
    pub output: ControlSequence<T>,
}

impl<T: Real> RolloutTape<T> {
    pub fn state_dim(&self) -> usize {
        self.x0.len()
    }
}

fn kernel_step<T: Real>(
    x0: &[T],
    useq: &ControlSequence<T>,
    models: &PiModels<T>,
    hp: &PiHyperParams<T>,
    rng: &SeededRng,
) -> Result<(ControlSequence<T>, KernelRecord<T>)> {
    let noise = gaussian_noise(rng, hp.trajectories, hp.horizon, models.control_dim(), hp.sigma)?;
    let rollout = monte_carlo_rollout(x0, useq, &noise, models, hp.nu)?;
    let ctg = cost_to_go(&rollout.costs);
    let (out, weights) = update_controls_weighted(useq, &noise, &ctg, hp.lambda)?;
    Ok((out, KernelRecord { input: useq.clone(), noise, states: rollout.states, costs: rollout.costs, weights }))
}

/// One kernel pass with noise drawn from `rng`.
pub fn pi_kernel<T: Real>(
    x0: &[T],
    useq: &ControlSequence<T>,
    models: &PiModels<T>,
    hp: &PiHyperParams<T>,
    rng: &SeededRng,
) -> Result<ControlSequence<T>> {
    hp.validate()?;
    check_sequence(useq, models, hp)?;
    kernel_step(x0, useq, models, hp, rng).map(|(u, _)| u)
}

fn check_sequence<T: Real>(useq: &ControlSequence<T>, models: &PiModels<T>, hp: &PiHyperParams<T>) -> Result<()> {
    if useq.horizon() != hp.horizon || useq.dim() != models.control_dim() {
        return shape_err(format!(
            "initial sequence is {}x{}, expected {}x{}",
            useq.horizon(),
            useq.dim(),
            hp.horizon,
            models.control_dim()
        ));
    }
    Ok(())
}

/// Applies the kernel `hp.iterations` times. Iteration `j` draws its noise
/// from `rng.substream(j)`. With `record`, the returned tape feeds
/// [`super::pi_net_backward`].
pub fn pi_net_forward<T: Real>(
    x0: &[T],
    useq_init: &ControlSequence<T>,
    models: &PiModels<T>,
    hp: &PiHyperParams<T>,
    rng: &SeededRng,
    record: bool,
) -> Result<(ControlSequence<T>, Option<RolloutTape<T>>)> {
    hp.validate()?;
    check_sequence(useq_init, models, hp)?;
    let mut useq = useq_init.clone();
    let mut records = Vec::with_capacity(if record { hp.iterations } else { 0 });
    for j in 0..hp.iterations {
        let (next, rec) = kernel_step(x0, &useq, models, hp, &rng.substream(j as u64))?;
        if record {
            records.push(rec);
        }
        useq = next;
    }
    let tape = record.then(|| RolloutTape {
        x0: x0.to_vec(),
        hp: *hp,
        spec: models.spec(),
        params: models.pack(),
        records,
        output: useq.clone(),
    });
    Ok((useq, tape))
}
