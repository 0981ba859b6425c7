//! One excitatory layer driven by an input spike train: the unit both
//! phases are built from.

use serde::{Deserialize, Serialize};

use crate::encoding::SpikeTrain;
use crate::error::{Error, Result};
use crate::lif::{inhibition_into, step_layer_into, Homeostasis, LayerState, LifParams};
use crate::plasticity::{apply_trace_updates, Gate, PlasticityConfig, SynapseMatrix, TraceState};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitatoryLayer {
    pub weights: SynapseMatrix,
    pub state: LayerState,
    #[serde(skip)]
    pub traces: TraceState,
}

/// Plasticity applied during a training presentation.
#[derive(Debug, Clone, Copy)]
pub struct Learning<'a> {
    pub cfg: &'a PlasticityConfig,
    pub gate: Gate<'a>,
}

impl ExcitatoryLayer {
    pub fn random(inputs: usize, neurons: usize, lif: &LifParams, plasticity: &PlasticityConfig, rng: &mut Rng) -> Self {
        Self {
            weights: SynapseMatrix::random(inputs, neurons, plasticity, rng),
            state: LayerState::at_rest(neurons, lif),
            traces: TraceState::new(inputs, neurons),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.inputs()
    }

    pub fn neurons(&self) -> usize {
        self.weights.neurons()
    }

    /// Restores trace storage after deserialization.
    pub fn ensure_traces(&mut self) {
        if self.traces.last_pre.len() != self.inputs() || self.traces.last_post.len() != self.neurons() {
            self.traces = TraceState::new(self.inputs(), self.neurons());
        }
    }

    pub fn reset_between_samples(&mut self, lif: &LifParams) {
        self.state.reset_between_samples(lif);
        self.ensure_traces();
        self.traces.clear();
    }

    /// Runs one presentation with plasticity and threshold adaptation,
    /// returning per-neuron spike counts.
    pub fn present_learning(
        &mut self,
        train: &SpikeTrain,
        lif: &LifParams,
        dt_ms: f64,
        learning: Learning<'_>,
    ) -> Result<Vec<u32>> {
        self.check_train(train)?;
        self.reset_between_samples(lif);
        let Self { weights, state, traces } = self;
        let counts = run(Access::Learn(weights, traces, learning), state, train, lif, dt_ms)?;
        let mean = learning.cfg.weight_norm;
        if mean > 0.0 {
            let target = mean * weights.inputs() as f64;
            weights.normalize_rows(target, learning.cfg.w_min, learning.cfg.w_max);
        }
        Ok(counts)
    }

    /// Runs one presentation on a scratch copy of the membrane state with
    /// weights and thresholds frozen.
    pub fn present_frozen(&self, train: &SpikeTrain, lif: &LifParams, dt_ms: f64) -> Result<Vec<u32>> {
        self.check_train(train)?;
        let mut state = self.state.clone();
        state.reset_between_samples(lif);
        run(Access::Frozen(&self.weights), &mut state, train, lif, dt_ms)
    }

    fn check_train(&self, train: &SpikeTrain) -> Result<()> {
        if train.channels() != self.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                actual: train.channels(),
            });
        }
        Ok(())
    }
}

enum Access<'a> {
    Frozen(&'a SynapseMatrix),
    Learn(&'a mut SynapseMatrix, &'a mut TraceState, Learning<'a>),
}

fn run(
    mut access: Access<'_>,
    state: &mut LayerState,
    train: &SpikeTrain,
    lif: &LifParams,
    dt_ms: f64,
) -> Result<Vec<u32>> {
    let homeostasis = match access {
        Access::Frozen(_) => Homeostasis::Frozen,
        Access::Learn(..) => Homeostasis::Adapt,
    };
    let neurons = state.len();
    let mut current = vec![0.0; neurons];
    let mut inhibition = vec![0.0; neurons];
    let mut spikes = Vec::with_capacity(neurons);
    let mut counts = vec![0u32; neurons];
    for t in 0..train.duration() {
        let pre = train.at(t);
        let weights: &SynapseMatrix = match &access {
            Access::Frozen(w) => w,
            Access::Learn(w, ..) => w,
        };
        for (j, c) in current.iter_mut().enumerate() {
            let row = weights.row(j);
            let drive: f64 = pre.iter().map(|&i| row[i as usize]).sum();
            *c = inhibition[j] + lif.input_gain * drive;
        }
        step_layer_into(state, &current, lif, dt_ms, homeostasis, &mut spikes)?;
        if let Access::Learn(w, traces, learning) = &mut access {
            apply_trace_updates(w, pre, &spikes, traces, t as u32, dt_ms, learning.gate, learning.cfg)?;
        }
        for &j in &spikes {
            counts[j] += 1;
        }
        inhibition_into(&spikes, neurons, lif, &mut inhibition);
    }
    Ok(counts)
}

/// Spike counts over a window of `window` steps as rates in `[0, 1]`.
pub fn rates(counts: &[u32], window: usize) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / window as f64).collect()
}
