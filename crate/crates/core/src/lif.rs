//! Discrete-time leaky integrate-and-fire layer with direct lateral
//! inhibition and adaptive thresholds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifParams {
    pub v_rest: f64,
    pub v_reset: f64,
    pub v_thresh_base: f64,
    /// Lower bound on the membrane potential; stands in for the inhibitory
    /// reversal potential of a conductance model.
    pub v_min: f64,
    pub tau_mem: f64,
    pub refractory_period: u32,
    pub theta_plus: f64,
    pub tau_theta: f64,
    pub inhibition_strength: f64,
    /// Membrane jump in mV caused by one input spike through a unit weight.
    pub input_gain: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            v_rest: -65.0,
            v_reset: -60.0,
            v_thresh_base: -52.0,
            v_min: -80.0,
            tau_mem: 100.0,
            refractory_period: 5,
            theta_plus: 0.05,
            tau_theta: 1.0e4,
            inhibition_strength: 17.0,
            input_gain: 5.0,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("lif: {m}")));
        if !(self.tau_mem > 0.0) {
            return bad("tau_mem must be positive");
        }
        if !(self.tau_theta > 0.0) {
            return bad("tau_theta must be positive");
        }
        if !(self.v_rest < self.v_thresh_base && self.v_reset < self.v_thresh_base) {
            return bad("v_rest and v_reset must lie below v_thresh_base");
        }
        if !(self.v_min <= self.v_reset && self.v_min <= self.v_rest) {
            return bad("v_min must not exceed v_reset or v_rest");
        }
        if !(self.inhibition_strength >= 0.0) {
            return bad("inhibition_strength must be non-negative");
        }
        if !(self.theta_plus >= 0.0) {
            return bad("theta_plus must be non-negative");
        }
        if !(self.input_gain >= 0.0) {
            return bad("input_gain must be non-negative");
        }
        Ok(())
    }
}

/// Whether the adaptive threshold evolves during a step. Inference runs freeze it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Homeostasis {
    Adapt,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerState {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub refrac: Vec<u32>,
}

impl LayerState {
    pub fn at_rest(neurons: usize, params: &LifParams) -> Self {
        Self {
            v: vec![params.v_rest; neurons],
            theta: vec![0.0; neurons],
            refrac: vec![0; neurons],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn push_rest(&mut self, params: &LifParams) {
        self.v.push(params.v_rest);
        self.theta.push(0.0);
        self.refrac.push(0);
    }

    /// Removes the neurons at `sorted_indices` (ascending), keeping survivor order.
    pub fn remove_sorted(&mut self, sorted_indices: &[usize]) {
        retain_except(&mut self.v, sorted_indices);
        retain_except(&mut self.theta, sorted_indices);
        retain_except(&mut self.refrac, sorted_indices);
    }

    /// Membrane and refractory state return to rest; thresholds persist.
    pub fn reset_between_samples(&mut self, params: &LifParams) {
        self.v.fill(params.v_rest);
        self.refrac.fill(0);
    }
}

pub(crate) fn retain_except<T>(values: &mut Vec<T>, sorted_indices: &[usize]) {
    let mut k = 0;
    let mut idx = 0;
    values.retain(|_| {
        let drop = sorted_indices.get(k) == Some(&idx);
        if drop {
            k += 1;
        }
        idx += 1;
        !drop
    });
}

/// Advances every neuron one timestep, appending the indices of spiking
/// neurons to `spikes` (cleared first).
#[allow(clippy::needless_range_loop)]
pub fn step_layer_into(
    state: &mut LayerState,
    input: &[f64],
    params: &LifParams,
    dt_ms: f64,
    homeostasis: Homeostasis,
    spikes: &mut Vec<usize>,
) -> Result<()> {
    if input.len() != state.len() {
        return Err(Error::DimensionMismatch {
            expected: state.len(),
            actual: input.len(),
        });
    }
    spikes.clear();
    let leak = dt_ms / params.tau_mem;
    let theta_decay = (-dt_ms / params.tau_theta).exp();
    for j in 0..state.len() {
        if homeostasis == Homeostasis::Adapt {
            state.theta[j] *= theta_decay;
        }
        if state.refrac[j] > 0 {
            state.refrac[j] -= 1;
            continue;
        }
        let v = state.v[j];
        let v = (v + leak * (params.v_rest - v) + input[j]).max(params.v_min);
        if v >= params.v_thresh_base + state.theta[j] {
            state.v[j] = params.v_reset;
            state.refrac[j] = params.refractory_period;
            if homeostasis == Homeostasis::Adapt {
                state.theta[j] += params.theta_plus;
            }
            spikes.push(j);
        } else {
            state.v[j] = v;
        }
    }
    Ok(())
}

pub fn step_layer(
    state: &mut LayerState,
    input: &[f64],
    params: &LifParams,
    dt_ms: f64,
    homeostasis: Homeostasis,
) -> Result<Vec<bool>> {
    let mut spikes = Vec::new();
    step_layer_into(state, input, params, dt_ms, homeostasis, &mut spikes)?;
    let mut flags = vec![false; state.len()];
    for j in spikes {
        flags[j] = true;
    }
    Ok(flags)
}

/// Inhibitory current for the next step: every neuron receives
/// `-inhibition_strength` per spiking peer, excluding itself.
pub fn apply_lateral_inhibition(spikes: &[bool], params: &LifParams) -> Vec<f64> {
    let count = spikes.iter().filter(|&&s| s).count() as f64;
    spikes
        .iter()
        .map(|&s| {
            let peers = if s { count - 1.0 } else { count };
            if peers == 0.0 {
                0.0
            } else {
                -params.inhibition_strength * peers
            }
        })
        .collect()
}

/// Index-list form of [`apply_lateral_inhibition`], writing into `out`.
pub(crate) fn inhibition_into(spiking: &[usize], neurons: usize, params: &LifParams, out: &mut [f64]) {
    debug_assert_eq!(out.len(), neurons);
    let n = spiking.len() as f64;
    if spiking.is_empty() {
        out.fill(0.0);
        return;
    }
    out.fill(-params.inhibition_strength * n);
    for &j in spiking {
        out[j] = -params.inhibition_strength * (n - 1.0);
    }
}
