//! Pair-based STDP, its firing-factor gated variant (Ad-STDP), and the
//! per-neuron firing-factor lifecycle.
//!
//! Weight change for a spike pair with `dt = t_post - t_pre`:
//!
//! ```text
//! dt > 0:  A+ * f * exp(-dt / tau_pre)     (potentiation)
//! dt < 0:  A- * f * exp( dt / tau_post)    (depression, A- < 0)
//! ```
//!
//! Coincident spikes (`dt == 0`) potentiate with magnitude `A+ * f`.
//! Standard STDP is the same rule with `f = 1`.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Which side of a synapse supplies the firing factor that gates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FfSide {
    /// The excitatory neuron owning the synapse (the unit whose BMU/SBMU
    /// history the factor tracks).
    Excitatory,
    /// The input channel. Input channels are never selected, so their factor
    /// stays at 1 and gating is inert.
    Presynaptic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdpMode {
    Standard,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlasticityConfig {
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_pre: f64,
    pub tau_post: f64,
    pub w_min: f64,
    pub w_max: f64,
    /// Initial weights are drawn uniformly from `[w_min, w_min + w_init_max]`.
    pub w_init_max: f64,
    pub tau_ff: f64,
    pub alpha_base: f64,
    pub ff_side: FfSide,
    /// When positive, each neuron's incoming weights are rescaled after every
    /// training presentation so that their mean equals this value; 0 disables.
    pub weight_norm: f64,
}

impl Default for PlasticityConfig {
    fn default() -> Self {
        Self {
            a_plus: 0.01,
            a_minus: -0.006,
            tau_pre: 20.0,
            tau_post: 20.0,
            w_min: 0.0,
            w_max: 1.0,
            w_init_max: 0.3,
            tau_ff: 10.0,
            alpha_base: 1.0,
            ff_side: FfSide::Excitatory,
            weight_norm: 0.15,
        }
    }
}

impl PlasticityConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("plasticity: {m}")));
        if !(self.a_plus > 0.0) {
            return bad("a_plus must be positive");
        }
        if !(self.a_minus < 0.0) {
            return bad("a_minus must be negative");
        }
        if !(self.tau_pre > 0.0 && self.tau_post > 0.0) {
            return bad("tau_pre and tau_post must be positive");
        }
        if !(self.w_min < self.w_max) {
            return bad("w_min must be below w_max");
        }
        if !(self.w_init_max >= 0.0) {
            return bad("w_init_max must be non-negative");
        }
        if !(self.tau_ff > 0.0 && self.alpha_base > 0.0) {
            return bad("tau_ff and alpha_base must be positive");
        }
        if !(self.weight_norm >= 0.0 && self.weight_norm.is_finite()) {
            return bad("weight_norm must be non-negative (0 disables)");
        }
        Ok(())
    }
}

/// Closed-form firing factor after `n` selections.
pub fn firing_factor(n: f64, alpha: f64, tau_ff: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(tau_ff > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "firing factor needs alpha > 0 and tau_ff > 0 (alpha={alpha}, tau_ff={tau_ff})"
        )));
    }
    if !(n >= 0.0) {
        return Err(Error::InvalidArgument(format!("selection count {n} is negative")));
    }
    Ok(factor_unchecked(n, alpha, tau_ff))
}

#[inline]
fn factor_unchecked(n: f64, alpha: f64, tau_ff: f64) -> f64 {
    1.0 - (1.0 / alpha) * (1.0 - (-(alpha * n) / tau_ff).exp())
}

pub fn ad_stdp_delta(delta_t: f64, f: f64, cfg: &PlasticityConfig) -> f64 {
    if delta_t >= 0.0 {
        cfg.a_plus * f * (-delta_t / cfg.tau_pre).exp()
    } else {
        cfg.a_minus * f * (delta_t / cfg.tau_post).exp()
    }
}

pub fn standard_stdp_delta(delta_t: f64, cfg: &PlasticityConfig) -> f64 {
    ad_stdp_delta(delta_t, 1.0, cfg)
}

/// Per-neuron firing-factor bookkeeping.
///
/// Mixed BMU/SBMU histories are folded into an accumulated exposure `E`: a
/// BMU event adds 1, an SBMU event adds `alpha_bmu * (asr_sbmu / asr_bmu) / alpha_i`.
/// The factor is the closed form evaluated at `n = E`, which reduces to the
/// plain count for pure-BMU histories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiringFactorState {
    pub tau_ff: f64,
    pub alpha: Vec<f64>,
    pub exposure: Vec<f64>,
    pub selections: Vec<u64>,
    pub f: Vec<f64>,
}

impl FiringFactorState {
    pub fn new(neurons: usize, alpha_base: f64, tau_ff: f64) -> Self {
        Self {
            tau_ff,
            alpha: vec![alpha_base; neurons],
            exposure: vec![0.0; neurons],
            selections: vec![0; neurons],
            f: vec![1.0; neurons],
        }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn push(&mut self, alpha: f64) {
        self.alpha.push(alpha);
        self.exposure.push(0.0);
        self.selections.push(0);
        self.f.push(1.0);
    }

    pub fn remove_sorted(&mut self, sorted_indices: &[usize]) {
        crate::lif::retain_except(&mut self.alpha, sorted_indices);
        crate::lif::retain_except(&mut self.exposure, sorted_indices);
        crate::lif::retain_except(&mut self.selections, sorted_indices);
        crate::lif::retain_except(&mut self.f, sorted_indices);
    }

    pub fn record_selection(&mut self, bmu: usize, sbmu: usize, asr_bmu: f64, asr_sbmu: f64) -> Result<()> {
        if bmu == sbmu {
            return Err(Error::InvalidArgument("BMU and SBMU must differ".into()));
        }
        if bmu >= self.len() || sbmu >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "selection ({bmu}, {sbmu}) out of range for {} neurons",
                self.len()
            )));
        }
        if !(asr_bmu > 0.0) {
            return Err(Error::InvalidArgument("BMU rate is zero; nothing was selected".into()));
        }
        if !(asr_sbmu >= 0.0 && asr_sbmu <= asr_bmu) {
            return Err(Error::InvalidArgument(format!(
                "SBMU rate {asr_sbmu} must lie in [0, {asr_bmu}]"
            )));
        }
        self.exposure[bmu] += 1.0;
        let alpha_eff = self.alpha[bmu] * (asr_sbmu / asr_bmu);
        self.exposure[sbmu] += alpha_eff / self.alpha[sbmu];
        self.selections[bmu] += 1;
        self.selections[sbmu] += 1;
        for j in [bmu, sbmu] {
            self.f[j] = factor_unchecked(self.exposure[j], self.alpha[j], self.tau_ff);
        }
        Ok(())
    }
}

/// Dense excitatory-neuron-major weight matrix: row `j` holds the incoming
/// weights of neuron `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseMatrix {
    inputs: usize,
    neurons: usize,
    w: Vec<f64>,
}

impl SynapseMatrix {
    pub fn filled(inputs: usize, neurons: usize, value: f64) -> Self {
        Self {
            inputs,
            neurons,
            w: vec![value; inputs * neurons],
        }
    }

    pub fn random(inputs: usize, neurons: usize, cfg: &PlasticityConfig, rng: &mut Rng) -> Self {
        let w = (0..inputs * neurons)
            .map(|_| (cfg.w_min + rng.random::<f64>() * cfg.w_init_max).min(cfg.w_max))
            .collect();
        Self { inputs, neurons, w }
    }

    pub fn from_rows(inputs: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let neurons = rows.len();
        let mut w = Vec::with_capacity(inputs * neurons);
        for row in rows {
            if row.len() != inputs {
                return Err(Error::DimensionMismatch {
                    expected: inputs,
                    actual: row.len(),
                });
            }
            w.extend(row);
        }
        Ok(Self { inputs, neurons, w })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    #[inline]
    pub fn get(&self, input: usize, neuron: usize) -> f64 {
        self.w[neuron * self.inputs + input]
    }

    #[inline]
    pub fn set(&mut self, input: usize, neuron: usize, value: f64) {
        self.w[neuron * self.inputs + input] = value;
    }

    pub fn row(&self, neuron: usize) -> &[f64] {
        &self.w[neuron * self.inputs..(neuron + 1) * self.inputs]
    }

    pub fn row_mut(&mut self, neuron: usize) -> &mut [f64] {
        &mut self.w[neuron * self.inputs..(neuron + 1) * self.inputs]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.inputs {
            return Err(Error::DimensionMismatch {
                expected: self.inputs,
                actual: row.len(),
            });
        }
        self.w.extend_from_slice(row);
        self.neurons += 1;
        Ok(())
    }

    pub fn remove_rows(&mut self, sorted_indices: &[usize]) {
        let inputs = self.inputs;
        let mut kept = Vec::with_capacity(self.w.len());
        let mut k = 0;
        for j in 0..self.neurons {
            if sorted_indices.get(k) == Some(&j) {
                k += 1;
                continue;
            }
            kept.extend_from_slice(&self.w[j * inputs..(j + 1) * inputs]);
        }
        self.neurons -= k;
        self.w = kept;
    }

    pub fn clip(&mut self, w_min: f64, w_max: f64) {
        for w in &mut self.w {
            *w = w.clamp(w_min, w_max);
        }
    }

    /// Rescales every row to sum to `target`, then clips.
    pub fn normalize_rows(&mut self, target: f64, w_min: f64, w_max: f64) {
        for j in 0..self.neurons {
            let row = self.row_mut(j);
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                let scale = target / sum;
                for w in row.iter_mut() {
                    *w = (*w * scale).clamp(w_min, w_max);
                }
            }
        }
    }
}

/// Spike traces stored as the last spike step per channel and per neuron.
/// The trace value at step `t` is `exp(-(t - t_last) * dt / tau)`, i.e. a
/// trace reset to 1 on each spike and decayed exponentially in between.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceState {
    pub last_pre: Vec<Option<u32>>,
    pub last_post: Vec<Option<u32>>,
}

impl TraceState {
    pub fn new(inputs: usize, neurons: usize) -> Self {
        Self {
            last_pre: vec![None; inputs],
            last_post: vec![None; neurons],
        }
    }

    pub fn clear(&mut self) {
        self.last_pre.fill(None);
        self.last_post.fill(None);
    }

    pub fn is_clear(&self) -> bool {
        self.last_pre.iter().chain(&self.last_post).all(Option::is_none)
    }

    pub fn pre_trace(&self, channel: usize, t: u32, dt_ms: f64, tau: f64) -> f64 {
        trace_value(self.last_pre[channel], t, dt_ms, tau)
    }

    pub fn post_trace(&self, neuron: usize, t: u32, dt_ms: f64, tau: f64) -> f64 {
        trace_value(self.last_post[neuron], t, dt_ms, tau)
    }
}

#[inline]
fn trace_value(last: Option<u32>, t: u32, dt_ms: f64, tau: f64) -> f64 {
    match last {
        Some(s) => (-((t - s) as f64 * dt_ms) / tau).exp(),
        None => 0.0,
    }
}

/// Source of the multiplicative plasticity gate for synapse `(input, neuron)`.
#[derive(Debug, Clone, Copy)]
pub enum Gate<'a> {
    /// Standard STDP.
    Ungated,
    /// Factor of the excitatory neuron.
    Neuron(&'a [f64]),
    /// Factor of the input channel.
    Input(&'a [f64]),
}

impl Gate<'_> {
    #[inline]
    fn factor(&self, input: usize, neuron: usize) -> f64 {
        match self {
            Gate::Ungated => 1.0,
            Gate::Neuron(f) => f[neuron],
            Gate::Input(f) => f[input],
        }
    }

    fn check(&self, inputs: usize, neurons: usize) -> Result<()> {
        match self {
            Gate::Neuron(f) if f.len() != neurons => Err(Error::DimensionMismatch {
                expected: neurons,
                actual: f.len(),
            }),
            Gate::Input(f) if f.len() != inputs => Err(Error::DimensionMismatch {
                expected: inputs,
                actual: f.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// Applies one timestep of online STDP.
///
/// Within a step: depression for every presynaptic spike against the
/// postsynaptic traces of earlier steps, then potentiation for every
/// postsynaptic spike against presynaptic traces including this step's
/// spikes (so coincidences potentiate). Each update is clipped to
/// `[w_min, w_max]`.
#[allow(clippy::too_many_arguments)]
pub fn apply_trace_updates(
    weights: &mut SynapseMatrix,
    pre_spikes: &[u32],
    post_spikes: &[usize],
    traces: &mut TraceState,
    t: u32,
    dt_ms: f64,
    gate: Gate<'_>,
    cfg: &PlasticityConfig,
) -> Result<()> {
    if traces.last_pre.len() != weights.inputs() || traces.last_post.len() != weights.neurons() {
        return Err(Error::DimensionMismatch {
            expected: weights.inputs() + weights.neurons(),
            actual: traces.last_pre.len() + traces.last_post.len(),
        });
    }
    gate.check(weights.inputs(), weights.neurons())?;

    if !pre_spikes.is_empty() {
        let post: Vec<(usize, f64)> = traces
            .last_post
            .iter()
            .enumerate()
            .filter_map(|(j, last)| last.map(|s| (j, ((t - s) as f64) * dt_ms)))
            .collect();
        for &i in pre_spikes {
            let i = i as usize;
            for &(j, lag) in &post {
                let dw = cfg.a_minus * gate.factor(i, j) * (-lag / cfg.tau_post).exp();
                let w = weights.get(i, j) + dw;
                weights.set(i, j, w.clamp(cfg.w_min, cfg.w_max));
            }
            traces.last_pre[i] = Some(t);
        }
    }

    if !post_spikes.is_empty() {
        let pre: Vec<(usize, f64)> = traces
            .last_pre
            .iter()
            .enumerate()
            .filter_map(|(i, last)| last.map(|s| (i, ((t - s) as f64) * dt_ms)))
            .collect();
        for &j in post_spikes {
            for &(i, lag) in &pre {
                let dw = cfg.a_plus * gate.factor(i, j) * (-lag / cfg.tau_pre).exp();
                let w = weights.get(i, j) + dw;
                weights.set(i, j, w.clamp(cfg.w_min, cfg.w_max));
            }
            traces.last_post[j] = Some(t);
        }
    }
    Ok(())
}
