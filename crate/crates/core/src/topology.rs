//! Structural plasticity for the dynamic layer: activity rates, best and
//! second-best matching units, growth on poorly matched input, age-based
//! pruning of unspecialized neurons.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encoding::SpikeTrain;
use crate::error::{Error, Result};
use crate::lif::LifParams;
use crate::network::ExcitatoryLayer;
use crate::plasticity::{FiringFactorState, PlasticityConfig};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthConfig {
    /// Activity threshold on the BMU rate, spikes per timestep.
    pub a_th: f64,
    /// The BMU must have habituated below this factor before growth.
    pub f_th: f64,
    /// Neurons older than `age_max` with a factor above this are pruned.
    pub p_th: f64,
    /// In mini-batches.
    pub age_max: u64,
    pub max_neurons: usize,
    pub init_neurons: usize,
    /// Jitter on copied weights, as a fraction of the weight range.
    pub noise_sigma: f64,
    /// Samples per mini-batch; ages advance and pruning runs once per batch.
    pub batch_size: usize,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            a_th: 0.02,
            f_th: 0.3,
            p_th: 0.9,
            age_max: 500,
            max_neurons: 200,
            init_neurons: 10,
            noise_sigma: 0.01,
            batch_size: 32,
        }
    }
}

impl GrowthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("growth: {m}")));
        if !(self.f_th > 0.0 && self.f_th < 1.0) {
            return bad(format!("f_th = {} must lie in (0, 1)", self.f_th));
        }
        if !(self.p_th > 0.0 && self.p_th < 1.0) {
            return bad(format!("p_th = {} must lie in (0, 1)", self.p_th));
        }
        if !(self.p_th > self.f_th) {
            return bad(format!("p_th = {} must exceed f_th = {}", self.p_th, self.f_th));
        }
        if self.age_max < 1 {
            return bad("age_max must be at least 1".into());
        }
        if self.init_neurons < 2 {
            return bad("init_neurons must be at least 2".into());
        }
        if self.max_neurons < self.init_neurons {
            return bad("max_neurons must be at least init_neurons".into());
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.a_th >= 0.0) {
            return bad("a_th must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronMeta {
    /// Stable identifier, never reused within a population.
    pub id: u64,
    /// Mini-batches since creation.
    pub age: u64,
}

/// Per-neuron rates over the last `window` steps of a neuron raster.
pub fn compute_asr(raster: &SpikeTrain, window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::InvalidArgument("ASR window must be positive".into()));
    }
    if window > raster.duration() {
        return Err(Error::InvalidArgument(format!(
            "ASR window {window} exceeds raster duration {}",
            raster.duration()
        )));
    }
    let mut counts = vec![0u32; raster.channels()];
    for t in raster.duration() - window..raster.duration() {
        for &j in raster.at(t) {
            counts[j as usize] += 1;
        }
    }
    Ok(counts.iter().map(|&c| c as f64 / window as f64).collect())
}

/// Highest and second-highest rate, ties going to the lower index.
pub fn find_bmu_sbmu(asr: &[f64]) -> Result<(usize, usize)> {
    if asr.len() < 2 {
        return Err(Error::TooFewNeurons(asr.len()));
    }
    let (mut bmu, mut sbmu) = if asr[1] > asr[0] { (1, 0) } else { (0, 1) };
    for (j, &r) in asr.iter().enumerate().skip(2) {
        if r > asr[bmu] {
            sbmu = bmu;
            bmu = j;
        } else if r > asr[sbmu] {
            sbmu = j;
        }
    }
    Ok((bmu, sbmu))
}

pub fn should_grow(asr_bmu: f64, f_bmu: f64, cfg: &GrowthConfig, live_count: usize) -> bool {
    asr_bmu < cfg.a_th && f_bmu < cfg.f_th && live_count < cfg.max_neurons
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Grow,
    Prune,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyEvent {
    pub batch: u64,
    pub event: EventKind,
    pub neuron_id: u64,
}

/// Excitatory layer plus the per-neuron bookkeeping that growth and pruning
/// keep aligned with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicPopulation {
    pub layer: ExcitatoryLayer,
    pub factors: FiringFactorState,
    pub meta: Vec<NeuronMeta>,
    next_id: u64,
}

impl DynamicPopulation {
    pub fn new(layer: ExcitatoryLayer, plasticity: &PlasticityConfig) -> Self {
        let n = layer.neurons();
        Self {
            layer,
            factors: FiringFactorState::new(n, plasticity.alpha_base, plasticity.tau_ff),
            meta: (0..n as u64).map(|id| NeuronMeta { id, age: 0 }).collect(),
            next_id: n as u64,
        }
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    /// Appends a copy of neuron `bmu` with jittered weights, a fresh factor
    /// of 1, age 0 and a resting membrane. Returns the new index.
    pub fn grow_neuron(
        &mut self,
        bmu: usize,
        growth: &GrowthConfig,
        plasticity: &PlasticityConfig,
        lif: &LifParams,
        rng: &mut Rng,
    ) -> Result<usize> {
        if self.len() >= growth.max_neurons {
            return Err(Error::AtCapacity(growth.max_neurons));
        }
        if bmu >= self.len() {
            return Err(Error::InvalidArgument(format!("no neuron {bmu} to copy")));
        }
        let sigma = growth.noise_sigma * (plasticity.w_max - plasticity.w_min);
        let mut row = self.layer.weights.row(bmu).to_vec();
        if sigma > 0.0 {
            let noise = Normal::new(0.0, sigma)
                .map_err(|e| Error::InvalidArgument(format!("growth noise: {e}")))?;
            for w in &mut row {
                *w = (*w + noise.sample(rng)).clamp(plasticity.w_min, plasticity.w_max);
            }
        }
        self.layer.weights.push_row(&row)?;
        self.layer.state.push_rest(lif);
        self.layer.traces.last_post.push(None);
        self.factors.push(plasticity.alpha_base);
        self.meta.push(NeuronMeta {
            id: self.next_id,
            age: 0,
        });
        self.next_id += 1;
        Ok(self.len() - 1)
    }

    /// Indices that the pruning rule would remove, after applying the
    /// two-neuron floor (the oldest offenders are spared first).
    pub fn prune_candidates(&self, cfg: &GrowthConfig) -> Vec<usize> {
        let mut offenders: Vec<usize> = (0..self.len())
            .filter(|&j| self.meta[j].age > cfg.age_max && self.factors.f[j] > cfg.p_th)
            .collect();
        let max_removable = self.len().saturating_sub(2);
        if offenders.len() > max_removable {
            // Spare the oldest; among equal ages spare the lowest index.
            let mut by_age = offenders.clone();
            by_age.sort_by(|&a, &b| self.meta[b].age.cmp(&self.meta[a].age).then(a.cmp(&b)));
            let spared: Vec<usize> = by_age[..offenders.len() - max_removable].to_vec();
            offenders.retain(|j| !spared.contains(j));
        }
        offenders
    }

    /// Removes unspecialized old neurons with their synapses. Returns the
    /// removed indices (pre-removal numbering, ascending).
    pub fn prune(&mut self, cfg: &GrowthConfig) -> Vec<usize> {
        let removed = self.prune_candidates(cfg);
        if !removed.is_empty() {
            self.remove_sorted(&removed);
        }
        removed
    }

    fn remove_sorted(&mut self, sorted: &[usize]) {
        self.layer.weights.remove_rows(sorted);
        self.layer.state.remove_sorted(sorted);
        self.layer.ensure_traces();
        self.factors.remove_sorted(sorted);
        crate::lif::retain_except(&mut self.meta, sorted);
    }

    pub fn increment_ages(&mut self) {
        increment_ages(&mut self.meta);
    }
}

pub fn increment_ages(meta: &mut [NeuronMeta]) {
    for m in meta {
        m.age += 1;
    }
}
