//! The two-phase cascade: a fixed-size detector trained with plain STDP and
//! frozen, followed by a growing attack classifier trained with gated STDP
//! on the detector's activity concatenated to the raw features.

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::encoding::{encode_poisson, EncodingConfig};
use crate::error::{Error, Result};
use crate::labeling::{assign_labels, predict_class, LabelMap};
use crate::lif::LifParams;
use crate::network::{rates, ExcitatoryLayer, Learning};
use crate::plasticity::{FfSide, Gate, PlasticityConfig, StdpMode};
use crate::rng::{rng_for, Stream};
use crate::topology::{find_bmu_sbmu, should_grow, DynamicPopulation, EventKind, GrowthConfig, TopologyEvent};

/// Detector classes.
pub const BENIGN: usize = 0;
pub const ATTACK: usize = 1;

// Keys separating the encoding streams of the different presentation kinds.
const KEY_P1_TRAIN: u64 = 1;
const KEY_P1_INFER: u64 = 2;
const KEY_P2_TRAIN: u64 = 3;
const KEY_P2_INFER: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseOneConfig {
    pub neurons: usize,
    pub epochs: usize,
}

impl Default for PhaseOneConfig {
    fn default() -> Self {
        Self { neurons: 100, epochs: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseTwoConfig {
    pub stdp_mode: StdpMode,
    pub growth: bool,
    pub pruning: bool,
    /// Starting population; `None` uses `growth.init_neurons`.
    pub neurons: Option<usize>,
    pub epochs: usize,
}

impl Default for PhaseTwoConfig {
    fn default() -> Self {
        Self {
            stdp_mode: StdpMode::Adaptive,
            growth: true,
            pruning: true,
            neurons: None,
            epochs: 1,
        }
    }
}

/// Every parameter a model needs, independent of data and I/O settings.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoding: EncodingConfig,
    pub lif: LifParams,
    pub plasticity: PlasticityConfig,
    pub growth: GrowthConfig,
    pub phase1: PhaseOneConfig,
    pub phase2: PhaseTwoConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoding.validate()?;
        self.lif.validate()?;
        self.plasticity.validate()?;
        self.growth.validate()?;
        if self.phase1.neurons < 2 {
            return Err(Error::Config("phase1.neurons must be at least 2".into()));
        }
        if self.phase1.epochs == 0 || self.phase2.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        let start = self.phase2_initial_neurons();
        if start < 2 || start > self.growth.max_neurons {
            return Err(Error::Config(format!(
                "phase2 starting population {start} must lie in [2, {}]",
                self.growth.max_neurons
            )));
        }
        Ok(())
    }

    pub fn phase2_initial_neurons(&self) -> usize {
        self.phase2.neurons.unwrap_or(self.growth.init_neurons)
    }

    fn dt(&self) -> f64 {
        self.encoding.dt_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOneModel {
    pub layer: ExcitatoryLayer,
    pub labels: Option<LabelMap>,
}

impl PhaseOneModel {
    pub fn input_dim(&self) -> usize {
        self.layer.inputs()
    }

    pub fn neurons(&self) -> usize {
        self.layer.neurons()
    }
}

pub fn train_phase1(stream: &[Sample], cfg: &ModelConfig, seed: u64) -> Result<PhaseOneModel> {
    let first = stream.first().ok_or(Error::EmptyDataset)?;
    let dim = first.features.len();
    let mut rng = rng_for(seed, Stream::Init, &[KEY_P1_TRAIN]);
    let mut layer = ExcitatoryLayer::random(dim, cfg.phase1.neurons, &cfg.lif, &cfg.plasticity, &mut rng);
    let learning = Learning {
        cfg: &cfg.plasticity,
        gate: Gate::Ungated,
    };
    for epoch in 0..cfg.phase1.epochs {
        for sample in stream {
            check_dim(dim, sample.features.len())?;
            let mut rng = rng_for(seed, Stream::Encode, &[KEY_P1_TRAIN, sample.id, epoch as u64]);
            let train = encode_poisson(&sample.features, &cfg.encoding, &mut rng)?;
            layer.present_learning(&train, &cfg.lif, cfg.dt(), learning)?;
        }
    }
    Ok(PhaseOneModel { layer, labels: None })
}

/// Detector activity for one sample: per-neuron rates and total spike count.
pub fn phase1_activity(
    model: &PhaseOneModel,
    features: &[f64],
    sample_id: u64,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<(Vec<f64>, u64)> {
    check_dim(model.input_dim(), features.len())?;
    let mut rng = rng_for(seed, Stream::Encode, &[KEY_P1_INFER, sample_id]);
    let train = encode_poisson(features, &cfg.encoding, &mut rng)?;
    let counts = model.layer.present_frozen(&train, &cfg.lif, cfg.dt())?;
    let total = counts.iter().map(|&c| c as u64).sum();
    Ok((rates(&counts, cfg.encoding.duration), total))
}

/// Raw features followed by detector rates.
pub fn build_phase2_input(features: &[f64], asr: &[f64], feature_dim: usize, phase1_dim: usize) -> Result<Vec<f64>> {
    check_dim(feature_dim, features.len())?;
    check_dim(phase1_dim, asr.len())?;
    let mut out = Vec::with_capacity(feature_dim + phase1_dim);
    out.extend_from_slice(features);
    out.extend_from_slice(asr);
    Ok(out)
}

pub fn label_phase1(model: &mut PhaseOneModel, labeled: &[Sample], cfg: &ModelConfig, seed: u64) -> Result<()> {
    let responses = labeled
        .iter()
        .map(|s| {
            let (asr, _) = phase1_activity(model, &s.features, s.id, cfg, seed)?;
            Ok((asr, if s.is_attack() { ATTACK } else { BENIGN }))
        })
        .collect::<Result<Vec<_>>>()?;
    model.labels = Some(assign_labels(&responses, 2)?);
    Ok(())
}

/// Detector verdict from rates. A silent detector flags the sample as an
/// attack so that nothing bypasses the classifier unexamined.
pub fn phase1_verdict(labels: &LabelMap, asr: &[f64]) -> usize {
    predict_class(labels, asr).unwrap_or(ATTACK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTwoModel {
    pub population: DynamicPopulation,
    pub labels: Option<LabelMap>,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub phase1_dim: usize,
    pub settings: PhaseTwoConfig,
    /// Completed mini-batches.
    pub batch: u64,
    /// Samples seen in the current, incomplete mini-batch.
    pub batch_fill: usize,
    pub presentations: u64,
    pub growth_events: u64,
    pub events: Vec<TopologyEvent>,
    /// `(batch, live neuron count)` after every completed mini-batch.
    pub trajectory: Vec<(u64, usize)>,
}

impl PhaseTwoModel {
    pub fn new(feature_dim: usize, phase1_dim: usize, num_classes: usize, cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let neurons = cfg.phase2_initial_neurons();
        let mut rng = rng_for(seed, Stream::Init, &[KEY_P2_TRAIN]);
        let layer = ExcitatoryLayer::random(feature_dim + phase1_dim, neurons, &cfg.lif, &cfg.plasticity, &mut rng);
        Ok(Self {
            population: DynamicPopulation::new(layer, &cfg.plasticity),
            labels: None,
            num_classes,
            feature_dim,
            phase1_dim,
            settings: cfg.phase2,
            batch: 0,
            batch_fill: 0,
            presentations: 0,
            growth_events: 0,
            events: Vec::new(),
            trajectory: vec![(0, neurons)],
        })
    }

    pub fn input_dim(&self) -> usize {
        self.feature_dim + self.phase1_dim
    }

    pub fn neurons(&self) -> usize {
        self.population.len()
    }
}

/// One Phase-2 training item: the concatenated input and its sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Input {
    pub id: u64,
    pub input: Vec<f64>,
}

/// Trains the classifier on one task's attack samples, computing detector
/// activity on the fly.
pub fn train_phase2_task(
    model: &mut PhaseTwoModel,
    phase1: &PhaseOneModel,
    stream: &[Sample],
    cfg: &ModelConfig,
    seed: u64,
) -> Result<()> {
    if stream.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let inputs = stream
        .iter()
        .map(|s| {
            if !s.is_attack() {
                return Err(Error::InvalidArgument(format!("sample {} is benign; the classifier trains on attacks only", s.id)));
            }
            let (asr, _) = phase1_activity(phase1, &s.features, s.id, cfg, seed)?;
            Ok(Phase2Input {
                id: s.id,
                input: build_phase2_input(&s.features, &asr, model.feature_dim, model.phase1_dim)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    train_phase2_inputs(model, &inputs, cfg, seed)
}

/// Per sample: present with online plasticity, pick BMU/SBMU by rate,
/// update firing factors, grow if the habituated BMU responded weakly.
/// Per completed mini-batch: advance ages and prune.
pub fn train_phase2_inputs(model: &mut PhaseTwoModel, inputs: &[Phase2Input], cfg: &ModelConfig, seed: u64) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let settings = model.settings;
    let growth = cfg.growth;
    let ones = vec![1.0; model.input_dim()];
    for _epoch in 0..settings.epochs {
        for item in inputs {
            check_dim(model.input_dim(), item.input.len())?;
            let mut rng = rng_for(seed, Stream::Encode, &[KEY_P2_TRAIN, item.id, model.presentations]);
            let train = encode_poisson(&item.input, &cfg.encoding, &mut rng)?;
            model.presentations += 1;

            let pop = &mut model.population;
            let gate = match (settings.stdp_mode, cfg.plasticity.ff_side) {
                (StdpMode::Standard, _) => Gate::Ungated,
                (StdpMode::Adaptive, FfSide::Excitatory) => Gate::Neuron(&pop.factors.f),
                (StdpMode::Adaptive, FfSide::Presynaptic) => Gate::Input(&ones),
            };
            let learning = Learning {
                cfg: &cfg.plasticity,
                gate,
            };
            let counts = pop.layer.present_learning(&train, &cfg.lif, cfg.dt(), learning)?;
            let asr = rates(&counts, cfg.encoding.duration);
            let (bmu, sbmu) = find_bmu_sbmu(&asr)?;
            if asr[bmu] > 0.0 {
                pop.factors.record_selection(bmu, sbmu, asr[bmu], asr[sbmu])?;
            }
            if settings.growth && should_grow(asr[bmu], pop.factors.f[bmu], &growth, pop.len()) {
                let mut rng = rng_for(seed, Stream::GrowthNoise, &[model.growth_events]);
                let idx = pop.grow_neuron(bmu, &growth, &cfg.plasticity, &cfg.lif, &mut rng)?;
                model.growth_events += 1;
                model.events.push(TopologyEvent {
                    batch: model.batch,
                    event: EventKind::Grow,
                    neuron_id: pop.meta[idx].id,
                });
                if let Some(labels) = &mut model.labels {
                    labels.resize(pop.len());
                }
            }

            model.batch_fill += 1;
            if model.batch_fill == growth.batch_size {
                close_batch(model, &growth);
            }
        }
    }
    Ok(())
}

fn close_batch(model: &mut PhaseTwoModel, growth: &GrowthConfig) {
    model.batch_fill = 0;
    model.population.increment_ages();
    if model.settings.pruning {
        let ids: Vec<u64> = model.population.meta.iter().map(|m| m.id).collect();
        let removed = model.population.prune(growth);
        for &j in &removed {
            model.events.push(TopologyEvent {
                batch: model.batch,
                event: EventKind::Prune,
                neuron_id: ids[j],
            });
        }
        if let Some(labels) = &mut model.labels {
            labels.remove_sorted(&removed);
        }
    }
    model.batch += 1;
    model.trajectory.push((model.batch, model.population.len()));
}

/// Classifier rates and spike count for one concatenated input.
pub fn phase2_activity(model: &PhaseTwoModel, input: &[f64], sample_id: u64, cfg: &ModelConfig, seed: u64) -> Result<(Vec<f64>, u64)> {
    check_dim(model.input_dim(), input.len())?;
    let mut rng = rng_for(seed, Stream::Encode, &[KEY_P2_INFER, sample_id]);
    let train = encode_poisson(input, &cfg.encoding, &mut rng)?;
    let counts = model.population.layer.present_frozen(&train, &cfg.lif, cfg.dt())?;
    let total = counts.iter().map(|&c| c as u64).sum();
    Ok((rates(&counts, cfg.encoding.duration), total))
}

/// Assigns attack-class labels from `(input, class)` pairs of labeled attacks.
pub fn label_phase2(model: &mut PhaseTwoModel, labeled: &[(Phase2Input, usize)], cfg: &ModelConfig, seed: u64) -> Result<()> {
    let responses = labeled
        .iter()
        .map(|(item, class)| Ok((phase2_activity(model, &item.input, item.id, cfg, seed)?.0, *class)))
        .collect::<Result<Vec<_>>>()?;
    model.labels = Some(assign_labels(&responses, model.num_classes)?);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Benign,
    /// Attack class index, or `None` when no labeled classifier neuron responded.
    Attack(Option<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub verdict: Verdict,
    pub phase1_asr: Vec<f64>,
    pub phase1_spikes: u64,
    pub phase2_spikes: u64,
    /// Classifier neurons simulated (0 when the cascade stopped at the detector).
    pub phase2_neurons: usize,
}

/// Cascaded inference: the classifier runs only when the detector flags an attack.
pub fn infer(
    phase1: &PhaseOneModel,
    phase2: &PhaseTwoModel,
    sample: &Sample,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<Prediction> {
    let p1_labels = phase1.labels.as_ref().ok_or(Error::Unlabeled)?;
    let p2_labels = phase2.labels.as_ref().ok_or(Error::Unlabeled)?;
    let (asr1, spikes1) = phase1_activity(phase1, &sample.features, sample.id, cfg, seed)?;
    if phase1_verdict(p1_labels, &asr1) == BENIGN {
        return Ok(Prediction {
            verdict: Verdict::Benign,
            phase1_asr: asr1,
            phase1_spikes: spikes1,
            phase2_spikes: 0,
            phase2_neurons: 0,
        });
    }
    let input = build_phase2_input(&sample.features, &asr1, phase2.feature_dim, phase2.phase1_dim)?;
    let (asr2, spikes2) = phase2_activity(phase2, &input, sample.id, cfg, seed)?;
    Ok(Prediction {
        verdict: Verdict::Attack(predict_class(p2_labels, &asr2)),
        phase1_asr: asr1,
        phase1_spikes: spikes1,
        phase2_spikes: spikes2,
        phase2_neurons: phase2.neurons(),
    })
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}
