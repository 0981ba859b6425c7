//! Experiment configuration: one TOML file covering every tunable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::CsvSchema;
use crate::encoding::EncodingConfig;
use crate::error::{Error, Result};
use crate::hierarchy::{ModelConfig, PhaseOneConfig, PhaseTwoConfig};
use crate::lif::LifParams;
use crate::plasticity::{PlasticityConfig, StdpMode};
use crate::topology::GrowthConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub threads: usize,
    pub output_dir: PathBuf,
    pub labeling: LabelingConfig,
    pub encoding: EncodingConfig,
    pub lif: LifParams,
    pub plasticity: PlasticityConfig,
    pub growth: GrowthConfig,
    pub phase1: PhaseOneConfig,
    pub phase2: PhaseTwoConfig,
    /// Phase-2 settings of the fixed-size baseline twin.
    pub static_override: StaticOverride,
    pub data: DataConfig,
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            threads: 1,
            output_dir: PathBuf::from("out"),
            labeling: LabelingConfig::default(),
            encoding: EncodingConfig::default(),
            lif: LifParams::default(),
            plasticity: PlasticityConfig::default(),
            growth: GrowthConfig::default(),
            phase1: PhaseOneConfig::default(),
            phase2: PhaseTwoConfig::default(),
            static_override: StaticOverride::default(),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingConfig {
    /// Share of each training class whose labels the readout may use.
    pub labeled_fraction: f64,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        Self { labeled_fraction: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticOverride {
    pub stdp_mode: StdpMode,
    pub growth: bool,
    pub pruning: bool,
    pub neurons: Option<usize>,
}

impl Default for StaticOverride {
    fn default() -> Self {
        Self {
            stdp_mode: StdpMode::Standard,
            growth: false,
            pruning: false,
            neurons: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub csv: Vec<PathBuf>,
    pub cache_dir: PathBuf,
    /// Retained feature names; empty selects `variance_features` columns by
    /// variance instead.
    pub features: Vec<String>,
    pub variance_features: usize,
    pub benign_category: String,
    pub excluded: Vec<String>,
    /// Attack categories introduced by each task, in order.
    pub tasks: Vec<Vec<String>>,
    pub schema: CsvSchema,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        Self {
            csv: Vec::new(),
            cache_dir: PathBuf::from("cache"),
            features: s(&crate::data::UNSW_FEATURES),
            variance_features: 42,
            benign_category: "Normal".into(),
            excluded: s(&["Worms", "Shellcode", "Analysis"]),
            tasks: vec![
                s(&["DoS", "Reconnaissance"]),
                s(&["Backdoor", "Generic"]),
                s(&["Exploits", "Fuzzers"]),
            ],
            schema: CsvSchema::default(),
        }
    }
}

/// Block-structured Gaussian clusters: one benign cluster plus
/// `tasks * classes_per_task` attack clusters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dim: usize,
    pub tasks: usize,
    pub classes_per_task: usize,
    pub benign_count: usize,
    pub class_count: usize,
    pub spread: f64,
    pub high: f64,
    pub low: f64,
    /// Independent repetitions in `synth-verify`.
    pub runs: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dim: 42,
            tasks: 2,
            classes_per_task: 2,
            benign_count: 400,
            class_count: 200,
            spread: 0.05,
            high: 0.9,
            low: 0.05,
            runs: 5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let classes = 1 + self.tasks * self.classes_per_task;
        if self.tasks == 0 || self.classes_per_task == 0 {
            return Err(Error::Config("synth needs at least one task and one class per task".into()));
        }
        if self.dim < classes {
            return Err(Error::Config(format!("synth.dim must be at least {classes}")));
        }
        if self.benign_count < 10 || self.class_count < 10 {
            return Err(Error::Config("synth counts must be at least 10 per class".into()));
        }
        if !(self.spread >= 0.0) {
            return Err(Error::Config("synth.spread must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.high) || !(0.0..=1.0).contains(&self.low) {
            return Err(Error::Config("synth.high and synth.low must lie in [0, 1]".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("synth.runs must be positive".into()));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Full TOML with every default written out.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model().validate()?;
        self.static_model().validate()?;
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        let f = self.labeling.labeled_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config("labeling.labeled_fraction must lie in (0, 1]".into()));
        }
        if self.data.tasks.is_empty() || self.data.tasks.iter().any(|t| t.is_empty()) {
            return Err(Error::Config("data.tasks needs at least one non-empty group".into()));
        }
        self.synth.validate()
    }

    pub fn model(&self) -> ModelConfig {
        ModelConfig {
            encoding: self.encoding,
            lif: self.lif,
            plasticity: self.plasticity,
            growth: self.growth,
            phase1: self.phase1,
            phase2: self.phase2,
        }
    }

    /// The baseline twin: identical except for the Phase-2 override block.
    pub fn static_model(&self) -> ModelConfig {
        let o = self.static_override;
        ModelConfig {
            phase2: PhaseTwoConfig {
                stdp_mode: o.stdp_mode,
                growth: o.growth,
                pruning: o.pruning,
                neurons: o.neurons.or(Some(self.growth.init_neurons)),
                epochs: self.phase2.epochs,
            },
            ..self.model()
        }
    }
}
