use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::hierarchy::{PhaseOneModel, PhaseTwoModel};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Where the evaluation data for a checkpoint comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Cache { dir: PathBuf },
    Synthetic { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub source: DataSource,
    pub class_names: Vec<String>,
    pub phase1: PhaseOneModel,
    pub dynamic: PhaseTwoModel,
    #[serde(rename = "static")]
    pub static_twin: PhaseTwoModel,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let bytes = std::fs::read(path)?;
        let mut ck: Self = serde_json::from_slice(&bytes)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{}: version {} (expected {CHECKPOINT_VERSION})",
                path.display(),
                ck.version
            )));
        }
        ck.check()?;
        ck.phase1.layer.ensure_traces();
        ck.dynamic.population.layer.ensure_traces();
        ck.static_twin.population.layer.ensure_traces();
        Ok(ck)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Checkpoint(m));
        if self.phase1.labels.is_none() || self.dynamic.labels.is_none() || self.static_twin.labels.is_none() {
            return bad("unlabeled model".into());
        }
        for (name, m) in [("dynamic", &self.dynamic), ("static", &self.static_twin)] {
            let w = &m.population.layer.weights;
            if w.inputs() != m.input_dim() || m.phase1_dim != self.phase1.neurons() {
                return bad(format!("{name}: input dimension mismatch"));
            }
            if w.as_slice().len() != w.inputs() * w.neurons()
                || m.population.layer.state.len() != w.neurons()
                || m.population.factors.len() != w.neurons()
                || m.population.meta.len() != w.neurons()
                || m.labels.as_ref().is_some_and(|l| l.labels.len() != w.neurons())
            {
                return bad(format!("{name}: inconsistent neuron count"));
            }
            if m.num_classes != self.class_names.len() {
                return bad(format!("{name}: class count mismatch"));
            }
        }
        let w = &self.phase1.layer.weights;
        if w.as_slice().len() != w.inputs() * w.neurons() || self.phase1.layer.state.len() != w.neurons() {
            return bad("phase1: inconsistent neuron count".into());
        }
        Ok(())
    }
}
