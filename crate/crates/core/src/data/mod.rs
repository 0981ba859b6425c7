//! Dataset ingestion, preprocessing, splits and task streams.

mod split;
mod synth;
mod tasks;
mod unsw;

use serde::{Deserialize, Serialize};

pub use split::{split_8_1_1, DatasetSplit};
pub use synth::{block_centroids, nearest_centroid_accuracy, synth_generate, ClusterSpec};
pub use tasks::{make_tasks, TaskSpec, TaskStream};
pub use unsw::{
    load_csv, preprocess, select_by_variance, write_records, ColumnKind, ColumnSpec, CsvSchema, Field, FlowRecord,
    LoadReport, Preprocessed, Preprocessor, UNSW_FEATURES,
};

/// A scaled feature row with its attack class (`None` for benign traffic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<f64>,
    pub attack: Option<usize>,
}

impl Sample {
    pub fn is_attack(&self) -> bool {
        self.attack.is_some()
    }
}
