//! Two-phase spiking network for lifelong intrusion detection: a static
//! detector separates benign from attack traffic, and a growing classifier
//! assigns attack types while adding and removing neurons as tasks arrive.

// Negated comparisons deliberately reject NaN parameters.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod hierarchy;
pub mod labeling;
pub mod lif;
pub mod metrics;
pub mod network;
pub mod plasticity;
pub mod rng;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
