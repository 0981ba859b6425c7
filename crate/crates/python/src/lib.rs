//! Python bindings for the dsnn engine.

use std::path::PathBuf;

use dsnn_core::checkpoint::{Checkpoint, DataSource, CHECKPOINT_VERSION};
use dsnn_core::config::ExperimentConfig;
use dsnn_core::data::Sample;
use dsnn_core::experiment::{run_lifelong, synthetic_workload, with_threads, LifelongReport, Workload};
use dsnn_core::hierarchy::{infer, Verdict};
use dsnn_core::rng::{rng_for, Stream};
use dsnn_core::{cli, metrics, plasticity, verify, Error};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    if e.is_validation() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Full experiment configuration, built from TOML text or the defaults.
#[pyclass(name = "Config")]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(text) => ExperimentConfig::from_toml(text).map_err(py_err)?,
            None => ExperimentConfig::default(),
        };
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::load(&path).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(py_err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn threads(&self) -> usize {
        self.inner.threads
    }

    #[setter]
    fn set_threads(&mut self, threads: usize) -> PyResult<()> {
        if threads == 0 {
            return Err(PyValueError::new_err("threads must be at least 1"));
        }
        self.inner.threads = threads;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!("Config(seed={}, threads={})", self.inner.seed, self.inner.threads)
    }
}

fn config_or_default(config: Option<&PyConfig>) -> ExperimentConfig {
    config.map_or_else(ExperimentConfig::default, |c| c.inner.clone())
}

/// Habituation gate after `n` selections.
#[pyfunction]
fn firing_factor(n: f64, alpha: f64, tau_ff: f64) -> PyResult<f64> {
    plasticity::firing_factor(n, alpha, tau_ff).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (delta_t, f, config = None))]
fn ad_stdp_delta(delta_t: f64, f: f64, config: Option<&PyConfig>) -> f64 {
    plasticity::ad_stdp_delta(delta_t, f, &config_or_default(config).plasticity)
}

#[pyfunction]
#[pyo3(signature = (delta_t, config = None))]
fn standard_stdp_delta(delta_t: f64, config: Option<&PyConfig>) -> f64 {
    plasticity::standard_stdp_delta(delta_t, &config_or_default(config).plasticity)
}

#[pyfunction]
fn overall_accuracy(a1_benign: f64, a1_attack: f64, a2: f64, p_benign: f64, p_attack: f64) -> PyResult<f64> {
    metrics::overall_accuracy(a1_benign, a1_attack, a2, p_benign, p_attack).map_err(py_err)
}

/// Poisson spike train for features in [0, 1]: one list of spiking
/// channels per timestep.
#[pyfunction]
#[pyo3(signature = (features, seed, config = None))]
fn encode_poisson(features: Vec<f64>, seed: u64, config: Option<&PyConfig>) -> PyResult<Vec<Vec<u32>>> {
    let cfg = config_or_default(config);
    let mut rng = rng_for(seed, Stream::Encode, &[]);
    let train = dsnn_core::encoding::encode_poisson(&features, &cfg.encoding, &mut rng).map_err(py_err)?;
    Ok((0..train.duration()).map(|t| train.at(t).to_vec()).collect())
}

/// Property checks plus the synthetic two-task comparison, as JSON.
#[pyfunction]
#[pyo3(signature = (config = None, seed = None))]
fn synth_verify(py: Python<'_>, config: Option<&PyConfig>, seed: Option<u64>) -> PyResult<String> {
    let cfg = config_or_default(config);
    let seed = seed.unwrap_or(cfg.seed);
    let report = py
        .detach(|| with_threads(cfg.threads, || verify::synth_verify(&cfg, seed)))
        .map_err(py_err)?
        .map_err(py_err)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Trained detector, dynamic classifier and static twin.
#[pyclass(name = "Model")]
struct PyModel {
    checkpoint: Checkpoint,
    report: Option<LifelongReport>,
}

fn train(cfg: ExperimentConfig, workload: Workload, source: DataSource) -> Result<PyModel, Error> {
    let seed = cfg.seed;
    let run = with_threads(cfg.threads, || run_lifelong(&workload, &cfg, seed))??;
    Ok(PyModel {
        checkpoint: Checkpoint {
            version: CHECKPOINT_VERSION,
            seed,
            config: cfg,
            source,
            class_names: workload.class_names,
            phase1: run.phase1,
            dynamic: run.dynamic,
            static_twin: run.static_twin,
        },
        report: Some(run.report),
    })
}

#[pymethods]
impl PyModel {
    /// Runs the lifelong protocol on the generated cluster workload.
    #[staticmethod]
    #[pyo3(signature = (config = None, seed = None))]
    fn train_synthetic(py: Python<'_>, config: Option<&PyConfig>, seed: Option<u64>) -> PyResult<Self> {
        let mut cfg = config_or_default(config);
        if let Some(s) = seed {
            cfg.seed = s;
        }
        py.detach(|| {
            let seed = cfg.seed;
            let workload = synthetic_workload(&cfg.synth, seed)?.workload;
            train(cfg, workload, DataSource::Synthetic { seed })
        })
        .map_err(py_err)
    }

    /// Runs the lifelong protocol on a cache written by `preprocess`.
    #[staticmethod]
    fn train_cache(py: Python<'_>, config: &PyConfig) -> PyResult<Self> {
        let cfg = config.inner.clone();
        py.detach(|| {
            let dir = cfg.data.cache_dir.clone();
            let workload = cli::load_cache_workload(&cfg, &dir)?;
            train(cfg, workload, DataSource::Cache { dir })
        })
        .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            checkpoint: Checkpoint::load(&path).map_err(py_err)?,
            report: None,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.checkpoint.save(&path).map_err(py_err)
    }

    /// Training report as JSON; `None` for a model loaded from disk.
    fn report_json(&self) -> PyResult<Option<String>> {
        self.report
            .as_ref()
            .map(|r| serde_json::to_string_pretty(r).map_err(|e| PyRuntimeError::new_err(e.to_string())))
            .transpose()
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.checkpoint.class_names.clone()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.checkpoint.dynamic.feature_dim
    }

    /// Phase-2 population sizes `(dynamic, static)`.
    #[getter]
    fn neurons(&self) -> (usize, usize) {
        (self.checkpoint.dynamic.neurons(), self.checkpoint.static_twin.neurons())
    }

    /// Cascaded prediction for one scaled feature row. Returns
    /// `("benign", None)`, `("attack", class_name)` or `("attack", None)`
    /// when no classifier neuron responded.
    #[pyo3(signature = (features, sample_id = 0, variant = "dynamic"))]
    fn predict(&self, features: Vec<f64>, sample_id: u64, variant: &str) -> PyResult<(String, Option<String>)> {
        let ck = &self.checkpoint;
        let (model, cfg) = match variant {
            "dynamic" => (&ck.dynamic, ck.config.model()),
            "static" => (&ck.static_twin, ck.config.static_model()),
            other => return Err(PyValueError::new_err(format!("unknown variant {other:?}"))),
        };
        let sample = Sample {
            id: sample_id,
            features,
            attack: None,
        };
        let p = infer(&ck.phase1, model, &sample, &cfg, ck.seed).map_err(py_err)?;
        Ok(match p.verdict {
            Verdict::Benign => ("benign".into(), None),
            Verdict::Attack(c) => ("attack".into(), c.map(|c| ck.class_names[c].clone())),
        })
    }

    fn __repr__(&self) -> String {
        let (d, s) = self.neurons();
        format!("Model(classes={}, dynamic_neurons={d}, static_neurons={s})", self.checkpoint.class_names.len())
    }
}

#[pymodule]
fn dsnn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(firing_factor, m)?)?;
    m.add_function(wrap_pyfunction!(ad_stdp_delta, m)?)?;
    m.add_function(wrap_pyfunction!(standard_stdp_delta, m)?)?;
    m.add_function(wrap_pyfunction!(overall_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(encode_poisson, m)?)?;
    m.add_function(wrap_pyfunction!(synth_verify, m)?)?;
    Ok(())
}
