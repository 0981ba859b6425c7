//! Self-contained property report: closed-form checks, randomized
//! structural checks and the synthetic two-task comparison.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::encoding::encode_poisson;
use crate::error::Result;
use crate::experiment::{run_lifelong, synthetic_workload, LifelongReport};
use crate::lif::LifParams;
use crate::network::ExcitatoryLayer;
use crate::plasticity::{
    ad_stdp_delta, apply_trace_updates, firing_factor, standard_stdp_delta, Gate, PlasticityConfig, SynapseMatrix,
    TraceState,
};
use crate::rng::{derive_seed, rng_for, Stream};
use crate::topology::{should_grow, DynamicPopulation, GrowthConfig};

const RUN_KEY: u64 = 0x0072_756e;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub cases: u64,
    pub max_error: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub oracle_accuracy: f64,
    pub phase1_accuracy: f64,
    pub dynamic_task1_recall: f64,
    pub static_task1_recall: f64,
    pub dynamic_forgetting: f64,
    pub static_forgetting: f64,
    pub dynamic_neurons_after_task: Vec<usize>,
    pub dynamic_peak_neurons: Vec<usize>,
    pub dynamic_grown: Vec<u64>,
    pub static_neurons_after_task: Vec<usize>,
    pub dynamic_overall_accuracy: f64,
    pub static_overall_accuracy: f64,
    pub phase1_sparsity: f64,
    pub dynamic_phase2_sparsity: f64,
    pub static_phase2_sparsity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub runs: Vec<RunSummary>,
}

/// Seed of synthetic repetition `run` under `master`.
pub fn run_seed(master: u64, run: usize) -> u64 {
    derive_seed(master, &[RUN_KEY, run as u64])
}

pub fn synth_verify(cfg: &ExperimentConfig, seed: u64) -> Result<VerifyReport> {
    cfg.validate()?;
    let mut checks = vec![
        formula_grid(&cfg.plasticity),
        trace_pairwise(&cfg.plasticity),
        growth_rule(seed),
        prune_rule(seed),
        encoding_rate(cfg, seed)?,
    ];

    let runs = (0..cfg.synth.runs)
        .into_par_iter()
        .map(|r| {
            let s = run_seed(seed, r);
            let synth = synthetic_workload(&cfg.synth, s)?;
            let run = run_lifelong(&synth.workload, cfg, s)?;
            Ok(summarize(r, s, synth.oracle_accuracy, &run.report))
        })
        .collect::<Result<Vec<_>>>()?;
    checks.extend(lifelong_checks(&runs, cfg));

    Ok(VerifyReport {
        seed,
        passed: checks.iter().all(|c| c.passed),
        checks,
        runs,
    })
}

fn summarize(run: usize, seed: u64, oracle_accuracy: f64, r: &LifelongReport) -> RunSummary {
    let (d, s) = (&r.dynamic, &r.static_twin);
    RunSummary {
        run,
        seed,
        oracle_accuracy,
        phase1_accuracy: d.eval.phase1_accuracy,
        dynamic_task1_recall: d.task1_recall,
        static_task1_recall: s.task1_recall,
        dynamic_forgetting: d.mean_forgetting,
        static_forgetting: s.mean_forgetting,
        dynamic_neurons_after_task: d.tasks.iter().map(|t| t.neurons_after).collect(),
        dynamic_peak_neurons: d.tasks.iter().map(|t| t.peak_neurons).collect(),
        dynamic_grown: d.tasks.iter().map(|t| t.grown).collect(),
        static_neurons_after_task: s.tasks.iter().map(|t| t.neurons_after).collect(),
        dynamic_overall_accuracy: d.eval.overall_accuracy,
        static_overall_accuracy: s.eval.overall_accuracy,
        phase1_sparsity: d.eval.phase1_sparsity,
        dynamic_phase2_sparsity: d.eval.phase2_sparsity,
        static_phase2_sparsity: s.eval.phase2_sparsity,
    }
}

fn check(name: &str, passed: bool, cases: u64, max_error: Option<f64>, detail: String) -> Check {
    Check {
        name: name.to_string(),
        passed,
        cases,
        max_error,
        detail,
    }
}

fn formula_grid(cfg: &PlasticityConfig) -> Check {
    let mut worst: f64 = 0.0;
    let mut cases = 0u64;
    for &alpha in &[0.25f64, 0.5, 1.0, 2.0, 4.0] {
        for &tau in &[1.0, 5.0, 10.0, 50.0] {
            for &n in &[0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 100.0, 1e3, 1e6] {
                let reference = 1.0 + (-(alpha * n) / tau).exp_m1() / alpha;
                let got = firing_factor(n, alpha, tau).unwrap_or(f64::NAN);
                worst = worst.max((got - reference).abs());
                cases += 1;
            }
            // Asymptote after unbounded habituation.
            let got = firing_factor(1e12, alpha, tau).unwrap_or(f64::NAN);
            worst = worst.max((got - (1.0 - 1.0 / alpha)).abs());
            cases += 1;
        }
    }
    for &f in &[0.0, 0.1, 0.25, 0.37, 0.5, 0.8, 1.0] {
        for k in -60..=60 {
            let dt = k as f64 * 0.5;
            let (amp, tau) = if dt >= 0.0 {
                (cfg.a_plus, cfg.tau_pre)
            } else {
                (cfg.a_minus, cfg.tau_post)
            };
            let reference = amp * f * (-dt.abs() / tau).exp();
            worst = worst.max((ad_stdp_delta(dt, f, cfg) - reference).abs());
            if f == 1.0 {
                worst = worst.max((standard_stdp_delta(dt, cfg) - reference).abs());
                cases += 1;
            }
            cases += 1;
        }
    }
    check(
        "formula_grid",
        worst <= 1e-9 && worst.is_finite() && cases >= 1000,
        cases,
        Some(worst),
        "firing factor and STDP windows against scalar closed forms".into(),
    )
}

fn trace_pairwise(cfg: &PlasticityConfig) -> Check {
    let cfg = PlasticityConfig {
        w_min: -1.0,
        w_max: 2.0,
        ..*cfg
    };
    let mut worst: f64 = 0.0;
    for k in 1..=100u32 {
        for pre_first in [true, false] {
            let mut w = SynapseMatrix::filled(1, 1, 0.5);
            let mut traces = TraceState::new(1, 1);
            let (first, second): (&[u32], &[usize]) = (&[0], &[0]);
            let result = if pre_first {
                apply_trace_updates(&mut w, first, &[], &mut traces, 0, 1.0, Gate::Ungated, &cfg)
                    .and_then(|_| apply_trace_updates(&mut w, &[], second, &mut traces, k, 1.0, Gate::Ungated, &cfg))
            } else {
                apply_trace_updates(&mut w, &[], second, &mut traces, 0, 1.0, Gate::Ungated, &cfg)
                    .and_then(|_| apply_trace_updates(&mut w, first, &[], &mut traces, k, 1.0, Gate::Ungated, &cfg))
            };
            let dt = if pre_first { k as f64 } else { -(k as f64) };
            let err = match result {
                Ok(()) => {
                    let reference = if dt >= 0.0 {
                        cfg.a_plus * (-dt / cfg.tau_pre).exp()
                    } else {
                        cfg.a_minus * (dt / cfg.tau_post).exp()
                    };
                    (w.get(0, 0) - 0.5 - reference).abs()
                }
                Err(_) => f64::INFINITY,
            };
            worst = worst.max(err);
        }
    }
    check(
        "trace_pairwise",
        worst <= 1e-12,
        200,
        Some(worst),
        "online trace update vs pairwise window, offsets 1..=100 both orders".into(),
    )
}

fn growth_rule(seed: u64) -> Check {
    let mut rng = rng_for(seed, Stream::Synth, &[0x67]);
    let cases = 10_000u64;
    let mut failures = 0u64;
    for _ in 0..cases {
        let g = GrowthConfig {
            a_th: rng.random_range(0.0..0.2),
            f_th: rng.random_range(0.0..0.8),
            max_neurons: rng.random_range(2..50),
            ..GrowthConfig::default()
        };
        let asr = rng.random_range(0.0..0.3);
        let f = rng.random_range(0.0..1.0);
        let count = rng.random_range(0..60);
        let expected = asr < g.a_th && f < g.f_th && count < g.max_neurons;
        failures += u64::from(should_grow(asr, f, &g, count) != expected);
    }
    check("growth_rule", failures == 0, cases, None, format!("{failures} mismatches"))
}

fn prune_rule(seed: u64) -> Check {
    let mut rng = rng_for(seed, Stream::Synth, &[0x70]);
    let cases = 10_000u64;
    let lif = LifParams::default();
    let plasticity = PlasticityConfig::default();
    let mut failures = 0u64;
    for _ in 0..cases {
        let n = rng.random_range(2..9);
        let g = GrowthConfig {
            age_max: rng.random_range(0..6),
            p_th: rng.random_range(0.5..0.95),
            f_th: 0.1,
            ..GrowthConfig::default()
        };
        let layer = ExcitatoryLayer::random(3, n, &lif, &plasticity, &mut rng);
        let mut pop = DynamicPopulation::new(layer, &plasticity);
        for j in 0..n {
            pop.meta[j].age = rng.random_range(0..10);
            pop.factors.f[j] = rng.random_range(0.0..1.0);
            pop.layer.state.theta[j] = rng.random_range(0.0..1.0);
        }
        let mut offenders: Vec<usize> = (0..n)
            .filter(|&j| pop.meta[j].age > g.age_max && pop.factors.f[j] > g.p_th)
            .collect();
        while n - offenders.len() < 2 {
            // Spare the oldest offender, lowest index first among equals.
            let keep = *offenders
                .iter()
                .max_by(|&&a, &&b| pop.meta[a].age.cmp(&pop.meta[b].age).then(b.cmp(&a)))
                .expect("offenders");
            offenders.retain(|&j| j != keep);
        }
        let survivors: Vec<usize> = (0..n).filter(|j| !offenders.contains(j)).collect();
        let before = pop.clone();
        let removed = pop.prune(&g);
        let mut ok = removed == offenders && pop.len() == survivors.len() && pop.len() >= 2;
        if ok {
            for (k, &j) in survivors.iter().enumerate() {
                ok &= pop.layer.weights.row(k) == before.layer.weights.row(j)
                    && pop.factors.f[k].to_bits() == before.factors.f[j].to_bits()
                    && pop.meta[k] == before.meta[j]
                    && pop.layer.state.theta[k].to_bits() == before.layer.state.theta[j].to_bits();
            }
        }
        failures += u64::from(!ok);
    }
    check(
        "prune_rule",
        failures == 0,
        cases,
        None,
        format!("{failures} mismatches against the brute-force rule with survivor state compared bitwise"),
    )
}

fn encoding_rate(cfg: &ExperimentConfig, seed: u64) -> Result<Check> {
    let trials = 10_000u64;
    let enc = cfg.encoding;
    let p = enc.max_step_probability();
    let n = enc.duration as f64;
    let mut total = 0u64;
    for k in 0..trials {
        let mut rng = rng_for(seed, Stream::Encode, &[0x76, k]);
        total += encode_poisson(&[1.0], &enc, &mut rng)?.len() as u64;
    }
    let mean = total as f64 / trials as f64;
    let sigma = (n * p * (1.0 - p) / trials as f64).sqrt();
    let err = (mean - n * p).abs();
    Ok(check(
        "encoding_rate",
        err <= 3.0 * sigma,
        trials,
        Some(err),
        format!("mean count {mean:.4} vs expected {:.4} (3 sigma = {:.4})", n * p, 3.0 * sigma),
    ))
}

fn lifelong_checks(runs: &[RunSummary], cfg: &ExperimentConfig) -> Vec<Check> {
    let n = runs.len() as u64;
    let mean = |f: &dyn Fn(&RunSummary) -> f64| runs.iter().map(f).sum::<f64>() / runs.len() as f64;

    let separable = runs.iter().all(|r| r.oracle_accuracy >= 0.99);
    let grows = runs.iter().all(|r| {
        (1..r.dynamic_peak_neurons.len()).all(|t| {
            r.dynamic_grown[t] > 0 && r.dynamic_peak_neurons[t] > r.dynamic_neurons_after_task[t - 1]
        }) && r.dynamic_peak_neurons.iter().all(|&p| p <= cfg.growth.max_neurons)
    });
    let at_least = runs
        .iter()
        .filter(|r| r.dynamic_task1_recall >= r.static_task1_recall)
        .count();
    let needed = (runs.len() * 4).div_ceil(5);
    let mean_recall = mean(&|r| r.dynamic_task1_recall);
    let (fd, fs) = (mean(&|r| r.dynamic_forgetting), mean(&|r| r.static_forgetting));
    let static_fixed = runs
        .iter()
        .all(|r| r.static_neurons_after_task.iter().all(|&c| c == r.static_neurons_after_task[0]));
    let worst_sparsity = runs
        .iter()
        .flat_map(|r| [r.phase1_sparsity, r.dynamic_phase2_sparsity, r.static_phase2_sparsity])
        .fold(0.0, f64::max);

    vec![
        check(
            "separability_oracle",
            separable,
            n,
            None,
            format!("min nearest-centroid accuracy {:.4}", runs.iter().map(|r| r.oracle_accuracy).fold(1.0, f64::min)),
        ),
        check(
            "growth_on_novelty",
            grows,
            n,
            None,
            "dynamic population grows during every later task and stays within the cap".into(),
        ),
        check(
            "task1_recall_vs_static",
            at_least >= needed && mean_recall >= 0.6,
            n,
            None,
            format!("dynamic >= static in {at_least}/{} runs; mean dynamic task-1 recall {mean_recall:.4}", runs.len()),
        ),
        check(
            "forgetting_vs_static",
            fd <= fs,
            n,
            None,
            format!("mean forgetting dynamic {fd:.4}, static {fs:.4}"),
        ),
        check(
            "static_size_fixed",
            static_fixed,
            n,
            None,
            "baseline population constant across tasks".into(),
        ),
        check(
            "inference_sparsity",
            worst_sparsity < 0.01,
            n,
            Some(worst_sparsity),
            "largest per-phase spikes per neuron per step across runs".into(),
        ),
    ]
}
