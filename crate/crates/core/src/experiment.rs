//! Lifelong protocol: Phase 1 once, Phase 2 task by task, with a
//! fixed-size standard-STDP twin trained on the same stream.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SynthConfig};
use crate::data::{block_centroids, make_tasks, nearest_centroid_accuracy, split_8_1_1, synth_generate, ClusterSpec, Sample};
use crate::error::{Error, Result};
use crate::hierarchy::{
    build_phase2_input, label_phase1, label_phase2, phase1_activity, phase1_verdict, phase2_activity, train_phase1,
    train_phase2_inputs, ModelConfig, Phase2Input, PhaseOneModel, PhaseTwoModel, ATTACK,
};
use crate::labeling::predict_class;
use crate::metrics::{forgetting_matrix, overall_accuracy, Confusion, SpikeTally};
use crate::rng::{rng_for, sub_seed, Stream};
use crate::topology::{EventKind, TopologyEvent};

/// Train and test samples with the task each attack class belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct Workload {
    /// Attack class names; a sample's `attack` indexes this list.
    pub class_names: Vec<String>,
    /// Attack class indices introduced by each task.
    pub tasks: Vec<Vec<usize>>,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Per task, indices into `train` of its benign slice.
    pub task_benign: Vec<Vec<usize>>,
}

impl Workload {
    /// Builds a workload from labeled rows and a split. Rows whose category is
    /// neither benign nor in a task group are dropped.
    #[allow(clippy::too_many_arguments)]
    pub fn from_rows(
        features: &[Vec<f64>],
        categories: &[String],
        ids: &[u64],
        train_idx: &[usize],
        test_idx: &[usize],
        groups: &[Vec<String>],
        benign: &str,
        excluded: &[String],
    ) -> Result<Self> {
        let class_names: Vec<String> = groups.iter().flatten().cloned().collect();
        let class_of = |cat: &str| class_names.iter().position(|c| c == cat);
        let train_cats: Vec<&str> = train_idx.iter().map(|&i| categories[i].as_str()).collect();
        let streams = make_tasks(&train_cats, groups, benign, excluded)?;

        let make = |i: usize| Sample {
            id: ids[i],
            features: features[i].clone(),
            attack: class_of(&categories[i]),
        };
        let keep = |i: usize| categories[i] == benign || class_of(&categories[i]).is_some();
        // Keep train positions stable so task benign slices index `train`.
        let mut train = Vec::new();
        let mut position = vec![usize::MAX; train_idx.len()];
        for (k, &i) in train_idx.iter().enumerate() {
            if keep(i) {
                position[k] = train.len();
                train.push(make(i));
            }
        }
        let test = test_idx.iter().copied().filter(|&i| keep(i)).map(make).collect();
        let tasks = groups
            .iter()
            .map(|g| g.iter().map(|c| class_of(c).expect("grouped")).collect())
            .collect();
        let task_benign = streams
            .iter()
            .map(|s| s.benign.iter().map(|&k| position[k]).collect())
            .collect();
        let w = Self {
            class_names,
            tasks,
            train,
            test,
            task_benign,
        };
        for (t, classes) in w.tasks.iter().enumerate() {
            if !w.train.iter().any(|s| s.attack.is_some_and(|c| classes.contains(&c))) {
                return Err(Error::InvalidArgument(format!("task {t} has no training attacks")));
            }
        }
        Ok(w)
    }

    pub fn feature_dim(&self) -> usize {
        self.train.first().map_or(0, |s| s.features.len())
    }

    pub fn task_of(&self, class: usize) -> Option<usize> {
        self.tasks.iter().position(|t| t.contains(&class))
    }

    fn attacks_of_task<'a>(&self, samples: &'a [Sample], t: usize) -> Vec<&'a Sample> {
        samples
            .iter()
            .filter(|s| s.attack.is_some_and(|c| self.tasks[t].contains(&c)))
            .collect()
    }
}

/// Generated workload plus the nearest-centroid accuracy certifying that
/// its classes are separable.
#[derive(Debug, Clone)]
pub struct SynthWorkload {
    pub workload: Workload,
    pub oracle_accuracy: f64,
}

pub fn synthetic_workload(cfg: &SynthConfig, seed: u64) -> Result<SynthWorkload> {
    cfg.validate()?;
    let attacks = cfg.tasks * cfg.classes_per_task;
    let centroids = block_centroids(cfg.dim, attacks + 1, cfg.high, cfg.low);
    let names: Vec<String> = std::iter::once("benign".to_string())
        .chain((0..attacks).map(|k| format!("attack_{k}")))
        .collect();
    let clusters: Vec<ClusterSpec> = centroids
        .iter()
        .enumerate()
        .map(|(k, c)| ClusterSpec {
            centroid: c.clone(),
            spread: cfg.spread,
            class: k,
            count: if k == 0 { cfg.benign_count } else { cfg.class_count },
        })
        .collect();
    let points = synth_generate(&clusters, sub_seed(seed, Stream::Synth))?;
    let labeled: Vec<(Vec<f64>, usize)> = centroids.iter().cloned().zip(0..).collect();
    let oracle_accuracy = nearest_centroid_accuracy(&points, &labeled);

    let categories: Vec<String> = points.iter().map(|(_, k)| names[*k].clone()).collect();
    let features: Vec<Vec<f64>> = points.into_iter().map(|(x, _)| x).collect();
    let ids: Vec<u64> = (0..features.len() as u64).collect();
    let split = split_8_1_1(&categories, sub_seed(seed, Stream::Split))?;
    let groups: Vec<Vec<String>> = (0..cfg.tasks)
        .map(|t| names[1 + t * cfg.classes_per_task..1 + (t + 1) * cfg.classes_per_task].to_vec())
        .collect();
    let workload = Workload::from_rows(&features, &categories, &ids, &split.train, &split.test, &groups, "benign", &[])?;
    Ok(SynthWorkload {
        workload,
        oracle_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub benign_proportion: f64,
    pub attack_proportion: f64,
    /// Detector accuracy on benign-vs-attack.
    pub phase1_accuracy: f64,
    pub phase1_benign_accuracy: f64,
    pub phase1_attack_accuracy: f64,
    /// Classifier accuracy on test attacks with detector activity always forwarded.
    pub phase2_accuracy: f64,
    pub overall_accuracy: f64,
    /// Fraction of samples whose cascade output is exactly right.
    pub cascade_accuracy: f64,
    pub phase1_sparsity: f64,
    pub phase2_sparsity: f64,
    pub phase1_tally: SpikeTally,
    pub phase2_tally: SpikeTally,
    pub phase1_neurons: usize,
    pub phase2_neurons: usize,
    pub confusion: Confusion,
    pub per_class: Vec<ClassMetrics>,
}

struct SampleOutcome {
    actual: usize,
    predicted: usize,
    detected: bool,
    phase2_correct: Option<bool>,
    p1: SpikeTally,
    p2: SpikeTally,
}

/// Cascaded evaluation over `samples`. Phase-2 spikes are counted only for
/// samples the detector forwards.
pub fn evaluate(
    phase1: &PhaseOneModel,
    phase2: &PhaseTwoModel,
    samples: &[Sample],
    class_names: &[String],
    cfg: &ModelConfig,
    seed: u64,
) -> Result<EvalReport> {
    let p1_labels = phase1.labels.as_ref().ok_or(Error::Unlabeled)?;
    let p2_labels = phase2.labels.as_ref().ok_or(Error::Unlabeled)?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let steps = cfg.encoding.duration;
    let unknown = class_names.len() + 1;
    let outcomes = samples
        .par_iter()
        .map(|s| {
            let (asr1, spikes1) = phase1_activity(phase1, &s.features, s.id, cfg, seed)?;
            let mut p1 = SpikeTally::default();
            p1.add(spikes1, phase1.neurons(), steps);
            let detected = phase1_verdict(p1_labels, &asr1) == ATTACK;
            let mut p2 = SpikeTally::default();
            let mut phase2_class = None;
            if detected || s.is_attack() {
                let input = build_phase2_input(&s.features, &asr1, phase2.feature_dim, phase2.phase1_dim)?;
                let (asr2, spikes2) = phase2_activity(phase2, &input, s.id, cfg, seed)?;
                if detected {
                    p2.add(spikes2, phase2.neurons(), steps);
                }
                phase2_class = Some(predict_class(p2_labels, &asr2));
            }
            let predicted = match (detected, phase2_class) {
                (false, _) => 0,
                (true, Some(Some(c))) => c + 1,
                (true, _) => unknown,
            };
            Ok(SampleOutcome {
                actual: s.attack.map_or(0, |c| c + 1),
                predicted,
                detected,
                phase2_correct: s.attack.map(|c| phase2_class == Some(Some(c))),
                p1,
                p2,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut names = vec!["benign".to_string()];
    names.extend(class_names.iter().cloned());
    names.push("unknown".to_string());
    let mut confusion = Confusion::new(names);
    let (mut p1_tally, mut p2_tally) = (SpikeTally::default(), SpikeTally::default());
    let (mut benign, mut benign_ok, mut attack, mut attack_ok, mut p2_ok) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for o in &outcomes {
        confusion.record(o.actual, o.predicted);
        p1_tally.merge(o.p1);
        p2_tally.merge(o.p2);
        if o.actual == 0 {
            benign += 1;
            benign_ok += usize::from(!o.detected);
        } else {
            attack += 1;
            attack_ok += usize::from(o.detected);
            p2_ok += usize::from(o.phase2_correct == Some(true));
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let n = outcomes.len();
    let (a1_b, a1_a, a2) = (ratio(benign_ok, benign), ratio(attack_ok, attack), ratio(p2_ok, attack));
    let (p_b, p_a) = (ratio(benign, n), ratio(attack, n));
    let pr = confusion.precision_recall();
    let per_class = confusion
        .classes
        .iter()
        .enumerate()
        .map(|(c, name)| ClassMetrics {
            class: name.clone(),
            precision: pr.precision[c],
            recall: pr.recall[c],
            support: confusion.counts[c].iter().sum(),
        })
        .collect();
    Ok(EvalReport {
        samples: n,
        benign_proportion: p_b,
        attack_proportion: p_a,
        phase1_accuracy: ratio(benign_ok + attack_ok, n),
        phase1_benign_accuracy: a1_b,
        phase1_attack_accuracy: a1_a,
        phase2_accuracy: a2,
        overall_accuracy: overall_accuracy(a1_b, a1_a, a2, p_b, p_a)?,
        cascade_accuracy: confusion.accuracy(),
        phase1_sparsity: p1_tally.rate(),
        phase2_sparsity: p2_tally.rate(),
        phase1_tally: p1_tally,
        phase2_tally: p2_tally,
        phase1_neurons: phase1.neurons(),
        phase2_neurons: phase2.neurons(),
        confusion,
        per_class,
    })
}

/// Phase-2 accuracy on attacks with their detector activity supplied directly.
fn teacher_forced_accuracy(
    phase2: &PhaseTwoModel,
    items: &[(Phase2Input, usize)],
    cfg: &ModelConfig,
    seed: u64,
) -> Result<f64> {
    let labels = phase2.labels.as_ref().ok_or(Error::Unlabeled)?;
    if items.is_empty() {
        return Ok(0.0);
    }
    let hits = items
        .par_iter()
        .map(|(item, class)| {
            let (asr, _) = phase2_activity(phase2, &item.input, item.id, cfg, seed)?;
            Ok(usize::from(predict_class(labels, &asr) == Some(*class)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / items.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTrace {
    pub task: usize,
    pub neurons_before: usize,
    pub neurons_after: usize,
    /// Largest population seen at a mini-batch boundary during the task.
    pub peak_neurons: usize,
    pub grown: u64,
    pub pruned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    /// `accuracy[t][k]`: accuracy on task `t` test attacks after training
    /// through task `k`; `None` before task `t` was seen.
    pub accuracy: Vec<Vec<Option<f64>>>,
    pub forgetting: Vec<f64>,
    /// Mean forgetting over every task but the last.
    pub mean_forgetting: f64,
    pub task1_recall: f64,
    pub tasks: Vec<TaskTrace>,
    pub trajectory: Vec<(u64, usize)>,
    pub events: Vec<TopologyEvent>,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifelongReport {
    pub seed: u64,
    pub class_names: Vec<String>,
    pub tasks: Vec<Vec<String>>,
    pub train_samples: usize,
    pub test_samples: usize,
    pub labeled_samples: usize,
    pub dynamic: VariantReport,
    #[serde(rename = "static")]
    pub static_twin: VariantReport,
}

#[derive(Debug, Clone)]
pub struct LifelongRun {
    pub report: LifelongReport,
    pub phase1: PhaseOneModel,
    pub dynamic: PhaseTwoModel,
    pub static_twin: PhaseTwoModel,
}

/// Indices into `samples` of the labeled subset: a seeded `fraction` of
/// each class, at least one per class.
pub fn labeled_subset(samples: &[Sample], fraction: f64, seed: u64) -> Vec<usize> {
    let mut by_class: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
    for (i, s) in samples.iter().enumerate() {
        by_class.entry(s.attack.map_or(0, |c| c as u64 + 1)).or_default().push(i);
    }
    let mut out = Vec::new();
    for (key, mut idx) in by_class {
        idx.shuffle(&mut rng_for(seed, Stream::Label, &[key]));
        let take = ((idx.len() as f64 * fraction).ceil() as usize).clamp(1, idx.len());
        out.extend_from_slice(&idx[..take]);
    }
    out.sort_unstable();
    out
}

pub fn run_lifelong(workload: &Workload, cfg: &ExperimentConfig, seed: u64) -> Result<LifelongRun> {
    cfg.validate()?;
    let model_cfg = cfg.model();
    if workload.train.is_empty() || workload.test.is_empty() {
        return Err(Error::EmptyDataset);
    }

    // Phase 1 sees every task's stream once, in task order, and is then frozen.
    let mut stream = Vec::new();
    for t in 0..workload.tasks.len() {
        let mut idx: Vec<usize> = workload.task_benign[t].clone();
        idx.extend(
            workload
                .train
                .iter()
                .enumerate()
                .filter(|(_, s)| s.attack.is_some_and(|c| workload.tasks[t].contains(&c)))
                .map(|(i, _)| i),
        );
        idx.shuffle(&mut rng_for(seed, Stream::Shuffle, &[1, t as u64]));
        stream.extend(idx.into_iter().map(|i| workload.train[i].clone()));
    }
    let mut phase1 = train_phase1(&stream, &model_cfg, seed)?;
    let labeled_idx = labeled_subset(&workload.train, cfg.labeling.labeled_fraction, seed);
    let labeled: Vec<Sample> = labeled_idx.iter().map(|&i| workload.train[i].clone()).collect();
    label_phase1(&mut phase1, &labeled, &model_cfg, seed)?;

    let to_input = |s: &Sample| -> Result<(Phase2Input, usize)> {
        let (asr, _) = phase1_activity(&phase1, &s.features, s.id, &model_cfg, seed)?;
        let input = build_phase2_input(&s.features, &asr, s.features.len(), phase1.neurons())?;
        Ok((Phase2Input { id: s.id, input }, s.attack.expect("attack sample")))
    };
    let inputs_of = |samples: &[&Sample]| samples.par_iter().map(|s| to_input(s)).collect::<Result<Vec<_>>>();

    let tasks = workload.tasks.len();
    let mut train_inputs = Vec::with_capacity(tasks);
    let mut labeled_inputs = Vec::with_capacity(tasks);
    let mut test_inputs = Vec::with_capacity(tasks);
    for t in 0..tasks {
        let mut attacks = workload.attacks_of_task(&workload.train, t);
        attacks.shuffle(&mut rng_for(seed, Stream::Shuffle, &[2, t as u64]));
        train_inputs.push(inputs_of(&attacks)?);
        labeled_inputs.push(inputs_of(&workload.attacks_of_task(&labeled, t))?);
        test_inputs.push(inputs_of(&workload.attacks_of_task(&workload.test, t))?);
    }

    let run_variant = |variant: &ModelConfig| -> Result<(PhaseTwoModel, VariantReport)> {
        let mut model = PhaseTwoModel::new(
            workload.feature_dim(),
            phase1.neurons(),
            workload.class_names.len(),
            variant,
            seed,
        )?;
        let mut accuracy = vec![vec![None; tasks]; tasks];
        let mut traces = Vec::with_capacity(tasks);
        let mut seen_labeled: Vec<(Phase2Input, usize)> = Vec::new();
        for t in 0..tasks {
            let before = model.neurons();
            let (grown0, events0, traj0) = (model.growth_events, model.events.len(), model.trajectory.len());
            let items: Vec<Phase2Input> = train_inputs[t].iter().map(|(i, _)| i.clone()).collect();
            train_phase2_inputs(&mut model, &items, variant, seed)?;
            seen_labeled.extend(labeled_inputs[t].iter().cloned());
            label_phase2(&mut model, &seen_labeled, variant, seed)?;
            for s in 0..=t {
                accuracy[s][t] = Some(teacher_forced_accuracy(&model, &test_inputs[s], variant, seed)?);
            }
            let peak = model.trajectory[traj0..]
                .iter()
                .map(|&(_, n)| n)
                .chain([model.neurons()])
                .max()
                .unwrap_or(before);
            traces.push(TaskTrace {
                task: t,
                neurons_before: before,
                neurons_after: model.neurons(),
                peak_neurons: peak,
                grown: model.growth_events - grown0,
                pruned: model.events[events0..].iter().filter(|e| e.event == EventKind::Prune).count(),
            });
        }
        let forgetting = forgetting_matrix(&accuracy)?;
        let mean_forgetting = if tasks > 1 {
            forgetting[..tasks - 1].iter().sum::<f64>() / (tasks - 1) as f64
        } else {
            0.0
        };
        let eval = evaluate(&phase1, &model, &workload.test, &workload.class_names, variant, seed)?;
        let report = VariantReport {
            task1_recall: accuracy[0][tasks - 1].unwrap_or(0.0),
            accuracy,
            forgetting,
            mean_forgetting,
            tasks: traces,
            trajectory: model.trajectory.clone(),
            events: model.events.clone(),
            eval,
        };
        Ok((model, report))
    };

    let (dynamic, dynamic_report) = run_variant(&model_cfg)?;
    let (static_twin, static_report) = run_variant(&cfg.static_model())?;
    let report = LifelongReport {
        seed,
        class_names: workload.class_names.clone(),
        tasks: workload
            .tasks
            .iter()
            .map(|t| t.iter().map(|&c| workload.class_names[c].clone()).collect())
            .collect(),
        train_samples: workload.train.len(),
        test_samples: workload.test.len(),
        labeled_samples: labeled.len(),
        dynamic: dynamic_report,
        static_twin: static_report,
    };
    Ok(LifelongRun {
        report,
        phase1,
        dynamic,
        static_twin,
    })
}

/// Runs `f` on a pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
