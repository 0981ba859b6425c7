//! Evaluation metrics: confusion-derived precision and recall, cascade
//! accuracy composition, spike sparsity, and forgetting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Combined accuracy of the detector/classifier cascade.
///
/// Proportions are normalized to sum to one. A benign sample is correct when
/// the detector passes it; an attack is correct only when it is both detected
/// and classified, so attack accuracy composes as `a1_attack * a2`.
pub fn overall_accuracy(a1_benign: f64, a1_attack: f64, a2: f64, p_benign: f64, p_attack: f64) -> Result<f64> {
    if p_benign < 0.0 || p_attack < 0.0 {
        return Err(Error::InvalidArgument("proportions must be non-negative".into()));
    }
    let total = p_benign + p_attack;
    if total == 0.0 {
        return Err(Error::InvalidArgument("both proportions are zero".into()));
    }
    Ok((p_benign * a1_benign + p_attack * a1_attack * a2) / total)
}

/// Average spikes per neuron per timestep.
pub fn sparsity(total_spikes: u64, neurons: usize, timesteps: usize) -> Result<f64> {
    if neurons == 0 || timesteps == 0 {
        return Err(Error::InvalidArgument("sparsity needs neurons > 0 and timesteps > 0".into()));
    }
    Ok(total_spikes as f64 / (neurons as f64 * timesteps as f64))
}

/// Running spike/neuron-step tally for populations whose size may vary
/// between presentations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpikeTally {
    pub spikes: u64,
    pub neuron_steps: u64,
}

impl SpikeTally {
    pub fn add(&mut self, spikes: u64, neurons: usize, steps: usize) {
        self.spikes += spikes;
        self.neuron_steps += (neurons * steps) as u64;
    }

    pub fn merge(&mut self, other: SpikeTally) {
        self.spikes += other.spikes;
        self.neuron_steps += other.neuron_steps;
    }

    /// Average spikes per neuron per timestep, 0 when nothing was simulated.
    pub fn rate(&self) -> f64 {
        if self.neuron_steps == 0 {
            0.0
        } else {
            self.spikes as f64 / self.neuron_steps as f64
        }
    }
}

/// Per-task forgetting from `table[t][k]`, the accuracy on task `t` after
/// training through task `k`. Entries with `k >= t` must be present.
/// Forgetting is the drop from the best earlier checkpoint to the final one,
/// clamped at zero.
pub fn forgetting_matrix(table: &[Vec<Option<f64>>]) -> Result<Vec<f64>> {
    let tasks = table.len();
    let mut out = Vec::with_capacity(tasks);
    for (t, row) in table.iter().enumerate() {
        if row.len() < tasks {
            return Err(Error::InvalidArgument(format!("accuracy row {t} is too short")));
        }
        let seen: Vec<f64> = (t..tasks)
            .map(|k| row[k].ok_or_else(|| Error::InvalidArgument(format!("missing accuracy entry [{t}][{k}]"))))
            .collect::<Result<_>>()?;
        let last = *seen.last().expect("t < tasks");
        let best_before = seen[..seen.len() - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(if best_before.is_finite() { (best_before - last).max(0.0) } else { 0.0 });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    /// Classes never predicted (precision 0/0, reported as 0).
    pub precision_undefined: Vec<bool>,
    /// Classes with no support (recall 0/0, reported as 0).
    pub recall_undefined: Vec<bool>,
}

/// `confusion[actual][predicted]`.
pub fn precision_recall(confusion: &[Vec<u64>]) -> Result<PrecisionRecall> {
    let n = confusion.len();
    if confusion.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument("confusion matrix must be square".into()));
    }
    let mut out = PrecisionRecall {
        precision: vec![0.0; n],
        recall: vec![0.0; n],
        precision_undefined: vec![false; n],
        recall_undefined: vec![false; n],
    };
    for c in 0..n {
        let tp = confusion[c][c] as f64;
        let support: u64 = confusion[c].iter().sum();
        let predicted: u64 = confusion.iter().map(|row| row[c]).sum();
        if support == 0 {
            out.recall_undefined[c] = true;
        } else {
            out.recall[c] = tp / support as f64;
        }
        if predicted == 0 {
            out.precision_undefined[c] = true;
        } else {
            out.precision[c] = tp / predicted as f64;
        }
    }
    Ok(out)
}

/// Square confusion matrix over named classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Self {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn record(&mut self, actual: usize, predicted: usize) {
        self.counts[actual][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diag: u64 = (0..self.counts.len()).map(|c| self.counts[c][c]).sum();
        diag as f64 / total as f64
    }

    /// Fraction of samples from `actual_classes` predicted correctly.
    pub fn accuracy_over(&self, actual_classes: &[usize]) -> f64 {
        let (mut hit, mut total) = (0u64, 0u64);
        for &c in actual_classes {
            hit += self.counts[c][c];
            total += self.counts[c].iter().sum::<u64>();
        }
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }

    pub fn precision_recall(&self) -> PrecisionRecall {
        precision_recall(&self.counts).expect("square by construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn overall_examples() {
        assert_eq!(overall_accuracy(1.0, 1.0, 1.0, 0.3, 0.9).unwrap(), 1.0);
        let a = overall_accuracy(0.943, 0.943, 0.663, 0.725, 0.285).unwrap();
        let expected = (0.725 * 0.943 + 0.285 * 0.943 * 0.663) / 1.01;
        assert!((a - expected).abs() < 1e-15);
        // Proportions 0.725 + 0.285 normalize by 1.01: 0.8533, and 0.8009
        // with a2 = 0.466.
        assert!((a - 0.853).abs() < 5e-4, "{a}");
        let s = overall_accuracy(0.943, 0.943, 0.466, 0.725, 0.285).unwrap();
        assert!((s - 0.800).abs() < 1e-3, "{s}");
        assert!((overall_accuracy(0.9, 0.8, 0.0, 0.7, 0.3).unwrap() - 0.63).abs() < 1e-12);
        assert!(overall_accuracy(1.0, 1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn sparsity_examples() {
        assert!((sparsity(16, 100, 200).unwrap() - 0.0008).abs() < 1e-15);
        assert_eq!(sparsity(0, 100, 200).unwrap(), 0.0);
        assert_eq!(sparsity(20_000, 100, 200).unwrap(), 1.0);
        assert!(sparsity(1, 0, 200).is_err());
    }

    #[test]
    fn forgetting_examples() {
        let constant = vec![vec![Some(0.8), Some(0.8)], vec![None, Some(0.6)]];
        assert_eq!(forgetting_matrix(&constant).unwrap(), vec![0.0, 0.0]);
        let drop = vec![vec![Some(0.9), Some(0.7)], vec![None, Some(0.8)]];
        let f = forgetting_matrix(&drop).unwrap();
        assert!((f[0] - 0.2).abs() < 1e-12);
        assert_eq!(f[1], 0.0);
        let improve = vec![vec![Some(0.5), Some(0.7)], vec![None, Some(0.8)]];
        assert_eq!(forgetting_matrix(&improve).unwrap(), vec![0.0, 0.0]);
        let missing = vec![vec![Some(0.5), None], vec![None, Some(0.8)]];
        assert!(forgetting_matrix(&missing).is_err());
    }

    #[test]
    fn precision_recall_examples() {
        let id = vec![vec![3, 0], vec![0, 5]];
        let pr = precision_recall(&id).unwrap();
        assert_eq!(pr.precision, vec![1.0, 1.0]);
        assert_eq!(pr.recall, vec![1.0, 1.0]);

        let never = vec![vec![4, 0], vec![2, 0]];
        let pr = precision_recall(&never).unwrap();
        assert_eq!(pr.precision[1], 0.0);
        assert!(pr.precision_undefined[1]);

        let pr = precision_recall(&[vec![8, 2], vec![1, 9]]).unwrap();
        assert_eq!(pr.recall, vec![0.8, 0.9]);
        assert!((pr.precision[0] - 8.0 / 9.0).abs() < 1e-15);
        assert!((pr.precision[1] - 9.0 / 11.0).abs() < 1e-15);

        assert!(precision_recall(&[vec![1, 2]]).is_err());
    }

    #[test]
    fn confusion_accuracy() {
        let mut c = Confusion::new(vec!["a".into(), "b".into(), "unknown".into()]);
        c.record(0, 0);
        c.record(0, 2);
        c.record(1, 1);
        c.record(1, 1);
        assert_eq!(c.total(), 4);
        assert_eq!(c.accuracy(), 0.75);
        assert_eq!(c.accuracy_over(&[0]), 0.5);
        assert_eq!(c.counts[0].iter().sum::<u64>(), 2);
    }

    proptest! {
        #[test]
        fn overall_is_monotone(
            b in 0.0f64..1.0, a in 0.0f64..1.0, c in 0.0f64..1.0,
            pb in 0.0f64..1.0, pa in 0.01f64..1.0, bump in 0.0f64..0.5
        ) {
            let base = overall_accuracy(b, a, c, pb, pa).unwrap();
            prop_assert!(overall_accuracy((b + bump).min(1.0), a, c, pb, pa).unwrap() >= base);
            prop_assert!(overall_accuracy(b, (a + bump).min(1.0), c, pb, pa).unwrap() >= base);
            prop_assert!(overall_accuracy(b, a, (c + bump).min(1.0), pb, pa).unwrap() >= base);
        }

        #[test]
        fn forgetting_non_negative(rows in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 4), 4)) {
            let table: Vec<Vec<Option<f64>>> = rows.iter().map(|r| r.iter().map(|&x| Some(x)).collect()).collect();
            prop_assert!(forgetting_matrix(&table).unwrap().iter().all(|&f| f >= 0.0));
        }

        #[test]
        fn pr_in_unit_interval(m in proptest::collection::vec(proptest::collection::vec(0u64..20, 3), 3)) {
            let pr = precision_recall(&m).unwrap();
            prop_assert!(pr.precision.iter().chain(&pr.recall).all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
