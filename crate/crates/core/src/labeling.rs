//! Semi-supervised readout: neurons take the class they respond to most
//! strongly on a small labeled subset; prediction votes by mean group rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub num_classes: usize,
    /// Class per neuron; `None` for neurons silent on every labeled sample.
    pub labels: Vec<Option<usize>>,
    /// `class_means[j][c]`: mean rate of neuron `j` over labeled samples of class `c`.
    pub class_means: Vec<Vec<f64>>,
    /// Classes without labeled samples or without any neuron assigned to them.
    pub uncovered: Vec<usize>,
}

impl LabelMap {
    pub fn labeled_count(&self) -> usize {
        self.labels.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.labeled_count() == 0
    }

    /// Drops the entries of removed neurons so indices track the population.
    pub fn remove_sorted(&mut self, sorted_indices: &[usize]) {
        crate::lif::retain_except(&mut self.labels, sorted_indices);
        crate::lif::retain_except(&mut self.class_means, sorted_indices);
    }

    /// Newly grown neurons start unlabeled.
    pub fn resize(&mut self, neurons: usize) {
        self.labels.resize(neurons, None);
        self.class_means.resize(neurons, vec![0.0; self.num_classes]);
    }
}

/// Assigns each neuron the class with the highest mean response over
/// `responses` (`(rates, class)` pairs). Ties go to the lower class index.
pub fn assign_labels(responses: &[(Vec<f64>, usize)], num_classes: usize) -> Result<LabelMap> {
    let neurons = responses.first().ok_or(Error::EmptyDataset)?.0.len();
    let mut sums = vec![vec![0.0; num_classes]; neurons];
    let mut support = vec![0usize; num_classes];
    for (rates, class) in responses {
        if rates.len() != neurons {
            return Err(Error::DimensionMismatch {
                expected: neurons,
                actual: rates.len(),
            });
        }
        if *class >= num_classes {
            return Err(Error::InvalidArgument(format!(
                "class {class} out of range for {num_classes} classes"
            )));
        }
        support[*class] += 1;
        for (j, &r) in rates.iter().enumerate() {
            sums[j][*class] += r;
        }
    }
    let class_means: Vec<Vec<f64>> = sums
        .into_iter()
        .map(|row| {
            row.into_iter()
                .zip(&support)
                .map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
                .collect()
        })
        .collect();
    let labels: Vec<Option<usize>> = class_means
        .iter()
        .map(|means| argmax_positive(means))
        .collect();
    let uncovered = (0..num_classes)
        .filter(|&c| support[c] == 0 || !labels.contains(&Some(c)))
        .collect();
    Ok(LabelMap {
        num_classes,
        labels,
        class_means,
        uncovered,
    })
}

/// Index of the largest strictly positive value, lowest index on ties.
fn argmax_positive(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (c, &v) in values.iter().enumerate() {
        if v > 0.0 && best.is_none_or(|b| v > values[b]) {
            best = Some(c);
        }
    }
    best
}

/// Mean rate of each class's labeled neurons; classes without neurons score 0.
pub fn group_means(map: &LabelMap, rates: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; map.num_classes];
    let mut counts = vec![0usize; map.num_classes];
    for (j, label) in map.labels.iter().enumerate() {
        if let (Some(c), Some(&r)) = (label, rates.get(j)) {
            sums[*c] += r;
            counts[*c] += 1;
        }
    }
    sums.iter()
        .zip(&counts)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect()
}

/// Class with the highest mean group rate; `None` when every group is silent.
pub fn predict_class(map: &LabelMap, rates: &[f64]) -> Option<usize> {
    argmax_positive(&group_means(map, rates))
}
