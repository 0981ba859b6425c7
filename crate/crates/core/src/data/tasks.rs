use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub ordinal: usize,
    pub classes: Vec<String>,
    pub include_benign: bool,
}

/// Record indices making up one task of the sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskStream {
    pub spec: TaskSpec,
    pub attack: Vec<usize>,
    /// A slice of the benign pool not shared with any other task.
    pub benign: Vec<usize>,
}

impl TaskStream {
    pub fn all(&self) -> impl Iterator<Item = usize> + '_ {
        self.benign.iter().chain(&self.attack).copied()
    }
}

/// Splits records into sequential tasks: task `t` holds the attacks of
/// `groupings[t]` plus its own slice of the benign pool. Attack classes that
/// belong to no group (including every class in `excluded`) are dropped.
pub fn make_tasks<S: AsRef<str>>(
    categories: &[S],
    groupings: &[Vec<String>],
    benign_category: &str,
    excluded: &[String],
) -> Result<Vec<TaskStream>> {
    let mut seen = BTreeSet::new();
    for group in groupings {
        for class in group {
            if !seen.insert(class.as_str()) || class == benign_category {
                return Err(Error::OverlappingGroups(class.clone()));
            }
            if excluded.contains(class) {
                return Err(Error::Config(format!("class {class} is both grouped and excluded")));
            }
        }
    }
    let benign: Vec<usize> = (0..categories.len())
        .filter(|&i| categories[i].as_ref() == benign_category)
        .collect();
    let tasks = groupings.len();
    let mut out = Vec::with_capacity(tasks);
    for (t, group) in groupings.iter().enumerate() {
        let attack = (0..categories.len())
            .filter(|&i| group.iter().any(|g| g == categories[i].as_ref()))
            .collect();
        let lo = benign.len() * t / tasks;
        let hi = benign.len() * (t + 1) / tasks;
        out.push(TaskStream {
            spec: TaskSpec {
                ordinal: t,
                classes: group.clone(),
                include_benign: true,
            },
            attack,
            benign: benign[lo..hi].to_vec(),
        });
    }
    Ok(out)
}
