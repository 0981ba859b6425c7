#![allow(dead_code)]

use std::path::{Path, PathBuf};

use dsnn_core::config::ExperimentConfig;
use dsnn_core::data::{write_records, ColumnKind, CsvSchema, Field, FlowRecord};
use dsnn_core::rng::rng_from_seed;
use rand::Rng as _;

pub const ATTACKS: [&str; 6] = ["DoS", "Reconnaissance", "Backdoor", "Generic", "Exploits", "Fuzzers"];

/// UNSW-shaped flows: each category lights up its own subset of numeric
/// columns and prefers one protocol. Includes a few excluded-class rows.
pub fn flow_records(benign: usize, per_attack: usize, seed: u64) -> Vec<FlowRecord> {
    let schema = CsvSchema::unsw_nb15();
    let mut rng = rng_from_seed(seed);
    let mut groups = vec![("Normal", benign)];
    groups.extend(ATTACKS.iter().map(|&a| (a, per_attack)));
    groups.push(("Worms", 12));
    let mut out = Vec::new();
    for (k, &(cat, count)) in groups.iter().enumerate() {
        for _ in 0..count {
            let fields = schema
                .columns
                .iter()
                .enumerate()
                .map(|(j, c)| match c.kind {
                    ColumnKind::Numeric => {
                        let hot = (j + 5 * k) % 7 == 0;
                        Field::Num(if hot { 100.0 } else { 10.0 } + rng.random_range(0.0..5.0))
                    }
                    ColumnKind::Categorical => Field::Cat(["tcp", "udp", "arp"][(k + j) % 3].to_string()),
                })
                .collect();
            out.push(FlowRecord {
                fields,
                label: cat != "Normal",
                category: cat.to_string(),
            });
        }
    }
    out
}

pub fn write_flows(dir: &Path) -> PathBuf {
    let path = dir.join("flows.csv");
    write_records(&path, &CsvSchema::unsw_nb15(), &flow_records(300, 70, 11)).unwrap();
    path
}

/// Config pointing at `csv`, with cache and outputs under `dir`.
pub fn flow_config(dir: &Path, csv: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.data.csv = vec![csv.to_path_buf()];
    cfg.data.cache_dir = dir.join("cache");
    cfg.output_dir = dir.join("out");
    cfg
}
