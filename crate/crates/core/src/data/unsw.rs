//! Flow-record CSV ingestion and feature preprocessing.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoding::{fit_scaling, normalize, ScalingStats};
use crate::error::{Error, Result};

/// The 42 per-flow columns of the UNSW-NB15 train/test partition files,
/// in file order.
pub const UNSW_FEATURES: [&str; 42] = [
    "dur",
    "proto",
    "service",
    "state",
    "spkts",
    "dpkts",
    "sbytes",
    "dbytes",
    "rate",
    "sttl",
    "dttl",
    "sload",
    "dload",
    "sloss",
    "dloss",
    "sinpkt",
    "dinpkt",
    "sjit",
    "djit",
    "swin",
    "stcpb",
    "dtcpb",
    "dwin",
    "tcprtt",
    "synack",
    "ackdat",
    "smean",
    "dmean",
    "trans_depth",
    "response_body_len",
    "ct_srv_src",
    "ct_state_ttl",
    "ct_dst_ltm",
    "ct_src_dport_ltm",
    "ct_dst_sport_ltm",
    "ct_dst_src_ltm",
    "is_ftp_login",
    "ct_ftp_cmd",
    "ct_flw_http_mthd",
    "ct_src_ltm",
    "ct_srv_dst",
    "is_sm_ips_ports",
];

const UNSW_CATEGORICAL: [&str; 3] = ["proto", "service", "state"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Declared layout of the input files. Columns not listed here (and not
/// the label or category column) are ignored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    pub columns: Vec<ColumnSpec>,
    pub label_column: String,
    pub category_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self::unsw_nb15()
    }
}

impl CsvSchema {
    pub fn unsw_nb15() -> Self {
        let columns = UNSW_FEATURES
            .iter()
            .map(|&name| ColumnSpec {
                name: name.to_string(),
                kind: if UNSW_CATEGORICAL.contains(&name) {
                    ColumnKind::Categorical
                } else {
                    ColumnKind::Numeric
                },
            })
            .collect();
        Self {
            columns,
            label_column: "label".into(),
            category_column: "attack_cat".into(),
        }
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Field {
    Num(f64),
    Cat(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    /// One entry per schema column, in schema order.
    pub fields: Vec<Field>,
    pub label: bool,
    pub category: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub records: Vec<FlowRecord>,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

pub const BENIGN_CATEGORY: &str = "Normal";

/// Parses every file in order. Rows that cannot be parsed against the schema
/// are skipped and counted; a header missing a declared column is an error.
pub fn load_csv<P: AsRef<Path>>(paths: &[P], schema: &CsvSchema) -> Result<LoadReport> {
    let mut report = LoadReport::default();
    for path in paths {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        load_one(path, schema, &mut report)?;
    }
    Ok(report)
}

fn load_one(path: &Path, schema: &CsvSchema, report: &mut LoadReport) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].trim().is_empty()) {
        report.warnings.push(format!("{}: empty file, no records", path.display()));
        return Ok(());
    }
    let lookup: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let find = |name: &str| -> Result<usize> {
        lookup.get(name).copied().ok_or_else(|| Error::Schema {
            path: path.to_path_buf(),
            reason: format!("missing column {name}"),
        })
    };
    let cols = schema
        .columns
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<Vec<_>>>()?;
    let label_col = find(&schema.label_column)?;
    let cat_col = find(&schema.category_column)?;

    let before = report.records.len();
    for row in reader.records() {
        let Ok(row) = row else {
            report.skipped += 1;
            continue;
        };
        match parse_row(&row, schema, &cols, label_col, cat_col) {
            Some(r) => report.records.push(r),
            None => report.skipped += 1,
        }
    }
    if report.records.len() == before {
        report.warnings.push(format!("{}: no usable records", path.display()));
    }
    Ok(())
}

fn parse_row(
    row: &csv::StringRecord,
    schema: &CsvSchema,
    cols: &[usize],
    label_col: usize,
    cat_col: usize,
) -> Option<FlowRecord> {
    let mut fields = Vec::with_capacity(cols.len());
    for (spec, &c) in schema.columns.iter().zip(cols) {
        let raw = row.get(c)?.trim();
        fields.push(match spec.kind {
            ColumnKind::Numeric => {
                let v: f64 = raw.parse().ok()?;
                if !v.is_finite() {
                    return None;
                }
                Field::Num(v)
            }
            ColumnKind::Categorical => Field::Cat(raw.to_string()),
        });
    }
    let label = match row.get(label_col)?.trim() {
        "0" => false,
        "1" => true,
        _ => return None,
    };
    let mut category = row.get(cat_col)?.trim().to_string();
    if category.is_empty() {
        if label {
            return None;
        }
        category = BENIGN_CATEGORY.to_string();
    }
    Some(FlowRecord { fields, label, category })
}

/// Writes records back out with a header that `load_csv` accepts.
pub fn write_records(path: &Path, schema: &CsvSchema, records: &[FlowRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&schema.category_column);
    header.push(&schema.label_column);
    w.write_record(&header)?;
    for r in records {
        let mut row: Vec<String> = r
            .fields
            .iter()
            .map(|f| match f {
                Field::Num(v) => format!("{v:?}"),
                Field::Cat(s) => s.clone(),
            })
            .collect();
        row.push(r.category.clone());
        row.push(if r.label { "1" } else { "0" }.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Feature selection, categorical dictionaries and scaling, fit on one set
/// of records and applied to any other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub features: Vec<String>,
    /// Sorted value list per selected categorical feature; a value's code is
    /// its index, unseen values get `len`.
    pub dictionaries: BTreeMap<String, Vec<String>>,
    pub stats: ScalingStats,
    #[serde(skip)]
    columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessed {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub categories: Vec<String>,
    /// Input index of each kept row.
    pub kept: Vec<usize>,
    pub dropped: usize,
}

impl Preprocessor {
    pub fn fit(records: &[FlowRecord], schema: &CsvSchema, features: &[String]) -> Result<Self> {
        let columns = resolve(schema, features)?;
        let mut dictionaries = BTreeMap::new();
        for (name, &c) in features.iter().zip(&columns) {
            if schema.columns[c].kind == ColumnKind::Categorical {
                let mut values: Vec<String> = records
                    .iter()
                    .filter_map(|r| match &r.fields[c] {
                        Field::Cat(s) => Some(s.clone()),
                        Field::Num(_) => None,
                    })
                    .collect();
                values.sort_unstable();
                values.dedup();
                dictionaries.insert(name.clone(), values);
            }
        }
        let mut pre = Self {
            features: features.to_vec(),
            dictionaries,
            stats: ScalingStats {
                min: Vec::new(),
                max: Vec::new(),
                retained: Vec::new(),
            },
            columns,
        };
        let raw: Vec<Vec<f64>> = records.iter().filter_map(|r| pre.encode(r)).collect();
        if raw.is_empty() {
            return Err(Error::EmptyDataset);
        }
        pre.stats = fit_scaling(&raw)?;
        pre.stats.retained = pre.columns.clone();
        Ok(pre)
    }

    /// Rebinds the column lookup after deserialization.
    pub fn bind(&mut self, schema: &CsvSchema) -> Result<()> {
        self.columns = resolve(schema, &self.features)?;
        Ok(())
    }

    /// Numeric row before scaling, or `None` when a value is unusable.
    fn encode(&self, r: &FlowRecord) -> Option<Vec<f64>> {
        self.features
            .iter()
            .zip(&self.columns)
            .map(|(name, &c)| match r.fields.get(c)? {
                Field::Num(v) if v.is_finite() => Some(*v),
                Field::Num(_) => None,
                Field::Cat(s) => {
                    let dict = self.dictionaries.get(name)?;
                    Some(dict.binary_search(s).unwrap_or(dict.len()) as f64)
                }
            })
            .collect()
    }

    pub fn transform(&self, r: &FlowRecord) -> Option<Vec<f64>> {
        let raw = self.encode(r)?;
        normalize(&raw, &self.stats).ok().map(|f| f.into_inner())
    }

    pub fn transform_all(&self, records: &[FlowRecord]) -> Preprocessed {
        let mut out = Preprocessed {
            rows: Vec::new(),
            labels: Vec::new(),
            categories: Vec::new(),
            kept: Vec::new(),
            dropped: 0,
        };
        for (i, r) in records.iter().enumerate() {
            match self.transform(r) {
                Some(row) => {
                    out.rows.push(row);
                    out.labels.push(r.label);
                    out.categories.push(r.category.clone());
                    out.kept.push(i);
                }
                None => out.dropped += 1,
            }
        }
        out
    }
}

fn resolve(schema: &CsvSchema, features: &[String]) -> Result<Vec<usize>> {
    features
        .iter()
        .map(|f| schema.position(f).ok_or_else(|| Error::UnknownFeature(f.clone())))
        .collect()
}

/// Cleans, encodes and scales `records`. With `fitted` the given
/// preprocessor is reused (validation and test data); otherwise one is fit
/// on `records` (training data).
pub fn preprocess(
    records: &[FlowRecord],
    schema: &CsvSchema,
    features: &[String],
    fitted: Option<&Preprocessor>,
) -> Result<(Preprocessed, Preprocessor)> {
    let pre = match fitted {
        Some(p) => {
            if p.features != features {
                return Err(Error::InvalidArgument("fitted preprocessor uses a different feature list".into()));
            }
            let mut p = p.clone();
            p.bind(schema)?;
            p
        }
        None => Preprocessor::fit(records, schema, features)?,
    };
    Ok((pre.transform_all(records), pre))
}

/// Fallback selector: the `k` columns with the largest variance over
/// already-scaled rows. Ties keep column order.
pub fn select_by_variance(rows: &[Vec<f64>], names: &[String], k: usize) -> Result<Vec<String>> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = names.len();
    if let Some(r) = rows.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: r.len(),
        });
    }
    let n = rows.len() as f64;
    let mut var: Vec<(usize, f64)> = (0..d)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            (j, rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n)
        })
        .collect();
    var.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut keep: Vec<usize> = var.into_iter().take(k).map(|(j, _)| j).collect();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|j| names[j].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use std::path::PathBuf;

    fn tiny_schema() -> CsvSchema {
        CsvSchema {
            columns: vec![
                ColumnSpec {
                    name: "dur".into(),
                    kind: ColumnKind::Numeric,
                },
                ColumnSpec {
                    name: "proto".into(),
                    kind: ColumnKind::Categorical,
                },
                ColumnSpec {
                    name: "sbytes".into(),
                    kind: ColumnKind::Numeric,
                },
            ],
            label_column: "label".into(),
            category_column: "attack_cat".into(),
        }
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn skips_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            dir.path(),
            "a.csv",
            "id,dur,proto,sbytes,attack_cat,label\n1,0.5,tcp,100,Normal,0\n2,abc,udp,5,DoS,1\n3,1.0,udp,7,DoS,1\n",
        );
        let rep = load_csv(&[p], &tiny_schema()).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert_eq!(rep.skipped, 1);
        assert_eq!(rep.records[1].category, "DoS");
    }

    #[test]
    fn empty_file_warns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "e.csv", "");
        let rep = load_csv(&[p], &tiny_schema()).unwrap();
        assert!(rep.records.is_empty());
        assert_eq!(rep.warnings.len(), 1);
    }

    #[test]
    fn missing_file_and_column() {
        let dir = tempfile::tempdir().unwrap();
        let gone = dir.path().join("nope.csv");
        assert!(matches!(load_csv(&[&gone], &tiny_schema()), Err(Error::MissingFile(p)) if p == gone));
        let p = write(dir.path(), "b.csv", "dur,sbytes,attack_cat,label\n1,2,Normal,0\n");
        assert!(matches!(load_csv(&[p], &tiny_schema()), Err(Error::Schema { .. })));
    }

    #[test]
    fn unseen_categories_and_clamp() {
        let rec = |dur: f64, proto: &str| FlowRecord {
            fields: vec![Field::Num(dur), Field::Cat(proto.into()), Field::Num(3.0)],
            label: false,
            category: "Normal".into(),
        };
        let train = vec![rec(0.0, "udp"), rec(2.0, "tcp")];
        let feats = vec!["proto".to_string(), "dur".to_string()];
        let (out, pre) = preprocess(&train, &tiny_schema(), &feats, None).unwrap();
        assert_eq!(pre.dictionaries["proto"], vec!["tcp".to_string(), "udp".to_string()]);
        assert_eq!(out.rows, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let test = pre.transform(&rec(10.0, "icmp")).unwrap();
        assert_eq!(test, vec![1.0, 1.0]);
        assert!(matches!(
            preprocess(&train, &tiny_schema(), &["nope".to_string()], None),
            Err(Error::UnknownFeature(_))
        ));
    }

    #[test]
    fn variance_ranking() {
        let rows = vec![vec![0.0, 0.5, 0.0], vec![1.0, 0.5, 0.2]];
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(select_by_variance(&rows, &names, 2).unwrap(), vec!["a", "c"]);
    }
}
