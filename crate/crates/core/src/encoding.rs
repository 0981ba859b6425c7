//! Min-max feature scaling and Poisson rate coding.

use std::ops::Deref;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// A feature row scaled into `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "feature {i} = {v} is outside [0, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Indices of the retained feature columns in the source schema.
    pub retained: Vec<usize>,
}

impl ScalingStats {
    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn is_constant(&self, column: usize) -> bool {
        self.max[column] == self.min[column]
    }

    pub fn constant_columns(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&c| self.is_constant(c)).collect()
    }
}

pub fn fit_scaling<R: AsRef<[f64]>>(rows: &[R]) -> Result<ScalingStats> {
    let first = rows.first().ok_or(Error::EmptyDataset)?.as_ref();
    let dim = first.len();
    let mut min = first.to_vec();
    let mut max = first.to_vec();
    for row in &rows[1..] {
        let row = row.as_ref();
        if row.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: row.len(),
            });
        }
        for (c, &x) in row.iter().enumerate() {
            min[c] = min[c].min(x);
            max[c] = max[c].max(x);
        }
    }
    Ok(ScalingStats {
        min,
        max,
        retained: (0..dim).collect(),
    })
}

/// Scales a raw row into `[0, 1]`, clamping values outside the fitted range.
/// Constant columns map to 0.
pub fn normalize(raw: &[f64], stats: &ScalingStats) -> Result<FeatureVector> {
    if raw.len() != stats.dim() {
        return Err(Error::DimensionMismatch {
            expected: stats.dim(),
            actual: raw.len(),
        });
    }
    let values = raw
        .iter()
        .enumerate()
        .map(|(c, &x)| {
            let span = stats.max[c] - stats.min[c];
            if span <= 0.0 || !x.is_finite() {
                0.0
            } else {
                ((x - stats.min[c]) / span).clamp(0.0, 1.0)
            }
        })
        .collect();
    Ok(FeatureVector(values))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncodingConfig {
    pub max_rate_hz: f64,
    pub dt_ms: f64,
    /// Presentation length in timesteps.
    pub duration: usize,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            max_rate_hz: 63.75,
            dt_ms: 1.0,
            duration: 200,
        }
    }
}

impl EncodingConfig {
    /// Per-step firing probability of a channel at feature value 1.
    pub fn max_step_probability(&self) -> f64 {
        self.max_rate_hz * self.dt_ms / 1000.0
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.max_step_probability();
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(Error::Config(format!(
                "max_rate_hz * dt = {p} is not a valid per-step probability"
            )));
        }
        if self.dt_ms <= 0.0 {
            return Err(Error::Config("dt_ms must be positive".into()));
        }
        if self.duration == 0 {
            return Err(Error::Config("duration must be at least one timestep".into()));
        }
        Ok(())
    }
}

/// Binary spike raster stored as the sorted list of active channels per timestep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeTrain {
    channels: usize,
    steps: Vec<Vec<u32>>,
}

impl SpikeTrain {
    pub fn empty(duration: usize, channels: usize) -> Self {
        Self {
            channels,
            steps: vec![Vec::new(); duration],
        }
    }

    /// Builds a train from `(timestep, channel)` pairs. Duplicates collapse.
    pub fn from_events(
        duration: usize,
        channels: usize,
        events: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut train = Self::empty(duration, channels);
        for (t, c) in events {
            if t >= duration || c >= channels {
                return Err(Error::InvalidArgument(format!(
                    "event ({t}, {c}) outside {duration}x{channels} raster"
                )));
            }
            train.steps[t].push(c as u32);
        }
        for step in &mut train.steps {
            step.sort_unstable();
            step.dedup();
        }
        Ok(train)
    }

    pub fn duration(&self) -> usize {
        self.steps.len()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn at(&self, t: usize) -> &[u32] {
        &self.steps[t]
    }

    pub fn events(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.steps
            .iter()
            .enumerate()
            .flat_map(|(t, cs)| cs.iter().map(move |&c| (t, c as usize)))
    }

    pub fn len(&self) -> usize {
        self.steps.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.iter().all(Vec::is_empty)
    }

    pub fn count_per_channel(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.channels];
        for step in &self.steps {
            for &c in step {
                counts[c as usize] += 1;
            }
        }
        counts
    }
}

/// Rate-codes `features` as independent per-step Bernoulli draws with
/// probability `feature * max_rate * dt`. One uniform draw is consumed per
/// channel per step regardless of value, so channels never perturb each
/// other's randomness.
pub fn encode_poisson(features: &[f64], cfg: &EncodingConfig, rng: &mut Rng) -> Result<SpikeTrain> {
    cfg.validate()?;
    let p_max = cfg.max_step_probability();
    let probs: Vec<f64> = features.iter().map(|&x| x.clamp(0.0, 1.0) * p_max).collect();
    let mut train = SpikeTrain::empty(cfg.duration, features.len());
    for step in &mut train.steps {
        for (c, &p) in probs.iter().enumerate() {
            let u: f64 = rng.random();
            if u < p {
                step.push(c as u32);
            }
        }
    }
    Ok(train)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn fit_single_row_is_constant() {
        let stats = fit_scaling(&[vec![3.0, 5.0]]).unwrap();
        assert_eq!(stats.min, vec![3.0, 5.0]);
        assert_eq!(stats.max, vec![3.0, 5.0]);
        assert_eq!(stats.constant_columns(), vec![0, 1]);
    }

    #[test]
    fn fit_two_rows() {
        let stats = fit_scaling(&[vec![0.0, 10.0], vec![4.0, 30.0]]).unwrap();
        assert_eq!(stats.min, vec![0.0, 10.0]);
        assert_eq!(stats.max, vec![4.0, 30.0]);
        assert!(stats.constant_columns().is_empty());
    }

    #[test]
    fn fit_empty_is_error() {
        let rows: Vec<Vec<f64>> = vec![];
        assert!(matches!(fit_scaling(&rows), Err(Error::EmptyDataset)));
    }

    #[test]
    fn refit_on_scaled_output_spans_unit_interval() {
        let mut rng = rng_from_seed(11);
        let rows: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..5).map(|c| rng.random::<f64>() * (c as f64 + 1.0) * 7.0 - 3.0).collect())
            .collect();
        let stats = fit_scaling(&rows).unwrap();
        let scaled: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| normalize(r, &stats).unwrap().into_inner())
            .collect();
        let refit = fit_scaling(&scaled).unwrap();
        for c in 0..5 {
            assert!(refit.min[c].abs() < 1e-12);
            assert!((refit.max[c] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_endpoints_midpoint_and_clamp() {
        let stats = ScalingStats {
            min: vec![5.0, 0.0, 2.0],
            max: vec![9.0, 10.0, 2.0],
            retained: vec![0, 1, 2],
        };
        assert_eq!(&*normalize(&[5.0, 10.0, 2.0], &stats).unwrap(), &[0.0, 1.0, 0.0]);
        assert_eq!(normalize(&[7.0, 12.0, 8.0], &stats).unwrap()[0], 0.5);
        assert_eq!(normalize(&[7.0, 12.0, 8.0], &stats).unwrap()[1], 1.0);
        assert_eq!(normalize(&[7.0, -3.0, 8.0], &stats).unwrap()[1], 0.0);
        assert!(matches!(
            normalize(&[1.0], &stats),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_vector_encodes_to_empty_train() {
        let mut rng = rng_from_seed(1);
        let train = encode_poisson(&[0.0; 8], &EncodingConfig::default(), &mut rng).unwrap();
        assert!(train.is_empty());
        assert_eq!(train.duration(), 200);
        assert_eq!(train.channels(), 8);
    }

    #[test]
    fn same_seed_same_train() {
        let features = [0.3, 1.0, 0.7, 0.0, 0.5];
        let cfg = EncodingConfig::default();
        let a = encode_poisson(&features, &cfg, &mut rng_from_seed(42)).unwrap();
        let b = encode_poisson(&features, &cfg, &mut rng_from_seed(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_rate_rejected() {
        let cfg = EncodingConfig {
            max_rate_hz: 2000.0,
            ..Default::default()
        };
        assert!(matches!(
            encode_poisson(&[0.5], &cfg, &mut rng_from_seed(0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn mean_count_matches_binomial() {
        // n = 200 steps, p = 0.06375: mean 12.75 per trial.
        let cfg = EncodingConfig::default();
        let trials = 10_000;
        let n = cfg.duration as f64;
        let p = cfg.max_step_probability();
        let mut rng = rng_from_seed(7);
        let total: usize = (0..trials)
            .map(|_| encode_poisson(&[1.0], &cfg, &mut rng).unwrap().len())
            .sum();
        let mean = total as f64 / trials as f64;
        let sigma_mean = (n * p * (1.0 - p) / trials as f64).sqrt();
        assert!((n * p - 12.75).abs() < 1e-12);
        assert!((mean - 12.75).abs() < 3.0 * sigma_mean, "mean {mean}");
    }

    #[test]
    fn from_events_dedups_and_checks_bounds() {
        let t = SpikeTrain::from_events(3, 2, [(0, 1), (0, 1), (2, 0)]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.count_per_channel(), vec![1, 1]);
        assert!(SpikeTrain::from_events(3, 2, [(3, 0)]).is_err());
    }

    #[test]
    fn scaling_stats_json_sidecar() {
        let stats = fit_scaling(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let text = serde_json::to_string(&stats).unwrap();
        let back: ScalingStats = serde_json::from_str(&text).unwrap();
        assert_eq!(stats, back);
    }
}
