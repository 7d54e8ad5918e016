//! Machine-readable experiment output.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Mean, median and standard error of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample standard deviation over `√count`; 0 for fewer than two values.
    pub stderr: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Aggregate {
        let count = values.len();
        if count == 0 {
            return Aggregate {
                count,
                mean: f64::NAN,
                median: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if count % 2 == 1 {
            sorted[count / 2]
        } else {
            0.5 * (sorted[count / 2 - 1] + sorted[count / 2])
        };
        let stderr = if count > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
            (var / count as f64).sqrt()
        } else {
            0.0
        };
        Aggregate {
            count,
            mean,
            median,
            stderr,
        }
    }
}

/// The `results.json` written by every command.
///
/// Everything except `timings` is a function of the inputs and the seed, so
/// repeated runs produce identical bytes; timings are only recorded on
/// request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultRecord {
    pub artifact_version: String,
    pub command: String,
    pub seed: u64,
    /// The resolved command configuration.
    pub config: serde_json::Value,
    pub trials: Vec<serde_json::Value>,
    pub aggregates: BTreeMap<String, Aggregate>,
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl ResultRecord {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(ResultRecord {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config)?,
            trials: Vec::new(),
            aggregates: BTreeMap::new(),
            notes: Vec::new(),
            timings: None,
        })
    }

    pub fn push_trial(&mut self, trial: &impl Serialize) -> Result<()> {
        self.trials.push(serde_json::to_value(trial)?);
        Ok(())
    }

    pub fn aggregate(&mut self, name: &str, values: &[f64]) {
        self.aggregates
            .insert(name.to_string(), Aggregate::of(values));
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// A CSV table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> crate::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => crate::Error::Io(io),
        other => crate::Error::format(None, format!("{other:?}")),
    }
}

/// Seed for trial `t` of a run seeded with `seed` (SplitMix64 over a
/// counter), so trials can run in any order.
pub fn trial_seed(seed: u64, t: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(t.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
