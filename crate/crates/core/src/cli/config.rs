//! Versioned JSON experiment configuration.
//!
//! A config file holds shared settings and one optional section per
//! subcommand. Every section has complete defaults; command-line flags
//! override whatever the file sets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Figure1Params;
use crate::error::{Error, Result};
use crate::solver::Mode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub solve: Option<SolveConfig>,
    #[serde(default)]
    pub certify: Option<CertifyConfig>,
    #[serde(default)]
    pub recover: Option<RecoverConfig>,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub statdim: Option<StatdimConfig>,
    #[serde(default)]
    pub gen: Option<GenConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            seed: None,
            out: None,
            threads: None,
            solve: None,
            certify: None,
            recover: None,
            compare: None,
            statdim: None,
            gen: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text).map_err(json_format_error)?;
        match raw.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::format(
                    None,
                    format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"),
                ))
            }
            None => return Err(Error::format(None, "missing integer schema_version")),
        }
        serde_json::from_str(text).map_err(json_format_error)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn json_format_error(e: serde_json::Error) -> Error {
    let line = (e.line() > 0).then_some(e.line());
    Error::format(line, e.to_string())
}

/// Where a labeled CSV comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CsvSource {
    pub path: Option<PathBuf>,
    pub label_column: usize,
    pub header: bool,
}

impl Default for CsvSource {
    fn default() -> Self {
        CsvSource {
            path: None,
            label_column: 0,
            header: false,
        }
    }
}

/// Solver knobs shared by the commands that solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverTuning {
    pub max_iters: usize,
    pub tol_obj: f64,
    pub tol_feas: f64,
    /// ADMM residual target; `null` disables the refinement.
    pub refine_tol: Option<f64>,
}

impl Default for SolverTuning {
    fn default() -> Self {
        SolverTuning {
            max_iters: 20_000,
            tol_obj: 1e-6,
            tol_feas: 1e-6,
            refine_tol: Some(1e-11),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub data: CsvSource,
    pub delta: f64,
    pub mode: Mode,
    pub lambda: f64,
    /// Nearest-neighbor pruning; all cross-class pairs when unset.
    pub s: Option<usize>,
    pub certify: bool,
    pub solver: SolverTuning,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            data: CsvSource::default(),
            delta: 1.0,
            mode: Mode::Hard,
            lambda: 1.0,
            s: None,
            certify: false,
            solver: SolverTuning::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyConfig {
    pub data: CsvSource,
    /// Dense JSON matrix `{"dim": d, "data": [...]}`.
    pub matrix: Option<PathBuf>,
    pub delta: f64,
    /// Optional dual certificate JSON used when the search fails.
    pub hint: Option<PathBuf>,
    pub tol_feas: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            data: CsvSource::default(),
            matrix: None,
            delta: 1.0,
            hint: None,
            tol_feas: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RecoverPreset {
    Planted,
    Figure1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Simplex,
    Cube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverConfig {
    pub preset: RecoverPreset,
    pub base: BaseKind,
    pub d: usize,
    pub r: usize,
    /// Noisy copies per base point.
    pub b: usize,
    /// SNR values to sweep; ignored when `sigma` is set.
    pub snr: Vec<f64>,
    pub sigma: Option<f64>,
    pub trials: usize,
    /// Neighbors per class in the initial constraint set; cutting planes add
    /// the rest.
    pub s_init: usize,
    pub figure1: Figure1Params,
    pub solver: SolverTuning,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        RecoverConfig {
            preset: RecoverPreset::Planted,
            base: BaseKind::Cube,
            d: 20,
            r: 3,
            b: 60,
            snr: vec![20.0],
            sigma: None,
            trials: 20,
            s_init: 5,
            figure1: Figure1Params::default(),
            solver: SolverTuning::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ComparePreset {
    /// MNIST 4s and 9s from IDX files.
    Mnist,
    /// Indian Pines pixels from a pre-exported CSV, crops against the rest.
    IndianPines,
    /// User-supplied train and test CSVs.
    Custom,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum,
)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Id,
    Pca,
    Lda,
    Squeezefit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub preset: ComparePreset,
    /// Dataset directory; falls back to `SQZ_DATA_DIR`.
    pub data_dir: Option<PathBuf>,
    pub train: CsvSource,
    pub test: CsvSource,
    pub methods: Vec<Method>,
    /// Size of the random training subsample SqueezeFit and LDA see.
    pub n: usize,
    pub ks: Vec<usize>,
    /// PCA ranks; the SqueezeFit rank (or 1) when empty.
    pub pca_ranks: Vec<usize>,
    /// Also fit LDA on the whole training set.
    pub lda_full: bool,
    pub lambda: f64,
    /// Nearest-neighbor pruning for SqueezeFit; all pairs when unset.
    pub s: Option<usize>,
    pub rank_threshold: f64,
    /// MNIST side length after downsampling.
    pub resolution: usize,
    pub digits: Vec<i64>,
    /// Indian Pines band count after downsampling.
    pub bands: usize,
    /// Indian Pines labels counted as crops.
    pub crop_labels: Vec<i64>,
    /// Indian Pines training fraction.
    pub train_fraction: f64,
    pub solver: SolverTuning,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            preset: ComparePreset::Mnist,
            data_dir: None,
            train: CsvSource::default(),
            test: CsvSource::default(),
            methods: vec![Method::Id, Method::Pca, Method::Lda, Method::Squeezefit],
            n: 50,
            ks: vec![1, 5, 15],
            pca_ranks: Vec::new(),
            lda_full: true,
            lambda: 1.0,
            s: Some(5),
            rank_threshold: 0.5,
            resolution: 10,
            digits: vec![4, 9],
            bands: 100,
            crop_labels: vec![1, 2, 3, 4, 8, 9, 10, 11, 12, 13],
            train_fraction: 0.7,
            solver: SolverTuning::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    Orthant,
    Capped,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StatdimConfig {
    pub cone: ConeKind,
    /// Ambient dimensions; more than one produces a sweep plot.
    pub n: Vec<usize>,
    pub trials: usize,
    pub c1: f64,
}

impl Default for StatdimConfig {
    fn default() -> Self {
        StatdimConfig {
            cone: ConeKind::Orthant,
            n: vec![32],
            trials: 10_000,
            c1: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    TwoPoint,
    Simplex,
    Cube,
    Planted,
    Figure1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub kind: GenKind,
    pub d: usize,
    pub r: usize,
    pub b: usize,
    pub sigma: f64,
    pub base: BaseKind,
    /// File stem; defaults to the kind.
    pub name: Option<String>,
    pub figure1: Figure1Params,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            kind: GenKind::TwoPoint,
            d: 8,
            r: 4,
            b: 10,
            sigma: 0.1,
            base: BaseKind::Simplex,
            name: None,
            figure1: Figure1Params::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document() {
        let c = ExperimentConfig::from_json(r#"{"schema_version": 1}"#).unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn sections_fill_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"schema_version": 1, "seed": 4, "recover": {"snr": [20, 0.05], "trials": 3}}"#,
        )
        .unwrap();
        let r = c.recover.unwrap();
        assert_eq!(r.snr, vec![20.0, 0.05]);
        assert_eq!(r.trials, 3);
        assert_eq!(r.d, 20);
        assert_eq!(c.seed, Some(4));
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"schema_version": 1, "bogus": 0}"#).is_err());
        assert!(
            ExperimentConfig::from_json(r#"{"schema_version": 1, "solve": {"delt": 2}}"#).is_err()
        );
        assert!(ExperimentConfig::from_json(r#"{"schema_version": 2}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{}"#).is_err());
        let e =
            ExperimentConfig::from_json("{\n\"schema_version\": 1,\n\"seed\": \"x\"}").unwrap_err();
        assert!(matches!(e, Error::Format { line: Some(3), .. }), "{e}");
    }

    #[test]
    fn round_trip() {
        let c = ExperimentConfig {
            seed: Some(9),
            compare: Some(CompareConfig::default()),
            statdim: Some(StatdimConfig::default()),
            ..Default::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }
}
