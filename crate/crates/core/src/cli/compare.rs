//! k-NN error tables after compressing with the identity, PCA, LDA or
//! SqueezeFit.
//!
//! SqueezeFit and LDA see a random `n`-point subsample of the training set;
//! PCA (and optionally LDA) are fit on the whole training set. Every
//! operator is then applied to the full training set before classifying
//! the test set.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CompareConfig, ComparePreset, Method};
use super::record::{trial_seed, write_table, ResultRecord};
use super::{load_source, squeeze_config, Context, EXIT_OK};
use crate::baselines::{knn_fit, knn_predict, lda, pca};
use crate::dataset::{
    build_constraints_full, build_constraints_nn, downsample_images, downsample_spectra, load_csv,
    load_idx, split_train_test, CsvOptions, LabeledDataset,
};
use crate::error::{Error, Result};
use crate::solver::{solve, Mode};
use crate::spectral::{psd_sqrt, rank_round, SymMatrix};

/// Environment variable naming the dataset directory.
pub const DATA_DIR_ENV: &str = "SQZ_DATA_DIR";

pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];

pub const INDIAN_PINES_FILE: &str = "indian_pines.csv";

const MNIST_HELP: &str = "MNIST files not found. Download train-images-idx3-ubyte, \
train-labels-idx1-ubyte, t10k-images-idx3-ubyte and t10k-labels-idx1-ubyte \
(gunzipped) from the MNIST distribution into $SQZ_DATA_DIR or $SQZ_DATA_DIR/mnist.";

const INDIAN_PINES_HELP: &str = "indian_pines.csv not found. Export the Indian Pines \
cube and ground truth to $SQZ_DATA_DIR/indian_pines.csv with one pixel per row: \
the ground-truth label (0 for unlabeled) followed by the 200 band values.";

/// The configured data directory, falling back to `SQZ_DATA_DIR`.
pub fn data_dir(configured: Option<&Path>) -> Option<PathBuf> {
    configured
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
}

/// The four MNIST files in `dir` or `dir/mnist`, if all are present.
pub fn find_mnist(dir: &Path) -> Option<[PathBuf; 4]> {
    for base in [dir.to_path_buf(), dir.join("mnist")] {
        let paths = MNIST_FILES.map(|f| base.join(f));
        if paths.iter().all(|p| p.is_file()) {
            return Some(paths);
        }
    }
    None
}

/// MNIST train and test digits restricted to `digits` and block-averaged to
/// `resolution × resolution`.
pub fn load_mnist(
    dir: Option<&Path>,
    digits: &[i64],
    resolution: usize,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let paths = dir
        .and_then(find_mnist)
        .ok_or_else(|| Error::invalid(MNIST_HELP))?;
    let train = load_idx(&paths[0], &paths[1], Some(digits))?;
    let test = load_idx(&paths[2], &paths[3], Some(digits))?;
    log::info!(
        "mnist: {} training and {} test images kept (counts {:?} / {:?})",
        train.dataset.n(),
        test.dataset.n(),
        train.counts,
        test.counts
    );
    let side = train.shape.0;
    if train.shape != (side, side) || test.shape != train.shape {
        return Err(Error::invalid("MNIST images are not square"));
    }
    Ok((
        downsample_images(&train.dataset, side, resolution)?,
        downsample_images(&test.dataset, side, resolution)?,
    ))
}

/// Indian Pines pixels with nonzero labels, relabeled crop (1) against
/// non-crop (0), downsampled to `bands` and split stratified.
pub fn load_indian_pines(
    dir: Option<&Path>,
    crop_labels: &[i64],
    bands: usize,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let path = dir
        .map(|d| d.join(INDIAN_PINES_FILE))
        .filter(|p| p.is_file())
        .ok_or_else(|| Error::invalid(INDIAN_PINES_HELP))?;
    let raw = load_csv(&path, CsvOptions::default())?;
    let keep: Vec<usize> = (0..raw.n()).filter(|&i| raw.label(i) != 0).collect();
    let labeled = raw.subset(&keep);
    let binary: Vec<i64> = labeled
        .labels()
        .iter()
        .map(|l| i64::from(crop_labels.contains(l)))
        .collect();
    let ds = LabeledDataset::from_flat(
        labeled.n(),
        labeled.d(),
        labeled.points_flat().to_vec(),
        binary,
    )?;
    let ds = downsample_spectra(&ds, bands)?;
    split_train_test(&ds, train_fraction, seed)
}

/// One table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: Method,
    /// Training points the operator was fit on (0 for the identity).
    pub fit_n: usize,
    pub rank: usize,
    pub k: usize,
    pub error_pct: f64,
}

struct Operator {
    method: Method,
    fit_n: usize,
    rank: usize,
    root: SymMatrix,
}

/// `n` distinct training rows chosen uniformly, in index order.
pub fn subsample(train: &LabeledDataset, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n < 2 || n > train.n() {
        return Err(Error::invalid(format!(
            "subsample size {n} outside 2..={}",
            train.n()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, train.n(), n).into_vec();
    idx.sort_unstable();
    let sample = train.subset(&idx);
    if sample.k() < 2 {
        return Err(Error::invalid("subsample contains a single class"));
    }
    Ok(sample)
}

/// Builds every requested operator and scores k-NN on `test` for each `K`.
pub fn run_comparison(
    train: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &CompareConfig,
    seed: u64,
) -> Result<Vec<CompareRow>> {
    if train.d() != test.d() {
        return Err(Error::invalid("train and test dimensions differ"));
    }
    if cfg.ks.is_empty() || cfg.methods.is_empty() {
        return Err(Error::invalid("need at least one K and one method"));
    }
    let d = train.d();
    let wants = |m: Method| cfg.methods.contains(&m);
    let sample = if wants(Method::Squeezefit) || wants(Method::Lda) {
        Some(subsample(train, cfg.n, trial_seed(seed, 0))?)
    } else {
        None
    };

    let mut ops = Vec::new();
    if wants(Method::Id) {
        ops.push(Operator {
            method: Method::Id,
            fit_n: 0,
            rank: d,
            root: SymMatrix::identity(d),
        });
    }
    let mut sqz_rank = None;
    if wants(Method::Squeezefit) {
        let sample = sample.as_ref().expect("drawn above");
        let z = match cfg.s {
            Some(s) => build_constraints_nn(sample, s)?,
            None => build_constraints_full(sample)?,
        };
        let config = squeeze_config(Mode::HingeZeroPlus, 1.0, cfg.lambda, &cfg.solver);
        let result = solve(&z, &config)?;
        let (rank, _) = rank_round(&result.m, cfg.rank_threshold)?;
        log::info!(
            "squeezefit: {} constraints, tr M = {:.4}, rank {rank}",
            z.len(),
            result.objective
        );
        sqz_rank = Some(rank);
        ops.push(Operator {
            method: Method::Squeezefit,
            fit_n: sample.n(),
            rank,
            root: psd_sqrt(&result.m)?,
        });
    }
    if wants(Method::Pca) {
        let ranks = if cfg.pca_ranks.is_empty() {
            vec![sqz_rank.unwrap_or(1).max(1)]
        } else {
            cfg.pca_ranks.clone()
        };
        for r in ranks {
            let p = pca(train, r.min(d))?;
            ops.push(Operator {
                method: Method::Pca,
                fit_n: train.n(),
                rank: p.trace().round() as usize,
                root: p,
            });
        }
    }
    if wants(Method::Lda) {
        let sample = sample.as_ref().expect("drawn above");
        let mut fits = vec![sample];
        if cfg.lda_full {
            fits.push(train);
        }
        for ds in fits {
            let p = lda(ds)?;
            ops.push(Operator {
                method: Method::Lda,
                fit_n: ds.n(),
                rank: p.trace().round() as usize,
                root: p,
            });
        }
    }

    let jobs: Vec<(usize, usize)> = (0..ops.len())
        .flat_map(|o| cfg.ks.iter().map(move |&k| (o, k)))
        .collect();
    jobs.into_par_iter()
        .map(|(o, k)| {
            let op = &ops[o];
            let clf = knn_fit(train, &op.root, k)?;
            let pred = knn_predict(&clf, test)?;
            Ok(CompareRow {
                method: op.method,
                fit_n: op.fit_n,
                rank: op.rank,
                k,
                error_pct: 100.0 * pred.error_rate,
            })
        })
        .collect()
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Id => "id",
        Method::Pca => "pca",
        Method::Lda => "lda",
        Method::Squeezefit => "squeezefit",
    }
}

pub(crate) fn cmd_compare(ctx: &Context, cfg: CompareConfig) -> Result<i32> {
    let dir = data_dir(cfg.data_dir.as_deref());
    let (train, test) = match cfg.preset {
        ComparePreset::Mnist => load_mnist(dir.as_deref(), &cfg.digits, cfg.resolution)?,
        ComparePreset::IndianPines => load_indian_pines(
            dir.as_deref(),
            &cfg.crop_labels,
            cfg.bands,
            cfg.train_fraction,
            trial_seed(ctx.seed, 1),
        )?,
        ComparePreset::Custom => (
            load_source(&cfg.train, "--train")?,
            load_source(&cfg.test, "--test")?,
        ),
    };
    println!(
        "train {} points, test {} points, d = {}",
        train.n(),
        test.n(),
        train.d()
    );
    let rows = run_comparison(&train, &test, &cfg, ctx.seed)?;

    let mut record = ResultRecord::new("compare", ctx.seed, &cfg)?;
    record
        .notes
        .push(format!("train size {}, test size {}", train.n(), test.n()));
    let mut table = Vec::new();
    for r in &rows {
        println!(
            "{:<11} n={:<6} r={:<4} K={:<3} error {:.2}%",
            method_name(r.method),
            r.fit_n,
            r.rank,
            r.k,
            r.error_pct
        );
        table.push(vec![
            method_name(r.method).to_string(),
            r.fit_n.to_string(),
            r.rank.to_string(),
            r.k.to_string(),
            format!("{:?}", r.error_pct),
        ]);
        record.push_trial(r)?;
    }
    write_table(
        &ctx.out_path("table.csv"),
        &["method", "n", "r", "K", "error_pct"],
        &table,
    )?;
    ctx.finish(record)?;
    Ok(EXIT_OK)
}
