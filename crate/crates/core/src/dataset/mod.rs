//! Labeled point sets, constraint construction, nearest-neighbor search and
//! synthetic generators.

mod constraints;
mod io;
mod kdtree;
mod synth;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SymMatrix;

pub use constraints::{
    build_constraints_full, build_constraints_nn, cross_class_shortest, cross_class_within,
    ShortestPairs,
};
pub use io::{
    downsample_images, downsample_spectra, load_csv, load_idx, write_csv, CsvOptions, IdxLoad,
};
pub use kdtree::{sq_dist, KdTree, Neighbor};
pub use synth::{
    generate_cube_base, generate_figure1, generate_figure1_with, generate_planted,
    generate_simplex_base, Figure1, Figure1Params, PlantedBase, PlantedModel,
};

/// `n` points in `R^d`, stored row-major, each carrying an integer label.
///
/// Labels are arbitrary integers; `k` is the number of distinct values.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    n: usize,
    d: usize,
    points: Vec<f64>,
    labels: Vec<i64>,
}

impl LabeledDataset {
    /// Builds a dataset from row-major coordinates.
    pub fn from_flat(n: usize, d: usize, points: Vec<f64>, labels: Vec<i64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if points.len() != n * d {
            return Err(Error::invalid(format!(
                "expected {} coordinates for {n} points in dimension {d}, got {}",
                n * d,
                points.len()
            )));
        }
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} labels, got {}",
                labels.len()
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "point {} has a non-finite coordinate",
                pos / d
            )));
        }
        Ok(LabeledDataset {
            n,
            d,
            points,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<i64>) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::invalid(format!("row {i} has a different length")));
        }
        let flat = rows.iter().flatten().copied().collect();
        Self::from_flat(rows.len(), d, flat, labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn label(&self, i: usize) -> i64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Distinct labels in ascending order.
    pub fn classes(&self) -> Vec<i64> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn k(&self) -> usize {
        self.classes().len()
    }

    /// Indices grouped by label, ascending label, ascending index.
    pub fn class_indices(&self) -> BTreeMap<i64, Vec<usize>> {
        let mut map: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            map.entry(l).or_default().push(i);
        }
        map
    }

    /// Points as the columns of a `d × n` matrix.
    pub fn to_columns(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.d, self.n, &self.points)
    }

    /// The dataset `{(A x_i, y_i)}`.
    pub fn transformed(&self, a: &SymMatrix) -> Result<LabeledDataset> {
        if a.dim() != self.d {
            return Err(Error::invalid(format!(
                "operator has dimension {}, data has {}",
                a.dim(),
                self.d
            )));
        }
        let mut out = Vec::with_capacity(self.points.len());
        for i in 0..self.n {
            out.extend(a.apply(self.point(i)));
        }
        Ok(LabeledDataset {
            n: self.n,
            d: self.d,
            points: out,
            labels: self.labels.clone(),
        })
    }

    /// Rows at the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        let mut points = Vec::with_capacity(indices.len() * self.d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            points.extend_from_slice(self.point(i));
            labels.push(self.labels[i]);
        }
        LabeledDataset {
            n: indices.len(),
            d: self.d,
            points,
            labels,
        }
    }

    /// Minimum Euclidean distance between differently labeled points, if any.
    pub fn min_cross_class_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if self.labels[i] != self.labels[j] {
                    let d2 = sq_dist(self.point(i), self.point(j));
                    best = Some(best.map_or(d2, |b| b.min(d2)));
                }
            }
        }
        best.map(f64::sqrt)
    }
}

/// One cross-class difference `z = x_i − x_j` with `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferencePair {
    pub i: usize,
    pub j: usize,
    pub z: Vec<f64>,
}

impl DifferencePair {
    pub fn norm_sq(&self) -> f64 {
        self.z.iter().map(|v| v * v).sum()
    }
}

/// How a constraint set was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pruning {
    Full,
    /// The `s` nearest neighbors in every other class.
    Nn(usize),
    /// Hand-picked or grown by a cutting-plane loop.
    Custom,
}

/// Constraint vectors with the pair each came from.
///
/// Holds one representative per unordered pair, sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    d: usize,
    pairs: Vec<DifferencePair>,
    pruning: Pruning,
}

impl ConstraintSet {
    /// Sorts and deduplicates `pairs` by `(i, j)`.
    pub fn new(d: usize, mut pairs: Vec<DifferencePair>, pruning: Pruning) -> Result<Self> {
        for p in &pairs {
            if p.z.len() != d {
                return Err(Error::invalid(format!(
                    "pair ({}, {}) has dimension {}, expected {d}",
                    p.i,
                    p.j,
                    p.z.len()
                )));
            }
            if p.z.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("constraint vector has non-finite entries"));
            }
        }
        pairs.sort_by_key(|p| (p.i, p.j));
        pairs.dedup_by_key(|p| (p.i, p.j));
        Ok(ConstraintSet { d, pairs, pruning })
    }

    /// Constraint vectors without pair provenance; vector `t` is recorded
    /// under the placeholder pair `(2t, 2t + 1)`.
    pub fn from_vectors(d: usize, vectors: &[Vec<f64>]) -> Result<Self> {
        let pairs = vectors
            .iter()
            .enumerate()
            .map(|(t, z)| DifferencePair {
                i: 2 * t,
                j: 2 * t + 1,
                z: z.clone(),
            })
            .collect();
        Self::new(d, pairs, Pruning::Custom)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[DifferencePair] {
        &self.pairs
    }

    pub fn pruning(&self) -> Pruning {
        self.pruning
    }

    pub fn iter(&self) -> impl Iterator<Item = &DifferencePair> {
        self.pairs.iter()
    }

    /// Position of pair `(i, j)` (in either order), if present.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.min(j), i.max(j));
        self.pairs.binary_search_by_key(&key, |p| (p.i, p.j)).ok()
    }

    /// The subset at the given positions.
    pub fn select(&self, positions: &[usize]) -> ConstraintSet {
        let pairs = positions.iter().map(|&t| self.pairs[t].clone()).collect();
        ConstraintSet::new(self.d, pairs, Pruning::Custom).expect("subset of a valid set")
    }

    /// Adds pairs not already present.
    pub fn extend(&mut self, extra: impl IntoIterator<Item = DifferencePair>) {
        self.pairs.extend(extra);
        self.pairs.sort_by_key(|p| (p.i, p.j));
        self.pairs.dedup_by_key(|p| (p.i, p.j));
        self.pruning = Pruning::Custom;
    }

    /// Smallest `‖z‖²`, or `None` for an empty set.
    pub fn min_norm_sq(&self) -> Option<f64> {
        self.pairs
            .iter()
            .map(|p| p.norm_sq())
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Stratified random split: each class contributes `round(fraction·n_c)`
/// points to the training side, clamped so both sides get at least one.
///
/// Both outputs keep the original row order.
pub fn split_train_test(
    ds: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "fraction {fraction} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, mut idx) in ds.class_indices() {
        if idx.len() < 2 {
            return Err(Error::Stratify { label });
        }
        idx.shuffle(&mut rng);
        let n_train = ((fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}
