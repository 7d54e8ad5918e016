use std::collections::BTreeSet;

use super::kdtree::{sq_dist, KdTree};
use super::{ConstraintSet, DifferencePair, LabeledDataset, Pruning};
use crate::error::{Error, Result};
use crate::spectral::{psd_sqrt, SymMatrix};

/// Datasets up to this size are searched by brute force.
const LINEAR_SCAN_MAX: usize = 256;

/// Relative slack for counting a pair as a minimizer.
const SHORTEST_REL_TOL: f64 = 1e-9;

fn require_two_classes(ds: &LabeledDataset) -> Result<()> {
    if ds.k() < 2 {
        return Err(Error::invalid(
            "constraints need at least two distinct labels",
        ));
    }
    Ok(())
}

fn make_pair(ds: &LabeledDataset, a: usize, b: usize) -> Result<DifferencePair> {
    let (i, j) = (a.min(b), a.max(b));
    let z: Vec<f64> = ds
        .point(i)
        .iter()
        .zip(ds.point(j))
        .map(|(x, y)| x - y)
        .collect();
    if z.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateData { i, j });
    }
    Ok(DifferencePair { i, j, z })
}

/// Every cross-class difference, one per unordered pair.
pub fn build_constraints_full(ds: &LabeledDataset) -> Result<ConstraintSet> {
    require_two_classes(ds)?;
    let mut pairs = Vec::new();
    for i in 0..ds.n() {
        for j in (i + 1)..ds.n() {
            if ds.label(i) != ds.label(j) {
                pairs.push(make_pair(ds, i, j)?);
            }
        }
    }
    ConstraintSet::new(ds.d(), pairs, Pruning::Full)
}

/// Differences from each point to its `s` nearest neighbors in every other
/// class, merged over both directions.
pub fn build_constraints_nn(ds: &LabeledDataset, s: usize) -> Result<ConstraintSet> {
    if s == 0 {
        return Err(Error::invalid("s must be at least 1"));
    }
    require_two_classes(ds)?;
    let classes = ds.class_indices();
    let mut trees = Vec::with_capacity(classes.len());
    for (&label, idx) in &classes {
        let sub = ds.subset(idx);
        trees.push((
            label,
            idx,
            KdTree::build(sub.points_flat().to_vec(), ds.d())?,
        ));
    }
    let mut keys = BTreeSet::new();
    for i in 0..ds.n() {
        for (label, idx, tree) in &trees {
            if *label == ds.label(i) {
                continue;
            }
            for nb in tree.knn(ds.point(i), s) {
                let j = idx[nb.index];
                keys.insert((i.min(j), i.max(j)));
            }
        }
    }
    let pairs = keys
        .into_iter()
        .map(|(i, j)| make_pair(ds, i, j))
        .collect::<Result<Vec<_>>>()?;
    ConstraintSet::new(ds.d(), pairs, Pruning::Nn(s))
}

/// Shortest cross-class vectors of a transformed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPairs {
    /// `min ‖M^{1/2}(x_i − x_j)‖` over cross-class pairs; infinite when
    /// there are none.
    pub min_length: f64,
    /// Pairs `(i, j)`, `i < j`, within relative `1e−9` of the minimum, sorted.
    pub pairs: Vec<(usize, usize)>,
}

/// Finds the shortest vectors in `{M^{1/2} z : z ∈ Z(D)}`.
///
/// Small inputs use a linear scan. Larger ones build one k-d tree per class
/// in the transformed space and query it from every point of the other
/// classes: a nearest-neighbor pass finds the minimum, a radius pass collects
/// the near-ties.
pub fn cross_class_shortest(ds: &LabeledDataset, m: &SymMatrix) -> Result<ShortestPairs> {
    if m.dim() != ds.d() {
        return Err(Error::invalid("metric dimension does not match the data"));
    }
    let root = psd_sqrt(m)?;
    let y = ds.transformed(&root)?;
    let slack = (1.0 + SHORTEST_REL_TOL) * (1.0 + SHORTEST_REL_TOL);

    if ds.n() <= LINEAR_SCAN_MAX {
        let mut dists = Vec::new();
        let mut min2 = f64::INFINITY;
        for i in 0..y.n() {
            for j in (i + 1)..y.n() {
                if y.label(i) != y.label(j) {
                    let d2 = sq_dist(y.point(i), y.point(j));
                    min2 = min2.min(d2);
                    dists.push((i, j, d2));
                }
            }
        }
        let pairs = dists
            .into_iter()
            .filter(|&(_, _, d2)| d2 <= min2 * slack)
            .map(|(i, j, _)| (i, j))
            .collect();
        return Ok(ShortestPairs {
            min_length: min2.sqrt(),
            pairs,
        });
    }

    let classes: Vec<(i64, Vec<usize>)> = y.class_indices().into_iter().collect();
    let mut trees = Vec::with_capacity(classes.len());
    for (_, idx) in &classes {
        trees.push(KdTree::build(y.subset(idx).points_flat().to_vec(), y.d())?);
    }
    // Query each unordered class pair once, from the smaller class.
    let mut jobs = Vec::new();
    for a in 0..classes.len() {
        for b in (a + 1)..classes.len() {
            let (q, t) = if classes[a].1.len() <= classes[b].1.len() {
                (a, b)
            } else {
                (b, a)
            };
            jobs.push((q, t));
        }
    }
    let mut min2 = f64::INFINITY;
    for &(q, t) in &jobs {
        for &i in &classes[q].1 {
            if let Some(nb) = trees[t].nearest(y.point(i)) {
                min2 = min2.min(nb.dist_sq);
            }
        }
    }
    let mut pairs = Vec::new();
    if min2.is_finite() {
        for &(q, t) in &jobs {
            for &i in &classes[q].1 {
                for nb in trees[t].within(y.point(i), min2 * slack) {
                    let j = classes[t].1[nb.index];
                    pairs.push((i.min(j), i.max(j)));
                }
            }
        }
    }
    pairs.sort_unstable();
    Ok(ShortestPairs {
        min_length: min2.sqrt(),
        pairs,
    })
}

/// Cross-class pairs `(i, j)`, `i < j`, with `‖x_i − x_j‖² ≤ r2`, sorted.
///
/// Callers pass already transformed points to search in a metric.
pub fn cross_class_within(ds: &LabeledDataset, r2: f64) -> Result<Vec<(usize, usize)>> {
    let mut pairs = Vec::new();
    if ds.n() <= LINEAR_SCAN_MAX {
        for i in 0..ds.n() {
            for j in (i + 1)..ds.n() {
                if ds.label(i) != ds.label(j) && sq_dist(ds.point(i), ds.point(j)) <= r2 {
                    pairs.push((i, j));
                }
            }
        }
        return Ok(pairs);
    }
    let classes: Vec<Vec<usize>> = ds.class_indices().into_values().collect();
    for (a, qa) in classes.iter().enumerate() {
        for tb in classes.iter().skip(a + 1) {
            let tree = KdTree::build(ds.subset(tb).points_flat().to_vec(), ds.d())?;
            for &i in qa {
                for nb in tree.within(ds.point(i), r2) {
                    let j = tb[nb.index];
                    pairs.push((i.min(j), i.max(j)));
                }
            }
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}
