//! Baselines for compressive classification: PCA and LDA projections and a
//! k-nearest-neighbor classifier in a transformed metric.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{KdTree, LabeledDataset};
use crate::error::{Error, Result};
use crate::spectral::{eig_sym_matrix, projection_from_basis, SymMatrix};

/// Default LDA ridge: `ε = LDA_RIDGE · tr(S_w)/d`.
pub const LDA_RIDGE: f64 = 1e-6;

/// Eigenvalues below this fraction of the largest count as zero.
const RANK_REL_TOL: f64 = 1e-10;

fn mean(ds: &LabeledDataset, idx: impl Iterator<Item = usize>) -> DVector<f64> {
    let mut mu = DVector::zeros(ds.d());
    let mut count = 0usize;
    for i in idx {
        mu += DVector::from_column_slice(ds.point(i));
        count += 1;
    }
    if count > 0 {
        mu /= count as f64;
    }
    mu
}

/// Projection onto the top `r` principal directions of the globally centered
/// data. Labels are ignored.
///
/// If the centered data has rank below `r`, the projection onto the full data
/// span is returned and a warning is logged.
pub fn pca(ds: &LabeledDataset, r: usize) -> Result<SymMatrix> {
    let d = ds.d();
    if r == 0 || r > d {
        return Err(Error::invalid(format!("pca rank {r} outside 1..={d}")));
    }
    let mu = mean(ds, 0..ds.n());
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..ds.n() {
        let x = DVector::from_column_slice(ds.point(i)) - &mu;
        cov.ger(1.0, &x, &x, 1.0);
    }
    cov /= ds.n() as f64;
    let eig = eig_sym_matrix(&cov);
    let top = eig.eigenvalues[0].max(0.0);
    let rank = eig
        .eigenvalues
        .iter()
        .filter(|&&l| top > 0.0 && l > RANK_REL_TOL * top)
        .count();
    let keep = if r > rank {
        log::warn!(
            "pca: data rank {rank} is below the requested {r}; projecting onto the data span"
        );
        rank
    } else {
        r
    };
    Ok(projection_from_basis(
        &eig.eigenvectors.columns(0, keep).into_owned(),
    ))
}

/// Fisher discriminant projection with the default ridge.
pub fn lda(ds: &LabeledDataset) -> Result<SymMatrix> {
    lda_with_ridge(ds, LDA_RIDGE)
}

/// Fisher discriminant projection with within-class scatter
/// `S_w + ε I`, `ε = ridge · tr(S_w)/d`.
///
/// Two classes give the rank-one projection onto `S_w⁻¹(μ₁ − μ₂)`. More
/// classes solve `S_b w = μ S_w w` and project onto the span of the (at most
/// `k − 1`) directions with nonzero `μ`. A singular scatter with `ridge = 0`
/// is an input error.
pub fn lda_with_ridge(ds: &LabeledDataset, ridge: f64) -> Result<SymMatrix> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::invalid(format!(
            "ridge {ridge} must be finite and >= 0"
        )));
    }
    let classes = ds.class_indices();
    if classes.len() < 2 {
        return Err(Error::invalid("lda needs at least two classes"));
    }
    let d = ds.d();
    let overall = mean(ds, 0..ds.n());
    let mut sw = DMatrix::zeros(d, d);
    let mut sb = DMatrix::zeros(d, d);
    let mut means = Vec::with_capacity(classes.len());
    for idx in classes.values() {
        let mu = mean(ds, idx.iter().copied());
        for &i in idx {
            let x = DVector::from_column_slice(ds.point(i)) - &mu;
            sw.ger(1.0, &x, &x, 1.0);
        }
        let c = &mu - &overall;
        sb.ger(idx.len() as f64, &c, &c, 1.0);
        means.push(mu);
    }
    let eps = ridge * sw.trace() / d as f64;
    for i in 0..d {
        sw[(i, i)] += eps;
    }
    let chol = Cholesky::new(sw.clone())
        .filter(|ch| {
            let diag = ch.l_dirty().diagonal();
            let hi = diag.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            diag.iter().all(|v| v.abs() > 1e-12 * hi)
        })
        .ok_or_else(|| Error::invalid("within-class scatter is singular; use a positive ridge"))?;

    let scale = means.iter().map(|m| m.norm()).fold(1.0_f64, f64::max);
    if means.len() == 2 {
        let diff = &means[0] - &means[1];
        if diff.norm() <= 1e-12 * scale {
            return Err(Error::DegenerateLda);
        }
        let w = chol.solve(&diff);
        let w = &w / w.norm();
        return Ok(projection_from_basis(&DMatrix::from_column_slice(
            d,
            1,
            w.as_slice(),
        )));
    }

    // Whiten with L⁻¹ (S_w = LLᵀ): L⁻¹ S_b L⁻ᵀ u = μ u, w = L⁻ᵀ u.
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::invalid("within-class scatter is singular"))?;
    let whitened = &linv * &sb * linv.transpose();
    let eig = eig_sym_matrix(&(&whitened + whitened.transpose()).scale(0.5));
    let top = eig.eigenvalues[0];
    if top <= 1e-12 * scale * scale {
        return Err(Error::DegenerateLda);
    }
    let keep = eig
        .eigenvalues
        .iter()
        .take(means.len() - 1)
        .filter(|&&v| v > RANK_REL_TOL * top)
        .count();
    // The directions are independent (L⁻ᵀ is invertible), so a thin QR gives
    // an orthonormal basis of their span.
    let w = linv.transpose() * eig.eigenvectors.columns(0, keep);
    Ok(projection_from_basis(&w.qr().q()))
}

/// A K-nearest-neighbor rule over reference points mapped through a fixed
/// operator.
///
/// Votes go to the label with the most neighbors; ties go to the smallest
/// label. Neighbors at equal distance are taken in reference-index order.
#[derive(Debug, Clone)]
pub struct Classifier {
    operator: SymMatrix,
    labels: Vec<i64>,
    k: usize,
    tree: KdTree,
}

/// Predicted labels and, when truth is available, the error rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub labels: Vec<i64>,
    /// Fraction of mismatches in `[0, 1]`.
    pub error_rate: f64,
}

/// Maps `train` through `m_sqrt` and indexes the result.
pub fn knn_fit(train: &LabeledDataset, m_sqrt: &SymMatrix, k: usize) -> Result<Classifier> {
    if k == 0 || k > train.n() {
        return Err(Error::invalid(format!(
            "K = {k} must lie in 1..={}",
            train.n()
        )));
    }
    let mapped = train.transformed(m_sqrt)?;
    Ok(Classifier {
        operator: m_sqrt.clone(),
        labels: train.labels().to_vec(),
        k,
        tree: KdTree::build(mapped.points_flat().to_vec(), train.d())?,
    })
}

impl Classifier {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn operator(&self) -> &SymMatrix {
        &self.operator
    }

    /// Label for one untransformed point.
    pub fn predict_one(&self, x: &[f64]) -> Result<i64> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, classifier expects {}",
                x.len(),
                self.dim()
            )));
        }
        let y = self.operator.apply(x);
        Ok(self.vote(&y))
    }

    fn vote(&self, y: &[f64]) -> i64 {
        let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
        for nb in self.tree.knn(y, self.k) {
            *counts.entry(self.labels[nb.index]).or_default() += 1;
        }
        // BTreeMap iterates labels ascending, so the first maximum wins ties.
        let mut best = (i64::MIN, 0usize);
        for (&label, &c) in &counts {
            if c > best.1 {
                best = (label, c);
            }
        }
        best.0
    }
}

/// Classifies every point of `test` and scores against its labels.
pub fn knn_predict(clf: &Classifier, test: &LabeledDataset) -> Result<Prediction> {
    if test.d() != clf.dim() {
        return Err(Error::invalid(format!(
            "test data has dimension {}, classifier expects {}",
            test.d(),
            clf.dim()
        )));
    }
    let mapped = test.transformed(&clf.operator)?;
    let labels: Vec<i64> = (0..mapped.n()).map(|i| clf.vote(mapped.point(i))).collect();
    let wrong = labels
        .iter()
        .zip(test.labels())
        .filter(|(a, b)| a != b)
        .count();
    let error_rate = if labels.is_empty() {
        0.0
    } else {
        wrong as f64 / labels.len() as f64
    };
    Ok(Prediction { labels, error_rate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::sq_dist;
    use crate::spectral::{is_projection, projection_distance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize, shift: &[f64]) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| {
                (0..d)
                    .map(|j| rng.sample::<f64, _>(StandardNormal) + shift[j])
                    .collect()
            })
            .collect()
    }

    #[test]
    fn pca_on_a_line() {
        let rows: Vec<Vec<f64>> = (0..7).map(|t| vec![t as f64, 2.0 * t as f64]).collect();
        let ds = LabeledDataset::from_rows(&rows, vec![0; 7]).unwrap();
        let p = pca(&ds, 1).unwrap();
        let expect = SymMatrix::outer(&[1.0 / 5f64.sqrt(), 2.0 / 5f64.sqrt()]);
        assert!(p.distance(&expect) < 1e-12);
        // Asking for more than the data rank falls back to the span.
        assert!(pca(&ds, 2).unwrap().distance(&expect) < 1e-12);
        assert!(pca(&ds, 3).is_err());
    }

    #[test]
    fn pca_full_rank_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = gaussian_rows(&mut rng, 50, 4, &[0.0; 4]);
        let ds = LabeledDataset::from_rows(&rows, vec![0; 50]).unwrap();
        let p = pca(&ds, 4).unwrap();
        assert!(p.distance(&SymMatrix::identity(4)) < 1e-9);
        for r in 1..=4 {
            let p = pca(&ds, r).unwrap();
            assert!(is_projection(&p, 1e-9));
            assert!((p.trace() - r as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn lda_separating_axis() {
        // Symmetric clouds around ±e₁ with equal within-class spread.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, sx) in [(0, 1.0), (1, -1.0)] {
            for a in [-1.0, 1.0] {
                for b in [-1.0, 1.0] {
                    rows.push(vec![sx + 0.3 * a, 0.3 * b]);
                    labels.push(c);
                }
            }
        }
        let ds = LabeledDataset::from_rows(&rows, labels).unwrap();
        let p = lda(&ds).unwrap();
        assert!(p.distance(&SymMatrix::outer(&[1.0, 0.0])) < 1e-9);
    }

    #[test]
    fn lda_equal_centroids() {
        let rows = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let ds = LabeledDataset::from_rows(&rows, vec![0, 0, 1, 1]).unwrap();
        assert!(matches!(lda(&ds), Err(Error::DegenerateLda)));
    }

    #[test]
    fn lda_singular_without_ridge() {
        // All points on the x axis: S_w is singular in y.
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![3.0, 0.0],
            vec![4.0, 0.0],
        ];
        let ds = LabeledDataset::from_rows(&rows, vec![0, 0, 1, 1]).unwrap();
        assert!(lda_with_ridge(&ds, 0.0).is_err());
        let p = lda(&ds).unwrap();
        assert!(p.distance(&SymMatrix::outer(&[1.0, 0.0])) < 1e-9);
    }

    #[test]
    fn lda_affine_covariance() {
        // Under x ↦ Ax + c the discriminant direction maps to A⁻ᵀ w.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = 3;
        let mut rows = gaussian_rows(&mut rng, 30, d, &[0.0; 3]);
        rows.extend(gaussian_rows(&mut rng, 30, d, &[1.0, 0.5, -0.5]));
        let labels: Vec<i64> = (0..60).map(|i| (i / 30) as i64).collect();
        let ds = LabeledDataset::from_rows(&rows, labels.clone()).unwrap();
        let a = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                2.0
            } else {
                0.3 * (i + 2 * j) as f64
            }
        });
        let c = DVector::from_vec(vec![5.0, -1.0, 2.0]);
        let mapped: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                (&a * DVector::from_column_slice(r) + &c)
                    .as_slice()
                    .to_vec()
            })
            .collect();
        let ds2 = LabeledDataset::from_rows(&mapped, labels).unwrap();

        let p = lda_with_ridge(&ds, 0.0).unwrap();
        let q = lda_with_ridge(&ds2, 0.0).unwrap();
        let w = crate::spectral::eig_sym(&p)
            .unwrap()
            .eigenvectors
            .column(0)
            .into_owned();
        let w2 = a.transpose().try_inverse().unwrap() * w;
        let expect = SymMatrix::outer((&w2 / w2.norm()).as_slice());
        let angle = projection_distance(&q, &expect)
            .unwrap()
            .max_principal_angle_deg;
        assert!(angle < 1e-6, "angle {angle}");
    }

    #[test]
    fn lda_three_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, shift) in [
            [0.0, 0.0, 0.0, 0.0],
            [4.0, 0.0, 0.0, 0.0],
            [0.0, 4.0, 0.0, 0.0],
        ]
        .iter()
        .enumerate()
        {
            rows.extend(gaussian_rows(&mut rng, 40, 4, shift));
            labels.extend(std::iter::repeat_n(c as i64, 40));
        }
        let ds = LabeledDataset::from_rows(&rows, labels).unwrap();
        let p = lda(&ds).unwrap();
        assert!(is_projection(&p, 1e-9));
        assert!((p.trace() - 2.0).abs() < 1e-9, "trace {}", p.trace());
    }

    #[test]
    fn knn_examples() {
        let rows = [0.0, 0.5, 10.0, 10.5].map(|v| vec![v]).to_vec();
        let ds = LabeledDataset::from_rows(&rows, vec![3, 3, 8, 8]).unwrap();
        let clf = knn_fit(&ds, &SymMatrix::identity(1), 1).unwrap();
        assert_eq!(clf.predict_one(&[1.0]).unwrap(), 3);
        assert_eq!(clf.predict_one(&[10.0]).unwrap(), 8);
        assert_eq!(knn_predict(&clf, &ds).unwrap().error_rate, 0.0);

        // M = 0 collapses everything; the vote among indices 0..K decides.
        let clf = knn_fit(&ds, &SymMatrix::zeros(1), 4).unwrap();
        assert_eq!(clf.predict_one(&[10.0]).unwrap(), 3);

        let single = LabeledDataset::from_rows(&[vec![0.0]], vec![5]).unwrap();
        let clf = knn_fit(&single, &SymMatrix::identity(1), 1).unwrap();
        assert_eq!(clf.predict_one(&[100.0]).unwrap(), 5);
        assert!(knn_fit(&single, &SymMatrix::identity(1), 2).is_err());
    }

    #[test]
    fn knn_vote_tie_goes_to_smallest_label() {
        let rows = [-1.0, 1.0].map(|v| vec![v]).to_vec();
        let ds = LabeledDataset::from_rows(&rows, vec![9, 2]).unwrap();
        let clf = knn_fit(&ds, &SymMatrix::identity(1), 2).unwrap();
        assert_eq!(clf.predict_one(&[-0.9]).unwrap(), 2);
    }

    #[test]
    fn knn_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n = rng.random_range(1..200);
            let rows = gaussian_rows(&mut rng, n, 3, &[0.0; 3]);
            let labels: Vec<i64> = (0..n).map(|_| rng.random_range(0..3)).collect();
            let ds = LabeledDataset::from_rows(&rows, labels).unwrap();
            let m = SymMatrix::from_diagonal(&[1.0, 0.5, 0.0]);
            let clf = knn_fit(&ds, &m, 1).unwrap();
            let mapped = ds.transformed(&m).unwrap();
            for _ in 0..20 {
                let q: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
                let mq = m.apply(&q);
                let best = (0..n)
                    .min_by(|&a, &b| {
                        sq_dist(mapped.point(a), &mq)
                            .total_cmp(&sq_dist(mapped.point(b), &mq))
                            .then(a.cmp(&b))
                    })
                    .unwrap();
                assert_eq!(
                    clf.predict_one(&q).unwrap(),
                    ds.label(best),
                    "trial {trial}"
                );
            }
        }
    }
}
