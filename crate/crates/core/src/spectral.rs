//! Dense symmetric linear algebra.
//!
//! Everything downstream works with [`SymMatrix`], a square matrix that is
//! symmetric up to rounding. The decision variable of the squeeze program,
//! the projections used to measure recovery and the dual variable `Y` are all
//! stored this way.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative symmetry tolerance accepted by [`SymMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenvalues below this (relative to the spectral scale) count as negative.
pub const PSD_TOL: f64 = 1e-8;

/// A dense real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Wraps a square matrix, checking finiteness and symmetry.
    ///
    /// The stored matrix is exactly symmetric: the two triangles are averaged.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::invalid(format!(
                "matrix is {}x{}, expected square",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::invalid("matrix dimension must be positive"));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let scale = m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
        let n = m.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::symmetrized(m))
    }

    /// Averages `m` with its transpose. Callers guarantee finiteness.
    pub(crate) fn symmetrized(m: DMatrix<f64>) -> Self {
        let t = m.transpose();
        SymMatrix((m + t) * 0.5)
    }

    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_row_slice(diag)))
    }

    /// `v vᵀ`.
    pub fn outer(v: &[f64]) -> Self {
        let v = DVector::from_row_slice(v);
        SymMatrix(&v * v.transpose())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix(&self.0 * c)
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.0[(i, j)] * x[j];
            }
            acc += x[i] * row;
        }
        acc
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| (0..n).map(|j| self.0[(i, j)] * x[j]).sum())
            .collect()
    }

    pub fn row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    /// Frobenius distance `‖self − other‖_F`.
    pub fn distance(&self, other: &SymMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

/// Dense matrix file layout: `{"dim": d, "data": [row-major entries]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseJson {
    dim: usize,
    data: Vec<f64>,
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DenseJson {
            dim: self.dim(),
            data: self.row_major(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = DenseJson::deserialize(d)?;
        SymMatrix::from_row_major(raw.dim, &raw.data).map_err(serde::de::Error::custom)
    }
}

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// stored as columns.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            scaled.column_mut(j).scale_mut(w);
        }
        SymMatrix::symmetrized(&scaled * self.eigenvectors.transpose())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
///
/// Each eigenvector is signed so that its largest-magnitude component is
/// positive (first such index on ties), which makes written output
/// reproducible.
pub fn eig_sym(a: &SymMatrix) -> Result<EigenDecomposition> {
    if a.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(eig_sym_matrix(&a.0))
}

pub(crate) fn eig_sym_matrix(a: &DMatrix<f64>) -> EigenDecomposition {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for k in 1..n {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.column_mut(dst).copy_from(&(col * sign));
    }
    EigenDecomposition {
        eigenvalues: values,
        eigenvectors: vectors,
    }
}

/// `V clamp(λ, lo, hi) Vᵀ` without sorting; the hot path of the solvers.
pub(crate) fn clamp_spectrum(a: &DMatrix<f64>, lo: f64, hi: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(a.clone());
    let mut scaled = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(j).scale_mut(lam.clamp(lo, hi));
    }
    let out = &scaled * eig.eigenvectors.transpose();
    let t = out.transpose();
    (out + t) * 0.5
}

/// Euclidean projection onto the spectahedron `{M : 0 ⪯ M ⪯ I}`.
pub fn project_spectahedron(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(eig_sym(a)?.reassemble(|l| l.clamp(0.0, 1.0)))
}

/// Euclidean projection onto the PSD cone.
pub fn project_psd(a: &SymMatrix) -> Result<SymMatrix> {
    Ok(eig_sym(a)?.reassemble(|l| l.max(0.0)))
}

/// Principal square root of a PSD matrix.
///
/// Eigenvalues in `[−1e−6·scale, 0)` are treated as rounding noise and
/// clamped to zero; anything more negative is rejected.
pub fn psd_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let eig = eig_sym(a)?;
    let scale = eig
        .eigenvalues
        .iter()
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let min = eig.min_eigenvalue();
    if min < -1e-6 * scale {
        return Err(Error::NotPsd(min));
    }
    Ok(eig.reassemble(|l| l.max(0.0).sqrt()))
}

/// Rounds `M` to the orthogonal projection onto the eigenspace of
/// eigenvalues strictly above `threshold`.
pub fn rank_round(m: &SymMatrix, threshold: f64) -> Result<(usize, SymMatrix)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!(
            "rank threshold {threshold} outside (0, 1)"
        )));
    }
    let eig = eig_sym(m)?;
    let rank = eig.eigenvalues.iter().filter(|&&l| l > threshold).count();
    let basis = eig.eigenvectors.columns(0, rank).into_owned();
    Ok((rank, projection_from_basis(&basis)))
}

/// `B Bᵀ` for a basis with orthonormal columns.
pub fn projection_from_basis(basis: &DMatrix<f64>) -> SymMatrix {
    if basis.ncols() == 0 {
        return SymMatrix::zeros(basis.nrows());
    }
    SymMatrix::symmetrized(basis * basis.transpose())
}

/// Orthonormal basis for the column span of `vectors` (columns), keeping
/// singular directions above `max(rel_tol, √(1e−13·d)) · σ_max`.
pub fn span_basis(vectors: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let d = vectors.nrows();
    if vectors.ncols() == 0 {
        return DMatrix::zeros(d, 0);
    }
    // Gram route keeps this cheap when there are many more vectors than
    // dimensions: eigenvectors of V Vᵀ span the same space.
    let gram = vectors * vectors.transpose();
    let eig = eig_sym_matrix(&gram);
    let top = eig.eigenvalues[0].max(0.0);
    if top == 0.0 {
        return DMatrix::zeros(d, 0);
    }
    // Singular values are square roots of the Gram eigenvalues. The Gram
    // eigenvalues carry roundoff near ε·d·top, so the cut never goes below
    // that level.
    let cut = top * (rel_tol * rel_tol).max(1e-13 * d as f64);
    let rank = eig.eigenvalues.iter().filter(|&&l| l > cut).count();
    eig.eigenvectors.columns(0, rank).into_owned()
}

/// Projection onto the column span of `vectors`, with its rank.
pub fn span_projection(vectors: &DMatrix<f64>, rel_tol: f64) -> (SymMatrix, usize) {
    let basis = span_basis(vectors, rel_tol);
    let rank = basis.ncols();
    (projection_from_basis(&basis), rank)
}

/// Checks `P = Pᵀ` (by construction) and `P² = P` within `tol`.
pub fn is_projection(p: &SymMatrix, tol: f64) -> bool {
    let sq = &p.0 * &p.0;
    (sq - &p.0).norm() <= tol * p.frobenius_norm().max(1.0)
}

/// Distance between two orthogonal projections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionDistance {
    /// `‖P − Q‖_F`.
    pub frobenius: f64,
    /// Largest principal angle between the ranges, in degrees. Ranges of
    /// different dimension are 90° apart.
    pub max_principal_angle_deg: f64,
}

pub fn projection_distance(p: &SymMatrix, q: &SymMatrix) -> Result<ProjectionDistance> {
    if p.dim() != q.dim() {
        return Err(Error::invalid("projections have different dimensions"));
    }
    if !is_projection(p, 1e-6) || !is_projection(q, 1e-6) {
        return Err(Error::invalid("argument is not an orthogonal projection"));
    }
    let frobenius = p.distance(q);
    let (ep, eq) = (eig_sym(p)?, eig_sym(q)?);
    let rp = ep.eigenvalues.iter().filter(|&&l| l > 0.5).count();
    let rq = eq.eigenvalues.iter().filter(|&&l| l > 0.5).count();
    let angle = if rp != rq {
        90.0
    } else if rp == 0 {
        0.0
    } else {
        let bp = ep.eigenvectors.columns(0, rp);
        let bq = eq.eigenvectors.columns(0, rq);
        let cross = bp.transpose() * bq;
        let sv = cross.singular_values();
        let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
        smallest.clamp(-1.0, 1.0).acos().to_degrees()
    };
    Ok(ProjectionDistance {
        frobenius,
        max_principal_angle_deg: angle,
    })
}

/// Length of the `svec` representation of a `d×d` symmetric matrix.
pub(crate) fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Upper triangle row by row, off-diagonal entries scaled by √2 so that
/// `svec(A)·svec(B) = ⟨A, B⟩_F`.
pub(crate) fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.nrows();
    let mut out = DVector::zeros(svec_len(d));
    let mut k = 0;
    for i in 0..d {
        out[k] = m[(i, i)];
        k += 1;
        for j in (i + 1)..d {
            out[k] = std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]);
            k += 1;
        }
    }
    out
}

pub(crate) fn smat(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        m[(i, i)] = v[k];
        k += 1;
        for j in (i + 1)..d {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

/// `svec(z zᵀ)` written into `out`.
pub(crate) fn svec_outer(z: &[f64], out: &mut [f64]) {
    let d = z.len();
    let mut k = 0;
    for i in 0..d {
        out[k] = z[i] * z[i];
        k += 1;
        for j in (i + 1)..d {
            out[k] = std::f64::consts::SQRT_2 * z[i] * z[j];
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(d: usize, rows: &[f64]) -> SymMatrix {
        SymMatrix::from_row_major(d, rows).unwrap()
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let e = eig_sym(&SymMatrix::identity(3)).unwrap();
        assert!(e.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-14));

        let e = eig_sym(&SymMatrix::from_diagonal(&[3.0, -1.0])).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] + 1.0).abs() < 1e-14);
        assert!((e.eigenvectors[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((e.eigenvectors[(1, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eig_swap_matrix() {
        // Characteristic polynomial λ² − 1: eigenvalues ±1 with (1, ±1)/√2.
        let e = eig_sym(&sym(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!((e.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] + 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.eigenvectors[(0, 0)] - h).abs() < 1e-12);
        assert!((e.eigenvectors[(1, 0)] - h).abs() < 1e-12);
        assert!((e.eigenvectors[(0, 1)].abs() - h).abs() < 1e-12);
        assert!((e.eigenvectors[(0, 1)] + e.eigenvectors[(1, 1)]).abs() < 1e-12);
    }

    #[test]
    fn eig_rejects_non_finite() {
        let m = SymMatrix(DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]));
        assert!(matches!(eig_sym(&m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn new_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(SymMatrix::new(m).is_err());
    }

    #[test]
    fn spectahedron_projection_examples() {
        let p = project_spectahedron(&SymMatrix::from_diagonal(&[2.0, -1.0, 0.5])).unwrap();
        assert!(p.distance(&SymMatrix::from_diagonal(&[1.0, 0.0, 0.5])) < 1e-12);

        let p = project_spectahedron(&sym(2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert!(p.distance(&sym(2, &[0.5, 0.5, 0.5, 0.5])) < 1e-12);

        let inside = sym(2, &[0.5, 0.2, 0.2, 0.3]);
        let p = project_spectahedron(&inside).unwrap();
        assert!(p.distance(&inside) < 1e-10);
    }

    #[test]
    fn sqrt_examples() {
        let r = psd_sqrt(&SymMatrix::identity(3)).unwrap();
        assert!(r.distance(&SymMatrix::identity(3)) < 1e-12);

        let r = psd_sqrt(&SymMatrix::from_diagonal(&[4.0, 0.0])).unwrap();
        assert!(r.distance(&SymMatrix::from_diagonal(&[2.0, 0.0])) < 1e-12);

        let a = sym(2, &[2.0, 1.0, 1.0, 2.0]);
        let r = psd_sqrt(&a).unwrap();
        let e = eig_sym(&r).unwrap();
        assert!((e.eigenvalues[0] - 3f64.sqrt()).abs() < 1e-12);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-12);
        let sq = SymMatrix::symmetrized(r.as_matrix() * r.as_matrix());
        assert!(sq.distance(&a) < 1e-8);
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let a = SymMatrix::from_diagonal(&[1.0, -0.1]);
        assert!(matches!(psd_sqrt(&a), Err(Error::NotPsd(_))));
        // Rounding-level negativity is tolerated.
        assert!(psd_sqrt(&SymMatrix::from_diagonal(&[1.0, -1e-9])).is_ok());
    }

    #[test]
    fn rank_round_examples() {
        let (r, p) = rank_round(&SymMatrix::from_diagonal(&[1.0, 1.0, 0.0]), 0.5).unwrap();
        assert_eq!(r, 2);
        assert!(p.distance(&SymMatrix::from_diagonal(&[1.0, 1.0, 0.0])) < 1e-12);

        let (r, p) = rank_round(&SymMatrix::from_diagonal(&[0.9, 0.2, 0.05]), 0.5).unwrap();
        assert_eq!(r, 1);
        assert!(p.distance(&SymMatrix::from_diagonal(&[1.0, 0.0, 0.0])) < 1e-12);

        let (r, p) = rank_round(&SymMatrix::zeros(3), 0.5).unwrap();
        assert_eq!(r, 0);
        assert_eq!(p.frobenius_norm(), 0.0);

        assert!(rank_round(&SymMatrix::zeros(2), 1.0).is_err());
        assert!(rank_round(&SymMatrix::zeros(2), 0.0).is_err());
    }

    #[test]
    fn projection_distance_examples() {
        let e1 = SymMatrix::outer(&[1.0, 0.0]);
        let e2 = SymMatrix::outer(&[0.0, 1.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let diag = SymMatrix::outer(&[h, h]);

        let same = projection_distance(&e1, &e1).unwrap();
        assert!(same.frobenius < 1e-12 && same.max_principal_angle_deg < 1e-6);

        let orth = projection_distance(&e1, &e2).unwrap();
        assert!((orth.frobenius - 2f64.sqrt()).abs() < 1e-12);
        assert!((orth.max_principal_angle_deg - 90.0).abs() < 1e-9);

        let tilt = projection_distance(&e1, &diag).unwrap();
        assert!((tilt.frobenius - 1.0).abs() < 1e-12);
        assert!((tilt.max_principal_angle_deg - 45.0).abs() < 1e-9);

        let not_proj = SymMatrix::from_diagonal(&[0.5, 0.0]);
        assert!(projection_distance(&not_proj, &e1).is_err());
    }

    #[test]
    fn svec_round_trip_preserves_inner_product() {
        let a = sym(3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = sym(3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        let (sa, sb) = (svec(a.as_matrix()), svec(b.as_matrix()));
        let frob: f64 = a.as_matrix().component_mul(b.as_matrix()).sum();
        assert!((sa.dot(&sb) - frob).abs() < 1e-12);
        assert!((smat(&sa, 3) - a.as_matrix()).norm() < 1e-12);

        let z = [1.0, -2.0, 0.5];
        let mut buf = vec![0.0; 6];
        svec_outer(&z, &mut buf);
        let direct = svec(SymMatrix::outer(&z).as_matrix());
        for (x, y) in buf.iter().zip(direct.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn json_layout() {
        let m = sym(2, &[1.0, 0.25, 0.25, 3.0]);
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"dim":2,"data":[1.0,0.25,0.25,3.0]}"#);
        let back: SymMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
