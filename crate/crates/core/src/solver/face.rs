//! Active-set polish for the hard programs.
//!
//! Near an optimum the eigenvalues of `M` split into those at 1 (`U₁`), those
//! at 0 and a free block `U_f`. With the split fixed, `M = U₁U₁ᵀ + U_f S U_fᵀ`
//! and the program in `S` is a linear program,
//! `min tr S` subject to `(U_fᵀz)ᵀ S (U_fᵀz) ≥ Δ² − ‖U₁ᵀz‖²`, which an
//! active-set method solves exactly. Its multipliers give a dual point and
//! hence a lower bound on the optimum of the full program.

use nalgebra::{DMatrix, DVector};

use super::admm::Cone;
use super::worst_violation;
use crate::dataset::ConstraintSet;
use crate::spectral::{eig_sym_matrix, smat, svec, svec_len, svec_outer, SymMatrix};

/// Thresholds tried for the eigenvalue split, relative to 1.
const SPLITS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// Accepted violation of the polished point, relative to `Δ²`.
const EXACT: f64 = 1e-9;

/// Free blocks with more than this many `svec` coordinates are skipped.
const MAX_FREE_DIM: usize = 120;

/// A feasible polished point and a lower bound on the optimal trace.
#[derive(Debug, Clone)]
pub(crate) struct FacePolish {
    pub m: SymMatrix,
    pub lower: f64,
}

/// The smallest-trace feasible polish over all thresholds, if any.
pub(crate) fn polish_face(
    m: &SymMatrix,
    z: &ConstraintSet,
    d2: f64,
    cone: Cone,
) -> Option<FacePolish> {
    let eig = eig_sym_matrix(m.as_matrix());
    let mut best: Option<FacePolish> = None;
    for tau in SPLITS {
        let Some(candidate) = polish_at(m, &eig.eigenvalues, &eig.eigenvectors, z, d2, cone, tau)
        else {
            continue;
        };
        best = Some(match best {
            None => candidate,
            Some(b) => {
                let lower = b.lower.max(candidate.lower);
                let mut keep = if candidate.m.trace() < b.m.trace() {
                    candidate
                } else {
                    b
                };
                keep.lower = lower;
                keep
            }
        });
    }
    best
}

/// True when even the coarsest split leaves a free block too large to
/// polish.
pub(crate) fn too_large(m: &SymMatrix, cone: Cone) -> bool {
    let tau = SPLITS[0];
    let eig = eig_sym_matrix(m.as_matrix());
    let free = eig
        .eigenvalues
        .iter()
        .filter(|&&lam| lam > tau && !(cone == Cone::Spectahedron && lam >= 1.0 - tau))
        .count();
    svec_len(free) > MAX_FREE_DIM
}

fn polish_at(
    m: &SymMatrix,
    values: &DVector<f64>,
    vectors: &DMatrix<f64>,
    z: &ConstraintSet,
    d2: f64,
    cone: Cone,
    tau: f64,
) -> Option<FacePolish> {
    let mut ones = Vec::new();
    let mut free = Vec::new();
    for (j, &lam) in values.iter().enumerate() {
        if cone == Cone::Spectahedron && lam >= 1.0 - tau {
            ones.push(j);
        } else if lam > tau {
            free.push(j);
        }
    }
    let k = free.len();
    let p = svec_len(k);
    if p > MAX_FREE_DIM {
        return None;
    }
    let u1 = vectors.select_columns(&ones);
    let uf = vectors.select_columns(&free);
    let fixed = &u1 * u1.transpose();

    // One normalized row per constraint; rows with no reach into the free
    // block must already hold.
    let mut rows = Vec::with_capacity(z.len());
    let mut rhs = Vec::with_capacity(z.len());
    let mut scales = Vec::with_capacity(z.len());
    let mut kept = Vec::with_capacity(z.len());
    let mut buf = vec![0.0; p];
    for (idx, pair) in z.iter().enumerate() {
        let zi = DVector::from_column_slice(&pair.z);
        let need = d2 - (u1.transpose() * &zi).norm_squared();
        let a = uf.transpose() * &zi;
        svec_outer(a.as_slice(), &mut buf);
        let norm = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= 1e-14 * d2 {
            if need > EXACT * d2 {
                return None;
            }
            continue;
        }
        rows.push(DVector::from_iterator(p, buf.iter().map(|x| x / norm)));
        rhs.push(need / norm);
        scales.push(norm);
        kept.push(idx);
    }

    let (block, gammas) = if k == 0 {
        (DMatrix::zeros(0, 0), Vec::new())
    } else {
        let c = svec(&DMatrix::identity(k, k));
        let mut s = svec(&(uf.transpose() * m.as_matrix() * &uf));
        // Shift along I until every constraint holds; the ones block was
        // rounded so a few may be slightly off.
        let mut shift: f64 = 0.0;
        for (row, &b) in rows.iter().zip(&rhs) {
            let gap = b - row.dot(&s);
            if gap > 0.0 {
                let up = row.dot(&c);
                if up <= 0.0 {
                    return None;
                }
                shift = shift.max(gap / up);
            }
        }
        s += &c * (shift * (1.0 + 1e-12));
        let (s, mu) = active_set_lp(&rows, &rhs, &c, s)?;
        let gammas = mu.into_iter().map(|(i, g)| (i, g / scales[i])).collect();
        (smat(&s, k), gammas)
    };

    if k > 0 {
        let inner = eig_sym_matrix(&block);
        let upper = match cone {
            Cone::Spectahedron => 1.0,
            Cone::Psd => f64::INFINITY,
        };
        if inner.min_eigenvalue() < -EXACT || inner.max_eigenvalue() > upper + EXACT {
            return None;
        }
    }
    let candidate = SymMatrix::symmetrized(fixed + &uf * block * uf.transpose());
    if worst_violation(&candidate, z, d2.sqrt()) > EXACT * d2 {
        return None;
    }
    let gammas: Vec<(usize, f64)> = gammas.into_iter().map(|(row, g)| (kept[row], g)).collect();
    let lower = dual_bound(z, &gammas, d2, cone);
    Some(FacePolish {
        m: candidate,
        lower,
    })
}

/// `Δ²Σγ − tr (G − I)₊` with `G = Σγ zzᵀ` on the spectahedron, and
/// `Δ²Σγ / λ_max(G)` on the PSD cone. Both are dual feasible for any `γ ≥ 0`.
pub(crate) fn dual_bound(z: &ConstraintSet, gammas: &[(usize, f64)], d2: f64, cone: Cone) -> f64 {
    let d = z.dim();
    let mut g = DMatrix::zeros(d, d);
    let mut total = 0.0;
    for &(row, gamma) in gammas {
        let zi = DVector::from_column_slice(&z.pairs()[row].z);
        g += (&zi * zi.transpose()) * gamma;
        total += gamma;
    }
    let eig = eig_sym_matrix(&g);
    match cone {
        Cone::Spectahedron => {
            let excess: f64 = eig.eigenvalues.iter().map(|&l| (l - 1.0).max(0.0)).sum();
            d2 * total - excess
        }
        Cone::Psd => {
            let top = eig.max_eigenvalue();
            if top > 0.0 {
                d2 * total / top
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Primal active-set method for `min cᵀs` subject to `Rs ≥ b`, started from
/// a feasible `s`. Rows of `R` have unit norm. Returns the optimum and the
/// nonzero multipliers by row index, or `None` if the program is unbounded
/// or the iteration cap is hit.
fn active_set_lp(
    rows: &[DVector<f64>],
    rhs: &[f64],
    c: &DVector<f64>,
    mut s: DVector<f64>,
) -> Option<(DVector<f64>, Vec<(usize, f64)>)> {
    let p = c.len();
    let eps = 1e-12 * c.norm().max(1.0);
    let mut active: Vec<usize> = Vec::new();
    let cap = 50 * p + 200;
    for _ in 0..cap {
        let (dir, mu) = if active.is_empty() {
            (-c.clone(), DVector::zeros(0))
        } else {
            let bt =
                DMatrix::from_columns(&active.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>());
            let qr = bt.qr();
            let q = qr.q();
            let qc = q.transpose() * c;
            let dir = -(c - &q * &qc);
            let mu = qr.r().solve_upper_triangular(&qc)?;
            (dir, mu)
        };

        if dir.norm() > eps {
            let mut step = f64::INFINITY;
            let mut block = None;
            let dn = dir.norm();
            for (i, row) in rows.iter().enumerate() {
                if active.contains(&i) {
                    continue;
                }
                let rate = row.dot(&dir);
                if rate < -1e-12 * dn {
                    let t = ((row.dot(&s) - rhs[i]).max(0.0)) / -rate;
                    if t < step {
                        step = t;
                        block = Some(i);
                    }
                }
            }
            let i = block?;
            s += &dir * step;
            active.push(i);
            continue;
        }

        // Stationary on the face: drop the most negative multiplier.
        let (j, &worst) = mu
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("active set is nonempty when the direction vanishes");
        if worst >= -1e-10 {
            let mu = active
                .iter()
                .zip(mu.iter())
                .map(|(&i, &g)| (i, g.max(0.0)))
                .collect();
            return Some((s, mu));
        }
        active.remove(j);
    }
    None
}
