//! ADMM refinement for the squeeze programs in `svec` coordinates.
//!
//! With `â_i = svec(z_i z_iᵀ)/‖z_i‖²` and `b_i = Δ²/‖z_i‖²` the programs read
//!
//! ```text
//! minimize ⟨c, x⟩ + g(Âx)   subject to   x ∈ C
//! ```
//!
//! where `c = svec(I)`, `C` is the spectahedron or the PSD cone and `g` is
//! either the indicator of `{w ≥ b}` or the weighted hinge
//! `Σ κ_i (b_i − w_i)₊` with `κ_i = λ‖z_i‖²`. The splitting `x = y ∈ C`,
//! `Âx = w` gives a linear system with matrix `I + ÂᵀÂ`, factored once.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::dataset::ConstraintSet;
use crate::spectral::{clamp_spectrum, smat, svec, svec_len, svec_outer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Cone {
    Spectahedron,
    Psd,
}

impl Cone {
    fn upper(self) -> f64 {
        match self {
            Cone::Spectahedron => 1.0,
            Cone::Psd => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Penalty {
    Hard,
    Hinge { lambda: f64 },
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AdmmSettings {
    pub max_iters: usize,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct AdmmOutcome {
    pub m: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Larger of the relative primal and dual residuals at the last check.
    pub residual: f64,
    /// `(tr M, worst violation)` at every residual check.
    pub history: Vec<(f64, f64)>,
    /// Final iterate, for warm starts.
    pub state: AdmmState,
}

/// Iterate of the splitting: `y` in the cone, `w ≈ Ây`, scaled duals `u`,
/// `v` and the penalty `ρ` they are scaled by.
#[derive(Debug, Clone)]
pub(crate) struct AdmmState {
    y: DVector<f64>,
    w: DVector<f64>,
    u: DVector<f64>,
    v: DVector<f64>,
    rho: f64,
}

enum KktSolve {
    /// Cholesky of `I + ÂᵀÂ`.
    Direct(Cholesky<f64, Dyn>),
    /// Cholesky of `I + ÂÂᵀ`, applied through the Woodbury identity.
    Woodbury(Cholesky<f64, Dyn>),
}

pub(crate) struct AdmmProblem {
    d: usize,
    a: DMatrix<f64>,
    /// `Âᵀ` stored separately: products with it are column sweeps, which
    /// run faster than `tr_mul`.
    at: DMatrix<f64>,
    b: DVector<f64>,
    norms_sq: DVector<f64>,
    c: DVector<f64>,
    kkt: KktSolve,
}

const ALPHA: f64 = 1.6;
const CHECK_EVERY: usize = 10;
const BALANCE_EVERY: usize = 50;
/// `ρ` stays fixed after this many iterations of a run; convergence needs a
/// fixed penalty eventually.
const BALANCE_UNTIL: usize = 2000;

impl AdmmProblem {
    /// `None` when the constraint set is empty.
    pub fn new(z: &ConstraintSet, delta: f64) -> Option<Self> {
        let m = z.len();
        if m == 0 {
            return None;
        }
        let d = z.dim();
        let dim = svec_len(d);
        let mut a = DMatrix::zeros(m, dim);
        let mut b = DVector::zeros(m);
        let mut norms_sq = DVector::zeros(m);
        let mut row = vec![0.0; dim];
        for (t, p) in z.iter().enumerate() {
            let nz = p.norm_sq();
            svec_outer(&p.z, &mut row);
            for (k, v) in row.iter().enumerate() {
                a[(t, k)] = v / nz;
            }
            b[t] = delta * delta / nz;
            norms_sq[t] = nz;
        }
        let kkt = if dim <= m {
            let k = DMatrix::identity(dim, dim) + a.tr_mul(&a);
            KktSolve::Direct(Cholesky::new(k).expect("I + AᵀA is positive definite"))
        } else {
            let k = DMatrix::identity(m, m) + &a * a.transpose();
            KktSolve::Woodbury(Cholesky::new(k).expect("I + AAᵀ is positive definite"))
        };
        Some(AdmmProblem {
            d,
            at: a.transpose(),
            a,
            b,
            norms_sq,
            c: svec(&DMatrix::identity(d, d)),
            kkt,
        })
    }

    fn solve_kkt(&self, rhs: DVector<f64>) -> DVector<f64> {
        match &self.kkt {
            KktSolve::Direct(ch) => ch.solve(&rhs),
            KktSolve::Woodbury(ch) => {
                let inner = ch.solve(&(&self.a * &rhs));
                rhs - &self.at * inner
            }
        }
    }

    fn prox(&self, penalty: Penalty, t: &DVector<f64>, rho: f64) -> DVector<f64> {
        match penalty {
            Penalty::Hard => t.zip_map(&self.b, |ti, bi| ti.max(bi)),
            Penalty::Hinge { lambda } => DVector::from_fn(t.len(), |i, _| {
                let (ti, bi) = (t[i], self.b[i]);
                let step = lambda * self.norms_sq[i] / rho;
                if ti >= bi {
                    ti
                } else if ti + step <= bi {
                    ti + step
                } else {
                    bi
                }
            }),
        }
    }

    fn worst_violation(&self, ay: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..ay.len() {
            worst = worst.max((self.b[i] - ay[i]) * self.norms_sq[i]);
        }
        worst
    }

    /// Cold start: `y` is `m0` clamped to the cone, duals are zero.
    pub fn cold_state(&self, cone: Cone, penalty: Penalty, m0: &DMatrix<f64>) -> AdmmState {
        let y = svec(&clamp_spectrum(m0, 0.0, cone.upper()));
        let rho = 1.0;
        let w = self.prox(penalty, &(&self.a * &y), rho);
        AdmmState {
            u: DVector::zeros(y.len()),
            v: DVector::zeros(w.len()),
            y,
            w,
            rho,
        }
    }

    /// Carries a state over to this problem. Rows are matched through
    /// `row_map` (old row for each new row); unmatched rows start at the
    /// projection of `â·y` with zero dual.
    pub fn remap_state(
        &self,
        penalty: Penalty,
        old: &AdmmState,
        row_map: &[Option<usize>],
    ) -> AdmmState {
        assert_eq!(row_map.len(), self.b.len());
        let fresh = self.prox(penalty, &(&self.a * &old.y), old.rho);
        let mut w = DVector::zeros(row_map.len());
        let mut v = DVector::zeros(row_map.len());
        for (t, src) in row_map.iter().enumerate() {
            match src {
                Some(k) => {
                    w[t] = old.w[*k];
                    v[t] = old.v[*k];
                }
                None => w[t] = fresh[t],
            }
        }
        AdmmState {
            y: old.y.clone(),
            w,
            u: old.u.clone(),
            v,
            rho: old.rho,
        }
    }

    /// Multipliers of the hard constraints `zᵀMz ≥ Δ²` read off the scaled
    /// dual of `Âx = w`, by constraint index. Any nonnegative vector gives a
    /// dual bound; these converge to an optimal one.
    pub fn multipliers(&self, state: &AdmmState) -> Vec<(usize, f64)> {
        state
            .v
            .iter()
            .enumerate()
            .filter(|(_, &vi)| vi < 0.0)
            .map(|(i, &vi)| (i, -state.rho * vi / self.norms_sq[i]))
            .collect()
    }

    #[cfg(test)]
    pub fn run(
        &self,
        cone: Cone,
        penalty: Penalty,
        m0: &DMatrix<f64>,
        settings: AdmmSettings,
    ) -> AdmmOutcome {
        self.run_from(cone, penalty, self.cold_state(cone, penalty, m0), settings)
    }

    pub fn run_from(
        &self,
        cone: Cone,
        penalty: Penalty,
        state: AdmmState,
        settings: AdmmSettings,
    ) -> AdmmOutcome {
        let hi = cone.upper();
        let AdmmState {
            mut y,
            mut w,
            mut u,
            mut v,
            mut rho,
        } = state;
        let mut history = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        let (mut last_r, mut last_s) = (0.0, 0.0);

        for k in 1..=settings.max_iters {
            iterations = k;
            let rhs = (&y - &u) + &self.at * (&w - &v) - &self.c / rho;
            let x = self.solve_kkt(rhs);
            let ax = &self.a * &x;
            let xh = &x * ALPHA + &y * (1.0 - ALPHA);
            let axh = &ax * ALPHA + &w * (1.0 - ALPHA);

            let y_old = std::mem::replace(
                &mut y,
                svec(&clamp_spectrum(&smat(&(&xh + &u), self.d), 0.0, hi)),
            );
            let w_old = std::mem::replace(&mut w, self.prox(penalty, &(&axh + &v), rho));
            u += &xh - &y;
            v += &axh - &w;

            if k % CHECK_EVERY == 0 {
                let r = ((&x - &y).norm_squared() + (&ax - &w).norm_squared()).sqrt();
                let s = rho
                    * ((&y - &y_old).norm_squared() + (&self.at * (&w - &w_old)).norm_squared())
                        .sqrt();
                let scale_p = x.norm().max(y.norm()).max(w.norm()).max(1.0);
                let scale_d = (rho * (&u + &self.at * &v).norm())
                    .max(self.c.norm())
                    .max(1.0);
                let ay = &self.a * &y;
                history.push((trace_svec(&y, self.d), self.worst_violation(&ay)));
                last_r = r / scale_p;
                last_s = s / scale_d;
                if last_r <= settings.tol && last_s <= settings.tol {
                    converged = true;
                    break;
                }
                if k % BALANCE_EVERY == 0 && k <= BALANCE_UNTIL {
                    if last_r > 10.0 * last_s {
                        rho *= 2.0;
                        u /= 2.0;
                        v /= 2.0;
                    } else if last_s > 10.0 * last_r {
                        rho /= 2.0;
                        u *= 2.0;
                        v *= 2.0;
                    }
                }
            }
        }
        log::debug!(
            "admm: {iterations} iterations, converged={converged}, residuals {last_r:.2e}/{last_s:.2e}"
        );
        AdmmOutcome {
            m: smat(&y, self.d),
            iterations,
            converged,
            residual: last_r.max(last_s),
            history,
            state: AdmmState { y, w, u, v, rho },
        }
    }
}

fn trace_svec(v: &DVector<f64>, d: usize) -> f64 {
    let mut k = 0;
    let mut tr = 0.0;
    for i in 0..d {
        tr += v[k];
        k += d - i;
    }
    tr
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ConstraintSet, DifferencePair, Pruning};

    fn single(z: Vec<f64>) -> ConstraintSet {
        let d = z.len();
        ConstraintSet::new(d, vec![DifferencePair { i: 0, j: 1, z }], Pruning::Custom).unwrap()
    }

    #[test]
    fn trace_of_svec() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        assert_eq!(trace_svec(&svec(&m), 3), 11.0);
    }

    #[test]
    fn hard_two_point() {
        let z = single(vec![2.0, 0.0]);
        let p = AdmmProblem::new(&z, 1.0).unwrap();
        let out = p.run(
            Cone::Spectahedron,
            Penalty::Hard,
            &DMatrix::identity(2, 2),
            AdmmSettings {
                max_iters: 20000,
                tol: 1e-10,
            },
        );
        assert!(out.converged);
        let expect = DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 0.0]);
        assert!((out.m - expect).norm() < 1e-7);
    }

    #[test]
    fn woodbury_path_matches() {
        // One constraint in d = 3 gives m = 1 < dim = 6.
        let z = single(vec![1.0, 1.0, 0.0]);
        let p = AdmmProblem::new(&z, 1.0).unwrap();
        assert!(matches!(p.kkt, KktSolve::Woodbury(_)));
        let out = p.run(
            Cone::Psd,
            Penalty::Hard,
            &DMatrix::identity(3, 3),
            AdmmSettings {
                max_iters: 20000,
                tol: 1e-10,
            },
        );
        // zzᵀ/‖z‖⁴ with ‖z‖² = 2.
        let expect =
            DMatrix::from_row_slice(3, 3, &[0.25, 0.25, 0.0, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0]);
        assert!((out.m - expect).norm() < 1e-7);
    }
}
