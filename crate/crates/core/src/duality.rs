//! Dual certificates for the squeeze program.
//!
//! The dual of `min tr M s.t. zᵀMz ≥ Δ², 0 ⪯ M ⪯ I` is
//!
//! ```text
//! maximize Δ² Σ γ(z) − tr Y   subject to   Σ γ(z) zzᵀ − Y ⪯ I,  Y ⪰ 0,  γ ≥ 0.
//! ```
//!
//! A feasible pair `(γ, Y)` whose value matches `tr M` proves `M` optimal.
//! Given a candidate `M`, complementary slackness pins down where such a
//! pair can live: `γ` is supported on the tight constraints
//! `Z₀ = {z : zᵀMz = Δ²}`, the column space of `Y` lies in the fixed space
//! `E = {x : Mx = x}`, and `M = Σ γ(z)(M^{1/2}z)(M^{1/2}z)ᵀ − Y`.
//! [`find_certificate`] searches that set; [`certify`] runs the whole check.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analysis::lambda_min_nonzero;
use crate::dataset::{
    cross_class_shortest, cross_class_within, ConstraintSet, DifferencePair, LabeledDataset,
};
use crate::error::{Error, Result};
use crate::spectral::{
    clamp_spectrum, eig_sym, eig_sym_matrix, psd_sqrt, smat, span_projection, svec, svec_len,
    SymMatrix,
};

/// Success threshold for the search residuals.
pub const FINDCERT_TOL: f64 = 1e-7;
/// Iteration cap for the alternating projections.
pub const FINDCERT_MAX_ITERS: usize = 50_000;
/// Residual bound for a certified verdict.
pub const CERTIFY_RESIDUAL_TOL: f64 = 1e-6;
/// Relative gap bound for a certified verdict.
pub const CERTIFY_GAP_TOL: f64 = 1e-3;
/// Relative gap bound for the gap-only verdict.
pub const GAP_ONLY_TOL: f64 = 1e-2;

/// A dual point `(γ, Y)`.
///
/// `gamma[k] = (index, value)` weights `pairs[k]`; `index` is the position of
/// the pair in whatever list the certificate was built against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualCertificate {
    pub delta: f64,
    pub gamma: Vec<(usize, f64)>,
    pub pairs: Vec<DifferencePair>,
    #[serde(rename = "Y")]
    pub y: SymMatrix,
}

/// Violations of the dual constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualFeasibility {
    /// `max(0, λ_max(Σ γ zzᵀ − Y − I))`.
    pub dual_psd: f64,
    /// `max(0, −min γ)`.
    pub gamma_negativity: f64,
    /// `max(0, −λ_min(Y))`.
    pub y_negativity: f64,
}

impl DualFeasibility {
    pub fn max(&self) -> f64 {
        self.dual_psd
            .max(self.gamma_negativity)
            .max(self.y_negativity)
    }
}

impl DualCertificate {
    /// The always-feasible certificate `γ = 0, Y = 0`.
    pub fn zero(d: usize, delta: f64) -> Self {
        DualCertificate {
            delta,
            gamma: Vec::new(),
            pairs: Vec::new(),
            y: SymMatrix::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.y.dim()
    }

    pub fn gamma_sum(&self) -> f64 {
        self.gamma.iter().map(|g| g.1).sum()
    }

    /// `Σ γ(z) zzᵀ`.
    pub fn gram(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut g = DMatrix::zeros(d, d);
        for ((_, w), p) in self.gamma.iter().zip(&self.pairs) {
            let z = DVector::from_column_slice(&p.z);
            g += (&z * z.transpose()) * *w;
        }
        g
    }

    pub fn feasibility(&self) -> DualFeasibility {
        let d = self.dim();
        let cap = self.gram() - self.y.as_matrix() - DMatrix::identity(d, d);
        let cap_max = eig_sym_matrix(&cap).max_eigenvalue();
        let y_min = eig_sym_matrix(self.y.as_matrix()).min_eigenvalue();
        let g_min = self.gamma.iter().map(|g| g.1).fold(0.0_f64, f64::min);
        DualFeasibility {
            dual_psd: cap_max.max(0.0),
            gamma_negativity: (-g_min).max(0.0),
            y_negativity: (-y_min).max(0.0),
        }
    }

    /// Dual invariants: `γ ≥ 0`, `Y ⪰ 0` within `1e−8`, cap within `1e−7`.
    pub fn is_feasible(&self) -> bool {
        let f = self.feasibility();
        f.gamma_negativity == 0.0 && f.y_negativity <= 1e-8 && f.dual_psd <= FINDCERT_TOL
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: DualCertificate = serde_json::from_str(s)?;
        if c.gamma.len() != c.pairs.len() {
            return Err(Error::format(None, "gamma and pairs differ in length"));
        }
        if c.pairs.iter().any(|p| p.z.len() != c.y.dim()) {
            return Err(Error::format(None, "pair dimension does not match Y"));
        }
        Ok(c)
    }
}

/// `Δ² Σ γ(z) − tr Y`.
pub fn dual_objective(cert: &DualCertificate, delta: f64) -> f64 {
    delta * delta * cert.gamma_sum() - cert.y.trace()
}

/// Default tightness tolerance for a solve with feasibility tolerance
/// `tol_feas`.
pub fn default_tight_tol(tol_feas: f64) -> f64 {
    1e-6 * (1.0 + 1e3 * tol_feas)
}

/// Positions of constraints with `|zᵀMz − Δ²| ≤ tol·Δ²`.
pub fn tight_constraints(m: &SymMatrix, z: &ConstraintSet, delta: f64, tol: f64) -> Vec<usize> {
    let d2 = delta * delta;
    z.iter()
        .enumerate()
        .filter(|(_, p)| (m.quad_form(&p.z) - d2).abs() <= tol * d2)
        .map(|(t, _)| t)
        .collect()
}

/// Orthonormal basis (columns) of the eigenspace of `M` with eigenvalues
/// `≥ 1 − tol`.
pub fn fixed_space(m: &SymMatrix, tol: f64) -> Result<DMatrix<f64>> {
    let e = eig_sym(m)?;
    let k = e.eigenvalues.iter().filter(|&&l| l >= 1.0 - tol).count();
    Ok(e.eigenvectors.columns(0, k).into_owned())
}

/// Residuals of a candidate solution of the certificate search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FindCertResiduals {
    /// `‖M − Σ γ(z)(M^{1/2}z)(M^{1/2}z)ᵀ + Y‖_F`.
    pub stationarity: f64,
    /// `max(0, λ_max(Σ γ zzᵀ − Y − I))`.
    pub cap: f64,
    /// `‖Π_{E⊥} Y‖_F`.
    pub col_y: f64,
    pub gamma_negativity: f64,
    pub y_negativity: f64,
}

impl FindCertResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.cap)
            .max(self.col_y)
            .max(self.gamma_negativity)
            .max(self.y_negativity)
    }
}

impl fmt::Display for FindCertResiduals {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stationarity {:.3e}, cap {:.3e}, col Y {:.3e}, gamma {:.3e}, Y {:.3e}",
            self.stationarity, self.cap, self.col_y, self.gamma_negativity, self.y_negativity
        )
    }
}

/// Searches for `(γ, Y)` with `supp γ ⊆ Z₀`, `Col Y ⊆ E` satisfying
///
/// ```text
/// M = Σ γ(z)(M^{1/2}z)(M^{1/2}z)ᵀ − Y,   Σ γ(z) zzᵀ − Y ⪯ I,   Y ⪰ 0,   γ ≥ 0.
/// ```
///
/// Writing `Y = V W Vᵀ` for an orthonormal basis `V` of `E` and introducing a
/// slack `S = I − Σ γ zzᵀ + Y`, the conditions become a linear system in
/// `(γ, svec W, svec S)` intersected with the cone `γ ≥ 0, W ⪰ 0, S ⪰ 0`.
/// The least-squares solution of the stationarity equations is tried first.
/// Failing that, Dykstra's alternating projections between the two sets,
/// started from that solution clamped to the cone, converge to a point of
/// the intersection. Success is declared once every residual is below
/// `1e−7` at a cone iterate.
pub fn find_certificate(
    m: &SymMatrix,
    z0: &[DifferencePair],
    e: &DMatrix<f64>,
    delta: f64,
) -> Result<DualCertificate> {
    let d = m.dim();
    if e.nrows() != d || z0.iter().any(|p| p.z.len() != d) {
        return Err(Error::invalid("dimension mismatch in certificate search"));
    }
    let root = psd_sqrt(m)?;
    let dim = svec_len(d);
    let ne = e.ncols();
    let dim_w = svec_len(ne);
    let n0 = z0.len();
    let nvar = n0 + dim_w + dim;

    // Columns of the linear map, stacked as [stationarity rows; cap rows].
    let mut l = DMatrix::zeros(2 * dim, nvar);
    for (t, p) in z0.iter().enumerate() {
        let z = DVector::from_column_slice(&p.z);
        let mz = root.as_matrix() * &z;
        l.view_mut((0, t), (dim, 1))
            .copy_from(&svec(&(&mz * mz.transpose())));
        l.view_mut((dim, t), (dim, 1))
            .copy_from(&svec(&(&z * z.transpose())));
    }
    for k in 0..dim_w {
        let mut unit = DVector::zeros(dim_w);
        unit[k] = 1.0;
        let y_k = e * smat(&unit, ne) * e.transpose();
        let col = -svec(&y_k);
        l.view_mut((0, n0 + k), (dim, 1)).copy_from(&col);
        l.view_mut((dim, n0 + k), (dim, 1)).copy_from(&col);
    }
    for k in 0..dim {
        l[(dim + k, n0 + dim_w + k)] = 1.0;
    }
    let mut rhs = DVector::zeros(2 * dim);
    rhs.rows_mut(0, dim).copy_from(&svec(m.as_matrix()));
    rhs.rows_mut(dim, dim)
        .copy_from(&svec(&DMatrix::identity(d, d)));

    let l_pinv = l
        .clone()
        .pseudo_inverse(1e-12 * l.norm().max(1.0))
        .map_err(|e| Error::invalid(format!("pseudo-inverse failed: {e}")))?;

    let project_affine = |v: &DVector<f64>| -> DVector<f64> { v - &l_pinv * (&l * v - &rhs) };
    let project_cone = |v: &DVector<f64>| -> DVector<f64> {
        let mut out = v.clone();
        for t in 0..n0 {
            out[t] = out[t].max(0.0);
        }
        if ne > 0 {
            let w = smat(&v.rows(n0, dim_w).into_owned(), ne);
            out.rows_mut(n0, dim_w)
                .copy_from(&svec(&clamp_spectrum(&w, 0.0, f64::INFINITY)));
        }
        let s = smat(&v.rows(n0 + dim_w, dim).into_owned(), d);
        out.rows_mut(n0 + dim_w, dim)
            .copy_from(&svec(&clamp_spectrum(&s, 0.0, f64::INFINITY)));
        out
    };
    let assemble = |v: &DVector<f64>| -> DualCertificate {
        let gamma = (0..n0).map(|t| (t, v[t])).collect();
        let y = if ne > 0 {
            let w = smat(&v.rows(n0, dim_w).into_owned(), ne);
            SymMatrix::symmetrized(e * w * e.transpose())
        } else {
            SymMatrix::zeros(d)
        };
        DualCertificate {
            delta,
            gamma,
            pairs: z0.to_vec(),
            y,
        }
    };

    // Stationarity alone is linear in (γ, W) and usually pins them down, in
    // which case its least-squares solution is the certificate. Otherwise it
    // still makes a good starting point.
    let mut x = DVector::zeros(nvar);
    let stat = l.view((0, 0), (dim, n0 + dim_w)).into_owned();
    let stat_pinv = (stat.ncols() > 0)
        .then(|| {
            stat.clone()
                .pseudo_inverse(1e-12 * stat.norm().max(1.0))
                .ok()
        })
        .flatten();
    if let Some(stat_pinv) = stat_pinv {
        let gw = stat_pinv * rhs.rows(0, dim);
        x.rows_mut(0, n0 + dim_w).copy_from(&gw);
        let slack = rhs.rows(dim, dim) - l.view((dim, 0), (dim, n0 + dim_w)) * &gw;
        x.rows_mut(n0 + dim_w, dim).copy_from(&slack);
        let cert = assemble(&x);
        if certificate_residuals(m, &root, &cert, e).max() <= FINDCERT_TOL {
            log::debug!("certificate found by least squares");
            return Ok(cert);
        }
        x = project_cone(&x);
    }
    let mut p = DVector::zeros(nvar);
    let mut q = DVector::zeros(nvar);
    let mut best = f64::INFINITY;
    let mut best_at = 0;
    let mut last = None;
    for k in 1..=FINDCERT_MAX_ITERS {
        let yv = project_affine(&(&x + &p));
        p = &x + &p - &yv;
        let xn = project_cone(&(&yv + &q));
        q = &yv + &q - &xn;
        x = xn;

        if k % 10 == 0 || k == 1 {
            // Cheap screen on the linear residual before the full check.
            let lin = (&l * &x - &rhs).norm();
            if lin <= FINDCERT_TOL {
                let cert = assemble(&x);
                let res = certificate_residuals(m, &root, &cert, e);
                if res.max() <= FINDCERT_TOL {
                    log::debug!("certificate found after {k} iterations");
                    return Ok(cert);
                }
            }
            if lin < best * 0.99 {
                best = lin;
                best_at = k;
            } else if k - best_at >= 5_000 {
                log::debug!("certificate search plateaued at {lin:.3e}");
                last = Some(k);
                break;
            }
        }
    }
    let iterations = last.unwrap_or(FINDCERT_MAX_ITERS);
    let cert = assemble(&x);
    Err(Error::CertificateNotFound {
        iterations,
        residuals: certificate_residuals(m, &root, &cert, e),
    })
}

fn certificate_residuals(
    m: &SymMatrix,
    root: &SymMatrix,
    cert: &DualCertificate,
    e: &DMatrix<f64>,
) -> FindCertResiduals {
    let d = m.dim();
    let mut sum_b = DMatrix::zeros(d, d);
    for ((_, w), p) in cert.gamma.iter().zip(&cert.pairs) {
        let mz = root.as_matrix() * DVector::from_column_slice(&p.z);
        sum_b += (&mz * mz.transpose()) * *w;
    }
    let stationarity = (m.as_matrix() - sum_b + cert.y.as_matrix()).norm();
    let perp = DMatrix::identity(d, d) - e * e.transpose();
    let col_y = (perp * cert.y.as_matrix()).norm();
    let f = cert.feasibility();
    FindCertResiduals {
        stationarity,
        cap: f.dual_psd,
        col_y,
        gamma_negativity: f.gamma_negativity,
        y_negativity: f.y_negativity,
    }
}

/// Outcome of [`certify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    GapOnly,
    Failed,
}

/// Named residuals of a certificate against a primal point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateResiduals {
    pub dual_psd: f64,
    pub gamma_negativity: f64,
    pub y_negativity: f64,
    /// `max γ(z)·|zᵀMz − Δ²|`.
    pub slack_support: f64,
    /// `‖Π_{E⊥} Y‖_F`.
    pub slack_col_y: f64,
    /// `‖M − Σ γ(z)(M^{1/2}z)(M^{1/2}z)ᵀ + Y‖_F`.
    pub slack_stationarity: f64,
}

impl CertificateResiduals {
    pub fn max(&self) -> f64 {
        [
            self.dual_psd,
            self.gamma_negativity,
            self.y_negativity,
            self.slack_support,
            self.slack_col_y,
            self.slack_stationarity,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Result of certifying a candidate optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub delta: f64,
    /// `tr M`.
    pub primal_value: f64,
    /// Value of the certificate, or 0 (the zero certificate) if none.
    pub dual_value: f64,
    pub gap: f64,
    /// `min ‖M^{1/2}z‖` over cross-class pairs.
    pub min_length: f64,
    pub tight_set_size: usize,
    pub fixed_space_dim: usize,
    pub residuals: Option<CertificateResiduals>,
    pub verdict: Verdict,
    /// A shortest pair when `M` is infeasible.
    pub violating_pair: Option<(usize, usize)>,
    pub certificate: Option<DualCertificate>,
    /// Why the verdict is not `certified`.
    pub note: Option<String>,
}

/// Options for [`certify_with`].
#[derive(Debug, Clone, Default)]
pub struct CertifyOptions {
    /// Feasibility tolerance of the solve that produced `M`; `1e−6` if unset.
    pub tol_feas: Option<f64>,
    /// An independently obtained dual point for the gap-only fallback.
    pub hint: Option<DualCertificate>,
}

/// Evaluates a certificate against a primal point.
pub fn evaluate_certificate(
    m: &SymMatrix,
    cert: &DualCertificate,
    e: &DMatrix<f64>,
) -> Result<CertificateResiduals> {
    let root = psd_sqrt(m)?;
    let base = certificate_residuals(m, &root, cert, e);
    let d2 = cert.delta * cert.delta;
    let slack_support = cert
        .gamma
        .iter()
        .zip(&cert.pairs)
        .map(|((_, w), p)| w.abs() * (m.quad_form(&p.z) - d2).abs())
        .fold(0.0, f64::max);
    Ok(CertificateResiduals {
        dual_psd: base.cap,
        gamma_negativity: base.gamma_negativity,
        y_negativity: base.y_negativity,
        slack_support,
        slack_col_y: base.col_y,
        slack_stationarity: base.stationarity,
    })
}

/// [`certify_with`] with default options.
pub fn certify(ds: &LabeledDataset, m: &SymMatrix, delta: f64) -> Result<CertificateReport> {
    certify_with(ds, m, delta, &CertifyOptions::default())
}

/// Checks that `M` is feasible for the squeeze program on `ds` and searches
/// for a dual certificate of its optimality.
///
/// Step one finds the shortest cross-class vectors in the metric `M`; if
/// one is shorter than `Δ(1 − tol_feas)` the verdict is `failed`. Step two
/// collects the tight pairs and the fixed space of `M` and runs
/// [`find_certificate`], widening both tolerances by 10 and retrying once on
/// failure.
pub fn certify_with(
    ds: &LabeledDataset,
    m: &SymMatrix,
    delta: f64,
    opts: &CertifyOptions,
) -> Result<CertificateReport> {
    if !(delta > 0.0) {
        return Err(Error::invalid("delta must be positive"));
    }
    if m.dim() != ds.d() {
        return Err(Error::invalid("matrix dimension does not match the data"));
    }
    let tol_feas = opts.tol_feas.unwrap_or(1e-6);
    let primal = m.trace();
    let d2 = delta * delta;
    let e_check = eig_sym(m)?;
    if e_check.min_eigenvalue() < -1e-8 || e_check.max_eigenvalue() > 1.0 + 1e-8 {
        return Err(Error::invalid("M is not in the spectahedron"));
    }

    let shortest = cross_class_shortest(ds, m)?;
    let mut report = CertificateReport {
        delta,
        primal_value: primal,
        dual_value: 0.0,
        gap: primal,
        min_length: shortest.min_length,
        tight_set_size: 0,
        fixed_space_dim: 0,
        residuals: None,
        verdict: Verdict::Failed,
        violating_pair: None,
        certificate: None,
        note: None,
    };
    if shortest.min_length < delta * (1.0 - tol_feas) {
        report.violating_pair = shortest.pairs.first().copied();
        report.note = Some(format!(
            "infeasible: shortest cross-class length {} < delta {delta}",
            shortest.min_length
        ));
        return Ok(report);
    }

    let root = psd_sqrt(m)?;
    let y = ds.transformed(&root)?;
    let mut tol = default_tight_tol(tol_feas);
    let mut e_tol = 1e-6;
    let mut last_err = None;
    for attempt in 0..2 {
        let keys = cross_class_within(&y, d2 * (1.0 + tol))?;
        let z0: Vec<DifferencePair> = keys
            .iter()
            .map(|&(i, j)| DifferencePair {
                i,
                j,
                z: ds
                    .point(i)
                    .iter()
                    .zip(ds.point(j))
                    .map(|(a, b)| a - b)
                    .collect(),
            })
            .collect();
        let e = fixed_space(m, e_tol)?;
        report.tight_set_size = z0.len();
        report.fixed_space_dim = e.ncols();
        match find_certificate(m, &z0, &e, delta) {
            Ok(cert) => {
                let residuals = evaluate_certificate(m, &cert, &e)?;
                let dual = dual_objective(&cert, delta);
                report.dual_value = dual;
                report.gap = primal - dual;
                report.residuals = Some(residuals);
                let ok_gap = report.gap <= CERTIFY_GAP_TOL * primal.max(1.0);
                let ok_res = residuals.max() <= CERTIFY_RESIDUAL_TOL;
                report.verdict = if ok_gap && ok_res {
                    Verdict::Certified
                } else {
                    report.note = Some(format!(
                        "certificate found but gap {:.3e} or residual {:.3e} too large",
                        report.gap,
                        residuals.max()
                    ));
                    Verdict::Failed
                };
                report.certificate = Some(cert);
                return Ok(report);
            }
            Err(err) => {
                log::debug!("certificate attempt {attempt} failed: {err}");
                last_err = Some(err.to_string());
                tol *= 10.0;
                e_tol *= 10.0;
            }
        }
    }

    if let Some(hint) = &opts.hint {
        if hint.dim() == m.dim() && hint.is_feasible() {
            let dual = dual_objective(hint, delta);
            let gap = primal - dual;
            if gap <= GAP_ONLY_TOL * primal.max(1.0) {
                report.dual_value = dual;
                report.gap = gap;
                report.verdict = Verdict::GapOnly;
                report.note = Some("no certificate; supplied dual point bounds the gap".into());
                return Ok(report);
            }
        }
    }
    report.note = last_err;
    Ok(report)
}

/// Tight-constraint count against the generic bound `(C(d+1, 2) + 1)²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightCount {
    pub count: usize,
    pub bound: usize,
    pub exceeds: bool,
}

pub fn tight_count_bound(d: usize) -> usize {
    let c = d * (d + 1) / 2 + 1;
    c * c
}

pub fn count_tight_vs_bound(m: &SymMatrix, z: &ConstraintSet, delta: f64, tol: f64) -> TightCount {
    let count = tight_constraints(m, z, delta, tol).len();
    let bound = tight_count_bound(z.dim());
    TightCount {
        count,
        bound,
        exceeds: count >= bound,
    }
}

/// The certificate that proves the span projection optimal when the contact
/// vectors have length `Δ` and span the data.
///
/// With `G = Σ_{±z ∈ contacts} zzᵀ` and `λ` its smallest nonzero eigenvalue,
/// `γ ≡ 1/λ` on every signed contact and `Y = G/λ − Π`. Stored per unordered
/// representative, so each `γ` entry is `2/λ`. Returns the certificate with
/// the projection `Π` onto the span of the points.
pub fn span_projection_certificate(
    ds: &LabeledDataset,
    contacts: &[DifferencePair],
    delta: f64,
) -> Result<(DualCertificate, SymMatrix)> {
    let lambda = lambda_min_nonzero(contacts)?;
    let (pi, _) = span_projection(&ds.to_columns(), 1e-10);
    let d = ds.d();
    let mut g = DMatrix::zeros(d, d);
    for p in contacts {
        let z = DVector::from_column_slice(&p.z);
        g += (&z * z.transpose()) * 2.0;
    }
    let y = SymMatrix::symmetrized(g / lambda - pi.as_matrix());
    let cert = DualCertificate {
        delta,
        gamma: (0..contacts.len()).map(|t| (t, 2.0 / lambda)).collect(),
        pairs: contacts.to_vec(),
        y,
    };
    Ok((cert, pi))
}
