//! Geometric diagnostics: contact vectors, Δ-fixedness, the squeeze-once
//! property, signal-to-noise ratios, recovery error and statistical
//! dimension.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::pca;
use crate::dataset::{
    build_constraints_full, build_constraints_nn, generate_figure1_with, generate_planted,
    ConstraintSet, DifferencePair, Figure1Params, LabeledDataset, PlantedModel,
};
use crate::duality::{certify_with, CertificateReport, CertifyOptions, Verdict};
use crate::error::{Error, Result};
use crate::solver::{solve, solve_with_cuts, Mode, SqueezeConfig, SqueezeResult};
use crate::spectral::{
    eig_sym_matrix, projection_distance, psd_sqrt, rank_round, span_projection, SymMatrix,
};

/// Shortest vectors of a constraint set: every pair whose length is within
/// relative `rel_tol` of the minimum.
pub fn contact_vectors(z: &ConstraintSet, rel_tol: f64) -> Result<Vec<DifferencePair>> {
    let min = z.min_norm_sq().ok_or(Error::NoConstraints)?.sqrt();
    let cut = min * (1.0 + rel_tol);
    Ok(z.iter()
        .filter(|p| p.norm_sq().sqrt() <= cut)
        .cloned()
        .collect())
}

/// Sign-normalized copy: first nonzero coordinate positive.
fn canonical_sign(z: &[f64]) -> Vec<f64> {
    let flip = z.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0);
    z.iter().map(|v| if flip { -v } else { *v } + 0.0).collect()
}

/// Smallest nonzero eigenvalue of `Σ_{z ∈ Z₀} zzᵀ` where `Z₀` contains both
/// `±z` for every contact.
///
/// Contacts are treated as a set of vectors: pairs with the same difference
/// vector (up to sign) count once, and each distinct vector contributes
/// `2zzᵀ`. Eigenvalues below `1e−10·λ_max` count as zero.
pub fn lambda_min_nonzero(contacts: &[DifferencePair]) -> Result<f64> {
    let d = contacts
        .first()
        .map(|p| p.z.len())
        .ok_or(Error::NoConstraints)?;
    let mut keys: Vec<Vec<u64>> = Vec::new();
    let mut g = DMatrix::zeros(d, d);
    for p in contacts {
        let c = canonical_sign(&p.z);
        let key: Vec<u64> = c.iter().map(|v| v.to_bits()).collect();
        if keys.contains(&key) {
            continue;
        }
        keys.push(key);
        let z = DVector::from_column_slice(&c);
        g += (&z * z.transpose()) * 2.0;
    }
    let e = eig_sym_matrix(&g);
    let top = e.max_eigenvalue();
    if !(top > 0.0) {
        return Err(Error::DegenerateContacts);
    }
    Ok(e.eigenvalues
        .iter()
        .copied()
        .filter(|&l| l > 1e-10 * top)
        .fold(f64::INFINITY, f64::min))
}

/// `λ / (2 r σ²)`.
pub fn snr(lambda_min_nonzero: f64, r: usize, sigma_sq: f64) -> Result<f64> {
    if !(lambda_min_nonzero > 0.0 && sigma_sq > 0.0) || r == 0 {
        return Err(Error::invalid("snr inputs must be positive"));
    }
    Ok(lambda_min_nonzero / (2.0 * r as f64 * sigma_sq))
}

/// Noise variance per coordinate giving the requested SNR.
pub fn sigma_sq_for_snr(lambda_min_nonzero: f64, r: usize, snr: f64) -> Result<f64> {
    if !(lambda_min_nonzero > 0.0 && snr > 0.0) || r == 0 {
        return Err(Error::invalid("snr inputs must be positive"));
    }
    Ok(lambda_min_nonzero / (2.0 * r as f64 * snr))
}

/// [`lambda_min_nonzero`] of the contact vectors of a planted model's base
/// points, the `λ` in its SNR.
pub fn planted_lambda(model: &PlantedModel) -> Result<f64> {
    let z = build_constraints_full(&model.base_points()?)?;
    lambda_min_nonzero(&contact_vectors(&z, 1e-9)?)
}

/// True when `‖M x_i − x_i‖ ≤ 1e−5·max(1, ‖x_i‖)` for every point.
pub fn fixes_points(ds: &LabeledDataset, m: &SymMatrix) -> bool {
    (0..ds.n()).all(|i| {
        let x = ds.point(i);
        let mx = m.apply(x);
        let err: f64 = mx
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        err <= 1e-5 * norm.max(1.0)
    })
}

/// A solve on all cross-class constraints followed by certification.
#[derive(Debug, Clone)]
pub struct CertifiedSolve {
    pub result: SqueezeResult,
    pub report: CertificateReport,
}

/// Solves the hard program on `ds` and certifies the result; anything short
/// of a certified verdict is [`Error::Inconclusive`].
pub fn certified_solve(
    ds: &LabeledDataset,
    delta: f64,
    config: &SqueezeConfig,
) -> Result<CertifiedSolve> {
    if config.mode != Mode::Hard {
        return Err(Error::invalid("certified solves use the hard mode"));
    }
    let z = build_constraints_full(ds)?;
    let config = SqueezeConfig {
        delta,
        ..config.clone()
    };
    let result = solve(&z, &config)?;
    let opts = CertifyOptions {
        tol_feas: Some(config.tol_feas),
        hint: None,
    };
    let report = certify_with(ds, &result.m, delta, &opts)?;
    if report.verdict != Verdict::Certified {
        return Err(Error::Inconclusive(format!(
            "solve not certified: {}",
            report.note.clone().unwrap_or_default()
        )));
    }
    Ok(CertifiedSolve { result, report })
}

/// Outcome of [`is_delta_fixed`].
#[derive(Debug, Clone)]
pub struct DeltaFixed {
    pub fixed: bool,
    /// The certified optimizer the decision was based on.
    pub witness: SymMatrix,
    pub report: CertificateReport,
}

/// Decides whether the certified optimizer fixes every point.
///
/// For `0 ⪯ M ⪯ I`, `Mx = x` holds exactly when `M^{1/2}x = x`, so the test
/// avoids the square root.
pub fn is_delta_fixed(
    ds: &LabeledDataset,
    delta: f64,
    config: &SqueezeConfig,
) -> Result<DeltaFixed> {
    let solved = certified_solve(ds, delta, config)?;
    Ok(DeltaFixed {
        fixed: fixes_points(ds, &solved.result.m),
        witness: solved.result.m,
        report: solved.report,
    })
}

/// Outcome of [`squeeze_once_check`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SqueezeOnceReport {
    #[serde(rename = "M")]
    pub m: SymMatrix,
    /// Optimizer on the squeezed data.
    #[serde(rename = "N")]
    pub n: SymMatrix,
    /// Projection onto the span of the squeezed points.
    pub projection: SymMatrix,
    pub distance_to_projection: f64,
    pub trace_m: f64,
    pub trace_n: f64,
    /// `‖N − P‖_F ≤ 1e−2`.
    pub projection_holds: bool,
}

/// Solves on `D`, squeezes the points by `M^{1/2}`, solves again and compares
/// the second optimizer with the projection onto the squeezed span.
///
/// Traces are recorded but not compared; they agree only when `M` is itself a
/// projection.
pub fn squeeze_once_check(
    ds: &LabeledDataset,
    delta: f64,
    config: &SqueezeConfig,
) -> Result<SqueezeOnceReport> {
    let first = certified_solve(ds, delta, config)?;
    let m = first.result.m;
    let root = psd_sqrt(&m)?;
    let squeezed = ds.transformed(&root)?;
    let second = certified_solve(&squeezed, delta, config)?;
    let n = second.result.m;
    let (projection, _) = span_projection(&squeezed.to_columns(), 1e-6);
    let distance = n.distance(&projection);
    Ok(SqueezeOnceReport {
        trace_m: m.trace(),
        trace_n: n.trace(),
        m,
        n,
        projection,
        distance_to_projection: distance,
        projection_holds: distance <= 1e-2,
    })
}

/// Recovery error of a solve against a planted projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub frobenius: f64,
    pub max_principal_angle_deg: f64,
    pub rank: usize,
    pub rank_match: bool,
    /// `frobenius ≤ 0.05`.
    pub success: bool,
}

/// Threshold on `‖rounded M − Π‖_F` counted as recovery.
pub const RECOVERY_TOL: f64 = 0.05;

/// Rounds `M` at 0.5 and compares the result with `pi_true`.
pub fn recovery_report(m: &SymMatrix, pi_true: &SymMatrix) -> Result<RecoveryReport> {
    let (rank, p) = rank_round(m, 0.5)?;
    let dist = projection_distance(&p, pi_true)?;
    let true_rank = pi_true.trace().round() as usize;
    Ok(RecoveryReport {
        frobenius: dist.frobenius,
        max_principal_angle_deg: dist.max_principal_angle_deg,
        rank,
        rank_match: rank == true_rank,
        success: dist.frobenius <= RECOVERY_TOL,
    })
}

/// Most violated pairs added per cutting-plane round in [`planted_trial`].
pub const PLANTED_CUT_BATCH: usize = 2000;
const PLANTED_MAX_ROUNDS: usize = 50;

/// One planted-model recovery trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedTrial {
    pub seed: u64,
    pub report: RecoveryReport,
    pub objective: f64,
    /// Constraints in the final cutting-plane round.
    pub constraints: usize,
    pub rounds: usize,
    pub converged: bool,
}

/// Draws the model with `seed`, solves the hard program at `Δ = model.delta`
/// over all cross-class pairs (by constraint generation from the
/// `s_init`-nearest-neighbor set) and compares the rounded optimizer with
/// the planted projection.
pub fn planted_trial(
    model: &PlantedModel,
    seed: u64,
    s_init: usize,
    config: &SqueezeConfig,
) -> Result<PlantedTrial> {
    let (ds, pi) = generate_planted(model, seed)?;
    let config = SqueezeConfig {
        delta: model.delta,
        mode: Mode::Hard,
        ..config.clone()
    };
    let initial = build_constraints_nn(&ds, s_init)?;
    let cut = solve_with_cuts(&ds, &config, initial, PLANTED_CUT_BATCH, PLANTED_MAX_ROUNDS)?;
    Ok(PlantedTrial {
        seed,
        report: recovery_report(&cut.result.m, &pi)?,
        objective: cut.result.objective,
        constraints: cut.constraints.len(),
        rounds: cut.rounds,
        converged: cut.result.converged,
    })
}

/// SqueezeFit against PCA on one draw of the three-dimensional demo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Figure1Trial {
    pub seed: u64,
    /// Largest principal angle between the rounded optimizer and the planted
    /// direction; 90° when the ranks differ.
    pub squeeze_angle_deg: f64,
    pub pca_angle_deg: f64,
    pub rank: usize,
    pub objective: f64,
}

/// Solves the hard program at `Δ = margin` and takes PCA's top direction on
/// the same draw.
pub fn figure1_trial(
    params: Figure1Params,
    seed: u64,
    config: &SqueezeConfig,
) -> Result<Figure1Trial> {
    let fig = generate_figure1_with(params, seed)?;
    let config = SqueezeConfig {
        delta: params.margin,
        mode: Mode::Hard,
        ..config.clone()
    };
    let z = build_constraints_full(&fig.dataset)?;
    let result = solve(&z, &config)?;
    let (rank, p) = rank_round(&result.m, 0.5)?;
    let pc = pca(&fig.dataset, 1)?;
    Ok(Figure1Trial {
        seed,
        squeeze_angle_deg: projection_distance(&p, &fig.pi)?.max_principal_angle_deg,
        pca_angle_deg: projection_distance(&pc, &fig.pi)?.max_principal_angle_deg,
        rank,
        objective: result.objective,
    })
}

/// A closed convex cone for statistical-dimension estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeSpec {
    /// The nonnegative orthant in `R^n`.
    Orthant { n: usize },
    /// `{v ≥ 0 : max_i v_i ≤ c1·√(ln n)/n · 1ᵀv}`.
    Capped { n: usize, c1: f64 },
    /// All of `R^n`.
    Full { n: usize },
}

impl ConeSpec {
    pub fn capped(n: usize) -> Self {
        ConeSpec::Capped { n, c1: 50.0 }
    }

    pub fn n(&self) -> usize {
        match *self {
            ConeSpec::Orthant { n } | ConeSpec::Capped { n, .. } | ConeSpec::Full { n } => n,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::invalid("cone dimension must be positive"));
        }
        if let ConeSpec::Capped { c1, .. } = self {
            if !(*c1 > 0.0) {
                return Err(Error::invalid("c1 must be positive"));
            }
        }
        Ok(())
    }
}

const CONE_MAX_CYCLES: usize = 10_000;
const CONE_TOL: f64 = 1e-8;

/// Dykstra projection onto `{v_i ≥ 0} ∩ {v_i ≤ c·1ᵀv}`.
///
/// Each cap halfspace has normal `e_i − c·1`, so the iterate is kept as
/// `u + s·1` with a running sum, making every halfspace step `O(1)`.
/// Returns the projection and whether the cycle-to-cycle change fell below
/// `1e−8`.
pub fn project_capped_cone(g: &[f64], cap: f64) -> (Vec<f64>, bool) {
    let n = g.len();
    let nf = n as f64;
    let mut u = g.to_vec();
    let mut s = 0.0;
    let mut sum: f64 = g.iter().sum();
    let mut alpha_pos = vec![0.0; n];
    let mut alpha_cap = vec![0.0; n];
    let cap_norm_sq = 1.0 - 2.0 * cap + cap * cap * nf;
    let mut prev: Vec<f64> = g.to_vec();
    for _ in 0..CONE_MAX_CYCLES {
        for i in 0..n {
            // Halfspace −v_i ≤ 0 with normal −e_i: restore the correction,
            // then clip.
            let xi = u[i] + s + alpha_pos[i];
            let t = (-xi).max(0.0);
            let new_xi = xi + t;
            sum += new_xi - (u[i] + s);
            u[i] = new_xi - s;
            alpha_pos[i] = -t;

            // Halfspace v_i − c·1ᵀv ≤ 0 with normal a = e_i − c·1; the
            // stored correction is alpha·a.
            let a_prev = alpha_cap[i];
            u[i] += a_prev;
            s -= a_prev * cap;
            sum += a_prev * (1.0 - cap * nf);
            let ax = (u[i] + s) - cap * sum;
            let t = (ax / cap_norm_sq).max(0.0);
            u[i] -= t;
            s += t * cap;
            sum -= t * (1.0 - cap * nf);
            alpha_cap[i] = t;
        }
        let x: Vec<f64> = u.iter().map(|v| v + s).collect();
        let change = x
            .iter()
            .zip(&prev)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        prev = x;
        if change <= CONE_TOL {
            return (prev, true);
        }
    }
    (prev, false)
}

/// Monte Carlo statistical dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatDimEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: usize,
    /// False when any projection hit the cycle cap.
    pub reliable: bool,
}

/// Estimates `δ(C) = E‖Π_C g‖²` for standard Gaussian `g`.
///
/// Trial `t` draws from its own ChaCha stream `t` under `seed`, and the sum
/// runs in trial order, so results do not depend on the thread count.
pub fn estimate_stat_dim(cone: ConeSpec, trials: usize, seed: u64) -> Result<StatDimEstimate> {
    cone.validate()?;
    if trials < 100 {
        return Err(Error::invalid("at least 100 trials are required"));
    }
    let n = cone.n();
    let samples: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            match cone {
                ConeSpec::Full { .. } => (g.iter().map(|v| v * v).sum(), true),
                ConeSpec::Orthant { .. } => (g.iter().map(|v| v.max(0.0).powi(2)).sum(), true),
                ConeSpec::Capped { n, c1 } => {
                    let cap = c1 * (n as f64).ln().sqrt() / n as f64;
                    let (p, ok) = project_capped_cone(&g, cap);
                    (p.iter().map(|v| v * v).sum(), ok)
                }
            }
        })
        .collect();
    let tf = trials as f64;
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / tf;
    let var = samples.iter().map(|s| (s.0 - mean).powi(2)).sum::<f64>() / (tf - 1.0);
    Ok(StatDimEstimate {
        estimate: mean,
        stderr: (var / tf).sqrt(),
        trials,
        reliable: samples.iter().all(|s| s.1),
    })
}
