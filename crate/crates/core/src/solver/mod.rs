//! Solvers for the squeeze program and its variants.
//!
//! All variants minimize `tr M` over the spectahedron `{0 ⪯ M ⪯ I}` (or the
//! PSD cone in the `0⁺` modes) subject to `zᵀMz ≥ Δ²` for every constraint
//! vector `z`, either as hard constraints or through the hinge penalty
//! `λ Σ (Δ² − zᵀMz)₊`.
//!
//! The primary method is projected subgradient descent. Because subgradient
//! iterates only approach the optimum at a `1/√k` rate, every solve can be
//! finished by an ADMM refinement (see [`Refinement`]) that brings the
//! iterate close enough to an optimum for dual certificates to be found.

mod admm;
mod face;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{sq_dist, ConstraintSet, DifferencePair, LabeledDataset, Pruning};
use crate::error::{Error, Result};
use crate::spectral::{clamp_spectrum, psd_sqrt, span_projection, SymMatrix};

use admm::{AdmmProblem, AdmmSettings, AdmmState, Cone, Penalty};

/// Program variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Hard constraints over the spectahedron.
    Hard,
    /// Hinge penalty over the spectahedron.
    Hinge,
    /// Hard constraints `zᵀMz ≥ 1` over the PSD cone.
    ZeroPlus,
    /// Hinge penalty with `Δ = 1` over the PSD cone.
    HingeZeroPlus,
}

impl Mode {
    pub fn is_zero_plus(self) -> bool {
        matches!(self, Mode::ZeroPlus | Mode::HingeZeroPlus)
    }

    pub fn is_hinge(self) -> bool {
        matches!(self, Mode::Hinge | Mode::HingeZeroPlus)
    }

    fn cone(self) -> Cone {
        if self.is_zero_plus() {
            Cone::Psd
        } else {
            Cone::Spectahedron
        }
    }
}

/// Subgradient step size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `(f(M) − f_lb)/‖G‖²` with a known lower bound; diminishing with
    /// `c = 1` when no bound is supplied.
    Polyak { lower_bound: Option<f64> },
    /// `c/(√k ‖G‖_F)`.
    Diminishing { c: f64 },
}

/// ADMM finish applied after the subgradient phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refinement {
    pub max_iters: usize,
    /// Relative primal and dual residual target.
    pub tol: f64,
    /// Subgradient iterations spent per stage before handing over.
    pub warm_start_iters: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Refinement {
            max_iters: 50_000,
            tol: 1e-11,
            warm_start_iters: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SqueezeConfig {
    /// Separation `Δ`; ignored (fixed to 1) in the `0⁺` modes.
    pub delta: f64,
    pub mode: Mode,
    /// Hinge weight in the hinge modes.
    pub lambda: f64,
    pub max_iters: usize,
    /// Relative objective change over a 50-iteration window.
    pub tol_obj: f64,
    pub tol_feas: f64,
    pub step: StepRule,
    /// Echoed into results; the solvers are deterministic.
    pub seed: u64,
    pub refine: Option<Refinement>,
    /// Homotopy ceiling for the hard modes.
    pub lambda_max: f64,
}

impl Default for SqueezeConfig {
    fn default() -> Self {
        SqueezeConfig {
            delta: 1.0,
            mode: Mode::Hard,
            lambda: 1.0,
            max_iters: 20_000,
            tol_obj: 1e-6,
            tol_feas: 1e-6,
            step: StepRule::Polyak { lower_bound: None },
            seed: 0,
            refine: Some(Refinement::default()),
            lambda_max: (1u64 << 20) as f64,
        }
    }
}

impl SqueezeConfig {
    pub fn hard(delta: f64) -> Self {
        SqueezeConfig {
            delta,
            ..Default::default()
        }
    }

    pub fn hinge(delta: f64, lambda: f64) -> Self {
        SqueezeConfig {
            delta,
            lambda,
            mode: Mode::Hinge,
            ..Default::default()
        }
    }

    pub fn zero_plus() -> Self {
        SqueezeConfig {
            mode: Mode::ZeroPlus,
            ..Default::default()
        }
    }

    /// `Δ` actually used by the program.
    pub fn effective_delta(&self) -> f64 {
        if self.mode.is_zero_plus() {
            1.0
        } else {
            self.delta
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mode.is_zero_plus() && !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta must be positive"));
        }
        if self.mode.is_hinge() && !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid("lambda must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.tol_obj > 0.0 && self.tol_feas > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if let StepRule::Diminishing { c } = self.step {
            if !(c > 0.0) {
                return Err(Error::invalid("step constant must be positive"));
            }
        }
        if let Some(r) = &self.refine {
            if r.max_iters == 0 || !(r.tol > 0.0) {
                return Err(Error::invalid(
                    "refinement needs positive iterations and tolerance",
                ));
            }
        }
        if !(self.lambda_max >= 1.0) {
            return Err(Error::invalid("lambda_max must be at least 1"));
        }
        Ok(())
    }
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezeResult {
    #[serde(rename = "M")]
    pub m: SymMatrix,
    /// `tr M`.
    pub objective: f64,
    /// `max_z (Δ² − zᵀMz)₊`.
    pub worst_violation: f64,
    /// Penalized objective in the hinge modes.
    pub hinge_value: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `(objective, worst violation)` per recorded iterate.
    pub history: Vec<(f64, f64)>,
    pub mode: Mode,
    /// `Δ` used by the program.
    pub delta: f64,
    /// Final homotopy weight in the hard modes, `λ` in the hinge modes.
    pub lambda: f64,
}

fn check_dims(m: &SymMatrix, z: &ConstraintSet) {
    assert_eq!(m.dim(), z.dim(), "matrix and constraint dimensions differ");
}

/// `zᵀMz` for every constraint, in constraint order.
pub fn quad_forms(m: &SymMatrix, z: &ConstraintSet) -> Vec<f64> {
    check_dims(m, z);
    z.iter().map(|p| m.quad_form(&p.z)).collect()
}

/// `max_z (Δ² − zᵀMz)₊`, zero for an empty set.
pub fn worst_violation(m: &SymMatrix, z: &ConstraintSet, delta: f64) -> f64 {
    quad_forms(m, z)
        .into_iter()
        .fold(0.0, |acc, q| acc.max(delta * delta - q))
}

/// `tr M + λ Σ_z (Δ² − zᵀMz)₊`.
pub fn hinge_objective(m: &SymMatrix, z: &ConstraintSet, delta: f64, lambda: f64) -> f64 {
    let d2 = delta * delta;
    let penalty: f64 = quad_forms(m, z)
        .into_iter()
        .map(|q| (d2 - q).max(0.0))
        .sum();
    m.trace() + lambda * penalty
}

/// `I − λ Σ_{zᵀMz < Δ²} zzᵀ`; ties contribute nothing.
pub fn hinge_subgradient(m: &SymMatrix, z: &ConstraintSet, delta: f64, lambda: f64) -> SymMatrix {
    let d = z.dim();
    let g = subgradient_matrix(m, z, delta * delta, lambda);
    debug_assert_eq!(g.nrows(), d);
    SymMatrix::symmetrized(g)
}

fn subgradient_matrix(m: &SymMatrix, z: &ConstraintSet, d2: f64, lambda: f64) -> DMatrix<f64> {
    let d = z.dim();
    let mut acc = DMatrix::zeros(d, d);
    for p in z.iter() {
        if m.quad_form(&p.z) < d2 {
            let v = DVector::from_column_slice(&p.z);
            acc.syger(1.0, &v, &v, 1.0);
        }
    }
    fill_lower(&mut acc);
    DMatrix::identity(d, d) - acc * lambda
}

/// `syger` only writes the lower triangle.
fn fill_lower(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            a[(i, j)] = a[(j, i)];
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// `c·I` with `c = Δ²/median ‖z‖²`, capped at 1 on the spectahedron.
fn initial_point(z: &ConstraintSet, delta: f64, cone: Cone) -> DMatrix<f64> {
    let med = median(z.iter().map(|p| p.norm_sq()).collect());
    let mut c = delta * delta / med;
    if cone == Cone::Spectahedron {
        c = c.min(1.0);
    }
    DMatrix::identity(z.dim(), z.dim()) * c
}

struct Subgradient<'a> {
    z: &'a ConstraintSet,
    d2: f64,
    lambda: f64,
    cone: Cone,
    step: StepRule,
    tol_obj: f64,
}

struct SubgradientRun {
    best: DMatrix<f64>,
    best_value: f64,
    iterations: usize,
    converged: bool,
}

const WINDOW: usize = 50;

impl Subgradient<'_> {
    /// Runs from `start` for at most `budget` iterations. The step counter
    /// starts at `k0 + 1` so homotopy stages continue one schedule.
    fn run(
        &self,
        start: DMatrix<f64>,
        budget: usize,
        k0: usize,
        history: &mut Vec<(f64, f64)>,
    ) -> SubgradientRun {
        let hi = match self.cone {
            Cone::Spectahedron => 1.0,
            Cone::Psd => f64::INFINITY,
        };
        let mut m = SymMatrix::symmetrized(clamp_spectrum(&start, 0.0, hi));
        let mut best = m.clone();
        let mut best_value = f64::INFINITY;
        let mut best_trail = Vec::with_capacity(budget);
        let mut converged = false;
        let mut iterations = 0;
        for k in 1..=budget {
            iterations = k;
            let quads: Vec<f64> = self.z.iter().map(|p| m.quad_form(&p.z)).collect();
            let worst = quads.iter().fold(0.0_f64, |a, &q| a.max(self.d2 - q));
            let value = m.trace()
                + self.lambda * quads.iter().map(|&q| (self.d2 - q).max(0.0)).sum::<f64>();
            history.push((m.trace(), worst));
            if value < best_value {
                best_value = value;
                best = m.clone();
            }
            best_trail.push(best_value);
            if k > WINDOW {
                let old = best_trail[k - 1 - WINDOW];
                if old - best_value <= self.tol_obj * best_value.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }

            let g = subgradient_matrix(&m, self.z, self.d2, self.lambda);
            let gnorm = g.norm();
            if gnorm == 0.0 {
                converged = true;
                break;
            }
            let kk = (k0 + k) as f64;
            let t = match self.step {
                StepRule::Polyak {
                    lower_bound: Some(lb),
                } => ((value - lb).max(0.0) / (gnorm * gnorm)).max(1e-12 / gnorm),
                StepRule::Polyak { lower_bound: None } => 1.0 / (kk.sqrt() * gnorm),
                StepRule::Diminishing { c } => c / (kk.sqrt() * gnorm),
            };
            let next = m.as_matrix() - g * t;
            m = SymMatrix::symmetrized(clamp_spectrum(&next, 0.0, hi));
        }
        SubgradientRun {
            best: best.into_matrix(),
            best_value,
            iterations,
            converged,
        }
    }
}

fn empty_result(z: &ConstraintSet, config: &SqueezeConfig) -> SqueezeResult {
    SqueezeResult {
        m: SymMatrix::zeros(z.dim()),
        objective: 0.0,
        worst_violation: 0.0,
        hinge_value: config.mode.is_hinge().then_some(0.0),
        iterations: 1,
        converged: true,
        history: vec![(0.0, 0.0)],
        mode: config.mode,
        delta: config.effective_delta(),
        lambda: config.lambda,
    }
}

fn finish(
    m: SymMatrix,
    z: &ConstraintSet,
    config: &SqueezeConfig,
    lambda: f64,
    iterations: usize,
    converged: bool,
    history: Vec<(f64, f64)>,
) -> SqueezeResult {
    let delta = config.effective_delta();
    SqueezeResult {
        objective: m.trace(),
        worst_violation: worst_violation(&m, z, delta),
        hinge_value: config
            .mode
            .is_hinge()
            .then(|| hinge_objective(&m, z, delta, config.lambda)),
        m,
        iterations,
        converged,
        history,
        mode: config.mode,
        delta,
        lambda,
    }
}

/// Minimizes the hinge form over the spectahedron (or the PSD cone in
/// [`Mode::HingeZeroPlus`]) and returns the best iterate.
pub fn solve_hinge(z: &ConstraintSet, config: &SqueezeConfig) -> Result<SqueezeResult> {
    config.validate()?;
    if !config.mode.is_hinge() {
        return Err(Error::invalid("solve_hinge needs a hinge mode"));
    }
    if z.is_empty() {
        return Ok(empty_result(z, config));
    }
    let delta = config.effective_delta();
    let cone = config.mode.cone();
    let mut history = Vec::new();
    let (m, iterations, converged, _) = hinge_stage(
        z,
        config,
        config.lambda,
        initial_point(z, delta, cone),
        0,
        &mut history,
        None,
    );
    Ok(finish(
        SymMatrix::symmetrized(m),
        z,
        config,
        config.lambda,
        iterations,
        converged,
        history,
    ))
}

/// One hinge solve at weight `lambda`: subgradient, then ADMM if enabled.
/// One penalized solve at `lambda`. A homotopy `stage` only feeds the next
/// one, so it stops at a looser tolerance and continues from the previous
/// stage's ADMM state when there is one.
fn hinge_stage(
    z: &ConstraintSet,
    config: &SqueezeConfig,
    lambda: f64,
    start: DMatrix<f64>,
    k0: usize,
    history: &mut Vec<(f64, f64)>,
    stage: Option<Option<AdmmState>>,
) -> (DMatrix<f64>, usize, bool, Option<AdmmState>) {
    let delta = config.effective_delta();
    let cone = config.mode.cone();
    let sg = Subgradient {
        z,
        d2: delta * delta,
        lambda,
        cone,
        step: config.step,
        tol_obj: config.tol_obj,
    };
    let budget = match &config.refine {
        Some(r) => r.warm_start_iters.clamp(1, config.max_iters),
        None => config.max_iters,
    };
    let run = sg.run(start, budget, k0, history);
    log::debug!(
        "subgradient λ={lambda}: {} iterations, best {:.6e}",
        run.iterations,
        run.best_value
    );
    let Some(refine) = &config.refine else {
        return (run.best, run.iterations, run.converged, None);
    };
    let problem = AdmmProblem::new(z, delta).expect("nonempty constraint set");
    let penalty = Penalty::Hinge { lambda };
    let tol = match stage {
        Some(_) => refine.tol.max(STAGE_TOL),
        None => refine.tol,
    };
    let start = match stage.flatten() {
        Some(st) => st,
        None => problem.cold_state(cone, penalty, &run.best),
    };
    let out = problem.run_from(
        cone,
        penalty,
        start,
        AdmmSettings {
            max_iters: refine.max_iters,
            tol,
        },
    );
    history.extend(out.history);
    // Keep whichever iterate has the lower penalized value. The ADMM state
    // still seeds the next stage either way.
    let value =
        |m: &DMatrix<f64>| hinge_objective(&SymMatrix::symmetrized(m.clone()), z, delta, lambda);
    let iterations = run.iterations + out.iterations;
    let m = if value(&out.m) <= value(&run.best) {
        out.m
    } else {
        run.best
    };
    (m, iterations, out.converged, Some(out.state))
}

/// Minimizes `tr M` subject to `zᵀMz ≥ Δ²` over the spectahedron.
pub fn solve_hard(z: &ConstraintSet, config: &SqueezeConfig) -> Result<SqueezeResult> {
    config.validate()?;
    if config.mode != Mode::Hard {
        return Err(Error::invalid("solve_hard needs mode hard"));
    }
    Ok(solve_constrained(z, config, None)?.0)
}

/// Minimizes `tr M` subject to `zᵀMz ≥ 1` over the PSD cone.
pub fn solve_zero_plus(z: &ConstraintSet, config: &SqueezeConfig) -> Result<SqueezeResult> {
    config.validate()?;
    if config.mode != Mode::ZeroPlus {
        return Err(Error::invalid("solve_zero_plus needs mode zero_plus"));
    }
    Ok(solve_constrained(z, config, None)?.0)
}

/// Hard-constraint solve. With a `warm` ADMM state (and refinement enabled)
/// the homotopy is skipped and the refinement continues from that state.
fn solve_constrained(
    z: &ConstraintSet,
    config: &SqueezeConfig,
    warm: Option<AdmmState>,
) -> Result<(SqueezeResult, Option<AdmmState>)> {
    if z.is_empty() {
        return Ok((empty_result(z, config), None));
    }
    let delta = config.effective_delta();
    let d2 = delta * delta;
    let cone = config.mode.cone();
    let tol = config.tol_feas * d2;

    // On the spectahedron zᵀMz ≤ ‖z‖², so a short z rules out every M, and
    // otherwise M = I is feasible. On the PSD cone only z = 0 is fatal.
    let min_sq = z.min_norm_sq().expect("nonempty");
    let infeasible = match cone {
        Cone::Spectahedron => min_sq < d2 * (1.0 - config.tol_feas),
        Cone::Psd => min_sq == 0.0,
    };
    if infeasible {
        return Err(Error::Infeasible {
            delta,
            min_distance: min_sq.sqrt(),
        });
    }

    let mut history = Vec::new();
    let mut m = initial_point(z, delta, cone);
    let mut lambda = 1.0;
    let mut iterations = 0;
    let mut state = warm.filter(|_| config.refine.is_some());
    let mut capped = false;
    if state.is_none() {
        loop {
            let (next, used, _, st) = hinge_stage(
                z,
                config,
                lambda,
                m,
                iterations,
                &mut history,
                Some(state.take()),
            );
            m = next;
            state = st;
            iterations += used;
            let viol = worst_violation(&SymMatrix::symmetrized(m.clone()), z, delta);
            log::debug!("homotopy λ={lambda}: worst violation {viol:.3e}");
            if viol <= tol {
                break;
            }
            if lambda * 2.0 > config.lambda_max {
                // Feasible by the check above but without interior (Δ at the
                // shortest length, say): leave the rest to the hard
                // refinement.
                log::warn!("penalty homotopy stopped at λ={lambda} with violation {viol:.3e}");
                capped = true;
                break;
            }
            lambda *= 2.0;
        }
    }

    let mut converged = config.refine.is_none() && !capped;
    let mut final_state = None;
    let mut best = polish_all(
        SymMatrix::symmetrized(m.clone()),
        z,
        d2,
        cone,
        config.tol_feas,
    );
    if let Some(refine) = &config.refine {
        let problem = AdmmProblem::new(z, delta).expect("nonempty constraint set");
        let mut start = state.unwrap_or_else(|| problem.cold_state(cone, Penalty::Hard, &m));
        let mut used = 0;
        let mut chunk = FIRST_CHUNK;
        while !best.closed() && used < refine.max_iters {
            let out = problem.run_from(
                cone,
                Penalty::Hard,
                start,
                AdmmSettings {
                    max_iters: chunk.min(refine.max_iters - used),
                    tol: refine.tol,
                },
            );
            used += out.iterations;
            converged = out.converged;
            history.extend(out.history);
            start = out.state;
            if out.converged || out.residual <= POLISH_RESIDUAL || used >= refine.max_iters {
                best = best.merge(polish_all(
                    SymMatrix::symmetrized(out.m),
                    z,
                    d2,
                    cone,
                    config.tol_feas,
                ));
            }
            // On faces too large to polish, the bound from the ADMM
            // multipliers is what ends the run.
            let bound = face::dual_bound(z, &problem.multipliers(&start), d2, cone);
            best.lower = best.lower.max(bound);
            let tr = best.m.trace();
            let gap_closed =
                tr - bound <= DUAL_GAP_TOL * tr.max(1.0) && face::too_large(&best.m, cone);
            if out.converged || gap_closed {
                converged = true;
                break;
            }
            chunk *= 2;
        }
        iterations += used;
        final_state = Some(start);
    }
    converged |= best.closed();
    log::debug!(
        "polished: tr {:.10}, lower bound {:.10}, violation {:.3e}",
        best.m.trace(),
        best.lower,
        worst_violation(&best.m, z, delta)
    );
    let m = best.m;
    Ok((
        finish(m, z, config, lambda, iterations, converged, history),
        final_state,
    ))
}

/// ADMM tolerance of the homotopy stages before the hard refinement.
const STAGE_TOL: f64 = 1e-5;

/// Refinement tolerance of the screening rounds in [`solve_with_cuts`].
const SCREEN_TOL: f64 = 1e-5;

/// ADMM iterations before the first polish; later chunks double.
const FIRST_CHUNK: usize = 250;

/// ADMM residual below which polishing starts; the face is rarely right
/// before that.
const POLISH_RESIDUAL: f64 = 1e-5;

/// Relative duality gap at which a polished point counts as optimal.
const GAP_TOL: f64 = 1e-9;

/// Relative gap against the ADMM multipliers' bound that ends the
/// refinement when the face polish cannot run.
const DUAL_GAP_TOL: f64 = 1e-7;

/// Best polished point so far with the best lower bound seen.
struct Polished {
    m: SymMatrix,
    lower: f64,
}

impl Polished {
    fn closed(&self) -> bool {
        let tr = self.m.trace();
        tr - self.lower <= GAP_TOL * tr.max(1.0)
    }

    fn merge(self, other: Polished) -> Polished {
        let lower = self.lower.max(other.lower);
        let m = if other.m.trace() < self.m.trace() {
            other.m
        } else {
            self.m
        };
        Polished { m, lower }
    }
}

/// Rescale, pin the critical directions, then solve on the face. The face
/// solution replaces the rest only if it is no worse in trace.
fn polish_all(m: SymMatrix, z: &ConstraintSet, d2: f64, cone: Cone, tol_feas: f64) -> Polished {
    let delta = d2.sqrt();
    let mut m = polish(m, z, d2, cone);
    if cone == Cone::Spectahedron {
        if let Some(pinned) = pin_critical(&m, z, d2, tol_feas) {
            if worst_violation(&pinned, z, delta) < worst_violation(&m, z, delta) {
                m = pinned;
            }
        }
    }
    let mut lower = f64::NEG_INFINITY;
    if let Some(face) = face::polish_face(&m, z, d2, cone) {
        lower = face.lower;
        let tr = m.trace();
        if face.m.trace() <= tr + tol_feas * tr.max(1.0) {
            m = face.m;
        }
    }
    Polished { m, lower }
}

/// On the spectahedron a constraint with `‖z‖² = Δ²` holds only if
/// `Mz = z`. Sets `M` to the identity on the span `E` of such vectors and
/// rescales the rest, `P_E + s·(I − P_E) M (I − P_E)`, with the smallest
/// `s` that satisfies every other constraint. `None` when there are no such
/// vectors or no scale works.
fn pin_critical(m: &SymMatrix, z: &ConstraintSet, d2: f64, tol_feas: f64) -> Option<SymMatrix> {
    let critical: Vec<&DifferencePair> = z
        .iter()
        .filter(|p| p.norm_sq() <= d2 * (1.0 + tol_feas))
        .collect();
    if critical.is_empty() {
        return None;
    }
    let d = z.dim();
    let cols = DMatrix::from_fn(d, critical.len(), |r, c| critical[c].z[r]);
    let (p, _) = span_projection(&cols, 1e-9);
    let q = DMatrix::identity(d, d) - p.as_matrix();
    let rest = SymMatrix::symmetrized(&q * m.as_matrix() * &q);
    let mut scale: f64 = 0.0;
    for pair in z.iter() {
        let fixed = p.quad_form(&pair.z);
        let need = d2 - fixed;
        if need <= d2 * tol_feas {
            continue;
        }
        let have = rest.quad_form(&pair.z);
        if !(have > 0.0) {
            return None;
        }
        scale = scale.max(need / have);
    }
    let scaled = clamp_spectrum(&(rest.as_matrix() * scale), 0.0, 1.0);
    Some(SymMatrix::symmetrized(p.as_matrix() + &q * scaled * &q))
}

/// Rescales `M` so the smallest quadratic form equals `Δ²`, then projects back
/// onto the cone. Keeps the unscaled iterate if the rescaled one ends up
/// violating more.
fn polish(m: SymMatrix, z: &ConstraintSet, d2: f64, cone: Cone) -> SymMatrix {
    let qmin = quad_forms(&m, z).into_iter().fold(f64::INFINITY, f64::min);
    if !(qmin > 0.0) {
        return m;
    }
    let hi = match cone {
        Cone::Spectahedron => 1.0,
        Cone::Psd => f64::INFINITY,
    };
    let scaled = SymMatrix::symmetrized(clamp_spectrum(&(m.as_matrix() * (d2 / qmin)), 0.0, hi));
    let before = worst_violation(&m, z, d2.sqrt());
    let after = worst_violation(&scaled, z, d2.sqrt());
    if after <= before.max(0.0) || after <= 1e-15 * d2 {
        scaled
    } else {
        m
    }
}

/// Dispatches on `config.mode`.
pub fn solve(z: &ConstraintSet, config: &SqueezeConfig) -> Result<SqueezeResult> {
    match config.mode {
        Mode::Hard => solve_hard(z, config),
        Mode::ZeroPlus => solve_zero_plus(z, config),
        Mode::Hinge | Mode::HingeZeroPlus => solve_hinge(z, config),
    }
}

/// Result of [`solve_with_cuts`].
#[derive(Debug, Clone)]
pub struct CutResult {
    pub result: SqueezeResult,
    /// Constraints active in the final solve.
    pub constraints: ConstraintSet,
    pub rounds: usize,
}

/// Solves over all cross-class pairs of `ds` by constraint generation.
///
/// Starts from `initial`, solves, then adds every cross-class pair violated
/// by more than `tol_feas·Δ²` (up to `batch` of the worst per round) until
/// none remain. In the hinge modes this only grows the set while the penalty
/// is active, so the result optimizes the full hinge program as well.
pub fn solve_with_cuts(
    ds: &LabeledDataset,
    config: &SqueezeConfig,
    initial: ConstraintSet,
    batch: usize,
    max_rounds: usize,
) -> Result<CutResult> {
    if initial.dim() != ds.d() {
        return Err(Error::invalid(
            "constraint dimension does not match the data",
        ));
    }
    let delta = config.effective_delta();
    let d2 = delta * delta;
    let mut constraints = initial;
    let mut rounds = 0;
    // Hard modes carry the ADMM state between rounds, keyed by pair.
    let warm_capable = !config.mode.is_hinge() && config.refine.is_some();
    let mut carried: Option<(Vec<(usize, usize)>, AdmmState)> = None;
    // Rounds that only look for violated pairs run at a looser tolerance;
    // once none turn up the set is re-solved at the requested one.
    let screening = config.refine.as_ref().map(|r| SqueezeConfig {
        refine: Some(Refinement {
            tol: r.tol.max(SCREEN_TOL),
            ..*r
        }),
        ..config.clone()
    });
    let mut precise = screening.is_none();
    loop {
        rounds += 1;
        let round_config = match (&screening, precise) {
            (Some(c), false) => c,
            _ => config,
        };
        let result = if warm_capable {
            config.validate()?;
            let warm = carried.take().map(|(keys, st)| {
                let row_map: Vec<Option<usize>> = constraints
                    .iter()
                    .map(|p| keys.binary_search(&(p.i, p.j)).ok())
                    .collect();
                AdmmProblem::new(&constraints, delta)
                    .expect("nonempty constraint set")
                    .remap_state(Penalty::Hard, &st, &row_map)
            });
            let (result, st) = solve_constrained(&constraints, round_config, warm)?;
            if let Some(st) = st {
                carried = Some((constraints.iter().map(|p| (p.i, p.j)).collect(), st));
            }
            result
        } else {
            solve(&constraints, round_config)?
        };
        let root = psd_sqrt(&result.m)?;
        let y = ds.transformed(&root)?;
        let mut violated: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..ds.n() {
            for j in (i + 1)..ds.n() {
                if ds.label(i) != ds.label(j) && constraints.position(i, j).is_none() {
                    let q = sq_dist(y.point(i), y.point(j));
                    if q < d2 * (1.0 - config.tol_feas) {
                        violated.push((q, i, j));
                    }
                }
            }
        }
        log::debug!(
            "cutting round {rounds}: {} constraints, {} violated",
            constraints.len(),
            violated.len()
        );
        if violated.is_empty() && !precise && rounds < max_rounds {
            precise = true;
            continue;
        }
        if violated.is_empty() || rounds >= max_rounds {
            return Ok(CutResult {
                result,
                constraints,
                rounds,
            });
        }
        violated.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        violated.truncate(batch.max(1));
        let mut extra = Vec::with_capacity(violated.len());
        for (_, i, j) in violated {
            let z: Vec<f64> = ds
                .point(i)
                .iter()
                .zip(ds.point(j))
                .map(|(a, b)| a - b)
                .collect();
            if z.iter().all(|&v| v == 0.0) {
                return Err(Error::DegenerateData { i, j });
            }
            extra.push(DifferencePair { i, j, z });
        }
        constraints.extend(extra);
        debug_assert_eq!(constraints.pruning(), Pruning::Custom);
    }
}
