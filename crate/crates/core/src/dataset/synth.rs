use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::spectral::{eig_sym_matrix, span_projection, SymMatrix};

/// `e_1, …, e_r` with label 0 and the origin with label 1, in `R^d`.
///
/// Δ-fixed with Δ = 1: the contact vectors are `±e_i`.
pub fn generate_simplex_base(r: usize, d: usize) -> Result<LabeledDataset> {
    if r == 0 || r >= d {
        return Err(Error::invalid(format!("need 1 <= r < d, got r={r}, d={d}")));
    }
    let mut points = vec![0.0; (r + 1) * d];
    for i in 0..r {
        points[i * d + i] = 1.0;
    }
    let mut labels = vec![0; r];
    labels.push(1);
    LabeledDataset::from_flat(r + 1, d, points, labels)
}

/// The `2^r` vertices of `{0,1}^r` embedded in `R^d`, labeled by parity.
///
/// Adjacent vertices always differ in parity, so the contact vectors are the
/// `±e_i` at length 1 and the set is Δ-fixed with Δ = 1, like the simplex,
/// but with `a = 2^r` base points.
pub fn generate_cube_base(r: usize, d: usize) -> Result<LabeledDataset> {
    if r == 0 || r >= d {
        return Err(Error::invalid(format!("need 1 <= r < d, got r={r}, d={d}")));
    }
    if r > 20 {
        return Err(Error::invalid("cube base limited to r <= 20"));
    }
    let a = 1usize << r;
    let mut points = vec![0.0; a * d];
    let mut labels = Vec::with_capacity(a);
    for v in 0..a {
        for i in 0..r {
            if v >> i & 1 == 1 {
                points[v * d + i] = 1.0;
            }
        }
        labels.push((v.count_ones() % 2) as i64);
    }
    LabeledDataset::from_flat(a, d, points, labels)
}

/// Base point configuration of a planted model.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantedBase {
    Simplex,
    Cube,
    Custom(LabeledDataset),
}

/// Base points `x_i` spanning an `r`-dimensional subspace `T`, each
/// replicated `b` times with Gaussian noise of variance `σ²` per coordinate
/// of `T⊥`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedModel {
    pub d: usize,
    pub r: usize,
    pub a: usize,
    pub b: usize,
    pub sigma: f64,
    pub delta: f64,
    pub base: PlantedBase,
}

impl PlantedModel {
    /// A model over the simplex or cube base with `a` derived from `r`.
    pub fn new(base: PlantedBase, d: usize, r: usize, b: usize, sigma: f64) -> Result<Self> {
        let a = match &base {
            PlantedBase::Simplex => r + 1,
            PlantedBase::Cube => 1usize.checked_shl(r as u32).unwrap_or(0),
            PlantedBase::Custom(ds) => ds.n(),
        };
        let m = PlantedModel {
            d,
            r,
            a,
            b,
            sigma,
            delta: 1.0,
            base,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r >= self.d {
            return Err(Error::invalid("planted model needs 1 <= r < d"));
        }
        if self.a < 2 || self.b < 1 {
            return Err(Error::invalid("planted model needs a >= 2 and b >= 1"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma must be finite and nonnegative"));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::invalid("delta must be positive"));
        }
        let expected = match &self.base {
            PlantedBase::Simplex => self.r + 1,
            PlantedBase::Cube => 1 << self.r.min(20),
            PlantedBase::Custom(ds) => {
                if ds.d() != self.d {
                    return Err(Error::invalid("custom base has the wrong dimension"));
                }
                ds.n()
            }
        };
        if self.a != expected {
            return Err(Error::invalid(format!(
                "base has {expected} points but a = {}",
                self.a
            )));
        }
        Ok(())
    }

    pub fn base_points(&self) -> Result<LabeledDataset> {
        match &self.base {
            PlantedBase::Simplex => generate_simplex_base(self.r, self.d),
            PlantedBase::Cube => generate_cube_base(self.r, self.d),
            PlantedBase::Custom(ds) => Ok(ds.clone()),
        }
    }
}

/// Orthonormal basis for the orthogonal complement of the range of a
/// projection of rank `r`, as columns.
fn complement_basis(pi: &SymMatrix, r: usize) -> DMatrix<f64> {
    let d = pi.dim();
    let comp = DMatrix::identity(d, d) - pi.as_matrix();
    eig_sym_matrix(&comp)
        .eigenvectors
        .columns(0, d - r)
        .into_owned()
}

/// Draws `a·b` points `x_i + g_it`, ordered base-major, and returns them with
/// the projection `Π` onto the span of the base points.
///
/// Noise is sampled in coordinates of an orthonormal basis of `T⊥`, so
/// `Π g_it` vanishes up to rounding.
pub fn generate_planted(model: &PlantedModel, seed: u64) -> Result<(LabeledDataset, SymMatrix)> {
    model.validate()?;
    let base = model.base_points()?;
    let (pi, rank) = span_projection(&base.to_columns(), 1e-10);
    if rank != model.r {
        return Err(Error::invalid(format!(
            "base points span dimension {rank}, expected r = {}",
            model.r
        )));
    }
    let perp = complement_basis(&pi, model.r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = model.d;
    let mut points = Vec::with_capacity(model.a * model.b * d);
    let mut labels = Vec::with_capacity(model.a * model.b);
    for i in 0..model.a {
        let x = DVector::from_column_slice(base.point(i));
        for _ in 0..model.b {
            let coeffs = DVector::from_fn(d - model.r, |_, _| {
                model.sigma * rng.sample::<f64, _>(StandardNormal)
            });
            let p = &x + &perp * coeffs;
            points.extend(p.iter());
            labels.push(base.label(i));
        }
    }
    let ds = LabeledDataset::from_flat(model.a * model.b, d, points, labels)?;
    Ok((ds, pi))
}

/// Parameters of the three-dimensional two-class demo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Figure1Params {
    pub per_class: usize,
    /// Gap between the classes along the planted direction.
    pub margin: f64,
    /// Scale of the extra offset along the planted direction beyond
    /// `margin / 2`.
    pub spread: f64,
    /// Standard deviation along the shared high-variance direction.
    pub mixing_sd: f64,
    /// Standard deviation along the remaining direction.
    pub minor_sd: f64,
}

impl Default for Figure1Params {
    fn default() -> Self {
        Figure1Params {
            per_class: 30,
            margin: 1.0,
            spread: 0.2,
            mixing_sd: 1.5,
            minor_sd: 0.3,
        }
    }
}

/// Output of [`generate_figure1`].
#[derive(Debug, Clone)]
pub struct Figure1 {
    pub dataset: LabeledDataset,
    /// Rank-1 projection onto the planted direction.
    pub pi: SymMatrix,
    pub direction: Vec<f64>,
    pub params: Figure1Params,
}

/// Two classes in `R³` that are separated along a random unit direction `p`
/// and mixed elsewhere.
///
/// Along `p` class 0 sits at `margin/2 + spread·|N|` and class 1 at the
/// mirror image, shifted so the closest point of each class is exactly at
/// `±margin/2`. The orthogonal complement carries label-independent noise:
/// standard deviation `mixing_sd` along one direction and `minor_sd` along
/// the other. With the defaults the mixing direction dominates the variance,
/// so PCA picks it instead of `p`.
pub fn generate_figure1(seed: u64) -> Result<Figure1> {
    generate_figure1_with(Figure1Params::default(), seed)
}

pub fn generate_figure1_with(params: Figure1Params, seed: u64) -> Result<Figure1> {
    if params.per_class == 0 {
        return Err(Error::invalid("per_class must be positive"));
    }
    if !(params.margin > 0.0)
        || params.spread < 0.0
        || params.mixing_sd < 0.0
        || params.minor_sd < 0.0
    {
        return Err(Error::invalid(
            "figure parameters must be nonnegative, margin positive",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
    p /= p.norm();
    let pi = SymMatrix::symmetrized(&p * p.transpose());
    let perp = complement_basis(&pi, 1);
    let (u, v) = (perp.column(0).into_owned(), perp.column(1).into_owned());

    let mut points = Vec::with_capacity(6 * params.per_class);
    let mut labels = Vec::with_capacity(2 * params.per_class);
    for class in 0..2 {
        let sign = if class == 0 { 1.0 } else { -1.0 };
        let offsets: Vec<f64> = (0..params.per_class)
            .map(|_| params.spread * rng.sample::<f64, _>(StandardNormal).abs())
            .collect();
        let min = offsets.iter().copied().fold(f64::INFINITY, f64::min);
        for off in offsets {
            let t = sign * (params.margin / 2.0 + off - min);
            let a = params.mixing_sd * rng.sample::<f64, _>(StandardNormal);
            let b = params.minor_sd * rng.sample::<f64, _>(StandardNormal);
            let x = &p * t + &u * a + &v * b;
            points.extend(x.iter());
            labels.push(class as i64);
        }
    }
    let n = 2 * params.per_class;
    Ok(Figure1 {
        dataset: LabeledDataset::from_flat(n, 3, points, labels)?,
        pi,
        direction: p.iter().copied().collect(),
        params,
    })
}
