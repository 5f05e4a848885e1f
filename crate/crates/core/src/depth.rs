//! Half-space (Tukey) depth.
//!
//! Empirical depth is the smallest fraction of the sample contained in a
//! closed half-space whose boundary passes through the query point. It is
//! computed exactly in one and two dimensions and approximated from above by
//! a finite set of random directions otherwise. For a Gaussian model the
//! population depth has the closed form `(1 - F_{χ²_p}(Δ)) / 2`, where `Δ` is
//! the squared Mahalanobis distance.

use std::cmp::Ordering;

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::gaussian::GaussianParams;
use crate::rng;
use crate::special;

/// Algorithm used for empirical depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DepthMethod {
    Exact1d,
    Exact2d,
    /// Minimum over `n_directions` random unit vectors `u`, each used with
    /// both orientations `u` and `-u`.
    Projection {
        n_directions: usize,
        direction_seed: u64,
    },
}

impl DepthMethod {
    pub fn default_directions(p: usize) -> usize {
        1000.max(100 * p)
    }

    pub fn projection(p: usize, seed: u64) -> Self {
        DepthMethod::Projection {
            n_directions: Self::default_directions(p),
            direction_seed: seed,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DepthMethod::Exact1d => "exact-1d",
            DepthMethod::Exact2d => "exact-2d",
            DepthMethod::Projection { .. } => "projection",
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        match *self {
            DepthMethod::Exact1d if p != 1 => Err(Error::IncompatibleMethod { method: self.name(), p }),
            DepthMethod::Exact2d if p != 2 => Err(Error::IncompatibleMethod { method: self.name(), p }),
            DepthMethod::Projection { n_directions: 0, .. } => Err(Error::param("n_directions", "must be at least 1")),
            _ if p == 0 => Err(Error::EmptyData),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DepthKind {
    /// Exact for `p ≤ 2`, projection otherwise.
    #[default]
    Auto,
    Exact,
    Projection,
}

/// Dimension-independent depth choice, resolved to a [`DepthMethod`] once
/// the data dimension is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DepthSelection {
    pub kind: DepthKind,
    pub n_directions: Option<usize>,
    pub seed: u64,
}

impl DepthSelection {
    pub fn resolve(&self, p: usize) -> Result<DepthMethod> {
        let exact = || match p {
            1 => Ok(DepthMethod::Exact1d),
            2 => Ok(DepthMethod::Exact2d),
            _ => Err(Error::IncompatibleMethod { method: "exact", p }),
        };
        let projection = || DepthMethod::Projection {
            n_directions: self.n_directions.unwrap_or_else(|| DepthMethod::default_directions(p)),
            direction_seed: self.seed,
        };
        let m = match self.kind {
            DepthKind::Exact => exact()?,
            DepthKind::Projection => projection(),
            DepthKind::Auto if p <= 2 => exact()?,
            DepthKind::Auto => projection(),
        };
        m.validate(p)?;
        Ok(m)
    }
}

/// Empirical depth of every sample point within its own sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthVector {
    values: Vec<f64>,
    counts: Vec<usize>,
}

impl DepthVector {
    fn from_counts(counts: Vec<usize>) -> Self {
        let n = counts.len() as f64;
        Self {
            values: counts.iter().map(|&c| c as f64 / n).collect(),
            counts,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Half-space counts; `values()[i] == counts()[i] / n`.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }
}

fn check_query(query: &[f64], data: &DataMatrix, method: &DepthMethod) -> Result<()> {
    method.validate(data.p())?;
    if query.len() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: query.len(),
        });
    }
    Ok(())
}

/// Minimum number of sample points in a closed half-space through `query`.
pub fn halfspace_count(query: &[f64], data: &DataMatrix, method: &DepthMethod) -> Result<usize> {
    check_query(query, data, method)?;
    Ok(match *method {
        DepthMethod::Exact1d => count_1d(query[0], data.matrix().column(0).as_slice()),
        DepthMethod::Exact2d => count_2d(query, &points_2d(data)),
        DepthMethod::Projection {
            n_directions,
            direction_seed,
        } => {
            let dirs = directions(data.p(), n_directions, direction_seed);
            count_projection(query, data, &dirs)
        }
    })
}

pub fn empirical_depth(query: &[f64], data: &DataMatrix, method: &DepthMethod) -> Result<f64> {
    Ok(halfspace_count(query, data, method)? as f64 / data.n() as f64)
}

/// Depth of each query point with respect to `data`.
pub fn empirical_depths(queries: &DataMatrix, data: &DataMatrix, method: &DepthMethod) -> Result<Vec<f64>> {
    method.validate(data.p())?;
    if queries.p() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: queries.p(),
        });
    }
    let n = data.n() as f64;
    let counts: Vec<usize> = match *method {
        DepthMethod::Exact1d => {
            let xs = data.matrix().column(0);
            (0..queries.n())
                .map(|i| count_1d(queries.matrix()[(i, 0)], xs.as_slice()))
                .collect()
        }
        DepthMethod::Exact2d => {
            let pts = points_2d(data);
            (0..queries.n())
                .into_par_iter()
                .map(|i| count_2d(&queries.row_vec(i), &pts))
                .collect()
        }
        DepthMethod::Projection {
            n_directions,
            direction_seed,
        } => {
            let dirs = directions(data.p(), n_directions, direction_seed);
            (0..queries.n())
                .into_par_iter()
                .map(|i| count_projection(&queries.row_vec(i), data, &dirs))
                .collect()
        }
    };
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Depth of every sample point within the sample. Independent of any model
/// parameters, so it is computed once per dataset.
pub fn empirical_depths_all(data: &DataMatrix, method: &DepthMethod) -> Result<DepthVector> {
    method.validate(data.p())?;
    let counts = match *method {
        DepthMethod::Exact1d => {
            let xs = data.matrix().column(0);
            xs.iter().map(|&q| count_1d(q, xs.as_slice())).collect()
        }
        DepthMethod::Exact2d => {
            let pts = points_2d(data);
            pts.par_iter().map(|&q| count_2d(&[q.0, q.1], &pts)).collect()
        }
        DepthMethod::Projection {
            n_directions,
            direction_seed,
        } => projection_self_counts(data, &directions(data.p(), n_directions, direction_seed)),
    };
    Ok(DepthVector::from_counts(counts))
}

fn count_1d(q: f64, xs: &[f64]) -> usize {
    let le = xs.iter().filter(|&&x| x <= q).count();
    let ge = xs.iter().filter(|&&x| x >= q).count();
    le.min(ge)
}

fn points_2d(data: &DataMatrix) -> Vec<(f64, f64)> {
    let m = data.matrix();
    (0..data.n()).map(|i| (m[(i, 0)], m[(i, 1)])).collect()
}

/// 0 for angles in `[0, π)`, 1 for `[π, 2π)`.
fn half(v: (f64, f64)) -> u8 {
    if v.1 > 0.0 || (v.1 == 0.0 && v.0 > 0.0) {
        0
    } else {
        1
    }
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

/// Total order on directions by polar angle in `[0, 2π)`.
fn angle_cmp(a: (f64, f64), b: (f64, f64)) -> Ordering {
    half(a).cmp(&half(b)).then_with(|| {
        let c = cross(a, b);
        if c > 0.0 {
            Ordering::Less
        } else if c < 0.0 {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    })
}

/// Angular sweep. With `θᵢ` the angles of `xᵢ - q`, a line through `q`
/// leaves an open side containing the directions in `(c, c + π)`; the count
/// is constant between consecutive critical angles `θⱼ` and `θⱼ + π`, and
/// just after a critical angle `c` it equals `#{θᵢ ∈ (c, c + π]}`.
/// Points equal to `q` lie in every half-space.
fn count_2d(q: &[f64], pts: &[(f64, f64)]) -> usize {
    let mut dirs: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    let mut coincident = 0;
    for &(x, y) in pts {
        let v = (x - q[0], y - q[1]);
        if v == (0.0, 0.0) {
            coincident += 1;
        } else {
            dirs.push(v);
        }
    }
    if dirs.is_empty() {
        return coincident;
    }
    // Sort by a float key that is a total order, then count with the exact
    // comparator so that opposite directions (exact negations) are handled
    // without rounding.
    dirs.sort_by(|a, b| {
        half(*a)
            .cmp(&half(*b))
            .then_with(|| {
                a.1.atan2(a.0)
                    .rem_euclid(std::f64::consts::TAU)
                    .total_cmp(&b.1.atan2(b.0).rem_euclid(std::f64::consts::TAU))
            })
            .then_with(|| angle_cmp(*a, *b))
    });
    let m = dirs.len();
    let rank_le = |d: (f64, f64)| dirs.partition_point(|&v| angle_cmp(v, d) != Ordering::Greater);
    let arc_count = |d: (f64, f64)| {
        let opp = (-d.0, -d.1);
        let (a, b) = (rank_le(d), rank_le(opp));
        if half(d) == 0 {
            b.saturating_sub(a)
        } else {
            m - a + b
        }
    };
    let best = dirs
        .iter()
        .flat_map(|&d| [d, (-d.0, -d.1)])
        .map(arc_count)
        .min()
        .unwrap_or(0);
    coincident + best
}

/// Unit directions drawn from a dedicated seeded stream. The first `k`
/// directions do not depend on how many are requested.
pub fn directions(p: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = rng::stream(seed, &[0xD1EC]);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let norm: f64 = v.norm();
        if norm > 1e-12 {
            out.push(v / norm);
        }
    }
    out
}

fn count_projection(q: &[f64], data: &DataMatrix, dirs: &[DVector<f64>]) -> usize {
    let q = DVector::from_column_slice(q);
    let x = data.matrix();
    let mut best = data.n();
    for u in dirs {
        let pq = u.dot(&q);
        let proj = x * u;
        let ge = proj.iter().filter(|&&v| v >= pq).count();
        let le = proj.iter().filter(|&&v| v <= pq).count();
        best = best.min(ge.min(le));
    }
    best
}

fn projection_self_counts(data: &DataMatrix, dirs: &[DVector<f64>]) -> Vec<usize> {
    let n = data.n();
    let x = data.matrix();
    dirs.par_iter()
        .fold(
            || vec![n; n],
            |mut best, u| {
                let proj: Vec<f64> = (x * u).iter().copied().collect();
                let mut sorted = proj.clone();
                sorted.sort_by(f64::total_cmp);
                for (i, &v) in proj.iter().enumerate() {
                    let lt = sorted.partition_point(|&y| y < v);
                    let le = sorted.partition_point(|&y| y <= v);
                    best[i] = best[i].min((n - lt).min(le));
                }
                best
            },
        )
        .reduce(
            || vec![n; n],
            |a, b| a.into_iter().zip(b).map(|(x, y)| x.min(y)).collect(),
        )
}

/// Closed form used for the depth of a Gaussian model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PopulationDepth {
    /// The half-space depth of `N(μ, Σ)`: `1 - Φ(√Δ) = (1 - F_{χ²_1}(Δ)) / 2`
    /// in every dimension, since each half-space probability is a
    /// one-dimensional normal tail.
    #[default]
    #[serde(alias = "halfspace")]
    HalfSpace,
    /// `(1 - F_{χ²_p}(Δ)) / 2` with `p` the model dimension. Agrees with
    /// `HalfSpace` for `p = 1` only.
    #[serde(alias = "chi2-p")]
    ChiSquareP,
}

impl PopulationDepth {
    fn dof(&self, p: usize) -> u32 {
        match self {
            PopulationDepth::HalfSpace => 1,
            PopulationDepth::ChiSquareP => p as u32,
        }
    }

    /// Depth at squared Mahalanobis distance `delta` for a `p`-variate model.
    pub fn depth_at(&self, delta: f64, p: usize) -> Result<f64> {
        Ok(0.5 * special::chi2_sf(delta, self.dof(p))?)
    }

    /// `ln` of [`Self::depth_at`]; finite where the depth underflows.
    pub fn ln_depth_at(&self, delta: f64, p: usize) -> Result<f64> {
        Ok(special::chi2_ln_sf(delta, self.dof(p))? - std::f64::consts::LN_2)
    }
}

/// Depth of `x` under the Gaussian `params`, using the half-space rule.
pub fn population_depth_gaussian(x: &[f64], params: &GaussianParams) -> Result<f64> {
    population_depth_with(x, params, PopulationDepth::HalfSpace)
}

pub fn population_depth_with(x: &[f64], params: &GaussianParams, rule: PopulationDepth) -> Result<f64> {
    rule.depth_at(params.mahalanobis_sq(x)?, params.dim())
}

pub fn population_ln_depth_with(x: &[f64], params: &GaussianParams, rule: PopulationDepth) -> Result<f64> {
    rule.ln_depth_at(params.mahalanobis_sq(x)?, params.dim())
}
