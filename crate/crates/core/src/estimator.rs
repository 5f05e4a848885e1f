//! Weighted likelihood estimating equations for the Gaussian, solved by
//! iteratively reweighted least squares.
//!
//! For the Gaussian the elliptical weight is `w*(τ) · (-1/2)`, so the fixed
//! point is a trimmed weighted mean and weighted covariance. Empirical depths
//! do not depend on the parameters and are computed once per dataset.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::depth::{self, DepthSelection, DepthVector, PopulationDepth};
use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianParams};
use crate::residuals::{self, DprConfig, WeightSpec};

/// Denominator of the scatter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScatterNorm {
    /// Divide by `Σ wᵢ`.
    #[default]
    SumOfWeights,
    /// Divide by `n`, as in the unnormalized estimating equation.
    #[serde(alias = "n")]
    Literal1OverN,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub dpr: DprConfig,
    pub weights: WeightSpec,
    pub depth: DepthSelection,
    pub population_depth: PopulationDepth,
    pub scatter_norm: ScatterNorm,
    pub tol: f64,
    pub max_iter: usize,
    /// Minimum `Σ wᵢ` for a step to be accepted; `None` means `p + 1`.
    pub min_effective_points: Option<f64>,
}

/// Symmetrized KL below which two roots are the same root.
pub const DEDUP_SYMMETRIC_KL: f64 = 1e-3;

impl EstimatorConfig {
    /// Tuned piecewise weights for `alpha`, exact depth where available.
    pub fn new(alpha: f64) -> Result<Self> {
        Ok(Self {
            dpr: DprConfig::new(alpha)?,
            weights: WeightSpec::optimal(alpha),
            depth: DepthSelection::default(),
            population_depth: PopulationDepth::default(),
            scatter_norm: ScatterNorm::default(),
            tol: 1e-8,
            max_iter: 500,
            min_effective_points: None,
        })
    }

    /// Every weight equal to 1: the estimator is the MLE.
    pub fn unit_weights() -> Self {
        Self {
            weights: WeightSpec::unit(),
            ..Self::new(0.5).expect("0.5 is a valid alpha")
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if let Some(m) = self.min_effective_points {
            if m.is_nan() || m <= 0.0 {
                return Err(Error::param("min_effective_points", "must be positive"));
            }
        }
        Ok(())
    }

    fn min_effective(&self, p: usize) -> f64 {
        self.min_effective_points.unwrap_or((p + 1) as f64)
    }
}

/// Why a start stopped without converging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FitFailure {
    SingularScatter,
    InsufficientWeight { sum_weights: f64, required: f64 },
    MaxIterations { last_change: f64 },
}

impl std::fmt::Display for FitFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitFailure::SingularScatter => write!(f, "singular scatter update"),
            FitFailure::InsufficientWeight { sum_weights, required } => {
                write!(f, "sum of weights {sum_weights} below {required}")
            }
            FitFailure::MaxIterations { last_change } => {
                write!(f, "no convergence within max_iter (last change {last_change:e})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub params: GaussianParams,
    pub weights: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Residuals `τᵢ` of every observation at `params`.
pub fn residuals_at(
    data: &DataMatrix,
    params: &GaussianParams,
    emp_depths: &DepthVector,
    dpr: DprConfig,
    rule: PopulationDepth,
) -> Vec<f64> {
    (0..data.n())
        .map(|i| {
            let delta = params.mahalanobis_sq_unchecked(&data.row_vec(i));
            let ln_model = rule
                .ln_depth_at(delta, params.dim())
                .expect("Mahalanobis distance is non-negative");
            residuals::dpr_from_ln_model(emp_depths.values()[i], ln_model, dpr)
        })
        .collect()
}

/// Trimmed weights `w*(τᵢ)` at `params`, with the residuals they came from.
pub fn weights_at(
    data: &DataMatrix,
    params: &GaussianParams,
    emp_depths: &DepthVector,
    cfg: &EstimatorConfig,
) -> (Vec<f64>, Vec<f64>) {
    let tau = residuals_at(data, params, emp_depths, cfg.dpr, cfg.population_depth);
    let raw: Vec<f64> = tau.iter().map(|&t| residuals::weight(t, &cfg.weights)).collect();
    let w = residuals::apply_trim(&tau, &raw, cfg.weights.trim_xi()).expect("lengths match and n ≥ 1");
    (w, tau)
}

/// One reweighting step: weights at `params`, then the weighted mean and
/// scatter.
pub fn irwls_step(
    data: &DataMatrix,
    params: &GaussianParams,
    emp_depths: &DepthVector,
    cfg: &EstimatorConfig,
) -> std::result::Result<StepOutput, FitFailure> {
    let (weights, residuals) = weights_at(data, params, emp_depths, cfg);
    let total: f64 = weights.iter().sum();
    let required = cfg.min_effective(data.p());
    let denom = match cfg.scatter_norm {
        ScatterNorm::SumOfWeights => total,
        ScatterNorm::Literal1OverN => data.n() as f64,
    };
    let params = if total > 0.0 {
        gaussian::weighted_moments(data, &weights, denom).map_err(|_| FitFailure::SingularScatter)?
    } else {
        return Err(FitFailure::InsufficientWeight {
            sum_weights: total,
            required,
        });
    };
    if total < required {
        return Err(FitFailure::InsufficientWeight {
            sum_weights: total,
            required,
        });
    }
    Ok(StepOutput {
        params,
        weights,
        residuals,
    })
}

/// `max(‖Δμ‖∞ / (1 + ‖μ‖∞), ‖ΔΣ‖∞ / (1 + ‖Σ‖∞))`, norms at `new`.
pub fn relative_change(old: &GaussianParams, new: &GaussianParams) -> f64 {
    let dm = (new.mu() - old.mu()).amax() / (1.0 + new.mu().amax());
    let ds = (new.sigma() - old.sigma()).amax() / (1.0 + new.sigma().amax());
    dm.max(ds)
}

/// One converged (or abandoned) IRWLS run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: GaussianParams,
    pub weights: Vec<f64>,
    #[serde(with = "extended_floats")]
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub sum_weights: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FitFailure>,
}

/// IRWLS from `init` with precomputed empirical depths.
pub fn fit_with_depths(
    data: &DataMatrix,
    emp_depths: &DepthVector,
    cfg: &EstimatorConfig,
    init: &GaussianParams,
) -> FitResult {
    let mut current = init.clone();
    let mut weights = Vec::new();
    let mut residuals = Vec::new();
    let mut last_change = f64::INFINITY;
    for iter in 1..=cfg.max_iter {
        match irwls_step(data, &current, emp_depths, cfg) {
            Ok(step) => {
                last_change = relative_change(&current, &step.params);
                current = step.params;
                weights = step.weights;
                residuals = step.residuals;
                if last_change < cfg.tol {
                    let sum_weights = weights.iter().sum();
                    return FitResult {
                        params: current,
                        weights,
                        residuals,
                        iterations: iter,
                        converged: true,
                        sum_weights,
                        failure: None,
                    };
                }
            }
            Err(failure) => {
                let sum_weights = weights.iter().sum();
                return FitResult {
                    params: current,
                    weights,
                    residuals,
                    iterations: iter,
                    converged: false,
                    sum_weights,
                    failure: Some(failure),
                };
            }
        }
    }
    let sum_weights = weights.iter().sum();
    FitResult {
        params: current,
        weights,
        residuals,
        iterations: cfg.max_iter,
        converged: false,
        sum_weights,
        failure: Some(FitFailure::MaxIterations { last_change }),
    }
}

fn prepare(data: &DataMatrix, cfg: &EstimatorConfig) -> Result<DepthVector> {
    cfg.validate()?;
    let method = cfg.depth.resolve(data.p())?;
    depth::empirical_depths_all(data, &method)
}

fn check_init(data: &DataMatrix, init: &GaussianParams) -> Result<()> {
    if init.dim() != data.p() {
        return Err(Error::DimensionMismatch {
            expected: data.p(),
            found: init.dim(),
        });
    }
    Ok(())
}

/// Solves the estimating equations from `init`. Input errors are returned as
/// `Err`; numerical failures come back as a non-converged [`FitResult`].
pub fn fit(data: &DataMatrix, cfg: &EstimatorConfig, init: &GaussianParams) -> Result<FitResult> {
    check_init(data, init)?;
    let depths = prepare(data, cfg)?;
    Ok(fit_with_depths(data, &depths, cfg, init))
}

/// Outcome of one start in a multi-start search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub init_index: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Index into [`RootSet::roots`] for converged starts.
    pub root: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FitFailure>,
}

/// Distinct roots found from a set of starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<FitResult>,
    /// Number of starts that converged to each root.
    pub hits: Vec<usize>,
    /// Root with the largest `Σ wᵢ`, ties broken by smaller `det Σ`.
    pub selected: Option<usize>,
    pub starts: Vec<StartOutcome>,
}

impl RootSet {
    pub fn selected_root(&self) -> Option<&FitResult> {
        self.selected.map(|i| &self.roots[i])
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }
}

pub fn find_roots_with_depths(
    data: &DataMatrix,
    emp_depths: &DepthVector,
    cfg: &EstimatorConfig,
    inits: &[GaussianParams],
) -> RootSet {
    let fits: Vec<FitResult> = inits
        .par_iter()
        .map(|init| fit_with_depths(data, emp_depths, cfg, init))
        .collect();
    let mut roots: Vec<FitResult> = Vec::new();
    let mut hits = Vec::new();
    let mut starts = Vec::with_capacity(fits.len());
    for (init_index, f) in fits.into_iter().enumerate() {
        let mut outcome = StartOutcome {
            init_index,
            converged: f.converged,
            iterations: f.iterations,
            root: None,
            failure: f.failure.clone(),
        };
        if f.converged {
            let existing = roots
                .iter()
                .position(|r| gaussian::symmetric_kl(&r.params, &f.params).is_ok_and(|d| d < DEDUP_SYMMETRIC_KL));
            let idx = match existing {
                Some(i) => i,
                None => {
                    roots.push(f);
                    hits.push(0);
                    roots.len() - 1
                }
            };
            hits[idx] += 1;
            outcome.root = Some(idx);
        }
        starts.push(outcome);
    }
    let selected = select_root(&roots, data.n());
    RootSet {
        roots,
        hits,
        selected,
        starts,
    }
}

fn select_root(roots: &[FitResult], n: usize) -> Option<usize> {
    let tie = 1e-9 * n as f64;
    let mut best: Option<usize> = None;
    for (i, r) in roots.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let rb = &roots[b];
                let better = r.sum_weights > rb.sum_weights + tie
                    || ((r.sum_weights - rb.sum_weights).abs() <= tie
                        && r.params.ln_det_sigma() < rb.params.ln_det_sigma());
                Some(if better { i } else { b })
            }
        };
    }
    best
}

/// Runs [`fit`] from every init, keeps converged results, and merges roots
/// whose symmetrized KL is below [`DEDUP_SYMMETRIC_KL`]. Results are merged
/// in init order, so the output does not depend on scheduling.
pub fn find_roots(data: &DataMatrix, cfg: &EstimatorConfig, inits: &[GaussianParams]) -> Result<RootSet> {
    if inits.is_empty() {
        return Err(Error::param("inits", "at least one starting value is required"));
    }
    for init in inits {
        check_init(data, init)?;
    }
    let depths = prepare(data, cfg)?;
    Ok(find_roots_with_depths(data, &depths, cfg, inits))
}

/// JSON has no infinities; residuals of far outliers are `+∞`, written as
/// the strings `"inf"` / `"-inf"`.
mod extended_floats {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let items: Vec<Repr> = v
            .iter()
            .map(|&x| {
                if x.is_finite() {
                    Repr::Num(x)
                } else if x.is_nan() {
                    Repr::Text("nan".into())
                } else if x > 0.0 {
                    Repr::Text("inf".into())
                } else {
                    Repr::Text("-inf".into())
                }
            })
            .collect();
        items.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Repr>::deserialize(d)?
            .into_iter()
            .map(|r| match r {
                Repr::Num(x) => Ok(x),
                Repr::Text(t) => match t.as_str() {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    other => Err(D::Error::custom(format!("invalid number {other:?}"))),
                },
            })
            .collect()
    }
}
