//! JSON configuration schemas.
//!
//! Estimator settings are a flat object, for example
//! `{"family":"piecewise","delta1":2,"delta2":9,"gamma":0.3,"xi":1,"alpha":0.5}`.
//! Omitted weight parameters default to the tuned values for `alpha`.

use serde::{Deserialize, Serialize};

use crate::depth::{DepthKind, DepthSelection, PopulationDepth};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, ScatterNorm};
use crate::init::InitSpec;
use crate::residuals::{DprConfig, WeightFamily, WeightSpec};
use crate::sim::GridConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    #[default]
    Piecewise,
    #[serde(alias = "smooth_exp")]
    Smooth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct EstimatorJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub family: FamilyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    /// `"sumw"` (default) or `"n"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scatter_norm: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_method: Option<DepthKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population_depth: Option<PopulationDepth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_effective_points: Option<f64>,
}

pub const DEFAULT_ALPHA: f64 = 0.5;

pub fn parse_scatter_norm(s: &str) -> Result<ScatterNorm> {
    match s {
        "sumw" | "sum-of-weights" => Ok(ScatterNorm::SumOfWeights),
        "n" | "literal-1-over-n" => Ok(ScatterNorm::Literal1OverN),
        other => Err(Error::param(
            "scatter_norm",
            format!("expected \"sumw\" or \"n\", got {other:?}"),
        )),
    }
}

impl EstimatorJson {
    pub fn to_config(&self) -> Result<EstimatorConfig> {
        let alpha = self.alpha.unwrap_or(DEFAULT_ALPHA);
        let dpr = DprConfig::new(alpha)?;
        let tuned = WeightSpec::optimal(alpha);
        let (d1, d2, g) = match *tuned.family() {
            WeightFamily::Piecewise { delta1, delta2, gamma } => (delta1, delta2, gamma),
            WeightFamily::SmoothExp { .. } => unreachable!("tuned weights are piecewise"),
        };
        let family = match self.family {
            FamilyName::Piecewise => {
                if self.a.is_some() {
                    return Err(Error::param("a", "only applies to the smooth family"));
                }
                WeightFamily::Piecewise {
                    delta1: self.delta1.unwrap_or(d1),
                    delta2: self.delta2.unwrap_or(d2),
                    gamma: self.gamma.unwrap_or(g),
                }
            }
            FamilyName::Smooth => {
                for (field, v) in [("delta1", self.delta1), ("delta2", self.delta2), ("gamma", self.gamma)] {
                    if v.is_some() {
                        return Err(Error::param(field, "only applies to the piecewise family"));
                    }
                }
                WeightFamily::SmoothExp {
                    a: self
                        .a
                        .ok_or_else(|| Error::param("a", "required for the smooth family"))?,
                }
            }
        };
        let weights = WeightSpec::new(family, self.xi.unwrap_or(tuned.trim_xi()))?;
        if self.directions == Some(0) {
            return Err(Error::param("directions", "must be at least 1"));
        }
        let cfg = EstimatorConfig {
            dpr,
            weights,
            depth: DepthSelection {
                kind: self.depth_method.unwrap_or_default(),
                n_directions: self.directions,
                seed: self.depth_seed.unwrap_or(0),
            },
            population_depth: self.population_depth.unwrap_or_default(),
            scatter_norm: self
                .scatter_norm
                .as_deref()
                .map(parse_scatter_norm)
                .transpose()?
                .unwrap_or_default(),
            tol: self.tol.unwrap_or(1e-8),
            max_iter: self.max_iter.unwrap_or(500),
            min_effective_points: self.min_effective_points,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_init() -> InitSpec {
    InitSpec::Truth { params: None }
}

/// Simulation grid, e.g.
/// `{"dims":[2],"size_factors":[10],"epsilons":[0.2],"mu_cs":[5,10],"sigma_cs":[1],"reps":100,"seed":1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridJson {
    pub dims: Vec<usize>,
    pub size_factors: Vec<usize>,
    pub epsilons: Vec<f64>,
    #[serde(default = "default_mu_cs")]
    pub mu_cs: Vec<f64>,
    #[serde(default = "default_sigma_cs")]
    pub sigma_cs: Vec<f64>,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub estimator: EstimatorJson,
    #[serde(default = "default_init")]
    pub init: InitSpec,
}

fn default_mu_cs() -> Vec<f64> {
    (0..=10).map(f64::from).collect()
}

fn default_sigma_cs() -> Vec<f64> {
    vec![0.001, 1.0, 2.0, 3.0, 4.0, 5.0]
}

impl GridJson {
    pub fn to_config(&self) -> Result<GridConfig> {
        let cfg = GridConfig {
            dims: self.dims.clone(),
            size_factors: self.size_factors.clone(),
            epsilons: self.epsilons.clone(),
            mu_cs: self.mu_cs.clone(),
            sigma_cs: self.sigma_cs.clone(),
            reps: self.reps,
            seed: self.seed,
            estimator: self.estimator.to_config()?,
            init: self.init.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_grid(json: &str) -> Result<GridConfig> {
    let raw: GridJson = serde_json::from_str(json).map_err(|e| Error::Domain(format!("grid config: {e}")))?;
    raw.to_config()
}
