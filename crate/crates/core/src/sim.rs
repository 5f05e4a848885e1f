//! Monte Carlo contamination harness.
//!
//! Clean observations come from `N_p(0, I)` and a fraction `ε` from
//! `N_p((μ_c, …, μ_c), σ_c² I)`. Each replication draws from a stream
//! derived from the grid seed and the cell and replication coordinates, so
//! reports do not depend on thread count or cell order.
//!
//! MSE is the mean squared error over the `p + p(p+1)/2` free parameters
//! (location entries plus the upper triangle of the scatter).

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::depth::{self, DepthMethod};
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig};
use crate::gaussian::{self, GaussianParams};
use crate::init::InitSpec;
use crate::residuals;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub epsilon: f64,
    pub mu_c: f64,
    pub sigma_c: f64,
}

impl ContaminationSpec {
    pub fn clean() -> Self {
        Self {
            epsilon: 0.0,
            mu_c: 0.0,
            sigma_c: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::param(
                "epsilon",
                format!("must lie in [0, 1), got {}", self.epsilon),
            ));
        }
        if !(self.sigma_c > 0.0 && self.sigma_c.is_finite()) {
            return Err(Error::param(
                "sigma_c",
                format!("must be positive, got {}", self.sigma_c),
            ));
        }
        if !self.mu_c.is_finite() {
            return Err(Error::param("mu_c", "must be finite"));
        }
        Ok(())
    }

    pub fn outlier_count(&self, n: usize) -> usize {
        (self.epsilon * n as f64).round() as usize
    }
}

/// `n` rows with exactly `round(ε n)` contaminated, in shuffled order. The
/// mask marks contaminated rows.
pub fn generate_dataset(n: usize, p: usize, spec: &ContaminationSpec, seed: u64) -> Result<(DataMatrix, Vec<bool>)> {
    spec.validate()?;
    if n == 0 || p == 0 {
        return Err(Error::EmptyData);
    }
    let m = spec.outlier_count(n);
    let mut r = rng::stream(seed, &[0xDA7A]);
    let mut rows: Vec<(Vec<f64>, bool)> = (0..n)
        .map(|i| {
            let outlier = i < m;
            let row = (0..p)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    if outlier {
                        spec.mu_c + spec.sigma_c * z
                    } else {
                        z
                    }
                })
                .collect();
            (row, outlier)
        })
        .collect();
    rows.shuffle(&mut r);
    let mask = rows.iter().map(|r| r.1).collect();
    let data = DataMatrix::new(DMatrix::from_fn(n, p, |i, j| rows[i].0[j]))?;
    Ok((data, mask))
}

/// `(‖μ̂ - μ₀‖² + Σ_{j≤k} (Σ̂_{jk} - Σ₀_{jk})²) / (p + p(p+1)/2)`.
pub fn mse(est: &GaussianParams, truth: &GaussianParams) -> Result<f64> {
    if est.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            found: est.dim(),
        });
    }
    let p = est.dim();
    let loc: f64 = (est.mu() - truth.mu()).norm_squared();
    let mut scat = 0.0;
    for j in 0..p {
        for k in j..p {
            scat += (est.sigma()[(j, k)] - truth.sigma()[(j, k)]).powi(2);
        }
    }
    Ok((loc + scat) / (p + p * (p + 1) / 2) as f64)
}

/// `n = s (p(p+1)/2 + p)`.
pub fn sample_size(p: usize, s: usize) -> usize {
    s * (p * (p + 1) / 2 + p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dims: Vec<usize>,
    pub size_factors: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub mu_cs: Vec<f64>,
    pub sigma_cs: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub estimator: EstimatorConfig,
    pub init: InitSpec,
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        let nonempty = |len: usize, field: &'static str| {
            if len == 0 {
                Err(Error::param(field, "list must be non-empty"))
            } else {
                Ok(())
            }
        };
        nonempty(self.dims.len(), "dims")?;
        nonempty(self.size_factors.len(), "size_factors")?;
        nonempty(self.epsilons.len(), "epsilons")?;
        nonempty(self.mu_cs.len(), "mu_cs")?;
        nonempty(self.sigma_cs.len(), "sigma_cs")?;
        if self.reps == 0 {
            return Err(Error::param("reps", "must be at least 1"));
        }
        if self.dims.contains(&0) {
            return Err(Error::param("dims", "dimensions must be positive"));
        }
        if self.size_factors.contains(&0) {
            return Err(Error::param("size_factors", "size factors must be positive"));
        }
        for &epsilon in &self.epsilons {
            ContaminationSpec {
                epsilon,
                mu_c: 0.0,
                sigma_c: 1.0,
            }
            .validate()?;
        }
        for &mu_c in &self.mu_cs {
            ContaminationSpec {
                epsilon: 0.0,
                mu_c,
                sigma_c: 1.0,
            }
            .validate()?;
        }
        for &sigma_c in &self.sigma_cs {
            ContaminationSpec {
                epsilon: 0.0,
                mu_c: 0.0,
                sigma_c,
            }
            .validate()?;
        }
        self.estimator.validate()?;
        self.init.validate()
    }

    /// Cells in report order. An uncontaminated level yields a single cell
    /// (reported with `mu_c = 0`, `sigma_c = 1`) since the contamination
    /// parameters have no effect there.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &p in &self.dims {
            for &s in &self.size_factors {
                for &epsilon in &self.epsilons {
                    if epsilon == 0.0 {
                        out.push(Cell {
                            p,
                            s,
                            contamination: ContaminationSpec::clean(),
                        });
                        continue;
                    }
                    for &mu_c in &self.mu_cs {
                        for &sigma_c in &self.sigma_cs {
                            out.push(Cell {
                                p,
                                s,
                                contamination: ContaminationSpec { epsilon, mu_c, sigma_c },
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub p: usize,
    pub s: usize,
    pub contamination: ContaminationSpec,
}

impl Cell {
    pub fn n(&self) -> usize {
        sample_size(self.p, self.s)
    }

    fn key(&self) -> [u64; 5] {
        let c = &self.contamination;
        [
            self.p as u64,
            self.s as u64,
            c.epsilon.to_bits(),
            c.mu_c.to_bits(),
            c.sigma_c.to_bits(),
        ]
    }
}

/// Metrics of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RepOutcome {
    pub mse: f64,
    pub kl: f64,
    pub mle_mse: f64,
    pub mle_kl: f64,
    pub mean_weight: f64,
    pub roots: usize,
}

impl RepOutcome {
    /// The selected root is "robust" when its KL to the truth is less than
    /// half that of the MLE on the same data.
    pub fn retrieved(&self) -> bool {
        self.kl < 0.5 * self.mle_kl
    }
}

/// Runs one replication of `cell`.
pub fn run_replication(cfg: &GridConfig, cell: &Cell, rep: usize) -> std::result::Result<RepOutcome, String> {
    let key = cell.key();
    let path = [key[0], key[1], key[2], key[3], key[4], rep as u64];
    let (data, _) = generate_dataset(cell.n(), cell.p, &cell.contamination, rng::derive_seed(cfg.seed, &path))
        .map_err(|e| e.to_string())?;
    let truth = GaussianParams::standard(cell.p);
    let mle = gaussian::mle_fit(&data).map_err(|e| format!("MLE: {e}"))?;
    let method = cfg.estimator.depth.resolve(cell.p).map_err(|e| e.to_string())?;
    let depths = depth::empirical_depths_all(&data, &method).map_err(|e| e.to_string())?;
    let inits = cfg
        .init
        .generate(&data, &method, &path)
        .map_err(|e| format!("init: {e}"))?;
    let roots = estimator::find_roots_with_depths(&data, &depths, &cfg.estimator, &inits);
    let root = roots.selected_root().ok_or_else(|| {
        let reason = roots
            .starts
            .iter()
            .find_map(|s| s.failure.as_ref())
            .map(|f| f.to_string())
            .unwrap_or_else(|| "no converged root".into());
        format!("no converged root ({reason})")
    })?;
    let metric = |g: &GaussianParams| -> std::result::Result<(f64, f64), String> {
        Ok((
            mse(g, &truth).map_err(|e| e.to_string())?,
            gaussian::kl_gaussian(g, &truth).map_err(|e| e.to_string())?,
        ))
    };
    let (mse_w, kl_w) = metric(&root.params)?;
    let (mse_m, kl_m) = metric(&mle)?;
    Ok(RepOutcome {
        mse: mse_w,
        kl: kl_w,
        mle_mse: mse_m,
        mle_kl: kl_m,
        mean_weight: root.sum_weights / data.n() as f64,
        roots: roots.roots.len(),
    })
}

/// Aggregate over the completed replications of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub p: usize,
    pub s: usize,
    pub n: usize,
    pub epsilon: f64,
    pub mu_c: f64,
    pub sigma_c: f64,
    pub reps: usize,
    pub completed: usize,
    pub failures: usize,
    pub mean_mse: f64,
    pub mean_kl: f64,
    pub mle_mean_mse: f64,
    pub mle_mean_kl: f64,
    pub retrievals: usize,
    pub mean_weight: f64,
    pub mean_roots: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failure_reasons: Vec<String>,
}

/// Maxima over the contamination parameters for one `(p, s, ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximaRecord {
    pub p: usize,
    pub s: usize,
    pub epsilon: f64,
    pub max_mse: f64,
    pub max_kl: f64,
    pub mle_max_mse: f64,
    pub mle_max_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub cells: Vec<CellRecord>,
    pub maxima: Vec<MaximaRecord>,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if c == 0 {
        f64::NAN
    } else {
        s / c as f64
    }
}

fn aggregate(cell: &Cell, reps: usize, outcomes: &[std::result::Result<RepOutcome, String>]) -> CellRecord {
    let ok: Vec<&RepOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let mut failure_reasons: Vec<String> = outcomes.iter().filter_map(|o| o.as_ref().err().cloned()).collect();
    failure_reasons.sort();
    failure_reasons.dedup();
    CellRecord {
        p: cell.p,
        s: cell.s,
        n: cell.n(),
        epsilon: cell.contamination.epsilon,
        mu_c: cell.contamination.mu_c,
        sigma_c: cell.contamination.sigma_c,
        reps,
        completed: ok.len(),
        failures: reps - ok.len(),
        mean_mse: mean(ok.iter().map(|o| o.mse)),
        mean_kl: mean(ok.iter().map(|o| o.kl)),
        mle_mean_mse: mean(ok.iter().map(|o| o.mle_mse)),
        mle_mean_kl: mean(ok.iter().map(|o| o.mle_kl)),
        retrievals: ok.iter().filter(|o| o.retrieved()).count(),
        mean_weight: mean(ok.iter().map(|o| o.mean_weight)),
        mean_roots: mean(ok.iter().map(|o| o.roots as f64)),
        failure_reasons,
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() {
        b
    } else if b.is_nan() {
        a
    } else {
        a.max(b)
    }
}

fn maxima(cells: &[CellRecord]) -> Vec<MaximaRecord> {
    let mut out: Vec<MaximaRecord> = Vec::new();
    for c in cells {
        let pos = out
            .iter()
            .position(|m| m.p == c.p && m.s == c.s && m.epsilon.to_bits() == c.epsilon.to_bits());
        match pos {
            Some(i) => {
                let m = &mut out[i];
                m.max_mse = nan_max(m.max_mse, c.mean_mse);
                m.max_kl = nan_max(m.max_kl, c.mean_kl);
                m.mle_max_mse = nan_max(m.mle_max_mse, c.mle_mean_mse);
                m.mle_max_kl = nan_max(m.mle_max_kl, c.mle_mean_kl);
            }
            None => out.push(MaximaRecord {
                p: c.p,
                s: c.s,
                epsilon: c.epsilon,
                max_mse: c.mean_mse,
                max_kl: c.mean_kl,
                mle_max_mse: c.mle_mean_mse,
                mle_max_kl: c.mle_mean_kl,
            }),
        }
    }
    out
}

/// Runs every replication of every cell. Failed replications are recorded
/// and excluded from the means; they never abort the grid.
pub fn run_grid(cfg: &GridConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.reps).map(move |r| (c, r)))
        .collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(c, r)| run_replication(cfg, &cells[c], r))
        .collect();
    let records: Vec<CellRecord> = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| aggregate(cell, cfg.reps, &outcomes[c * cfg.reps..(c + 1) * cfg.reps]))
        .collect();
    let maxima = maxima(&records);
    Ok(SimulationReport { cells: records, maxima })
}

pub const CSV_COLUMNS: [&str; 16] = [
    "p",
    "s",
    "n",
    "epsilon",
    "mu_c",
    "sigma_c",
    "reps",
    "completed",
    "failures",
    "mean_mse",
    "mean_kl",
    "mle_mean_mse",
    "mle_mean_kl",
    "retrievals",
    "mean_weight",
    "mean_roots",
];

impl SimulationReport {
    /// One row per cell, columns as in [`CSV_COLUMNS`]. Floats use the
    /// shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                c.p,
                c.s,
                c.n,
                c.epsilon,
                c.mu_c,
                c.sigma_c,
                c.reps,
                c.completed,
                c.failures,
                c.mean_mse,
                c.mean_kl,
                c.mle_mean_mse,
                c.mle_mean_kl,
                c.retrievals,
                c.mean_weight,
                c.mean_roots
            );
        }
        out
    }

    pub fn maxima_for(&self, p: usize, s: usize, epsilon: f64) -> Option<&MaximaRecord> {
        self.maxima
            .iter()
            .find(|m| m.p == p && m.s == s && m.epsilon == epsilon)
    }
}

/// MLE-to-WLE MSE ratio at the model for one `(p, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRecord {
    pub p: usize,
    pub s: usize,
    pub n: usize,
    pub completed: usize,
    pub wle_mean_mse: f64,
    pub mle_mean_mse: f64,
    pub ratio: f64,
}

/// Efficiency of the MLE relative to the weighted estimator; both are
/// evaluated on the same datasets. Requires every `ε` to be zero.
pub fn efficiency(cfg: &GridConfig) -> Result<Vec<EfficiencyRecord>> {
    if cfg.epsilons.iter().any(|&e| e != 0.0) {
        return Err(Error::param(
            "epsilons",
            "efficiency is defined at the model (ε = 0) only",
        ));
    }
    Ok(efficiency_from_report(&run_grid(cfg)?))
}

pub fn efficiency_from_report(report: &SimulationReport) -> Vec<EfficiencyRecord> {
    report
        .cells
        .iter()
        .filter(|c| c.epsilon == 0.0)
        .map(|c| EfficiencyRecord {
            p: c.p,
            s: c.s,
            n: c.n,
            completed: c.completed,
            wle_mean_mse: c.mean_mse,
            mle_mean_mse: c.mle_mean_mse,
            ratio: c.mle_mean_mse / c.mean_mse,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub distance: f64,
    pub clean_params: GaussianParams,
    pub contaminated_params: GaussianParams,
    /// `‖μ̂_cont - μ̂_clean‖₂`.
    pub displacement: f64,
    pub eigenvalue_min: f64,
    pub eigenvalue_max: f64,
    pub outlier_weight_sum: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Fits clean data, appends `m` near-copies of `(distance, …, distance)`
/// (jittered by `N(0, 10⁻⁶ I)`), refits from the clean root and reports how
/// far the estimate moved.
pub fn breakdown_experiment(
    n: usize,
    p: usize,
    m: usize,
    distance: f64,
    cfg: &EstimatorConfig,
    seed: u64,
) -> Result<BreakdownReport> {
    if n <= 2 * p {
        return Err(Error::param("n", format!("requires n > 2p (n = {n}, p = {p})")));
    }
    if !distance.is_finite() {
        return Err(Error::param("distance", "must be finite"));
    }
    let (clean, _) = generate_dataset(n, p, &ContaminationSpec::clean(), rng::derive_seed(seed, &[1]))?;
    let mle = gaussian::mle_fit(&clean)?;
    let clean_fit = estimator::fit(&clean, cfg, &mle)?;
    if !clean_fit.converged {
        return Err(Error::Insufficient(format!(
            "clean fit did not converge: {}",
            clean_fit.failure.map(|f| f.to_string()).unwrap_or_default()
        )));
    }
    let contaminated_fit = if m == 0 {
        clean_fit.clone()
    } else {
        let mut r = rng::stream(seed, &[2]);
        let jitter = 1e-3;
        let outliers = DMatrix::from_fn(m, p, |_, _| {
            let z: f64 = StandardNormal.sample(&mut r);
            distance + jitter * z
        });
        let all = clean.vstack(&DataMatrix::new(outliers)?)?;
        estimator::fit(&all, cfg, &clean_fit.params)?
    };
    let ev = contaminated_fit.params.sigma_eigenvalues();
    let outlier_weight_sum = contaminated_fit.weights.iter().skip(n).sum();
    Ok(BreakdownReport {
        n,
        p,
        m,
        distance,
        displacement: (contaminated_fit.params.mu() - clean_fit.params.mu()).norm(),
        eigenvalue_min: ev[0],
        eigenvalue_max: ev[ev.len() - 1],
        outlier_weight_sum,
        converged: contaminated_fit.converged,
        iterations: contaminated_fit.iterations,
        clean_params: clean_fit.params,
        contaminated_params: contaminated_fit.params,
    })
}

/// `max_i |τ_n(Xᵢ; θ₀)|` for a clean `N_p(0, I)` sample of size `n`.
pub fn max_abs_residual_at_truth(
    n: usize,
    p: usize,
    alpha: f64,
    method: &DepthMethod,
    rule: depth::PopulationDepth,
    seed: u64,
) -> Result<f64> {
    let (data, _) = generate_dataset(n, p, &ContaminationSpec::clean(), seed)?;
    let depths = depth::empirical_depths_all(&data, method)?;
    let dpr = residuals::DprConfig::new(alpha)?;
    let tau = estimator::residuals_at(&data, &GaussianParams::standard(p), &depths, dpr, rule);
    Ok(tau.iter().fold(0.0f64, |m, t| m.max(t.abs())))
}

/// Random nonsingular `A` and `b` for equivariance checks.
pub fn random_affine(p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut r = rng::stream(seed, &[0xAFF]);
    loop {
        let a = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut r));
        let b = DVector::from_fn(p, |_, _| {
            let z: f64 = StandardNormal.sample(&mut r);
            3.0 * z
        });
        let svd = a.clone().svd(false, false);
        let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
        if smin > 0.1 * smax {
            return (a, b);
        }
    }
}
