//! Multivariate Gaussian family: parameters, Mahalanobis distance,
//! log-density, maximum likelihood and Kullback–Leibler divergence.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// Location `mu` and SPD scatter `sigma`. The Cholesky factor is computed
/// once at construction, so every instance is known to be SPD.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct GaussianParams {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawParams {
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
}

impl TryFrom<RawParams> for GaussianParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        let p = raw.mu.len();
        if raw.sigma.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: raw.sigma.len(),
            });
        }
        if let Some(row) = raw.sigma.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: row.len(),
            });
        }
        let sigma = DMatrix::from_fn(p, p, |i, j| raw.sigma[i][j]);
        GaussianParams::new(DVector::from_vec(raw.mu), sigma)
    }
}

impl From<GaussianParams> for RawParams {
    fn from(g: GaussianParams) -> Self {
        let p = g.dim();
        RawParams {
            mu: g.mu.iter().copied().collect(),
            sigma: (0..p).map(|i| (0..p).map(|j| g.sigma[(i, j)]).collect()).collect(),
        }
    }
}

impl PartialEq for GaussianParams {
    fn eq(&self, other: &Self) -> bool {
        self.mu == other.mu && self.sigma == other.sigma
    }
}

impl GaussianParams {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let p = mu.len();
        if p == 0 {
            return Err(Error::EmptyData);
        }
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: sigma.nrows(),
            });
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NotSpd("non-finite entries".into()));
        }
        let scale = sigma.amax();
        for i in 0..p {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotSpd(format!("asymmetric at ({i},{j})")));
                }
            }
        }
        let chol = Cholesky::new(sigma.clone()).ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
        if chol.l_dirty().diagonal().iter().any(|&d| d <= 0.0 || !d.is_finite()) {
            return Err(Error::NotSpd("non-positive pivot".into()));
        }
        Ok(Self { mu, sigma, chol })
    }

    /// Standard normal `N_p(0, I)`.
    pub fn standard(p: usize) -> Self {
        Self::new(DVector::zeros(p), DMatrix::identity(p, p)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn ln_det_sigma(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    pub fn det_sigma(&self) -> f64 {
        self.ln_det_sigma().exp()
    }

    /// `(x - mu)ᵀ Σ⁻¹ (x - mu)` through a triangular solve with the Cholesky factor.
    pub fn mahalanobis_sq_unchecked(&self, x: &[f64]) -> f64 {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(self.mu.iter()).map(|(a, b)| a - b));
        let z = self
            .chol
            .l()
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        z.norm_squared()
    }

    pub fn mahalanobis_sq(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.mahalanobis_sq_unchecked(x))
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let delta = self.mahalanobis_sq(x)?;
        let p = self.dim() as f64;
        Ok(-0.5 * (p * (2.0 * std::f64::consts::PI).ln() + self.ln_det_sigma() + delta))
    }

    pub fn sigma_inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// Eigenvalues of `sigma` in ascending order.
    pub fn sigma_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.sigma.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Parameters of `A X + b` when `X` has these parameters.
    pub fn affine(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let mu = a * &self.mu + b;
        let s = a * &self.sigma * a.transpose();
        Self::new(mu, symmetrize(s))
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Squared Mahalanobis distance of `x` under `params`.
pub fn mahalanobis_sq(x: &[f64], params: &GaussianParams) -> Result<f64> {
    params.mahalanobis_sq(x)
}

pub fn log_density(x: &[f64], params: &GaussianParams) -> Result<f64> {
    params.log_density(x)
}

/// Sample mean and `1/n` covariance. Fails if the covariance is singular.
pub fn mle_fit(data: &DataMatrix) -> Result<GaussianParams> {
    let w = vec![1.0; data.n()];
    weighted_moments(data, &w, data.n() as f64)
}

/// Weighted mean `Σ wᵢxᵢ / Σ wᵢ` and scatter `Σ wᵢ(xᵢ-m)(xᵢ-m)ᵀ / denom`.
pub(crate) fn weighted_moments(data: &DataMatrix, w: &[f64], denom: f64) -> Result<GaussianParams> {
    let x = data.matrix();
    let (n, p) = (data.n(), data.p());
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::Insufficient("weights sum to zero".into()));
    }
    let mut mu = DVector::zeros(p);
    for (i, &wi) in w.iter().enumerate() {
        if wi != 0.0 {
            mu.axpy(wi, &x.row(i).transpose(), 1.0);
        }
    }
    mu /= total;
    let centered = DMatrix::from_fn(n, p, |i, j| w[i].sqrt() * (x[(i, j)] - mu[j]));
    let sigma = symmetrize(centered.transpose() * &centered / denom);
    GaussianParams::new(mu, sigma)
}

/// `KL(p0 ‖ p1)` in closed form.
pub fn kl_gaussian(p0: &GaussianParams, p1: &GaussianParams) -> Result<f64> {
    p0.check_dim(p1.dim())?;
    let inv1 = p1.sigma_inverse();
    let trace = (&inv1 * p0.sigma()).trace();
    let quad = p1.mahalanobis_sq_unchecked(p0.mu().as_slice());
    let p = p0.dim() as f64;
    let kl = 0.5 * (trace + quad - p + p1.ln_det_sigma() - p0.ln_det_sigma());
    Ok(kl.max(0.0))
}

/// `KL(a ‖ b) + KL(b ‖ a)`.
pub fn symmetric_kl(a: &GaussianParams, b: &GaussianParams) -> Result<f64> {
    Ok(kl_gaussian(a, b)? + kl_gaussian(b, a)?)
}
