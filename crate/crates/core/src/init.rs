//! Starting values for the multi-start IRWLS search.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::depth::{self, DepthMethod};
use crate::error::{Error, Result};
use crate::gaussian::{self, GaussianParams};
use crate::rng;

/// Center used for the scatter of the deepest half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeepCenter {
    /// The deepest observation, which is also the initial location.
    #[default]
    DeepestPoint,
    /// Mean of the deepest half.
    HalfMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum InitSpec {
    /// MLEs of `B` random elemental subsamples.
    Subsample {
        #[serde(rename = "B")]
        b: usize,
        seed: u64,
    },
    /// Deepest point and scatter of the deepest half.
    #[serde(alias = "depth_deterministic")]
    Depth {
        #[serde(default)]
        center: DeepCenter,
    },
    /// Known parameters; `None` means the standard normal of the data dimension.
    Truth {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        params: Option<GaussianParams>,
    },
    Custom {
        params: Vec<GaussianParams>,
    },
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitSpec::Subsample { b: 0, .. } => Err(Error::param("B", "must be at least 1")),
            InitSpec::Custom { params } if params.is_empty() => {
                Err(Error::param("params", "custom init list is empty"))
            }
            _ => Ok(()),
        }
    }

    /// Starting values for `data`. `seed_path` distinguishes replications
    /// that share one subsample seed.
    pub fn generate(&self, data: &DataMatrix, method: &DepthMethod, seed_path: &[u64]) -> Result<Vec<GaussianParams>> {
        self.validate()?;
        match self {
            InitSpec::Subsample { b, seed } => subsample_inits(data, *b, rng::derive_seed(*seed, seed_path)),
            InitSpec::Depth { center } => Ok(vec![depth_init_with(data, method, *center)?]),
            InitSpec::Truth { params } => Ok(vec![params
                .clone()
                .unwrap_or_else(|| GaussianParams::standard(data.p()))]),
            InitSpec::Custom { params } => Ok(params.clone()),
        }
    }
}

/// `p + p(p+1)/2 + 1`: one more than the number of free parameters.
pub fn subsample_size(p: usize) -> usize {
    p + p * (p + 1) / 2 + 1
}

/// MLEs of `b` uniformly drawn subsamples without replacement. Singular
/// subsamples are redrawn, up to `100·b` draws in total. Draw `k` uses a
/// stream derived from `(seed, k)`.
pub fn subsample_inits(data: &DataMatrix, b: usize, seed: u64) -> Result<Vec<GaussianParams>> {
    if b == 0 {
        return Err(Error::param("B", "must be at least 1"));
    }
    let size = subsample_size(data.p());
    if data.n() < size {
        return Err(Error::Insufficient(format!(
            "subsampling needs n ≥ {size} for p = {}, got n = {}",
            data.p(),
            data.n()
        )));
    }
    let mut out = Vec::with_capacity(b);
    for draw in 0..100 * b as u64 {
        let mut r = rng::stream(seed, &[draw]);
        let mut idx = index::sample(&mut r, data.n(), size).into_vec();
        idx.sort_unstable();
        if let Ok(g) = gaussian::mle_fit(&data.select_rows(&idx)?) {
            out.push(g);
            if out.len() == b {
                return Ok(out);
            }
        }
    }
    Err(Error::Insufficient(format!(
        "only {} of {b} subsamples were nonsingular after {} draws",
        out.len(),
        100 * b
    )))
}

/// Row indices from deepest to shallowest, ties by index.
pub fn depth_order(depths: &depth::DepthVector) -> Vec<usize> {
    let counts = depths.counts();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    order
}

pub fn depth_init(data: &DataMatrix, method: &DepthMethod) -> Result<GaussianParams> {
    depth_init_with(data, method, DeepCenter::DeepestPoint)
}

/// Location at the deepest observation; scatter from the `⌈n/2⌉` deepest
/// observations. Ties go to the lower index.
pub fn depth_init_with(data: &DataMatrix, method: &DepthMethod, center: DeepCenter) -> Result<GaussianParams> {
    let depths = depth::empirical_depths_all(data, method)?;
    let order = depth_order(&depths);
    let k = data.n().div_ceil(2);
    let deep = data.select_rows(&order[..k])?;
    let mu = data.row(order[0]);
    let c = match center {
        DeepCenter::DeepestPoint => mu.clone(),
        DeepCenter::HalfMean => deep.matrix().row_mean().transpose(),
    };
    let p = data.p();
    let centered = nalgebra::DMatrix::from_fn(k, p, |i, j| deep.matrix()[(i, j)] - c[j]);
    let sigma = gaussian::symmetrize(centered.transpose() * &centered / k as f64);
    GaussianParams::new(mu, sigma).map_err(|e| match e {
        Error::NotSpd(m) => Error::NotSpd(format!("deepest-half scatter: {m}")),
        e => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn rows1(v: &[f64]) -> DataMatrix {
        DataMatrix::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn depth_init_examples() {
        let g = depth_init(&rows1(&[1.0, 2.0, 3.0]), &DepthMethod::Exact1d).unwrap();
        assert_eq!(g.mu()[0], 2.0);
        let g = depth_init(&rows1(&[0.0, 1.0, 2.0, 3.0]), &DepthMethod::Exact1d).unwrap();
        assert_eq!(g.mu()[0], 1.0);
        assert_eq!(g.sigma()[(0, 0)], 0.5);
        let g = depth_init_with(
            &rows1(&[0.0, 1.0, 2.0, 3.0]),
            &DepthMethod::Exact1d,
            DeepCenter::HalfMean,
        )
        .unwrap();
        assert_eq!(g.sigma()[(0, 0)], 0.25);

        let cross = DataMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
            vec![0.0, 0.0],
        ])
        .unwrap();
        let depths = depth::empirical_depths_all(&cross, &DepthMethod::Exact2d).unwrap();
        assert_eq!(cross.row(depth_order(&depths)[0]), dvector![0.0, 0.0]);
        // With n < 2(p + 1) the deepest half here is {(0,0), (1,0), (-1,0)}: singular.
        assert!(matches!(
            depth_init(&cross, &DepthMethod::Exact2d),
            Err(Error::NotSpd(_))
        ));
        let mut rows: Vec<Vec<f64>> = (0..5).map(|i| cross.row_vec(i)).collect();
        rows.extend([vec![0.5, 0.5], vec![-0.5, -0.4]]);
        let wider = DataMatrix::from_rows(&rows).unwrap();
        let g = depth_init(&wider, &DepthMethod::Exact2d).unwrap();
        assert_eq!(g.mu(), &dvector![0.0, 0.0]);
    }

    #[test]
    fn subsample_rules() {
        assert_eq!(subsample_size(1), 3);
        assert_eq!(subsample_size(2), 6);
        assert_eq!(subsample_size(5), 21);
        let data = rows1(&[0.1, 0.5, -1.0, 2.0, 0.7, 1.1, -0.4]);
        assert!(subsample_inits(&data, 0, 1).is_err());
        let a = subsample_inits(&data, 20, 42).unwrap();
        let b = subsample_inits(&data, 20, 42).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_ne!(a, subsample_inits(&data, 20, 43).unwrap());
        assert!(subsample_inits(&rows1(&[1.0, 2.0]), 5, 1).is_err());
        // every subsample singular
        assert!(subsample_inits(&rows1(&[1.0; 10]), 3, 1).is_err());
    }

    #[test]
    fn init_spec_json() {
        let s: InitSpec = serde_json::from_str(r#"{"strategy":"subsample","B":500,"seed":42}"#).unwrap();
        assert_eq!(s, InitSpec::Subsample { b: 500, seed: 42 });
        let s: InitSpec = serde_json::from_str(r#"{"strategy":"depth"}"#).unwrap();
        assert_eq!(
            s,
            InitSpec::Depth {
                center: DeepCenter::DeepestPoint
            }
        );
        let s: InitSpec = serde_json::from_str(r#"{"strategy":"truth"}"#).unwrap();
        assert_eq!(s, InitSpec::Truth { params: None });
        let bad: InitSpec = serde_json::from_str(r#"{"strategy":"subsample","B":0,"seed":1}"#).unwrap();
        assert!(bad.validate().is_err());
    }
}
