//! Depth Pearson residuals and the weight functions applied to them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of the model depth in the residual denominator.
///
/// Values in `(0, 1]` are accepted. Asymptotic theory for general models
/// needs `alpha < 3/4`; the Gaussian case allows values up to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DprConfig {
    alpha: f64,
}

impl DprConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0, 1], got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// `τ = (d_emp - d_model) / d_model^α`.
pub fn dpr(d_emp: f64, d_model: f64, cfg: DprConfig) -> Result<f64> {
    if d_model.is_nan() || d_model <= 0.0 {
        return Err(Error::Domain(format!("model depth must be positive, got {d_model}")));
    }
    if d_emp.is_nan() || d_emp < 0.0 {
        return Err(Error::Domain(format!("empirical depth must be ≥ 0, got {d_emp}")));
    }
    Ok((d_emp - d_model) / d_model.powf(cfg.alpha))
}

/// Same residual from `ln d_model`, written as
/// `d_emp · d^{-α} - d^{1-α}`. When the model depth underflows the result
/// is `+∞`, which the trimmed weight maps to zero.
pub fn dpr_from_ln_model(d_emp: f64, ln_d_model: f64, cfg: DprConfig) -> f64 {
    let a = cfg.alpha;
    let tail = ((1.0 - a) * ln_d_model).exp();
    if d_emp == 0.0 {
        return -tail;
    }
    d_emp * (-a * ln_d_model).exp() - tail
}

/// Weight family evaluated on residuals `τ ≥ -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightFamily {
    /// `(h(τ) + γ) / (1 + γ)` with `h` equal to 1 up to `delta1`, linear
    /// down to 0 at `delta2`, and 0 beyond.
    Piecewise { delta1: f64, delta2: f64, gamma: f64 },
    /// `exp(-a τ²)`.
    #[serde(alias = "smooth")]
    SmoothExp { a: f64 },
}

impl WeightFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            WeightFamily::Piecewise { delta1, delta2, gamma } => {
                if !(delta1 > 0.0 && delta1.is_finite()) {
                    return Err(Error::param("delta1", format!("must be positive, got {delta1}")));
                }
                if !(delta2 > delta1 && delta2.is_finite()) {
                    return Err(Error::param("delta2", format!("must exceed delta1, got {delta2}")));
                }
                if !(gamma >= 0.0 && gamma.is_finite()) {
                    return Err(Error::param("gamma", format!("must be ≥ 0, got {gamma}")));
                }
            }
            WeightFamily::SmoothExp { a } => {
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(Error::param("a", format!("must be ≥ 0, got {a}")));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, tau: f64) -> f64 {
        match *self {
            WeightFamily::Piecewise { delta1, delta2, gamma } => {
                let h = if tau <= delta1 {
                    1.0
                } else if tau <= delta2 {
                    (delta2 - tau) / (delta2 - delta1)
                } else {
                    0.0
                };
                (h + gamma) / (1.0 + gamma)
            }
            WeightFamily::SmoothExp { a } => {
                if a == 0.0 {
                    1.0
                } else {
                    (-a * tau * tau).exp()
                }
            }
        }
    }

    /// Smallest value the weight can take.
    pub fn floor(&self) -> f64 {
        match *self {
            WeightFamily::Piecewise { gamma, .. } => gamma / (1.0 + gamma),
            WeightFamily::SmoothExp { a: 0.0 } => 1.0,
            WeightFamily::SmoothExp { .. } => 0.0,
        }
    }
}

/// Weight family plus the trimming constant `ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec {
    family: WeightFamily,
    trim_xi: f64,
}

impl WeightSpec {
    pub fn new(family: WeightFamily, trim_xi: f64) -> Result<Self> {
        family.validate()?;
        if trim_xi.is_nan() || trim_xi <= 0.0 {
            return Err(Error::param("xi", format!("must be positive, got {trim_xi}")));
        }
        Ok(Self { family, trim_xi })
    }

    /// Tuned piecewise parameters for the given `alpha`:
    ///
    /// | alpha | gamma | delta1 | delta2 | xi |
    /// |-------|-------|--------|--------|----|
    /// | 0.25  | 0.1   | 2      | 3      | 1  |
    /// | 0.5   | 0.3   | 2      | 9      | 1  |
    /// | 0.75  | 0.3   | 2      | 9      | 5  |
    /// | 1     | 0.3   | 2      | 9      | 5  |
    ///
    /// Other values use the row of the nearest tabulated `alpha`.
    pub fn optimal(alpha: f64) -> Self {
        const ROWS: [(f64, f64, f64, f64, f64); 4] = [
            (0.25, 0.1, 2.0, 3.0, 1.0),
            (0.5, 0.3, 2.0, 9.0, 1.0),
            (0.75, 0.3, 2.0, 9.0, 5.0),
            (1.0, 0.3, 2.0, 9.0, 5.0),
        ];
        let &(_, gamma, delta1, delta2, xi) = ROWS
            .iter()
            .min_by(|a, b| (a.0 - alpha).abs().total_cmp(&(b.0 - alpha).abs()))
            .expect("table is non-empty");
        Self {
            family: WeightFamily::Piecewise { delta1, delta2, gamma },
            trim_xi: xi,
        }
    }

    /// Constant weight 1 with no trimming; the estimator reduces to the MLE.
    pub fn unit() -> Self {
        Self {
            family: WeightFamily::SmoothExp { a: 0.0 },
            trim_xi: f64::INFINITY,
        }
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn trim_xi(&self) -> f64 {
        self.trim_xi
    }
}

/// Untrimmed weight `w(τ)` in `[0, 1]`.
pub fn weight(tau: f64, spec: &WeightSpec) -> f64 {
    spec.family.eval(tau)
}

/// Median, with the midpoint of the two central order statistics for even
/// lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        let (lo, hi) = (v[n / 2 - 1], v[n / 2]);
        if lo == hi {
            lo
        } else {
            0.5 * lo + 0.5 * hi
        }
    })
}

/// Zeroes `wᵢ` whenever `τᵢ > median(τ) + ξ`.
pub fn apply_trim(tau: &[f64], w: &[f64], xi: f64) -> Result<Vec<f64>> {
    if tau.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: tau.len(),
            found: w.len(),
        });
    }
    let threshold = median(tau)? + xi;
    Ok(tau
        .iter()
        .zip(w)
        .map(|(&t, &wi)| if t <= threshold { wi } else { 0.0 })
        .collect())
}

/// Finite-difference summary of a weight function over a residual grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightClassReport {
    pub w_at_zero: f64,
    pub dw_at_zero: f64,
    /// `max |w'(t) (t + 1)|` over the grid.
    pub max_first: f64,
    /// `max |w''(t) (t + 2)²|` over the grid.
    pub max_second: f64,
    pub min_weight: f64,
    pub max_weight: f64,
    /// Points where the weight is not differentiable.
    pub kinks: Vec<f64>,
    /// `w(0) = 1`, `|w'(0)| ≤ 1e-6`, and no kinks.
    pub smooth_conforming: bool,
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-6;

pub fn check_weight_class(spec: &WeightSpec, grid: &[f64]) -> WeightClassReport {
    let w = |t: f64| weight(t, spec);
    let h = FD_STEP;
    let d1 = |t: f64| (w(t + h) - w(t - h)) / (2.0 * h);
    let d2 = |t: f64| (w(t + h) - 2.0 * w(t) + w(t - h)) / (h * h);
    let kinks = match *spec.family() {
        WeightFamily::Piecewise { delta1, delta2, .. } => vec![delta1, delta2],
        WeightFamily::SmoothExp { .. } => Vec::new(),
    };
    // Difference quotients straddling a kink measure the jump, not a derivative.
    let near_kink = |t: f64| kinks.iter().any(|&k| (t - k).abs() <= h);
    let mut report = WeightClassReport {
        w_at_zero: w(0.0),
        dw_at_zero: d1(0.0),
        max_first: 0.0,
        max_second: 0.0,
        min_weight: f64::INFINITY,
        max_weight: f64::NEG_INFINITY,
        smooth_conforming: false,
        kinks: kinks.clone(),
    };
    for &t in grid {
        let wt = w(t);
        report.min_weight = report.min_weight.min(wt);
        report.max_weight = report.max_weight.max(wt);
        if near_kink(t) {
            continue;
        }
        report.max_first = report.max_first.max((d1(t) * (t + 1.0)).abs());
        report.max_second = report.max_second.max((d2(t) * (t + 2.0).powi(2)).abs());
    }
    report.smooth_conforming =
        report.kinks.is_empty() && (report.w_at_zero - 1.0).abs() <= FD_TOL && report.dw_at_zero.abs() <= FD_TOL;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn piecewise(d1: f64, d2: f64, g: f64, xi: f64) -> WeightSpec {
        WeightSpec::new(
            WeightFamily::Piecewise {
                delta1: d1,
                delta2: d2,
                gamma: g,
            },
            xi,
        )
        .unwrap()
    }

    #[test]
    fn dpr_examples() {
        let c = |a| DprConfig::new(a).unwrap();
        assert_eq!(dpr(0.3, 0.3, c(0.5)).unwrap(), 0.0);
        assert!((dpr(0.5, 0.25, c(0.5)).unwrap() - 0.5).abs() < 1e-15);
        let got = dpr(0.01, 0.04, c(0.25)).unwrap();
        assert!((got - (-0.03 / 0.04f64.powf(0.25))).abs() < 1e-15);
        assert!((got + 0.067082).abs() < 1e-6);
        assert!(dpr(0.1, 0.0, c(0.5)).is_err());
        assert!(dpr(-0.1, 0.2, c(0.5)).is_err());
        assert!(DprConfig::new(0.0).is_err());
        assert!(DprConfig::new(1.5).is_err());
        assert!(DprConfig::new(1.0).is_ok());
    }

    #[test]
    fn log_route_matches_direct_route() {
        for &a in &[0.25, 0.5, 0.75, 1.0] {
            let cfg = DprConfig::new(a).unwrap();
            for &(de, dm) in &[(0.02, 1e-5), (0.5, 0.5), (0.1, 0.3), (0.0, 0.2)] {
                let direct = dpr(de, dm, cfg).unwrap();
                let logged = dpr_from_ln_model(de, f64::ln(dm), cfg);
                assert!((direct - logged).abs() <= 1e-12 * (1.0 + direct.abs()));
            }
        }
        let cfg = DprConfig::new(0.5).unwrap();
        assert_eq!(dpr_from_ln_model(0.01, -1e12, cfg), f64::INFINITY);
    }

    #[test]
    fn weight_examples() {
        let pw = piecewise(2.0, 9.0, 0.3, 1.0);
        assert_eq!(weight(0.0, &pw), 1.0);
        assert!((weight(10.0, &pw) - 0.3 / 1.3).abs() < 1e-15);
        assert!((weight(5.5, &pw) - (0.5 + 0.3) / 1.3).abs() < 1e-15);
        assert!((weight(f64::INFINITY, &pw) - 0.3 / 1.3).abs() < 1e-15);
        let se = WeightSpec::new(WeightFamily::SmoothExp { a: 0.05 }, 1.0).unwrap();
        assert!((weight(2.0, &se) - (-0.2f64).exp()).abs() < 1e-15);
        assert_eq!(weight(3.0, &WeightSpec::unit()), 1.0);
    }

    #[test]
    fn weight_spec_validation() {
        let bad = |f| WeightSpec::new(f, 1.0).is_err();
        assert!(bad(WeightFamily::Piecewise {
            delta1: 3.0,
            delta2: 2.0,
            gamma: 0.1
        }));
        assert!(bad(WeightFamily::Piecewise {
            delta1: 0.0,
            delta2: 2.0,
            gamma: 0.1
        }));
        assert!(bad(WeightFamily::Piecewise {
            delta1: 1.0,
            delta2: 2.0,
            gamma: -0.1
        }));
        assert!(bad(WeightFamily::SmoothExp { a: -1.0 }));
        assert!(WeightSpec::new(WeightFamily::SmoothExp { a: 1.0 }, 0.0).is_err());
    }

    #[test]
    fn optimal_table() {
        let s = WeightSpec::optimal(0.5);
        assert_eq!(
            *s.family(),
            WeightFamily::Piecewise {
                delta1: 2.0,
                delta2: 9.0,
                gamma: 0.3
            }
        );
        assert_eq!(s.trim_xi(), 1.0);
        let s = WeightSpec::optimal(0.25);
        assert_eq!(
            *s.family(),
            WeightFamily::Piecewise {
                delta1: 2.0,
                delta2: 3.0,
                gamma: 0.1
            }
        );
        assert_eq!(WeightSpec::optimal(0.75).trim_xi(), 5.0);
        assert_eq!(WeightSpec::optimal(1.0).trim_xi(), 5.0);
    }

    #[test]
    fn trim_examples() {
        let w = vec![0.7, 0.8, 0.9, 1.0, 0.5];
        assert_eq!(apply_trim(&[0.2; 5], &w, 1.0).unwrap(), w);
        let out = apply_trim(&[0.0, 0.0, 0.0, 0.0, 100.0], &w, 1.0).unwrap();
        assert_eq!(out, vec![0.7, 0.8, 0.9, 1.0, 0.0]);
        let tau = [-0.5, 0.0, 0.5, 9.0];
        assert_eq!(median(&tau).unwrap(), 0.25);
        let out = apply_trim(&tau, &[1.0; 4], 5.0).unwrap();
        assert_eq!(out, vec![1.0, 1.0, 1.0, 0.0]);
        assert!(apply_trim(&[], &[], 1.0).is_err());
        assert!(apply_trim(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn weight_class_reports() {
        let grid: Vec<f64> = (0..=11_000).map(|i| -1.0 + i as f64 * 1e-3).collect();
        let se = WeightSpec::new(WeightFamily::SmoothExp { a: 1.0 }, 1.0).unwrap();
        let r = check_weight_class(&se, &grid);
        assert_eq!(r.w_at_zero, 1.0);
        assert!(r.dw_at_zero.abs() <= 1e-6);
        assert!(r.smooth_conforming);
        // Oracle: |2t e^{-t²} (t + 1)| maximized on a fine grid is ≈ 1.05.
        let oracle = (0..=1_100_000)
            .map(|i| -1.0 + i as f64 * 1e-5)
            .map(|t: f64| (2.0 * t * (-t * t).exp() * (t + 1.0)).abs())
            .fold(0.0, f64::max);
        assert!(oracle <= 2.0);
        assert!((r.max_first - oracle).abs() < 1e-3, "{} vs {oracle}", r.max_first);

        let pw = piecewise(2.0, 9.0, 0.3, 1.0);
        let r = check_weight_class(&pw, &grid);
        assert_eq!(r.kinks, vec![2.0, 9.0]);
        assert!(!r.smooth_conforming);
        assert_eq!(r.w_at_zero, 1.0);
    }

    proptest! {
        #[test]
        fn weights_are_bounded(tau in -1.0f64..1e6, d1 in 0.1f64..5.0, gap in 0.1f64..10.0, g in 0.0f64..1.0, a in 0.0f64..5.0) {
            let pw = piecewise(d1, d1 + gap, g, 1.0);
            let w = weight(tau, &pw);
            prop_assert!(w >= g / (1.0 + g) - 1e-15 && w <= 1.0);
            prop_assert_eq!(weight(0.0, &pw), 1.0);
            let se = WeightSpec::new(WeightFamily::SmoothExp { a }, 1.0).unwrap();
            let w = weight(tau, &se);
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert_eq!(weight(0.0, &se), 1.0);
        }

        #[test]
        fn piecewise_is_monotone(t1 in -1.0f64..20.0, t2 in -1.0f64..20.0) {
            let pw = piecewise(2.0, 9.0, 0.3, 1.0);
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            prop_assert!(weight(lo, &pw) >= weight(hi, &pw));
            if hi <= 2.0 { prop_assert_eq!(weight(hi, &pw), 1.0); }
        }

        #[test]
        fn trimming_keeps_the_lower_half(tau in proptest::collection::vec(-1.0f64..50.0, 1..60), xi in 0.01f64..10.0) {
            let w: Vec<f64> = tau.iter().map(|t| 1.0 / (1.0 + t.abs())).collect();
            let out = apply_trim(&tau, &w, xi).unwrap();
            let m = median(&tau).unwrap();
            let mut kept = 0;
            for i in 0..tau.len() {
                prop_assert!(out[i] <= w[i]);
                if out[i] == 0.0 { prop_assert!(tau[i] > m + xi); } else { kept += 1; }
            }
            prop_assert!(kept >= tau.len().div_ceil(2));
        }

        #[test]
        fn matched_depths_give_zero(d in 1e-6f64..0.5, a in 0.01f64..1.0) {
            prop_assert_eq!(dpr(d, d, DprConfig::new(a).unwrap()).unwrap(), 0.0);
        }
    }
}
