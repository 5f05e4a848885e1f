mod common;

use depthwl::depth::{self, DepthMethod};
use depthwl::DataMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn points(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..=max)
}

fn matrix(pts: &[(f64, f64)]) -> DataMatrix {
    DataMatrix::from_rows(&pts.iter().map(|p| vec![p.0, p.1]).collect::<Vec<_>>()).unwrap()
}

/// Small integer grids produce many collinear and repeated points.
fn lattice(max: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-2i32..=2, -2i32..=2), 1..=max)
        .prop_map(|v| v.into_iter().map(|(a, b)| (a as f64, b as f64)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exact_2d_matches_brute_force(pts in points(12), q in (-6.0f64..6.0, -6.0f64..6.0)) {
        let data = matrix(&pts);
        let got = depth::halfspace_count(&[q.0, q.1], &data, &DepthMethod::Exact2d).unwrap();
        prop_assert_eq!(got, common::brute_force_count(q, &pts));
        let all = depth::empirical_depths_all(&data, &DepthMethod::Exact2d).unwrap();
        for (i, &c) in all.counts().iter().enumerate() {
            prop_assert_eq!(c, common::brute_force_count(pts[i], &pts));
        }
    }

    #[test]
    fn exact_2d_matches_brute_force_on_lattice(pts in lattice(12), q in (-3i32..=3, -3i32..=3)) {
        let data = matrix(&pts);
        let q = (q.0 as f64, q.1 as f64);
        let got = depth::halfspace_count(&[q.0, q.1], &data, &DepthMethod::Exact2d).unwrap();
        prop_assert_eq!(got, common::brute_force_count(q, &pts));
        let all = depth::empirical_depths_all(&data, &DepthMethod::Exact2d).unwrap();
        for (i, &c) in all.counts().iter().enumerate() {
            prop_assert_eq!(c, common::brute_force_count(pts[i], &pts));
        }
    }

    #[test]
    fn exact_depth_is_affine_invariant(
        pts in points(30),
        a in prop::array::uniform4(-3.0f64..3.0),
        b in (-10.0f64..10.0, -10.0f64..10.0),
    ) {
        let a = DMatrix::from_row_slice(2, 2, &a);
        prop_assume!(a.determinant().abs() > 0.1);
        let data = matrix(&pts);
        let t = data.affine(&a, &DVector::from_vec(vec![b.0, b.1])).unwrap();
        let before = depth::empirical_depths_all(&data, &DepthMethod::Exact2d).unwrap();
        let after = depth::empirical_depths_all(&t, &DepthMethod::Exact2d).unwrap();
        prop_assert_eq!(before.counts(), after.counts());
    }

    #[test]
    fn exact_1d_depth_is_affine_invariant(xs in prop::collection::vec(-5.0f64..5.0, 1..40), a in 0.2f64..4.0, neg: bool, b in -10.0f64..10.0) {
        let a = if neg { -a } else { a };
        let data = DataMatrix::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap();
        let t = data.affine(&DMatrix::from_element(1, 1, a), &DVector::from_element(1, b)).unwrap();
        let before = depth::empirical_depths_all(&data, &DepthMethod::Exact1d).unwrap();
        let after = depth::empirical_depths_all(&t, &DepthMethod::Exact1d).unwrap();
        prop_assert_eq!(before.counts(), after.counts());
    }

    #[test]
    fn projection_bounds_exact_and_decreases_with_directions(pts in points(25), seed: u64) {
        let data = matrix(&pts);
        let exact = depth::empirical_depths_all(&data, &DepthMethod::Exact2d).unwrap();
        let mut prev: Option<Vec<usize>> = None;
        for k in [1, 8, 64, 512] {
            let proj = depth::empirical_depths_all(&data, &DepthMethod::Projection { n_directions: k, direction_seed: seed }).unwrap();
            for (p, e) in proj.counts().iter().zip(exact.counts()) {
                prop_assert!(p >= e);
            }
            if let Some(prev) = &prev {
                for (p, q) in proj.counts().iter().zip(prev) {
                    prop_assert!(p <= q);
                }
            }
            prev = Some(proj.counts().to_vec());
        }
    }
}

#[test]
fn projection_converges_to_exact_in_two_dimensions() {
    let pts: Vec<(f64, f64)> = (0..30)
        .map(|i| {
            let t = i as f64 * 0.7;
            (t.cos() * (1.0 + 0.1 * i as f64), t.sin())
        })
        .collect();
    let data = matrix(&pts);
    let exact = depth::empirical_depths_all(&data, &DepthMethod::Exact2d).unwrap();
    let proj = depth::empirical_depths_all(
        &data,
        &DepthMethod::Projection {
            n_directions: 20_000,
            direction_seed: 1,
        },
    )
    .unwrap();
    let gap: usize = proj.counts().iter().zip(exact.counts()).map(|(p, e)| p - e).sum();
    assert!(gap <= 3, "total excess {gap}");
}
