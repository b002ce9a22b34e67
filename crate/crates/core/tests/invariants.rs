use idshield::eval;
use idshield::geometry::{self, AngularDistance, UnitVector};
use idshield::mechanisms::{self, MechanismSpec};
use idshield::remap;
use idshield::vmf::{self, VmfParams};
use idshield::RandomStream;
use proptest::prelude::*;

fn point(dim: usize, seed: u64) -> UnitVector {
    geometry::uniform_sample(dim, &mut RandomStream::new(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn angular_distance_is_a_metric(dim in 2usize..64, s in any::<u64>()) {
        let (x, y, z) = (point(dim, s), point(dim, s ^ 1), point(dim, s ^ 2));
        let d = |a: &UnitVector, b: &UnitVector| geometry::angular_distance(a, b).unwrap().radians();
        prop_assert!(d(&x, &x) < 1e-7);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-9);
        prop_assert!((0.0..=std::f64::consts::PI).contains(&d(&x, &y)));
    }

    #[test]
    fn chord_arc_identity(dim in 2usize..128, s in any::<u64>()) {
        let (x, y) = (point(dim, s), point(dim, s.wrapping_add(7)));
        let arc = geometry::angular_distance(&x, &y).unwrap().radians();
        let chord = geometry::euclidean_distance(&x, &y).unwrap();
        prop_assert!((chord - 2.0 * (arc / 2.0).sin()).abs() < 1e-9);
        prop_assert!(chord <= arc + 1e-12);
    }

    #[test]
    fn rotation_is_exact(dim in 2usize..64, deg in 0.0f64..=180.0, s in any::<u64>()) {
        let x = point(dim, s);
        let theta = AngularDistance::from_degrees(deg).unwrap();
        let out = mechanisms::avatar_rotation(&x, theta, &mut RandomStream::new(s)).unwrap();
        let y = out.to_unit().unwrap();
        prop_assert!((x.dot(&y) - theta.radians().cos()).abs() < 1e-9);
    }

    #[test]
    fn dense_and_fast_rotation_agree(dim in 2usize..=64, rad in 0.0f64..=std::f64::consts::PI, s in any::<u64>()) {
        let (x, z) = (point(dim, s), point(dim, s ^ 99));
        let basis = geometry::orthonormal_pair(&x, &z).unwrap();
        let theta = AngularDistance::new(rad).unwrap();
        let fast = geometry::rotate_in_plane(&x, &basis, theta).unwrap();
        let m = geometry::rotation_matrix(&basis, theta).unwrap();
        let dense = m * nalgebra::DVector::from_column_slice(x.as_slice());
        for (a, b) in fast.as_slice().iter().zip(dense.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn vmf_density_ratio_bound(dim in 2usize..128, eps in 0.01f64..200.0, s in any::<u64>()) {
        let (x1, x2) = (point(dim, s), point(dim, s ^ 3));
        let y = vmf::sample_vmf(&VmfParams::new(x1.clone(), eps).unwrap(), &mut RandomStream::new(s)).unwrap();
        let l1 = vmf::log_density(&y, &VmfParams::new(x1.clone(), eps).unwrap()).unwrap();
        let l2 = vmf::log_density(&y, &VmfParams::new(x2.clone(), eps).unwrap()).unwrap();
        let d2 = geometry::euclidean_distance(&x1, &x2).unwrap();
        let da = geometry::angular_distance(&x1, &x2).unwrap().radians();
        prop_assert!(l1 - l2 <= eps * d2 + 1e-9);
        prop_assert!(eps * d2 <= eps * da + 1e-9);
    }

    #[test]
    fn softmax_weights_are_a_monotone_distribution(
        mut d in prop::collection::vec(0.0f64..3.2, 1..16),
        lambda in 0.0f64..100.0,
    ) {
        d.sort_by(f64::total_cmp);
        let w = remap::softmax_weights(&d, lambda);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        for p in w.windows(2) {
            prop_assert!(p[0] >= p[1]);
        }
    }

    #[test]
    fn eer_depends_only_on_order(
        g in prop::collection::vec(0.0f64..3.0, 1..40),
        i in prop::collection::vec(0.0f64..3.0, 1..40),
    ) {
        let base = eval::compute_eer(&g, &i).unwrap();
        let f = |v: &[f64]| v.iter().map(|x| (2.0 * x).exp() + 1.0).collect::<Vec<_>>();
        let moved = eval::compute_eer(&f(&g), &f(&i)).unwrap();
        prop_assert!((base.rate - moved.rate).abs() < 1e-12);
        prop_assert!((0.0..=0.5).contains(&base.rate));
    }

    #[test]
    fn privatized_unit_outputs_stay_on_sphere(dim in 2usize..64, eps in 0.1f64..500.0, s in any::<u64>()) {
        let x = point(dim, s);
        for spec in [MechanismSpec::avatar_ldp(eps), MechanismSpec::uniform_baseline(), MechanismSpec::laplace_baseline(eps, true)] {
            let out = mechanisms::apply(&spec, &x, &mut RandomStream::new(s)).unwrap();
            prop_assert!((geometry::norm(&out.vector) - 1.0).abs() < 1e-12);
            prop_assert_eq!(out.source_dim, dim);
        }
    }
}
