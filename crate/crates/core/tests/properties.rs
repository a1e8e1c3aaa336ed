use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use vertex_sew::correlator::{reconstruct_rational, RationalCorrelator};
use vertex_sew::quadrature::{contour_integral_scalar, Circle, QuadratureRule};
use vertex_sew::seminorm::CompactExhaustion;
use vertex_sew::sewing::Disk;
use vertex_sew::tail::TailReport;
use vertex_sew::vertex::Algebra;
use vertex_sew::{partitions_of, scale_l0, DualVector, GradedVector, Partition, ScaleFactor, TruncationPolicy, C64};

type Q = BigRational;

fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

fn state(level: u32, pick: usize) -> GradedVector<Q> {
    let parts = partitions_of(level);
    GradedVector::basis(parts[pick % parts.len()].clone(), vertex_sew::Sector::Vacuum)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scaling_is_multiplicative(a in 1i64..9, b in 1i64..9, c in 1i64..9, d in 1i64..9, level in 0u32..6, pick in 0usize..20) {
        let v = state(level, pick);
        let r = ScaleFactor::rational(a, b + a);
        let s = ScaleFactor::rational(c, d + c);
        let rs = ScaleFactor::Exact(q(a * c, (b + a) * (d + c)));
        let twice = scale_l0(&s, &scale_l0(&r, &v).unwrap()).unwrap();
        prop_assert_eq!(twice, scale_l0(&rs, &v).unwrap());
    }

    #[test]
    fn correlators_are_local(l1 in 1u32..3, l2 in 1u32..3, l3 in 0u32..3, p1 in 0usize..4, p2 in 0usize..4, p3 in 0usize..4) {
        let alg = Algebra::heisenberg();
        let u1 = state(l1, p1);
        let u2 = state(l2, p2);
        let v = state(l3, p3);
        let vp = DualVector::from_vector(state(l1 + l2 + l3, p1 + p2));
        let f = reconstruct_rational(&alg, &vp, &[u1.clone(), u2.clone()], &v).unwrap();
        let g = reconstruct_rational(&alg, &vp, &[u2, u1], &v).unwrap();
        prop_assert_eq!(f, g.relabel(&[1, 0]));
    }

    #[test]
    fn rational_json_round_trip(n in -5i64..6, d in 1i64..7, b in 0u32..4, a in 0u32..3) {
        let f = RationalCorrelator::diagonal(2, 0, 1, b)
            .scale(&q(n, d))
            .add(&RationalCorrelator::pole_at_zero(2, 1, a, q(d, 3)));
        let back = RationalCorrelator::from_json_str(&f.to_json_string()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn quadrature_extracts_laurent_coefficients(c in proptest::collection::vec(-3.0f64..3.0, 7), m in -3i64..3, r in 0.2f64..1.5) {
        // f(w) = sum_j c_j w^{j-3}; the w^m extraction picks c_j with j - 3 = -m - 1
        let (v, res) = contour_integral_scalar(&[Circle { m, radius: r }], &QuadratureRule::default(), |w| {
            Ok(c.iter().enumerate().map(|(j, x)| w[0].powi(j as i32 - 3) * *x).sum())
        }).unwrap();
        prop_assert!(res.converged);
        let j = (2 - m) as usize;
        prop_assert!((v - C64::new(c[j], 0.0)).norm() < 1e-12);
    }

    #[test]
    fn geometric_increments_fit_their_ratio(rho in 0.05f64..0.9, c in 0.1f64..10.0, len in 10usize..40) {
        let inc: Vec<C64> = (0..len).map(|n| C64::new(c * rho.powi(n as i32), 0.0)).collect();
        let r = TailReport::from_increments(&inc, &TruncationPolicy::default());
        prop_assert!((r.fitted_ratio - rho).abs() < 1e-9);
        prop_assert!(r.bound_estimate > 0.0);
        if r.accepted {
            prop_assert!(r.fitted_ratio < 1.0);
        }
    }

    #[test]
    fn disk_validation_is_the_conjunction(x in -0.99f64..0.99, y in -0.99f64..0.99, r1 in 0.001f64..0.6, r2 in 0.001f64..0.9) {
        let d = Disk::new(C64::new(x, y), r1, r2);
        let v = d.validity();
        prop_assert_eq!(d.validate().is_ok(), v.inequalities && v.geometric);
    }

    #[test]
    fn seminorm_is_subadditive(n in 1u32..5, b1 in 1u32..3, a2 in 1u32..3) {
        let f = RationalCorrelator::diagonal(2, 0, 1, b1);
        let g = RationalCorrelator::pole_at_zero(2, 0, a2, q(-2, 1));
        let h = f.add(&g);
        for z in CompactExhaustion::new(n, 2).samples() {
            prop_assert!(h.eval(&z).norm() <= f.eval(&z).norm() + g.eval(&z).norm() + 1e-12);
        }
    }
}

#[test]
fn partition_counts() {
    let counts: Vec<usize> = (0..10).map(|n| partitions_of(n).len()).collect();
    assert_eq!(counts, [1, 1, 2, 3, 5, 7, 11, 15, 22, 30]);
    assert_eq!(Partition::new(vec![1, 3, 2]).unwrap().parts(), &[3, 2, 1]);
}
