use std::f64::consts::PI;

use super::*;
use crate::flow::{make_preset, Preset};
use crate::geometry::rescale;

const J11: f64 = 3.831_705_970_207_512;

fn sphere(n: usize) -> WarpedMetric {
    make_preset(&Preset::RoundSphere { radius: 1.0 }, n).unwrap()
}

fn cap(n: usize) -> WarpedMetric {
    make_preset(&Preset::EuclideanCap { radius: 1.0 }, n).unwrap()
}

#[test]
fn hemisphere_eigenvalue_is_four() {
    let e = lambda1_pole_ball(&sphere(200), PI / 2.0).unwrap();
    assert!((e.lambda1 - 4.0).abs() < 1e-3, "{}", e.lambda1);
    assert!(e.residual < 1e-6, "{}", e.residual);
}

#[test]
fn flat_ball_matches_bessel_root() {
    for r in [0.5, 1.0] {
        let e = lambda1_pole_ball(&cap(200), r).unwrap();
        let exact = J11 * J11 / (r * r);
        assert!((e.lambda1 / exact - 1.0).abs() < 1e-3, "r = {r}: {}", e.lambda1);
    }
}

#[test]
fn radial_solver_converges_at_second_order() {
    let errs: Vec<f64> = [100, 200, 400]
        .iter()
        .map(|&n| (lambda1_pole_ball(&sphere(n), PI / 2.0).unwrap().lambda1 - 4.0).abs())
        .collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{errs:?}");
    }
}

#[test]
fn error_estimate_brackets_true_error() {
    let e = lambda1_pole_ball(&sphere(100), PI / 2.0).unwrap();
    let est = e.error_estimate.unwrap();
    let err = (e.lambda1 - 4.0).abs();
    assert!(err <= 2.0 * est && err >= 0.5 * est, "err {err} est {est}");
}

#[test]
fn eigenvalue_decreases_with_radius() {
    let m = sphere(120);
    let l: Vec<f64> = [0.5, 1.0, 1.5, 2.0].iter().map(|&r| lambda1_pole_ball(&m, r).unwrap().lambda1).collect();
    assert!(l.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn pole_ball_rejects_whole_sphere() {
    assert!(lambda1_pole_ball(&sphere(50), PI).is_err());
    assert!(lambda1_pole_ball(&sphere(50), -1.0).is_err());
}

#[test]
fn quotient_solver_agrees_with_radial_solver() {
    let m = sphere(120);
    for r in [0.8, PI / 2.0] {
        let dom = QuotientDomain::ball(&m, QuotientPoint::on_axis(0.0), r, 64).unwrap();
        let q = lambda1_domain(&m, &dom).unwrap();
        let p = lambda1_pole_ball(&m, r).unwrap();
        assert!((q.lambda1 / p.lambda1 - 1.0).abs() < 0.02, "r = {r}: {} vs {}", q.lambda1, p.lambda1);
    }
}

#[test]
fn off_pole_ball_on_sphere_matches_pole_ball() {
    // every ball of the round sphere is congruent to a pole ball
    let m = sphere(160);
    let r = 0.7;
    let dom = QuotientDomain::ball(&m, QuotientPoint::on_axis(1.2), r, 96).unwrap();
    let q = lambda1_domain(&m, &dom).unwrap();
    let p = lambda1_pole_ball(&m, r).unwrap();
    assert!((q.lambda1 / p.lambda1 - 1.0).abs() < 0.03, "{} vs {}", q.lambda1, p.lambda1);
}

#[test]
fn disjoint_union_takes_smaller_eigenvalue() {
    let m = sphere(120);
    let a = QuotientDomain::ball(&m, QuotientPoint::on_axis(0.0), 0.6, 64).unwrap();
    let b = QuotientDomain::ball(&m, QuotientPoint::on_axis(PI), 0.9, 64).unwrap();
    let la = lambda1_domain(&m, &a).unwrap().lambda1;
    let lb = lambda1_domain(&m, &b).unwrap().lambda1;
    let lu = lambda1_domain(&m, &a.union(&b).unwrap()).unwrap().lambda1;
    assert!((lu / la.min(lb) - 1.0).abs() < 1e-6, "{lu} {la} {lb}");
}

#[test]
fn removing_one_cell_gives_small_decreasing_eigenvalue() {
    let l: Vec<f64> = [(40, 16), (80, 32), (160, 64)]
        .iter()
        .map(|&(n, bands)| {
            let m = sphere(n);
            let dom = QuotientDomain::without_node(n, bands + 1, n / 2, bands / 2);
            lambda1_domain(&m, &dom).unwrap().lambda1
        })
        .collect();
    assert!(l.windows(2).all(|w| w[1] < w[0]), "{l:?}");
    assert!(l[2] < 1.0, "{l:?}");
}

#[test]
fn flat_faber_krahn_value() {
    let m = cap(200);
    let region = BallSpec::new(QuotientPoint::on_axis(0.0), 1.0).unwrap();
    let fam = DomainFamily::ConcentricBalls { fractions: vec![0.25, 0.5, 0.75, 1.0] };
    let fk = faber_krahn(&m, &region, &fam).unwrap();
    let exact = (PI * PI / 2.0).sqrt() * J11 * J11;
    assert!((fk.value / exact - 1.0).abs() < 0.02, "{}", fk.value);
    for s in &fk.samples {
        assert!(fk.value <= s.3);
        assert!((s.3 / exact - 1.0).abs() < 0.02);
    }
}

#[test]
fn faber_krahn_is_scale_invariant() {
    let m = cap(100);
    let region = BallSpec::new(QuotientPoint::on_axis(0.0), 1.0).unwrap();
    let fam = DomainFamily::ConcentricBalls { fractions: vec![0.5, 1.0] };
    let a = faber_krahn(&m, &region, &fam).unwrap().value;
    let big = rescale(&m, 4.0).unwrap();
    let region2 = BallSpec::new(QuotientPoint::on_axis(0.0), 2.0).unwrap();
    let b = faber_krahn(&big, &region2, &fam).unwrap().value;
    assert!((a / b - 1.0).abs() < 1e-6, "{a} {b}");
}

#[test]
fn sphere_faber_krahn_positive_and_refinement_stable() {
    let region = BallSpec::new(QuotientPoint::on_axis(0.0), PI / 2.0).unwrap();
    let fam = DomainFamily::ConcentricBalls { fractions: vec![0.25, 0.5, 1.0] };
    let a = faber_krahn(&sphere(100), &region, &fam).unwrap().value;
    let b = faber_krahn(&sphere(200), &region, &fam).unwrap().value;
    assert!(a > 0.0);
    assert!((a / b - 1.0).abs() < 1e-3);
}

#[test]
fn empty_family_is_rejected() {
    let m = cap(50);
    let region = BallSpec::new(QuotientPoint::on_axis(0.0), 1.0).unwrap();
    assert!(faber_krahn(&m, &region, &DomainFamily::Balls(vec![])).is_err());
}

#[test]
fn flat_sobolev_holds_with_euclidean_constant() {
    // sharp Euclidean constant in dimension four is √6 / (8π) ≈ 0.0975
    let m = cap(200);
    let fam = BumpFamily { centers: vec![0.0, 0.3], widths: vec![0.2, 0.4, 0.6], amplitude: 1.0 };
    let rep = sobolev_audit(&m, &SobolevConstants::new(0.1, 1.0).unwrap(), &fam).unwrap();
    assert!(rep.passed, "{rep:?}");
    assert_eq!(rep.params["violations"], 0.0);
}

#[test]
fn zero_bump_is_not_a_violation() {
    let m = sphere(80);
    let fam = BumpFamily { centers: vec![0.5], widths: vec![0.5], amplitude: 0.0 };
    let rep = sobolev_audit(&m, &SobolevConstants::new(1.0, 1.0).unwrap(), &fam).unwrap();
    assert_eq!(rep.lhs, 0.0);
    assert_eq!(rep.rhs, 0.0);
    assert!(rep.passed);
}

#[test]
fn tiny_sobolev_constant_is_violated_on_sphere() {
    let m = sphere(120);
    let fam = BumpFamily { centers: vec![0.0], widths: vec![1.0], amplitude: 1.0 };
    let rep = sobolev_audit(&m, &SobolevConstants::new(1e-9, 1.0).unwrap(), &fam).unwrap();
    assert!(!rep.passed);
    assert!(rep.lhs - rep.rhs > 0.0);
}

#[test]
fn sobolev_constants_are_validated() {
    assert!(SobolevConstants::new(0.0, 1.0).is_err());
    assert!(SobolevConstants::new(1.0, 0.5).is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn sobolev_verdict_ignores_amplitude(scale in 0.01f64..100.0, a in 0.001f64..0.2) {
            let m = sphere(60);
            let c = SobolevConstants::new(a, 1.0).unwrap();
            let f1 = BumpFamily { centers: vec![0.0, 1.0], widths: vec![0.5, 1.0], amplitude: 1.0 };
            let f2 = BumpFamily { amplitude: scale, ..f1.clone() };
            let r1 = sobolev_audit(&m, &c, &f1).unwrap();
            let r2 = sobolev_audit(&m, &c, &f2).unwrap();
            prop_assert_eq!(r1.passed, r2.passed);
            prop_assert_eq!(r1.params["violations"], r2.params["violations"]);
        }
    }
}
