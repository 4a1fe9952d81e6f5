use std::f64::consts::PI;
use std::sync::OnceLock;

use super::*;
use crate::flow::{evolve, make_preset, FlowController, Preset, StopReason, Trajectory};
use crate::geometry::WarpedMetric;

fn sphere(radius: f64, nodes: usize) -> WarpedMetric {
    make_preset(&Preset::RoundSphere { radius }, nodes).unwrap()
}

fn dumbbell(necks: usize) -> Trajectory {
    let m = make_preset(&Preset::Dumbbell { rho_b: 1.0, rho_n: 0.15, necks, width: 0.35 }, 201).unwrap();
    let ctl = FlowController { checkpoint_stride: 5e-4, ..FlowController::default() };
    evolve(&m, &ctl).unwrap()
}

fn one_neck() -> &'static Trajectory {
    static T: OnceLock<Trajectory> = OnceLock::new();
    T.get_or_init(|| dumbbell(1))
}

fn two_necks() -> &'static Trajectory {
    static T: OnceLock<Trajectory> = OnceLock::new();
    T.get_or_init(|| dumbbell(2))
}

/// Unit sphere with `T = 1`, checkpoints at `1 − 8^{−j}`.
fn static_sphere(levels: i32) -> Trajectory {
    let m = sphere(1.0, 201);
    let times: Vec<f64> = (0..=levels).map(|j| 1.0 - 8f64.powi(-j)).collect();
    Trajectory::stationary(&m, &times).unwrap().with_singular_time(1.0)
}

fn shrinking_sphere(count: usize) -> Trajectory {
    let cps = (0..count)
        .map(|k| {
            let t = 0.16 * k as f64 / (count - 1) as f64;
            sphere((1.0 - 6.0 * t).sqrt(), 201).with_time(t)
        })
        .collect();
    Trajectory::from_checkpoints(cps).unwrap().with_singular_time(1.0 / 6.0)
}

/// `Vol B(r)` on the unit round `S⁴`.
fn unit_ball_volume(r: f64) -> f64 {
    2.0 * PI * PI * (2.0 / 3.0 - r.cos() + r.cos().powi(3) / 3.0)
}

/// Checkpoint whose schedule level is 1: `T − t` just below `τ₀/8`.
fn level_one_time(traj: &Trajectory) -> f64 {
    let t_sing = traj.singular_time().unwrap();
    let tau0 = t_sing - traj.first_time();
    *traj.times.iter().find(|&&t| t_sing - t <= tau0 / 8.0).unwrap()
}

#[test]
fn schedule_levels() {
    let p = ClassificationParams::default();
    assert_eq!(p.level(1.0, 1.0, 0.0), 0);
    assert_eq!(p.level(1.0, 1.0, 1.0 - 0.2), 0);
    assert_eq!(p.level(1.0, 1.0, 1.0 - 0.1), 1);
    assert_eq!(p.level(1.0, 1.0, 1.0 - 0.01), 2);
    assert_eq!(p.k_i(3), 8.0);
    assert_eq!(p.eps_i(2), 0.25);
    assert_eq!(p.n_i(1), 16.0);
    assert!(ClassificationParams { growth: 1.0, ..p }.validate().is_err());
    assert!(ClassificationParams { eps0: 0.0, ..p }.validate().is_err());
}

#[test]
fn static_good_times_match_closed_form() {
    let traj = static_sphere(10);
    let p = ClassificationParams::default();
    let got = good_times(&traj, QuotientPoint::on_axis(0.0), &p).unwrap();
    assert!(!got.is_empty());
    let q = 2.0 + p.alpha.powi(3);
    let expected: Vec<f64> = traj
        .times
        .iter()
        .copied()
        .filter(|&t| {
            let i = p.level(1.0, 1.0, t);
            let v = 6f64.powf(q) * unit_ball_volume(p.k_i(i) * (1.0 - t).sqrt());
            v <= p.eps_i(i)
        })
        .collect();
    assert_eq!(got, expected);
    assert_eq!(*got.last().unwrap(), traj.last_time());
}

#[test]
fn shrinking_sphere_has_no_good_times() {
    let traj = shrinking_sphere(17);
    let p = ClassificationParams::default();
    for s in [0.0, 1.0, PI] {
        assert!(good_times(&traj, QuotientPoint::on_axis(s), &p).unwrap().is_empty());
    }
}

#[test]
fn missing_singular_time_or_checkpoints_is_an_error() {
    let m = sphere(1.0, 101);
    let traj = Trajectory::stationary(&m, &[0.0, 0.5]).unwrap();
    let p = ClassificationParams::default();
    let x = QuotientPoint::on_axis(0.0);
    assert_eq!(good_times(&traj, x, &p), Err(Error::NeedsSingularTime));
    assert_eq!(classify_point(&traj, x, &p).unwrap_err(), Error::NeedsSingularTime);
    let empty = Trajectory {
        checkpoints: vec![],
        times: vec![],
        singular_time_estimate: Some(1.0),
        stop_reason: StopReason::Static,
        steps: 0,
        controller: None,
    };
    assert!(matches!(good_times(&empty, x, &p), Err(Error::Parameter(_))));
    let late = traj.with_singular_time(0.0);
    assert!(matches!(good_times(&late, x, &p), Err(Error::Precondition(_))));
}

#[test]
fn static_points_are_regular() {
    let traj = static_sphere(6);
    let p = ClassificationParams { k_start: 0.1, ..Default::default() };
    for x in [QuotientPoint::on_axis(0.0), QuotientPoint::on_axis(PI / 2.0), QuotientPoint::new(1.0, 2.0)] {
        let v = classify_point(&traj, x, &p).unwrap();
        assert_eq!(v.verdict, Verdict::Regular, "{x:?}");
        assert!(v.witness_times.iter().all(|t| v.integrals.iter().any(|s| s.t == *t && s.good && s.rm2 <= p.eps0)));
    }
}

#[test]
fn neck_is_singular_and_bulb_poles_are_regular() {
    let traj = one_neck();
    let p = ClassificationParams::default();
    let m0 = &traj.checkpoints[0];
    let neck = m0.arclength()[traj.last().neck_index().unwrap()];
    let v = classify_point(traj, QuotientPoint::on_axis(neck), &p).unwrap();
    assert_eq!(v.verdict, Verdict::Singular);
    assert!(v.integrals.iter().filter(|s| s.resolved).all(|s| s.rm2 > p.eps0));
    for s in [0.0, m0.axis_length()] {
        let v = classify_point(traj, QuotientPoint::on_axis(s), &p).unwrap();
        assert_eq!(v.verdict, Verdict::Regular, "pole at {s}");
    }
}

#[test]
fn verdicts_are_monotone_in_eps0() {
    let traj = one_neck();
    let m0 = &traj.checkpoints[0];
    let len = m0.axis_length();
    let rank = |v: Verdict| match v {
        Verdict::Singular => 0,
        Verdict::Undetermined => 1,
        Verdict::Regular => 2,
    };
    for s in [0.0, 0.3 * len, 0.45 * len, 0.5 * len] {
        let mut last = None;
        for eps0 in [0.01, 0.3, 1.0, 30.0, 1e4] {
            let p = ClassificationParams { eps0, ..Default::default() };
            let v = classify_point(traj, QuotientPoint::on_axis(s), &p).unwrap().verdict;
            if last == Some(Verdict::Regular) {
                assert_eq!(v, Verdict::Regular, "s = {s}, eps0 = {eps0}");
            }
            if let Some(prev) = last {
                assert!(!(prev == Verdict::Regular && rank(v) < rank(prev)));
            }
            last = Some(v);
        }
    }
}

#[test]
fn one_neck_gives_one_centre_at_the_waist() {
    let traj = one_neck();
    let p = ClassificationParams::default();
    let t_i = level_one_time(traj);
    let centres = cluster_singular(traj, t_i, &p).unwrap();
    assert_eq!(centres.len(), 1);
    let m = traj.metric_at(t_i).unwrap();
    let row = m.arclength().iter().position(|&s| s == centres[0].s).unwrap();
    let waist = m.neck_index().unwrap();
    assert!(row.abs_diff(waist) <= 2, "row {row}, waist {waist}");
    let r = cluster_report(traj, t_i, centres[0], &p).unwrap();
    assert!(r.passed);
}

#[test]
fn two_necks_give_two_separated_centres() {
    let traj = two_necks();
    let p = ClassificationParams::default();
    let t_i = level_one_time(traj);
    let centres = cluster_singular(traj, t_i, &p).unwrap();
    assert_eq!(centres.len(), 2);
    let m = traj.metric_at(t_i).unwrap();
    let sep = cluster_separation(traj, t_i, &p).unwrap();
    assert!(distance(&m, centres[0], centres[1]).unwrap() >= sep);
    // one centre per half
    let half = m.axis_length() / 2.0;
    assert!((centres[0].s < half) != (centres[1].s < half));
}

#[test]
fn static_trajectory_has_no_clusters() {
    // at scale 1 the sphere's own curvature already carries 24 Vol B(1) > eps0
    let traj = static_sphere(4);
    let p = ClassificationParams::default();
    assert_eq!(cluster_singular(&traj, 0.0, &p).unwrap().len(), 1);
    for &t in traj.times.iter().filter(|&&t| 1.0 - t <= 1.0 / 64.0) {
        assert!(cluster_singular(&traj, t, &p).unwrap().is_empty());
    }
    assert!(cluster_singular(&traj, 0.5, &p).is_err());
}

#[test]
fn cluster_centres_classify_singular() {
    let traj = one_neck();
    let p = ClassificationParams::default();
    let t_i = level_one_time(traj);
    let k = traj.nearest_index(t_i);
    for c in cluster_singular(traj, t_i, &p).unwrap() {
        let c0 = transport_point(traj, c, k, 0).unwrap();
        let s0 = traj.checkpoints[0].arclength();
        let row = crate::numerics::locate(s0, c0.s);
        let verdicts: Vec<Verdict> = (row.saturating_sub(1)..=(row + 2).min(s0.len() - 1))
            .map(|i| classify_point(traj, QuotientPoint::on_axis(s0[i]), &p).unwrap().verdict)
            .collect();
        assert!(verdicts.contains(&Verdict::Singular), "{verdicts:?}");
    }
}

#[test]
fn classification_is_deterministic() {
    let traj = one_neck();
    let p = ClassificationParams::default();
    let t_i = level_one_time(traj);
    assert_eq!(cluster_singular(traj, t_i, &p).unwrap(), cluster_singular(traj, t_i, &p).unwrap());
    let x = QuotientPoint::on_axis(1.0);
    let a = classify_point(traj, x, &p).unwrap();
    assert_eq!(a, classify_point(traj, x, &p).unwrap());
    let back: PointVerdict = serde_json::from_str(&a.to_json_line()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn transport_follows_grid_coordinate() {
    let traj = shrinking_sphere(5);
    let k = traj.len() - 1;
    let scale = (1.0 - 6.0 * traj.times[k]).sqrt();
    let p = transport_point(&traj, QuotientPoint::new(1.0, 0.5), 0, k).unwrap();
    assert!((p.s - scale).abs() < 1e-9);
    assert_eq!(p.alpha, 0.5);
    let back = transport_point(&traj, p, k, 0).unwrap();
    assert!((back.s - 1.0).abs() < 1e-9);
}

#[test]
fn ct_decay_is_zero_on_flat_space() {
    let m = make_preset(&Preset::EuclideanCap { radius: 1.0 }, 101).unwrap();
    let traj = Trajectory::stationary(&m, &[0.0, 0.5, 1.0]).unwrap();
    let r = ct_decay_audit(&traj, &BallSpec::new(QuotientPoint::on_axis(0.0), 0.5).unwrap(), (0.0, 1.0), 1.0).unwrap();
    assert!(r.lhs.abs() < 1e-9, "{}", r.lhs);
    assert!(r.passed);
}

#[test]
fn ct_decay_matches_shrinking_sphere() {
    let traj = shrinking_sphere(17);
    let (ta, tb) = (traj.times[4], traj.times[14]);
    for s in [0.0, 1.2, PI] {
        let b = BallSpec::new(QuotientPoint::on_axis(s), 0.3).unwrap();
        let r = ct_decay_audit(&traj, &b, (ta, tb), 1.0).unwrap();
        let exact = (tb - ta) * 24f64.sqrt() / (1.0 - 6.0 * tb);
        assert!((r.lhs / exact - 1.0).abs() < 0.01, "{} vs {exact}", r.lhs);
        assert_eq!(r.passed, exact <= 1.0);
    }
    let b = BallSpec::new(QuotientPoint::on_axis(0.0), 0.3).unwrap();
    assert!(matches!(ct_decay_audit(&traj, &b, (0.0, 0.2), 1.0), Err(Error::Coverage { .. })));
    let far = BallSpec::new(QuotientPoint::on_axis(10.0), 0.3).unwrap();
    assert!(matches!(ct_decay_audit(&traj, &far, (ta, tb), 1.0), Err(Error::Domain(_))));
}

#[test]
fn ct_decay_neck_exceeds_bulb() {
    let traj = one_neck();
    let m0 = &traj.checkpoints[0];
    let neck = m0.arclength()[traj.last().neck_index().unwrap()];
    let w = (traj.first_time(), traj.last_time());
    let at = |s: f64| ct_decay_audit(traj, &BallSpec::new(QuotientPoint::on_axis(s), 0.1).unwrap(), w, 1.0).unwrap();
    let (n, b) = (at(neck), at(0.0));
    assert!(n.lhs > b.lhs);
    assert!(b.passed);
    assert!(!n.passed);
}
