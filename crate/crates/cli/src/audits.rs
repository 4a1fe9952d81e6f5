//! The audit catalogue and its dispatcher.

use std::collections::BTreeMap;

use serde_json::json;

use ricci_lab::estimates::{self, Direction, EstimateReport, NonInflateConstants, SpaceTimeWindow};
use ricci_lab::flow::{fit_blowup_exponent, monitor_hypotheses, Trajectory};
use ricci_lab::geometry::{curvature, riemann_l2, total_volume, BallSpec, QuotientPoint, WarpedMetric};
use ricci_lab::heat::{self, MoserParams};
use ricci_lab::singular::{self, ClassificationParams, PointVerdict};
use ricci_lab::spectral::{self, BumpFamily, QuotientDomain, QuotientOperator, SobolevConstants};
use ricci_lab::ConstantSet;

use crate::config::{number_list, AuditSpec, Entry};
use crate::error::CliError;

pub struct AuditInfo {
    pub name: &'static str,
    pub summary: &'static str,
    /// `(parameter, default)`.
    pub params: &'static [(&'static str, &'static str)],
}

const POINT_HELP: &str = "points are arclengths or one of pole, far, mid, neck";

pub const CATALOGUE: &[AuditInfo] = &[
    AuditInfo {
        name: "noncollapse",
        summary: "Vol B(x,r) against the Sobolev non-collapsing bound (constants A, B, L, sigma)",
        params: &[("t", "first"), ("centers", "pole"), ("radii", "0.05,0.1,0.2")],
    },
    AuditInfo {
        name: "noninflate",
        summary: "Vol B(x,r)/r^n between sigma0 and sigma1 for r < sqrt(t); form=bound checks the explicit bound at t",
        params: &[
            ("form", "ratio"),
            ("centers", "pole"),
            ("radii", "0.05,0.1"),
            ("proportional", "false"),
            ("t", "last"),
        ],
    },
    AuditInfo {
        name: "spacetime-ricci",
        summary: "space-time integral of |Ric|^(2+alpha^3) on the window [S, V] against c2_hat",
        params: &[("center", "pole"), ("y", "1"), ("v", "last"), ("s", "auto"), ("ladder", "none")],
    },
    AuditInfo {
        name: "ricci4-window",
        summary: "int |Ric|^4 over B(p,r) x [V-2s, V-s] against c1_hat",
        params: &[("center", "pole"), ("r", "0.5"), ("v", "last"), ("s", "auto")],
    },
    AuditInfo {
        name: "moser",
        summary: "Moser sup bound for a solution of the heat equation with reaction ell/t",
        params: &[
            ("center", "pole"),
            ("r", "0.5"),
            ("p", "4"),
            ("t", "auto"),
            ("t_start", "t/4"),
            ("ell", "constants.ell"),
            ("initial", "constant"),
            ("width", "0.5"),
            ("bands", "32"),
        ],
    },
    AuditInfo {
        name: "ricci-moser",
        summary: "Moser sup bound for sqrt(|Ric|^2 + eps) sampled along the flow",
        params: &[("center", "pole"), ("r", "0.5"), ("p", "4"), ("t", "auto"), ("eps", "1e-8"), ("bands", "32")],
    },
    AuditInfo {
        name: "kernel-bounds",
        summary: "conjugate heat kernel mass and Gaussian lower bound",
        params: &[("center", "pole"), ("t", "last"), ("l", "auto"), ("bands", "32")],
    },
    AuditInfo {
        name: "volume-comparison",
        summary: "integrated volume comparison over a radius ladder",
        params: &[("t", "first"), ("center", "pole"), ("p", "3"), ("radii", "0.2,0.4,0.8,1.2")],
    },
    AuditInfo {
        name: "annulus",
        summary: "components of an annulus, checked against a doubled angular resolution",
        params: &[("t", "first"), ("center", "pole"), ("r_in", "0.5"), ("r_out", "1.0"), ("expected", "none")],
    },
    AuditInfo {
        name: "cluster",
        summary: "greedy cluster centres of singular points at a checkpoint",
        params: &[("t", "auto"), ("k_start", "1"), ("n_start", "8"), ("growth", "2"), ("r_big", "1")],
    },
    AuditInfo {
        name: "classify",
        summary: "regular/singular verdicts for material points",
        params: &[("points", "pole,neck,far"), ("k_start", "1"), ("n_start", "8"), ("growth", "2"), ("r_big", "1")],
    },
    AuditInfo {
        name: "ct-decay",
        summary: "sup (t - t_a)|Rm| over a material region against c0",
        params: &[("center", "pole"), ("radius", "0.1"), ("from", "first"), ("to", "last")],
    },
    AuditInfo { name: "hypothesis", summary: "R >= -1 and int |R|^(n/2+sigma) <= L along the run", params: &[] },
    AuditInfo {
        name: "sobolev",
        summary: "Sobolev inequality with constants A, B on a family of bumps",
        params: &[("t", "first"), ("centers", "mid"), ("widths", "0.3,0.6"), ("amplitude", "1")],
    },
    AuditInfo {
        name: "riemann-l2",
        summary: "relative drift of int |Rm|^2 from the first checkpoint",
        params: &[("tolerance", "0.005")],
    },
    AuditInfo {
        name: "sphere-regression",
        summary: "round-sphere run against g(t) = (1 - 6t/rho^2) g0 and T = rho^2/6",
        params: &[("radius", "1"), ("t_max", "0.15"), ("tolerance", "1e-4"), ("t_tolerance", "0.005")],
    },
];

pub fn find(name: &str) -> Option<&'static AuditInfo> {
    CATALOGUE.iter().find(|a| a.name == name)
}

pub fn describe() -> String {
    let mut out = String::from("# ricci-lab audits v1\n");
    for a in CATALOGUE {
        out.push_str(&format!("{}\t{}\n", a.name, a.summary));
        for (p, d) in a.params {
            out.push_str(&format!("  {p}\tdefault {d}\n"));
        }
    }
    out.push_str(&format!("# {POINT_HELP}\n"));
    out
}

/// Everything one audit produces.
#[derive(Debug, Default)]
pub struct AuditOutput {
    pub reports: Vec<EstimateReport>,
    pub records: Vec<serde_json::Value>,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

struct Params<'a> {
    spec: &'a AuditSpec,
    traj: &'a Trajectory,
}

impl<'a> Params<'a> {
    fn entry(&self, key: &str) -> Option<&'a Entry> {
        self.spec.params.get(key)
    }

    fn err(&self, key: &str, message: String) -> CliError {
        CliError::Config { line: self.entry(key).map_or(self.spec.line, |e| e.line), message }
    }

    fn num(&self, key: &str, default: f64) -> Result<f64, CliError> {
        self.opt(key).map(|v| v.unwrap_or(default))
    }

    fn opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "first" => Ok(Some(self.traj.first_time())),
                "last" => Ok(Some(self.traj.last_time())),
                v => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| self.err(key, format!("`{key}` expects a number, found `{v}`"))),
            },
        }
    }

    fn list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>, CliError> {
        match self.entry(key) {
            None => Ok(default.to_vec()),
            Some(e) => number_list(e, key),
        }
    }

    fn word(&self, key: &str, default: &'a str) -> &'a str {
        self.entry(key).map_or(default, |e| e.value.as_str())
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.word(key, "false") {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(self.err(key, format!("`{key}` expects true or false, found `{v}`"))),
        }
    }

    fn points(&self, key: &str, default: &str, m: &WarpedMetric) -> Result<Vec<QuotientPoint>, CliError> {
        self.word(key, default)
            .split(',')
            .map(|v| v.trim())
            .filter(|v| !v.is_empty())
            .map(|v| {
                let len = m.axis_length();
                let s = match v {
                    "pole" => 0.0,
                    "far" => len,
                    "mid" => len / 2.0,
                    "neck" => m
                        .neck_index()
                        .map(|i| m.arclength()[i])
                        .ok_or_else(|| self.err(key, "the metric has no neck".into()))?,
                    v => v.parse::<f64>().map_err(|_| self.err(key, format!("bad point `{v}`; {POINT_HELP}")))?,
                };
                Ok(QuotientPoint::on_axis(s))
            })
            .collect()
    }

    fn point(&self, key: &str, default: &str, m: &WarpedMetric) -> Result<QuotientPoint, CliError> {
        let ps = self.points(key, default, m)?;
        match ps.as_slice() {
            [p] => Ok(*p),
            _ => Err(self.err(key, format!("`{key}` expects a single point"))),
        }
    }

    fn bands(&self) -> Result<usize, CliError> {
        let b = self.num("bands", 32.0)?;
        if !(b >= 4.0 && b.fract() == 0.0) {
            return Err(self.err("bands", format!("bands must be an integer >= 4, found {b}")));
        }
        Ok(b as usize)
    }

    fn classification(&self, c: &ConstantSet) -> Result<ClassificationParams, CliError> {
        let d = ClassificationParams::from_constants(c);
        Ok(ClassificationParams {
            k_start: self.num("k_start", d.k_start)?,
            n_start: self.num("n_start", d.n_start)?,
            growth: self.num("growth", d.growth)?,
            r_big: self.num("r_big", d.r_big)?,
            ..d
        })
    }
}

/// Runs one audit. Core errors come back tagged with the audit label.
pub fn run(spec: &AuditSpec, traj: &Trajectory, c: &ConstantSet) -> Result<AuditOutput, CliError> {
    let p = Params { spec, traj };
    let tag = |e: ricci_lab::Error| CliError::Audit { label: spec.label.clone(), source: e };
    let mut out = AuditOutput::default();
    match spec.kind.as_str() {
        "noncollapse" => {
            let m = traj.metric_at(p.num("t", traj.first_time())?).map_err(tag)?;
            let centers = p.points("centers", "pole", &m)?;
            let radii = p.list("radii", &[0.05, 0.1, 0.2])?;
            let sc = SobolevConstants::new(c.a, c.b).map_err(tag)?;
            out.reports = estimates::noncollapse_audit(&m, &sc, c.l, c.sigma, &centers, &radii).map_err(tag)?;
        }
        "noninflate" => {
            let radii = p.list("radii", &[0.05, 0.1])?;
            match p.word("form", "ratio") {
                "ratio" => {
                    let centers = p.points("centers", "pole", &traj.checkpoints[0])?;
                    out.reports = estimates::noninflate_audit(
                        traj,
                        &centers,
                        &radii,
                        c.sigma0,
                        c.sigma1,
                        p.flag("proportional")?,
                    )
                    .map_err(tag)?;
                }
                "bound" => {
                    let t0 = p.num("t", traj.last_time())?;
                    let m = traj.metric_at(t0).map_err(tag)?;
                    let centers = p.points("centers", "pole", &m)?;
                    out.reports =
                        estimates::noninflate_bound_audit(&m, &NonInflateConstants::from(c), t0, &centers, &radii)
                            .map_err(tag)?;
                }
                v => return Err(p.err("form", format!("form must be ratio or bound, found `{v}`"))),
            }
        }
        "spacetime-ricci" => {
            let v = p.num("v", traj.last_time())?;
            let y = p.num("y", 1.0)?;
            let span = (v - traj.first_time()) / 2.0;
            let s = p.num("s", v - span.min(1.0 / (y * y)))?;
            let m = traj.metric_at(v).map_err(tag)?;
            let center = p.point("center", "pole", &m)?;
            let ladder = p.list("ladder", &[])?;
            let w = SpaceTimeWindow::new(center, y, s, v, c.alpha, c.c2_hat)
                .and_then(|w| w.with_ladder(ladder))
                .map_err(tag)?;
            out.reports.push(estimates::spacetime_ricci_audit(traj, &w).map_err(tag)?);
        }
        "ricci4-window" => {
            let v = p.num("v", traj.last_time())?;
            let s = p.num("s", (v - traj.first_time()) / 4.0)?;
            let m = traj.metric_at(v).map_err(tag)?;
            let center = p.point("center", "pole", &m)?;
            let r = p.num("r", 0.5)?;
            out.reports.push(estimates::ricci4_window_audit(traj, center, r, v, s, c.alpha, c.c1_hat).map_err(tag)?);
        }
        "moser" | "ricci-moser" => {
            let r = p.num("r", 0.5)?;
            let pw = p.num("p", 4.0)?;
            let mp = MoserParams::from_constants(c, traj.last().dim(), pw, r);
            let t_hat = heat::moser_constants(&mp).map_err(tag)?.t_hat;
            let t = p.num("t", (0.5 * t_hat).min(traj.last_time()))?;
            let m = traj.metric_at(t).map_err(tag)?;
            let x = p.point("center", "pole", &m)?;
            let bands = p.bands()?;
            let h = if spec.kind == "moser" {
                let t_start = p.num("t_start", t / 4.0)?;
                let ell = p.num("ell", c.ell)?;
                let m0 = traj.metric_at(t_start).map_err(tag)?;
                let op = QuotientOperator::new(&m0, bands);
                let dom = QuotientDomain::whole(op.rows(), op.cols());
                let width = p.num("width", 0.5)?;
                let f0 = match p.word("initial", "constant") {
                    "constant" => vec![1.0; op.len()],
                    "bump" => {
                        let d = ricci_lab::geometry::DistanceField::compute(&m0, x, bands).map_err(tag)?;
                        (0..op.len())
                            .map(|k| {
                                let u = d.node(k / op.cols(), k % op.cols()) / width;
                                if u < 1.0 {
                                    (1.0 - u * u).powi(2)
                                } else {
                                    0.0
                                }
                            })
                            .collect()
                    }
                    v => return Err(p.err("initial", format!("initial must be constant or bump, found `{v}`"))),
                };
                heat::solve_heat(traj, &dom, &f0, ell, t_start).map_err(tag)?
            } else {
                let eps = p.num("eps", heat::RICCI_MOSER_EPS)?;
                heat::ricci_moser_field(traj, bands, eps, t / 2.0, t).map_err(tag)?
            };
            // the Ricci field carries its own measured reaction bound
            let mp = if spec.kind == "ricci-moser" { MoserParams { ell: mp.ell.max(h.ell), ..mp } } else { mp };
            let mut rep = heat::moser_audit(&h, traj, x, r, pw, t, &mp).map_err(tag)?;
            if spec.kind == "ricci-moser" {
                rep.name = "ricci_moser".into();
            }
            out.reports.push(rep);
        }
        "kernel-bounds" => {
            let k = traj.nearest_index(p.num("t", traj.last_time())?);
            let t = traj.times[k];
            let ls = p.list("l", &[t - 0.5 * (t - traj.first_time())])?;
            let l_min = ls.iter().copied().fold(f64::INFINITY, f64::min);
            let m = &traj.checkpoints[k];
            let x = p.point("center", "pole", m)?;
            let g = heat::solve_conjugate_heat(traj, x, t, l_min, p.bands()?).map_err(tag)?;
            let kc = NonInflateConstants::from(c);
            let mut mass = Vec::new();
            for &l in &ls {
                let [a, b] = heat::kernel_bounds_audit(&g, traj, &kc, x, t, l).map_err(tag)?;
                mass.push((t - l, a.lhs));
                out.reports.push(a);
                out.reports.push(b);
            }
            out.series.push(("mass".into(), mass));
        }
        "volume-comparison" => {
            let m = traj.metric_at(p.num("t", traj.first_time())?).map_err(tag)?;
            let center = p.point("center", "pole", &m)?;
            let radii = p.list("radii", &[0.2, 0.4, 0.8, 1.2])?;
            out.reports = estimates::volume_comparison_audit(&m, center, p.num("p", 3.0)?, &radii).map_err(tag)?;
        }
        "annulus" => {
            let m = traj.metric_at(p.num("t", traj.first_time())?).map_err(tag)?;
            let center = p.point("center", "pole", &m)?;
            let (r_in, r_out) = (p.num("r_in", 0.5)?, p.num("r_out", 1.0)?);
            let got = estimates::annulus_components(&m, center, r_in, r_out).map_err(tag)?;
            let oracle =
                estimates::annulus_components_with(&m, center, r_in, r_out, 2 * ricci_lab::geometry::DEFAULT_BANDS)
                    .map_err(tag)?;
            let expected = p.opt("expected")?.unwrap_or(oracle.components as f64);
            let diff =
                (got.components as f64 - expected).abs().max((got.components as f64 - oracle.components as f64).abs());
            out.reports.push(
                EstimateReport::upper("annulus_components", "#components(A(x, r_in, r_out)) = oracle", diff, 0.0)
                    .at(center, r_out)
                    .at_time(m.time())
                    .param("components", got.components as f64)
                    .param("oracle", oracle.components as f64)
                    .param("expected", expected)
                    .param("r_in", r_in)
                    .param("empty", if got.empty { 1.0 } else { 0.0 }),
            );
        }
        "cluster" => {
            let cp = p.classification(c)?;
            let t_sing = traj.singular_time().map_err(tag)?;
            let tau0 = t_sing - traj.first_time();
            let auto = traj.times.iter().copied().find(|&t| t_sing - t <= tau0 / 8.0).unwrap_or(traj.last_time());
            let t = traj.times[traj.nearest_index(p.num("t", auto)?)];
            let centres = singular::cluster_singular(traj, t, &cp).map_err(tag)?;
            for centre in &centres {
                out.reports.push(singular::cluster_report(traj, t, *centre, &cp).map_err(tag)?);
                out.records.push(json!({"kind": "center", "t": t, "s": centre.s, "alpha": centre.alpha}));
            }
            if centres.is_empty() {
                out.reports.push(EstimateReport::skipped(
                    "cluster",
                    "int_{B(p_j, Lambda sqrt(T-t_i))} |Rm|^2 dV > eps0",
                    Direction::Lower,
                    "no singular cluster",
                ));
            }
        }
        "classify" => {
            let cp = p.classification(c)?;
            let points = p.points("points", "pole,neck,far", &traj.checkpoints[0])?;
            for x in points {
                let v: PointVerdict = singular::classify_point(traj, x, &cp).map_err(tag)?;
                out.reports.push(singular::verdict_report(&v, &cp));
                let mut rec = serde_json::to_value(&v).expect("verdicts serialize");
                rec["kind"] = json!("verdict");
                rec["t"] = json!(traj.first_time());
                rec["s"] = json!(v.point.s);
                rec["alpha"] = json!(v.point.alpha);
                out.records.push(rec);
            }
        }
        "ct-decay" => {
            let center = p.point("center", "pole", &traj.checkpoints[0])?;
            let region = BallSpec::new(center, p.num("radius", 0.1)?).map_err(tag)?;
            let window = (p.num("from", traj.first_time())?, p.num("to", traj.last_time())?);
            out.reports.push(singular::ct_decay_audit(traj, &region, window, c.c0).map_err(tag)?);
        }
        "hypothesis" => {
            let h = monitor_hypotheses(traj, c.sigma, c.l).map_err(tag)?;
            let mut up = EstimateReport::upper("hypothesis_lp", "int |R|^(n/2+sigma) dV <= L", h.lp_sup, c.l)
                .param("sigma", c.sigma);
            if let Some(t) = h.first_violation_time {
                up = up.at_time(t).param("first_violation_time", t);
            }
            if let Some(e) = traj.singular_time_estimate.and_then(|t| fit_blowup_exponent(&h.series, t)) {
                up = up.param("blowup_exponent", e);
            }
            out.reports.push(up);
            out.reports.push(EstimateReport::lower("hypothesis_rmin", "R >= -1", h.r_min_over_time, -1.0));
            out.series.push(("lp".into(), h.series));
        }
        "sobolev" => {
            let m = traj.metric_at(p.num("t", traj.first_time())?).map_err(tag)?;
            let centers = p.points("centers", "mid", &m)?.iter().map(|q| q.s).collect();
            let family =
                BumpFamily { centers, widths: p.list("widths", &[0.3, 0.6])?, amplitude: p.num("amplitude", 1.0)? };
            let sc = SobolevConstants::new(c.a, c.b).map_err(tag)?;
            out.reports.push(spectral::sobolev_audit(&m, &sc, &family).map_err(tag)?);
        }
        "riemann-l2" => {
            let tol = p.num("tolerance", 0.005)?;
            let i0 = riemann_l2(&traj.checkpoints[0], None).map_err(tag)?;
            let mut series = Vec::new();
            for (m, &t) in traj.checkpoints.iter().zip(&traj.times) {
                let v = riemann_l2(m, None).map_err(tag)?;
                series.push((t, v));
                out.reports.push(
                    EstimateReport::upper(
                        "riemann_l2",
                        "|int |Rm|^2(t) / int |Rm|^2(t0) - 1| <= tol",
                        (v / i0 - 1.0).abs(),
                        tol,
                    )
                    .at_time(t)
                    .param("value", v),
                );
            }
            out.series.push(("riemann_l2".into(), series));
        }
        "sphere-regression" => out = sphere_regression(&p, traj)?,
        other => return Err(CliError::Usage(format!("unknown audit `{other}`"))),
    }
    Ok(out)
}

fn sphere_regression(p: &Params, traj: &Trajectory) -> Result<AuditOutput, CliError> {
    let num = |k: &str, d: f64| p.num(k, d);
    let rho = num("radius", 1.0)?;
    let t_max = num("t_max", 0.15)?;
    let tol = num("tolerance", 1e-4)?;
    let t_tol = num("t_tolerance", 0.005)?;
    let m0 = &traj.checkpoints[0];
    let mut out = AuditOutput::default();
    let mut series = Vec::new();
    for (m, &t) in traj.checkpoints.iter().zip(&traj.times) {
        if t > t_max {
            break;
        }
        let scale = (1.0 - 6.0 * (t - traj.first_time()) / (rho * rho)).sqrt();
        let mut err: f64 = 0.0;
        for (a, b) in m.psi().iter().zip(m0.psi()).filter(|(_, b)| **b > 1e-3 * rho) {
            err = err.max((a / (b * scale) - 1.0).abs());
        }
        for (a, b) in m.phi().iter().zip(m0.phi()) {
            err = err.max((a / (b * scale) - 1.0).abs());
        }
        series.push((t, err));
        out.reports.push(
            EstimateReport::upper("sphere_regression", "|g(t) / ((1 - 6t/rho^2) g0) - 1| <= tol", err, tol)
                .at_time(t)
                .param("scale", scale),
        );
    }
    let exact = traj.first_time() + rho * rho / 6.0;
    let rep = match traj.singular_time_estimate {
        Some(ts) => EstimateReport::upper("sphere_singular_time", "|T - rho^2/6| <= tol", (ts - exact).abs(), t_tol)
            .param("T", ts),
        None => EstimateReport::skipped(
            "sphere_singular_time",
            "|T - rho^2/6| <= tol",
            Direction::Upper,
            "no singular time estimate",
        ),
    };
    out.reports.push(rep.param("exact", exact));
    out.series.push(("regression_error".into(), series));
    Ok(out)
}

/// Per-checkpoint series written for every run.
pub fn trajectory_series(traj: &Trajectory) -> ricci_lab::Result<BTreeMap<&'static str, Vec<(f64, f64)>>> {
    let mut out: BTreeMap<&'static str, Vec<(f64, f64)>> = BTreeMap::new();
    for (m, &t) in traj.checkpoints.iter().zip(&traj.times) {
        let c = curvature(m)?;
        out.entry("waist").or_default().push((t, ricci_lab::flow::waist(m)));
        out.entry("max_rm").or_default().push((t, c.max_rm()));
        out.entry("volume").or_default().push((t, total_volume(m)));
        out.entry("riemann_l2").or_default().push((t, riemann_l2(m, None)?));
    }
    Ok(out)
}
