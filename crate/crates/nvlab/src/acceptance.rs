//! Acceptance battery. Each criterion runs a fixed, seeded experiment and
//! reports every measured quantity against its bound.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::NvError;
use crate::grid::{rel_l2, Fft2, GridSpec, RealField2D};
use crate::kplimit::{build_ansatz, kappa_sweep, localized_datum, residual_b2bc, KpSign};
use crate::oscint::{
    decay_probe, eval_i_lambda, eval_i_xi, geometric_grid, propagator_decay_probe, scaling_identity_check,
    OscIntQuery, QuadControl,
};
use crate::solver::{
    blowup_report, compute_w, invariants, kdv_reference, random_band_limited, scaling_symmetry_check, BlowupParams,
    BlowupWindow, InitialData, NvOperator, NvSolver, NvState,
};
use crate::stationary::{factorization_check, phase_s_lambda, solve_q};
use crate::symbol::{dispersion, EnergyParam};
use crate::xsb::{
    bilinear_ratio, dyadic_shells, phi_n, random_free_wave, xsb_norm, SpaceTimeField, SpaceTimeGrid, Window, XsbSpec,
};

type C = Complex64;

/// Identifiers of all criteria in report order.
pub const CRITERIA: [&str; 14] = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10a", "10b", "10c", "11", "12"];

/// Bound a measured value is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    AtMost { limit: f64 },
    Within { target: f64, tol: f64 },
}

impl Bound {
    fn admits(&self, x: f64) -> bool {
        match *self {
            Bound::AtMost { limit } => x <= limit,
            Bound::Within { target, tol } => (x - target).abs() <= tol,
        }
    }

    fn describe(&self) -> String {
        match *self {
            Bound::AtMost { limit } => format!("<= {limit:.1e}"),
            Bound::Within { target, tol } => format!("{target} +/- {tol}"),
        }
    }
}

fn ser_measured<S: Serializer>(m: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(x) if x.is_finite() => s.serialize_f64(*x),
        _ => s.serialize_str("NA"),
    }
}

/// One measured quantity. A missing or non-finite value is reported as "NA"
/// together with a reason and always fails.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    #[serde(serialize_with = "ser_measured")]
    pub measured: Option<f64>,
    pub bound: Bound,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub na_reason: Option<String>,
}

impl Check {
    pub fn new(name: impl Into<String>, measured: f64, bound: Bound) -> Self {
        let finite = measured.is_finite();
        Self {
            name: name.into(),
            measured: Some(measured),
            bound,
            pass: finite && bound.admits(measured),
            na_reason: (!finite).then(|| "NON_FINITE".to_string()),
        }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, limit: f64) -> Self {
        Self::new(name, measured, Bound::AtMost { limit })
    }

    /// A check whose experiment could not produce a value.
    pub fn unavailable(name: impl Into<String>, bound: Bound, reason: impl Into<String>) -> Self {
        Self { name: name.into(), measured: None, bound, pass: false, na_reason: Some(reason.into()) }
    }

    fn from_result(name: impl Into<String>, r: crate::Result<f64>, bound: Bound) -> Self {
        match r {
            Ok(x) => Self::new(name, x, bound),
            Err(e) => Self::unavailable(name, bound, reason_code(&e)),
        }
    }

    fn measured_text(&self) -> String {
        match self.measured {
            Some(x) if x.is_finite() => format!("{x:.3e}"),
            _ => "NA".into(),
        }
    }
}

fn reason_code(e: &NvError) -> String {
    let code = match e {
        NvError::InvalidInput(_) => "INVALID_INPUT",
        NvError::Precondition(_) => "PRECONDITION",
        NvError::NonConverged { .. } => "NON_CONVERGED",
        NvError::NanDetected { .. } => "NAN_DETECTED",
        NvError::Resolution(_) => "RESOLUTION",
        NvError::Io(_) => "IO",
        NvError::Json(_) => "JSON",
    };
    format!("{code}: {e}")
}

/// Result of one criterion.
#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: String,
    pub title: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl CriterionOutcome {
    fn new(id: &str, title: &str, checks: Vec<Check>) -> Self {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        Self { id: id.into(), title: title.into(), pass, checks }
    }

    /// The check furthest from passing, or the last one when all pass.
    pub fn decisive(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.pass).or_else(|| self.checks.last())
    }

    /// One line: id, PASS/FAIL, title and the decisive check.
    pub fn summary_line(&self) -> String {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        let detail = self
            .decisive()
            .map(|c| {
                let mut s = format!("{}: {} {}", c.name, c.measured_text(), c.bound.describe());
                if let Some(r) = &c.na_reason {
                    s.push_str(&format!(" ({r})"));
                }
                s
            })
            .unwrap_or_default();
        format!("criterion {:<3} {verdict}  {}  [{detail}]", self.id, self.title)
    }
}

/// Outcome of a battery run.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub version: String,
    pub overall: String,
    pub criteria: Vec<CriterionOutcome>,
}

impl SuiteReport {
    pub fn new(criteria: Vec<CriterionOutcome>) -> Self {
        let ok = criteria.iter().all(|c| c.pass);
        Self {
            version: env!("CARGO_PKG_VERSION").into(),
            overall: if ok { "pass" } else { "fail" }.into(),
            criteria,
        }
    }

    pub fn passed(&self) -> bool {
        self.overall == "pass"
    }

    /// Human-readable table: one row per criterion followed by its checks.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            out.push_str(&c.summary_line());
            out.push('\n');
            let width = c.checks.iter().map(|k| k.name.chars().count()).max().unwrap_or(0);
            for k in &c.checks {
                let mark = if k.pass { "ok  " } else { "FAIL" };
                out.push_str(&format!("    {mark} {:<width$} {:>11} {}", k.name, k.measured_text(), k.bound.describe()));
                if let Some(r) = &k.na_reason {
                    out.push_str(&format!("  ({r})"));
                }
                out.push('\n');
            }
        }
        out.push_str(&format!("overall: {}\n", self.overall));
        out
    }
}

/// Runs one criterion by identifier.
pub fn run_criterion(id: &str) -> crate::Result<CriterionOutcome> {
    Ok(match id {
        "1" => criterion_1(),
        "2" => criterion_2(),
        "3" => criterion_3(),
        "4" => criterion_4(),
        "5" => criterion_5(),
        "6" => criterion_6(),
        "7" => criterion_7(),
        "8" => criterion_8(),
        "9" => criterion_9(),
        "10a" => criterion_10().0,
        "10b" => criterion_10().1,
        "10c" => criterion_10().2,
        "11" => criterion_11(),
        "12" => criterion_12(),
        other => {
            return Err(NvError::InvalidInput(format!(
                "unknown criterion '{other}'; expected one of {}",
                CRITERIA.join(", ")
            )))
        }
    })
}

/// Runs the listed criteria, or all of them when `ids` is empty.
pub fn run_suite(ids: &[String]) -> crate::Result<SuiteReport> {
    let wanted: Vec<&str> = if ids.is_empty() { CRITERIA.to_vec() } else { ids.iter().map(|s| s.as_str()).collect() };
    for id in &wanted {
        if !CRITERIA.contains(id) {
            return Err(NvError::InvalidInput(format!(
                "unknown criterion '{id}'; expected one of {}",
                CRITERIA.join(", ")
            )));
        }
    }
    let mut out = Vec::with_capacity(wanted.len());
    let mut kp: Option<(CriterionOutcome, CriterionOutcome, CriterionOutcome)> = None;
    for id in wanted {
        let c = match id {
            "10a" | "10b" | "10c" => {
                let t = kp.get_or_insert_with(criterion_10);
                match id {
                    "10a" => t.0.clone(),
                    "10b" => t.1.clone(),
                    _ => t.2.clone(),
                }
            }
            _ => run_criterion(id)?,
        };
        out.push(c);
    }
    Ok(SuiteReport::new(out))
}

fn fmt_c(z: C) -> String {
    match (z.re, z.im) {
        (re, 0.0) => format!("{re}"),
        (0.0, im) => format!("{im}i"),
        (re, im) => format!("{re}{im:+}i"),
    }
}

fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / a.norm()
}

/// Largest y_j / min_{i<j} y_i; a value ≤ factor means non-increasing within that factor.
pub fn worst_growth(y: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for &v in y {
        if best.is_finite() {
            worst = worst.max(v / best);
        }
        best = best.min(v);
    }
    worst
}

/// Cross-representation oracle on the 3×3 panel.
pub fn criterion_1() -> CriterionOutcome {
    let bound = Bound::AtMost { limit: 1e-3 };
    let mut checks = Vec::new();
    for t in [1.0, 5.0, 25.0] {
        for u in [C::new(0.0, 0.0), C::new(18.0, 0.0), C::new(1.0, 1.0)] {
            let q = OscIntQuery::new(t, u, -1.0, 0.5, 0.0);
            let name = format!("xi vs lambda, t={t} u={}", fmt_c(u));
            let r = eval_i_xi(&q).and_then(|a| eval_i_lambda(&q).map(|b| rel(a.value, b.value)));
            checks.push(Check::from_result(name, r, bound));
        }
    }
    CriterionOutcome::new("1", "cross-representation oracle I_xi vs I_lambda", checks)
}

/// Energy scaling identity of the oscillatory integral.
pub fn criterion_2() -> CriterionOutcome {
    let bound = Bound::AtMost { limit: 1e-3 };
    let checks = [(-4.0, 2.0, C::new(8.0, 0.0), 0.5), (-0.25, 4.0, C::new(0.0, 0.1), 0.0)]
        .into_iter()
        .map(|(e, t, u, a)| {
            let name = format!("scaling E={e} t={t} u={} alpha={a}", fmt_c(u));
            let r = scaling_identity_check(t, u, e, a, 0.0, QuadControl::default()).map(|s| s.rel_diff);
            Check::from_result(name, r, bound)
        })
        .collect();
    CriterionOutcome::new("2", "energy scaling identity", checks)
}

/// Compensated decay bound of the oscillatory integral for large and small t.
pub fn criterion_3() -> CriterionOutcome {
    let bound = Bound::AtMost { limit: 3.0 };
    let us = [C::new(0.0, 0.0), C::new(18.0, 0.0), C::new(-6.0, 0.0), C::new(1.0, 1.0), C::new(100.0, 0.0)];
    let mut checks = Vec::new();
    for (label, ts) in [("large t", geometric_grid(1.0, 1e3, 8)), ("small t", geometric_grid(1e-3, 1.0, 8))] {
        for alpha in [0.0, 0.5, 0.9] {
            for beta in [0.0, 5.0] {
                let ex = if label == "large t" { (alpha + 3.0) / 4.0 - 0.05 } else { (alpha + 2.0) / 3.0 };
                let head = format!("{label} alpha={alpha} beta={beta}");
                match decay_probe(alpha, beta, &us, &ts, -1.0, ex, QuadControl::default()) {
                    Ok(rep) => {
                        for s in &rep.series {
                            let name = format!("{head} u={}", fmt_c(s.u));
                            match s.points.iter().find(|p| !p.converged) {
                                Some(p) => checks.push(Check::unavailable(
                                    name,
                                    bound,
                                    format!(
                                        "NON_CONVERGED at t={:.6e} u={} alpha={alpha} beta={beta} E=-1 (stab err {:.3e})",
                                        p.t,
                                        fmt_c(s.u),
                                        p.stab_err
                                    ),
                                )),
                                None => checks.push(Check::new(name, worst_growth(&s.compensated), bound)),
                            }
                        }
                    }
                    Err(e) => checks.push(Check::unavailable(head, bound, reason_code(&e))),
                }
            }
        }
    }
    CriterionOutcome::new("3", "compensated decay of I is non-increasing within factor 3", checks)
}

/// Stationary-point root battery.
pub fn criterion_4() -> CriterionOutcome {
    let mut checks = Vec::new();
    let r18 = solve_q(C::new(18.0, 0.0));
    let d18 = r18.zeta_roots.iter().map(|z| (z - 1.0).norm()).fold(0.0, f64::max);
    checks.push(Check::at_most("u=18 triple root at 1", d18, 1e-8));
    let mut r6 = solve_q(C::new(-6.0, 0.0)).zeta_roots.to_vec();
    r6.sort_by(|a, b| a.re.total_cmp(&b.re));
    let d6 = (r6[0] + 1.0).norm().max((r6[1] + 1.0).norm()).max((r6[2] - 1.0).norm());
    checks.push(Check::at_most("u=-6 roots {1,-1,-1}", d6, 1e-7));
    let d0 = solve_q(C::new(0.0, 0.0)).zeta_roots.iter().map(|z| (z * z * z - 1.0).norm()).fold(0.0, f64::max);
    checks.push(Check::at_most("u=0 cube roots of unity", d0, 1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut prod_err, mut sum_err) = (0.0f64, 0.0f64);
    for _ in 0..10_000 {
        let u = C::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let z = solve_q(u).zeta_roots;
        prod_err = prod_err.max((z[0] * z[1] * z[2] - 1.0).norm());
        sum_err = sum_err.max((z[0] + z[1] + z[2] - u.conj() / 6.0).norm() / (1.0 + u.norm()));
    }
    checks.push(Check::at_most("Vieta product, 1e4 random u", prod_err, 1e-9));
    checks.push(Check::at_most("Vieta sum / (1+|u|), 1e4 random u", sum_err, 1e-9));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut fact: crate::Result<f64> = Ok(0.0);
    for _ in 0..1000 {
        let u = C::new(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
        let l = C::from_polar(rng.gen_range(0.3..3.0), rng.gen_range(0.0..std::f64::consts::TAU));
        fact = fact.and_then(|m| {
            let s = phase_s_lambda(u, l)?.norm();
            Ok(m.max(factorization_check(u, l)? / (1.0 + s)))
        });
    }
    checks.push(Check::from_result(
        "factorization residual / (1+|S_lambda|), 1e3 random",
        fact,
        Bound::AtMost { limit: 1e-8 },
    ));
    CriterionOutcome::new("4", "stationary-point root battery", checks)
}

/// KdV soliton transport and invariant drift under the NV solver.
pub fn criterion_5() -> CriterionOutcome {
    let run = || -> crate::Result<(f64, [f64; 3])> {
        let g = GridSpec::new(256, 16, 64.0, 16.0)?;
        let e = -1.0;
        let v0 = InitialData::KdvSoliton { c: 1.0 }.sample(g)?;
        let mean = v0.integral() / (g.lx * g.ly);
        let s = NvState::new(v0, e, 0.0)?;
        let i0 = invariants(&s);
        let mut worst = [0.0f64; 3];
        let out = NvSolver::new(g, e)?.evolve_observed(&s, 1.0, 1e-3, 50, |st| {
            let d = invariants(st).relative_drift(&i0);
            for k in 0..3 {
                worst[k] = worst[k].max(d[k]);
            }
        })?;
        let d = invariants(&out).relative_drift(&i0);
        for k in 0..3 {
            worst[k] = worst[k].max(d[k]);
        }
        Ok((rel_l2(&out.v, &kdv_reference(g, 1.0, e, mean, 1.0)), worst))
    };
    let checks = match run() {
        Ok((err, drift)) => vec![
            Check::at_most("relative L2 error vs soliton at T=1", err, 1e-3),
            Check::at_most("drift of integral of v", drift[0], 1e-6),
            Check::at_most("drift of mass", drift[1], 1e-6),
            Check::at_most("drift of energy", drift[2], 1e-6),
        ],
        Err(e) => vec![Check::unavailable("KdV soliton run", Bound::AtMost { limit: 1e-3 }, reason_code(&e))],
    };
    CriterionOutcome::new("5", "KdV reduction on 256x16", checks)
}

/// Mass of radial data vanishes.
pub fn criterion_6() -> CriterionOutcome {
    let r = (|| {
        let g = GridSpec::new(64, 64, 24.0, 24.0)?;
        let v = InitialData::Gaussian { amplitude: 1.0, width: 1.5, x0: 0.0, y0: 0.0 }.sample(g)?;
        let m = invariants(&NvState::new(v.clone(), -1.0, 0.0)?).mass;
        Ok(m.norm() / v.l2_norm().powi(2))
    })();
    let c = Check::from_result("|M| / ||v||^2 for a Gaussian", r, Bound::AtMost { limit: 1e-10 });
    CriterionOutcome::new("6", "radial mass vanishing", vec![c])
}

/// Closed-form blow-up solution satisfies the equation at t = 0.
pub fn criterion_7() -> CriterionOutcome {
    let r = blowup_report(&BlowupParams { a: 1.0, c: 1.0, d: 1.0 }, &BlowupWindow::default()).map(|r| r.relative_residual);
    let c = Check::from_result("relative residual (a,c,d)=(1,1,1)", r, Bound::AtMost { limit: 1e-5 });
    CriterionOutcome::new("7", "blow-up closed form at E=0", vec![c])
}

/// Scaling symmetry of the evolution.
pub fn criterion_8() -> CriterionOutcome {
    let checks = [0.5, 2.0]
        .into_iter()
        .map(|lam| {
            let r = GridSpec::new(64, 64, 16.0, 16.0).and_then(|g| {
                scaling_symmetry_check(|x, y| (-(x * x + y * y)).exp(), g, -1.0, lam, 0.5, 1e-3)
            });
            Check::from_result(format!("relative L2, lambda={lam}"), r.map(|r| r.rel_l2), Bound::AtMost { limit: 1e-6 })
        })
        .collect();
    CriterionOutcome::new("8", "scaling symmetry of the NV flow", checks)
}

/// Complex and real forms of the right-hand side, and recovery identities.
pub fn criterion_9() -> CriterionOutcome {
    let run = || -> crate::Result<(f64, f64, f64)> {
        let g = GridSpec::new(32, 32, 12.0, 12.0)?;
        let (mut forms, mut rec1, mut rec2) = (0.0f64, 0.0f64, 0.0f64);
        let mut fft = Fft2::new(g);
        for seed in 0..20 {
            let v = random_band_limited(g, seed);
            let mut op = NvOperator::new(g, -1.3)?;
            let (a, _) = op.rhs_complex_form(&v)?;
            let b = op.rhs_real_form(&v)?;
            forms = forms.max(rel_l2(&a, &b));
            let (w1, w2) = compute_w(&v);
            let lap = |f: &RealField2D, fft: &mut Fft2| {
                fft.apply_real(f, |i, j| g.ikx(i) * g.ikx(i) + g.iky(j) * g.iky(j))
            };
            let l1 = lap(&w1, &mut fft);
            let l2 = lap(&w2, &mut fft);
            let r1 = fft.apply_real(&v, |i, j| 3.0 * (g.iky(j) * g.iky(j) - g.ikx(i) * g.ikx(i)));
            let r2 = fft.apply_real(&v, |i, j| 6.0 * g.ikx(i) * g.iky(j));
            rec1 = rec1.max(rel_l2(&l1, &r1));
            rec2 = rec2.max(rel_l2(&l2, &r2));
        }
        Ok((forms, rec1, rec2))
    };
    let checks = match run() {
        Ok((f, a, b)) => vec![
            Check::at_most("complex vs real form, 20 random fields", f, 1e-10),
            Check::at_most("Laplacian w1 = 3(dyy - dxx) v", a, 1e-10),
            Check::at_most("Laplacian w2 = 6 dxy v", b, 1e-10),
        ],
        Err(e) => vec![Check::unavailable("right-hand side forms", Bound::AtMost { limit: 1e-10 }, reason_code(&e))],
    };
    CriterionOutcome::new("9", "complex/real form equivalence", checks)
}

/// High-energy ansatz identities as (10a, 10b, 10c).
pub fn criterion_10() -> (CriterionOutcome, CriterionOutcome, CriterionOutcome) {
    let kappas = [4.0, 8.0, 16.0, 32.0];
    let tight = Bound::AtMost { limit: 1e-12 };
    let slope_bound = Bound::Within { target: -1.0, tol: 0.3 };
    let single = (|| {
        let (lx, ly) = (2.0 * std::f64::consts::PI, 4.0 * std::f64::consts::PI);
        let g = GridSpec::new(16, 16, lx, ly)?;
        let v = RealField2D::from_fn(g, |x, y| (x * 2.0 * std::f64::consts::PI / lx).sin() * (y * 2.0 * std::f64::consts::PI / ly).cos());
        let mut worst = (0.0f64, 0.0f64);
        for sign in [KpSign::Minus, KpSign::Plus] {
            for &k in &kappas {
                let r = residual_b2bc(&build_ansatz(&v, k, sign)?);
                worst = (worst.0.max(r.b2b_relative), worst.1.max(r.b2c_mismatch));
            }
        }
        Ok::<_, NvError>(worst)
    })();
    let sweep = (|| {
        let g = GridSpec::new(128, 128, 40.0, 40.0)?;
        kappa_sweep(&localized_datum(g, 0.3, 3.0), &kappas, KpSign::Minus, 0.2, 1e-3)
    })();
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut c = Vec::new();
    match single {
        Ok((x, y)) => {
            a.push(Check::new("single mode, both signs, all kappa", x, tight));
            b.push(Check::new("single mode, both signs, all kappa", y, tight));
        }
        Err(e) => {
            a.push(Check::unavailable("single mode", tight, reason_code(&e)));
            b.push(Check::unavailable("single mode", tight, reason_code(&e)));
        }
    }
    match sweep {
        Ok(s) => {
            for r in &s.rows {
                a.push(Check::new(format!("evolved datum, kappa={}", r.kappa), r.res_b2b, tight));
                b.push(Check::new(format!("evolved datum, kappa={}", r.kappa), r.b2c_mismatch, tight));
            }
            c.push(Check::new("slope of the evolution residual in log kappa", s.slope_fit, slope_bound));
        }
        Err(e) => {
            a.push(Check::unavailable("evolved datum", tight, reason_code(&e)));
            b.push(Check::unavailable("evolved datum", tight, reason_code(&e)));
            c.push(Check::unavailable("slope of the evolution residual", slope_bound, reason_code(&e)));
        }
    }
    (
        CriterionOutcome::new("10a", "first constraint residual vanishes, relative to ||dx v0||", a),
        CriterionOutcome::new("10b", "second constraint residual equals 6 k^-3 dx^-2 dY^3 v0, relative to ||dx v0||", b),
        CriterionOutcome::new("10c", "evolution residual of the ansatz decays like kappa^-1", c),
    )
}

/// Xsb toolbox checks.
pub fn criterion_11() -> CriterionOutcome {
    let mut checks = Vec::new();
    let shells = dyadic_shells(1 << 22);
    let mut pou: f64 = 0.0;
    for j in 0..=600 {
        let s = if j == 0 { 0.0 } else { 10f64.powf(-3.0 + 9.0 * j as f64 / 600.0) };
        pou = pou.max((shells.iter().map(|&n| phi_n(n, s)).sum::<f64>() - 1.0).abs());
    }
    checks.push(Check::at_most("partition of unity, 601 log points", pou, 1e-12));
    let single = (|| {
        let two_pi = 2.0 * std::f64::consts::PI;
        let g = SpaceTimeGrid::new(32, two_pi, GridSpec::new(16, 16, two_pi, two_pi)?)?;
        let (k1, k2, tau0) = (1.0, 2.0, 3.0);
        let f = SpaceTimeField::from_fn(g, Window::Periodic, |t, x, y| C::from_polar(1.0, k1 * x + k2 * y - tau0 * t))?;
        let spec = XsbSpec::new(0.75, 0.55, 0.05, -1.0)?;
        let sigma = tau0 - dispersion(k1, k2, -1.0);
        let exact = (two_pi.powi(3) * (1.0 + sigma * sigma).powf(spec.b) * (1.0 + k1 * k1 + k2 * k2).powf(spec.s)).sqrt();
        Ok::<_, NvError>((xsb_norm(&f, &spec) - exact).abs() / exact)
    })();
    checks.push(Check::from_result("single-mode norm vs closed form", single, Bound::AtMost { limit: 1e-10 }));
    let drift = (|| {
        let two_pi = 2.0 * std::f64::consts::PI;
        let base = SpaceTimeGrid::new(256, 1.0, GridSpec::new(16, 16, two_pi, two_pi)?)?;
        let spec = XsbSpec::new(0.75, 0.0, 0.05, -1.0)?;
        let e = EnergyParam::negative(-1.0)?.value();
        let mut worst: f64 = 0.0;
        for seed in 0..20u64 {
            let ratio = |g: SpaceTimeGrid| -> crate::Result<f64> {
                let v = random_free_wave(g, Window::default(), e, 2 * seed, 3, 2)?;
                let w = random_free_wave(g, Window::default(), e, 2 * seed + 1, 3, 2)?;
                bilinear_ratio(&v, &w, &spec)
            };
            let a = ratio(base)?;
            let b = ratio(base.refined(2)?)?;
            worst = worst.max((a - b).abs() / b);
        }
        Ok::<_, NvError>(worst)
    })();
    checks.push(Check::from_result(
        "bilinear ratio drift under grid doubling, 20 seeds",
        drift,
        Bound::AtMost { limit: 0.1 },
    ));
    CriterionOutcome::new("11", "X^{s,b} toolbox", checks)
}

/// Linear propagator: L2 isometry and sup-norm decay.
pub fn criterion_12() -> CriterionOutcome {
    let mut checks = Vec::new();
    let iso = (|| {
        let g = GridSpec::new(32, 32, 12.0, 12.0)?;
        let v = random_band_limited(g, 7);
        let s = NvState::new(v.clone(), -2.0, 0.0)?;
        let out = NvSolver::new(g, -2.0)?.linear_only(true).evolve(&s, 1.0, 0.01)?;
        Ok::<_, NvError>((out.v.l2_norm() - v.l2_norm()).abs() / v.l2_norm())
    })();
    checks.push(Check::from_result("L2 drift of the linear ETD flow", iso, Bound::AtMost { limit: 1e-12 }));
    let prop = (|| {
        let g = GridSpec::new(2048, 2048, 512.0, 512.0)?;
        let v = RealField2D::from_fn(g, |x, y| (-(x * x + y * y)).exp());
        let l2 = propagator_decay_probe(&v, 0.0, 0.0, -1.0, &[0.0, 1.0, 4.0], 0.0)?;
        let n0 = l2.rows[0].norm;
        let iso = l2.rows.iter().map(|r| (r.norm - n0).abs() / n0).fold(0.0, f64::max);
        let sup = propagator_decay_probe(&v, 0.0, 1.0, -1.0, &geometric_grid(0.5, 4.0, 7), 0.0)?;
        let ex = sup
            .fitted_exponent
            .ok_or_else(|| NvError::Precondition("sup-norm decay fit failed".into()))?;
        Ok::<_, NvError>((iso, ex))
    })();
    match prop {
        Ok((iso, ex)) => {
            checks.push(Check::at_most("L2 drift of the exact propagator", iso, 1e-12));
            checks.push(Check::at_most("sup-norm decay exponent, t in [0.5, 4]", ex, -0.75 + 0.15));
        }
        Err(e) => checks.push(Check::unavailable("propagator probe", Bound::AtMost { limit: -0.6 }, reason_code(&e))),
    }
    CriterionOutcome::new("12", "linear propagator isometry and decay", checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_measure() {
        assert_eq!(worst_growth(&[4.0, 2.0, 1.0]), 0.5);
        assert_eq!(worst_growth(&[1.0, 2.5, 0.5, 1.0]), 2.5);
        assert!(worst_growth(&[1.0, 4.0]) > 3.0);
    }

    #[test]
    fn na_values_fail_and_serialize_as_na() {
        let c = Check::at_most("x", f64::NAN, 1.0);
        assert!(!c.pass);
        let j = serde_json::to_string(&c).unwrap();
        assert!(j.contains("\"measured\":\"NA\""), "{j}");
        let u = Check::unavailable("y", Bound::AtMost { limit: 1.0 }, "NON_CONVERGED: t=1");
        assert!(!u.pass && u.na_reason.is_some());
    }

    #[test]
    fn report_overall_and_table() {
        let ok = CriterionOutcome::new("6", "t", vec![Check::at_most("a", 0.5, 1.0)]);
        let bad = CriterionOutcome::new("7", "t", vec![Check::at_most("b", 2.0, 1.0)]);
        assert!(SuiteReport::new(vec![ok.clone()]).passed());
        let r = SuiteReport::new(vec![ok, bad]);
        assert_eq!(r.overall, "fail");
        assert!(r.table().contains("criterion 7   FAIL"));
        assert!(run_suite(&["99".into()]).is_err());
    }

    #[test]
    fn cheap_criteria_are_deterministic() {
        let a = serde_json::to_string(&run_suite(&["6".into(), "9".into()]).unwrap()).unwrap();
        let b = serde_json::to_string(&run_suite(&["6".into(), "9".into()]).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
