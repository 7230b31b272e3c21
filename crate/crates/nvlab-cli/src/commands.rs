//! Subcommand parameters and their runs. Every `*Params` struct lists the
//! complete set of keys accepted under `params` in a config file; the
//! matching `*Flags` struct carries the command-line overrides.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use nvlab::acceptance::{run_suite, CRITERIA};
use nvlab::grid::{rel_l2, GridSpec};
use nvlab::kplimit::{evolve_limit_snapshots, kappa_sweep, kp_map_check, localized_datum, KpSign};
use nvlab::oscint::{decay_probe, eval_i_lambda, eval_i_xi, geometric_grid, ContourMode, CutoffProfile, OscIntQuery, QuadControl};
use nvlab::snapshot::{read_snapshot, write_snapshot};
use nvlab::solver::{invariants, kdv_reference, InitialData, InvariantReport, NvSolver, NvState};
use nvlab::stationary::solve_q;
use nvlab::symbol::{multiplier_raw, sigma, symbol_w, EnergyParam, SpectralPoint};
use nvlab::xsb::{bilinear_ratio, random_free_wave, resonance_region_probe, SpaceTimeGrid, Window, XsbSpec};
use nvlab::NvError;

use crate::config::Cplx;
use crate::error::CliError;
use crate::output::{num, Outputs};

/// What a finished run hands back to the runner.
pub struct RunOutcome {
    /// Printed on stdout.
    pub stdout: String,
    /// Set when a declared tolerance was missed.
    pub tolerance_failure: Option<String>,
}

impl RunOutcome {
    fn ok(stdout: String) -> Self {
        Self { stdout, tolerance_failure: None }
    }
}

fn pretty(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

// ---------------------------------------------------------------- symbol

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct SymbolFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi2: Option<f64>,
    #[arg(long = "E", alias = "e")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct SymbolParams {
    pub xi1: f64,
    pub xi2: f64,
    pub e: f64,
    pub tau: f64,
}

impl Default for SymbolParams {
    fn default() -> Self {
        Self { xi1: 1.0, xi2: 0.0, e: -1.0, tau: 0.0 }
    }
}

pub fn symbol(p: &SymbolParams, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    let e = EnergyParam::new(p.e)?;
    let pt = SpectralPoint::with_tau(p.xi1, p.xi2, p.tau);
    let w = symbol_w(pt, e)?;
    let m = multiplier_raw(p.xi1, p.xi2);
    let v = json!({
        "xi1": p.xi1, "xi2": p.xi2, "tau": p.tau, "e": p.e,
        "w": w.value, "sigma": sigma(pt, e)?,
        "m_re": m.re, "m_im": m.im,
        "at_origin_convention": w.at_origin_convention,
    });
    out.json("symbol.json", &v)?;
    Ok(RunOutcome::ok(pretty(&v)))
}

// ---------------------------------------------------------------- roots

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct RootsFlags {
    /// Complex parameter u, e.g. 18, -6 or 1+1i.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Cplx>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct RootsParams {
    pub u: Cplx,
}

impl Default for RootsParams {
    fn default() -> Self {
        Self { u: Cplx::new(0.0, 0.0) }
    }
}

pub fn roots(p: &RootsParams, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    let a = solve_q(p.u.0);
    let pair = |z: num_complex::Complex64| [z.re, z.im];
    let v = json!({
        "u": p.u,
        "zeta_roots": a.zeta_roots.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "lambda_points": a.lambda_points.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "xi_points": a.xi_points().iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "classification": a.classification,
        "omega": a.omega,
        "phi": a.phi,
    });
    out.json("roots.json", &v)?;
    Ok(RunOutcome::ok(pretty(&v)))
}

// ---------------------------------------------------------------- oscint

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Plane {
    Xi,
    Lambda,
    Both,
}

/// Integration contour; see the `oscint` docs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Contour {
    /// Gradient-shifted complex contour with a sharp outer cutoff.
    Shifted,
    /// Real plane against a smooth radial taper.
    Tapered,
}

fn quad_control(contour: Contour, tol: f64, cutoff_radius: Option<f64>, richardson_levels: usize) -> QuadControl {
    let base = QuadControl::default();
    let (mode, cutoff_profile) = match contour {
        Contour::Shifted => (base.mode, base.cutoff_profile),
        Contour::Tapered => (ContourMode::Tapered, CutoffProfile::Smooth),
    };
    QuadControl { tol, cutoff_radius, richardson_levels, mode, cutoff_profile, ..base }
}

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct OscintFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Cplx>,
    #[arg(long = "E", alias = "e")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plane: Option<Plane>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour: Option<Contour>,
    /// Relative stabilization tolerance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct OscintParams {
    pub t: f64,
    pub u: Cplx,
    pub e: f64,
    pub alpha: f64,
    pub beta: f64,
    pub plane: Plane,
    pub contour: Contour,
    pub tol: f64,
    /// Fixed outer radius in the ξ-plane; chosen automatically when null.
    pub cutoff_radius: Option<f64>,
    pub richardson_levels: usize,
}

impl Default for OscintParams {
    fn default() -> Self {
        let q = QuadControl::default();
        Self {
            t: 1.0,
            u: Cplx::new(0.0, 0.0),
            e: -1.0,
            alpha: 0.5,
            beta: 0.0,
            plane: Plane::Xi,
            contour: Contour::Shifted,
            tol: q.tol,
            cutoff_radius: None,
            richardson_levels: q.richardson_levels,
        }
    }
}

/// Column layout shared by the `oscint` and `decay` CSV files.
const INTEGRAL_HEADER: [&str; 10] = ["t", "u_re", "u_im", "E", "alpha", "beta", "I_re", "I_im", "abs_I", "stab_err"];

fn integral_row(t: f64, u: Cplx, e: f64, alpha: f64, beta: f64, i: num_complex::Complex64, stab: f64) -> Vec<String> {
    vec![num(t), num(u.0.re), num(u.0.im), num(e), num(alpha), num(beta), num(i.re), num(i.im), num(i.norm()), num(stab)]
}

pub fn oscint(p: &OscintParams, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    let quad = quad_control(p.contour, p.tol, p.cutoff_radius, p.richardson_levels);
    let q = OscIntQuery::new(p.t, p.u.0, p.e, p.alpha, p.beta).with_quad(quad);
    let row = |plane: &str, r: nvlab::oscint::OscIntResult| {
        json!({
            "plane": plane, "re": r.value.re, "im": r.value.im, "abs": r.value.norm(),
            "stabilization_error": r.stabilization_error, "panels_used": r.panels_used,
            "cutoff_radius": r.cutoff_radius,
        })
    };
    let mut results = Vec::new();
    let mut rows = Vec::new();
    let mut push = |plane: &str, r: nvlab::oscint::OscIntResult| {
        rows.push(integral_row(p.t, p.u, p.e, p.alpha, p.beta, r.value, r.stabilization_error));
        results.push(row(plane, r));
    };
    if matches!(p.plane, Plane::Xi | Plane::Both) {
        push("xi", eval_i_xi(&q)?);
    }
    if matches!(p.plane, Plane::Lambda | Plane::Both) {
        push("lambda", eval_i_lambda(&q)?);
    }
    out.csv("oscint.csv", &INTEGRAL_HEADER, &rows)?;
    let mut v = json!({ "t": p.t, "u": p.u, "e": p.e, "alpha": p.alpha, "beta": p.beta, "results": results });
    if results.len() == 2 {
        let a = num_complex::Complex64::new(results[0]["re"].as_f64().unwrap(), results[0]["im"].as_f64().unwrap());
        let b = num_complex::Complex64::new(results[1]["re"].as_f64().unwrap(), results[1]["im"].as_f64().unwrap());
        v["relative_difference"] = json!((a - b).norm() / a.norm());
    }
    out.json("oscint.json", &v)?;
    Ok(RunOutcome::ok(pretty(&v)))
}

// ---------------------------------------------------------------- decay

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct DecayFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Comma-separated list of u values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<Cplx>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    #[arg(long = "E", alias = "e")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    /// Compensation exponent; (α+3)/4 − 0.05 when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour: Option<Contour>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    pub alpha: f64,
    pub beta: f64,
    pub u: Vec<Cplx>,
    pub t_min: f64,
    pub t_max: f64,
    pub n_t: usize,
    pub e: f64,
    pub exponent: Option<f64>,
    pub contour: Contour,
    pub tol: f64,
    pub cutoff_radius: Option<f64>,
}

impl Default for DecayParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.0,
            u: vec![Cplx::new(0.0, 0.0), Cplx::new(18.0, 0.0), Cplx::new(-6.0, 0.0), Cplx::new(1.0, 1.0), Cplx::new(100.0, 0.0)],
            t_min: 1.0,
            t_max: 1000.0,
            n_t: 8,
            e: -1.0,
            exponent: None,
            contour: Contour::Shifted,
            tol: QuadControl::default().tol,
            cutoff_radius: None,
        }
    }
}

pub fn decay(p: &DecayParams, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    if !(p.t_min > 0.0 && p.t_max > p.t_min) || p.n_t < 2 {
        return Err(CliError::Usage("decay needs 0 < t_min < t_max and n_t >= 2".into()));
    }
    let ex = p.exponent.unwrap_or((p.alpha + 3.0) / 4.0 - 0.05);
    let us: Vec<_> = p.u.iter().map(|c| c.0).collect();
    let ts = geometric_grid(p.t_min, p.t_max, p.n_t);
    let quad = quad_control(p.contour, p.tol, p.cutoff_radius, QuadControl::default().richardson_levels);
    let rep = decay_probe(p.alpha, p.beta, &us, &ts, p.e, ex, quad)?;
    let mut rows = Vec::new();
    for s in &rep.series {
        for pt in &s.points {
            let mut row = integral_row(pt.t, Cplx(s.u), p.e, p.alpha, p.beta, pt.value, pt.stab_err);
            if !pt.converged {
                for cell in &mut row[6..9] {
                    *cell = "NA:NON_CONVERGED".into();
                }
            }
            rows.push(row);
        }
    }
    out.csv("decay.csv", &INTEGRAL_HEADER, &rows)?;
    out.json("decay.json", &rep)?;
    let failing: Vec<String> = rep.series.iter().filter(|s| !s.bounded).map(|s| Cplx(s.u).to_string()).collect();
    let summary = json!({ "pass": rep.pass, "compensation_exponent": ex, "failing_u": failing,
        "envelope_exponent": rep.envelope.as_ref().map(|f| f.exponent) });
    Ok(RunOutcome {
        stdout: pretty(&summary),
        tolerance_failure: (!rep.pass)
            .then(|| format!("compensated decay grows by more than a factor 3 for u in {failing:?}")),
    })
}

// ---------------------------------------------------------------- evolve / invariants

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Preset {
    KdvSoliton,
    Gaussian,
    Blowup,
    SingleMode,
}

impl Preset {
    fn initial(self) -> InitialData {
        match self {
            Preset::KdvSoliton => InitialData::KdvSoliton { c: 1.0 },
            Preset::Gaussian => InitialData::Gaussian { amplitude: 1.0, width: 1.5, x0: 0.0, y0: 0.0 },
            Preset::Blowup => InitialData::Blowup { a: 1.0, c: 1.0, d: 1.0 },
            Preset::SingleMode => InitialData::SingleMode { kx: 1, ky: 1, amplitude: 0.1 },
        }
    }

    /// (nx, ny, lx, ly)
    fn grid(self) -> (usize, usize, f64, f64) {
        match self {
            Preset::KdvSoliton => (256, 16, 64.0, 16.0),
            Preset::Gaussian => (64, 64, 24.0, 24.0),
            Preset::Blowup => (128, 128, 32.0, 32.0),
            Preset::SingleMode => (32, 32, 2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI),
        }
    }
}

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct FieldFlags {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[arg(long = "E", alias = "e")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lx: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ly: Option<f64>,
}

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct EvolveFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldFlags,
    /// Final time.
    #[arg(long = "T", alias = "t-final")]
    #[serde(rename = "t_final", skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Number of snapshot intervals; snapshots are written at k·T/n.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<usize>,
    /// Steps between rows of the invariant CSV.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariants_every: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linear_only: Option<bool>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct EvolveParams {
    pub preset: Preset,
    /// Explicit initial data; overrides the preset's datum when set.
    pub initial: Option<InitialData>,
    pub e: f64,
    /// Grid fields default to the preset's grid when null.
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub lx: Option<f64>,
    pub ly: Option<f64>,
    pub t_final: f64,
    pub dt: f64,
    pub snapshots: usize,
    pub invariants_every: usize,
    pub linear_only: bool,
}

impl Default for EvolveParams {
    fn default() -> Self {
        Self {
            preset: Preset::KdvSoliton,
            initial: None,
            e: -1.0,
            nx: None,
            ny: None,
            lx: None,
            ly: None,
            t_final: 1.0,
            dt: 1e-3,
            snapshots: 4,
            invariants_every: 50,
            linear_only: false,
        }
    }
}

fn grid_of(preset: Preset, nx: Option<usize>, ny: Option<usize>, lx: Option<f64>, ly: Option<f64>) -> Result<GridSpec, CliError> {
    let d = preset.grid();
    Ok(GridSpec::new(nx.unwrap_or(d.0), ny.unwrap_or(d.1), lx.unwrap_or(d.2), ly.unwrap_or(d.3))?)
}

fn invariant_row(s: &NvState, r: &InvariantReport) -> Vec<String> {
    vec![num(s.t), num(r.l1_integral), num(r.mass.re), num(r.mass.im), num(r.energy.re), num(r.energy.im)]
}

const INVARIANT_HEADER: [&str; 6] = ["t", "l1", "mass_re", "mass_im", "energy_re", "energy_im"];

pub fn evolve(p: &EvolveParams, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    if p.snapshots == 0 || p.invariants_every == 0 {
        return Err(CliError::Usage("snapshots and invariants_every must be at least 1".into()));
    }
    let g = grid_of(p.preset, p.nx, p.ny, p.lx, p.ly)?;
    let init = p.initial.clone().unwrap_or_else(|| p.preset.initial());
    let v0 = init.sample(g)?;
    let tail = nvlab::solver::spectral_tail(&v0);
    if tail > 1e-10 {
        return Err(NvError::Resolution(format!("initial spectral tail {tail:.3e} exceeds 1e-10; refine the grid")).into());
    }
    let mut state = NvState::new(v0, p.e, 0.0)?;
    let i0 = invariants(&state);
    let mut solver = NvSolver::new(g, p.e)?.linear_only(p.linear_only);
    let snap_dir = out.dir.join("snapshots");
    let mut rows = vec![invariant_row(&state, &i0)];
    let mut worst = [0.0f64; 3];
    let write = |out: &mut Outputs, k: usize, s: &NvState| -> Result<(), CliError> {
        let stem = format!("snap_{k:04}");
        write_snapshot(&snap_dir, &stem, s)?;
        out.record(format!("snapshots/{stem}.json"));
        out.record(format!("snapshots/{stem}.bin"));
        Ok(())
    };
    write(out, 0, &state)?;
    let span = p.t_final / p.snapshots as f64;
    for k in 1..=p.snapshots {
        let mut seen = 0usize;
        state = solver.evolve_observed(&state, span, p.dt, p.invariants_every, |s| {
            seen += 1;
            // the segment's first observation repeats the previous segment's last
            if seen > 1 {
                let r = invariants(s);
                let d = r.relative_drift(&i0);
                for j in 0..3 {
                    worst[j] = worst[j].max(d[j]);
                }
                rows.push(invariant_row(s, &r));
            }
        })?;
        write(out, k, &state)?;
    }
    out.csv("invariants.csv", &INVARIANT_HEADER, &rows)?;
    let mut summary = json!({
        "t_final": state.t,
        "grid": g,
        "initial": init,
        "max_relative_drift": { "l1": worst[0], "mass": worst[1], "energy": worst[2] },
        "final_max_abs": state.v.max_abs(),
    });
    if let InitialData::KdvSoliton { c } = init {
        let mean = state.v.integral() / (g.lx * g.ly);
        summary["kdv_reference_rel_l2"] = json!(rel_l2(&state.v, &kdv_reference(g, c, p.e, mean, state.t)));
    }
    out.json("evolve.json", &summary)?;
    Ok(RunOutcome::ok(pretty(&summary)))
}

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct InvariantsFlags {
    #[command(flatten)]
    #[serde(flatten)]
    pub field: FieldFlags,
    /// Snapshot header (JSON) to read instead of sampling a preset.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snapshot: Option<PathBuf>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct InvariantsParams {
    pub snapshot: Option<PathBuf>,
    pub preset: Preset,
    pub initial: Option<InitialData>,
    pub e: f64,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub lx: Option<f64>,
    pub ly: Option<f64>,
}

impl Default for InvariantsParams {
    fn default() -> Self {
        Self { snapshot: None, preset: Preset::Gaussian, initial: None, e: -1.0, nx: None, ny: None, lx: None, ly: None }
    }
}

pub fn invariants_cmd(p: &InvariantsParams, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    let state = match &p.snapshot {
        Some(path) if !path.is_file() => {
            return Err(CliError::Usage(format!("snapshot header {} does not exist", path.display())))
        }
        Some(path) => read_snapshot(path)?,
        None => {
            let g = grid_of(p.preset, p.nx, p.ny, p.lx, p.ly)?;
            let init = p.initial.clone().unwrap_or_else(|| p.preset.initial());
            NvState::new(init.sample(g)?, p.e, 0.0)?
        }
    };
    let r = invariants(&state);
    out.csv("invariants.csv", &INVARIANT_HEADER, &[invariant_row(&state, &r)])?;
    let v = json!({ "t": state.t, "e": state.e, "grid": state.grid(), "invariants": r });
    out.json("invariants.json", &v)?;
    Ok(RunOutcome::ok(pretty(&v)))
}

// ---------------------------------------------------------------- bilinear

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct BilinearFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[arg(long = "E", alias = "e")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    /// Number of random (v, w) pairs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nt: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct BilinearParams {
    pub s: f64,
    pub eps: f64,
    pub e: f64,
    pub samples: usize,
    /// Time samples and spatial points per direction of the base grid.
    pub nt: usize,
    pub n: usize,
    pub t_len: f64,
    pub box_len: f64,
    pub modes: usize,
    pub max_mode: i64,
    /// Largest allowed relative change under grid doubling.
    pub max_drift: f64,
}

impl Default for BilinearParams {
    fn default() -> Self {
        Self {
            s: 0.75,
            eps: 0.05,
            e: -1.0,
            samples: 20,
            nt: 256,
            n: 16,
            t_len: 1.0,
            box_len: 2.0 * std::f64::consts::PI,
            modes: 3,
            max_mode: 2,
            max_drift: 0.1,
        }
    }
}

pub fn bilinear(p: &BilinearParams, seed: u64, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    let base = SpaceTimeGrid::new(p.nt, p.t_len, GridSpec::new(p.n, p.n, p.box_len, p.box_len)?)?;
    let fine = base.refined(2)?;
    let spec = XsbSpec::new(p.s, 0.0, p.eps, p.e)?;
    let label = |g: &SpaceTimeGrid| format!("{}x{}x{}", g.space.nx, g.space.ny, g.nt);
    // samples are independent; collecting in index order keeps output deterministic
    let pairs: Vec<(f64, f64)> = (0..p.samples as u64)
        .into_par_iter()
        .map(|k| {
            let sv = seed.wrapping_add(2 * k);
            let ratio = |g: SpaceTimeGrid| -> nvlab::Result<f64> {
                let v = random_free_wave(g, Window::default(), p.e, sv, p.modes, p.max_mode)?;
                let w = random_free_wave(g, Window::default(), p.e, sv.wrapping_add(1), p.modes, p.max_mode)?;
                bilinear_ratio(&v, &w, &spec)
            };
            Ok((ratio(base)?, ratio(fine)?))
        })
        .collect::<nvlab::Result<_>>()?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (k, (a, b)) in pairs.iter().enumerate() {
        for (r, g) in [(a, &base), (b, &fine)] {
            rows.push(vec![k.to_string(), num(p.s), num(p.eps), num(p.e), num(*r), label(g)]);
        }
        let d = (a - b).abs() / b;
        worst = if d.is_finite() { worst.max(d) } else { f64::INFINITY };
    }
    out.csv("bilinear.csv", &["sample_id", "s", "eps", "E", "ratio", "grid"], &rows)?;
    let summary = json!({
        "samples": p.samples,
        "grids": [label(&base), label(&fine)],
        "max_drift": if worst.is_finite() { json!(worst) } else { json!("NA:NON_FINITE") },
        "tolerance": p.max_drift,
        "pass": worst <= p.max_drift,
    });
    out.json("bilinear.json", &summary)?;
    Ok(RunOutcome {
        stdout: pretty(&summary),
        tolerance_failure: (worst.is_nan() || worst > p.max_drift)
            .then(|| format!("bilinear ratio drift {} exceeds {}", num(worst), p.max_drift)),
    })
}

// ---------------------------------------------------------------- resonance

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct ResonanceFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_hat: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_hat: Option<u64>,
    #[arg(long = "E", alias = "e")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct ResonanceParams {
    pub n: u64,
    pub n_hat: u64,
    pub l: u64,
    pub l_hat: u64,
    pub e: f64,
    pub samples: usize,
    /// Direction of ξ̂ in radians.
    pub xi_hat_angle: f64,
}

impl Default for ResonanceParams {
    fn default() -> Self {
        Self { n: 1, n_hat: 16, l: 1, l_hat: 1, e: -1.0, samples: 200_000, xi_hat_angle: 0.3 }
    }
}

pub fn resonance(p: &ResonanceParams, seed: u64, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    let r = resonance_region_probe(p.n, p.n_hat, p.l, p.l_hat, p.e, p.samples, seed, p.xi_hat_angle)?;
    out.json("resonance.json", &r)?;
    Ok(RunOutcome::ok(pretty(&r)))
}

// ---------------------------------------------------------------- kplimit

#[derive(Args, Serialize, Debug, Default)]
#[command(allow_negative_numbers = true)]
pub struct KplimitFlags {
    #[arg(long, value_parser = parse_sign)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<KpSign>,
    /// Comma-separated κ values.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappas: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_mid: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

fn parse_sign(s: &str) -> Result<KpSign, String> {
    match s.to_ascii_uppercase().as_str() {
        "PLUS" | "+" => Ok(KpSign::Plus),
        "MINUS" | "-" => Ok(KpSign::Minus),
        _ => Err(format!("sign must be PLUS or MINUS, got '{s}'")),
    }
}

#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
pub struct KplimitParams {
    pub sign: KpSign,
    pub kappas: Vec<f64>,
    /// Points per direction of the square (x, Y) grid.
    pub n: usize,
    pub box_len: f64,
    /// The datum is amplitude·∂x² exp(−(x² + Y²)/width²).
    pub amplitude: f64,
    pub width: f64,
    pub t_mid: f64,
    pub dt: f64,
    /// Spacing of the three snapshots used by the KP map check.
    pub map_spacing: f64,
}

impl Default for KplimitParams {
    fn default() -> Self {
        Self {
            sign: KpSign::Minus,
            kappas: vec![4.0, 8.0, 16.0, 32.0],
            n: 128,
            box_len: 40.0,
            amplitude: 0.3,
            width: 3.0,
            t_mid: 0.2,
            dt: 1e-3,
            map_spacing: 2e-3,
        }
    }
}

pub fn kplimit(p: &KplimitParams, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    let g = GridSpec::new(p.n, p.n, p.box_len, p.box_len)?;
    let v0 = localized_datum(g, p.amplitude, p.width);
    let sweep = kappa_sweep(&v0, &p.kappas, p.sign, p.t_mid, p.dt)?;
    let rows: Vec<Vec<String>> = sweep
        .rows
        .iter()
        .map(|r| vec![num(r.kappa), num(r.res_b2b), num(r.res_b2c), num(r.res_b2a), num(sweep.slope_fit)])
        .collect();
    out.csv("kplimit.csv", &["kappa", "res_b2b", "res_b2c", "res_b2a", "slope_fit"], &rows)?;
    let h = p.map_spacing;
    let snaps = evolve_limit_snapshots(&v0, &[p.t_mid - h, p.t_mid, p.t_mid + h], p.dt, p.sign)?;
    let map = kp_map_check(&snaps, p.sign)?;
    let v = json!({ "sign": p.sign, "sweep": sweep, "kp_map": map });
    out.json("kplimit.json", &v)?;
    Ok(RunOutcome::ok(pretty(&v)))
}

// ---------------------------------------------------------------- suite

#[derive(Args, Serialize, Debug, Default)]
pub struct SuiteFlags {
    /// Comma-separated criterion ids; all when absent.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub criteria: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct SuiteParams {
    pub criteria: Vec<String>,
}

pub fn suite(p: &SuiteParams, out: &mut Outputs) -> Result<RunOutcome, CliError> {
    for id in &p.criteria {
        if !CRITERIA.contains(&id.as_str()) {
            return Err(CliError::Usage(format!(
                "unknown criterion '{id}'; expected one of {}",
                CRITERIA.join(", ")
            )));
        }
    }
    let report = run_suite(&p.criteria)?;
    out.json("suite_report.json", &report)?;
    let table = report.table();
    out.text("suite_report.txt", &table)?;
    let failing: Vec<&str> = report.criteria.iter().filter(|c| !c.pass).map(|c| c.id.as_str()).collect();
    Ok(RunOutcome {
        stdout: table,
        tolerance_failure: (!report.passed()).then(|| format!("failing criteria: {}", failing.join(", "))),
    })
}

/// Serializes resolved parameters for the manifest.
pub fn to_value(p: &impl Serialize) -> Value {
    serde_json::to_value(p).expect("parameters serialize")
}
