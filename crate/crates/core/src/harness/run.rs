//! Case driver: time loop, histories, audits and output files.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::cases::{self, CaseSetup};
use crate::harness::config::CaseConfig;
use crate::mesh::write_vtk;
use crate::rhs::{ExactFn, Scheme, Solver};
use crate::thermo::{entropy_unchecked, primitive_unchecked, State};
use crate::time::{stable_dt, step_with_retry};

pub const SCHEMA_VERSION: u32 = 1;

/// Relative tolerance of the end-of-run conservation audit.
pub const CONSERVATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub dump_av: bool,
    pub dump_operators: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistoryRow {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub energy: f64,
    pub entropy: f64,
    pub kinetic_energy: f64,
    pub min_rho: f64,
    pub min_t: f64,
    pub max_sn: f64,
    pub limited: usize,
    pub min_theta: f64,
    pub retries: usize,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Audit {
    pub positivity: bool,
    pub min_rho: f64,
    pub min_t: f64,
    /// Relative mismatch of `total(end) - total(0) - boundary inflow`.
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub conservation: bool,
    pub completed: bool,
}

impl Audit {
    pub fn passed(&self) -> bool {
        self.positivity && self.conservation && self.completed
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: CaseConfig,
    pub steps: usize,
    pub t: f64,
    pub history: Vec<HistoryRow>,
    pub failure: Option<String>,
    pub errors: Option<ErrorNorms>,
    pub audit: Audit,
    /// Largest `1 - theta` over every stage of the run.
    pub max_one_minus_theta: f64,
    pub u: Vec<State>,
}

/// `P J`-weighted errors over all five conserved components.
pub fn error_norms(solver: &Solver, u: &[State], exact: &ExactFn, t: f64) -> ErrorNorms {
    let npts = solver.npts();
    let (mut sq, mut vol, mut linf) = (0.0, 0.0, 0.0f64);
    for (e, el) in solver.elems.iter().enumerate() {
        for i in 0..npts {
            let ex = exact(&el.nodes[i], t);
            let wt = solver.ops.weights[i] * el.jac[i];
            for k in 0..5 {
                let d = u[e * npts + i][k] - ex[k];
                sq += wt * d * d;
                linf = linf.max(d.abs());
            }
            vol += wt;
        }
    }
    ErrorNorms { l2: (sq / vol).sqrt(), linf }
}

fn extrema(solver: &Solver, u: &[State]) -> (f64, f64) {
    u.iter().fold((f64::INFINITY, f64::INFINITY), |(r, t), s| {
        let q = primitive_unchecked(s, &solver.gas);
        (r.min(q.rho), t.min(q.t))
    })
}

fn history_row(solver: &Solver, u: &[State], step: usize, t: f64) -> HistoryRow {
    let tot = solver.totals(u);
    let (min_rho, min_t) = extrema(solver, u);
    HistoryRow {
        step,
        t,
        dt: 0.0,
        mass: tot[0],
        energy: tot[4],
        entropy: solver.integrate(|s| entropy_unchecked(s, &solver.gas), u),
        kinetic_energy: solver.integrate(|s| 0.5 * (s[1] * s[1] + s[2] * s[2] + s[3] * s[3]) / s[0], u),
        min_rho,
        min_t,
        max_sn: 0.0,
        limited: 0,
        min_theta: 1.0,
        retries: 0,
    }
}

pub fn build_solver(cfg: &CaseConfig) -> Result<(Solver, CaseSetup)> {
    let setup = cases::setup(cfg)?;
    let c = cfg.resolved();
    let opts = c.scheme_options(setup.mesh.num_elements())?;
    let solver = Solver::new(setup.mesh.clone(), c.p.expect("resolved"), setup.gas, opts, setup.boundary.clone())?;
    Ok((solver, setup))
}

/// Run one case to `t_final` (or `max_steps`). Step failures are reported in
/// the outcome rather than as errors so that baseline breakdowns can be recorded.
pub fn run_case(cfg: &CaseConfig, ro: &RunOptions) -> Result<RunOutcome> {
    let c = cfg.resolved();
    let (mut solver, setup) = build_solver(cfg)?;
    let t_final = c.t_final.expect("resolved");
    let max_steps = c.max_steps.unwrap_or(usize::MAX);
    let mut u = solver.project(|x| (setup.initial)(x));
    let tot0 = solver.totals(&u);
    let mut inflow = [0.0; 5];
    let mut t = 0.0;
    let mut steps = 0;
    let mut history = vec![history_row(&solver, &u, 0, 0.0)];
    let mut failure = None;
    let mut max_omt: f64 = 0.0;
    let mut positive = history[0].min_rho > 0.0 && history[0].min_t > 0.0;
    let case = c.case.name();
    let scheme = solver.opts.scheme.name();
    log::info!("event=start case={case} scheme={scheme} p={} elements={} t_final={t_final}", solver.p(), solver.num_elements());
    while t < t_final * (1.0 - 1e-12) && steps < max_steps {
        let dt = match stable_dt(&solver, &u, &c.step) {
            Ok(dt) => dt.min(t_final - t),
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        };
        match step_with_retry(&mut solver, &u, t, dt, &c.step) {
            Ok((v, rep)) => {
                u = v;
                t += rep.dt;
                if (t_final - t).abs() <= 1e-12 * t_final {
                    // Accumulated rounding of fixed steps.
                    t = t_final;
                }
                steps += 1;
                for k in 0..5 {
                    inflow[k] += rep.boundary_change[k];
                }
                max_omt = max_omt.max(1.0 - rep.min_theta);
                let (min_rho, min_t) = extrema(&solver, &u);
                positive &= min_rho > 0.0 && min_t > 0.0;
                log::info!(
                    "step={steps} t={t:.9e} dt={:.6e} min_rho={min_rho:.6e} min_T={min_t:.6e} max_sn={:.4} limited={} retries={}",
                    rep.dt,
                    rep.max_sn,
                    rep.limited,
                    rep.retries
                );
                let done = t >= t_final * (1.0 - 1e-12) || steps >= max_steps;
                if steps % c.output_every == 0 || done {
                    let mut row = history_row(&solver, &u, steps, t);
                    row.dt = rep.dt;
                    row.max_sn = rep.max_sn;
                    row.limited = rep.limited;
                    row.min_theta = rep.min_theta;
                    row.retries = rep.retries;
                    history.push(row);
                }
            }
            Err(e) => {
                log::warn!("event=failure case={case} scheme={scheme} t={t:.9e} cause=\"{e}\"");
                failure = Some(e.to_string());
                break;
            }
        }
    }
    let tot = solver.totals(&u);
    let drift = |k: usize| (tot[k] - tot0[k] - inflow[k]).abs() / tot0[k].abs().max(f64::MIN_POSITIVE);
    let (min_rho, min_t) = history.iter().fold((f64::INFINITY, f64::INFINITY), |(r, tt), h| (r.min(h.min_rho), tt.min(h.min_t)));
    let audit = Audit {
        positivity: positive,
        min_rho,
        min_t,
        mass_drift: drift(0),
        energy_drift: drift(4),
        conservation: drift(0) <= CONSERVATION_TOL && drift(4) <= CONSERVATION_TOL,
        completed: failure.is_none(),
    };
    let errors = setup.exact.as_ref().map(|ex| error_norms(&solver, &u, ex, t));
    log::info!(
        "event=end case={case} scheme={scheme} steps={steps} t={t:.9e} positivity={} mass_drift={:.3e} energy_drift={:.3e} completed={}",
        audit.positivity,
        audit.mass_drift,
        audit.energy_drift,
        audit.completed
    );
    let outcome = RunOutcome { config: c, steps, t, history, failure, errors, audit, max_one_minus_theta: max_omt, u };
    if let Some(dir) = &ro.out_dir {
        write_outputs(dir, &solver, &outcome, ro)?;
    }
    Ok(outcome)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

#[derive(Serialize)]
struct AvRow {
    element: usize,
    sensor: f64,
    mu_max: f64,
    mu_ad_max: f64,
    theta: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    case: &'a str,
    scheme: &'a str,
    seed: u64,
    steps: usize,
    t: f64,
    failure: Option<&'a str>,
    errors: Option<ErrorNorms>,
    audit: &'a Audit,
    max_one_minus_theta: f64,
    files: Vec<String>,
    config: &'a CaseConfig,
}

/// Row-major CSV dumps of `D`, `P` (diagonal matrix) and `Q`.
pub fn dump_operators(dir: &Path, p: usize) -> Result<Vec<String>> {
    let ops = crate::sbp::operators(p)?;
    let n = ops.n;
    let mut names = Vec::new();
    let pm: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { ops.p_diag[k / n] } else { 0.0 }).collect();
    for (tag, m) in [("D", &ops.d), ("P", &pm), ("Q", &ops.q)] {
        let name = format!("operators_p{p}_{tag}.csv");
        let mut w = csv_writer(&dir.join(&name))?;
        for i in 0..n {
            w.write_record((0..n).map(|j| format!("{:.16e}", m[i * n + j])))?;
        }
        w.flush()?;
        names.push(name);
    }
    Ok(names)
}

pub fn write_outputs(dir: &Path, solver: &Solver, out: &RunOutcome, ro: &RunOptions) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut files = vec!["history.csv".to_string()];
    let mut w = csv_writer(&dir.join("history.csv"))?;
    for row in &out.history {
        w.serialize(row)?;
    }
    w.flush()?;
    let npts = solver.npts();
    let ne = solver.num_elements();
    if ro.dump_av {
        let mut w = csv_writer(&dir.join("av_diagnostics.csv"))?;
        for e in 0..ne {
            w.serialize(AvRow {
                element: e,
                sensor: solver.sn[e],
                mu_max: solver.mu_max[e],
                mu_ad_max: solver.mu_ad_max[e],
                theta: solver.theta[e],
            })?;
        }
        w.flush()?;
        files.push("av_diagnostics.csv".into());
    }
    if ro.dump_operators {
        files.extend(dump_operators(dir, solver.p())?);
    }
    if out.config.vtk {
        let gas = &solver.gas;
        let prims: Vec<_> = out.u.iter().map(|s| primitive_unchecked(s, gas)).collect();
        let rho: Vec<f64> = prims.iter().map(|q| q.rho).collect();
        let p: Vec<f64> = prims.iter().map(|q| q.p).collect();
        let temp: Vec<f64> = prims.iter().map(|q| q.t).collect();
        let per_elem = |v: &[f64]| -> Vec<f64> { (0..ne * npts).map(|i| v[i / npts]).collect() };
        let sn = per_elem(&solver.sn);
        let theta = per_elem(&solver.theta);
        let mu = per_elem(&solver.mu_ad_max);
        let f = BufWriter::new(File::create(dir.join("solution.vtk"))?);
        write_vtk(
            f,
            &solver.elems,
            &solver.ops,
            &[("rho", &rho), ("p", &p), ("T", &temp), ("sensor", &sn), ("theta", &theta), ("mu_ad", &mu)],
        )?;
        files.push("solution.vtk".into());
    }
    files.push("manifest.json".into());
    let m = Manifest {
        schema_version: SCHEMA_VERSION,
        case: out.config.case.name(),
        scheme: out.config.scheme.unwrap_or(Scheme::Ppesad).name(),
        seed: out.config.seed,
        steps: out.steps,
        t: out.t,
        failure: out.failure.as_deref(),
        errors: out.errors,
        audit: &out.audit,
        max_one_minus_theta: out.max_one_minus_theta,
        files,
        config: &out.config,
    };
    let f = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(f, &m)?;
    Ok(())
}

/// Fail with a readable message when an outcome breaks its audit.
pub fn check_audit(out: &RunOutcome) -> Result<()> {
    if out.audit.passed() {
        return Ok(());
    }
    Err(Error::Contract(format!(
        "audit failed for {}: positivity={} conservation={} (mass {:.3e}, energy {:.3e}) completed={}{}",
        out.config.case.name(),
        out.audit.positivity,
        out.audit.conservation,
        out.audit.mass_drift,
        out.audit.energy_drift,
        out.audit.completed,
        out.failure.as_deref().map(|f| format!(": {f}")).unwrap_or_default()
    )))
}
