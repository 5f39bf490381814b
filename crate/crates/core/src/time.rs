//! Strong-stability-preserving Runge-Kutta stepping with step retries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rhs::{Solver, StageReport};
use crate::thermo::{primitive_unchecked, State};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepControl {
    pub cfl: f64,
    /// Convective factor; `(p + 1)^2` when unset.
    pub conv_factor: Option<f64>,
    /// Diffusive factor; `(p + 1)^4` when unset.
    pub visc_factor: Option<f64>,
    /// Use this step instead of the adaptive bound.
    pub fixed_dt: Option<f64>,
    pub dt_min: f64,
    pub dt_max: f64,
    pub max_retries: usize,
    pub retry_factor: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl: 0.5,
            conv_factor: None,
            visc_factor: None,
            fixed_dt: None,
            dt_min: 1e-12,
            dt_max: f64::INFINITY,
            max_retries: 10,
            retry_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StepReport {
    pub dt: f64,
    /// Change of the conserved totals through physical boundaries.
    pub boundary_change: [f64; 5],
    pub retries: usize,
    pub max_sn: f64,
    pub limited: usize,
    pub min_theta: f64,
    pub passes: usize,
}

/// Bound for one point of size `h`: `cfl min(h / (lam cf), h^2 / (nu vf))`.
pub fn point_dt(h: f64, lam: f64, nu: f64, cfl: f64, cf: f64, vf: f64) -> f64 {
    let mut dt = h / (lam * cf);
    if nu > 0.0 {
        dt = dt.min(h * h / (nu * vf));
    }
    cfl * dt
}

/// Explicit step bound from the convective and diffusive spectra, with the
/// element edge length as `h`.
pub fn stable_dt(solver: &Solver, u: &[State], ctl: &StepControl) -> Result<f64> {
    if let Some(dt) = ctl.fixed_dt {
        return Ok(dt);
    }
    let gas = &solver.gas;
    let npts = solver.npts();
    let c_rho = solver.opts.c_rho;
    let p1 = solver.p() as f64 + 1.0;
    let cf = ctl.conv_factor.unwrap_or(p1 * p1);
    let vf = ctl.visc_factor.unwrap_or(p1.powi(4));
    let mut dt = f64::INFINITY;
    for (i, s) in u.iter().enumerate() {
        let e = i / npts;
        let q = primitive_unchecked(s, gas);
        let lam = q.vnorm2().sqrt() + q.speed_of_sound(gas);
        if !lam.is_finite() {
            return Err(Error::Contract(format!("nonfinite wave speed at element {e}")));
        }
        let nu = (gas.mu(q.t) * (4.0f64 / 3.0).max(gas.gamma / gas.pr)
            + solver.mu_ad_max[e] * (4.0f64 / 3.0).max(c_rho))
            / q.rho;
        dt = dt.min(point_dt(solver.elems[e].h_min, lam, nu, ctl.cfl, cf, vf));
    }
    Ok(dt.clamp(ctl.dt_min, ctl.dt_max))
}

/// `(1 - b) u + b v`, written so that `u == v` is reproduced exactly; the
/// rounded weights 1/3 and 2/3 would otherwise not sum to one.
fn combine(u: &[State], b: f64, v: &[State]) -> Vec<State> {
    u.iter().zip(v).map(|(x, y)| std::array::from_fn(|k| x[k] + b * (y[k] - x[k]))).collect()
}

fn merge(acc: &mut StepReport, s: &StageReport, weight: f64) {
    for k in 0..5 {
        acc.boundary_change[k] += weight * acc.dt * s.boundary_rate[k];
    }
    acc.max_sn = acc.max_sn.max(s.max_sn);
    acc.limited = acc.limited.max(s.limited);
    acc.min_theta = acc.min_theta.min(s.min_theta);
    acc.passes = acc.passes.max(s.passes);
}

/// Three-stage SSP-RK3 in Shu-Osher form; the limiter acts in every stage.
pub fn ssp_rk3(solver: &mut Solver, u: &[State], t: f64, dt: f64) -> Result<(Vec<State>, StepReport)> {
    let mut rep = StepReport { dt, min_theta: 1.0, ..Default::default() };
    let (u1, s) = solver.forward_euler(u, t, dt)?;
    merge(&mut rep, &s, 1.0 / 6.0);
    let (f2, s) = solver.forward_euler(&u1, t + dt, dt)?;
    merge(&mut rep, &s, 1.0 / 6.0);
    let u2 = combine(u, 0.25, &f2);
    let (f3, s) = solver.forward_euler(&u2, t + 0.5 * dt, dt)?;
    merge(&mut rep, &s, 2.0 / 3.0);
    Ok((combine(u, 2.0 / 3.0, &f3), rep))
}

/// One step, halving `dt` on failure up to `max_retries` times.
pub fn step_with_retry(
    solver: &mut Solver,
    u: &[State],
    t: f64,
    dt: f64,
    ctl: &StepControl,
) -> Result<(Vec<State>, StepReport)> {
    let theta0 = solver.theta.clone();
    let mut dt = dt;
    let mut last = None;
    for retry in 0..=ctl.max_retries {
        match ssp_rk3(solver, u, t, dt) {
            Ok((v, mut rep)) => {
                rep.retries = retry;
                return Ok((v, rep));
            }
            Err(err) => {
                log::warn!("event=retry t={t:.6e} dt={dt:.3e} retry={retry} cause=\"{err}\"");
                solver.theta.clone_from(&theta0);
                last = Some(err);
                dt *= ctl.retry_factor;
            }
        }
    }
    Err(Error::StepFailed { retries: ctl.max_retries, t, cause: Box::new(last.expect("at least one attempt")) })
}
