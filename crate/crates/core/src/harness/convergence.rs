//! Grid-refinement studies with observed rates.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::config::CaseConfig;
use crate::harness::run::{run_case, RunOptions};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConvergenceRow {
    pub scheme: String,
    pub p: usize,
    pub k: usize,
    pub elements: usize,
    pub steps: usize,
    pub l2: f64,
    pub l2_rate: Option<f64>,
    pub linf: f64,
    pub linf_rate: Option<f64>,
    pub max_one_minus_theta: f64,
    pub completed: bool,
}

/// `ln(e_coarse / e_fine) / ln(k_fine / k_coarse)`.
pub fn observed_rate(e_coarse: f64, e_fine: f64, k_coarse: usize, k_fine: usize) -> f64 {
    (e_coarse / e_fine).ln() / (k_fine as f64 / k_coarse as f64).ln()
}

pub fn run_convergence(cfg: &CaseConfig, ro: &RunOptions) -> Result<Vec<ConvergenceRow>> {
    let base = cfg.resolved();
    if base.convergence.k_list.is_empty() || base.convergence.schemes.is_empty() {
        return Err(Error::Config("convergence study needs k_list and schemes".into()));
    }
    let mut rows = Vec::new();
    for &scheme in &base.convergence.schemes {
        let mut prev: Option<(usize, f64, f64)> = None;
        for &k in &base.convergence.k_list {
            let mut c = base.clone();
            c.scheme = Some(scheme);
            c.k = Some(k);
            c.vtk = false;
            let sub = ro.out_dir.as_ref().map(|d| d.join(format!("{}_k{k}", scheme.name().to_lowercase())));
            let out = run_case(&c, &RunOptions { out_dir: sub, ..ro.clone() })?;
            let err = out
                .errors
                .ok_or_else(|| Error::Config(format!("case {} has no exact solution", base.case.name())))?;
            let (l2_rate, linf_rate) = match prev {
                Some((kp, l2p, lip)) => (Some(observed_rate(l2p, err.l2, kp, k)), Some(observed_rate(lip, err.linf, kp, k))),
                None => (None, None),
            };
            log::info!(
                "event=convergence scheme={} k={k} l2={:.6e} linf={:.6e} l2_rate={}",
                scheme.name(),
                err.l2,
                err.linf,
                l2_rate.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into())
            );
            rows.push(ConvergenceRow {
                scheme: scheme.name().into(),
                p: out.config.p.expect("resolved"),
                k,
                elements: out.u.len() / (out.config.p.expect("resolved") + 1).pow(3),
                steps: out.steps,
                l2: err.l2,
                l2_rate,
                linf: err.linf,
                linf_rate,
                max_one_minus_theta: out.max_one_minus_theta,
                completed: out.audit.completed,
            });
            prev = Some((k, err.l2, err.linf));
        }
    }
    if let Some(dir) = &ro.out_dir {
        write_convergence(&dir.join("convergence.csv"), &rows)?;
    }
    Ok(rows)
}

pub fn write_convergence(path: &Path, rows: &[ConvergenceRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_of_exact_power_law() {
        let e = |k: usize| 3.0 * (k as f64).powi(-5);
        assert!((observed_rate(e(12), e(24), 12, 24) - 5.0).abs() < 1e-12);
        assert!((observed_rate(e(6), e(18), 6, 18) - 5.0).abs() < 1e-12);
    }
}
