//! Acceptance criteria. Each criterion prints one `PASS` or `FAIL` line; the
//! binary exits non-zero when any of them fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ppes_core::flux::{ec_flux_n, ec_flux_pts, euler_flux_n, telescoped_volume_flux, EcPoint};
use ppes_core::harness::run::build_solver;
use ppes_core::harness::{run_case, run_convergence, CaseConfig, CaseId, ConvergenceRow, RunOptions, ThetaChoice};
use ppes_core::limiter::{bisect_ie, theta_ie, theta_rho};
use ppes_core::mesh::compute_metrics;
use ppes_core::rhs::{Scheme, Solver};
use ppes_core::sbp::{operators, TensorOps};
use ppes_core::thermo::{entropy_unchecked, entropy_vars_unchecked, internal_energy, Gas, State, ViscosityLaw};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ideal_gas() -> Gas {
    Gas::new(1.4, 1.0, 0.72, None, ViscosityLaw::Constant).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, gas: &Gas) -> State {
    let rho = 10f64.powf(rng.gen_range(-2.0..1.0));
    let p = 10f64.powf(rng.gen_range(-2.0..1.0));
    let v = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
    gas.conservative(rho, v, p)
}

fn sbp_algebra() -> Outcome {
    let (mut defect, mut mono, mut spacing) = (0f64, 0f64, 0f64);
    for p in 1..=8 {
        let ops = operators(p).map_err(|e| e.to_string())?;
        defect = defect.max(ops.sbp_defect());
        for deg in 0..=p {
            let f: Vec<f64> = ops.nodes.iter().map(|x| x.powi(deg as i32)).collect();
            let df = ops.differentiate(&f);
            for (x, d) in ops.nodes.iter().zip(&df) {
                let exact = if deg == 0 { 0.0 } else { deg as f64 * x.powi(deg as i32 - 1) };
                mono = mono.max((d - exact).abs());
            }
        }
        for i in 0..ops.n {
            spacing = spacing.max((ops.flux_nodes[i + 1] - ops.flux_nodes[i] - ops.p_diag[i]).abs());
        }
    }
    check(
        defect <= 1e-13 && mono <= 1e-10 && spacing <= 1e-14,
        format!("max|Q+Q^T-B|={defect:.2e} (1e-13) monomial={mono:.2e} (1e-10) spacing={spacing:.2e} (1e-14)"),
    )
}

fn tadmor() -> Outcome {
    let gas = ideal_gas();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0f64;
    for _ in 0..100_000 {
        let (a, b) = (random_state(&mut rng, &gas), random_state(&mut rng, &gas));
        let n = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let f = ec_flux_n(&a, &b, &n, &gas).map_err(|e| e.to_string())?;
        let (wa, wb) = (entropy_vars_unchecked(&a, &gas), entropy_vars_unchecked(&b, &gas));
        // psi = w . f(U) - S(U) (V . n)
        let psi = |u: &State, w: &[f64; 5]| {
            let fu = euler_flux_n(u, &n, &gas).unwrap();
            let vn = (u[1] * n[0] + u[2] * n[1] + u[3] * n[2]) / u[0];
            (0..5).map(|k| w[k] * fu[k]).sum::<f64>() - entropy_unchecked(u, &gas) * vn
        };
        let lhs: f64 = (0..5).map(|k| (wa[k] - wb[k]) * f[k]).sum();
        let rhs = psi(&a, &wa) - psi(&b, &wb);
        let scale: f64 = (0..5).map(|k| ((wa[k] - wb[k]) * f[k]).abs()).sum::<f64>().max(rhs.abs()).max(1e-300);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    check(worst <= 5e-13, format!("100000 pairs, max relative residual={worst:.2e} (5e-13)"))
}

fn freestream() -> Outcome {
    let cfg = CaseConfig { t_final: Some(1.0), vtk: false, ..CaseConfig::preset(CaseId::Freestream) };
    let out = run_case(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
    let linf = out.errors.map(|e| e.linf).unwrap_or(f64::NAN);
    check(
        out.audit.completed && linf <= 1e-11,
        format!("t={} steps={} Linf={linf:.2e} (1e-11) completed={}", out.t, out.steps, out.audit.completed),
    )
}

/// Total-entropy change at `t = 1`, integrated pointwise against the initial field.
fn vortex_entropy_drift(dt: f64) -> Result<f64, String> {
    let mut cfg = CaseConfig::preset(CaseId::IsentropicVortex);
    cfg.t_final = Some(1.0);
    cfg.vtk = false;
    cfg.output_every = usize::MAX;
    cfg.step.fixed_dt = Some(dt);
    let (s, setup) = build_solver(&cfg).map_err(|e| e.to_string())?;
    let u0 = s.project(|x| (setup.initial)(x));
    let out = run_case(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
    if !out.audit.completed || (out.t - 1.0).abs() > 1e-12 {
        return Err(format!("dt={dt:e} run stopped at t={} ({:?})", out.t, out.failure));
    }
    Ok(pointwise_change(&s, &u0, &out.u))
}

fn pointwise_change(s: &Solver, u0: &[State], u: &[State]) -> f64 {
    let npts = s.npts();
    let mut d = 0.0;
    for (e, el) in s.elems.iter().enumerate() {
        for i in 0..npts {
            let g = e * npts + i;
            d += s.ops.weights[i] * el.jac[i] * (entropy_unchecked(&u[g], &s.gas) - entropy_unchecked(&u0[g], &s.gas));
        }
    }
    d
}

fn entropy_conservation() -> Outcome {
    let dts = [4e-4, 2e-4, 1e-4];
    let mut drift = Vec::new();
    for dt in dts {
        drift.push(vortex_entropy_drift(dt)?);
    }
    let r1 = drift[0] / drift[1];
    let r2 = drift[1] / drift[2];
    let small = drift.iter().all(|d| d.abs() < 1e-9);
    let ratio_ok = [r1, r2].iter().all(|r| (r - 8.0).abs() <= 0.3 * 8.0);
    check(
        small && ratio_ok,
        format!(
            "drift(4e-4)={:.3e} drift(2e-4)={:.3e} drift(1e-4)={:.3e} (|.|<1e-9) ratios={r1:.2},{r2:.2} (8+-30%)",
            drift[0], drift[1], drift[2]
        ),
    )
}

fn conservation_under_limiting() -> Outcome {
    let mut worst = (0f64, 0f64);
    let mut detail = Vec::new();
    for (case, p, k) in [(CaseId::Tgv, 3, 3), (CaseId::IsentropicVortex, 3, 4)] {
        let mut cfg = CaseConfig::preset(case);
        cfg.p = Some(p);
        cfg.k = Some(k);
        cfg.theta = Some(ThetaChoice::RandomStage);
        cfg.t_final = Some(1e6);
        cfg.max_steps = Some(500);
        cfg.vtk = false;
        cfg.output_every = usize::MAX;
        let out = run_case(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
        if out.steps != 500 {
            return Err(format!("{} stopped after {} steps: {:?}", case.name(), out.steps, out.failure));
        }
        worst.0 = worst.0.max(out.audit.mass_drift);
        worst.1 = worst.1.max(out.audit.energy_drift);
        detail.push(format!("{}: mass={:.2e} energy={:.2e}", case.name(), out.audit.mass_drift, out.audit.energy_drift));
    }
    check(worst.0 <= 1e-11 && worst.1 <= 1e-11, format!("500 steps, random theta per stage; {} (1e-11)", detail.join(", ")))
}

fn convergence_rows() -> Result<Vec<ConvergenceRow>, String> {
    let mut cfg = CaseConfig::preset(CaseId::ViscousShock);
    cfg.vtk = false;
    cfg.output_every = usize::MAX;
    run_convergence(&cfg, &RunOptions::default()).map_err(|e| e.to_string())
}

fn convergence(rows: &[ConvergenceRow]) -> Outcome {
    let pick = |s: Scheme| rows.iter().filter(|r| r.scheme == s.name()).collect::<Vec<_>>();
    let (essc, ppesad) = (pick(Scheme::Essc), pick(Scheme::Ppesad));
    if essc.len() != 4 || ppesad.len() != 4 || rows.iter().any(|r| !r.completed) {
        return Err("refinement study incomplete".into());
    }
    let rate = ppesad[3].l2_rate.unwrap_or(f64::NAN);
    let rate_essc = essc[3].l2_rate.unwrap_or(f64::NAN);
    let agree = (2..4).all(|i| (essc[i].l2 - ppesad[i].l2).abs() <= 5e-4 * essc[i].l2);
    let table: Vec<String> = ppesad.iter().zip(&essc).map(|(a, b)| format!("K{}:{:.4e}/{:.4e}", a.k, a.l2, b.l2)).collect();
    check(
        rate >= 4.0 && rate_essc >= 4.0 && agree,
        format!(
            "final L2 rate PPESAD={rate:.2} ESSC={rate_essc:.2} (>=4.0); PPESAD/ESSC L2 {} (3 digits on two finest)",
            table.join(" ")
        ),
    )
}

fn positivity() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for case in [CaseId::Riemann1d, CaseId::ShockDiffractionCoarse] {
        for scheme in [Scheme::Ppesad, Scheme::Essc] {
            let mut cfg = CaseConfig::preset(case);
            cfg.scheme = Some(scheme);
            cfg.vtk = false;
            cfg.output_every = usize::MAX;
            let out = run_case(&cfg, &RunOptions::default()).map_err(|e| e.to_string())?;
            let a = &out.audit;
            if scheme == Scheme::Ppesad {
                ok &= a.completed && a.positivity;
            }
            let status = if a.completed { "completed".to_string() } else { format!("stopped at t={:.3e}", out.t) };
            lines.push(format!(
                "{} {}: {status} positive={} min_rho={:.2e} min_T={:.2e}",
                case.name(),
                scheme.name(),
                a.positivity,
                a.min_rho,
                a.min_t
            ));
        }
    }
    check(ok, lines.join("; "))
}

fn limiter_consistency(rows: &[ConvergenceRow]) -> Outcome {
    let p = rows.first().map(|r| r.p).unwrap_or(4) as f64;
    let active: Vec<&ConvergenceRow> =
        rows.iter().filter(|r| r.scheme == Scheme::Ppesad.name() && r.max_one_minus_theta > 0.0).collect();
    if active.len() < 3 {
        let all: Vec<String> = rows
            .iter()
            .filter(|r| r.scheme == Scheme::Ppesad.name())
            .map(|r| format!("K{}:{:.1e}", r.k, r.max_one_minus_theta))
            .collect();
        return Ok(format!(
            "limiting active on {} grid(s), passes vacuously; max(1-theta) {}",
            active.len(),
            all.join(" ")
        ));
    }
    // Least-squares slope of log(1 - theta) against log h, h = 1 / K.
    let xs: Vec<f64> = active.iter().map(|r| -(r.k as f64).ln()).collect();
    let ys: Vec<f64> = active.iter().map(|r| r.max_one_minus_theta.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    check(slope >= p - 1.5, format!("slope={slope:.2} (>= {}) on {} grids", p - 1.5, active.len()))
}

/// `[2 (Q o F) 1]_i` summed term by term, diagonal included, with the sum of
/// the absolute terms as the rounding scale.
fn literal_double_sum(p: usize, states: &[State], metrics: &[[f64; 3]], gas: &Gas) -> (Vec<[f64; 5]>, Vec<[f64; 5]>) {
    let ops = operators(p).unwrap();
    let n = ops.n;
    let pts: Vec<EcPoint> = states.iter().map(|u| EcPoint::new(u, gas)).collect();
    let mut out = vec![[0.0; 5]; n];
    let mut mag = vec![[0.0; 5]; n];
    for i in 0..n {
        for j in 0..n {
            let m = [0.5 * (metrics[i][0] + metrics[j][0]), 0.5 * (metrics[i][1] + metrics[j][1]), 0.5 * (metrics[i][2] + metrics[j][2])];
            let f = ec_flux_pts(&pts[i], &pts[j], &m, gas.gamma);
            for k in 0..5 {
                out[i][k] += 2.0 * ops.q_at(i, j) * f[k];
                mag[i][k] += (2.0 * ops.q_at(i, j) * f[k]).abs();
            }
        }
    }
    (out, mag)
}

fn oracle_telescoped() -> Result<f64, String> {
    let gas = ideal_gas();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0f64;
    for p in 1..=4 {
        let ops = operators(p).map_err(|e| e.to_string())?;
        for _ in 0..200 {
            let states: Vec<State> = (0..ops.n).map(|_| random_state(&mut rng, &gas)).collect();
            let metrics: Vec<[f64; 3]> =
                (0..ops.n).map(|_| [rng.gen_range(0.5..1.5), rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3)]).collect();
            let fbar = telescoped_volume_flux(&ops, &states, &metrics, &gas).map_err(|e| e.to_string())?;
            let (lit, mag) = literal_double_sum(p, &states, &metrics, &gas);
            for i in 0..ops.n {
                for k in 0..5 {
                    let d = fbar[i + 1][k] - fbar[i][k];
                    worst = worst.max((d - lit[i][k]).abs() / mag[i][k].max(1e-300));
                }
            }
        }
    }
    Ok(worst)
}

fn oracle_theta_ie() -> Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let gas = ideal_gas();
    let mut worst = 0f64;
    let mut cases = 0;
    while cases < 2000 {
        let u1 = random_state(&mut rng, &gas);
        let up: State = std::array::from_fn(|k| u1[k] + rng.gen_range(-2.0..2.0) * u1[k].abs().max(0.5));
        if up[0] <= 0.0 || internal_energy(&up) >= 0.0 {
            continue;
        }
        let eps = 0.1 * internal_energy(&u1);
        let tr = theta_rho(u1[0], up[0], 0.1 * u1[0]).map_err(|e| e.to_string())?;
        let t = theta_ie(&u1, &up, tr, eps).map_err(|e| e.to_string())?;
        let b = bisect_ie(&u1, &up, tr, eps, 200);
        worst = worst.max((t - b).abs());
        cases += 1;
    }
    Ok(worst)
}

/// Gradient on element 0 of a two-element periodic row of boxes, written out
/// with the 1-D operators directly.
fn oracle_ldg() -> Result<f64, String> {
    let p = 3;
    let ops = TensorOps::new(operators(p).map_err(|e| e.to_string())?);
    let base = operators(p).map_err(|e| e.to_string())?;
    let n = p + 1;
    let h = [0.7, 0.5, 0.4];
    let boxes = [[0.0, 0.0, 0.0], [h[0], 0.0, 0.0]];
    let elems: Vec<_> = boxes
        .iter()
        .enumerate()
        .map(|(id, lo)| {
            let v: [[f64; 3]; 8] = std::array::from_fn(|c| {
                [lo[0] + h[0] * (c & 1) as f64, lo[1] + h[1] * ((c >> 1) & 1) as f64, lo[2] + h[2] * ((c >> 2) & 1) as f64]
            });
            compute_metrics(id, &v, &ops)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let field = |x: &[f64; 3], e: usize| -> [f64; 5] {
        std::array::from_fn(|k| ((k + 1) as f64 * x[0] + 0.3 * x[1]).sin() * (0.7 * x[2]).cos() + 0.1 * e as f64 * k as f64)
    };
    let w: Vec<Vec<[f64; 5]>> = elems.iter().enumerate().map(|(e, el)| el.nodes.iter().map(|x| field(x, e)).collect()).collect();
    let at = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    // Neighbour traces of element 0: x-faces see element 1, the others are periodic onto themselves.
    let traces: [Vec<[f64; 5]>; 6] = std::array::from_fn(|f| {
        let mut t = vec![[0.0; 5]; n * n];
        for b in 0..n {
            for a in 0..n {
                t[a + n * b] = match f {
                    0 => w[1][at(n - 1, a, b)],
                    1 => w[1][at(0, a, b)],
                    2 => w[0][at(a, n - 1, b)],
                    3 => w[0][at(a, 0, b)],
                    4 => w[0][at(a, b, n - 1)],
                    _ => w[0][at(a, b, 0)],
                };
            }
        }
        t
    });
    let got = ppes_core::dissipation::ldg_gradient(&ops, &elems[0], &w[0], &traces).map_err(|e| e.to_string())?;
    let mut worst = 0f64;
    for kk in 0..n {
        for jj in 0..n {
            for ii in 0..n {
                let idx = [ii, jj, kk];
                let pt = at(ii, jj, kk);
                for m in 0..3 {
                    let line = |s: usize| {
                        let mut q = idx;
                        q[m] = s;
                        at(q[0], q[1], q[2])
                    };
                    let i = idx[m];
                    for c in 0..5 {
                        let mut g: f64 = (0..n).map(|s| base.d_at(i, s) * w[0][line(s)][c]).sum();
                        let (fa, fb) = match m {
                            0 => (jj + n * kk, jj + n * kk),
                            1 => (ii + n * kk, ii + n * kk),
                            _ => (ii + n * jj, ii + n * jj),
                        };
                        if i == 0 {
                            g -= 0.5 * (traces[2 * m][fa][c] - w[0][pt][c]) / base.p_diag[0];
                        }
                        if i == n - 1 {
                            g += 0.5 * (traces[2 * m + 1][fb][c] - w[0][pt][c]) / base.p_diag[n - 1];
                        }
                        g *= 2.0 / h[m];
                        worst = worst.max((got[pt][m][c] - g).abs());
                    }
                }
            }
        }
    }
    Ok(worst)
}

fn oracles() -> Outcome {
    let tel = oracle_telescoped()?;
    let th = oracle_theta_ie()?;
    let ldg = oracle_ldg()?;
    check(
        tel <= 1e-13 && th <= 1e-12 && ldg <= 1e-13,
        format!("telescoped vs double sum={tel:.2e} (1e-13) theta_ie vs bisection={th:.2e} (1e-12) ldg vs transcription={ldg:.2e} (1e-13)"),
    )
}

fn main() -> ExitCode {
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |name: &str| only.is_empty() || only.iter().any(|o| name.contains(o.as_str()));
    let mut rows: Option<Result<Vec<ConvergenceRow>, String>> = None;
    let mut shock_rows = || rows.get_or_insert_with(convergence_rows).clone();
    let criteria: Vec<(&str, Box<dyn FnMut() -> Outcome + '_>)> = vec![
        ("sbp_algebra", Box::new(sbp_algebra)),
        ("tadmor_condition", Box::new(tadmor)),
        ("freestream_preservation", Box::new(freestream)),
        ("entropy_conservation", Box::new(entropy_conservation)),
        ("conservation_under_limiting", Box::new(conservation_under_limiting)),
        ("positivity", Box::new(positivity)),
        ("oracle_equivalences", Box::new(oracles)),
    ];
    let mut failed = 0;
    let mut report = |name: &str, secs: f64, r: Outcome| {
        match r {
            Ok(d) => println!("PASS {name} [{secs:.1}s] {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s] {d}");
            }
        }
    };
    for (name, mut f) in criteria {
        if wanted(name) {
            let t0 = Instant::now();
            let r = f();
            report(name, t0.elapsed().as_secs_f64(), r);
        }
    }
    for name in ["convergence", "limiter_consistency"] {
        if wanted(name) {
            let t0 = Instant::now();
            let r = shock_rows().and_then(|rows| if name == "convergence" { convergence(&rows) } else { limiter_consistency(&rows) });
            report(name, t0.elapsed().as_secs_f64(), r);
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    }
}
