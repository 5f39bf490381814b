use ppes_core::mesh::{build_box_mesh, BoxSpec};
use ppes_core::rhs::{Scheme, SchemeOptions, Solver, ThetaMode};
use ppes_core::thermo::{entropy_vars_unchecked, Gas, State, ViscosityLaw};

fn warped(k: usize, seed: u64) -> BoxSpec {
    let mut s = BoxSpec::periodic_cube(k, 0.0, 1.0);
    s.perturbation = 0.15;
    s.warp = 0.05;
    s.seed = seed;
    s
}

fn viscous_gas() -> Gas {
    Gas::new(1.4, 1.0, 0.72, Some(50.0), ViscosityLaw::Constant).unwrap()
}

fn smooth_state(gas: &Gas, x: &[f64; 3]) -> State {
    let tau = std::f64::consts::TAU;
    let s = (tau * x[0]).sin() * (tau * x[1]).cos() + 0.5 * (tau * x[2]).sin();
    gas.conservative(
        1.0 + 0.3 * s,
        [0.4 + 0.2 * (tau * x[1]).sin(), -0.3 * s, 0.2 * (tau * x[0]).cos()],
        1.0 + 0.25 * (tau * x[2]).cos(),
    )
}

fn solver(scheme: Scheme, gas: Gas, opts: SchemeOptions, p: usize) -> Solver {
    let mesh = build_box_mesh(&warped(2, 7)).unwrap();
    Solver::new(mesh, p, gas, SchemeOptions { scheme, ..opts }, None).unwrap()
}

fn max_abs(v: &[State]) -> f64 {
    v.iter().flat_map(|s| s.iter()).fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn freestream_is_preserved_with_random_limiter_and_viscosity() {
    let gas = viscous_gas();
    let opts = SchemeOptions { theta_mode: ThetaMode::RandomPerStage, random_ad: Some(0.05), seed: 3, ..Default::default() };
    for scheme in [Scheme::Essc, Scheme::Ppes, Scheme::Ppesad] {
        let mut s = solver(scheme, gas, opts.clone(), 3);
        let u0 = gas.conservative(1.2, [0.3, -0.2, 0.5], 0.9);
        let u = s.project(|_| u0);
        let (r, _) = s.rhs_essc(&u, 0.0).unwrap();
        assert!(max_abs(&r) < 1e-11, "{scheme:?}: {}", max_abs(&r));
        let (v, _) = s.forward_euler(&u, 0.0, 1e-2).unwrap();
        let err = v.iter().flat_map(|a| a.iter().zip(&u0).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max);
        assert!(err < 1e-12, "{scheme:?}: {err}");
    }
}

#[test]
fn blended_update_conserves_totals() {
    let gas = viscous_gas();
    let opts = SchemeOptions { theta_mode: ThetaMode::RandomPerStage, random_ad: Some(0.05), seed: 11, ..Default::default() };
    let mut s = solver(Scheme::Ppesad, gas, opts, 3);
    let u = s.project(|x| smooth_state(&gas, x));
    let t0 = s.totals(&u);
    let (v, _) = s.forward_euler(&u, 0.0, 1e-3).unwrap();
    let t1 = s.totals(&v);
    for k in 0..5 {
        assert!((t1[k] - t0[k]).abs() < 1e-13, "component {k}: {} vs {}", t1[k], t0[k]);
    }
}

fn entropy_rate(s: &mut Solver, u: &[State], theta: &[f64]) -> (f64, f64) {
    let n = s.npts();
    let limited = vec![false; s.num_elements()];
    let parts = s.rhs_parts(u, 0.0, &limited).unwrap();
    let r = parts.blend(theta, n).unwrap();
    let gas = s.gas;
    let mut rate = 0.0;
    let mut scale = 0.0;
    for (e, el) in s.elems.iter().enumerate() {
        for i in 0..n {
            let w = entropy_vars_unchecked(&u[e * n + i], &gas);
            let wt = s.ops.weights[i] * el.jac[i];
            let d: f64 = (0..5).map(|k| w[k] * r[e * n + i][k]).sum();
            rate += wt * d;
            scale += wt * (0..5).map(|k| (w[k] * r[e * n + i][k]).abs()).sum::<f64>();
        }
    }
    (rate, scale)
}

#[test]
fn entropy_conservative_mode_conserves_entropy() {
    let gas = Gas::default();
    let opts = SchemeOptions { ec_mode: true, ..Default::default() };
    let mut s = solver(Scheme::Ppes, gas, opts, 3);
    let u = s.project(|x| smooth_state(&gas, x));
    let theta: Vec<f64> = (0..s.num_elements()).map(|e| (e as f64 * 0.37).fract()).collect();
    let (rate, scale) = entropy_rate(&mut s, &u, &theta);
    assert!(rate.abs() < 1e-12 * scale.max(1.0), "{rate} (scale {scale})");
}

#[test]
fn dissipative_scheme_produces_entropy() {
    let gas = viscous_gas();
    let opts = SchemeOptions { random_ad: Some(0.05), seed: 5, ..Default::default() };
    let mut s = solver(Scheme::Ppesad, gas, opts, 3);
    let u = s.project(|x| smooth_state(&gas, x));
    let theta: Vec<f64> = (0..s.num_elements()).map(|e| (e as f64 * 0.61).fract()).collect();
    let (rate, scale) = entropy_rate(&mut s, &u, &theta);
    assert!(rate < -1e-6 * scale, "{rate}");
}
