//! Fixtures shared by the kernel benchmarks.

use ppes_core::mesh::{build_box_mesh, BoxSpec};
use ppes_core::rhs::{Scheme, SchemeOptions, Solver};
use ppes_core::thermo::{Gas, State, ViscosityLaw};

pub fn viscous_gas() -> Gas {
    Gas::new(1.4, 1.0, 0.72, Some(100.0), ViscosityLaw::Constant).expect("valid gas")
}

/// Smooth periodic flow on the unit cube.
pub fn smooth_state(gas: &Gas, x: &[f64; 3]) -> State {
    let tau = std::f64::consts::TAU;
    let s = (tau * x[0]).sin() * (tau * x[1]).cos();
    gas.conservative(1.0 + 0.2 * s, [0.5 + 0.1 * s, -0.2 * s, 0.1 * (tau * x[2]).cos()], 1.0 + 0.1 * (tau * x[2]).sin())
}

/// `k^3` curved periodic elements of order `p`.
pub fn periodic_solver(p: usize, k: usize, scheme: Scheme) -> (Solver, Vec<State>) {
    let mut spec = BoxSpec::periodic_cube(k, 0.0, 1.0);
    spec.perturbation = 0.1;
    spec.warp = 0.05;
    spec.seed = 1;
    let mesh = build_box_mesh(&spec).expect("valid mesh");
    let gas = viscous_gas();
    let s = Solver::new(mesh, p, gas, SchemeOptions { scheme, ..Default::default() }, None).expect("valid solver");
    let u = s.project(|x| smooth_state(&gas, x));
    (s, u)
}
