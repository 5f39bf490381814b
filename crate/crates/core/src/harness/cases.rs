//! Benchmark problems: meshes, initial data, boundary data and exact solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::harness::config::{CaseConfig, CaseId};
use crate::mesh::{build_box_mesh, Bc, BoxSpec, Mesh};
use crate::rhs::ExactFn;
use crate::thermo::{Gas, State};

pub type InitialFn = Arc<dyn Fn(&[f64; 3]) -> State + Send + Sync>;

pub struct CaseSetup {
    pub mesh: Mesh,
    pub gas: Gas,
    pub initial: InitialFn,
    pub exact: Option<ExactFn>,
    pub boundary: Option<ExactFn>,
    /// Open boundaries exist, so conservation is audited against boundary fluxes.
    pub open: bool,
}

/// Steady 1-D viscous shock at `Pr = 3/4` with constant viscosity, moving
/// into gas at rest.
///
/// With total enthalpy constant across the profile the momentum balance
/// reduces to `4/3 mu u' = m (gamma+1)/(2 gamma) (u - u_l)(u - u_r) / u`, whose
/// integral gives `x(u)` in closed form; `u(x)` is recovered by bisection.
#[derive(Debug, Clone, Copy)]
pub struct ViscousShock {
    pub gas: Gas,
    pub ul: f64,
    pub ur: f64,
    pub mass_flux: f64,
    pub enthalpy: f64,
    /// `8 gamma mu / (3 (gamma + 1) m)`, the profile length scale.
    pub width: f64,
    pub dir: [f64; 3],
}

impl ViscousShock {
    /// Upstream `rho = 1, T = 1, u = 1`, so `Ma = 1 / sqrt(gamma R)`.
    pub fn new(gas: &Gas, dir: [f64; 3]) -> Result<ViscousShock> {
        let g = gas.gamma;
        let ma2 = 1.0 / (g * gas.r);
        if ma2 <= 1.0 {
            return Err(Error::Config("viscous shock needs a supersonic upstream state".into()));
        }
        if gas.re.is_none() {
            return Err(Error::Config("viscous shock needs a Reynolds number".into()));
        }
        let mu = gas.mu(1.0);
        let ul = 1.0;
        let ur = ul * ((g - 1.0) * ma2 + 2.0) / ((g + 1.0) * ma2);
        let l = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
        Ok(ViscousShock {
            gas: *gas,
            ul,
            ur,
            mass_flux: 1.0,
            enthalpy: gas.cp() + 0.5,
            width: 8.0 * g * mu / (3.0 * (g + 1.0)),
            dir: [dir[0] / l, dir[1] / l, dir[2] / l],
        })
    }

    /// Position of velocity `u`, with the mean velocity at the origin.
    pub fn position(&self, u: f64) -> f64 {
        let d = 0.5 * (self.ul - self.ur);
        self.width / (self.ul - self.ur) * (self.ul * ((self.ul - u) / d).ln() - self.ur * ((u - self.ur) / d).ln())
    }

    /// Shock-frame velocity at distance `xi` from the centre.
    pub fn velocity(&self, xi: f64) -> Result<f64> {
        let (mut lo, mut hi) = (self.ur, self.ul);
        if !xi.is_finite() {
            return Err(Error::RootFind(format!("nonfinite position {xi}")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            // position() decreases with u.
            if self.position(mid) > xi {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * self.ul {
                break;
            }
        }
        let u = 0.5 * (lo + hi);
        if !(u > self.ur && u < self.ul) && (hi - lo) > 1e-12 {
            return Err(Error::RootFind(format!("viscous shock profile at {xi}")));
        }
        Ok(u)
    }

    pub fn state(&self, x: &[f64; 3], t: f64) -> Result<State> {
        let xi = x[0] * self.dir[0] + x[1] * self.dir[1] + x[2] * self.dir[2] + self.ul * t;
        let u = self.velocity(xi)?;
        let rho = self.mass_flux / u;
        let temp = (self.enthalpy - 0.5 * u * u) / self.gas.cp();
        let vl = u - self.ul;
        Ok(self.gas.conservative_t(rho, [vl * self.dir[0], vl * self.dir[1], vl * self.dir[2]], temp))
    }
}

/// Isentropic vortex advected with unit speed along x on a periodic square.
#[derive(Debug, Clone, Copy)]
pub struct Vortex {
    pub gas: Gas,
    /// Peak-swirl scale `beta / (2 pi)`.
    pub eps: f64,
    pub half_width: f64,
}

impl Vortex {
    pub fn state(&self, x: &[f64; 3], t: f64) -> State {
        let l = 2.0 * self.half_width;
        let wrap = |d: f64| d - l * (d / l).round();
        let dx = wrap(x[0] - t);
        let dy = wrap(x[1]);
        let f = (0.5 * (1.0 - dx * dx - dy * dy)).exp();
        let temp = 1.0 - self.eps * self.eps * f * f / (2.0 * self.gas.cp());
        let rho = temp.powf(1.0 / (self.gas.gamma - 1.0));
        self.gas.conservative_t(rho, [1.0 - self.eps * dy * f, self.eps * dx * f, 0.0], temp)
    }
}

/// Post-shock state behind a normal shock of Mach `ms` moving in +x into
/// gas `(rho, p)` at rest.
pub fn post_shock(gas: &Gas, rho: f64, p: f64, ms: f64) -> State {
    let g = gas.gamma;
    let c = (g * p / rho).sqrt();
    let m2 = ms * ms;
    let rho2 = rho * (g + 1.0) * m2 / ((g - 1.0) * m2 + 2.0);
    let p2 = p * (2.0 * g * m2 - (g - 1.0)) / (g + 1.0);
    let u2 = 2.0 * c * (m2 - 1.0) / ((g + 1.0) * ms);
    gas.conservative(rho2, [u2, 0.0, 0.0], p2)
}

fn box_spec(k: [usize; 3], lo: [f64; 3], hi: [f64; 3], bc: [[Bc; 2]; 3], cfg: &CaseConfig) -> BoxSpec {
    BoxSpec {
        k,
        lo,
        hi,
        bc,
        perturbation: cfg.perturbation.expect("resolved"),
        warp: cfg.warp.expect("resolved"),
        seed: cfg.seed,
    }
}

const PER: [Bc; 2] = [Bc::Periodic; 2];

pub fn setup(cfg: &CaseConfig) -> Result<CaseSetup> {
    cfg.validate()?;
    let c = cfg.resolved();
    let gas = c.gas()?;
    let k = c.k.expect("resolved");
    let q = &c.params;
    match c.case {
        CaseId::ViscousShock => {
            let dims = q.dims.expect("resolved");
            let hw = q.half_width.expect("resolved");
            let (spec, dir) = if dims == 1 {
                let h = 2.0 * hw / k as f64;
                let spec = box_spec(
                    [k, 1, 1],
                    [-hw, 0.0, 0.0],
                    [hw, h, h],
                    [[Bc::Dirichlet; 2], PER, PER],
                    &c,
                );
                (spec, [1.0, 0.0, 0.0])
            } else {
                let spec = box_spec([k; 3], [-hw; 3], [hw; 3], [[Bc::Dirichlet; 2]; 3], &c);
                (spec, [1.0, 1.0, 1.0])
            };
            let shock = ViscousShock::new(&gas, dir)?;
            // Probe once so root-finding failures surface as errors here.
            shock.state(&[0.0; 3], 0.0)?;
            let exact: ExactFn = Arc::new(move |x, t| shock.state(x, t).expect("profile root checked in range"));
            let e0 = exact.clone();
            Ok(CaseSetup {
                mesh: build_box_mesh(&spec)?,
                gas,
                initial: Arc::new(move |x| e0(x, 0.0)),
                exact: Some(exact.clone()),
                boundary: Some(exact),
                open: true,
            })
        }
        CaseId::IsentropicVortex => {
            let hw = q.half_width.expect("resolved");
            let h = 2.0 * hw / k as f64;
            let spec = box_spec([k, k, 1], [-hw, -hw, 0.0], [hw, hw, h], [PER; 3], &c);
            let v = Vortex { gas, eps: q.strength.expect("resolved") / (2.0 * PI), half_width: hw };
            let exact: ExactFn = Arc::new(move |x, t| v.state(x, t));
            Ok(CaseSetup {
                mesh: build_box_mesh(&spec)?,
                gas,
                initial: Arc::new(move |x| v.state(x, 0.0)),
                exact: Some(exact),
                boundary: None,
                open: false,
            })
        }
        CaseId::Freestream => {
            let spec = box_spec([k; 3], [0.0; 3], [1.0; 3], [[Bc::Dirichlet; 2], [Bc::Dirichlet; 2], PER], &c);
            let a = 10f64.to_radians();
            let u0 = gas.conservative_t(1.0, [a.cos(), a.sin(), 0.0], 1.0);
            let exact: ExactFn = Arc::new(move |_, _| u0);
            Ok(CaseSetup {
                mesh: build_box_mesh(&spec)?,
                gas,
                initial: Arc::new(move |_| u0),
                exact: Some(exact.clone()),
                boundary: Some(exact),
                open: true,
            })
        }
        CaseId::Tgv => {
            let spec = box_spec([k; 3], [0.0; 3], [2.0 * PI; 3], [PER; 3], &c);
            let g = gas;
            Ok(CaseSetup {
                mesh: build_box_mesh(&spec)?,
                gas,
                initial: Arc::new(move |x| tgv_state(&g, x)),
                exact: None,
                boundary: None,
                open: false,
            })
        }
        CaseId::Riemann1d => {
            let h = 1.0 / k as f64;
            let spec = box_spec([k, 1, 1], [0.0; 3], [1.0, h, h], [[Bc::Outflow; 2], PER, PER], &c);
            let l = q.left.expect("resolved");
            let r = q.right.expect("resolved");
            let ul = gas.conservative(l[0], [l[1], 0.0, 0.0], l[2]);
            let ur = gas.conservative(r[0], [r[1], 0.0, 0.0], r[2]);
            Ok(CaseSetup {
                mesh: build_box_mesh(&spec)?,
                gas,
                initial: Arc::new(move |x| if x[0] < 0.5 { ul } else { ur }),
                exact: None,
                boundary: None,
                open: true,
            })
        }
        CaseId::ShockDiffractionCoarse => {
            let h = 1.0 / k as f64;
            let spec = box_spec(
                [k, k, 1],
                [0.0; 3],
                [1.0, 1.0, h],
                [[Bc::Dirichlet, Bc::Outflow], [Bc::Outflow, Bc::SlipWall], PER],
                &c,
            );
            let mut mesh = build_box_mesh(&spec)?;
            let ks = k / 4;
            let js = k / 2;
            mesh.remove_elements(|e| (e % k) < ks && ((e / k) % k) < js, Bc::SlipWall);
            let pre = gas.conservative(1.4, [0.0; 3], 1.0);
            let post = post_shock(&gas, 1.4, 1.0, q.shock_mach.expect("resolved"));
            let x_shock = 0.5 * ks as f64 * h;
            let bnd: ExactFn = Arc::new(move |_, _| post);
            Ok(CaseSetup {
                mesh,
                gas,
                initial: Arc::new(move |x| if x[0] < x_shock { post } else { pre }),
                exact: None,
                boundary: Some(bnd),
                open: true,
            })
        }
    }
}

pub fn tgv_state(gas: &Gas, x: &[f64; 3]) -> State {
    let (sx, cx) = x[0].sin_cos();
    let (sy, cy) = x[1].sin_cos();
    let cz = x[2].cos();
    let rho = 1.0 + ((2.0 * x[0]).cos() + (2.0 * x[1]).cos()) * ((2.0 * x[2]).cos() + 2.0) / 16.0;
    gas.conservative_t(rho, [sx * cy * cz, -cx * sy * cz, 0.0], 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::primitive;

    fn shock_gas() -> Gas {
        Gas::new(1.4, 1.0 / (1.4 * 6.25), 0.75, Some(50.0), crate::thermo::ViscosityLaw::Constant).unwrap()
    }

    #[test]
    fn viscous_shock_far_field_matches_rankine_hugoniot() {
        let gas = shock_gas();
        let s = ViscousShock::new(&gas, [1.0, 0.0, 0.0]).unwrap();
        // Normal-shock relations at Ma 2.5, gamma 1.4.
        let m2 = 6.25;
        let rho_ratio = 2.4 * m2 / (0.4 * m2 + 2.0);
        let p_ratio = (2.8 * m2 - 0.4) / 2.4;
        let up = primitive(&s.state(&[-5.0, 0.0, 0.0], 0.0).unwrap(), &gas).unwrap();
        let dn = primitive(&s.state(&[5.0, 0.0, 0.0], 0.0).unwrap(), &gas).unwrap();
        assert!((up.rho - 1.0).abs() < 1e-10 && up.v[0].abs() < 1e-10 && (up.t - 1.0).abs() < 1e-10);
        assert!((dn.rho - rho_ratio).abs() < 1e-9, "{}", dn.rho);
        assert!((dn.p / up.p - p_ratio).abs() < 1e-8, "{}", dn.p / up.p);
    }

    #[test]
    fn viscous_shock_centre_is_mean_velocity() {
        let s = ViscousShock::new(&shock_gas(), [1.0, 0.0, 0.0]).unwrap();
        let u = s.velocity(0.0).unwrap();
        assert!((u - 0.5 * (s.ul + s.ur)).abs() < 1e-13);
        for xi in [-0.1, -0.05, 0.02, 0.08] {
            let u = s.velocity(xi).unwrap();
            assert!((s.position(u) - xi).abs() < 1e-10);
        }
    }

    #[test]
    fn viscous_shock_satisfies_its_ode() {
        // Finite-difference check of 4/3 mu u' = m (g+1)/(2g)(u-ul)(u-ur)/u.
        let gas = shock_gas();
        let s = ViscousShock::new(&gas, [1.0, 0.0, 0.0]).unwrap();
        let g = gas.gamma;
        for xi in [-0.04, 0.0, 0.03] {
            let h = 1e-5;
            let du = (s.velocity(xi + h).unwrap() - s.velocity(xi - h).unwrap()) / (2.0 * h);
            let u = s.velocity(xi).unwrap();
            let rhs = (g + 1.0) / (2.0 * g) * (u - s.ul) * (u - s.ur) / u;
            assert!((4.0 / 3.0 * gas.mu(1.0) * du - rhs).abs() < 1e-7, "{xi}");
        }
    }

    #[test]
    fn vortex_is_isentropic_and_in_radial_balance() {
        let gas = Gas { r: 1.0 / (1.4 * 0.09), ..Gas::default() };
        let v = Vortex { gas, eps: 5.0 / (2.0 * PI), half_width: 5.0 };
        let k = |x: f64, y: f64| {
            let q = primitive(&v.state(&[x, y, 0.0], 0.0), &gas).unwrap();
            q.p / q.rho.powf(gas.gamma)
        };
        let k0 = k(4.9, 4.9);
        assert!((k(0.3, -0.7) - k0).abs() < 1e-12 * k0);
        // dp/dr = rho v_theta^2 / r at r = 1 on the x axis.
        let h = 1e-5;
        let p = |x: f64| primitive(&v.state(&[x, 0.0, 0.0], 0.0), &gas).unwrap();
        let dp = (p(1.0 + h).p - p(1.0 - h).p) / (2.0 * h);
        let q = p(1.0);
        assert!((dp - q.rho * q.v[1] * q.v[1]).abs() < 1e-7, "{dp}");
    }

    #[test]
    fn post_shock_conserves_fluxes() {
        let gas = Gas::default();
        let ms = 10.0;
        let post = primitive(&post_shock(&gas, 1.4, 1.0, ms), &gas).unwrap();
        let s = ms * (1.4f64 * 1.0 / 1.4).sqrt();
        // Shock-frame mass and momentum fluxes.
        let (r1, u1, p1) = (1.4, -s, 1.0);
        let (r2, u2, p2) = (post.rho, post.v[0] - s, post.p);
        assert!((r1 * u1 - r2 * u2).abs() < 1e-10);
        assert!((r1 * u1 * u1 + p1 - r2 * u2 * u2 - p2).abs() < 1e-8);
    }
}
