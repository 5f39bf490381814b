//! Viscous and Brenner-type dissipation in entropy variables.
//!
//! Every flux here is linear in the entropy-variable gradient `Theta`, with
//! `f_m = sum_j c_mj Theta_j` and an SPSD coefficient tensor. Physical
//! gradients are recovered from `Theta` as
//! `dV_i = T (Theta_{i+1} + V_i Theta_4)`, `dT = T^2 Theta_4` and
//! `d rho = U . Theta / R`.

use crate::error::{Error, Result};
use crate::flux::{log_mean, Flux};
use crate::mesh::{face_point, Element};
use crate::sbp::TensorOps;
use crate::thermo::{primitive_unchecked, Gas, State};

/// Gradient of the entropy variables in the three Cartesian directions.
pub type Grad = [[f64; 5]; 3];

/// Default Brenner mass-diffusion coefficient.
pub const C_RHO: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diffusivity {
    pub mu: f64,
    pub kappa: f64,
    /// Mass diffusivity, units of length^2 / time.
    pub sigma: f64,
}

impl Diffusivity {
    pub fn physical(gas: &Gas, t: f64) -> Diffusivity {
        Diffusivity { mu: gas.mu(t), kappa: gas.kappa(t), sigma: 0.0 }
    }

    /// Brenner coefficients: `sigma = c_rho mu / rho`, `kappa = c_T mu` with
    /// `c_T = c_rho c_P / gamma`.
    pub fn brenner(gas: &Gas, c_rho: f64, mu_ad: f64, rho: f64) -> Diffusivity {
        Diffusivity { mu: mu_ad, kappa: c_rho * gas.cp() / gas.gamma * mu_ad, sigma: c_rho * mu_ad / rho }
    }

    pub fn plus(self, o: Diffusivity) -> Diffusivity {
        Diffusivity { mu: self.mu + o.mu, kappa: self.kappa + o.kappa, sigma: self.sigma + o.sigma }
    }

    pub fn is_zero(&self) -> bool {
        self.mu == 0.0 && self.kappa == 0.0 && self.sigma == 0.0
    }
}

/// Cartesian dissipative fluxes `f_m`, m = 0..3, for the given gradient.
#[inline]
pub fn viscous_flux(u: &State, gas: &Gas, theta: &Grad, d: &Diffusivity) -> [Flux; 3] {
    let q = primitive_unchecked(u, gas);
    let t = q.t;
    let v = q.v;
    let mut dv = [[0.0; 3]; 3]; // dv[i][m] = d V_i / d x_m
    let mut dt = [0.0; 3];
    for m in 0..3 {
        let th = &theta[m];
        for i in 0..3 {
            dv[i][m] = t * (th[i + 1] + v[i] * th[4]);
        }
        dt[m] = t * t * th[4];
    }
    let div = dv[0][0] + dv[1][1] + dv[2][2];
    let mut out = [[0.0; 5]; 3];
    let e = u[4] / u[0];
    for m in 0..3 {
        let mut tau = [0.0; 3];
        for i in 0..3 {
            tau[i] = d.mu * (dv[i][m] + dv[m][i]);
        }
        tau[m] -= 2.0 / 3.0 * d.mu * div;
        let f = &mut out[m];
        f[1] = tau[0];
        f[2] = tau[1];
        f[3] = tau[2];
        f[4] = tau[0] * v[0] + tau[1] * v[1] + tau[2] * v[2] + d.kappa * dt[m];
        if d.sigma != 0.0 {
            let th = &theta[m];
            let drho = (u[0] * th[0] + u[1] * th[1] + u[2] * th[2] + u[3] * th[3] + u[4] * th[4]) / gas.r;
            let s = d.sigma * drho;
            f[0] += s;
            f[1] += s * v[0];
            f[2] += s * v[1];
            f[3] += s * v[2];
            f[4] += s * e;
        }
    }
    out
}

/// The full 15x15 coefficient tensor, row `5m + a`, column `5j + b`.
pub fn coeff_tensor(u: &State, gas: &Gas, d: &Diffusivity) -> [[f64; 15]; 15] {
    let mut c = [[0.0; 15]; 15];
    for j in 0..3 {
        for b in 0..5 {
            let mut th = [[0.0; 5]; 3];
            th[j][b] = 1.0;
            let f = viscous_flux(u, gas, &th, d);
            for m in 0..3 {
                for a in 0..5 {
                    c[5 * m + a][5 * j + b] = f[m][a];
                }
            }
        }
    }
    c
}

/// Contravariant flux `sum_m a_m f_m`.
#[inline]
pub fn contravariant(f: &[Flux; 3], a: &[f64; 3]) -> Flux {
    let mut o = [0.0; 5];
    for c in 0..5 {
        o[c] = a[0] * f[0][c] + a[1] * f[1][c] + a[2] * f[2][c];
    }
    o
}

/// Arithmetic average of primitive `(rho, V, T)` as a conservative state.
#[inline]
fn average_state(ua: &State, ub: &State, gas: &Gas) -> State {
    let a = primitive_unchecked(ua, gas);
    let b = primitive_unchecked(ub, gas);
    let v = [0.5 * (a.v[0] + b.v[0]), 0.5 * (a.v[1] + b.v[1]), 0.5 * (a.v[2] + b.v[2])];
    gas.conservative_t(0.5 * (a.rho + b.rho), v, 0.5 * (a.t + b.t))
}

/// Averaged `[1, V, E]` for which `(w_b - w_a) . [1, V, E] = R ln(rho_b / rho_a)`.
#[inline]
pub fn mass_diffusion_direction(ua: &State, ub: &State, gas: &Gas) -> [f64; 5] {
    let a = primitive_unchecked(ua, gas);
    let b = primitive_unchecked(ub, gas);
    let v = [0.5 * (a.v[0] + b.v[0]), 0.5 * (a.v[1] + b.v[1]), 0.5 * (a.v[2] + b.v[2])];
    let dv2 = (b.v[0] - a.v[0]).powi(2) + (b.v[1] - a.v[1]).powi(2) + (b.v[2] - a.v[2]).powi(2);
    let e = gas.cv() * a.t * b.t / log_mean(a.t, b.t) + 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
        - 0.125 * dv2;
    [1.0, v[0], v[1], v[2], e]
}

/// Two-point Brenner mass-diffusion flux at a flux point:
/// `|a| sigma (rho_b - rho_a) / dist [1, V, E]`.
#[inline]
pub fn low_order_mass_diffusion(ua: &State, ub: &State, metric: &[f64; 3], dist: f64, sigma: f64, gas: &Gas) -> Flux {
    if sigma == 0.0 || ua[0] == ub[0] {
        return [0.0; 5];
    }
    let area = (metric[0] * metric[0] + metric[1] * metric[1] + metric[2] * metric[2]).sqrt();
    let s = area * sigma * (ub[0] - ua[0]) / dist;
    let dir = mass_diffusion_direction(ua, ub, gas);
    [s * dir[0], s * dir[1], s * dir[2], s * dir[3], s * dir[4]]
}

/// Two-point first-order artificial dissipation: the viscous part with
/// viscosity `mu` projected on the flux-point normal, plus mass diffusion.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn low_order_ad_flux(
    ua: &State,
    ub: &State,
    wa: &[f64; 5],
    wb: &[f64; 5],
    metric: &[f64; 3],
    dist: f64,
    mu: f64,
    sigma: f64,
    c_rho: f64,
    gas: &Gas,
) -> Flux {
    let mut f = low_order_mass_diffusion(ua, ub, metric, dist, sigma, gas);
    if mu > 0.0 {
        let area = (metric[0] * metric[0] + metric[1] * metric[1] + metric[2] * metric[2]).sqrt();
        if area == 0.0 {
            return f;
        }
        let nh = [metric[0] / area, metric[1] / area, metric[2] / area];
        let g: [f64; 5] = std::array::from_fn(|c| (wb[c] - wa[c]) / dist);
        let theta: Grad = std::array::from_fn(|j| std::array::from_fn(|c| nh[j] * g[c]));
        let avg = average_state(ua, ub, gas);
        let mut d = Diffusivity::brenner(gas, c_rho, mu, avg[0]);
        d.sigma = 0.0;
        let fv = viscous_flux(&avg, gas, &theta, &d);
        let fn_ = contravariant(&fv, metric);
        for c in 0..5 {
            f[c] += fn_[c];
        }
    }
    f
}

/// Discrete entropy-variable gradient with one-sided interface penalties.
///
/// `traces[f][a + n b]` is the neighbour (or ghost) value of `w` at face
/// node `(a, b)` of face `f`. Penalties add `1/2 (w_nbr - w_own)` at every
/// face node, scaled by `P^-1` and the outward face metric.
pub fn ldg_gradient(ops: &TensorOps, elem: &Element, w: &[[f64; 5]], traces: &[Vec<[f64; 5]>; 6]) -> Result<Vec<Grad>> {
    let n = ops.n();
    let npts = ops.npts();
    if w.len() != npts || traces.iter().any(|t| t.len() != n * n) {
        return Err(Error::Contract("ldg_gradient: trace or field size mismatch".into()));
    }
    let base = &ops.base;
    // dw[l][pt] = D_l w
    let mut jt = vec![[[0.0; 5]; 3]; npts];
    let mut col = vec![[0.0; 5]; n];
    for l in 0..3 {
        let s = ops.stride(l);
        for line in 0..n * n {
            let start = ops.line_start(l, line);
            for (i, c) in col.iter_mut().enumerate() {
                *c = [0.0; 5];
                for j in 0..n {
                    let dij = base.d[i * n + j];
                    let wj = &w[start + j * s];
                    for k in 0..5 {
                        c[k] += dij * wj[k];
                    }
                }
            }
            for (i, c) in col.iter().enumerate() {
                let pt = start + i * s;
                let a = &elem.ahat[pt][l];
                for m in 0..3 {
                    for k in 0..5 {
                        jt[pt][m][k] += a[m] * c[k];
                    }
                }
            }
        }
    }
    for f in 0..6 {
        let l = f / 2;
        let side = f % 2;
        let end = if side == 0 { 0 } else { n - 1 };
        let sign = if side == 0 { -1.0 } else { 1.0 };
        let inv_p = 1.0 / base.p_diag[end];
        for b in 0..n {
            for a in 0..n {
                let pt = face_point(n, f, a, b);
                let nb = &traces[f][a + n * b];
                let am = elem.ahat[pt][l];
                for m in 0..3 {
                    let coef = sign * am[m] * inv_p * 0.5;
                    for k in 0..5 {
                        jt[pt][m][k] += coef * (nb[k] - w[pt][k]);
                    }
                }
            }
        }
    }
    for (pt, g) in jt.iter_mut().enumerate() {
        let inv_j = 1.0 / elem.jac[pt];
        for row in g.iter_mut() {
            for v in row.iter_mut() {
                *v *= inv_j;
            }
        }
    }
    Ok(jt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::entropy_vars_unchecked;

    fn sample_state(gas: &Gas) -> State {
        gas.conservative(1.3, [0.4, -0.2, 0.7], 0.9)
    }

    #[test]
    fn zero_gradient_gives_zero_flux() {
        let gas = Gas::new(1.4, 1.0, 0.72, Some(100.0), crate::thermo::ViscosityLaw::Constant).unwrap();
        let u = sample_state(&gas);
        let d = Diffusivity::physical(&gas, 1.0).plus(Diffusivity::brenner(&gas, C_RHO, 0.3, u[0]));
        let f = viscous_flux(&u, &gas, &[[0.0; 5]; 3], &d);
        assert!(f.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn coefficient_tensor_is_symmetric() {
        let gas = Gas::default();
        let u = sample_state(&gas);
        let d = Diffusivity { mu: 0.7, kappa: 1.1, sigma: 0.4 };
        let c = coeff_tensor(&u, &gas, &d);
        for i in 0..15 {
            for j in 0..15 {
                assert!((c[i][j] - c[j][i]).abs() < 1e-12 * (1.0 + c[i][j].abs()), "{i} {j}");
            }
        }
    }

    #[test]
    fn shear_stress_matches_analytic() {
        let gas = Gas::default();
        let (rho, v1, t) = (1.0, 0.5, 2.0);
        let u = gas.conservative_t(rho, [v1, 0.0, 0.0], t);
        // dV1/dx2 = 3 with T constant: Theta_2 = (dV1/dx2 / T) e_1.
        let mut th = [[0.0; 5]; 3];
        th[1][1] = 3.0 / t;
        let d = Diffusivity { mu: 0.1, kappa: 0.0, sigma: 0.0 };
        let f = viscous_flux(&u, &gas, &th, &d);
        assert!((f[1][1] - 0.3).abs() < 1e-14);
        assert!((f[0][2] - 0.3).abs() < 1e-14);
        assert!(f[0][1].abs() < 1e-14 && f[1][2].abs() < 1e-14);
        assert!((f[1][4] - 0.3 * v1).abs() < 1e-14);
    }

    #[test]
    fn mass_diffusion_direction_is_entropy_consistent() {
        let gas = Gas::default();
        let a = gas.conservative(1.0, [0.3, 0.1, -0.4], 1.0);
        let b = gas.conservative(0.4, [-0.2, 0.5, 0.2], 2.5);
        let wa = entropy_vars_unchecked(&a, &gas);
        let wb = entropy_vars_unchecked(&b, &gas);
        let dir = mass_diffusion_direction(&a, &b, &gas);
        let lhs: f64 = (0..5).map(|k| (wb[k] - wa[k]) * dir[k]).sum();
        let rhs = gas.r * (b[0] / a[0]).ln();
        assert!((lhs - rhs).abs() < 1e-12, "{lhs} {rhs}");
    }

    #[test]
    fn mass_diffusion_vanishes_for_equal_density_or_zero_sigma() {
        let gas = Gas::default();
        let a = gas.conservative(1.0, [0.3, 0.0, 0.0], 1.0);
        let b = gas.conservative(1.0, [0.0, 0.0, 0.0], 2.0);
        assert_eq!(low_order_mass_diffusion(&a, &b, &[1.0, 0.0, 0.0], 0.1, 1.0, &gas), [0.0; 5]);
        let c = gas.conservative(2.0, [0.0; 3], 2.0);
        assert_eq!(low_order_mass_diffusion(&a, &c, &[1.0, 0.0, 0.0], 0.1, 0.0, &gas), [0.0; 5]);
    }
}
