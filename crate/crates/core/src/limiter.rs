//! Element-wise positivity-preserving flux limiter.
//!
//! Along the mixing line `U(theta) = U1 + theta (Up - U1)` the limiter finds
//! the largest element-constant `theta` keeping density above `eps_rho` and
//! internal energy above `eps_ie` at every point.

use crate::error::{Error, Result};
use crate::thermo::{internal_energy, is_admissible, State};

/// Smallest admissible `aleph`.
pub const ALEPH_FLOOR: f64 = 1e-8;

/// `|P1 - P2| / (2 P_avg)`, the relative two-point pressure jump.
#[inline]
pub fn relative_pressure_jump(p1: f64, p2: f64) -> f64 {
    (p1 - p2).abs() / (p1 + p2)
}

/// `aleph = max(1e-8, Sn * max relative pressure jump)`.
#[inline]
pub fn aleph(sn: f64, max_jump: f64) -> f64 {
    ALEPH_FLOOR.max(sn * max_jump)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimiterBounds {
    pub eps_rho: Vec<f64>,
    pub eps_ie: Vec<f64>,
    pub aleph: f64,
}

/// Lower bounds as fractions `aleph` of the low-order solution.
pub fn compute_bounds(u1: &[State], aleph: f64) -> Result<LimiterBounds> {
    if !(aleph > 0.0 && aleph < 1.0) {
        return Err(Error::Limiter(format!("aleph {aleph} outside (0, 1)")));
    }
    let mut eps_rho = Vec::with_capacity(u1.len());
    let mut eps_ie = Vec::with_capacity(u1.len());
    for (i, u) in u1.iter().enumerate() {
        if !is_admissible(u) {
            return Err(crate::thermo::inadmissible(u).at(usize::MAX, i));
        }
        eps_rho.push(aleph * u[0]);
        eps_ie.push(aleph * internal_energy(u));
    }
    Ok(LimiterBounds { eps_rho, eps_ie, aleph })
}

#[inline]
fn mix(u1: &State, up: &State, theta: f64) -> State {
    std::array::from_fn(|k| u1[k] + theta * (up[k] - u1[k]))
}

/// Linear density limiter.
pub fn theta_rho(rho1: f64, rhop: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && rho1 > eps) {
        return Err(Error::Limiter(format!("density bound {eps} not below low-order density {rho1}")));
    }
    if rhop >= eps {
        return Ok(1.0);
    }
    let mut th = (rho1 - eps) / (rho1 - rhop);
    // Keep the mixed density on the admissible side after rounding.
    while th > 0.0 && rho1 + th * (rhop - rho1) < eps {
        th *= 1.0 - 1e-15;
    }
    Ok(th)
}

/// Internal-energy limiter on `[0, theta_rho]`.
pub fn theta_ie(u1: &State, up: &State, theta_rho: f64, eps: f64) -> Result<f64> {
    let ie1 = internal_energy(u1);
    if !(eps > 0.0 && ie1 > eps && u1[0] > 0.0) {
        return Err(Error::Limiter(format!("internal-energy bound {eps} not below low-order value {ie1}")));
    }
    let ie_at = |t: f64| internal_energy(&mix(u1, up, t));
    let ut = mix(u1, up, theta_rho);
    if ut[0] > 0.0 && internal_energy(&ut) >= eps {
        return Ok(theta_rho);
    }
    // rho(theta) (IE(theta) - eps) = a theta^2 + b theta + c
    let dr = up[0] - u1[0];
    let dm = [up[1] - u1[1], up[2] - u1[2], up[3] - u1[3]];
    let de = up[4] - u1[4];
    let m1dm = u1[1] * dm[0] + u1[2] * dm[1] + u1[3] * dm[2];
    let dm2 = dm[0] * dm[0] + dm[1] * dm[1] + dm[2] * dm[2];
    let a = dr * de - 0.5 * dm2;
    let b = u1[0] * de + dr * u1[4] - m1dm - eps * dr;
    let c = u1[0] * (ie1 - eps);
    let mut cand = Vec::with_capacity(2);
    if a.abs() <= 1e-300 {
        if b != 0.0 {
            cand.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let q = -0.5 * (b + b.signum() * disc.sqrt());
            if q != 0.0 {
                cand.push(q / a);
                cand.push(c / q);
            }
        }
    }
    let root = cand.into_iter().filter(|t| *t > 0.0 && *t < theta_rho).fold(f64::NAN, f64::min);
    let ok = |t: f64| {
        let ie = ie_at(t);
        t.is_finite() && ie >= eps && (ie - eps).abs() <= 1e-9 * eps.max(ie1 * 1e-3)
    };
    if ok(root) {
        return Ok(root);
    }
    let t = bisect_ie(u1, up, theta_rho, eps, 200);
    if t > 0.0 {
        Ok(t)
    } else {
        Err(Error::Limiter(format!("no internal-energy root in (0, {theta_rho})")))
    }
}

/// Feasible end of a bisection bracket for `IE(U(theta)) = eps` on `[0, hi]`.
pub fn bisect_ie(u1: &State, up: &State, hi: f64, eps: f64, iters: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, hi);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let u = mix(u1, up, mid);
        if u[0] > 0.0 && internal_energy(&u) >= eps {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    lo
}

/// Element limiter value `theta_f = min_i theta_ie_i`.
pub fn element_theta(u1: &[State], up: &[State], bounds: &LimiterBounds) -> Result<f64> {
    if u1.len() != up.len() || u1.len() != bounds.eps_rho.len() {
        return Err(Error::Contract("limiter arrays differ in length".into()));
    }
    let mut theta: f64 = 1.0;
    for i in 0..u1.len() {
        let tr = theta_rho(u1[i][0], up[i][0], bounds.eps_rho[i])?;
        let ti = theta_ie(&u1[i], &up[i], tr, bounds.eps_ie[i])?;
        theta = theta.min(ti);
    }
    Ok(theta)
}

/// Blend `U1 + theta (Up - U1)` pointwise.
pub fn apply(u1: &[State], up: &[State], theta: f64) -> Vec<State> {
    u1.iter().zip(up).map(|(a, b)| mix(a, b, theta)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_branch() {
        assert_eq!(aleph(0.0, 0.7), 1e-8);
        assert!((aleph(1.0, relative_pressure_jump(1.0, 3.0)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn density_limiter_cases() {
        assert_eq!(theta_rho(1.0, 1.0, 0.1).unwrap(), 1.0);
        assert_eq!(theta_rho(1.0, 0.1, 0.1).unwrap(), 1.0);
        let t = theta_rho(1.0, -0.5, 0.1).unwrap();
        assert!((t - 0.6).abs() < 1e-14);
        assert!(theta_rho(0.1, 0.5, 0.2).is_err());
    }

    #[test]
    fn no_limiting_for_healthy_prediction() {
        let u1 = [1.0, 0.0, 0.0, 0.0, 2.5];
        let up = [1.1, 0.1, 0.0, 0.0, 2.6];
        assert_eq!(theta_ie(&u1, &up, 1.0, 1e-3).unwrap(), 1.0);
    }
}
