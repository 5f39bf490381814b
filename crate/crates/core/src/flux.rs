//! Inviscid fluxes: analytic Euler flux, entropy-conservative two-point flux,
//! entropy-dissipative Merriam-Roe-type flux and the telescoped volume flux.

use crate::error::{Error, Result};
use crate::sbp::OperatorSet;
use crate::thermo::{check, primitive_unchecked, Gas, State};

pub type Flux = [f64; 5];

/// Euler flux contracted with a (metric) direction vector `n`.
#[inline]
pub fn euler_flux_n_unchecked(u: &State, n: &[f64; 3], gas: &Gas) -> Flux {
    let q = primitive_unchecked(u, gas);
    let vn = q.v[0] * n[0] + q.v[1] * n[1] + q.v[2] * n[2];
    let mass = q.rho * vn;
    [
        mass,
        mass * q.v[0] + q.p * n[0],
        mass * q.v[1] + q.p * n[1],
        mass * q.v[2] + q.p * n[2],
        mass * q.h,
    ]
}

pub fn euler_flux_n(u: &State, n: &[f64; 3], gas: &Gas) -> Result<Flux> {
    check(u)?;
    Ok(euler_flux_n_unchecked(u, n, gas))
}

/// Cartesian Euler flux in direction `m` (1, 2 or 3).
pub fn euler_flux(u: &State, m: usize, gas: &Gas) -> Result<Flux> {
    euler_flux_n(u, &unit_axis(m)?, gas)
}

pub(crate) fn unit_axis(m: usize) -> Result<[f64; 3]> {
    match m {
        1 => Ok([1.0, 0.0, 0.0]),
        2 => Ok([0.0, 1.0, 0.0]),
        3 => Ok([0.0, 0.0, 1.0]),
        _ => Err(Error::Contract(format!("direction {m} not in 1..=3"))),
    }
}

/// Logarithmic mean `(a - b) / ln(a / b)` with a series branch near `a = b`.
#[inline]
pub fn log_mean(a: f64, b: f64) -> f64 {
    let x = (a - b) / b;
    if x.abs() < 1e-4 {
        let f = (a - b) / (a + b);
        let u = f * f;
        let g = 1.0 + u * (1.0 / 3.0 + u * (1.0 / 5.0 + u * (1.0 / 7.0 + u / 9.0)));
        0.5 * (a + b) / g
    } else {
        (a - b) / x.ln_1p()
    }
}

/// Pointwise quantities reused by the two-point fluxes.
#[derive(Debug, Clone, Copy, Default)]
pub struct EcPoint {
    pub rho: f64,
    pub v: [f64; 3],
    pub p: f64,
    /// `rho / (2 P)`.
    pub beta: f64,
}

impl EcPoint {
    #[inline]
    pub fn new(u: &State, gas: &Gas) -> EcPoint {
        let q = primitive_unchecked(u, gas);
        EcPoint { rho: q.rho, v: q.v, p: q.p, beta: 0.5 * q.rho / q.p }
    }
}

/// Entropy-conservative flux (Chandrashekar family) between two points.
#[inline]
pub fn ec_flux_pts(a: &EcPoint, b: &EcPoint, n: &[f64; 3], gamma: f64) -> Flux {
    let rho_ln = log_mean(a.rho, b.rho);
    let beta_ln = log_mean(a.beta, b.beta);
    let vm = [0.5 * (a.v[0] + b.v[0]), 0.5 * (a.v[1] + b.v[1]), 0.5 * (a.v[2] + b.v[2])];
    let v2m = 0.5
        * (a.v[0] * a.v[0] + a.v[1] * a.v[1] + a.v[2] * a.v[2] + b.v[0] * b.v[0] + b.v[1] * b.v[1] + b.v[2] * b.v[2]);
    let p_t = 0.5 * (a.rho + b.rho) / (a.beta + b.beta);
    let vn = vm[0] * n[0] + vm[1] * n[1] + vm[2] * n[2];
    let fr = rho_ln * vn;
    let f1 = p_t * n[0] + vm[0] * fr;
    let f2 = p_t * n[1] + vm[1] * fr;
    let f3 = p_t * n[2] + vm[2] * fr;
    let fe = (0.5 / ((gamma - 1.0) * beta_ln) - 0.5 * v2m) * fr + vm[0] * f1 + vm[1] * f2 + vm[2] * f3;
    [fr, f1, f2, f3, fe]
}

pub fn ec_flux_n(u1: &State, u2: &State, n: &[f64; 3], gas: &Gas) -> Result<Flux> {
    check(u1)?;
    check(u2)?;
    Ok(ec_flux_pts(&EcPoint::new(u1, gas), &EcPoint::new(u2, gas), n, gas.gamma))
}

/// Entropy-conservative flux in Cartesian direction `m` (1, 2 or 3).
pub fn ec_flux(u1: &State, u2: &State, gas: &Gas, m: usize) -> Result<Flux> {
    ec_flux_n(u1, u2, &unit_axis(m)?, gas)
}

/// Orthonormal tangents to the unit vector `nh`.
#[inline]
fn tangents(nh: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let ax = if nh[0].abs() <= nh[1].abs() && nh[0].abs() <= nh[2].abs() {
        [1.0, 0.0, 0.0]
    } else if nh[1].abs() <= nh[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let c = cross(nh, &ax);
    let len = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let t1 = [c[0] / len, c[1] / len, c[2] / len];
    (t1, cross(nh, &t1))
}

#[inline]
pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub const EIG_FLOOR: f64 = 1e-12;

/// Scaled eigensystem of the normal flux Jacobian at the arithmetic average
/// of two primitive states: rows of `r` are right eigenvectors, `scale` makes
/// `sum_k scale_k r_k r_k^T = dU/dw`, `lam` holds `|lambda|` for the unit normal.
pub struct RoeSystem {
    pub r: [[f64; 5]; 5],
    pub scale: [f64; 5],
    pub lam: [f64; 5],
    pub area: f64,
}

#[inline]
pub fn roe_system(a: &EcPoint, b: &EcPoint, n: &[f64; 3], gas: &Gas) -> RoeSystem {
    let g = gas.gamma;
    let area = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    let nh = if area > 0.0 { [n[0] / area, n[1] / area, n[2] / area] } else { [1.0, 0.0, 0.0] };
    let rho = 0.5 * (a.rho + b.rho);
    let v = [0.5 * (a.v[0] + b.v[0]), 0.5 * (a.v[1] + b.v[1]), 0.5 * (a.v[2] + b.v[2])];
    let p = 0.5 * (a.p + b.p);
    let c = (g * p / rho).sqrt();
    let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let h = g / (g - 1.0) * p / rho + 0.5 * v2;
    let vn = v[0] * nh[0] + v[1] * nh[1] + v[2] * nh[2];
    let (t1, t2) = tangents(&nh);
    let vt1 = v[0] * t1[0] + v[1] * t1[1] + v[2] * t1[2];
    let vt2 = v[0] * t2[0] + v[1] * t2[1] + v[2] * t2[2];
    let r = [
        [1.0, v[0] - c * nh[0], v[1] - c * nh[1], v[2] - c * nh[2], h - c * vn],
        [1.0, v[0], v[1], v[2], 0.5 * v2],
        [0.0, t1[0], t1[1], t1[2], vt1],
        [0.0, t2[0], t2[1], t2[2], vt2],
        [1.0, v[0] + c * nh[0], v[1] + c * nh[1], v[2] + c * nh[2], h + c * vn],
    ];
    let inv_r = 1.0 / gas.r;
    let scale = [
        rho / (2.0 * g) * inv_r,
        rho * (g - 1.0) / g * inv_r,
        p * inv_r,
        p * inv_r,
        rho / (2.0 * g) * inv_r,
    ];
    let lam = [
        (vn - c).abs().max(EIG_FLOOR),
        vn.abs().max(EIG_FLOOR),
        vn.abs().max(EIG_FLOOR),
        vn.abs().max(EIG_FLOOR),
        (vn + c).abs().max(EIG_FLOOR),
    ];
    RoeSystem { r, scale, lam, area }
}

/// Pressure or density ratio above which the scalar dissipation takes over.
pub const RATIO_LO: f64 = 2.0;
pub const RATIO_HI: f64 = 10.0;

/// Weight of the scalar dissipation for a pair: 0 for mild jumps, 1 for
/// strong ones, log-linear in between. Symmetric in the two points.
#[inline]
pub fn scalar_weight(a: &EcPoint, b: &EcPoint) -> f64 {
    let r = (a.p / b.p).max(b.p / a.p).max(a.rho / b.rho).max(b.rho / a.rho);
    if !(r > RATIO_LO) {
        return 0.0;
    }
    ((r.ln() - RATIO_LO.ln()) / (RATIO_HI.ln() - RATIO_LO.ln())).min(1.0)
}

#[inline]
fn conserved(a: &EcPoint, gamma: f64) -> State {
    let v2 = a.v[0] * a.v[0] + a.v[1] * a.v[1] + a.v[2] * a.v[2];
    [a.rho, a.rho * a.v[0], a.rho * a.v[1], a.rho * a.v[2], a.p / (gamma - 1.0) + 0.5 * a.rho * v2]
}

/// Entropy-scaled Roe dissipation `1/2 |n| R |Lambda| R^T dw`.
///
/// The linearization about the average state overshoots badly across
/// strong jumps, so it is blended with `1/2 |n| lambda_max (U_b - U_a)`
/// using [`scalar_weight`]. Both parts dissipate entropy.
#[inline]
pub fn roe_dissipation(a: &EcPoint, b: &EcPoint, dw: &[f64; 5], n: &[f64; 3], gas: &Gas) -> Flux {
    let sys = roe_system(a, b, n, gas);
    if sys.area == 0.0 {
        return [0.0; 5];
    }
    let alpha = scalar_weight(a, b);
    let mut out = [0.0; 5];
    if alpha < 1.0 {
        for k in 0..5 {
            let rk = &sys.r[k];
            let proj = rk[0] * dw[0] + rk[1] * dw[1] + rk[2] * dw[2] + rk[3] * dw[3] + rk[4] * dw[4];
            let coef = (1.0 - alpha) * 0.5 * sys.area * sys.lam[k] * sys.scale[k] * proj;
            for i in 0..5 {
                out[i] += coef * rk[i];
            }
        }
    }
    if alpha > 0.0 {
        let g = gas.gamma;
        let nh = [n[0] / sys.area, n[1] / sys.area, n[2] / sys.area];
        let speed = |q: &EcPoint| (q.v[0] * nh[0] + q.v[1] * nh[1] + q.v[2] * nh[2]).abs() + (g * q.p / q.rho).sqrt();
        let lmax = speed(a).max(speed(b));
        let (ua, ub) = (conserved(a, g), conserved(b, g));
        for i in 0..5 {
            out[i] += alpha * 0.5 * sys.area * lmax * (ub[i] - ua[i]);
        }
    }
    out
}

/// Merriam-Roe-type flux `f_EC - f_ED`; `dissipate = false` returns `f_EC`.
#[inline]
pub fn mr_flux_pts(
    a: &EcPoint,
    b: &EcPoint,
    wa: &[f64; 5],
    wb: &[f64; 5],
    n: &[f64; 3],
    gas: &Gas,
    dissipate: bool,
) -> Flux {
    let mut f = ec_flux_pts(a, b, n, gas.gamma);
    if dissipate {
        let dw = [wb[0] - wa[0], wb[1] - wa[1], wb[2] - wa[2], wb[3] - wa[3], wb[4] - wa[4]];
        let d = roe_dissipation(a, b, &dw, n, gas);
        for i in 0..5 {
            f[i] -= d[i];
        }
    }
    f
}

pub fn merriam_roe_flux(ul: &State, ur: &State, gas: &Gas, nhat: &[f64; 3]) -> Result<Flux> {
    check(ul)?;
    check(ur)?;
    if nhat.iter().all(|v| *v == 0.0) {
        return Err(Error::Contract("zero normal in Merriam-Roe flux".into()));
    }
    let wl = crate::thermo::entropy_vars_unchecked(ul, gas);
    let wr = crate::thermo::entropy_vars_unchecked(ur, gas);
    Ok(mr_flux_pts(&EcPoint::new(ul, gas), &EcPoint::new(ur, gas), &wl, &wr, nhat, gas, true))
}

/// Telescoped high-order flux on one line: `fbar` at the `n + 1` flux points.
/// Interior values come from the two-point reduction of `2 Q o F`, boundary
/// values from the consistent flux with the local metric.
pub fn telescoped_volume_flux(
    ops: &OperatorSet,
    states: &[State],
    metrics: &[[f64; 3]],
    gas: &Gas,
) -> Result<Vec<Flux>> {
    let n = ops.n;
    if states.len() != n || metrics.len() != n {
        return Err(Error::Contract("line length does not match operator size".into()));
    }
    for u in states {
        check(u)?;
    }
    let pts: Vec<EcPoint> = states.iter().map(|u| EcPoint::new(u, gas)).collect();
    let mut fbar = vec![[0.0; 5]; n + 1];
    let mut scratch = vec![[0.0; 5]; n * n];
    telescope_line(ops, &pts, metrics, gas.gamma, &mut scratch, &mut fbar);
    fbar[0] = euler_flux_n_unchecked(&states[0], &metrics[0], gas);
    fbar[n] = euler_flux_n_unchecked(&states[n - 1], &metrics[n - 1], gas);
    Ok(fbar)
}

/// Interior flux-point values of the telescoped flux (entries `1..n`).
/// `scratch` holds `n * n` fluxes; entries 0 and `n` of `fbar` are left as zero.
pub(crate) fn telescope_line(
    ops: &OperatorSet,
    pts: &[EcPoint],
    metrics: &[[f64; 3]],
    gamma: f64,
    scratch: &mut [Flux],
    fbar: &mut [Flux],
) {
    let n = ops.n;
    // scratch[a * n + b] = 2 q_ab f_S(U_a, U_b, avg metric), a < b.
    for a in 0..n {
        for b in (a + 1)..n {
            let q2 = 2.0 * ops.q[a * n + b];
            let m = [
                0.5 * (metrics[a][0] + metrics[b][0]),
                0.5 * (metrics[a][1] + metrics[b][1]),
                0.5 * (metrics[a][2] + metrics[b][2]),
            ];
            let f = ec_flux_pts(&pts[a], &pts[b], &m, gamma);
            scratch[a * n + b] = [q2 * f[0], q2 * f[1], q2 * f[2], q2 * f[3], q2 * f[4]];
        }
    }
    fbar[0] = [0.0; 5];
    fbar[n] = [0.0; 5];
    for s in 1..n {
        let mut acc = [0.0; 5];
        for a in 0..s {
            for b in s..n {
                let f = &scratch[a * n + b];
                for c in 0..5 {
                    acc[c] += f[c];
                }
            }
        }
        fbar[s] = acc;
    }
}

/// Flux-point metrics obtained by telescoping the averaged metric: the
/// values a constant state would produce through the high-order flux.
pub fn flux_point_metrics(ops: &OperatorSet, metrics: &[[f64; 3]]) -> Vec<[f64; 3]> {
    let n = ops.n;
    let mut out = vec![[0.0; 3]; n + 1];
    out[0] = metrics[0];
    out[n] = metrics[n - 1];
    for (s, o) in out.iter_mut().enumerate().take(n).skip(1) {
        let mut acc = [0.0; 3];
        for a in 0..s {
            for b in s..n {
                let q = ops.q[a * n + b];
                for c in 0..3 {
                    acc[c] += q * (metrics[a][c] + metrics[b][c]);
                }
            }
        }
        *o = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermo::{du_dw, entropy_vars};

    #[test]
    fn stagnant_flux_is_pressure() {
        let gas = Gas::default();
        let u = gas.conservative(1.0, [0.0; 3], 0.7);
        let f = euler_flux(&u, 1, &gas).unwrap();
        assert_eq!(f[0], 0.0);
        assert!((f[1] - 0.7).abs() < 1e-15);
        assert!(f[2] == 0.0 && f[3] == 0.0 && f[4] == 0.0);
    }

    #[test]
    fn moving_flux_values() {
        let gas = Gas::default();
        let u = gas.conservative(1.0, [2.0, 0.0, 0.0], 1.0);
        let f = euler_flux(&u, 1, &gas).unwrap();
        let h = (u[4] + 1.0) / 1.0;
        assert!((f[0] - 2.0).abs() < 1e-14 && (f[1] - 5.0).abs() < 1e-14);
        assert!((f[4] - 2.0 * h).abs() < 1e-13);
    }

    #[test]
    fn log_mean_branches_agree() {
        for &(a, b) in &[(1.0, 1.0 + 5e-5), (1.0, 1.0 + 2e-4), (3.0, 0.5)] {
            let exact = (a - b) / (a / b as f64).ln();
            let lm = log_mean(a, b);
            assert!(((lm - exact) / exact).abs() < 1e-10, "{a} {b} {lm} {exact}");
        }
        assert_eq!(log_mean(2.0, 2.0), 2.0);
    }

    #[test]
    fn ec_consistency() {
        let gas = Gas::default();
        let u = gas.conservative(1.3, [0.2, -0.4, 0.9], 2.1);
        let n = [0.3, -1.2, 0.7];
        let f = ec_flux_n(&u, &u, &n, &gas).unwrap();
        let e = euler_flux_n(&u, &n, &gas).unwrap();
        for i in 0..5 {
            assert!((f[i] - e[i]).abs() < 1e-13 * (1.0 + e[i].abs()));
        }
    }

    #[test]
    fn roe_scaling_matches_du_dw() {
        let gas = Gas::new(1.4, 0.7, 0.72, None, crate::thermo::ViscosityLaw::Constant).unwrap();
        let u = gas.conservative(1.7, [0.4, -0.3, 0.8], 2.3);
        let pt = EcPoint::new(&u, &gas);
        let a0 = du_dw(&u, &gas);
        let sys = roe_system(&pt, &pt, &[0.2, 0.9, -0.4], &gas);
        for i in 0..5 {
            for j in 0..5 {
                let v: f64 = (0..5).map(|k| sys.scale[k] * sys.r[k][i] * sys.r[k][j]).sum();
                assert!((v - a0[i][j]).abs() < 1e-12 * (1.0 + a0[i][j].abs()), "{i} {j} {v} {}", a0[i][j]);
            }
        }
    }

    #[test]
    fn du_dw_matches_finite_differences() {
        let gas = Gas::new(1.4, 0.7, 0.72, None, crate::thermo::ViscosityLaw::Constant).unwrap();
        let u = gas.conservative(1.7, [0.4, -0.3, 0.8], 2.3);
        let a0 = du_dw(&u, &gas);
        let w = entropy_vars(&u, &gas).unwrap().w;
        let eps = 1e-6;
        for j in 0..5 {
            let mut wp = w;
            let mut wm = w;
            wp[j] += eps;
            wm[j] -= eps;
            let up = crate::thermo::state_from_entropy_vars(&wp, &gas).unwrap();
            let um = crate::thermo::state_from_entropy_vars(&wm, &gas).unwrap();
            for i in 0..5 {
                let fd = (up[i] - um[i]) / (2.0 * eps);
                assert!((fd - a0[i][j]).abs() < 1e-6 * (1.0 + fd.abs()), "{i} {j} {fd} {}", a0[i][j]);
            }
        }
    }
}
