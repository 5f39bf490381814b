//! Entropy-residual shock sensor and artificial-viscosity construction.

use crate::mesh::{trilinear_weights, Element, Mesh};
use crate::sbp::TensorOps;
use crate::thermo::{entropy_unchecked, primitive_unchecked, Gas, State};

/// Default sensor activation threshold.
pub const SENSOR_THRESHOLD: f64 = 0.2;

/// Exponent `max(1, (p - 1) / (p - 1.5))`.
#[inline]
pub fn sensor_exponent(p: usize) -> f64 {
    let pf = p as f64;
    if p <= 1 {
        return 1.0;
    }
    1.0f64.max((pf - 1.0) / (pf - 1.5))
}

/// `(Sn0, Sn)` from the element maximum of the normalized residual.
pub fn sensor_from_residual(r_max: f64, p: usize, delta: f64) -> (f64, f64) {
    let sn0 = r_max.clamp(0.0, 1.0).powf(sensor_exponent(p));
    let sn = if sn0 >= SENSOR_THRESHOLD.max(delta) { sn0 } else { 0.0 };
    (sn0, sn)
}

/// Pointwise normalized entropy residual of the inviscid operator.
///
/// `rhs_inv` is `dU/dt` of the inviscid high-order operator. The residual
/// `w . dU/dt + div(S V)` vanishes to truncation error on smooth flow; it is
/// scaled by the element maximum of `(|S| + rho R / (gamma - 1)) (|V| + c) / h`.
pub fn entropy_residual(
    ops: &TensorOps,
    elem: &Element,
    u: &[State],
    w: &[[f64; 5]],
    rhs_inv: &[State],
    gas: &Gas,
    h: f64,
) -> Vec<f64> {
    let n = ops.n();
    let npts = ops.npts();
    let mut s = vec![0.0; npts];
    let mut fs = vec![[0.0; 3]; npts];
    let mut scale: f64 = 1e-30;
    for i in 0..npts {
        let q = primitive_unchecked(&u[i], gas);
        s[i] = entropy_unchecked(&u[i], gas);
        fs[i] = [s[i] * q.v[0], s[i] * q.v[1], s[i] * q.v[2]];
        let c = q.speed_of_sound(gas);
        let sc = (s[i].abs() + q.rho * gas.cv()) * (q.vnorm2().sqrt() + c) / h;
        scale = scale.max(sc);
    }
    let mut div = vec![0.0; npts];
    let d = &ops.base.d;
    for l in 0..3 {
        let st = ops.stride(l);
        for line in 0..n * n {
            let start = ops.line_start(l, line);
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    let pj = start + j * st;
                    let a = &elem.ahat[pj][l];
                    acc += d[i * n + j] * (a[0] * fs[pj][0] + a[1] * fs[pj][1] + a[2] * fs[pj][2]);
                }
                div[start + i * st] += acc;
            }
        }
    }
    (0..npts)
        .map(|i| {
            let wr: f64 = (0..5).map(|k| w[i][k] * rhs_inv[i][k]).sum();
            ((wr + div[i] / elem.jac[i]).abs() / scale).min(1.0)
        })
        .collect()
}

/// Jump measure `rho_avg |dV . nhat| + |dP| / c_avg` between two points.
#[inline]
pub fn pair_jump(ua: &State, ub: &State, nhat: &[f64; 3], gas: &Gas) -> f64 {
    let a = primitive_unchecked(ua, gas);
    let b = primitive_unchecked(ub, gas);
    let dvn = (b.v[0] - a.v[0]) * nhat[0] + (b.v[1] - a.v[1]) * nhat[1] + (b.v[2] - a.v[2]) * nhat[2];
    let c = 0.5 * (a.speed_of_sound(gas) + b.speed_of_sound(gas));
    0.5 * (a.rho + b.rho) * dvn.abs() + (b.p - a.p).abs() / c
}

#[inline]
pub fn unit_between(xa: &[f64; 3], xb: &[f64; 3]) -> [f64; 3] {
    let d = [xb[0] - xa[0], xb[1] - xa[1], xb[2] - xa[2]];
    let l = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if l == 0.0 {
        [0.0; 3]
    } else {
        [d[0] / l, d[1] / l, d[2] / l]
    }
}

/// Maximum pair jump along element lines.
pub fn element_max_jump(ops: &TensorOps, elem: &Element, u: &[State], gas: &Gas) -> f64 {
    let n = ops.n();
    let mut m: f64 = 0.0;
    for l in 0..3 {
        let st = ops.stride(l);
        for line in 0..n * n {
            let start = ops.line_start(l, line);
            for i in 1..n {
                let (pa, pb) = (start + (i - 1) * st, start + i * st);
                let nh = unit_between(&elem.nodes[pa], &elem.nodes[pb]);
                m = m.max(pair_jump(&u[pa], &u[pb], &nh, gas));
            }
        }
    }
    m
}

/// Per canonical vertex, the maximum over incident elements.
pub fn vertex_max(mesh: &Mesh, per_element: &[f64]) -> Vec<f64> {
    mesh.vertex_incidence
        .iter()
        .map(|els| els.iter().map(|&e| per_element[e]).fold(0.0, f64::max))
        .collect()
}

/// Canonical-vertex values of element `e`.
pub fn element_vertex_values(mesh: &Mesh, e: usize, vertex: &[f64]) -> [f64; 8] {
    std::array::from_fn(|v| vertex[mesh.vertex_class[mesh.hexes[e][v]]])
}

/// Tri-linear interpolation of 8 vertex values to the solution points.
pub fn interpolate_vertices(ops: &TensorOps, vals: &[f64; 8]) -> Vec<f64> {
    let n = ops.n();
    let x = &ops.base.nodes;
    let mut out = vec![0.0; ops.npts()];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let wts = trilinear_weights([x[i], x[j], x[k]]);
                out[i + n * (j + n * k)] = wts.iter().zip(vals).map(|(a, b)| a * b).sum();
            }
        }
    }
    out
}

/// First-order viscosity at flux points, per direction, laid out as
/// `line * (n + 1) + s`. Interior points average the excess of `mu` over
/// `mu_p` at the two neighbours; end points take the end-node excess.
pub fn flux_point_mu1(ops: &TensorOps, mu: &[f64], mu_p: &[f64]) -> [Vec<f64>; 3] {
    let n = ops.n();
    std::array::from_fn(|l| {
        let st = ops.stride(l);
        let mut out = vec![0.0; n * n * (n + 1)];
        for line in 0..n * n {
            let start = ops.line_start(l, line);
            let ex = |i: usize| {
                let p = start + i * st;
                (mu[p] - mu_p[p]).max(0.0)
            };
            let o = &mut out[line * (n + 1)..(line + 1) * (n + 1)];
            o[0] = ex(0);
            o[n] = ex(n - 1);
            for s in 1..n {
                o[s] = 0.5 * (ex(s - 1) + ex(s));
            }
        }
        out
    })
}

/// Surrogate for the minimum mass diffusion that keeps a first-order
/// forward-Euler density update positive: `1/2 max(|u_n| + c) dist`.
#[inline]
pub fn sigma_min(ua: &State, ub: &State, nhat: &[f64; 3], dist: f64, gas: &Gas) -> f64 {
    let speed = |u: &State| {
        let q = primitive_unchecked(u, gas);
        (q.v[0] * nhat[0] + q.v[1] * nhat[1] + q.v[2] * nhat[2]).abs() + q.speed_of_sound(gas)
    };
    0.5 * speed(ua).max(speed(ub)) * dist
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_values() {
        assert_eq!(sensor_exponent(1), 1.0);
        assert!((sensor_exponent(4) - 1.2).abs() < 1e-15);
        assert_eq!(sensor_exponent(3), 4.0 / 3.0);
    }

    #[test]
    fn sensor_branches() {
        assert_eq!(sensor_from_residual(0.0, 4, 0.0), (0.0, 0.0));
        assert_eq!(sensor_from_residual(1.0, 4, 0.0).1, 1.0);
        let (sn0, sn) = sensor_from_residual(0.5, 4, 0.0);
        assert!((sn0 - 0.5f64.powf(1.2)).abs() < 1e-15);
        assert_eq!(sn, sn0);
        assert_eq!(sensor_from_residual(0.1, 4, 0.0).1, 0.0);
    }

    #[test]
    fn contact_has_no_jump() {
        let gas = Gas::default();
        let a = gas.conservative(1.0, [0.5, 0.0, 0.0], 1.0);
        let b = gas.conservative(3.0, [0.5, 0.0, 0.0], 1.0);
        assert_eq!(pair_jump(&a, &b, &[1.0, 0.0, 0.0], &gas), 0.0);
    }
}
