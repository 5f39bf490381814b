//! Ideal-gas model, variable conversions and the entropy pair.
//!
//! Entropy convention: `s = R/(gamma-1) ln(P rho^-gamma)`, `S = -rho s`,
//! entropy flux `S V`, potential `psi_m = rho V_m R`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conservative variables `(rho, rho V1, rho V2, rho V3, rho E)`.
pub type State = [f64; 5];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViscosityLaw {
    Constant,
    Sutherland { t_ref: f64, s_const: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gas {
    pub gamma: f64,
    pub r: f64,
    pub pr: f64,
    /// `None` means inviscid.
    pub re: Option<f64>,
    pub law: ViscosityLaw,
}

impl Default for Gas {
    fn default() -> Self {
        Gas { gamma: 1.4, r: 1.0, pr: 0.72, re: None, law: ViscosityLaw::Constant }
    }
}

impl Gas {
    pub fn new(gamma: f64, r: f64, pr: f64, re: Option<f64>, law: ViscosityLaw) -> Result<Gas> {
        if !(gamma > 1.0) || !(r > 0.0) || !(pr > 0.0) || re.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::Config(format!(
                "invalid gas: gamma={gamma}, R={r}, Pr={pr}, Re={re:?}"
            )));
        }
        Ok(Gas { gamma, r, pr, re, law })
    }

    #[inline]
    pub fn cp(&self) -> f64 {
        self.gamma * self.r / (self.gamma - 1.0)
    }

    #[inline]
    pub fn cv(&self) -> f64 {
        self.r / (self.gamma - 1.0)
    }

    /// Nondimensional dynamic viscosity `mu(T)/Re`.
    pub fn mu(&self, t: f64) -> f64 {
        match self.re {
            None => 0.0,
            Some(re) => {
                let law = match self.law {
                    ViscosityLaw::Constant => 1.0,
                    ViscosityLaw::Sutherland { t_ref, s_const } => {
                        let tr = t / t_ref;
                        tr * tr.sqrt() * (1.0 + s_const) / (tr + s_const)
                    }
                };
                law / re
            }
        }
    }

    #[inline]
    pub fn kappa(&self, t: f64) -> f64 {
        self.mu(t) * self.cp() / self.pr
    }

    #[inline]
    pub fn is_viscous(&self) -> bool {
        self.re.is_some()
    }

    /// Conservative state from primitive `(rho, V, P)`.
    pub fn conservative(&self, rho: f64, v: [f64; 3], p: f64) -> State {
        let ke = 0.5 * rho * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        [rho, rho * v[0], rho * v[1], rho * v[2], p / (self.gamma - 1.0) + ke]
    }

    /// Conservative state from `(rho, V, T)`.
    pub fn conservative_t(&self, rho: f64, v: [f64; 3], t: f64) -> State {
        self.conservative(rho, v, rho * self.r * t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub v: [f64; 3],
    pub p: f64,
    pub t: f64,
    pub ie: f64,
    pub ke: f64,
    /// Specific total enthalpy.
    pub h: f64,
}

impl Primitive {
    #[inline]
    pub fn speed_of_sound(&self, gas: &Gas) -> f64 {
        (gas.gamma * self.p / self.rho).sqrt()
    }

    #[inline]
    pub fn vnorm2(&self) -> f64 {
        self.v[0] * self.v[0] + self.v[1] * self.v[1] + self.v[2] * self.v[2]
    }
}

/// Internal energy density `Et - |m|^2 / (2 rho)`.
#[inline]
pub fn internal_energy(u: &State) -> f64 {
    u[4] - 0.5 * (u[1] * u[1] + u[2] * u[2] + u[3] * u[3]) / u[0]
}

#[inline]
pub fn is_admissible(u: &State) -> bool {
    u[0] > 0.0 && internal_energy(u) > 0.0 && u.iter().all(|v| v.is_finite())
}

pub fn inadmissible(u: &State) -> Error {
    Error::Inadmissible { loc: None, rho: u[0], ie: internal_energy(u), state: *u }
}

#[inline]
pub fn check(u: &State) -> Result<()> {
    if is_admissible(u) {
        Ok(())
    } else {
        Err(inadmissible(u))
    }
}

pub fn primitive(u: &State, gas: &Gas) -> Result<Primitive> {
    check(u)?;
    Ok(primitive_unchecked(u, gas))
}

#[inline]
pub fn primitive_unchecked(u: &State, gas: &Gas) -> Primitive {
    let rho = u[0];
    let v = [u[1] / rho, u[2] / rho, u[3] / rho];
    let ke = 0.5 * (u[1] * v[0] + u[2] * v[1] + u[3] * v[2]);
    let ie = u[4] - ke;
    let p = (gas.gamma - 1.0) * ie;
    let t = p / (rho * gas.r);
    let h = (u[4] + p) / rho;
    Primitive { rho, v, p, t, ie, ke, h }
}

/// Entropy variables and potentials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyVars {
    pub w: [f64; 5],
    pub psi: [f64; 3],
}

/// Dimensionless `ln(P rho^-gamma)`.
#[inline]
fn log_entropy(rho: f64, p: f64, gamma: f64) -> f64 {
    p.ln() - gamma * rho.ln()
}

/// Mathematical entropy `S = -rho s`.
pub fn entropy(u: &State, gas: &Gas) -> Result<f64> {
    let q = primitive(u, gas)?;
    Ok(-q.rho * gas.cv() * log_entropy(q.rho, q.p, gas.gamma))
}

#[inline]
pub fn entropy_unchecked(u: &State, gas: &Gas) -> f64 {
    let q = primitive_unchecked(u, gas);
    -q.rho * gas.cv() * log_entropy(q.rho, q.p, gas.gamma)
}

#[inline]
pub fn entropy_vars_unchecked(u: &State, gas: &Gas) -> [f64; 5] {
    let q = primitive_unchecked(u, gas);
    let beta = 1.0 / q.t;
    let s = log_entropy(q.rho, q.p, gas.gamma);
    [
        gas.cv() * (gas.gamma - s) - 0.5 * q.vnorm2() * beta,
        q.v[0] * beta,
        q.v[1] * beta,
        q.v[2] * beta,
        -beta,
    ]
}

pub fn entropy_vars(u: &State, gas: &Gas) -> Result<EntropyVars> {
    check(u)?;
    let w = entropy_vars_unchecked(u, gas);
    let psi = [gas.r * u[1], gas.r * u[2], gas.r * u[3]];
    Ok(EntropyVars { w, psi })
}

/// Inverse of the entropy-variable map.
pub fn state_from_entropy_vars(w: &[f64; 5], gas: &Gas) -> Result<State> {
    if !(w[4] < 0.0) {
        return Err(Error::Contract("entropy variable w5 must be negative".into()));
    }
    let t = -1.0 / w[4];
    let v = [w[1] * t, w[2] * t, w[3] * t];
    let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let s = gas.gamma - (w[0] + 0.5 * v2 / t) / gas.cv();
    let rho = (((gas.r * t).ln() - s) / (gas.gamma - 1.0)).exp();
    Ok(gas.conservative_t(rho, v, t))
}

/// Lower bounds of the entropy Hessian in Cholesky form.
pub fn hessian_bounds(u: &State, gas: &Gas) -> Result<[f64; 5]> {
    let q = primitive(u, gas)?;
    let r = gas.r;
    let v2 = q.vnorm2();
    let g = gas.gamma;
    Ok([
        q.rho / r,
        (q.p + q.rho * q.v[0] * q.v[0]) / r,
        (q.p + q.rho * q.v[1] * q.v[1]) / r,
        (q.p + q.rho * q.v[2] * q.v[2]) / r,
        (q.p * q.p * g + q.p * q.rho * v2 * g + (0.5 * q.rho * v2).powi(2)) / (r * q.rho),
    ])
}

/// `dU/dw` evaluated at a state, analytic.
pub fn du_dw(u: &State, gas: &Gas) -> [[f64; 5]; 5] {
    let q = primitive_unchecked(u, gas);
    let (rho, p, r) = (q.rho, q.p, gas.r);
    let v = q.v;
    let e = u[4] / rho;
    let h = q.h;
    let mut a = [[0.0; 5]; 5];
    // Symmetric: first column is U / R, the rest from d(rho V)/dw and d(rho E)/dw.
    let col0 = [rho, rho * v[0], rho * v[1], rho * v[2], rho * e];
    for i in 0..5 {
        a[i][0] = col0[i] / r;
        a[0][i] = col0[i] / r;
    }
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { p } else { 0.0 };
            a[i + 1][j + 1] = (rho * v[i] * v[j] + delta) / r;
        }
        a[i + 1][4] = rho * v[i] * h / r;
        a[4][i + 1] = a[i + 1][4];
    }
    a[4][4] = (rho * h * h - gas.gamma * p * p / ((gas.gamma - 1.0) * rho)) / r;
    a
}
