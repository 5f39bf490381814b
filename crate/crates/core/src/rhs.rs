//! Semi-discrete operators and the conservative flux-limited update.
//!
//! Every face is evaluated once, by its owner, and the neighbour reads the
//! negated value, so interface fluxes are shared bit for bit and the blend
//! `theta rhs_p + (1 - theta) rhs_1 + rhs_AD` stays conservative for any
//! per-element `theta`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dissipation::{contravariant, ldg_gradient, low_order_ad_flux, low_order_mass_diffusion, viscous_flux, Diffusivity, C_RHO};
use crate::error::{Error, Result};
use crate::flux::{mr_flux_pts, telescope_line, EcPoint, Flux};
use crate::limiter;
use crate::mesh::{compute_all, face_point, trilinear_weights, Bc, Element, FaceLink, Mesh};
use crate::sbp::{operators, TensorOps};
use crate::sensor;
use crate::thermo::{entropy_vars_unchecked, inadmissible, is_admissible, primitive_unchecked, Gas, State};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    Essc,
    Ppes,
    Ppesad,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Essc => "ESSC",
            Scheme::Ppes => "PPES",
            Scheme::Ppesad => "PPESAD",
        }
    }
}

/// Source of the element limiter values.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaMode {
    Limiter,
    /// Fixed per-element values.
    Fixed(Vec<f64>),
    /// Fresh uniform values in `[0, 1]` every stage.
    RandomPerStage,
}

#[derive(Debug, Clone)]
pub struct SchemeOptions {
    pub scheme: Scheme,
    /// Drop every dissipative two-point term (interfaces, low-order fluxes,
    /// density rescue); used to audit entropy conservation.
    pub ec_mode: bool,
    pub c_rho: f64,
    pub c_av: f64,
    pub delta: f64,
    pub theta_mode: ThetaMode,
    /// Replace the artificial viscosity by uniform random values in `[0, max]`.
    pub random_ad: Option<f64>,
    pub seed: u64,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        SchemeOptions {
            scheme: Scheme::Ppesad,
            ec_mode: false,
            c_rho: C_RHO,
            c_av: 0.5,
            delta: 0.0,
            theta_mode: ThetaMode::Limiter,
            random_ad: None,
            seed: 0,
        }
    }
}

/// Exact or far-field state used by Dirichlet boundaries.
pub type ExactFn = Arc<dyn Fn(&[f64; 3], f64) -> State + Send + Sync>;

#[derive(Debug, Clone)]
struct FaceInfo {
    e: usize,
    f: usize,
    nbr: Option<(usize, usize)>,
    bc: Option<Bc>,
    to_nbr: Vec<usize>,
    from_nbr: Vec<usize>,
    /// Owner-outward metric, averaged with the neighbour's.
    normal: Vec<[f64; 3]>,
    dist: Vec<f64>,
}

/// Artificial-viscosity fields of one stage.
#[derive(Debug, Clone, Default)]
pub struct AvFields {
    pub sn: Vec<f64>,
    pub mu_max: Vec<f64>,
    /// Per solution point, global layout.
    pub mu: Vec<f64>,
    pub mu_p: Vec<f64>,
    /// Per element and direction, `line * (n + 1) + s`.
    pub mu1: Vec<[Vec<f64>; 3]>,
    pub limited: Vec<bool>,
}

/// Pieces of the right-hand side, each already divided by `J`.
#[derive(Debug, Clone)]
pub struct RhsParts {
    pub high: Vec<State>,
    pub low: Vec<State>,
    pub viscous: Vec<State>,
    pub ad1: Vec<State>,
    pub rescue: Vec<State>,
    pub av: AvFields,
    /// `d/dt` of the conserved totals due to physical-boundary fluxes.
    pub boundary_rate: [f64; 5],
}

impl RhsParts {
    /// `theta rhs_p + (1 - theta) rhs_1 + rhs_AD` with per-element theta.
    pub fn blend(&self, theta: &[f64], npts: usize) -> Result<Vec<State>> {
        if theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Contract("limiter value outside [0, 1]".into()));
        }
        Ok((0..self.high.len())
            .map(|i| {
                let th = theta[i / npts];
                std::array::from_fn(|k| {
                    th * self.high[i][k]
                        + (1.0 - th) * (self.low[i][k] + self.rescue[i][k])
                        + self.viscous[i][k]
                        + self.ad1[i][k]
                })
            })
            .collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct StageReport {
    pub boundary_rate: [f64; 5],
    pub max_sn: f64,
    pub limited: usize,
    pub min_theta: f64,
    pub passes: usize,
}

pub struct Solver {
    pub mesh: Mesh,
    pub elems: Vec<Element>,
    pub ops: TensorOps,
    pub gas: Gas,
    pub opts: SchemeOptions,
    pub boundary: Option<ExactFn>,
    faces: Vec<FaceInfo>,
    elem_face: Vec<[(usize, bool); 6]>,
    interp: Vec<[f64; 8]>,
    /// Limiter values of the most recent stage.
    pub theta: Vec<f64>,
    pub sn: Vec<f64>,
    pub mu_max: Vec<f64>,
    /// Largest artificial viscosity per element, for the time-step bound.
    pub mu_ad_max: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Solver {
    pub fn new(mesh: Mesh, p: usize, gas: Gas, opts: SchemeOptions, boundary: Option<ExactFn>) -> Result<Solver> {
        mesh.validate()?;
        let ops = TensorOps::new(operators(p)?);
        let elems = compute_all(&mesh, &ops)?;
        let n = ops.n();
        let ne = elems.len();
        if let ThetaMode::Fixed(v) = &opts.theta_mode {
            if v.len() != ne || v.iter().any(|t| !(0.0..=1.0).contains(t)) {
                return Err(Error::Config("fixed limiter values must be one per element in [0, 1]".into()));
            }
        }
        let mut faces = Vec::new();
        let mut elem_face = vec![[(usize::MAX, false); 6]; ne];
        for e in 0..ne {
            for f in 0..6 {
                let d = f / 2;
                let sgn = if f % 2 == 0 { -1.0 } else { 1.0 };
                let own_end = if f % 2 == 0 { 0 } else { n };
                match mesh.links[e][f] {
                    FaceLink::Interior { elem: e2, face: f2, orient } => {
                        if (e2, f2) < (e, f) {
                            continue;
                        }
                        let d2 = f2 / 2;
                        let sgn2 = if f2 % 2 == 0 { -1.0 } else { 1.0 };
                        let nbr_end = if f2 % 2 == 0 { 0 } else { n };
                        let mut to_nbr = vec![0; n * n];
                        let mut from_nbr = vec![0; n * n];
                        let mut normal = vec![[0.0; 3]; n * n];
                        let mut dist = vec![0.0; n * n];
                        for b in 0..n {
                            for a in 0..n {
                                let k = a + n * b;
                                let (a2, b2) = orient.map(a, b, n);
                                let k2 = a2 + n * b2;
                                to_nbr[k] = k2;
                                from_nbr[k2] = k;
                                let m1 = elems[e].ahat[face_point(n, f, a, b)][d];
                                let m2 = elems[e2].ahat[face_point(n, f2, a2, b2)][d2];
                                normal[k] = std::array::from_fn(|c| 0.5 * (sgn * m1[c] - sgn2 * m2[c]));
                                dist[k] = 0.5
                                    * (elems[e].fp_dist[d][k * (n + 1) + own_end]
                                        + elems[e2].fp_dist[d2][k2 * (n + 1) + nbr_end]);
                            }
                        }
                        let idx = faces.len();
                        elem_face[e][f] = (idx, true);
                        elem_face[e2][f2] = (idx, false);
                        faces.push(FaceInfo { e, f, nbr: Some((e2, f2)), bc: None, to_nbr, from_nbr, normal, dist });
                    }
                    FaceLink::Boundary(bc) => {
                        if bc == Bc::Periodic {
                            return Err(Error::Mesh(format!("element {e} face {f} is tagged periodic but unlinked")));
                        }
                        if bc == Bc::Dirichlet && boundary.is_none() {
                            return Err(Error::Config("Dirichlet boundary without boundary data".into()));
                        }
                        let normal = (0..n * n)
                            .map(|k| {
                                let m = elems[e].ahat[face_point(n, f, k % n, k / n)][d];
                                std::array::from_fn(|c| sgn * m[c])
                            })
                            .collect();
                        let dist = (0..n * n).map(|k| elems[e].fp_dist[d][k * (n + 1) + own_end]).collect();
                        let idx = faces.len();
                        elem_face[e][f] = (idx, true);
                        faces.push(FaceInfo {
                            e,
                            f,
                            nbr: None,
                            bc: Some(bc),
                            to_nbr: Vec::new(),
                            from_nbr: Vec::new(),
                            normal,
                            dist,
                        });
                    }
                }
            }
        }
        let x = &ops.base.nodes;
        let mut interp = vec![[0.0; 8]; ops.npts()];
        for kk in 0..n {
            for j in 0..n {
                for i in 0..n {
                    interp[i + n * (j + n * kk)] = trilinear_weights([x[i], x[j], x[kk]]);
                }
            }
        }
        let rng = ChaCha8Rng::seed_from_u64(opts.seed);
        Ok(Solver {
            mesh,
            elems,
            ops,
            gas,
            opts,
            boundary,
            faces,
            elem_face,
            interp,
            theta: vec![1.0; ne],
            sn: vec![0.0; ne],
            mu_max: vec![0.0; ne],
            mu_ad_max: vec![0.0; ne],
            rng,
        })
    }

    #[inline]
    pub fn npts(&self) -> usize {
        self.ops.npts()
    }

    #[inline]
    pub fn num_elements(&self) -> usize {
        self.elems.len()
    }

    pub fn p(&self) -> usize {
        self.ops.base.p
    }

    /// Sensor length scale `vol^(1/3) / (p + 1)`.
    pub fn h_av(&self, e: usize) -> f64 {
        self.elems[e].volume.cbrt() / (self.p() as f64 + 1.0)
    }

    /// Project a pointwise initial condition onto the solution points.
    pub fn project(&self, f: impl Fn(&[f64; 3]) -> State) -> Vec<State> {
        self.elems.iter().flat_map(|el| el.nodes.iter().map(&f)).collect()
    }

    fn check_field(&self, u: &[State]) -> Result<()> {
        let npts = self.npts();
        if u.len() != npts * self.num_elements() {
            return Err(Error::Contract(format!("state field has {} points, expected {}", u.len(), npts * self.num_elements())));
        }
        for (i, s) in u.iter().enumerate() {
            if !is_admissible(s) {
                return Err(inadmissible(s).at(i / npts, i % npts));
            }
        }
        Ok(())
    }

    fn ghost(&self, bc: Bc, u: &State, x: &[f64; 3], normal: &[f64; 3], t: f64) -> State {
        match bc {
            Bc::Dirichlet => (self.boundary.as_ref().expect("checked at construction"))(x, t),
            Bc::Outflow | Bc::Periodic => *u,
            Bc::NoSlipWall => [u[0], -u[1], -u[2], -u[3], u[4]],
            Bc::SlipWall => {
                let a = (normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]).sqrt();
                let nh = [normal[0] / a, normal[1] / a, normal[2] / a];
                let mn = u[1] * nh[0] + u[2] * nh[1] + u[3] * nh[2];
                [u[0], u[1] - 2.0 * mn * nh[0], u[2] - 2.0 * mn * nh[1], u[3] - 2.0 * mn * nh[2], u[4]]
            }
        }
    }

    /// Outward value seen by element `e` at node `k` of face `f`.
    #[inline]
    fn face_out(&self, store: &[Vec<Flux>], e: usize, f: usize, k: usize) -> Flux {
        let (idx, owner) = self.elem_face[e][f];
        if owner {
            store[idx][k]
        } else {
            let v = store[idx][self.faces[idx].from_nbr[k]];
            [-v[0], -v[1], -v[2], -v[3], -v[4]]
        }
    }

    /// Own and partner states (and their global indices) at face node `k`.
    #[inline]
    fn face_pair(&self, fi: &FaceInfo, u: &[State], k: usize, t: f64) -> (usize, Option<usize>, State) {
        let n = self.ops.n();
        let npts = self.npts();
        let po = fi.e * npts + face_point(n, fi.f, k % n, k / n);
        match fi.nbr {
            Some((e2, f2)) => {
                let k2 = fi.to_nbr[k];
                let pn = e2 * npts + face_point(n, f2, k2 % n, k2 / n);
                (po, Some(pn), u[pn])
            }
            None => {
                let g = self.ghost(fi.bc.expect("boundary face"), &u[po], &self.elems[fi.e].nodes[po - fi.e * npts], &fi.normal[k], t);
                (po, None, g)
            }
        }
    }

    fn inviscid_face_fluxes(&self, u: &[State], ep: &[EcPoint], w: &[[f64; 5]], t: f64) -> Result<Vec<Vec<Flux>>> {
        let n = self.ops.n();
        let dissipate = !self.opts.ec_mode;
        let mut out = Vec::with_capacity(self.faces.len());
        for fi in &self.faces {
            let mut v = Vec::with_capacity(n * n);
            for k in 0..n * n {
                let (po, pn, ug) = self.face_pair(fi, u, k, t);
                let f = match pn {
                    Some(pn) => mr_flux_pts(&ep[po], &ep[pn], &w[po], &w[pn], &fi.normal[k], &self.gas, dissipate),
                    None => {
                        if !is_admissible(&ug) {
                            return Err(inadmissible(&ug).at(fi.e, po % self.npts()));
                        }
                        let wg = entropy_vars_unchecked(&ug, &self.gas);
                        mr_flux_pts(&ep[po], &EcPoint::new(&ug, &self.gas), &w[po], &wg, &fi.normal[k], &self.gas, dissipate)
                    }
                };
                v.push(f);
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Apply `-P^-1 Delta` (sign `-1`) or `+P^-1 Delta` (sign `+1`) for one
    /// line given its flux-point values.
    #[inline]
    fn telescope_into(&self, out: &mut [State], base: usize, start: usize, st: usize, fbar: &[Flux], sign: f64) {
        let pd = &self.ops.base.p_diag;
        for i in 0..pd.len() {
            let o = &mut out[base + start + i * st];
            let inv = sign / pd[i];
            for k in 0..5 {
                o[k] += inv * (fbar[i + 1][k] - fbar[i][k]);
            }
        }
    }

    fn divide_by_jacobian(&self, out: &mut [State]) {
        let npts = self.npts();
        for (i, o) in out.iter_mut().enumerate() {
            let inv = 1.0 / self.elems[i / npts].jac[i % npts];
            for v in o.iter_mut() {
                *v *= inv;
            }
        }
    }

    fn inviscid_volume(&self, ep: &[EcPoint], w: &[[f64; 5]], faceflux: &[Vec<Flux>], high: bool) -> Vec<State> {
        let n = self.ops.n();
        let npts = self.npts();
        let gas = &self.gas;
        let dissipate = !self.opts.ec_mode;
        let mut out = vec![[0.0; 5]; ep.len()];
        let mut pts = Vec::with_capacity(n);
        let mut met = Vec::with_capacity(n);
        let mut scratch = vec![[0.0; 5]; n * n];
        let mut fbar = vec![[0.0; 5]; n + 1];
        for (e, el) in self.elems.iter().enumerate() {
            let base = e * npts;
            for l in 0..3 {
                let st = self.ops.stride(l);
                for line in 0..n * n {
                    let start = self.ops.line_start(l, line);
                    if high {
                        pts.clear();
                        met.clear();
                        for i in 0..n {
                            pts.push(ep[base + start + i * st]);
                            met.push(el.ahat[start + i * st][l]);
                        }
                        telescope_line(&self.ops.base, &pts, &met, gas.gamma, &mut scratch, &mut fbar);
                    } else {
                        for s in 1..n {
                            let (pa, pb) = (base + start + (s - 1) * st, base + start + s * st);
                            let m = &el.fp_metric[l][line * (n + 1) + s];
                            fbar[s] = mr_flux_pts(&ep[pa], &ep[pb], &w[pa], &w[pb], m, gas, dissipate);
                        }
                    }
                    let lo = self.face_out(faceflux, e, 2 * l, line);
                    fbar[0] = [-lo[0], -lo[1], -lo[2], -lo[3], -lo[4]];
                    fbar[n] = self.face_out(faceflux, e, 2 * l + 1, line);
                    self.telescope_into(&mut out, base, start, st, &fbar, -1.0);
                }
            }
        }
        self.divide_by_jacobian(&mut out);
        out
    }

    /// Physical viscous terms plus the high-order Brenner term with
    /// viscosity `mu_p` (per point). Returns zeros for inviscid, AD-free runs.
    fn viscous_terms(&self, u: &[State], w: &[[f64; 5]], mu_p: &[f64], t: f64) -> Result<(Vec<State>, [f64; 5])> {
        let npts = self.npts();
        let n = self.ops.n();
        let gas = &self.gas;
        let mut out = vec![[0.0; 5]; u.len()];
        if !gas.is_viscous() && mu_p.iter().all(|m| *m == 0.0) {
            return Ok((out, [0.0; 5]));
        }
        // Phase 1: traces and gradients.
        let mut fv: Vec<[Flux; 3]> = vec![[[0.0; 5]; 3]; u.len()];
        for (e, el) in self.elems.iter().enumerate() {
            let base = e * npts;
            let traces: [Vec<[f64; 5]>; 6] = std::array::from_fn(|f| {
                let (idx, owner) = self.elem_face[e][f];
                let fi = &self.faces[idx];
                (0..n * n)
                    .map(|k| {
                        if owner {
                            let (_, pn, ug) = self.face_pair(fi, u, k, t);
                            match pn {
                                Some(pn) => w[pn],
                                None => entropy_vars_unchecked(&ug, gas),
                            }
                        } else {
                            let ko = fi.from_nbr[k];
                            let po = fi.e * npts + face_point(n, fi.f, ko % n, ko / n);
                            w[po]
                        }
                    })
                    .collect()
            });
            let theta = ldg_gradient(&self.ops, el, &w[base..base + npts], &traces)?;
            for i in 0..npts {
                let q = primitive_unchecked(&u[base + i], gas);
                let mut d = Diffusivity::physical(gas, q.t);
                if mu_p[base + i] > 0.0 {
                    d = d.plus(Diffusivity::brenner(gas, self.opts.c_rho, mu_p[base + i], q.rho));
                }
                fv[base + i] = if d.is_zero() { [[0.0; 5]; 3] } else { viscous_flux(&u[base + i], gas, &theta[i], &d) };
            }
        }
        // Phase 2: shared interface fluxes.
        let mut store = Vec::with_capacity(self.faces.len());
        for fi in &self.faces {
            let mut v = Vec::with_capacity(n * n);
            for k in 0..n * n {
                let po = fi.e * npts + face_point(n, fi.f, k % n, k / n);
                let own = contravariant(&fv[po], &fi.normal[k]);
                let f = match (fi.nbr, fi.bc) {
                    (Some((e2, f2)), _) => {
                        let k2 = fi.to_nbr[k];
                        let pn = e2 * npts + face_point(n, f2, k2 % n, k2 / n);
                        let nb = contravariant(&fv[pn], &fi.normal[k]);
                        std::array::from_fn(|c| 0.5 * (own[c] + nb[c]))
                    }
                    (None, Some(Bc::NoSlipWall | Bc::SlipWall)) => [0.0, own[1], own[2], own[3], 0.0],
                    _ => own,
                };
                v.push(f);
            }
            store.push(v);
        }
        // Phase 3: divergence plus face corrections.
        let d = &self.ops.base.d;
        let pd = &self.ops.base.p_diag;
        let mut ghat = vec![[0.0; 5]; n];
        for (e, el) in self.elems.iter().enumerate() {
            let base = e * npts;
            for l in 0..3 {
                let st = self.ops.stride(l);
                for line in 0..n * n {
                    let start = self.ops.line_start(l, line);
                    for (i, g) in ghat.iter_mut().enumerate() {
                        *g = contravariant(&fv[base + start + i * st], &el.ahat[start + i * st][l]);
                    }
                    for i in 0..n {
                        let o = &mut out[base + start + i * st];
                        for j in 0..n {
                            let dij = d[i * n + j];
                            for c in 0..5 {
                                o[c] += dij * ghat[j][c];
                            }
                        }
                    }
                    for side in 0..2 {
                        let f = 2 * l + side;
                        let (i, sgn) = if side == 0 { (0, -1.0) } else { (n - 1, 1.0) };
                        let star = self.face_out(&store, e, f, line);
                        let own: Flux = std::array::from_fn(|c| sgn * ghat[i][c]);
                        let o = &mut out[base + start + i * st];
                        for c in 0..5 {
                            o[c] += (star[c] - own[c]) / pd[i];
                        }
                    }
                }
            }
        }
        self.divide_by_jacobian(&mut out);
        Ok((out, self.boundary_sum(&store)))
    }

    /// Face-quadrature sum of outward boundary fluxes.
    fn boundary_sum(&self, store: &[Vec<Flux>]) -> [f64; 5] {
        let pd = &self.ops.base.p_diag;
        let n = pd.len();
        let mut acc = [0.0; 5];
        for (fi, v) in self.faces.iter().zip(store) {
            if fi.nbr.is_some() {
                continue;
            }
            for (k, f) in v.iter().enumerate() {
                let wt = pd[k % n] * pd[k / n];
                for c in 0..5 {
                    acc[c] += wt * f[c];
                }
            }
        }
        acc
    }

    /// Artificial-viscosity fields for the given limited set.
    fn build_av(&mut self, u: &[State], high: &[State], w: &[[f64; 5]], limited: &[bool]) -> AvFields {
        let ne = self.num_elements();
        let npts = self.npts();
        let n = self.ops.n();
        let mut av = AvFields { limited: limited.to_vec(), ..Default::default() };
        if self.opts.scheme == Scheme::Essc {
            av.sn = vec![0.0; ne];
            av.mu_max = vec![0.0; ne];
            av.mu = vec![0.0; u.len()];
            av.mu_p = vec![0.0; u.len()];
            av.mu1 = (0..ne).map(|_| std::array::from_fn(|_| vec![0.0; n * n * (n + 1)])).collect();
            return av;
        }
        if let Some(mx) = self.opts.random_ad {
            av.sn = vec![0.0; ne];
            av.mu_max = vec![0.0; ne];
            av.mu = (0..u.len()).map(|_| self.rng.gen_range(0.0..=mx)).collect();
            av.mu_p = (0..u.len()).map(|_| self.rng.gen_range(0.0..=mx)).collect();
            av.mu1 = (0..ne)
                .map(|_| std::array::from_fn(|_| (0..n * n * (n + 1)).map(|_| self.rng.gen_range(0.0..=mx)).collect()))
                .collect();
            return av;
        }
        let gas = self.gas;
        av.sn = vec![0.0; ne];
        av.mu_max = vec![0.0; ne];
        for (e, el) in self.elems.iter().enumerate() {
            let r = if self.opts.ec_mode {
                vec![0.0]
            } else {
                let rg = e * npts..(e + 1) * npts;
                sensor::entropy_residual(&self.ops, el, &u[rg.clone()], &w[rg.clone()], &high[rg], &gas, self.h_av(e))
            };
            let rmax = r.iter().copied().fold(0.0, f64::max);
            av.sn[e] = sensor::sensor_from_residual(rmax, self.p(), self.opts.delta).1;
            av.mu_max[e] = sensor::element_max_jump(&self.ops, el, &u[e * npts..(e + 1) * npts], &gas);
        }
        for fi in &self.faces {
            if let Some((e2, _)) = fi.nbr {
                for k in 0..n * n {
                    let (po, pn, _) = self.face_pair(fi, u, k, 0.0);
                    let pn = pn.expect("interior");
                    let a = fi.normal[k];
                    let l = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                    let j = sensor::pair_jump(&u[po], &u[pn], &[a[0] / l, a[1] / l, a[2] / l], &gas);
                    av.mu_max[fi.e] = av.mu_max[fi.e].max(j);
                    av.mu_max[e2] = av.mu_max[e2].max(j);
                }
            }
        }
        for e in 0..ne {
            av.mu_max[e] *= self.opts.c_av * self.h_av(e);
        }
        let use_ad = self.opts.scheme == Scheme::Ppesad && !self.opts.ec_mode;
        let elem_mu: Vec<f64> = (0..ne).map(|e| if use_ad { av.sn[e] * av.mu_max[e] } else { 0.0 }).collect();
        let vmu = sensor::vertex_max(&self.mesh, &elem_mu);
        let chi: Vec<bool> = self.mesh.vertex_incidence.iter().map(|els| els.iter().any(|&e| limited[e])).collect();
        let vmu_p: Vec<f64> = vmu.iter().zip(&chi).map(|(m, c)| if *c { 0.0 } else { *m }).collect();
        av.mu = vec![0.0; u.len()];
        av.mu_p = vec![0.0; u.len()];
        av.mu1 = Vec::with_capacity(ne);
        for e in 0..ne {
            let a = sensor::element_vertex_values(&self.mesh, e, &vmu);
            let b = sensor::element_vertex_values(&self.mesh, e, &vmu_p);
            for i in 0..npts {
                let wts = &self.interp[i];
                av.mu[e * npts + i] = (0..8).map(|v| wts[v] * a[v]).sum();
                av.mu_p[e * npts + i] = (0..8).map(|v| wts[v] * b[v]).sum();
            }
            let rg = e * npts..(e + 1) * npts;
            av.mu1.push(sensor::flux_point_mu1(&self.ops, &av.mu[rg.clone()], &av.mu_p[rg]));
        }
        av
    }

    /// First-order artificial dissipation and the interior density rescue.
    fn ad_terms(&self, u: &[State], w: &[[f64; 5]], av: &AvFields, t: f64) -> Result<(Vec<State>, Vec<State>, [f64; 5])> {
        let npts = self.npts();
        let n = self.ops.n();
        let gas = &self.gas;
        let c_rho = self.opts.c_rho;
        let rescue_on = !self.opts.ec_mode && self.opts.scheme != Scheme::Essc;
        let mut ad1 = vec![[0.0; 5]; u.len()];
        let mut rescue = vec![[0.0; 5]; u.len()];
        if self.opts.scheme == Scheme::Essc {
            return Ok((ad1, rescue, [0.0; 5]));
        }
        let mut store = Vec::with_capacity(self.faces.len());
        for fi in &self.faces {
            let d = fi.f / 2;
            let own_end = if fi.f % 2 == 0 { 0 } else { n };
            let mut v = Vec::with_capacity(n * n);
            for k in 0..n * n {
                let (po, pn, ug) = self.face_pair(fi, u, k, t);
                let (mu_nb, lim_nb, wg) = match (fi.nbr, fi.bc) {
                    (Some((e2, f2)), _) => {
                        let k2 = fi.to_nbr[k];
                        let end2 = if f2 % 2 == 0 { 0 } else { n };
                        (av.mu1[e2][f2 / 2][k2 * (n + 1) + end2], av.limited[e2], w[pn.expect("interior")])
                    }
                    (None, Some(Bc::Dirichlet)) => {
                        (av.mu1[fi.e][d][k * (n + 1) + own_end], false, entropy_vars_unchecked(&ug, gas))
                    }
                    _ => {
                        v.push([0.0; 5]);
                        continue;
                    }
                };
                let mu = 0.5 * (av.mu1[fi.e][d][k * (n + 1) + own_end] + mu_nb);
                let a = fi.normal[k];
                let area = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
                let nh = [a[0] / area, a[1] / area, a[2] / area];
                let chi = av.limited[fi.e] || lim_nb;
                let mut sig = c_rho * mu / (u[po][0] * ug[0]).sqrt();
                if chi && rescue_on {
                    sig = sig.max(sensor::sigma_min(&u[po], &ug, &nh, fi.dist[k], gas));
                }
                v.push(low_order_ad_flux(&u[po], &ug, &w[po], &wg, &a, fi.dist[k], mu, sig, c_rho, gas));
            }
            store.push(v);
        }
        let mut fbar = vec![[0.0; 5]; n + 1];
        let mut sbar = vec![[0.0; 5]; n + 1];
        for (e, el) in self.elems.iter().enumerate() {
            let base = e * npts;
            let do_rescue = rescue_on && av.limited[e];
            for l in 0..3 {
                let st = self.ops.stride(l);
                for line in 0..n * n {
                    let start = self.ops.line_start(l, line);
                    for s in 1..n {
                        let (pa, pb) = (base + start + (s - 1) * st, base + start + s * st);
                        let idx = line * (n + 1) + s;
                        let m = &el.fp_metric[l][idx];
                        let dist = el.fp_dist[l][idx];
                        let mu = av.mu1[e][l][idx];
                        let sig = c_rho * mu / (u[pa][0] * u[pb][0]).sqrt();
                        fbar[s] = low_order_ad_flux(&u[pa], &u[pb], &w[pa], &w[pb], m, dist, mu, sig, c_rho, gas);
                        sbar[s] = if do_rescue {
                            let area = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                            let nh = [m[0] / area, m[1] / area, m[2] / area];
                            let smin = sensor::sigma_min(&u[pa], &u[pb], &nh, dist, gas);
                            low_order_mass_diffusion(&u[pa], &u[pb], m, dist, (smin - sig).max(0.0), gas)
                        } else {
                            [0.0; 5]
                        };
                    }
                    let lo = self.face_out(&store, e, 2 * l, line);
                    fbar[0] = [-lo[0], -lo[1], -lo[2], -lo[3], -lo[4]];
                    fbar[n] = self.face_out(&store, e, 2 * l + 1, line);
                    self.telescope_into(&mut ad1, base, start, st, &fbar, 1.0);
                    if do_rescue {
                        sbar[0] = [0.0; 5];
                        sbar[n] = [0.0; 5];
                        self.telescope_into(&mut rescue, base, start, st, &sbar, 1.0);
                    }
                }
            }
        }
        self.divide_by_jacobian(&mut ad1);
        self.divide_by_jacobian(&mut rescue);
        Ok((ad1, rescue, self.boundary_sum(&store)))
    }

    fn pointwise(&self, u: &[State]) -> (Vec<[f64; 5]>, Vec<EcPoint>) {
        let gas = &self.gas;
        (u.iter().map(|s| entropy_vars_unchecked(s, gas)).collect(), u.iter().map(|s| EcPoint::new(s, gas)).collect())
    }

    /// High-order inviscid operator plus viscous terms (the baseline scheme).
    /// Also returns the boundary contribution to the totals' rate.
    pub fn rhs_essc(&self, u: &[State], t: f64) -> Result<(Vec<State>, [f64; 5])> {
        self.check_field(u)?;
        let (w, ep) = self.pointwise(u);
        let ff = self.inviscid_face_fluxes(u, &ep, &w, t)?;
        let mut r = self.inviscid_volume(&ep, &w, &ff, true);
        let zero = vec![0.0; u.len()];
        let (v, bv) = self.viscous_terms(u, &w, &zero, t)?;
        for (a, b) in r.iter_mut().zip(&v) {
            for k in 0..5 {
                a[k] += b[k];
            }
        }
        let bi = self.boundary_sum(&ff);
        Ok((r, std::array::from_fn(|k| bv[k] - bi[k])))
    }

    /// All pieces of the right-hand side for a given limited set.
    pub fn rhs_parts(&mut self, u: &[State], t: f64, limited: &[bool]) -> Result<RhsParts> {
        self.check_field(u)?;
        let (w, ep) = self.pointwise(u);
        let ff = self.inviscid_face_fluxes(u, &ep, &w, t)?;
        let high = self.inviscid_volume(&ep, &w, &ff, true);
        let low = if self.opts.scheme == Scheme::Essc { vec![[0.0; 5]; u.len()] } else { self.inviscid_volume(&ep, &w, &ff, false) };
        let av = self.build_av(u, &high, &w, limited);
        let (viscous, bv) = self.viscous_terms(u, &w, &av.mu_p, t)?;
        let (ad1, rescue, ba) = self.ad_terms(u, &w, &av, t)?;
        let bi = self.boundary_sum(&ff);
        let boundary_rate = std::array::from_fn(|k| bv[k] + ba[k] - bi[k]);
        Ok(RhsParts { high, low, viscous, ad1, rescue, av, boundary_rate })
    }

    /// One limited forward-Euler substep `U + dt dU/dt`.
    pub fn forward_euler(&mut self, u: &[State], t: f64, dt: f64) -> Result<(Vec<State>, StageReport)> {
        let npts = self.npts();
        let ne = self.num_elements();
        if self.opts.scheme == Scheme::Essc {
            let (r, boundary_rate) = self.rhs_essc(u, t)?;
            let out: Vec<State> = u.iter().zip(&r).map(|(a, b)| std::array::from_fn(|k| a[k] + dt * b[k])).collect();
            self.check_field(&out)?;
            return Ok((out, StageReport { boundary_rate, min_theta: 1.0, ..Default::default() }));
        }
        let mut limited: Vec<bool> = self.theta.iter().map(|t| *t < 1.0).collect();
        let mut passes = 0;
        let (parts, u1, up) = loop {
            passes += 1;
            let parts = self.rhs_parts(u, t, &limited)?;
            let mut u1 = Vec::with_capacity(u.len());
            let mut up = Vec::with_capacity(u.len());
            for i in 0..u.len() {
                let (h, lo, v, a, s) = (&parts.high[i], &parts.low[i], &parts.viscous[i], &parts.ad1[i], &parts.rescue[i]);
                up.push(std::array::from_fn(|k| u[i][k] + dt * (h[k] + v[k] + a[k])));
                u1.push(std::array::from_fn(|k| u[i][k] + dt * (lo[k] + v[k] + a[k] + s[k])));
            }
            let mut grew = false;
            let mut bad = None;
            for (i, s) in u1.iter().enumerate() {
                if !is_admissible(s) {
                    let e = i / npts;
                    if !limited[e] {
                        limited[e] = true;
                        grew = true;
                    } else if bad.is_none() {
                        bad = Some(i);
                    }
                }
            }
            if grew && passes < 4 {
                continue;
            }
            let overridden = !matches!(self.opts.theta_mode, ThetaMode::Limiter);
            if let Some(i) = bad.or_else(|| u1.iter().position(|s| !is_admissible(s))) {
                if !overridden {
                    return Err(inadmissible(&u1[i]).at(i / npts, i % npts));
                }
            }
            break (parts, u1, up);
        };
        let theta: Vec<f64> = match &self.opts.theta_mode {
            ThetaMode::Fixed(v) => v.clone(),
            ThetaMode::RandomPerStage => (0..ne).map(|_| self.rng.gen_range(0.0..=1.0)).collect(),
            ThetaMode::Limiter => {
                let jumps = self.pressure_jumps(u);
                let mut th = vec![1.0; ne];
                for e in 0..ne {
                    let rg = e * npts..(e + 1) * npts;
                    let al = limiter::aleph(parts.av.sn[e], jumps[e]);
                    let b = limiter::compute_bounds(&u1[rg.clone()], al).map_err(|err| err_elem(err, e))?;
                    th[e] = limiter::element_theta(&u1[rg.clone()], &up[rg], &b)?;
                }
                th
            }
        };
        let mut out = Vec::with_capacity(u.len());
        for i in 0..u.len() {
            let th = theta[i / npts];
            out.push(std::array::from_fn(|k| u1[i][k] + th * (up[i][k] - u1[i][k])));
        }
        self.check_field(&out)?;
        let report = StageReport {
            boundary_rate: parts.boundary_rate,
            max_sn: parts.av.sn.iter().copied().fold(0.0, f64::max),
            limited: theta.iter().filter(|t| **t < 1.0).count(),
            min_theta: theta.iter().copied().fold(1.0, f64::min),
            passes,
        };
        for e in 0..ne {
            let rg = e * npts..(e + 1) * npts;
            self.mu_ad_max[e] = parts.av.mu[rg.clone()].iter().copied().fold(0.0, f64::max);
        }
        self.sn = parts.av.sn;
        self.mu_max = parts.av.mu_max;
        self.theta = theta;
        Ok((out, report))
    }

    /// Per element, the maximum relative pressure jump over neighbouring
    /// point pairs, interface pairs included.
    pub fn pressure_jumps(&self, u: &[State]) -> Vec<f64> {
        let npts = self.npts();
        let n = self.ops.n();
        let p: Vec<f64> = u.iter().map(|s| primitive_unchecked(s, &self.gas).p).collect();
        let mut out = vec![0.0f64; self.num_elements()];
        for (e, o) in out.iter_mut().enumerate() {
            let base = e * npts;
            for l in 0..3 {
                let st = self.ops.stride(l);
                for line in 0..n * n {
                    let start = base + self.ops.line_start(l, line);
                    for i in 1..n {
                        *o = o.max(limiter::relative_pressure_jump(p[start + (i - 1) * st], p[start + i * st]));
                    }
                }
            }
        }
        for fi in &self.faces {
            if let Some((e2, _)) = fi.nbr {
                for k in 0..n * n {
                    let (po, pn, _) = self.face_pair(fi, u, k, 0.0);
                    let j = limiter::relative_pressure_jump(p[po], p[pn.expect("interior")]);
                    out[fi.e] = out[fi.e].max(j);
                    out[e2] = out[e2].max(j);
                }
            }
        }
        out
    }

    /// Quadrature `sum J P f` of a pointwise scalar.
    pub fn integrate(&self, f: impl Fn(&State) -> f64, u: &[State]) -> f64 {
        let npts = self.npts();
        let mut total = 0.0;
        for (e, el) in self.elems.iter().enumerate() {
            let mut acc = 0.0;
            for i in 0..npts {
                acc += self.ops.weights[i] * el.jac[i] * f(&u[e * npts + i]);
            }
            total += acc;
        }
        total
    }

    /// Conserved totals `(mass, momentum, energy)`.
    pub fn totals(&self, u: &[State]) -> [f64; 5] {
        std::array::from_fn(|k| self.integrate(|s| s[k], u))
    }

    /// Solution-point coordinates, global layout.
    pub fn coordinates(&self) -> Vec<[f64; 3]> {
        self.elems.iter().flat_map(|e| e.nodes.iter().copied()).collect()
    }
}

fn err_elem(err: Error, e: usize) -> Error {
    let point = match &err {
        Error::Inadmissible { loc: Some(l), .. } => l.point,
        _ => return err,
    };
    err.at(e, point)
}
