//! Structured hexahedral meshes, tri-linear element geometry and GCL-exact
//! metric terms.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flux::flux_point_metrics;
use crate::sbp::TensorOps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    Periodic,
    Dirichlet,
    NoSlipWall,
    SlipWall,
    Outflow,
}

impl Bc {
    fn code(self) -> &'static str {
        match self {
            Bc::Periodic => "periodic",
            Bc::Dirichlet => "dirichlet",
            Bc::NoSlipWall => "no_slip_wall",
            Bc::SlipWall => "slip_wall",
            Bc::Outflow => "outflow",
        }
    }

    fn parse(s: &str) -> Result<Bc> {
        Ok(match s {
            "periodic" => Bc::Periodic,
            "dirichlet" => Bc::Dirichlet,
            "no_slip_wall" => Bc::NoSlipWall,
            "slip_wall" => Bc::SlipWall,
            "outflow" => Bc::Outflow,
            _ => return Err(Error::Mesh(format!("unknown boundary kind {s}"))),
        })
    }
}

/// Orientation of a neighbour face relative to the owner's face-local
/// `(a, b)` node indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Orientation {
    pub swap: bool,
    pub flip_a: bool,
    pub flip_b: bool,
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation { swap: false, flip_a: false, flip_b: false };

    /// Map owner face node `(a, b)` to the neighbour's face node.
    #[inline]
    pub fn map(&self, a: usize, b: usize, n: usize) -> (usize, usize) {
        let (mut x, mut y) = if self.swap { (b, a) } else { (a, b) };
        if self.flip_a {
            x = n - 1 - x;
        }
        if self.flip_b {
            y = n - 1 - y;
        }
        (x, y)
    }

    /// Orientation seen from the neighbour.
    pub fn inverse(&self) -> Orientation {
        if self.swap {
            Orientation { swap: true, flip_a: self.flip_b, flip_b: self.flip_a }
        } else {
            *self
        }
    }

    fn code(&self) -> u8 {
        self.swap as u8 | (self.flip_a as u8) << 1 | (self.flip_b as u8) << 2
    }

    fn from_code(c: u8) -> Orientation {
        Orientation { swap: c & 1 != 0, flip_a: c & 2 != 0, flip_b: c & 4 != 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceLink {
    Interior { elem: usize, face: usize, orient: Orientation },
    Boundary(Bc),
}

/// Mesh topology and vertex geometry. Faces are numbered `2 * dir + side`
/// with side 0 at `xi_dir = -1`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    /// Vertex `v = i + 2 j + 4 k` sits at reference corner `(2i-1, 2j-1, 2k-1)`.
    pub hexes: Vec<[usize; 8]>,
    /// Canonical vertex id after periodic identification.
    pub vertex_class: Vec<usize>,
    pub links: Vec<[FaceLink; 6]>,
    /// Canonical vertex id -> elements sharing it.
    pub vertex_incidence: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub k: [usize; 3],
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    /// `[dir][side]`; periodic must be set on both sides of a direction.
    pub bc: [[Bc; 2]; 3],
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub warp: f64,
    #[serde(default)]
    pub seed: u64,
}

impl BoxSpec {
    pub fn periodic_cube(k: usize, lo: f64, hi: f64) -> BoxSpec {
        BoxSpec {
            k: [k; 3],
            lo: [lo; 3],
            hi: [hi; 3],
            bc: [[Bc::Periodic; 2]; 3],
            perturbation: 0.0,
            warp: 0.0,
            seed: 0,
        }
    }
}

pub fn build_box_mesh(spec: &BoxSpec) -> Result<Mesh> {
    let k = spec.k;
    if k.iter().any(|&v| v == 0) {
        return Err(Error::Mesh("element count per direction must be at least 1".into()));
    }
    if !(0.0..0.25).contains(&spec.perturbation) {
        return Err(Error::Mesh(format!("perturbation {} outside [0, 0.25)", spec.perturbation)));
    }
    let periodic: Vec<bool> = (0..3).map(|d| spec.bc[d][0] == Bc::Periodic).collect();
    for d in 0..3 {
        if (spec.bc[d][0] == Bc::Periodic) != (spec.bc[d][1] == Bc::Periodic) {
            return Err(Error::Mesh(format!("direction {d} is periodic on one side only")));
        }
    }
    let len: Vec<f64> = (0..3).map(|d| spec.hi[d] - spec.lo[d]).collect();
    let h: Vec<f64> = (0..3).map(|d| len[d] / k[d] as f64).collect();
    let nv = [k[0] + 1, k[1] + 1, k[2] + 1];
    let vid = |i: usize, j: usize, l: usize| i + nv[0] * (j + nv[1] * l);
    let class_idx = |i: usize, d: usize| if periodic[d] && i == k[d] { 0 } else { i };
    let class = |i: usize, j: usize, l: usize| vid(class_idx(i, 0), class_idx(j, 1), class_idx(l, 2));

    // One displacement per canonical vertex so periodic images move together.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = nv[0] * nv[1] * nv[2];
    let mut disp = vec![[0.0; 3]; total];
    for l in 0..nv[2] {
        for j in 0..nv[1] {
            for i in 0..nv[0] {
                let idx = [i, j, l];
                let c = class(i, j, l);
                if c != vid(i, j, l) {
                    continue;
                }
                for d in 0..3 {
                    let on_wall = !periodic[d] && (idx[d] == 0 || idx[d] == k[d]);
                    let r: f64 = rng.gen_range(-1.0..1.0);
                    if !on_wall {
                        disp[c][d] = spec.perturbation * h[d] * r;
                    }
                }
            }
        }
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut vertices = vec![[0.0; 3]; total];
    let mut vertex_class = vec![0; total];
    for l in 0..nv[2] {
        for j in 0..nv[1] {
            for i in 0..nv[0] {
                let idx = [i, j, l];
                let c = class(i, j, l);
                let mut x = [0.0; 3];
                for d in 0..3 {
                    x[d] = spec.lo[d] + idx[d] as f64 * h[d] + disp[c][d];
                }
                if spec.warp != 0.0 {
                    let s: Vec<f64> = (0..3)
                        .map(|d| (two_pi * (spec.lo[d] + idx[d] as f64 * h[d] - spec.lo[d]) / len[d]).sin())
                        .collect();
                    let active: Vec<usize> = (0..3).filter(|&d| k[d] > 1).collect();
                    for &d in &active {
                        let mut prod = 1.0;
                        for &e in &active {
                            if e != d {
                                prod *= s[e];
                            }
                        }
                        if active.len() > 1 {
                            x[d] += spec.warp * len[d] * prod;
                        }
                    }
                }
                vertices[vid(i, j, l)] = x;
                vertex_class[vid(i, j, l)] = c;
            }
        }
    }
    let ne = k[0] * k[1] * k[2];
    let eid = |i: usize, j: usize, l: usize| i + k[0] * (j + k[1] * l);
    let mut hexes = Vec::with_capacity(ne);
    let mut links = Vec::with_capacity(ne);
    for l in 0..k[2] {
        for j in 0..k[1] {
            for i in 0..k[0] {
                let mut hx = [0; 8];
                for (v, slot) in hx.iter_mut().enumerate() {
                    *slot = vid(i + (v & 1), j + ((v >> 1) & 1), l + ((v >> 2) & 1));
                }
                hexes.push(hx);
                let idx = [i as isize, j as isize, l as isize];
                let mut lk = [FaceLink::Boundary(Bc::Outflow); 6];
                for d in 0..3 {
                    for side in 0..2 {
                        let mut nb = idx;
                        nb[d] += if side == 0 { -1 } else { 1 };
                        let inside = nb[d] >= 0 && nb[d] < k[d] as isize;
                        let face = 2 * d + side;
                        lk[face] = if inside || periodic[d] {
                            nb[d] = nb[d].rem_euclid(k[d] as isize);
                            FaceLink::Interior {
                                elem: eid(nb[0] as usize, nb[1] as usize, nb[2] as usize),
                                face: 2 * d + (1 - side),
                                orient: Orientation::IDENTITY,
                            }
                        } else {
                            FaceLink::Boundary(spec.bc[d][side])
                        };
                    }
                }
                links.push(lk);
            }
        }
    }
    let mut mesh = Mesh { vertices, hexes, vertex_class, links, vertex_incidence: Vec::new() };
    mesh.rebuild_incidence();
    Ok(mesh)
}

impl Mesh {
    pub fn num_elements(&self) -> usize {
        self.hexes.len()
    }

    pub fn element_vertices(&self, e: usize) -> [[f64; 3]; 8] {
        let mut out = [[0.0; 3]; 8];
        for (v, o) in out.iter_mut().enumerate() {
            *o = self.vertices[self.hexes[e][v]];
        }
        out
    }

    pub fn rebuild_incidence(&mut self) {
        let nclass = self.vertex_class.iter().copied().max().map_or(0, |m| m + 1);
        let mut inc = vec![Vec::new(); nclass];
        for (e, hx) in self.hexes.iter().enumerate() {
            for &v in hx {
                let c = self.vertex_class[v];
                if !inc[c].contains(&e) {
                    inc[c].push(e);
                }
            }
        }
        self.vertex_incidence = inc;
    }

    /// Drop elements matching `remove`; exposed faces become `bc`.
    pub fn remove_elements(&mut self, remove: impl Fn(usize) -> bool, bc: Bc) {
        let ne = self.num_elements();
        let mut new_id = vec![usize::MAX; ne];
        let mut count = 0;
        for (e, id) in new_id.iter_mut().enumerate() {
            if !remove(e) {
                *id = count;
                count += 1;
            }
        }
        let mut hexes = Vec::with_capacity(count);
        let mut links = Vec::with_capacity(count);
        for e in 0..ne {
            if new_id[e] == usize::MAX {
                continue;
            }
            hexes.push(self.hexes[e]);
            let mut lk = self.links[e];
            for l in lk.iter_mut() {
                if let FaceLink::Interior { elem, face, orient } = *l {
                    *l = if new_id[elem] == usize::MAX {
                        FaceLink::Boundary(bc)
                    } else {
                        FaceLink::Interior { elem: new_id[elem], face, orient }
                    };
                }
            }
            links.push(lk);
        }
        self.hexes = hexes;
        self.links = links;
        self.rebuild_incidence();
    }

    /// Conformity checks: every interior link is reciprocated with the
    /// inverse orientation.
    pub fn validate(&self) -> Result<()> {
        for (e, lk) in self.links.iter().enumerate() {
            for (f, l) in lk.iter().enumerate() {
                if let FaceLink::Interior { elem, face, orient } = *l {
                    match self.links.get(elem).map(|x| x[face]) {
                        Some(FaceLink::Interior { elem: e2, face: f2, orient: o2 })
                            if e2 == e && f2 == f && o2 == orient.inverse() => {}
                        _ => return Err(Error::Mesh(format!("face link {e}:{f} is not reciprocated"))),
                    }
                }
            }
        }
        Ok(())
    }

    /// Text export: counts, vertex table, hex connectivity, periodic vertex
    /// classes and face links with boundary tags.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "ppes-hexmesh 1")?;
        writeln!(w, "vertices {}", self.vertices.len())?;
        for (v, x) in self.vertices.iter().enumerate() {
            writeln!(w, "{:.17e} {:.17e} {:.17e} {}", x[0], x[1], x[2], self.vertex_class[v])?;
        }
        writeln!(w, "hexes {}", self.hexes.len())?;
        for (hx, lk) in self.hexes.iter().zip(&self.links) {
            let ids: Vec<String> = hx.iter().map(|v| v.to_string()).collect();
            let faces: Vec<String> = lk
                .iter()
                .map(|l| match l {
                    FaceLink::Interior { elem, face, orient } => format!("{elem}:{face}:{}", orient.code()),
                    FaceLink::Boundary(bc) => bc.code().to_string(),
                })
                .collect();
            writeln!(w, "{} | {}", ids.join(" "), faces.join(" "))?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Mesh> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| Error::Mesh("unexpected end of mesh file".into()))?.map_err(Error::from)
        };
        let bad = |s: &str| Error::Mesh(format!("malformed mesh line: {s}"));
        let header = next()?;
        if header.trim() != "ppes-hexmesh 1" {
            return Err(Error::Mesh(format!("unknown header {header}")));
        }
        let count = |line: String, key: &str| -> Result<usize> {
            let mut it = line.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(&line));
            }
            it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(&line))
        };
        let nv = count(next()?, "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        let mut vertex_class = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = next()?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 4 {
                return Err(bad(&line));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|_| bad(&line));
            vertices.push([p(t[0])?, p(t[1])?, p(t[2])?]);
            vertex_class.push(t[3].parse::<usize>().map_err(|_| bad(&line))?);
        }
        let ne = count(next()?, "hexes")?;
        let mut hexes = Vec::with_capacity(ne);
        let mut links = Vec::with_capacity(ne);
        for _ in 0..ne {
            let line = next()?;
            let (a, b) = line.split_once('|').ok_or_else(|| bad(&line))?;
            let ids: Vec<usize> = a.split_whitespace().map(|s| s.parse().map_err(|_| bad(&line))).collect::<Result<_>>()?;
            if ids.len() != 8 || ids.iter().any(|&v| v >= nv) {
                return Err(bad(&line));
            }
            let mut hx = [0; 8];
            hx.copy_from_slice(&ids);
            let faces: Vec<&str> = b.split_whitespace().collect();
            if faces.len() != 6 {
                return Err(bad(&line));
            }
            let mut lk = [FaceLink::Boundary(Bc::Outflow); 6];
            for (f, s) in faces.iter().enumerate() {
                lk[f] = if s.contains(':') {
                    let parts: Vec<usize> = s.split(':').map(|v| v.parse().map_err(|_| bad(&line))).collect::<Result<_>>()?;
                    if parts.len() != 3 || parts[1] > 5 || parts[2] > 7 {
                        return Err(bad(&line));
                    }
                    FaceLink::Interior { elem: parts[0], face: parts[1], orient: Orientation::from_code(parts[2] as u8) }
                } else {
                    FaceLink::Boundary(Bc::parse(s)?)
                };
            }
            hexes.push(hx);
            links.push(lk);
        }
        let mut mesh = Mesh { vertices, hexes, vertex_class, links, vertex_incidence: Vec::new() };
        mesh.validate()?;
        mesh.rebuild_incidence();
        Ok(mesh)
    }
}

/// Tri-linear shape functions at a reference point.
#[inline]
pub fn trilinear_weights(xi: [f64; 3]) -> [f64; 8] {
    let mut w = [0.0; 8];
    for (v, o) in w.iter_mut().enumerate() {
        let mut prod = 1.0;
        for d in 0..3 {
            let s = if (v >> d) & 1 == 1 { 1.0 + xi[d] } else { 1.0 - xi[d] };
            prod *= 0.5 * s;
        }
        *o = prod;
    }
    w
}

/// Geometric data of one element at a fixed polynomial order.
#[derive(Debug, Clone)]
pub struct Element {
    pub id: usize,
    pub vertices: [[f64; 3]; 8],
    pub nodes: Vec<[f64; 3]>,
    pub jac: Vec<f64>,
    /// `ahat[point][l][m] = J d xi_l / d x_m`.
    pub ahat: Vec<[[f64; 3]; 3]>,
    /// Per direction `l`: flux-point metrics, `line * (n + 1) + s`.
    pub fp_metric: [Vec<[f64; 3]>; 3],
    /// Per direction `l`: physical distance between solution points `s - 1`
    /// and `s` at flux point `s`; entries 0 and `n` repeat the nearest interior gap.
    pub fp_dist: [Vec<f64>; 3],
    pub volume: f64,
    pub h_min: f64,
}

impl Element {
    /// Face-normal metric at face node `(a, b)` of `face`.
    #[inline]
    pub fn face_metric(&self, ops: &TensorOps, face: usize, a: usize, b: usize) -> [f64; 3] {
        let p = face_point(ops.n(), face, a, b);
        self.ahat[p][face / 2]
    }
}

/// Element point index of face-local node `(a, b)`.
#[inline]
pub fn face_point(n: usize, face: usize, a: usize, b: usize) -> usize {
    let d = face / 2;
    let fixed = if face % 2 == 0 { 0 } else { n - 1 };
    match d {
        0 => fixed + n * (a + n * b),
        1 => a + n * (fixed + n * b),
        _ => a + n * (b + n * fixed),
    }
}

pub fn compute_metrics(id: usize, vertices: &[[f64; 3]; 8], ops: &TensorOps) -> Result<Element> {
    let n = ops.n();
    let npts = ops.npts();
    let nodes1 = &ops.base.nodes;
    let mut x = vec![[0.0; 3]; npts];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let w = trilinear_weights([nodes1[i], nodes1[j], nodes1[k]]);
                let p = i + n * (j + n * k);
                for (v, wv) in w.iter().enumerate() {
                    for d in 0..3 {
                        x[p][d] += wv * vertices[v][d];
                    }
                }
            }
        }
    }
    let flat: Vec<f64> = x.iter().flat_map(|v| v.iter().copied()).collect();
    // dx[j][p*3 + m] = d x_m / d xi_j
    let dx: Vec<Vec<f64>> = (0..3).map(|j| ops.apply_derivative(j, &flat, 3)).collect::<Result<_>>()?;
    let mut jac = vec![0.0; npts];
    for p in 0..npts {
        let g = |j: usize, m: usize| dx[j][p * 3 + m];
        jac[p] = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
            + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
        if !(jac[p] > 0.0) {
            return Err(Error::Mesh(format!("element {id} has nonpositive Jacobian {} at point {p}", jac[p])));
        }
    }
    // Symmetric curl form: J a^i_n = -1/2 e_i . curl(X_l grad X_m - X_m grad X_l).
    let mut ahat = vec![[[0.0; 3]; 3]; npts];
    for nc in 0..3 {
        let m = (nc + 1) % 3;
        let l = (nc + 2) % 3;
        // v[j] pointwise, j = 0..3 (computational components)
        let mut v = vec![0.0; npts * 3];
        for p in 0..npts {
            for j in 0..3 {
                v[p * 3 + j] = x[p][l] * dx[j][p * 3 + m] - x[p][m] * dx[j][p * 3 + l];
            }
        }
        let dv: Vec<Vec<f64>> = (0..3).map(|j| ops.apply_derivative(j, &v, 3)).collect::<Result<_>>()?;
        for p in 0..npts {
            let c0 = dv[1][p * 3 + 2] - dv[2][p * 3 + 1];
            let c1 = dv[2][p * 3] - dv[0][p * 3 + 2];
            let c2 = dv[0][p * 3 + 1] - dv[1][p * 3];
            ahat[p][0][nc] = -0.5 * c0;
            ahat[p][1][nc] = -0.5 * c1;
            ahat[p][2][nc] = -0.5 * c2;
        }
    }
    let mut fp_metric: [Vec<[f64; 3]>; 3] = Default::default();
    let mut fp_dist: [Vec<f64>; 3] = Default::default();
    for dir in 0..3 {
        let s = ops.stride(dir);
        let mut fm = Vec::with_capacity(n * n * (n + 1));
        let mut fd = Vec::with_capacity(n * n * (n + 1));
        for line in 0..n * n {
            let start = ops.line_start(dir, line);
            let met: Vec<[f64; 3]> = (0..n).map(|i| ahat[start + i * s][dir]).collect();
            fm.extend(flux_point_metrics(&ops.base, &met));
            let gap = |i: usize| {
                let a = x[start + (i - 1) * s];
                let b = x[start + i * s];
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
            };
            fd.push(gap(1));
            for i in 1..n {
                fd.push(gap(i));
            }
            fd.push(gap(n - 1));
        }
        fp_metric[dir] = fm;
        fp_dist[dir] = fd;
    }
    let volume = ops.integrate(&jac);
    let mut h_min = f64::INFINITY;
    for v in 0..8 {
        for d in 0..3 {
            if (v >> d) & 1 == 0 {
                let a = vertices[v];
                let b = vertices[v | (1 << d)];
                let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
                h_min = h_min.min(len);
            }
        }
    }
    Ok(Element { id, vertices: *vertices, nodes: x, jac, ahat, fp_metric, fp_dist, volume, h_min })
}

/// Max-norm of `sum_l D_l ahat^l_m` over `m`.
pub fn gcl_residual(elem: &Element, ops: &TensorOps) -> f64 {
    let npts = ops.npts();
    let mut worst: f64 = 0.0;
    let mut acc = vec![0.0; npts * 3];
    for l in 0..3 {
        let f: Vec<f64> = elem.ahat.iter().flat_map(|a| a[l].iter().copied()).collect();
        let d = ops.apply_derivative(l, &f, 3).expect("sized");
        for (o, v) in acc.iter_mut().zip(d) {
            *o += v;
        }
    }
    for v in acc {
        worst = worst.max(v.abs());
    }
    worst
}

/// Geometry for every element of a mesh.
pub fn compute_all(mesh: &Mesh, ops: &TensorOps) -> Result<Vec<Element>> {
    (0..mesh.num_elements()).map(|e| compute_metrics(e, &mesh.element_vertices(e), ops)).collect()
}

/// VTK legacy unstructured grid of all solution points, split into
/// `(n-1)^3` sub-hexahedra per element, with named point scalars.
pub fn write_vtk<W: Write>(
    mut w: W,
    elems: &[Element],
    ops: &TensorOps,
    scalars: &[(&str, &[f64])],
) -> Result<()> {
    let n = ops.n();
    let npts = ops.npts();
    let total = elems.len() * npts;
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "ppes solution points")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {total} double")?;
    for e in elems {
        for x in &e.nodes {
            writeln!(w, "{:.12e} {:.12e} {:.12e}", x[0], x[1], x[2])?;
        }
    }
    let sub = (n - 1).pow(3);
    let ncells = elems.len() * sub;
    writeln!(w, "CELLS {} {}", ncells, ncells * 9)?;
    for (ei, _) in elems.iter().enumerate() {
        let base = ei * npts;
        for k in 0..n - 1 {
            for j in 0..n - 1 {
                for i in 0..n - 1 {
                    let id = |a: usize, b: usize, c: usize| base + (i + a) + n * ((j + b) + n * (k + c));
                    writeln!(
                        w,
                        "8 {} {} {} {} {} {} {} {}",
                        id(0, 0, 0),
                        id(1, 0, 0),
                        id(1, 1, 0),
                        id(0, 1, 0),
                        id(0, 0, 1),
                        id(1, 0, 1),
                        id(1, 1, 1),
                        id(0, 1, 1)
                    )?;
                }
            }
        }
    }
    writeln!(w, "CELL_TYPES {ncells}")?;
    for _ in 0..ncells {
        writeln!(w, "12")?;
    }
    writeln!(w, "POINT_DATA {total}")?;
    for (name, data) in scalars {
        if data.len() != total {
            return Err(Error::Contract(format!("VTK field {name} has {} values, expected {total}", data.len())));
        }
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in data.iter() {
            writeln!(w, "{:.12e}", v)?;
        }
    }
    Ok(())
}
