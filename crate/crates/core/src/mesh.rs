//! Triangle meshes of the graph piece `X(D)`, the fundamental domain and its
//! vertical stacks, with OBJ/PLY/CSV export.
//!
//! The patch is a star grid: rays from the puncture to boundary nodes taken on
//! the exact tracks `E`, `C`, `E_hat`, crossed by geometric levels that end at
//! the puncture cutoff. The first and last rays are the two halves of the
//! h-diagonal.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufWriter, Read, Write};
use std::path::Path as FsPath;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{ChartPoint, FlowPoint, PathName, RhombusChart, Start, C64, E8, I};
use crate::weierstrass::{norm3, Surface};

pub type V3 = [f64; 3];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshMetadata {
    pub rho: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub a: f64,
    /// z-distance of the innermost computed ring from the puncture.
    pub cutoff: f64,
    /// Whether rings beyond the cutoff were added from the asymptotic helicoid.
    pub asymptotic_cap: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polyline {
    pub name: String,
    pub points: Vec<V3>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<V3>,
    pub faces: Vec<[usize; 3]>,
    pub boundaries: Vec<Polyline>,
    pub metadata: MeshMetadata,
}

#[derive(Debug, Clone, Copy)]
pub struct MeshOptions {
    /// Number of levels between the boundary and the cutoff ring; the
    /// boundary carries about `2 * resolution` nodes.
    pub resolution: usize,
    /// Extra rings from the asymptotic helicoid, each halving the distance to the puncture.
    pub cap_levels: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            resolution: 40,
            cap_levels: 0,
        }
    }
}

/// Star grid of the patch; node `(i, j)` is level `i` on ray `j`.
#[derive(Debug, Clone)]
pub struct PatchGrid {
    pub levels: usize,
    pub rays: usize,
    pub u: Vec<C64>,
    pub x: Vec<V3>,
    /// Number of levels that come from the flow (the rest belong to the cap).
    pub computed_levels: usize,
}

impl PatchGrid {
    pub fn id(&self, i: usize, j: usize) -> usize {
        i * self.rays + j
    }
}

fn polyline(name: &str, points: Vec<V3>) -> Polyline {
    Polyline {
        name: name.into(),
        points,
    }
}

/// Leading coefficients of `X` at the puncture: `X ~ Re(-A/(u - P))` in the
/// horizontal components and `x3 ~ Re(B3 log(u - P))`.
pub fn end_coefficients(s: &Surface) -> (C64, C64, C64) {
    let p = &s.params;
    let (c, lam, r) = (p.rho.cos(), p.lambda, p.r);
    let a = r * E8;
    let zp = I / lam;
    // dz/du at the puncture, from dz/du = -2 z / w
    let dz = -2.0 * zp / a;
    let b3 = E8 * (zp - I * lam) / dz;
    let dw = r * r * (1.0 / lam - lam) / (2.0 * c);
    let dg = dw / (2.0 * a);
    let a1 = 0.5 * b3 / dg;
    (a1, I * a1, b3)
}

fn end_model(coef: (C64, C64, C64), d: C64) -> V3 {
    let (a1, a2, b3) = coef;
    [(-a1 / d).re, (-a2 / d).re, (b3 * d.ln()).re]
}

/// Boundary nodes `E`, `C`, `E_hat` from `O` to `O'` with their images.
fn boundary_nodes(s: &Surface, per_piece: usize) -> Result<Vec<(C64, ChartPoint, V3)>> {
    let mut out: Vec<(C64, ChartPoint, V3)> = Vec::new();
    for (name, n) in [
        (PathName::E, per_piece / 2 + 1),
        (PathName::C, per_piece + 1),
        (PathName::EHat, per_piece / 2 + 1),
    ] {
        let pts = s.integrate_x(name, n.max(3))?;
        let skip = usize::from(!out.is_empty());
        for p in pts.into_iter().skip(skip) {
            out.push((p.base.u, ChartPoint::from_zw(p.base.z, p.base.w), p.x));
        }
    }
    Ok(out)
}

/// Flow point on the h-diagonal beyond the puncture, at `z = 2i/lambda`.
fn h2_anchor(s: &Surface) -> Result<FlowPoint> {
    let pts = s.integrate_x(PathName::H2, 2 * crate::torus::MIN_PANELS)?;
    // first H2 segment ends at z = 2i/lambda; it is halfway through the samples
    let target = 2.0 / s.params.lambda;
    let p = pts
        .iter()
        .min_by(|a, b| (a.base.z.im - target).abs().total_cmp(&(b.base.z.im - target).abs()))
        .ok_or_else(|| Error::Mesh("empty H2 track".into()))?;
    if (p.base.z.im - target).abs() > 1e-9 * target {
        return Err(Error::Mesh("H2 anchor not found on its track".into()));
    }
    Ok(FlowPoint {
        u: p.base.u,
        p: ChartPoint::from_zw(p.base.z, p.base.w),
        x: p.x,
    })
}

/// Flow sequentially through `targets` starting from `start`.
fn flow_chain(s: &Surface, start: FlowPoint, targets: &[C64]) -> Result<Vec<V3>> {
    let mut cur = start;
    let mut out = Vec::with_capacity(targets.len());
    for &t in targets {
        cur = crate::torus::flow(s.params.rho, &cur, t, &|p: &ChartPoint| s.phi(p), &s.ode)?;
        out.push(cur.x);
    }
    Ok(out)
}

/// Image of the grid of `D` under `X`.
pub fn patch_grid(s: &Surface, opts: &MeshOptions) -> Result<PatchGrid> {
    if opts.resolution < 4 {
        return Err(Error::Config("mesh resolution must be at least 4".into()));
    }
    let bnodes = boundary_nodes(s, 2 * opts.resolution)?;
    let rays = bnodes.len();
    let up = s.chart.anchor("puncture").u;
    // |du/dz| at the puncture turns the z-cutoff into a u-radius
    let dz = (2.0 * s.params.lambda.recip() / s.params.r).abs();
    let eps_u = s.cutoff / dz;
    let min_len = bnodes.iter().map(|b| (b.0 - up).norm()).fold(f64::INFINITY, f64::min);
    let s_min = eps_u / min_len;
    let m = opts.resolution;
    let levels_s: Vec<f64> = (0..=m)
        .map(|i| s_min.powf(i as f64 / m as f64))
        .chain((1..=opts.cap_levels).map(|k| s_min * 0.5f64.powi(k as i32)))
        .collect();
    let levels = levels_s.len();
    let h = s.h_mid_point();
    let h2 = h2_anchor(s)?;
    let cols: Vec<Result<(Vec<C64>, Vec<V3>)>> = (0..rays)
        .into_par_iter()
        .map(|j| {
            let (bu, bp, bx) = bnodes[j];
            let us: Vec<C64> = levels_s[..=m].iter().map(|&sv| up + sv * (bu - up)).collect();
            let mut xs = vec![bx];
            if j == 0 || j == rays - 1 {
                // the rays along the h-diagonal: flow from an anchor on each half
                let anchor = if j == 0 { h } else { h2 };
                let (ax, _) = RhombusChart::d_coords(anchor.u);
                let mut outward = Vec::new();
                let mut inward = Vec::new();
                for (k, &u) in us.iter().enumerate().skip(1) {
                    let (x, _) = RhombusChart::d_coords(u);
                    let (px, _) = RhombusChart::d_coords(up);
                    // nodes between the anchor and the corner versus towards the puncture
                    let between = (x - ax) * (px - ax) < 0.0;
                    if between {
                        outward.push((k, u));
                    } else {
                        inward.push((k, u));
                    }
                }
                let mut vals = vec![[0.0; 3]; us.len()];
                vals[0] = bx;
                // outward nodes are ordered from the corner towards the anchor
                let rev: Vec<C64> = outward.iter().rev().map(|p| p.1).collect();
                for (v, (k, _)) in flow_chain(s, anchor, &rev)?.into_iter().zip(outward.iter().rev()) {
                    vals[*k] = v;
                }
                let fwd: Vec<C64> = inward.iter().map(|p| p.1).collect();
                for (v, (k, _)) in flow_chain(s, anchor, &fwd)?.into_iter().zip(inward.iter()) {
                    vals[*k] = v;
                }
                xs = vals;
            } else {
                let start = FlowPoint { u: bu, p: bp, x: bx };
                xs.extend(flow_chain(s, start, &us[1..])?);
            }
            let mut us = us;
            if opts.cap_levels > 0 {
                let coef = end_coefficients(s);
                let (ur, xr) = (us[m], xs[m]);
                let base = end_model(coef, ur - up);
                for &sv in &levels_s[m + 1..] {
                    let u = up + sv * (bu - up);
                    let model = end_model(coef, u - up);
                    us.push(u);
                    xs.push([
                        xr[0] + model[0] - base[0],
                        xr[1] + model[1] - base[1],
                        xr[2] + model[2] - base[2],
                    ]);
                }
            }
            Ok((us, xs))
        })
        .collect();
    let mut u = vec![C64::new(0.0, 0.0); levels * rays];
    let mut x = vec![[0.0; 3]; levels * rays];
    for (j, col) in cols.into_iter().enumerate() {
        let (us, xs) = col.map_err(|e| Error::Mesh(format!("ray {j}: {e}")))?;
        for i in 0..levels {
            u[i * rays + j] = us[i];
            x[i * rays + j] = xs[i];
        }
    }
    Ok(PatchGrid {
        levels,
        rays,
        u,
        x,
        computed_levels: m + 1,
    })
}

fn dist(a: V3, b: V3) -> f64 {
    norm3([a[0] - b[0], a[1] - b[1], a[2] - b[2]])
}

fn triangulate(grid: &PatchGrid) -> Vec<[usize; 3]> {
    let mut faces = Vec::with_capacity(2 * grid.levels * grid.rays);
    for i in 0..grid.levels - 1 {
        for j in 0..grid.rays - 1 {
            let (a, b, c, d) = (
                grid.id(i, j),
                grid.id(i, j + 1),
                grid.id(i + 1, j + 1),
                grid.id(i + 1, j),
            );
            if dist(grid.x[a], grid.x[c]) <= dist(grid.x[b], grid.x[d]) {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    faces
}

/// Mesh of `X(D)`.
pub fn mesh_patch_d(s: &Surface, opts: &MeshOptions) -> Result<SurfaceMesh> {
    let grid = patch_grid(s, opts)?;
    let t = s.params.t;
    let a = s.start_x(Start::B)?[2];
    if !(a > 0.0) {
        return Err(Error::Mesh(format!("X(b) height a = {a} is not positive")));
    }
    let tol = 1e-7 * t;
    for i in 0..grid.computed_levels {
        for j in 0..grid.rays {
            let x = grid.x[grid.id(i, j)];
            if x[0] > tol || x[2] < -t / 2.0 - tol || x[2] > a + tol || !x.iter().all(|v| v.is_finite()) {
                return Err(Error::Mesh(format!(
                    "grid cell (level {i}, ray {j}) leaves the slab: {x:?}"
                )));
            }
        }
    }
    let faces = triangulate(&grid);
    let ray = |j: usize| -> Vec<V3> { (0..grid.levels).map(|i| grid.x[grid.id(i, j)]).collect() };
    let ring = |i: usize| -> Vec<V3> { (0..grid.rays).map(|j| grid.x[grid.id(i, j)]).collect() };
    let outer = ring(0);
    // split the outer ring at b and b_hat
    let (ib, ibh) = outer_split(&grid, s);
    let e: Vec<V3> = outer[..=ib].to_vec();
    let c: Vec<V3> = outer[ib..=ibh].to_vec();
    let eh: Vec<V3> = outer[ibh..].to_vec();
    let proj: Vec<V3> = c.iter().map(|p| [p[0], p[1], 0.0]).collect();
    let boundaries = vec![
        polyline("E", e),
        polyline("C", c),
        polyline("E_hat", eh),
        polyline("H1", ray(0)),
        polyline("H2", ray(grid.rays - 1)),
        polyline("c", proj),
    ];
    Ok(SurfaceMesh {
        vertices: grid.x.clone(),
        faces,
        boundaries,
        metadata: MeshMetadata {
            rho: s.params.rho,
            lambda: s.params.lambda,
            big_lambda: s.params.big_lambda,
            t,
            a,
            cutoff: s.cutoff,
            asymptotic_cap: opts.cap_levels > 0,
        },
    })
}

fn outer_split(grid: &PatchGrid, s: &Surface) -> (usize, usize) {
    let nearest = |target: C64| {
        (0..grid.rays)
            .min_by(|&p, &q| (grid.u[p] - target).norm().total_cmp(&(grid.u[q] - target).norm()))
            .unwrap_or(0)
    };
    (nearest(s.chart.anchor("b").u), nearest(s.chart.anchor("b_hat").u))
}

/// Spatial hash used for welding; cells of size `tol`.
struct Welder {
    tol: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    verts: Vec<V3>,
    max_gap: f64,
}

impl Welder {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            cells: HashMap::new(),
            verts: Vec::new(),
            max_gap: 0.0,
        }
    }

    fn key(&self, p: V3) -> (i64, i64, i64) {
        let k = |v: f64| (v / self.tol).floor() as i64;
        (k(p[0]), k(p[1]), k(p[2]))
    }

    fn insert(&mut self, p: V3) -> usize {
        let (kx, ky, kz) = self.key(p);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &id in ids {
                            let d = dist(self.verts[id], p);
                            if d <= self.tol && best.is_none_or(|b| d < b.1) {
                                best = Some((id, d));
                            }
                        }
                    }
                }
            }
        }
        if let Some((id, d)) = best {
            self.max_gap = self.max_gap.max(d);
            return id;
        }
        let id = self.verts.len();
        self.verts.push(p);
        self.cells.entry((kx, ky, kz)).or_default().push(id);
        id
    }
}

/// Result of welding several meshes.
#[derive(Debug, Clone)]
pub struct WeldReport {
    pub mesh: SurfaceMesh,
    pub input_vertices: usize,
    pub merged: usize,
    pub max_gap: f64,
}

fn weld(
    parts: &[(Vec<V3>, Vec<[usize; 3]>)],
    tol: f64,
    template: &SurfaceMesh,
    boundaries: Vec<Polyline>,
) -> WeldReport {
    let mut w = Welder::new(tol);
    let mut faces = Vec::new();
    let mut input = 0;
    for (verts, fs) in parts {
        input += verts.len();
        let map: Vec<usize> = verts.iter().map(|&p| w.insert(p)).collect();
        for f in fs {
            let g = [map[f[0]], map[f[1]], map[f[2]]];
            if g[0] != g[1] && g[1] != g[2] && g[0] != g[2] {
                faces.push(g);
            }
        }
    }
    let merged = input - w.verts.len();
    WeldReport {
        mesh: SurfaceMesh {
            vertices: w.verts,
            faces,
            boundaries,
            metadata: template.metadata.clone(),
        },
        input_vertices: input,
        merged,
        max_gap: w.max_gap,
    }
}

fn map_part(m: &SurfaceMesh, f: impl Fn(V3) -> V3, flip: bool) -> (Vec<V3>, Vec<[usize; 3]>) {
    let verts = m.vertices.iter().map(|&p| f(p)).collect();
    let faces = m
        .faces
        .iter()
        .map(|t| if flip { [t[0], t[2], t[1]] } else { *t })
        .collect();
    (verts, faces)
}

/// `s(x) = (x1, -x2, -x3)`.
pub fn s_map(p: V3) -> V3 {
    [p[0], -p[1], -p[2]]
}

/// `sigma(x) = (-x1, -x2, x3)`.
pub fn sigma_map(p: V3) -> V3 {
    [-p[0], -p[1], p[2]]
}

/// The four pieces `D`, `s D`, `sigma D`, `sigma s D`, welded. Half turns
/// about lines on the surface reverse the orientation of the parameter, so
/// the `sigma` pieces are flipped.
pub fn assemble_fundamental_domain(patch: &SurfaceMesh) -> Result<WeldReport> {
    let t = patch.metadata.t;
    let tol = 1e-7 * t;
    // seams: the patch edges that lie on the vertical axis and on the x2-axis
    let mut seam_gap = 0.0f64;
    for name in ["E", "E_hat"] {
        for p in &boundary(patch, name)?.points {
            seam_gap = seam_gap.max(2.0 * (p[0] * p[0] + p[1] * p[1]).sqrt());
        }
    }
    for p in &boundary(patch, "H1")?.points {
        seam_gap = seam_gap.max(2.0 * (p[0] * p[0] + p[2] * p[2]).sqrt());
    }
    if seam_gap > tol {
        return Err(Error::Mesh(format!(
            "seam mismatch: max gap {seam_gap:.3e} exceeds {tol:.3e}"
        )));
    }
    let parts = [
        map_part(patch, |p| p, false),
        map_part(patch, s_map, false),
        map_part(patch, sigma_map, true),
        map_part(patch, |p| sigma_map(s_map(p)), true),
    ];
    let mut bl = Vec::new();
    for (tag, f) in [
        ("", (|p| p) as fn(V3) -> V3),
        ("s", s_map),
        ("sigma", sigma_map),
        ("sigma_s", |p| sigma_map(s_map(p))),
    ] {
        for b in &patch.boundaries {
            let name = if tag.is_empty() {
                b.name.clone()
            } else {
                format!("{tag}:{}", b.name)
            };
            bl.push(polyline(&name, b.points.iter().map(|&p| f(p)).collect()));
        }
    }
    let rep = weld(&parts, tol, patch, bl);
    Ok(WeldReport {
        max_gap: rep.max_gap.max(seam_gap),
        ..rep
    })
}

pub fn boundary<'a>(m: &'a SurfaceMesh, name: &str) -> Result<&'a Polyline> {
    m.boundaries
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::Mesh(format!("missing boundary polyline {name}")))
}

/// `k` copies translated by `(0, 0, j T)`, welded.
pub fn stack_periods(domain: &SurfaceMesh, k: usize) -> Result<WeldReport> {
    if k < 1 {
        return Err(Error::Config("need at least one copy".into()));
    }
    let t = domain.metadata.t;
    let parts: Vec<_> = (0..k)
        .map(|j| map_part(domain, |p| [p[0], p[1], p[2] + j as f64 * t], false))
        .collect();
    let mut bl = Vec::new();
    for j in 0..k {
        for b in &domain.boundaries {
            let name = if k == 1 {
                b.name.clone()
            } else {
                format!("{j}:{}", b.name)
            };
            bl.push(polyline(
                &name,
                b.points.iter().map(|p| [p[0], p[1], p[2] + j as f64 * t]).collect(),
            ));
        }
    }
    Ok(weld(&parts, 1e-7 * t, domain, bl))
}

impl SurfaceMesh {
    pub fn bounding_box(&self) -> (V3, V3) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.vertices {
            for i in 0..3 {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (lo, hi)
    }

    /// Smallest triangle area.
    pub fn min_face_area(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let (a, b, c) = (self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
                let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
                0.5 * norm3([
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ])
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// True when every directed edge occurs at most once, so adjacent faces agree in orientation.
    pub fn orientation_consistent(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        for f in &self.faces {
            for k in 0..3 {
                if !seen.insert((f[k], f[(k + 1) % 3])) {
                    return false;
                }
            }
        }
        true
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.vertices.is_empty() || self.faces.is_empty() {
            return Err(Error::Mesh("refusing to export an empty mesh".into()));
        }
        Ok(())
    }
}

/// Provenance lines written at the top of every exported file.
pub fn provenance(meta: &MeshMetadata, extra: &[(String, String)]) -> Vec<String> {
    let mut out = vec![
        format!("generator: helicoid {}", env!("CARGO_PKG_VERSION")),
        format!("rho0: {:.17e}", meta.rho),
        format!("lambda0: {:.17e}", meta.lambda),
        format!("T: {:.17e}", meta.t),
        format!("a: {:.17e}", meta.a),
        format!("cutoff: {:e}", meta.cutoff),
        format!("asymptotic_cap: {}", meta.asymptotic_cap),
    ];
    out.extend(extra.iter().map(|(k, v)| format!("{k}: {v}")));
    out
}

fn write_file(path: &FsPath, bytes: &[u8]) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let mut f = File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(ctx(), e))?;
    f.write_all(bytes).map_err(|e| Error::io(ctx(), e))?;
    f.flush().map_err(|e| Error::io(ctx(), e))
}

fn read_file(path: &FsPath) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(bytes)
}

/// ASCII OBJ with 9 significant digits.
pub fn obj_bytes(m: &SurfaceMesh, extra: &[(String, String)]) -> Result<Vec<u8>> {
    m.check_nonempty()?;
    let mut body = String::new();
    for line in provenance(&m.metadata, extra) {
        body.push_str(&format!("# {line}\n"));
    }
    for p in &m.vertices {
        body.push_str(&format!("v {:.8e} {:.8e} {:.8e}\n", p[0], p[1], p[2]));
    }
    for t in &m.faces {
        body.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    Ok(body.into_bytes())
}

pub fn parse_obj(bytes: &[u8]) -> Result<(Vec<V3>, Vec<[usize; 3]>)> {
    let mut verts = Vec::new();
    let mut faces = Vec::new();
    for line in bytes.lines() {
        let line = line.map_err(|e| Error::io("reading OBJ", e))?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let v: Vec<f64> = it
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Mesh(format!("bad vertex line {line:?}: {e}")))?;
                if v.len() != 3 {
                    return Err(Error::Mesh(format!("bad vertex line {line:?}")));
                }
                verts.push([v[0], v[1], v[2]]);
            }
            Some("f") => {
                let v: Vec<usize> = it
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::Mesh(format!("bad face line {line:?}: {e}")))?;
                if v.len() != 3 || v.contains(&0) {
                    return Err(Error::Mesh(format!("bad face line {line:?}")));
                }
                faces.push([v[0] - 1, v[1] - 1, v[2] - 1]);
            }
            _ => {}
        }
    }
    Ok((verts, faces))
}

pub fn export_obj(m: &SurfaceMesh, path: &FsPath, extra: &[(String, String)]) -> Result<()> {
    write_file(path, &obj_bytes(m, extra)?)
}

pub fn read_obj(path: &FsPath) -> Result<(Vec<V3>, Vec<[usize; 3]>)> {
    parse_obj(&read_file(path)?)
}

/// Binary little-endian PLY with float64 coordinates.
pub fn ply_bytes(m: &SurfaceMesh, extra: &[(String, String)]) -> Result<Vec<u8>> {
    m.check_nonempty()?;
    let mut head = String::from("ply\nformat binary_little_endian 1.0\n");
    for line in provenance(&m.metadata, extra) {
        head.push_str(&format!("comment {line}\n"));
    }
    head.push_str(&format!(
        "element vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        m.vertices.len(),
        m.faces.len()
    ));
    let mut buf = head.into_bytes();
    for p in &m.vertices {
        for v in p {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    for t in &m.faces {
        buf.push(3);
        for &k in t {
            let k = i32::try_from(k).map_err(|_| Error::Mesh("vertex index exceeds PLY int range".into()))?;
            buf.extend_from_slice(&k.to_le_bytes());
        }
    }
    Ok(buf)
}

pub fn parse_ply(bytes: &[u8]) -> Result<(Vec<V3>, Vec<[usize; 3]>)> {
    let marker = b"end_header\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| Error::Mesh("PLY header not terminated".into()))?
        + marker.len();
    let header = String::from_utf8_lossy(&bytes[..end]);
    let count = |el: &str| -> Result<usize> {
        header
            .lines()
            .find_map(|l| l.strip_prefix(&format!("element {el} ")))
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::Mesh(format!("PLY header lacks element {el}")))
    };
    let (nv, nf) = (count("vertex")?, count("face")?);
    let mut pos = end;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes
            .get(pos..pos + n)
            .ok_or_else(|| Error::Mesh("PLY body truncated".into()))?;
        pos += n;
        Ok(s)
    };
    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut p = [0.0; 3];
        for v in &mut p {
            *v = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
        }
        verts.push(p);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        if take(1)?[0] != 3 {
            return Err(Error::Mesh("only triangles are supported".into()));
        }
        let mut t = [0usize; 3];
        for k in &mut t {
            *k = i32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        }
        faces.push(t);
    }
    Ok((verts, faces))
}

pub fn export_ply(m: &SurfaceMesh, path: &FsPath, extra: &[(String, String)]) -> Result<()> {
    write_file(path, &ply_bytes(m, extra)?)
}

pub fn read_ply(path: &FsPath) -> Result<(Vec<V3>, Vec<[usize; 3]>)> {
    parse_ply(&read_file(path)?)
}

pub fn export_curves_csv(m: &SurfaceMesh, path: &FsPath, extra: &[(String, String)]) -> Result<()> {
    if m.boundaries.is_empty() {
        return Err(Error::Mesh("no curves to export".into()));
    }
    let mut body = String::new();
    for line in provenance(&m.metadata, extra) {
        body.push_str(&format!("# {line}\n"));
    }
    body.push_str(&curves_csv(&m.boundaries));
    write_file(path, body.as_bytes())
}

/// `name,index,x1,x2,x3` rows at 17 significant digits.
pub fn curves_csv(curves: &[Polyline]) -> String {
    let mut s = String::from("name,index,x1,x2,x3\n");
    for c in curves {
        for (i, p) in c.points.iter().enumerate() {
            s.push_str(&format!("{},{},{:.16e},{:.16e},{:.16e}\n", c.name, i, p[0], p[1], p[2]));
        }
    }
    s
}

/// Named polylines from a curves file.
pub fn read_curves_csv(path: &FsPath) -> Result<Vec<Polyline>> {
    let bytes = read_file(path)?;
    let mut out: Vec<Polyline> = Vec::new();
    for line in bytes.lines() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.starts_with('#') || line.starts_with("name,") || line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(Error::Mesh(format!("bad curve row {line:?}")));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Mesh(format!("bad curve row {line:?}: {e}")))
        };
        let p = [num(cols[2])?, num(cols[3])?, num(cols[4])?];
        match out.last_mut() {
            Some(c) if c.name == cols[0] => c.points.push(p),
            _ => out.push(polyline(cols[0], vec![p])),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SurfaceParams;
    use crate::quadrature::QuadratureSpec;
    use std::sync::OnceLock;

    const RHO: f64 = 0.710_521_980_045_750_4;
    const LAMBDA: f64 = 0.588_299_530_365_709;

    fn surface() -> &'static Surface {
        static S: OnceLock<Surface> = OnceLock::new();
        S.get_or_init(|| Surface::new(SurfaceParams::new(RHO, LAMBDA).unwrap(), &QuadratureSpec::precise()).unwrap())
    }

    fn patch() -> &'static SurfaceMesh {
        static M: OnceLock<SurfaceMesh> = OnceLock::new();
        M.get_or_init(|| {
            mesh_patch_d(
                surface(),
                &MeshOptions {
                    resolution: 12,
                    cap_levels: 0,
                },
            )
            .unwrap()
        })
    }

    #[test]
    fn corners_and_rays() {
        let m = patch();
        let t = m.metadata.t;
        let h1 = &boundary(m, "H1").unwrap().points;
        assert!(norm3(h1[0]) < 1e-12);
        let h2 = &boundary(m, "H2").unwrap().points;
        assert!(dist(h2[0], [0.0, 0.0, -t / 2.0]) < 1e-9);
        for p in h2 {
            assert!(
                p[0].abs() < 1e-8 && (p[2] + t / 2.0).abs() < 1e-8 && p[1] > -1e-9,
                "{p:?}"
            );
        }
        for p in h1 {
            assert!(p[0].abs() < 1e-8 && p[2].abs() < 1e-8 && p[1] < 1e-9, "{p:?}");
        }
        assert!(m.metadata.a > 0.0);
    }

    #[test]
    fn patch_is_a_graph_in_the_slab() {
        let m = patch();
        let t = m.metadata.t;
        for p in &m.vertices {
            assert!(p[0] <= 1e-7 * t && p[2] >= -t / 2.0 - 1e-7 * t && p[2] <= m.metadata.a + 1e-7 * t);
        }
        assert!(m.orientation_consistent());
        assert!(m.min_face_area() > 0.0);
    }

    #[test]
    fn fundamental_domain_welds() {
        let m = patch();
        let rep = assemble_fundamental_domain(m).unwrap();
        assert!(rep.max_gap < 1e-7 * m.metadata.t);
        assert_eq!(rep.mesh.vertices.len(), 4 * m.vertices.len() - rep.merged);
        assert!(rep.merged > 0);
        assert!(rep.mesh.orientation_consistent());
        // the fundamental domain is invariant under sigma
        let mut w = Welder::new(1e-7 * m.metadata.t);
        for &p in &rep.mesh.vertices {
            w.insert(p);
        }
        let before = w.verts.len();
        for &p in &rep.mesh.vertices {
            w.insert(sigma_map(p));
        }
        assert_eq!(w.verts.len(), before);
    }

    #[test]
    fn stacking() {
        let rep = assemble_fundamental_domain(patch()).unwrap();
        let one = stack_periods(&rep.mesh, 1).unwrap();
        assert_eq!(one.mesh.vertices.len(), rep.mesh.vertices.len());
        let three = stack_periods(&rep.mesh, 3).unwrap();
        let (l1, h1) = one.mesh.bounding_box();
        let (l3, h3) = three.mesh.bounding_box();
        let t = patch().metadata.t;
        assert!(((h3[2] - l3[2]) - (h1[2] - l1[2]) - 2.0 * t).abs() < 1e-12);
        assert!(three.merged > 0);
        assert!(three.mesh.orientation_consistent());
        assert!(stack_periods(&rep.mesh, 0).is_err());
    }

    #[test]
    fn exports_round_trip() {
        let m = patch();
        let dir = tempfile::tempdir().unwrap();
        let obj = dir.path().join("m.obj");
        export_obj(m, &obj, &[]).unwrap();
        let (v, f) = read_obj(&obj).unwrap();
        assert_eq!(f, m.faces);
        for (a, b) in v.iter().zip(&m.vertices) {
            for i in 0..3 {
                assert!((a[i] - b[i]).abs() <= 1e-8 * b[i].abs().max(1e-300));
            }
        }
        let ply = dir.path().join("m.ply");
        export_ply(m, &ply, &[]).unwrap();
        let (v, f) = read_ply(&ply).unwrap();
        assert_eq!(v, m.vertices);
        assert_eq!(f, m.faces);
        let csv = dir.path().join("c.csv");
        export_curves_csv(m, &csv, &[]).unwrap();
        let curves = read_curves_csv(&csv).unwrap();
        let c = curves.iter().find(|c| c.name == "c").unwrap();
        assert!(c.points.iter().all(|p| p[2] == 0.0));
        assert_eq!(c.points.len(), boundary(m, "C").unwrap().points.len());
        let empty = SurfaceMesh {
            vertices: vec![],
            faces: vec![],
            boundaries: vec![],
            metadata: m.metadata.clone(),
        };
        assert!(export_obj(&empty, &dir.path().join("e.obj"), &[]).is_err());
        assert!(!dir.path().join("e.obj").exists());
    }

    #[test]
    fn end_is_helicoidal() {
        let s = surface();
        let grid = patch_grid(
            s,
            &MeshOptions {
                resolution: 12,
                cap_levels: 0,
            },
        )
        .unwrap();
        let t = s.params.t;
        let up = s.chart.anchor("puncture").u;
        let coef = end_coefficients(s);
        let (i1, i0) = (grid.computed_levels - 1, grid.computed_levels - 3);
        for j in 0..grid.rays {
            let (a, b) = (grid.id(i0, j), grid.id(i1, j));
            let dm = end_model(coef, grid.u[b] - up)[2] - end_model(coef, grid.u[a] - up)[2];
            let dx = grid.x[b][2] - grid.x[a][2];
            assert!((dx - dm).abs() < 0.01 * t, "ray {j}: {dx} vs {dm}");
        }
    }

    #[test]
    fn cap_extends_the_end() {
        let s = surface();
        let m = mesh_patch_d(
            s,
            &MeshOptions {
                resolution: 6,
                cap_levels: 3,
            },
        )
        .unwrap();
        assert!(m.metadata.asymptotic_cap);
        let r_plain = patch().vertices.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        let r_cap = m.vertices.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
        assert!(r_cap > 4.0 * r_plain);
    }
}
