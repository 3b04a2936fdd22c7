//! Level sets of U = φ∘u and the diagnostics built on them: the discrete
//! coarea identity, per-slice energies of v, measure-function pair gaps and
//! the density probe.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::energy::mm_at;
use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::grid::{project_tangential, ScalarField, Stencil};
use crate::mc_tables::{EDGE_TABLE, TRI_TABLE};
use crate::potential::DoubleWell;
use crate::reduce;

const CUBE_CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const CUBE_EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

const SQUARE_CORNERS: [[usize; 3]; 4] = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]];
const SQUARE_EDGES: [[usize; 2]; 4] = [[0, 1], [1, 2], [2, 3], [3, 0]];

/// Segments as edge pairs for each corner mask (bit k set when corner k is below the level).
const SQUARE_SEGMENTS: [[i8; 4]; 16] = [
    [-1, -1, -1, -1],
    [3, 0, -1, -1],
    [0, 1, -1, -1],
    [3, 1, -1, -1],
    [1, 2, -1, -1],
    [3, 0, 1, 2],
    [0, 2, -1, -1],
    [3, 2, -1, -1],
    [2, 3, -1, -1],
    [0, 2, -1, -1],
    [0, 1, 2, 3],
    [1, 2, -1, -1],
    [1, 3, -1, -1],
    [0, 1, -1, -1],
    [3, 0, -1, -1],
    [-1, -1, -1, -1],
];

/// A level set {U = t} as a soup of simplices (segments in 2D, triangles in 3D).
#[derive(Debug, Clone, Serialize)]
pub struct IsoSurface {
    pub level: f64,
    pub dim: usize,
    pub vertices: Vec<[f64; 3]>,
    /// Vertex indices; segments use the first two entries.
    pub simplices: Vec<[usize; 3]>,
    pub measures: Vec<f64>,
    /// Auxiliary fields interpolated at the vertices, one vector per field.
    pub scalars: Vec<Vec<f64>>,
}

impl IsoSurface {
    pub fn total_measure(&self) -> f64 {
        reduce::sum_slice(&self.measures)
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    /// JSON document with `vertices`, `simplices` and per-vertex `scalars`.
    pub fn to_json(&self) -> serde_json::Value {
        let n = self.dim;
        let verts: Vec<Vec<f64>> = self.vertices.iter().map(|v| v[..n].to_vec()).collect();
        let simp: Vec<Vec<usize>> = self.simplices.iter().map(|s| s[..n].to_vec()).collect();
        serde_json::json!({
            "level": self.level,
            "dim": n,
            "vertices": verts,
            "simplices": simp,
            "scalars": self.scalars,
        })
    }
}

/// One crossing cell: corner values and positions, plus lazily evaluated aux values.
struct Cell<const K: usize> {
    values: [f64; 8],
    points: [[f64; 3]; 8],
    aux: [[f64; K]; 8],
}

#[inline]
fn lerp3(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])]
}

#[inline]
fn lerpk<const K: usize>(a: [f64; K], b: [f64; K], s: f64) -> [f64; K] {
    let mut out = [0.0; K];
    for k in 0..K {
        out[k] = a[k] + s * (b[k] - a[k]);
    }
    out
}

#[inline]
fn edge_vertex<const K: usize>(cell: &Cell<K>, e: [usize; 2], t: f64) -> ([f64; 3], [f64; K]) {
    let (v0, v1) = (cell.values[e[0]], cell.values[e[1]]);
    let s = (t - v0) / (v1 - v0);
    (lerp3(cell.points[e[0]], cell.points[e[1]], s), lerpk(cell.aux[e[0]], cell.aux[e[1]], s))
}

fn tri_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let x = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

fn seg_len(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
}

/// Emits every simplex of level `t` in a cell as (vertices, aux values, measure).
fn cell_simplices<const K: usize>(
    cell: &Cell<K>,
    dim: usize,
    t: f64,
    emit: &mut impl FnMut(&[[f64; 3]], &[[f64; K]], f64),
) {
    if dim == 3 {
        let mut mask = 0usize;
        for c in 0..8 {
            if cell.values[c] < t {
                mask |= 1 << c;
            }
        }
        let edges = EDGE_TABLE[mask];
        if edges == 0 {
            return;
        }
        let mut pts = [[0.0; 3]; 12];
        let mut aux = [[0.0; K]; 12];
        for (e, ends) in CUBE_EDGES.iter().enumerate() {
            if edges & (1 << e) != 0 {
                let (p, a) = edge_vertex(cell, *ends, t);
                pts[e] = p;
                aux[e] = a;
            }
        }
        let tris = &TRI_TABLE[mask];
        let mut k = 0;
        while k < 16 && tris[k] >= 0 {
            let (a, b, c) = (tris[k] as usize, tris[k + 1] as usize, tris[k + 2] as usize);
            let p = [pts[a], pts[b], pts[c]];
            emit(&p, &[aux[a], aux[b], aux[c]], tri_area(p[0], p[1], p[2]));
            k += 3;
        }
    } else {
        let mut mask = 0usize;
        for c in 0..4 {
            if cell.values[c] < t {
                mask |= 1 << c;
            }
        }
        let segs = &SQUARE_SEGMENTS[mask];
        let mut k = 0;
        while k < 4 && segs[k] >= 0 {
            let (a, aa) = edge_vertex(cell, SQUARE_EDGES[segs[k] as usize], t);
            let (b, ba) = edge_vertex(cell, SQUARE_EDGES[segs[k + 1] as usize], t);
            emit(&[a, b], &[aa, ba], seg_len(a, b));
            k += 2;
        }
    }
}

/// Visits every cell that is crossed by at least one of the sorted `levels`,
/// slab by slab along axis 0. Per-slab results are returned in slab order.
fn scan_cells<const K: usize, A, R, F>(field: &ScalarField, levels: &[f64], aux: &A, visit: F) -> Result<Vec<R>>
where
    A: Fn(usize) -> [f64; K] + Sync,
    R: Send + Default,
    F: Fn(&mut R, &Cell<K>, &[usize]) + Sync,
{
    let spec = field.spec();
    let dim = spec.dim();
    if dim < 2 {
        return Err(Error::Shape("level sets need a 2D or 3D grid".into()));
    }
    if spec.dims().iter().any(|&d| d < 2) {
        return Err(Error::Shape("level sets need at least 2 points per axis".into()));
    }
    let d = spec.padded_dims();
    let vals = field.values();
    let (corners, ncorner): (&[[usize; 3]], usize) = if dim == 3 { (&CUBE_CORNERS, 8) } else { (&SQUARE_CORNERS, 4) };
    let n2 = if dim == 3 { d[2] - 1 } else { 1 };
    Ok((0..d[0] - 1)
        .into_par_iter()
        .map(|i| {
            let mut acc = R::default();
            let mut lv: Vec<usize> = Vec::with_capacity(levels.len());
            for j in 0..d[1] - 1 {
                for k in 0..n2 {
                    let mut cell = Cell::<K> {
                        values: [0.0; 8],
                        points: [[0.0; 3]; 8],
                        aux: [[0.0; K]; 8],
                    };
                    let mut ids = [0usize; 8];
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for c in 0..ncorner {
                        let o = corners[c];
                        let id = spec.ravel([i + o[0], j + o[1], k + o[2]]);
                        ids[c] = id;
                        let v = vals[id];
                        cell.values[c] = v;
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                    // crossed by t when lo < t <= hi
                    let first = levels.partition_point(|&t| t <= lo);
                    let last = levels.partition_point(|&t| t <= hi);
                    if first >= last {
                        continue;
                    }
                    for c in 0..ncorner {
                        let o = corners[c];
                        cell.points[c] = spec.coords([i + o[0], j + o[1], k + o[2]]);
                        cell.aux[c] = aux(ids[c]);
                    }
                    lv.clear();
                    lv.extend(first..last);
                    visit(&mut acc, &cell, &lv);
                }
            }
            acc
        })
        .collect())
}

/// Level set {U = t} by marching squares (2D) or marching cubes (3D) with
/// linear interpolation along grid edges.
pub fn extract(field: &ScalarField, t: f64) -> Result<IsoSurface> {
    extract_with(field, t, &[])
}

/// As [`extract`], interpolating the given fields at the vertices.
pub fn extract_with(field: &ScalarField, t: f64, aux: &[&ScalarField]) -> Result<IsoSurface> {
    for a in aux {
        field.require_same_grid(a)?;
    }
    let dim = field.spec().dim();
    #[derive(Default)]
    struct Part {
        vertices: Vec<[f64; 3]>,
        measures: Vec<f64>,
    }
    let parts: Vec<Part> = scan_cells::<0, _, Part, _>(field, &[t], &|_| [], |part, cell, _| {
        cell_simplices(cell, dim, t, &mut |pts, _, m| {
            part.vertices.extend_from_slice(pts);
            part.measures.push(m);
        });
    })?;
    let mut out = IsoSurface {
        level: t,
        dim,
        vertices: Vec::new(),
        simplices: Vec::new(),
        measures: Vec::new(),
        scalars: Vec::new(),
    };
    for part in parts {
        let base = out.vertices.len();
        for s in 0..part.measures.len() {
            let b = base + s * dim;
            out.simplices.push(if dim == 3 { [b, b + 1, b + 2] } else { [b, b + 1, b + 1] });
        }
        out.vertices.extend(part.vertices);
        out.measures.extend(part.measures);
    }
    // traversal order is fixed, so a second pass yields vertices in the same order
    out.scalars = interpolate_aux(field, t, aux)?;
    Ok(out)
}

fn interpolate_aux(field: &ScalarField, t: f64, aux: &[&ScalarField]) -> Result<Vec<Vec<f64>>> {
    let dim = field.spec().dim();
    let mut out = vec![Vec::new(); aux.len()];
    for (k, a) in aux.iter().enumerate() {
        let av = a.values();
        let parts: Vec<Vec<f64>> = scan_cells::<1, _, Vec<f64>, _>(field, &[t], &|i| [av[i]], |part, cell, _| {
            cell_simplices(cell, dim, t, &mut |_, vals, _| {
                part.extend(vals.iter().map(|v| v[0]));
            });
        })?;
        for p in parts {
            out[k].extend(p);
        }
    }
    Ok(out)
}

/// Sums `integrand(level index, aux at vertex)` over all simplices of every
/// level, weighting each simplex by its measure and averaging over its vertices.
pub(crate) fn level_integrals<const K: usize, A, G>(
    field: &ScalarField,
    levels: &[f64],
    aux: A,
    integrand: G,
) -> Result<Vec<f64>>
where
    A: Fn(usize) -> [f64; K] + Sync,
    G: Fn(usize, &[f64; K]) -> f64 + Sync,
{
    if levels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("levels must be sorted".into()));
    }
    let dim = field.spec().dim();
    let parts: Vec<Vec<f64>> = scan_cells::<K, _, Vec<f64>, _>(field, levels, &aux, |acc, cell, lv| {
        if acc.is_empty() {
            acc.resize(levels.len(), 0.0);
        }
        for &l in lv {
            let t = levels[l];
            let mut sum = 0.0;
            cell_simplices(cell, dim, t, &mut |_, vals, m| {
                let mean = vals.iter().map(|v| integrand(l, v)).sum::<f64>() / vals.len() as f64;
                sum += m * mean;
            });
            acc[l] += sum;
        }
    })?;
    let mut total = vec![0.0; levels.len()];
    for p in parts {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    Ok(total)
}

/// Hⁿ⁻¹ measure of every level set in `levels` (sorted ascending).
pub fn level_measures(field: &ScalarField, levels: &[f64]) -> Result<Vec<f64>> {
    level_integrals::<0, _, _>(field, levels, |_| [], |_, _| 1.0)
}

/// φ∘u.
pub fn compose_phi(u: &ScalarField, well: &DoubleWell) -> ScalarField {
    u.map(|x| well.phi_unchecked(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoareaCheck {
    /// ∫|∇U| over the hull of the grid points
    pub lhs: f64,
    /// midpoint quadrature of t ↦ Per({U > t})
    pub rhs: f64,
    pub gap: f64,
}

/// Trapezoid weight of a grid point: 1/2 per axis on which it lies on a face.
fn hull_weight(idx: [usize; 3], d: [usize; 3], dim: usize) -> f64 {
    let mut w = 1.0;
    for a in 0..dim {
        if idx[a] == 0 || idx[a] + 1 == d[a] {
            w *= 0.5;
        }
    }
    w
}

/// Compares ∫|∇U| with ∫ Per({U > t}) dt over `samples` uniform levels.
/// Both sides are taken over the hull of the grid points, where the level sets live.
pub fn coarea_check(field: &ScalarField, samples: usize) -> Result<CoareaCheck> {
    if samples < 16 {
        return Err(Error::Config(format!("coarea check needs at least 16 levels, got {samples}")));
    }
    let st = field.stencil()?;
    let spec = field.spec();
    let d = spec.padded_dims();
    let dim = spec.dim();
    let lhs = spec.cell_volume()
        * reduce::sum(spec.len(), |i| {
            let idx = spec.unravel(i);
            let g = st.gradient(i, idx);
            hull_weight(idx, d, dim) * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
        });
    let (lo, hi) = field.min_max();
    if hi <= lo {
        return Ok(CoareaCheck {
            lhs: 0.0,
            rhs: 0.0,
            gap: 0.0,
        });
    }
    let dt = (hi - lo) / samples as f64;
    let levels: Vec<f64> = (0..samples).map(|k| lo + (k as f64 + 0.5) * dt).collect();
    let rhs = level_measures(field, &levels)?.iter().sum::<f64>() * dt;
    let gap = if lhs > 0.0 { (lhs - rhs).abs() / lhs } else { 0.0 };
    Ok(CoareaCheck { lhs, rhs, gap })
}

/// ∫_{U = t} W(v)/ε + (ε/2)|∇_τ v|² with U = φ∘u and ∇_τ v the part of ∇v
/// tangent to the level sets of u.
pub fn per_slice_mm(u: &ScalarField, v: &ScalarField, well: &DoubleWell, epsilon: f64, t: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("ε must be positive, got {epsilon}")));
    }
    u.require_same_grid(v)?;
    let big_u = compose_phi(u, well);
    per_slice_mm_with(&big_u, u, v, well, epsilon, &[t]).map(|v| v[0])
}

/// [`per_slice_mm`] at several sorted levels, with U = φ∘u precomputed.
pub fn per_slice_mm_with(
    big_u: &ScalarField,
    u: &ScalarField,
    v: &ScalarField,
    well: &DoubleWell,
    epsilon: f64,
    levels: &[f64],
) -> Result<Vec<f64>> {
    big_u.require_same_grid(u)?;
    u.require_same_grid(v)?;
    let (su, sv) = (u.stencil()?, v.stencil()?);
    let spec = u.spec();
    level_integrals::<4, _, _>(
        big_u,
        levels,
        |i| {
            let idx = spec.unravel(i);
            let (g, _) = project_tangential(sv.gradient(i, idx), su.gradient(i, idx));
            [sv.value(i), g[0], g[1], g[2]]
        },
        |_, a| well.w(a[0]) / epsilon + 0.5 * epsilon * (a[1] * a[1] + a[2] * a[2] + a[3] * a[3]),
    )
}

/// φ(x, s) = exp(−|x − c|²/2)·clamp(s, −2, 2)^m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestFunction {
    pub id: &'static str,
    pub center: [f64; 3],
    pub power: u32,
}

impl TestFunction {
    #[inline]
    pub fn eval(&self, x: [f64; 3], s: f64) -> f64 {
        let c = self.center;
        let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2) + (x[2] - c[2]).powi(2);
        (-0.5 * r2).exp() * s.clamp(-2.0, 2.0).powi(self.power as i32)
    }

    /// Upper bound of |φ(x, s)| for |s| ≤ `s_max`.
    pub fn sup(&self, s_max: f64) -> f64 {
        s_max.min(2.0).powi(self.power as i32)
    }
}

/// The six built-in test functions: centres 0 and (1/2, 0, 0), powers 0, 1, 2.
pub fn builtin_test_functions() -> Vec<TestFunction> {
    const IDS: [&str; 6] = ["c0_m0", "c0_m1", "c0_m2", "c1_m0", "c1_m1", "c1_m2"];
    let centers = [[0.0; 3], [0.5, 0.0, 0.0]];
    let mut out = Vec::with_capacity(6);
    for (k, c) in centers.iter().enumerate() {
        for m in 0..3 {
            out.push(TestFunction {
                id: IDS[3 * k + m as usize],
                center: *c,
                power: m,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MfPairGap {
    pub id: String,
    /// ∫ φ(x, v)|∇U|
    pub grad_integral: f64,
    /// ∫ φ(x, v) dμ_ε
    pub mu_integral: f64,
    /// σ ∫_{∂E} φ(y, v₀(y)) dHⁿ⁻¹
    pub reference: f64,
    pub gap: f64,
    pub mu_gap: f64,
    /// ‖φ‖_∞ over the values taken by v
    pub phi_sup: f64,
    pub discrepancy_l1: f64,
    /// |mu_gap − gap| ≤ ‖φ‖_∞·discrepancy_l1 + 1e−10
    pub inequality_holds: bool,
}

/// σ∫_{∂E} φ(y, v₀(y)) by the latitude–longitude rule (512×1024) on spheres
/// or the arc rule (4096 nodes) on circles, v₀ being ±1 on F and its complement.
pub fn reference_integral(geometry: &Geometry, well: &DoubleWell, phi: &TestFunction) -> Result<f64> {
    let nodes = match geometry.dim() {
        3 => geometry.surface_quadrature(512, 1024)?,
        _ => geometry.surface_quadrature(0, 4096)?,
    };
    let vals: Vec<f64> = nodes.iter().map(|(y, w)| w * phi.eval(*y, geometry.limit_phase(*y))).collect();
    Ok(well.sigma() * reduce::sum_slice(&vals))
}

/// Gaps of the pairs (|∇U_ε|, v_ε) and (μ_ε, v_ε) against the limit pair, for
/// each test function. |∇U_ε| is taken by the chain rule, √(2W(u))|∇u|.
pub fn mf_pair_gaps(
    u: &ScalarField,
    v: &ScalarField,
    well: &DoubleWell,
    epsilon: f64,
    geometry: &Geometry,
    tests: &[TestFunction],
) -> Result<Vec<MfPairGap>> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("ε must be positive, got {epsilon}")));
    }
    u.require_same_grid(v)?;
    let su = u.stencil()?;
    let spec = u.spec();
    let vv = v.values();
    let vol = spec.cell_volume();
    let (vmin, vmax) = v.min_max();
    let s_max = vmin.abs().max(vmax.abs());
    let disc = vol
        * reduce::sum(spec.len(), |i| {
            let g = su.gradient(i, spec.unravel(i));
            (0.5 * epsilon * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) - well.w(su.value(i)) / epsilon).abs()
        });
    let mut out = Vec::with_capacity(tests.len());
    for group in tests.chunks(3) {
        let sums = reduce::sum_n::<6, _>(spec.len(), |i| {
            let idx = spec.unravel(i);
            let uu = su.value(i);
            let g = su.gradient(i, idx);
            let gn2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
            let mu = 0.5 * epsilon * gn2 + well.w(uu) / epsilon;
            if mu == 0.0 {
                return [0.0; 6];
            }
            let grad_u = well.phi_prime(uu) * gn2.sqrt();
            let x = spec.coords(idx);
            let mut r = [0.0; 6];
            for (k, phi) in group.iter().enumerate() {
                let p = phi.eval(x, vv[i]);
                r[2 * k] = p * grad_u;
                r[2 * k + 1] = p * mu;
            }
            r
        });
        for (k, phi) in group.iter().enumerate() {
            let (gi, mi) = (sums[2 * k] * vol, sums[2 * k + 1] * vol);
            let reference = reference_integral(geometry, well, phi)?;
            let gap = (gi - reference).abs();
            let mu_gap = (mi - reference).abs();
            let phi_sup = phi.sup(s_max);
            out.push(MfPairGap {
                id: phi.id.to_string(),
                grad_integral: gi,
                mu_integral: mi,
                reference,
                gap,
                mu_gap,
                phi_sup,
                discrepancy_l1: disc,
                inequality_holds: (mu_gap - gap).abs() <= phi_sup * disc + 1e-10,
            });
        }
    }
    Ok(out)
}

pub fn mf_pair_gap(
    u: &ScalarField,
    v: &ScalarField,
    well: &DoubleWell,
    epsilon: f64,
    phi: &TestFunction,
    reference: &Geometry,
) -> Result<f64> {
    Ok(mf_pair_gaps(u, v, well, epsilon, reference, std::slice::from_ref(phi))?[0].gap)
}

pub fn mu_version_gap(
    u: &ScalarField,
    v: &ScalarField,
    well: &DoubleWell,
    epsilon: f64,
    phi: &TestFunction,
    reference: &Geometry,
) -> Result<MfPairGap> {
    Ok(mf_pair_gaps(u, v, well, epsilon, reference, std::slice::from_ref(phi))?.remove(0))
}

/// μ_ε(B_r(x₀)) / (σπr²), the two-dimensional density of the diffuse measure.
pub fn density_ratio(u: &ScalarField, well: &DoubleWell, epsilon: f64, x0: [f64; 3], r: f64) -> Result<f64> {
    let spec = u.spec();
    if spec.dim() != 3 {
        return Err(Error::Shape("density ratio is defined on 3D grids".into()));
    }
    if !(r > 0.0 && r.is_finite()) || !(epsilon > 0.0) {
        return Err(Error::Domain(format!("density ratio needs r > 0 and ε > 0, got r = {r}, ε = {epsilon}")));
    }
    let (lo, hi) = spec.bounds();
    for a in 0..3 {
        if x0[a] - r < lo[a] || x0[a] + r > hi[a] {
            return Err(Error::Domain(format!("ball of radius {r} around {x0:?} leaves the box")));
        }
    }
    let st = u.stencil()?;
    let h = spec.spacing();
    let origin = spec.origin();
    let d = spec.padded_dims();
    let range = |a: usize| {
        let a0 = (((x0[a] - r - origin[a]) / h).floor().max(0.0)) as usize;
        let a1 = ((((x0[a] + r - origin[a]) / h).ceil()) as usize).min(d[a] - 1);
        (a0, a1)
    };
    let (r0, r1, r2) = (range(0), range(1), range(2));
    let (n0, n1, n2) = (r0.1 - r0.0 + 1, r1.1 - r1.0 + 1, r2.1 - r2.0 + 1);
    let mass = spec.cell_volume()
        * reduce::sum(n0 * n1 * n2, |k| {
            let idx = [r0.0 + k / (n1 * n2), r1.0 + (k / n2) % n1, r2.0 + k % n2];
            let x = spec.coords(idx);
            let dist2 = (x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2) + (x[2] - x0[2]).powi(2);
            if dist2 > r * r {
                return 0.0;
            }
            let i = spec.ravel(idx);
            mm_at(&st, i, idx, well, epsilon)
        });
    Ok(mass / (well.sigma() * PI * r * r))
}

/// Σ_t Δt·∫_{u = t} |ε|∇u| − √(2W(t))| over `samples` uniform levels in (−1, 1).
pub fn equidistribution(u: &ScalarField, well: &DoubleWell, epsilon: f64, samples: usize) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Config("equidistribution needs at least one level".into()));
    }
    let st: Stencil<'_> = u.stencil()?;
    let spec = u.spec();
    let dt = 2.0 / samples as f64;
    let levels: Vec<f64> = (0..samples).map(|k| -1.0 + (k as f64 + 0.5) * dt).collect();
    let target: Vec<f64> = levels.iter().map(|&t| well.phi_prime(t)).collect();
    let per = level_integrals::<1, _, _>(
        u,
        &levels,
        |i| {
            let g = st.gradient(i, spec.unravel(i));
            [(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()]
        },
        |l, a| (epsilon * a[0] - target[l]).abs(),
    )?;
    Ok(per.iter().sum::<f64>() * dt)
}
