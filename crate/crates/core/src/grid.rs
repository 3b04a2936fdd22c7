//! Cell-centred uniform grids in one to three dimensions, finite-difference
//! operators, midpoint quadrature and the on-disk field format.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::reduce;

/// Default upper bound on the number of grid points.
pub const DEFAULT_MEMORY_CAP: usize = 1 << 31;

/// |∇u| at or below this is treated as a vanishing normal in projections.
pub const GRADIENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GridSpec {
    dims: Vec<usize>,
    spacing: f64,
    origin: Vec<f64>,
    // coordinates are generated as centre + (i - (N-1)/2)·h so that grids on
    // symmetric boxes are exactly symmetric in floating point
    center: [f64; 3],
    // trailing axes padded with 1 keep the row-major linear index unchanged
    d3: [usize; 3],
}

impl PartialEq for GridSpec {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.spacing == other.spacing && self.origin == other.origin
    }
}

impl GridSpec {
    pub fn new(dims: Vec<usize>, spacing: f64, origin: Vec<f64>) -> Result<Self> {
        Self::with_cap(dims, spacing, origin, DEFAULT_MEMORY_CAP)
    }

    pub fn with_cap(dims: Vec<usize>, spacing: f64, origin: Vec<f64>, cap: usize) -> Result<Self> {
        let n = dims.len();
        if !(1..=3).contains(&n) {
            return Err(Error::Shape(format!("grid dimension must be 1, 2 or 3, got {n}")));
        }
        if origin.len() != n {
            return Err(Error::Shape(format!(
                "origin has {} entries for a {n}-dimensional grid",
                origin.len()
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Shape(format!("spacing must be positive and finite, got {spacing}")));
        }
        if origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::Shape("origin must be finite".into()));
        }
        let mut total: usize = 1;
        for &d in &dims {
            if d == 0 {
                return Err(Error::Shape("grid axes must be non-empty".into()));
            }
            total = total
                .checked_mul(d)
                .ok_or_else(|| Error::Shape("grid point count overflows".into()))?;
        }
        if total > cap {
            return Err(Error::Config(format!(
                "grid has {total} points, above the memory cap of {cap}"
            )));
        }
        let mut d3 = [1usize; 3];
        d3[..n].copy_from_slice(&dims);
        let mut center = [0.0; 3];
        for a in 0..n {
            center[a] = origin[a] + 0.5 * (dims[a] - 1) as f64 * spacing;
        }
        Ok(GridSpec {
            dims,
            spacing,
            origin,
            center,
            d3,
        })
    }

    /// Grid of cells of width `h` tiling the box `[lo, hi]`; points sit at cell centres.
    pub fn from_box(lo: &[f64], hi: &[f64], h: f64, cap: usize) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Shape("box corners differ in dimension".into()));
        }
        let mut dims = Vec::with_capacity(lo.len());
        let mut origin = Vec::with_capacity(lo.len());
        for (&a, &b) in lo.iter().zip(hi) {
            if !(b > a) {
                return Err(Error::Shape(format!("empty box extent [{a}, {b}]")));
            }
            let cells = ((b - a) / h).round();
            if !(1.0..1e12).contains(&cells) {
                return Err(Error::Shape(format!("box extent {} too small for h = {h}", b - a)));
            }
            dims.push(cells as usize);
            origin.push(a + 0.5 * h);
        }
        let mut spec = Self::with_cap(dims, h, origin, cap)?;
        for (k, (&a, &b)) in lo.iter().zip(hi).enumerate() {
            spec.center[k] = 0.5 * (a + b);
            spec.origin[k] = spec.center[k] - 0.5 * (spec.dims[k] - 1) as f64 * h;
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn len(&self) -> usize {
        self.d3.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume hⁿ of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    pub(crate) fn padded_dims(&self) -> [usize; 3] {
        self.d3
    }

    pub(crate) fn strides(&self) -> [usize; 3] {
        [self.d3[1] * self.d3[2], self.d3[2], 1]
    }

    #[inline]
    pub fn unravel(&self, i: usize) -> [usize; 3] {
        let k = i % self.d3[2];
        let r = i / self.d3[2];
        [r / self.d3[1], r % self.d3[1], k]
    }

    #[inline]
    pub fn ravel(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.d3[1] + idx[1]) * self.d3[2] + idx[2]
    }

    /// Coordinates of the point with padded multi-index `idx`; unused axes are 0.
    #[inline]
    pub fn coords(&self, idx: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            let half = 0.5 * (self.d3[a] - 1) as f64;
            x[a] = self.center[a] + (idx[a] as f64 - half) * self.spacing;
        }
        x
    }

    #[inline]
    pub fn point(&self, i: usize) -> [f64; 3] {
        self.coords(self.unravel(i))
    }

    /// Lower and upper faces of the box covered by the cells.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let lo: Vec<f64> = self.origin.iter().map(|o| o - 0.5 * self.spacing).collect();
        let hi: Vec<f64> = (0..self.dim())
            .map(|a| lo[a] + self.dims[a] as f64 * self.spacing)
            .collect();
        (lo, hi)
    }

    fn require_stencil(&self) -> Result<()> {
        if let Some(a) = self.dims.iter().position(|&d| d < 3) {
            return Err(Error::Shape(format!(
                "finite differences need at least 3 points per axis, axis {a} has {}",
                self.dims[a]
            )));
        }
        Ok(())
    }
}

/// Pointwise finite-difference stencils on a field.
#[derive(Clone, Copy)]
pub struct Stencil<'a> {
    values: &'a [f64],
    d3: [usize; 3],
    strides: [usize; 3],
    n: usize,
    inv_2h: f64,
    inv_h2: f64,
}

impl<'a> Stencil<'a> {
    #[inline]
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Central differences inside, one-sided second order on boundary faces.
    #[inline]
    pub fn gradient(&self, i: usize, idx: [usize; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        let f = self.values;
        for a in 0..self.n {
            let s = self.strides[a];
            let last = self.d3[a] - 1;
            g[a] = if idx[a] == 0 {
                (4.0 * (f[i + s] - f[i]) - (f[i + 2 * s] - f[i])) * self.inv_2h
            } else if idx[a] == last {
                ((f[i - 2 * s] - f[i]) - 4.0 * (f[i - s] - f[i])) * self.inv_2h
            } else {
                (f[i + s] - f[i - s]) * self.inv_2h
            };
        }
        g
    }

    /// 3/5/7-point Laplacian; boundary points reuse the value at the nearest interior point.
    #[inline]
    pub fn laplacian(&self, i: usize, idx: [usize; 3]) -> f64 {
        let mut j = i;
        for (a, &k) in idx.iter().enumerate().take(self.n) {
            if k == 0 {
                j += self.strides[a];
            } else if k == self.d3[a] - 1 {
                j -= self.strides[a];
            }
        }
        let f = self.values;
        let c = f[j];
        let mut acc = 0.0;
        for a in 0..self.n {
            let s = self.strides[a];
            acc += (f[j + s] - c) + (f[j - s] - c);
        }
        acc * self.inv_h2
    }
}

/// Real values on a [`GridSpec`], row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

pub type VectorField = Vec<ScalarField>;

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} points",
                values.len(),
                spec.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("field value at index {p} is not finite")));
        }
        Ok(ScalarField { spec, values })
    }

    pub(crate) fn from_vec_unchecked(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        ScalarField { spec, values }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        let values = vec![c; spec.len()];
        ScalarField { spec, values }
    }

    /// Samples `f` at every grid point.
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn([f64; 3]) -> f64 + Sync,
    {
        Self::from_index_fn(spec.clone(), |i| f(spec.point(i)))
    }

    pub fn from_index_fn<F>(spec: GridSpec, f: F) -> Self
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let mut values = vec![0.0; spec.len()];
        values
            .par_chunks_mut(reduce::CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                let base = c * reduce::CHUNK;
                for (k, v) in chunk.iter_mut().enumerate() {
                    *v = f(base + k);
                }
            });
        ScalarField { spec, values }
    }

    pub fn try_from_fn<F>(spec: GridSpec, f: F) -> Result<Self>
    where
        F: Fn([f64; 3]) -> Result<f64> + Sync,
    {
        let mut values = vec![0.0; spec.len()];
        values
            .par_chunks_mut(reduce::CHUNK)
            .enumerate()
            .try_for_each(|(c, chunk)| -> Result<()> {
                let base = c * reduce::CHUNK;
                for (k, v) in chunk.iter_mut().enumerate() {
                    *v = f(spec.point(base + k))?;
                }
                Ok(())
            })?;
        ScalarField::new(spec, values)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map<F: Fn(f64) -> f64 + Sync>(&self, f: F) -> ScalarField {
        let v = &self.values;
        Self::from_index_fn(self.spec.clone(), |i| f(v[i]))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn stencil(&self) -> Result<Stencil<'_>> {
        self.spec.require_stencil()?;
        Ok(self.stencil_unchecked())
    }

    pub(crate) fn stencil_unchecked(&self) -> Stencil<'_> {
        let h = self.spec.spacing;
        Stencil {
            values: &self.values,
            d3: self.spec.d3,
            strides: self.spec.strides(),
            n: self.spec.dim(),
            inv_2h: 0.5 / h,
            inv_h2: 1.0 / (h * h),
        }
    }

    /// Midpoint rule hⁿ·Σ values with deterministic chunked summation.
    pub fn integrate(&self) -> f64 {
        self.spec.cell_volume() * reduce::sum_slice(&self.values)
    }

    pub fn gradient(&self) -> Result<VectorField> {
        let st = self.stencil()?;
        let spec = &self.spec;
        Ok((0..spec.dim())
            .map(|a| {
                ScalarField::from_index_fn(spec.clone(), |i| st.gradient(i, spec.unravel(i))[a])
            })
            .collect())
    }

    pub fn laplacian(&self) -> Result<ScalarField> {
        let st = self.stencil()?;
        let spec = &self.spec;
        Ok(ScalarField::from_index_fn(spec.clone(), |i| {
            st.laplacian(i, spec.unravel(i))
        }))
    }

    pub(crate) fn require_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Shape("fields live on different grids".into()));
        }
        Ok(())
    }
}

/// ∇v − (∇v·ν)ν with ν = ∇u/|∇u|, or ∇v itself when |∇u| ≤ [`GRADIENT_FLOOR`].
/// The boolean reports whether the point fell below the floor.
#[inline]
pub fn project_tangential(gv: [f64; 3], gu: [f64; 3]) -> ([f64; 3], bool) {
    let norm = (gu[0] * gu[0] + gu[1] * gu[1] + gu[2] * gu[2]).sqrt();
    if norm <= GRADIENT_FLOOR {
        return (gv, true);
    }
    let nu = [gu[0] / norm, gu[1] / norm, gu[2] / norm];
    let dot = gv[0] * nu[0] + gv[1] * nu[1] + gv[2] * nu[2];
    ([gv[0] - dot * nu[0], gv[1] - dot * nu[1], gv[2] - dot * nu[2]], false)
}

#[derive(Debug, Clone)]
pub struct TangentialGradient {
    pub components: VectorField,
    /// Linear indices where |∇u| was below the floor and ∇v was returned unprojected.
    pub flagged: Vec<usize>,
}

/// Gradient of `v` projected onto the level sets of `u`.
pub fn tangential_gradient(v: &ScalarField, u: &ScalarField) -> Result<TangentialGradient> {
    v.require_same_grid(u)?;
    let sv = v.stencil()?;
    let su = u.stencil()?;
    let spec = v.spec();
    let n = spec.dim();
    let mut comps: Vec<Vec<f64>> = vec![vec![0.0; spec.len()]; n];
    let mut flags = vec![false; spec.len()];
    for i in 0..spec.len() {
        let idx = spec.unravel(i);
        let (t, low) = project_tangential(sv.gradient(i, idx), su.gradient(i, idx));
        for a in 0..n {
            comps[a][i] = t[a];
        }
        flags[i] = low;
    }
    Ok(TangentialGradient {
        components: comps
            .into_iter()
            .map(|c| ScalarField::from_vec_unchecked(spec.clone(), c))
            .collect(),
        flagged: flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect(),
    })
}

const SIDE_KEYS: [&str; 7] = ["dim", "dims", "spacing", "origin", "dtype", "endianness", "layout"];

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn payload_path(path: &Path) -> PathBuf {
    path.with_extension("bin")
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let key = path.display().to_string();
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&key, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&key, e))?;
    file.sync_all().map_err(|e| Error::io(&key, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(&key, e))
}

/// Writes `<stem>.json` and `<stem>.bin` (little-endian binary64 payload).
pub fn write_field(field: &ScalarField, path: &Path) -> Result<()> {
    let spec = field.spec();
    let header = json!({
        "dim": spec.dim(),
        "dims": spec.dims(),
        "spacing": spec.spacing(),
        "origin": spec.origin(),
        "dtype": "float64",
        "endianness": "little",
        "layout": "row-major-last-fastest",
    });
    let mut bytes = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&payload_path(path), &bytes)?;
    let text = serde_json::to_string_pretty(&header).map_err(|e| Error::io("sidecar", e))?;
    write_atomic(&sidecar_path(path), text.as_bytes())
}

fn header_usize(obj: &serde_json::Map<String, Value>, key: &str) -> Result<usize> {
    obj.get(key)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| Error::io(key, "missing or not a non-negative integer"))
}

fn header_str(obj: &serde_json::Map<String, Value>, key: &str, want: &str) -> Result<()> {
    match obj.get(key).and_then(Value::as_str) {
        Some(s) if s == want => Ok(()),
        Some(s) => Err(Error::io(key, format!("unsupported value '{s}', expected '{want}'"))),
        None => Err(Error::io(key, "missing or not a string")),
    }
}

fn header_f64_array(obj: &serde_json::Map<String, Value>, key: &str) -> Result<Vec<f64>> {
    obj.get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::io(key, "missing or not an array"))?
        .iter()
        .map(|v| v.as_f64().ok_or_else(|| Error::io(key, "non-numeric entry")))
        .collect()
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(side.display().to_string(), e))?;
    let header: Value = serde_json::from_str(&text).map_err(|e| Error::io("sidecar", e))?;
    let obj = header
        .as_object()
        .ok_or_else(|| Error::io("sidecar", "header is not a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| !SIDE_KEYS.contains(&k.as_str())) {
        return Err(Error::io(k.as_str(), "unknown header key"));
    }
    let dim = header_usize(obj, "dim")?;
    let dims: Vec<usize> = obj
        .get("dims")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::io("dims", "missing or not an array"))?
        .iter()
        .map(|v| v.as_u64().map(|x| x as usize).ok_or_else(|| Error::io("dims", "non-integer entry")))
        .collect::<Result<_>>()?;
    if dims.len() != dim {
        return Err(Error::io("dims", format!("{} entries but dim = {dim}", dims.len())));
    }
    let spacing = obj
        .get("spacing")
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::io("spacing", "missing or not a number"))?;
    let origin = header_f64_array(obj, "origin")?;
    header_str(obj, "dtype", "float64")?;
    header_str(obj, "endianness", "little")?;
    header_str(obj, "layout", "row-major-last-fastest")?;
    let spec = GridSpec::new(dims, spacing, origin).map_err(|e| Error::io("dims", e))?;

    let bin = payload_path(path);
    let bytes = fs::read(&bin).map_err(|e| Error::io(bin.display().to_string(), e))?;
    if bytes.len() != spec.len() * 8 {
        return Err(Error::io(
            "payload",
            format!(
                "payload size mismatch: {} bytes for {} values",
                bytes.len(),
                spec.len()
            ),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if let Some(p) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::io("payload", format!("non-finite value at index {p}")));
    }
    Ok(ScalarField { spec, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(dims: Vec<usize>, h: f64) -> GridSpec {
        let n = dims.len();
        GridSpec::new(dims, h, vec![0.0; n]).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(vec![], 1.0, vec![]).is_err());
        assert!(GridSpec::new(vec![3, 3, 3, 3], 1.0, vec![0.0; 4]).is_err());
        assert!(GridSpec::new(vec![3], 0.0, vec![0.0]).is_err());
        assert!(GridSpec::new(vec![3], f64::NAN, vec![0.0]).is_err());
        assert!(GridSpec::new(vec![0, 3], 1.0, vec![0.0; 2]).is_err());
        assert!(GridSpec::with_cap(vec![10, 10], 1.0, vec![0.0; 2], 99).is_err());
        assert!(GridSpec::with_cap(vec![10, 10], 1.0, vec![0.0; 2], 100).is_ok());
    }

    #[test]
    fn ravel_unravel_roundtrip() {
        for spec in [grid(vec![7], 1.0), grid(vec![4, 5], 1.0), grid(vec![3, 4, 5], 1.0)] {
            for i in 0..spec.len() {
                assert_eq!(spec.ravel(spec.unravel(i)), i);
            }
        }
        let s = grid(vec![4, 5], 0.5);
        assert_eq!(s.point(6), [0.5, 0.5, 0.0]);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let f = ScalarField::constant(grid(vec![5, 6, 7], 0.3), 7.0);
        for g in f.gradient().unwrap() {
            assert!(g.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gradient_exact_on_affine() {
        let spec = grid(vec![6, 5, 4], 0.2);
        let f = ScalarField::from_fn(spec, |x| 3.0 * x[0]);
        let g = f.gradient().unwrap();
        for i in 0..f.spec().len() {
            assert!((g[0].values()[i] - 3.0).abs() < 1e-12);
            assert!(g[1].values()[i].abs() < 1e-12 && g[2].values()[i].abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_square_at_half() {
        let spec = grid(vec![11], 0.1);
        let f = ScalarField::from_fn(spec, |x| x[0] * x[0]);
        let g = f.gradient().unwrap();
        assert!((g[0].values()[5] - 1.0).abs() < 1e-14);
        // one-sided boundary formula is exact on quadratics too
        assert!((g[0].values()[0] - 0.0).abs() < 1e-13);
        assert!((g[0].values()[10] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn laplacian_examples() {
        let c = ScalarField::constant(grid(vec![4, 4], 0.5), 2.0);
        assert!(c.laplacian().unwrap().values().iter().all(|&v| v == 0.0));
        let spec = grid(vec![9, 9], 0.25);
        let f = ScalarField::from_fn(spec, |x| x[0] * x[0] + x[1] * x[1]);
        let l = f.laplacian().unwrap();
        assert!((l.values()[4 * 9 + 4] - 4.0).abs() < 1e-12);
        let spec = GridSpec::new(vec![400], 0.01, vec![0.0]).unwrap();
        let s = ScalarField::from_fn(spec, |x| x[0].sin());
        let l = s.laplacian().unwrap();
        for i in 1..399 {
            let x = 0.01 * i as f64;
            assert!((l.values()[i] + x.sin()).abs() < 1e-4);
        }
    }

    #[test]
    fn stencils_need_three_points() {
        let f = ScalarField::constant(grid(vec![2, 5], 1.0), 0.0);
        assert!(matches!(f.gradient(), Err(Error::Shape(_))));
        assert!(matches!(f.laplacian(), Err(Error::Shape(_))));
    }

    #[test]
    fn operators_are_linear() {
        let spec = grid(vec![8, 7, 6], 0.3);
        let f = ScalarField::from_fn(spec.clone(), |x| (x[0] * 1.3).sin() + x[1] * x[2]);
        let g = ScalarField::from_fn(spec.clone(), |x| (x[2] - x[0]).exp());
        let (alpha, beta) = (0.7, -2.3);
        let mix = ScalarField::from_index_fn(spec, |i| alpha * f.values()[i] + beta * g.values()[i]);
        let (lf, lg, lm) = (f.laplacian().unwrap(), g.laplacian().unwrap(), mix.laplacian().unwrap());
        for i in 0..mix.spec().len() {
            let want = alpha * lf.values()[i] + beta * lg.values()[i];
            assert!((lm.values()[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
        let (gf, gg, gm) = (f.gradient().unwrap(), g.gradient().unwrap(), mix.gradient().unwrap());
        for a in 0..3 {
            for i in 0..mix.spec().len() {
                let want = alpha * gf[a].values()[i] + beta * gg[a].values()[i];
                assert!((gm[a].values()[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn constant_margin_gives_zero_boundary_operators() {
        let spec = GridSpec::from_box(&[-1.0, -1.0], &[1.0, 1.0], 0.1, DEFAULT_MEMORY_CAP).unwrap();
        let f = ScalarField::from_fn(spec.clone(), |x| {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            if r < 0.5 { (r * 3.0).cos() } else { (1.5f64).cos() }
        });
        let g = f.gradient().unwrap();
        let l = f.laplacian().unwrap();
        for i in 0..spec.len() {
            let idx = spec.unravel(i);
            let on_face = (0..2).any(|a| idx[a] == 0 || idx[a] == spec.dims()[a] - 1);
            if on_face {
                assert_eq!(l.values()[i], 0.0);
                assert_eq!(g[0].values()[i], 0.0);
                assert_eq!(g[1].values()[i], 0.0);
            }
        }
    }

    #[test]
    fn integrate_examples() {
        let ones = ScalarField::constant(grid(vec![10, 10], 0.5), 1.0);
        assert_eq!(ones.integrate(), 25.0);
        assert_eq!(ScalarField::constant(grid(vec![10, 10], 0.5), 0.0).integrate(), 0.0);
        let spec = GridSpec::from_box(&[0.0], &[1.0], 1e-3, DEFAULT_MEMORY_CAP).unwrap();
        let lin = ScalarField::from_fn(spec, |x| x[0]);
        assert!((lin.integrate() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tangential_gradient_examples() {
        let spec = GridSpec::from_box(&[-1.0; 3], &[1.0; 3], 0.1, DEFAULT_MEMORY_CAP).unwrap();
        let v = ScalarField::from_fn(spec.clone(), |x| x[0] * 2.0 + x[1] - x[2] * 0.5);
        let u = ScalarField::from_fn(spec.clone(), |x| x[2]);
        let t = tangential_gradient(&v, &u).unwrap();
        for i in 0..spec.len() {
            assert!((t.components[0].values()[i] - 2.0).abs() < 1e-12);
            assert!((t.components[1].values()[i] - 1.0).abs() < 1e-12);
            assert!(t.components[2].values()[i].abs() < 1e-12);
        }
        assert!(t.flagged.is_empty());

        let w = ScalarField::from_fn(spec.clone(), |x| (x[0] + 0.3 * x[1] * x[1]).sin());
        let t = tangential_gradient(&w, &w).unwrap();
        let g = w.gradient().unwrap();
        for i in 0..spec.len() {
            let n: f64 = (0..3).map(|a| t.components[a].values()[i].powi(2)).sum::<f64>().sqrt();
            let gn: f64 = (0..3).map(|a| g[a].values()[i].powi(2)).sum::<f64>().sqrt();
            assert!(n <= 1e-10 * gn.max(1e-300) + 1e-300);
        }

        let p = project_tangential([1.0, 0.0, 0.0], [0.0, 0.0, 0.7]).0;
        assert_eq!(p, [1.0, 0.0, 0.0]);
        let (p, low) = project_tangential([1.0, 2.0, 3.0], [0.0, 0.0, 0.0]);
        assert!(low);
        assert_eq!(p, [1.0, 2.0, 3.0]);
    }

    #[test]
    fn tangential_gradient_on_sphere_pole() {
        // v = x0, u = |x| sampled at points (0, 0, r): e0 is tangent to the sphere there
        let spec = GridSpec::new(vec![5, 5, 9], 0.1, vec![-0.2, -0.2, 0.2]).unwrap();
        let v = ScalarField::from_fn(spec.clone(), |x| x[0]);
        let u = ScalarField::from_fn(spec.clone(), |x| (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt());
        let t = tangential_gradient(&v, &u).unwrap();
        for k in 1..8 {
            let i = spec.ravel([2, 2, k]);
            assert!((t.components[0].values()[i] - 1.0).abs() < 1e-12);
            assert!(t.components[1].values()[i].abs() < 1e-12);
            assert!(t.components[2].values()[i].abs() < 1e-12);
        }
        let other = ScalarField::constant(GridSpec::new(vec![5, 5, 8], 0.1, vec![0.0; 3]).unwrap(), 0.0);
        assert!(matches!(tangential_gradient(&v, &other), Err(Error::Shape(_))));
    }

    #[test]
    fn field_file_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let spec = GridSpec::new(vec![3, 4], 0.25, vec![-1.0, 2.0]).unwrap();
        let f = ScalarField::from_fn(spec, |x| x[0] * 1e-7 + x[1].exp() / 3.0);
        let p = dir.path().join("u");
        write_field(&f, &p).unwrap();
        let g = read_field(&p).unwrap();
        assert_eq!(f.spec(), g.spec());
        for (a, b) in f.values().iter().zip(g.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // the payload is little-endian regardless of host
        let bytes = std::fs::read(dir.path().join("u.bin")).unwrap();
        assert_eq!(f64::from_le_bytes(bytes[..8].try_into().unwrap()), f.values()[0]);

        std::fs::write(dir.path().join("u.bin"), &bytes[..bytes.len() - 8]).unwrap();
        let err = read_field(&p).unwrap_err().to_string();
        assert!(err.contains("payload size mismatch"), "{err}");

        let mut bad = bytes.clone();
        bad[..8].copy_from_slice(&f64::NAN.to_le_bytes());
        std::fs::write(dir.path().join("u.bin"), &bad).unwrap();
        assert!(read_field(&p).is_err());

        std::fs::write(dir.path().join("u.bin"), &bytes).unwrap();
        let side = std::fs::read_to_string(dir.path().join("u.json")).unwrap();
        std::fs::write(dir.path().join("u.json"), side.replace("little", "big")).unwrap();
        let err = read_field(&p).unwrap_err().to_string();
        assert!(err.contains("endianness"), "{err}");
    }
}
