//! Diffuse energies and their densities on grid fields.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::grid::{ScalarField, Stencil};
use crate::potential::{DoubleWell, Modulus};
use crate::profile::TruncatedProfile;
use crate::reduce;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Domain(format!("ε must be positive, got {epsilon}")));
    }
    Ok(())
}

#[inline]
fn norm_sq(g: [f64; 3]) -> f64 {
    g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
}

/// (ε/2)|∇u|² + W(u)/ε at grid point `i`.
#[inline]
pub(crate) fn mm_at(st: &Stencil<'_>, i: usize, idx: [usize; 3], well: &DoubleWell, epsilon: f64) -> f64 {
    0.5 * epsilon * norm_sq(st.gradient(i, idx)) + well.w(st.value(i)) / epsilon
}

/// (1/ε)(W′(u)/ε − εΔu)² at grid point `i`.
#[inline]
pub(crate) fn willmore_at(st: &Stencil<'_>, i: usize, idx: [usize; 3], well: &DoubleWell, epsilon: f64) -> f64 {
    let r = well.dw(st.value(i)) / epsilon - epsilon * st.laplacian(i, idx);
    r * r / epsilon
}

/// Modica–Mortola density μ_ε.
pub fn mm_density(u: &ScalarField, well: &DoubleWell, epsilon: f64) -> Result<ScalarField> {
    check_epsilon(epsilon)?;
    let st = u.stencil()?;
    let spec = u.spec();
    Ok(ScalarField::from_index_fn(spec.clone(), |i| {
        mm_at(&st, i, spec.unravel(i), well, epsilon)
    }))
}

pub fn modica_mortola(u: &ScalarField, well: &DoubleWell, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let st = u.stencil()?;
    let spec = u.spec();
    Ok(spec.cell_volume() * reduce::sum(spec.len(), |i| mm_at(&st, i, spec.unravel(i), well, epsilon)))
}

/// I_ε = ∫ μ_ε(u)·μ_ε(v), with the full gradient of v.
pub fn coupling_energy(u: &ScalarField, v: &ScalarField, well: &DoubleWell, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    u.require_same_grid(v)?;
    let (su, sv) = (u.stencil()?, v.stencil()?);
    let spec = u.spec();
    Ok(spec.cell_volume()
        * reduce::sum(spec.len(), |i| {
            let idx = spec.unravel(i);
            mm_at(&su, i, idx, well, epsilon) * mm_at(&sv, i, idx, well, epsilon)
        }))
}

pub fn willmore_density(u: &ScalarField, well: &DoubleWell, epsilon: f64) -> Result<ScalarField> {
    check_epsilon(epsilon)?;
    let st = u.stencil()?;
    let spec = u.spec();
    Ok(ScalarField::from_index_fn(spec.clone(), |i| {
        willmore_at(&st, i, spec.unravel(i), well, epsilon)
    }))
}

/// F_ε = (1/ε)∫(W′(u)/ε − εΔu)².
pub fn willmore(u: &ScalarField, well: &DoubleWell, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let st = u.stencil()?;
    let spec = u.spec();
    Ok(spec.cell_volume() * reduce::sum(spec.len(), |i| willmore_at(&st, i, spec.unravel(i), well, epsilon)))
}

/// J_ε = ∫ a(v)·(Willmore density of u).
pub fn weighted_willmore(
    u: &ScalarField,
    v: &ScalarField,
    well: &DoubleWell,
    modulus: &Modulus,
    epsilon: f64,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    u.require_same_grid(v)?;
    let st = u.stencil()?;
    let spec = u.spec();
    let vv = v.values();
    Ok(spec.cell_volume()
        * reduce::sum(spec.len(), |i| {
            modulus.eval(vv[i]) * willmore_at(&st, i, spec.unravel(i), well, epsilon)
        }))
}

/// ∫ |(ε/2)|∇u|² − W(u)/ε|, the total variation of the discrepancy measure.
pub fn discrepancy_l1(u: &ScalarField, well: &DoubleWell, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let st = u.stencil()?;
    let spec = u.spec();
    Ok(spec.cell_volume()
        * reduce::sum(spec.len(), |i| {
            let g = st.gradient(i, spec.unravel(i));
            (0.5 * epsilon * norm_sq(g) - well.w(st.value(i)) / epsilon).abs()
        }))
}

pub fn mass(u: &ScalarField) -> f64 {
    u.integrate()
}

/// ∫ |∇(φ∘u)| with the gradient taken by the chain rule, φ′(u)·∇u.
pub fn mm_lower_bound(u: &ScalarField, well: &DoubleWell) -> Result<f64> {
    let st = u.stencil()?;
    let spec = u.spec();
    Ok(spec.cell_volume()
        * reduce::sum(spec.len(), |i| {
            well.phi_prime(st.value(i)) * norm_sq(st.gradient(i, spec.unravel(i))).sqrt()
        }))
}

/// ∫ μ_ε(v)·|∇(φ∘u)|, the slicing lower bound for I_ε.
pub fn coupling_lower_bound(u: &ScalarField, v: &ScalarField, well: &DoubleWell, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    u.require_same_grid(v)?;
    let (su, sv) = (u.stencil()?, v.stencil()?);
    let spec = u.spec();
    Ok(spec.cell_volume()
        * reduce::sum(spec.len(), |i| {
            let idx = spec.unravel(i);
            let gu = norm_sq(su.gradient(i, idx)).sqrt();
            mm_at(&sv, i, idx, well, epsilon) * well.phi_prime(su.value(i)) * gu
        }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub epsilon: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub discrepancy_l1: f64,
    pub mu_total: f64,
    pub mass_u: f64,
    /// J below 8πσ·min(a₁, a₂) with H the sum of principal curvatures.
    pub admissible_li_yau: bool,
    /// The same test with H the mean of the principal curvatures (J/4).
    pub admissible_li_yau_mean: bool,
}

/// All energies of the pair (u, v) in one pass over the grid.
pub fn energy_report(
    u: &ScalarField,
    v: &ScalarField,
    well: &DoubleWell,
    modulus: &Modulus,
    epsilon: f64,
) -> Result<EnergyReport> {
    check_epsilon(epsilon)?;
    u.require_same_grid(v)?;
    let (su, sv) = (u.stencil()?, v.stencil()?);
    let spec = u.spec();
    let [m, i_e, f, j, disc, mass_u] = reduce::sum_n::<6, _>(spec.len(), |i| {
        let idx = spec.unravel(i);
        let gu = norm_sq(su.gradient(i, idx));
        let uu = su.value(i);
        let grad_part = 0.5 * epsilon * gu;
        let pot_part = well.w(uu) / epsilon;
        let mu = grad_part + pot_part;
        let mv = mm_at(&sv, i, idx, well, epsilon);
        let wd = willmore_at(&su, i, idx, well, epsilon);
        [mu, mu * mv, wd, modulus.eval(sv.value(i)) * wd, (grad_part - pot_part).abs(), uu]
    });
    let vol = spec.cell_volume();
    let (m, j) = (m * vol, j * vol);
    let threshold = well.sigma() * 8.0 * PI * modulus.min();
    Ok(EnergyReport {
        epsilon,
        m,
        i: i_e * vol,
        f: f * vol,
        j,
        discrepancy_l1: disc * vol,
        mu_total: m,
        mass_u: mass_u * vol,
        admissible_li_yau: j < threshold,
        admissible_li_yau_mean: j / 4.0 < threshold,
    })
}

/// Δu of the recovery field u = ŵ_ε(d) in closed form: ŵ″(d) − ŵ′(d)·Hᵗ.
pub fn analytic_laplacian(tp: &TruncatedProfile, geometry: &Geometry, x: [f64; 3]) -> Result<f64> {
    let d = geometry.signed_distance(x);
    let [_, d1, d2] = tp.eval_scaled_all(d);
    if d1 == 0.0 {
        return Ok(d2);
    }
    Ok(d2 - d1 * geometry.curvature_sum(x)?)
}

/// F_ε of the recovery field with the analytic Laplacian in place of the grid stencil.
pub fn willmore_analytic(
    u: &ScalarField,
    tp: &TruncatedProfile,
    geometry: &Geometry,
    well: &DoubleWell,
) -> Result<f64> {
    let epsilon = tp.epsilon();
    let spec = u.spec();
    let vals = u.values();
    let lap = ScalarField::try_from_fn(spec.clone(), |x| analytic_laplacian(tp, geometry, x))?;
    let lv = lap.values();
    Ok(spec.cell_volume()
        * reduce::sum(spec.len(), |i| {
            let r = well.dw(vals[i]) / epsilon - epsilon * lv[i];
            r * r / epsilon
        }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{PhaseSplit, Surface};
    use crate::grid::{GridSpec, DEFAULT_MEMORY_CAP};
    use crate::profile::Profile;

    fn unit_box(n: usize, dim: usize) -> GridSpec {
        let h = 1.0 / n as f64;
        let lo = vec![0.0; dim];
        let hi = vec![1.0; dim];
        GridSpec::from_box(&lo, &hi, h, DEFAULT_MEMORY_CAP).unwrap()
    }

    #[test]
    fn constant_fields() {
        let well = DoubleWell::quartic();
        let spec = unit_box(10, 3);
        let one = ScalarField::constant(spec.clone(), 1.0);
        assert!(mm_density(&one, &well, 0.3).unwrap().values().iter().all(|&x| x == 0.0));
        assert_eq!(modica_mortola(&one, &well, 0.3).unwrap(), 0.0);
        assert_eq!(modica_mortola(&one.map(|x| -x), &well, 0.3).unwrap(), 0.0);
        let zero = ScalarField::constant(spec.clone(), 0.0);
        assert!(mm_density(&zero, &well, 1.0).unwrap().values().iter().all(|&x| x == 1.0));
        assert!((discrepancy_l1(&zero, &well, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(willmore(&one, &well, 0.2).unwrap(), 0.0);
        assert!((mass(&one) - 1.0).abs() < 1e-12);
        assert!((mass(&one.map(|x| -x)) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupling_vanishes_when_either_factor_is_a_well() {
        let well = DoubleWell::quartic();
        let spec = unit_box(12, 2);
        let u = ScalarField::from_fn(spec.clone(), |x| (3.0 * x[0]).sin() * x[1]);
        let one = ScalarField::constant(spec.clone(), 1.0);
        assert_eq!(coupling_energy(&u, &one, &well, 0.1).unwrap(), 0.0);
        assert_eq!(coupling_energy(&one, &u, &well, 0.1).unwrap(), 0.0);
        let other = ScalarField::constant(unit_box(10, 2), 1.0);
        assert!(matches!(coupling_energy(&u, &other, &well, 0.1), Err(Error::Shape(_))));
    }

    #[test]
    fn odd_field_has_zero_mass() {
        let spec = GridSpec::from_box(&[-1.0; 3], &[1.0; 3], 0.05, DEFAULT_MEMORY_CAP).unwrap();
        let u = ScalarField::from_fn(spec, |x| (2.0 * x[0]).tanh() + x[1] * x[2] * x[2]);
        assert!(mass(&u).abs() < 1e-12);
    }

    #[test]
    fn weighted_willmore_reduces_for_constant_modulus_or_pure_phase() {
        let well = DoubleWell::quartic();
        let spec = GridSpec::from_box(&[-1.0; 3], &[1.0; 3], 0.1, DEFAULT_MEMORY_CAP).unwrap();
        let u = ScalarField::from_fn(spec.clone(), |x| (2.0 * (0.6 - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())).tanh());
        let v = ScalarField::from_fn(spec.clone(), |x| x[2].tanh());
        let f = willmore(&u, &well, 0.2).unwrap();
        let same = Modulus::new(1.5, 1.5).unwrap();
        assert!((weighted_willmore(&u, &v, &well, &same, 0.2).unwrap() - 1.5 * f).abs() < 1e-12 * f);
        let m = Modulus::new(1.0, 2.0).unwrap();
        let one = ScalarField::constant(spec, 1.0);
        assert!((weighted_willmore(&u, &one, &well, &m, 0.2).unwrap() - f).abs() < 1e-12 * f);
    }

    #[test]
    fn report_is_consistent_with_single_functionals() {
        let well = DoubleWell::quartic();
        let m = Modulus::new(1.0, 2.0).unwrap();
        let spec = GridSpec::from_box(&[-1.0; 3], &[1.0; 3], 0.08, DEFAULT_MEMORY_CAP).unwrap();
        let u = ScalarField::from_fn(spec.clone(), |x| (3.0 * (0.6 - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt())).tanh());
        let v = ScalarField::from_fn(spec, |x| (2.0 * x[2] + 0.3 * x[0]).tanh());
        let e = 0.25;
        let r = energy_report(&u, &v, &well, &m, e).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        assert!(close(r.m, modica_mortola(&u, &well, e).unwrap()));
        assert!(close(r.i, coupling_energy(&u, &v, &well, e).unwrap()));
        assert!(close(r.f, willmore(&u, &well, e).unwrap()));
        assert!(close(r.j, weighted_willmore(&u, &v, &well, &m, e).unwrap()));
        assert!(close(r.discrepancy_l1, discrepancy_l1(&u, &well, e).unwrap()));
        assert!(close(r.mass_u, mass(&u)));
        assert_eq!(r.mu_total, r.m);
        assert!(r.discrepancy_l1 <= r.mu_total);
        for x in [r.m, r.i, r.f, r.j, r.discrepancy_l1] {
            assert!(x >= 0.0);
        }
        let json = serde_json::to_value(r).unwrap();
        for key in ["epsilon", "M", "I", "F", "J", "discrepancy_l1", "mu_total", "mass_u", "admissible_li_yau"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn reflected_field_has_equal_energies() {
        let well = DoubleWell::quartic();
        let spec = GridSpec::from_box(&[-1.0; 2], &[1.0; 2], 0.04, DEFAULT_MEMORY_CAP).unwrap();
        let f = |x: [f64; 3]| (3.0 * x[0] + x[1] * x[1]).tanh() + 0.2 * (x[1] * 5.0).sin();
        let u = ScalarField::from_fn(spec.clone(), f);
        let r = ScalarField::from_fn(spec, |x| f([-x[0], -x[1], 0.0]));
        for e in [0.05, 0.2] {
            let a = modica_mortola(&u, &well, e).unwrap();
            let b = modica_mortola(&r, &well, e).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
            let a = willmore(&u, &well, e).unwrap();
            let b = willmore(&r, &well, e).unwrap();
            assert!((a - b).abs() <= 1e-12 * a);
        }
    }

    #[test]
    fn planar_profile_is_concentrated_and_nearly_critical() {
        let well = DoubleWell::quartic();
        let eps = 0.1;
        let tp = TruncatedProfile::new(&well, eps).unwrap();
        let reach = 2.0 * eps * tp.t_trunc();
        let spec = GridSpec::from_box(&[-1.0, -0.1], &[1.0, 0.1], eps / 8.0, DEFAULT_MEMORY_CAP).unwrap();
        let u = ScalarField::from_fn(spec.clone(), |x| tp.eval_scaled(x[0]));
        let dens = mm_density(&u, &well, eps).unwrap();
        for i in 0..spec.len() {
            let x = spec.point(i);
            if x[0].abs() > reach + 2.0 * spec.spacing() {
                assert_eq!(dens.values()[i], 0.0);
            }
        }
        // untruncated profile: the residual W′(u)/ε − εΔu is a pure discretization error
        let w = tp.profile().clone();
        let mut prev = f64::INFINITY;
        for q in [8.0, 16.0, 32.0] {
            let spec = GridSpec::from_box(&[-1.0, -0.05], &[1.0, 0.05], eps / q, DEFAULT_MEMORY_CAP).unwrap();
            let u = ScalarField::from_fn(spec, |x| w.value(x[0] / eps));
            let f = willmore(&u, &well, eps).unwrap();
            assert!(f < prev);
            prev = f;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn analytic_laplacian_matches_stencil_on_sphere_recovery() {
        let well = DoubleWell::quartic();
        let eps = 0.15;
        let tp = TruncatedProfile::new(&well, eps).unwrap();
        let geo = Geometry::new(
            Surface::Sphere {
                radius: 1.0,
                center: [0.0; 3],
            },
            PhaseSplit::None,
        )
        .unwrap();
        let spec = GridSpec::from_box(&[-1.75; 3], &[1.75; 3], eps / 6.0, DEFAULT_MEMORY_CAP).unwrap();
        let u = ScalarField::from_fn(spec, |x| tp.eval_scaled(geo.signed_distance(x)));
        let grid = willmore(&u, &well, eps).unwrap();
        let exact = willmore_analytic(&u, &tp, &geo, &well).unwrap();
        assert!((grid - exact).abs() < 0.1 * exact, "{grid} vs {exact}");
    }

    #[test]
    fn rejects_bad_epsilon() {
        let well = DoubleWell::quartic();
        let u = ScalarField::constant(unit_box(4, 1), 0.0);
        assert!(modica_mortola(&u, &well, 0.0).is_err());
        assert!(willmore(&u, &well, -1.0).is_err());
    }
}
