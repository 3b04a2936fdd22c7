//! Forced identities checked by `phasemem selftest`.

use std::f64::consts::FRAC_PI_2;

use phasemem::energy;
use phasemem::flow::{self, FlowConfig, FlowState, InitV, TimeStep};
use phasemem::grid::{read_field, write_field, GridSpec, ScalarField, DEFAULT_MEMORY_CAP};
use phasemem::profile::{OptimalProfile, Profile, TruncatedProfile};
use phasemem::slicing;
use phasemem::{DoubleWell, Geometry, Modulus, PhaseSplit, Surface};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: Option<String>,
}

type Check = fn() -> Result<bool, String>;

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

fn grid(dim: usize, n: usize, lo: f64, hi: f64) -> Result<GridSpec, String> {
    GridSpec::from_box(&vec![lo; dim], &vec![hi; dim], (hi - lo) / n as f64, DEFAULT_MEMORY_CAP).map_err(e)
}

fn all_zero(f: &ScalarField) -> bool {
    f.values().iter().all(|&x| x == 0.0)
}

fn sphere() -> Result<Geometry, String> {
    Geometry::new(
        Surface::Sphere {
            radius: 1.0,
            center: [0.0; 3],
        },
        PhaseSplit::Cap { theta0: FRAC_PI_2 },
    )
    .map_err(e)
}

fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("phi(-1) = 0", || Ok(DoubleWell::quartic().phi(-1.0).map_err(e)? == 0.0)),
        ("sigma equals the quadrature of sqrt(2W)", || {
            let w = DoubleWell::scaled_quartic(2.5).map_err(e)?;
            let q = phasemem::potential::adaptive_simpson(&|t: f64| (2.0 * w.w(t)).sqrt(), -1.0, 1.0, 1e-13, 50);
            Ok((w.sigma() - q).abs() <= 1e-8)
        }),
        ("modulus with a1 = a2 is constant", || {
            let m = Modulus::new(1.7, 1.7).map_err(e)?;
            Ok([-3.0, -1.0, -0.2, 0.0, 0.4, 1.0, 2.0].iter().all(|&t| m.eval(t) == 1.7))
        }),
        ("gradient of a constant vanishes", || {
            let f = ScalarField::constant(grid(3, 8, 0.0, 1.0)?, 7.0);
            Ok(f.gradient().map_err(e)?.iter().all(all_zero))
        }),
        ("gradient of 3x0 is exact in the interior", || {
            let spec = grid(2, 10, 0.0, 1.0)?;
            let f = ScalarField::from_fn(spec.clone(), |x| 3.0 * x[0]);
            let g = f.gradient().map_err(e)?;
            Ok((0..spec.len()).all(|i| {
                let idx = spec.unravel(i);
                let interior = idx[0] > 0 && idx[0] + 1 < spec.dims()[0];
                (!interior || (g[0].values()[i] - 3.0).abs() < 1e-12) && g[1].values()[i].abs() < 1e-12
            }))
        }),
        ("laplacian of a constant vanishes", || {
            Ok(all_zero(&ScalarField::constant(grid(3, 6, 0.0, 1.0)?, 2.0).laplacian().map_err(e)?))
        }),
        ("integral of 1 over a 10x10 grid with h = 0.5", || {
            let spec = GridSpec::new(vec![10, 10], 0.5, vec![0.0, 0.0]).map_err(e)?;
            Ok(ScalarField::constant(spec.clone(), 1.0).integrate() == 25.0
                && ScalarField::constant(spec, 0.0).integrate() == 0.0)
        }),
        ("tangential projection along a coordinate axis", || {
            let (t, _) = phasemem::grid::project_tangential([0.3, -2.0, 5.0], [0.0, 0.0, 1.0]);
            Ok(t == [0.3, -2.0, 0.0])
        }),
        ("field file round trip", || {
            let dir = std::env::temp_dir().join(format!("phasemem-selftest-{}", std::process::id()));
            std::fs::create_dir_all(&dir).map_err(e)?;
            let f = ScalarField::from_fn(grid(3, 5, -1.0, 1.0)?, |x| x[0].sin() + x[1] * x[2]);
            let path = dir.join("f");
            write_field(&f, &path).map_err(e)?;
            let g = read_field(&path).map_err(e)?;
            let _ = std::fs::remove_dir_all(&dir);
            Ok(g == f)
        }),
        ("signed distance vanishes on the sphere", || {
            Ok(sphere()?.signed_distance([0.0, 0.6, 0.8]).abs() < 1e-15)
        }),
        ("projection of (2,0,0) onto the unit sphere", || {
            Ok(sphere()?.project([2.0, 0.0, 0.0]).map_err(e)? == [1.0, 0.0, 0.0])
        }),
        ("plane has zero curvature", || {
            let g = Geometry::new(
                Surface::Plane {
                    dim: 3,
                    position: 0.2,
                    cross_section: 1.0,
                },
                PhaseSplit::None,
            )
            .map_err(e)?;
            Ok(g.curvature_sum([0.7, -3.0, 1.0]).map_err(e)? == 0.0)
        }),
        ("geodesic distance vanishes on the cap boundary", || {
            Ok(sphere()?.geodesic_signed_distance([1.0, 0.0, 0.0]).map_err(e)?.abs() < 1e-15)
        }),
        ("optimal profile is odd", || {
            let p = OptimalProfile::new(&DoubleWell::quartic()).map_err(e)?;
            Ok(p.value(0.0) == 0.0 && p.value(1.3) == -p.value(-1.3))
        }),
        ("truncated profile equals 1 beyond 2T", || {
            let tp = TruncatedProfile::new(&DoubleWell::quartic(), 0.1).map_err(e)?;
            Ok(tp.eval(3.0 * tp.t_trunc()) == 1.0 && tp.eval(-3.0 * tp.t_trunc()) == -1.0)
        }),
        ("truncation estimates at eps = 0.5 are finite", || {
            let tp = TruncatedProfile::new(&DoubleWell::quartic(), 0.5).map_err(e)?;
            let est = phasemem::profile::truncation_estimates(&tp);
            Ok(est.sup_d1.is_finite() && est.sup_d2.is_finite() && est.sup_gap > 0.0)
        }),
        ("energies of constant wells vanish", || {
            let w = DoubleWell::quartic();
            let spec = grid(3, 6, 0.0, 1.0)?;
            let one = ScalarField::constant(spec.clone(), 1.0);
            let minus = ScalarField::constant(spec.clone(), -1.0);
            let u = ScalarField::from_fn(spec, |x| (3.0 * x[0] - 1.0).tanh());
            Ok(all_zero(&energy::mm_density(&one, &w, 0.1).map_err(e)?)
                && energy::modica_mortola(&minus, &w, 0.1).map_err(e)? == 0.0
                && energy::coupling_energy(&u, &one, &w, 0.1).map_err(e)? == 0.0
                && energy::coupling_energy(&one, &u, &w, 0.1).map_err(e)? == 0.0
                && energy::willmore(&minus, &w, 0.1).map_err(e)? == 0.0)
        }),
        ("constant modulus factors out of J", || {
            let w = DoubleWell::quartic();
            let spec = grid(3, 12, -1.0, 1.0)?;
            let u = ScalarField::from_fn(spec.clone(), |x| (2.0 * (x[0] + 0.3 * x[1] * x[1])).tanh());
            let v = ScalarField::from_fn(spec, |x| x[2].sin());
            let m = Modulus::new(2.5, 2.5).map_err(e)?;
            let j = energy::weighted_willmore(&u, &v, &w, &m, 0.2).map_err(e)?;
            let f = energy::willmore(&u, &w, 0.2).map_err(e)?;
            Ok((j - 2.5 * f).abs() <= 1e-12 * f.abs())
        }),
        ("mass of an odd field on a symmetric box", || {
            let spec = grid(3, 10, -1.0, 1.0)?;
            let u = ScalarField::from_fn(spec.clone(), |x| x[0] * (1.0 + x[1] * x[1]));
            Ok(energy::mass(&u).abs() <= 1e-12 && (energy::mass(&ScalarField::constant(spec, -1.0)) + 8.0).abs() <= 1e-12)
        }),
        ("level set of x0 is flat with the box cross-section", || {
            let spec = GridSpec::new(vec![10; 3], 2.0 / 9.0, vec![-1.0; 3]).map_err(e)?;
            let u = ScalarField::from_fn(spec, |x| x[0]);
            let s = slicing::extract(&u, 0.0).map_err(e)?;
            Ok((s.total_measure() - 4.0).abs() <= 1e-6)
        }),
        ("coarea identity is exact for a linear field", || {
            let spec = grid(3, 10, 0.0, 1.0)?;
            let u = ScalarField::from_fn(spec, |x| x[0]);
            Ok(slicing::coarea_check(&u, 64).map_err(e)?.gap <= 1e-6)
        }),
        ("density ratio away from the membrane is zero", || {
            let w = DoubleWell::quartic();
            let spec = grid(3, 40, -2.0, 2.0)?;
            let tp = TruncatedProfile::new(&w, 0.1).map_err(e)?;
            let g = sphere()?;
            let u = ScalarField::from_fn(spec, |x| tp.eval_scaled(g.signed_distance(x)));
            Ok(slicing::density_ratio(&u, &w, 0.1, [0.0; 3], 0.2).map_err(e)? == 0.0)
        }),
        ("variations vanish at the wells", || {
            let w = DoubleWell::quartic();
            let spec = grid(2, 16, 0.0, 1.0)?;
            let one = ScalarField::constant(spec.clone(), 1.0);
            let minus = ScalarField::constant(spec.clone(), -1.0);
            let u = ScalarField::from_fn(spec, |x| (x[0] * 5.0).sin());
            let (du, _) = flow::variation_i(&u, &minus, &w, 0.1).map_err(e)?;
            Ok(all_zero(&flow::variation_m(&one, &w, 0.3).map_err(e)?) && du.values().iter().all(|&x| x == 0.0))
        }),
        ("variation of I swaps with its arguments", || {
            let w = DoubleWell::quartic();
            let spec = grid(2, 16, 0.0, 1.0)?;
            let u = ScalarField::from_fn(spec.clone(), |x| (x[0] * 5.0).sin());
            let v = ScalarField::from_fn(spec, |x| (x[1] * 3.0 - x[0]).tanh());
            let (a, b) = flow::variation_i(&u, &v, &w, 0.1).map_err(e)?;
            let (c, d) = flow::variation_i(&v, &u, &w, 0.1).map_err(e)?;
            Ok(a == d && b == c)
        }),
        ("wells are fixed points of the flow", || {
            let cfg = small_flow(InitV::Constant(1.0), 1.0);
            let one = ScalarField::constant(grid(2, 20, -1.0, 1.0)?, 1.0);
            let mut s = FlowState::new(one.clone(), one.clone(), &cfg).map_err(e)?;
            flow::step(&mut s, &cfg, 1e-3).map_err(e)?;
            Ok(s.u == one && s.v == one)
        }),
        ("decoupled flow keeps v and conserves mass", || {
            let cfg = small_flow(InitV::Noise(0.5), 0.0);
            let s0 = flow::initial_state(&cfg).map_err(e)?;
            let mut ok = true;
            flow::run_with(&cfg, |s| {
                ok &= s.v == s0.v && (s.u.integrate() - s0.u.integrate()).abs() <= 1e-12;
                Ok(())
            })
            .map_err(e)?;
            Ok(ok)
        }),
        ("flow logs are reproducible", || {
            let cfg = small_flow(InitV::Noise(0.5), 1.0);
            Ok(flow::run(&cfg).map_err(e)?.to_csv() == flow::run(&cfg).map_err(e)?.to_csv())
        }),
    ]
}

fn small_flow(init_v: InitV, lambda: f64) -> FlowConfig {
    FlowConfig {
        epsilon: 0.2,
        lambda,
        steps: 10,
        dt: TimeStep::Auto,
        mass_constraint: true,
        seed: 1,
        geometry: Geometry::new(
            Surface::Disk {
                radius: 1.0,
                center: [0.0; 2],
            },
            PhaseSplit::None,
        )
        .expect("unit disk"),
        init_v,
        log_every: 5,
        c_safe: 0.4,
        q: 4.0,
        box_lo: vec![-2.0; 2],
        box_hi: vec![2.0; 2],
        well: DoubleWell::quartic(),
        memory_cap: DEFAULT_MEMORY_CAP,
    }
}

pub fn run_all() -> Vec<CheckResult> {
    checks()
        .into_iter()
        .map(|(name, f)| match f() {
            Ok(passed) => CheckResult {
                name,
                passed,
                detail: None,
            },
            Err(msg) => CheckResult {
                name,
                passed: false,
                detail: Some(msg),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    #[test]
    fn every_check_passes() {
        for r in super::run_all() {
            assert!(r.passed, "{} {:?}", r.name, r.detail);
        }
    }
}
