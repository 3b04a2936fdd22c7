//! Recovery pairs (u_ε, v_ε) built from distance functions and the truncated
//! profile, and ε-sweeps against the sharp-interface limits.

use serde::Serialize;

use crate::energy::{energy_report, EnergyReport};
use crate::error::{Error, Result};
use crate::geometry::{Geometry, PhaseSplit, SharpLimits, Surface};
use crate::grid::{GridSpec, ScalarField};
use crate::potential::{DoubleWell, Modulus};
use crate::profile::{OptimalProfile, TruncatedProfile};

#[derive(Debug, Clone)]
pub struct RecoveryConfig {
    pub geometry: Geometry,
    /// Strictly decreasing, each in (0, 1).
    pub epsilons: Vec<f64>,
    /// Refinement quotient q: h = ε/q.
    pub q: f64,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub well: DoubleWell,
    pub modulus: Modulus,
    pub memory_cap: usize,
}

impl RecoveryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::Config("at least one ε is required".into()));
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Config(format!("every ε must lie in (0, 1), got {e}")));
            }
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("epsilons must be strictly decreasing".into()));
        }
        if !(self.q >= 4.0 && self.q.is_finite()) {
            return Err(Error::Config(format!("refinement quotient q must be at least 4, got {}", self.q)));
        }
        let n = self.geometry.dim();
        if self.box_lo.len() != n || self.box_hi.len() != n {
            return Err(Error::Config(format!("box corners must have {n} coordinates")));
        }
        if let Surface::Plane { cross_section, .. } = self.geometry.surface {
            let area: f64 = (1..n).map(|a| self.box_hi[a] - self.box_lo[a]).product();
            if (area - cross_section).abs() > 1e-12 * area.max(1.0) {
                return Err(Error::Config(format!(
                    "plane cross-section {cross_section} does not match the box face area {area}"
                )));
            }
        }
        for &e in &self.epsilons {
            self.geometry.check_box(&self.box_lo, &self.box_hi, self.reach(e))?;
        }
        Ok(())
    }

    /// 2εT_ε + 4h: the transition tube plus four grid cells.
    pub fn reach(&self, epsilon: f64) -> f64 {
        2.0 * epsilon * epsilon.ln().abs() + 4.0 * epsilon / self.q
    }

    pub fn grid(&self, epsilon: f64) -> Result<GridSpec> {
        GridSpec::from_box(&self.box_lo, &self.box_hi, epsilon / self.q, self.memory_cap)
    }

    pub fn profile(&self, epsilon: f64) -> Result<TruncatedProfile> {
        TruncatedProfile::new(&self.well, epsilon)
    }

    pub fn limits(&self) -> Result<SharpLimits> {
        self.geometry.sharp_limits(&self.well, &self.modulus)
    }
}

/// u_ε(x) = ŵ_ε(d(x)).
pub fn build_u(cfg: &RecoveryConfig, epsilon: f64) -> Result<ScalarField> {
    let tp = cfg.profile(epsilon)?;
    cfg.geometry.check_box(&cfg.box_lo, &cfg.box_hi, cfg.reach(epsilon))?;
    build_u_with(cfg, &tp)
}

fn build_u_with(cfg: &RecoveryConfig, tp: &TruncatedProfile) -> Result<ScalarField> {
    let spec = cfg.grid(tp.epsilon())?;
    let geo = cfg.geometry;
    Ok(ScalarField::from_fn(spec, |x| tp.eval_scaled(geo.signed_distance(x))))
}

/// v_ε(x) = ŵ_ε(d_g(π(x))).
pub fn build_v(cfg: &RecoveryConfig, epsilon: f64) -> Result<ScalarField> {
    let tp = cfg.profile(epsilon)?;
    cfg.geometry.check_box(&cfg.box_lo, &cfg.box_hi, cfg.reach(epsilon))?;
    build_v_with(cfg, &tp)
}

fn build_v_with(cfg: &RecoveryConfig, tp: &TruncatedProfile) -> Result<ScalarField> {
    if cfg.geometry.split == PhaseSplit::None {
        return Err(Error::Config("v needs a phase split".into()));
    }
    let spec = cfg.grid(tp.epsilon())?;
    let geo = cfg.geometry;
    ScalarField::try_from_fn(spec, |x| Ok(tp.eval_scaled(geo.ambient_geodesic(x)?)))
}

/// Fields and profile for one ε, handed to sweep observers.
pub struct RecoveryFields<'a> {
    pub epsilon: f64,
    pub profile: &'a TruncatedProfile,
    pub u: &'a ScalarField,
    pub v: &'a ScalarField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelativeErrors {
    pub m: Option<f64>,
    pub i: Option<f64>,
    pub j: Option<f64>,
    pub f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub h: f64,
    pub report: EnergyReport,
    /// Signed relative errors (X − X_limit)/X_limit; `None` without a limit.
    pub errors: RelativeErrors,
    /// Fitted log-log slopes of |error| against ε, on the final row only.
    pub rates: Option<RelativeErrors>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub limits: SharpLimits,
    pub rows: Vec<SweepRow>,
    pub complete: bool,
    pub failure: Option<String>,
}

fn rel(x: f64, limit: Option<f64>) -> Option<f64> {
    match limit {
        Some(l) if l != 0.0 => Some((x - l) / l),
        _ => None,
    }
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() || ys.iter().any(|&y| !(y > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn fit_rates(rows: &[SweepRow]) -> RelativeErrors {
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let fit = |get: fn(&RelativeErrors) -> Option<f64>| -> Option<f64> {
        let ys: Option<Vec<f64>> = rows.iter().map(|r| get(&r.errors).map(f64::abs)).collect();
        loglog_slope(&eps, &ys?)
    };
    RelativeErrors {
        m: fit(|e| e.m),
        i: fit(|e| e.i),
        j: fit(|e| e.j),
        f: fit(|e| e.f),
    }
}

pub fn sweep(cfg: &RecoveryConfig) -> Result<SweepResult> {
    sweep_with(cfg, |_| Ok(()))
}

/// Runs the sweep, calling `observe` with the fields of every ε after the
/// energies are evaluated.
pub fn sweep_with<F>(cfg: &RecoveryConfig, mut observe: F) -> Result<SweepResult>
where
    F: FnMut(&RecoveryFields<'_>) -> Result<()>,
{
    cfg.validate()?;
    let limits = cfg.limits()?;
    let profile = OptimalProfile::new(&cfg.well)?;
    let mut rows = Vec::with_capacity(cfg.epsilons.len());
    let mut failure = None;
    for &eps in &cfg.epsilons {
        let row = (|| -> Result<SweepRow> {
            let tp = TruncatedProfile::from_profile(profile.clone(), eps)?;
            let u = build_u_with(cfg, &tp)?;
            let v = if cfg.geometry.split == PhaseSplit::None {
                ScalarField::constant(u.spec().clone(), -1.0)
            } else {
                build_v_with(cfg, &tp)?
            };
            let report = energy_report(&u, &v, &cfg.well, &cfg.modulus, eps)?;
            observe(&RecoveryFields {
                epsilon: eps,
                profile: &tp,
                u: &u,
                v: &v,
            })?;
            Ok(SweepRow {
                epsilon: eps,
                h: u.spec().spacing(),
                report,
                errors: RelativeErrors {
                    m: rel(report.m, Some(limits.perimeter_limit)),
                    i: rel(report.i, limits.line_limit),
                    j: rel(report.j, limits.willmore_limit),
                    f: rel(report.f, limits.willmore_unweighted_limit),
                },
                rates: None,
            })
        })();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    if rows.len() >= 3 {
        let rates = fit_rates(&rows);
        rows.last_mut().expect("non-empty").rates = Some(rates);
    }
    Ok(SweepResult {
        limits,
        complete: failure.is_none(),
        failure,
        rows,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl SweepResult {
    /// Table with columns epsilon,h,M,I,J,F,discrepancy,M_err,I_err,J_err,F_err.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,h,M,I,J,F,discrepancy,M_err,I_err,J_err,F_err\n");
        for r in &self.rows {
            let e = &r.report;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                r.epsilon,
                r.h,
                e.m,
                e.i,
                e.j,
                e.f,
                e.discrepancy_l1,
                opt(r.errors.m),
                opt(r.errors.i),
                opt(r.errors.j),
                opt(r.errors.f)
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::modica_mortola;
    use crate::grid::DEFAULT_MEMORY_CAP;
    use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

    fn disk_cfg(eps: Vec<f64>, q: f64) -> RecoveryConfig {
        RecoveryConfig {
            geometry: Geometry::new(
                Surface::Disk {
                    radius: 1.0,
                    center: [0.0; 2],
                },
                PhaseSplit::TwoArcs { alpha1: 0.0, alpha2: PI },
            )
            .unwrap(),
            epsilons: eps,
            q,
            box_lo: vec![-2.0; 2],
            box_hi: vec![2.0; 2],
            well: DoubleWell::quartic(),
            modulus: Modulus::new(1.0, 2.0).unwrap(),
            memory_cap: DEFAULT_MEMORY_CAP,
        }
    }

    #[test]
    fn u_values_at_known_distances() {
        let cfg = disk_cfg(vec![0.1], 8.0);
        let u = build_u(&cfg, 0.1).unwrap();
        let spec = u.spec();
        let tp = cfg.profile(0.1).unwrap();
        let reach = 2.0 * 0.1 * tp.t_trunc();
        for i in 0..spec.len() {
            let x = spec.point(i);
            let d = cfg.geometry.signed_distance(x);
            if d >= reach {
                assert_eq!(u.values()[i], 1.0);
            }
            if d <= -reach {
                assert_eq!(u.values()[i], -1.0);
            }
        }
        assert_eq!(tp.eval_scaled(0.0), 0.0);
        assert!((tp.eval_scaled(0.1) - SQRT_2.tanh()).abs() < 1e-15);
        assert!((SQRT_2.tanh() - 0.88839).abs() < 1e-5);
    }

    #[test]
    fn v_values() {
        let eps = 0.05;
        let cfg = disk_cfg(vec![eps], 8.0);
        let v = build_v(&cfg, eps).unwrap();
        let spec = v.spec();
        // grid point nearest to (0, 1), the midpoint of F
        let mut best = (f64::INFINITY, 0);
        for i in 0..spec.len() {
            let x = spec.point(i);
            let dist = x[0].abs() + (x[1] - 1.0).abs();
            if dist < best.0 {
                best = (dist, i);
            }
        }
        assert_eq!(v.values()[best.1], 1.0);
        let tp = cfg.profile(eps).unwrap();
        let on_boundary = tp.eval_scaled(cfg.geometry.ambient_geodesic([1.3, 0.0, 0.0]).unwrap());
        assert_eq!(on_boundary, 0.0);

        let sphere = RecoveryConfig {
            geometry: Geometry::new(
                Surface::Sphere {
                    radius: 1.0,
                    center: [0.0; 3],
                },
                PhaseSplit::Cap { theta0: FRAC_PI_2 },
            )
            .unwrap(),
            epsilons: vec![0.15],
            q: 4.0,
            box_lo: vec![-1.75; 3],
            box_hi: vec![1.75; 3],
            well: DoubleWell::quartic(),
            modulus: Modulus::new(1.0, 2.0).unwrap(),
            memory_cap: DEFAULT_MEMORY_CAP,
        };
        let tp = sphere.profile(0.15).unwrap();
        let g = sphere.geometry;
        assert_eq!(tp.eval_scaled(g.ambient_geodesic([0.01, 0.0, 0.99]).unwrap()), 1.0);
        assert_eq!(tp.eval_scaled(g.ambient_geodesic([0.0; 3]).unwrap()), 1.0);
        assert_eq!(tp.eval_scaled(g.ambient_geodesic([0.5, 0.5, 0.0]).unwrap()), 0.0);
        let no_split = RecoveryConfig {
            geometry: Geometry::new(g.surface, PhaseSplit::None).unwrap(),
            ..sphere
        };
        assert!(matches!(build_v(&no_split, 0.15), Err(Error::Config(_))));
    }

    #[test]
    fn small_box_is_rejected_with_required_box() {
        let mut cfg = disk_cfg(vec![0.2], 8.0);
        cfg.box_lo = vec![-1.2; 2];
        cfg.box_hi = vec![1.2; 2];
        let err = build_u(&cfg, 0.2).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("required box"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = disk_cfg(vec![0.1, 0.2], 8.0);
        assert!(cfg.validate().is_err());
        cfg.epsilons = vec![0.2, 0.1];
        cfg.q = 3.0;
        assert!(cfg.validate().is_err());
        cfg.q = 4.0;
        assert!(cfg.validate().is_ok());
        cfg.epsilons = vec![1.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn planar_recovery_energy() {
        let eps = 0.05;
        let cfg = RecoveryConfig {
            geometry: Geometry::new(
                Surface::Plane {
                    dim: 2,
                    position: 0.0,
                    cross_section: 0.25,
                },
                PhaseSplit::None,
            )
            .unwrap(),
            epsilons: vec![eps],
            q: 8.0,
            box_lo: vec![-0.5, 0.0],
            box_hi: vec![0.5, 0.25],
            well: DoubleWell::quartic(),
            modulus: Modulus::new(1.0, 1.0).unwrap(),
            memory_cap: DEFAULT_MEMORY_CAP,
        };
        let u = build_u(&cfg, eps).unwrap();
        let m = modica_mortola(&u, &cfg.well, eps).unwrap();
        let target = cfg.well.sigma() * 0.25;
        assert!((m - target).abs() < 5e-3 * target, "{}", m / target - 1.0);
    }

    #[test]
    fn constant_modulus_factors_out_of_every_row() {
        let mut cfg = disk_cfg(vec![0.2, 0.15, 0.1], 4.0);
        cfg.modulus = Modulus::new(1.7, 1.7).unwrap();
        let res = sweep(&cfg).unwrap();
        assert!(res.complete);
        assert_eq!(res.rows.len(), 3);
        for r in &res.rows {
            assert!((r.report.j / r.report.f - 1.7).abs() < 1e-10);
            assert!(r.errors.m.unwrap().is_finite());
            assert!(r.errors.j.is_none());
        }
        assert!(res.rows[2].rates.is_some());
        assert!(res.rows[0].rates.is_none());
        let csv = res.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("epsilon,h,M,I,J,F,discrepancy,M_err,I_err,J_err,F_err\n"));
    }

    #[test]
    fn observer_failure_marks_sweep_partial() {
        let cfg = disk_cfg(vec![0.2, 0.15], 4.0);
        let mut calls = 0;
        let res = sweep_with(&cfg, |f| {
            calls += 1;
            if f.epsilon < 0.18 {
                Err(Error::Domain("stop".into()))
            } else {
                Ok(())
            }
        })
        .unwrap();
        assert_eq!(calls, 2);
        assert!(!res.complete);
        assert_eq!(res.rows.len(), 1);
        assert!(res.failure.unwrap().contains("stop"));
    }

    #[test]
    fn slope_fit() {
        let xs = [0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&xs, &[1.0, 0.0, 1.0]).is_none());
    }
}
