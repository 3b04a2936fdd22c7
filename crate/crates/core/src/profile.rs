//! The one-dimensional optimal transition profile and its log-truncated
//! version used to build recovery fields.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{DoubleWell, PotentialKind};
use crate::reduce;

const TABLE_STEP: f64 = 1e-4;
const TABLE_MAX_T: f64 = 400.0;
const SATURATION: f64 = 1.0 - 1e-12;

/// Values of a one-dimensional profile and its first two derivatives.
pub trait Profile {
    fn value(&self, t: f64) -> f64;
    fn derivative(&self, t: f64) -> f64;
    fn second_derivative(&self, t: f64) -> f64;
}

/// Heteroclinic solution of w′ = √(2W(w)), w(0) = 0.
#[derive(Clone)]
pub struct OptimalProfile {
    well: DoubleWell,
    table: Option<Arc<Vec<f64>>>,
}

impl std::fmt::Debug for OptimalProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OptimalProfile")
            .field("well", &self.well.label())
            .field("table_len", &self.table.as_ref().map(|t| t.len()))
            .finish()
    }
}

impl OptimalProfile {
    pub fn new(well: &DoubleWell) -> Result<Self> {
        let table = match well.kind() {
            PotentialKind::Quartic => None,
            PotentialKind::Custom => Some(Arc::new(integrate_profile(well)?)),
        };
        Ok(OptimalProfile {
            well: well.clone(),
            table,
        })
    }

    pub fn well(&self) -> &DoubleWell {
        &self.well
    }

    fn table_value(table: &[f64], t: f64, well: &DoubleWell) -> f64 {
        let x = t / TABLE_STEP;
        let k = x.floor() as usize;
        if k + 1 >= table.len() {
            return *table.last().expect("non-empty table");
        }
        let s = x - k as f64;
        let (y0, y1) = (table[k], table[k + 1]);
        let (m0, m1) = (well.phi_prime(y0) * TABLE_STEP, well.phi_prime(y1) * TABLE_STEP);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
    }
}

impl Profile for OptimalProfile {
    fn value(&self, t: f64) -> f64 {
        match &self.table {
            None => (SQRT_2 * t).tanh(),
            Some(table) => {
                if t < 0.0 {
                    -Self::table_value(table, -t, &self.well)
                } else {
                    Self::table_value(table, t, &self.well)
                }
            }
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match &self.table {
            None => {
                let c = (SQRT_2 * t).cosh();
                SQRT_2 / (c * c)
            }
            Some(_) => self.well.phi_prime(self.value(t)),
        }
    }

    /// w″ = W′(w) along the heteroclinic.
    fn second_derivative(&self, t: f64) -> f64 {
        self.well.dw(self.value(t))
    }
}

/// RK4 for w′ = √(2W(w)) on t ≥ 0, clamped once |w| reaches 1 − 1e−12.
fn integrate_profile(well: &DoubleWell) -> Result<Vec<f64>> {
    if !(well.w(0.0) > 0.0) {
        return Err(Error::DegenerateProfile);
    }
    let f = |w: f64| well.phi_prime(w.min(1.0));
    let h = TABLE_STEP;
    let max_steps = (TABLE_MAX_T / h) as usize;
    let mut table = Vec::with_capacity(1 << 17);
    let mut w = 0.0f64;
    table.push(w);
    for _ in 0..max_steps {
        let k1 = f(w);
        let k2 = f(w + 0.5 * h * k1);
        let k3 = f(w + 0.5 * h * k2);
        let k4 = f(w + h * k3);
        w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if w >= SATURATION {
            table.push(1.0);
            return Ok(table);
        }
        table.push(w);
    }
    table.push(1.0);
    Ok(table)
}

/// The profile w_ε: w on [0, T], a cubic on (T, 2T], 1 beyond, extended oddly,
/// with T = |ln ε|.
#[derive(Debug, Clone)]
pub struct TruncatedProfile {
    epsilon: f64,
    t_trunc: f64,
    coeffs: [f64; 4],
    profile: OptimalProfile,
}

impl TruncatedProfile {
    pub fn new(well: &DoubleWell, epsilon: f64) -> Result<Self> {
        Self::from_profile(OptimalProfile::new(well)?, epsilon)
    }

    pub fn from_profile(profile: OptimalProfile, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("truncation needs 0 < ε < 1, got {epsilon}")));
        }
        let t = epsilon.ln().abs();
        let c0 = profile.value(t);
        let c1 = profile.derivative(t);
        let l = t;
        let d = 1.0 - c0 - c1 * l;
        let c2 = 3.0 * d / (l * l) + c1 / l;
        let c3 = (-2.0 * d - c1 * l) / (l * l * l);
        Ok(TruncatedProfile {
            epsilon,
            t_trunc: t,
            coeffs: [c0, c1, c2, c3],
            profile,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// T_ε = |ln ε|.
    pub fn t_trunc(&self) -> f64 {
        self.t_trunc
    }

    /// Coefficients of p(T + s) = c₀ + c₁s + c₂s² + c₃s³.
    pub fn coeffs(&self) -> [f64; 4] {
        self.coeffs
    }

    pub fn profile(&self) -> &OptimalProfile {
        &self.profile
    }

    /// Residuals of p(T) = w(T), p′(T) = w′(T), p(2T) = 1, p′(2T) = 0.
    pub fn matching_residuals(&self) -> [f64; 4] {
        let t = self.t_trunc;
        let [c0, c1, c2, c3] = self.coeffs;
        let l = t;
        [
            c0 - self.profile.value(t),
            c1 - self.profile.derivative(t),
            c0 + c1 * l + c2 * l * l + c3 * l * l * l - 1.0,
            c1 + 2.0 * c2 * l + 3.0 * c3 * l * l,
        ]
    }

    fn eval_pos(&self, t: f64) -> [f64; 3] {
        let tt = self.t_trunc;
        if t <= tt {
            [
                self.profile.value(t),
                self.profile.derivative(t),
                self.profile.second_derivative(t),
            ]
        } else if t <= 2.0 * tt {
            let s = t - tt;
            let [c0, c1, c2, c3] = self.coeffs;
            [
                c0 + s * (c1 + s * (c2 + s * c3)),
                c1 + s * (2.0 * c2 + 3.0 * c3 * s),
                2.0 * c2 + 6.0 * c3 * s,
            ]
        } else {
            [1.0, 0.0, 0.0]
        }
    }

    /// w_ε(t), w_ε′(t), w_ε″(t) in the stretched variable.
    pub fn eval_all(&self, t: f64) -> [f64; 3] {
        if t < 0.0 {
            let [a, b, c] = self.eval_pos(-t);
            [-a, b, -c]
        } else {
            self.eval_pos(t)
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_all(t)[0]
    }

    /// ŵ_ε(s) = w_ε(s/ε).
    pub fn eval_scaled(&self, s: f64) -> f64 {
        self.eval(s / self.epsilon)
    }

    /// ŵ_ε and its first two derivatives in the physical variable.
    pub fn eval_scaled_all(&self, s: f64) -> [f64; 3] {
        let e = self.epsilon;
        let [a, b, c] = self.eval_all(s / e);
        [a, b / e, c / (e * e)]
    }
}

impl Profile for TruncatedProfile {
    fn value(&self, t: f64) -> f64 {
        self.eval_all(t)[0]
    }
    fn derivative(&self, t: f64) -> f64 {
        self.eval_all(t)[1]
    }
    fn second_derivative(&self, t: f64) -> f64 {
        self.eval_all(t)[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileEnergy {
    /// ∫ W(w) + ½(w′)²
    pub total: f64,
    /// ∫ (w′)²
    pub gradient_sq: f64,
    /// ∫ W(w)
    pub potential: f64,
}

/// Composite-midpoint energy of a profile on [−L, L].
pub fn profile_energy_1d<P: Profile + Sync>(
    profile: &P,
    well: &DoubleWell,
    half_width: f64,
    dt: f64,
) -> Result<ProfileEnergy> {
    if !(half_width > 0.0 && dt > 0.0 && dt.is_finite() && half_width.is_finite()) {
        return Err(Error::Config(format!("profile energy needs L > 0 and dt > 0, got L = {half_width}, dt = {dt}")));
    }
    let n = (2.0 * half_width / dt).round().max(1.0) as usize;
    let step = 2.0 * half_width / n as f64;
    let [g, p] = reduce::sum_n::<2, _>(n, |i| {
        let t = -half_width + (i as f64 + 0.5) * step;
        let d = profile.derivative(t);
        [d * d, well.w(profile.value(t))]
    });
    let (g, p) = (g * step, p * step);
    Ok(ProfileEnergy {
        total: p + 0.5 * g,
        gradient_sq: g,
        potential: p,
    })
}

/// Sup norms of the truncated profile on the matching interval (T, 2T).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationEstimates {
    pub epsilon: f64,
    pub epsilon_sq: f64,
    pub t_trunc: f64,
    /// sup |w_ε′| in the stretched variable
    pub sup_d1: f64,
    /// sup |w_ε″| in the stretched variable
    pub sup_d2: f64,
    /// sup |w − w_ε|
    pub sup_gap: f64,
    /// sup |ŵ_ε′| in the physical variable
    pub sup_d1_physical: f64,
    /// sup |ŵ_ε″| in the physical variable
    pub sup_d2_physical: f64,
    /// max(w_ε) − 1 on the cubic segment
    pub overshoot: f64,
}

pub fn truncation_estimates(tp: &TruncatedProfile) -> TruncationEstimates {
    const SAMPLES: usize = 10_000;
    let t0 = tp.t_trunc();
    let (mut d1, mut d2, mut gap, mut top) = (0.0f64, 0.0f64, 0.0f64, f64::NEG_INFINITY);
    for i in 0..SAMPLES {
        let t = t0 + t0 * (i as f64 + 0.5) / SAMPLES as f64;
        let [a, b, c] = tp.eval_all(t);
        d1 = d1.max(b.abs());
        d2 = d2.max(c.abs());
        gap = gap.max((tp.profile().value(t) - a).abs());
        top = top.max(a);
    }
    let e = tp.epsilon();
    TruncationEstimates {
        epsilon: e,
        epsilon_sq: e * e,
        t_trunc: t0,
        sup_d1: d1,
        sup_d2: d2,
        sup_gap: gap,
        sup_d1_physical: d1 / e,
        sup_d2_physical: d2 / (e * e),
        overshoot: top - 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quartic_profile() -> OptimalProfile {
        OptimalProfile::new(&DoubleWell::quartic()).unwrap()
    }

    #[test]
    fn optimal_profile_examples() {
        let w = quartic_profile();
        assert_eq!(w.value(0.0), 0.0);
        assert!((w.derivative(0.0) - SQRT_2).abs() < 1e-15);
        assert_eq!(w.value(40.0), 1.0);
        assert_eq!(w.value(-40.0), -1.0);
    }

    #[test]
    fn equipartition_holds_pointwise() {
        let well = DoubleWell::quartic();
        let w = quartic_profile();
        let mut worst = 0.0f64;
        for i in 0..=20_000 {
            let t = -10.0 + i as f64 * 1e-3;
            let d = w.derivative(t);
            worst = worst.max((0.5 * d * d - well.w(w.value(t))).abs());
        }
        assert!(worst <= 1e-8, "{worst}");
    }

    #[test]
    fn euler_lagrange_residual() {
        let well = DoubleWell::quartic();
        let w = quartic_profile();
        let h = 1e-4;
        let mut fd = 0.0f64;
        let mut exact = 0.0f64;
        for i in 0..=2000 {
            let t = -10.0 + i as f64 * 1e-2;
            let second = (w.value(t + h) - 2.0 * w.value(t) + w.value(t - h)) / (h * h);
            fd = fd.max((second - well.dw(w.value(t))).abs());
            let th = (SQRT_2 * t).tanh();
            let analytic = -4.0 * th * (1.0 - th * th);
            exact = exact.max((analytic - w.second_derivative(t)).abs());
        }
        assert!(exact <= 1e-6, "{exact}");
        assert!(fd <= 1e-6, "{fd}");
    }

    #[test]
    fn custom_profile_from_ode_matches_closed_form() {
        let well = DoubleWell::custom(
            |t| (1.0 - t * t).powi(2),
            |t| -4.0 * t * (1.0 - t * t),
            4.0,
            0.5,
            2.0,
        )
        .unwrap();
        let w = OptimalProfile::new(&well).unwrap();
        for t in [-3.0, -0.7, 0.0, 0.123, 1.0, 2.5, 6.0] {
            assert!((w.value(t) - (SQRT_2 * t).tanh()).abs() < 1e-10, "t = {t}");
        }
        let e = profile_energy_1d(&w, &well, 12.0, 1e-3).unwrap();
        assert!((e.total - 4.0 * SQRT_2 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn scaled_quartic_profile_is_stretched_tanh() {
        let well = DoubleWell::scaled_quartic(4.0).unwrap();
        let w = OptimalProfile::new(&well).unwrap();
        // W = 4(1 − t²)² has heteroclinic tanh(2√2 t)
        for t in [-1.0, 0.1, 0.5, 2.0] {
            assert!((w.value(t) - (2.0 * SQRT_2 * t).tanh()).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_well_is_rejected() {
        let well = DoubleWell::custom(
            |t: f64| t * t * (1.0 - t * t).powi(2),
            |t: f64| 2.0 * t * (1.0 - t * t).powi(2) - 4.0 * t.powi(3) * (1.0 - t * t),
            6.0,
            0.5,
            2.0,
        )
        .unwrap();
        assert!(matches!(OptimalProfile::new(&well), Err(Error::DegenerateProfile)));
    }

    #[test]
    fn truncated_profile_examples() {
        let well = DoubleWell::quartic();
        let tp = TruncatedProfile::new(&well, 0.1).unwrap();
        let t = tp.t_trunc();
        assert!((t - 10f64.ln()).abs() < 1e-15);
        assert_eq!(tp.eval(3.0 * t), 1.0);
        assert_eq!(tp.eval(-3.0 * t), -1.0);
        let junction = (SQRT_2 * 10f64.ln()).tanh();
        assert!((tp.eval(t) - junction).abs() < 1e-15);
        assert!((junction - 0.9970355).abs() < 1e-7);
        for i in 0..200 {
            let s = i as f64 * 0.05;
            assert!((tp.eval(-s) + tp.eval(s)).abs() < 1e-12);
        }
        assert!((tp.eval_scaled(0.1 * 0.7) - tp.eval(0.7)).abs() < 1e-15);
    }

    #[test]
    fn matching_conditions() {
        let well = DoubleWell::quartic();
        for eps in [0.5, 0.2, 0.1, 0.05, 0.01, 1e-4] {
            let tp = TruncatedProfile::new(&well, eps).unwrap();
            for r in tp.matching_residuals() {
                assert!(r.abs() <= 1e-12, "ε = {eps}: {r}");
            }
            let t = tp.t_trunc();
            let left = tp.eval_all(t);
            let right = tp.eval_all(t * (1.0 + 1e-13));
            assert!((left[1] - right[1]).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_epsilon() {
        let well = DoubleWell::quartic();
        for eps in [1.0, 1.5, 0.0, -0.1, f64::NAN] {
            assert!(matches!(TruncatedProfile::new(&well, eps), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn overshoot_is_small_and_vanishes() {
        let well = DoubleWell::quartic();
        let mut prev = f64::INFINITY;
        for eps in [0.15, 0.1, 0.075, 0.05, 0.025, 0.01] {
            let tp = TruncatedProfile::new(&well, eps).unwrap();
            let est = truncation_estimates(&tp);
            let gap = 1.0 - tp.profile().value(tp.t_trunc());
            if eps >= 0.025 {
                assert!(est.overshoot <= gap, "ε = {eps}");
            }
            assert!(est.overshoot > 0.0 && est.overshoot < prev);
            prev = est.overshoot;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn profile_energy_of_untruncated_profile() {
        let well = DoubleWell::quartic();
        let sigma = 4.0 * SQRT_2 / 3.0;
        let e = profile_energy_1d(&quartic_profile(), &well, 12.0, 1e-3).unwrap();
        assert!((e.total - sigma).abs() < 1e-6, "{}", e.total - sigma);
        assert!((e.gradient_sq - sigma).abs() < 1e-6);
        assert!((well.sigma() - sigma).abs() < 1e-12);
    }

    #[test]
    fn truncated_energy_close_to_sigma() {
        let well = DoubleWell::quartic();
        let tp = TruncatedProfile::new(&well, 0.1).unwrap();
        let e = profile_energy_1d(&tp, &well, 2.0 * tp.t_trunc() + 1.0, 1e-3).unwrap();
        assert!((e.total - well.sigma()).abs() < 1e-3, "{}", e.total - well.sigma());
    }

    #[test]
    fn truncation_energy_splits_into_profile_and_cubic_parts() {
        let well = DoubleWell::quartic();
        let tp = TruncatedProfile::new(&well, 0.05).unwrap();
        let t = tp.t_trunc();
        let whole = profile_energy_1d(&tp, &well, 2.0 * t, 1e-4).unwrap().total;
        let inner = profile_energy_1d(tp.profile(), &well, t, 1e-4).unwrap().total;
        // energy of the two cubic segments, integrated directly
        let n = 100_000;
        let ds = t / n as f64;
        let mut cubic = 0.0;
        for i in 0..n {
            let s = t + (i as f64 + 0.5) * ds;
            let [a, b, _] = tp.eval_all(s);
            cubic += (well.w(a) + 0.5 * b * b) * ds;
        }
        assert!(whole <= inner + 2.0 * cubic + 1e-9);
    }

    #[test]
    fn truncation_sups_decrease() {
        let well = DoubleWell::quartic();
        let est: Vec<_> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&e| truncation_estimates(&TruncatedProfile::new(&well, e).unwrap()))
            .collect();
        for w in est.windows(2) {
            assert!(w[1].sup_d1 < w[0].sup_d1);
            assert!(w[1].sup_d2 < w[0].sup_d2);
            assert!(w[1].sup_gap < w[0].sup_gap);
        }
        let e = &est[0];
        assert!(e.sup_gap <= 1.0 - (SQRT_2 * 10f64.ln()).tanh());
        let coarse = truncation_estimates(&TruncatedProfile::new(&well, 0.5).unwrap());
        for x in [coarse.sup_d1, coarse.sup_d2, coarse.sup_gap] {
            assert!(x.is_finite() && x > 0.0);
        }
    }
}
