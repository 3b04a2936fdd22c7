//! Double-well potentials, the antiderivative map φ(t) = ∫₋₁ᵗ √(2W), the
//! surface tension σ = φ(1), and the phase-dependent bending modulus.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Quartic,
    Custom,
}

/// A continuous potential with zeros at ±1 and power growth at infinity.
#[derive(Clone)]
pub struct DoubleWell {
    kind: PotentialKind,
    label: String,
    growth_exponent: f64,
    growth_constant: f64,
    threshold: f64,
    w: RealFn,
    dw: RealFn,
    d2w: Option<RealFn>,
    sigma: f64,
}

impl fmt::Debug for DoubleWell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DoubleWell")
            .field("kind", &self.kind)
            .field("label", &self.label)
            .field("growth_exponent", &self.growth_exponent)
            .field("growth_constant", &self.growth_constant)
            .field("threshold", &self.threshold)
            .field("sigma", &self.sigma)
            .finish()
    }
}

const SIMPSON_TOL: f64 = 1e-10;
const SIMPSON_MAX_DEPTH: u32 = 40;

impl DoubleWell {
    /// W(t) = (1 − t²)².
    pub fn quartic() -> Self {
        let mut w = DoubleWell {
            kind: PotentialKind::Quartic,
            label: "quartic".into(),
            growth_exponent: 4.0,
            growth_constant: 0.5,
            threshold: 2.0,
            w: Arc::new(|t: f64| {
                let a = 1.0 - t * t;
                a * a
            }),
            dw: Arc::new(|t: f64| -4.0 * t * (1.0 - t * t)),
            d2w: Some(Arc::new(|t: f64| 12.0 * t * t - 4.0)),
            sigma: 0.0,
        };
        w.sigma = w.phi_unchecked(1.0);
        w
    }

    /// W(t) = k(1 − t²)², evaluated through the generic (quadrature) path.
    pub fn scaled_quartic(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Config(format!("potential scale must be positive, got {k}")));
        }
        // On |t| ≥ 2: (9/16)·k·t⁴ ≤ k(1−t²)² ≤ k·t⁴.
        let c = (0.5 * k).min(1.0 / k);
        let mut w = Self::custom(
            move |t| {
                let a = 1.0 - t * t;
                k * a * a
            },
            move |t| -4.0 * k * t * (1.0 - t * t),
            4.0,
            c,
            2.0,
        )?;
        w.d2w = Some(Arc::new(move |t: f64| k * (12.0 * t * t - 4.0)));
        w.label = format!("custom:scale={k}");
        Ok(w)
    }

    /// Arbitrary potential given by W and W′, with growth data
    /// `c|t|^p ≤ W(t) ≤ |t|^p / c` for `|t| ≥ threshold`.
    pub fn custom<W, D>(w: W, dw: D, p: f64, c: f64, threshold: f64) -> Result<Self>
    where
        W: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(p > 1.0 && c > 0.0 && threshold > 0.0) {
            return Err(Error::Config(format!(
                "growth data must satisfy p > 1, c > 0, T > 0 (got p={p}, c={c}, T={threshold})"
            )));
        }
        let mut well = DoubleWell {
            kind: PotentialKind::Custom,
            label: "custom".into(),
            growth_exponent: p,
            growth_constant: c,
            threshold,
            w: Arc::new(w),
            dw: Arc::new(dw),
            d2w: None,
            sigma: 0.0,
        };
        well.validate()?;
        well.sigma = well.phi_unchecked(1.0);
        if !(well.sigma > 0.0 && well.sigma.is_finite()) {
            return Err(Error::Config("surface tension σ must be positive".into()));
        }
        Ok(well)
    }

    fn validate(&self) -> Result<()> {
        if (self.w)(-1.0) != 0.0 || (self.w)(1.0) != 0.0 {
            return Err(Error::Config("double well must vanish exactly at ±1".into()));
        }
        for i in 0..=2000 {
            let t = -5.0 + 10.0 * i as f64 / 2000.0;
            let v = (self.w)(t);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("W({t}) = {v} is negative or not finite")));
            }
        }
        let (p, c, big_t) = (self.growth_exponent, self.growth_constant, self.threshold);
        for i in 0..=400 {
            let t = big_t * (1.0 + 9.0 * i as f64 / 400.0);
            for s in [t, -t] {
                let v = (self.w)(s);
                let m = s.abs().powf(p);
                if v < c * m || v > m / c {
                    return Err(Error::Config(format!(
                        "growth condition c|t|^p ≤ W(t) ≤ |t|^p/c violated at t = {s}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn growth(&self) -> (f64, f64, f64) {
        (self.growth_exponent, self.growth_constant, self.threshold)
    }

    #[inline]
    pub fn w(&self, t: f64) -> f64 {
        (self.w)(t)
    }

    #[inline]
    pub fn dw(&self, t: f64) -> f64 {
        (self.dw)(t)
    }

    /// W″, analytic when known, otherwise a centered difference of W′.
    pub fn d2w(&self, t: f64) -> f64 {
        match &self.d2w {
            Some(f) => f(t),
            None => {
                let h = 1e-5 * (1.0 + t.abs());
                ((self.dw)(t + h) - (self.dw)(t - h)) / (2.0 * h)
            }
        }
    }

    /// φ′(t) = √(2W(t)).
    #[inline]
    pub fn phi_prime(&self, t: f64) -> f64 {
        (2.0 * self.w(t).max(0.0)).sqrt()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn phi(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("φ evaluated at non-finite argument {t}")));
        }
        Ok(self.phi_unchecked(t))
    }

    /// φ without the finiteness check, for hot loops over validated fields.
    pub fn phi_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            PotentialKind::Quartic => quartic_phi(t),
            PotentialKind::Custom => {
                let g = |s: f64| self.phi_prime(s);
                if t >= -1.0 {
                    adaptive_simpson(&g, -1.0, t, SIMPSON_TOL, SIMPSON_MAX_DEPTH)
                } else {
                    -adaptive_simpson(&g, t, -1.0, SIMPSON_TOL, SIMPSON_MAX_DEPTH)
                }
            }
        }
    }
}

/// Closed form of ∫₋₁ᵗ √2·|1 − s²| ds.
fn quartic_phi(t: f64) -> f64 {
    let s2 = std::f64::consts::SQRT_2;
    if t <= -1.0 {
        -s2 * (2.0 / 3.0 - t * t * t / 3.0 + t)
    } else if t <= 1.0 {
        s2 * (t - t * t * t / 3.0 + 2.0 / 3.0)
    } else {
        s2 * (4.0 / 3.0 + t * t * t / 3.0 - t + 2.0 / 3.0)
    }
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

impl FromStr for DoubleWell {
    type Err = Error;

    /// Parses `"quartic"` or `"custom:scale=<k>"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "quartic" {
            return Ok(DoubleWell::quartic());
        }
        if let Some(rest) = s.strip_prefix("custom:scale=") {
            let k: f64 = rest
                .parse()
                .map_err(|_| Error::Config(format!("potential: bad scale '{rest}'")))?;
            return DoubleWell::scaled_quartic(k);
        }
        Err(Error::Config(format!(
            "potential: expected \"quartic\" or \"custom:scale=<k>\", got '{s}'"
        )))
    }
}

/// Values of f(s) = exp(−1/s) below this are treated as exactly zero.
const BUMP_CUTOFF: f64 = 1e-12;

fn bump_tail(s: f64) -> f64 {
    if s <= BUMP_CUTOFF {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// Smooth step: 0 for s ≤ 0, 1 for s ≥ 1.
fn smooth_step(s: f64) -> f64 {
    let a = bump_tail(s);
    let b = bump_tail(1.0 - s);
    a / (a + b)
}

/// Phase-dependent bending modulus a(t) = ω̄(t)·a1 + (1 − ω̄(t))·a2.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Modulus {
    pub a1: f64,
    pub a2: f64,
}

impl Modulus {
    pub fn new(a1: f64, a2: f64) -> Result<Self> {
        if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
            return Err(Error::Config(format!("moduli must be positive, got a1={a1}, a2={a2}")));
        }
        Ok(Modulus { a1, a2 })
    }

    /// ω̄(t) = S((t+1)/2)·S((3−t)/2); smooth, supported in [−1, 3], ω̄(−1) = 0, ω̄(1) = 1.
    pub fn omega(t: f64) -> f64 {
        smooth_step(0.5 * (t + 1.0)) * smooth_step(0.5 * (3.0 - t))
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        self.a2 + Self::omega(t) * (self.a1 - self.a2)
    }

    pub fn min(&self) -> f64 {
        self.a1.min(self.a2)
    }

    pub fn max(&self) -> f64 {
        self.a1.max(self.a2)
    }
}
