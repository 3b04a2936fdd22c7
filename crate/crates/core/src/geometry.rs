//! Closed-form limit membranes: signed distance, nearest-point projection,
//! curvature of parallel surfaces, geodesic distance to the phase boundary,
//! and the sharp-interface limit energies.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::{DoubleWell, Modulus};

/// The limit membrane ∂E, with E the region where the signed distance is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    /// E = {x₀ > position} in dimension `dim`; `cross_section` is the area of
    /// the box face the interface cuts through.
    Plane {
        dim: usize,
        position: f64,
        cross_section: f64,
    },
    Disk { radius: f64, center: [f64; 2] },
    Sphere { radius: f64, center: [f64; 3] },
}

/// The phase region F ⊂ ∂E.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PhaseSplit {
    #[default]
    None,
    /// F is the arc of angles (α₁, α₂), measured counter-clockwise from the x₀ axis.
    TwoArcs { alpha1: f64, alpha2: f64 },
    /// F is the cap of polar angles θ < θ₀ about the x₂ axis.
    Cap { theta0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub surface: Surface,
    pub split: PhaseSplit,
}

/// Sharp-interface limit values; `None` where the quantity is not defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpLimits {
    pub sigma: f64,
    /// σ·Hⁿ⁻¹(∂E)
    pub perimeter_limit: f64,
    /// σ²·Hⁿ⁻²(∂F)
    pub line_limit: Option<f64>,
    /// σ∫ a(v)|H|² with H the sum of principal curvatures (n = 3 only).
    pub willmore_limit: Option<f64>,
    /// σ∫ |H|², the limit of the unweighted diffuse Willmore energy (n = 3 only).
    pub willmore_unweighted_limit: Option<f64>,
}

impl Geometry {
    pub fn new(surface: Surface, split: PhaseSplit) -> Result<Self> {
        let g = Geometry { surface, split };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self.surface {
            Surface::Plane {
                dim,
                position,
                cross_section,
            } => {
                if !(1..=3).contains(&dim) || !position.is_finite() || !(cross_section > 0.0) {
                    return Err(Error::Config("plane needs dim in 1..=3, finite position, positive cross-section".into()));
                }
            }
            Surface::Disk { radius, center } => {
                if !(radius > 0.0 && radius.is_finite()) || !finite(&center) {
                    return Err(Error::Config(format!("disk radius must be positive, got {radius}")));
                }
            }
            Surface::Sphere { radius, center } => {
                if !(radius > 0.0 && radius.is_finite()) || !finite(&center) {
                    return Err(Error::Config(format!("sphere radius must be positive, got {radius}")));
                }
            }
        }
        match (self.surface, self.split) {
            (_, PhaseSplit::None) => Ok(()),
            (Surface::Disk { .. }, PhaseSplit::TwoArcs { alpha1, alpha2 }) => {
                if !(alpha1 < alpha2 && alpha2 - alpha1 < TAU) {
                    return Err(Error::Config(format!(
                        "arc split needs alpha1 < alpha2 < alpha1 + 2π, got ({alpha1}, {alpha2})"
                    )));
                }
                Ok(())
            }
            (Surface::Sphere { .. }, PhaseSplit::Cap { theta0 }) => {
                if !(theta0 > 0.0 && theta0 < PI) {
                    return Err(Error::Config(format!("cap angle must lie in (0, π), got {theta0}")));
                }
                Ok(())
            }
            (s, p) => Err(Error::Config(format!("phase split {p:?} is not defined on {s:?}"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self.surface {
            Surface::Plane { dim, .. } => dim,
            Surface::Disk { .. } => 2,
            Surface::Sphere { .. } => 3,
        }
    }

    /// Offset from the centre and its length, for the round shapes.
    fn radial(&self, x: [f64; 3]) -> Option<([f64; 3], f64, f64)> {
        match self.surface {
            Surface::Disk { radius, center } => {
                let r = [x[0] - center[0], x[1] - center[1], 0.0];
                Some((r, r[0].hypot(r[1]), radius))
            }
            Surface::Sphere { radius, center } => {
                let r = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                Some((r, (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt(), radius))
            }
            Surface::Plane { .. } => None,
        }
    }

    /// dist(x, ℝⁿ∖E) − dist(x, E): positive inside E.
    pub fn signed_distance(&self, x: [f64; 3]) -> f64 {
        match self.surface {
            Surface::Plane { position, .. } => x[0] - position,
            _ => {
                let (_, r, radius) = self.radial(x).expect("round surface");
                radius - r
            }
        }
    }

    /// Unit vector ∇d(x).
    pub fn normal(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        match self.surface {
            Surface::Plane { .. } => Ok([1.0, 0.0, 0.0]),
            _ => {
                let (r, len, _) = self.radial(x).expect("round surface");
                if len == 0.0 {
                    return Err(Error::DegenerateProjection(x));
                }
                Ok([-r[0] / len, -r[1] / len, -r[2] / len])
            }
        }
    }

    /// Nearest point on ∂E, π(x) = x − d(x)·∇d(x).
    pub fn project(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        match self.surface {
            Surface::Plane { position, .. } => Ok([position, x[1], x[2]]),
            Surface::Disk { radius, center } => {
                let (r, len, _) = self.radial(x).expect("disk");
                if len == 0.0 {
                    return Err(Error::DegenerateProjection(x));
                }
                let s = radius / len;
                Ok([center[0] + s * r[0], center[1] + s * r[1], x[2]])
            }
            Surface::Sphere { radius, center } => {
                let (r, len, _) = self.radial(x).expect("sphere");
                if len == 0.0 {
                    return Err(Error::DegenerateProjection(x));
                }
                let s = radius / len;
                Ok([center[0] + s * r[0], center[1] + s * r[1], center[2] + s * r[2]])
            }
        }
    }

    /// Principal curvatures of ∂E (constant on the shapes supported here).
    pub fn principal_curvatures(&self) -> Vec<f64> {
        match self.surface {
            Surface::Plane { dim, .. } => vec![0.0; dim.saturating_sub(1)],
            Surface::Disk { radius, .. } => vec![1.0 / radius],
            Surface::Sphere { radius, .. } => vec![1.0 / radius; 2],
        }
    }

    /// Hᵗ(x) = Σ kᵢ/(1 − kᵢ d(x)), which equals −Δd.
    pub fn curvature_sum(&self, x: [f64; 3]) -> Result<f64> {
        let d = self.signed_distance(x);
        let mut sum = 0.0;
        for k in self.principal_curvatures() {
            let denom = 1.0 - k * d;
            if denom <= 0.0 {
                return Err(Error::CurvatureSingularity { distance: d });
            }
            sum += k / denom;
        }
        Ok(sum)
    }

    /// Signed geodesic distance on ∂E to ∂F, positive inside F.
    pub fn geodesic_signed_distance(&self, y: [f64; 3]) -> Result<f64> {
        let d = self.signed_distance(y);
        if d.abs() > 1e-8 {
            return Err(Error::Domain(format!("point is {d} away from the membrane")));
        }
        self.geodesic_unchecked(y)
    }

    /// Geodesic distance of a point assumed to lie on ∂E (or radially above it).
    pub(crate) fn geodesic_unchecked(&self, y: [f64; 3]) -> Result<f64> {
        match (self.surface, self.split) {
            (_, PhaseSplit::None) => Err(Error::Config("geodesic distance needs a phase split".into())),
            (Surface::Sphere { radius, center }, PhaseSplit::Cap { theta0 }) => {
                let (rx, ry, rz) = (y[0] - center[0], y[1] - center[1], y[2] - center[2]);
                let rho = rx.hypot(ry);
                // θ₀ − θ written through the elevation atan2(z, ρ), which is odd in z
                Ok(radius * ((theta0 - FRAC_PI_2) + rz.atan2(rho)))
            }
            (Surface::Disk { radius, center }, PhaseSplit::TwoArcs { alpha1, alpha2 }) => {
                let angle = (y[1] - center[1]).atan2(y[0] - center[0]);
                let len = alpha2 - alpha1;
                let s = (angle - alpha1).rem_euclid(TAU);
                Ok(if s < len {
                    radius * s.min(len - s)
                } else {
                    -radius * (s - len).min(TAU - s)
                })
            }
            (s, p) => Err(Error::Config(format!("phase split {p:?} is not defined on {s:?}"))),
        }
    }

    /// Point of ∂E used for v at the centre of a round shape: the limit along
    /// the positive polar axis (sphere) or the positive x₀ axis (disk).
    fn skeleton_limit_point(&self) -> [f64; 3] {
        match self.surface {
            Surface::Sphere { radius, center } => [center[0], center[1], center[2] + radius],
            Surface::Disk { radius, center } => [center[0] + radius, center[1], 0.0],
            Surface::Plane { position, .. } => [position, 0.0, 0.0],
        }
    }

    /// Geodesic distance of π(x) to ∂F for any ambient x; at the centre of a
    /// round shape the value is taken by continuity along the reference axis.
    pub fn ambient_geodesic(&self, x: [f64; 3]) -> Result<f64> {
        if self.is_skeleton(x) {
            self.geodesic_unchecked(self.skeleton_limit_point())
        } else {
            self.geodesic_unchecked(x)
        }
    }

    pub fn is_skeleton(&self, x: [f64; 3]) -> bool {
        match self.radial(x) {
            Some((_, len, _)) => len == 0.0,
            None => false,
        }
    }

    /// Limit phase on ∂E: +1 on F, −1 on ∂E∖F.
    pub fn limit_phase(&self, y: [f64; 3]) -> f64 {
        match self.split {
            PhaseSplit::None => -1.0,
            _ => match self.geodesic_unchecked(y) {
                Ok(d) if d > 0.0 => 1.0,
                _ => -1.0,
            },
        }
    }

    /// Hⁿ⁻¹(∂E).
    pub fn surface_measure(&self) -> f64 {
        match self.surface {
            Surface::Plane { cross_section, .. } => cross_section,
            Surface::Disk { radius, .. } => TAU * radius,
            Surface::Sphere { radius, .. } => 4.0 * PI * radius * radius,
        }
    }

    /// Hⁿ⁻²(∂F), when a split is present.
    pub fn split_measure(&self) -> Option<f64> {
        match (self.surface, self.split) {
            (Surface::Disk { .. }, PhaseSplit::TwoArcs { .. }) => Some(2.0),
            (Surface::Sphere { radius, .. }, PhaseSplit::Cap { theta0 }) => Some(TAU * radius * theta0.sin()),
            _ => None,
        }
    }

    pub fn sharp_limits(&self, well: &DoubleWell, modulus: &Modulus) -> Result<SharpLimits> {
        let sigma = well.sigma();
        let perimeter_limit = sigma * self.surface_measure();
        let line_limit = self.split_measure().map(|m| sigma * sigma * m);
        let willmore_limit = match (self.surface, self.split) {
            (Surface::Sphere { radius, .. }, PhaseSplit::Cap { theta0 }) => {
                let area = 4.0 * PI * radius * radius;
                let cap = TAU * radius * radius * (1.0 - theta0.cos());
                Some(sigma * 4.0 / (radius * radius) * (modulus.a1 * cap + modulus.a2 * (area - cap)))
            }
            (Surface::Sphere { .. }, PhaseSplit::None) => Some(sigma * 16.0 * PI * modulus.a2),
            _ => None,
        };
        let willmore_unweighted_limit = match self.surface {
            Surface::Sphere { .. } => Some(sigma * 16.0 * PI),
            _ => None,
        };
        Ok(SharpLimits {
            sigma,
            perimeter_limit,
            line_limit,
            willmore_limit,
            willmore_unweighted_limit,
        })
    }

    /// Quadrature nodes and weights on ∂E: midpoint latitude–longitude product
    /// rule on the sphere, midpoint arc rule on the circle.
    pub fn surface_quadrature(&self, n_theta: usize, n_phi: usize) -> Result<Vec<([f64; 3], f64)>> {
        match self.surface {
            Surface::Sphere { radius, center } => {
                let (dt, dp) = (PI / n_theta as f64, TAU / n_phi as f64);
                let mut nodes = Vec::with_capacity(n_theta * n_phi);
                for i in 0..n_theta {
                    let th = (i as f64 + 0.5) * dt;
                    let (st, ct) = th.sin_cos();
                    let w = radius * radius * st * dt * dp;
                    for j in 0..n_phi {
                        let ph = (j as f64 + 0.5) * dp;
                        let (sp, cp) = ph.sin_cos();
                        nodes.push((
                            [
                                center[0] + radius * st * cp,
                                center[1] + radius * st * sp,
                                center[2] + radius * ct,
                            ],
                            w,
                        ));
                    }
                }
                Ok(nodes)
            }
            Surface::Disk { radius, center } => {
                let n = n_phi;
                let dp = TAU / n as f64;
                Ok((0..n)
                    .map(|j| {
                        let ph = (j as f64 + 0.5) * dp;
                        ([center[0] + radius * ph.cos(), center[1] + radius * ph.sin(), 0.0], radius * dp)
                    })
                    .collect())
            }
            Surface::Plane { .. } => Err(Error::Config("surface quadrature is not available for the plane".into())),
        }
    }

    /// Checks that the box `[lo, hi]` contains every point within `reach` of ∂E.
    pub fn check_box(&self, lo: &[f64], hi: &[f64], reach: f64) -> Result<()> {
        let n = self.dim();
        if lo.len() != n || hi.len() != n {
            return Err(Error::Config(format!("box must have {n} coordinates per corner")));
        }
        let need: Vec<(f64, f64)> = match self.surface {
            Surface::Plane { position, .. } => {
                let mut v = vec![(position - reach, position + reach)];
                for a in 1..n {
                    v.push((hi[a].min(lo[a]), hi[a].max(lo[a])));
                }
                v
            }
            Surface::Disk { radius, center } => center.iter().map(|c| (c - radius - reach, c + radius + reach)).collect(),
            Surface::Sphere { radius, center } => center.iter().map(|c| (c - radius - reach, c + radius + reach)).collect(),
        };
        for a in 0..n {
            if lo[a] > need[a].0 || hi[a] < need[a].1 {
                let req: Vec<String> = need.iter().map(|(a, b)| format!("[{a:.6}, {b:.6}]")).collect();
                return Err(Error::Config(format!(
                    "box too small: axis {a} is [{}, {}], required box {}",
                    lo[a],
                    hi[a],
                    req.join(" x ")
                )));
            }
        }
        Ok(())
    }
}
