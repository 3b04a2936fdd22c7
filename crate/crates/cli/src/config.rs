//! JSON run configurations. Unknown keys are rejected with their path.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use phasemem::flow::{FlowConfig, InitV, TimeStep};
use phasemem::grid::DEFAULT_MEMORY_CAP;
use phasemem::recovery::RecoveryConfig;
use phasemem::{DoubleWell, Geometry, Modulus, PhaseSplit, Surface};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Threads {
    Count(usize),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

/// Keys accepted by every configuration document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Globals {
    pub threads: Option<Threads>,
    pub memory_cap_points: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl Globals {
    pub fn thread_count(&self) -> Option<usize> {
        match self.threads {
            Some(Threads::Count(n)) if n > 0 => Some(n),
            _ => None,
        }
    }

    pub fn memory_cap(&self) -> usize {
        self.memory_cap_points.unwrap_or(DEFAULT_MEMORY_CAP)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.threads == Some(Threads::Count(0)) {
            return Err(CliError::Config("threads: must be positive or \"auto\"".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitSpec {
    None,
    TwoArcs { alpha1: f64, alpha2: f64 },
    Cap { theta0: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum GeometrySpec {
    #[serde(rename = "plane")]
    Plane {
        dim: usize,
        position: f64,
        cross_section: Option<f64>,
        split: Option<SplitSpec>,
    },
    #[serde(rename = "disk2d")]
    Disk {
        #[serde(rename = "R")]
        radius: f64,
        center: Option<[f64; 2]>,
        split: Option<SplitSpec>,
    },
    #[serde(rename = "sphere3d")]
    Sphere {
        #[serde(rename = "R")]
        radius: f64,
        center: Option<[f64; 3]>,
        split: Option<SplitSpec>,
    },
}

impl GeometrySpec {
    /// Builds the geometry; a plane without an explicit cross-section takes it from the box.
    pub fn build(&self, bx: Option<&BoxSpec>) -> Result<Geometry, CliError> {
        let (surface, split) = match *self {
            GeometrySpec::Plane {
                dim,
                position,
                cross_section,
                split,
            } => {
                let cross_section = match (cross_section, bx) {
                    (Some(a), _) => a,
                    (None, Some(b)) => b.face_area(),
                    (None, None) => 1.0,
                };
                (
                    Surface::Plane {
                        dim,
                        position,
                        cross_section,
                    },
                    split,
                )
            }
            GeometrySpec::Disk { radius, center, split } => (
                Surface::Disk {
                    radius,
                    center: center.unwrap_or([0.0; 2]),
                },
                split,
            ),
            GeometrySpec::Sphere { radius, center, split } => (
                Surface::Sphere {
                    radius,
                    center: center.unwrap_or([0.0; 3]),
                },
                split,
            ),
        };
        let split = match split.unwrap_or(SplitSpec::None) {
            SplitSpec::None => PhaseSplit::None,
            SplitSpec::TwoArcs { alpha1, alpha2 } => PhaseSplit::TwoArcs { alpha1, alpha2 },
            SplitSpec::Cap { theta0 } => PhaseSplit::Cap { theta0 },
        };
        Ok(Geometry::new(surface, split)?)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpec {
    /// Area of the faces normal to axis 0.
    pub fn face_area(&self) -> f64 {
        self.lo.iter().zip(&self.hi).skip(1).map(|(a, b)| b - a).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusSpec {
    pub a1: f64,
    pub a2: f64,
}

fn default_potential() -> String {
    "quartic".into()
}

fn parse_well(s: &str) -> Result<DoubleWell, CliError> {
    Ok(s.parse::<DoubleWell>()?)
}

/// Configuration of `recover`, `sweep`, `slice` and `mfpair`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverySpec {
    pub geometry: GeometrySpec,
    pub epsilons: Vec<f64>,
    pub q: f64,
    #[serde(rename = "box")]
    pub bx: BoxSpec,
    #[serde(default = "default_potential")]
    pub potential: String,
    pub modulus: Option<ModulusSpec>,
    pub threads: Option<Threads>,
    pub memory_cap_points: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl RecoverySpec {
    pub fn globals(&self) -> Globals {
        Globals {
            threads: self.threads,
            memory_cap_points: self.memory_cap_points,
            output_dir: self.output_dir.clone(),
        }
    }

    pub fn build(&self) -> Result<RecoveryConfig, CliError> {
        let m = self.modulus.unwrap_or(ModulusSpec { a1: 1.0, a2: 1.0 });
        let cfg = RecoveryConfig {
            geometry: self.geometry.build(Some(&self.bx))?,
            epsilons: self.epsilons.clone(),
            q: self.q,
            box_lo: self.bx.lo.clone(),
            box_hi: self.bx.hi.clone(),
            well: parse_well(&self.potential)?,
            modulus: Modulus::new(m.a1, m.a2)?,
            memory_cap: self.globals().memory_cap(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DtSpec {
    Fixed(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitVSpec {
    Noise { amplitude: f64 },
    Cap { theta0: f64 },
    Constant { c: f64 },
}

fn default_c_safe() -> f64 {
    0.4
}

fn default_flow_q() -> f64 {
    4.0
}

fn default_true() -> bool {
    true
}

fn default_log_every() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub epsilon: f64,
    pub lambda: f64,
    pub steps: usize,
    pub dt: DtSpec,
    #[serde(default = "default_true")]
    pub mass_constraint: bool,
    pub seed: u64,
    pub init_u: GeometrySpec,
    pub init_v: InitVSpec,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default = "default_c_safe")]
    pub c_safe: f64,
    #[serde(default = "default_flow_q")]
    pub q: f64,
    #[serde(rename = "box")]
    pub bx: BoxSpec,
    #[serde(default = "default_potential")]
    pub potential: String,
    pub threads: Option<Threads>,
    pub memory_cap_points: Option<usize>,
    pub output_dir: Option<PathBuf>,
}

impl FlowSpec {
    pub fn globals(&self) -> Globals {
        Globals {
            threads: self.threads,
            memory_cap_points: self.memory_cap_points,
            output_dir: self.output_dir.clone(),
        }
    }

    pub fn build(&self) -> Result<FlowConfig, CliError> {
        let cfg = FlowConfig {
            epsilon: self.epsilon,
            lambda: self.lambda,
            steps: self.steps,
            dt: match self.dt {
                DtSpec::Fixed(dt) => TimeStep::Fixed(dt),
                DtSpec::Auto(_) => TimeStep::Auto,
            },
            mass_constraint: self.mass_constraint,
            seed: self.seed,
            geometry: self.init_u.build(Some(&self.bx))?,
            init_v: match self.init_v {
                InitVSpec::Noise { amplitude } => InitV::Noise(amplitude),
                InitVSpec::Cap { theta0 } => InitV::Cap(theta0),
                InitVSpec::Constant { c } => InitV::Constant(c),
            },
            log_every: self.log_every,
            c_safe: self.c_safe,
            q: self.q,
            box_lo: self.bx.lo.clone(),
            box_hi: self.bx.hi.clone(),
            well: parse_well(&self.potential)?,
            memory_cap: self.globals().memory_cap(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses a JSON document, reporting line/column for syntax errors and the
/// key path for schema errors.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            CliError::Config(format!(
                "malformed JSON at line {}, column {}: {inner}",
                inner.line(),
                inner.column()
            ))
        } else {
            CliError::Config(format!("{path}: {inner}"))
        }
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPHERE: &str = r#"{
        "geometry": {"kind": "sphere3d", "R": 1.0, "center": [0, 0, 0],
                     "split": {"kind": "cap", "theta0": 1.5707963267948966}},
        "epsilons": [0.15, 0.1], "q": 6,
        "box": {"lo": [-1.75, -1.75, -1.75], "hi": [1.75, 1.75, 1.75]},
        "modulus": {"a1": 1, "a2": 2},
        "threads": "auto", "output_dir": "out"
    }"#;

    #[test]
    fn parses_recovery_config() {
        let spec: RecoverySpec = parse(SPHERE).unwrap();
        assert_eq!(spec.threads, Some(Threads::Auto(AutoTag::Auto)));
        assert_eq!(spec.globals().output_dir(), PathBuf::from("out"));
        let cfg = spec.build().unwrap();
        assert_eq!(cfg.geometry.split, PhaseSplit::Cap { theta0: std::f64::consts::FRAC_PI_2 });
        assert_eq!(cfg.modulus.a2, 2.0);
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let bad = SPHERE.replace("\"theta0\"", "\"theta\"");
        match parse::<RecoverySpec>(&bad) {
            Err(CliError::Config(msg)) => assert!(msg.starts_with("geometry") && msg.contains("`theta`"), "{msg}"),
            other => panic!("{other:?}"),
        }
        let bad = SPHERE.replace("\"q\"", "\"qq\"");
        assert!(matches!(parse::<RecoverySpec>(&bad), Err(CliError::Config(_))));
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        match parse::<RecoverySpec>("{\n  \"q\": 6,,\n}") {
            Err(CliError::Config(msg)) => assert!(msg.contains("line 2, column"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn plane_cross_section_defaults_to_box_face() {
        let b = BoxSpec {
            lo: vec![-0.5, 0.0, 0.0],
            hi: vec![0.5, 2.0, 3.0],
        };
        let g = GeometrySpec::Plane {
            dim: 3,
            position: 0.0,
            cross_section: None,
            split: None,
        }
        .build(Some(&b))
        .unwrap();
        assert!(matches!(g.surface, Surface::Plane { cross_section, .. } if cross_section == 6.0));
    }

    #[test]
    fn flow_dt_accepts_auto_or_number() {
        let base = r#"{"epsilon": 0.1, "lambda": 1, "steps": 5, "dt": DT, "seed": 3,
            "init_u": {"kind": "disk2d", "R": 1}, "init_v": {"kind": "noise", "amplitude": 0.5},
            "box": {"lo": [-2, -2], "hi": [2, 2]}}"#;
        let a: FlowSpec = parse(&base.replace("DT", "\"auto\"")).unwrap();
        assert_eq!(a.build().unwrap().dt, TimeStep::Auto);
        let f: FlowSpec = parse(&base.replace("DT", "0.001")).unwrap();
        assert_eq!(f.build().unwrap().dt, TimeStep::Fixed(0.001));
        assert!(parse::<FlowSpec>(&base.replace("DT", "\"fast\"")).is_err());
    }
}
