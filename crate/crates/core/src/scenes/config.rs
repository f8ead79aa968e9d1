//! TOML scene descriptions.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{Bvp, Manufactured, SliceGrid};
use crate::error::{Error, Result};
use crate::geometry::{AnalyticDomain, BoundaryMesh, Domain, LabelRule, MeshDomain};
use crate::math::{Dim, Vec3};

/// Face subdivisions used when a box with a mixed partition is meshed.
const BOX_MESH_DIVISIONS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometryKind {
    Ball,
    Disc,
    Box,
    Mesh,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    #[serde(default)]
    pub center: Option<[f64; 3]>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub min: Option<[f64; 3]>,
    #[serde(default)]
    pub max: Option<[f64; 3]>,
    /// OBJ file, relative to the scene file.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    #[default]
    Dirichlet,
    Neumann,
    HalfSpace,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    #[serde(default)]
    pub rule: RuleKind,
    #[serde(default)]
    pub axis: Option<[f64; 3]>,
    #[serde(default)]
    pub threshold: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemType {
    #[default]
    Poisson,
    Screened,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionKind {
    #[default]
    Trig,
    Trig2d,
    Harmonic2d,
    Constant,
    Linear,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default, rename = "type")]
    pub kind: ProblemType,
    #[serde(default)]
    pub solution: SolutionKind,
    /// Frequency ω; alternatively `omega_pi` gives ω in multiples of π.
    #[serde(default)]
    pub omega: Option<f64>,
    #[serde(default)]
    pub omega_pi: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Constant value, or the offset of a linear solution.
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub gradient: Option<[f64; 3]>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    #[serde(default)]
    pub origin: Option<[f64; 3]>,
    #[serde(default)]
    pub u_axis: Option<[f64; 3]>,
    #[serde(default)]
    pub v_axis: Option<[f64; 3]>,
    #[serde(default)]
    pub resolution: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub slice: SliceConfig,
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .and_then(|s| text.get(s))
                .map(|s| s.trim().to_string())
                .unwrap_or_default();
            Error::config(key, e.message().to_string())
        })
    }
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn label_rule(cfg: &BoundaryConfig) -> Result<LabelRule> {
    Ok(match cfg.rule {
        RuleKind::Dirichlet => LabelRule::AllDirichlet,
        RuleKind::Neumann => LabelRule::AllNeumann,
        RuleKind::HalfSpace => {
            let axis = vec3(cfg.axis.unwrap_or([0.0, 0.0, 1.0]));
            let axis = axis
                .try_normalize(0.0)
                .ok_or_else(|| Error::config("boundary.axis", "must be nonzero"))?;
            LabelRule::HalfSpace {
                axis,
                threshold: cfg.threshold,
            }
        }
    })
}

fn build_domain(cfg: &GeometryConfig, rule: LabelRule, base: &Path) -> Result<Domain> {
    match cfg.kind {
        GeometryKind::Ball => {
            let r = positive("geometry.radius", cfg.radius.unwrap_or(1.0))?;
            Ok(AnalyticDomain::ball(vec3(cfg.center.unwrap_or_default()), r, rule)?.into())
        }
        GeometryKind::Disc => {
            if rule != LabelRule::AllDirichlet {
                return Err(Error::config(
                    "boundary.rule",
                    "discs support Dirichlet boundaries only",
                ));
            }
            let r = positive("geometry.radius", cfg.radius.unwrap_or(1.0))?;
            let c = cfg.center.unwrap_or_default();
            Ok(AnalyticDomain::disc(c[0], c[1], r)?.into())
        }
        GeometryKind::Box => {
            let min = vec3(cfg.min.unwrap_or([-1.0; 3]));
            let max = vec3(cfg.max.unwrap_or([1.0; 3]));
            if (0..3).any(|k| min[k] >= max[k]) {
                return Err(Error::config(
                    "geometry.max",
                    "must exceed geometry.min componentwise",
                ));
            }
            match rule {
                LabelRule::HalfSpace { .. } => {
                    let mut mesh = BoundaryMesh::cuboid(min, max, BOX_MESH_DIVISIONS);
                    mesh.relabel(&rule);
                    Ok(MeshDomain::new(mesh)?.into())
                }
                _ => Ok(AnalyticDomain::cuboid(min, max, rule)?.into()),
            }
        }
        GeometryKind::Mesh => {
            let rel = cfg
                .path
                .as_ref()
                .ok_or_else(|| Error::config("geometry.path", "mesh geometry needs a path"))?;
            let path = base.join(rel);
            if !path.exists() {
                return Err(Error::config(
                    "geometry.path",
                    format!("{} does not exist", path.display()),
                ));
            }
            let mut mesh = BoundaryMesh::load_obj(&path)?;
            mesh.normalize();
            mesh.relabel(&rule);
            Ok(MeshDomain::new(mesh)?.into())
        }
    }
}

fn build_solution(cfg: &ProblemConfig, dim: Dim) -> Result<(Manufactured, f64)> {
    let sigma = match cfg.kind {
        ProblemType::Poisson => {
            if cfg.sigma.is_some_and(|s| s != 0.0) {
                return Err(Error::config(
                    "problem.sigma",
                    "poisson problems have sigma = 0",
                ));
            }
            0.0
        }
        ProblemType::Screened => {
            let s = cfg.sigma.unwrap_or(5.0);
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::config(
                    "problem.sigma",
                    format!("must be positive, got {s}"),
                ));
            }
            if dim == Dim::Two {
                return Err(Error::config(
                    "problem.type",
                    "screened problems are 3D only",
                ));
            }
            s
        }
    };
    let omega = match (cfg.omega, cfg.omega_pi) {
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "problem.omega",
                "give omega or omega_pi, not both",
            ))
        }
        (Some(w), None) => w,
        (None, Some(k)) => k * std::f64::consts::PI,
        (None, None) => std::f64::consts::PI,
    };
    let m = match cfg.solution {
        SolutionKind::Trig => Manufactured::Trig { omega },
        SolutionKind::Trig2d => Manufactured::Trig2D { omega },
        SolutionKind::Harmonic2d => Manufactured::Harmonic2D { omega },
        SolutionKind::Constant => Manufactured::Constant {
            value: cfg.value.unwrap_or(1.0),
        },
        SolutionKind::Linear => Manufactured::Linear {
            gradient: vec3(cfg.gradient.unwrap_or([1.0, 0.0, 0.0])),
            offset: cfg.value.unwrap_or(0.0),
        },
    };
    if matches!(m, Manufactured::Trig { .. }) && dim == Dim::Two {
        return Err(Error::config("problem.solution", "use trig2d in the plane"));
    }
    if matches!(
        m,
        Manufactured::Trig2D { .. } | Manufactured::Harmonic2D { .. }
    ) && dim == Dim::Three
    {
        return Err(Error::config(
            "problem.solution",
            "planar solutions need disc geometry",
        ));
    }
    Ok((m, sigma))
}

fn build_slice(cfg: &SliceConfig, domain: &Domain) -> Result<SliceGrid> {
    let (lo, hi) = domain.bounds();
    let center = (lo + hi) * 0.5;
    let half = (hi - lo) * 0.5;
    let origin = cfg.origin.map(vec3).unwrap_or(center);
    let u = cfg.u_axis.map(vec3).unwrap_or(Vec3::new(half.x, 0.0, 0.0));
    let v = cfg.v_axis.map(vec3).unwrap_or(Vec3::new(0.0, half.y, 0.0));
    SliceGrid::new(origin, u, v, cfg.resolution.unwrap_or(512), domain)
}

/// Assembles the problem and its evaluation slice; relative mesh paths resolve against `base`.
pub fn build_scene(config: &SceneConfig, base: &Path) -> Result<(Bvp, SliceGrid)> {
    let rule = label_rule(&config.boundary)?;
    let domain = build_domain(&config.geometry, rule, base)?;
    let (m, sigma) = build_solution(&config.problem, domain.dim())?;
    let slice = build_slice(&config.slice, &domain)?;
    Ok((Bvp::manufactured(domain, sigma, m)?, slice))
}

/// Reads a scene file and builds it.
pub fn load_scene(path: impl AsRef<Path>) -> Result<(Bvp, SliceGrid)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let cfg = SceneConfig::from_toml(&text)?;
    build_scene(&cfg, path.parent().unwrap_or(Path::new(".")))
}
