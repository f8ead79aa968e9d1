//! Benchmark boundary value problems with manufactured solutions and evaluation slices.

mod config;

use std::fmt;
use std::sync::Arc;

pub use config::build_scene;
pub use config::{
    load_scene, BoundaryConfig, GeometryConfig, GeometryKind, ProblemConfig, ProblemType, RuleKind,
    SceneConfig, SliceConfig, SolutionKind,
};

use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::kernels::KernelParams;
use crate::math::Vec3;

pub type ScalarField = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;
/// Neumann data `h(z, n)` evaluated at a boundary point with its outward normal.
pub type FluxField = Arc<dyn Fn(&Vec3, &Vec3) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;

/// `sin(ωx)·sin(ωy)·sin(ωz)`.
pub fn trig_solution(p: &Vec3, omega: f64) -> f64 {
    (omega * p.x).sin() * (omega * p.y).sin() * (omega * p.z).sin()
}

/// Source making [`trig_solution`] solve `Δu − σu = −f`.
pub fn trig_source(p: &Vec3, omega: f64, sigma: f64) -> f64 {
    (3.0 * omega * omega + sigma) * trig_solution(p, omega)
}

pub fn trig_gradient(p: &Vec3, omega: f64) -> Vec3 {
    let (sx, cx) = (omega * p.x).sin_cos();
    let (sy, cy) = (omega * p.y).sin_cos();
    let (sz, cz) = (omega * p.z).sin_cos();
    Vec3::new(cx * sy * sz, sx * cy * sz, sx * sy * cz) * omega
}

/// Normal derivative of [`trig_solution`].
pub fn trig_neumann(p: &Vec3, normal: &Vec3, omega: f64) -> f64 {
    trig_gradient(p, omega).dot(normal)
}

/// Closed-form solutions used to manufacture consistent boundary and source data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Manufactured {
    /// `sin(ωx) sin(ωy) sin(ωz)`.
    Trig {
        omega: f64,
    },
    /// `sin(ωx) sin(ωy)` in the plane.
    Trig2D {
        omega: f64,
    },
    /// `cos(ωx) cosh(ωy) / cosh(ω)`, harmonic in the plane.
    Harmonic2D {
        omega: f64,
    },
    Constant {
        value: f64,
    },
    /// `g·p + c`.
    Linear {
        gradient: Vec3,
        offset: f64,
    },
}

impl Manufactured {
    pub fn value(&self, p: &Vec3) -> f64 {
        match *self {
            Manufactured::Trig { omega } => trig_solution(p, omega),
            Manufactured::Trig2D { omega } => (omega * p.x).sin() * (omega * p.y).sin(),
            Manufactured::Harmonic2D { omega } => {
                (omega * p.x).cos() * (omega * p.y).cosh() / omega.cosh()
            }
            Manufactured::Constant { value } => value,
            Manufactured::Linear { gradient, offset } => gradient.dot(p) + offset,
        }
    }

    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        match *self {
            Manufactured::Trig { omega } => trig_gradient(p, omega),
            Manufactured::Trig2D { omega } => {
                let (sx, cx) = (omega * p.x).sin_cos();
                let (sy, cy) = (omega * p.y).sin_cos();
                Vec3::new(cx * sy, sx * cy, 0.0) * omega
            }
            Manufactured::Harmonic2D { omega } => {
                let (sx, cx) = (omega * p.x).sin_cos();
                Vec3::new(-sx * (omega * p.y).cosh(), cx * (omega * p.y).sinh(), 0.0)
                    * (omega / omega.cosh())
            }
            Manufactured::Constant { .. } => Vec3::zeros(),
            Manufactured::Linear { gradient, .. } => gradient,
        }
    }

    pub fn laplacian(&self, p: &Vec3) -> f64 {
        match *self {
            Manufactured::Trig { omega } => -3.0 * omega * omega * self.value(p),
            Manufactured::Trig2D { omega } => -2.0 * omega * omega * self.value(p),
            _ => 0.0,
        }
    }

    /// Whether `Δu − σu` vanishes identically, so the problem has no source.
    pub fn is_homogeneous(&self, sigma: f64) -> bool {
        match self {
            Manufactured::Trig { .. } | Manufactured::Trig2D { .. } => false,
            Manufactured::Harmonic2D { .. } => sigma == 0.0,
            Manufactured::Constant { value } => sigma == 0.0 || *value == 0.0,
            Manufactured::Linear { gradient, offset } => {
                sigma == 0.0 || (gradient.norm() == 0.0 && *offset == 0.0)
            }
        }
    }
}

/// Boundary value problem `Δu − σu = −f` in Ω, `u = g` on the Dirichlet part and
/// `∂u/∂n = h` on the Neumann part.
#[derive(Clone)]
pub struct Bvp {
    pub domain: Domain,
    pub sigma: f64,
    pub dirichlet: ScalarField,
    pub neumann: Option<FluxField>,
    pub source: Option<ScalarField>,
    pub solution: Option<ScalarField>,
    pub gradient: Option<VectorField>,
}

impl fmt::Debug for Bvp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bvp")
            .field("domain", &self.domain)
            .field("sigma", &self.sigma)
            .field("neumann", &self.neumann.is_some())
            .field("source", &self.source.is_some())
            .field("solution", &self.solution.is_some())
            .finish()
    }
}

impl Bvp {
    pub fn new(domain: Domain, sigma: f64, dirichlet: ScalarField) -> Result<Self> {
        KernelParams::new(domain.dim(), sigma)?;
        Ok(Self {
            domain,
            sigma,
            dirichlet,
            neumann: None,
            source: None,
            solution: None,
            gradient: None,
        })
    }

    pub fn with_source(mut self, f: ScalarField) -> Self {
        self.source = Some(f);
        self
    }

    pub fn with_neumann(mut self, h: FluxField) -> Self {
        self.neumann = Some(h);
        self
    }

    pub fn with_solution(mut self, u: ScalarField, grad: Option<VectorField>) -> Self {
        self.solution = Some(u);
        self.gradient = grad;
        self
    }

    /// Problem whose data are derived from a closed-form solution.
    pub fn manufactured(domain: Domain, sigma: f64, m: Manufactured) -> Result<Self> {
        let mut bvp = Self::new(domain, sigma, Arc::new(move |p: &Vec3| m.value(p)))?
            .with_solution(
                Arc::new(move |p: &Vec3| m.value(p)),
                Some(Arc::new(move |p: &Vec3| m.gradient(p))),
            );
        if bvp.domain.has_neumann() {
            bvp = bvp.with_neumann(Arc::new(move |p: &Vec3, n: &Vec3| m.gradient(p).dot(n)));
        }
        if !m.is_homogeneous(sigma) {
            bvp = bvp.with_source(Arc::new(move |p: &Vec3| {
                sigma * m.value(p) - m.laplacian(p)
            }));
        }
        Ok(bvp)
    }

    pub fn params(&self) -> KernelParams {
        KernelParams {
            dim: self.domain.dim(),
            sigma: self.sigma,
        }
    }

    #[inline]
    pub fn g(&self, p: &Vec3) -> f64 {
        (self.dirichlet)(p)
    }

    #[inline]
    pub fn f(&self, p: &Vec3) -> f64 {
        self.source.as_ref().map_or(0.0, |f| f(p))
    }

    #[inline]
    pub fn h(&self, p: &Vec3, n: &Vec3) -> f64 {
        self.neumann.as_ref().map_or(0.0, |h| h(p, n))
    }

    pub fn has_source(&self) -> bool {
        self.source.is_some()
    }

    pub fn exact(&self, p: &Vec3) -> Option<f64> {
        self.solution.as_ref().map(|u| u(p))
    }

    pub fn exact_gradient(&self, p: &Vec3) -> Option<Vec3> {
        self.gradient.as_ref().map(|g| g(p))
    }
}

/// Square evaluation slice `origin + s·u_axis + t·v_axis`, `s, t ∈ [−1, 1]`, split into
/// `resolution²` cells; cell `(i, j)` has flat index `j·resolution + i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceGrid {
    pub origin: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    pub resolution: usize,
    /// Cells whose centers lie strictly inside the domain.
    pub mask: Vec<bool>,
}

impl SliceGrid {
    pub fn new(
        origin: Vec3,
        u_axis: Vec3,
        v_axis: Vec3,
        resolution: usize,
        domain: &Domain,
    ) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::config("slice.resolution", "must be at least 1"));
        }
        let (nu, nv) = (u_axis.norm(), v_axis.norm());
        if !(nu > 0.0 && nv > 0.0) || u_axis.cross(&v_axis).norm() <= 1e-12 * nu * nv {
            return Err(Error::config("slice", "slice axes are degenerate"));
        }
        let mut grid = Self {
            origin,
            u_axis,
            v_axis,
            resolution,
            mask: Vec::new(),
        };
        grid.mask = (0..resolution * resolution)
            .map(|k| {
                let p = grid.cell_center(k);
                domain.contains(&p) && domain.distance(&p) > 0.0
            })
            .collect();
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        self.resolution == 0
    }

    pub fn cell_center(&self, index: usize) -> Vec3 {
        let n = self.resolution as f64;
        let (i, j) = (
            (index % self.resolution) as f64,
            (index / self.resolution) as f64,
        );
        self.origin
            + self.u_axis * (2.0 * (i + 0.5) / n - 1.0)
            + self.v_axis * (2.0 * (j + 0.5) / n - 1.0)
    }

    /// Inside cells as `(flat index, position)`.
    pub fn points(&self) -> Vec<(usize, Vec3)> {
        (0..self.len())
            .filter(|&k| self.mask[k])
            .map(|k| (k, self.cell_center(k)))
            .collect()
    }

    /// Lattice coordinates `(i, j, 0)` of a flat index, as used by grid-index neighbor search.
    pub fn lattice(&self, index: usize) -> [i64; 3] {
        [
            (index % self.resolution) as i64,
            (index / self.resolution) as i64,
            0,
        ]
    }
}

#[cfg(test)]
mod tests;
