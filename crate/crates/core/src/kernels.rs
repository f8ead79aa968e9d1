//! Fundamental solutions, ball Green's functions and Poisson kernels, with the
//! source samplers used by the centered and off-centered estimators.
//!
//! Two-dimensional problems embed in the `z = 0` plane; only `σ = 0` is supported there.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{uniform_direction, Dim, Vec3};

/// Ball `B(center, radius)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallSpec {
    pub center: Vec3,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (p - self.center).norm() < self.radius
    }
}

/// Dimension and screening coefficient; `sigma = 0` is the Laplace/Poisson case.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub dim: Dim,
    pub sigma: f64,
}

impl KernelParams {
    pub fn new(dim: Dim, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::domain(format!(
                "screening coefficient must be >= 0, got {sigma}"
            )));
        }
        if dim == Dim::Two && sigma > 0.0 {
            return Err(Error::Unsupported("screened kernels are 3D only".into()));
        }
        Ok(Self { dim, sigma })
    }

    pub fn laplace(dim: Dim) -> Self {
        Self { dim, sigma: 0.0 }
    }

    fn k(&self) -> f64 {
        self.sigma.sqrt()
    }

    fn check(&self) -> Result<()> {
        if self.dim == Dim::Two && self.sigma > 0.0 {
            return Err(Error::Unsupported("screened kernels are 3D only".into()));
        }
        Ok(())
    }
}

/// A sampled point with its density (per area on spheres, per volume in balls).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedSample {
    pub point: Vec3,
    pub pdf: f64,
    pub valid: bool,
}

/// Below this offset (relative to the radius) the evaluation point counts as the ball center.
const CENTER_GUARD: f64 = 1e-9;
/// Relative tolerance for "on the sphere".
const SPHERE_TOL: f64 = 1e-9;

/// Free-space fundamental solution `Φ(s)`.
pub fn fundamental_solution(s: f64, params: &KernelParams) -> Result<f64> {
    params.check()?;
    if !(s > 0.0) {
        return Err(Error::Singularity(format!(
            "fundamental solution at distance {s}"
        )));
    }
    Ok(phi(s, params))
}

fn phi(s: f64, params: &KernelParams) -> f64 {
    match params.dim {
        Dim::Three if params.sigma > 0.0 => (-params.k() * s).exp() / (4.0 * PI * s),
        Dim::Three => 1.0 / (4.0 * PI * s),
        Dim::Two => -s.ln() / (2.0 * PI),
    }
}

/// `dΦ/ds` for `σ = 0`.
fn phi_prime(s: f64, dim: Dim) -> f64 {
    match dim {
        Dim::Three => -1.0 / (4.0 * PI * s * s),
        Dim::Two => -1.0 / (2.0 * PI * s),
    }
}

/// `sinh(k(r − s)) / sinh(kr)`, stable for small and large `kr`.
fn sinh_ratio(k: f64, r: f64, s: f64) -> f64 {
    if k == 0.0 {
        return 1.0 - s / r;
    }
    (-k * s).exp() * (-(-2.0 * k * (r - s)).exp_m1()) / (-(-2.0 * k * r).exp_m1())
}

/// Centered absorption factor `√σ r / sinh(√σ r)`; equals 1 for `σ = 0`.
pub fn screened_absorption(sigma: f64, r: f64) -> f64 {
    let kr = sigma.sqrt() * r;
    if kr == 0.0 {
        return 1.0;
    }
    2.0 * kr * (-kr).exp() / (-(-2.0 * kr).exp_m1())
}

/// Green's function of the ball `B(x, r)` evaluated from its own center, at distance `s`.
pub fn green_centered(s: f64, r: f64, params: &KernelParams) -> f64 {
    if s >= r {
        return 0.0;
    }
    match params.dim {
        Dim::Three if params.sigma > 0.0 => sinh_ratio(params.k(), r, s) / (4.0 * PI * s),
        Dim::Three => (1.0 / s - 1.0 / r) / (4.0 * PI),
        Dim::Two => (r / s).ln() / (2.0 * PI),
    }
}

fn check_interior(x: &Vec3, ball: &BallSpec) -> Result<Vec3> {
    let a = x - ball.center;
    if !(a.norm() < ball.radius) {
        return Err(Error::domain(format!(
            "evaluation point at distance {} from center of ball with radius {}",
            a.norm(),
            ball.radius
        )));
    }
    Ok(a)
}

/// Mirror-image distance `(|a|/r)|x* − z|`, written in a form symmetric in `a = x − y` and
/// `b = z − y` that stays smooth as `a → 0`.
fn image_distance(a: &Vec3, b: &Vec3, r: f64) -> f64 {
    let r2 = r * r;
    let q = r2 * r2 - 2.0 * r2 * a.dot(b) + a.norm_squared() * b.norm_squared();
    q.max(0.0).sqrt() / r
}

/// Green's function `G^B(x, z)` of the ball with zero Dirichlet data, via the mirror method.
///
/// For `σ > 0` off-center, uses the attenuation `G_0^B(x, z)·e^{−√σ|x−z|}`; at the center the
/// exact screened form is returned.
pub fn green_ball(x: &Vec3, z: &Vec3, ball: &BallSpec, params: &KernelParams) -> Result<f64> {
    params.check()?;
    let a = check_interior(x, ball)?;
    let b = z - ball.center;
    let r = ball.radius;
    if b.norm() > r * (1.0 + SPHERE_TOL) {
        return Err(Error::domain("green_ball: z outside the ball"));
    }
    let s = (x - z).norm();
    if s == 0.0 {
        return Err(Error::Singularity("green_ball: z coincides with x".into()));
    }
    if (b.norm() - r).abs() <= 1e-12 * r {
        return Ok(0.0);
    }
    if a.norm() < CENTER_GUARD * r {
        return Ok(green_centered(s, r, params));
    }
    let lap = KernelParams::laplace(params.dim);
    let g0 = phi(s, &lap) - phi(image_distance(&a, &b, r), &lap);
    Ok(if params.sigma > 0.0 {
        g0 * (-params.k() * s).exp()
    } else {
        g0
    })
}

fn check_on_sphere(z: &Vec3, ball: &BallSpec) -> Result<Vec3> {
    let b = z - ball.center;
    if (b.norm() - ball.radius).abs() > SPHERE_TOL * ball.radius.max(1.0) {
        return Err(Error::domain(format!(
            "z at distance {} from center, expected {}",
            b.norm(),
            ball.radius
        )));
    }
    Ok(b)
}

/// Poisson kernel `P^B(x, z)` for `z` on `∂B`.
pub fn poisson_kernel_ball(
    x: &Vec3,
    z: &Vec3,
    ball: &BallSpec,
    params: &KernelParams,
) -> Result<f64> {
    Ok(poisson_ratio(x, z, ball, params)? / params.dim.sphere_area(ball.radius))
}

/// `P^B(x, z)·|∂B|`, the weight of a uniformly sampled boundary point; exactly 1 at the center
/// for `σ = 0`.
pub fn poisson_ratio(x: &Vec3, z: &Vec3, ball: &BallSpec, params: &KernelParams) -> Result<f64> {
    params.check()?;
    let a = check_interior(x, ball)?;
    check_on_sphere(z, ball)?;
    let r = ball.radius;
    let absorb = screened_absorption(params.sigma, r);
    if a.norm() < CENTER_GUARD * r {
        return Ok(absorb);
    }
    let s = (x - z).norm();
    let num = r * r - a.norm_squared();
    let ratio = match params.dim {
        Dim::Three => num * r / (s * s * s),
        Dim::Two => num / (s * s),
    };
    Ok(ratio * absorb)
}

fn laplace_only(params: &KernelParams, what: &str) -> Result<()> {
    params.check()?;
    if params.sigma > 0.0 {
        return Err(Error::Unsupported(format!(
            "{what} is implemented for sigma = 0 only"
        )));
    }
    Ok(())
}

/// `∇_x G^B(x, z)` for `σ = 0`.
pub fn grad_green_ball(x: &Vec3, z: &Vec3, ball: &BallSpec, params: &KernelParams) -> Result<Vec3> {
    laplace_only(params, "grad_green_ball")?;
    let a = check_interior(x, ball)?;
    let b = z - ball.center;
    let r = ball.radius;
    if b.norm() > r * (1.0 + SPHERE_TOL) {
        return Err(Error::domain("grad_green_ball: z outside the ball"));
    }
    let d = x - z;
    let s = d.norm();
    if s == 0.0 {
        return Err(Error::Singularity(
            "grad_green_ball: z coincides with x".into(),
        ));
    }
    let rho = image_distance(&a, &b, r);
    let grad_rho = (a * b.norm_squared() - b * (r * r)) / (r * r * rho);
    Ok(d * (phi_prime(s, params.dim) / s) - grad_rho * phi_prime(rho, params.dim))
}

/// `∇_x P^B(x, z)` for `σ = 0`.
pub fn grad_poisson_kernel_ball(
    x: &Vec3,
    z: &Vec3,
    ball: &BallSpec,
    params: &KernelParams,
) -> Result<Vec3> {
    Ok(grad_poisson_ratio(x, z, ball, params)? / params.dim.sphere_area(ball.radius))
}

/// `∇_x P^B(x, z)·|∂B|`.
pub fn grad_poisson_ratio(
    x: &Vec3,
    z: &Vec3,
    ball: &BallSpec,
    params: &KernelParams,
) -> Result<Vec3> {
    laplace_only(params, "grad_poisson_kernel_ball")?;
    let a = check_interior(x, ball)?;
    check_on_sphere(z, ball)?;
    let r = ball.radius;
    let d = x - z;
    let s2 = d.norm_squared();
    let num = r * r - a.norm_squared();
    Ok(match params.dim {
        Dim::Three => {
            let s3 = s2 * s2.sqrt();
            (a * (-2.0) / s3 - d * (3.0 * num / (s3 * s2))) * r
        }
        Dim::Two => a * (-2.0) / s2 - d * (2.0 * num / (s2 * s2)),
    })
}

/// Uniform point on `∂B`.
pub fn sample_sphere_uniform<R: Rng + ?Sized>(
    rng: &mut R,
    ball: &BallSpec,
    dim: Dim,
) -> WeightedSample {
    WeightedSample {
        point: ball.center + uniform_direction(rng, dim) * ball.radius,
        pdf: 1.0 / dim.sphere_area(ball.radius),
        valid: true,
    }
}

/// CDF of the normalized radius `t = s/r` under the volume-weighted centered Laplace Green's function.
pub fn radial_cdf(t: f64, dim: Dim) -> f64 {
    let t = t.clamp(0.0, 1.0);
    match dim {
        Dim::Three => t * t * (3.0 - 2.0 * t),
        Dim::Two if t == 0.0 => 0.0,
        Dim::Two => t * t * (1.0 - 2.0 * t.ln()),
    }
}

/// Density of `t = s/r` matching [`radial_cdf`].
pub fn radial_pdf(t: f64, dim: Dim) -> f64 {
    if !(t > 0.0 && t < 1.0) {
        return 0.0;
    }
    match dim {
        Dim::Three => 6.0 * t * (1.0 - t),
        Dim::Two => -4.0 * t * t.ln(),
    }
}

/// Inverts [`radial_cdf`] by Newton steps safeguarded with bisection.
pub fn invert_radial_cdf(u: f64, dim: Dim) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut t = u.sqrt().clamp(1e-3, 1.0 - 1e-3);
    for _ in 0..200 {
        let f = radial_cdf(t, dim) - u;
        if f.abs() <= 1e-15 {
            break;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let d = radial_pdf(t, dim);
        let mut next = if d > 0.0 { t - f / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - t).abs();
        t = next;
        if step <= 1e-12 * t.max(1e-300) || hi - lo <= 1e-15 {
            break;
        }
    }
    t
}

/// Volume density at distance `s` from the center of the centered radial sampler on radius `r`.
pub fn centered_source_pdf(s: f64, r: f64, dim: Dim) -> f64 {
    let lap = KernelParams::laplace(dim);
    match dim {
        Dim::Three => green_centered(s, r, &lap) * 6.0 / (r * r),
        Dim::Two => green_centered(s, r, &lap) * 4.0 / (r * r),
    }
}

fn sample_radius<R: Rng + ?Sized>(rng: &mut R, r: f64, dim: Dim) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            let s = invert_radial_cdf(u, dim) * r;
            if s > 0.0 && s < r {
                return s;
            }
        }
    }
}

/// Source point in `B` drawn proportionally to the centered Laplace Green's function.
pub fn sample_source_centered<R: Rng + ?Sized>(
    rng: &mut R,
    ball: &BallSpec,
    params: &KernelParams,
) -> WeightedSample {
    let dir = uniform_direction(rng, params.dim);
    let s = sample_radius(rng, ball.radius, params.dim);
    WeightedSample {
        point: ball.center + dir * s,
        pdf: centered_source_pdf(s, ball.radius, params.dim),
        valid: true,
    }
}

/// Two-stage source sampler for the off-centered estimator: a uniform direction from `x`, then a
/// distance from the centered radial law on `B(x, r_y + |x − y|)`. Samples landing outside `B_y`
/// are flagged invalid and contribute nothing.
pub fn sample_source_offcenter<R: Rng + ?Sized>(
    rng: &mut R,
    x: &Vec3,
    ball: &BallSpec,
    params: &KernelParams,
) -> Result<WeightedSample> {
    let a = check_interior(x, ball)?;
    let reach = ball.radius + a.norm();
    let dir = uniform_direction(rng, params.dim);
    let s = sample_radius(rng, reach, params.dim);
    let point = x + dir * s;
    Ok(WeightedSample {
        point,
        pdf: centered_source_pdf(s, reach, params.dim),
        valid: (point - ball.center).norm() < ball.radius,
    })
}

/// Source sampler for gradient kernels: a uniform direction from `x` and a uniform distance on
/// `[0, r_y + |x − y|)`. Its density `1/(R·|S|·s^{d−1})` cancels the `s^{1−d}` singularity of
/// `∇G`, keeping the variance bounded. Samples outside `B_y` are invalid.
pub fn sample_source_uniform_radius<R: Rng + ?Sized>(
    rng: &mut R,
    x: &Vec3,
    ball: &BallSpec,
    dim: Dim,
) -> Result<WeightedSample> {
    let a = check_interior(x, ball)?;
    let reach = ball.radius + a.norm();
    let dir = uniform_direction(rng, dim);
    let s = loop {
        let s = rng.random::<f64>() * reach;
        if s > 0.0 {
            break s;
        }
    };
    let point = x + dir * s;
    Ok(WeightedSample {
        point,
        pdf: 1.0 / (reach * dim.sphere_area(s)),
        valid: (point - ball.center).norm() < ball.radius,
    })
}
