//! Off-centered sample reuse: neighbor selection, stage-1 caching, pair estimators,
//! running statistics, similarity weighting and the two-phase round driver.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    grad_green_ball, grad_poisson_ratio, green_ball, poisson_ratio, sample_source_offcenter,
    sample_source_uniform_radius, BallSpec,
};
use crate::math::{uniform_direction, Vec3};
use crate::rng::{Phase, Streams};
use crate::scenes::Bvp;
use crate::walkers::{walk, WalkConfig};

/// Default neighbor radius factor.
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Default neighbor cap (world units, or lattice cells for grid selection).
pub const DEFAULT_BETA: f64 = 10.0;

/// Running count, mean and mean of squares of one estimator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairStats {
    pub n: u64,
    pub mean: f64,
    pub mean_sq: f64,
}

impl PairStats {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        self.mean += (v - self.mean) * inv;
        self.mean_sq += (v * v - self.mean_sq) * inv;
    }

    pub fn merge(&self, other: &PairStats) -> PairStats {
        let n = self.n + other.n;
        if n == 0 {
            return PairStats::default();
        }
        let (a, b) = (self.n as f64 / n as f64, other.n as f64 / n as f64);
        PairStats {
            n,
            mean: a * self.mean + b * other.mean,
            mean_sq: a * self.mean_sq + b * other.mean_sq,
        }
    }

    /// Unbiased variance of the sample mean, `s²/n`, clamped at zero; `None` below two samples.
    pub fn variance_of_mean(&self) -> Option<f64> {
        (self.n >= 2).then(|| (self.mean_sq - self.mean * self.mean).max(0.0) / (self.n - 1) as f64)
    }
}

/// Similarity statistic `w* = (Δ² + V_xy) / (Δ² + V_xy + V_xx)`. Large values mean the pair
/// estimator is far from the reference relative to the reference's own uncertainty.
pub fn w_star(center: &PairStats, pair: &PairStats) -> Result<f64> {
    let (Some(vxx), Some(vxy)) = (center.variance_of_mean(), pair.variance_of_mean()) else {
        return Err(Error::InsufficientData {
            needed: 2,
            have: center.n.min(pair.n),
        });
    };
    let d = pair.mean - center.mean;
    let num = d * d + vxy;
    let den = num + vxx;
    if den == 0.0 {
        return Ok(0.0);
    }
    let w = num / den;
    Ok(if w.is_finite() {
        w.clamp(0.0, 1.0)
    } else {
        1.0
    })
}

/// Prior weight `(1 − t)^{2d} / (1 − t²)²` with `t = |x − y| / r_y`.
pub fn poisson_bound_weight(x: &Vec3, y: &Vec3, r_y: f64, dim: usize) -> Result<f64> {
    let t = (x - y).norm() / r_y;
    if !(t < 1.0) {
        return Err(Error::domain(format!(
            "poisson_bound_weight: t = {t} is not below 1"
        )));
    }
    Ok((1.0 - t).powi(2 * dim as i32) / (1.0 - t * t).powi(2))
}

/// How neighbor estimators are weighted in the combination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingStrategy {
    /// Self pair only: plain walk on spheres, no reuse.
    Vanilla,
    /// Equal weights over all neighbors.
    Uniform,
    /// Normalized [`poisson_bound_weight`]s.
    PoissonBound,
    /// Equal weights over neighbors passing `1 − w* > γ`.
    Statistical { gamma: f64 },
}

impl WeightingStrategy {
    pub fn validate(&self) -> Result<()> {
        if let WeightingStrategy::Statistical { gamma } = self {
            if !(0.0..1.0).contains(gamma) {
                return Err(Error::config(
                    "gamma",
                    format!("must lie in [0, 1), got {gamma}"),
                ));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightingStrategy::Vanilla => "vanilla",
            WeightingStrategy::Uniform => "uniform",
            WeightingStrategy::PoissonBound => "poisson-bound",
            WeightingStrategy::Statistical { .. } => "statistical",
        }
    }

    /// Parses a strategy name; `gamma` applies to the statistical strategy.
    pub fn parse(name: &str, gamma: f64) -> Result<Self> {
        let s = match name.trim() {
            "vanilla" | "wos" => WeightingStrategy::Vanilla,
            "uniform" => WeightingStrategy::Uniform,
            "poisson-bound" | "poisson_bound" => WeightingStrategy::PoissonBound,
            "statistical" => WeightingStrategy::Statistical { gamma },
            other => {
                return Err(Error::config(
                    "strategy",
                    format!("unknown strategy `{other}`"),
                ))
            }
        };
        s.validate()?;
        Ok(s)
    }
}

impl fmt::Display for WeightingStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightingStrategy::Statistical { gamma } => write!(f, "statistical(gamma={gamma})"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for WeightingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, 0.05)
    }
}

/// An evaluation point with its neighbor list and per-pair statistics (`N` components).
#[derive(Clone, Debug)]
pub struct EvaluationPoint<const N: usize = 1> {
    pub position: Vec3,
    pub radius: f64,
    /// Neighbor ids, always including the point itself.
    pub neighbors: Vec<usize>,
    pub self_slot: usize,
    pub stats: Vec<[PairStats; N]>,
    /// Unnormalized Poisson-bound weights aligned with `neighbors`.
    pub bound_weights: Vec<f64>,
}

/// A cached stage-1 sample: boundary point `z` on the owner's sphere and its walk value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleRecord {
    pub owner: usize,
    pub ball: BallSpec,
    pub z: Vec3,
    pub value: f64,
    pub steps: usize,
    pub terminated: bool,
}

static COMBINE_CALLS: AtomicU64 = AtomicU64::new(0);
static COMBINE_VIOLATIONS: AtomicU64 = AtomicU64::new(0);

/// Number of combinations performed in this process.
pub fn combine_calls() -> u64 {
    COMBINE_CALLS.load(Ordering::Relaxed)
}

/// Number of combinations whose weights failed to sum to one or whose result left the
/// interval of the accepted pair estimates.
pub fn combine_violations() -> u64 {
    COMBINE_VIOLATIONS.load(Ordering::Relaxed)
}

/// Combination weights `λ` aligned with `ep.neighbors`. `available[j]` marks pairs with a value
/// this round. The self pair always participates; other pairs need two samples.
fn weights<const N: usize>(
    ep: &EvaluationPoint<N>,
    available: &[bool],
    strategy: &WeightingStrategy,
) -> Vec<f64> {
    let me = ep.self_slot;
    let mut m: Vec<f64> = (0..ep.neighbors.len())
        .map(|j| {
            if j == me {
                return 1.0;
            }
            if !available[j] || ep.stats[j][0].n < 2 {
                return 0.0;
            }
            match strategy {
                WeightingStrategy::Vanilla => 0.0,
                WeightingStrategy::Uniform => 1.0,
                WeightingStrategy::PoissonBound => ep.bound_weights[j],
                WeightingStrategy::Statistical { gamma } => {
                    let accept = (0..N).all(|c| {
                        w_star(&ep.stats[me][c], &ep.stats[j][c]).is_ok_and(|w| 1.0 - w > *gamma)
                    });
                    if accept {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();
    if let WeightingStrategy::PoissonBound = strategy {
        m[me] = ep.bound_weights[me];
    }
    let total: f64 = m.iter().sum();
    m.iter_mut().for_each(|w| *w /= total);
    m
}

/// Weighted combination `Σ λ_y Î_{x,y}` of this round's pair values (`None` = unavailable).
/// Checks normalization and convexity and records any violation.
pub fn combine<const N: usize>(
    ep: &EvaluationPoint<N>,
    values: &[Option<[f64; N]>],
    strategy: &WeightingStrategy,
) -> [f64; N] {
    let available: Vec<bool> = values.iter().map(Option::is_some).collect();
    let lambda = weights(ep, &available, strategy);
    let mut out = [0.0; N];
    for (l, v) in lambda.iter().zip(values) {
        if let (true, Some(v)) = (*l > 0.0, v) {
            for c in 0..N {
                out[c] += l * v[c];
            }
        }
    }
    COMBINE_CALLS.fetch_add(1, Ordering::Relaxed);
    let sum: f64 = lambda.iter().sum();
    let mut ok = (sum - 1.0).abs() <= 1e-12;
    for c in 0..N {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (l, v) in lambda.iter().zip(values) {
            if let (true, Some(v)) = (*l > 0.0, v) {
                lo = lo.min(v[c]);
                hi = hi.max(v[c]);
            }
        }
        let slack = 1e-12 * lo.abs().max(hi.abs()).max(1e-300);
        ok &= out[c] >= lo - slack && out[c] <= hi + slack;
    }
    if !ok {
        COMBINE_VIOLATIONS.fetch_add(1, Ordering::Relaxed);
    }
    out
}

/// `H_x = {y : |x − y| < min(α r_y, β)}` for every point, by spatial hashing.
pub fn select_neighbors(points: &[Vec3], radii: &[f64], alpha: f64, beta: f64) -> Vec<Vec<usize>> {
    assert_eq!(points.len(), radii.len());
    let reach: Vec<f64> = radii.iter().map(|r| (alpha * r).min(beta)).collect();
    let cell = reach.iter().cloned().fold(0.0f64, f64::max);
    if points.is_empty() {
        return Vec::new();
    }
    if !(cell > 0.0) {
        return (0..points.len()).map(|i| vec![i]).collect();
    }
    let key = |p: &Vec3| {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    };
    let mut buckets: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let k = key(x);
            let mut out = Vec::new();
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(b) = buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            out.extend(
                                b.iter()
                                    .copied()
                                    .filter(|&y| y == i || (x - points[y]).norm() < reach[y]),
                            );
                        }
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

/// Grid variant: candidates come from the Chebyshev index window `max_k |Δ_k| < β` (clipped to
/// the lattice), then the `|x − y| < α r_y` cut applies.
pub fn select_neighbors_grid(
    lattice: &[[i64; 3]],
    points: &[Vec3],
    radii: &[f64],
    alpha: f64,
    beta: f64,
) -> Vec<Vec<usize>> {
    assert!(lattice.len() == points.len() && points.len() == radii.len());
    if points.is_empty() {
        return Vec::new();
    }
    let index: HashMap<[i64; 3], usize> =
        lattice.iter().enumerate().map(|(i, l)| (*l, i)).collect();
    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    for l in lattice {
        for k in 0..3 {
            lo[k] = lo[k].min(l[k]);
            hi[k] = hi[k].max(l[k]);
        }
    }
    let w = (beta.ceil() as i64 - 1).max(0);
    lattice
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let mut out = Vec::new();
            let range = |k: usize| (c[k] - w).max(lo[k])..=(c[k] + w).min(hi[k]);
            for a in range(0) {
                for b in range(1) {
                    for d in range(2) {
                        let cand = [a, b, d];
                        let inside = (0..3).all(|k| ((cand[k] - c[k]).abs() as f64) < beta);
                        if !inside {
                            continue;
                        }
                        if let Some(&y) = index.get(&cand) {
                            if y == i || (points[i] - points[y]).norm() < alpha * radii[y] {
                                out.push(y);
                            }
                        }
                    }
                }
            }
            out.sort_unstable();
            out
        })
        .collect()
}

/// Draws `z` uniformly on the point's sphere and runs the inner walker from it.
pub fn stage1_sample<R: Rng + ?Sized>(
    owner: usize,
    position: &Vec3,
    radius: f64,
    bvp: &Bvp,
    cfg: &WalkConfig,
    rng: &mut R,
) -> SampleRecord {
    let z = position + uniform_direction(rng, bvp.domain.dim()) * radius;
    let s = walk(bvp, &z, cfg, rng);
    SampleRecord {
        owner,
        ball: BallSpec {
            center: *position,
            radius,
        },
        z,
        value: s.value,
        steps: s.steps,
        terminated: s.terminated,
    }
}

/// One-sample off-centered estimate of `u(x)` from a record on `∂B_y`: the reused boundary
/// value weighted by the Poisson kernel ratio, plus fresh source samples drawn from `x`.
pub fn pair_estimate<R: Rng + ?Sized>(
    x: &Vec3,
    record: &SampleRecord,
    bvp: &Bvp,
    source_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let params = bvp.params();
    let ball = &record.ball;
    let mut v = record.value * poisson_ratio(x, &record.z, ball, &params)?;
    if bvp.has_source() && source_samples > 0 {
        let mut sum = 0.0;
        for _ in 0..source_samples {
            let w = sample_source_offcenter(rng, x, ball, &params)?;
            if w.valid && w.point != *x {
                sum += bvp.f(&w.point) * green_ball(x, &w.point, ball, &params)? / w.pdf;
            }
        }
        v += sum / source_samples as f64;
    }
    Ok(v)
}

/// Gradient counterpart of [`pair_estimate`] (`σ = 0`).
pub fn pair_estimate_gradient<R: Rng + ?Sized>(
    x: &Vec3,
    record: &SampleRecord,
    bvp: &Bvp,
    source_samples: usize,
    rng: &mut R,
) -> Result<Vec3> {
    let params = bvp.params();
    let ball = &record.ball;
    let mut g = grad_poisson_ratio(x, &record.z, ball, &params)? * record.value;
    if bvp.has_source() && source_samples > 0 {
        let mut sum = Vec3::zeros();
        for _ in 0..source_samples {
            let w = sample_source_uniform_radius(rng, x, ball, params.dim)?;
            if w.valid && w.point != *x {
                sum += grad_green_ball(x, &w.point, ball, &params)? * (bvp.f(&w.point) / w.pdf);
            }
        }
        g += sum / source_samples as f64;
    }
    Ok(g)
}

fn pair_value<const N: usize, R: Rng + ?Sized>(
    x: &Vec3,
    record: &SampleRecord,
    bvp: &Bvp,
    m: usize,
    rng: &mut R,
) -> Result<[f64; N]> {
    if N == 1 {
        let v = pair_estimate(x, record, bvp, m, rng)?;
        Ok([v; N])
    } else {
        let g = pair_estimate_gradient(x, record, bvp, m, rng)?;
        Ok(std::array::from_fn(|c| g[c]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub walk: WalkConfig,
    pub strategy: WeightingStrategy,
    pub seed: u64,
}

/// Round-by-round driver of the two-phase scheme. `N = 1` estimates `u`, `N = 3` estimates `∇u`.
pub struct Solver<'a, const N: usize = 1> {
    bvp: &'a Bvp,
    cfg: SolveConfig,
    streams: Streams,
    points: Vec<EvaluationPoint<N>>,
    estimates: Vec<[f64; N]>,
    records: Vec<SampleRecord>,
    round: u64,
    walks: u64,
    failed_pairs: u64,
}

impl<'a, const N: usize> Solver<'a, N> {
    /// Sets up evaluation points at `positions` with the given neighbor lists (the point itself is
    /// added when missing). Every neighbor `y` of `x` must satisfy `|x − y| < r_y`.
    pub fn new(
        bvp: &'a Bvp,
        positions: &[Vec3],
        neighbors: Vec<Vec<usize>>,
        cfg: SolveConfig,
    ) -> Result<Self> {
        assert!(
            N == 1 || N == 3,
            "Solver estimates scalars (N = 1) or gradients (N = 3)"
        );
        cfg.walk.validate()?;
        cfg.strategy.validate()?;
        if N == 3 && bvp.sigma > 0.0 {
            return Err(Error::Unsupported(
                "gradient reuse is implemented for sigma = 0 only".into(),
            ));
        }
        if neighbors.len() != positions.len() {
            return Err(Error::domain("one neighbor list per point is required"));
        }
        let dim = bvp.domain.dim().as_usize();
        let mut radii = Vec::with_capacity(positions.len());
        for (i, p) in positions.iter().enumerate() {
            if !bvp.domain.contains(p) {
                return Err(Error::domain(format!(
                    "evaluation point {i} at {p:?} is outside the domain"
                )));
            }
            let r = bvp.domain.distance(p);
            if !(r > 0.0) {
                return Err(Error::domain(format!(
                    "evaluation point {i} lies on the boundary"
                )));
            }
            radii.push(r);
        }
        let mut points = Vec::with_capacity(positions.len());
        for (i, mut nb) in neighbors.into_iter().enumerate() {
            if !nb.contains(&i) {
                nb.push(i);
            }
            nb.sort_unstable();
            nb.dedup();
            let mut bound_weights = Vec::with_capacity(nb.len());
            for &y in &nb {
                if y >= positions.len() {
                    return Err(Error::domain(format!("neighbor id {y} out of range")));
                }
                bound_weights.push(poisson_bound_weight(
                    &positions[i],
                    &positions[y],
                    radii[y],
                    dim,
                )?);
            }
            let self_slot = nb
                .iter()
                .position(|&y| y == i)
                .expect("self inserted above");
            points.push(EvaluationPoint {
                position: positions[i],
                radius: radii[i],
                stats: vec![[PairStats::default(); N]; nb.len()],
                neighbors: nb,
                self_slot,
                bound_weights,
            });
        }
        let n = points.len();
        Ok(Self {
            bvp,
            cfg,
            streams: Streams::new(cfg.seed),
            points,
            estimates: vec![[0.0; N]; n],
            records: Vec::new(),
            round: 0,
            walks: 0,
            failed_pairs: 0,
        })
    }

    pub fn points(&self) -> &[EvaluationPoint<N>] {
        &self.points
    }

    /// Running mean of the per-round combined estimates.
    pub fn estimates(&self) -> &[[f64; N]] {
        &self.estimates
    }

    pub fn rounds(&self) -> u64 {
        self.round
    }

    /// Stage-1 walks performed so far.
    pub fn walks(&self) -> u64 {
        self.walks
    }

    /// Pair evaluations that failed and were left out of their combination.
    pub fn failed_pairs(&self) -> u64 {
        self.failed_pairs
    }

    /// Stage-1 records of the latest round.
    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn step(&mut self) {
        self.step_with(|_, _, _| {});
    }

    /// Runs one round. `inject(round, id, record)` may alter stage-1 records before reuse.
    pub fn step_with(&mut self, mut inject: impl FnMut(u64, usize, &mut SampleRecord)) {
        self.round += 1;
        let k = self.round;
        let (bvp, cfg, streams) = (self.bvp, &self.cfg, &self.streams);

        let mut records: Vec<SampleRecord> = self
            .points
            .par_iter()
            .enumerate()
            .map(|(i, ep)| {
                let mut rng = streams.stream(i, k, Phase::Sample);
                stage1_sample(i, &ep.position, ep.radius, bvp, &cfg.walk, &mut rng)
            })
            .collect();
        for (i, r) in records.iter_mut().enumerate() {
            inject(k, i, r);
        }
        self.walks += records.len() as u64;

        let vanilla = cfg.strategy == WeightingStrategy::Vanilla;
        let m = cfg.walk.source_samples;
        let failed = AtomicU64::new(0);
        self.points
            .par_iter_mut()
            .zip(self.estimates.par_iter_mut())
            .enumerate()
            .for_each(|(i, (ep, est))| {
                let mut rng = streams.stream(i, k, Phase::Reuse);
                let mut values: Vec<Option<[f64; N]>> = vec![None; ep.neighbors.len()];
                for (j, &y) in ep.neighbors.iter().enumerate() {
                    if vanilla && j != ep.self_slot {
                        continue;
                    }
                    match pair_value::<N, _>(&ep.position, &records[y], bvp, m, &mut rng) {
                        Ok(v) => {
                            for (s, x) in ep.stats[j].iter_mut().zip(v) {
                                s.push(x);
                            }
                            values[j] = Some(v);
                        }
                        Err(_) => {
                            failed.fetch_add(1, Ordering::Relaxed);
                        }
                    }
                }
                let u = combine(ep, &values, &cfg.strategy);
                let kf = k as f64;
                for c in 0..N {
                    est[c] = (est[c] * (kf - 1.0) + u[c]) / kf;
                }
            });
        self.failed_pairs += failed.into_inner();
        self.records = records;
    }
}

/// Runs `rounds` rounds and returns the scalar estimates.
pub fn solve(
    positions: &[Vec3],
    neighbors: Vec<Vec<usize>>,
    bvp: &Bvp,
    cfg: SolveConfig,
    rounds: u64,
) -> Result<Vec<f64>> {
    let mut s = Solver::<1>::new(bvp, positions, neighbors, cfg)?;
    for _ in 0..rounds {
        s.step();
    }
    Ok(s.estimates().iter().map(|e| e[0]).collect())
}

/// Runs `rounds` rounds of the gradient variant.
pub fn solve_gradient(
    positions: &[Vec3],
    neighbors: Vec<Vec<usize>>,
    bvp: &Bvp,
    cfg: SolveConfig,
    rounds: u64,
) -> Result<Vec<Vec3>> {
    let mut s = Solver::<3>::new(bvp, positions, neighbors, cfg)?;
    for _ in 0..rounds {
        s.step();
    }
    Ok(s.estimates()
        .iter()
        .map(|e| Vec3::new(e[0], e[1], e[2]))
        .collect())
}

/// Maximal-ball radii of `positions`, as used for neighbor selection.
pub fn radii(bvp: &Bvp, positions: &[Vec3]) -> Vec<f64> {
    positions.iter().map(|p| bvp.domain.distance(p)).collect()
}
