//! Grid-free Monte Carlo solvers for Poisson and screened Poisson problems: walk on
//! spheres, walk on stars, and off-centered sample reuse with statistical weighting.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod kernels;
pub mod math;
pub mod offcenter;
pub mod rng;
pub mod scenes;
pub mod walkers;

pub use error::{Error, Result};
pub use geometry::{
    AnalyticDomain, BoundaryLabel, BoundaryMesh, BoundarySample, ClosestPointResult, Domain,
    LabelRule, MeshDomain, RayHit,
};
pub use kernels::{BallSpec, KernelParams, WeightedSample};
pub use math::{Dim, Vec3};
pub use offcenter::{
    combine_calls, combine_violations, select_neighbors, select_neighbors_grid, solve,
    solve_gradient, EvaluationPoint, PairStats, SampleRecord, SolveConfig, Solver,
    WeightingStrategy, DEFAULT_ALPHA, DEFAULT_BETA,
};
pub use rng::{Phase, Streams};
pub use scenes::{load_scene, Bvp, Manufactured, SceneConfig, SliceGrid};
pub use walkers::{WalkConfig, WalkSample};
