//! Benchmark driver: runs the solver over a scene's evaluation slice, tracks the error against
//! the analytic solution after every round and writes maps, images and convergence tables.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use offwos::offcenter::radii;
use offwos::{
    combine_violations, load_scene, select_neighbors, select_neighbors_grid, Bvp, SliceGrid,
    SolveConfig, Solver, WalkConfig, WeightingStrategy, DEFAULT_ALPHA, DEFAULT_BETA,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] offwos::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
    #[error("invalid config `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{0}")]
    Format(String),
}

fn config_error(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum BudgetMode {
    /// A fixed number of rounds (`spp`), i.e. stage-1 walks per point.
    #[default]
    Rounds,
    /// As many rounds as fit in a wall-clock budget.
    Seconds,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum NeighborMode {
    /// Slice-lattice window of half-width `β` cells, then the `α r_y` cut.
    #[default]
    Grid,
    /// `|x − y| < min(α r_y, β)` in world units.
    Distance,
}

/// Multiplies one cached walk value in one round, to probe outlier robustness.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Injection {
    pub round: u64,
    /// Flat slice-cell index of the corrupted cache point.
    pub cell: usize,
    pub factor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scene: PathBuf,
    pub strategy: WeightingStrategy,
    pub alpha: f64,
    pub beta: f64,
    /// Shell width; defaults to `10⁻³` times the domain diameter.
    pub epsilon: Option<f64>,
    /// Rounds in round mode; each round performs one stage-1 walk per point.
    pub spp: u64,
    pub budget: BudgetMode,
    pub seconds: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub neighbors: NeighborMode,
    /// Overrides the scene's slice resolution.
    pub resolution: Option<usize>,
    pub source_samples: usize,
    pub max_steps: usize,
    pub injection: Option<Injection>,
}

impl RunConfig {
    pub fn new(scene: impl Into<PathBuf>) -> Self {
        Self {
            scene: scene.into(),
            strategy: WeightingStrategy::Statistical { gamma: 0.05 },
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            epsilon: None,
            spp: 16,
            budget: BudgetMode::Rounds,
            seconds: 10.0,
            seed: 0,
            workers: None,
            out: None,
            neighbors: NeighborMode::Grid,
            resolution: None,
            source_samples: 1,
            max_steps: WalkConfig::default().max_steps,
            injection: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.strategy.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_error(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if !(self.beta > 0.0) {
            return Err(config_error(
                "beta",
                format!("must be positive, got {}", self.beta),
            ));
        }
        if self.epsilon.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
            return Err(config_error("eps", "must be positive"));
        }
        if self.budget == BudgetMode::Rounds && self.spp == 0 {
            return Err(config_error("spp", "must be at least 1"));
        }
        if self.budget == BudgetMode::Seconds && !(self.seconds > 0.0 && self.seconds.is_finite()) {
            return Err(config_error("seconds", "must be positive"));
        }
        if self.workers == Some(0) {
            return Err(config_error("workers", "must be at least 1"));
        }
        if self.resolution == Some(0) {
            return Err(config_error("resolution", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundStats {
    pub round: u64,
    /// Cumulative stage-1 walks.
    pub walks: u64,
    /// Mean squared error over the inside cells.
    pub mse: f64,
    /// Cumulative wall-clock seconds.
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub strategy: WeightingStrategy,
    pub rounds: Vec<RoundStats>,
    pub total_walks: u64,
    /// Per-cell estimates, NaN outside the domain.
    pub estimates: Vec<f64>,
    /// Per-cell analytic solution, NaN outside the domain.
    pub truth: Vec<f64>,
    pub grid: SliceGrid,
    pub failed_pairs: u64,
    /// Combination invariant violations recorded during the run.
    pub violations: u64,
}

impl RunReport {
    pub fn final_mse(&self) -> f64 {
        self.rounds.last().map_or(f64::NAN, |r| r.mse)
    }

    /// `|estimate − truth|` per cell, NaN outside the domain.
    pub fn error_field(&self) -> Vec<f64> {
        self.estimates
            .iter()
            .zip(&self.truth)
            .map(|(e, t)| (e - t).abs())
            .collect()
    }
}

/// Loads the scene and runs it; writes outputs when `config.out` is set.
pub fn run(config: &RunConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let (bvp, mut grid) = load_scene(&config.scene)?;
    if let Some(n) = config.resolution {
        grid = SliceGrid::new(grid.origin, grid.u_axis, grid.v_axis, n, &bvp.domain)?;
    }
    run_problem(&bvp, &grid, config)
}

/// Runs a prepared problem on `grid`; the scene path of `config` is ignored.
pub fn run_problem(bvp: &Bvp, grid: &SliceGrid, config: &RunConfig) -> Result<RunReport, CliError> {
    config.validate()?;
    let report = match config.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| config_error("workers", e.to_string()))?;
            pool.install(|| solve_slice(bvp, grid, config))?
        }
        None => solve_slice(bvp, grid, config)?,
    };
    if let Some(dir) = &config.out {
        write_outputs(&report, dir)?;
    }
    Ok(report)
}

fn solve_slice(bvp: &Bvp, grid: &SliceGrid, config: &RunConfig) -> Result<RunReport, CliError> {
    let cells = grid.points();
    if cells.is_empty() {
        return Err(config_error(
            "slice",
            "no slice cell lies inside the domain",
        ));
    }
    let positions: Vec<_> = cells.iter().map(|(_, p)| *p).collect();
    let truth: Vec<f64> = positions
        .iter()
        .map(|p| {
            bvp.exact(p)
                .ok_or_else(|| config_error("problem.solution", "an analytic solution is required"))
        })
        .collect::<Result<_, _>>()?;
    let neighbors = if config.strategy == WeightingStrategy::Vanilla {
        (0..positions.len()).map(|i| vec![i]).collect()
    } else {
        let r = radii(bvp, &positions);
        match config.neighbors {
            NeighborMode::Grid => {
                let lattice: Vec<_> = cells.iter().map(|(k, _)| grid.lattice(*k)).collect();
                select_neighbors_grid(&lattice, &positions, &r, config.alpha, config.beta)
            }
            NeighborMode::Distance => select_neighbors(&positions, &r, config.alpha, config.beta),
        }
    };
    let walk = WalkConfig {
        epsilon: config.epsilon.unwrap_or(1e-3 * bvp.domain.diameter()),
        max_steps: config.max_steps,
        source_samples: config.source_samples,
    };
    let solve = SolveConfig {
        walk,
        strategy: config.strategy,
        seed: config.seed,
    };
    let mut solver = Solver::<1>::new(bvp, &positions, neighbors, solve)?;
    let injected = match config.injection {
        Some(inj) => {
            let slot = cells
                .iter()
                .position(|(k, _)| *k == inj.cell)
                .ok_or_else(|| config_error("injection.cell", "cell is outside the domain"))?;
            Some((inj, slot))
        }
        None => None,
    };

    let violations_before = combine_violations();
    let start = Instant::now();
    let mut rounds = Vec::new();
    loop {
        solver.step_with(|k, id, rec| {
            if let Some((inj, slot)) = injected {
                if k == inj.round && id == slot {
                    rec.value *= inj.factor;
                }
            }
        });
        let mse = solver
            .estimates()
            .iter()
            .zip(&truth)
            .map(|(e, t)| (e[0] - t).powi(2))
            .sum::<f64>()
            / truth.len() as f64;
        let seconds = start.elapsed().as_secs_f64();
        rounds.push(RoundStats {
            round: solver.rounds(),
            walks: solver.walks(),
            mse,
            seconds,
        });
        let done = match config.budget {
            BudgetMode::Rounds => solver.rounds() >= config.spp,
            BudgetMode::Seconds => seconds >= config.seconds,
        };
        if done {
            break;
        }
    }

    let mut estimates = vec![f64::NAN; grid.len()];
    let mut truth_map = vec![f64::NAN; grid.len()];
    for (((k, _), e), t) in cells.iter().zip(solver.estimates()).zip(&truth) {
        estimates[*k] = e[0];
        truth_map[*k] = *t;
    }
    Ok(RunReport {
        strategy: config.strategy,
        rounds,
        total_walks: solver.walks(),
        estimates,
        truth: truth_map,
        grid: grid.clone(),
        failed_pairs: solver.failed_pairs(),
        violations: combine_violations() - violations_before,
    })
}

/// Writes `error.float` (raw `|estimate − truth|`) and `error.png` (viridis over `[0, max error]`).
pub fn write_error_map(report: &RunReport, dir: &Path) -> Result<(), CliError> {
    let n = report.grid.resolution;
    let err = report.error_field();
    output::write_float_map(&dir.join("error.float"), n, n, &err)?;
    let (_, hi) = output::masked_range(&err, &report.grid.mask);
    output::write_png(
        &dir.join("error.png"),
        n,
        n,
        &output::colorize(&err, &report.grid.mask, 0.0, hi),
    )
}

/// Writes solution and error maps, images, `convergence.csv` and `timing.csv` into `dir`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let n = report.grid.resolution;
    output::write_float_map(&dir.join("solution.float"), n, n, &report.estimates)?;
    let (lo, hi) = output::masked_range(&report.estimates, &report.grid.mask);
    output::write_png(
        &dir.join("solution.png"),
        n,
        n,
        &output::colorize(&report.estimates, &report.grid.mask, lo, hi),
    )?;
    write_error_map(report, dir)?;
    output::write_convergence_csv(&dir.join("convergence.csv"), &report.rounds)?;
    output::write_timing_csv(&dir.join("timing.csv"), &report.rounds)
}

/// Directory name used for a strategy in comparison runs.
pub fn strategy_label(s: &WeightingStrategy) -> String {
    match s {
        WeightingStrategy::Statistical { gamma } => format!("statistical-{gamma}"),
        other => other.name().to_string(),
    }
}

/// Parses `vanilla,uniform,statistical:0.3`; a bare `statistical` uses `default_gamma`.
pub fn parse_strategy_list(
    list: &str,
    default_gamma: f64,
) -> Result<Vec<WeightingStrategy>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (name, gamma) = match item.split_once(':') {
                Some((n, g)) => (
                    n,
                    g.parse::<f64>()
                        .map_err(|_| config_error("compare", format!("bad gamma in `{item}`")))?,
                ),
                None => (item, default_gamma),
            };
            WeightingStrategy::parse(name, gamma).map_err(|e| match e {
                offwos::Error::Config { message, .. } => config_error("compare", message),
                other => other.into(),
            })
        })
        .collect()
}

/// Runs every strategy on the same scene, seed and budget. Each run writes into
/// `out/<strategy>/`, and `out/compare.csv` summarizes the final errors.
pub fn compare(
    config: &RunConfig,
    strategies: &[WeightingStrategy],
) -> Result<Vec<RunReport>, CliError> {
    if strategies.is_empty() {
        return Err(config_error("compare", "no strategies given"));
    }
    let mut reports = Vec::with_capacity(strategies.len());
    for s in strategies {
        let mut c = config.clone();
        c.strategy = *s;
        c.out = config.out.as_ref().map(|d| d.join(strategy_label(s)));
        reports.push(run(&c)?);
    }
    if let Some(dir) = &config.out {
        use std::io::Write;
        std::fs::create_dir_all(dir)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("compare.csv"))?);
        writeln!(w, "strategy,rounds,walks,mse")?;
        for r in &reports {
            writeln!(
                w,
                "{},{},{},{:.17e}",
                strategy_label(&r.strategy),
                r.rounds.len(),
                r.total_walks,
                r.final_mse()
            )?;
        }
        w.flush()?;
    }
    Ok(reports)
}
