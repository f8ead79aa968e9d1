use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use offwos::WeightingStrategy;
use offwos_cli::{
    compare, parse_strategy_list, run, strategy_label, BudgetMode, NeighborMode, RunConfig,
    RunReport,
};

/// Monte Carlo solver for Poisson problems with off-centered sample reuse.
#[derive(Debug, Parser)]
#[command(name = "offwos", version)]
struct Args {
    /// Scene description (TOML).
    #[arg(long)]
    scene: PathBuf,
    /// vanilla | uniform | poisson-bound | statistical
    #[arg(long, default_value = "statistical")]
    strategy: String,
    /// Acceptance threshold of the statistical strategy.
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Neighbors must lie within alpha times their own ball radius.
    #[arg(long, default_value_t = offwos::DEFAULT_ALPHA)]
    alpha: f64,
    /// Neighbor cap: lattice cells in grid mode, world units in distance mode.
    #[arg(long, default_value_t = offwos::DEFAULT_BETA)]
    beta: f64,
    /// Absorbing shell width [default: 1e-3 times the domain diameter].
    #[arg(long)]
    eps: Option<f64>,
    /// Samples per point, i.e. rounds in round budget mode.
    #[arg(long, default_value_t = 16)]
    spp: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads [default: all cores].
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = BudgetMode::Rounds)]
    budget_mode: BudgetMode,
    /// Wall-clock budget per strategy in seconds budget mode.
    #[arg(long, default_value_t = 10.0)]
    seconds: f64,
    /// Comma-separated strategies sharing one budget, e.g. `vanilla,uniform,statistical:0.3`.
    #[arg(long)]
    compare: Option<String>,
    #[arg(long, value_enum, default_value_t = NeighborMode::Grid)]
    neighbors: NeighborMode,
    /// Overrides the slice resolution of the scene.
    #[arg(long)]
    resolution: Option<usize>,
    /// Source samples per walk step.
    #[arg(long, default_value_t = 1)]
    source_samples: usize,
}

fn summary(r: &RunReport) {
    let secs = r.rounds.last().map_or(0.0, |s| s.seconds);
    println!(
        "{:<20} rounds {:>5}  walks {:>10}  mse {:.4e}  time {:.2}s",
        strategy_label(&r.strategy),
        r.rounds.len(),
        r.total_walks,
        r.final_mse(),
        secs
    );
    if r.violations > 0 {
        eprintln!("warning: {} combination invariant violations", r.violations);
    }
}

fn main() -> Result<()> {
    let a = Args::parse();
    let mut cfg = RunConfig::new(&a.scene);
    cfg.strategy = WeightingStrategy::parse(&a.strategy, a.gamma)?;
    cfg.alpha = a.alpha;
    cfg.beta = a.beta;
    cfg.epsilon = a.eps;
    cfg.spp = a.spp;
    cfg.budget = a.budget_mode;
    cfg.seconds = a.seconds;
    cfg.seed = a.seed;
    cfg.workers = a.workers;
    cfg.out = Some(a.out.clone());
    cfg.neighbors = a.neighbors;
    cfg.resolution = a.resolution;
    cfg.source_samples = a.source_samples;

    match &a.compare {
        Some(list) => {
            let strategies = parse_strategy_list(list, a.gamma)?;
            let reports = compare(&cfg, &strategies)
                .with_context(|| format!("comparing on {}", a.scene.display()))?;
            reports.iter().for_each(summary);
        }
        None => {
            let report = run(&cfg).with_context(|| format!("running {}", a.scene.display()))?;
            summary(&report);
        }
    }
    println!("outputs written to {}", a.out.display());
    Ok(())
}
