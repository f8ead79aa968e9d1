use std::path::PathBuf;

use offwos::WeightingStrategy;
use offwos_cli::output::{
    colorize, read_convergence_csv, read_float_map, write_convergence_csv, write_float_map,
    write_png,
};
use offwos_cli::{
    compare, parse_strategy_list, run, strategy_label, CliError, RoundStats, RunConfig,
};

fn scene(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name)
}

type Edit = Box<dyn Fn(&mut RunConfig)>;

fn config_key(e: CliError) -> String {
    match e {
        CliError::Config { key, .. } => key,
        CliError::Core(offwos::Error::Config { key, .. }) => key,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn float_map_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.float");
    let values = vec![0.1, -2.5e-300, f64::NAN, 1.0 / 3.0, f64::MAX, 0.0];
    write_float_map(&path, 3, 2, &values).unwrap();
    let (w, h, back) = read_float_map(&path).unwrap();
    assert_eq!((w, h), (3, 2));
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back), bits(&values));
}

#[test]
fn truncated_float_map_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.float");
    write_float_map(&path, 2, 2, &[1.0; 4]).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
    assert!(matches!(read_float_map(&path), Err(CliError::Format(_))));
}

#[test]
fn zero_error_map_is_uniform() {
    let values = vec![0.0; 16];
    let mask: Vec<bool> = (0..16).map(|k| k % 3 != 0).collect();
    let pixels = colorize(&values, &mask, 0.0, 0.0);
    assert!(pixels.iter().all(|p| *p == pixels[0]));
    let dir = tempfile::tempdir().unwrap();
    write_png(&dir.path().join("e.png"), 4, 4, &pixels).unwrap();
    assert!(std::fs::metadata(dir.path().join("e.png")).unwrap().len() > 0);
}

#[test]
fn colorize_spans_the_colormap() {
    let pixels = colorize(&[0.0, 1.0, f64::NAN], &[true, true, true], 0.0, 1.0);
    assert_ne!(pixels[0], pixels[1]);
    assert_eq!(pixels[2], pixels[0]);
}

#[test]
fn convergence_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    let rounds: Vec<RoundStats> = (1..=5)
        .map(|r| RoundStats {
            round: r,
            walks: 100 * r,
            mse: 1.0 / (r as f64 * 7.0),
            seconds: 0.5,
        })
        .collect();
    write_convergence_csv(&path, &rounds).unwrap();
    let back = read_convergence_csv(&path).unwrap();
    assert_eq!(back.len(), 5);
    for (a, b) in rounds.iter().zip(&back) {
        assert_eq!(
            (a.round, a.walks, a.mse.to_bits()),
            (b.0, b.1, b.2.to_bits())
        );
    }
}

#[test]
fn run_writes_one_csv_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = RunConfig::new(scene("ball_mixed.toml"));
    c.spp = 3;
    c.resolution = Some(12);
    c.out = Some(dir.path().to_path_buf());
    let report = run(&c).unwrap();
    assert_eq!(report.rounds.len(), 3);
    assert_eq!(
        read_convergence_csv(&dir.path().join("convergence.csv"))
            .unwrap()
            .len(),
        3
    );
    for f in [
        "solution.float",
        "solution.png",
        "error.float",
        "error.png",
        "timing.csv",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    let (w, h, err) = read_float_map(&dir.path().join("error.float")).unwrap();
    assert_eq!((w, h), (12, 12));
    assert_eq!(err.len(), report.error_field().len());
}

#[test]
fn constant_scene_is_exact_after_one_round() {
    let mut c = RunConfig::new(scene("ball_constant_mixed.toml"));
    c.spp = 2;
    c.resolution = Some(10);
    for s in ["vanilla", "uniform", "poisson-bound", "statistical"] {
        c.strategy = WeightingStrategy::parse(s, 0.05).unwrap();
        let report = run(&c).unwrap();
        assert_eq!(report.rounds[0].mse, 0.0, "{s}");
        // Off-center pairs are unbiased but not exact; only strategies that reject them stay exact.
        if matches!(s, "vanilla" | "statistical") {
            assert_eq!(report.rounds[1].mse, 0.0, "{s}");
        }
    }
}

#[test]
fn config_errors_name_their_key() {
    let base = RunConfig::new(scene("ball_poisson.toml"));
    let cases: Vec<(&str, Edit)> = vec![
        ("alpha", Box::new(|c| c.alpha = 1.5)),
        ("beta", Box::new(|c| c.beta = 0.0)),
        ("eps", Box::new(|c| c.epsilon = Some(-1.0))),
        ("spp", Box::new(|c| c.spp = 0)),
        ("workers", Box::new(|c| c.workers = Some(0))),
        ("resolution", Box::new(|c| c.resolution = Some(0))),
        (
            "gamma",
            Box::new(|c| c.strategy = WeightingStrategy::Statistical { gamma: 1.0 }),
        ),
    ];
    for (key, edit) in cases {
        let mut c = base.clone();
        edit(&mut c);
        assert_eq!(config_key(c.validate().unwrap_err()), key);
        assert_eq!(config_key(run(&c).unwrap_err()), key);
    }
}

#[test]
fn missing_scene_is_reported() {
    let c = RunConfig::new(scene("does_not_exist.toml"));
    assert!(run(&c).is_err());
}

#[test]
fn strategy_lists_parse() {
    let list = parse_strategy_list(
        "vanilla, uniform,poisson-bound,statistical:0.3,statistical",
        0.05,
    )
    .unwrap();
    assert_eq!(
        list,
        vec![
            WeightingStrategy::Vanilla,
            WeightingStrategy::Uniform,
            WeightingStrategy::PoissonBound,
            WeightingStrategy::Statistical { gamma: 0.3 },
            WeightingStrategy::Statistical { gamma: 0.05 },
        ]
    );
    assert_eq!(strategy_label(&list[3]), "statistical-0.3");
    assert_eq!(
        config_key(parse_strategy_list("statistical:x", 0.05).unwrap_err()),
        "compare"
    );
    assert_eq!(
        config_key(parse_strategy_list("median", 0.05).unwrap_err()),
        "compare"
    );
}

#[test]
fn compare_writes_a_directory_per_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = RunConfig::new(scene("disc_laplace.toml"));
    c.spp = 2;
    c.resolution = Some(8);
    c.out = Some(dir.path().to_path_buf());
    let strategies = parse_strategy_list("vanilla,statistical:0.2", 0.05).unwrap();
    let reports = compare(&c, &strategies).unwrap();
    assert_eq!(reports.len(), 2);
    assert!(dir.path().join("vanilla/convergence.csv").exists());
    assert!(dir.path().join("statistical-0.2/solution.float").exists());
    let summary = std::fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}
