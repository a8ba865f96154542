use std::fs;
use std::process::Command;

use bohm_ergo::dynamics::IntegratorConfig;
use bohm_ergo::scenarios::{
    parse_config, run_scenario, summary_json, write_outputs, Artifacts, OutputKind, ScenarioConfig,
    ScenarioError, ScenarioKind, Statistic,
};

const BIN: &str = env!("CARGO_BIN_EXE_bohm-ergo");

/// Small, fast variant of each built-in.
fn quick(kind: ScenarioKind) -> ScenarioConfig {
    let mut c = ScenarioConfig::minimal(kind);
    c.seed = Some(17);
    c.outputs = vec![
        OutputKind::SummaryJson,
        OutputKind::TrajectoriesCsv,
        OutputKind::HistogramCsv,
        OutputKind::PlotSvg,
    ];
    c.fan_size = Some(3);
    match kind {
        ScenarioKind::SingleSlit | ScenarioKind::DoubleSlit => c.n_trials = Some(400),
        ScenarioKind::TwoParticleSlit => c.n_trials = Some(60),
        ScenarioKind::SpreadingLaw | ScenarioKind::ErgodicityQm => {}
        ScenarioKind::Pendulum => {
            c.n_trials = Some(2);
            let mut i = IntegratorConfig::new(0.0, 40.0, 0.05);
            i.max_steps = 1_000_000;
            c.integrator = Some(i);
            c.grid_resolution = Some(16);
        }
    }
    c
}

#[test]
fn minimal_two_particle_config_gets_defaults() {
    let c = parse_config(r#"{"scenario": "two_particle_slit", "seed": 4}"#).unwrap();
    assert_eq!(c.geometry.half_separation, Some(1.0));
    assert_eq!(c.geometry.sigma0, Some(0.01));
    assert_eq!(c.n_trials, Some(10_000));
    let det = c.detection.unwrap();
    assert_eq!(det.t_detect, 2.0);
    assert!(det.d1.lo > 0.0 && det.d1 == det.d2);
    assert_eq!(c.integrator.unwrap().t_end, 2.0);
}

#[test]
fn unknown_scenario_is_schema_error() {
    let e = parse_config(r#"{"scenario": "warp_drive"}"#).unwrap_err();
    assert!(matches!(e, ScenarioError::Schema(_)), "{e}");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn unknown_and_misplaced_keys_are_named() {
    let e = parse_config(r#"{"scenario": "single_slit", "seed": 1, "colour": 3}"#).unwrap_err();
    assert!(e.to_string().contains("colour"), "{e}");
    let e = parse_config(r#"{"scenario": "single_slit", "seed": 1, "geometry": {"omega1": 2}}"#)
        .unwrap_err();
    assert!(e.to_string().contains("geometry.omega1"), "{e}");
    let e = parse_config(r#"{"scenario": "single_slit"}"#).unwrap_err();
    assert!(e.to_string().contains("seed"), "{e}");
    let e =
        parse_config(r#"{"scenario": "spreading_law", "geometry": {"sigma0": -1}}"#).unwrap_err();
    assert!(e.to_string().contains("sigma0"), "{e}");
}

#[test]
fn syntax_errors_carry_position() {
    match parse_config("{\n  \"scenario\": \"single_slit\",\n  \"seed\": ,\n}") {
        Err(ScenarioError::Parse { line, column, .. }) => {
            assert_eq!(line, 3);
            assert!(column > 0);
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn config_round_trips() {
    for kind in ScenarioKind::ALL {
        let c = ScenarioConfig::builtin(kind);
        let text = serde_json::to_string(&c).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, c, "{}", kind.name());
        assert_eq!(serde_json::to_string(&back).unwrap(), text);
    }
}

#[test]
fn nan_statistic_is_refused() {
    let (mut summary, _) = run_scenario(&quick(ScenarioKind::SpreadingLaw)).unwrap();
    summary
        .statistics
        .insert("broken".into(), Statistic::new(f64::NAN, 1, 0.0));
    let e = summary_json(&summary).unwrap_err();
    assert!(matches!(e, ScenarioError::Serialization(_)));
    assert_eq!(e.exit_code(), 3);
    let dir = tempfile::tempdir().unwrap();
    assert!(write_outputs(&summary, &Artifacts::default(), dir.path()).is_err());
}

#[test]
fn spreading_width_ratio_at_unit_smallness() {
    // ħ·t_end / (2mσ₀²) = 1 gives a ratio of √2.
    let mut c = ScenarioConfig::minimal(ScenarioKind::SpreadingLaw);
    c.integrator = Some(IntegratorConfig::new(0.0, 2.0, 0.01).with_tolerances(1e-12, 1e-14));
    let (s, _) = run_scenario(&c).unwrap();
    assert!((s.stat("width_ratio").unwrap() - 2f64.sqrt()).abs() < 1e-6);
    assert!((s.stat("smallness_parameter").unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn every_scenario_runs_and_writes_outputs() {
    for kind in ScenarioKind::ALL {
        let dir = tempfile::tempdir().unwrap();
        let c = quick(kind);
        let (summary, artifacts) = run_scenario(&c).unwrap();
        write_outputs(&summary, &artifacts, dir.path()).unwrap();
        for out in &c.outputs {
            let p = dir.path().join(out.file_name());
            assert!(p.exists(), "{} missing {}", kind.name(), out.file_name());
        }
        let csv = fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
        assert!(csv.starts_with("t,y1"));
        let svg = fs::read_to_string(dir.path().join("plot.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
                .unwrap();
        assert_eq!(json["scenario"], kind.name());
        assert_eq!(json["version"], env!("CARGO_PKG_VERSION"));
    }
}

#[test]
fn two_particle_summary_reports_discrepancy() {
    let (s, _) = run_scenario(&quick(ScenarioKind::TwoParticleSlit)).unwrap();
    assert_eq!(s.stat("p_star_12"), Some(0.0));
    assert!(s.stat("p_bar_12").unwrap() > 0.0);
    assert!(s.has_flag("ERGODIC_DISCREPANCY"));
}

fn write_config(dir: &std::path::Path, c: &ScenarioConfig) -> std::path::PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(c).unwrap()).unwrap();
    p
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = write_config(dir.path(), &quick(ScenarioKind::SpreadingLaw));
    let status = Command::new(BIN)
        .args(["validate", ok.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"scenario": "warp_drive"}"#).unwrap();
    let status = Command::new(BIN)
        .args(["validate", bad.to_str().unwrap()])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(2));

    // A run that starts on a node of the wavefunction cannot be integrated.
    let mut c = ScenarioConfig::minimal(ScenarioKind::Pendulum);
    c.geometry.initial = Some(vec![0.0, 0.0]);
    c.seed = Some(1);
    c.geometry.terms = Some(vec![
        bohm_ergo::scenarios::TermSpec {
            n1: 1,
            n2: 0,
            re: 0.6,
            im: 0.0,
        },
        bohm_ergo::scenarios::TermSpec {
            n1: 0,
            n2: 1,
            re: 0.8,
            im: 0.0,
        },
    ]);
    let node = write_config(dir.path(), &c);
    let out = dir.path().join("out");
    let status = Command::new(BIN)
        .args([
            "run",
            node.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(3));

    let listing = Command::new(BIN).arg("scenarios").output().unwrap();
    assert!(listing.status.success());
    let text = String::from_utf8(listing.stdout).unwrap();
    for kind in ScenarioKind::ALL {
        assert!(text.contains(kind.name()));
    }
}

#[test]
fn cli_seed_override_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &quick(ScenarioKind::SingleSlit));
    let run = |seed: &str, threads: &str, out: &str| {
        let out = dir.path().join(out);
        let status = Command::new(BIN)
            .args([
                "run",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                seed,
            ])
            .env("BOHM_ERGO_THREADS", threads)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
        fs::read_to_string(out.join("trajectories.csv")).unwrap()
    };
    let a = run("5", "1", "a");
    let b = run("5", "3", "b");
    let c = run("6", "2", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}
