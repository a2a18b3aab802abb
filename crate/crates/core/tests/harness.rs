use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;

use kpzlat::harness::{ExperimentConfig, Kind, SweepQuantity, FIELD_HEADER};
use kpzlat::PotentialKind;

fn kpzlat(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpzlat"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("KPZLAT_THREADS")
        .output()
        .expect("binary runs")
}

fn csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn toda_tensors_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = kpzlat(&["tensors"], dir.path());
    assert!(out.status.success());
    let (h, rows) = csv(&dir.path().join("tensors.csv"));
    assert_eq!(rows.len(), 1);
    let g: f64 = rows[0][column(&h, "gamma")].parse().unwrap();
    let d: f64 = rows[0][column(&h, "delta")].parse().unwrap();
    // V = e^{-u} - 1 + u: V''' = -1, V'''' = 1
    assert_eq!(g, -0.5);
    assert!((d - 1.0 / 6.0).abs() < 1e-15);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn empty_size_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = kpzlat(&["simulate", "--set", "sizes=[]"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_key_and_kind_mismatch_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "kind = \"sbe\"\nsizes = [8]\n").unwrap();
    let out = kpzlat(&["fields", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = kpzlat(&["tensors", "--set", "bogus=1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = kpzlat(&["tensors", "--seed", "18446744073709551615"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn blow_up_exits_three_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = kpzlat(&["simulate", "--set", "sizes=[16]", "--set", "replicas=1", "--set", "dt=5.0"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let diag: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("blowup.json")).unwrap()).unwrap();
    assert!(diag["error"].as_str().unwrap().contains("blow-up"));
}

#[test]
fn qv_sweep_approaches_the_derivative_norm() {
    let dir = tempfile::tempdir().unwrap();
    let out = kpzlat(&["sweep", "--set", "sizes=[32,128,512]", "--set", "test_functions=[\"sin1\"]"], dir.path());
    assert!(out.status.success());
    let (h, rows) = csv(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 3);
    let target = 2.0 * std::f64::consts::PI.powi(2);
    let err: Vec<f64> = rows
        .iter()
        .map(|r| (r[column(&h, "value")].parse::<f64>().unwrap() - target).abs())
        .collect();
    assert!(err[0] > err[1] && err[1] > err[2], "{err:?}");
    assert!(err[2] / target < 0.05);
}

#[test]
fn csv_bytes_do_not_depend_on_threads() {
    let base = ["--set", "sizes=[16]", "--set", "replicas=3", "--set", "records=3", "--seed", "11"];
    let runs: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|t| {
            let dir = tempfile::tempdir().unwrap();
            let mut args = vec!["fields", "--threads", t];
            args.extend_from_slice(&base);
            assert!(kpzlat(&args, dir.path()).status.success());
            std::fs::read(dir.path().join("fields.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let text = String::from_utf8(runs[0].clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), FIELD_HEADER.join(","));
}

#[test]
fn manifest_echoes_config_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kpzlat(&["sweep", "--seed", "5", "--set", "sizes=[8]"], dir.path()).status.success());
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seeds"]["root"], 5);
    assert_eq!(m["config"]["sizes"][0], 8);
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let echoed = ExperimentConfig::from_toml_str(m["config_toml"].as_str().unwrap()).unwrap();
    assert_eq!(echoed.seed, 5);
}

fn potential() -> impl Strategy<Value = PotentialKind> {
    prop_oneof![
        (1usize..4).prop_map(|d| PotentialKind::Quadratic { d }),
        Just(PotentialKind::Toda),
        (-1.0f64..1.0).prop_map(|alpha| PotentialKind::FpuAlpha { alpha }),
        (1usize..3, -1.0f64..1.0, 0.0f64..2.0).prop_map(|(d, c3, c4)| PotentialKind::Diagonal { d, c3, c4 }),
        (-3.0f64..3.0, 0.01f64..1.0).prop_map(|(p, scale)| PotentialKind::Family { p, scale }),
    ]
}

prop_compose! {
    fn config()(
        kind in proptest::option::of(proptest::sample::select(Kind::ALL.to_vec())),
        seed in 0..=i64::MAX as u64,
        threads in proptest::option::of(1usize..64),
        potential in potential(),
        sizes in proptest::collection::vec(2usize..4096, 0..4),
        beta in proptest::option::of(0.001f64..10.0),
        t_end in 0.0f64..100.0,
        dt in proptest::option::of(1e-6f64..1.0),
        replicas in 1u64..10_000,
        records in 0usize..100,
        tfs in proptest::collection::vec("(sin|cos)[1-9]", 0..4),
        windows in proptest::option::of(proptest::collection::vec(1usize..512, 0..5)),
        modes in 4usize..1024,
        lags in proptest::collection::vec(0.0f64..1.0, 0..4),
        bg_sweep in any::<bool>(),
    ) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.kind = kind;
        c.seed = seed;
        c.threads = threads;
        c.lambda = Some(vec![0.25; potential.dim()]);
        c.potential = potential;
        c.sizes = sizes;
        c.beta = beta;
        c.t_end = t_end;
        c.dt = dt;
        c.replicas = replicas;
        c.records = records;
        c.test_functions = tfs;
        c.bg.windows = windows;
        c.sbe.modes = modes;
        c.compare.lags = lags;
        if bg_sweep {
            c.sweep.quantity = SweepQuantity::Bg;
        }
        c
    }
}

proptest! {
    #[test]
    fn config_round_trip_is_lossless(c in config()) {
        let text = c.to_toml_string().unwrap();
        let back = ExperimentConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml_string().unwrap(), text);
    }
}
