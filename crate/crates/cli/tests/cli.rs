use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SUBCOMMANDS: [&str; 10] = [
    "graph-loops",
    "soup-sample",
    "zeta-det",
    "loop-mass",
    "verify-theorem",
    "lattice-torus",
    "gff-sample",
    "subdivide",
    "reweight-test",
    "acceptance",
];

fn loopzeta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loopzeta"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("LOOPZETA_WORKERS")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("loopzeta-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    std::fs::read(dir.join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

#[test]
fn help_exits_zero_everywhere() {
    assert_eq!(loopzeta(&["--help"]).status.code(), Some(0));
    for sub in SUBCOMMANDS {
        let out = loopzeta(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn bad_parameters_exit_one() {
    let cases: [&[&str]; 5] = [
        &["zeta-det", "--surface", "disk:-1"],
        &["verify-theorem", "--case", "sideways"],
        &["lattice-torus", "--sizes", "2,4"],
        &["soup-sample", "--graph", "random:1"],
        &["no-such-command"],
    ];
    for args in cases {
        let out = loopzeta(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("error"), "{args:?}: {err}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = scratch("det-a");
    let b = scratch("det-b");
    for dir in [&a, &b] {
        let out = loopzeta(&[
            "--seed",
            "7",
            "--out-dir",
            dir.to_str().unwrap(),
            "soup-sample",
            "--graph",
            "random:6",
            "--samples",
            "200",
            "--max-len",
            "200",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read(&a, "soup-sample.csv"), read(&b, "soup-sample.csv"));
    assert_eq!(read(&a, "soup-sample.json"), read(&b, "soup-sample.json"));

    let c = scratch("det-c");
    loopzeta(&[
        "--seed", "8", "--out-dir", c.to_str().unwrap(), "soup-sample", "--graph", "random:6",
        "--samples", "200", "--max-len", "200",
    ]);
    assert_ne!(read(&a, "soup-sample.csv"), read(&c, "soup-sample.csv"));
    for d in [a, b, c] {
        let _ = std::fs::remove_dir_all(d);
    }
}

#[test]
fn config_file_and_flags() {
    let dir = scratch("config");
    let ini = dir.join("run.ini");
    std::fs::write(&ini, "seed = 8\nsamples = 50\n\n[soup-sample]\nmax_len = 120\ngraph = random:6\n").unwrap();
    let out = loopzeta(&[
        "--config",
        ini.to_str().unwrap(),
        "--out-dir",
        dir.to_str().unwrap(),
        "soup-sample",
        "--samples",
        "40",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json = String::from_utf8(read(&dir, "soup-sample.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["seed"], 8);
    let text = v["config"].to_string();
    assert!(text.contains("\"40\""), "{text}");
    assert!(text.contains("\"120\""), "{text}");
    assert!(text.contains("random:6"), "{text}");

    std::fs::write(&ini, "samples = lots\n").unwrap();
    let out = loopzeta(&["--config", ini.to_str().unwrap(), "soup-sample"]);
    assert_eq!(out.status.code(), Some(1));
    let _ = std::fs::remove_dir_all(dir);
}

#[test]
fn verify_theorem_writes_artifacts() {
    let dir = scratch("verify");
    let out = loopzeta(&[
        "--out-dir",
        dir.to_str().unwrap(),
        "verify-theorem",
        "--case",
        "boundary",
        "--surface",
        "disk:1.0",
        "--delta",
        "0.0001,0.001,0.01",
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(read(&dir, "verify-theorem.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4, "{csv}");
    let v: serde_json::Value = serde_json::from_slice(&read(&dir, "verify-theorem.json")).unwrap();
    assert_eq!(v["command"], "verify-theorem");
    let _ = std::fs::remove_dir_all(dir);
}
