use std::path::Path;
use std::process::{Command, Output};

fn lowmem(args: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowmem"))
        .args(args.split_whitespace())
        .output()
        .expect("spawn lowmem")
}

/// `args` followed by `--out path`.
fn lowmem_with(args: &str, path: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowmem"))
        .args(args.split_whitespace())
        .args(["--out", path])
        .output()
        .expect("spawn lowmem")
}

const GOLDEN: &str = include_str!("golden/oblivious_two_phase_n8_T256_seed7.csv");

#[test]
fn golden_trace_on_stdout() {
    let out = lowmem("--algo oblivious-full --adversary two-phase --n 8 --T 256 --seed 7");
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), GOLDEN);
}

#[test]
fn out_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let out = lowmem_with("--algo baseline --adversary planted --n 16 --T 300 --seed 2 --trace-stride 100 --constants gap=0.3 pool_cap=20", path.to_str().unwrap());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&path).unwrap();
    let days: Vec<&str> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(days, ["100", "200", "300"]);

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["schema_version"], 1);
    assert_eq!(meta["config"]["algo"], "baseline");
    assert_eq!(meta["config"]["T"], 300);
    assert_eq!(meta["config"]["seed"], 2);
    assert_eq!(meta["config"]["constants"][1], "pool_cap=20");
    assert_eq!(meta["effective"]["constants"]["pool_cap"], 20);
    assert_eq!(meta["effective"]["constants"]["gap"], 0.3);
    assert_eq!(meta["summary"]["days"], 300);
}

#[test]
fn many_seeds_write_a_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = lowmem_with(
        "--algo mwu --adversary iid --n 8 --T 64 --seed 10 --seeds 3 --jobs 2",
        dir.path().to_str().unwrap(),
    );
    assert!(out.status.success());
    for s in 10..13 {
        assert!(dir.path().join(format!("seed_{s}.csv")).exists());
        assert!(dir.path().join(format!("seed_{s}.meta.json")).exists());
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary, String::from_utf8(out.stdout).unwrap());
    assert!(summary
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("mwu/iid/n=8/T=64/desk,3,"));
}

#[test]
fn config_errors_exit_with_two() {
    let cases = [
        "--algo adaptive --adversary iid --n 8 --T 64",
        "--algo mwu --adversary iid --n 0 --T 64",
        "--algo mwu --adversary iid --n 8 --T 64 --constants nope=1",
        "--algo oblivious-full --adversary iid --n 12 --T 64",
        "--algo mwu --adversary strong --n 8 --T 64",
        "--algo nope --adversary iid --n 8 --T 64",
        "--algo mwu --adversary iid --n 8 --T 64 --mode fast",
    ];
    for args in cases {
        let out = lowmem(args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn unwritable_output_is_not_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = Path::new(&blocker).join("run.csv");
    let out = lowmem_with(
        "--algo mwu --adversary iid --n 4 --T 8",
        target.to_str().unwrap(),
    );
    assert_eq!(out.status.code(), Some(1));
}
