use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ibnc_core::repr_io::{load_representation, Format};
use serde_json::Value;

fn ibnc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibnc"))
        .args(args)
        .current_dir(dir)
        .env_remove("IBNC_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Value {
    let out = ibnc(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    ibnc(dir, args).status.code().expect("exit code")
}

fn synth(dir: &Path, out: &str, extra: &[&str]) {
    let mut args = vec![
        "synth",
        "--classes",
        "5",
        "--dim",
        "8",
        "--per-class",
        "40",
        "--sigma",
        "0.1",
        "--seed",
        "3",
        "-o",
        out,
    ];
    args.extend_from_slice(extra);
    ok(dir, &args);
}

#[test]
fn synth_is_loadable_and_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = [
        "synth",
        "--classes",
        "10",
        "--dim",
        "64",
        "--per-class",
        "500",
        "--sigma",
        "0.05",
        "--seed",
        "1",
        "-o",
    ];
    ok(d, &[&args[..], &["a.ibnc"]].concat());
    ok(d, &[&args[..], &["b.ibnc"]].concat());
    let set = load_representation(&d.join("a.ibnc"), Format::IbncBin).unwrap();
    assert_eq!((set.len(), set.dim(), set.class_count()), (5000, 64, 10));
    assert_eq!(
        fs::read(d.join("a.ibnc")).unwrap(),
        fs::read(d.join("b.ibnc")).unwrap()
    );
}

#[test]
fn invalid_specs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(
        code(
            d,
            &[
                "synth",
                "--classes",
                "10",
                "--dim",
                "8",
                "--per-class",
                "5",
                "--sigma",
                "0.1",
                "--seed",
                "1",
                "-o",
                "z.ibnc"
            ]
        ),
        2
    );
    assert!(!d.join("z.ibnc").exists());
    assert_eq!(code(d, &["nc", "-i", "missing.csv", "--out-dir", "nc"]), 2);
    assert_eq!(
        code(
            d,
            &["--threads", "0", "nc", "-i", "x.csv", "--out-dir", "nc"]
        ),
        2
    );
    assert_eq!(
        code(
            d,
            &[
                "mgib",
                "--source",
                "a",
                "--relevance",
                "b",
                "--out-dir",
                "m"
            ]
        ),
        2
    );
}

#[test]
fn malformed_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.csv"), "f0,f1\n1,2\n3,4\n").unwrap();
    assert_eq!(code(d, &["nc", "-i", "bad.csv", "--out-dir", "nc"]), 2);
    fs::write(d.join("bad.ibnc"), b"garbage").unwrap();
    assert_eq!(code(d, &["nc", "-i", "bad.ibnc", "--out-dir", "nc"]), 2);
}

#[test]
fn existing_outputs_need_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "z.ibnc", &[]);
    let before = fs::read(d.join("z.ibnc")).unwrap();
    let out = ibnc(
        d,
        &[
            "synth",
            "--classes",
            "3",
            "--dim",
            "2",
            "--per-class",
            "4",
            "--sigma",
            "1",
            "--seed",
            "9",
            "-o",
            "z.ibnc",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--force"));
    assert_eq!(fs::read(d.join("z.ibnc")).unwrap(), before);
    ok(
        d,
        &[
            "--force",
            "synth",
            "--classes",
            "3",
            "--dim",
            "2",
            "--per-class",
            "4",
            "--sigma",
            "1",
            "--seed",
            "9",
            "-o",
            "z.ibnc",
        ],
    );
    assert_ne!(fs::read(d.join("z.ibnc")).unwrap(), before);
}

#[test]
fn nc_on_collapsed_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--classes",
            "6",
            "--dim",
            "8",
            "--per-class",
            "10",
            "--sigma",
            "0",
            "--seed",
            "2",
            "-o",
            "z.csv",
        ],
    );
    let report = ok(d, &["nc", "-i", "z.csv", "--seed", "1", "--out-dir", "nc"]);
    let nc = &report["result"]["nc"];
    assert!((nc["mean_cos"].as_f64().unwrap() + 0.2).abs() <= 1e-9);
    assert_eq!(nc["target_cos"].as_f64().unwrap(), -0.2);
    assert_eq!(nc["nc1"].as_f64().unwrap(), 0.0);
    assert!(report["result"]["ib_gap"]["delta"].as_f64().unwrap() <= 0.01);
    let written: Value = serde_json::from_slice(&fs::read(d.join("nc/nc.json")).unwrap()).unwrap();
    assert_eq!(written, report);
    let angles = fs::read_to_string(d.join("nc/angles.csv")).unwrap();
    assert_eq!(angles.lines().count(), 1 + 15);
}

#[test]
fn cca_pairs_ranks_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // unit-scale pair: pair noise 0.01 against within-class spread 1
    ok(
        d,
        &[
            "synth",
            "--classes",
            "5",
            "--dim",
            "8",
            "--per-class",
            "200",
            "--sigma",
            "1",
            "--seed",
            "3",
            "-o",
            "u2.ibnc",
            "--pair-out",
            "u1.ibnc",
        ],
    );
    let r = ok(d, &["cca", "--a", "u1.ibnc", "--b", "u2.ibnc"]);
    assert!(r["result"]["mean_top_k"].as_f64().unwrap() >= 0.999);

    synth(d, "z2.ibnc", &["--pair-out", "z1.ibnc"]);

    synth(d, "w2.ibnc", &["--pair-out", "w1.ibnc", "--warp", "arctan"]);
    let plain = ok(d, &["cca", "--a", "z1.ibnc", "--b", "z2.ibnc", "--ranked"]);
    let warped = ok(d, &["cca", "--a", "w1.ibnc", "--b", "w2.ibnc", "--ranked"]);
    assert_eq!(
        plain["result"]["correlations"],
        warped["result"]["correlations"]
    );

    ok(
        d,
        &[
            "synth",
            "--classes",
            "5",
            "--dim",
            "8",
            "--per-class",
            "30",
            "--sigma",
            "0.1",
            "--seed",
            "3",
            "-o",
            "short.ibnc",
        ],
    );
    assert_eq!(code(d, &["cca", "--a", "z1.ibnc", "--b", "short.ibnc"]), 2);
}

#[test]
fn mgib_rank_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--classes",
            "10",
            "--dim",
            "32",
            "--per-class",
            "100",
            "--sigma",
            "0.05",
            "--seed",
            "1",
            "-o",
            "z2.ibnc",
            "--pair-out",
            "z1.ibnc",
        ],
    );
    let r = ok(
        d,
        &[
            "mgib",
            "--source",
            "z1.ibnc",
            "--relevance",
            "z2.ibnc",
            "--rank",
            "10",
            "--encode",
            "z1.ibnc",
            "--out-dir",
            "m",
        ],
    );
    assert_eq!(r["result"]["mgib"]["active_rank"], 10);
    let compressed = load_representation(&d.join("m/compressed.ibnc"), Format::IbncBin).unwrap();
    assert_eq!((compressed.len(), compressed.dim()), (1000, 10));
    let encoded = load_representation(&d.join("m/z1.compressed.ibnc"), Format::IbncBin).unwrap();
    assert!((encoded.features() - compressed.features()).amax() < 1e-9);
    let curve = fs::read_to_string(d.join("m/info_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 64);

    assert_eq!(
        code(
            d,
            &[
                "mgib",
                "--source",
                "z1.ibnc",
                "--relevance",
                "z2.ibnc",
                "--rank",
                "70",
                "--out-dir",
                "m2"
            ]
        ),
        2
    );
    assert_eq!(
        code(
            d,
            &[
                "mgib",
                "--source",
                "z1.ibnc",
                "--relevance",
                "z2.ibnc",
                "--rank",
                "3",
                "--beta",
                "4",
                "--out-dir",
                "m3"
            ]
        ),
        2
    );
}

#[test]
fn probe_and_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "z.ibnc", &[]);
    ok(
        d,
        &[
            "split",
            "-i",
            "z.ibnc",
            "--seed",
            "4",
            "--train-out",
            "train.ibnc",
            "--test-out",
            "test.ibnc",
        ],
    );
    let r = ok(
        d,
        &[
            "probe",
            "--train",
            "train.ibnc",
            "--test",
            "test.ibnc",
            "--out-dir",
            "p",
        ],
    );
    let variants = r["result"]["variants"].as_array().unwrap();
    assert_eq!(variants[0]["variant"], "raw");
    assert_eq!(variants[0]["linear_accuracy"].as_f64().unwrap(), 1.0);

    let a = ok(
        d,
        &[
            "agreement",
            "--a",
            "p/raw.probe.csv",
            "--b",
            "p/raw.ncm.csv",
        ],
    );
    assert_eq!(a["result"]["samples"], 40);
    assert_eq!(a["result"]["both_correct"].as_f64().unwrap(), 1.0);

    let rows: String = (0..4)
        .map(|i| format!("{i},{},{}\n", i % 2, (i + 1) % 2))
        .collect();
    fs::write(
        d.join("wrong.csv"),
        format!("index,label,prediction\n{rows}"),
    )
    .unwrap();
    let rows: String = (0..4)
        .map(|i| format!("{i},{},{}\n", i % 2, i % 2))
        .collect();
    fs::write(
        d.join("right.csv"),
        format!("index,label,prediction\n{rows}"),
    )
    .unwrap();
    let a = ok(d, &["agreement", "--a", "right.csv", "--b", "wrong.csv"]);
    assert_eq!(a["result"]["accuracy_a"].as_f64().unwrap(), 1.0);
    assert_eq!(a["result"]["both_correct"].as_f64().unwrap(), 0.0);

    assert_eq!(
        code(
            d,
            &[
                "probe",
                "--train",
                "train.ibnc",
                "--test",
                "nope.ibnc",
                "--out-dir",
                "q"
            ]
        ),
        2
    );
}
