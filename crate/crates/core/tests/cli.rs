use std::path::Path;
use std::process::{Command, Output};

use ldp_spectral::bench::parse_csv;
use ldp_spectral::io::{read_column, read_path, read_transcript_file};
use ldp_spectral::mech::Aux;

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldp-spectral"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn simulate_privatize_estimate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&cli(
        &[
            "simulate",
            "--example",
            "1",
            "--n",
            "500",
            "--seed",
            "4",
            "-o",
            "x.csv",
        ],
        d,
    ));
    let path = read_path(&d.join("x.csv")).unwrap();
    assert_eq!(path.len(), 500);

    ok(&cli(
        &[
            "privatize",
            "-i",
            "x.csv",
            "--mech",
            "si-cov",
            "--alpha",
            "1",
            "--j",
            "2",
            "-o",
            "t.csv",
        ],
        d,
    ));
    let t = read_transcript_file(&d.join("t.csv")).unwrap();
    assert!(matches!(t.aux, Aux::Cov { j: 2, ref values } if values.len() == 498));
    let out = cli(&["estimate", "-i", "t.csv"], d);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("estimate,task,param"));
    assert!(lines.next().unwrap().ends_with(",cov,2.0"));

    ok(&cli(
        &[
            "privatize",
            "-i",
            "x.csv",
            "--mech",
            "si-global",
            "--alpha",
            "1",
            "--K",
            "3",
            "--tau",
            "2",
            "--tau-tilde",
            "8",
            "-o",
            "g.csv",
        ],
        d,
    ));
    ok(&cli(
        &[
            "estimate",
            "-i",
            "g.csv",
            "--grid-points",
            "17",
            "-o",
            "f.csv",
            "--cov-output",
            "c.csv",
            "--matrix-order",
            "6",
        ],
        d,
    ));
    let f = std::fs::read_to_string(d.join("f.csv")).unwrap();
    assert!(f.starts_with("omega,f_hat\n"));
    assert_eq!(f.lines().count(), 18);
    let sigma = read_column(std::fs::File::open(d.join("c.csv")).unwrap(), "sigma").unwrap();
    assert_eq!(sigma.len(), 6);

    ok(&cli(
        &[
            "privatize",
            "-i",
            "x.csv",
            "--mech",
            "ni",
            "--alpha",
            "2",
            "--seed",
            "9",
            "-o",
            "n.csv",
        ],
        d,
    ));
    ok(&cli(
        &[
            "estimate",
            "-i",
            "n.csv",
            "--task",
            "sdf-point",
            "--m",
            "3",
            "--omega",
            "0.6283185307179586",
        ],
        d,
    ));
    ok(&cli(
        &[
            "estimate",
            "-i",
            "n.csv",
            "--task",
            "sdf-global",
            "--m",
            "3",
        ],
        d,
    ));
}

#[test]
fn privatize_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&cli(
        &["simulate", "--example", "3", "--n", "200", "-o", "x.csv"],
        d,
    ));
    for name in ["a.csv", "b.csv"] {
        ok(&cli(
            &[
                "privatize",
                "-i",
                "x.csv",
                "--mech",
                "si-point",
                "--alpha",
                "0.5",
                "--omega",
                "0.6",
                "--K",
                "4",
                "--seed",
                "2",
                "-o",
                name,
            ],
            d,
        ));
    }
    assert_eq!(
        std::fs::read(d.join("a.csv")).unwrap(),
        std::fs::read(d.join("b.csv")).unwrap()
    );
}

#[test]
fn bench_output_is_byte_identical_and_parseable() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("cfg.json"),
        r#"{"example": 3, "n": 300, "replications": 6, "alphas": [0.1, 1.0],
            "tasks": ["cov0", "sdf_point(pi/5)"], "mechanisms": ["NI", "SI", "nonprivate"],
            "seed": 1, "density_normalization": "no2pi"}"#,
    )
    .unwrap();
    ok(&cli(&["bench", "--config", "cfg.json", "-o", "a.csv"], d));
    let b = cli(&["bench", "--config", "cfg.json"], d);
    ok(&b);
    let a = std::fs::read(d.join("a.csv")).unwrap();
    assert_eq!(a, b.stdout);
    let res = parse_csv(a.as_slice()).unwrap();
    assert_eq!(res.rows.len(), 2 * (2 * 2 + 1));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), r#"{"example": 1, "n": 100}"#).unwrap();
    assert_eq!(
        cli(&["bench", "--config", "bad.json"], d).status.code(),
        Some(2)
    );
    assert_eq!(
        cli(&["bench", "--config", "missing.json"], d).status.code(),
        Some(2)
    );
    std::fs::write(
        d.join("indef.json"),
        r#"{"process": {"kind": "explicit", "covs": [1.0, 2.0]}, "n": 50, "replications": 2,
            "alphas": [1.0], "tasks": ["cov0"], "mechanisms": ["NI"], "seed": 1}"#,
    )
    .unwrap();
    assert_eq!(
        cli(&["bench", "--config", "indef.json"], d).status.code(),
        Some(3)
    );
    assert_eq!(
        cli(&["simulate", "--example", "4", "--n", "10"], d)
            .status
            .code(),
        Some(2)
    );
}
