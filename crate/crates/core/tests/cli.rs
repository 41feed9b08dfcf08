use std::process::{Command, Output};

use serde_json::Value;

fn vchoquet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vchoquet"))
        .args(args)
        .env_remove("CHOQUET_TOL")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn integrate_constant() {
    let out = vchoquet(&[
        "integrate",
        "--f",
        "preset:one",
        "--capacity",
        "exp-saturation",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["value"].as_f64().unwrap() - 0.6321206).abs() < 1e-7);
    assert!(v["error_estimate"].is_number());
}

#[test]
fn integrate_on_subinterval() {
    let out = vchoquet(&[
        "integrate",
        "--f",
        "preset:one",
        "--capacity",
        "power:0.5",
        "--on",
        "0,0.25",
    ]);
    assert_eq!(json(&out)["value"].as_f64().unwrap(), 0.5);
}

#[test]
fn integrate_reads_spec_files() {
    let dir = std::env::temp_dir().join(format!("vchoquet-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("f.json");
    let mu = dir.join("mu.json");
    std::fs::write(
        &f,
        r#"{"type": "step", "nodes": [0, 0.5, 1], "values": [2, 0]}"#,
    )
    .unwrap();
    std::fs::write(&mu, r#"{"distortion": "identity"}"#).unwrap();
    let out = vchoquet(&[
        "integrate",
        "--f",
        f.to_str().unwrap(),
        "--capacity",
        mu.to_str().unwrap(),
    ]);
    assert_eq!(json(&out)["value"].as_f64().unwrap(), 1.0);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn orbit_first_iterate_is_closed_form() {
    let out = vchoquet(&[
        "orbit",
        "--n",
        "1",
        "--capacity",
        "exp-saturation",
        "--grid",
        "1025",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,v0,v1,closed0,closed1"));
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[2] - (1.0 - (-cols[0]).exp())).abs() < 1e-8);
        assert!((cols[2] - cols[4]).abs() < 1e-8);
        rows += 1;
    }
    assert_eq!(rows, 1025);
}

#[test]
fn volterra_csv() {
    let out = vchoquet(&[
        "volterra",
        "--f",
        "preset:ramp",
        "--capacity",
        "identity",
        "--grid",
        "5",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,Vf");
    assert_eq!(lines[3], "0.5,0.125");
    assert_eq!(lines.len(), 6);
}

#[test]
fn norm_and_opnorm() {
    let v = json(&vchoquet(&[
        "norm",
        "--f",
        "preset:one",
        "--p",
        "2",
        "--capacity",
        "identity",
    ]));
    assert_eq!(v["lp_norm"].as_f64().unwrap(), 1.0);
    let v = json(&vchoquet(&["opnorm", "--grid", "1025", "--iters", "200"]));
    let two_over_pi = std::f64::consts::FRAC_2_PI;
    assert!((v["estimate"].as_f64().unwrap() - two_over_pi).abs() < 1e-3);
    assert!((v["reference"].as_f64().unwrap() - two_over_pi).abs() < 1e-9);
    let out = vchoquet(&["opnorm", "--capacity", "log"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_suite_exit_codes() {
    let out = vchoquet(&[
        "check",
        "--suite",
        "thm-5.1-ii",
        "--seed",
        "1",
        "--samples",
        "200",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    for key in ["suite", "seed", "samples", "worst_margin", "runtime_ms"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    let out = vchoquet(&[
        "check",
        "--suite",
        "capacity-laws[square]",
        "--samples",
        "500",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!json(&out)["violations"].as_array().unwrap().is_empty());
}

#[test]
fn identical_invocations_are_byte_identical() {
    let args = [
        "check",
        "--suite",
        "comonotone",
        "--seed",
        "5",
        "--samples",
        "50",
        "--no-runtime",
    ];
    assert_eq!(vchoquet(&args).stdout, vchoquet(&args).stdout);
    let args = ["orbit", "--n", "2", "--capacity", "moebius", "--grid", "65"];
    assert_eq!(vchoquet(&args).stdout, vchoquet(&args).stdout);
}

#[test]
fn span_csv() {
    let out = vchoquet(&[
        "span",
        "--targets",
        r#"["preset:one", {"type": "preset", "name": "square"}]"#,
        "--n-max",
        "3",
        "--grid",
        "129",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,target,residual,rms");
    assert_eq!(lines.len(), 1 + 2 * 4);
}

#[test]
fn invalid_input_exits_two_with_diagnostic() {
    for args in [
        &[
            "integrate",
            "--f",
            "{\"type\": \"pwl\"",
            "--capacity",
            "log",
        ][..],
        &["integrate", "--f", "preset:nope", "--capacity", "log"],
        &[
            "integrate",
            "--f",
            "preset:one",
            "--capacity",
            "{\"distortion\": \"power\", \"p\": 2}",
        ],
        &["check", "--suite", "nope"],
        &[
            "norm",
            "--f",
            "preset:one",
            "--p",
            "0.5",
            "--capacity",
            "log",
        ],
        &["bogus"],
    ] {
        let out = vchoquet(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn json_parse_errors_report_position() {
    let out = vchoquet(&[
        "integrate",
        "--f",
        "{\"type\": \"pwl\",\n \"nodes\": [0, 1]",
        "--capacity",
        "log",
    ]);
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn unreachable_tolerance_exits_three() {
    let out = Command::new(env!("CARGO_BIN_EXE_vchoquet"))
        .args([
            "integrate",
            "--f",
            "preset:sin-pi",
            "--capacity",
            "power:0.5",
        ])
        .env("CHOQUET_TOL", "1e-300")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}
