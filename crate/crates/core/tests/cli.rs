use std::process::{Command, Output};

fn midconvex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_midconvex"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn closed_form_json_is_exact() {
    let o = midconvex(&["closed-form", "--lambda", "1/6"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "[[\"1\",\"1/6\"],[\"1\",\"1/3\"]]\n");
    let o = midconvex(&["closed-form", "--lambda", "2/4"]);
    assert_eq!(stdout(&o), "[[\"1\",\"1/2\"]]\n");
    let o = midconvex(&["--output", "csv", "closed-form", "--lambda", "1/5"]);
    assert_eq!(stdout(&o), "weight,scale\n4/3,1/5\n2/3,2/5\n");
}

#[test]
fn outputs_are_deterministic() {
    let runs: [&[&str]; 5] = [
        &[
            "bound",
            "--lambda",
            "3/7",
            "--u",
            "-5/2",
            "--phi",
            "pow:1,3/2",
        ],
        &[
            "--seed",
            "11",
            "identity",
            "--denominator-max",
            "20",
            "--samples",
            "30",
        ],
        &[
            "fixed-point",
            "--psi",
            "pow:1,2",
            "--grid-exp",
            "6",
            "--iters",
            "20",
        ],
        &[
            "check",
            "--f",
            "negquad:1",
            "--phi",
            "zero",
            "--domain",
            "-1,1",
            "--grid",
            "9",
            "--lambda-den-max",
            "4",
        ],
        &["--output", "json", "orbit", "--lambda", "5/12"],
    ];
    for args in runs {
        let a = midconvex(args);
        let b = midconvex(args);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.status.code(), b.status.code());
    }
}

#[test]
fn exit_codes() {
    assert_eq!(midconvex(&["--help"]).status.code(), Some(0));
    assert_eq!(midconvex(&[]).status.code(), Some(2));
    assert_eq!(midconvex(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        midconvex(&["closed-form", "--lambda", "3/2"]).status.code(),
        Some(2)
    );
    assert_eq!(
        midconvex(&["closed-form", "--lambda", "1/0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        midconvex(&[
            "bound",
            "--lambda",
            "1/3",
            "--u",
            "1",
            "--phi",
            "pow:-2,1/2"
        ])
        .status
        .code(),
        Some(3)
    );
    assert_eq!(
        midconvex(&[
            "check",
            "--f",
            "negquad:1",
            "--phi",
            "zero",
            "--domain",
            "0,1"
        ])
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        midconvex(&[
            "check",
            "--f",
            "quad:1,0,0",
            "--phi",
            "zero",
            "--domain",
            "0,1"
        ])
        .status
        .code(),
        Some(0)
    );
}

#[test]
fn bound_report_schema() {
    let o = midconvex(&["bound", "--lambda", "1/4", "--u", "1", "--phi", "pow:1,1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["lambda"], "1/4");
    assert_eq!(v["u"], "1");
    assert_eq!(v["phi"], "pow:1,1");
    let estimates = v["estimates"].as_array().unwrap();
    let value = |rule: &str| estimates.iter().find(|e| e["rule"] == rule).unwrap()["value"].clone();
    assert_eq!(value("RationalNK"), "3/4");
    assert_eq!(value("TakagiClosedForm"), "1/2");
    let best = v["best"].as_u64().unwrap() as usize;
    assert_eq!(estimates[best]["value"], "1/2");
    assert!(estimates.iter().all(|e| e["certified"] == true));
}

#[test]
fn float_u_gives_json_numbers() {
    let o = midconvex(&["bound", "--lambda", "1/3", "--u", "1e-3", "--phi", "quad:1"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["u"].is_f64());
    let nk = v["estimates"][0]["value"].as_f64().unwrap();
    assert!((nk - 2e-6 / 9.0).abs() < 1e-18);
}

#[test]
fn identity_sweep_summary() {
    let o = midconvex(&["identity", "--denominator-max", "200"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "all 12231 reduced fractions pass\n");
}

#[test]
fn check_negative_square_is_tight() {
    let o = midconvex(&[
        "check",
        "--f",
        "negquad:1",
        "--phi",
        "quad:1",
        "--domain",
        "-1,1",
        "--grid",
        "50",
        "--lambda-den-max",
        "12",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(stdout(&o), "x,y,lambda,lhs,rhs,rule\n");

    let o = midconvex(&[
        "check",
        "--f",
        "negquad:1",
        "--phi",
        "quad:1",
        "--domain",
        "-1,1",
        "--profile",
        "0,1",
        "--lambda-den-max",
        "6",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,num,den,gap,bound,rule"));
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[3], cols[4], "{line}");
    }
}

#[test]
fn table_inputs_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let phi_path = dir.path().join("phi.csv");
    std::fs::write(&phi_path, "u,value\n0,0\n0.5,0.25\n1,1\n2,4\n").unwrap();
    let phi = format!("table:{}", phi_path.display());
    let o = midconvex(&["bound", "--lambda", "1/3", "--u", "1", "--phi", &phi]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["best"].is_null());
    assert!(v["estimates"]
        .as_array()
        .unwrap()
        .iter()
        .all(|e| e["certified"] == false));

    let f_path = dir.path().join("f.csv");
    std::fs::write(&f_path, "x,value\n-1,-1\n0,0\n1,-1\n").unwrap();
    let f = format!("table:{}", f_path.display());
    let o = midconvex(&[
        "check", "--f", &f, "--phi", "zero", "--domain", "-1,1", "--grid", "5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}
