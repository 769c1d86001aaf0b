use std::process::Command;

use relsynth::cli::{run, DesignJson, EXIT_INFEASIBLE, EXIT_OK, EXIT_USAGE};

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("relsynth").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn synth_reports_a_feasible_design() {
    let (code, out, err) = call(&["synth", "--dfg", &data("fir16.dfg"), "--lib", &data("table1.lib"), "--latency", "11", "--area", "12"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("method: ours\n"));
    let rel: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("reliability: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(rel >= 0.78943 - 1e-4);
    assert!(out.lines().any(|l| l.trim_start().starts_with("s7 ")));
}

#[test]
fn infeasible_bounds_exit_one() {
    let (code, out, _) = call(&["synth", "--dfg", &data("fir16.dfg"), "--lib", &data("table1.lib"), "--latency", "5", "--area", "50"]);
    assert_eq!(code, EXIT_INFEASIBLE);
    assert!(out.starts_with("infeasible: latency"), "{out}");
    let (code, out, _) = call(&[
        "synth", "--dfg", &data("fir16.dfg"), "--lib", &data("table1.lib"), "--latency", "11", "--area", "2", "--format", "json",
    ]);
    assert_eq!(code, EXIT_INFEASIBLE);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "infeasible");
    assert_eq!(v["reason"], "area");
}

#[test]
fn input_errors_exit_two() {
    let (code, out, err) = call(&["synth", "--dfg", "/nonexistent.dfg", "--lib", &data("table1.lib"), "--latency", "5", "--area", "5"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let cyclic = dir.path().join("cyc.dfg");
    std::fs::write(&cyclic, "node a add\nnode b add\nedge a b\nedge b a\n").unwrap();
    let (code, _, err) = call(&["synth", "--dfg", cyclic.to_str().unwrap(), "--lib", &data("table1.lib"), "--latency", "5", "--area", "5"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("cycle"), "{err}");

    let (code, _, _) = call(&["synth", "--dfg", &data("fir16.dfg"), "--lib", &data("table1.lib"), "--latency", "0", "--area", "5"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, err) = call(&["synth", "--dfg", &data("fir16.dfg")]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("--lib"));
    let (code, _, _) = call(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn help_goes_to_stdout() {
    let (code, out, err) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("synth") && out.contains("sweep") && out.contains("characterize") && out.contains("eval"));
    assert!(err.is_empty());
}

#[test]
fn json_design_round_trips_through_eval() {
    for method in ["ours", "nmr", "combined"] {
        let (code, out, _) = call(&[
            "synth", "--dfg", &data("ew.dfg"), "--lib", &data("table1.lib"), "--latency", "22", "--area", "20", "--method", method,
            "--format", "json",
        ]);
        assert_eq!(code, EXIT_OK);
        let doc: DesignJson = serde_json::from_str(&out).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("design.json");
        std::fs::write(&path, &out).unwrap();
        let (code, eval_out, err) = call(&[
            "eval", "--dfg", &data("ew.dfg"), "--lib", &data("table1.lib"), "--design", path.to_str().unwrap(), "--format", "json",
        ]);
        assert_eq!(code, EXIT_OK, "{err}");
        let v: serde_json::Value = serde_json::from_str(&eval_out).unwrap();
        assert!((v["reliability"].as_f64().unwrap() - doc.reliability).abs() <= 1e-12 * doc.reliability);
        assert_eq!(v["area"].as_f64().unwrap(), doc.area);
    }
}

#[test]
fn eval_assign_file_with_redundancy() {
    let dir = tempfile::tempdir().unwrap();
    let dfg = dir.path().join("six.dfg");
    std::fs::write(&dfg, "node a add\nnode b add\nnode c add\nnode d add\nnode e add\nnode f add\n").unwrap();
    let assign = dir.path().join("six.assign");
    std::fs::write(
        &assign,
        "# three of each\nassign a Adder1\nassign b Adder1\nassign c Adder1\nassign d Adder2\nassign e Adder2\nassign f Adder2\n",
    )
    .unwrap();
    let (code, out, _) = call(&["eval", "--dfg", dfg.to_str().unwrap(), "--lib", &data("table1.lib"), "--assign", assign.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("reliability: 0.90713"), "{out}");

    std::fs::write(&assign, "assign a Adder2 nmr 3\nassign b Adder2\nassign c Adder2\nassign d Adder2\nassign e Adder2\nassign f Adder2\n").unwrap();
    let (code, out, _) = call(&["eval", "--dfg", dfg.to_str().unwrap(), "--lib", &data("table1.lib"), "--assign", assign.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let expect = 0.969f64.powi(5) * 0.997177;
    assert!(out.contains(&format!("reliability: {expect:.5}")), "{out}");
    assert!(out.contains("area: 16"), "{out}");

    std::fs::write(&assign, "assign a Adder2 nmr 2\n").unwrap();
    let (code, _, _) = call(&["eval", "--dfg", dfg.to_str().unwrap(), "--lib", &data("table1.lib"), "--assign", assign.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn sweep_writes_ordered_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("grid.csv");
    let (code, out, err) = call(&[
        "sweep", "--dfg", &data("fir16.dfg"), "--lib", &data("table1.lib"), "--latency", "10:11", "--area", "9:10", "--methods",
        "nmr,ours,oracle", "--out", out_path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.is_empty());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "L_d,A_d,method,status,latency,area,reliability");
    assert_eq!(lines.len(), 1 + 2 * 2 * 3);
    assert!(lines[1].starts_with("10,9.0,nmr,feasible,"));
    assert!(lines[3].starts_with("10,9.0,oracle,out-of-limits"));
    assert!(lines[12].starts_with("11,10.0,oracle,"));
}

#[test]
fn characterize_fits_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("adders.qcrit");
    std::fs::write(&q, "qcrit ripple 59.460e-21\nqcrit brentkung 29.701e-21\nqcrit koggestone 37.291e-21\n").unwrap();
    let (code, out, _) = call(&[
        "characterize", "--qcrit", q.to_str().unwrap(), "--ref", "ripple=0.999", "--calibrate", "brentkung=0.969", "--format", "json",
    ]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["q_s"].as_f64().unwrap() - 8.6278e-21).abs() < 0.01e-21);
    assert_eq!(v["components"][0]["reliability"].as_f64().unwrap(), 0.999);
    assert!((v["components"][2]["reliability"].as_f64().unwrap() - 0.987).abs() < 1e-3);

    let (code, _, _) = call(&["characterize", "--qcrit", q.to_str().unwrap(), "--ref", "ripple=0.999"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, err) = call(&["characterize", "--qcrit", q.to_str().unwrap(), "--ref", "carryskip=0.999", "--qs", "1e-20"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("carryskip"));
}

#[test]
fn binary_exit_status() {
    let bin = env!("CARGO_BIN_EXE_relsynth");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    let fir = data("fir16.dfg");
    let lib = data("table1.lib");
    assert_eq!(status(&["synth", "--dfg", &fir, "--lib", &lib, "--latency", "11", "--area", "12"]), Some(0));
    assert_eq!(status(&["synth", "--dfg", &fir, "--lib", &lib, "--latency", "4", "--area", "12"]), Some(1));
    assert_eq!(status(&["synth", "--dfg", &fir]), Some(2));
}
