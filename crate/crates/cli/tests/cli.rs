use std::fs;
use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn sasaki(cmd: &str, config: &str, out: &Path, extra: &[&str]) -> (i32, String) {
    let dir = out.parent().unwrap();
    let file = dir.join(format!(
        "{cmd}-{}.json",
        out.file_name().unwrap().to_string_lossy()
    ));
    fs::write(&file, config).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_sasaki"))
        .arg(cmd)
        .arg("--config")
        .arg(&file)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env("SASAKI_THREADS", "2")
        .output()
        .unwrap();
    (
        output.status.code().unwrap(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let j = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(j).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn geom_reports_closed_forms_to_full_precision() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("geom");
    let (code, err) = sasaki("geom", r#"{"command":"geom","a1":1,"a2":2}"#, &out, &[]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(out.join("summary.json")).unwrap();
    assert!(text.contains("\"r\":1.2000000000000000e1"), "{text}");
    let pi2 = format!("{:.16e}", std::f64::consts::PI.powi(2));
    assert!(text.contains(&format!("\"volume\":{pi2}")), "{text}");
    let summary = read_json(&out.join("summary.json"));
    let numeric = summary["numeric"]["volume"].as_f64().unwrap();
    assert!((numeric / std::f64::consts::PI.powi(2) - 1.0).abs() < 1e-6);

    let profile = fs::read_to_string(out.join("profile.csv")).unwrap();
    assert_eq!(profile.lines().next().unwrap(), "s,gtilde,R,f_s,c_local,m");
    assert_eq!(profile.lines().count(), 2049 + 1);
}

#[test]
fn soliton_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = r#"{"command":"soliton","a1":1,"a2":2,"grid":{"L":30,"N":1025}}"#;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(sasaki("soliton", config, &a, &[]).0, 0);
    assert_eq!(sasaki("soliton", config, &b, &[]).0, 0);
    let manifest = fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(manifest, fs::read(b.join("manifest.json")).unwrap());

    let summary = read_json(&a.join("soliton.json"));
    for key in [
        "a1",
        "a2",
        "k",
        "p",
        "q",
        "kappa",
        "c",
        "volume",
        "defect_norm",
    ] {
        assert!(summary[key].is_f64(), "{key}");
    }
    assert_eq!(summary["grid"]["N"], 1025);
    let m = read_json(&a.join("manifest.json"));
    let names: Vec<&str> = m["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["soliton.json", "profile.csv"]);
    assert_eq!(m["config"]["grid"]["L"].as_f64(), Some(30.0));
    assert_eq!(m["config"]["init"]["type"], "round");
}

#[test]
fn flow_entropy_column_is_non_increasing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("flow");
    let config = r#"{"command":"flow","a1":2,"a2":3,"grid":{"L":40,"N":513},
        "init":{"type":"bump","eps":0.3},"flow":{"t_end":0.15,"sample_every":10}}"#;
    let (code, err) = sasaki("flow", config, &out, &[]);
    assert_eq!(code, 0, "{err}");
    let monitors = fs::read_to_string(out.join("monitors.csv")).unwrap();
    assert_eq!(
        monitors.lines().next().unwrap(),
        "t,Rmax,Rmin,r_numeric,volume,entropy,entropy_rate_fd,entropy_rate_formula,harnack_margin,defect_norm,cumulative_shift"
    );
    let entropy = column(&monitors, "entropy");
    assert!(entropy.len() > 10);
    for w in entropy.windows(2) {
        assert!(w[1] <= w[0] + 1e-8 * w[0].abs(), "{} -> {}", w[0], w[1]);
    }
    let summary = read_json(&out.join("summary.json"));
    for key in [
        "config",
        "converged",
        "t_final",
        "defect_norm_final",
        "wave_speed",
        "empirical_C0",
    ] {
        assert!(summary.get(key).is_some(), "{key}");
    }
    assert!(summary["empirical_C0"].as_f64().unwrap() > 0.0);
    assert!(out.join("final_profile.csv").exists());
}

#[test]
fn tube_areas_and_seeded_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let config = r#"{"command":"tube","a1":1,"a2":1,
        "tube":{"t":[0.3,0.6],"lattice":[32,16],"curvature_samples":100}}"#;
    let (a, b, c) = (
        tmp.path().join("a"),
        tmp.path().join("b"),
        tmp.path().join("c"),
    );
    assert_eq!(sasaki("tube", config, &a, &[]).0, 0);
    assert_eq!(sasaki("tube", config, &b, &[]).0, 0);
    assert_eq!(sasaki("tube", config, &c, &["--seed", "9"]).0, 0);

    let tube = fs::read_to_string(a.join("tube.csv")).unwrap();
    assert_eq!(
        tube.lines().next().unwrap(),
        "t,area,second_difference,weyl_bound"
    );
    let (t, area) = (column(&tube, "t"), column(&tube, "area"));
    for (t, area) in t.iter().zip(&area) {
        let exact = 2.0 * std::f64::consts::PI.powi(2) * (2.0 * t).sin();
        assert!(
            (area - exact).abs() < 1e-4 * exact,
            "{t}: {area} vs {exact}"
        );
    }
    let curvature = fs::read_to_string(a.join("curvature.csv")).unwrap();
    assert_eq!(curvature.lines().next().unwrap(), "x1,x2,x3,x4,plane,K");
    assert_eq!(curvature.lines().count(), 3 * 100 + 1);

    assert_eq!(
        fs::read(a.join("manifest.json")).unwrap(),
        fs::read(b.join("manifest.json")).unwrap()
    );
    assert_ne!(
        fs::read(a.join("curvature.csv")).unwrap(),
        fs::read(c.join("curvature.csv")).unwrap()
    );
    assert_eq!(read_json(&c.join("manifest.json"))["config"]["seed"], 9);
}

#[test]
fn sweep_writes_one_directory_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sweep");
    let config = r#"{"command":"sweep","runs":[
        {"command":"geom","a1":1,"a2":2,"grid":{"L":30,"N":513}},
        {"command":"soliton","a1":2,"a2":3,"grid":{"L":40,"N":513}}]}"#;
    let (code, err) = sasaki("sweep", config, &out, &[]);
    assert_eq!(code, 0, "{err}");
    assert!(out.join("run-000/summary.json").exists());
    assert!(out.join("run-001/soliton.json").exists());
    let entries = read_json(&out.join("sweep.json"));
    assert_eq!(entries.as_array().unwrap().len(), 2);
    assert_eq!(entries[1]["command"], "soliton");
}

#[test]
fn configuration_errors_exit_with_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let (code, err) = sasaki("flow", r#"{"command":"flow","a1":3,"a2":2}"#, &out, &[]);
    assert_eq!(code, 3);
    assert!(err.contains("a1 < a2 required"), "{err}");

    let (code, err) = sasaki(
        "geom",
        r#"{"command":"geom","a1":1,"a2":2,"grid":{"L":40,"n":65}}"#,
        &out,
        &[],
    );
    assert_eq!(code, 3);
    assert!(err.contains("grid.n"), "{err}");

    let (code, _) = sasaki("geom", r#"{"command":"geom","a1":1,"#, &out, &[]);
    assert_eq!(code, 3);

    let (code, err) = sasaki("soliton", r#"{"command":"geom","a1":1,"a2":2}"#, &out, &[]);
    assert_eq!(code, 3);
    assert!(err.contains("command"), "{err}");
    assert!(!out.exists());
}
