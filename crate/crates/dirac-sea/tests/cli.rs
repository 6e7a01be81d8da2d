use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dirac_sea::variation::VCurve;
use serde_json::Value;

const G2: &str = r#"{"masses":[1,10],"weights":[1,0.1],"a_max":150,"gauge":"natural","quad_tol":1e-11,
  "problem":{"free_vars":["rho2","c0","c1"],"starts":4,"seed":5,"grid_points":241}}"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirac-sea")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn eval_reports_scalars() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", r#"{"masses":[1,2],"weights":[1,1]}"#);
    let out = d.path().join("out");
    let o = bin(&["eval", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = json(&out.join("eval.json"));
    assert_eq!(e["T"], 9.0);
    assert_eq!(e["a_max"], 6.0);
    assert_eq!(e["a_max_defaulted"], true);
    let m = json(&out.join("manifest.json"));
    assert_eq!(m["subcommand"], "eval");
    assert_eq!(m["outputs"], serde_json::json!(["eval.json", "manifest.json"]));
}

#[test]
fn vdensity_csv_round_trips() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", r#"{"masses":[1,2],"weights":[1,0.5],"c1":1e-5}"#);
    let out = d.path().join("out");
    let o = bin(&["vdensity", "--config", &cfg, "--out", out.to_str().unwrap(), "--grid", "-4:4:41"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (grid, values) = VCurve::from_csv(&fs::read_to_string(out.join("vcurve.csv")).unwrap()).unwrap();
    assert!(grid.len() >= 41 && grid.len() == values.len());
    let side = json(&out.join("vcurve.json"));
    assert_eq!(side["seams"], serde_json::json!([1.0, 2.0]));
    assert!(side["stability"].is_object());
}

fn files(dir: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn critical_runs_are_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", G2);
    let run = |name: &str| {
        let out = d.path().join(name);
        let o = bin(&["critical", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), fb.len());
    for ((na, ta), (nb, tb)) in fa.iter().zip(&fb) {
        assert_eq!(na, nb);
        if na == "manifest.json" {
            let strip = |t: &str| {
                let mut v: Value = serde_json::from_str(t).unwrap();
                v["timestamp_unix"] = Value::Null;
                v["out_dir"] = Value::Null;
                v
            };
            assert_eq!(strip(ta), strip(tb));
        } else {
            assert_eq!(ta, tb, "{na} differs");
        }
    }
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"solution_0.json") && names.contains(&"solution_0_curve.csv"));
    let sol = json(&a.join("solution_0.json"));
    let rho2 = sol["cfg"]["weights"][1].as_f64().unwrap();
    assert!((rho2 - 0.044033).abs() < 5e-6);
}

#[test]
fn verify_accepts_record() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "c.json", G2);
    let out = d.path().join("sol");
    assert!(bin(&["critical", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let rec = out.join("solution_0.json");
    let vout = d.path().join("v");
    let o = bin(&["verify", "--out", vout.to_str().unwrap(), "--record", rec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(&vout.join("verify_record.json"))["passed"], true);
    assert_eq!(json(&vout.join("verify.json"))["passed"], true);
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("o");
    let out = out.to_str().unwrap();
    let missing = d.path().join("nope.json");
    assert_eq!(bin(&["eval", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    for (i, text) in [
        r#"{"masses":[1],"weights":[-1]}"#,
        r#"{"masses":[1],"weights":[1],"typo":0}"#,
        r#"{"masses":[1,2],"weights":[1,1],"a_max":3}"#,
        "not json",
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(d.path(), &format!("bad{i}.json"), text);
        assert_eq!(bin(&["eval", "--config", &cfg, "--out", out]).status.code(), Some(2), "{text}");
    }
    let no_problem = write_config(d.path(), "np.json", r#"{"masses":[1],"weights":[1]}"#);
    assert_eq!(bin(&["critical", "--config", &no_problem, "--out", out]).status.code(), Some(2));
    let stuck = G2.replace(r#""starts":4"#, r#""starts":1,"max_iter":1,"tol":1e-30"#);
    let stuck = write_config(d.path(), "stuck.json", &stuck);
    assert_eq!(bin(&["critical", "--config", &stuck, "--out", out]).status.code(), Some(3));
    let cfg = write_config(d.path(), "ok.json", r#"{"masses":[1],"weights":[1]}"#);
    assert_eq!(bin(&["vdensity", "--config", &cfg, "--out", out, "--grid", "1:0:5"]).status.code(), Some(2));
}
