use std::fs;
use std::path::Path;
use std::process::Command;

use divlam::cli::{run, EXIT_OK, EXIT_RESOURCE, EXIT_VALIDATION};
use divlam::fieldlab::metrics;
use divlam::io::load_field;
use divlam::laminator::{hierarchical_laminate, rasterize, LaminateSchedule};
use divlam::matkit::{build_instance, InstanceParams};
use serde_json::Value;

fn divlam(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("divlam").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

fn entries(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn construct_canonical_instance() {
    let (code, out, _) = divlam(&["construct", "--q", "0.5,0.5,0.5", "--G", "identity"]);
    assert_eq!(code, EXIT_OK);
    let v = json(&out);
    assert_eq!(v["conditions"]["pass"], Value::Bool(true));
    let diag = |m: &Value| {
        let e = entries(m);
        assert!(e.iter().enumerate().all(|(i, x)| i % 4 == 0 || *x == 0.0));
        [e[0], e[4], e[8]]
    };
    let close = |a: [f64; 3], b: [f64; 3]| a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= 1e-12);
    assert!(close(diag(&v["instance"]["A"][2]), [-0.5, 3.0, 2.0 / 3.0]));
    assert!(close(diag(&v["instance"]["S"][0]), [0.0, 2.0, 2.0 / 3.0]));
    assert!(close(diag(&v["instance"]["S"][1]), [0.0, 1.0, 1.0 / 3.0]));
    assert!(close(diag(&v["instance"]["S"][2]), [0.5, 1.0, 2.0 / 3.0]));
}

#[test]
fn construct_rejects_bad_input() {
    assert_eq!(divlam(&["construct", "--q", "1.0,0.5,0.5"]).0, EXIT_VALIDATION);
    assert_eq!(divlam(&["construct", "--q", "0.5,0.5"]).0, EXIT_VALIDATION);
    let dir = tempfile::tempdir().unwrap();
    let singular = write(dir.path(), "n.json", "[[1,0,0],[0,1,0],[1,1,0]]");
    assert_eq!(divlam(&["construct", "--N", &singular]).0, EXIT_VALIDATION);
    assert_eq!(divlam(&["construct", "--G", "missing.json"]).0, EXIT_VALIDATION);
    assert_eq!(divlam(&["frobnicate"]).0, EXIT_VALIDATION);
    assert_eq!(divlam(&["--help"]).0, EXIT_OK);
}

#[test]
fn construct_transported_instance_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let n = write(dir.path(), "n.json", "[2,0,0, 0,2,0, 0,0,2]");
    let m = write(dir.path(), "m.json", "[[1,0,0],[0,1,0],[0,0,1]]");
    let out = dir.path().join("inst.json");
    let (code, stdout, _) = divlam(&["construct", "--N", &n, "--M", &m, "--out", out.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.is_empty());
    let v = json(&fs::read_to_string(out).unwrap());
    assert_eq!(entries(&v["instance"]["A"][1]), vec![3.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 3.0]);
}

#[test]
fn laminate_reports_residual_and_guards() {
    let (code, out, _) = divlam(&["laminate", "--grid", "16,16,16", "--samples", "200000"]);
    assert_eq!(code, EXIT_OK);
    let v = json(&out);
    let r = &v["fractions"];
    assert_eq!(r["expected_residual"].as_f64().unwrap(), 0.125);
    let se = r["residual_std_error"].as_f64().unwrap();
    assert!((r["residual"].as_f64().unwrap() - 0.125).abs() <= 3.0 * se);
    assert_eq!(divlam(&["laminate", "--depth", "0"]).0, EXIT_VALIDATION);
    assert_eq!(divlam(&["laminate", "--grid", "100000,100000,100000"]).0, EXIT_RESOURCE);
    assert_eq!(divlam(&["laminate", "--grid", "8,8"]).0, EXIT_VALIDATION);
}

#[test]
fn laminate_then_analyze_round_trips_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("b.divf");
    let (code, _, err) = divlam(&[
        "laminate",
        "--grid",
        "32,32,32",
        "--samples",
        "10000",
        "--out",
        field.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let labels = format!("{}.labels", field.display());
    let (code, out, err) = divlam(&["analyze", field.to_str().unwrap(), "--labels", &labels]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v = json(&out);

    let inst = build_instance(&InstanceParams::with_fractions([0.5; 3]).unwrap()).unwrap();
    let schedule = LaminateSchedule::new(inst.clone(), 1, 4, 1.0).unwrap();
    let raster = rasterize(&hierarchical_laminate(schedule).unwrap(), &[32, 32, 32]).unwrap();
    let expect = metrics(&raster, &inst.k_set().unwrap(), inst.default_eps()).unwrap();
    let got: divlam::fieldlab::MetricsReport = serde_json::from_value(v["metrics"].clone()).unwrap();
    assert_eq!(got, expect);
    assert_eq!(v["residual_fraction"].as_f64().unwrap(), 0.125);

    let reread = load_field(&field, Some(Path::new(&labels))).unwrap();
    assert_eq!(reread.raster(), raster.raster());
    assert_eq!(reread.labels(), raster.labels());
}

#[test]
fn analyze_constant_field_and_projection() {
    let dir = tempfile::tempdir().unwrap();
    let raster = divlam::laminator::Raster::new(
        vec![4, 4, 4],
        3,
        3,
        [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0].repeat(64),
    )
    .unwrap();
    let path = dir.path().join("c.divf");
    divlam::io::save_field(&path, &divlam::laminator::Field::from_raster(raster)).unwrap();
    let projected = dir.path().join("p.divf");
    let (code, out, err) = divlam(&["analyze", path.to_str().unwrap(), "--project", projected.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let v = json(&out);
    let m = &v["metrics"];
    for key in ["l1_dist_to_k", "l2_dist_to_k", "measure_above_eps", "hminus1_div", "l2_projection_gap"] {
        assert_eq!(m[key].as_f64().unwrap(), 0.0, "{key}");
    }
    assert_eq!(m["mean_matrix"], json("[[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]]"));
    assert!(v["projection"]["max_divergence"].as_f64().unwrap() <= 1e-12);
    assert!(projected.exists());
}

#[test]
fn analyze_rejects_truncated_files() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("b.divf");
    divlam(&["laminate", "--grid", "8,8,8", "--samples", "10000", "--out", field.to_str().unwrap()]);
    let bytes = fs::read(&field).unwrap();
    let cut = dir.path().join("cut.divf");
    fs::write(&cut, &bytes[..bytes.len() - 5]).unwrap();
    let (code, _, err) = divlam(&["analyze", cut.to_str().unwrap()]);
    assert_eq!(code, EXIT_VALIDATION);
    assert!(err.contains("truncated"), "{err}");
    assert_eq!(divlam(&["analyze"]).0, EXIT_VALIDATION);
}

#[test]
fn analyze_sweep_table() {
    let (code, out, err) = divlam(&[
        "analyze", "--sweep", "ratio=2,4", "--grid", "16,16,16", "--format", "csv",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("ratio,depth,grid,hminus1_div,residual_fraction,l2_projection_gap,mean_11"));
    assert!(lines[1].starts_with("2,1,16x16x16,"));
    assert_eq!(divlam(&["analyze", "--sweep", "speed=1"]).0, EXIT_VALIDATION);
}

#[test]
fn search_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"K": [[[0,0],[0,0]], [[1,0],[0,1]]], "dims": [4,4]}"#, 2),
        (r#"{"K": [[[0,0],[0,0]], [[1,0],[0,0]]], "dims": [4,4]}"#, 16),
        (
            r#"{"K": [[[0,0,0],[0,0,0],[0,0,0]], [[1,0,0],[0,1,0],[0,0,1]],
                      [[-0.5,0,0],[0,3,0],[0,0,0.6666666666666666]]], "dims": [2,2,2]}"#,
            3,
        ),
    ];
    for (i, (spec, count)) in cases.iter().enumerate() {
        let p = write(dir.path(), &format!("k{i}.json"), spec);
        let (code, out, err) = divlam(&["search", &p, "--witnesses", "2"]);
        assert_eq!(code, EXIT_OK, "{err}");
        let v = json(&out);
        assert_eq!(v["solutions"].as_u64().unwrap(), *count);
        assert_eq!(v["exhausted"], Value::Bool(true));
        assert_eq!(v["witnesses"].as_array().unwrap().len(), 2);
    }
    let p = write(dir.path(), "budget.json", cases[1].0);
    let v = json(&divlam(&["search", &p, "--limit", "5"]).1);
    assert_eq!(v["exhausted"], Value::Bool(false));
    let bad = write(dir.path(), "bad.json", r#"{"K": [[[0,0],[0,0]]], "dims": [1,4]}"#);
    assert_eq!(divlam(&["search", &bad]).0, EXIT_VALIDATION);
}

#[test]
fn outputs_are_byte_identical_across_thread_counts() {
    let args = ["laminate", "--grid", "8,8,8", "--samples", "50000", "--seed", "7"];
    let one = divlam(&[&["--threads", "1"], &args[..]].concat());
    let three = divlam(&[&["--threads", "3"], &args[..]].concat());
    assert_eq!(one.0, EXIT_OK);
    assert_eq!(one.1, three.1);
    let again = divlam(&[&["--threads", "1"], &args[..]].concat());
    assert_eq!(one.1, again.1);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_divlam");
    let ok = Command::new(bin).args(["construct"]).output().unwrap();
    assert_eq!(ok.status.code(), Some(EXIT_OK));
    let bad = Command::new(bin).args(["construct", "--q", "0,0.5,0.5"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_VALIDATION));
    let big = Command::new(bin)
        .args(["laminate", "--grid", "100000,100000,100000"])
        .env("DIVLAM_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(big.status.code(), Some(EXIT_RESOURCE));
}
