use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use halfplane_core::correspondence::{LogGaussian, OperatorKernel};
use halfplane_core::grid::DEFAULT_R;
use halfplane_core::{io, make_grid, GeometricGrid, Signal, TimeGrid};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_halfplane"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = run(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn grid() -> GeometricGrid {
    make_grid(0.05, 5.0, 64, DEFAULT_R).unwrap()
}

fn signal(dir: &Path) -> PathBuf {
    let lg = LogGaussian { f0: 0.6, sigma_log: 0.3, t0: 0.5, sigma_t: 1.0 };
    let p = dir.join("s.csv");
    io::write_signal(&p, &lg.signal(grid())).unwrap();
    p
}

/// Smooth symbol on a rectangle short enough that `u`-sampling does not alias in `t`.
fn symbol(dir: &Path, name: &str, f0: f64, t0: f64) -> PathBuf {
    let lg = LogGaussian { f0, sigma_log: 0.35, t0, sigma_t: 1.1 };
    let g = make_grid(0.3, 3.0, 96, DEFAULT_R).unwrap();
    let p = dir.join(name);
    io::write_symbol(&p, &lg.phase_symbol(TimeGrid::new(-5.0, 5.0, 64).unwrap(), g)).unwrap();
    p
}

fn rel(a: &halfplane_core::PhaseSymbol, b: &halfplane_core::PhaseSymbol) -> f64 {
    a.zip_with(b, |x, y| x - y).unwrap().l2() / b.l2()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

const T: [&str; 6] = ["--tmin", "-6", "--tmax", "6", "--ntime", "48"];

#[test]
fn wigner_writes_symbol_and_report() {
    let d = tempfile::tempdir().unwrap();
    let s = signal(d.path());
    let mut args = vec!["wigner", "--signal", s.to_str().unwrap(), "--out", "w.csv"];
    args.extend(T);
    ok(d.path(), &args);
    let w = io::read_symbol(&d.path().join("w.csv")).unwrap();
    assert_eq!(w.values.dim(), (48, 64));
    let rep = json(&d.path().join("w_report.json"));
    for key in ["norm", "marginal_error", "max_imag_residual", "truncation_mass"] {
        assert!(rep[key].is_number(), "{key} missing");
    }
    assert!(rep["max_imag_residual"].as_f64().unwrap() < 1e-10);
    // the hash covers the echoed config exactly
    let cfg = serde_json::to_string(&rep["config"]).unwrap();
    let h: String = Sha256::digest(cfg.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(rep["config_hash"], Value::String(h));
    assert_eq!(rep["config"]["params"]["ntime"], 48);
}

#[test]
fn echoed_config_replays_identically() {
    let d = tempfile::tempdir().unwrap();
    let s = signal(d.path());
    let mut args = vec!["wigner", "--signal", s.to_str().unwrap(), "--out", "a.csv"];
    args.extend(T);
    ok(d.path(), &args);
    let rep = json(&d.path().join("a_report.json"));
    let mut cfg = rep["config"].clone();
    cfg["params"]["out"] = Value::String("b.csv".into());
    std::fs::write(d.path().join("cfg.json"), cfg.to_string()).unwrap();
    // flags are overridden by the file
    ok(d.path(), &["wigner", "--config", "cfg.json", "--ntime", "9", "--out", "c.csv"]);
    assert!(!d.path().join("c.csv").exists());
    let a = std::fs::read(d.path().join("a.csv")).unwrap();
    let b = std::fs::read(d.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn serial_and_parallel_are_bit_identical() {
    let d = tempfile::tempdir().unwrap();
    let s = signal(d.path());
    let a = symbol(d.path(), "a.csv", 1.0, 0.3);
    let b = symbol(d.path(), "b.csv", 1.1, -0.4);
    let (s, a, b) = (s.to_str().unwrap(), a.to_str().unwrap(), b.to_str().unwrap());
    for (tag, extra) in [("1", vec!["--serial"]), ("4", vec!["--threads", "4"])] {
        let w = format!("w{tag}.csv");
        let mut args = vec!["wigner", "--signal", s, "--out", &w];
        args.extend(T);
        args.extend(&extra);
        ok(d.path(), &args);
        let st = format!("st{tag}.csv");
        let mut args = vec!["star", "--a", a, "--b", b, "--method", "series", "--out", &st];
        args.extend(&extra);
        ok(d.path(), &args);
    }
    for name in ["w", "st"] {
        let x = std::fs::read(d.path().join(format!("{name}1.csv"))).unwrap();
        let y = std::fs::read(d.path().join(format!("{name}4.csv"))).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn identity_kernel_has_unit_symbol() {
    let d = tempfile::tempdir().unwrap();
    io::write_kernel(&d.path().join("id.bin"), &OperatorKernel::identity(grid())).unwrap();
    ok(d.path(), &["symbol", "--kernel", "id.bin", "--out", "one.csv", "--tmin", "-4", "--tmax", "4", "--ntime", "64"]);
    let one = io::read_symbol(&d.path().join("one.csv")).unwrap();
    for m in 0..64 {
        for n in 3..61 {
            assert!((one.values[[m, n]] - 1.0).norm() < 1e-6, "{m} {n} {}", one.values[[m, n]]);
        }
    }
    assert!(json(&d.path().join("one_report.json"))["truncation"].is_object());
}

#[test]
fn symbol_kernel_symbol_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let a = symbol(d.path(), "a.csv", 1.0, 0.3);
    ok(d.path(), &["kernel", "--symbol", "a.csv", "--out", "k.bin"]);
    assert!(json(&d.path().join("k_report.json"))["hermiticity_residual"].as_f64().unwrap() < 1e-12);
    ok(d.path(), &["symbol", "--kernel", "k.bin", "--out", "back.csv", "--tmin", "-5", "--tmax", "5", "--ntime", "64"]);
    let e = rel(&io::read_symbol(&d.path().join("back.csv")).unwrap(), &io::read_symbol(&a).unwrap());
    assert!(e < 1e-2, "{e}");
}

#[test]
fn star_report_compares_methods() {
    let d = tempfile::tempdir().unwrap();
    symbol(d.path(), "a.csv", 1.0, 0.3);
    symbol(d.path(), "b.csv", 1.1, -0.4);
    let mut errs = Vec::new();
    for order in ["0", "2"] {
        let r = format!("r{order}.json");
        ok(d.path(), &["star", "--a", "a.csv", "--b", "b.csv", "--order", order, "--out", "ab.csv", "--report", &r]);
        let rep = json(&d.path().join(&r));
        assert!(rep["imag_residual"].as_f64().unwrap() < 1e-6, "{rep}");
        errs.push(rep["oracle_error"].as_f64().unwrap());
    }
    assert!(errs[1] < 1e-2 && errs[1] < errs[0] / 5.0, "{errs:?}");
    let o = run(d.path(), &["star", "--a", "a.csv", "--b", "b.csv", "--method", "series", "--order", "9", "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.path().join("x.csv").exists());
}

#[test]
fn flow_writes_one_distribution_per_time() {
    let d = tempfile::tempdir().unwrap();
    let s = signal(d.path());
    let mut args = vec![
        "flow", "--signal", s.to_str().unwrap(), "--mu", "0.3", "--nu", "0.2", "--sigma", "-0.1",
        "--alphas", "0,0.5,1", "--out-prefix", "run_",
    ];
    args.extend(T);
    ok(d.path(), &args);
    for i in 0..3 {
        assert!(d.path().join(format!("run_wigner_{i}.csv")).exists());
    }
    let rep = json(&d.path().join("run_flow_report.json"));
    let samples = rep["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 3);
    assert!(samples[0]["distance"].as_f64().unwrap() < 1e-12);
    assert!(rep["max_distance"].is_number());
}

#[test]
fn gk_modes_and_degenerate_k() {
    let d = tempfile::tempdir().unwrap();
    let s = signal(d.path());
    let s = s.to_str().unwrap();
    let mut args = vec!["gk", "--k", "1e-4", "--mode", "wigner", "--signal", s, "--out", "g.csv"];
    args.extend(T);
    ok(d.path(), &args);
    let mut args = vec!["wigner", "--signal", s, "--out", "w.csv"];
    args.extend(T);
    ok(d.path(), &args);
    let g = io::read_symbol(&d.path().join("g.csv")).unwrap();
    let w = io::read_symbol(&d.path().join("w.csv")).unwrap();
    let diff = g.zip_with(&w, |a, b| a - b).unwrap().l2() / w.l2();
    assert!(diff < 1e-3, "{diff}");

    io::write_kernel(&d.path().join("id.bin"), &OperatorKernel::identity(grid())).unwrap();
    for mode in ["symbol", "dual"] {
        ok(d.path(), &["gk", "--k", "2", "--beta0", "0.3", "--mode", mode, "--kernel", "id.bin", "--out", "k.csv"]);
    }

    let o = run(d.path(), &["gk", "--k", "1", "--mode", "wigner", "--signal", s, "--out", "one.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("k:") && err.contains("degenerate"), "{err}");
    assert!(!d.path().join("one.csv").exists());
}

#[test]
fn unknown_flag_exits_2_and_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let s = signal(d.path());
    let before = listing(d.path());
    let o = run(d.path(), &["wigner", "--signal", s.to_str().unwrap(), "--out", "w.csv", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(listing(d.path()), before);
    let o = run(d.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_name_the_field() {
    let d = tempfile::tempdir().unwrap();
    let s = signal(d.path());
    let s = s.to_str().unwrap();
    let cases = [
        (r#"{"command":"wigner","params":{"ntimes":3}}"#, "ntimes"),
        (r#"{"command":"wigner","params":{"ntime":"many"}}"#, "params"),
        (r#"{"command":"star","params":{}}"#, "command"),
        (r#"{"command":"wigner","threads":0,"params":{}}"#, "threads"),
        (r#"{"command":"wigner","params":{},"colour":1}"#, "colour"),
    ];
    for (text, field) in cases {
        std::fs::write(d.path().join("c.json"), text).unwrap();
        let before = listing(d.path());
        let o = run(d.path(), &["wigner", "--config", "c.json", "--signal", s, "--out", "w.csv"]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(field), "{text}: {err}");
        assert_eq!(listing(d.path()), before);
    }
    let o = run(d.path(), &["wigner", "--signal", s]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("out"));
    let o = run(d.path(), &["wigner", "--signal", "missing.csv", "--out", "w.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_report_and_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let o = ok(d.path(), &["selftest", "--quick", "--only", "1,9", "--report", "r.json"]);
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(out.lines().filter(|l| l.starts_with("[PASS]")).count(), 2, "{out}");
    let rep = json(&d.path().join("r.json"));
    assert_eq!(rep["passed"], Value::Bool(true));
    assert_eq!(rep["results"].as_array().unwrap().len(), 2);

    let o = run(d.path(), &["selftest", "--quick", "--only", "12"]);
    assert_eq!(o.status.code(), Some(1));
    ok(d.path(), &["selftest", "--quick", "--only", "12", "--expect-known-failures"]);
    let o = run(d.path(), &["selftest", "--only", "13"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn signal_without_sidecar_is_accepted() {
    let d = tempfile::tempdir().unwrap();
    let s = signal(d.path());
    std::fs::remove_file(io::sidecar_path(&s)).unwrap();
    let mut args = vec!["wigner", "--signal", "s.csv", "--out", "w.csv"];
    args.extend(T);
    ok(d.path(), &args);
    let read: Signal = io::read_signal(&s).unwrap();
    assert_eq!(read.len(), 64);
}
