use std::path::Path;
use std::process::{Command, Output};

use polystab::basis::BasisSpec;
use polystab::experiment;
use polystab::verify::Certificate;

fn poly_stab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poly-stab"))
        .args(args)
        .current_dir(dir)
        .env("POLY_STAB_LOG", "error")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate_integrator(dir: &Path) {
    let o = poly_stab(
        &[
            "simulate",
            "--system",
            "integrator",
            "--x0",
            "0.5",
            "--tau",
            "0.1",
            "--T",
            "4",
            "-o",
            "int.csv",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

fn synthesize_integrator(dir: &Path, out: &str, method: &str) -> Output {
    poly_stab(
        &[
            "synthesize",
            "int.csv",
            "--basis",
            "deg:1-1",
            "--zhat",
            "deg:1",
            "--method",
            method,
            "--out-dir",
            out,
        ],
        dir,
    )
}

#[test]
fn simulate_prints_every_output_and_rank_warning() {
    let dir = tempfile::tempdir().unwrap();
    let o = poly_stab(
        &[
            "simulate",
            "--system",
            "vanderpol",
            "--x0",
            "-0.1,0.1",
            "--T",
            "1",
            "-o",
            "one.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("rank(Z0) = 1 < rank(H) = 2"), "{text}");
    assert!(text.contains("wrote one.csv"));
    assert!(text.contains("wrote one.bounds.json"));
    assert!(dir.path().join("one.csv").exists());
    assert!(dir.path().join("one.bounds.json").exists());
}

#[test]
fn noiseless_simulation_has_zero_noise() {
    let dir = tempfile::tempdir().unwrap();
    let o = poly_stab(
        &[
            "simulate", "--system", "linear1d", "--x0", "0.3", "--tau", "0.1", "--T", "5", "--noise", "none", "-o",
            "d.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let spec = BasisSpec::new(1, 1, 1, 3, 1, None).unwrap();
    let ds = experiment::ingest(&dir.path().join("d.csv"), &spec).unwrap();
    assert!(ds.d0.unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn unknown_system_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = poly_stab(
        &["simulate", "--system", "lorenz", "--x0", "1", "-o", "x.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown system"));
}

#[test]
fn synthesize_then_verify_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    simulate_integrator(dir.path());
    let o = synthesize_integrator(dir.path(), "out", "cor1,thm2");
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    for f in [
        "out/certificate_cor1.json",
        "out/certificate_thm2.json",
        "out/report.txt",
        "out/report.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
        assert!(text.contains(&format!("wrote {f}")), "{text}");
    }
    assert!(text.contains("cor1 vs thm2"));

    let v = poly_stab(
        &[
            "verify",
            "out/certificate_cor1.json",
            "--system",
            "integrator",
            "--samples",
            "500",
            "--out-dir",
            "ver",
        ],
        dir.path(),
    );
    assert!(v.status.success(), "{}\n{}", stdout(&v), stderr(&v));
    let vt = stdout(&v);
    assert!(vt.contains("verify: pass"));
    assert!(dir.path().join("ver/audit.json").exists());
    assert!(dir.path().join("ver/trajectory_00.csv").exists());
    let csv = std::fs::read_to_string(dir.path().join("ver/trajectory_00.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,x1,u1,V"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    simulate_integrator(dir.path());
    assert!(synthesize_integrator(dir.path(), "a", "cor1").status.success());
    assert!(synthesize_integrator(dir.path(), "b", "cor1").status.success());
    let a = std::fs::read(dir.path().join("a/certificate_cor1.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/certificate_cor1.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn corrupted_certificate_fails_audit() {
    let dir = tempfile::tempdir().unwrap();
    simulate_integrator(dir.path());
    assert!(synthesize_integrator(dir.path(), "out", "thm2").status.success());
    let path = dir.path().join("out/certificate_thm2.json");
    let mut cert = Certificate::load(&path).unwrap();
    cert.f = cert.f.scale(-1.0);
    cert.save(&dir.path().join("bad.json")).unwrap();
    let v = poly_stab(
        &[
            "verify",
            "bad.json",
            "--system",
            "integrator",
            "--samples",
            "200",
            "--rings",
            "2",
            "--t-end",
            "1",
            "--out-dir",
            "v",
        ],
        dir.path(),
    );
    assert_eq!(v.status.code(), Some(1), "{}", stdout(&v));
    assert!(stdout(&v).contains("verify: FAIL"));
}

#[test]
fn box_flag_widens_audit_region() {
    let dir = tempfile::tempdir().unwrap();
    simulate_integrator(dir.path());
    assert!(synthesize_integrator(dir.path(), "out", "cor1").status.success());
    let v = poly_stab(
        &[
            "verify",
            "out/certificate_cor1.json",
            "--system",
            "integrator",
            "--box",
            "5",
            "--samples",
            "100",
            "--rings",
            "2",
            "--out-dir",
            "v",
        ],
        dir.path(),
    );
    assert!(v.status.success(), "{}", stdout(&v));
    let audit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("v/audit.json")).unwrap()).unwrap();
    assert_eq!(audit["half_width"], 5.0);
    assert!(stdout(&v).contains("[-5, 5]"));
}

#[test]
fn infeasible_run_exits_nonzero_without_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let o = poly_stab(
        &[
            "simulate",
            "--system",
            "vanderpol",
            "--x0",
            "-0.1,0.1",
            "--input",
            "sin",
            "--t0",
            "0",
            "--tau",
            "0.5",
            "--T",
            "12",
            "--noise",
            "prop:0.05",
            "--bound",
            "snr:0.3162",
            "--seed",
            "0",
            "-o",
            "vdp.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s = poly_stab(
        &[
            "synthesize",
            "vdp.csv",
            "--basis",
            "deg:1-3",
            "--zhat",
            "deg:1",
            "--method",
            "cor1",
            "--out-dir",
            "out",
        ],
        dir.path(),
    );
    assert_eq!(s.status.code(), Some(1));
    assert!(stderr(&s).contains("cor1: infeasible"), "{}", stderr(&s));
    assert!(!dir.path().join("out/certificate_cor1.json").exists());
    assert!(dir.path().join("out/report.txt").exists());
}

#[test]
fn thm1_without_rb_on_non_identity_w_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = poly_stab(
        &[
            "simulate",
            "--system",
            "vanderpol",
            "--x0",
            "-0.1,0.1",
            "--T",
            "12",
            "-o",
            "vdp.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s = poly_stab(
        &["synthesize", "vdp.csv", "--w", "x1^2", "--method", "thm1"],
        dir.path(),
    );
    assert_eq!(s.status.code(), Some(2));
    assert!(stderr(&s).contains("RB"), "{}", stderr(&s));
    assert!(!dir.path().join("certificate_thm1.json").exists());
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "[simulate]\nsystem = \"integrator\"\nx0 = \"0.5\"\ntau = 0.1\nT = 4\noutput = \"int.csv\"\n\n\
         [synthesize]\nbasis = \"deg:1-1\"\nmethod = \"thm2\"\nout_dir = \"from_file\"\n",
    )
    .unwrap();
    let o = poly_stab(&["--config", "run.toml", "simulate"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("int.csv").exists());
    let s = poly_stab(
        &[
            "synthesize",
            "--config",
            "run.toml",
            "int.csv",
            "--method",
            "cor1",
            "--out-dir",
            "from_flag",
        ],
        dir.path(),
    );
    assert!(s.status.success(), "{}", stderr(&s));
    assert!(dir.path().join("from_flag/certificate_cor1.json").exists());
    assert!(!dir.path().join("from_file").exists());
}

#[test]
fn config_parse_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[verify]\nbox = 3\nsamples = \"lots\"\n").unwrap();
    let o = poly_stab(
        &["--config", "bad.toml", "verify", "c.json", "--system", "integrator"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}
