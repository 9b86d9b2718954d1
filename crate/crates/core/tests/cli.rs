use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.cfg"))
}

fn saddlecert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddlecert")).args(args).output().expect("binary runs")
}

fn run_fixture(cmd: &str, name: &str, extra: &[&str]) -> Output {
    let cfg = fixture(name);
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(extra);
    saddlecert(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analyze_pd2_reports_single_direct_saddle() {
    let o = run_fixture("analyze", "pd2", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("fixed points: 1\n"), "{s}");
    assert!(s.contains("(0, 0) DIRECT_SADDLE"), "{s}");
    assert!(s.contains("index -1"), "{s}");
    assert!(s.contains("symmetry: D2 "), "{s}");
}

#[test]
fn analyze_twisted_lists_three_period_two_points() {
    let o = run_fixture("analyze", "twisted", &[]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("Fix(f^2): 3 points"), "{s}");
    assert_eq!(s.matches(" period-2").count(), 2, "{s}");
}

#[test]
fn malformed_expression_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let good = std::fs::read_to_string(fixture("pd2")).unwrap();
    let line = good.lines().position(|l| l.starts_with("x = ")).unwrap() + 1;
    let text = good.replace("\"2*x*(1+y^2)\"", "\"2*x*(1+y^2\"");
    let path = dir.path().join("bad.cfg");
    std::fs::write(&path, text).unwrap();
    let o = saddlecert(&["analyze", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains(&format!("line {line}: [map] x: syntax error at byte 10")), "{e}");
}

#[test]
fn certify_exit_codes() {
    let o = run_fixture("certify", "pd2", &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("rule: d2-spectrum-gap/a"));
    assert!(stdout(&o).contains("schema=cert-v1"));

    let o = run_fixture("certify", "twisted", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("fix-f2-trivial           REFUTED witness (1, 0)"), "{}", stdout(&o));

    let o = run_fixture("certify", "linear", &[]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn certify_writes_key_value_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("certify", "phi_twisted", &["--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let cert = std::fs::read_to_string(dir.path().join("certificate.cert")).unwrap();
    assert!(cert.starts_with("schema=cert-v1\nmap=phi-twisted\nverdict=GLOBAL_SADDLE\n"), "{cert}");
    assert!(cert.contains("\nscope=region-bounded\n"));
    assert!(cert.contains("\nrule=d2-spectrum-gap/b\n"));
    assert!(cert.contains("\nrule.no-period-two-saddle.satisfied=true\n"));
    assert!(!cert.contains('\r'));
}

#[test]
fn manifolds_csv_has_branch_columns() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("manifolds", "linear", &["--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("manifolds.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("branch,idx,x,y"));
    for l in lines {
        let cols: Vec<&str> = l.split(',').collect();
        assert_eq!(cols.len(), 4, "{l}");
        for c in &cols[2..] {
            let mantissa = c.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.len(), 18, "{c} does not carry 17 significant digits");
            c.parse::<f64>().unwrap();
        }
    }
    for b in ["STABLE_PLUS", "STABLE_MINUS", "UNSTABLE_PLUS", "UNSTABLE_MINUS"] {
        assert!(csv.contains(&format!("\n{b},0,")));
    }
}

fn assert_same_files(a: &Path, b: &Path, names: &[&str]) {
    for n in names {
        let x = std::fs::read(a.join(n)).unwrap();
        let y = std::fs::read(b.join(n)).unwrap();
        assert!(x == y, "{n} differs");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let out = out.to_str().unwrap();
        assert_eq!(run_fixture("certify", "twisted", &["--out", out, "--seed", "7"]).status.code(), Some(1));
        assert_eq!(run_fixture("portrait", "twisted", &["--out", out, "--seed", "7"]).status.code(), Some(0));
    }
    assert_same_files(&a, &b, &["certificate.cert", "portrait.csv", "portrait.svg"]);
}

#[test]
fn portrait_renders_manifolds_and_markers() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_fixture("portrait", "twisted", &["--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let svg = std::fs::read_to_string(dir.path().join("portrait.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains(r#"class="stable""#) && svg.contains(r#"class="unstable""#));
    assert!(svg.contains(r#"class="orbit""#));
    assert!(svg.contains("TWISTED_SADDLE"));
    assert_eq!(svg.matches("period 2 (").count(), 2);
    let csv = std::fs::read_to_string(dir.path().join("portrait.csv")).unwrap();
    assert!(csv.starts_with("branch,idx,x,y\n"));
}

#[test]
fn portrait_output_errors() {
    assert_eq!(run_fixture("portrait", "linear", &[]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "").unwrap();
    let o = run_fixture("portrait", "linear", &["--out", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn usage_errors() {
    assert_eq!(saddlecert(&["--help"]).status.code(), Some(0));
    assert_eq!(saddlecert(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(saddlecert(&["analyze"]).status.code(), Some(2));
    assert_eq!(saddlecert(&["analyze", "--config", "/nonexistent.cfg"]).status.code(), Some(2));
    assert_eq!(run_fixture("analyze", "linear", &["--region", "1,0,0,1"]).status.code(), Some(2));
    assert_eq!(run_fixture("poincare", "linear", &[]).status.code(), Some(2));
}

#[test]
fn region_flag_overrides_config() {
    let o = run_fixture("analyze", "twisted", &["--region", "-0.5,0.5,-0.5,0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("region: [-0.5, 0.5] x [-0.5, 0.5]"), "{s}");
    assert!(s.contains("Fix(f^2): 1 points"), "{s}");
}

#[test]
fn poincare_reports_lienard_orbit() {
    let o = run_fixture("poincare", "lienard", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    for id in ["A1", "A2", "A3", "A4"] {
        assert!(s.contains(&format!("  {id} VERIFIED_ON_SAMPLES")), "{s}");
    }
    assert!(s.contains("(ok)"), "{s}");
    assert!(s.contains("split in sign at all 257 samples: true"), "{s}");
}
