use std::fs;
use std::process::{Command, Output};

fn esac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_esac"))
        .args(args)
        .env_remove("ESAC_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn report_value(report: &str, key: &str) -> f64 {
    report
        .lines()
        .find_map(|l| l.strip_prefix(key))
        .and_then(|rest| rest.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("no `{key}` in\n{report}"))
}

#[test]
fn certify_worked_example_is_certified() {
    let o = esac(&["certify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = stdout(&o);
    assert!(report_value(&report, "spectral_radius") < 1.0);
    assert!((report_value(&report, "psi") - 0.998036693521).abs() < 1e-9);
    assert!(report.contains("CERTIFIED STABLE"));
    assert!(report.contains("bound "));
}

#[test]
fn certify_single_law_is_not_certified() {
    let o = esac(&["certify", "--set", "scheme=A1"]);
    assert_eq!(o.status.code(), Some(2));
    let report = stdout(&o);
    assert!(report_value(&report, "spectral_radius") > 1.0);
    assert!(report_value(&report, "omega") > 1.0);
    assert!(report.contains("NOT CERTIFIED"));
}

#[test]
fn certify_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("q2.cfg");
    fs::write(&cfg, "# second configuration\nscheme = A2\neta = 3\nq = 0.5\np = 0.2 0.2 0.2 0.2 0.2\nrho1 = 0.9\nepsilon = 0.5\n").unwrap();
    let o = esac(&["certify", "-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = esac(&["certify", "-c", cfg.to_str().unwrap(), "-s", "alpha=1.2"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn configuration_errors_exit_one_with_location() {
    let o = esac(&["certify", "--set", "q=1.5"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("`q`") && err.contains("[0, 1]"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "q = 0.5\nbuffer = 3\n").unwrap();
    let o = esac(&["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = esac(&["certify", "--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = esac(&["sweep", "--set", "scheme=B1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = esac(&["--threads", "0", "sweep"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(esac(&["--threads", "1", "sweep", "-o", a.to_str().unwrap()]).status.success());
    assert!(esac(&["--threads", "4", "sweep", "-s", &format!("output={}", b.display())]).status.success());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rho1,alpha_star_closed,alpha_star_spectral");
    assert_eq!(lines.len(), 20);
    assert!(!text.contains('\r'));
    let q1: Vec<f64> = lines
        .iter()
        .find(|l| l.starts_with("0.9,"))
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert!((q1[1] - 1.3527).abs() < 1e-3 && (q1[1] - q1[2]).abs() < 1e-6);
}

#[test]
fn simulate_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let t = dir.path().join("t.csv");
    let base = ["simulate", "-s", "runs=500", "-s", "horizon=50", "-s", "seed=3"];
    let mut args_a = vec!["--threads", "1"];
    args_a.extend(base);
    args_a.extend(["-o", a.to_str().unwrap(), "--trajectory", t.to_str().unwrap()]);
    assert!(esac(&args_a).status.success());
    let mut args_b = vec!["--threads", "3"];
    args_b.extend(base);
    args_b.extend(["-o", b.to_str().unwrap()]);
    assert!(esac(&args_b).status.success());
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("k,mean_v,trigger_rate\n0,20,1\n"));
    assert_eq!(text.lines().count(), 52);
    let traj = fs::read_to_string(&t).unwrap();
    assert!(traj.starts_with("k,x,u,gamma,N,F,C,v\n0,20,"));
    assert_eq!(traj.lines().count(), 51);
}

#[test]
fn example1_prints_matching_traces() {
    let o = esac(&["example1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("k2(x0)") && text.contains("k1(f(x0, k2(x0)))") && text.contains("k2(x2)"));
    assert!(text.contains("scheme A1") && text.contains("scheme A2"));
    assert!(!text.contains("MISMATCH"));
}

#[test]
fn selftest_reports_every_criterion() {
    let o = esac(&["selftest"]);
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).count(), 7);
    assert_eq!(o.status.code(), Some(if text.contains("[FAIL]") { 1 } else { 0 }));
}
