use std::path::Path;
use std::process::{Command, Output};

fn d2dpl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d2dpl")).args(args).output().expect("binary runs")
}

fn d2dpl_threads(threads: &str, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_d2dpl"))
        .env("D2DPL_THREADS", threads)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(csv: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# d2dpl "));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let data = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().unwrap()).collect())
        .collect();
    (header, data)
}

fn numeric_part(csv: &str) -> String {
    csv.lines().skip(1).collect::<Vec<_>>().join("\n")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compare_sweep_columns() {
    let out = stdout(&d2dpl(&["compare", "--lambda-d-range", "0.001:0.01:10", "--n-grid", "500"]));
    let (header, data) = rows(&out);
    assert_eq!(header, ["lambda_d", "mean_power_independent", "mean_power_dependent", "ratio"]);
    assert_eq!(data.len(), 10);
    assert_eq!(data[0][0], 0.001);
    assert_eq!(data[9][0], 0.01);
    for r in &data {
        if r[1].is_finite() && r[2].is_finite() {
            assert!((r[3] - r[2] / r[1]).abs() <= 1e-10 * r[3]);
        } else {
            assert!(r[3].is_nan());
        }
    }
    // The highest densities are outside both regions at the default lambda_c.
    assert!(data[9][1].is_nan() && data[9][2].is_nan());
}

#[test]
fn independent_boundary_intercept() {
    let out = stdout(&d2dpl(&["feasibility-independent", "--pdmax", "inf", "--points", "5"]));
    let (header, data) = rows(&out);
    assert_eq!(header, ["lambda_c", "lambda_d"]);
    let delta = 0.75f64;
    // Gamma(1 + d) Gamma(1 - d) = pi d / sin(pi d)
    let phi = std::f64::consts::PI * 0.1f64.powf(delta) * std::f64::consts::PI * delta
        / (std::f64::consts::PI * delta).sin();
    let q_c = -(0.99f64).ln();
    let last = data.last().unwrap();
    assert_eq!(last[1], 0.0);
    assert!((last[0] - q_c / phi).abs() < 1e-10 * last[0], "{} vs {}", last[0], q_c / phi);
    assert_eq!(data[0][0], 0.0);
}

#[test]
fn reversed_sweep_is_a_config_error() {
    let o = d2dpl(&["compare", "--lambda-d-range", "0.01:0.001:10"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("lambda_d_range") && err.contains("below"), "{err}");
}

#[test]
fn infeasible_densities_exit_two_with_region() {
    let o = d2dpl(&["optimize-dependent", "--lambda-d", "0.01", "--n-grid", "100"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("region:") && err.contains("lambda_c"), "{err}");

    let o = d2dpl(&["optimize-independent", "--lambda-d", "0.004", "--pdmax", "0.2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_values_and_files_exit_one() {
    for args in [
        &["compare", "--eps-c", "2"][..],
        &["simulate", "--pc", "sometimes"],
        &["convergence", "--n-list", "500,x"],
        &["compare", "--format", "xml"],
    ] {
        let o = d2dpl(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "scenario = \"compare\"\nlambda_c = 0.001\nalpha = \"steep\"\n").unwrap();
    let o = d2dpl(&["--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("c.toml:3") && err.contains("alpha"), "{err}");

    let o = d2dpl_threads("zero", &["feasibility-dependent"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "scenario = \"optimize-independent\"\nlambda_d = 0.002\nn_grid = 4\n").unwrap();
    let from_file = stdout(&d2dpl(&["--config", path_str(&cfg)]));
    let overridden = stdout(&d2dpl(&["--config", path_str(&cfg), "--lambda-d", "0.001"]));
    let p_file = rows(&from_file).1[0][1];
    let p_flag = rows(&overridden).1[0][1];
    assert!(p_file > p_flag);
    assert!(overridden.contains("lambda_d=0.001 "));
}

#[test]
fn theta_db_is_converted() {
    let a = stdout(&d2dpl(&["feasibility-dependent", "--theta-db", "-10", "--points", "3"]));
    let b = stdout(&d2dpl(&["feasibility-dependent", "--points", "3"]));
    assert_eq!(rows(&a).1, rows(&b).1);
}

#[test]
fn header_round_trip_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &["simulate", "--trials", "20000", "--seed", "42", "--lambda-d-range", "0.001:0.002:2", "--pd", "frac:0.5,0.5", "--control", "dependent"],
        &["compare", "--lambda-d-range", "0.001:0.004:4", "--n-grid", "200", "--alpha", "3.3"],
        &["feasibility-dependent", "--s-range", "0:1:5", "--pc", "frac:2,0.5", "--points", "7"],
        &["convergence", "--n-list", "50,100", "--lambda-d", "0.002", "--theta-db", "-7"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let first = dir.path().join(format!("a{i}.csv"));
        let second = dir.path().join(format!("b{i}.csv"));
        let mut a = args.to_vec();
        a.extend(["--out", path_str(&first)]);
        stdout(&d2dpl(&a));
        stdout(&d2dpl(&["--config", path_str(&first), "--out", path_str(&second)]));
        let x = std::fs::read_to_string(&first).unwrap();
        let y = std::fs::read_to_string(&second).unwrap();
        assert_eq!(x, y, "{args:?}");
    }
}

#[test]
fn simulation_is_deterministic_across_thread_counts() {
    let args = ["simulate", "--trials", "50000", "--seed", "7", "--lambda-d", "0.003"];
    let one = stdout(&d2dpl_threads("1", &args));
    let four = stdout(&d2dpl_threads("4", &args));
    assert_eq!(numeric_part(&one), numeric_part(&four));
    let other_seed = stdout(&d2dpl_threads("4", &["simulate", "--trials", "50000", "--seed", "8", "--lambda-d", "0.003"]));
    assert_ne!(numeric_part(&one), numeric_part(&other_seed));
}

#[test]
fn json_output() {
    let out = stdout(&d2dpl(&["compare", "--lambda-d-range", "0.004:0.008:2", "--n-grid", "100", "--format", "json"]));
    assert!(out.contains("\"columns\""));
    assert!(out.contains("\"nan\""));
    assert!(out.contains("\"seed\": \"0\""));
}

#[test]
fn dependent_policy_rows() {
    let out = stdout(&d2dpl(&["optimize-dependent", "--n-grid", "100", "--lambda-d", "0.003"]));
    let (header, data) = rows(&out);
    assert_eq!(header, ["h_lo", "h_hi", "power"]);
    assert_eq!(data.len(), 100);
    for w in data.windows(2) {
        assert_eq!(w[0][1], w[1][0]);
    }
    // Deeper fades get more power.
    assert!(data[0][2] > data[99][2]);
}

#[test]
fn scenario_required() {
    let o = d2dpl(&["--lambda-c", "0.001"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scenario"));
}
