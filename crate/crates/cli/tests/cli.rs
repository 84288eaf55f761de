use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn funcgls(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_funcgls"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Smooth pseudo-random curves on 21 points and responses with AR(1) noise.
fn toy(dir: &Path, n: usize) {
    let m = 21;
    let mut state: u64 = 12345;
    let mut unif = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let ts: Vec<f64> = (0..m).map(|j| j as f64 / (m - 1) as f64).collect();
    let header = format!(
        "id,{}",
        ts.iter()
            .map(|t| t.to_string())
            .collect::<Vec<_>>()
            .join(",")
    );
    let mut x = vec![header.clone()];
    let mut y = vec!["id,y".to_string()];
    let mut e = 0.0;
    for i in 0..n {
        let a = [unif() * 4.0, unif() * 2.0, unif()];
        let curve: Vec<f64> = ts
            .iter()
            .map(|t| a[0] * t + a[1] * (3.0 * t).sin() + a[2] * (7.0 * t).cos())
            .collect();
        e = 0.5 * e + 0.1 * unif();
        let signal: f64 = curve
            .iter()
            .zip(&ts)
            .map(|(v, t)| v * (1.0 + t))
            .sum::<f64>()
            / m as f64;
        x.push(format!(
            "c{i},{}",
            curve
                .iter()
                .map(|v| format!("{v:.6}"))
                .collect::<Vec<_>>()
                .join(",")
        ));
        y.push(format!("c{i},{:.6}", signal + e));
    }
    fs::write(dir.join("x.csv"), x.join("\n") + "\n").unwrap();
    fs::write(dir.join("y.csv"), y.join("\n") + "\n").unwrap();
    fs::write(dir.join("y_short.csv"), y[..n].join("\n") + "\n").unwrap();
    fs::write(
        dir.join("new.csv"),
        [header, x[1].clone(), x[2].clone()].join("\n") + "\n",
    )
    .unwrap();
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

#[test]
fn fit_writes_summary_and_beta() {
    let d = TempDir::new().unwrap();
    toy(d.path(), 40);
    let o = funcgls(
        d.path(),
        &["fit", "--x", "x.csv", "--y", "y.csv", "--out", "fit"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(d.path().join("fit/summary.csv")).unwrap();
    assert!(summary.starts_with("key,value\nmethod,GLS\n"), "{summary}");
    let beta = fs::read_to_string(d.path().join("fit/beta.csv")).unwrap();
    assert_eq!(beta.lines().count(), 22);
    assert!(beta.starts_with("t,beta_1\n"));
}

#[test]
fn fit_flags_override_config() {
    let d = TempDir::new().unwrap();
    toy(d.path(), 40);
    fs::write(d.path().join("fit.cfg"), "method = gls\nk = 1..3\n").unwrap();
    let o = funcgls(
        d.path(),
        &[
            "fit", "--config", "fit.cfg", "--method", "lm", "--x", "x.csv", "--y", "y.csv",
            "--format", "markdown",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary = fs::read_to_string(d.path().join("summary.md")).unwrap();
    assert!(summary.contains("| method | LM |"), "{summary}");
    assert!(summary.contains("| covariance | identity |"), "{summary}");
}

#[test]
fn malformed_csv_names_the_line() {
    let d = TempDir::new().unwrap();
    toy(d.path(), 10);
    fs::write(
        d.path().join("bad.csv"),
        "id,0,0.5,1\nc0,1,2,3\nc1,1,abc,3\n",
    )
    .unwrap();
    let o = funcgls(d.path(), &["fit", "--x", "bad.csv", "--y", "y.csv"]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("bad.csv: parse error at line 3"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn length_mismatch_is_an_input_error() {
    let d = TempDir::new().unwrap();
    toy(d.path(), 20);
    let o = funcgls(d.path(), &["fit", "--x", "x.csv", "--y", "y_short.csv"]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("response/covariate length mismatch"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn degenerate_design_is_a_numerical_error() {
    let d = TempDir::new().unwrap();
    let rows: Vec<String> = (0..10).map(|i| format!("c{i},1,1,1")).collect();
    fs::write(
        d.path().join("x.csv"),
        format!("id,0,0.5,1\n{}\n", rows.join("\n")),
    )
    .unwrap();
    let y: String = (0..10).map(|i| format!("{i}\n")).collect();
    fs::write(d.path().join("y.csv"), format!("y\n{y}")).unwrap();
    let o = funcgls(d.path(), &["fit", "--x", "x.csv", "--y", "y.csv"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn bad_flags_and_values() {
    let d = TempDir::new().unwrap();
    toy(d.path(), 20);
    assert_eq!(
        code(&funcgls(
            d.path(),
            &["fit", "--x", "x.csv", "--y", "y.csv", "--bogus"]
        )),
        2
    );
    assert_eq!(code(&funcgls(d.path(), &["frobnicate"])), 2);
    let o = funcgls(
        d.path(),
        &[
            "fit",
            "--x",
            "x.csv",
            "--y",
            "y.csv",
            "--covariance",
            "arma",
        ],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--covariance"), "{}", stderr(&o));
    let o = funcgls(d.path(), &["fit", "--x", "missing.csv", "--y", "y.csv"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.csv"));
}

#[test]
fn predict_one_row_per_horizon() {
    let d = TempDir::new().unwrap();
    toy(d.path(), 40);
    let args = [
        "predict",
        "--x",
        "x.csv",
        "--y",
        "y.csv",
        "--new",
        "new.csv",
        "--horizons",
        "1,3",
    ];
    let o = funcgls(d.path(), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let p = fs::read_to_string(d.path().join("predictions.csv")).unwrap();
    let lines: Vec<&str> = p.lines().collect();
    assert_eq!(lines[0], "horizon,prediction,sd,regression,correction");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("3,"));
    let o = funcgls(
        d.path(),
        &[
            "predict",
            "--x",
            "x.csv",
            "--y",
            "y.csv",
            "--new",
            "new.csv",
            "--horizons",
            "1",
        ],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

const SMOKE: [&str; 5] = ["scenario=A", "snr=0.05", "phi=0.9", "B=10", "basis=fpc"];

#[test]
fn simulate_smoke_and_determinism() {
    let d = TempDir::new().unwrap();
    let run = |out: &str| {
        let mut args = vec!["simulate", "--seed", "7", "--out", out];
        args.extend(SMOKE);
        let o = funcgls(d.path(), &args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        files(&d.path().join(out))
    };
    let a = run("a");
    for t in 1..=4 {
        assert!(a.contains_key(&format!("table{t}.csv")));
    }
    let manifest = String::from_utf8(a["manifest.txt"].clone()).unwrap();
    assert!(manifest.contains("seed = 7"));
    assert!(manifest.contains("funcgls 0.1.0"));
    assert_eq!(a, run("b"));

    let mut args = vec![
        "simulate", "--seed", "7", "--out", "md", "--format", "markdown",
    ];
    args.extend(SMOKE);
    assert_eq!(code(&funcgls(d.path(), &args)), 0);
    assert!(d.path().join("md/table2.md").exists());
}

#[test]
fn simulate_rejects_bad_configs() {
    let d = TempDir::new().unwrap();
    let o = funcgls(d.path(), &["simulate", "--seed", "1", "phi=1.2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("phi out of (−1,1)"), "{}", stderr(&o));
    fs::write(d.path().join("sim.cfg"), "snr = 0.1\nfoo = 1\n").unwrap();
    let o = funcgls(
        d.path(),
        &["simulate", "--seed", "1", "--config", "sim.cfg"],
    );
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("line 2: unknown key \"foo\""),
        "{}",
        stderr(&o)
    );
    let o = funcgls(d.path(), &["simulate", "B=2"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("--seed is required"));
    assert!(!d.path().join("table1.csv").exists());
}

#[test]
fn dcor_tables() {
    let d = TempDir::new().unwrap();
    toy(d.path(), 30);
    let o = funcgls(
        d.path(),
        &["dcor", "--covariate", "x=x.csv", "--response", "y=y.csv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = fs::read_to_string(d.path().join("dcor.csv")).unwrap();
    let lines: Vec<&str> = t.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("x,1,"), "{t}");

    let o = funcgls(
        d.path(),
        &[
            "dcor",
            "--scalar",
            "y=y.csv",
            "--response",
            "same=y.csv",
            "--format",
            "md",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let t = fs::read_to_string(d.path().join("dcor.md")).unwrap();
    assert!(t.contains("| y | 1.00 | 1.00 |"), "{t}");

    fs::write(
        d.path().join("short.csv"),
        fs::read_to_string(d.path().join("y_short.csv")).unwrap(),
    )
    .unwrap();
    let o = funcgls(
        d.path(),
        &[
            "dcor",
            "--covariate",
            "x=x.csv",
            "--response",
            "y=short.csv",
        ],
    );
    assert_eq!(code(&o), 2);
    let o = funcgls(
        d.path(),
        &["dcor", "--covariate", "x.csv", "--response", "y=y.csv"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn roll_synthetic_panel() {
    let d = TempDir::new().unwrap();
    let run = |out: &str| {
        let o = funcgls(
            d.path(),
            &[
                "roll",
                "--seed",
                "2",
                "--out",
                out,
                "n_train=30",
                "origins=8",
                "models=temp; hum",
            ],
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        files(&d.path().join(out))
    };
    let a = run("a");
    let table = String::from_utf8(a["rolling.csv"].clone()).unwrap();
    assert_eq!(table.lines().count(), 3, "{table}");
    assert!(table.starts_with("Model,Covariates,n+1 FLM,n+1 FGLS"));
    assert_eq!(a, run("b"));

    assert_eq!(code(&funcgls(d.path(), &["roll", "n_train=30"])), 2);
    let o = funcgls(d.path(), &["roll", "--seed", "1", "panel_phi=1.5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("phi out of (−1,1)"));
    assert_eq!(
        code(&funcgls(d.path(), &["roll", "--seed", "1", "window=2"])),
        2
    );
}

#[test]
fn roll_panel_files() {
    let d = TempDir::new().unwrap();
    let mut rates = vec!["group,week,rate".to_string()];
    let mut temp = vec!["group,week,0,0.5,1".to_string()];
    for g in ["a", "b"] {
        for w in 1..=30 {
            let x = (w as f64 * 0.7).sin() + if g == "a" { 0.0 } else { 1.0 };
            rates.push(format!("{g},{w},{}", 2.0 * x + 0.1 * ((w * 13 % 7) as f64)));
            temp.push(format!("{g},{w},{x},{},{}", x + 0.3, x * 0.5));
        }
    }
    fs::write(d.path().join("rates.csv"), rates.join("\n") + "\n").unwrap();
    fs::write(d.path().join("temp.csv"), temp.join("\n") + "\n").unwrap();
    let o = funcgls(
        d.path(),
        &[
            "roll",
            "--seed",
            "0",
            "--rates",
            "rates.csv",
            "--covariate",
            "temp=temp.csv",
            "--lag-rate",
            "3",
            "n_train=12",
            "origins=5",
            "k=1..2",
            "models=temp; rate+temp",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let f = fs::read_to_string(d.path().join("forecasts.csv")).unwrap();
    let g = fs::read_to_string(d.path().join("gaps.csv")).unwrap();
    // 2 sets × 5 origins × 2 groups × 2 horizons; early lagged-rate windows are incomplete
    assert_eq!(f.lines().count() + g.lines().count(), 2 + 40, "{f}{g}");
    assert!(g.lines().skip(1).all(|l| l.starts_with("(b),")), "{g}");
    assert!(f.lines().filter(|l| l.starts_with("(a),")).count() == 20);
}
