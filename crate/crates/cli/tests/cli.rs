use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--n-samples", "60", "--n-lines", "64", "--delta", "0.015625", "--eps-list", "0.015625,0.03125,0.0625",
];

fn kpzlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpzlab"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env_remove("KPZLAB_SEED")
        .output()
        .unwrap()
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn selftest_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = kpzlab(&["selftest"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(dir.path().join("selftest-1.csv")).unwrap();
    assert!(csv.starts_with("# kpzlab "));
    let rows = data_lines(&csv);
    assert_eq!(rows[0], "check,instances,failures,max_error,tolerance");
    for check in ["oracle-equivalence", "metric-composition", "triangle-inequality", "weight-additivity"] {
        assert!(rows.iter().any(|r| r.starts_with(&format!("{check},"))), "{check} missing");
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("selftest-1.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn variation_schema_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["variation", "--alphas", "1,1.5,2"];
    args.extend(SMALL);
    let first = kpzlab(&args, dir.path());
    assert!(matches!(first.status.code(), Some(0 | 1)));
    let path = dir.path().join("variation-1.csv");
    let a = std::fs::read(&path).unwrap();
    let text = String::from_utf8(a.clone()).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows[0], "alpha,eps,mean_V,se_V,n");
    assert_eq!(rows.len(), 1 + 3 * 3);
    assert!(text.contains("# alphas = [1.0, 1.5, 2.0]"));
    kpzlab(&args, dir.path());
    assert_eq!(std::fs::read(&path).unwrap(), a);
}

#[test]
fn unknown_subcommand_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(kpzlab(&["bogus"], dir.path()).status.code(), Some(2));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = kpzlab(&["variation", "--eps-list", "0.003"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = kpzlab(&["holder", "--delta", "-1"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    let out = kpzlab(&["selftest", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_out_dir_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = kpzlab(&["selftest", "--oracle-instances", "5"], &blocker.join("sub"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_precedence_and_env_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 4\nn_lines = 64\ndelta = 0.015625\neps_list = [0.03125]\nn_samples = 40\nresolutions = [4, 16, 64]\n")
        .unwrap();
    let out = kpzlab(&["holder", "--config", cfg.to_str().unwrap(), "--seed", "6"], dir.path());
    assert!(matches!(out.status.code(), Some(0 | 1)));
    let text = std::fs::read_to_string(dir.path().join("holder-6.csv")).unwrap();
    assert!(text.contains("# n_lines = 64"));
    assert_eq!(
        data_lines(&text)[0],
        "resolution,median_ratio_pi,median_ratio_W,median_logcorrected_pi,median_logcorrected_W"
    );

    let out = Command::new(env!("CARGO_BIN_EXE_kpzlab"))
        .args(["holder", "--config", cfg.to_str().unwrap(), "--out-dir"])
        .arg(dir.path())
        .env("KPZLAB_SEED", "21")
        .output()
        .unwrap();
    assert!(matches!(out.status.code(), Some(0 | 1)));
    // the file wins over the environment default
    assert!(dir.path().join("holder-4.csv").exists());
    assert!(!dir.path().join("holder-21.csv").exists());
}

#[test]
fn schemas_of_the_remaining_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let base = [
        "--n-samples", "600", "--limit-samples", "600", "--n-lines", "64", "--delta", "0.015625", "--eps-list",
        "0.015625", "--eps", "0.5", "--resamples", "50", "--truncation-checked", "10", "--probes", "0.25",
        "--limit-n", "16", "--limit-window", "2", "--limit-delta", "0.0625", "--seed", "3",
    ];
    let cases: &[(&str, &[(&str, &str)])] = &[
        ("tails", &[("tails-3.csv", "quantity,m,survival"), ("tails-3-fit.csv", "quantity,beta_hat,r_squared,band_lo,band_hi"), ("tails-3-increments.csv", "replica,I,W")]),
        ("environment", &[("environment-3.csv", "z,stat_bessel,stat_brownian,threshold")]),
        ("limit-env", &[("limit-env-3.csv", "replica,X,Y,length"), ("limit-env-3-summary.csv", "nu_hat,nu_se,mu_hat,mu_se")]),
        ("independence", &[("independence-3.csv", "t1,t2,eps,corr,ci_lo,ci_hi")]),
        ("invariance", &[("invariance-3.csv", "test,statistic,threshold")]),
    ];
    for (sub, files) in cases {
        let mut args = vec![*sub];
        args.extend(base);
        let out = kpzlab(&args, dir.path());
        assert!(
            matches!(out.status.code(), Some(0 | 1)),
            "{sub}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        for (name, header) in *files {
            let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
            assert_eq!(data_lines(&text)[0], *header, "{name}");
        }
        assert!(dir.path().join(format!("{sub}-3.json")).exists());
    }
}
