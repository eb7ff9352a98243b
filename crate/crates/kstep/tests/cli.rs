//! End-to-end tests of the command-line surface.

use std::path::Path;
use std::process::{Command, Output};

fn kstep(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstep"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to launch kstep")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn play_reports_target_and_winner() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstep(&["play", "--plays", "5,15,20,40,50", "--p", "0.75"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("target 19.5"), "{text}");
    assert!(text.contains("winner play 20"), "{text}");
}

#[test]
fn play_rejects_bad_p() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstep(&["play", "--plays", "5,15", "--p", "1.5"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstep(&["frobnicate"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = kstep(
            &["simulate", "--spec", "default", "--seed", "7", "--n", "20", "--out-dir", sub],
            dir.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["dataset.csv", "truth.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    assert!(dir.path().join("a/manifest.json").exists());
}

#[test]
fn simulate_seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    for (sub, seed) in [("a", "7"), ("b", "8")] {
        let out = kstep(
            &["simulate", "--seed", seed, "--n", "20", "--out-dir", sub],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let a = std::fs::read(dir.path().join("a/dataset.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/dataset.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn fit_writes_expected_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = kstep(
        &["simulate", "--seed", "3", "--n", "4", "--out-dir", "sim"],
        dir.path(),
    );
    assert!(out.status.success());
    let out = kstep(
        &[
            "fit",
            "--data",
            "sim/dataset.csv",
            "--samples",
            "50",
            "--burnin",
            "10",
            "--chains",
            "2",
            "--seed",
            "1",
            "--out-dir",
            "fit",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let samples = std::fs::read_to_string(dir.path().join("fit/samples.csv")).unwrap();
    // header + 50 retained draws per chain
    assert_eq!(samples.lines().count(), 1 + 100);
    let header = samples.lines().next().unwrap();
    assert!(header.starts_with("iteration,chain,rho,q0,q1,w1,w2,w3,w4,w5"));
    // 10 shared columns + 7 per subject
    assert_eq!(header.split(',').count(), 10 + 7 * 4);
    assert!(dir.path().join("fit/manifest.json").exists());
}

#[test]
fn diagnose_classify_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kstep(
        &["simulate", "--seed", "5", "--n", "3", "--out-dir", "sim"],
        dir.path()
    )
    .status
    .success());
    assert!(kstep(
        &[
            "fit",
            "--data",
            "sim/dataset.csv",
            "--samples",
            "300",
            "--burnin",
            "100",
            "--chains",
            "1",
            "--seed",
            "2",
            "--out-dir",
            "fit"
        ],
        dir.path()
    )
    .status
    .success());

    let out = kstep(
        &["diagnose", "--samples", "fit/samples.csv", "--out-dir", "diag"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["trace_rho.svg", "density_rho.svg", "trace_q0.svg", "geweke.csv"] {
        assert!(dir.path().join("diag").join(f).exists(), "missing {f}");
    }

    let out = kstep(&["classify", "--samples", "fit/samples.csv"], dir.path());
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("player,compliance,classified_compliant"));
    assert_eq!(text.lines().count(), 1 + 3);

    let out = kstep(
        &[
            "report",
            "--samples",
            "fit/samples.csv",
            "--data",
            "sim/dataset.csv",
            "--figures",
            "2",
            "--out-dir",
            "rep",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("rep/summary.json").exists());
    let players = std::fs::read_to_string(dir.path().join("rep/players.csv")).unwrap();
    assert_eq!(players.lines().count(), 1 + 3);
    assert_eq!(
        std::fs::read_dir(dir.path().join("rep"))
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .starts_with("strategy_")
            })
            .count(),
        2
    );
}

#[test]
fn fit_is_deterministic_given_seed() {
    let dir = tempfile::tempdir().unwrap();
    assert!(kstep(
        &["simulate", "--seed", "9", "--n", "3", "--out-dir", "sim"],
        dir.path()
    )
    .status
    .success());
    for sub in ["f1", "f2"] {
        assert!(kstep(
            &[
                "fit",
                "--data",
                "sim/dataset.csv",
                "--samples",
                "40",
                "--burnin",
                "10",
                "--chains",
                "2",
                "--seed",
                "11",
                "--out-dir",
                sub
            ],
            dir.path()
        )
        .status
        .success());
    }
    let a = std::fs::read(dir.path().join("f1/samples.csv")).unwrap();
    let b = std::fs::read(dir.path().join("f2/samples.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fit_rejects_malformed_dataset_with_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.csv"),
        "subject_id,p,response\ns1,0.3,40\ns1,0.3,41\n",
    )
    .unwrap();
    let out = kstep(
        &["fit", "--data", "bad.csv", "--samples", "10", "--burnin", "5"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("duplicate"), "{err}");
}

#[test]
fn config_file_is_applied_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("spec.cfg"),
        "n = 5\nseed = 3\nweight_kstep = 1.0\nweight_constant_increment = 0\n\
         weight_uniform_random = 0\nweight_nonconvex_monotone = 0\nk_min = 2\n",
    )
    .unwrap();
    let out = kstep(
        &["simulate", "--spec", "spec.cfg", "--out-dir", "sim"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    // all-kstep population: every subject compliant
    assert!(text.contains("5 compliant"), "{text}");
    // --n overrides the config file's n
    let out = kstep(
        &["simulate", "--spec", "spec.cfg", "--n", "8", "--out-dir", "sim2"],
        dir.path(),
    );
    assert!(out.status.success());
    assert!(stdout(&out).contains("8 compliant"));
}

#[test]
fn regress_runs_on_generated_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut players = String::from("subject_id,compliance\n");
    let mut covs = String::from("subject_id,age,crt_pass\n");
    for i in 0..30 {
        let crt = (i % 2) as f64;
        let c = 0.2 + 0.4 * crt + 0.005 * i as f64;
        players.push_str(&format!("s{i},{c}\n"));
        covs.push_str(&format!("s{i},{},{crt}\n", 20 + i));
    }
    std::fs::write(dir.path().join("players.csv"), players).unwrap();
    std::fs::write(dir.path().join("covs.csv"), covs).unwrap();
    let out = kstep(
        &["regress", "--players", "players.csv", "--covariates", "covs.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("crt_pass"), "{text}");
    assert!(text.contains("intercept"), "{text}");
}

#[test]
fn regress_errors_when_covariates_missing() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("players.csv"), "subject_id,compliance\ns1,0.4\n").unwrap();
    std::fs::write(dir.path().join("covs.csv"), "subject_id,age\nzz,30\n").unwrap();
    let out = kstep(
        &["regress", "--players", "players.csv", "--covariates", "covs.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}
