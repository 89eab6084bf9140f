use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lmdp_irl::formats;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_lmdp-irl"));
    c.env_remove(lmdp_irl::THREADS_ENV);
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn solve_forward_two_state_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let passive = write(dir.path(), "p.csv", "state_0,state_1\n0.5,0.5\n0.5,0.5\n");
    let costs = write(dir.path(), "r.csv", &format!("state_0,state_1\n0,{}\n", 3f64.ln()));
    let out = dir.path().join("run");
    ok(&["solve-forward", "--passive", s(&passive), "--costs", s(&costs), "--out-dir", s(&out)]);
    let v = formats::read_vector(&out.join("ctg.csv"), &[]).unwrap();
    assert!(v[0].abs() < 1e-12 && (v[1] - 3f64.ln()).abs() < 1e-9, "{v:?}");
    let lambda = formats::read_scalar(&out.join("lambda.txt")).unwrap();
    assert!((lambda - 2.0 / 3.0).abs() < 1e-10);
    let policy = formats::read_matrix(&out.join("policy.csv")).unwrap();
    assert!((policy.get(0, 0) - 0.75).abs() < 1e-9);

    let manifest: serde_json::Value = formats::read_json(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest["subcommand"], "solve-forward");
    let inputs = manifest["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 2);
    assert_eq!(
        inputs[0]["sha256"].as_str().unwrap(),
        lmdp_irl::manifest::sha256_file(&passive).unwrap()
    );
    assert_eq!(manifest["flags"]["max_iter"], 100_000);
}

#[test]
fn simulate_spp_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        ok(&["simulate-spp", "--agents", "30", "--steps", "20", "--seed", seed, "--out-dir", s(out)]);
    }
    for f in ["counts.csv", "trajectories.csv", "passive.csv", "ctg.csv", "config.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(std::fs::read(a.join("counts.csv")).unwrap(), std::fs::read(c.join("counts.csv")).unwrap());
    let counts = formats::read_counts(&a.join("counts.csv"), None).unwrap();
    assert_eq!(counts.len(), 36);
    assert_eq!(counts.total(), 30 * 20);
    let traj = std::fs::read_to_string(a.join("trajectories.csv")).unwrap();
    assert!(traj.starts_with("agent_id,t,x,y,theta,state_index\n"));
    assert_eq!(traj.lines().count(), 1 + 30 * 21);
}

#[test]
fn spp_chain_recovers_staircase_shape() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let est = dir.path().join("est");
    let rec = dir.path().join("rec");
    ok(&["simulate-spp", "--seed", "3", "--out-dir", s(&sim)]);
    ok(&[
        "estimate",
        "--counts",
        s(&sim.join("counts.csv")),
        "--passive",
        s(&sim.join("passive.csv")),
        "--method",
        "vi",
        "--vi-iter",
        "4000",
        "--out-dir",
        s(&est),
    ]);
    ok(&[
        "recover-costs",
        "--ctg",
        s(&est.join("ctg_summary.csv")),
        "--passive",
        s(&sim.join("passive.csv")),
        "--out-dir",
        s(&rec),
    ]);
    let r = formats::read_vector(&rec.join("recovered_costs.csv"), &[]).unwrap();
    let truth = formats::read_vector(&sim.join("costs.csv"), &[]).unwrap();
    assert_eq!(r.len(), 36);
    assert!(r.iter().copied().fold(f64::INFINITY, f64::min).abs() < 1e-12);
    // Aligned states must come out cheaper than anti-aligned ones.
    let mean = |v: &[f64], lo: usize, hi: usize| v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64;
    assert!(mean(&r, 15, 20) < mean(&r, 0, 5), "{r:?}");
    assert!(mean(&truth, 15, 20) < mean(&truth, 0, 5));

    let summary = std::fs::read_to_string(est.join("ctg_summary.csv")).unwrap();
    assert!(summary.starts_with("state_index,center,mean,lower95,upper95\n"));
    let diag: serde_json::Value = formats::read_json(&est.join("diagnostics.json")).unwrap();
    assert_eq!(diag["method"], "variational");
    assert!(diag["runtime_seconds"].as_f64().unwrap() >= 0.0);
    let recover: serde_json::Value = formats::read_json(&rec.join("recover.json")).unwrap();
    assert_eq!(recover["lambda_source"], "anchored_min_zero");

    // With the true pair, the explicit-lambda path reproduces the staircase.
    let exact = dir.path().join("exact");
    ok(&[
        "recover-costs",
        "--ctg",
        s(&sim.join("ctg.csv")),
        "--passive",
        s(&sim.join("passive.csv")),
        "--lambda",
        s(&sim.join("lambda.txt")),
        "--out-dir",
        s(&exact),
    ]);
    let r = formats::read_vector(&exact.join("recovered_costs.csv"), &[]).unwrap();
    for (a, b) in r.iter().zip(&truth) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn ingest_estimate_marginals_chain() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("experiment_id,agent_id,t,x,y\n");
    // Two agents swimming side by side, one drifting, 6 x 6 grid.
    for t in 0..40 {
        let x = 0.1 + 0.02 * t as f64;
        csv.push_str(&format!("e1,a,{t},{x},0.30\n"));
        csv.push_str(&format!("e1,b,{t},{x},{}\n", 0.32 + 0.001 * t as f64));
    }
    let raw = write(dir.path(), "raw.csv", &csv);
    let arena = write(
        dir.path(),
        "arena.json",
        r#"{"x_min":0,"y_min":0,"x_max":1,"y_max":1,"target":[0.9,0.5]}"#,
    );
    let ing = dir.path().join("ing");
    ok(&["ingest", "--csv", s(&raw), "--arena", s(&arena), "--bins", "6", "--out-dir", s(&ing)]);
    let states = std::fs::read_to_string(ing.join("states.csv")).unwrap();
    assert!(states.starts_with("experiment_id,agent_id,t,local_deg,target_deg,state_index\n"));
    let report: serde_json::Value = formats::read_json(&ing.join("validation.json")).unwrap();
    assert_eq!(report["rows_read"], 80);

    let est = dir.path().join("est");
    ok(&[
        "estimate",
        "--counts",
        s(&ing.join("counts.csv")),
        "--passive",
        "rw:90",
        "--features",
        "bisquare:2,3",
        "--method",
        "vi",
        "--vi-iter",
        "500",
        "--draws",
        "50",
        "--bins",
        "6",
        "--out-dir",
        s(&est),
    ]);
    let summary = std::fs::read_to_string(est.join("ctg_summary.csv")).unwrap();
    assert!(summary.starts_with("state_index,center_local,center_target,mean,lower95,upper95\n"));
    assert_eq!(summary.lines().count(), 37);
    let draws = std::fs::read_to_string(est.join("posterior_draws.csv")).unwrap();
    assert!(draws.starts_with("draw,chain,beta_0,"));
    assert_eq!(draws.lines().count(), 51);

    let mar = dir.path().join("mar");
    ok(&["marginals", "--summary", s(&est.join("ctg_summary.csv")), "--bins", "6", "--out-dir", s(&mar)]);
    for f in ["marginal_local.csv", "marginal_target.csv"] {
        let text = std::fs::read_to_string(mar.join(f)).unwrap();
        assert!(text.starts_with("bin,center_deg,ctg\n"));
        assert_eq!(text.lines().count(), 7);
    }
}

#[test]
fn mcmc_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&["simulate-spp", "--agents", "50", "--steps", "40", "--out-dir", s(&sim)]);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("mcmc{threads}"));
        ok(&[
            "estimate",
            "--counts",
            s(&sim.join("counts.csv")),
            "--passive",
            "spp",
            "--method",
            "mcmc",
            "--chains",
            "3",
            "--warmup",
            "150",
            "--samples",
            "100",
            "--threads",
            threads,
            "--out-dir",
            s(&out),
        ]);
        outputs.push(std::fs::read(out.join("posterior_draws.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["simulate-spp", "--bogus", "--out-dir", s(&out)]).status.code(), Some(1));
    // --out-dir is mandatory.
    assert_eq!(run(&["simulate-spp"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));

    let missing = run(&["solve-forward", "--passive", "nope.csv", "--costs", "nope.csv", "--out-dir", s(&out)]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.csv"));

    let bad = write(dir.path(), "bad.csv", "state_0,state_1\n0.5,0.7\n0.5,0.5\n");
    let r = write(dir.path(), "r.csv", "state_0,state_1\n0,1\n");
    let res = run(&["solve-forward", "--passive", s(&bad), "--costs", s(&r), "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("bad.csv"));

    let cell = write(dir.path(), "cell.csv", "state_0,state_1\n0.5,0.5\nx,0.5\n");
    let res = run(&["solve-forward", "--passive", s(&cell), "--costs", s(&r), "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("line 3") && err.contains("state_0"), "{err}");

    // Non-convergence is a numerical failure.
    let p = write(dir.path(), "p.csv", "state_0,state_1\n0.9,0.1\n0.1,0.9\n");
    let res = run(&["solve-forward", "--passive", s(&p), "--costs", s(&r), "--max-iter", "2", "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.join("manifest.json").exists());

    let res = run(&["simulate-spp", "--agents", "0", "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
    assert_eq!(run(&["simulate-spp", "--threads", "0", "--out-dir", s(&out)]).status.code(), Some(1));
    let res = bin()
        .env(lmdp_irl::THREADS_ENV, "many")
        .args(["simulate-spp", "--agents", "5", "--steps", "2", "--out-dir", s(&out)])
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn thread_flag_overrides_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let res = bin()
        .env(lmdp_irl::THREADS_ENV, "many")
        .args(["--threads", "2", "simulate-spp", "--agents", "5", "--steps", "2", "--out-dir", s(&out)])
        .output()
        .unwrap();
    assert!(res.status.success());
    let manifest: serde_json::Value = formats::read_json(&out.join("manifest.json")).unwrap();
    assert_eq!(manifest["flags"]["threads"], 2);
    assert_eq!(manifest["seed"], 0);
}
