mod common;

use common::{scratch, spec_path};
use hitnet_harness::cli::cli_main;

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("hitnet").chain(args.iter().copied()))
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(run(&["--help"]), 0);
    assert_eq!(run(&["--version"]), 0);
    assert_eq!(run(&["train", "--help"]), 0);
}

#[test]
fn validation_errors_exit_one() {
    let torus = spec_path("torus");
    let t = torus.to_str().unwrap();
    assert_eq!(run(&[]), 1);
    assert_eq!(run(&["frobnicate"]), 1);
    assert_eq!(run(&["train", "--arch", "transport", "--spec", t, "--bogus"]), 1);
    assert_eq!(run(&["train", "--arch", "lstm", "--spec", t]), 1);
    assert_eq!(run(&["train", "--arch", "transport", "--spec", "/no/such/file.hit"]), 1);
    assert_eq!(run(&["train", "--arch", "transport"]), 1);
    assert_eq!(run(&["eval", "--spec", t, "--set", "seeds="]), 1);
    assert_eq!(run(&["eval", "--spec", t, "--set", "nokey=1"]), 1);
    assert_eq!(run(&["resample-check", "--lengths", "2,x"]), 1);
    let wedge = spec_path("wedge");
    assert_eq!(run(&["battery", "--spec", wedge.to_str().unwrap(), "--arch", "transport"]), 1);
    assert_eq!(run(&["counterexample", "--spec", wedge.to_str().unwrap(), "--arch", "cover"]), 1);
}

#[test]
fn runtime_failures_exit_two() {
    let dir = scratch("cli-rt");
    let blocker = dir.join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = blocker.join("sub");
    assert_eq!(run(&["resample-check", "--trials", "1", "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn train_writes_checkpoint_and_loss_curve() {
    let dir = scratch("cli-train");
    let spec = spec_path("torus");
    let code = run(&[
        "train", "--spec", spec.to_str().unwrap(), "--arch", "transport", "--seed", "42", "--desk", "1",
        "--set", "samples_per_word=4", "--set", "epochs=3", "--set", "warmup=1", "--set", "gen_hidden=8",
        "--out", dir.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let ckpt = dir.join("checkpoints/torus_transport_42.ckpt");
    assert!(ckpt.is_file());
    let curve = std::fs::read_to_string(dir.join("train_torus_transport_42.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "epoch,loss,lr,early_stop");
    assert_eq!(lines.len(), 4);

    let c = ckpt.to_str().unwrap();
    let s = spec.to_str().unwrap();
    let o = dir.to_str().unwrap();
    assert_eq!(run(&["battery", "--spec", s, "--arch", "transport", "--checkpoint", c, "--out", o]), 0);
    let b: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("battery/torus_transport.json")).unwrap()).unwrap();
    assert_eq!(b["commutativity_gap"], 0.0);
    assert_eq!(
        run(&["eval", "--spec", s, "--checkpoint", c, "--set", "test_lengths=3", "--set", "test_cap=4", "--out", o]),
        0
    );
    assert!(std::fs::read_to_string(dir.join("report.csv")).unwrap().lines().count() > 1);
}

#[test]
fn counterexample_and_resample_outputs() {
    let dir = scratch("cli-ce");
    let o = dir.to_str().unwrap();
    let spec = spec_path("wedge");
    let s = spec.to_str().unwrap();
    assert_eq!(
        run(&["counterexample", "--spec", s, "--arch", "transformer_wc", "--set", "width=16", "--set", "ff=16", "--set", "heads=2", "--out", o]),
        0
    );
    let w: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("witness/wedge_transformer_wc.json")).unwrap()).unwrap();
    assert_eq!(w["valid"], true);
    assert!(w["delta"].as_f64().unwrap() > 1e-9);

    assert_eq!(run(&["resample-check", "--sigma", "0.1", "--lengths", "2,4", "--trials", "3", "--out", o]), 0);
    let t = std::fs::read_to_string(dir.join("resample_check.csv")).unwrap();
    assert_eq!(t.lines().next(), Some("L,fair,naive,ratio"));
    assert_eq!(t.lines().count(), 3);

    assert_eq!(run(&["dump-data", "--spec", s, "--words", "a b;b", "--samples", "2", "--out", o]), 0);
    let d = std::fs::read_to_string(dir.join("data_wedge.csv")).unwrap();
    // (2 + 1 segments) x 32 points x 2 samples.
    assert_eq!(d.lines().count(), 1 + 3 * 32 * 2);
}

#[test]
fn smoke_config_runs_end_to_end() {
    let dir = scratch("cli-smoke");
    let cfg = common::root().join("configs/smoke.conf");
    assert_eq!(run(&["eval", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]), 0);
    assert!(dir.join("tables/torus_coherence.md").is_file());
}
