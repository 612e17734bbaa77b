//! End-to-end tests of the `wavefit` binary: exit codes, file outputs,
//! and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wavefit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).expect("fixture writes");
}

fn layer_json(dir: &Path, id: &str, filters: u32, depth: u32, edge: u32) -> PathBuf {
    let path = dir.join(format!("{id}.json"));
    write(
        &path,
        &format!(
            r#"{{"layer_id":"{id}","filters":{filters},"kernel_h":3,"kernel_w":3,"in_depth":{depth},"in_h":{edge},"in_w":{edge},"batch":1,"filter_style":"dense"}}"#
        ),
    );
    path
}

fn model_json(dir: &Path, name: &str, layers: &[(&str, u32, u32, u32, u32)]) -> PathBuf {
    // (id, filters, depth, edge, width)
    let path = dir.join(format!("{name}.json"));
    let body: Vec<String> = layers
        .iter()
        .map(|(id, filters, depth, edge, width)| {
            format!(
                r#"{{"layer_id":"{id}","filters":{filters},"kernel_h":3,"kernel_w":3,"in_depth":{depth},"in_h":{edge},"in_w":{edge},"batch":1,"filter_style":"dense","width":{width}}}"#
            )
        })
        .collect();
    write(
        &path,
        &format!(r#"{{"name":"{name}","layers":[{}]}}"#, body.join(",")),
    );
    path
}

#[test]
fn staircase_sweep_has_seven_levels() {
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 512, 512, 64);
    let out = dir.path().join("stair.csv");
    let result = run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", "titan-v",
        "--widths", "64..512",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "width,blocks,waves,latency_s,utilization,throughput_flops"
    );
    let mut latencies: Vec<&str> = lines.map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(latencies.len(), 512 - 64 + 1);
    latencies.dedup();
    assert_eq!(latencies.len(), 7, "distinct latency levels");
    assert!(out.with_extension("manifest.json").exists());
}

#[test]
fn staircase_single_width_is_one_full_wave() {
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 512, 512, 64);
    let out = dir.path().join("one.csv");
    let result = run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", "titan-v",
        "--widths", "80..80",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].split(',').nth(4).unwrap(), "1");
}

#[test]
fn jetson_staircase_steps_on_every_width() {
    // One SM: every added block adds a wave.
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 64, 16, 8);
    let out = dir.path().join("nano.csv");
    let result = run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", "jetson-nano",
        "--widths", "1..64",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let lat: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(lat.windows(2).all(|w| w[0] < w[1]), "strictly increasing");
}

#[test]
fn bad_gpu_spec_exits_2_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 64, 16, 8);
    let gpu = dir.path().join("gpu.json");
    write(
        &gpu,
        r#"{"name":"broken","sm_count":0,"peak_flops":1e12,"mapping_policy":{"kind":"block-per-filter"}}"#,
    );
    let result = run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", gpu.to_str().unwrap(),
        "--widths", "1..8",
        "--out", dir.path().join("x.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 2);
    assert!(stderr(&result).contains("sm_count"), "{}", stderr(&result));
}

#[test]
fn unwritable_out_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 64, 16, 8);
    let result = run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", "titan-v",
        "--widths", "1..8",
        "--out", "/nonexistent-dir/stair.csv",
    ]);
    assert_eq!(code(&result), 3);
}

#[test]
fn custom_policy_changes_the_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 512, 512, 64);
    let out = dir.path().join("fixed.csv");
    let result = run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", "titan-v",
        "--widths", "100..100",
        "--policy", "fixed:1024",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    let row = csv.lines().nth(1).unwrap();
    // ceil(4096 * 100 / 1024) = 400 blocks over 80 SMs = 5 waves.
    assert_eq!(row.split(',').nth(1).unwrap(), "400");
    assert_eq!(row.split(',').nth(2).unwrap(), "5");
}

#[test]
fn candidates_backfill_is_noted_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("measured.csv");
    write(
        &profile,
        "layer_id,width,latency_s,flops\n\
         conv,40,0.002,1000000.0\n\
         conv,80,0.001,1000000.0\n",
    );
    let out = dir.path().join("cands.json");
    let result = run(&[
        "candidates",
        "--profile", profile.to_str().unwrap(),
        "--m", "2",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["layers"][0]["utilization_estimated"], true);
    let manifest = std::fs::read_to_string(out.with_extension("manifest.json")).unwrap();
    assert!(manifest.contains("backfilled"), "{manifest}");
}

#[test]
fn unreachable_delta_exits_4_but_writes_the_plan() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_json(dir.path(), "m", &[("conv", 512, 64, 16, 100)]);
    let out = dir.path().join("plan.json");
    let result = run(&[
        "optimize",
        "--model", model.to_str().unwrap(),
        "--gpu", "titan-v",
        "--mode", "latency",
        "--tau", "1e9",
        "--delta", "0.01",
        "--max-retries", "1",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 4, "{}", stderr(&result));
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(plan["feasible"], false);
    assert!(!plan["notes"].as_array().unwrap().is_empty());
}

#[test]
fn accuracy_mode_grows_underutilized_layers_for_free() {
    let dir = tempfile::tempdir().unwrap();
    // Widths far below one full wave: throughput is a fraction of peak.
    let model = model_json(
        dir.path(),
        "m",
        &[("a", 80, 64, 16, 20), ("b", 80, 64, 16, 30)],
    );
    let out = dir.path().join("plan.json");
    let result = run(&[
        "optimize",
        "--model", model.to_str().unwrap(),
        "--gpu", "titan-v",
        "--mode", "accuracy",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(plan["total_lg_seconds"].as_f64().unwrap(), 0.0);
    assert!(plan["total_pg"].as_f64().unwrap() > 0.0);
    for layer in plan["layers"].as_array().unwrap() {
        assert_eq!(layer["r_new"], 80);
    }
}

#[test]
fn optimize_accepts_measured_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 512, 512, 32);
    let model = model_json(dir.path(), "m", &[("conv", 512, 512, 32, 100)]);
    // The profile is a staircase sweep named so its fallback layer id
    // matches the model's layer.
    let profile = dir.path().join("conv.csv");
    assert_eq!(code(&run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", "titan-v",
        "--widths", "1..512",
        "--out", profile.to_str().unwrap(),
    ])), 0);

    let out = dir.path().join("plan.json");
    let result = run(&[
        "optimize",
        "--model", model.to_str().unwrap(),
        "--profile", profile.to_str().unwrap(),
        "--mode", "latency",
        "--m", "6",
        "--tau", "1e9",
        "--delta", "0.85",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(plan["feasible"], true);
    assert_eq!(plan["layers"][0]["r_new"], 80);
}

#[test]
fn verify_passes_a_plan_against_its_own_profile() {
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 512, 512, 32);
    let model = model_json(dir.path(), "m", &[("conv", 512, 512, 32, 100)]);
    let profile = dir.path().join("profile.csv");
    let plan = dir.path().join("plan.json");

    let result = run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", "titan-v",
        "--widths", "1..512",
        "--out", profile.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0);
    let result = run(&[
        "optimize",
        "--model", model.to_str().unwrap(),
        "--gpu", "titan-v",
        "--mode", "latency",
        "--m", "6",
        "--tau", "1e9",
        "--delta", "0.85",
        "--out", plan.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));

    // The staircase CSV has no layer_id column, so the table is named
    // after the file stem; align it with the plan's layer id.
    let renamed = dir.path().join("conv.csv");
    std::fs::rename(&profile, &renamed).unwrap();

    let report = dir.path().join("report.txt");
    let result = run(&[
        "verify",
        "--plan", plan.to_str().unwrap(),
        "--profile", renamed.to_str().unwrap(),
        "--out", report.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 0, "{}", stderr(&result));
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("RESULT: PASS"), "{text}");
    assert!(!text.contains("FAIL "), "{text}");
}

#[test]
fn verify_fails_a_tampered_plan() {
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 512, 512, 32);
    let model = model_json(dir.path(), "m", &[("conv", 512, 512, 32, 100)]);
    let profile = dir.path().join("conv.csv");
    let plan_path = dir.path().join("plan.json");

    assert_eq!(code(&run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", "titan-v",
        "--widths", "1..512",
        "--out", profile.to_str().unwrap(),
    ])), 0);
    assert_eq!(code(&run(&[
        "optimize",
        "--model", model.to_str().unwrap(),
        "--gpu", "titan-v",
        "--mode", "latency",
        "--m", "6",
        "--tau", "1e9",
        "--delta", "0.85",
        "--out", plan_path.to_str().unwrap(),
    ])), 0);

    let mut plan: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&plan_path).unwrap()).unwrap();
    plan["layers"][0]["r_new"] = serde_json::json!(240);
    std::fs::write(&plan_path, serde_json::to_string_pretty(&plan).unwrap()).unwrap();

    let report = dir.path().join("report.txt");
    let result = run(&[
        "verify",
        "--plan", plan_path.to_str().unwrap(),
        "--profile", profile.to_str().unwrap(),
        "--out", report.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 4);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("FAIL total_lg"), "{text}");
}

#[test]
fn verify_exposes_per_gpu_specificity() {
    // A plan tuned for 80 SMs does not verify against a 1-SM profile.
    let dir = tempfile::tempdir().unwrap();
    let layer = layer_json(dir.path(), "conv", 512, 512, 32);
    let model = model_json(dir.path(), "m", &[("conv", 512, 512, 32, 100)]);
    let titan_plan = dir.path().join("plan.json");
    let nano_profile = dir.path().join("conv.csv");

    assert_eq!(code(&run(&[
        "optimize",
        "--model", model.to_str().unwrap(),
        "--gpu", "titan-v",
        "--mode", "latency",
        "--m", "6",
        "--tau", "1e9",
        "--delta", "0.85",
        "--out", titan_plan.to_str().unwrap(),
    ])), 0);
    assert_eq!(code(&run(&[
        "staircase",
        "--layer", layer.to_str().unwrap(),
        "--gpu", "jetson-nano",
        "--widths", "1..512",
        "--out", nano_profile.to_str().unwrap(),
    ])), 0);

    let report = dir.path().join("report.txt");
    let result = run(&[
        "verify",
        "--plan", titan_plan.to_str().unwrap(),
        "--profile", nano_profile.to_str().unwrap(),
        "--out", report.to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 4);
    assert!(std::fs::read_to_string(&report).unwrap().contains("FAIL"));
}

#[test]
fn verify_rejects_coverage_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_json(dir.path(), "m", &[("conv", 512, 512, 32, 100)]);
    let plan = dir.path().join("plan.json");
    assert_eq!(code(&run(&[
        "optimize",
        "--model", model.to_str().unwrap(),
        "--gpu", "titan-v",
        "--mode", "latency",
        "--m", "6",
        "--tau", "1e9",
        "--delta", "0.85",
        "--out", plan.to_str().unwrap(),
    ])), 0);

    let sparse = dir.path().join("conv.csv");
    write(
        &sparse,
        "layer_id,width,latency_s,flops\nconv,10,0.001,1000.0\nconv,20,0.001,2000.0\n",
    );
    let result = run(&[
        "verify",
        "--plan", plan.to_str().unwrap(),
        "--profile", sparse.to_str().unwrap(),
        "--out", dir.path().join("r.txt").to_str().unwrap(),
    ]);
    assert_eq!(code(&result), 2);
}

#[test]
fn repeated_runs_are_byte_identical() {
    // Identical inputs include the argument strings, so each run gets its
    // own working directory with the same relative paths inside.
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for tag in ["a", "b"] {
        let cwd = dir.path().join(tag);
        std::fs::create_dir(&cwd).unwrap();
        layer_json(&cwd, "layer", 512, 512, 64);
        std::fs::rename(cwd.join("layer.json"), cwd.join("conv.json")).unwrap();
        for args in [
            vec![
                "staircase", "--layer", "conv.json", "--gpu", "titan-v",
                "--widths", "10%..100%:10%", "--out", "stair.csv",
            ],
            vec![
                "candidates", "--layer", "conv.json", "--gpu", "titan-v",
                "--widths", "1..512", "--m", "5", "--out", "cands.json",
            ],
        ] {
            let result = bin().args(&args).current_dir(&cwd).output().unwrap();
            assert_eq!(code(&result), 0, "{}", stderr(&result));
        }
        outputs.push((
            std::fs::read(cwd.join("stair.csv")).unwrap(),
            std::fs::read(cwd.join("cands.json")).unwrap(),
            std::fs::read(cwd.join("stair.manifest.json")).unwrap(),
            std::fs::read(cwd.join("cands.manifest.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}
