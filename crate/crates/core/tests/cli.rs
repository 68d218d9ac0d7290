use std::path::Path;
use std::process::{Command, Output};

use popsynth::pipeline::SynthesisConfig;

fn popsynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_popsynth"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn benchmark(dir: &Path) {
    let out = popsynth(&[
        "benchmark",
        "--out",
        &s(dir),
        "--seed",
        "2",
        "--source-rows",
        "800",
        "--target-rows",
        "800",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn rewrite_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let path = dir.join("config.json");
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    edit(&mut v);
    std::fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    s(&path)
}

#[test]
fn version_and_usage() {
    let out = popsynth(&["--version"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.trim().ends_with(env!("CARGO_PKG_VERSION")));

    assert_eq!(popsynth(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(popsynth(&["synth", "--bogus"]).status.code(), Some(2));
    assert_eq!(popsynth(&[]).status.code(), Some(2));
}

#[test]
fn synth_writes_outputs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    benchmark(dir.path());
    let config = s(&dir.path().join("config.json"));
    let out = popsynth(&["synth", "--config", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["synthetic.csv", "report.json", "marginals.csv", "network.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
    let stdout = String::from_utf8(out.stdout).unwrap();
    let keys: Vec<&str> = stdout.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(
        keys,
        [
            "method",
            "srmse_1",
            "srmse_2",
            "srmse_3",
            "srmse_4",
            "srmse_5",
            "sampled_zeros",
            "structural_zeros",
            "precision",
            "recall",
            "f1"
        ]
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["method"], "bn_copula");
    let header = std::fs::read_to_string(dir.path().join("out/marginals.csv")).unwrap();
    assert!(header.starts_with("variable,category,series,frequency"));
}

#[test]
fn missing_target_marginals_fall_back_with_notice() {
    let dir = tempfile::tempdir().unwrap();
    benchmark(dir.path());
    let config = rewrite_config(dir.path(), |v| {
        v.as_object_mut().unwrap().remove("target_marginals");
    });
    let out = popsynth(&["synth", "--config", &config]);
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("notice:") && stderr.contains("from-source"), "{stderr}");
}

#[test]
fn evaluate_names_first_mismatching_variable() {
    let dir = tempfile::tempdir().unwrap();
    benchmark(dir.path());
    let schema_path = dir.path().join("schema.json");
    let mut schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&schema_path).unwrap()).unwrap();
    schema["X2"]["labels"].as_array_mut().unwrap().push("extra".into());
    let other = dir.path().join("other_schema.json");
    std::fs::write(&other, schema.to_string()).unwrap();

    let out = popsynth(&[
        "evaluate",
        "--ref",
        &s(&dir.path().join("target.csv")),
        "--syn",
        &s(&dir.path().join("source.csv")),
        "--schema",
        &s(&schema_path),
        "--syn-schema",
        &s(&other),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error kind=schema_mismatch"), "{stderr}");
    assert!(stderr.contains("X2"), "{stderr}");
}

#[test]
fn domain_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = popsynth(&["synth", "--config", &s(&dir.path().join("nope.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error kind=io"));

    let out = popsynth(&["benchmark", "--out", &s(dir.path()), "--skew", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn marginals_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    benchmark(dir.path());
    let out_path = dir.path().join("m.csv");
    let out = popsynth(&[
        "marginals",
        "--data",
        &s(&dir.path().join("source.csv")),
        "--schema",
        &s(&dir.path().join("schema.json")),
        "--out",
        &s(&out_path),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("variable,label,count"));
    let total: u64 = text
        .lines()
        .skip(1)
        .filter(|l| l.starts_with("X0,"))
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 800);

    let out = popsynth(&[
        "evaluate",
        "--ref",
        &s(&dir.path().join("source.csv")),
        "--syn",
        &s(&dir.path().join("source.csv")),
        "--schema",
        &s(&dir.path().join("schema.json")),
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let line = stdout.lines().find(|l| l.starts_with("srmse_1")).unwrap();
    assert_eq!(line.split_whitespace().nth(1), Some("0.0000"), "{stdout}");
}

#[test]
fn permute_study_requires_copula() {
    let dir = tempfile::tempdir().unwrap();
    benchmark(dir.path());
    let config = rewrite_config(dir.path(), |v| v["method"] = "bn".into());
    let out = popsynth(&["permute-study", "--config", &config, "--n", "2"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn external_plugin_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    benchmark(dir.path());
    // resamples the normalized rows it is given, cycling as needed
    let plugin = dir.path().join("plugin.py");
    std::fs::write(
        &plugin,
        "import sys\n\
         args = sys.argv[1:]\n\
         n = int(args[args.index('--n') + 1])\n\
         lines = sys.stdin.read().split()\n\
         header, rows = lines[0], lines[1:]\n\
         print(header)\n\
         for j in range(n):\n\
         \x20   print(rows[j % len(rows)])\n",
    )
    .unwrap();
    let config = rewrite_config(dir.path(), |v| {
        v["method"] = "external_copula".into();
        v["output_size"] = 1000.into();
        v["plugin_command"] = serde_json::json!(["python3", s(&plugin)]);
    });
    let out = popsynth(&["synth", "--config", &config]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let parsed = SynthesisConfig::load(&config).unwrap();
    let rows = std::fs::read_to_string(parsed.output_dir.join("synthetic.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1001);

    let failing = rewrite_config(dir.path(), |v| v["plugin_command"] = serde_json::json!(["false"]));
    let out = popsynth(&["synth", "--config", &failing]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error kind=external"));
}
