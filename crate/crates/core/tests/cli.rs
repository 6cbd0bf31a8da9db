//! End-to-end tests of the `ideval` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ideval");

fn fixture_dir(n: u8) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("fixtures/fig{n:02}"))
}

/// A scratch copy of a figure fixture, so that outputs land in a temp dir.
fn scratch(n: u8) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(fixture_dir(n)).unwrap() {
        let p = entry.unwrap().path();
        fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
    }
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("IDEVAL_THREADS")
        .output()
        .expect("binary runs")
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn diagnostic(o: &Output) -> Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(text.lines().last().expect("a diagnostic line")).unwrap()
}

fn schema_errors(schema: &str, instance: &Value) -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(schema);
    let schema: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator.iter_errors(instance).map(|e| e.to_string()).collect()
}

fn assert_valid(schema: &str, instance: &Value) {
    let errors = schema_errors(schema, instance);
    assert!(errors.is_empty(), "{schema}: {errors:#?}\n{instance:#}");
}

fn write_config(dir: &Path, base: &str, exp: &str, ideal: Option<&str>) -> PathBuf {
    let mut cfg = serde_json::json!({
        "hist": [{"path": "hist.tsv", "epoch_label": "H"}],
        "base": base,
        "exp": exp,
        "mode": "separate",
    });
    if let Some(ideal) = ideal {
        cfg["ideal"] = ideal.into();
    }
    let path = dir.join("run.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn percent(v: &Value) -> String {
    ideval::numeric::format_percent(v.as_f64().unwrap())
}

#[test]
fn evaluate_prints_the_table_and_writes_json() {
    let dir = scratch(1);
    let cfg = dir.path().join("config.json");
    let out = run(&["--config", arg(&cfg), "evaluate"]);
    assert!(out.status.success(), "{out:?}");
    let table = stdout(&out);
    assert!(table.starts_with("Impact metrics\n  JaccardDistance     50.02%\n"), "{table}");
    assert!(table.contains("  IQ                -100.00%\n"), "{table}");

    let json: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_valid("metrics_report.schema.json", &json);
    assert_eq!(percent(&json["quality"]["delta_recall"]), "-49.98");
    assert!(json.get("per_element").is_none());
}

#[test]
fn per_element_records_match_the_schema() {
    let dir = scratch(5);
    let cfg = dir.path().join("config.json");
    let out = run(&["--config", arg(&cfg), "--render", "json", "--per-element", "evaluate"]);
    assert!(out.status.success(), "{out:?}");
    let json: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_valid("metrics_report.schema.json", &json);
    assert_eq!(json["per_element"].as_array().unwrap().len(), 6);
    assert_eq!(percent(&json["quality"]["iq"]), "-28.13");
}

#[test]
fn identical_labelings_have_no_impact() {
    let dir = scratch(1);
    let cfg = write_config(dir.path(), "base.tsv", "base.tsv", Some("ideal.tsv"));
    // The ideal mentions experiment-only ids; rebuild it for this universe.
    fs::write(
        dir.path().join("ideal.tsv"),
        "hist:H:h_1\ty\nhist:H:h_2\ty\ncur:i_1\ty\ncur:i_2\ty\nhist:H:h_3\tc\ncur:i_3\tc\n",
    )
    .unwrap();
    let out = run(&["--config", arg(&cfg), "--render", "json", "evaluate"]);
    assert!(out.status.success(), "{out:?}");
    let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for k in ["jaccard_distance", "split_rate", "merge_rate"] {
        assert_eq!(json["impact"][k], 0.0, "{k}");
    }
    assert_eq!(json["quality"]["iq"], 0.0);
}

#[test]
fn a_missing_ideal_class_is_a_validation_failure() {
    let dir = scratch(1);
    let ideal = fs::read_to_string(dir.path().join("ideal.tsv")).unwrap();
    let trimmed: String = ideal.lines().filter(|l| !l.starts_with("cur:i_3")).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join("ideal.tsv"), trimmed).unwrap();
    let out = run(&["--config", arg(&dir.path().join("config.json")), "evaluate"]);
    assert_eq!(out.status.code(), Some(2));
    let d = diagnostic(&out);
    assert_eq!(d["error"], "MissingIdealClass");
    assert_eq!(d["element"], "cur:i_3");
    assert_eq!(d["exit_code"], 2);
}

#[test]
fn malformed_input_reports_the_line() {
    let dir = scratch(1);
    fs::write(dir.path().join("base.tsv"), "i_1\tid_1\n\ni_2\tid_1\tnope\n").unwrap();
    let out = run(&["--config", arg(&dir.path().join("config.json")), "evaluate"]);
    assert_eq!(out.status.code(), Some(2));
    let d = diagnostic(&out);
    assert_eq!(d["error"], "ParseError");
    assert_eq!(d["line"], 3);
}

#[test]
fn transform_then_evaluate_materialized_is_byte_identical() {
    let dir = scratch(1);
    let cfg = dir.path().join("config.json");
    let mat = dir.path().join("materialized");

    let out = run(&["--config", arg(&cfg), "--output", arg(&mat), "transform"]);
    assert!(out.status.success(), "{out:?}");
    let summary: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["non_hist_ids"], 2);
    assert_eq!(summary["ideal"], true);

    let base = fs::read_to_string(mat.join("base.tsv")).unwrap();
    let id_1: Vec<&str> = base
        .lines()
        .filter(|l| l.ends_with("\tid_1"))
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(id_1, ["cur:i_1", "cur:i_2", "hist:H:h_1", "hist:H:h_2"]);
    let weights = fs::read_to_string(mat.join("weights.tsv")).unwrap();
    assert!(weights.contains("id:id_3\t0.001\n"), "{weights}");

    let a = run(&["--config", arg(&cfg), "--render", "json", "--output", arg(&dir.path().join("a.json")), "evaluate"]);
    let b = run(&["--render", "json", "--output", arg(&dir.path().join("b.json")), "evaluate", "--materialized", arg(&mat)]);
    assert!(a.status.success() && b.status.success(), "{a:?} {b:?}");
    let a = fs::read(dir.path().join("a.json")).unwrap();
    let b = fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(String::from_utf8(a).unwrap(), String::from_utf8(b).unwrap());
}

#[test]
fn a_missing_weight_is_reported() {
    let dir = scratch(1);
    let cfg = dir.path().join("config.json");
    let mat = dir.path().join("m");
    assert!(run(&["--config", arg(&cfg), "--output", arg(&mat), "transform"]).status.success());
    let weights = fs::read_to_string(mat.join("weights.tsv")).unwrap();
    let kept: String = weights.lines().filter(|l| !l.starts_with("cur:i_2")).map(|l| format!("{l}\n")).collect();
    fs::write(mat.join("weights.tsv"), kept).unwrap();
    let out = run(&["evaluate", "--materialized", arg(&mat)]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    let d = diagnostic(&out);
    assert_eq!(d["error"], "MissingWeight");
    assert_eq!(d["element"], "cur:i_2");
}

#[test]
fn pair_sampling_is_reproducible() {
    let dir = scratch(1);
    let cfg = dir.path().join("config.json");
    let sample = |seed: &str| run(&["--config", arg(&cfg), "--seed", seed, "sample-pairs", "-n", "5"]);
    let (a, b) = (sample("1"), sample("1"));
    assert!(a.status.success(), "{a:?}");
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("# seed=1\n"), "{text}");
    assert!(text.contains("\tunjudged\thuman\n"), "{text}");

    // Synthetic ids weigh k, so pairs with them are rare; whenever one is
    // drawn it arrives already judged.
    let hit = (0..500)
        .map(|seed| stdout(&sample(&seed.to_string())))
        .find(|t| t.contains("cur:i_1\tid:id_3\t"))
        .expect("some seed draws the pair");
    assert!(hit.contains("cur:i_1\tid:id_3\tdistinct\tauto\n"), "{hit}");
}

#[test]
fn sampling_without_any_diff_exits_3() {
    let dir = scratch(1);
    let cfg = write_config(dir.path(), "base.tsv", "base.tsv", None);
    let out = run(&["--config", arg(&cfg), "sample-pairs", "-n", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(diagnostic(&out)["error"], "NothingToSample");
}

/// Every pair of fig 5's universe, judged according to its ideal.
fn fig5_full_verdicts() -> String {
    let classes = [
        ("hist:H:h_1", "y"),
        ("cur:i_1", "y"),
        ("hist:H:h_2", "c"),
        ("hist:H:h_3", "c"),
        ("hist:H:h_4", "m"),
        ("cur:i_4", "m"),
    ];
    let mut out = String::from("# seed=3\n");
    for (i, (a, ca)) in classes.iter().enumerate() {
        for (b, cb) in &classes[i + 1..] {
            let v = if ca == cb { "equiv" } else { "distinct" };
            out.push_str(&format!("{a}\t{b}\t{v}\n"));
        }
    }
    out
}

#[test]
fn fully_judged_verdicts_reproduce_exact_quality() {
    let dir = scratch(5);
    let verdicts = dir.path().join("verdicts.tsv");
    fs::write(&verdicts, fig5_full_verdicts()).unwrap();
    let cfg = dir.path().join("config.json");
    let out = run(&["--config", arg(&cfg), "--render", "json", "ingest-verdicts", "--verdicts", arg(&verdicts)]);
    assert!(out.status.success(), "{out:?}");
    let est: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_valid("estimate_report.schema.json", &est);
    assert_eq!(est["label"], "estimate");
    assert_eq!(est["seed"], 3);
    assert_eq!(est["judged_pairs"], 15);
    assert_eq!(est["coverage_weight"], 1.0);
    let q = &est["metrics"]["quality"];
    assert_eq!(percent(&q["delta_precision"]), "-8.89");
    assert_eq!(percent(&q["iq"]), "-28.13");

    let table = run(&["--config", arg(&cfg), "--render", "table", "ingest-verdicts", "--verdicts", arg(&verdicts)]);
    let table = stdout(&table);
    assert!(table.starts_with("Quality estimate from 15 judged pair(s), 0 discarded"), "{table}");
    assert!(table.contains("  ΔPrecision          -8.89%\n"), "{table}");
}

#[test]
fn verdicts_must_refer_to_sampled_pairs() {
    let dir = scratch(5);
    let cfg = dir.path().join("config.json");
    let pairs = dir.path().join("pairs.tsv");
    let out = run(&["--config", arg(&cfg), "--seed", "11", "--output", arg(&pairs), "sample-pairs", "-n", "6"]);
    assert!(out.status.success(), "{out:?}");

    // Judge every sampled pair as distinct: always consistent.
    let sampled = fs::read_to_string(&pairs).unwrap();
    let judged: String = sampled
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            format!("{}\t{}\tdistinct\n", f[0], f[1])
        })
        .collect();
    let verdicts = dir.path().join("verdicts.tsv");
    fs::write(&verdicts, &judged).unwrap();
    let out = run(&["--config", arg(&cfg), "--render", "json", "ingest-verdicts", "--pairs", arg(&pairs), "--verdicts", arg(&verdicts)]);
    assert!(out.status.success(), "{out:?}");
    let est: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_valid("estimate_report.schema.json", &est);
    assert_eq!(est["seed"], 11);

    // A pair that was never sampled is rejected.
    let all = fig5_full_verdicts();
    let extra = all
        .lines()
        .skip(1)
        .find(|l| {
            let mut f: Vec<&str> = l.split('\t').take(2).collect();
            f.sort();
            !judged.contains(&format!("{}\t{}\t", f[0], f[1]))
        })
        .expect("fewer than 15 pairs sampled");
    fs::write(&verdicts, format!("{extra}\n")).unwrap();
    let out = run(&["--config", arg(&cfg), "ingest-verdicts", "--pairs", arg(&pairs), "--verdicts", arg(&verdicts)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(diagnostic(&out)["error"], "UnknownPair");
}

#[test]
fn inconsistent_verdicts_exit_1_with_the_cycle() {
    let dir = scratch(5);
    let verdicts = dir.path().join("verdicts.tsv");
    fs::write(
        &verdicts,
        "cur:i_1\thist:H:h_1\tequiv\nhist:H:h_1\thist:H:h_2\tequiv\ncur:i_1\thist:H:h_2\tdistinct\n",
    )
    .unwrap();
    let cfg = dir.path().join("config.json");
    let out = run(&["--config", arg(&cfg), "ingest-verdicts", "--verdicts", arg(&verdicts)]);
    assert_eq!(out.status.code(), Some(1));
    let d = diagnostic(&out);
    assert_eq!(d["error"], "InconsistentJudgements");
    let conflict = &d["conflicts"][0];
    assert_eq!(conflict["distinct"], serde_json::json!(["cur:i_1", "hist:H:h_2"]));
    assert_eq!(conflict["path"], serde_json::json!(["cur:i_1", "hist:H:h_1", "hist:H:h_2"]));
}

#[test]
fn only_unsure_verdicts_are_insufficient() {
    let dir = scratch(5);
    let verdicts = dir.path().join("verdicts.tsv");
    fs::write(&verdicts, "cur:i_1\thist:H:h_1\tunsure\n").unwrap();
    let out = run(&["--config", arg(&dir.path().join("config.json")), "ingest-verdicts", "--verdicts", arg(&verdicts)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(diagnostic(&out)["error"], "InsufficientCoverage");
}

#[test]
fn figures_subcommand_checks_single_figures() {
    for n in ["6", "7"] {
        let out = run(&["figures", n, "--render", "json"]);
        assert!(out.status.success(), "{out:?}");
        let json: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_valid("figures.schema.json", &json);
        assert_eq!(json["passed"], true);
        assert_eq!(json["figures"].as_array().unwrap().len(), 1);
        assert_eq!(json["figures"][0]["id"], n.parse::<u64>().unwrap());
    }
    let out = run(&["figures", "--render", "table"]);
    assert!(out.status.success());
    assert!(stdout(&out).ends_with("10/10 figures pass\n"));

    let out = run(&["figures", "42"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(diagnostic(&out)["error"], "InvalidConfig");
}

#[test]
fn assign_labels_memberships() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("members.tsv");
    let hist = dir.path().join("hist.tsv");
    fs::write(&input, "a\tk1\nb\tk1\nc\tk2\nd\tk3\n").unwrap();
    fs::write(&hist, "a\tid_1\t2\nb\tid_2\nc\tid_2\t3\n").unwrap();

    let out = run(&["assign", "--input", arg(&input), "--hist", arg(&hist)]);
    assert!(out.status.success(), "{out:?}");
    // k1 votes id_1 (weight 2) over id_2 (1); k2 wins id_2 (3 > 1); k3 is new.
    assert_eq!(
        stdout(&out),
        "# item\tcluster_id\tweight\na\tid_1\t1\nb\tid_1\t1\nc\tid_2\t1\nd\tid_3\t1\n"
    );

    let out = run(&["assign", "--input", arg(&input), "--hist", arg(&hist), "--scheme", "fresh", "--start", "2"]);
    assert!(out.status.success(), "{out:?}");
    assert_eq!(
        stdout(&out),
        "# item\tcluster_id\tweight\na\tid_3\t1\nb\tid_3\t1\nc\tid_4\t1\nd\tid_5\t1\n"
    );
}

#[test]
fn thread_count_is_validated() {
    let out = Command::new(BIN)
        .args(["figures", "1"])
        .env("IDEVAL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(BIN)
        .args(["figures", "1", "--render", "table"])
        .env("IDEVAL_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["evaluate"]).status.code(), Some(2));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
