//! End-to-end runs of the compiled binary against the bundled fixtures:
//! every subcommand, both state-file kinds, the documented exit codes, and
//! agreement between the per-version and multi-version pipelines.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use mvtgg::formats;
use mvtgg::ids::{ElementId, VersionId};
use mvtgg::iso::isomorphic_with_bookkeeping;
use mvtgg::mvm::adapt::MvGrammar;
use mvtgg::mvm::model::project_version;
use mvtgg::mvm::sync::Modification;
use mvtgg::samples;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mvtgg"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// A fresh scratch directory per test, so runs never collide.
fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mvtgg-cli-{name}"));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed with {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn bundled_fixtures_match_the_library_serializations() {
    let grammar = samples::class_diagram_grammar().unwrap();
    assert_eq!(
        fs::read_to_string(fixture("tgg.json")).unwrap(),
        formats::grammar_to_json(&grammar).unwrap()
    );
    assert_eq!(
        fs::read_to_string(fixture("diamond.json")).unwrap(),
        formats::history_to_json(&samples::diamond_history()).unwrap()
    );
    let mods = vec![
        Modification::ElementDelete { version: VersionId(4), id: ElementId(7) },
        Modification::VersionCreate { base: VersionId(4) },
    ];
    assert_eq!(
        fs::read_to_string(fixture("mods.json")).unwrap(),
        formats::mods_to_json(&mods).unwrap()
    );
}

#[test]
fn transform_then_project_extracts_the_expected_target_model() {
    let dir = workdir("project");
    let snap = dir.join("snap.json");
    let out = bin()
        .args(["transform", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--history")
        .arg(fixture("diamond.json"))
        .args(["--strategy", "mvm", "--out"])
        .arg(&snap)
        .output()
        .unwrap();
    let stdout = ok(&out);
    assert!(stdout.contains("4 versions in 4 applications"), "stdout: {stdout}");

    let v2 = dir.join("v2.json");
    let out = bin()
        .args(["project", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--state")
        .arg(&snap)
        .args(["--version", "2", "--out"])
        .arg(&v2)
        .output()
        .unwrap();
    ok(&out);

    let grammar = samples::class_diagram_grammar().unwrap();
    let graph =
        formats::graph_from_json(&fs::read_to_string(&v2).unwrap(), &grammar.merged).unwrap();
    let count = |ty: &str| {
        graph.elements().filter(|e| graph.type_name(e.id).unwrap() == ty).count()
    };
    assert_eq!(count("Class"), 2);
    assert_eq!(count("Association"), 1);
}

#[test]
fn per_version_results_agree_across_strategies() {
    let dir = workdir("agree");
    let snap = dir.join("snap.json");
    let svm = dir.join("svm.json");
    for (mode, path) in [("mvm", &snap), ("svm", &svm)] {
        let out = bin()
            .args(["transform", "--tgg"])
            .arg(fixture("tgg.json"))
            .arg("--history")
            .arg(fixture("diamond.json"))
            .args(["--strategy", mode, "--out"])
            .arg(path)
            .output()
            .unwrap();
        ok(&out);
    }

    let grammar = samples::class_diagram_grammar().unwrap();
    let mv = MvGrammar::new(&grammar).unwrap();
    let model =
        formats::snapshot_from_json(&fs::read_to_string(&snap).unwrap(), &mv.schema.type_graph)
            .unwrap();
    let world =
        formats::svm_state_from_json(&fs::read_to_string(&svm).unwrap(), &grammar).unwrap();
    assert_eq!(world.versions.len(), 4);
    for (&v, sv) in &world.versions {
        let projected = project_version(&model, &grammar, &mv.schema, v).unwrap();
        assert!(
            isomorphic_with_bookkeeping(&projected, &sv.state.graph).is_some(),
            "strategies disagree on version {v}"
        );
    }
}

#[test]
fn sync_resumes_either_state_kind() {
    let dir = workdir("sync");
    let snap = dir.join("snap.json");
    let svm = dir.join("svm.json");
    for (mode, path) in [("mvm", &snap), ("svm", &svm)] {
        let out = bin()
            .args(["transform", "--tgg"])
            .arg(fixture("tgg.json"))
            .arg("--history")
            .arg(fixture("diamond.json"))
            .args(["--strategy", mode, "--out"])
            .arg(path)
            .output()
            .unwrap();
        ok(&out);
    }

    let snap2 = dir.join("snap2.json");
    let svm2 = dir.join("svm2.json");
    for (mode, state, out_path) in [("mvm", &snap, &snap2), ("svm", &svm, &svm2)] {
        let out = bin()
            .args(["sync", "--tgg"])
            .arg(fixture("tgg.json"))
            .arg("--state")
            .arg(state)
            .arg("--mods")
            .arg(fixture("mods.json"))
            .args(["--strategy", mode, "--out"])
            .arg(out_path)
            .output()
            .unwrap();
        let stdout = ok(&out);
        assert!(stdout.contains("1 revocations"), "stdout: {stdout}");
    }

    let grammar = samples::class_diagram_grammar().unwrap();
    let mv = MvGrammar::new(&grammar).unwrap();
    let model =
        formats::snapshot_from_json(&fs::read_to_string(&snap2).unwrap(), &mv.schema.type_graph)
            .unwrap();
    let world =
        formats::svm_state_from_json(&fs::read_to_string(&svm2).unwrap(), &grammar).unwrap();
    assert_eq!(world.versions.len(), 5);
    for (&v, sv) in &world.versions {
        let projected = project_version(&model, &grammar, &mv.schema, v).unwrap();
        assert!(
            isomorphic_with_bookkeeping(&projected, &sv.state.graph).is_some(),
            "strategies disagree on version {v} after synchronization"
        );
    }
}

#[test]
fn verify_reports_every_version_ok() {
    let out = bin()
        .args(["verify", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--history")
        .arg(fixture("diamond.json"))
        .arg("--mods")
        .arg(fixture("mods.json"))
        .output()
        .unwrap();
    let stdout = ok(&out);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(report["schema"], "mvtgg-verify-report/1");
    assert_eq!(report["ok"], true);
    assert_eq!(report["initial_projection"].as_array().unwrap().len(), 4);
    assert_eq!(report["batch"].as_array().unwrap().len(), 4);
    assert_eq!(report["synchronization"].as_array().unwrap().len(), 2);
}

#[test]
fn injected_fault_aborts_with_nonzero_exit() {
    let dir = workdir("fault");
    let out = bin()
        .args(["bench", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--history")
        .arg(fixture("diamond.json"))
        .args(["--strategies", "svm-b,mvm-b", "--report"])
        .arg(dir.join("report.json"))
        .arg("--inject-fault")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("disagree"), "stderr: {stderr}");
}

#[test]
fn bench_writes_a_parsable_report() {
    let dir = workdir("bench");
    let report_path = dir.join("report.json");
    let out = bin()
        .args(["bench", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--history")
        .arg(fixture("diamond.json"))
        .arg("--mods")
        .arg(fixture("mods.json"))
        .args(["--repeat", "2", "--report"])
        .arg(&report_path)
        .output()
        .unwrap();
    let stdout = ok(&out);
    assert!(stdout.contains("results cross-checked"), "stdout: {stdout}");

    let report =
        formats::bench_report_from_json(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report.strategies.len(), 4);
    assert!(report.cross_checked);
    assert_eq!(report.versions, 5);
    assert_eq!(report.modifications, 2);
}

#[test]
fn malformed_input_exits_with_usage_code() {
    // A history file where a grammar belongs: schema mismatch.
    let out = bin()
        .args(["verify", "--tgg"])
        .arg(fixture("diamond.json"))
        .arg("--history")
        .arg(fixture("diamond.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("expected schema"), "stderr: {stderr}");

    // An unknown strategy name.
    let dir = workdir("badstrategy");
    let out = bin()
        .args(["bench", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--history")
        .arg(fixture("diamond.json"))
        .args(["--strategies", "svm-b,bogus", "--report"])
        .arg(dir.join("report.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // An unknown flag.
    let out = bin().args(["transform", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compact_drops_elements_no_longer_in_any_version() {
    let dir = workdir("compact");
    let snap = dir.join("snap.json");
    let out = bin()
        .args(["transform", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--history")
        .arg(fixture("diamond.json"))
        .args(["--strategy", "mvm", "--out"])
        .arg(&snap)
        .output()
        .unwrap();
    ok(&out);

    // Create an element in a fresh leaf, then delete it: the element and
    // everything its translation created fall out of every version.
    let mods = vec![
        Modification::VersionCreate { base: VersionId(4) },
        Modification::ElementCreate {
            version: VersionId(5),
            id: ElementId(9),
            ty: "ClassDecl".into(),
            src: None,
            tgt: None,
        },
        Modification::ElementDelete { version: VersionId(5), id: ElementId(9) },
    ];
    let mods_path = dir.join("mods.json");
    fs::write(&mods_path, formats::mods_to_json(&mods).unwrap()).unwrap();

    let synced = dir.join("synced.json");
    let out = bin()
        .args(["sync", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--state")
        .arg(&snap)
        .arg("--mods")
        .arg(&mods_path)
        .arg("--out")
        .arg(&synced)
        .output()
        .unwrap();
    ok(&out);

    let compacted = dir.join("compacted.json");
    let out = bin()
        .args(["compact", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--state")
        .arg(&synced)
        .arg("--out")
        .arg(&compacted)
        .output()
        .unwrap();
    let stdout = ok(&out);
    assert!(stdout.contains("dropped 5 dead elements"), "stdout: {stdout}");

    // The compacted snapshot still projects.
    let out = bin()
        .args(["project", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--state")
        .arg(&compacted)
        .args(["--version", "4", "--out"])
        .arg(dir.join("v4.json"))
        .output()
        .unwrap();
    ok(&out);
}

#[test]
fn generate_produces_a_verifiable_history() {
    let dir = workdir("generate");
    let history = dir.join("history.json");
    let out = bin()
        .args(["generate", "--seed", "7", "--versions", "8", "--out"])
        .arg(&history)
        .output()
        .unwrap();
    ok(&out);

    let out = bin()
        .args(["verify", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--history")
        .arg(&history)
        .output()
        .unwrap();
    ok(&out);
}

#[test]
fn seed_env_gives_reproducible_output() {
    let dir = workdir("seed");
    let a = dir.join("a.json");
    let b = dir.join("b.json");
    for path in [&a, &b] {
        let out = bin()
            .args(["transform", "--tgg"])
            .arg(fixture("tgg.json"))
            .arg("--history")
            .arg(fixture("diamond.json"))
            .args(["--strategy", "mvm", "--out"])
            .arg(path)
            .env("MVTGG_SEED", "42")
            .output()
            .unwrap();
        ok(&out);
    }
    assert_eq!(fs::read_to_string(&a).unwrap(), fs::read_to_string(&b).unwrap());

    // A malformed seed is rejected before any work happens.
    let out = bin()
        .args(["verify", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--history")
        .arg(fixture("diamond.json"))
        .env("MVTGG_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn project_reads_both_state_kinds() {
    let dir = workdir("projectkinds");
    let svm = dir.join("svm.json");
    let out = bin()
        .args(["transform", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--history")
        .arg(fixture("diamond.json"))
        .args(["--strategy", "svm", "--out"])
        .arg(&svm)
        .output()
        .unwrap();
    ok(&out);

    let v2 = dir.join("v2.json");
    let out = bin()
        .args(["project", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--state")
        .arg(&svm)
        .args(["--version", "2", "--out"])
        .arg(&v2)
        .output()
        .unwrap();
    ok(&out);

    // A graph file is not a state file.
    let out = bin()
        .args(["project", "--tgg"])
        .arg(fixture("tgg.json"))
        .arg("--state")
        .arg(&v2)
        .args(["--version", "2", "--out"])
        .arg(dir.join("x.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("expected a state file"), "stderr: {stderr}");
}
