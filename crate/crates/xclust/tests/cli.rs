use std::path::{Path, PathBuf};
use std::process::Command;

use xclust::cli::run_from;
use xclust::jsonl::read_chain;
use xclust_core::synthgen::Scenario;
use xclust_core::chain::chain_id;
use xclust_core::{expected_impact, generate, ImpactReport};

fn xclust(args: &[&str]) -> anyhow::Result<xclust::manifest::RunManifest> {
    run_from(std::iter::once("xclust").chain(args.iter().copied()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_scenario() -> Scenario {
    Scenario {
        seed: 11,
        n_entities: 60,
        ..Scenario::default()
    }
}

fn generated(dir: &Path) -> Vec<PathBuf> {
    let out = dir.join("gen");
    xclust(&["--out", s(&out), "generate", "--seed", "11", "--entities", "60"]).unwrap();
    ["btc", "ltc", "doge", "clam"]
        .iter()
        .map(|c| out.join(format!("{c}.jsonl")))
        .collect()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn generated_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let files = generated(dir.path());
    let (snaps, _) = generate(&small_scenario()).unwrap();
    for snap in &snaps {
        let path = dir.path().join("gen").join(format!("{}.jsonl", snap.chain()));
        let (parsed, warnings) = read_chain(&path).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(parsed.txs(), snap.txs());
    }
    assert_eq!(files.len(), snaps.len());
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = xclust(&["--out", s(&dir.path().join("a")), "generate", "--seed", "5", "--entities", "40"]).unwrap();
    let b = xclust(&["--out", s(&dir.path().join("b")), "generate", "--seed", "5", "--entities", "40"]).unwrap();
    assert!(!a.outputs.is_empty());
    assert_eq!(a.outputs, b.outputs);
    let c = xclust(&["--out", s(&dir.path().join("c")), "generate", "--seed", "6", "--entities", "40"]).unwrap();
    assert_ne!(a.outputs, c.outputs);
}

#[test]
fn stats_table_has_one_row_per_metric() {
    let dir = tempfile::tempdir().unwrap();
    let files = generated(dir.path());
    let out = dir.path().join("stats");
    let mut args = vec!["--out", s(&out), "stats"];
    args.extend(files.iter().map(|f| s(f)));
    xclust(&args).unwrap();
    let rows = csv_rows(&out.join("stats.csv"));
    let names: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(
        names,
        [
            "Tip",
            "Transactions",
            "Transaction Outputs",
            "Addresses",
            "Address Clusters",
            "Non-Trivial Address Clusters"
        ]
    );
    let (snaps, _) = generate(&small_scenario()).unwrap();
    let header = csv::Reader::from_path(out.join("stats.csv")).unwrap().headers().unwrap().clone();
    for (col, chain) in header.iter().enumerate().skip(1) {
        let snap = snaps.iter().find(|x| x.chain().as_str() == chain).unwrap();
        assert_eq!(rows[1][col], snap.len().to_string());
    }
}

#[test]
fn venn_universe_partitions_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let files = generated(dir.path());
    let out = dir.path().join("venn");
    let mut args = vec!["--out", s(&out), "--format", "json", "venn", "--universe", "clam"];
    args.extend(files.iter().map(|f| s(f)));
    xclust(&args).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("venn.json")).unwrap()).unwrap();
    let total: u64 = v.as_array().unwrap().iter().map(|r| r["addresses"].as_u64().unwrap()).sum();
    let (clam, _) = read_chain(&files[3]).unwrap();
    assert_eq!(total, xclust_core::chain_stats(&clam).n_addresses);
    assert!(v.as_array().unwrap().iter().all(|r| r["chains"].as_str().unwrap().contains("clam")));
}

#[test]
fn impact_matches_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let files = generated(dir.path());
    let out = dir.path().join("impact");
    let mut args = vec!["--out", s(&out), "impact", "--source", "clam", "--target", "btc,ltc", "--target", "doge"];
    args.extend(files.iter().map(|f| s(f)));
    xclust(&args).unwrap();
    let report: ImpactReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("impact.json")).unwrap()).unwrap();
    let (_, gt) = generate(&small_scenario()).unwrap();
    assert_eq!(report.targets.len(), 3);
    for t in &report.targets {
        let e = expected_impact(&gt, &chain_id("clam"), &t.target);
        assert_eq!(t.summary.components, e.components, "{}", t.target);
        assert_eq!(t.summary.impacted_clusters, e.impacted_clusters, "{}", t.target);
        assert_eq!(t.summary.stars, e.stars, "{}", t.target);
    }
    let edges = csv_rows(&out.join("edges.csv"));
    assert!(!edges.is_empty());
    assert!(edges.iter().all(|r| r[2] != "clam"));
    assert!(edges.iter().any(|r| r[0] == "clam"));
}

fn write(path: &Path, lines: &[&str]) {
    std::fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn hub_files(dir: &Path) -> [PathBuf; 3] {
    let a = dir.join("A.jsonl");
    let b = dir.join("B.jsonl");
    let c = dir.join("C.jsonl");
    write(
        &a,
        &[
            r#"{"tx":"a0","h":0,"t":0,"in":[],"out":[{"a":"blue","v":1},{"a":"green","v":1}]}"#,
            r#"{"tx":"a1","h":1,"t":1,"in":["blue","green"],"out":[{"a":"pink","v":2}]}"#,
        ],
    );
    write(
        &b,
        &[
            r#"{"tx":"b0","h":0,"t":0,"in":[],"out":[{"a":"blue","v":1},{"a":"red","v":1},{"a":"green","v":1},{"a":"orange","v":1}]}"#,
            r#"{"tx":"b1","h":1,"t":1,"in":["blue","red"],"out":[{"v":2}]}"#,
            r#"{"tx":"b2","h":1,"t":2,"in":["green","orange"],"out":[{"v":2}]}"#,
        ],
    );
    write(
        &c,
        &[
            r#"{"tx":"c0","h":0,"t":0,"in":[],"out":[{"a":"red","v":1},{"a":"white","v":1},{"a":"orange","v":1}]}"#,
            r#"{"tx":"c1","h":1,"t":1,"in":["red","white"],"out":[{"v":2}]}"#,
        ],
    );
    [a, b, c]
}

#[test]
fn hub_impact_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let [a, b, c] = hub_files(dir.path());
    let out = dir.path().join("out");
    xclust(&["--out", s(&out), "impact", "--source", "A", "--target", "B,C", s(&a), s(&b), s(&c), "--dot"]).unwrap();
    let report: ImpactReport =
        serde_json::from_str(&std::fs::read_to_string(out.join("impact.json")).unwrap()).unwrap();
    let to_b = &report.targets[0];
    assert_eq!(to_b.target.as_str(), "B");
    assert_eq!(to_b.summary.components, 1);
    assert_eq!(to_b.summary.impacted_clusters, 2);
    assert!(to_b.components[0].star);
    assert_eq!(to_b.components[0].witnesses, ["a1"]);
    assert_eq!(report.targets[1].summary.components, 0);
    assert_eq!(report.multi_hop.len(), 1);
    assert!(!report.multi_hop[0].star);
    assert_eq!(report.multi_hop[0].vertices.len(), 5);

    let dot = std::fs::read_to_string(out.join("graph.dot")).unwrap();
    assert_eq!(dot.matches(" -- ").count(), 4);
}

#[test]
fn combine_against_itself_has_no_diff() {
    let dir = tempfile::tempdir().unwrap();
    let [a, b, _] = hub_files(dir.path());
    let out = dir.path().join("out");
    let m = xclust(&["--out", s(&out), "combine", "--name", "all", s(&a), s(&b), "--compare-to", "A,B", "--compare-name", "same"])
        .unwrap();
    assert!(m.warnings.is_empty(), "{:?}", m.warnings);
    assert!(csv_rows(&out.join("diff.csv")).is_empty());
    let hasse: xclust_core::HasseDiagram =
        serde_json::from_str(&std::fs::read_to_string(out.join("hasse.json")).unwrap()).unwrap();
    assert_eq!(hasse.equal, [("same".to_string(), "all".to_string())]);
    let mut coarser: Vec<&str> = hasse.edges.iter().map(|e| e.coarser.as_str()).collect();
    coarser.sort();
    assert_eq!(coarser, ["A", "B"]);
}

#[test]
fn disjoint_chains_leave_only_the_combinations_in_the_hasse_diagram() {
    let dir = tempfile::tempdir().unwrap();
    let [a, b, c] = hub_files(dir.path());
    let out = dir.path().join("out");
    let m = xclust(&["--out", s(&out), "combine", "--name", "all", s(&a), s(&b), s(&c), "--compare-to", "A,B", "--compare-name", "ab"])
        .unwrap();
    assert_eq!(m.warnings.len(), 1);
    assert!(m.warnings[0].contains("disjoint"));
    let hasse: xclust_core::HasseDiagram =
        serde_json::from_str(&std::fs::read_to_string(out.join("hasse.json")).unwrap()).unwrap();
    assert_eq!(hasse.edges.len(), 1);
    assert_eq!((hasse.edges[0].finer.as_str(), hasse.edges[0].coarser.as_str()), ("all", "ab"));
}

#[test]
fn combine_diff_lists_merged_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let [a, b, _] = hub_files(dir.path());
    let out = dir.path().join("out");
    let m = xclust(&["--out", s(&out), "combine", "--name", "A+B", s(&a), s(&b), "--compare-to", "B"]).unwrap();
    assert_eq!(m.command, "combine");
    let rows = csv_rows(&out.join("diff.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0], ["blue", "2", "4"]);
}

#[test]
fn rerun_verifies_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let files = generated(dir.path());
    let out = dir.path().join("cl");
    let mut args = vec!["--out", s(&out), "cluster", "--provenance"];
    args.extend(files.iter().map(|f| s(f)));
    let first = xclust(&args).unwrap();
    assert_eq!(first.outputs.len(), 12);
    let again = xclust(&["rerun", s(&out.join("manifest.json")), "--verify"]).unwrap();
    assert_eq!(again.outputs, first.outputs);

    std::fs::write(&files[0], "").unwrap();
    let e = xclust(&["rerun", s(&out.join("manifest.json"))]).unwrap_err();
    assert!(e.to_string().contains("changed"), "{e}");
}

#[test]
fn bad_input_exits_non_zero_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.jsonl");
    write(
        &f,
        &[r#"{"tx":"a","h":0,"t":0,"in":[],"out":[{"v":1}]}"#, r#"{"tx":"b","h":0,"t":0,"in":[],"out":"#],
    );
    let out = Command::new(env!("CARGO_BIN_EXE_xclust"))
        .args(["--out", s(&dir.path().join("o")), "stats", s(&f)])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("x.jsonl:2:"), "{err}");
}

#[test]
fn unknown_chain_and_duplicates_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let [a, b, _] = hub_files(dir.path());
    let out = dir.path().join("o");
    let e = xclust(&["--out", s(&out), "impact", "--source", "Z", "--target", "B", s(&a), s(&b)]).unwrap_err();
    assert!(e.to_string().contains("unknown chain id \"Z\""), "{e}");
    let e = xclust(&["--out", s(&out), "stats", s(&a), s(&a)]).unwrap_err();
    assert!(e.to_string().contains("given twice"), "{e}");
}

#[test]
fn warnings_land_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("w.jsonl");
    write(&f, &[r#"{"tx":"a","h":0,"t":0,"in":["ghost"],"out":[{"a":"x","v":1}]}"#]);
    let m = xclust(&["--out", s(&dir.path().join("o")), "stats", s(&f)]).unwrap();
    assert_eq!(m.warnings.len(), 1);
    let on_disk = xclust::manifest::RunManifest::read(&dir.path().join("o/manifest.json")).unwrap();
    assert_eq!(on_disk, m);
}
