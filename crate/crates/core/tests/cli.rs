use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spotar::fixtures::{running_example_network, running_example_store};
use spotar::oracle::exact_spotar;
use spotar::{CostModel, Histogram, ModelMode, Query};

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

fn spotar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spotar")).args(args).env_remove("SPOTAR_LOG").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data(name: &str) -> String {
    format!("{DATA}/{name}")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Builds the running-example store into `dir`.
fn fixture_store(dir: &Path) -> PathBuf {
    let out = dir.join("example.store.json");
    let o = spotar(&[
        "build",
        "--network",
        &data("running_example.network.csv"),
        "--trajectories",
        &data("running_example.trajectories.csv"),
        "--out",
        s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn query(store: &Path, extra: &[&str]) -> Output {
    let net = data("running_example.network.csv");
    let mut args = vec!["query", "--store", s(store), "--network", &net, "--from", "s", "--to", "d"];
    args.extend_from_slice(extra);
    spotar(&args)
}

#[test]
fn build_reports_the_example_weights() {
    let dir = tempfile::tempdir().unwrap();
    let store = fixture_store(dir.path());
    let o = spotar(&[
        "build",
        "--network",
        &data("running_example.network.csv"),
        "--trajectories",
        &data("running_example.trajectories.csv"),
        "--out",
        s(&dir.path().join("again.json")),
    ]);
    assert_eq!(stdout(&o).split(" -> ").next(), Some("edges measured=9 fallback=0 path weights=2"));
    assert_eq!(std::fs::read(&store).unwrap(), std::fs::read(dir.path().join("again.json")).unwrap());
}

#[test]
fn build_with_no_trajectories_warns() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let net = data("running_example.network.csv");
    let o = spotar(&["build", "--network", &net, "--trajectories", s(&empty), "--out", s(&dir.path().join("x.json"))]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("edges measured=0 fallback=9 path weights=0"), "{}", stdout(&o));
}

#[test]
fn build_reports_bad_lines() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "10,e1:8;e4:6\n5,e1:8;e9:4\n").unwrap();
    let net = data("running_example.network.csv");
    let o = spotar(&["build", "--network", &net, "--trajectories", s(&bad), "--out", s(&dir.path().join("x.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn query_prints_the_reliable_route() {
    let dir = tempfile::tempdir().unwrap();
    let store = fixture_store(dir.path());
    let o = query(&store, &["--budget", "22", "--dump-dist"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("⟨e2,e6,e9⟩ p=0.70"));
    assert!(lines.next().unwrap().starts_with("probability=0.7"));
    let dist = Histogram::parse_debug(1, &lines.collect::<Vec<_>>().join("\n")).unwrap();
    let want = Histogram::new(1, [(18, 0.28), (22, 0.42), (25, 0.12), (29, 0.18)]).unwrap();
    assert!(dist.approx_eq(&want, 1e-9), "{dist}");
}

#[test]
fn infeasible_budget_prints_none() {
    let dir = tempfile::tempdir().unwrap();
    let store = fixture_store(dir.path());
    let o = query(&store, &["--budget", "1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("NONE p=0"));
}

#[test]
fn unknown_node_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let store = s(&fixture_store(dir.path())).to_string();
    let net = data("running_example.network.csv");
    let o = spotar(&["query", "--store", &store, "--network", &net, "--from", "s", "--to", "zz", "--budget", "22"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("zz"), "{}", stderr(&o));
}

#[test]
fn both_models_match_the_oracle_on_the_example() {
    let dir = tempfile::tempdir().unwrap();
    let store_path = fixture_store(dir.path());
    let net = running_example_network();
    let store = running_example_store();
    for (flag, mode) in [("pace", ModelMode::Pace), ("edge", ModelMode::Edge)] {
        for heuristic in ["sp", "ba"] {
            let o = query(&store_path, &["--budget", "22", "--model", flag, "--heuristic", heuristic]);
            let line = stdout(&o).lines().nth(1).unwrap().to_string();
            let p: f64 = line.split_whitespace().next().unwrap().trim_start_matches("probability=").parse().unwrap();
            let model = CostModel::new(&net, &store, mode);
            let exact = exact_spotar(&model, Query::by_ids(&net, "s", "d", 22).unwrap()).unwrap();
            assert!((p - exact.probability).abs() < 1e-9, "{flag}/{heuristic}: {p} vs {}", exact.probability);
        }
    }
}

#[test]
fn explored_edges_are_dumped() {
    let dir = tempfile::tempdir().unwrap();
    let store = fixture_store(dir.path());
    let out = dir.path().join("explored.csv");
    let o = query(&store, &["--budget", "22", "--explored-out", s(&out)]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("edge,from,to,from_lat,from_lon,to_lat,to_lon"));
    let edges: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert!(edges.contains(&"e9") && !edges.contains(&"e3"), "{edges:?}");
}

#[test]
fn bench_names_a_missing_key() {
    let dir = tempfile::tempdir().unwrap();
    let store = fixture_store(dir.path());
    let cfg = dir.path().join("bench.conf");
    std::fs::write(&cfg, "seed = 1\nqueries_per_cell = 2\nmethods = SP+PACE\n").unwrap();
    let net = data("running_example.network.csv");
    let o = spotar(&[
        "bench",
        "--store",
        s(&store),
        "--network",
        &net,
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("runs.csv")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("distance_buckets"), "{}", stderr(&o));
}

#[test]
fn synth_bench_covers_every_method_and_cell() {
    let dir = tempfile::tempdir().unwrap();
    let (net, traj, store) = (dir.path().join("g.csv"), dir.path().join("t.csv"), dir.path().join("g.json"));
    let o = spotar(&["synth", "--side", "12", "--out-network", s(&net), "--out-trajectories", s(&traj)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(spotar(&["build", "--network", s(&net), "--trajectories", s(&traj), "--out", s(&store)]).status.success());
    let cfg = dir.path().join("bench.conf");
    std::fs::write(&cfg, "seed = 3\ndistance_buckets = 0-0.5, 0.5-1\nqueries_per_cell = 2\nmethods = SP+PACE, SP+EDGE, BA+PACE, BA+EDGE\n")
        .unwrap();
    let runs = dir.path().join("runs.csv");
    let o = spotar(&[
        "bench",
        "--store",
        s(&store),
        "--network",
        s(&net),
        "--config",
        s(&cfg),
        "--out",
        s(&runs),
        "--alt-budgets",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = spotar::bench::rows_from_csv(&std::fs::read_to_string(&runs).unwrap()).unwrap();
    assert_eq!(rows.len(), 4 * 2 * 2 * 4);
    assert!(rows.iter().all(|r| [400, 600, 800, 1000].contains(&r.budget)));
    assert!(dir.path().join("runs.agg.csv").exists());
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("SP+") || l.starts_with("BA+")).count(), 4 * 4 * 2);
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let net = dir.path().join(format!("{run}.net.csv"));
        let traj = dir.path().join(format!("{run}.traj.csv"));
        let o =
            spotar(&["synth", "--seed", "9", "--side", "8", "--out-network", s(&net), "--out-trajectories", s(&traj)]);
        assert!(o.status.success());
        outputs.push((std::fs::read(net).unwrap(), std::fs::read(traj).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn verify_passes_on_a_few_instances() {
    let o = spotar(&["verify", "--seed", "5", "--instances", "4"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.contains("FAIL")).count(), 0);
}

#[test]
fn verify_rejects_oversized_instances() {
    let o = spotar(&["verify", "--max-nodes", "40"]);
    assert_eq!(o.status.code(), Some(1));
}
