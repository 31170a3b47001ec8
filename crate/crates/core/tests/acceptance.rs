//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the verdicts always reach the test log; exits non-zero on any failure.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spotar::bench::{city_grid, run_bench, BenchConfig, Method};
use spotar::fixtures::{
    running_example_network, running_example_query, running_example_store, running_example_store_from_tables,
    E1_E4_TRAJECTORIES,
};
use spotar::oracle::{brute_force_min_time, check_case, gen_case, gen_instance, monte_carlo_cdf, path_probability};
use spotar::solver::{dominance_check, DomEntry, Dominance};
use spotar::weights::parse_trajectories;
use spotar::{
    arrival_prob, build_store, solve_with, CostModel, EdgeIdx, Heuristic, HeuristicKind, Histogram, JointDist,
    ModelMode, Network, NodeIdx, Path, SolveOptions, SolveResult, StoreConfig, Time, TraceEvent, WeightStore,
};

const PROB_TOL: f64 = 1e-9;
const GOLDEN_RUNTIME_S: f64 = 1.0;
const ORACLE_INSTANCES: u64 = 120;
const ORACLE_RUNTIME_S: f64 = 60.0;
const HEURISTIC_SAMPLES: usize = 1000;
const CHAIN_LENGTH: usize = 200;
const MC_SAMPLES: usize = 100_000;
const MC_SIGMAS: f64 = 3.0;

type Verdict = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= PROB_TOL
}

fn hist(pairs: &[(Time, f64)]) -> Histogram {
    Histogram::new(1, pairs.iter().copied()).unwrap()
}

fn ids(net: &Network, edges: &[EdgeIdx]) -> Vec<String> {
    edges.iter().map(|&e| net.edge(e).id.clone()).collect()
}

fn traced(store: &WeightStore, budget: Time) -> (Network, SolveResult) {
    let net = running_example_network();
    let model = CostModel::new(&net, store, ModelMode::Pace);
    let res = solve_with(
        &model,
        HeuristicKind::Sp,
        running_example_query(&net, budget),
        SolveOptions { trace: true, ..SolveOptions::default() },
    );
    (net, res)
}

fn golden_running_example() -> Verdict {
    let mut worst = 0.0_f64;
    for (label, store) in [("trajectories", running_example_store()), ("tables", running_example_store_from_tables())] {
        let start = Instant::now();
        let (net, res) = traced(&store, 22);
        let elapsed = start.elapsed().as_secs_f64();
        worst = worst.max(elapsed);
        let path = res.best_path.as_ref().map(|p| ids(&net, p.edges()));
        check(path == Some(vec!["e2".into(), "e6".into(), "e9".into()]), || format!("{label}: path {path:?}"))?;
        check(close(res.probability, 0.70), || format!("{label}: p={}", res.probability))?;
        let incumbent = res.trace.iter().any(|ev| {
            matches!(ev, TraceEvent::Reached { path, probability, improved: true }
                if ids(&net, path) == ["e1", "e4", "e9"] && close(*probability, 0.32))
        });
        check(incumbent, || format!("{label}: no incumbent <e1,e4,e9> at 0.32 in the transcript"))?;
        check(elapsed < GOLDEN_RUNTIME_S, || format!("{label}: took {elapsed:.3}s"))?;
    }
    Ok(format!("<e2,e6,e9> p=0.70 after incumbent <e1,e4,e9> p=0.32, {worst:.4}s"))
}

fn intermediate_goldens() -> Verdict {
    let net = running_example_network();
    let store = running_example_store();
    let model = CostModel::new(&net, &store, ModelMode::Pace);
    let cost = |ids: &[&str]| model.path_cost(&Path::from_ids(&net, ids).unwrap()).unwrap();
    let expect = |name: &str, got: &Histogram, want: &[(Time, f64)]| {
        check(got.approx_eq(&hist(want), PROB_TOL), || format!("{name}: got {got}"))
    };

    let w1 = store.edge_weight(net.edge_idx("e1").unwrap());
    let w5 = store.edge_weight(net.edge_idx("e5").unwrap());
    expect("W(e1)*W(e5)", &w1.convolve(w5).unwrap(), &[(16, 0.72), (18, 0.26), (20, 0.02)])?;
    expect("<e1,e4,e9>", &cost(&["e1", "e4", "e9"]), &[(19, 0.32), (23, 0.48), (25, 0.08), (29, 0.12)])?;
    expect("<e2,e6,e9>", &cost(&["e2", "e6", "e9"]), &[(18, 0.28), (22, 0.42), (25, 0.12), (29, 0.18)])?;

    let sp = Heuristic::build(HeuristicKind::Sp, &model, net.node_idx("d").unwrap(), 22);
    let min_at = |n: &str| sp.get_min(net.node_idx(n).unwrap());
    for (path, node, want) in [(&["e1", "e4"][..], "q", 0.80), (&["e2", "e6"][..], "q", 0.70), (&["e2"][..], "r", 1.0)]
    {
        let got = arrival_prob(&cost(path), min_at(node), 22);
        check(close(got, want), || format!("arrival_prob {path:?} = {got}, want {want}"))?;
    }

    let (a, b) = (cost(&["e1", "e4"]), cost(&["e2", "e6"]));
    let nodes = [net.node_idx("q").unwrap()];
    let verdict = dominance_check(&[DomEntry { cost: &a, nodes: &nodes }], DomEntry { cost: &b, nodes: &nodes });
    check(verdict == Dominance::Keep, || format!("dominance on <e1,e4> vs <e2,e6>: {verdict:?}"))?;
    Ok("convolution, two path costs, three arrival probabilities, incomparable pair".into())
}

fn pruning_goldens() -> Verdict {
    let (net, res) = traced(&running_example_store(), 22);
    let pruned = |want: &[&str], parts: (Time, Time, Time)| {
        res.trace.iter().any(|ev| {
            matches!(ev, TraceEvent::BudgetPruned { path, path_min, edge_min, node_min: Some(node_min), budget: 22 }
                if ids(&net, path) == want && (*path_min, *edge_min, *node_min) == parts
                    && path_min + edge_min + node_min > 22)
        })
    };
    let queued = |want: &[&str]| {
        res.trace.iter().any(|ev| matches!(ev, TraceEvent::Pushed { path, .. } if ids(&net, path) == want))
    };
    check(pruned(&["e1", "e5"], (8, 8, 8)), || "<e1,e5> not pruned as 8+8+8 > 22".into())?;
    check(pruned(&["e2", "e3"], (8, 11, 11)), || "<e2,e3> not pruned as (8+11)+11 > 22".into())?;
    check(!queued(&["e1", "e5"]) && !queued(&["e2", "e3"]), || "a pruned extension was queued".into())?;
    Ok("<e1,e5>: 8+8+8 > 22, <e2,e3>: (8+11)+11 > 22, neither queued".into())
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut checks = 0;
    for seed in 0..ORACLE_INSTANCES {
        let case = gen_case(seed, 10);
        check(case.instance.net.node_count() <= 10 && case.instance.net.edge_count() <= 20, || {
            format!("seed {seed}: instance too large")
        })?;
        for c in check_case(&case).map_err(|e| format!("seed {seed}: {e}"))? {
            check(c.passes(PROB_TOL), || format!("seed {seed} {}/{}: {c:?}", c.mode, c.heuristic))?;
            checks += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    check(elapsed < ORACLE_RUNTIME_S, || format!("took {elapsed:.1}s"))?;
    Ok(format!("{ORACLE_INSTANCES} instances, {checks} method runs agree, {elapsed:.1}s"))
}

/// Empirical total-time histogram of every contiguous sub-path that at
/// least `min_support` trajectories traverse end to end.
fn empirical_paths(records: &[spotar::TrajectoryRecord], cfg: StoreConfig) -> BTreeMap<Vec<EdgeIdx>, Histogram> {
    let mut counts: BTreeMap<Vec<EdgeIdx>, BTreeMap<Time, u64>> = BTreeMap::new();
    for r in records {
        let n = r.edges().len();
        for i in 0..n {
            for j in i + 1..=n.min(i + cfg.max_unit_len) {
                let total = r.times()[i..j].iter().sum();
                *counts.entry(r.edges()[i..j].to_vec()).or_default().entry(total).or_default() += r.count();
            }
        }
    }
    counts
        .into_iter()
        .filter(|(_, c)| c.values().sum::<u64>() >= cfg.min_support)
        .map(|(p, c)| (p, Histogram::from_counts(cfg.resolution, &c).unwrap()))
        .collect()
}

fn ground_truth_alignment() -> Verdict {
    let cfg = StoreConfig::default();
    let mut covered = 0;
    let mut corpora: Vec<(String, Network, Vec<spotar::TrajectoryRecord>)> = Vec::new();
    let fixture = running_example_network();
    corpora.push(("e1-e4".into(), fixture.clone(), parse_trajectories(&fixture, E1_E4_TRAJECTORIES, 1).unwrap()));
    corpora.push(("example".into(), fixture.clone(), spotar::fixtures::running_example_trajectories(&fixture)));
    for seed in 0..20 {
        let inst = gen_instance(seed, 8, 0.2, 0.4);
        corpora.push((format!("seed {seed}"), inst.net, inst.trajectories));
    }
    for (label, net, records) in &corpora {
        let store = build_store(net, records, cfg).unwrap();
        let model = CostModel::new(net, &store, ModelMode::Pace);
        for (edges, truth) in empirical_paths(records, cfg) {
            let cost = model.path_cost(&Path::new(net, edges.clone()).unwrap()).unwrap();
            check(cost.approx_eq(&truth, PROB_TOL), || {
                format!("{label} {:?}: PACE {cost} vs observed {truth}", ids(net, &edges))
            })?;
            covered += 1;
        }
    }

    let records = parse_trajectories(&fixture, E1_E4_TRAJECTORIES, 1).unwrap();
    let store = build_store(&fixture, &records, cfg).unwrap();
    let p = Path::from_ids(&fixture, &["e1", "e4"]).unwrap();
    let truth = empirical_paths(&records, cfg).remove(p.edges()).unwrap();
    let edge = CostModel::new(&fixture, &store, ModelMode::Edge).path_cost(&p).unwrap();
    let l1 = edge.l1_distance(&truth);
    check(l1 > 0.0, || "EDGE matches the observed totals".into())?;
    check(edge.prob(16) > 0.0 && edge.prob(18) > 0.0 && truth.prob(16) == 0.0 && truth.prob(18) == 0.0, || {
        format!("EDGE {edge} vs observed {truth}")
    })?;
    Ok(format!("PACE exact on {covered} covered paths; EDGE on <e1,e4> L1={l1:.2} with mass at 16 and 18"))
}

fn heuristic_properties() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut samples = 0;
    let mut seed = 1000;
    while samples < HEURISTIC_SAMPLES {
        let case = gen_case(seed, 10);
        seed += 1;
        let net = &case.instance.net;
        let model = CostModel::new(net, &case.store, ModelMode::Pace);
        let dest = case.query.destination;
        for _ in 0..10 {
            let v = NodeIdx(rng.gen_range(0..net.node_count()));
            let budget = rng.gen_range(1..=60);
            let truth = brute_force_min_time(&model, v, dest).map_err(|e| e.to_string())?;
            let sp = Heuristic::build(HeuristicKind::Sp, &model, dest, budget).get_min(v);
            let ba = Heuristic::build(HeuristicKind::Ba, &model, dest, budget).get_min(v);
            match sp {
                Some(m) => {
                    check(truth.is_some_and(|t| m <= t), || format!("seed {seed} v{}: SP {m} > {truth:?}", v.0))?;
                    check(ba.is_some_and(|b| b <= m), || format!("seed {seed} v{}: BA {ba:?} > SP {m}", v.0))?;
                }
                None => check(truth.is_none_or(|t| t > budget), || {
                    format!("seed {seed} v{}: SP gave up but {truth:?} <= {budget}", v.0)
                })?,
            }
            samples += 1;
        }
    }

    let grid = city_grid(4, 16, 130.0, 0.1);
    let store = grid.build_store();
    let cfg = BenchConfig::parse(
        "seed = 8\ndistance_buckets = 0-1, 1-2\nqueries_per_cell = 4\nmethods = SP+PACE, SP+EDGE, BA+PACE, BA+EDGE\n",
    )
    .map_err(|e| e.to_string())?;
    let rows = run_bench(&grid.net, &store, &cfg).map_err(|e| e.to_string())?;
    check(rows.iter().all(|r| r.complete), || "a bench row stopped early".into())?;
    let by_key: BTreeMap<(usize, Method), &spotar::bench::BenchRow> =
        rows.iter().map(|r| ((r.query_id, r.method), r)).collect();
    let mut pairs = 0;
    for (&(q, m), sp) in by_key.iter().filter(|((_, m), _)| m.heuristic == HeuristicKind::Sp) {
        let ba = by_key[&(q, Method { heuristic: HeuristicKind::Ba, mode: m.mode })];
        check(sp.explored_edges <= ba.explored_edges, || {
            format!("query {q} {}: SP explored {} > BA {}", m.mode, sp.explored_edges, ba.explored_edges)
        })?;
        check(close(sp.probability, ba.probability), || {
            format!("query {q} {}: SP p={} BA p={}", m.mode, sp.probability, ba.probability)
        })?;
        pairs += 1;
    }
    Ok(format!("{samples} bound samples; SP <= BA explored on {pairs} bench row pairs"))
}

fn random_hist(rng: &mut ChaCha8Rng, max_support: usize) -> Histogram {
    let n = rng.gen_range(1..=max_support);
    let pairs: Vec<(Time, f64)> = (0..n).map(|_| (rng.gen_range(1..12), rng.gen_range(0.05..1.0))).collect();
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    Histogram::new(1, pairs.into_iter().map(|(t, p)| (t, p / total))).unwrap()
}

fn random_joint(rng: &mut ChaCha8Rng, edges: Vec<EdgeIdx>) -> JointDist {
    let n = rng.gen_range(1..=4);
    let rows: Vec<(Vec<Time>, f64)> =
        (0..n).map(|_| (edges.iter().map(|_| rng.gen_range(1..9)).collect(), rng.gen_range(0.1..1.0))).collect();
    let total: f64 = rows.iter().map(|r| r.1).sum();
    JointDist::new(1, edges, rows.into_iter().map(|(t, p)| (t, p / total))).unwrap()
}

fn distribution_algebra() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut acc = Histogram::identity(1);
    for _ in 0..CHAIN_LENGTH {
        acc = acc.convolve(&random_hist(&mut rng, 4)).unwrap();
    }
    let drift = (acc.total_mass() - 1.0).abs();
    check(drift <= PROB_TOL, || format!("mass drift {drift:e} after {CHAIN_LENGTH} convolutions"))?;

    for _ in 0..200 {
        let (a, b, c) = (random_hist(&mut rng, 5), random_hist(&mut rng, 5), random_hist(&mut rng, 5));
        let ab = a.convolve(&b).unwrap();
        check(ab.approx_eq(&b.convolve(&a).unwrap(), 1e-12), || format!("{a} * {b} not commutative"))?;
        let left = ab.convolve(&c).unwrap();
        let right = a.convolve(&b.convolve(&c).unwrap()).unwrap();
        check(left.approx_eq(&right, 1e-12), || format!("({a} * {b}) * {c} not associative"))?;

        let ja = random_joint(&mut rng, vec![EdgeIdx(0), EdgeIdx(1)]);
        let jb = random_joint(&mut rng, vec![EdgeIdx(2)]);
        let product = ja.joint_product(&jb).unwrap().to_cost();
        let convolved = ja.to_cost().convolve(&jb.to_cost()).unwrap();
        check(product.approx_eq(&convolved, 1e-12), || format!("product cost {product} vs {convolved}"))?;
    }

    let mut worst_z = 0.0_f64;
    let mut paths = 0;
    let fixture = running_example_network();
    let fixture_store = running_example_store();
    let mut targets: Vec<(Network, WeightStore, Vec<EdgeIdx>, Time)> = Vec::new();
    for (ids, t) in [(&["e1", "e4", "e9"][..], 22), (&["e2", "e6", "e9"][..], 22), (&["e1", "e4", "e7"][..], 30)] {
        let p = Path::from_ids(&fixture, ids).unwrap();
        targets.push((fixture.clone(), fixture_store.clone(), p.into_edges(), t));
    }
    for seed in [3, 11] {
        let case = gen_case(seed, 10);
        let model = CostModel::new(&case.instance.net, &case.store, ModelMode::Pace);
        let exact = spotar::oracle::exact_spotar(&model, case.query).map_err(|e| e.to_string())?;
        if let Some(p) = exact.best_path {
            targets.push((case.instance.net.clone(), case.store.clone(), p.into_edges(), case.query.budget));
        }
    }
    for (k, (net, store, edges, budget)) in targets.iter().enumerate() {
        let model = CostModel::new(net, store, ModelMode::Pace);
        let path = Path::new(net, edges.clone()).unwrap();
        let exact = path_probability(&model, &path, *budget);
        let mc = monte_carlo_cdf(&model, &path, *budget, MC_SAMPLES, 100 + k as u64);
        let diff = (mc.probability - exact).abs();
        check(diff <= MC_SIGMAS * mc.standard_error + 1e-12, || {
            format!("{}: sampled {} +- {} vs exact {exact}", path.display(net), mc.probability, mc.standard_error)
        })?;
        if mc.standard_error > 0.0 {
            worst_z = worst_z.max(diff / mc.standard_error);
        }
        paths += 1;
    }
    Ok(format!(
        "mass drift {drift:.1e} after {CHAIN_LENGTH}; algebra on 200 draws; Monte-Carlo on {paths} paths, worst {worst_z:.2} SE"
    ))
}

fn strip_wall_time(csv: &str) -> Result<Vec<String>, String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().ok_or("empty csv")?.split(',').collect();
    let col = header.iter().position(|h| *h == "wall_time_s").ok_or("no wall_time_s column")?;
    Ok(std::iter::once(header.join(","))
        .chain(
            lines.map(|l| {
                l.split(',').enumerate().filter(|(i, _)| *i != col).map(|(_, f)| f).collect::<Vec<_>>().join(",")
            }),
        )
        .collect())
}

fn bench_determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/data/bench.quick.conf");
    let run = |args: &[&str]| {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = spotar::cli::run_with(std::iter::once("spotar").chain(args.iter().copied()), &mut out, &mut err);
        if code == 0 {
            Ok(())
        } else {
            Err(format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err)))
        }
    };
    run(&["synth", "--out-network", &p("g.net.csv"), "--out-trajectories", &p("g.traj.csv")])?;
    run(&["build", "--network", &p("g.net.csv"), "--trajectories", &p("g.traj.csv"), "--out", &p("g.store.json")])?;
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        run(&[
            "bench",
            "--store",
            &p("g.store.json"),
            "--network",
            &p("g.net.csv"),
            "--config",
            config,
            "--out",
            &p(name),
        ])?;
        outputs.push(strip_wall_time(&std::fs::read_to_string(p(name)).map_err(|e| e.to_string())?)?);
    }
    check(outputs[0].len() > 1, || "no rows".into())?;
    check(outputs[0] == outputs[1], || "runs differ outside wall_time_s".into())?;
    Ok(format!("two runs, {} identical rows modulo wall_time_s", outputs[0].len() - 1))
}

type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 8] = [
        ("golden running example", golden_running_example),
        ("intermediate values", intermediate_goldens),
        ("pruning goldens", pruning_goldens),
        ("oracle equivalence", oracle_equivalence),
        ("ground-truth alignment", ground_truth_alignment),
        ("heuristic properties", heuristic_properties),
        ("distribution algebra", distribution_algebra),
        ("bench determinism", bench_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
