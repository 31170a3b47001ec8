//! Solves the six-intersection example at budgets 22 and 17 and prints the
//! search transcript of the first run.
//!
//!     cargo run --example running_example

use spotar::fixtures::{running_example_network, running_example_query, running_example_store};
use spotar::{solve_with, CostModel, HeuristicKind, ModelMode, SolveOptions, TraceEvent};

fn main() {
    let net = running_example_network();
    let store = running_example_store();
    let model = CostModel::new(&net, &store, ModelMode::Pace);
    let show = |edges: &[spotar::EdgeIdx]| net.path_display(edges);

    let traced = SolveOptions { trace: true, ..SolveOptions::default() };
    let res = solve_with(&model, HeuristicKind::Sp, running_example_query(&net, 22), traced);
    for event in &res.trace {
        match event {
            TraceEvent::Extracted { path, r } => println!("extract  {:<16} r={r:.4}", show(path)),
            TraceEvent::Pushed { path, r } => println!("  push   {:<16} r={r:.4}", show(path)),
            TraceEvent::BudgetPruned { path, path_min, edge_min, node_min, budget } => println!(
                "  prune  {:<16} {path_min}+{edge_min}+{} > {budget}",
                show(path),
                node_min.map_or("inf".to_string(), |m| m.to_string())
            ),
            TraceEvent::Reached { path, probability, improved } => {
                println!(
                    "  reach  {:<16} p={probability:.2}{}",
                    show(path),
                    if *improved { " (incumbent)" } else { "" }
                )
            }
            TraceEvent::Purged { threshold, removed } => println!("  purge  r < {threshold:.2}: {removed} removed"),
            TraceEvent::Terminated { r, incumbent } => println!("stop     r={r:.4} <= incumbent {incumbent:.4}"),
            TraceEvent::Exhausted => println!("stop     queue empty"),
            other => println!("  {other:?}"),
        }
    }
    let path = res.best_path.as_ref().map_or("NONE".to_string(), |p| p.display(&net));
    println!("T=22: {path} p={:.2}", res.probability);
    if let Some(cost) = &res.cost {
        println!("      cost {cost}");
    }

    let tight = solve_with(&model, HeuristicKind::Sp, running_example_query(&net, 17), SolveOptions::default());
    println!("T=17: {} p={}", tight.best_path.map_or("NONE".to_string(), |p| p.display(&net)), tight.probability);
}
