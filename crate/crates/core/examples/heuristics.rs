//! Compares the two remaining-time lower bounds on a synthetic grid.
//!
//!     cargo run --release --example heuristics

use spotar::bench::city_grid;
use spotar::{build_min_tree, CostModel, Heuristic, HeuristicKind, ModelMode, NodeIdx};

fn main() {
    let grid = city_grid(3, 12, 130.0, 0.1);
    let store = grid.build_store();
    let model = CostModel::new(&grid.net, &store, ModelMode::Pace);
    let dest = NodeIdx(grid.net.node_count() - 1);

    let tree = build_min_tree(&model, dest, 600);
    println!("min tree from {} covers {} nodes", grid.net.node(dest).id, tree.len());
    let sp = Heuristic::build(HeuristicKind::Sp, &model, dest, 600);
    let ba = Heuristic::build(HeuristicKind::Ba, &model, dest, 600);

    let (mut gap, mut n) = (0.0, 0);
    for v in (0..grid.net.node_count()).step_by(13).map(NodeIdx) {
        let (Some(s), Some(b)) = (sp.get_min(v), ba.get_min(v)) else { continue };
        assert!(b <= s);
        gap += f64::from(s - b);
        n += 1;
        if n <= 8 {
            println!("{:<8} SP {:>4}  BA {:>4}", grid.net.node(v).id, s, b);
        }
    }
    println!("mean SP - BA over {n} nodes: {:.1} s", gap / f64::from(n));
}
