//! A small benchmark sweep on a generated 16x16 grid, aggregated per cell.
//!
//!     cargo run --release --example bench_grid

use spotar::bench::{aggregate, city_grid, run_bench, BenchConfig};

const CONFIG: &str = "
seed = 5
budgets = 300, 500
distance_buckets = 0-1, 1-2
queries_per_cell = 3
methods = SP+PACE, SP+EDGE, BA+PACE, BA+EDGE
max_labels = 20000
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = city_grid(1, 16, 130.0, 0.1);
    let store = grid.build_store();
    let cfg = BenchConfig::parse(CONFIG)?;
    let rows = run_bench(&grid.net, &store, &cfg)?;
    println!("{} rows", rows.len());
    for c in aggregate(&rows) {
        println!(
            "{:<8} T={:<5} {}-{} km  p={:.3}  explored {:>7.1} +- {:>6.1}  labels {:>8.1}  incomplete {}",
            c.method.to_string(),
            c.budget,
            c.bucket_lo,
            c.bucket_hi,
            c.mean_probability,
            c.mean_explored_edges,
            c.std_explored_edges,
            c.mean_expanded_labels,
            c.incomplete
        );
    }
    Ok(())
}
