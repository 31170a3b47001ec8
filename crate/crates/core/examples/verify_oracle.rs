//! Cross-checks all four methods against exhaustive path enumeration on a few
//! random small instances.
//!
//!     cargo run --release --example verify_oracle

use spotar::oracle::{check_case, gen_case};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for seed in 0..10 {
        let case = gen_case(seed, 10);
        let q = case.query;
        print!(
            "seed {seed:>2}  {:>2} nodes {:>2} edges  {}->{} T={:<3}",
            case.instance.net.node_count(),
            case.instance.net.edge_count(),
            case.instance.net.node(q.source).id,
            case.instance.net.node(q.destination).id,
            q.budget
        );
        for check in check_case(&case)? {
            let mark = if check.passes(1e-9) { "ok" } else { "MISMATCH" };
            print!("  {}/{} {:.4} {mark}", check.mode, check.heuristic, check.solver_probability);
        }
        println!();
    }
    Ok(())
}
