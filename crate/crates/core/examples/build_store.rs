//! Instantiates weights from the 200 trajectories over `<e1,e4>`, round-trips
//! the store through JSON, and compares both models with the observed totals.
//!
//!     cargo run --example build_store

use std::collections::BTreeMap;

use spotar::fixtures::{running_example_network, E1_E4_TRAJECTORIES};
use spotar::weights::parse_trajectories;
use spotar::{build_store, CostModel, Histogram, ModelMode, Path, StoreConfig, WeightStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = running_example_network();
    let records = parse_trajectories(&net, E1_E4_TRAJECTORIES, 1)?;
    let store = build_store(&net, &records, StoreConfig::default())?;
    let summary = store.summary();
    println!(
        "measured edges {} fallback {} path weights {}",
        summary.measured_edges, summary.fallback_edges, summary.path_weights
    );

    let json = store.to_json(&net);
    let reloaded = WeightStore::from_json(&net, &json)?;
    assert_eq!(reloaded.to_json(&net), json);
    println!("json round trip ok ({} bytes)", json.len());

    let path = Path::from_ids(&net, &["e1", "e4"])?;
    let mut totals = BTreeMap::new();
    for r in records.iter().filter(|r| r.edges() == path.edges()) {
        *totals.entry(r.total_time()).or_insert(0) += r.count();
    }
    let observed = Histogram::from_counts(1, &totals)?;
    println!("observed  {observed}");

    for mode in [ModelMode::Pace, ModelMode::Edge] {
        let cost = CostModel::new(&net, &reloaded, mode).path_cost(&path)?;
        println!("{mode:<9} {cost}  L1={:.2}", cost.l1_distance(&observed));
    }
    Ok(())
}
