//! Checks composed path costs against sampled travel times.
//!
//!     cargo run --release --example monte_carlo

use spotar::fixtures::{running_example_network, running_example_store};
use spotar::oracle::{monte_carlo_cdf, path_probability};
use spotar::{CostModel, ModelMode, Path};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = running_example_network();
    let store = running_example_store();
    let model = CostModel::new(&net, &store, ModelMode::Pace);
    for (ids, budget) in [(&["e1", "e4", "e9"][..], 22), (&["e2", "e6", "e9"][..], 22), (&["e1", "e5", "e8"][..], 30)] {
        let path = Path::from_ids(&net, ids)?;
        let exact = path_probability(&model, &path, budget);
        let mc = monte_carlo_cdf(&model, &path, budget, 100_000, 7);
        let z = (mc.probability - exact) / mc.standard_error.max(f64::MIN_POSITIVE);
        println!(
            "{:<12} T={budget}  exact {exact:.4}  sampled {:.4} +- {:.4}  z={z:+.2}",
            path.display(&net),
            mc.probability,
            mc.standard_error
        );
    }
    Ok(())
}
