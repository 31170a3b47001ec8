//! Histogram and joint-distribution algebra on the example weights.
//!
//!     cargo run --example distributions

use spotar::fixtures::{running_example_network, running_example_store};
use spotar::{CostModel, Histogram, JointDist, ModelMode, Path};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = running_example_network();
    let e = |id: &str| net.edge_idx(id).unwrap();

    let w1 = Histogram::new(1, [(8, 0.9), (10, 0.1)])?;
    let w5 = Histogram::new(1, [(8, 0.8), (10, 0.2)])?;
    let sum = w1.convolve(&w5)?;
    println!("W(e1) * W(e5)      = {sum}");
    println!("  mean {:.2}, P(<= 17) = {:.2}", sum.mean(), sum.cdf(17));

    // A joint weight keeps the per-edge times together; its cost forgets them.
    let j14 = JointDist::new(1, vec![e("e1"), e("e4")], [(vec![8, 6], 0.8), (vec![10, 10], 0.2)])?;
    let j9 = JointDist::from_histogram(e("e9"), &Histogram::new(1, [(5, 0.4), (9, 0.6)])?);
    let product = j14.joint_product(&j9)?;
    println!("W(<e1,e4>) x W(e9) = {}", product.to_cost());
    println!("  marginal on e4    = {}", product.edge_marginal(1));

    // The model composes the same path from whatever the store holds.
    let store = running_example_store();
    for mode in [ModelMode::Edge, ModelMode::Pace] {
        let model = CostModel::new(&net, &store, mode);
        let path = Path::from_ids(&net, &["e2", "e6", "e9"])?;
        let units: Vec<String> = model.coarsest_combination(&path).iter().map(|u| u.display(&net)).collect();
        println!("{mode:<4} <e2,e6,e9> units {} cost {}", units.join(" "), model.path_cost(&path)?);
    }

    let a = Histogram::new(1, [(18, 0.28), (22, 0.42), (25, 0.12), (29, 0.18)])?;
    let b = Histogram::new(1, [(19, 0.32), (23, 0.48), (25, 0.08), (29, 0.12)])?;
    println!("dominance a>b {} b>a {}", a.dominates(&b)?, b.dominates(&a)?);
    Ok(())
}
