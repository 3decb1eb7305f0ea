// Build a joint law two ways (discrete grid, continuous box), read off its
// posterior, and check seeded sampling against the model.

use std::sync::Arc;

use cdr::density::{Density, TablePmf};
use cdr::distribution::JointDistribution;
use cdr::domain::FeatureDomain;
use cdr::scenario::Scenario;

fn main() -> cdr::Result<()> {
    // a five-atom grid with hand-picked class-conditional tables
    let domain = Arc::new(FeatureDomain::grid((0..5).map(|i| vec![i as f64]).collect())?);
    let q0 = Density::Table(TablePmf::new(vec![0.6538, 0.0354, 0.1929, 0.0857, 0.0322])?);
    let q1 = Density::Table(TablePmf::new(vec![0.0077, 0.0507, 0.3833, 0.3000, 0.2583])?);
    let grid_law = Arc::new(JointDistribution::conditional(domain, 0.3, q0, q1)?);

    println!("grid law, prior {}", grid_law.prior());
    for (x, _) in grid_law.domain().nodes() {
        println!(
            "  x = {:?}: marginal {:.4}, posterior {:.4}",
            x,
            grid_law.marginal(&x),
            grid_law.posterior(&x)?
        );
    }

    let labeled = grid_law.sample_labeled(50_000, 7)?;
    let ones = labeled.iter().filter(|s| s.label == 1).count() as f64 / labeled.len() as f64;
    println!("empirical label-1 rate {ones:.4} (prior {})", grid_law.prior());

    // the same interface over a discretized interval with Gaussian classes
    let box_law = Scenario::builtin("s2_two_gaussians")?.target().clone();
    println!("\nbox law on [-4, 4], prior {}", box_law.prior());
    for x in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        println!("  x = {x:+.1}: posterior {:.4}", box_law.posterior(&[x])?);
    }

    let draws = box_law.sample_unlabeled(50_000, 11)?;
    let right_half = draws.iter().filter(|x| x[0] >= 0.0).count() as f64 / draws.len() as f64;
    println!("sampled mass of [0, 4]: {right_half:.4} (symmetry gives 0.5)");
    Ok(())
}
