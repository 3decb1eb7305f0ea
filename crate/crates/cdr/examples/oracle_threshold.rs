// Solve the population problem exactly: maximize power subject to a hard
// cap on the overall discovery rate. The optimum is a posterior threshold
// rule, randomized on at most one atom; on small grids a brute-force
// search over all deterministic-plus-tie rules agrees.

use cdr::oracle::{
    brute_force_gnp, discovery_rate, optimal_cdr_set, power, size, Classifier, GnpProblem,
};
use cdr::scenario::Scenario;

fn main() -> cdr::Result<()> {
    let q = Scenario::builtin("s1_five_point")?.target().clone();

    for alpha in [0.1, 0.25, 0.5] {
        let sol = optimal_cdr_set(&q, &q, alpha)?;
        println!(
            "alpha {alpha}: threshold {:.4}, tie probability {:.4}",
            sol.classifier.threshold, sol.classifier.tie_probability
        );
        println!(
            "  discovery rate {:.4} (budget {alpha}), power {:.4}, false alarm rate {:.4}",
            discovery_rate(&sol.classifier, &q),
            power(&sol.classifier, &q),
            size(&sol.classifier, &q)
        );
    }

    // the same machinery handles any pair of contamination levels
    let problem = GnpProblem::new(0.2, 0.9, 0.3)?;
    let walk = cdr::oracle::solve_gnp_threshold(
        &cdr::oracle::Score::posterior_of(&q),
        &q,
        &problem,
    )?;
    let (brute, brute_objective, brute_constraint) = brute_force_gnp(&q, &problem)?;
    println!(
        "\ngeneral instance (0.2, 0.9) at budget 0.3: walk objective {:.6}, brute force {:.6}",
        walk.objective, brute_objective
    );
    println!(
        "constraints: walk {:.6}, brute force {:.6}",
        walk.constraint, brute_constraint
    );
    let agree = q
        .domain()
        .nodes()
        .iter()
        .all(|(x, _)| (walk.classifier.accept_prob(x) - brute.accept_prob(x)).abs() < 1e-9);
    println!("pointwise agreement: {agree}");
    Ok(())
}
