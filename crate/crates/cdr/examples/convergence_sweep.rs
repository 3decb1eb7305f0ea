// A miniature experiment plan: sample-size ladder, seeded replicates,
// per-replicate metric rows, and a median-risk summary. The same plan
// serialized to JSON drives `cdr sweep --plan <file>`.

use cdr::experiment::{run_plan, ExperimentPlan};

fn median(risks: &mut Vec<f64>) -> f64 {
    risks.sort_by(f64::total_cmp);
    let k = risks.len();
    if k % 2 == 1 {
        risks[k / 2]
    } else {
        0.5 * (risks[k / 2 - 1] + risks[k / 2])
    }
}

fn main() -> cdr::Result<()> {
    let plan = ExperimentPlan {
        scenario: "s1_five_point".into(),
        methods: vec!["histogram".into()],
        ladder: vec![[500, 500], [2000, 2000], [8000, 8000]],
        alphas: vec![0.5],
        replicates: 20,
        seed: 47,
        out: None,
        beta: None,
        gamma: None,
        estimator: None,
    };
    println!("plan as JSON:\n{}\n", serde_json::to_string_pretty(&plan).unwrap());

    let records = run_plan(&plan)?;
    for [m, n] in &plan.ladder {
        let mut risks: Vec<f64> = records
            .iter()
            .filter(|r| r.m == *m && r.n == *n)
            .filter_map(|r| r.sym_diff_risk)
            .collect();
        let worst = risks.iter().copied().fold(f64::NAN, f64::max);
        println!(
            "m = n = {m:5}: median sym diff risk {:.4}, worst {worst:.4} ({} replicates)",
            median(&mut risks),
            risks.len()
        );
    }
    println!();
    println!("the median shrinks as the ladder grows. on a discrete marginal the");
    println!("residual error is quantized: the empirical quantile lands on either");
    println!("side of the atom just below the budget, so single-replicate risk");
    println!("hovers at that atom's mass (0.04 here) rather than decaying smoothly.");
    Ok(())
}
