// Corrupt labels at sampling time and compare against the law-level
// construction: flipping labels with rates (rho0, rho1) is the same, in
// distribution, as drifting the posterior through the affine map
// u -> rho0 + (1 - rho0 - rho1) u.

use std::collections::HashMap;

use cdr::scenario::Scenario;
use cdr::shift::{self, LabelNoise, ShiftAction};

fn main() -> cdr::Result<()> {
    let q = Scenario::builtin("s1_five_point")?.target().clone();
    let (rho0, rho1) = (0.1, 0.2);
    let n = 200_000;

    let noisy = shift::sample_noisy_labels(
        &q,
        &LabelNoise::Fixed { rho0, rho1 },
        n,
        23,
    )?;

    // empirical corrupted posterior per grid node
    let mut ones: HashMap<i64, (usize, usize)> = HashMap::new();
    for s in &noisy {
        let entry = ones.entry(s.features[0] as i64).or_default();
        entry.1 += 1;
        if s.label == 1 {
            entry.0 += 1;
        }
    }

    let corrupted = shift::apply(&q, &ShiftAction::LabelNoise { rho0, rho1 })?;
    println!("node: corrupted-law posterior vs empirical noisy rate ({n} draws)");
    let mut worst = 0.0_f64;
    for (x, _) in q.domain().nodes() {
        let (k, total) = ones[&(x[0] as i64)];
        let empirical = k as f64 / total as f64;
        let model = corrupted.posterior(&x)?;
        worst = worst.max((empirical - model).abs());
        println!(
            "  {:?}: model {model:.4}, empirical {empirical:.4} (clean {:.4})",
            x,
            q.posterior(&x)?
        );
    }
    println!("worst gap {worst:.4}");

    // one-sided noise only flips class 0, so the class-1 share can only grow
    let psi = cdr::monotone::MonotoneMap::Affine { slope: 0.5, intercept: 0.0 };
    let one_sided = shift::sample_noisy_labels(&q, &LabelNoise::OneSided { psi }, n, 29)?;
    let clean = q.sample_labeled(n, 23)?;
    let rate = |s: &[cdr::distribution::LabeledSample]| {
        s.iter().filter(|v| v.label == 1).count() as f64 / s.len() as f64
    };
    println!(
        "\nlabel-1 share: clean {:.4}, one-sided noisy {:.4}",
        rate(&clean),
        rate(&one_sided)
    );
    Ok(())
}
