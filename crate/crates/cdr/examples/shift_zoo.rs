// Apply every shift construction to one target law and print how each
// moves the posterior. All of them send eta through a strictly increasing
// map, which is exactly why the optimal set later survives the shift.

use cdr::monotone::MonotoneMap;
use cdr::scenario::Scenario;
use cdr::shift::{self, ShiftAction};

fn main() -> cdr::Result<()> {
    let target = Scenario::builtin("s1_five_point")?.target().clone();
    let marginal = target.marginal_density()?;

    let zoo: Vec<(&str, ShiftAction)> = vec![
        ("covariate", ShiftAction::Covariate { new_marginal: marginal.clone() }),
        ("drift (square)", ShiftAction::Drift { map: MonotoneMap::Square }),
        (
            "covariate + drift",
            ShiftAction::CovariateDrift { map: MonotoneMap::Square, new_marginal: marginal },
        ),
        ("prior 0.3 -> 0.6", ShiftAction::PriorChange { new_prior: 0.6 }),
        ("label noise (0.1, 0.2)", ShiftAction::LabelNoise { rho0: 0.1, rho1: 0.2 }),
        ("symmetric noise 0.15", ShiftAction::SymmetricNoise { nu: 0.15 }),
        (
            "one-sided noise psi(u) = u/2",
            ShiftAction::OneSidedNoise {
                psi: MonotoneMap::Affine { slope: 0.5, intercept: 0.0 },
            },
        ),
        (
            "compose: noise then prior change",
            ShiftAction::Compose(vec![
                ShiftAction::SymmetricNoise { nu: 0.1 },
                ShiftAction::PriorChange { new_prior: 0.5 },
            ]),
        ),
    ];

    let probes: Vec<Vec<f64>> = target.domain().nodes().into_iter().map(|(x, _)| x).collect();
    println!("target posterior:");
    print_row(&probes, |x| target.posterior(x))?;

    for (name, action) in zoo {
        let shifted = shift::apply(&target, &action)?;
        let map = action.induced_map(&target)?;
        println!("\n{name}: shifted posterior (map of the target's through phi)");
        print_row(&probes, |x| shifted.posterior(x))?;
        let worst = probes
            .iter()
            .map(|x| {
                let direct = shifted.posterior(x)?;
                let mapped = map.eval(target.posterior(x)?);
                Ok((direct - mapped).abs())
            })
            .collect::<cdr::Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0_f64, f64::max);
        println!("  worst |eta_shifted - phi(eta_target)| = {worst:.2e}");
    }
    Ok(())
}

fn print_row(
    probes: &[Vec<f64>],
    eta: impl Fn(&[f64]) -> cdr::Result<f64>,
) -> cdr::Result<()> {
    let values = probes.iter().map(|x| eta(x)).collect::<cdr::Result<Vec<f64>>>()?;
    let cells: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
    println!("  [{}]", cells.join(", "));
    Ok(())
}
