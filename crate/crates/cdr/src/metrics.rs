//! Evaluation of classifiers and set estimates against exact laws: the
//! feature-mass of the symmetric difference to the optimal set, power gap,
//! discovery rate, size, constraint violation, and the density-ratio bound
//! that converts a set difference into a bound on differences of discovery
//! quantities.

use std::fmt;
use std::sync::Arc;

use crate::distribution::JointDistribution;
use crate::error::{CdrError, Result};
use crate::estimators::SetEstimate;
use crate::oracle::{self, Classifier};

/// How an evaluation integrated its probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Exact sums over a discrete grid.
    ExactGrid,
    /// Midpoint quadrature over a discretized box.
    Quadrature,
    /// Fresh evaluation sample; carries its own standard error.
    MonteCarlo { samples: usize },
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalMode::ExactGrid => write!(f, "exact_grid"),
            EvalMode::Quadrature => write!(f, "quadrature"),
            EvalMode::MonteCarlo { samples } => write!(f, "monte_carlo_{samples}"),
        }
    }
}

fn unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Feature-mass under `q` of the symmetric difference of two decision
/// rules; for randomized rules this is the expected pointwise disagreement
/// `E |a(x) - b(x)|`, which reduces to the set difference for 0/1 rules.
pub fn sym_diff(q: &JointDistribution, a: &dyn Classifier, b: &dyn Classifier) -> f64 {
    let total: f64 = q
        .domain()
        .nodes()
        .iter()
        .map(|(x, w)| w * q.marginal(x) * (a.accept_prob(x) - b.accept_prob(x)).abs())
        .sum();
    unit(total)
}

/// Both sides of the transfer bound
/// `|eB(g)+(1-e)A(g) - eB(g')-(1-e)A(g')| <= (e/pi + (1-e)/(1-pi)) * symdiff`
/// where B is power, A is size, and pi is the class prior of `q`.
#[derive(Debug, Clone, Copy)]
pub struct TransferBound {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluates the transfer bound exactly for a mixing weight `eps`.
///
/// Any weighted discovery criterion changes by at most a density-ratio
/// multiple of the symmetric-difference mass when the classifier changes;
/// `eps = pi` specializes the left side to `|D(g) - D(g')|` and `eps = 1`
/// to the power difference.
pub fn prop2_bound_check(
    q: &JointDistribution,
    eps: f64,
    g: &dyn Classifier,
    g_prime: &dyn Classifier,
) -> Result<TransferBound> {
    if !eps.is_finite() || !(0.0..=1.0).contains(&eps) {
        return Err(CdrError::OutOfRange { value: eps, lo: 0.0, hi: 1.0 });
    }
    let pi = q.prior();
    let weighted = |c: &dyn Classifier| {
        eps * oracle::power(c, q) + (1.0 - eps) * oracle::size(c, q)
    };
    let lhs = (weighted(g) - weighted(g_prime)).abs();
    let rhs = (eps / pi + (1.0 - eps) / (1.0 - pi)) * sym_diff(q, g, g_prime);
    Ok(TransferBound { lhs, rhs, holds: lhs <= rhs + 1e-12 })
}

/// One evaluation of a set estimate against the exact optimum.
#[derive(Debug, Clone, Copy)]
pub struct EvalReport {
    /// Feature-mass of the disagreement with the optimal set.
    pub sym_diff_risk: f64,
    /// Optimal power minus achieved power; can be negative when the
    /// estimate overdraws its discovery budget.
    pub power_gap: f64,
    pub discovery_rate: f64,
    pub size: f64,
    /// How far the discovery rate overshoots the budget, floored at 0.
    pub constraint_violation: f64,
    pub mode: EvalMode,
}

/// Scores a set estimate against the exact optimal set for source law `p`,
/// criterion law `q`, and budget `alpha`.
///
/// The optimal set is recomputed here from the laws; on grids all masses
/// are exact sums, on boxes they are cell-level quadrature (the optimum's
/// budget is then matched to cell resolution rather than exactly).
pub fn evaluate_estimate(
    p: &Arc<JointDistribution>,
    q: &Arc<JointDistribution>,
    alpha: f64,
    estimate: &SetEstimate,
) -> Result<EvalReport> {
    let (mode, tol) = if q.is_discrete() {
        (EvalMode::ExactGrid, 1e-9)
    } else {
        (EvalMode::Quadrature, 1e-2)
    };
    let optimal = oracle::optimal_cdr_set_exact(p, q, alpha, tol)?;
    let fitted = estimate.classifier()?;
    report_against(q, alpha, &optimal.classifier, &fitted, mode)
}

fn report_against(
    q: &JointDistribution,
    alpha: f64,
    optimal: &dyn Classifier,
    fitted: &dyn Classifier,
    mode: EvalMode,
) -> Result<EvalReport> {
    let discovery = unit(oracle::discovery_rate(fitted, q));
    Ok(EvalReport {
        sym_diff_risk: sym_diff(q, optimal, fitted),
        power_gap: oracle::power(optimal, q) - oracle::power(fitted, q),
        discovery_rate: discovery,
        size: unit(oracle::size(fitted, q)),
        constraint_violation: (discovery - alpha).max(0.0),
        mode,
    })
}

/// A sampled evaluation and the standard error of its risk estimate.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloReport {
    pub report: EvalReport,
    pub risk_std_error: f64,
}

/// Same report from a fresh evaluation sample of `q` instead of exact
/// integration; the optimal set itself is still computed exactly.
pub fn evaluate_estimate_monte_carlo(
    p: &Arc<JointDistribution>,
    q: &Arc<JointDistribution>,
    alpha: f64,
    estimate: &SetEstimate,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloReport> {
    if samples == 0 {
        return Err(CdrError::InvalidParameter("monte carlo needs samples >= 1".into()));
    }
    let tol = if q.is_discrete() { 1e-9 } else { 1e-2 };
    let optimal = oracle::optimal_cdr_set_exact(p, q, alpha, tol)?.classifier;
    let fitted = estimate.classifier()?;

    let labeled = q.sample_labeled(samples, seed)?;
    let n = samples as f64;
    let pi = q.prior();
    let mut disagree = 0.0;
    let mut accepted = 0.0;
    let mut accepted_ones = 0.0;
    let mut accepted_zeros = 0.0;
    for s in &labeled {
        let a = optimal.accept_prob(&s.features);
        let b = fitted.accept_prob(&s.features);
        disagree += (a - b).abs();
        accepted += b;
        if s.label == 1 {
            accepted_ones += b;
        } else {
            accepted_zeros += b;
        }
    }
    let risk = disagree / n;
    let discovery = accepted / n;
    let optimal_power = oracle::power(&optimal, q);
    Ok(MonteCarloReport {
        report: EvalReport {
            sym_diff_risk: risk,
            power_gap: optimal_power - accepted_ones / (n * pi),
            discovery_rate: discovery,
            size: accepted_zeros / (n * (1.0 - pi)),
            constraint_violation: (discovery - alpha).max(0.0),
            mode: EvalMode::MonteCarlo { samples },
        },
        risk_std_error: (risk * (1.0 - risk) / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Density, TablePmf};
    use crate::estimators::{
        estimate_cdr_set, BandwidthRule, BudgetRegime, EstimateDiagnostics, EstimatorConfig,
        EstimatorMethod,
    };
    use crate::fixtures::{five_point, two_gaussians};
    use crate::monotone::MonotoneMap;
    use crate::oracle::{NodeClassifier, Score, ThresholdClassifier};
    use crate::shift;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn subset(mask: u32) -> NodeClassifier {
        let law = five_point();
        let probs = (0..5).map(|i| f64::from(mask >> i & 1)).collect();
        NodeClassifier::new(law.domain().clone(), probs).unwrap()
    }

    fn manual_estimate(score: Score, threshold: f64) -> SetEstimate {
        SetEstimate {
            score,
            threshold,
            method: EstimatorMethod::OrderStatistic,
            config: EstimatorConfig::default(),
            diagnostics: EstimateDiagnostics {
                labeled_count: 0,
                unlabeled_count: 0,
                eps_n: 0.0,
                regime: BudgetRegime::Normal,
                fit: None,
            },
        }
    }

    #[test]
    fn sym_diff_hand_values() {
        let q = five_point();
        let a = subset(0b10110);
        assert_relative_eq!(sym_diff(&q, &a, &a), 0.0, epsilon = 1e-15);
        let all = subset(0b11111);
        let none = subset(0b00000);
        assert_relative_eq!(sym_diff(&q, &all, &none), 1.0, epsilon = 1e-12);
        // differ exactly on the mass-0.15 point
        let b = subset(0b10110 ^ 0b01000);
        assert_relative_eq!(sym_diff(&q, &a, &b), 0.15, epsilon = 1e-12);
        // and on the 0.04 + 0.15 points
        let c = subset(0b10110 ^ 0b01010);
        assert_relative_eq!(sym_diff(&q, &a, &c), 0.19, epsilon = 1e-12);
    }

    #[test]
    fn sym_diff_is_a_pseudometric() {
        let q = five_point();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (a, b, c) = (
                subset(rng.random_range(0..32)),
                subset(rng.random_range(0..32)),
                subset(rng.random_range(0..32)),
            );
            let (ab, ba) = (sym_diff(&q, &a, &b), sym_diff(&q, &b, &a));
            assert_relative_eq!(ab, ba, epsilon = 1e-15);
            let (bc, ac) = (sym_diff(&q, &b, &c), sym_diff(&q, &a, &c));
            assert!(ac <= ab + bc + 1e-12, "triangle broke: {ac} > {ab} + {bc}");
        }
    }

    #[test]
    fn transfer_bound_holds_on_random_pairs() {
        let grid = five_point();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..500 {
            let g = subset(rng.random_range(0..32));
            let g2 = subset(rng.random_range(0..32));
            let eps = rng.random::<f64>();
            let check = prop2_bound_check(&grid, eps, &g, &g2).unwrap();
            assert!(check.holds, "bound failed: lhs {} rhs {}", check.lhs, check.rhs);
        }

        let cont = two_gaussians();
        let eta = Score::posterior_of(&cont);
        for _ in 0..500 {
            let g = ThresholdClassifier::new(eta.clone(), rng.random::<f64>(), 1.0).unwrap();
            let g2 = ThresholdClassifier::new(eta.clone(), rng.random::<f64>(), 0.0).unwrap();
            let eps = rng.random::<f64>();
            let check = prop2_bound_check(&cont, eps, &g, &g2).unwrap();
            assert!(check.holds, "bound failed: lhs {} rhs {}", check.lhs, check.rhs);
        }

        assert!(prop2_bound_check(&grid, 1.5, &subset(1), &subset(2)).is_err());
    }

    #[test]
    fn transfer_bound_at_prior_weight_is_discovery_difference() {
        let q = five_point();
        let g = subset(0b11000);
        let g2 = subset(0b10110);
        let check = prop2_bound_check(&q, q.prior(), &g, &g2).unwrap();
        let dd = (oracle::discovery_rate(&g, &q) - oracle::discovery_rate(&g2, &q)).abs();
        assert_relative_eq!(check.lhs, dd, epsilon = 1e-12);
        // the mixed density-ratio weight collapses to 2 at eps = prior
        assert_relative_eq!(check.rhs, 2.0 * sym_diff(&q, &g, &g2), epsilon = 1e-12);
        assert!(check.holds);

        // identical rules: both sides vanish
        let same = prop2_bound_check(&q, 0.3, &g, &g).unwrap();
        assert_relative_eq!(same.lhs, 0.0, epsilon = 1e-15);
        assert_relative_eq!(same.rhs, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn oracle_set_scores_zero_risk() {
        let q = five_point();
        // budget 0.25 is exactly achievable: the optimal set keeps the two
        // top-posterior points and its threshold sits at eta = 0.6
        let est = manual_estimate(Score::posterior_of(&q), 0.6);
        let report = evaluate_estimate(&q, &q, 0.25, &est).unwrap();
        assert_eq!(report.mode, EvalMode::ExactGrid);
        assert_relative_eq!(report.sym_diff_risk, 0.0, epsilon = 1e-12);
        assert_relative_eq!(report.power_gap, 0.0, epsilon = 1e-12);
        assert_relative_eq!(report.discovery_rate, 0.25, epsilon = 1e-12);
        assert_relative_eq!(report.constraint_violation, 0.0, epsilon = 1e-12);
        // size = (discovery - pi * power) / (1 - pi), with power = 1675/3000
        let power = 1675.0 / 3000.0;
        assert_relative_eq!(report.size, (0.25 - 0.3 * power) / 0.7, epsilon = 1e-12);
    }

    #[test]
    fn complement_of_oracle_set_scores_full_risk() {
        let q = five_point();
        // at budget 0.5 the optimal set is {eta >= 0.46}; flip it
        let eta = Score::posterior_of(&q);
        let complement =
            Score::from_fn(move |x| 1.0 - eta.eval(x));
        let est = manual_estimate(complement, 1.0 - 0.455);
        let report = evaluate_estimate(&q, &q, 0.5, &est).unwrap();
        assert_relative_eq!(report.sym_diff_risk, 1.0, epsilon = 1e-12);
        assert_relative_eq!(report.discovery_rate, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn risk_identical_under_joint_shift_and_drift() {
        let q = five_point();
        let p = shift::covariate_shift_with_drift(
            &q,
            MonotoneMap::Square,
            Density::Table(TablePmf::new(vec![0.3, 0.25, 0.2, 0.15, 0.1]).unwrap()),
        )
        .unwrap();
        let estimates = [
            manual_estimate(Score::posterior_of(&p), 0.5),
            manual_estimate(Score::posterior_of(&q), 0.3),
            manual_estimate(Score::posterior_of(&q), 0.7),
        ];
        for alpha in [0.1, 0.25, 0.5] {
            for est in &estimates {
                let against_drifted = evaluate_estimate(&p, &q, alpha, est).unwrap();
                let against_plain = evaluate_estimate(&q, &q, alpha, est).unwrap();
                assert_relative_eq!(
                    against_drifted.sym_diff_risk,
                    against_plain.sym_diff_risk,
                    epsilon = 1e-12
                );
                assert_relative_eq!(
                    against_drifted.power_gap,
                    against_plain.power_gap,
                    epsilon = 1e-12
                );
                assert_relative_eq!(
                    against_drifted.discovery_rate,
                    against_plain.discovery_rate,
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn power_gap_obeys_the_transfer_rate() {
        let q = five_point();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let est = manual_estimate(Score::posterior_of(&q), rng.random::<f64>());
            let report = evaluate_estimate(&q, &q, 0.5, &est).unwrap();
            assert!(
                report.power_gap.abs() <= report.sym_diff_risk / q.prior() + 1e-12,
                "power gap {} vs risk {}",
                report.power_gap,
                report.sym_diff_risk
            );
            // risk dominates the discovery-rate difference
            assert!(report.sym_diff_risk >= (report.discovery_rate - 0.5).abs() - 1e-12);
        }
    }

    #[test]
    fn budget_mismatch_is_rejected() {
        let q = five_point();
        let est = manual_estimate(Score::posterior_of(&q), 0.6);
        // 0.3 falls between the achievable levels 0.25 and 0.50
        assert!(matches!(
            evaluate_estimate(&q, &q, 0.3, &est),
            Err(CdrError::AssumptionAViolated(_))
        ));
    }

    #[test]
    fn quadrature_report_is_coherent_for_a_fitted_estimate() {
        let law = two_gaussians();
        let labeled = law.sample_labeled(800, 21).unwrap();
        let unlabeled = law.sample_unlabeled(200_000, 22).unwrap();
        let alpha = 0.25;
        let config = EstimatorConfig {
            beta: 0.01,
            gamma: 0.005,
            bandwidth: BandwidthRule::Fixed(1.6),
            ..EstimatorConfig::default()
        };
        let est = estimate_cdr_set(
            law.domain(),
            &labeled,
            &unlabeled,
            alpha,
            EstimatorMethod::KlrThreshold,
            &config,
        )
        .unwrap();
        let report = evaluate_estimate(&law, &law, alpha, &est).unwrap();
        assert_eq!(report.mode, EvalMode::Quadrature);
        assert!(report.sym_diff_risk <= 0.2, "risk {}", report.sym_diff_risk);
        assert!((report.discovery_rate - alpha).abs() <= 0.06);
        assert_relative_eq!(
            report.constraint_violation,
            (report.discovery_rate - alpha).max(0.0),
            epsilon = 1e-15
        );
        assert!(report.sym_diff_risk >= (report.discovery_rate - alpha).abs() - 1e-9);
        assert!(report.size >= 0.0 && report.size <= 1.0);
    }

    #[test]
    fn monte_carlo_tracks_the_exact_report() {
        let q = five_point();
        let est = manual_estimate(Score::posterior_of(&q), 0.45);
        let exact = evaluate_estimate(&q, &q, 0.5, &est).unwrap();
        let mc = evaluate_estimate_monte_carlo(&q, &q, 0.5, &est, 100_000, 99).unwrap();
        assert_eq!(mc.report.mode, EvalMode::MonteCarlo { samples: 100_000 });
        assert_eq!(mc.report.mode.to_string(), "monte_carlo_100000");
        let slack = 4.0 * mc.risk_std_error + 1e-3;
        assert!(
            (mc.report.sym_diff_risk - exact.sym_diff_risk).abs() <= slack,
            "mc risk {} vs exact {}",
            mc.report.sym_diff_risk,
            exact.sym_diff_risk
        );
        assert!((mc.report.discovery_rate - exact.discovery_rate).abs() <= 0.01);
        assert!((mc.report.power_gap - exact.power_gap).abs() <= 0.02);
        assert!((mc.report.size - exact.size).abs() <= 0.01);
        assert!(evaluate_estimate_monte_carlo(&q, &q, 0.5, &est, 0, 1).is_err());
    }
}
