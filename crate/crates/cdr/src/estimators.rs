//! Data-driven estimators of the optimal discovery set: a grid histogram
//! posterior with an order-statistic threshold, and kernel logistic
//! regression with a conservative scan threshold whose slack shrinks like
//! `4 sqrt(log(n+1)/n)`.
//!
//! Both estimators produce a [`SetEstimate`] whose membership rule is
//! `score(x) >= threshold`.

use std::sync::Arc;

use crate::distribution::LabeledSample;
use crate::domain::FeatureDomain;
use crate::error::{CdrError, Result};
use crate::klr::{self, FitDiagnostics, KernelSpec, KlrModel};
use crate::oracle::{Score, ThresholdClassifier};

/// Which estimation pipeline produced a set estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMethod {
    /// Histogram posterior on a grid, empirical-quantile threshold.
    OrderStatistic,
    /// Kernel logistic regression posterior, budget-scan threshold.
    KlrThreshold,
}

/// How the kernel bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// Median pairwise distance of the training features.
    Median,
    Fixed(f64),
}

/// How the regularization weight is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `m^(-1/2)` for m labeled samples.
    Auto,
    Fixed(f64),
}

/// Tunable knobs shared by both estimators; the kernel fields only matter
/// for [`EstimatorMethod::KlrThreshold`].
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Score margin subtracted from the scan threshold.
    pub beta: f64,
    /// Extra constraint slack on top of the concentration width.
    pub gamma: f64,
    /// Constant in the concentration width `C sqrt(log(n+1)/n)`. The
    /// default 4 comes from the worst-case uniform deviation bound over
    /// threshold sets; anything else is non-standard and is flagged in
    /// reports.
    pub eps_constant: f64,
    pub bandwidth: BandwidthRule,
    pub lambda: LambdaRule,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            beta: 0.05,
            gamma: 0.02,
            eps_constant: 4.0,
            bandwidth: BandwidthRule::Median,
            lambda: LambdaRule::Auto,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

impl EstimatorConfig {
    pub fn is_standard_eps(&self) -> bool {
        self.eps_constant == 4.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eps_constant", self.eps_constant),
            ("tol", self.tol),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(CdrError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if let BandwidthRule::Fixed(h) = self.bandwidth {
            KernelSpec::gaussian(h)?;
        }
        if let LambdaRule::Fixed(l) = self.lambda {
            if !l.is_finite() || l <= 0.0 {
                return Err(CdrError::InvalidParameter(format!(
                    "lambda must be positive and finite, got {l}"
                )));
            }
        }
        if self.max_iter == 0 {
            return Err(CdrError::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Uniform-deviation width `4 sqrt(log(n+1)/n)` for n unlabeled samples:
/// the threshold family of a fixed score shatters at most n+1 subsets of
/// n points, and this is the resulting high-probability sup bound on
/// |empirical - true| masses.
pub fn vc_epsilon(n: usize) -> f64 {
    vc_epsilon_with_constant(n, 4.0)
}

/// Same width with a caller-chosen leading constant (non-standard).
pub fn vc_epsilon_with_constant(n: usize, c: f64) -> f64 {
    c * (((n as f64) + 1.0).ln() / n as f64).sqrt()
}

/// Where the scan threshold landed relative to its budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetRegime {
    /// Budget at least 1: every threshold satisfies it, the rule returns
    /// `-beta` and admits everything.
    Vacuous,
    /// Budget below 1/n: no nonempty empirical set satisfies it, the
    /// threshold sits just under the top observed score.
    BelowResolution,
    Normal,
}

/// Result of the budget-scan threshold rule.
#[derive(Debug, Clone, Copy)]
pub struct ScanThreshold {
    pub threshold: f64,
    /// Total empirical budget alpha + gamma + eps_n.
    pub budget: f64,
    pub eps_n: f64,
    pub regime: BudgetRegime,
}

/// The `floor(n(1-alpha))`-th smallest score, 1-indexed.
///
/// This is the empirical quantile rule: the returned value leaves an
/// empirical mass of roughly alpha strictly above it, and membership is
/// decided by `score >= threshold`.
pub fn threshold_order_statistic(scores: &[f64], alpha: f64) -> Result<f64> {
    let n = scores.len();
    if n == 0 {
        return Err(CdrError::InvalidParameter("no scores to rank".into()));
    }
    require_unit_alpha(alpha)?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(CdrError::InvalidParameter("scores must be finite".into()));
    }
    let rank = ((n as f64) * (1.0 - alpha) + 1e-9).floor() as usize;
    if rank < 1 {
        return Err(CdrError::RankOutOfRange { n, alpha });
    }
    let rank = rank.min(n);
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok(sorted[rank - 1])
}

/// Exact infimum of `{t : #{s_i >= t + beta}/n <= alpha + gamma + eps_n}`
/// over thresholds with `t + beta` in the unit score range.
///
/// The empirical mass is a left-continuous step function of t, so the
/// infimum is a scan over the observed score values: it lands at v - beta
/// where v is the largest score still over budget, at -beta when the budget
/// is vacuous, and just under the top score when the budget is finer than
/// one sample.
pub fn threshold_scan(
    scores: &[f64],
    alpha: f64,
    beta: f64,
    gamma: f64,
    eps_constant: f64,
) -> Result<ScanThreshold> {
    let n = scores.len();
    if n == 0 {
        return Err(CdrError::InvalidParameter("no scores to scan".into()));
    }
    require_unit_alpha(alpha)?;
    for (name, v) in [("beta", beta), ("gamma", gamma), ("eps_constant", eps_constant)] {
        if !v.is_finite() || v <= 0.0 {
            return Err(CdrError::InvalidParameter(format!(
                "{name} must be positive and finite, got {v}"
            )));
        }
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(CdrError::InvalidParameter("scores must be finite".into()));
    }
    let eps_n = vc_epsilon_with_constant(n, eps_constant);
    let budget = alpha + gamma + eps_n;
    if budget >= 1.0 {
        return Ok(ScanThreshold {
            threshold: -beta,
            budget,
            eps_n,
            regime: BudgetRegime::Vacuous,
        });
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    // Walk scores from the top; count ranks with the tied block included.
    // The largest score whose upper count exceeds n * budget is the infimum
    // of the admissible range (not attained, which is what inf means here).
    let cap = (n as f64) * budget;
    let mut over = sorted[n - 1];
    let mut i = n;
    while i > 0 {
        let v = sorted[i - 1];
        let mut lo = i - 1;
        while lo > 0 && sorted[lo - 1] == v {
            lo -= 1;
        }
        let upper_count = n - lo;
        if upper_count as f64 > cap {
            over = v;
            break;
        }
        i = lo;
    }
    let regime = if cap < 1.0 { BudgetRegime::BelowResolution } else { BudgetRegime::Normal };
    Ok(ScanThreshold { threshold: over - beta, budget, eps_n, regime })
}

fn require_unit_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(CdrError::OutOfRange { value: alpha, lo: 0.0, hi: 1.0 });
    }
    Ok(())
}

/// Scan threshold for a fitted kernel model, scored on unlabeled features.
pub fn threshold_klr(
    model: &KlrModel,
    unlabeled: &[Vec<f64>],
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<ScanThreshold> {
    let scores = model.posterior_batch(unlabeled);
    threshold_scan(&scores, alpha, beta, gamma, 4.0)
}

/// Per-point posterior estimate on a grid with add-one smoothing:
/// `(#ones + 1) / (#total + 2)`. Unobserved points sit at 1/2.
pub fn fit_posterior_histogram(data: &[LabeledSample], domain: &Arc<FeatureDomain>) -> Result<Score> {
    if matches!(**domain, FeatureDomain::ContinuousBox { .. }) {
        return Err(CdrError::UnsupportedDomain(
            "histogram posterior needs a discrete grid".into(),
        ));
    }
    if data.is_empty() {
        return Err(CdrError::InvalidParameter("no labeled samples".into()));
    }
    let mut ones = vec![0.0_f64; domain.node_count()];
    let mut totals = vec![0.0_f64; domain.node_count()];
    for s in data {
        let Some(i) = domain.grid_index(&s.features) else {
            return Err(CdrError::InvalidParameter(format!(
                "sample feature {:?} is not a grid point",
                s.features
            )));
        };
        if s.label > 1 {
            return Err(CdrError::InvalidParameter(format!("labels must be 0 or 1, got {}", s.label)));
        }
        totals[i] += 1.0;
        ones[i] += f64::from(s.label);
    }
    let eta: Vec<f64> =
        ones.iter().zip(&totals).map(|(o, t)| (o + 1.0) / (t + 2.0)).collect();
    let domain = domain.clone();
    Ok(Score::from_fn(move |x| match domain.grid_index(x) {
        Some(i) => eta[i],
        None => 0.5,
    }))
}

/// Everything a set estimate records besides the decision rule itself.
#[derive(Debug, Clone)]
pub struct EstimateDiagnostics {
    pub labeled_count: usize,
    pub unlabeled_count: usize,
    /// Concentration width used by the scan rule; 0 for the quantile rule.
    pub eps_n: f64,
    pub regime: BudgetRegime,
    pub fit: Option<FitDiagnostics>,
}

/// A fitted decision set `{x : score(x) >= threshold}`.
#[derive(Debug, Clone)]
pub struct SetEstimate {
    pub score: Score,
    pub threshold: f64,
    pub method: EstimatorMethod,
    pub config: EstimatorConfig,
    pub diagnostics: EstimateDiagnostics,
}

impl SetEstimate {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.score.eval(x) >= self.threshold
    }

    /// The same rule as a classifier (deterministic, ties accepted).
    pub fn classifier(&self) -> Result<ThresholdClassifier> {
        ThresholdClassifier::new(self.score.clone(), self.threshold, 1.0)
    }
}

/// Fits the chosen posterior estimator on labeled data and thresholds it
/// with the matching rule on unlabeled data.
pub fn estimate_cdr_set(
    domain: &Arc<FeatureDomain>,
    labeled: &[LabeledSample],
    unlabeled: &[Vec<f64>],
    alpha: f64,
    method: EstimatorMethod,
    config: &EstimatorConfig,
) -> Result<SetEstimate> {
    config.validate()?;
    require_unit_alpha(alpha)?;
    if unlabeled.is_empty() {
        return Err(CdrError::InvalidParameter("no unlabeled samples".into()));
    }
    match method {
        EstimatorMethod::OrderStatistic => {
            let score = fit_posterior_histogram(labeled, domain)?;
            let scores: Vec<f64> = unlabeled.iter().map(|x| score.eval(x)).collect();
            let threshold = threshold_order_statistic(&scores, alpha)?;
            Ok(SetEstimate {
                score,
                threshold,
                method,
                config: config.clone(),
                diagnostics: EstimateDiagnostics {
                    labeled_count: labeled.len(),
                    unlabeled_count: unlabeled.len(),
                    eps_n: 0.0,
                    regime: BudgetRegime::Normal,
                    fit: None,
                },
            })
        }
        EstimatorMethod::KlrThreshold => {
            let points: Vec<Vec<f64>> = labeled.iter().map(|s| s.features.clone()).collect();
            let kernel = match config.bandwidth {
                BandwidthRule::Median => {
                    KernelSpec::gaussian(klr::median_heuristic_bandwidth(&points)?)?
                }
                BandwidthRule::Fixed(h) => KernelSpec::gaussian(h)?,
            };
            let lambda = match config.lambda {
                LambdaRule::Auto => klr::auto_lambda(labeled.len()),
                LambdaRule::Fixed(l) => l,
            };
            let model = klr::fit_klr(labeled, &kernel, lambda, config.tol, config.max_iter)?;
            let scores = model.posterior_batch(unlabeled);
            let scan =
                threshold_scan(&scores, alpha, config.beta, config.gamma, config.eps_constant)?;
            Ok(SetEstimate {
                score: model.score(),
                threshold: scan.threshold,
                method,
                config: config.clone(),
                diagnostics: EstimateDiagnostics {
                    labeled_count: labeled.len(),
                    unlabeled_count: unlabeled.len(),
                    eps_n: scan.eps_n,
                    regime: scan.regime,
                    fit: Some(model.diagnostics().clone()),
                },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Density, TablePmf};
    use crate::distribution::JointDistribution;
    use crate::fixtures::{five_point, two_gaussians, FIVE_POINT_ETA};
    use crate::oracle::Classifier;
    use approx::assert_relative_eq;

    fn at(x: f64, label: u8) -> LabeledSample {
        LabeledSample { features: vec![x], label }
    }

    #[test]
    fn histogram_smoothing_hand_values() {
        let law = five_point();
        let mut data = Vec::new();
        for _ in 0..10 {
            data.push(at(2.0, 1));
        }
        data.push(at(0.0, 1));
        data.push(at(0.0, 0));
        data.push(at(0.0, 0));
        let score = fit_posterior_histogram(&data, law.domain()).unwrap();
        // ten of ten ones
        assert_relative_eq!(score.eval(&[2.0]), 11.0 / 12.0, epsilon = 1e-15);
        // one of three ones
        assert_relative_eq!(score.eval(&[0.0]), 2.0 / 5.0, epsilon = 1e-15);
        // never observed
        assert_relative_eq!(score.eval(&[4.0]), 0.5, epsilon = 1e-15);

        assert!(matches!(
            fit_posterior_histogram(&data, two_gaussians().domain()),
            Err(CdrError::UnsupportedDomain(_))
        ));
        assert!(fit_posterior_histogram(&[], law.domain()).is_err());
        assert!(fit_posterior_histogram(&[at(0.5, 1)], law.domain()).is_err());
    }

    #[test]
    fn histogram_is_sup_consistent_at_scale() {
        let law = five_point();
        let data = law.sample_labeled(100_000, 1).unwrap();
        let score = fit_posterior_histogram(&data, law.domain()).unwrap();
        let mut worst = 0.0_f64;
        for (i, eta) in FIVE_POINT_ETA.iter().enumerate() {
            worst = worst.max((score.eval(&[i as f64]) - eta).abs());
        }
        assert!(worst <= 0.02, "sup histogram error {worst}");
    }

    #[test]
    fn order_statistic_hand_examples() {
        let decimals: Vec<f64> = (0..10).map(|i| 0.05 + 0.1 * i as f64).collect();
        assert_relative_eq!(
            threshold_order_statistic(&decimals, 0.3).unwrap(),
            0.65,
            epsilon = 1e-15
        );
        let equal = vec![0.4; 6];
        assert_relative_eq!(threshold_order_statistic(&equal, 0.3).unwrap(), 0.4, epsilon = 1e-15);
        let four = [0.1, 0.2, 0.3, 0.4];
        assert_relative_eq!(threshold_order_statistic(&four, 0.5).unwrap(), 0.2, epsilon = 1e-15);

        // unsorted input gives the same rank
        let scrambled = [0.65, 0.05, 0.95, 0.35, 0.25, 0.85, 0.15, 0.55, 0.75, 0.45];
        assert_relative_eq!(
            threshold_order_statistic(&scrambled, 0.3).unwrap(),
            0.65,
            epsilon = 1e-15
        );

        assert!(matches!(
            threshold_order_statistic(&[0.3], 0.9),
            Err(CdrError::RankOutOfRange { n: 1, .. })
        ));
        assert!(threshold_order_statistic(&[], 0.3).is_err());
        assert!(threshold_order_statistic(&[0.1], 0.0).is_err());
        assert!(threshold_order_statistic(&[0.1, f64::NAN], 0.3).is_err());
    }

    #[test]
    fn scan_threshold_vacuous_at_tiny_n() {
        // One sample: eps = 4 sqrt(log 2) > 1, so any threshold fits the
        // budget and the infimum over the unit score range is -beta.
        let one = threshold_scan(&[0.7], 0.1, 0.05, 0.01, 4.0).unwrap();
        assert_relative_eq!(one.eps_n, 4.0 * 2.0_f64.ln().sqrt(), epsilon = 1e-15);
        assert!(one.eps_n > 3.3);
        assert_eq!(one.regime, BudgetRegime::Vacuous);
        assert_relative_eq!(one.threshold, -0.05, epsilon = 1e-15);

        // Five scores: eps = 4 sqrt(log(6)/5) ~ 2.39 still swamps the budget.
        let five = threshold_scan(&[0.1, 0.3, 0.5, 0.7, 0.9], 0.4, 0.05, 0.01, 4.0).unwrap();
        assert_relative_eq!(five.eps_n, 4.0 * (6.0_f64.ln() / 5.0).sqrt(), epsilon = 1e-15);
        assert_eq!(five.regime, BudgetRegime::Vacuous);
        assert_relative_eq!(five.threshold, -0.05, epsilon = 1e-15);
    }

    #[test]
    fn scan_threshold_matches_dense_grid_oracle() {
        let n = 10_000;
        let scores: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let (alpha, beta, gamma) = (0.25, 0.05, 0.02);
        let scan = threshold_scan(&scores, alpha, beta, gamma, 4.0).unwrap();
        assert_eq!(scan.regime, BudgetRegime::Normal);

        // Independent check: brute-force the infimum over a dense threshold
        // grid, using only the defining inequality.
        let budget = alpha + gamma + vc_epsilon(n);
        let mass = |t: f64| {
            scores.iter().filter(|s| **s >= t + beta).count() as f64 / n as f64
        };
        let mut t = -0.2;
        let mut oracle = f64::INFINITY;
        while t <= 1.0 {
            if mass(t) <= budget {
                oracle = t;
                break;
            }
            t += 5e-5;
        }
        assert!(
            (scan.threshold - oracle).abs() <= 5e-5,
            "scan {} vs grid oracle {oracle}",
            scan.threshold
        );
        // The infimum is not attained: one step below the returned
        // threshold the empirical constraint is violated.
        assert!(mass(scan.threshold - 1e-9) > budget);
        assert!(mass(scan.threshold + 1e-9) <= budget);
    }

    #[test]
    fn scan_threshold_approaches_quantile_as_margins_vanish() {
        let n = 10_000;
        let scores: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let alpha = 0.3;
        let scan = threshold_scan(&scores, alpha, 1e-9, 1e-9, 4.0).unwrap();
        let quantile = threshold_order_statistic(&scores, alpha).unwrap();
        let mass_above = |t: f64| scores.iter().filter(|s| **s >= t).count() as f64 / n as f64;
        let gap = (mass_above(scan.threshold) - mass_above(quantile)).abs();
        assert!(gap <= 2.0 * vc_epsilon(n), "set-mass gap {gap}");
    }

    #[test]
    fn scan_threshold_monotone_in_alpha_and_gamma() {
        let n = 5000;
        let mut scores = Vec::with_capacity(n);
        let mut state = 88_u64;
        for _ in 0..n {
            // splitmix-style scramble, plenty for a fixed fixture
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            scores.push((state >> 11) as f64 / (1u64 << 53) as f64);
        }
        let mut prev = f64::INFINITY;
        for k in 1..=8 {
            let alpha = 0.1 * k as f64;
            let t = threshold_scan(&scores, alpha, 0.05, 0.02, 4.0).unwrap().threshold;
            assert!(t <= prev + 1e-15, "threshold rose with alpha at {alpha}");
            prev = t;
        }
        prev = f64::INFINITY;
        for k in 1..=8 {
            let gamma = 0.05 * k as f64;
            let t = threshold_scan(&scores, 0.2, 0.05, gamma, 4.0).unwrap().threshold;
            assert!(t <= prev + 1e-15, "threshold rose with gamma at {gamma}");
            prev = t;
        }
    }

    #[test]
    fn scan_threshold_flags_budget_below_resolution() {
        // 40 scores: eps ~ 1.22, force a sub-1/n budget with a tiny
        // non-standard constant.
        let scores: Vec<f64> = (1..=40).map(|i| i as f64 / 41.0).collect();
        let scan = threshold_scan(&scores, 0.01, 0.05, 0.001, 0.01).unwrap();
        assert_eq!(scan.regime, BudgetRegime::BelowResolution);
        // Threshold sits just under the top score, so the top point itself
        // is still admitted by the >= rule.
        assert_relative_eq!(scan.threshold, 40.0 / 41.0 - 0.05, epsilon = 1e-15);
    }

    fn fine_wedge() -> Arc<JointDistribution> {
        // 400 atoms on (0,1), masses proportional to |x - 1/2|, posterior
        // eta(x) = x; achievable set levels are spaced at most ~0.005 apart.
        let nodes = 400;
        let xs: Vec<f64> = (0..nodes).map(|i| (i as f64 + 0.5) / nodes as f64).collect();
        let weights: Vec<f64> = xs.iter().map(|x| (x - 0.5).abs()).collect();
        let total: f64 = weights.iter().sum();
        let prior: f64 = xs.iter().zip(&weights).map(|(x, w)| x * w / total).sum();
        let q1: Vec<f64> = xs.iter().zip(&weights).map(|(x, w)| w / total * x / prior).collect();
        let q0: Vec<f64> = xs
            .iter()
            .zip(&weights)
            .map(|(x, w)| w / total * (1.0 - x) / (1.0 - prior))
            .collect();
        let domain =
            Arc::new(FeatureDomain::grid(xs.iter().map(|x| vec![*x]).collect()).unwrap());
        Arc::new(
            JointDistribution::conditional(
                domain,
                prior,
                Density::Table(TablePmf::new(q0).unwrap()),
                Density::Table(TablePmf::new(q1).unwrap()),
            )
            .unwrap(),
        )
    }

    #[test]
    fn histogram_estimate_hits_discovery_budget_on_fine_grid() {
        let law = fine_wedge();
        let m = 40_000;
        let labeled = law.sample_labeled(m, 3).unwrap();
        let unlabeled = law.sample_unlabeled(m, 4).unwrap();
        let alpha = 0.3;
        let est = estimate_cdr_set(
            law.domain(),
            &labeled,
            &unlabeled,
            alpha,
            EstimatorMethod::OrderStatistic,
            &EstimatorConfig::default(),
        )
        .unwrap();
        let discovery: f64 = law
            .domain()
            .nodes()
            .iter()
            .filter(|(x, _)| est.contains(x))
            .map(|(x, w)| law.marginal(x) * w)
            .sum();
        assert!((discovery - alpha).abs() <= 0.05, "discovery rate {discovery}");
    }

    #[test]
    fn klr_estimate_hits_discovery_budget_with_thin_margins() {
        let law = two_gaussians();
        let labeled = law.sample_labeled(1500, 5).unwrap();
        let unlabeled = law.sample_unlabeled(250_000, 6).unwrap();
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
        assert_eq!(est.diagnostics.regime, BudgetRegime::Normal);
        let discovery: f64 = law
            .domain()
            .nodes()
            .iter()
            .filter(|(x, _)| est.contains(x))
            .map(|(x, w)| law.marginal(x) * w)
            .sum();
        assert!((discovery - alpha).abs() <= 0.05, "discovery rate {discovery}");
    }

    #[test]
    fn tiny_data_runs_stay_total() {
        let grid = five_point();
        let labeled = grid.sample_labeled(10, 9).unwrap();
        let unlabeled = grid.sample_unlabeled(10, 10).unwrap();
        let est = estimate_cdr_set(
            grid.domain(),
            &labeled,
            &unlabeled,
            0.3,
            EstimatorMethod::OrderStatistic,
            &EstimatorConfig::default(),
        )
        .unwrap();
        assert!(est.threshold.is_finite());
        let anything: Vec<bool> = (0..5).map(|i| est.contains(&[i as f64])).collect();
        assert!(anything.iter().any(|b| *b));

        let cont = two_gaussians();
        let labeled = cont.sample_labeled(10, 9).unwrap();
        let unlabeled = cont.sample_unlabeled(3, 10).unwrap();
        let est = estimate_cdr_set(
            cont.domain(),
            &labeled,
            &unlabeled,
            0.3,
            EstimatorMethod::KlrThreshold,
            &EstimatorConfig { bandwidth: BandwidthRule::Fixed(1.0), ..Default::default() },
        )
        .unwrap();
        assert_eq!(est.diagnostics.regime, BudgetRegime::Vacuous);
        // vacuous budget admits everything
        assert!(est.contains(&[0.0]) && est.contains(&[-3.0]) && est.contains(&[3.0]));

        let classifier = est.classifier().unwrap();
        assert_relative_eq!(classifier.accept_prob(&[1.0]), 1.0, epsilon = 1e-15);
    }
}
