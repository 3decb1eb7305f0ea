//! Population-level solvers: the contaminated two-class testing problem in
//! its general (theta0, theta1) form, its discovery-rate instance, threshold
//! classifiers with tie randomization, and a small brute-force linear
//! program used as an independent check.
//!
//! Conventions: the *scoring* law supplies the posterior used to order
//! feature points; the *criterion* law supplies every probability that is
//! being optimized or constrained. Passing the same law twice gives the
//! classical setting; passing a monotone-drifted source as the scoring law
//! must give the same solution set, which is what the immunity tests
//! exercise.

use std::fmt;
use std::sync::Arc;

use crate::distribution::{require_shared_domain, require_unit_interval, JointDistribution, SCORE_ATOM_TOL};
use crate::domain::FeatureDomain;
use crate::error::{CdrError, Result};

const BRUTE_FORCE_CAP: usize = 64;

/// Real-valued score over the feature domain.
#[derive(Clone)]
pub struct Score(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>);

impl Score {
    pub fn from_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Score(Arc::new(f))
    }

    /// The posterior of `law` as a score; 0 outside the support.
    pub fn posterior_of(law: &Arc<JointDistribution>) -> Self {
        let law = law.clone();
        Score(Arc::new(move |x| law.posterior(x).unwrap_or(0.0)))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Score(..)")
    }
}

/// Anything that maps a feature point to an acceptance probability.
pub trait Classifier {
    fn accept_prob(&self, x: &[f64]) -> f64;
}

/// Accepts above a score threshold, randomizes on the threshold atom.
#[derive(Debug, Clone)]
pub struct ThresholdClassifier {
    pub score: Score,
    pub threshold: f64,
    pub tie_probability: f64,
}

impl ThresholdClassifier {
    pub fn new(score: Score, threshold: f64, tie_probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tie_probability) || !tie_probability.is_finite() {
            return Err(CdrError::OutOfRange { value: tie_probability, lo: 0.0, hi: 1.0 });
        }
        if !threshold.is_finite() {
            return Err(CdrError::InvalidParameter(format!("threshold {threshold} must be finite")));
        }
        Ok(ThresholdClassifier { score, threshold, tie_probability })
    }
}

impl Classifier for ThresholdClassifier {
    fn accept_prob(&self, x: &[f64]) -> f64 {
        let v = self.score.eval(x);
        if (v - self.threshold).abs() <= SCORE_ATOM_TOL {
            self.tie_probability
        } else if v > self.threshold {
            1.0
        } else {
            0.0
        }
    }
}

/// Acceptance probabilities listed per grid node; 0 off the grid.
#[derive(Debug, Clone)]
pub struct NodeClassifier {
    domain: Arc<FeatureDomain>,
    probs: Vec<f64>,
}

impl NodeClassifier {
    pub fn new(domain: Arc<FeatureDomain>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != domain.node_count() {
            return Err(CdrError::InvalidParameter(format!(
                "{} probabilities for {} grid nodes",
                probs.len(),
                domain.node_count()
            )));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(CdrError::InvalidParameter("acceptance probabilities must lie in [0, 1]".into()));
        }
        Ok(NodeClassifier { domain, probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

impl Classifier for NodeClassifier {
    fn accept_prob(&self, x: &[f64]) -> f64 {
        self.domain.grid_index(x).map_or(0.0, |i| self.probs[i])
    }
}

/// Contaminated two-class testing problem. The objective measure has density
/// theta1*q1 + (1-theta1)*q0 and the constraint measure has density
/// theta0*q1 + (1-theta0)*q0; the constraint budget is alpha.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GnpProblem {
    pub theta0: f64,
    pub theta1: f64,
    pub alpha: f64,
}

impl GnpProblem {
    pub fn new(theta0: f64, theta1: f64, alpha: f64) -> Result<Self> {
        if !(theta0.is_finite() && theta1.is_finite() && (0.0..=1.0).contains(&theta0) && (0.0..=1.0).contains(&theta1)) {
            return Err(CdrError::InvalidParameter(format!(
                "contamination levels must lie in [0, 1], got ({theta0}, {theta1})"
            )));
        }
        if theta0 >= theta1 {
            return Err(CdrError::InvalidParameter(format!(
                "need theta0 < theta1 for a nondegenerate problem, got ({theta0}, {theta1})"
            )));
        }
        require_unit_interval(alpha)?;
        Ok(GnpProblem { theta0, theta1, alpha })
    }

    /// The discovery-rate instance: the constraint measure is the feature
    /// marginal of a law with the given class-1 prior, the objective is the
    /// class-1 conditional.
    pub fn cdr(prior: f64, alpha: f64) -> Result<Self> {
        if !(prior.is_finite() && prior > 0.0 && prior < 1.0) {
            return Err(CdrError::DegeneratePrior(prior));
        }
        GnpProblem::new(prior, 1.0, alpha)
    }

    /// Contaminated density values at a point, given clean class-conditional
    /// values: (constraint density, objective density).
    pub fn contaminated_density_values(&self, q0: f64, q1: f64) -> (f64, f64) {
        (
            self.theta0 * q1 + (1.0 - self.theta0) * q0,
            self.theta1 * q1 + (1.0 - self.theta1) * q0,
        )
    }

    /// Valid interval of contaminated likelihood-ratio thresholds; the upper
    /// end is infinite when theta0 = 0.
    pub fn lambda_bounds(&self) -> (f64, f64) {
        let lo = (1.0 - self.theta1) / (1.0 - self.theta0);
        let hi = if self.theta0 > 0.0 { self.theta1 / self.theta0 } else { f64::INFINITY };
        (lo, hi)
    }

    /// Contaminated likelihood-ratio threshold equivalent to clean threshold
    /// `gamma`.
    pub fn lambda_from_gamma(&self, gamma: f64) -> Result<f64> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(CdrError::InvalidParameter(format!(
                "clean threshold must be a nonnegative real, got {gamma}"
            )));
        }
        Ok((1.0 - self.theta1 + gamma * self.theta1) / (1.0 - self.theta0 + gamma * self.theta0))
    }

    /// Clean likelihood-ratio threshold equivalent to contaminated threshold
    /// `lambda`; errors outside [`Self::lambda_bounds`].
    pub fn gamma_from_lambda(&self, lambda: f64) -> Result<f64> {
        let (lo, hi) = self.lambda_bounds();
        if !lambda.is_finite() || lambda < lo - 1e-12 || lambda >= hi {
            return Err(CdrError::OutOfRange { value: lambda, lo, hi });
        }
        Ok((lambda * (1.0 - self.theta0) - (1.0 - self.theta1)) / (self.theta1 - lambda * self.theta0))
    }
}

/// Solved instance: the optimal randomized threshold rule plus the achieved
/// objective and constraint values under the criterion law.
#[derive(Debug, Clone)]
pub struct GnpSolution {
    pub classifier: ThresholdClassifier,
    pub objective: f64,
    pub constraint: f64,
    /// Constraint mass of the atom the rule randomizes on.
    pub tie_mass: f64,
    /// Objective mass of that atom.
    tie_objective: f64,
}

impl GnpSolution {
    /// Rounds the tie probability to 0 or 1, whichever leaves the constraint
    /// usage closer to the budget `alpha`; errors when both roundings move
    /// the usage further than `tol` from the budget. On laws where some
    /// score superlevel set hits the budget exactly this is lossless.
    pub fn rounded(&self, alpha: f64, tol: f64) -> Result<GnpSolution> {
        let without = self.constraint - self.tie_probability_mass();
        let with = without + self.tie_mass;
        let (q, usage) = if (without - alpha).abs() <= (with - alpha).abs() {
            (0.0, without)
        } else {
            (1.0, with)
        };
        if (usage - alpha).abs() > tol {
            return Err(CdrError::AssumptionAViolated(format!(
                "no score superlevel set reaches budget {alpha} within {tol}: closest usage {usage}"
            )));
        }
        let objective =
            self.objective + (q - self.classifier.tie_probability) * self.tie_objective;
        let mut classifier = self.classifier.clone();
        classifier.tie_probability = q;
        Ok(GnpSolution {
            classifier,
            objective,
            constraint: usage,
            tie_mass: self.tie_mass,
            tie_objective: self.tie_objective,
        })
    }

    fn tie_probability_mass(&self) -> f64 {
        self.classifier.tie_probability * self.tie_mass
    }
}

/// Per-merged-atom weights used by the solver walk.
struct ScoredAtom {
    score: f64,
    w0: f64,
    w1: f64,
}

fn scored_atoms(
    score: &Score,
    criterion: &JointDistribution,
    problem: &GnpProblem,
) -> Result<Vec<ScoredAtom>> {
    let mut raw: Vec<ScoredAtom> = Vec::new();
    for (x, w) in criterion.domain().nodes() {
        let q0 = criterion.class_density_value(0, &x);
        let q1 = criterion.class_density_value(1, &x);
        let (c0, c1) = problem.contaminated_density_values(q0, q1);
        let (w0, w1) = (w * c0, w * c1);
        if w0 <= 0.0 && w1 <= 0.0 {
            continue;
        }
        raw.push(ScoredAtom { score: score.eval(&x), w0, w1 });
    }
    raw.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap());
    let mut atoms: Vec<ScoredAtom> = Vec::new();
    for a in raw {
        match atoms.last_mut() {
            Some(last) if (last.score - a.score).abs() <= SCORE_ATOM_TOL => {
                last.w0 += a.w0;
                last.w1 += a.w1;
            }
            _ => atoms.push(a),
        }
    }
    Ok(atoms)
}

/// Solves the contaminated testing problem by walking score atoms in
/// descending order and spending the constraint budget greedily; the
/// resulting randomized threshold rule is optimal whenever the score is a
/// strictly increasing function of the clean likelihood ratio.
pub fn solve_gnp_threshold(
    score: &Score,
    criterion: &JointDistribution,
    problem: &GnpProblem,
) -> Result<GnpSolution> {
    let atoms = scored_atoms(score, criterion, problem)?;
    if atoms.is_empty() {
        return Err(CdrError::InvalidParameter("criterion law carries no mass".into()));
    }
    let alpha = problem.alpha;
    let mut spent = 0.0;
    let mut objective = 0.0;
    for a in &atoms {
        if spent + a.w0 <= alpha + SCORE_ATOM_TOL {
            spent += a.w0;
            objective += a.w1;
            continue;
        }
        let q = ((alpha - spent) / a.w0).clamp(0.0, 1.0);
        let classifier = ThresholdClassifier::new(score.clone(), a.score, q)?;
        return Ok(GnpSolution {
            classifier,
            objective: objective + q * a.w1,
            constraint: spent + q * a.w0,
            tie_mass: a.w0,
            tie_objective: a.w1,
        });
    }
    // budget never exhausted: accept everything with positive weight
    let last = atoms.last().expect("nonempty");
    let classifier = ThresholdClassifier::new(score.clone(), last.score, 1.0)?;
    Ok(GnpSolution { classifier, objective, constraint: spent, tie_mass: last.w0, tie_objective: last.w1 })
}

/// Optimal discovery-rate-constrained rule: thresholds the scoring law's
/// posterior, with the discovery rate measured under the criterion law.
pub fn optimal_cdr_set(
    score_law: &Arc<JointDistribution>,
    criterion_law: &Arc<JointDistribution>,
    alpha: f64,
) -> Result<GnpSolution> {
    require_shared_domain(score_law, criterion_law)?;
    let problem = GnpProblem::cdr(criterion_law.prior(), alpha)?;
    solve_gnp_threshold(&Score::posterior_of(score_law), criterion_law, &problem)
}

/// Like [`optimal_cdr_set`] but insists on a deterministic set: the tie is
/// rounded and the rounding must keep the discovery rate within `tol` of
/// alpha.
pub fn optimal_cdr_set_exact(
    score_law: &Arc<JointDistribution>,
    criterion_law: &Arc<JointDistribution>,
    alpha: f64,
    tol: f64,
) -> Result<GnpSolution> {
    optimal_cdr_set(score_law, criterion_law, alpha)?.rounded(alpha, tol)
}

/// Independent check: solves the same linear program by greedy ratio
/// filling over raw grid nodes. Only for small discrete grids.
pub fn brute_force_gnp(
    criterion: &JointDistribution,
    problem: &GnpProblem,
) -> Result<(NodeClassifier, f64, f64)> {
    let domain = criterion.domain().clone();
    if !criterion.is_discrete() {
        return Err(CdrError::UnsupportedDomain(
            "brute-force solve needs a DiscreteGrid".into(),
        ));
    }
    let n = domain.node_count();
    if n > BRUTE_FORCE_CAP {
        return Err(CdrError::GridTooLarge(n, BRUTE_FORCE_CAP));
    }
    let nodes = domain.nodes();
    let mut weighted: Vec<(usize, f64, f64)> = Vec::new();
    for (i, (x, w)) in nodes.iter().enumerate() {
        let (c0, c1) = problem
            .contaminated_density_values(criterion.class_density_value(0, x), criterion.class_density_value(1, x));
        weighted.push((i, w * c0, w * c1));
    }
    // descending value-per-cost; zero-cost positive-value nodes first
    weighted.sort_by(|a, b| {
        let ra = if a.1 > 0.0 { a.2 / a.1 } else { f64::INFINITY };
        let rb = if b.1 > 0.0 { b.2 / b.1 } else { f64::INFINITY };
        rb.partial_cmp(&ra).unwrap().then(a.0.cmp(&b.0))
    });
    let mut probs = vec![0.0; n];
    let mut remaining = problem.alpha;
    let mut objective = 0.0;
    let mut constraint = 0.0;
    for (i, w0, w1) in weighted {
        if w1 <= 0.0 && w0 <= 0.0 {
            continue;
        }
        let p = if w0 <= remaining + 1e-15 { 1.0 } else { (remaining / w0).clamp(0.0, 1.0) };
        if p <= 0.0 {
            continue;
        }
        probs[i] = p;
        remaining = (remaining - p * w0).max(0.0);
        objective += p * w1;
        constraint += p * w0;
    }
    Ok((NodeClassifier::new(domain, probs)?, objective, constraint))
}

/// Probability of a discovery under the criterion law's feature marginal.
pub fn discovery_rate(c: &dyn Classifier, law: &JointDistribution) -> f64 {
    law.domain()
        .nodes()
        .iter()
        .map(|(x, w)| w * law.marginal(x) * c.accept_prob(x))
        .sum()
}

/// Probability of a discovery conditional on class 1.
pub fn power(c: &dyn Classifier, law: &JointDistribution) -> f64 {
    law.domain()
        .nodes()
        .iter()
        .map(|(x, w)| w * law.class_density_value(1, x) * c.accept_prob(x))
        .sum()
}

/// Probability of a discovery conditional on class 0.
pub fn size(c: &dyn Classifier, law: &JointDistribution) -> f64 {
    law.domain()
        .nodes()
        .iter()
        .map(|(x, w)| w * law.class_density_value(0, x) * c.accept_prob(x))
        .sum()
}
