//! Constructions that turn a target law into the source law a learner
//! observes: covariate shift, monotone posterior drift, their combination,
//! class-prior changes, and label-noise models, plus sampling of noisy
//! labels.
//!
//! Every constructor returns a full `JointDistribution`, so downstream code
//! can treat shifted laws exactly like hand-built ones.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::density::Density;
use crate::distribution::{JointDistribution, LabeledSample};
use crate::error::{CdrError, Result};
use crate::monotone::MonotoneMap;

/// One step of distribution change. Applying a step to a target law yields
/// the source law; steps can be chained with [`apply_all`].
#[derive(Debug, Clone)]
pub enum ShiftAction {
    /// Replace the feature marginal, keep the posterior.
    Covariate { new_marginal: Density },
    /// Pass the posterior through a strictly increasing map, keep the
    /// marginal.
    Drift { map: MonotoneMap },
    /// Replace the marginal and drift the posterior at once.
    CovariateDrift { map: MonotoneMap, new_marginal: Density },
    /// Keep both class-conditional feature laws, replace the class prior.
    PriorChange { new_prior: f64 },
    /// Flip labels 0 -> 1 with rate rho0 and 1 -> 0 with rate rho1,
    /// independently of the features.
    LabelNoise { rho0: f64, rho1: f64 },
    /// Label noise with one flip rate for both directions.
    SymmetricNoise { nu: f64 },
    /// Only 0 -> 1 flips, at the feature-dependent rate psi(eta(x)).
    OneSidedNoise { psi: MonotoneMap },
    /// Left-to-right chain of steps.
    Compose(Vec<ShiftAction>),
}

impl ShiftAction {
    /// The strictly increasing map phi relating the posteriors of target and
    /// source: eta_source(x) = phi(eta_target(x)) everywhere. The target law
    /// is needed because a prior change's map depends on the prior it
    /// replaces, and a chain's maps depend on the intermediate laws.
    pub fn induced_map(&self, target: &Arc<JointDistribution>) -> Result<MonotoneMap> {
        match self {
            ShiftAction::Covariate { .. } => Ok(MonotoneMap::Identity),
            ShiftAction::Drift { map } | ShiftAction::CovariateDrift { map, .. } => Ok(map.clone()),
            ShiftAction::PriorChange { new_prior } => prior_shift_map(target.prior(), *new_prior),
            ShiftAction::LabelNoise { rho0, rho1 } => label_noise_map(*rho0, *rho1),
            ShiftAction::SymmetricNoise { nu } => label_noise_map(*nu, *nu),
            ShiftAction::OneSidedNoise { psi } => one_sided_noise_map(psi.clone()),
            ShiftAction::Compose(steps) => {
                let mut maps = Vec::with_capacity(steps.len());
                let mut current = target.clone();
                for step in steps {
                    maps.push(step.induced_map(&current)?);
                    current = apply(&current, step)?;
                }
                Ok(MonotoneMap::Compose(maps))
            }
        }
    }
}

/// Applies one shift step to a target law.
pub fn apply(target: &Arc<JointDistribution>, action: &ShiftAction) -> Result<Arc<JointDistribution>> {
    match action {
        ShiftAction::Covariate { new_marginal } => covariate_shift(target, new_marginal.clone()),
        ShiftAction::Drift { map } => posterior_drift(target, map.clone()),
        ShiftAction::CovariateDrift { map, new_marginal } => {
            covariate_shift_with_drift(target, map.clone(), new_marginal.clone())
        }
        ShiftAction::PriorChange { new_prior } => prior_shift(target, *new_prior),
        ShiftAction::LabelNoise { rho0, rho1 } => label_noise_drift(target, *rho0, *rho1),
        ShiftAction::SymmetricNoise { nu } => symmetric_label_noise(target, *nu),
        ShiftAction::OneSidedNoise { psi } => one_sided_noise_drift(target, psi.clone()),
        ShiftAction::Compose(steps) => apply_all(target, steps),
    }
}

/// Applies a chain of shift steps left to right: the first step acts on the
/// target, each later step acts on the previous output.
pub fn apply_all(
    target: &Arc<JointDistribution>,
    actions: &[ShiftAction],
) -> Result<Arc<JointDistribution>> {
    let mut current = target.clone();
    for a in actions {
        current = apply(&current, a)?;
    }
    Ok(current)
}

/// Covariate shift: the source keeps the target posterior pointwise and
/// draws features from `new_marginal` instead.
pub fn covariate_shift(
    target: &Arc<JointDistribution>,
    new_marginal: Density,
) -> Result<Arc<JointDistribution>> {
    require_dominates(target, &new_marginal)?;
    JointDistribution::shifted(target.clone(), MonotoneMap::Identity, new_marginal).map(Arc::new)
}

/// A learner only sees features the source marginal can produce, so the
/// target feature law must be absolutely continuous with respect to it:
/// every node carrying target mass needs positive source density.
fn require_dominates(target: &Arc<JointDistribution>, new_marginal: &Density) -> Result<()> {
    let domain = target.domain();
    for (point, weight) in domain.nodes() {
        if target.marginal(&point) * weight > 1e-12 && new_marginal.value(domain, &point) <= 0.0 {
            return Err(CdrError::SupportViolation(format!(
                "target feature mass at {point:?} lies outside the new marginal's support"
            )));
        }
    }
    Ok(())
}

/// Posterior drift: the source keeps the target feature marginal and has
/// posterior `map(eta(x))`.
pub fn posterior_drift(
    target: &Arc<JointDistribution>,
    map: MonotoneMap,
) -> Result<Arc<JointDistribution>> {
    let marginal = target.marginal_density()?;
    JointDistribution::shifted(target.clone(), map, marginal).map(Arc::new)
}

/// Covariate shift combined with posterior drift.
pub fn covariate_shift_with_drift(
    target: &Arc<JointDistribution>,
    map: MonotoneMap,
    new_marginal: Density,
) -> Result<Arc<JointDistribution>> {
    require_dominates(target, &new_marginal)?;
    JointDistribution::shifted(target.clone(), map, new_marginal).map(Arc::new)
}

/// Class-prior change: class-conditional feature laws are reused as-is under
/// a new prior. Equivalent to drifting the posterior by
/// [`prior_shift_map`] while reweighting the marginal accordingly.
pub fn prior_shift(
    target: &Arc<JointDistribution>,
    new_prior: f64,
) -> Result<Arc<JointDistribution>> {
    let d0 = target.class_density(0);
    let d1 = target.class_density(1);
    JointDistribution::conditional(target.domain().clone(), new_prior, d0, d1).map(Arc::new)
}

/// The posterior map induced by changing the class prior: likelihood-ratio
/// scaling with the odds ratio of the two priors.
pub fn prior_shift_map(old_prior: f64, new_prior: f64) -> Result<MonotoneMap> {
    for p in [old_prior, new_prior] {
        if !(p.is_finite() && p > 0.0 && p < 1.0) {
            return Err(CdrError::DegeneratePrior(p));
        }
    }
    let ratio = (new_prior / (1.0 - new_prior)) / (old_prior / (1.0 - old_prior));
    Ok(MonotoneMap::LrScale { ratio })
}

/// The posterior map induced by feature-independent label noise:
/// eta -> rho0 + (1 - rho0 - rho1) * eta.
pub fn label_noise_map(rho0: f64, rho1: f64) -> Result<MonotoneMap> {
    for r in [rho0, rho1] {
        if !(r.is_finite() && (0.0..1.0).contains(&r)) {
            return Err(CdrError::InvalidParameter(format!(
                "flip rates must lie in [0, 1), got ({rho0}, {rho1})"
            )));
        }
    }
    if rho0 + rho1 >= 1.0 {
        return Err(CdrError::NoiseTooLarge(rho0 + rho1));
    }
    Ok(MonotoneMap::Affine { slope: 1.0 - rho0 - rho1, intercept: rho0 })
}

/// Feature-independent label noise as a posterior drift; the feature
/// marginal is unchanged.
pub fn label_noise_drift(
    target: &Arc<JointDistribution>,
    rho0: f64,
    rho1: f64,
) -> Result<Arc<JointDistribution>> {
    posterior_drift(target, label_noise_map(rho0, rho1)?)
}

/// Label noise with equal flip rates in both directions.
pub fn symmetric_label_noise(
    target: &Arc<JointDistribution>,
    nu: f64,
) -> Result<Arc<JointDistribution>> {
    label_noise_drift(target, nu, nu)
}

/// The posterior map induced by one-sided label noise whose 0 -> 1 flip rate
/// at x is psi(eta(x)): eta -> 1 - (1 - psi(eta)) * (1 - eta).
pub fn one_sided_noise_map(psi: MonotoneMap) -> Result<MonotoneMap> {
    for k in 0..=1000 {
        let u = k as f64 / 1000.0;
        let v = psi.eval(u);
        if !v.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(CdrError::OutOfRange { value: v, lo: 0.0, hi: 1.0 });
        }
    }
    Ok(MonotoneMap::OneSidedNoise { psi: Box::new(psi) })
}

/// One-sided label noise as a posterior drift; the feature marginal is
/// unchanged.
pub fn one_sided_noise_drift(
    target: &Arc<JointDistribution>,
    psi: MonotoneMap,
) -> Result<Arc<JointDistribution>> {
    posterior_drift(target, one_sided_noise_map(psi)?)
}

/// Label-noise process used when sampling corrupted training data.
#[derive(Debug, Clone)]
pub enum LabelNoise {
    /// Flip 0 -> 1 with rate rho0 and 1 -> 0 with rate rho1.
    Fixed { rho0: f64, rho1: f64 },
    /// Flip only 0 -> 1, at rate psi(eta(x)).
    OneSided { psi: MonotoneMap },
}

impl LabelNoise {
    fn validate(&self) -> Result<()> {
        match self {
            LabelNoise::Fixed { rho0, rho1 } => label_noise_map(*rho0, *rho1).map(|_| ()),
            LabelNoise::OneSided { psi } => one_sided_noise_map(psi.clone()).map(|_| ()),
        }
    }
}

/// Draws labeled pairs from the target law and flips each label according to
/// the noise process. The flips use a separate, deterministic random stream,
/// so outputs are reproducible per (count, seed).
pub fn sample_noisy_labels(
    target: &Arc<JointDistribution>,
    noise: &LabelNoise,
    count: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    noise.validate()?;
    let clean = target.sample_labeled(count, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut out = Vec::with_capacity(count);
    for s in clean {
        let rate = match (noise, s.label) {
            (LabelNoise::Fixed { rho0, .. }, 0) => *rho0,
            (LabelNoise::Fixed { rho1, .. }, _) => *rho1,
            (LabelNoise::OneSided { psi }, 0) => {
                psi.eval(target.posterior(&s.features)?).clamp(0.0, 1.0)
            }
            (LabelNoise::OneSided { .. }, _) => 0.0,
        };
        let label = if rng.random::<f64>() < rate { 1 - s.label } else { s.label };
        out.push(LabeledSample { features: s.features, label });
    }
    Ok(out)
}
