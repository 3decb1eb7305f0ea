use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::density::{Density, GaussianMixture, TablePmf};
use crate::domain::FeatureDomain;
use crate::error::{CdrError, Result};
use crate::monotone::MonotoneMap;

const PRIOR_FLOOR: f64 = 1e-9;
/// Tolerance for exact mass matches on discrete grids.
pub const GRID_MASS_TOL: f64 = 1e-9;
/// Scores within this distance are treated as one atom.
pub const SCORE_ATOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: u8,
}

/// How the joint law is represented. `Conditional` stores class-conditional
/// feature densities directly; `Shifted` derives its posterior from a base
/// distribution through a strictly increasing map while carrying its own
/// feature marginal, so posterior-drift constructions are exact.
#[derive(Debug, Clone)]
pub enum JointForm {
    Conditional { density0: Density, density1: Density },
    Shifted {
        base: Arc<JointDistribution>,
        map: MonotoneMap,
        marginal: Density,
    },
}

/// Joint law of (X, Y) with Y in {0, 1} over a shared feature domain.
#[derive(Debug, Clone)]
pub struct JointDistribution {
    domain: Arc<FeatureDomain>,
    prior: f64,
    form: JointForm,
}

impl JointDistribution {
    /// Builds a joint law from a class prior and class-conditional densities.
    pub fn conditional(
        domain: Arc<FeatureDomain>,
        prior: f64,
        density0: Density,
        density1: Density,
    ) -> Result<Self> {
        if !(prior.is_finite() && prior > PRIOR_FLOOR && prior < 1.0 - PRIOR_FLOOR) {
            return Err(CdrError::DegeneratePrior(prior));
        }
        for d in [&density0, &density1] {
            validate_density_fits(d, &domain)?;
        }
        Ok(JointDistribution { domain, prior, form: JointForm::Conditional { density0, density1 } })
    }

    /// Builds a joint law whose posterior is `map` applied to the base
    /// posterior and whose feature marginal is `marginal`. The class prior is
    /// integrated from those two ingredients. Every node carrying marginal
    /// mass must lie inside the base support so the mapped posterior exists.
    pub fn shifted(
        base: Arc<JointDistribution>,
        map: MonotoneMap,
        marginal: Density,
    ) -> Result<Self> {
        map.validate_strictly_increasing()?;
        validate_density_fits(&marginal, &base.domain)?;
        let domain = base.domain.clone();
        let mut prior = 0.0;
        for (x, w) in domain.nodes() {
            let mass = w * marginal.value(&domain, &x);
            if mass <= 0.0 {
                continue;
            }
            let base_eta = base.posterior(&x).map_err(|_| {
                CdrError::SupportViolation(format!(
                    "target marginal carries mass at {x:?} where the base posterior is undefined"
                ))
            })?;
            prior += mass * map.eval(base_eta).clamp(0.0, 1.0);
        }
        if !(PRIOR_FLOOR..=1.0 - PRIOR_FLOOR).contains(&prior) {
            return Err(CdrError::DegeneratePrior(prior));
        }
        Ok(JointDistribution { domain, prior, form: JointForm::Shifted { base, map, marginal } })
    }

    pub fn domain(&self) -> &Arc<FeatureDomain> {
        &self.domain
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn form(&self) -> &JointForm {
        &self.form
    }

    pub fn is_discrete(&self) -> bool {
        matches!(*self.domain, FeatureDomain::DiscreteGrid { .. })
    }

    /// Posterior class-1 probability eta(x) = P(Y = 1 | X = x).
    pub fn posterior(&self, x: &[f64]) -> Result<f64> {
        match &self.form {
            JointForm::Conditional { density0, density1 } => {
                let num = self.prior * density1.value(&self.domain, x);
                let den = num + (1.0 - self.prior) * density0.value(&self.domain, x);
                if den <= 0.0 {
                    return Err(CdrError::ZeroMarginalDensity(x.to_vec()));
                }
                Ok(num / den)
            }
            JointForm::Shifted { base, map, .. } => {
                Ok(map.eval(base.posterior(x)?).clamp(0.0, 1.0))
            }
        }
    }

    /// Feature marginal density (pmf on grids); 0 outside the domain.
    pub fn marginal(&self, x: &[f64]) -> f64 {
        match &self.form {
            JointForm::Conditional { density0, density1 } => {
                self.prior * density1.value(&self.domain, x)
                    + (1.0 - self.prior) * density0.value(&self.domain, x)
            }
            JointForm::Shifted { marginal, .. } => marginal.value(&self.domain, x),
        }
    }

    /// Class-conditional density value at x for the given label.
    pub fn class_density_value(&self, label: u8, x: &[f64]) -> f64 {
        match &self.form {
            JointForm::Conditional { density0, density1 } => match label {
                1 => density1.value(&self.domain, x),
                _ => density0.value(&self.domain, x),
            },
            JointForm::Shifted { .. } => {
                let m = self.marginal(x);
                if m <= 0.0 {
                    return 0.0;
                }
                let eta = match self.posterior(x) {
                    Ok(v) => v,
                    Err(_) => return 0.0,
                };
                if label == 1 {
                    eta * m / self.prior
                } else {
                    (1.0 - eta) * m / (1.0 - self.prior)
                }
            }
        }
    }

    /// Class-conditional density as an object usable wherever a `Density`
    /// is accepted; for shifted laws this wraps the joint itself.
    pub fn class_density(self: &Arc<Self>, label: u8) -> Density {
        match &self.form {
            JointForm::Conditional { density0, density1 } => {
                if label == 1 { density1.clone() } else { density0.clone() }
            }
            JointForm::Shifted { .. } => Density::ClassConditional { joint: self.clone(), label },
        }
    }

    /// Feature marginal as a density object. Matched conditional families
    /// combine exactly (tables add, Gaussian mixtures pool components);
    /// anything else becomes a two-part mixture.
    pub fn marginal_density(&self) -> Result<Density> {
        match &self.form {
            JointForm::Shifted { marginal, .. } => Ok(marginal.clone()),
            JointForm::Conditional { density0, density1 } => match (density0, density1) {
                (Density::Table(t0), Density::Table(t1)) => {
                    let probs = t0
                        .probs()
                        .iter()
                        .zip(t1.probs())
                        .map(|(p0, p1)| (1.0 - self.prior) * p0 + self.prior * p1)
                        .collect();
                    Ok(Density::Table(TablePmf::new(probs)?))
                }
                (Density::Gaussian(g0), Density::Gaussian(g1)) => {
                    let mut parts = g1.scaled_components(self.prior);
                    parts.extend(g0.scaled_components(1.0 - self.prior));
                    Ok(Density::Gaussian(GaussianMixture::new(parts, &self.domain)?))
                }
                (d0, d1) => {
                    Density::mixture(vec![(1.0 - self.prior, d0.clone()), (self.prior, d1.clone())])
                }
            },
        }
    }

    /// Draws one feature vector from the marginal law.
    pub fn sample_feature_once<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match &self.form {
            JointForm::Conditional { density0, density1 } => {
                let y1 = rng.random::<f64>() < self.prior;
                let d = if y1 { density1 } else { density0 };
                d.sample_one(&self.domain, rng)
            }
            JointForm::Shifted { marginal, .. } => marginal.sample_one(&self.domain, rng),
        }
    }

    /// Draws (X, Y) pairs; identical (count, seed) inputs yield identical
    /// output on every call.
    pub fn sample_labeled(&self, count: usize, seed: u64) -> Result<Vec<LabeledSample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.sample_one_labeled(&mut rng)?);
        }
        Ok(out)
    }

    fn sample_one_labeled<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LabeledSample> {
        match &self.form {
            JointForm::Conditional { density0, density1 } => {
                let y1 = rng.random::<f64>() < self.prior;
                let d = if y1 { density1 } else { density0 };
                let x = d.sample_one(&self.domain, rng)?;
                Ok(LabeledSample { features: x, label: y1 as u8 })
            }
            JointForm::Shifted { marginal, .. } => {
                let x = marginal.sample_one(&self.domain, rng)?;
                let eta = self.posterior(&x)?;
                let label = (rng.random::<f64>() < eta) as u8;
                Ok(LabeledSample { features: x, label })
            }
        }
    }

    /// Draws feature vectors only.
    pub fn sample_unlabeled(&self, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(self.sample_feature_once(&mut rng)?);
        }
        Ok(out)
    }

    /// P(score(X) <= t) under this law's feature marginal, computed against
    /// the domain's integration rule.
    pub fn cdf_of_score(&self, score: &dyn Fn(&[f64]) -> f64, t: f64) -> f64 {
        self.domain
            .nodes()
            .iter()
            .filter(|(x, _)| score(x) <= t)
            .map(|(x, w)| w * self.marginal(x))
            .sum()
    }

    /// P(score(X) >= t) under this law's feature marginal.
    pub fn upper_mass_of_score(&self, score: &dyn Fn(&[f64]) -> f64, t: f64) -> f64 {
        self.domain
            .nodes()
            .iter()
            .filter(|(x, _)| score(x) >= t)
            .map(|(x, w)| w * self.marginal(x))
            .sum()
    }
}

fn validate_density_fits(density: &Density, domain: &FeatureDomain) -> Result<()> {
    match (density, domain) {
        (Density::Table(t), FeatureDomain::DiscreteGrid { points }) => {
            if t.probs().len() != points.len() {
                return Err(CdrError::InvalidParameter(format!(
                    "probability table length {} does not match grid size {}",
                    t.probs().len(),
                    points.len()
                )));
            }
            Ok(())
        }
        (Density::Table(_), FeatureDomain::ContinuousBox { .. }) => Err(CdrError::InvalidParameter(
            "probability tables require a DiscreteGrid domain".into(),
        )),
        (Density::Gaussian(_), FeatureDomain::DiscreteGrid { .. }) => Err(CdrError::InvalidParameter(
            "Gaussian mixtures require a ContinuousBox domain".into(),
        )),
        (Density::Mixture(parts), d) => {
            for (_, p) in parts {
                validate_density_fits(p, d)?;
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Per-atom mass of the target posterior viewed as a score under the source
/// feature marginal: (score value, Q_X mass), merged within `SCORE_ATOM_TOL`
/// and sorted by descending score. Nodes without Q_X mass are skipped.
pub(crate) fn posterior_atoms(
    p: &JointDistribution,
    q: &JointDistribution,
) -> Result<Vec<(f64, f64)>> {
    let domain = q.domain();
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for (x, w) in domain.nodes() {
        let mass = w * q.marginal(&x);
        if mass <= 0.0 {
            continue;
        }
        raw.push((p.posterior(&x)?, mass));
    }
    raw.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut atoms: Vec<(f64, f64)> = Vec::new();
    for (v, m) in raw {
        match atoms.last_mut() {
            Some((last_v, last_m)) if (*last_v - v).abs() <= SCORE_ATOM_TOL => *last_m += m,
            _ => atoms.push((v, m)),
        }
    }
    Ok(atoms)
}

/// Outcome of probing for an exact level-alpha superlevel set of the target
/// posterior under the source marginal.
#[derive(Debug, Clone)]
pub struct LevelSetCheck {
    pub holds: bool,
    /// Best threshold found: the superlevel set {eta_P >= threshold}.
    pub threshold: f64,
    /// Mass of that set under Q_X.
    pub achieved: f64,
    /// |achieved - alpha|.
    pub gap: f64,
}

/// Checks whether some superlevel set of eta_P has Q_X-mass exactly alpha:
/// exact suffix-sum matching on grids, bisection at quadrature resolution
/// on boxes.
pub fn check_exact_level_set(
    p: &JointDistribution,
    q: &JointDistribution,
    alpha: f64,
) -> Result<LevelSetCheck> {
    require_shared_domain(p, q)?;
    require_unit_interval(alpha)?;
    if q.is_discrete() {
        let atoms = posterior_atoms(p, q)?;
        let mut best: Option<LevelSetCheck> = None;
        let mut suffix = 0.0;
        for (v, m) in &atoms {
            suffix += m;
            let gap = (suffix - alpha).abs();
            if best.as_ref().map_or(true, |b| gap < b.gap) {
                best = Some(LevelSetCheck { holds: gap <= GRID_MASS_TOL, threshold: *v, achieved: suffix, gap });
            }
        }
        best.ok_or_else(|| CdrError::InvalidParameter("source marginal carries no mass".into()))
    } else {
        let score = |x: &[f64]| p.posterior(x).unwrap_or(0.0);
        let mass_at_or_above = |t: f64| q.upper_mass_of_score(&score, t);
        let max_node_mass = q
            .domain()
            .nodes()
            .iter()
            .map(|(x, w)| w * q.marginal(x))
            .fold(0.0_f64, f64::max);
        let mut lo = 0.0_f64;
        let mut hi = 1.0 + 1e-9;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mass_at_or_above(mid) >= alpha {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let achieved = mass_at_or_above(lo);
        let gap = (achieved - alpha).abs();
        Ok(LevelSetCheck {
            holds: gap <= 2.0 * max_node_mass + GRID_MASS_TOL,
            threshold: lo,
            achieved,
            gap,
        })
    }
}

/// Local growth exponent estimate for the score CDF around its level-alpha
/// threshold.
#[derive(Debug, Clone)]
pub struct GrowthEstimate {
    /// max of the one-sided estimates; NaN when neither side has enough
    /// usable probes.
    pub kappa: f64,
    pub kappa_left: Option<f64>,
    pub kappa_right: Option<f64>,
    pub threshold: f64,
}

/// Estimates the growth exponent kappa with |F(t + d) - F(t)| ~ |d|^kappa by
/// log-log regression over the probe offsets, one side at a time. Left
/// increments count mass in [t - d, t), right increments in (t, t + d], so an
/// atom exactly at t does not pollute either side.
pub fn estimate_growth_exponent(
    p: &JointDistribution,
    q: &JointDistribution,
    alpha: f64,
    probe_offsets: &[f64],
) -> Result<GrowthEstimate> {
    require_shared_domain(p, q)?;
    require_unit_interval(alpha)?;
    if probe_offsets.is_empty() || probe_offsets.iter().any(|d| !d.is_finite() || *d <= 0.0) {
        return Err(CdrError::InvalidParameter(format!(
            "probe offsets must be positive reals, got {probe_offsets:?}"
        )));
    }
    let level = check_exact_level_set(p, q, alpha)?;
    let t = level.threshold;
    let atoms = posterior_atoms(p, q)?;
    let mass_in = |keep: &dyn Fn(f64) -> bool| -> f64 {
        atoms.iter().filter(|(v, _)| keep(*v)).map(|(_, m)| m).sum()
    };
    let mut right = Vec::new();
    let mut left = Vec::new();
    // interval edges get a small slack so probe arithmetic like 0.5 - 0.06
    // does not drop an atom sitting exactly on the boundary
    let edge = 1e-9;
    for &d in probe_offsets {
        let inc_r = mass_in(&|v| v > t + SCORE_ATOM_TOL && v <= t + d + edge);
        let inc_l = mass_in(&|v| v >= t - d - edge && v < t - SCORE_ATOM_TOL);
        if inc_r > 0.0 {
            right.push((d.ln(), inc_r.ln()));
        }
        if inc_l > 0.0 {
            left.push((d.ln(), inc_l.ln()));
        }
    }
    let kappa_right = slope(&right);
    let kappa_left = slope(&left);
    let kappa = match (kappa_left, kappa_right) {
        (Some(l), Some(r)) => l.max(r),
        (Some(l), None) => l,
        (None, Some(r)) => r,
        (None, None) => f64::NAN,
    };
    Ok(GrowthEstimate { kappa, kappa_left, kappa_right, threshold: t })
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

pub(crate) fn require_shared_domain(p: &JointDistribution, q: &JointDistribution) -> Result<()> {
    if p.domain().as_ref() != q.domain().as_ref() {
        return Err(CdrError::InvalidParameter(
            "source and target must share one feature domain".into(),
        ));
    }
    Ok(())
}

pub(crate) fn require_unit_interval(v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0 && v < 1.0) {
        return Err(CdrError::OutOfRange { value: v, lo: 0.0, hi: 1.0 });
    }
    Ok(())
}
