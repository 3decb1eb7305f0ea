use std::sync::Arc;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distribution::JointDistribution;
use crate::domain::FeatureDomain;
use crate::error::{CdrError, Result};

const PMF_SUM_TOL: f64 = 1e-9;
const REJECTION_CAP: usize = 1_000_000;

/// Probability table aligned with the points of a `DiscreteGrid`.
#[derive(Debug, Clone, PartialEq)]
pub struct TablePmf {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl TablePmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(CdrError::InvalidParameter("empty probability table".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(CdrError::InvalidParameter(format!(
                "probability table entries must be finite and nonnegative: {probs:?}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(CdrError::InvalidParameter(format!(
                "probability table sums to {total}, expected 1 within {PMF_SUM_TOL}"
            )));
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        Ok(TablePmf { probs, cumulative })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let target = u * self.cumulative.last().copied().unwrap_or(1.0);
        match self
            .cumulative
            .binary_search_by(|c| c.partial_cmp(&target).unwrap())
        {
            Ok(i) => (i + 1).min(self.probs.len() - 1),
            Err(i) => i.min(self.probs.len() - 1),
        }
    }
}

/// One diagonal-covariance Gaussian component.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Gaussian mixture truncated to (and renormalized over) a `ContinuousBox`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussComponent>,
    /// Per-component mass inside the box, times the component weight.
    truncated_weights: Vec<f64>,
    /// Total mixture mass inside the box before renormalization.
    normalizer: f64,
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussComponent>, domain: &FeatureDomain) -> Result<Self> {
        let (lower, upper) = match domain {
            FeatureDomain::ContinuousBox { lower, upper, .. } => (lower, upper),
            FeatureDomain::DiscreteGrid { .. } => {
                return Err(CdrError::InvalidParameter(
                    "Gaussian mixtures are defined over ContinuousBox domains only".into(),
                ))
            }
        };
        if components.is_empty() {
            return Err(CdrError::InvalidParameter("Gaussian mixture needs at least one component".into()));
        }
        let dim = lower.len();
        let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
        let mut truncated_weights = Vec::with_capacity(components.len());
        for (i, c) in components.iter().enumerate() {
            if !c.weight.is_finite() || c.weight <= 0.0 {
                return Err(CdrError::InvalidParameter(format!(
                    "component {i} weight must be positive, got {}",
                    c.weight
                )));
            }
            if c.mean.len() != dim || c.variance.len() != dim {
                return Err(CdrError::InvalidParameter(format!(
                    "component {i} dimensions {}x{} do not match domain dimension {dim}",
                    c.mean.len(),
                    c.variance.len()
                )));
            }
            if c.mean.iter().any(|m| !m.is_finite()) || c.variance.iter().any(|v| !v.is_finite() || *v <= 0.0) {
                return Err(CdrError::InvalidParameter(format!(
                    "component {i} needs finite means and positive variances"
                )));
            }
            let mut mass = 1.0;
            for k in 0..dim {
                let sd = c.variance[k].sqrt();
                mass *= std_normal.cdf((upper[k] - c.mean[k]) / sd)
                    - std_normal.cdf((lower[k] - c.mean[k]) / sd);
            }
            truncated_weights.push(c.weight * mass);
        }
        let normalizer: f64 = truncated_weights.iter().sum();
        if normalizer < 1e-12 {
            return Err(CdrError::InvalidParameter(
                "Gaussian mixture carries no mass inside the domain box".into(),
            ));
        }
        Ok(GaussianMixture { components, truncated_weights, normalizer })
    }

    pub fn components(&self) -> &[GaussComponent] {
        &self.components
    }

    /// Components rescaled so that this mixture, weighted by `factor`,
    /// can be pooled with others into one normalized mixture: the returned
    /// weights fold in both `factor` and this mixture's box normalizer.
    pub fn scaled_components(&self, factor: f64) -> Vec<GaussComponent> {
        self.components
            .iter()
            .map(|c| GaussComponent {
                weight: factor * c.weight / self.normalizer,
                mean: c.mean.clone(),
                variance: c.variance.clone(),
            })
            .collect()
    }

    fn raw_value(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for c in &self.components {
            let mut dens = c.weight;
            for k in 0..x.len() {
                let var = c.variance[k];
                let z = x[k] - c.mean[k];
                dens *= (-0.5 * z * z / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
            }
            total += dens;
        }
        total
    }

    pub fn value(&self, domain: &FeatureDomain, x: &[f64]) -> f64 {
        if !domain.contains(x) {
            return 0.0;
        }
        self.raw_value(x) / self.normalizer
    }

    fn sample_one<R: Rng + ?Sized>(&self, domain: &FeatureDomain, rng: &mut R) -> Result<Vec<f64>> {
        let (lower, upper) = match domain {
            FeatureDomain::ContinuousBox { lower, upper, .. } => (lower, upper),
            _ => return Err(CdrError::UnsupportedSampler("Gaussian mixture over a grid".into())),
        };
        let u: f64 = rng.random::<f64>() * self.normalizer;
        let mut acc = 0.0;
        let mut chosen = self.components.len() - 1;
        for (i, tw) in self.truncated_weights.iter().enumerate() {
            acc += tw;
            if u <= acc {
                chosen = i;
                break;
            }
        }
        let c = &self.components[chosen];
        for _ in 0..REJECTION_CAP {
            let mut x = Vec::with_capacity(c.mean.len());
            for k in 0..c.mean.len() {
                let norm = rand_distr::Normal::new(c.mean[k], c.variance[k].sqrt())
                    .map_err(|e| CdrError::UnsupportedSampler(e.to_string()))?;
                x.push(rng.sample(norm));
            }
            let inside = x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi);
            if inside {
                return Ok(x);
            }
        }
        Err(CdrError::UnsupportedSampler(
            "truncated Gaussian rejection sampler stalled".into(),
        ))
    }
}

/// A density over a feature domain. Grids carry pmfs, boxes carry Lebesgue
/// densities; both integrate via `FeatureDomain::nodes`.
#[derive(Debug, Clone)]
pub enum Density {
    Table(TablePmf),
    Gaussian(GaussianMixture),
    /// Convex combination of other densities over the same domain.
    Mixture(Vec<(f64, Density)>),
    /// Class-conditional density of a joint distribution: proportional to
    /// eta * marginal (label 1) or (1 - eta) * marginal (label 0).
    ClassConditional { joint: Arc<JointDistribution>, label: u8 },
}

impl Density {
    pub fn mixture(parts: Vec<(f64, Density)>) -> Result<Self> {
        if parts.is_empty() {
            return Err(CdrError::InvalidParameter("empty mixture".into()));
        }
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| !w.is_finite() || *w < 0.0) || (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(CdrError::InvalidParameter(format!(
                "mixture weights must be nonnegative and sum to 1, got sum {total}"
            )));
        }
        Ok(Density::Mixture(parts))
    }

    pub fn value(&self, domain: &FeatureDomain, x: &[f64]) -> f64 {
        match self {
            Density::Table(t) => match domain.grid_index(x) {
                Some(i) => t.probs[i],
                None => 0.0,
            },
            Density::Gaussian(g) => g.value(domain, x),
            Density::Mixture(parts) => parts.iter().map(|(w, d)| w * d.value(domain, x)).sum(),
            Density::ClassConditional { joint, label } => joint.class_density_value(*label, x),
        }
    }

    /// Total mass against the domain's integration rule; 1 up to pmf
    /// exactness on grids and quadrature accuracy on boxes.
    pub fn total_mass(&self, domain: &FeatureDomain) -> f64 {
        domain
            .nodes()
            .iter()
            .map(|(x, w)| w * self.value(domain, x))
            .sum()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, domain: &FeatureDomain, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Density::Table(t) => {
                let points = match domain {
                    FeatureDomain::DiscreteGrid { points } => points,
                    _ => {
                        return Err(CdrError::UnsupportedSampler(
                            "probability table over a continuous box".into(),
                        ))
                    }
                };
                if t.probs.len() != points.len() {
                    return Err(CdrError::UnsupportedSampler(format!(
                        "table length {} does not match grid size {}",
                        t.probs.len(),
                        points.len()
                    )));
                }
                Ok(points[t.sample_index(rng)].clone())
            }
            Density::Gaussian(g) => g.sample_one(domain, rng),
            Density::Mixture(parts) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (w, d) in parts {
                    acc += w;
                    if u <= acc {
                        return d.sample_one(domain, rng);
                    }
                }
                parts.last().unwrap().1.sample_one(domain, rng)
            }
            Density::ClassConditional { joint, label } => {
                for _ in 0..REJECTION_CAP {
                    let x = joint.sample_feature_once(rng)?;
                    let eta = joint.posterior(&x)?;
                    let accept = if *label == 1 { eta } else { 1.0 - eta };
                    if rng.random::<f64>() < accept {
                        return Ok(x);
                    }
                }
                Err(CdrError::UnsupportedSampler(
                    "class-conditional rejection sampler stalled".into(),
                ))
            }
        }
    }
}
