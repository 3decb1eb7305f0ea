//! Scenario descriptions: a JSON schema for (target law, training law)
//! pairs, loaders, and the built-in library used by the CLI and the
//! experiment runner.
//!
//! A scenario file describes the evaluation target and, optionally, a shift
//! that produces the law labeled training data is drawn from:
//!
//! ```json
//! {
//!   "name": "noisy_pair",
//!   "domain": { "kind": "grid", "points": [[0.0], [1.0]] },
//!   "prior": 0.4,
//!   "density0": { "family": "table", "params": [0.75, 0.25] },
//!   "density1": { "family": "table", "params": [0.25, 0.75] },
//!   "shift": { "kind": "label_noise", "rho0": 0.1, "rho1": 0.2 }
//! }
//! ```
//!
//! Continuous domains use `"kind": "box"` with per-axis `bounds` pairs and a
//! `resolution` list; their densities use `"family": "gaussian_mixture"`
//! with components `{weight, mean, covariance_diagonal}`. Shift kinds mirror
//! [`ShiftAction`]: `covariate`, `drift`, `covariate_drift`, `prior_change`,
//! `label_noise`, `symmetric_noise`, `one_sided_noise`, and `compose`, with
//! monotone maps written in the named form accepted by
//! [`MonotoneMap::parse`].

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{Density, GaussComponent, GaussianMixture, TablePmf};
use crate::distribution::JointDistribution;
use crate::domain::FeatureDomain;
use crate::error::{CdrError, Result};
use crate::estimators::{BandwidthRule, EstimatorConfig, LambdaRule};
use crate::monotone::MonotoneMap;
use crate::shift::{self, ShiftAction};

/// Names of the bundled scenarios, accepted anywhere a scenario file path
/// is; the short ids "s1" through "s7" resolve to the same entries.
pub const BUILTIN_SCENARIOS: [&str; 7] = [
    "s1_five_point",
    "s2_two_gaussians",
    "s3_shifted_gaussians",
    "s4_prior_shift",
    "s5_label_noise",
    "s6_one_sided_noise",
    "s7_wedge",
];

/// Parsed form of a scenario file, before any distribution is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub domain: DomainSpec,
    pub prior: f64,
    pub density0: DensitySpec,
    pub density1: DensitySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<ShiftSpec>,
}

/// Feature-domain description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Grid { points: Vec<Vec<f64>> },
    Box { bounds: Vec<[f64; 2]>, resolution: Vec<usize> },
}

impl DomainSpec {
    pub fn build(&self) -> Result<FeatureDomain> {
        match self {
            DomainSpec::Grid { points } => FeatureDomain::grid(points.clone()),
            DomainSpec::Box { bounds, resolution } => {
                let lower = bounds.iter().map(|b| b[0]).collect();
                let upper = bounds.iter().map(|b| b[1]).collect();
                FeatureDomain::continuous_box(lower, upper, resolution.clone())
            }
        }
    }
}

/// Density description: a probability table aligned with the grid points,
/// or a Gaussian mixture truncated to the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum DensitySpec {
    Table(Vec<f64>),
    GaussianMixture(Vec<ComponentSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance_diagonal: Vec<f64>,
}

impl DensitySpec {
    pub fn build(&self, domain: &FeatureDomain) -> Result<Density> {
        match self {
            DensitySpec::Table(probs) => Ok(Density::Table(TablePmf::new(probs.clone())?)),
            DensitySpec::GaussianMixture(parts) => {
                let components = parts
                    .iter()
                    .map(|c| GaussComponent {
                        weight: c.weight,
                        mean: c.mean.clone(),
                        variance: c.covariance_diagonal.clone(),
                    })
                    .collect();
                Ok(Density::Gaussian(GaussianMixture::new(components, domain)?))
            }
        }
    }
}

/// Shift description; see [`ShiftAction`] for the semantics of each kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftSpec {
    Covariate { new_marginal: DensitySpec },
    Drift { phi: String },
    CovariateDrift { phi: String, new_marginal: DensitySpec },
    PriorChange { new_prior: f64 },
    LabelNoise { rho0: f64, rho1: f64 },
    SymmetricNoise { nu: f64 },
    OneSidedNoise { psi: String },
    Compose { steps: Vec<ShiftSpec> },
}

impl ShiftSpec {
    pub fn to_action(&self, domain: &FeatureDomain) -> Result<ShiftAction> {
        Ok(match self {
            ShiftSpec::Covariate { new_marginal } => {
                ShiftAction::Covariate { new_marginal: new_marginal.build(domain)? }
            }
            ShiftSpec::Drift { phi } => ShiftAction::Drift { map: MonotoneMap::parse(phi)? },
            ShiftSpec::CovariateDrift { phi, new_marginal } => ShiftAction::CovariateDrift {
                map: MonotoneMap::parse(phi)?,
                new_marginal: new_marginal.build(domain)?,
            },
            ShiftSpec::PriorChange { new_prior } => {
                ShiftAction::PriorChange { new_prior: *new_prior }
            }
            ShiftSpec::LabelNoise { rho0, rho1 } => {
                ShiftAction::LabelNoise { rho0: *rho0, rho1: *rho1 }
            }
            ShiftSpec::SymmetricNoise { nu } => ShiftAction::SymmetricNoise { nu: *nu },
            ShiftSpec::OneSidedNoise { psi } => {
                ShiftAction::OneSidedNoise { psi: MonotoneMap::parse(psi)? }
            }
            ShiftSpec::Compose { steps } => ShiftAction::Compose(
                steps.iter().map(|s| s.to_action(domain)).collect::<Result<Vec<_>>>()?,
            ),
        })
    }
}

impl ScenarioFile {
    /// Builds the target law, applies the shift to obtain the training law,
    /// and records the monotone posterior map relating the two.
    pub fn resolve(&self) -> Result<Scenario> {
        let domain = Arc::new(self.domain.build()?);
        let density0 = self.density0.build(&domain)?;
        let density1 = self.density1.build(&domain)?;
        let target =
            Arc::new(JointDistribution::conditional(domain, self.prior, density0, density1)?);
        let (source, action, map) = match &self.shift {
            None => (target.clone(), None, MonotoneMap::Identity),
            Some(spec) => {
                let action = spec.to_action(target.domain())?;
                let source = shift::apply(&target, &action)?;
                let map = action.induced_map(&target)?;
                (source, Some(action), map)
            }
        };
        Ok(Scenario {
            name: self.name.clone().unwrap_or_else(|| "unnamed".into()),
            description: self.description.clone().unwrap_or_default(),
            target,
            source,
            action,
            map,
        })
    }
}

/// A resolved scenario: the law estimators are judged against (`target`),
/// the law labeled training data comes from (`source`), and the strictly
/// increasing map with `eta_source = map(eta_target)` pointwise.
#[derive(Debug, Clone)]
pub struct Scenario {
    name: String,
    description: String,
    target: Arc<JointDistribution>,
    source: Arc<JointDistribution>,
    action: Option<ShiftAction>,
    map: MonotoneMap,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let file: ScenarioFile = serde_json::from_str(text)
            .map_err(|e| CdrError::Scenario(format!("parse error: {e}")))?;
        file.resolve()
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Scenario> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CdrError::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_json(&text)
    }

    pub fn builtin(name: &str) -> Result<Scenario> {
        builtin_file(name)
            .ok_or_else(|| {
                CdrError::Scenario(format!(
                    "unknown built-in scenario '{name}' (available: {})",
                    BUILTIN_SCENARIOS.join(", ")
                ))
            })?
            .resolve()
    }

    /// Resolves a CLI-style scenario argument: built-in names (or their
    /// short ids) first, then file paths.
    pub fn load(arg: &str) -> Result<Scenario> {
        if let Some(file) = builtin_file(arg) {
            return file.resolve();
        }
        if Path::new(arg).exists() {
            return Scenario::from_file(arg);
        }
        Err(CdrError::Scenario(format!(
            "'{arg}' is neither a built-in scenario nor an existing file (built-ins: {})",
            BUILTIN_SCENARIOS.join(", ")
        )))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// The law whose discovery budget and optimal set define success.
    pub fn target(&self) -> &Arc<JointDistribution> {
        &self.target
    }

    /// The law labeled training data is drawn from; equals `target` when the
    /// scenario has no shift.
    pub fn source(&self) -> &Arc<JointDistribution> {
        &self.source
    }

    pub fn shift(&self) -> Option<&ShiftAction> {
        self.action.as_ref()
    }

    pub fn is_shifted(&self) -> bool {
        self.action.is_some()
    }

    /// The strictly increasing map with `eta_source = map(eta_target)`
    /// everywhere; identity for unshifted scenarios.
    pub fn posterior_map(&self) -> &MonotoneMap {
        &self.map
    }
}

/// The JSON-facing description of a bundled scenario, or None for unknown
/// names. Matching ignores case and accepts the short id prefix.
pub fn builtin_file(name: &str) -> Option<ScenarioFile> {
    let key = name.trim().to_ascii_lowercase();
    let full = BUILTIN_SCENARIOS
        .iter()
        .find(|full| **full == key || full.split('_').next() == Some(key.as_str()))?;
    Some(match *full {
        "s1_five_point" => five_point_file(),
        "s2_two_gaussians" => two_gaussians_file(),
        "s3_shifted_gaussians" => shifted_gaussians_file(),
        "s4_prior_shift" => prior_shift_file(),
        "s5_label_noise" => label_noise_file(),
        "s6_one_sided_noise" => one_sided_noise_file(),
        _ => wedge_file(),
    })
}

fn five_point_base() -> ScenarioFile {
    ScenarioFile {
        name: Some("s1_five_point".into()),
        description: Some("five-atom grid law with hand-checkable tables".into()),
        domain: DomainSpec::Grid { points: (0..5).map(|i| vec![i as f64]).collect() },
        prior: 0.3,
        density0: DensitySpec::Table(vec![
            4577.0 / 7000.0,
            248.0 / 7000.0,
            1350.0 / 7000.0,
            600.0 / 7000.0,
            225.0 / 7000.0,
        ]),
        density1: DensitySpec::Table(vec![
            23.0 / 3000.0,
            152.0 / 3000.0,
            1150.0 / 3000.0,
            900.0 / 3000.0,
            775.0 / 3000.0,
        ]),
        shift: None,
    }
}

fn five_point_file() -> ScenarioFile {
    five_point_base()
}

fn two_gaussians_base() -> ScenarioFile {
    let class = |mean: f64| {
        DensitySpec::GaussianMixture(vec![ComponentSpec {
            weight: 1.0,
            mean: vec![mean],
            covariance_diagonal: vec![1.0],
        }])
    };
    ScenarioFile {
        name: Some("s2_two_gaussians".into()),
        description: Some(
            "unit normals at -1 and +1 with even prior; the posterior is 1/(1+exp(-2x))".into(),
        ),
        domain: DomainSpec::Box { bounds: vec![[-4.0, 4.0]], resolution: vec![2048] },
        prior: 0.5,
        density0: class(-1.0),
        density1: class(1.0),
        shift: None,
    }
}

fn two_gaussians_file() -> ScenarioFile {
    two_gaussians_base()
}

fn shifted_gaussians_file() -> ScenarioFile {
    let mut f = two_gaussians_base();
    f.name = Some("s3_shifted_gaussians".into());
    f.description = Some(
        "two-gaussian target whose training law triples the posterior odds and widens the \
         feature marginal around 0.5"
            .into(),
    );
    f.shift = Some(ShiftSpec::CovariateDrift {
        phi: "lr_scale(3)".into(),
        new_marginal: DensitySpec::GaussianMixture(vec![ComponentSpec {
            weight: 1.0,
            mean: vec![0.5],
            covariance_diagonal: vec![2.25],
        }]),
    });
    f
}

fn prior_shift_file() -> ScenarioFile {
    let mut f = five_point_base();
    f.name = Some("s4_prior_shift".into());
    f.description =
        Some("five-point target trained under a class prior moved from 0.3 to 0.6".into());
    f.shift = Some(ShiftSpec::PriorChange { new_prior: 0.6 });
    f
}

fn label_noise_file() -> ScenarioFile {
    let mut f = five_point_base();
    f.name = Some("s5_label_noise".into());
    f.description = Some(
        "five-point target trained on labels flipped 0->1 at rate 0.1 and 1->0 at rate 0.2".into(),
    );
    f.shift = Some(ShiftSpec::LabelNoise { rho0: 0.1, rho1: 0.2 });
    f
}

fn one_sided_noise_file() -> ScenarioFile {
    let mut f = two_gaussians_base();
    f.name = Some("s6_one_sided_noise".into());
    f.description = Some(
        "two-gaussian target trained under one-sided label noise with flip curve psi(u) = u/2"
            .into(),
    );
    f.shift = Some(ShiftSpec::OneSidedNoise { psi: "affine(0.5, 0)".into() });
    f
}

fn wedge_file() -> ScenarioFile {
    let nodes = 400;
    let xs: Vec<f64> = (0..nodes).map(|i| (i as f64 + 0.5) / nodes as f64).collect();
    let weights: Vec<f64> = xs.iter().map(|x| (x - 0.5).abs()).collect();
    let total: f64 = weights.iter().sum();
    let prior: f64 = xs.iter().zip(&weights).map(|(x, w)| x * w / total).sum();
    let q1: Vec<f64> =
        xs.iter().zip(&weights).map(|(x, w)| w / total * x / prior).collect();
    let q0: Vec<f64> = xs
        .iter()
        .zip(&weights)
        .map(|(x, w)| w / total * (1.0 - x) / (1.0 - prior))
        .collect();
    ScenarioFile {
        name: Some("s7_wedge".into()),
        description: Some(
            "posterior eta(x) = x on a fine grid whose feature mass vanishes linearly at 1/2, \
             so the score CDF grows quadratically at its central threshold"
                .into(),
        ),
        domain: DomainSpec::Grid { points: xs.iter().map(|x| vec![*x]).collect() },
        prior,
        density0: DensitySpec::Table(q0),
        density1: DensitySpec::Table(q1),
        shift: None,
    }
}

/// A literal number or a named rule ("median" for bandwidths, "auto" for
/// the regularization weight).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumberOrName {
    Number(f64),
    Name(String),
}

/// Kernel description inside an estimator config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelConfigFile {
    Gaussian { bandwidth: NumberOrName },
}

/// JSON form of the tunable estimator knobs; omitted fields keep the
/// defaults of [`EstimatorConfig`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfigFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<NumberOrName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_constant: Option<f64>,
}

impl EstimatorConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| CdrError::Scenario(format!("estimator config parse error: {e}")))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CdrError::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Overlays the file's fields on `base` and validates the result.
    pub fn apply(&self, base: &EstimatorConfig) -> Result<EstimatorConfig> {
        let mut cfg = base.clone();
        if let Some(KernelConfigFile::Gaussian { bandwidth }) = &self.kernel {
            cfg.bandwidth = match bandwidth {
                NumberOrName::Number(h) => BandwidthRule::Fixed(*h),
                NumberOrName::Name(s) if s.eq_ignore_ascii_case("median") => BandwidthRule::Median,
                NumberOrName::Name(s) => {
                    return Err(CdrError::Scenario(format!(
                        "bandwidth must be a number or \"median\", got \"{s}\""
                    )))
                }
            };
        }
        if let Some(lambda) = &self.lambda {
            cfg.lambda = match lambda {
                NumberOrName::Number(l) => LambdaRule::Fixed(*l),
                NumberOrName::Name(s) if s.eq_ignore_ascii_case("auto") => LambdaRule::Auto,
                NumberOrName::Name(s) => {
                    return Err(CdrError::Scenario(format!(
                        "lambda must be a number or \"auto\", got \"{s}\""
                    )))
                }
            };
        }
        if let Some(tol) = self.tol {
            cfg.tol = tol;
        }
        if let Some(max_iter) = self.max_iter {
            cfg.max_iter = max_iter;
        }
        if let Some(c) = self.eps_constant {
            cfg.eps_constant = c;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::estimate_growth_exponent;
    use crate::fixtures::{five_point, two_gaussians};
    use crate::shift::covariate_shift_with_drift;
    use approx::assert_relative_eq;

    #[test]
    fn builtins_resolve_and_follow_their_posterior_maps() {
        for name in BUILTIN_SCENARIOS {
            let sc = Scenario::builtin(name).unwrap();
            assert_eq!(sc.name(), name);
            let q = sc.target();
            let p = sc.source();
            let phi = sc.posterior_map();
            phi.validate_strictly_increasing().unwrap();
            let mut worst = 0.0_f64;
            for (x, w) in q.domain().nodes() {
                if w * q.marginal(&x) <= 0.0 {
                    continue;
                }
                let eta_q = q.posterior(&x).unwrap();
                let eta_p = p.posterior(&x).unwrap();
                worst = worst.max((eta_p - phi.eval(eta_q)).abs());
            }
            assert!(worst < 1e-9, "{name}: posterior map mismatch {worst}");
            assert_eq!(sc.is_shifted(), sc.shift().is_some());
        }
    }

    #[test]
    fn short_ids_and_case_variants_resolve() {
        assert_eq!(Scenario::builtin("s3").unwrap().name(), "s3_shifted_gaussians");
        assert_eq!(Scenario::builtin("S5_LABEL_NOISE").unwrap().name(), "s5_label_noise");
        assert!(Scenario::builtin("s9").is_err());
    }

    #[test]
    fn file_round_trip_preserves_every_builtin() {
        for name in BUILTIN_SCENARIOS {
            let file = builtin_file(name).unwrap();
            let text = serde_json::to_string_pretty(&file).unwrap();
            let parsed: ScenarioFile = serde_json::from_str(&text).unwrap();
            assert_eq!(parsed, file, "{name}");
        }
    }

    #[test]
    fn builtin_grid_law_matches_handbuilt_tables() {
        let sc = Scenario::builtin("s1").unwrap();
        let want = five_point();
        assert_relative_eq!(sc.target().prior(), want.prior(), epsilon = 1e-15);
        for i in 0..5 {
            let x = [i as f64];
            assert_relative_eq!(
                sc.target().posterior(&x).unwrap(),
                want.posterior(&x).unwrap(),
                epsilon = 1e-14
            );
            assert_relative_eq!(sc.target().marginal(&x), want.marginal(&x), epsilon = 1e-14);
        }
        assert!(!sc.is_shifted());
        assert!(matches!(sc.posterior_map(), MonotoneMap::Identity));
    }

    #[test]
    fn builtin_box_law_matches_handbuilt_gaussians() {
        let sc = Scenario::builtin("s2").unwrap();
        let want = two_gaussians();
        for x in [-3.5, -1.0, 0.0, 0.7, 2.4] {
            assert_relative_eq!(
                sc.target().posterior(&[x]).unwrap(),
                want.posterior(&[x]).unwrap(),
                epsilon = 1e-14
            );
            assert_relative_eq!(sc.target().marginal(&[x]), want.marginal(&[x]), epsilon = 1e-14);
        }
    }

    #[test]
    fn shifted_builtin_matches_direct_shift_construction() {
        let sc = Scenario::builtin("s3").unwrap();
        let marginal = Density::Gaussian(
            GaussianMixture::new(
                vec![GaussComponent { weight: 1.0, mean: vec![0.5], variance: vec![2.25] }],
                sc.target().domain(),
            )
            .unwrap(),
        );
        let want =
            covariate_shift_with_drift(&two_gaussians(), MonotoneMap::LrScale { ratio: 3.0 }, marginal)
                .unwrap();
        assert_relative_eq!(sc.source().prior(), want.prior(), epsilon = 1e-12);
        for x in [-2.0, -0.5, 0.0, 0.9, 2.8] {
            assert_relative_eq!(
                sc.source().posterior(&[x]).unwrap(),
                want.posterior(&[x]).unwrap(),
                epsilon = 1e-12
            );
            assert_relative_eq!(sc.source().marginal(&[x]), want.marginal(&[x]), epsilon = 1e-12);
        }
    }

    #[test]
    fn shifted_builtins_change_the_training_posterior() {
        // s4: prior moved to 0.6 exactly; s5: affine noise map; s6: lifted
        // posterior under one-sided noise.
        let s4 = Scenario::builtin("s4").unwrap();
        assert_relative_eq!(s4.source().prior(), 0.6, epsilon = 1e-15);

        let s5 = Scenario::builtin("s5").unwrap();
        let eta1 = s5.target().posterior(&[1.0]).unwrap();
        assert_relative_eq!(
            s5.source().posterior(&[1.0]).unwrap(),
            0.1 + 0.7 * eta1,
            epsilon = 1e-12
        );

        let s6 = Scenario::builtin("s6").unwrap();
        let eta = s6.target().posterior(&[0.9]).unwrap();
        assert_relative_eq!(
            s6.source().posterior(&[0.9]).unwrap(),
            1.0 - (1.0 - 0.5 * eta) * (1.0 - eta),
            epsilon = 1e-12
        );
    }

    #[test]
    fn wedge_score_cdf_grows_quadratically_at_center() {
        let sc = Scenario::builtin("s7").unwrap();
        let q = sc.target();
        assert_relative_eq!(q.prior(), 0.5, epsilon = 1e-12);
        let est =
            estimate_growth_exponent(q, q, 0.5, &[0.04, 0.08, 0.12, 0.16, 0.24]).unwrap();
        assert_relative_eq!(est.threshold, 200.5 / 400.0, epsilon = 1e-12);
        assert!((est.kappa - 2.0).abs() <= 0.1, "kappa {}", est.kappa);
    }

    #[test]
    fn every_shift_kind_parses_and_resolves() {
        let base = |shift: &str| {
            format!(
                r#"{{
                    "domain": {{ "kind": "grid", "points": [[0.0], [1.0]] }},
                    "prior": 0.4,
                    "density0": {{ "family": "table", "params": [0.75, 0.25] }},
                    "density1": {{ "family": "table", "params": [0.25, 0.75] }},
                    "shift": {shift}
                }}"#
            )
        };
        let shifts = [
            r#"{ "kind": "covariate", "new_marginal": { "family": "table", "params": [0.5, 0.5] } }"#,
            r#"{ "kind": "drift", "phi": "square" }"#,
            r#"{ "kind": "covariate_drift", "phi": "lr_scale(2)",
                 "new_marginal": { "family": "table", "params": [0.5, 0.5] } }"#,
            r#"{ "kind": "prior_change", "new_prior": 0.7 }"#,
            r#"{ "kind": "label_noise", "rho0": 0.1, "rho1": 0.2 }"#,
            r#"{ "kind": "symmetric_noise", "nu": 0.15 }"#,
            r#"{ "kind": "one_sided_noise", "psi": "affine(0.5, 0)" }"#,
            r#"{ "kind": "compose", "steps": [
                 { "kind": "prior_change", "new_prior": 0.7 },
                 { "kind": "label_noise", "rho0": 0.1, "rho1": 0.2 } ] }"#,
        ];
        for shift in shifts {
            let sc = Scenario::from_json(&base(shift)).unwrap();
            assert!(sc.is_shifted(), "{shift}");
            sc.posterior_map().validate_strictly_increasing().unwrap();
        }

        // spot-check the composed posterior: prior 0.4 -> 0.7 multiplies the
        // odds by (0.7/0.3)/(0.4/0.6) = 3.5, then the noise applies its
        // affine map
        let sc = Scenario::from_json(&base(shifts[7])).unwrap();
        let eta = sc.target().posterior(&[1.0]).unwrap();
        let lifted = 3.5 * eta / (3.5 * eta + 1.0 - eta);
        assert_relative_eq!(
            sc.source().posterior(&[1.0]).unwrap(),
            0.1 + 0.7 * lifted,
            epsilon = 1e-12
        );
    }

    #[test]
    fn malformed_scenarios_error_without_panicking() {
        let cases = [
            // truncated JSON
            r#"{"domain": {"kind": "grid""#,
            // unknown top-level field
            r#"{"domain": {"kind": "grid", "points": [[0.0], [1.0]]}, "prior": 0.4, "extra": 1,
               "density0": {"family": "table", "params": [0.75, 0.25]},
               "density1": {"family": "table", "params": [0.25, 0.75]}}"#,
            // unknown density family
            r#"{"domain": {"kind": "grid", "points": [[0.0], [1.0]]}, "prior": 0.4,
               "density0": {"family": "histogram", "params": [0.75, 0.25]},
               "density1": {"family": "table", "params": [0.25, 0.75]}}"#,
            // table does not sum to 1
            r#"{"domain": {"kind": "grid", "points": [[0.0], [1.0]]}, "prior": 0.4,
               "density0": {"family": "table", "params": [0.7, 0.2]},
               "density1": {"family": "table", "params": [0.25, 0.75]}}"#,
            // degenerate prior
            r#"{"domain": {"kind": "grid", "points": [[0.0], [1.0]]}, "prior": 1.5,
               "density0": {"family": "table", "params": [0.75, 0.25]},
               "density1": {"family": "table", "params": [0.25, 0.75]}}"#,
            // reversed bounds
            r#"{"domain": {"kind": "box", "bounds": [[4.0, -4.0]], "resolution": [64]}, "prior": 0.5,
               "density0": {"family": "gaussian_mixture",
                            "params": [{"weight": 1.0, "mean": [-1.0], "covariance_diagonal": [1.0]}]},
               "density1": {"family": "gaussian_mixture",
                            "params": [{"weight": 1.0, "mean": [1.0], "covariance_diagonal": [1.0]}]}}"#,
            // mixture on a grid domain
            r#"{"domain": {"kind": "grid", "points": [[0.0], [1.0]]}, "prior": 0.5,
               "density0": {"family": "gaussian_mixture",
                            "params": [{"weight": 1.0, "mean": [0.0], "covariance_diagonal": [1.0]}]},
               "density1": {"family": "table", "params": [0.25, 0.75]}}"#,
            // unknown shift kind
            r#"{"domain": {"kind": "grid", "points": [[0.0], [1.0]]}, "prior": 0.4,
               "density0": {"family": "table", "params": [0.75, 0.25]},
               "density1": {"family": "table", "params": [0.25, 0.75]},
               "shift": {"kind": "teleport"}}"#,
            // unparseable monotone map
            r#"{"domain": {"kind": "grid", "points": [[0.0], [1.0]]}, "prior": 0.4,
               "density0": {"family": "table", "params": [0.75, 0.25]},
               "density1": {"family": "table", "params": [0.25, 0.75]},
               "shift": {"kind": "drift", "phi": "cubic"}}"#,
            // noise rates too large
            r#"{"domain": {"kind": "grid", "points": [[0.0], [1.0]]}, "prior": 0.4,
               "density0": {"family": "table", "params": [0.75, 0.25]},
               "density1": {"family": "table", "params": [0.25, 0.75]},
               "shift": {"kind": "label_noise", "rho0": 0.6, "rho1": 0.5}}"#,
        ];
        for (i, text) in cases.iter().enumerate() {
            assert!(Scenario::from_json(text).is_err(), "case {i} should fail");
        }
    }

    #[test]
    fn estimator_config_file_merges_onto_defaults() {
        let defaults = EstimatorConfig::default();

        let empty = EstimatorConfigFile::from_json("{}").unwrap();
        assert_eq!(empty.apply(&defaults).unwrap(), defaults);

        let full = EstimatorConfigFile::from_json(
            r#"{ "kernel": { "kind": "gaussian", "bandwidth": 1.5 },
                 "lambda": 0.02, "tol": 1e-6, "max_iter": 50 }"#,
        )
        .unwrap();
        let cfg = full.apply(&defaults).unwrap();
        assert_eq!(cfg.bandwidth, BandwidthRule::Fixed(1.5));
        assert_eq!(cfg.lambda, LambdaRule::Fixed(0.02));
        assert_eq!(cfg.tol, 1e-6);
        assert_eq!(cfg.max_iter, 50);
        assert_eq!(cfg.beta, defaults.beta);

        let named = EstimatorConfigFile::from_json(
            r#"{ "kernel": { "kind": "gaussian", "bandwidth": "median" }, "lambda": "auto" }"#,
        )
        .unwrap();
        let cfg = named.apply(&defaults).unwrap();
        assert_eq!(cfg.bandwidth, BandwidthRule::Median);
        assert_eq!(cfg.lambda, LambdaRule::Auto);

        for bad in [
            r#"{ "kernel": { "kind": "gaussian", "bandwidth": "widest" } }"#,
            r#"{ "lambda": "tiny" }"#,
            r#"{ "kernel": { "kind": "laplace", "bandwidth": 1.0 } }"#,
            r#"{ "tol": -1.0 }"#,
            r#"{ "max_iter": 0 }"#,
            r#"{ "bandwidth": 1.0 }"#,
        ] {
            let outcome =
                EstimatorConfigFile::from_json(bad).and_then(|f| f.apply(&defaults));
            assert!(outcome.is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn load_prefers_builtins_then_falls_back_to_paths() {
        assert_eq!(Scenario::load("s2").unwrap().name(), "s2_two_gaussians");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair.json");
        let text = serde_json::to_string_pretty(&five_point_base()).unwrap();
        fs::write(&path, text).unwrap();
        let sc = Scenario::load(path.to_str().unwrap()).unwrap();
        assert_eq!(sc.name(), "s1_five_point");

        let err = Scenario::load("no_such_scenario").unwrap_err();
        assert!(err.to_string().contains("s1_five_point"), "{err}");
    }

    #[test]
    fn shipped_scenario_files_match_builtins() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
        if std::env::var_os("REGEN_SCENARIOS").is_some() {
            fs::create_dir_all(&dir).unwrap();
            for name in BUILTIN_SCENARIOS {
                let file = builtin_file(name).unwrap();
                // the wedge tables are machine generated and too long to
                // pretty print
                let long_tables =
                    matches!(&file.domain, DomainSpec::Grid { points } if points.len() > 64);
                let mut text = if long_tables {
                    serde_json::to_string(&file).unwrap()
                } else {
                    serde_json::to_string_pretty(&file).unwrap()
                };
                text.push('\n');
                fs::write(dir.join(format!("{name}.json")), text).unwrap();
            }
        }
        for name in BUILTIN_SCENARIOS {
            let path = dir.join(format!("{name}.json"));
            let text = fs::read_to_string(&path)
                .unwrap_or_else(|_| panic!("missing {}", path.display()));
            let parsed: ScenarioFile = serde_json::from_str(&text).unwrap();
            assert_eq!(parsed, builtin_file(name).unwrap(), "{name}");
        }
    }
}
