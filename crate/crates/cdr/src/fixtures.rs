//! Shared reference laws for unit tests. Class tables are exact rationals;
//! the posterior, marginal, and partial-sum constants next to them were
//! worked out by hand from those tables and are asserted in the test suites.

use std::sync::Arc;

use crate::density::{Density, GaussComponent, GaussianMixture, TablePmf};
use crate::distribution::JointDistribution;
use crate::domain::FeatureDomain;

/// Posterior values of the five-point law, by grid point.
pub const FIVE_POINT_ETA: [f64; 5] = [0.005, 0.38, 0.46, 0.60, 0.775];
/// Feature-marginal masses of the five-point law, by grid point.
pub const FIVE_POINT_MARGINAL: [f64; 5] = [0.46, 0.04, 0.25, 0.15, 0.10];
/// Class prior of the five-point law.
pub const FIVE_POINT_PRIOR: f64 = 0.3;

/// Five atoms at x = 0..4 with prior 0.3. Sorted by descending posterior the
/// marginal masses are (0.10, 0.15, 0.25, 0.04, 0.46), so the exact
/// achievable upper-set levels are {0.10, 0.25, 0.50, 0.54, 1.0}.
pub fn five_point() -> Arc<JointDistribution> {
    let domain = Arc::new(
        FeatureDomain::grid(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0], vec![4.0]]).unwrap(),
    );
    let q0 = TablePmf::new(vec![
        4577.0 / 7000.0,
        248.0 / 7000.0,
        1350.0 / 7000.0,
        600.0 / 7000.0,
        225.0 / 7000.0,
    ])
    .unwrap();
    let q1 = TablePmf::new(vec![
        23.0 / 3000.0,
        152.0 / 3000.0,
        1150.0 / 3000.0,
        900.0 / 3000.0,
        775.0 / 3000.0,
    ])
    .unwrap();
    Arc::new(
        JointDistribution::conditional(
            domain,
            FIVE_POINT_PRIOR,
            Density::Table(q0),
            Density::Table(q1),
        )
        .unwrap(),
    )
}

/// Unit-variance Gaussians at -1 and +1 with even prior on [-4, 4]; the
/// posterior is exactly 1 / (1 + exp(-2x)).
pub fn two_gaussians() -> Arc<JointDistribution> {
    let domain =
        Arc::new(FeatureDomain::continuous_box(vec![-4.0], vec![4.0], vec![2048]).unwrap());
    let g = |mean: f64| {
        Density::Gaussian(
            GaussianMixture::new(
                vec![GaussComponent { weight: 1.0, mean: vec![mean], variance: vec![1.0] }],
                &domain,
            )
            .unwrap(),
        )
    };
    let (d0, d1) = (g(-1.0), g(1.0));
    Arc::new(JointDistribution::conditional(domain, 0.5, d0, d1).unwrap())
}
