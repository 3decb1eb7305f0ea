use std::fmt;
use std::sync::Arc;

use crate::error::{CdrError, Result};

/// Strictly increasing map on [0, 1], used to relate source and target
/// posteriors. Built-ins cover the named library accepted in scenario files;
/// `Custom` admits arbitrary closures for tests and library callers.
#[derive(Clone)]
pub enum MonotoneMap {
    Identity,
    /// u -> u^2
    Square,
    /// u -> slope * u + intercept
    Affine { slope: f64, intercept: f64 },
    /// u -> r*u / (r*u + 1 - u), the likelihood-ratio rescaling with odds
    /// multiplier r > 0.
    LrScale { ratio: f64 },
    /// u -> 1 - (1 - psi(u)) * (1 - u), the drift induced by one-sided
    /// label noise with clean-conditional flip curve psi.
    OneSidedNoise { psi: Box<MonotoneMap> },
    /// Left-to-right composition: the first map is applied first.
    Compose(Vec<MonotoneMap>),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for MonotoneMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MonotoneMap::Identity => write!(f, "Identity"),
            MonotoneMap::Square => write!(f, "Square"),
            MonotoneMap::Affine { slope, intercept } => write!(f, "Affine({slope}, {intercept})"),
            MonotoneMap::LrScale { ratio } => write!(f, "LrScale({ratio})"),
            MonotoneMap::OneSidedNoise { psi } => write!(f, "OneSidedNoise({psi:?})"),
            MonotoneMap::Compose(maps) => write!(f, "Compose({maps:?})"),
            MonotoneMap::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl MonotoneMap {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            MonotoneMap::Identity => u,
            MonotoneMap::Square => u * u,
            MonotoneMap::Affine { slope, intercept } => slope * u + intercept,
            MonotoneMap::LrScale { ratio } => ratio * u / (ratio * u + 1.0 - u),
            MonotoneMap::OneSidedNoise { psi } => 1.0 - (1.0 - psi.eval(u)) * (1.0 - u),
            MonotoneMap::Compose(maps) => maps.iter().fold(u, |v, m| m.eval(v)),
            MonotoneMap::Custom(f) => f(u),
        }
    }

    /// Checks strict monotonicity and range containment in [0, 1] on a
    /// 1001-point probe of the unit interval.
    pub fn validate_strictly_increasing(&self) -> Result<()> {
        let mut prev = None;
        for k in 0..=1000 {
            let u = k as f64 / 1000.0;
            let v = self.eval(u);
            if !v.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&v) {
                return Err(CdrError::NonMonotoneMap(format!(
                    "value {v} at u = {u} leaves [0, 1]"
                )));
            }
            if let Some(p) = prev {
                if v <= p {
                    return Err(CdrError::NonMonotoneMap(format!(
                        "not strictly increasing near u = {u}: {p} -> {v}"
                    )));
                }
            }
            prev = Some(v);
        }
        Ok(())
    }

    /// Inverse by bisection on [0, 1]; the map must be strictly increasing
    /// and `v` must lie between eval(0) and eval(1).
    pub fn inverse(&self, v: f64) -> Result<f64> {
        let lo_v = self.eval(0.0);
        let hi_v = self.eval(1.0);
        if v < lo_v - 1e-12 || v > hi_v + 1e-12 {
            return Err(CdrError::OutOfRange { value: v, lo: lo_v, hi: hi_v });
        }
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 {
                break;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Parses the named map library: "identity", "square", "affine(a,b)",
    /// "lr_scale(r)".
    pub fn parse(text: &str) -> Result<Self> {
        let s = text.trim();
        if s.eq_ignore_ascii_case("identity") {
            return Ok(MonotoneMap::Identity);
        }
        if s.eq_ignore_ascii_case("square") {
            return Ok(MonotoneMap::Square);
        }
        let args = |name: &str| -> Option<Vec<f64>> {
            let rest = s.strip_prefix(name)?.trim();
            let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
            inner
                .split(',')
                .map(|p| p.trim().parse::<f64>().ok())
                .collect()
        };
        if let Some(a) = args("affine") {
            if a.len() == 2 {
                let m = MonotoneMap::Affine { slope: a[0], intercept: a[1] };
                m.validate_strictly_increasing()?;
                return Ok(m);
            }
        }
        if let Some(a) = args("lr_scale") {
            if a.len() == 1 {
                if !(a[0].is_finite() && a[0] > 0.0) {
                    return Err(CdrError::InvalidParameter(format!(
                        "lr_scale ratio must be positive, got {}",
                        a[0]
                    )));
                }
                return Ok(MonotoneMap::LrScale { ratio: a[0] });
            }
        }
        Err(CdrError::Scenario(format!(
            "unrecognized monotone map '{text}' (expected identity, square, affine(a,b), or lr_scale(r))"
        )))
    }
}
