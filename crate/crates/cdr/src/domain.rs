use crate::error::{CdrError, Result};

/// Feature space over which joint distributions live. Both variants carry
/// enough structure to integrate exactly (grid) or by midpoint quadrature
/// (box), which is what every downstream probability computation uses.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureDomain {
    /// Finite set of distinct points in R^d; integration is a weighted sum
    /// with unit weight per point (counting measure against a pmf).
    DiscreteGrid { points: Vec<Vec<f64>> },
    /// Axis-aligned box [lower, upper]^d discretized at `resolution` cells
    /// per axis; integration is midpoint quadrature over the cell centers.
    ContinuousBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
        resolution: Vec<usize>,
    },
}

impl FeatureDomain {
    pub fn grid(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CdrError::InvalidParameter(format!(
                "grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(CdrError::InvalidParameter("grid points must have dimension >= 1".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(CdrError::InvalidParameter(format!(
                    "inconsistent point dimensions: {} vs {}",
                    p.len(),
                    dim
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(CdrError::InvalidParameter(format!("non-finite grid point {p:?}")));
            }
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if points[i] == points[j] {
                    return Err(CdrError::InvalidParameter(format!(
                        "duplicate grid point {:?}",
                        points[i]
                    )));
                }
            }
        }
        Ok(FeatureDomain::DiscreteGrid { points })
    }

    pub fn continuous_box(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || upper.len() != dim || resolution.len() != dim {
            return Err(CdrError::InvalidParameter(format!(
                "box needs matching nonempty lower/upper/resolution, got {}/{}/{}",
                lower.len(),
                upper.len(),
                resolution.len()
            )));
        }
        for k in 0..dim {
            if !lower[k].is_finite() || !upper[k].is_finite() || lower[k] >= upper[k] {
                return Err(CdrError::InvalidParameter(format!(
                    "box axis {k} needs finite lower < upper, got [{}, {}]",
                    lower[k], upper[k]
                )));
            }
            if resolution[k] < 2 {
                return Err(CdrError::InvalidParameter(format!(
                    "box axis {k} needs resolution >= 2, got {}",
                    resolution[k]
                )));
            }
        }
        Ok(FeatureDomain::ContinuousBox { lower, upper, resolution })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureDomain::DiscreteGrid { points } => points[0].len(),
            FeatureDomain::ContinuousBox { lower, .. } => lower.len(),
        }
    }

    /// Number of integration nodes (grid points or quadrature cells).
    pub fn node_count(&self) -> usize {
        match self {
            FeatureDomain::DiscreteGrid { points } => points.len(),
            FeatureDomain::ContinuousBox { resolution, .. } => resolution.iter().product(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            FeatureDomain::DiscreteGrid { points } => points.iter().any(|p| p.as_slice() == x),
            FeatureDomain::ContinuousBox { lower, upper, .. } => {
                x.len() == lower.len()
                    && x.iter()
                        .zip(lower.iter().zip(upper.iter()))
                        .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
            }
        }
    }

    /// Index of an exact grid point; `None` off-grid or for boxes.
    pub fn grid_index(&self, x: &[f64]) -> Option<usize> {
        match self {
            FeatureDomain::DiscreteGrid { points } => points.iter().position(|p| p.as_slice() == x),
            FeatureDomain::ContinuousBox { .. } => None,
        }
    }

    /// Integration nodes with weights: (point, weight). Grid points carry
    /// weight 1 (densities are pmfs there); box cells carry their volume.
    pub fn nodes(&self) -> Vec<(Vec<f64>, f64)> {
        match self {
            FeatureDomain::DiscreteGrid { points } => {
                points.iter().map(|p| (p.clone(), 1.0)).collect()
            }
            FeatureDomain::ContinuousBox { lower, upper, resolution } => {
                let dim = lower.len();
                let steps: Vec<f64> = (0..dim)
                    .map(|k| (upper[k] - lower[k]) / resolution[k] as f64)
                    .collect();
                let volume: f64 = steps.iter().product();
                let total: usize = resolution.iter().product();
                let mut out = Vec::with_capacity(total);
                for flat in 0..total {
                    let mut rest = flat;
                    let mut point = vec![0.0; dim];
                    for k in (0..dim).rev() {
                        let idx = rest % resolution[k];
                        rest /= resolution[k];
                        point[k] = lower[k] + (idx as f64 + 0.5) * steps[k];
                    }
                    out.push((point, volume));
                }
                out
            }
        }
    }
}
