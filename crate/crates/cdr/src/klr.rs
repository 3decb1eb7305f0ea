//! Kernel logistic regression fit by damped Newton iterations.
//!
//! The fit minimizes the regularized dual objective
//!
//! ```text
//! J(c) = (lambda/2) c'Kc + (1/m) sum_i log(1 + exp(-(2y_i - 1)(Kc)_i))
//! ```
//!
//! over dual coefficients c, where K is the kernel matrix of the training
//! features. Predictions use the representer form f(x) = sum_i c_i k(x, x_i)
//! and the posterior estimate is the logistic transform 1/(1 + exp(-f(x))).
//!
//! The Newton system K(lambda I + (1/m) D K) delta = -K v is reduced to
//! (lambda I + (1/m) D K) delta = -v and solved by LU factorization; an
//! Armijo backtracking line search guarantees strict objective decrease on
//! every accepted step, falling back to the negative gradient when the
//! reduced system is singular or produces an ascent direction.

use ndarray::{Array1, Array2};
use ndarray_linalg::{FactorizeInto, Solve};

use crate::distribution::LabeledSample;
use crate::error::{CdrError, Result};

/// Ridge added to the Newton system when the plain factorization fails.
const NEWTON_JITTER: f64 = 1e-10;
/// Armijo sufficient-decrease slope fraction.
const ARMIJO_SLOPE: f64 = 1e-4;
/// Maximum step halvings per line search.
const MAX_HALVINGS: usize = 60;

/// Positive definite kernel on feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// `exp(-|x - x'|^2 / (2 h^2))` with bandwidth `h`.
    Gaussian { bandwidth: f64 },
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(CdrError::InvalidParameter(format!(
                "kernel bandwidth must be positive and finite, got {bandwidth}"
            )));
        }
        Ok(KernelSpec::Gaussian { bandwidth })
    }

    /// Kernel value `k(a, b)`.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelSpec::Gaussian { bandwidth } => {
                let mut sq = 0.0;
                for (u, v) in a.iter().zip(b) {
                    let d = u - v;
                    sq += d * d;
                }
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
        }
    }
}

/// Median pairwise Euclidean distance over at most 1024 evenly strided
/// points. The conventional default bandwidth for Gaussian kernels.
pub fn median_heuristic_bandwidth(points: &[Vec<f64>]) -> Result<f64> {
    if points.len() < 2 {
        return Err(CdrError::InvalidParameter(format!(
            "median bandwidth needs at least 2 points, got {}",
            points.len()
        )));
    }
    let stride = points.len().div_ceil(1024);
    let sub: Vec<&Vec<f64>> = points.iter().step_by(stride).collect();
    let mut dists = Vec::with_capacity(sub.len() * (sub.len() - 1) / 2);
    for i in 0..sub.len() {
        for j in (i + 1)..sub.len() {
            let sq: f64 = sub[i].iter().zip(sub[j]).map(|(u, v)| (u - v) * (u - v)).sum();
            dists.push(sq.sqrt());
        }
    }
    dists.sort_by(|a, b| a.total_cmp(b));
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        0.5 * (dists[n / 2 - 1] + dists[n / 2])
    };
    if median <= 0.0 {
        return Err(CdrError::InvalidParameter(
            "median pairwise distance is zero, all points coincide".into(),
        ));
    }
    Ok(median)
}

/// Regularization weight `m^(-1/2)`, which vanishes while `m lambda^2`
/// still grows, the schedule the convergence guarantee asks for.
pub fn auto_lambda(m: usize) -> f64 {
    (m as f64).powf(-0.5)
}

/// Kernel matrix `k(rows[i], cols[j])`.
pub fn kernel_matrix(spec: &KernelSpec, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Array2<f64> {
    Array2::from_shape_fn((rows.len(), cols.len()), |(i, j)| spec.eval(&rows[i], &cols[j]))
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss given the margins u = Kc.
fn mean_loss(margins: &Array1<f64>, labels: &[u8]) -> f64 {
    let m = labels.len() as f64;
    margins
        .iter()
        .zip(labels)
        .map(|(&u, &y)| softplus(-(2.0 * f64::from(y) - 1.0) * u))
        .sum::<f64>()
        / m
}

/// Objective and its exact gradient at dual coefficients `coef`.
///
/// `kernel_matrix` must be the symmetric training matrix K; the gradient is
/// K (lambda c + (p - y)/m) with p the componentwise logistic of Kc.
pub fn objective_and_gradient(
    kernel_matrix: &Array2<f64>,
    labels: &[u8],
    lambda: f64,
    coef: &Array1<f64>,
) -> (f64, Array1<f64>) {
    let m = labels.len() as f64;
    let margins = kernel_matrix.dot(coef);
    let objective = 0.5 * lambda * coef.dot(&margins) + mean_loss(&margins, labels);
    let mut v = Array1::zeros(coef.len());
    for i in 0..coef.len() {
        let p = sigmoid(margins[i]);
        v[i] = lambda * coef[i] + (p - f64::from(labels[i])) / m;
    }
    (objective, kernel_matrix.dot(&v))
}

/// Convergence record of a Newton fit.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    /// Accepted Newton steps.
    pub iterations: usize,
    pub final_objective: f64,
    pub final_grad_norm: f64,
    /// Whether the gradient norm reached the tolerance.
    pub converged: bool,
    /// Objective before each step plus the final value; strictly decreasing.
    pub objective_trace: Vec<f64>,
}

/// Fitted kernel logistic regression model.
#[derive(Debug, Clone)]
pub struct KlrModel {
    kernel: KernelSpec,
    lambda: f64,
    points: Vec<Vec<f64>>,
    coef: Array1<f64>,
    diagnostics: FitDiagnostics,
}

impl KlrModel {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn coefficients(&self) -> &[f64] {
        self.coef.as_slice().expect("contiguous")
    }

    pub fn training_points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    /// Representer decision value f(x) = sum_i c_i k(x, x_i).
    pub fn decision_value(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(self.coef.iter())
            .map(|(p, c)| c * self.kernel.eval(x, p))
            .sum()
    }

    /// Posterior estimate 1/(1 + exp(-f(x))), clamped strictly inside (0, 1).
    pub fn posterior(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision_value(x)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    }

    pub fn posterior_batch(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.posterior(x)).collect()
    }

    /// Posterior estimate as a shareable score function.
    pub fn score(&self) -> crate::oracle::Score {
        let model = self.clone();
        crate::oracle::Score::from_fn(move |x| model.posterior(x))
    }

    /// Squared RKHS norm of the fitted function, c'Kc.
    pub fn rkhs_norm_squared(&self) -> f64 {
        self.points
            .iter()
            .zip(self.coef.iter())
            .map(|(p, c)| c * self.decision_value(p))
            .sum()
    }
}

/// Solve (lambda I + (1/m) D K) delta = -v, retrying once with a ridge.
fn newton_direction(
    kernel_matrix: &Array2<f64>,
    weights: &Array1<f64>,
    lambda: f64,
    v: &Array1<f64>,
) -> Option<Array1<f64>> {
    let m = weights.len();
    let scale = 1.0 / m as f64;
    let mut system = kernel_matrix.clone();
    for (i, mut row) in system.rows_mut().into_iter().enumerate() {
        let w = weights[i] * scale;
        row.map_inplace(|t| *t *= w);
    }
    for i in 0..m {
        system[[i, i]] += lambda;
    }
    let rhs = v.mapv(|t| -t);
    match system.clone().factorize_into() {
        Ok(lu) => lu.solve_into(rhs).ok(),
        Err(_) => {
            for i in 0..m {
                system[[i, i]] += NEWTON_JITTER;
            }
            system.factorize_into().ok().and_then(|lu| lu.solve_into(rhs).ok())
        }
    }
}

/// Fit by Newton's method with Armijo backtracking, starting from c = 0.
///
/// Stops when the gradient norm drops to `tol` or after `max_iter` accepted
/// steps; the diagnostics flag which one happened. Deterministic for a fixed
/// data ordering.
pub fn fit_klr(
    data: &[LabeledSample],
    kernel: &KernelSpec,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<KlrModel> {
    if data.len() < 2 {
        return Err(CdrError::InvalidParameter(format!(
            "kernel logistic regression needs at least 2 samples, got {}",
            data.len()
        )));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(CdrError::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !tol.is_finite() || tol <= 0.0 {
        return Err(CdrError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(CdrError::InvalidParameter("max_iter must be at least 1".into()));
    }
    let dim = data[0].features.len();
    for s in data {
        if s.features.len() != dim || s.features.iter().any(|t| !t.is_finite()) {
            return Err(CdrError::InvalidParameter(
                "features must be finite and share one dimension".into(),
            ));
        }
        if s.label > 1 {
            return Err(CdrError::InvalidParameter(format!("labels must be 0 or 1, got {}", s.label)));
        }
    }

    let m = data.len();
    let m_f = m as f64;
    let points: Vec<Vec<f64>> = data.iter().map(|s| s.features.clone()).collect();
    let labels: Vec<u8> = data.iter().map(|s| s.label).collect();
    let k = kernel_matrix(kernel, &points, &points);

    let mut coef: Array1<f64> = Array1::zeros(m);
    let mut margins = k.dot(&coef);
    let mut objective = 0.5 * lambda * coef.dot(&margins) + mean_loss(&margins, &labels);
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;

    for _ in 0..max_iter {
        let mut weights = Array1::zeros(m);
        let mut v = Array1::zeros(m);
        for i in 0..m {
            let p = sigmoid(margins[i]);
            weights[i] = p * (1.0 - p);
            v[i] = lambda * coef[i] + (p - f64::from(labels[i])) / m_f;
        }
        let grad = k.dot(&v);
        grad_norm = grad.dot(&grad).sqrt();
        if !grad_norm.is_finite() {
            return Err(CdrError::SingularKernelMatrix);
        }
        if grad_norm <= tol {
            converged = true;
            break;
        }

        let mut delta = newton_direction(&k, &weights, lambda, &v)
            .unwrap_or_else(|| grad.mapv(|t| -t));
        let mut slope = grad.dot(&delta);
        if !(slope < 0.0) {
            delta = grad.mapv(|t| -t);
            slope = -grad_norm * grad_norm;
        }

        // Trial objectives need only O(m) work once K delta is cached:
        // the quadratic term is a polynomial in the step size and the loss
        // reads the updated margins directly.
        let k_delta = k.dot(&delta);
        let cross = delta.dot(&margins);
        let curve = delta.dot(&k_delta);
        let base_quad = coef.dot(&margins);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial_margins = &margins + &(step * &k_delta);
            let quad = base_quad + 2.0 * step * cross + step * step * curve;
            let trial = 0.5 * lambda * quad + mean_loss(&trial_margins, &labels);
            if trial <= objective + ARMIJO_SLOPE * step * slope {
                accepted = Some((step, trial));
                break;
            }
            step *= 0.5;
        }
        let Some((step, trial)) = accepted else {
            break;
        };

        coef = &coef + &(step * &delta);
        margins = k.dot(&coef);
        objective = trial;
        trace.push(objective);
        iterations += 1;
    }

    if converged || iterations == max_iter {
        // Refresh the norm at the final coefficients for the diagnostics.
        let (_, grad) = objective_and_gradient(&k, &labels, lambda, &coef);
        grad_norm = grad.dot(&grad).sqrt();
        converged = grad_norm <= tol;
    }

    Ok(KlrModel {
        kernel: kernel.clone(),
        lambda,
        points,
        coef,
        diagnostics: FitDiagnostics {
            iterations,
            final_objective: objective,
            final_grad_norm: grad_norm,
            converged,
            objective_trace: trace,
        },
    })
}
