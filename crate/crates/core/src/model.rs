//! Label-only classifiers and an output-perturbation DP logistic regression.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Outcome};
use crate::error::{check_dim, Error, Result};
use crate::privacy::{BudgetAccountant, PrivacyBudget};

/// A published black-box model: it answers with a label and nothing else.
pub trait Classifier: Send + Sync {
    fn input_width(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<Outcome>;

    fn is_favorable(&self, x: &[f64]) -> Result<bool> {
        Ok(self.predict(x)? == Outcome::Favorable)
    }
}

/// Linear model; predicts favorable iff `weights · x + bias >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub favorable_label: String,
    #[serde(default)]
    pub schema_fingerprint: String,
}

impl LogisticModel {
    pub fn margin(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.weights.len(), x.len())?;
        Ok(dot(&self.weights, x) + self.bias)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model: LogisticModel = serde_json::from_str(&text)?;
        if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{}: model has non-finite parameters",
                path.display()
            )));
        }
        Ok(model)
    }
}

impl Classifier for LogisticModel {
    fn input_width(&self) -> usize {
        self.weights.len()
    }

    fn predict(&self, x: &[f64]) -> Result<Outcome> {
        Ok(if self.margin(x)? >= 0.0 {
            Outcome::Favorable
        } else {
            Outcome::Unfavorable
        })
    }
}

/// Fraction of records whose predicted label matches the stored label.
pub fn accuracy(model: &dyn Classifier, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0usize;
    for (x, y) in ds.rows.iter().zip(&ds.labels) {
        if model.predict(x)? == *y {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticSettings {
    /// L2 strength on the average-loss objective; also applied to the bias.
    pub l2_strength: f64,
    pub max_iters: usize,
    /// Stop once the gradient norm falls to this value.
    pub tol: f64,
}

impl Default for LogisticSettings {
    fn default() -> Self {
        LogisticSettings {
            l2_strength: 1.5e-3,
            max_iters: 100,
            tol: 1e-9,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sign(y: Outcome) -> f64 {
    match y {
        Outcome::Favorable => 1.0,
        Outcome::Unfavorable => -1.0,
    }
}

/// Regularized average logistic loss. `params` holds the weights followed by the bias.
pub fn logistic_objective(params: &[f64], ds: &Dataset, l2: f64) -> f64 {
    let (w, b) = params.split_at(params.len() - 1);
    let loss: f64 = ds
        .rows
        .iter()
        .zip(&ds.labels)
        .map(|(x, y)| softplus(-sign(*y) * (dot(w, x) + b[0])))
        .sum::<f64>()
        / ds.len() as f64;
    loss + 0.5 * l2 * params.iter().map(|p| p * p).sum::<f64>()
}

/// Gradient of [`logistic_objective`].
pub fn logistic_gradient(params: &[f64], ds: &Dataset, l2: f64) -> Vec<f64> {
    let dim = params.len();
    let (w, b) = params.split_at(dim - 1);
    let mut grad = vec![0.0; dim];
    for (x, y) in ds.rows.iter().zip(&ds.labels) {
        let s = sign(*y);
        let z = s * (dot(w, x) + b[0]);
        // d/dz softplus(-z) = -sigmoid(-z)
        let coef = -s / (1.0 + z.exp());
        for (g, xi) in grad.iter_mut().zip(x) {
            *g += coef * xi;
        }
        grad[dim - 1] += coef;
    }
    let inv_n = 1.0 / ds.len() as f64;
    for (g, p) in grad.iter_mut().zip(params) {
        *g = *g * inv_n + l2 * p;
    }
    grad
}

fn check_training_input(ds: &Dataset, l2: f64) -> Result<()> {
    if !(l2 > 0.0 && l2.is_finite()) {
        return Err(Error::InvalidRegularizer(l2));
    }
    let counts = ds.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok(())
}

/// Non-private trainer: damped Newton iterations with Armijo backtracking.
pub fn train_logistic(
    ds: &Dataset,
    l2_strength: f64,
    max_iters: usize,
    tol: f64,
) -> Result<LogisticModel> {
    check_training_input(ds, l2_strength)?;
    let params = minimize(ds, l2_strength, max_iters, tol);
    Ok(into_model(params, ds))
}

/// Hessian of [`logistic_objective`]; positive definite for `l2 > 0`.
#[allow(clippy::needless_range_loop)]
fn logistic_hessian(params: &[f64], ds: &Dataset, l2: f64) -> Vec<Vec<f64>> {
    let dim = params.len();
    let (w, b) = params.split_at(dim - 1);
    let mut h = vec![vec![0.0; dim]; dim];
    let mut xt = vec![1.0; dim];
    for x in &ds.rows {
        xt[..dim - 1].copy_from_slice(x);
        let p = 1.0 / (1.0 + (-(dot(w, x) + b[0])).exp());
        let c = p * (1.0 - p);
        for i in 0..dim {
            for j in 0..=i {
                h[i][j] += c * xt[i] * xt[j];
            }
        }
    }
    let inv_n = 1.0 / ds.len() as f64;
    for i in 0..dim {
        for j in 0..=i {
            h[i][j] *= inv_n;
            h[j][i] = h[i][j];
        }
        h[i][i] += l2;
    }
    h
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][i] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

fn minimize(ds: &Dataset, l2: f64, max_iters: usize, tol: f64) -> Vec<f64> {
    let dim = ds.width() + 1;
    let mut params = vec![0.0; dim];
    let mut value = logistic_objective(&params, ds, l2);
    for _ in 0..max_iters {
        let grad = logistic_gradient(&params, ds, l2);
        if grad.iter().map(|g| g * g).sum::<f64>().sqrt() <= tol {
            break;
        }
        let hess = logistic_hessian(&params, ds, l2);
        let Some(dir) = cholesky_solve(&hess, &grad) else {
            break;
        };
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = params.iter().zip(&dir).map(|(p, d)| p - step * d).collect();
            let trial_value = logistic_objective(&trial, ds, l2);
            if trial_value <= value - 1e-4 * step * slope {
                params = trial;
                value = trial_value;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return params;
            }
        }
    }
    params
}

fn into_model(mut params: Vec<f64>, ds: &Dataset) -> LogisticModel {
    let bias = params.pop().expect("bias present");
    LogisticModel {
        weights: params,
        bias,
        favorable_label: ds.schema.favorable.clone(),
        schema_fingerprint: ds.schema.fingerprint(),
    }
}

/// DP logistic regression by output perturbation.
///
/// The regularized optimum has L2 sensitivity `2R / (N λ)` where `R` bounds the
/// norm of a record augmented with the constant bias input. The released
/// parameters are the optimum plus a vector whose density is proportional to
/// `exp(-‖η‖ / scale)` with `scale = 2R / (N λ ε)`: its norm is Gamma(dim, scale)
/// and its direction uniform. The accountant is charged `(epsilon_f, 0)`; the
/// charge is checked before any record is touched.
pub fn train_dp_logistic<R: Rng + ?Sized>(
    ds: &Dataset,
    settings: &LogisticSettings,
    epsilon_f: f64,
    rng: &mut R,
    acc: &mut BudgetAccountant,
) -> Result<LogisticModel> {
    if !(epsilon_f > 0.0 && epsilon_f.is_finite()) {
        return Err(Error::InvalidBudget(format!(
            "epsilon_f must be positive, got {epsilon_f}"
        )));
    }
    if !(settings.l2_strength > 0.0 && settings.l2_strength.is_finite()) {
        return Err(Error::InvalidRegularizer(settings.l2_strength));
    }
    let budget = PrivacyBudget::pure(epsilon_f)?;
    acc.check("model", budget)?;
    check_training_input(ds, settings.l2_strength)?;

    let mut params = minimize(ds, settings.l2_strength, settings.max_iters, settings.tol);
    let radius = (ds.schema.max_record_l2().powi(2) + 1.0).sqrt();
    let scale = 2.0 * radius / (ds.len() as f64 * settings.l2_strength * epsilon_f);
    let noise = sample_norm_noise(params.len(), scale, rng);
    params.iter_mut().zip(&noise).for_each(|(p, n)| *p += n);

    acc.spend("model", budget)?;
    Ok(into_model(params, ds))
}

/// Vector with density ∝ exp(-‖η‖ / scale) in `dim` dimensions.
fn sample_norm_noise<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    let gamma = Gamma::new(dim as f64, scale).expect("valid gamma parameters");
    let norm = gamma.sample(rng);
    let mut dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let len = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    dir.iter_mut().for_each(|d| *d *= norm / len);
    dir
}
