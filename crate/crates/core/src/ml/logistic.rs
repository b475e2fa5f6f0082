//! L2-regularised logistic regression fitted by full-batch gradient descent
//! with backtracking line search.

use serde::{Deserialize, Serialize};

use super::{check_dim, sigmoid, softplus, validate_training, Classifier, MlError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    /// Inverse regularisation strength: the penalty is `‖W‖² / (2C)`.
    pub c: f64,
    /// Stop once an accepted step lowers the loss by less than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            tol: 1e-4,
            max_iter: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub tol: f64,
    /// Objective value after each accepted step, starting with the initial point.
    pub loss_history: Vec<f64>,
}

/// Summed negative log-likelihood plus `‖W‖² / (2C)`, with its gradient with
/// respect to the weights and the bias.
pub fn loss_and_gradient(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[u8], c: f64) -> (f64, Vec<f64>, f64) {
    let mut loss = 0.0;
    let mut grad_w: Vec<f64> = weights.iter().map(|w| w / c).collect();
    let mut grad_b = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = dot(weights, row) + bias;
        let t = f64::from(label);
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        for (g, v) in grad_w.iter_mut().zip(row) {
            *g += r * v;
        }
        grad_b += r;
    }
    loss += weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * c);
    (loss, grad_w, grad_b)
}

fn objective(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[u8], c: f64) -> f64 {
    let mut loss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = dot(weights, row) + bias;
            softplus(z) - f64::from(label) * z
        })
        .sum();
    loss += weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * c);
    loss
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

pub fn train_logistic(x: &[Vec<f64>], y: &[u8], params: &LogisticParams) -> Result<LogisticModel, MlError> {
    let dim = validate_training(x, y)?;
    if !(params.c > 0.0) {
        return Err(MlError::InvalidParameter(format!("C must be positive, got {}", params.c)));
    }
    let c = params.c;
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let (mut loss, mut gw, mut gb) = loss_and_gradient(&w, b, x, y, c);
    let mut history = vec![loss];
    let mut step = 1.0 / x.len() as f64;

    for iter in 0..params.max_iter {
        let gnorm2 = gw.iter().map(|g| g * g).sum::<f64>() + gb * gb;
        if gnorm2 == 0.0 {
            break;
        }
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - step * gi).collect();
            let cand_b = b - step * gb;
            let cand = objective(&cand_w, cand_b, x, y, c);
            if cand <= loss - ARMIJO * step * gnorm2 {
                accepted = Some((cand_w, cand_b));
                break;
            }
            step *= 0.5;
        }
        let Some((nw, nb)) = accepted else { break };
        w = nw;
        b = nb;
        let (new_loss, ngw, ngb) = loss_and_gradient(&w, b, x, y, c);
        if !new_loss.is_finite() {
            return Err(MlError::NonFiniteLoss(iter));
        }
        let improvement = loss - new_loss;
        loss = new_loss;
        gw = ngw;
        gb = ngb;
        history.push(loss);
        if improvement < params.tol {
            break;
        }
        step *= 2.0;
    }

    Ok(LogisticModel {
        weights: w,
        bias: b,
        c,
        tol: params.tol,
        loss_history: history,
    })
}

impl Classifier for LogisticModel {
    fn predict_proba(&self, x: &[f64]) -> Result<f64, MlError> {
        check_dim(self.weights.len(), x)?;
        Ok(sigmoid(dot(&self.weights, x) + self.bias))
    }
}
