//! Feed-forward network: dense → ReLU → dropout → batch-norm blocks and a
//! sigmoid output, trained with Adam on binary cross-entropy.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, sigmoid, softplus, validate_training, Classifier, MlError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub dropout: f64,
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; 0 disables
    /// early stopping and the validation split.
    pub patience: usize,
    pub validation_fraction: f64,
    pub bn_epsilon: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![256, 128, 64],
            learning_rate: 0.01,
            batch_size: 32,
            dropout: 0.5,
            epochs: 100,
            patience: 10,
            validation_fraction: 0.1,
            bn_epsilon: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseBlock {
    /// `inputs x outputs`.
    pub weights: DMatrix<f64>,
    pub bias: DVector<f64>,
    pub gamma: DVector<f64>,
    pub beta: DVector<f64>,
    pub running_mean: DVector<f64>,
    pub running_var: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_features: usize,
    pub blocks: Vec<DenseBlock>,
    pub output_weights: DVector<f64>,
    pub output_bias: f64,
    pub dropout: f64,
    pub bn_epsilon: f64,
    /// Mean training loss (inference path) after each epoch.
    pub train_loss: Vec<f64>,
    /// Mean validation loss after each epoch; empty without a validation split.
    pub val_loss: Vec<f64>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
}

struct BlockCache {
    input: DMatrix<f64>,
    pre: DMatrix<f64>,
    mask: Option<DMatrix<f64>>,
    xhat: DMatrix<f64>,
    inv_std: DVector<f64>,
}

struct Forward {
    caches: Vec<BlockCache>,
    last: DMatrix<f64>,
    logits: DVector<f64>,
}

fn add_row_vector(m: &mut DMatrix<f64>, v: &DVector<f64>) {
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col.add_scalar_mut(v[j]);
    }
}

fn column_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum()))
}

fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}

fn mean_bce(logits: &DVector<f64>, y: &[f64]) -> f64 {
    logits.iter().zip(y).map(|(&z, &t)| softplus(z) - t * z).sum::<f64>() / y.len() as f64
}

impl MlpModel {
    /// Fresh network with seeded uniform fan-in initialisation.
    pub fn new(n_features: usize, params: &MlpParams, rng: &mut ChaCha8Rng) -> Result<Self, MlError> {
        if params.hidden.contains(&0) || n_features == 0 {
            return Err(MlError::InvalidParameter("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&params.dropout) {
            return Err(MlError::InvalidParameter(format!("dropout {} not in [0, 1)", params.dropout)));
        }
        let mut blocks = Vec::with_capacity(params.hidden.len());
        let mut fan_in = n_features;
        for &width in &params.hidden {
            let lim = (6.0 / fan_in as f64).sqrt();
            blocks.push(DenseBlock {
                weights: DMatrix::from_fn(fan_in, width, |_, _| rng.gen_range(-lim..lim)),
                bias: DVector::zeros(width),
                gamma: DVector::from_element(width, 1.0),
                beta: DVector::zeros(width),
                running_mean: DVector::zeros(width),
                running_var: DVector::from_element(width, 1.0),
            });
            fan_in = width;
        }
        let lim = (3.0 / fan_in as f64).sqrt();
        Ok(Self {
            n_features,
            blocks,
            output_weights: DVector::from_fn(fan_in, |_, _| rng.gen_range(-lim..lim)),
            output_bias: 0.0,
            dropout: params.dropout,
            bn_epsilon: params.bn_epsilon,
            train_loss: Vec::new(),
            val_loss: Vec::new(),
            best_epoch: 0,
        })
    }

    pub fn param_count(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.weights.len() + 3 * b.bias.len())
            .sum::<usize>()
            + self.output_weights.len()
            + 1
    }

    /// Trainable parameters flattened: per block weights, bias, gamma, beta;
    /// then output weights and bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for b in &self.blocks {
            out.extend_from_slice(b.weights.as_slice());
            out.extend_from_slice(b.bias.as_slice());
            out.extend_from_slice(b.gamma.as_slice());
            out.extend_from_slice(b.beta.as_slice());
        }
        out.extend_from_slice(self.output_weights.as_slice());
        out.push(self.output_bias);
        out
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.param_count(), "parameter vector length");
        let mut at = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&p[at..at + dst.len()]);
            at += dst.len();
        };
        for b in &mut self.blocks {
            take(b.weights.as_mut_slice());
            take(b.bias.as_mut_slice());
            take(b.gamma.as_mut_slice());
            take(b.beta.as_mut_slice());
        }
        take(self.output_weights.as_mut_slice());
        self.output_bias = p[p.len() - 1];
    }

    /// Training-mode forward pass: batch statistics, and dropout when masks
    /// are given.
    fn forward_train(&self, x: DMatrix<f64>, masks: Option<Vec<DMatrix<f64>>>) -> Forward {
        let n = x.nrows() as f64;
        let mut masks = masks.map(|m| m.into_iter());
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut input = x;
        for b in &self.blocks {
            let mut pre = &input * &b.weights;
            add_row_vector(&mut pre, &b.bias);
            let mut h = relu(&pre);
            let mask = masks.as_mut().and_then(Iterator::next);
            if let Some(m) = &mask {
                h.component_mul_assign(m);
            }
            let mean = column_sums(&h) / n;
            let mut xhat = h;
            for (j, mut col) in xhat.column_iter_mut().enumerate() {
                col.add_scalar_mut(-mean[j]);
            }
            let var = DVector::from_iterator(xhat.ncols(), xhat.column_iter().map(|c| c.norm_squared() / n));
            let inv_std = var.map(|v| 1.0 / (v + self.bn_epsilon).sqrt());
            for (j, mut col) in xhat.column_iter_mut().enumerate() {
                col *= inv_std[j];
            }
            let mut out = xhat.clone();
            for (j, mut col) in out.column_iter_mut().enumerate() {
                col *= b.gamma[j];
                col.add_scalar_mut(b.beta[j]);
            }
            caches.push(BlockCache {
                input,
                pre,
                mask,
                xhat,
                inv_std,
            });
            input = out;
        }
        let logits = (&input * &self.output_weights).add_scalar(self.output_bias);
        Forward {
            caches,
            last: input,
            logits,
        }
    }

    /// Gradient of the mean cross-entropy, flattened like [`Self::params`].
    fn backward(&self, fwd: &Forward, y: &[f64]) -> Vec<f64> {
        let n = y.len() as f64;
        let dz = DVector::from_iterator(y.len(), fwd.logits.iter().zip(y).map(|(&z, &t)| (sigmoid(z) - t) / n));
        let d_out_w = fwd.last.tr_mul(&dz);
        let d_out_b = dz.sum();
        let mut dy = &dz * self.output_weights.transpose();

        let mut block_grads = Vec::with_capacity(self.blocks.len());
        for (b, c) in self.blocks.iter().zip(&fwd.caches).rev() {
            let d_beta = column_sums(&dy);
            let d_gamma = column_sums(&dy.component_mul(&c.xhat));
            let mut dxhat = dy;
            for (j, mut col) in dxhat.column_iter_mut().enumerate() {
                col *= b.gamma[j];
            }
            let sum_dxhat = column_sums(&dxhat);
            let sum_dxhat_xhat = column_sums(&dxhat.component_mul(&c.xhat));
            let mut dh = dxhat;
            for (j, mut col) in dh.column_iter_mut().enumerate() {
                let xcol = c.xhat.column(j);
                for (i, v) in col.iter_mut().enumerate() {
                    *v = c.inv_std[j] / n * (n * *v - sum_dxhat[j] - xcol[i] * sum_dxhat_xhat[j]);
                }
            }
            if let Some(m) = &c.mask {
                dh.component_mul_assign(m);
            }
            let da = dh.zip_map(&c.pre, |g, a| if a > 0.0 { g } else { 0.0 });
            let dw = c.input.tr_mul(&da);
            let db = column_sums(&da);
            dy = &da * b.weights.transpose();
            block_grads.push((dw, db, d_gamma, d_beta));
        }

        let mut out = Vec::with_capacity(self.param_count());
        for (dw, db, dg, dbeta) in block_grads.iter().rev() {
            out.extend_from_slice(dw.as_slice());
            out.extend_from_slice(db.as_slice());
            out.extend_from_slice(dg.as_slice());
            out.extend_from_slice(dbeta.as_slice());
        }
        out.extend_from_slice(d_out_w.as_slice());
        out.push(d_out_b);
        out
    }

    /// Mean cross-entropy of one batch in training mode without dropout,
    /// and its gradient with respect to [`Self::params`].
    pub fn batch_loss_and_gradient(&self, x: &[Vec<f64>], y: &[u8]) -> Result<(f64, Vec<f64>), MlError> {
        validate_training(x, y)?;
        check_dim(self.n_features, &x[0])?;
        let targets: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
        let fwd = self.forward_train(to_matrix(x, None), None);
        Ok((mean_bce(&fwd.logits, &targets), self.backward(&fwd, &targets)))
    }

    /// Inference-mode logits for many rows at once.
    fn logits_inference(&self, x: DMatrix<f64>) -> DVector<f64> {
        let mut input = x;
        for b in &self.blocks {
            let mut pre = &input * &b.weights;
            add_row_vector(&mut pre, &b.bias);
            let mut h = relu(&pre);
            for (j, mut col) in h.column_iter_mut().enumerate() {
                let scale = b.gamma[j] / (b.running_var[j] + self.bn_epsilon).sqrt();
                col.apply(|v| *v = (*v - b.running_mean[j]) * scale + b.beta[j]);
            }
            input = h;
        }
        (&input * &self.output_weights).add_scalar(self.output_bias)
    }

    /// Resets the batch-norm running statistics to the population statistics
    /// of `x` along the inference path.
    fn recalibrate(&mut self, x: &DMatrix<f64>) {
        let n = x.nrows() as f64;
        let mut input = x.clone();
        for b in &mut self.blocks {
            let mut pre = &input * &b.weights;
            add_row_vector(&mut pre, &b.bias);
            let mut h = relu(&pre);
            let mean = column_sums(&h) / n;
            let var = DVector::from_iterator(
                h.ncols(),
                h.column_iter().enumerate().map(|(j, c)| c.iter().map(|v| (v - mean[j]).powi(2)).sum::<f64>() / n),
            );
            for (j, mut col) in h.column_iter_mut().enumerate() {
                let scale = b.gamma[j] / (var[j] + self.bn_epsilon).sqrt();
                col.apply(|v| *v = (*v - mean[j]) * scale + b.beta[j]);
            }
            b.running_mean = mean;
            b.running_var = var;
            input = h;
        }
    }
}

impl Classifier for MlpModel {
    fn predict_proba(&self, x: &[f64]) -> Result<f64, MlError> {
        check_dim(self.n_features, x)?;
        let mut input = DVector::from_column_slice(x);
        for b in &self.blocks {
            let pre = b.weights.tr_mul(&input) + &b.bias;
            input = DVector::from_iterator(
                pre.len(),
                pre.iter().enumerate().map(|(j, &a)| {
                    let scale = b.gamma[j] / (b.running_var[j] + self.bn_epsilon).sqrt();
                    (a.max(0.0) - b.running_mean[j]) * scale + b.beta[j]
                }),
            );
        }
        Ok(sigmoid(self.output_weights.dot(&input) + self.output_bias))
    }
}

fn to_matrix(x: &[Vec<f64>], rows: Option<&[usize]>) -> DMatrix<f64> {
    match rows {
        Some(idx) => DMatrix::from_fn(idx.len(), x[0].len(), |i, j| x[idx[i]][j]),
        None => DMatrix::from_fn(x.len(), x[0].len(), |i, j| x[i][j]),
    }
}

/// Per-class shuffled split into (train, validation) indices.
fn stratified_validation(y: &[u8], fraction: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(rng);
        let k = (idx.len() as f64 * fraction).floor() as usize;
        val.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-7;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

pub fn train_mlp(x: &[Vec<f64>], y: &[u8], params: &MlpParams) -> Result<MlpModel, MlError> {
    let dim = validate_training(x, y)?;
    if params.batch_size == 0 || !(params.learning_rate > 0.0) {
        return Err(MlError::InvalidParameter("batch_size and learning_rate must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut model = MlpModel::new(dim, params, &mut rng)?;

    let (train_idx, val_idx) = if params.patience > 0 && params.validation_fraction > 0.0 {
        stratified_validation(y, params.validation_fraction, &mut rng)
    } else {
        ((0..x.len()).collect(), Vec::new())
    };
    let (train_idx, val_idx) = if train_idx.len() < 2 || val_idx.is_empty() {
        ((0..x.len()).collect::<Vec<_>>(), Vec::new())
    } else {
        (train_idx, val_idx)
    };
    if train_idx.len() < 2 {
        return Err(MlError::InvalidParameter("batch normalisation needs at least 2 training rows".into()));
    }

    let targets: Vec<f64> = y.iter().map(|&l| f64::from(l)).collect();
    let train_x = to_matrix(x, Some(&train_idx));
    let train_t: Vec<f64> = train_idx.iter().map(|&i| targets[i]).collect();
    let val_x = (!val_idx.is_empty()).then(|| to_matrix(x, Some(&val_idx)));
    let val_t: Vec<f64> = val_idx.iter().map(|&i| targets[i]).collect();

    let mut flat = model.params();
    let mut adam = Adam::new(flat.len(), params.learning_rate);
    let keep = 1.0 - params.dropout;
    let mut best: Option<(f64, MlpModel)> = None;
    let mut stale = 0;
    let mut order = train_idx.clone();

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut batches: Vec<&[usize]> = order.chunks(params.batch_size).collect();
        // A lone trailing row has no batch statistics; fold it into the previous batch.
        if batches.len() > 1 && batches[batches.len() - 1].len() < 2 {
            batches.pop();
            let n = batches.len();
            let start = (n - 1) * params.batch_size;
            batches[n - 1] = &order[start..];
        }
        for batch in batches {
            let bx = to_matrix(x, Some(batch));
            let masks = (params.dropout > 0.0).then(|| {
                let mut out = Vec::with_capacity(model.blocks.len());
                for b in &model.blocks {
                    out.push(DMatrix::from_fn(batch.len(), b.bias.len(), |_, _| {
                        if rng.gen::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    }));
                }
                out
            });
            let bt: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let fwd = model.forward_train(bx, masks);
            if !mean_bce(&fwd.logits, &bt).is_finite() {
                return Err(MlError::NonFiniteLoss(epoch));
            }
            let grad = model.backward(&fwd, &bt);
            adam.step(&mut flat, &grad);
            model.set_params(&flat);
        }

        model.recalibrate(&train_x);
        let train_loss = mean_bce(&model.logits_inference(train_x.clone()), &train_t);
        if !train_loss.is_finite() {
            return Err(MlError::NonFiniteLoss(epoch));
        }
        model.train_loss.push(train_loss);
        if let Some(vx) = &val_x {
            let val_loss = mean_bce(&model.logits_inference(vx.clone()), &val_t);
            model.val_loss.push(val_loss);
            if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
                model.best_epoch = epoch;
                best = Some((val_loss, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= params.patience {
                    break;
                }
            }
        } else {
            model.best_epoch = epoch;
        }
    }

    Ok(match best {
        Some((_, mut kept)) => {
            kept.train_loss = model.train_loss;
            kept.val_loss = model.val_loss;
            kept
        }
        None => model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::testdata::blobs;

    fn small() -> MlpParams {
        MlpParams {
            hidden: vec![8, 4],
            ..MlpParams::default()
        }
    }

    #[test]
    fn separates_blobs() {
        let (x, y) = blobs(200, 2.0, 5);
        let m = train_mlp(&x, &y, &MlpParams { epochs: 50, ..MlpParams::default() }).unwrap();
        let ok = x
            .iter()
            .zip(&y)
            .filter(|(r, &l)| (m.predict_proba(r).unwrap() >= 0.5) == (l == 1))
            .count();
        assert!(ok as f64 / 200.0 >= 0.99, "accuracy {ok}/200");
    }

    #[test]
    fn constant_target_is_learned() {
        let (x, _) = blobs(64, 1.0, 6);
        let y = vec![1u8; 64];
        let m = train_mlp(&x, &y, &MlpParams { epochs: 60, ..small() }).unwrap();
        assert!(x.iter().all(|r| m.predict_proba(r).unwrap() > 0.95));
        assert!(m.train_loss.last().unwrap() < &0.05);
    }

    #[test]
    fn inference_is_pure_and_batch_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = MlpModel::new(5, &MlpParams::default(), &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = (0..6).map(|i| (0..5).map(|j| f64::from(i * j) / 7.0 - 1.0).collect()).collect();
        let single: Vec<f64> = rows.iter().map(|r| m.predict_proba(r).unwrap()).collect();
        assert_eq!(m.predict_proba_batch(&rows).unwrap(), single);
        assert_eq!(m.predict_proba(&rows[2]).unwrap(), single[2]);
        assert!(single.iter().all(|&p| p > 0.0 && p < 1.0));
        let via_matrix = m.logits_inference(to_matrix(&rows, None));
        for (p, z) in single.iter().zip(via_matrix.iter()) {
            assert!((p - sigmoid(*z)).abs() < 1e-12);
        }
        assert!(m.predict_proba(&[0.0; 4]).is_err());
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = MlpModel::new(3, &small(), &mut rng).unwrap();
        let p: Vec<f64> = (0..m.param_count()).map(|i| i as f64 * 0.01).collect();
        m.set_params(&p);
        assert_eq!(m.params(), p);
    }

    #[test]
    fn gradient_matches_finite_differences_on_small_net() {
        let (x, y) = blobs(12, 0.5, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = MlpModel::new(2, &small(), &mut rng).unwrap();
        let (_, grad) = m.batch_loss_and_gradient(&x, &y).unwrap();
        let base = m.params();
        let h = 1e-6;
        let mut worst = 0.0f64;
        for i in 0..base.len() {
            let mut p = base.clone();
            p[i] += h;
            m.set_params(&p);
            let up = m.batch_loss_and_gradient(&x, &y).unwrap().0;
            p[i] -= 2.0 * h;
            m.set_params(&p);
            let down = m.batch_loss_and_gradient(&x, &y).unwrap().0;
            let numeric = (up - down) / (2.0 * h);
            let rel = (numeric - grad[i]).abs() / (numeric.abs() + grad[i].abs()).max(1e-6);
            worst = worst.max(rel);
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn training_is_reproducible() {
        let (x, y) = blobs(40, 1.0, 10);
        let params = MlpParams { epochs: 5, ..small() };
        let a = train_mlp(&x, &y, &params).unwrap();
        let b = train_mlp(&x, &y, &params).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
