//! Second-order gradient boosting of regression trees on the logistic loss,
//! with exact greedy split search.

use serde::{Deserialize, Serialize};

use super::{check_dim, sigmoid, softplus, validate_training, Classifier, MlError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum gain a split must reach.
    pub gamma: f64,
    pub reg_lambda: f64,
    /// Multiplier on the gradient and hessian of positive samples.
    pub scale_pos_weight: f64,
    /// Minimum hessian sum on each side of a split.
    pub min_child_weight: f64,
    /// Stop when the training loss improved by less than `early_stop_tol`
    /// over this many rounds.
    pub early_stop_rounds: usize,
    pub early_stop_tol: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            rounds: 200,
            max_depth: 8,
            learning_rate: 0.2,
            gamma: 0.0,
            reg_lambda: 0.0,
            scale_pos_weight: 5.0,
            min_child_weight: 1.0,
            early_stop_rounds: 10,
            early_stop_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        weight: f64,
    },
    /// Samples with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

/// Node arena; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { weight } => return weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Split { .. })).count()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub n_features: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub gamma: f64,
    pub reg_lambda: f64,
    pub scale_pos_weight: f64,
    pub trees: Vec<Tree>,
    /// Weighted training loss before the first tree and after each tree.
    pub loss_history: Vec<f64>,
}

impl GbtModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| self.learning_rate * t.leaf_value(x)).sum::<f64>()
    }
}

impl Classifier for GbtModel {
    fn predict_proba(&self, x: &[f64]) -> Result<f64, MlError> {
        check_dim(self.n_features, x)?;
        Ok(sigmoid(self.margin(x)))
    }
}

fn weighted_loss(margins: &[f64], y: &[u8], weights: &[f64]) -> f64 {
    margins
        .iter()
        .zip(y)
        .zip(weights)
        .map(|((&z, &t), &w)| w * (softplus(z) - f64::from(t) * z))
        .sum()
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 {
        g * g / d
    } else {
        0.0
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Grows one tree level by level. `order[f]` lists sample indices sorted by
/// feature `f`, so every level costs one pass per feature.
fn grow_tree(x: &[Vec<f64>], g: &[f64], h: &[f64], order: &[Vec<usize>], params: &GbtParams) -> Tree {
    let n = x.len();
    let lambda = params.reg_lambda;
    let mut nodes = vec![Node::Leaf { weight: 0.0 }];
    // Position of each sample in the arena; only leaves are ever current.
    let mut node_of = vec![0usize; n];
    let mut sums = vec![(g.iter().sum::<f64>(), h.iter().sum::<f64>())];
    let mut frontier = vec![0usize];

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        // Slot of each frontier node in the scan buffers.
        let mut slot = vec![usize::MAX; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            slot[id] = s;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];

        for (f, sorted) in order.iter().enumerate() {
            let mut left = vec![(0.0f64, 0.0f64); frontier.len()];
            let mut last: Vec<Option<f64>> = vec![None; frontier.len()];
            for &i in sorted {
                let s = match slot.get(node_of[i]) {
                    Some(&s) if s != usize::MAX => s,
                    _ => continue,
                };
                let v = x[i][f];
                if let Some(prev) = last[s] {
                    if v > prev {
                        let (gl, hl) = left[s];
                        let (gt, ht) = sums[frontier[s]];
                        let (gr, hr) = (gt - gl, ht - hl);
                        if hl >= params.min_child_weight && hr >= params.min_child_weight {
                            let gain = 0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(gt, ht, lambda));
                            if best[s].is_none_or(|b| gain > b.gain) {
                                let mid = prev + (v - prev) / 2.0;
                                best[s] = Some(Candidate {
                                    gain,
                                    feature: f,
                                    // Adjacent floats have no midpoint strictly above `prev`.
                                    threshold: if mid > prev { mid } else { v },
                                });
                            }
                        }
                    }
                }
                left[s].0 += g[i];
                left[s].1 += h[i];
                last[s] = Some(v);
            }
        }

        let mut next = Vec::new();
        for (s, &id) in frontier.iter().enumerate() {
            let Some(c) = best[s] else { continue };
            if !(c.gain >= params.gamma) {
                continue;
            }
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf { weight: 0.0 });
            nodes.push(Node::Leaf { weight: 0.0 });
            sums.push((0.0, 0.0));
            sums.push((0.0, 0.0));
            nodes[id] = Node::Split {
                feature: c.feature,
                threshold: c.threshold,
                gain: c.gain,
                left: l,
                right: r,
            };
            next.push(l);
            next.push(r);
        }
        if next.is_empty() {
            break;
        }
        for i in 0..n {
            if let Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } = nodes[node_of[i]]
            {
                let child = if x[i][feature] < threshold { left } else { right };
                node_of[i] = child;
                sums[child].0 += g[i];
                sums[child].1 += h[i];
            }
        }
        frontier = next;
    }

    for (id, node) in nodes.iter_mut().enumerate() {
        if let Node::Leaf { weight } = node {
            let (gs, hs) = sums[id];
            let d = hs + lambda;
            *weight = if d > 0.0 { -gs / d } else { 0.0 };
        }
    }
    Tree { nodes }
}

pub fn train_gbt(x: &[Vec<f64>], y: &[u8], params: &GbtParams) -> Result<GbtModel, MlError> {
    let dim = validate_training(x, y)?;
    if !(params.learning_rate > 0.0) || params.reg_lambda < 0.0 || !(params.scale_pos_weight > 0.0) {
        return Err(MlError::InvalidParameter(
            "learning_rate and scale_pos_weight must be positive, reg_lambda non-negative".into(),
        ));
    }
    let n = x.len();
    let positives = y.iter().filter(|&&l| l == 1).count();
    let rate = (positives as f64 / n as f64).clamp(1e-6, 1.0 - 1e-6);
    let base_score = (rate / (1.0 - rate)).ln();
    let weights: Vec<f64> = y
        .iter()
        .map(|&l| if l == 1 { params.scale_pos_weight } else { 1.0 })
        .collect();

    let order: Vec<Vec<usize>> = (0..dim)
        .map(|f| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut margins = vec![base_score; n];
    let mut history = vec![weighted_loss(&margins, y, &weights)];
    let mut trees = Vec::new();
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    for round in 0..params.rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            g[i] = weights[i] * (p - f64::from(y[i]));
            h[i] = weights[i] * p * (1.0 - p);
        }
        let tree = grow_tree(x, &g, &h, &order, params);
        for (m, row) in margins.iter_mut().zip(x) {
            *m += params.learning_rate * tree.leaf_value(row);
        }
        trees.push(tree);
        let loss = weighted_loss(&margins, y, &weights);
        if !loss.is_finite() {
            return Err(MlError::NonFiniteLoss(round));
        }
        history.push(loss);
        let k = params.early_stop_rounds;
        if k > 0 && history.len() > k && history[history.len() - 1 - k] - loss < params.early_stop_tol {
            break;
        }
    }

    Ok(GbtModel {
        n_features: dim,
        base_score,
        learning_rate: params.learning_rate,
        max_depth: params.max_depth,
        gamma: params.gamma,
        reg_lambda: params.reg_lambda,
        scale_pos_weight: params.scale_pos_weight,
        trees,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::testdata::blobs;

    fn xor() -> (Vec<Vec<f64>>, Vec<u8>) {
        (
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
        )
    }

    fn xor_params(max_depth: usize, rounds: usize) -> GbtParams {
        GbtParams {
            rounds,
            max_depth,
            min_child_weight: 0.0,
            scale_pos_weight: 1.0,
            ..GbtParams::default()
        }
    }

    fn accuracy(m: &GbtModel, x: &[Vec<f64>], y: &[u8]) -> f64 {
        let ok = x
            .iter()
            .zip(y)
            .filter(|(r, &l)| (m.predict_proba(r).unwrap() >= 0.5) == (l == 1))
            .count();
        ok as f64 / x.len() as f64
    }

    #[test]
    fn learns_xor_at_depth_two() {
        let (x, y) = xor();
        let m = train_gbt(&x, &y, &xor_params(2, 10)).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
        assert!(m.trees.iter().all(|t| t.depth() <= 2));
    }

    #[test]
    fn stumps_cannot_learn_xor() {
        let (x, y) = xor();
        let m = train_gbt(&x, &y, &xor_params(1, 10)).unwrap();
        assert!(accuracy(&m, &x, &y) < 1.0);
    }

    #[test]
    fn infinite_gamma_gives_constant_model() {
        let (x, y) = blobs(40, 1.0, 2);
        let params = GbtParams {
            gamma: f64::INFINITY,
            ..GbtParams::default()
        };
        let m = train_gbt(&x, &y, &params).unwrap();
        assert!(m.trees.iter().all(|t| t.split_count() == 0));
        let p0 = m.predict_proba(&x[0]).unwrap();
        assert!(x.iter().all(|r| m.predict_proba(r).unwrap() == p0));
    }

    #[test]
    fn single_class_is_predicted_immediately() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![f64::from(i)]).collect();
        let m = train_gbt(&x, &[1; 8], &GbtParams { rounds: 1, ..GbtParams::default() }).unwrap();
        assert!(x.iter().all(|r| m.predict_proba(r).unwrap() > 0.5));
        let m = train_gbt(&x, &[0; 8], &GbtParams { rounds: 1, ..GbtParams::default() }).unwrap();
        assert!(x.iter().all(|r| m.predict_proba(r).unwrap() < 0.5));
    }

    #[test]
    fn hand_built_stump() {
        let stump = Tree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 0.5,
                    gain: 1.0,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { weight: 1.0 },
                Node::Leaf { weight: -1.0 },
            ],
        };
        let mut m = GbtModel {
            n_features: 1,
            base_score: 0.0,
            learning_rate: 1.0,
            max_depth: 1,
            gamma: 0.0,
            reg_lambda: 0.0,
            scale_pos_weight: 1.0,
            trees: vec![],
            loss_history: vec![],
        };
        assert_eq!(m.predict_proba(&[0.0]).unwrap(), 0.5);
        m.trees.push(stump);
        assert_eq!(m.predict_proba(&[0.0]).unwrap(), sigmoid(1.0));
        assert_eq!(m.predict_proba(&[0.7]).unwrap(), sigmoid(-1.0));
        let before = m.predict_proba(&[0.2]).unwrap();
        m.trees.push(Tree {
            nodes: vec![Node::Leaf { weight: 0.0 }],
        });
        assert_eq!(m.predict_proba(&[0.2]).unwrap(), before);
        assert!(m.predict_proba(&[0.2, 1.0]).is_err());
    }

    #[test]
    fn training_loss_never_increases_and_gains_respect_gamma() {
        let (x, y) = blobs(120, 0.0, 7);
        let params = GbtParams {
            rounds: 30,
            gamma: 0.05,
            reg_lambda: 1.0,
            ..GbtParams::default()
        };
        let m = train_gbt(&x, &y, &params).unwrap();
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        for t in &m.trees {
            assert!(t.depth() <= params.max_depth);
            for n in &t.nodes {
                if let Node::Split { gain, .. } = n {
                    assert!(*gain >= params.gamma);
                }
            }
        }
    }

    #[test]
    fn blobs_are_fit_and_training_is_reproducible() {
        let (x, y) = blobs(100, 1.0, 3);
        let a = train_gbt(&x, &y, &GbtParams::default()).unwrap();
        assert!(accuracy(&a, &x, &y) >= 0.99);
        let b = train_gbt(&x, &y, &GbtParams::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
