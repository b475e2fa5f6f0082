//! Stratified holdout and k-fold splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitScheme {
    /// One split with this fraction of each class held out.
    Holdout(f64),
    KFold(usize),
}

impl Default for SplitScheme {
    fn default() -> Self {
        SplitScheme::KFold(5)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Splits row indices so each test part keeps the class balance of `labels`.
pub fn split(labels: &[u8], scheme: SplitScheme, seed: u64) -> Result<Vec<Fold>, EvalError> {
    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        match l {
            0 | 1 => by_class[usize::from(l)].push(i),
            other => return Err(EvalError::NonBinaryLabel(other)),
        }
    }
    if by_class.iter().any(Vec::is_empty) {
        return Err(EvalError::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for class in &mut by_class {
        class.shuffle(&mut rng);
    }

    let folds = match scheme {
        SplitScheme::Holdout(frac) => {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(EvalError::FoldTooSmall(format!("holdout fraction {frac} not in (0, 1)")));
            }
            let mut test = Vec::new();
            let mut train = Vec::new();
            for class in &by_class {
                let k = (class.len() as f64 * frac).round() as usize;
                if k == 0 || k == class.len() {
                    return Err(EvalError::FoldTooSmall(format!(
                        "holdout {frac} of a class with {} users leaves an empty side",
                        class.len()
                    )));
                }
                test.extend_from_slice(&class[..k]);
                train.extend_from_slice(&class[k..]);
            }
            vec![(train, test)]
        }
        SplitScheme::KFold(k) => {
            let smallest = by_class.iter().map(Vec::len).min().unwrap_or(0);
            if k < 2 || smallest < k {
                return Err(EvalError::FoldTooSmall(format!(
                    "{k} folds need at least {k} users per class, smallest class has {smallest}"
                )));
            }
            let mut assignment = vec![0usize; labels.len()];
            // Dealing continues across classes so fold sizes differ by at most one.
            let mut next = 0;
            for class in &by_class {
                for &i in class {
                    assignment[i] = next % k;
                    next += 1;
                }
            }
            (0..k)
                .map(|f| {
                    let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
                    (train, test)
                })
                .collect()
        }
    };

    Ok(folds
        .into_iter()
        .map(|(mut train, mut test)| {
            train.sort_unstable();
            test.sort_unstable();
            Fold { train, test }
        })
        .collect())
}
