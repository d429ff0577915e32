use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::rng_for;

use super::stats::mean_std;
use super::EvalError;

/// Linear classifier `sign(w·x + b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    /// +1 or −1; ties go to +1.
    pub fn predict(&self, x: &[f64]) -> i8 {
        if self.decision(x) >= 0.0 {
            1
        } else {
            -1
        }
    }
}

pub const DEFAULT_LAMBDA: f64 = 1e-3;
const MAX_SWEEPS: usize = 10_000;
const TOLERANCE: f64 = 1e-10;

fn check_labels(features: &[Vec<f64>], labels: &[i8]) -> Result<usize, EvalError> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(EvalError::Data(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let dim = features[0].len();
    if features.iter().any(|r| r.len() != dim || r.iter().any(|v| !v.is_finite())) {
        return Err(EvalError::Data("feature rows must be finite and of equal length".into()));
    }
    if labels.iter().any(|&l| l != 1 && l != -1) {
        return Err(EvalError::Data("labels must be +1 or -1".into()));
    }
    if !(labels.contains(&1) && labels.contains(&-1)) {
        return Err(EvalError::DegenerateLabels);
    }
    Ok(dim)
}

/// Minimises `λ/2 ‖w‖² + mean_i max(0, 1 − y_i (w·x_i + b))` by dual
/// coordinate descent in a fixed cyclic order. The bias is learned as the
/// weight of a constant feature and is therefore lightly regularised too.
pub fn train_svm(features: &[Vec<f64>], labels: &[i8], lambda: f64) -> Result<LinearSvm, EvalError> {
    let dim = check_labels(features, labels)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(EvalError::Data(format!("lambda must be positive, got {lambda}")));
    }
    let n = features.len();
    let c = 1.0 / (lambda * n as f64);
    let aug = |i: usize| features[i].iter().copied().chain(std::iter::once(1.0));
    let qii: Vec<f64> = (0..n).map(|i| aug(i).map(|v| v * v).sum()).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim + 1];
    for _ in 0..MAX_SWEEPS {
        let mut max_pg = f64::NEG_INFINITY;
        let mut min_pg = f64::INFINITY;
        for i in 0..n {
            let y = labels[i] as f64;
            let g = y * aug(i).zip(&w).map(|(x, w)| x * w).sum::<f64>() - 1.0;
            let pg = if alpha[i] == 0.0 {
                g.min(0.0)
            } else if alpha[i] == c {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg);
            min_pg = min_pg.min(pg);
            if pg != 0.0 && qii[i] > 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / qii[i]).clamp(0.0, c);
                let delta = (alpha[i] - old) * y;
                for (wj, x) in w.iter_mut().zip(aug(i)) {
                    *wj += delta * x;
                }
            }
        }
        if max_pg - min_pg < TOLERANCE {
            break;
        }
    }
    let bias = w.pop().expect("augmented weight");
    Ok(LinearSvm {
        weights: w,
        bias,
        lambda,
    })
}

/// Accuracy at one training fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionAccuracy {
    pub fraction: f64,
    pub mean: f64,
    pub std: f64,
    pub n_splits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub fractions: Vec<f64>,
    pub n_splits: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            fractions: (1..=9).map(|k| k as f64 / 10.0).collect(),
            n_splits: 1_000,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
        }
    }
}

/// Per-column mean and std of `rows`; zero std is replaced by 1.
fn standardizer(rows: &[&Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let dim = rows[0].len();
    let n = rows.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let std = (0..dim)
        .map(|j| {
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Stratified Monte-Carlo cross-validation: for each training fraction,
/// `n_splits` random splits taking that share of every class for training;
/// features standardised on the training part; test accuracy aggregated.
pub fn classify_monte_carlo(
    features: &[Vec<f64>],
    labels: &[i8],
    cfg: &ClassifyConfig,
) -> Result<Vec<FractionAccuracy>, EvalError> {
    check_labels(features, labels)?;
    let classes: [Vec<usize>; 2] = [1i8, -1].map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect());
    if classes.iter().any(|c| c.len() < 2) {
        return Err(EvalError::Data("each class needs at least 2 samples".into()));
    }
    if cfg.n_splits == 0 {
        return Err(EvalError::Data("n_splits must be positive".into()));
    }
    cfg.fractions
        .iter()
        .enumerate()
        .map(|(fi, &frac)| {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(EvalError::Data(format!("training fraction {frac} must lie in (0, 1)")));
            }
            let accs = (0..cfg.n_splits)
                .into_par_iter()
                .map(|s| {
                    let mut rng = rng_for(cfg.seed, &[fi as u64, s as u64]);
                    let (mut train, mut test) = (Vec::new(), Vec::new());
                    for class in &classes {
                        let mut idx = class.clone();
                        idx.shuffle(&mut rng);
                        let k = ((frac * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
                        train.extend_from_slice(&idx[..k]);
                        test.extend_from_slice(&idx[k..]);
                    }
                    let (mean, std) = standardizer(&train.iter().map(|&i| &features[i]).collect::<Vec<_>>());
                    let z = |i: usize| -> Vec<f64> {
                        features[i].iter().zip(mean.iter().zip(&std)).map(|(x, (m, s))| (x - m) / s).collect()
                    };
                    let xs: Vec<Vec<f64>> = train.iter().map(|&i| z(i)).collect();
                    let ys: Vec<i8> = train.iter().map(|&i| labels[i]).collect();
                    let svm = train_svm(&xs, &ys, cfg.lambda)?;
                    let correct = test.iter().filter(|&&i| svm.predict(&z(i)) == labels[i]).count();
                    Ok(correct as f64 / test.len() as f64)
                })
                .collect::<Result<Vec<f64>, EvalError>>()?;
            let (mean, std) = mean_std(&accs);
            Ok(FractionAccuracy {
                fraction: frac,
                mean,
                std,
                n_splits: cfg.n_splits,
            })
        })
        .collect()
}

/// CSV with columns `fraction,mean,std,n_splits`.
pub fn accuracy_csv(rows: &[FractionAccuracy]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["fraction", "mean", "std", "n_splits"]).expect("in-memory write");
    for r in rows {
        w.write_record([r.fraction.to_string(), r.mean.to_string(), r.std.to_string(), r.n_splits.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_margin_on_symmetric_problem() {
        let x = vec![
            vec![1.0, 0.0],
            vec![2.0, 1.0],
            vec![2.0, -1.0],
            vec![-1.0, 0.0],
            vec![-2.0, 1.0],
            vec![-2.0, -1.0],
        ];
        let y = [1, 1, 1, -1, -1, -1];
        let svm = train_svm(&x, &y, 1e-3).unwrap();
        assert!((svm.weights[0] - 1.0).abs() < 1e-6, "{svm:?}");
        assert!(svm.weights[1].abs() < 1e-6 && svm.bias.abs() < 1e-6);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(train_svm(&x, &[1, 1], 1e-3), Err(EvalError::DegenerateLabels)));
    }
}
