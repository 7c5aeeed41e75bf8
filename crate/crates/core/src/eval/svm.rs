//! Kernel SVM: a binary C-SVC solved by SMO with second-order working set
//! selection, combined one-vs-one for multiclass prediction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub gamma: f64,
    pub c: f64,
    /// KKT violation tolerance.
    pub tolerance: f64,
    pub max_iter: usize,
}

impl SvmConfig {
    pub fn new(gamma: f64, c: f64) -> Self {
        SvmConfig { gamma, c, tolerance: 1e-3, max_iter: 10_000_000 }
    }
}

pub const DEFAULT_C: f64 = 10.0;

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Median Euclidean distance over all unordered pairs of distinct samples.
pub fn median_pairwise_distance(features: &[Vec<f64>]) -> Option<f64> {
    let mut d = Vec::with_capacity(features.len() * features.len().saturating_sub(1) / 2);
    for i in 0..features.len() {
        for j in i + 1..features.len() {
            d.push(features[i].iter().zip(&features[j]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    let m = d.len() / 2;
    Some(if d.len() % 2 == 1 { d[m] } else { 0.5 * (d[m - 1] + d[m]) })
}

/// `gamma = 1 / (2 sigma^2)` with sigma the median pairwise distance.
pub fn median_heuristic_gamma(features: &[Vec<f64>]) -> Result<f64, EvalError> {
    match median_pairwise_distance(features) {
        Some(s) if s > 0.0 && s.is_finite() => Ok(1.0 / (2.0 * s * s)),
        _ => Err(EvalError::DegenerateFeatures),
    }
}

/// Binary decision function `f(x) = sum_i coef_i k(sv_i, x) - rho`;
/// positive values vote for `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: usize,
    pub negative: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i`
    pub coef: Vec<f64>,
    pub rho: f64,
}

impl BinarySvm {
    pub fn decision(&self, gamma: f64, x: &[f64]) -> f64 {
        self.support_vectors.iter().zip(&self.coef).map(|(sv, c)| c * rbf(gamma, sv, x)).sum::<f64>() - self.rho
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub c: f64,
    pub classes: usize,
    /// One entry per pair of classes present in training, `positive < negative`.
    pub machines: Vec<BinarySvm>,
}

impl SvmModel {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut votes = vec![0usize; self.classes];
        for m in &self.machines {
            if m.decision(self.gamma, x) > 0.0 {
                votes[m.positive] += 1;
            } else {
                votes[m.negative] += 1;
            }
        }
        argmax_votes(&votes)
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Vec<usize> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn accuracy(&self, xs: &[Vec<f64>], labels: &[usize]) -> f64 {
        let hits = xs.iter().zip(labels).filter(|(x, &y)| self.predict(x) == y).count();
        hits as f64 / xs.len().max(1) as f64
    }
}

/// Index of the largest count; ties go to the lowest index.
pub fn argmax_votes(votes: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    best
}

/// Trains one binary machine per pair of classes present in `labels`.
/// `classes` is the size of the label space (labels must be below it).
pub fn svm_train(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    cfg: &SvmConfig,
) -> Result<SvmModel, EvalError> {
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) || !(cfg.c > 0.0 && cfg.c.is_finite()) {
        return Err(EvalError::InvalidConfig(format!("gamma {} and C {} must be positive", cfg.gamma, cfg.c)));
    }
    if features.len() != labels.len() {
        return Err(EvalError::ShapeMismatch {
            expected: format!("{} labels", features.len()),
            found: labels.len().to_string(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(EvalError::UnknownClass(bad));
    }
    for (i, f) in features.iter().enumerate() {
        if f.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFiniteFeature(i));
        }
    }
    let present: Vec<usize> = (0..classes).filter(|c| labels.contains(c)).collect();
    if present.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    let mut pairs = Vec::new();
    for (k, &a) in present.iter().enumerate() {
        for &b in &present[k + 1..] {
            pairs.push((a, b));
        }
    }
    let machines = pairs
        .par_iter()
        .map(|&(a, b)| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == a || labels[i] == b).collect();
            let x: Vec<&[f64]> = idx.iter().map(|&i| features[i].as_slice()).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == a { 1.0 } else { -1.0 }).collect();
            let (alpha, rho) = smo(&x, &y, cfg);
            let mut support_vectors = Vec::new();
            let mut coef = Vec::new();
            for (k, &al) in alpha.iter().enumerate() {
                if al > 0.0 {
                    support_vectors.push(x[k].to_vec());
                    coef.push(al * y[k]);
                }
            }
            BinarySvm { positive: a, negative: b, support_vectors, coef, rho }
        })
        .collect();
    Ok(SvmModel { gamma: cfg.gamma, c: cfg.c, classes, machines })
}

/// Dual C-SVC: minimise `0.5 a'Qa - e'a` subject to `0 <= a <= C`, `y'a = 0`.
/// Returns `(alpha, rho)`.
fn smo(x: &[&[f64]], y: &[f64], cfg: &SvmConfig) -> (Vec<f64>, f64) {
    let n = x.len();
    let c = cfg.c;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(cfg.gamma, x[i], x[j]);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let kij = |i: usize, j: usize| k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    for _ in 0..cfg.max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            let v = -y[t] * grad[t];
            let in_up = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if in_up && v >= gmax {
                gmax = v;
                i_sel = t;
            }
        }
        if i_sel == usize::MAX {
            break;
        }
        let i = i_sel;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let in_low = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
            if !in_low {
                continue;
            }
            let v = y[t] * grad[t];
            if v >= gmax2 {
                gmax2 = v;
            }
            let diff = gmax + v;
            if diff > 0.0 {
                let quad = kij(i, i) + kij(t, t) - 2.0 * kij(i, t);
                let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = t;
                }
            }
        }
        if gmax + gmax2 < cfg.tolerance || j_sel == usize::MAX {
            break;
        }
        let j = j_sel;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = kij(i, i) + kij(j, j) - 2.0 * kij(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let di = alpha[i] - old_i;
        let dj = alpha[j] - old_j;
        for t in 0..n {
            grad[t] += y[t] * (y[i] * kij(i, t) * di + y[j] * kij(j, t) * dj);
        }
    }

    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { 0.5 * (ub + lb) };
    (alpha, rho)
}
