use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::param::Param;
use super::NnError;

/// AdamW with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.01 }
    }
}

impl AdamWConfig {
    pub fn with_lr(self, lr: f64) -> Self {
        AdamWConfig { lr, ..self }
    }
}

/// First/second moment estimates, one pair per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState {
    pub step: u64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl AdamWState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Param>) -> Self {
        let (m, v) =
            params.into_iter().map(|p| (Array2::zeros(p.value.raw_dim()), Array2::zeros(p.value.raw_dim()))).unzip();
        AdamWState { step: 0, m, v }
    }
}

/// One optimizer step over `params` using their accumulated gradients:
///
/// ```text
/// p <- p - lr * wd * p
/// m <- b1 m + (1 - b1) g,   v <- b2 v + (1 - b2) g^2
/// p <- p - lr * m_hat / (sqrt(v_hat) + eps)
/// ```
pub fn adamw_step(params: &mut [&mut Param], state: &mut AdamWState, cfg: &AdamWConfig) -> Result<(), NnError> {
    if state.m.len() != params.len() {
        return Err(NnError::shape("adamw", state.m.len(), params.len()));
    }
    for (p, m) in params.iter().zip(&state.m) {
        if p.value.dim() != m.dim() {
            return Err(NnError::shape("adamw", m.dim(), p.value.dim()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    for ((p, m), v) in params.iter_mut().zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        let Param { value, grad } = &mut **p;
        Zip::from(value).and(&*grad).and(m).and(v).for_each(|w, &g, m, v| {
            *w *= decay;
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn scalar(v: f64, g: f64) -> Param {
        Param { value: array![[v]], grad: array![[g]] }
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let mut p = scalar(0.7, 0.0);
        let mut st = AdamWState::new([&p]);
        let cfg = AdamWConfig { weight_decay: 0.0, ..Default::default() };
        adamw_step(&mut [&mut p], &mut st, &cfg).unwrap();
        assert_eq!(p.value[[0, 0]], 0.7);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps).
        let mut p = scalar(0.0, 1.0);
        let mut st = AdamWState::new([&p]);
        let cfg = AdamWConfig { lr: 0.001, weight_decay: 0.0, ..Default::default() };
        adamw_step(&mut [&mut p], &mut st, &cfg).unwrap();
        assert!((p.value[[0, 0]] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn decay_only_shrinks_proportionally() {
        let mut p = scalar(2.0, 0.0);
        let mut st = AdamWState::new([&p]);
        let cfg = AdamWConfig { lr: 0.01, weight_decay: 0.1, ..Default::default() };
        adamw_step(&mut [&mut p], &mut st, &cfg).unwrap();
        assert!((p.value[[0, 0]] - (2.0 - 0.01 * 0.1 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut p = scalar(1.5, 3.0);
        let mut st = AdamWState::new([&p]);
        for _ in 0..5 {
            adamw_step(&mut [&mut p], &mut st, &AdamWConfig::default().with_lr(0.0)).unwrap();
        }
        assert_eq!(p.value[[0, 0]], 1.5);
    }

    #[test]
    fn mismatched_state_is_rejected() {
        let mut p = scalar(1.0, 1.0);
        let mut st = AdamWState::new(std::iter::empty());
        assert!(adamw_step(&mut [&mut p], &mut st, &AdamWConfig::default()).is_err());
    }
}
