//! Per-packet denoising autoencoder baseline.

use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::csi::AmplitudeMatrix;
use crate::ingest::PairedSample;
use crate::nn::{
    adamw_step, leaky_relu, leaky_relu_backward, sigmoid, sigmoid_backward, AdamWConfig, AdamWState, Linear, Param,
    Parameters, SeededRng, DEFAULT_LEAKY_SLOPE,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DaeConfig {
    /// Hidden widths from input to output side; the bottleneck is the middle.
    pub hidden: Vec<usize>,
    pub epochs: usize,
    /// Packets (rows) per minibatch.
    pub batch_rows: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl Default for DaeConfig {
    fn default() -> Self {
        DaeConfig {
            hidden: vec![128, 64, 32, 16, 32, 64, 128],
            epochs: 30,
            batch_rows: 256,
            lr: 1e-3,
            weight_decay: 0.01,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            seed: 0,
        }
    }
}

/// Fully connected autoencoder applied to each packet independently:
/// LeakyReLU on hidden layers, Sigmoid on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Dae {
    pub layers: Vec<Linear>,
    pub leaky_slope: f64,
}

struct DaeCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Dae {
    pub fn new(features: usize, cfg: &DaeConfig) -> Self {
        let mut rng = SeededRng::with_stream(cfg.seed, 0);
        let mut widths = vec![features];
        widths.extend(&cfg.hidden);
        widths.push(features);
        let layers = widths.windows(2).map(|w| Linear::new(w[0], w[1], &mut rng)).collect();
        Dae { layers, leaky_slope: cfg.leaky_slope }
    }

    pub fn features(&self) -> usize {
        self.layers[0].input_dim()
    }

    fn forward_cached(&self, x: &Array2<f64>) -> Result<DaeCache, EvalError> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&h).map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
            inputs.push(h);
            h = if i == last { sigmoid(&z) } else { leaky_relu(&z, self.leaky_slope) };
            pre.push(z);
        }
        Ok(DaeCache { inputs, pre, output: h })
    }

    /// Rows are packets.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>, EvalError> {
        Ok(self.forward_cached(x)?.output)
    }

    fn backward(&mut self, cache: &DaeCache, dy: &Array2<f64>) {
        let last = self.layers.len() - 1;
        let mut d = sigmoid_backward(&cache.output, dy);
        for i in (0..self.layers.len()).rev() {
            if i != last {
                d = leaky_relu_backward(&cache.pre[i], &d, self.leaky_slope);
            }
            d = self.layers[i].backward(&cache.inputs[i], &d);
        }
    }

    pub fn denoise(&self, amp: &AmplitudeMatrix) -> Result<AmplitudeMatrix, EvalError> {
        Ok(AmplitudeMatrix::new(self.forward(amp.values())?))
    }
}

impl Parameters for Dae {
    fn named_params(&self) -> Vec<(String, &Param)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| crate::nn::prefixed(&format!("fc{i}"), l.named_params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

/// Mean squared error over all elements.
pub fn mse(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let n = a.len() as f64;
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

fn stack_rows(mats: impl Iterator<Item = AmplitudeMatrix>) -> Array2<f64> {
    let owned: Vec<Array2<f64>> = mats.map(|m| m.into_inner()).collect();
    let views: Vec<_> = owned.iter().map(|m| m.view()).collect();
    concatenate(Axis(0), &views).expect("equal widths")
}

/// Train on every packet of every pair, mapping noisy rows to clean rows.
/// Returns the model and the mean training MSE per epoch.
pub fn dae_train(pairs: &[PairedSample], cfg: &DaeConfig) -> Result<(Dae, Vec<f64>), EvalError> {
    let first = pairs.first().ok_or(EvalError::Empty("dae_train"))?;
    if cfg.epochs == 0 || cfg.batch_rows == 0 || cfg.hidden.is_empty() {
        return Err(EvalError::InvalidConfig("epochs, batch_rows and hidden must be nonzero".into()));
    }
    let f = first.noisy.subcarriers();
    if pairs.iter().any(|p| p.noisy.subcarriers() != f || p.clean.subcarriers() != f) {
        return Err(EvalError::ShapeMismatch { expected: format!("{f} subcarriers"), found: "mixed widths".into() });
    }
    let x = stack_rows(pairs.iter().map(|p| p.noisy.clone()));
    let y = stack_rows(pairs.iter().map(|p| p.clean.clone()));
    let mut model = Dae::new(f, cfg);
    let mut opt = AdamWState::new(model.params());
    let adam = AdamWConfig { lr: cfg.lr, weight_decay: cfg.weight_decay, ..Default::default() };
    let mut rng = SeededRng::with_stream(cfg.seed, 1);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_rows) {
            let xb = x.select(Axis(0), chunk);
            let yb = y.select(Axis(0), chunk);
            model.zero_grad();
            let cache = model.forward_cached(&xb)?;
            let n = cache.output.len() as f64;
            total += mse(&cache.output, &yb) * chunk.len() as f64;
            let dy = (&cache.output - &yb) * (2.0 / n);
            model.backward(&cache, &dy);
            adamw_step(&mut model.params_mut(), &mut opt, &adam)
                .map_err(|e| EvalError::InvalidConfig(e.to_string()))?;
        }
        history.push(total / x.nrows() as f64);
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::ScaleRecord;
    use crate::ingest::Material;
    use crate::nn::grad_check;
    use rand::Rng;

    fn identity_pairs(n: usize, seed: u64) -> Vec<PairedSample> {
        let mut r = SeededRng::new(seed);
        (0..n)
            .map(|i| {
                let level: f64 = r.random_range(0.2..0.8);
                let clean = Array2::from_shape_fn((40, 8), |(t, k)| level + 0.15 * ((k + t % 3) as f64).sin());
                PairedSample {
                    noisy: AmplitudeMatrix::new(clean.clone()),
                    clean: AmplitudeMatrix::new(clean),
                    noisy_scale: ScaleRecord { min: 0.0, max: 1.0 },
                    clean_scale: ScaleRecord { min: 0.0, max: 1.0 },
                    material: Material::ALL[i % 5],
                    day: 1,
                    noisy_id: format!("n{i}"),
                    clean_id: format!("c{i}"),
                }
            })
            .collect()
    }

    fn small() -> DaeConfig {
        DaeConfig { hidden: vec![16, 8, 16], epochs: 60, batch_rows: 32, lr: 3e-3, ..Default::default() }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut m = Dae::new(5, &DaeConfig { hidden: vec![4, 3, 4], ..Default::default() });
        let x = Array2::from_shape_fn((3, 5), |(i, j)| ((i * 5 + j) as f64 * 0.37).sin());
        let w = Array2::from_shape_fn((3, 5), |(i, j)| ((i + 2 * j) as f64 * 0.61).cos());
        let cache = m.forward_cached(&x).unwrap();
        m.zero_grad();
        m.backward(&cache, &w);
        let base = m.clone();
        let err = grad_check(&base.flat_values(), &m.flat_grads(), 1e-6, |v| {
            let mut c = base.clone();
            c.set_flat_values(v);
            (c.forward(&x).unwrap() * &w).sum()
        });
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn identity_task_is_learned() {
        let pairs = identity_pairs(6, 1);
        let untrained = Dae::new(8, &small());
        let (model, history) = dae_train(&pairs, &small()).unwrap();
        let p = &pairs[0];
        let before = mse(&untrained.forward(p.noisy.values()).unwrap(), p.clean.values());
        let after = mse(&model.forward(p.noisy.values()).unwrap(), p.clean.values());
        assert!(after < 0.01, "after {after}");
        assert!(after < before);
        assert!(history.last().unwrap() < history.first().unwrap());
    }

    #[test]
    fn deterministic() {
        let pairs = identity_pairs(3, 2);
        let cfg = DaeConfig { epochs: 2, ..small() };
        let (a, ha) = dae_train(&pairs, &cfg).unwrap();
        let (b, hb) = dae_train(&pairs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
    }
}
