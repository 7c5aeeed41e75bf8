use ndarray::{Array, Array2, Axis, Dimension};
use rand::Rng;

use super::param::{Param, Parameters};
use super::{Mode, NnError};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Row-wise affine map `y = x W + b` with `W: in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
}

impl Linear {
    /// Uniform(-1/sqrt(in), 1/sqrt(in)) for weights and bias.
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        Linear { weight: Param::uniform(input, output, bound, rng), bias: Param::uniform(1, output, bound, rng) }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Linear { weight: Param::zeros(input, output), bias: Param::zeros(1, output) }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>, NnError> {
        if x.ncols() != self.input_dim() {
            return Err(NnError::shape("linear", self.input_dim(), x.ncols()));
        }
        Ok(x.dot(&self.weight.value) + &self.bias.value)
    }

    /// Accumulate weight/bias gradients and return `dL/dx`.
    pub fn backward(&mut self, x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        self.weight.grad += &x.t().dot(dy);
        self.bias.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&self.weight.value.t())
    }
}

impl Parameters for Linear {
    fn named_params(&self) -> Vec<(String, &Param)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}

pub fn leaky_relu<D: Dimension>(x: &Array<f64, D>, slope: f64) -> Array<f64, D> {
    x.mapv(|v| if v >= 0.0 { v } else { slope * v })
}

pub fn leaky_relu_backward<D: Dimension>(x: &Array<f64, D>, dy: &Array<f64, D>, slope: f64) -> Array<f64, D> {
    let mut dx = dy.clone();
    dx.zip_mut_with(x, |g, &v| {
        if v < 0.0 {
            *g *= slope
        }
    });
    dx
}

fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid<D: Dimension>(x: &Array<f64, D>) -> Array<f64, D> {
    x.mapv(sigmoid_scalar)
}

/// Backward through sigmoid given its output `y`.
pub fn sigmoid_backward<D: Dimension>(y: &Array<f64, D>, dy: &Array<f64, D>) -> Array<f64, D> {
    let mut dx = dy.clone();
    dx.zip_mut_with(y, |g, &s| *g *= s * (1.0 - s));
    dx
}

/// Inverted dropout. Returns the output and, in train mode with `p > 0`, the
/// scaled keep mask (entries `0` or `1/(1-p)`) needed by the backward pass.
pub fn dropout<D: Dimension>(
    x: &Array<f64, D>,
    p: f64,
    mode: Mode,
    rng: &mut impl Rng,
) -> (Array<f64, D>, Option<Array<f64, D>>) {
    assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
    if mode == Mode::Eval || p == 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 / (1.0 - p);
    let mask = x.mapv(|_| if rng.random::<f64>() < p { 0.0 } else { keep });
    (x * &mask, Some(mask))
}

pub fn dropout_backward<D: Dimension>(dy: &Array<f64, D>, mask: Option<&Array<f64, D>>) -> Array<f64, D> {
    match mask {
        Some(m) => dy * m,
        None => dy.clone(),
    }
}

/// Per-row normalization over features followed by a learned affine map.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Param,
    pub bias: Param,
    pub eps: f64,
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    normalized: Array2<f64>,
    inv_std: Array2<f64>,
}

impl LayerNormCache {
    /// Rows after centering and scaling, before the affine map.
    pub fn normalized(&self) -> &Array2<f64> {
        &self.normalized
    }
}

impl LayerNorm {
    pub fn new(features: usize) -> Self {
        LayerNorm {
            gain: Param::new(Array2::ones((1, features))),
            bias: Param::zeros(1, features),
            eps: LAYER_NORM_EPS,
        }
    }

    pub fn features(&self) -> usize {
        self.gain.value.ncols()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, LayerNormCache), NnError> {
        let f = self.features();
        if x.ncols() != f || f < 2 {
            return Err(NnError::shape("layer_norm", f, x.ncols()));
        }
        let mean = x.mean_axis(Axis(1)).expect("non-empty").insert_axis(Axis(1));
        let centered = x - &mean;
        let var = centered.mapv(|v| v * v).mean_axis(Axis(1)).expect("non-empty").insert_axis(Axis(1));
        let inv_std = var.mapv(|v| 1.0 / (v + self.eps).sqrt());
        let normalized = centered * &inv_std;
        let y = &normalized * &self.gain.value + &self.bias.value;
        Ok((y, LayerNormCache { normalized, inv_std }))
    }

    pub fn backward(&mut self, cache: &LayerNormCache, dy: &Array2<f64>) -> Array2<f64> {
        let xhat = &cache.normalized;
        self.gain.grad += &(dy * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.bias.grad += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dxhat = dy * &self.gain.value;
        let n = xhat.ncols() as f64;
        let sum_d = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1));
        let sum_dx = (&dxhat * xhat).sum_axis(Axis(1)).insert_axis(Axis(1));
        let inner = dxhat * n - &sum_d - &(xhat * &sum_dx);
        inner * &(&cache.inv_std / n)
    }
}

impl Parameters for LayerNorm {
    fn named_params(&self) -> Vec<(String, &Param)> {
        vec![("gain".into(), &self.gain), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gain, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, max_relative_error, numerical_gradient};
    use ndarray::{array, Array1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn random(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn linear_examples() {
        let mut l = Linear::zeros(3, 3);
        l.weight.value = Array2::eye(3);
        let x = array![[1.0, -2.0, 3.0]];
        assert_eq!(l.forward(&x).unwrap(), x);

        let l = Linear { weight: Param::new(array![[2.0]]), bias: Param::new(array![[3.0]]) };
        assert_eq!(l.forward(&array![[1.0]]).unwrap(), array![[5.0]]);

        assert!(matches!(l.forward(&array![[1.0, 2.0]]), Err(NnError::ShapeMismatch { .. })));
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut r = rng();
        let lin = Linear::new(4, 3, &mut r);
        let x = random(5, 4, &mut r);
        let proj = random(5, 3, &mut r);
        let loss = |l: &Linear, x: &Array2<f64>| (l.forward(x).unwrap() * &proj).sum();

        let mut analytic = lin.clone();
        let dx = analytic.backward(&x, &proj);

        let err = grad_check(&lin.flat_values(), &analytic.flat_grads(), 1e-4, |v| {
            let mut l = lin.clone();
            l.set_flat_values(v);
            loss(&l, &x)
        });
        assert!(err < 1e-6, "param rel err {err}");

        let xs: Vec<f64> = x.iter().copied().collect();
        let num = numerical_gradient(&xs, 1e-4, |v| loss(&lin, &Array2::from_shape_vec((5, 4), v.to_vec()).unwrap()));
        let err = max_relative_error(&dx.iter().copied().collect::<Vec<_>>(), &num);
        assert!(err < 1e-6, "input rel err {err}");
    }

    #[test]
    fn activation_values() {
        let x = array![-1.0, 2.0];
        assert_eq!(leaky_relu(&x, 0.01), array![-0.01, 2.0]);
        assert_eq!(sigmoid(&array![0.0]), array![0.5]);
        let s = sigmoid(&array![-800.0, 800.0, 3.0]);
        assert!(s.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn activation_gradients() {
        let xs: Vec<f64> = vec![-1.3, -0.2, 0.4, 2.5, -3.0];
        let x = Array1::from(xs.clone());
        let ones = Array1::ones(5);

        let a = leaky_relu_backward(&x, &ones, 0.01);
        let n = numerical_gradient(&xs, 1e-6, |v| leaky_relu(&Array1::from(v.to_vec()), 0.01).sum());
        assert!(max_relative_error(a.as_slice().unwrap(), &n) < 1e-6);

        let a = sigmoid_backward(&sigmoid(&x), &ones);
        let n = numerical_gradient(&xs, 1e-5, |v| sigmoid(&Array1::from(v.to_vec())).sum());
        assert!(max_relative_error(a.as_slice().unwrap(), &n) < 1e-6);
    }

    #[test]
    fn dropout_modes() {
        let mut r = rng();
        let x = random(10, 10, &mut r);
        assert_eq!(dropout(&x, 0.3, Mode::Eval, &mut r).0, x);
        assert_eq!(dropout(&x, 0.0, Mode::Train, &mut r).0, x);

        let ones = Array1::<f64>::ones(100_000);
        let (y, mask) = dropout(&ones, 0.3, Mode::Train, &mut r);
        let survivors = y.iter().filter(|&&v| v != 0.0).count() as f64 / 1e5;
        assert!((survivors - 0.7).abs() < 0.01, "{survivors}");
        assert!((y.mean().unwrap() - 1.0).abs() < 0.02);
        let back = dropout_backward(&ones, mask.as_ref());
        assert_eq!(back, y);
    }

    #[test]
    fn layer_norm_statistics() {
        let mut r = rng();
        let ln = LayerNorm::new(6);
        let x = random(8, 6, &mut r) * 5.0 + 2.0;
        let (y, cache) = ln.forward(&x).unwrap();
        assert_eq!(&y, cache.normalized());
        for row in y.outer_iter() {
            let m = row.mean().unwrap();
            let v = row.mapv(|a| (a - m).powi(2)).mean().unwrap();
            assert!(m.abs() < 1e-6);
            assert!((v - 1.0).abs() < 1e-5, "var {v}");
        }

        let (y, _) = ln.forward(&Array2::from_elem((2, 6), 3.0)).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));

        assert!(LayerNorm::new(1).forward(&Array2::zeros((1, 1))).is_err());
    }

    #[test]
    fn layer_norm_gradients() {
        let mut r = rng();
        let mut ln = LayerNorm::new(5);
        ln.gain.value = random(1, 5, &mut r) + 1.0;
        ln.bias.value = random(1, 5, &mut r);
        let x = random(4, 5, &mut r);
        let proj = random(4, 5, &mut r);
        let loss = |l: &LayerNorm, x: &Array2<f64>| (l.forward(x).unwrap().0 * &proj).sum();

        let mut analytic = ln.clone();
        let (_, cache) = analytic.forward(&x).unwrap();
        let dx = analytic.backward(&cache, &proj);

        let err = grad_check(&ln.flat_values(), &analytic.flat_grads(), 1e-4, |v| {
            let mut l = ln.clone();
            l.set_flat_values(v);
            loss(&l, &x)
        });
        assert!(err < 1e-4, "param rel err {err}");

        let xs: Vec<f64> = x.iter().copied().collect();
        let num = numerical_gradient(&xs, 1e-4, |v| loss(&ln, &Array2::from_shape_vec((4, 5), v.to_vec()).unwrap()));
        let err = max_relative_error(&dx.iter().copied().collect::<Vec<_>>(), &num);
        assert!(err < 1e-4, "input rel err {err}");
    }
}
