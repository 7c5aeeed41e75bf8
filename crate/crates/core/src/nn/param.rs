use ndarray::Array2;
use rand::Rng;

/// A trainable matrix and its accumulated gradient. Biases are `1 x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    pub fn new(value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Param { value, grad }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Param::new(Array2::zeros((rows, cols)))
    }

    pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut impl Rng) -> Self {
        Param::new(Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-bound..bound)))
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.value.nrows(), self.value.ncols()]
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Fixed-order access to every parameter of a model.
pub trait Parameters {
    fn named_params(&self) -> Vec<(String, &Param)>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn params(&self) -> Vec<&Param> {
        self.named_params().into_iter().map(|(_, p)| p).collect()
    }

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn flat_values(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.value.iter().copied()).collect()
    }

    fn flat_grads(&self) -> Vec<f64> {
        self.params().iter().flat_map(|p| p.grad.iter().copied()).collect()
    }

    /// Overwrite every value from a flat slice in [`Parameters::params`] order.
    fn set_flat_values(&mut self, values: &[f64]) {
        let mut it = values.iter();
        for p in self.params_mut() {
            for v in p.value.iter_mut() {
                *v = *it.next().expect("flat slice shorter than parameters");
            }
        }
        assert!(it.next().is_none(), "flat slice longer than parameters");
    }
}

/// Prefix child parameter names with `prefix.`.
pub(crate) fn prefixed<'a>(prefix: &str, inner: Vec<(String, &'a Param)>) -> Vec<(String, &'a Param)> {
    inner.into_iter().map(|(n, p)| (format!("{prefix}.{n}"), p)).collect()
}
