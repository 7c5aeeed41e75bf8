use ndarray::{concatenate, s, Array2, Array3, ArrayView2, Axis};
use rand::Rng;

use super::layers::sigmoid;
use super::param::{prefixed, Param, Parameters};
use super::NnError;

/// One direction of an LSTM. Gate blocks are laid out `[input, forget,
/// cell candidate, output]` along the columns of every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    /// `input x 4*hidden`
    pub w_ih: Param,
    /// `hidden x 4*hidden`
    pub w_hh: Param,
    /// `1 x 4*hidden`
    pub bias: Param,
}

impl LstmDirection {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        LstmDirection {
            w_ih: Param::uniform(input, 4 * hidden, bound, rng),
            w_hh: Param::uniform(hidden, 4 * hidden, bound, rng),
            bias: Param::uniform(1, 4 * hidden, bound, rng),
        }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmDirection {
            w_ih: Param::zeros(input, 4 * hidden),
            w_hh: Param::zeros(hidden, 4 * hidden),
            bias: Param::zeros(1, 4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_hh.value.nrows()
    }

    pub fn input(&self) -> usize {
        self.w_ih.value.nrows()
    }
}

impl Parameters for LstmDirection {
    fn named_params(&self) -> Vec<(String, &Param)> {
        vec![("w_ih".into(), &self.w_ih), ("w_hh".into(), &self.w_hh), ("bias".into(), &self.bias)]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.bias]
    }
}

/// Per-step activations of one direction, indexed by processing step
/// (so step 0 of the backward direction is the last timestep).
#[derive(Debug, Clone)]
struct DirectionCache {
    gates: Vec<Array2<f64>>,
    cells: Vec<Array2<f64>>,
    tanh_cells: Vec<Array2<f64>>,
    hiddens: Vec<Array2<f64>>,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    input: Array3<f64>,
    forward: DirectionCache,
    backward: DirectionCache,
}

/// Bidirectional LSTM. Output at step `t` is
/// `[forward_h[t], backward_h[t]]`, where the forward pass reads the sequence
/// first-to-last and the backward pass last-to-first.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

impl BiLstm {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        BiLstm { forward: LstmDirection::new(input, hidden, rng), backward: LstmDirection::new(input, hidden, rng) }
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        BiLstm { forward: LstmDirection::zeros(input, hidden), backward: LstmDirection::zeros(input, hidden) }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    pub fn input(&self) -> usize {
        self.forward.input()
    }

    /// `(batch, time, input)` to `(batch, time, 2*hidden)`.
    pub fn forward(&self, x: &Array3<f64>) -> Result<(Array3<f64>, BiLstmCache), NnError> {
        let (b, t, f) = x.dim();
        if f != self.input() {
            return Err(NnError::shape("bilstm", self.input(), f));
        }
        if t == 0 {
            return Err(NnError::shape("bilstm", "at least one timestep", t));
        }
        let input = x.as_standard_layout().into_owned();
        let flat = input.view().into_shape_with_order((b * t, f)).expect("standard layout");
        let fwd = run_direction(&self.forward, flat, b, t, false);
        let bwd = run_direction(&self.backward, flat, b, t, true);
        let h = self.hidden();
        let mut out = Array3::<f64>::zeros((b, t, 2 * h));
        for step in 0..t {
            out.slice_mut(s![.., step, ..h]).assign(&fwd.hiddens[step]);
            out.slice_mut(s![.., t - 1 - step, h..]).assign(&bwd.hiddens[step]);
        }
        Ok((out, BiLstmCache { input, forward: fwd, backward: bwd }))
    }

    /// Backpropagation through time. Accumulates parameter gradients and
    /// returns `dL/dx`.
    pub fn backward(&mut self, cache: &BiLstmCache, dy: &Array3<f64>) -> Array3<f64> {
        let (b, t, f) = cache.input.dim();
        let h = self.hidden();
        let flat = cache.input.view().into_shape_with_order((b * t, f)).expect("standard layout");
        let dfwd = dy.slice(s![.., .., ..h]);
        let dbwd = dy.slice(s![.., .., h..]);
        let dx_f = backprop_direction(&mut self.forward, &cache.forward, flat, &dfwd, b, t, false);
        let dx_b = backprop_direction(&mut self.backward, &cache.backward, flat, &dbwd, b, t, true);
        (dx_f + dx_b).into_shape_with_order((b, t, f)).expect("shape preserved")
    }
}

impl Parameters for BiLstm {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut v = prefixed("forward", self.forward.named_params());
        v.extend(prefixed("backward", self.backward.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.forward.params_mut();
        v.extend(self.backward.params_mut());
        v
    }
}

/// Rows of the flattened `(batch*time, features)` input at one timestep.
fn timestep_rows(flat: &Array2<f64>, b: usize, t: usize, time: usize) -> Array2<f64> {
    let cols = flat.ncols();
    let mut out = Array2::zeros((b, cols));
    for i in 0..b {
        out.row_mut(i).assign(&flat.row(i * t + time));
    }
    out
}

fn run_direction(dir: &LstmDirection, x: ArrayView2<f64>, b: usize, t: usize, reverse: bool) -> DirectionCache {
    let h = dir.hidden();
    let projected = x.dot(&dir.w_ih.value) + &dir.bias.value;
    let mut cache = DirectionCache {
        gates: Vec::with_capacity(t),
        cells: Vec::with_capacity(t),
        tanh_cells: Vec::with_capacity(t),
        hiddens: Vec::with_capacity(t),
    };
    let mut h_prev = Array2::<f64>::zeros((b, h));
    let mut c_prev = Array2::<f64>::zeros((b, h));
    for step in 0..t {
        let time = if reverse { t - 1 - step } else { step };
        let mut z = timestep_rows(&projected, b, t, time);
        z += &h_prev.dot(&dir.w_hh.value);
        let mut gates = sigmoid(&z);
        gates.slice_mut(s![.., 2 * h..3 * h]).assign(&z.slice(s![.., 2 * h..3 * h]).mapv(f64::tanh));
        let i = gates.slice(s![.., ..h]);
        let f = gates.slice(s![.., h..2 * h]);
        let g = gates.slice(s![.., 2 * h..3 * h]);
        let o = gates.slice(s![.., 3 * h..]);
        let c = &f * &c_prev + &i * &g;
        let tc = c.mapv(f64::tanh);
        let hh = &o * &tc;
        cache.gates.push(gates.clone());
        cache.cells.push(c.clone());
        cache.tanh_cells.push(tc);
        cache.hiddens.push(hh.clone());
        h_prev = hh;
        c_prev = c;
    }
    cache
}

fn backprop_direction(
    dir: &mut LstmDirection,
    cache: &DirectionCache,
    x: ArrayView2<f64>,
    dy: &ndarray::ArrayView3<f64>,
    b: usize,
    t: usize,
    reverse: bool,
) -> Array2<f64> {
    let h = dir.hidden();
    let mut dh_next = Array2::<f64>::zeros((b, h));
    let mut dc_next = Array2::<f64>::zeros((b, h));
    let mut dproj = Array2::<f64>::zeros((b * t, 4 * h));
    let zeros = Array2::<f64>::zeros((b, h));
    for step in (0..t).rev() {
        let time = if reverse { t - 1 - step } else { step };
        let gates = &cache.gates[step];
        let i = gates.slice(s![.., ..h]);
        let f = gates.slice(s![.., h..2 * h]);
        let g = gates.slice(s![.., 2 * h..3 * h]);
        let o = gates.slice(s![.., 3 * h..]);
        let tc = &cache.tanh_cells[step];
        let c_prev = if step > 0 { &cache.cells[step - 1] } else { &zeros };
        let h_prev = if step > 0 { &cache.hiddens[step - 1] } else { &zeros };

        let dh = &dy.slice(s![.., time, ..]) + &dh_next;
        let d_o = &dh * tc * o * &o.mapv(|v| 1.0 - v);
        let dc = &dh * &o * &tc.mapv(|v| 1.0 - v * v) + &dc_next;
        let d_i = &dc * &g * i * &i.mapv(|v| 1.0 - v);
        let d_f = &dc * c_prev * f * &f.mapv(|v| 1.0 - v);
        let d_g = &dc * &i * &g.mapv(|v| 1.0 - v * v);
        dc_next = &dc * &f;

        let dz = concatenate![Axis(1), d_i, d_f, d_g, d_o];
        dir.w_hh.grad += &h_prev.t().dot(&dz);
        dir.bias.grad += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        dh_next = dz.dot(&dir.w_hh.value.t());
        for bi in 0..b {
            dproj.row_mut(bi * t + time).assign(&dz.row(bi));
        }
    }
    dir.w_ih.grad += &x.t().dot(&dproj);
    dproj.dot(&dir.w_ih.value.t())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{grad_check, max_relative_error, numerical_gradient};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random3(shape: (usize, usize, usize), rng: &mut impl Rng) -> Array3<f64> {
        Array3::from_shape_simple_fn(shape, || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let lstm = BiLstm::zeros(3, 4);
        let (y, _) = lstm.forward(&random3((2, 5, 3), &mut r)).unwrap();
        assert_eq!(y.dim(), (2, 5, 8));
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_wrong_feature_width() {
        let lstm = BiLstm::zeros(3, 4);
        assert!(lstm.forward(&Array3::zeros((1, 2, 5))).is_err());
    }

    #[test]
    fn time_reversal_swaps_directions() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let lstm = BiLstm::new(3, 4, &mut r);
        let x = random3((2, 6, 3), &mut r);
        let (y, _) = lstm.forward(&x).unwrap();

        let swapped = BiLstm { forward: lstm.backward.clone(), backward: lstm.forward.clone() };
        let mut xr = x.clone();
        xr.invert_axis(Axis(1));
        let (yr, _) = swapped.forward(&xr.as_standard_layout().to_owned()).unwrap();

        let h = 4;
        for b in 0..2 {
            for t in 0..6 {
                for k in 0..h {
                    assert!((yr[[b, 5 - t, k]] - y[[b, t, h + k]]).abs() < 1e-9);
                    assert!((yr[[b, 5 - t, h + k]] - y[[b, t, k]]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let lstm = BiLstm::new(3, 4, &mut r);
        let x = random3((2, 3, 3), &mut r);
        let proj = random3((2, 3, 8), &mut r);
        let loss = |l: &BiLstm, x: &Array3<f64>| (l.forward(x).unwrap().0 * &proj).sum();

        let mut analytic = lstm.clone();
        let (_, cache) = analytic.forward(&x).unwrap();
        let dx = analytic.backward(&cache, &proj);

        let err = grad_check(&lstm.flat_values(), &analytic.flat_grads(), 1e-5, |v| {
            let mut l = lstm.clone();
            l.set_flat_values(v);
            loss(&l, &x)
        });
        assert!(err < 1e-4, "param rel err {err}");

        let xs: Vec<f64> = x.iter().copied().collect();
        let num =
            numerical_gradient(&xs, 1e-5, |v| loss(&lstm, &Array3::from_shape_vec((2, 3, 3), v.to_vec()).unwrap()));
        let err = max_relative_error(&dx.iter().copied().collect::<Vec<_>>(), &num);
        assert!(err < 1e-4, "input rel err {err}");
    }
}
