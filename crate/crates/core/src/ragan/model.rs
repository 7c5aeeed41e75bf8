use ndarray::{s, Array1, Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::csi::DATA_SUBCARRIERS;
use crate::nn::{
    dropout, dropout_backward, leaky_relu, leaky_relu_backward, prefixed, sigmoid, sigmoid_backward, BiLstm,
    BiLstmCache, LayerNorm, LayerNormCache, Linear, Mode, NnError, Param, Parameters, SeededRng, SequenceBatch,
    DEFAULT_LEAKY_SLOPE,
};

/// Final stage of the generator after the output projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputHead {
    /// dropout, LeakyReLU, then Sigmoid.
    #[default]
    DropoutLeakySigmoid,
    /// Sigmoid directly on the projection.
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorConfig {
    pub features: usize,
    /// Width of the input projection and of each LSTM direction.
    pub hidden: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
    /// Layer normalization between the Bi-LSTM and the output projection.
    pub pre_output_norm: bool,
    pub output_head: OutputHead,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            features: DATA_SUBCARRIERS,
            hidden: 256,
            dropout: 0.3,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            pre_output_norm: true,
            output_head: OutputHead::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiscriminatorConfig {
    pub features: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig { features: DATA_SUBCARRIERS, hidden: 256, dropout: 0.3, leaky_slope: DEFAULT_LEAKY_SLOPE }
    }
}

fn check_features(op: &'static str, x: &SequenceBatch, features: usize) -> Result<(usize, usize), NnError> {
    let (b, t, f) = x.dim();
    if f != features {
        return Err(NnError::shape(op, features, f));
    }
    if b == 0 || t == 0 {
        return Err(NnError::shape(op, "nonempty batch and sequence", (b, t)));
    }
    Ok((b, t))
}

fn flatten(x: &Array3<f64>) -> Array2<f64> {
    let (b, t, f) = x.dim();
    x.as_standard_layout().to_owned().into_shape_with_order((b * t, f)).expect("standard layout")
}

fn unflatten(x: Array2<f64>, b: usize, t: usize) -> Array3<f64> {
    let f = x.ncols();
    x.into_shape_with_order((b, t, f)).expect("row count is b*t")
}

/// Sequence-to-sequence denoiser:
/// layer norm, projection, dropout, LeakyReLU, Bi-LSTM, layer norm,
/// per-timestep projection back to the input width, output head.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub config: GeneratorConfig,
    pub norm_in: LayerNorm,
    pub fc_in: Linear,
    pub lstm: BiLstm,
    pub norm_mid: Option<LayerNorm>,
    pub fc_out: Linear,
}

#[derive(Debug, Clone)]
pub struct GeneratorCache {
    batch: usize,
    steps: usize,
    norm_in: LayerNormCache,
    normalized: Array2<f64>,
    mask_in: Option<Array2<f64>>,
    pre_act_in: Array2<f64>,
    lstm: BiLstmCache,
    norm_mid: Option<LayerNormCache>,
    mid: Array2<f64>,
    mask_out: Option<Array2<f64>>,
    pre_act_out: Array2<f64>,
    output: Array2<f64>,
}

impl Generator {
    pub fn new(config: GeneratorConfig, rng: &mut impl Rng) -> Self {
        let (f, h) = (config.features, config.hidden);
        Generator {
            config,
            norm_in: LayerNorm::new(f),
            fc_in: Linear::new(f, h, rng),
            lstm: BiLstm::new(h, h, rng),
            norm_mid: config.pre_output_norm.then(|| LayerNorm::new(2 * h)),
            fc_out: Linear::new(2 * h, f, rng),
        }
    }

    /// Every weight and bias zero, layer-norm gains one.
    pub fn zeros(config: GeneratorConfig) -> Self {
        let (f, h) = (config.features, config.hidden);
        Generator {
            config,
            norm_in: LayerNorm::new(f),
            fc_in: Linear::zeros(f, h),
            lstm: BiLstm::zeros(h, h),
            norm_mid: config.pre_output_norm.then(|| LayerNorm::new(2 * h)),
            fc_out: Linear::zeros(2 * h, f),
        }
    }

    pub fn forward(
        &self,
        x: &SequenceBatch,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<(SequenceBatch, GeneratorCache), NnError> {
        let (b, t) = check_features("generator", x, self.config.features)?;
        let slope = self.config.leaky_slope;
        let p = self.config.dropout;
        let flat = flatten(x);
        let (normalized, norm_in) = self.norm_in.forward(&flat)?;
        let projected_in = self.fc_in.forward(&normalized)?;
        let (pre_act_in, mask_in) = dropout(&projected_in, p, mode, rng);
        let act_in = leaky_relu(&pre_act_in, slope);
        let (seq, lstm) = self.lstm.forward(&unflatten(act_in, b, t))?;
        let seq_flat = flatten(&seq);
        let (mid, norm_mid) = match &self.norm_mid {
            Some(ln) => {
                let (y, c) = ln.forward(&seq_flat)?;
                (y, Some(c))
            }
            None => (seq_flat, None),
        };
        let projected = self.fc_out.forward(&mid)?;
        let (pre_act_out, mask_out, output) = match self.config.output_head {
            OutputHead::DropoutLeakySigmoid => {
                let (d, m) = dropout(&projected, p, mode, rng);
                let y = sigmoid(&leaky_relu(&d, slope));
                (d, m, y)
            }
            OutputHead::Sigmoid => {
                let y = sigmoid(&projected);
                (projected, None, y)
            }
        };
        let out = unflatten(output.clone(), b, t);
        let cache = GeneratorCache {
            batch: b,
            steps: t,
            norm_in,
            normalized,
            mask_in,
            pre_act_in,
            lstm,
            norm_mid,
            mid,
            mask_out,
            pre_act_out,
            output,
        };
        Ok((out, cache))
    }

    /// Inference without keeping a cache; dropout disabled.
    pub fn predict(&self, x: &SequenceBatch) -> Result<SequenceBatch, NnError> {
        let mut unused = SeededRng::new(0);
        Ok(self.forward(x, Mode::Eval, &mut unused)?.0)
    }

    /// Accumulates parameter gradients for `dL/d output` and returns `dL/d input`.
    pub fn backward(&mut self, cache: &GeneratorCache, dy: &SequenceBatch) -> SequenceBatch {
        let (b, t) = (cache.batch, cache.steps);
        let slope = self.config.leaky_slope;
        let dy = flatten(dy);
        let d_projected = match self.config.output_head {
            OutputHead::DropoutLeakySigmoid => {
                let d_act = sigmoid_backward(&cache.output, &dy);
                let d_drop = leaky_relu_backward(&cache.pre_act_out, &d_act, slope);
                dropout_backward(&d_drop, cache.mask_out.as_ref())
            }
            OutputHead::Sigmoid => sigmoid_backward(&cache.output, &dy),
        };
        let d_mid = self.fc_out.backward(&cache.mid, &d_projected);
        let d_seq = match (&mut self.norm_mid, &cache.norm_mid) {
            (Some(ln), Some(c)) => ln.backward(c, &d_mid),
            _ => d_mid,
        };
        let d_act_in = flatten(&self.lstm.backward(&cache.lstm, &unflatten(d_seq, b, t)));
        let d_pre = leaky_relu_backward(&cache.pre_act_in, &d_act_in, slope);
        let d_proj_in = dropout_backward(&d_pre, cache.mask_in.as_ref());
        let d_norm = self.fc_in.backward(&cache.normalized, &d_proj_in);
        unflatten(self.norm_in.backward(&cache.norm_in, &d_norm), b, t)
    }
}

impl Parameters for Generator {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut v = prefixed("norm_in", self.norm_in.named_params());
        v.extend(prefixed("fc_in", self.fc_in.named_params()));
        v.extend(prefixed("lstm", self.lstm.named_params()));
        if let Some(ln) = &self.norm_mid {
            v.extend(prefixed("norm_mid", ln.named_params()));
        }
        v.extend(prefixed("fc_out", self.fc_out.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.norm_in.params_mut();
        v.extend(self.fc_in.params_mut());
        v.extend(self.lstm.params_mut());
        if let Some(ln) = &mut self.norm_mid {
            v.extend(ln.params_mut());
        }
        v.extend(self.fc_out.params_mut());
        v
    }
}

/// Sequence critic: layer norm, Bi-LSTM, last-timestep readout, projection,
/// dropout, LeakyReLU, scalar projection. Emits raw scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub config: DiscriminatorConfig,
    pub norm_in: LayerNorm,
    pub lstm: BiLstm,
    pub fc_hidden: Linear,
    pub fc_score: Linear,
}

#[derive(Debug, Clone)]
pub struct DiscriminatorCache {
    batch: usize,
    steps: usize,
    norm_in: LayerNormCache,
    lstm: BiLstmCache,
    readout: Array2<f64>,
    mask: Option<Array2<f64>>,
    pre_act: Array2<f64>,
    act: Array2<f64>,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig, rng: &mut impl Rng) -> Self {
        let (f, h) = (config.features, config.hidden);
        Discriminator {
            config,
            norm_in: LayerNorm::new(f),
            lstm: BiLstm::new(f, h, rng),
            fc_hidden: Linear::new(2 * h, h, rng),
            fc_score: Linear::new(h, 1, rng),
        }
    }

    pub fn zeros(config: DiscriminatorConfig) -> Self {
        let (f, h) = (config.features, config.hidden);
        Discriminator {
            config,
            norm_in: LayerNorm::new(f),
            lstm: BiLstm::zeros(f, h),
            fc_hidden: Linear::zeros(2 * h, h),
            fc_score: Linear::zeros(h, 1),
        }
    }

    /// One raw critic score per batch element.
    pub fn forward(
        &self,
        x: &SequenceBatch,
        mode: Mode,
        rng: &mut impl Rng,
    ) -> Result<(Array1<f64>, DiscriminatorCache), NnError> {
        let (b, t) = check_features("discriminator", x, self.config.features)?;
        let (normalized, norm_in) = self.norm_in.forward(&flatten(x))?;
        let (seq, lstm) = self.lstm.forward(&unflatten(normalized, b, t))?;
        let readout = seq.slice(s![.., t - 1, ..]).to_owned();
        let hidden = self.fc_hidden.forward(&readout)?;
        let (pre_act, mask) = dropout(&hidden, self.config.dropout, mode, rng);
        let act = leaky_relu(&pre_act, self.config.leaky_slope);
        let scores = self.fc_score.forward(&act)?.column(0).to_owned();
        Ok((scores, DiscriminatorCache { batch: b, steps: t, norm_in, lstm, readout, mask, pre_act, act }))
    }

    pub fn score(&self, x: &SequenceBatch) -> Result<Array1<f64>, NnError> {
        let mut unused = SeededRng::new(0);
        Ok(self.forward(x, Mode::Eval, &mut unused)?.0)
    }

    /// `sigmoid(score)`, the probability view of the critic output.
    pub fn probability(&self, x: &SequenceBatch) -> Result<Array1<f64>, NnError> {
        Ok(sigmoid(&self.score(x)?))
    }

    /// Accumulates parameter gradients for `dL/d scores` and returns `dL/d input`.
    pub fn backward(&mut self, cache: &DiscriminatorCache, d_scores: &Array1<f64>) -> SequenceBatch {
        let (b, t) = (cache.batch, cache.steps);
        let d_out = d_scores.clone().insert_axis(ndarray::Axis(1));
        let d_act = self.fc_score.backward(&cache.act, &d_out);
        let d_pre = leaky_relu_backward(&cache.pre_act, &d_act, self.config.leaky_slope);
        let d_hidden = dropout_backward(&d_pre, cache.mask.as_ref());
        let d_readout = self.fc_hidden.backward(&cache.readout, &d_hidden);
        let mut d_seq = Array3::<f64>::zeros((b, t, 2 * self.config.hidden));
        d_seq.slice_mut(s![.., t - 1, ..]).assign(&d_readout);
        let d_norm = flatten(&self.lstm.backward(&cache.lstm, &d_seq));
        unflatten(self.norm_in.backward(&cache.norm_in, &d_norm), b, t)
    }
}

impl Parameters for Discriminator {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut v = prefixed("norm_in", self.norm_in.named_params());
        v.extend(prefixed("lstm", self.lstm.named_params()));
        v.extend(prefixed("fc_hidden", self.fc_hidden.named_params()));
        v.extend(prefixed("fc_score", self.fc_score.named_params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.norm_in.params_mut();
        v.extend(self.lstm.params_mut());
        v.extend(self.fc_hidden.params_mut());
        v.extend(self.fc_score.params_mut());
        v
    }
}
