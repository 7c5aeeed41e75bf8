use ndarray::{Array3, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{content_loss, loss_d_relativistic, loss_g_adversarial, loss_generator_total};
use super::model::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, OutputHead};
use super::RaganError;
use crate::ingest::PairedSample;
use crate::nn::{adamw_step, AdamWConfig, AdamWState, Mode, Parameters, SeededRng, DEFAULT_LEAKY_SLOPE};

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

/// Hyperparameters of one training run. Defaults are the tuned set
/// (batch 5, AdamW, lr 1e-3 / 1e-4, lambda 100, dropout 0.3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub lambda: f64,
    pub dropout: f64,
    pub hidden: usize,
    pub leaky_slope: f64,
    pub output_head: OutputHead,
    pub pre_output_norm: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Discriminator updates per generator update.
    pub d_steps: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Conditional-GAN ablation. No conditioning design is built in, so
    /// enabling it is rejected by [`TrainConfig::validate`].
    pub cgan_mode: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamWConfig::default();
        TrainConfig {
            batch_size: 5,
            lr_g: 1e-3,
            lr_d: 1e-4,
            lambda: 100.0,
            dropout: 0.3,
            hidden: 256,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
            output_head: OutputHead::default(),
            pre_output_norm: true,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            weight_decay: adam.weight_decay,
            d_steps: 1,
            max_epochs: 500,
            patience: 20,
            seed: 0,
            cgan_mode: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RaganError> {
        let bad = |m: String| Err(RaganError::Config(m));
        if self.cgan_mode {
            return Err(RaganError::Unsupported(
                "cgan mode: the conditional architecture is unspecified; supply a conditioning design".into(),
            ));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.hidden == 0 {
            return bad("hidden must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        for (name, v) in
            [("lr_g", self.lr_g), ("lr_d", self.lr_d), ("lambda", self.lambda), ("weight_decay", self.weight_decay)]
        {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return bad("AdamW betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.d_steps == 0 || self.max_epochs == 0 {
            return bad("d_steps and max_epochs must be positive".into());
        }
        Ok(())
    }

    pub fn generator_config(&self, features: usize) -> GeneratorConfig {
        GeneratorConfig {
            features,
            hidden: self.hidden,
            dropout: self.dropout,
            leaky_slope: self.leaky_slope,
            pre_output_norm: self.pre_output_norm,
            output_head: self.output_head,
        }
    }

    pub fn discriminator_config(&self, features: usize) -> DiscriminatorConfig {
        DiscriminatorConfig { features, hidden: self.hidden, dropout: self.dropout, leaky_slope: self.leaky_slope }
    }

    fn adamw(&self, lr: f64) -> AdamWConfig {
        AdamWConfig { lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps, weight_decay: self.weight_decay }
    }
}

/// Losses averaged over the batches of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_adversarial: f64,
    pub g_content: f64,
    pub g_total: f64,
    /// Content loss of the generator in eval mode on the validation pairs
    /// (on the training pairs when there is no validation split).
    pub val_content: f64,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,d_loss,g_adversarial,g_content,g_total,val_content";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.d_loss, self.g_adversarial, self.g_content, self.g_total, self.val_content
        )
    }
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(EpochRecord::CSV_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Generator from the epoch with the lowest validation content loss.
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_content: f64,
}

/// Stack samples into `(batch, time, features)` arrays.
pub fn stack(pairs: &[&PairedSample]) -> Result<(Array3<f64>, Array3<f64>), RaganError> {
    let first = pairs.first().ok_or_else(|| RaganError::Shape("empty batch".into()))?;
    let (t, f) = first.noisy.values().dim();
    let mut noisy = Array3::zeros((pairs.len(), t, f));
    let mut clean = Array3::zeros((pairs.len(), t, f));
    for (i, p) in pairs.iter().enumerate() {
        if p.noisy.values().dim() != (t, f) || p.clean.values().dim() != (t, f) {
            return Err(RaganError::Shape(format!(
                "pair {} is {:?}/{:?}, batch expects {:?}",
                p.noisy_id,
                p.noisy.values().dim(),
                p.clean.values().dim(),
                (t, f)
            )));
        }
        noisy.index_axis_mut(Axis(0), i).assign(p.noisy.values());
        clean.index_axis_mut(Axis(0), i).assign(p.clean.values());
    }
    Ok((noisy, clean))
}

/// Mean eval-mode content loss of `gen` over `pairs`, one sample at a time.
pub fn evaluate_content(gen: &Generator, pairs: &[PairedSample]) -> Result<f64, RaganError> {
    if pairs.is_empty() {
        return Err(RaganError::Shape("no pairs to evaluate".into()));
    }
    let mut sum = 0.0;
    for p in pairs {
        let (noisy, clean) = stack(&[p])?;
        sum += content_loss(&gen.predict(&noisy)?, &clean)?.value;
    }
    Ok(sum / pairs.len() as f64)
}

/// Deterministically hold out `fraction` of `pairs` (at least one when the
/// fraction is positive and more than one pair exists) for validation.
pub fn split_validation(pairs: &[PairedSample], fraction: f64, seed: u64) -> (Vec<PairedSample>, Vec<PairedSample>) {
    let n = pairs.len();
    let mut k = (fraction * n as f64).round() as usize;
    if fraction > 0.0 && n > 1 {
        k = k.clamp(1, n - 1);
    } else {
        k = 0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut SeededRng::with_stream(seed, STREAM_SHUFFLE + 16));
    let val: Vec<usize> = {
        let mut v = idx[..k].to_vec();
        v.sort_unstable();
        v
    };
    let mut train = Vec::with_capacity(n - k);
    let mut valid = Vec::with_capacity(k);
    for (i, p) in pairs.iter().enumerate() {
        if val.binary_search(&i).is_ok() {
            valid.push(p.clone());
        } else {
            train.push(p.clone());
        }
    }
    (train, valid)
}

struct BatchLosses {
    d: f64,
    g_adv: f64,
    g_content: f64,
    g_total: f64,
}

pub struct Trainer {
    pub config: TrainConfig,
    pub generator: Generator,
    pub discriminator: Discriminator,
    opt_g: AdamWState,
    opt_d: AdamWState,
    shuffle_rng: SeededRng,
    dropout_rng: SeededRng,
    step: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, features: usize) -> Result<Self, RaganError> {
        config.validate()?;
        let mut init = SeededRng::with_stream(config.seed, STREAM_INIT);
        let generator = Generator::new(config.generator_config(features), &mut init);
        let discriminator = Discriminator::new(config.discriminator_config(features), &mut init);
        Ok(Self::from_models(config, generator, discriminator))
    }

    pub fn from_models(config: TrainConfig, generator: Generator, discriminator: Discriminator) -> Self {
        let opt_g = AdamWState::new(generator.params());
        let opt_d = AdamWState::new(discriminator.params());
        Trainer {
            config,
            generator,
            discriminator,
            opt_g,
            opt_d,
            shuffle_rng: SeededRng::with_stream(config.seed, STREAM_SHUFFLE),
            dropout_rng: SeededRng::with_stream(config.seed, STREAM_DROPOUT),
            step: 0,
        }
    }

    fn train_batch(&mut self, noisy: &Array3<f64>, clean: &Array3<f64>) -> Result<BatchLosses, RaganError> {
        let cfg = self.config;
        self.generator.zero_grad();
        let (fake, g_cache) = self.generator.forward(noisy, Mode::Train, &mut self.dropout_rng)?;

        let mut d_loss = 0.0;
        for _ in 0..cfg.d_steps {
            self.discriminator.zero_grad();
            let (real_s, real_c) = self.discriminator.forward(clean, Mode::Train, &mut self.dropout_rng)?;
            let (fake_s, fake_c) = self.discriminator.forward(&fake, Mode::Train, &mut self.dropout_rng)?;
            let l = loss_d_relativistic(&real_s, &fake_s)?;
            d_loss = l.value;
            self.discriminator.backward(&real_c, &l.d_real);
            self.discriminator.backward(&fake_c, &l.d_fake);
            adamw_step(&mut self.discriminator.params_mut(), &mut self.opt_d, &cfg.adamw(cfg.lr_d))?;
        }

        self.discriminator.zero_grad();
        let (real_s, _) = self.discriminator.forward(clean, Mode::Train, &mut self.dropout_rng)?;
        let (fake_s, fake_c) = self.discriminator.forward(&fake, Mode::Train, &mut self.dropout_rng)?;
        let adv = loss_g_adversarial(&real_s, &fake_s)?;
        let content = content_loss(&fake, clean)?;
        let d_fake_adv = self.discriminator.backward(&fake_c, &adv.d_fake);
        let d_fake = content.grad + d_fake_adv * cfg.lambda;
        self.generator.backward(&g_cache, &d_fake);
        self.discriminator.zero_grad();
        adamw_step(&mut self.generator.params_mut(), &mut self.opt_g, &cfg.adamw(cfg.lr_g))?;

        let g_total = loss_generator_total(content.value, adv.value, cfg.lambda);
        Ok(BatchLosses { d: d_loss, g_adv: adv.value, g_content: content.value, g_total })
    }

    /// One pass over `pairs` in a freshly shuffled order.
    pub fn train_epoch(&mut self, pairs: &[PairedSample], epoch: usize) -> Result<EpochRecord, RaganError> {
        if pairs.is_empty() {
            return Err(RaganError::Shape("no training pairs".into()));
        }
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order.shuffle(&mut self.shuffle_rng);
        let mut sums = [0.0; 4];
        let mut batches = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let refs: Vec<&PairedSample> = chunk.iter().map(|&i| &pairs[i]).collect();
            let (noisy, clean) = stack(&refs)?;
            let l = self.train_batch(&noisy, &clean)?;
            self.step += 1;
            for (name, v) in [("d_loss", l.d), ("g_adversarial", l.g_adv), ("g_content", l.g_content)] {
                if !v.is_finite() {
                    return Err(RaganError::NonFiniteLoss {
                        epoch,
                        step: self.step,
                        detail: format!(
                            "{name} = {v}; batch ids [{}]; losses d={} adv={} content={}",
                            refs.iter().map(|p| p.noisy_id.as_str()).collect::<Vec<_>>().join(", "),
                            l.d,
                            l.g_adv,
                            l.g_content
                        ),
                    });
                }
            }
            sums[0] += l.d;
            sums[1] += l.g_adv;
            sums[2] += l.g_content;
            sums[3] += l.g_total;
            batches += 1;
        }
        let b = batches as f64;
        Ok(EpochRecord {
            epoch,
            d_loss: sums[0] / b,
            g_adversarial: sums[1] / b,
            g_content: sums[2] / b,
            g_total: sums[3] / b,
            val_content: f64::NAN,
        })
    }
}

/// Adversarial training with early stopping on validation content loss.
/// `on_epoch` sees every record as it is produced.
pub fn train(
    train_pairs: &[PairedSample],
    val_pairs: &[PairedSample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, RaganError> {
    let features = train_pairs
        .first()
        .ok_or_else(|| RaganError::Shape("at least one training pair is required".into()))?
        .noisy
        .subcarriers();
    let mut trainer = Trainer::new(*cfg, features)?;
    let monitor = if val_pairs.is_empty() { train_pairs } else { val_pairs };
    let mut best = (evaluate_content(&trainer.generator, monitor)?, 0usize, trainer.generator.clone());
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let mut rec = trainer.train_epoch(train_pairs, epoch)?;
        rec.val_content = evaluate_content(&trainer.generator, monitor)?;
        if !rec.val_content.is_finite() {
            return Err(RaganError::NonFiniteLoss {
                epoch,
                step: trainer.step,
                detail: format!("validation content loss = {}", rec.val_content),
            });
        }
        on_epoch(&rec);
        history.push(rec);
        if rec.val_content < best.0 {
            best = (rec.val_content, epoch, trainer.generator.clone());
        } else if epoch - best.1 >= cfg.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        generator: best.2,
        discriminator: trainer.discriminator,
        history,
        best_epoch: best.1,
        best_val_content: best.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::{AmplitudeMatrix, ScaleRecord};
    use crate::ingest::Material;
    use ndarray::Array2;
    use rand::Rng;

    pub(crate) fn toy_pairs(n: usize, t: usize, f: usize, seed: u64) -> Vec<PairedSample> {
        let mut r = SeededRng::new(seed);
        (0..n)
            .map(|i| {
                let clean = Array2::from_shape_fn((t, f), |(_, k)| 0.5 + 0.3 * ((k + i) as f64).sin());
                let noisy = clean.mapv(|v| (v + r.random_range(-0.1..0.1)).clamp(0.0, 1.0));
                PairedSample {
                    noisy: AmplitudeMatrix::new(noisy),
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

    fn small_cfg() -> TrainConfig {
        TrainConfig { hidden: 4, max_epochs: 2, batch_size: 2, seed: 3, ..Default::default() }
    }

    #[test]
    fn identical_seeds_identical_history() {
        let pairs = toy_pairs(3, 5, 6, 1);
        let a = train(&pairs, &[], &small_cfg(), |_| {}).unwrap();
        let b = train(&pairs, &[], &small_cfg(), |_| {}).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.generator, b.generator);
        assert_eq!(a.history.len(), 2);
    }

    #[test]
    fn zero_learning_rates_freeze_parameters() {
        let pairs = toy_pairs(2, 4, 6, 2);
        let cfg = TrainConfig { lr_g: 0.0, lr_d: 0.0, max_epochs: 3, patience: 10, ..small_cfg() };
        let mut t = Trainer::new(cfg, 6).unwrap();
        let g0 = t.generator.flat_values();
        let d0 = t.discriminator.flat_values();
        for e in 1..=3 {
            t.train_epoch(&pairs, e).unwrap();
        }
        assert_eq!(t.generator.flat_values(), g0);
        assert_eq!(t.discriminator.flat_values(), d0);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(matches!(
            TrainConfig { cgan_mode: true, ..Default::default() }.validate(),
            Err(RaganError::Unsupported(_))
        ));
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { dropout: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lr_g: -1.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn validation_split_is_deterministic_and_disjoint() {
        let pairs = toy_pairs(10, 2, 3, 4);
        let (t1, v1) = split_validation(&pairs, 0.2, 9);
        let (t2, v2) = split_validation(&pairs, 0.2, 9);
        assert_eq!(v1.len(), 2);
        assert_eq!(t1.len(), 8);
        assert_eq!(v1, v2);
        assert_eq!(t1, t2);
        assert!(v1.iter().all(|v| !t1.iter().any(|t| t.noisy_id == v.noisy_id)));
        assert_eq!(split_validation(&pairs, 0.0, 9).1.len(), 0);
    }

    #[test]
    fn early_stopping_restores_best() {
        let pairs = toy_pairs(2, 4, 6, 5);
        let cfg = TrainConfig { lr_g: 0.0, lr_d: 0.0, max_epochs: 50, patience: 3, ..small_cfg() };
        let out = train(&pairs, &[], &cfg, |_| {}).unwrap();
        assert_eq!(out.history.len(), 3);
        assert_eq!(out.best_epoch, 0);
    }

    #[test]
    fn history_csv_layout() {
        let r =
            EpochRecord { epoch: 1, d_loss: 1.0, g_adversarial: 2.0, g_content: 0.5, g_total: 3.0, val_content: 0.25 };
        assert_eq!(history_csv(&[r]), format!("{}\n1,1,2,0.5,3,0.25\n", EpochRecord::CSV_HEADER));
    }
}
