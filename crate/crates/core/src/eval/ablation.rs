//! End-to-end comparison of denoisers through the downstream classifier.
//!
//! The SVM is fitted on shielded (clean) training spectra and scored on
//! held-out unshielded spectra, either raw or after each denoiser.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::dae::{dae_train, DaeConfig};
use super::features::{featurize_with, FeatureMode};
use super::metrics::{dataset_normalized_mse, ConfusionMatrix, EvalReport};
use super::svm::{median_heuristic_gamma, svm_train, SvmConfig, SvmModel, DEFAULT_C};
use super::EvalError;
use crate::csi::AmplitudeMatrix;
use crate::ingest::{Material, PairedSample};
use crate::ragan::{
    denoise_amplitudes, split_validation, train, Generator, OutputHead, RaganError, TrainConfig, TrainOutcome,
};

/// Which materials take part in classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassSet {
    /// Four objects plus background.
    #[default]
    Five,
    /// The four objects only.
    Four,
}

impl ClassSet {
    pub fn materials(self) -> Vec<Material> {
        match self {
            ClassSet::Five => Material::ALL.to_vec(),
            ClassSet::Four => Material::ALL.iter().copied().filter(|&m| m != Material::Background).collect(),
        }
    }

    pub fn labels(self) -> Vec<String> {
        self.materials().iter().map(|m| m.name().to_string()).collect()
    }

    /// Position of `m` in [`ClassSet::materials`].
    pub fn label_of(self, m: Material) -> Option<usize> {
        self.materials().iter().position(|&x| x == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmSettings {
    pub c: f64,
    /// Kernel width; the median pairwise training distance when absent.
    pub sigma: Option<f64>,
    pub features: FeatureMode,
    pub classes: ClassSet,
}

impl Default for SvmSettings {
    fn default() -> Self {
        SvmSettings { c: DEFAULT_C, sigma: None, features: FeatureMode::MeanStd, classes: ClassSet::Five }
    }
}

/// Fit the classifier on clean spectra.
pub fn fit_classifier(spectra: &[(&AmplitudeMatrix, Material)], settings: &SvmSettings) -> Result<SvmModel, EvalError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (amp, m) in spectra {
        if let Some(label) = settings.classes.label_of(*m) {
            xs.push(featurize_with(amp, settings.features)?);
            ys.push(label);
        }
    }
    let gamma = match settings.sigma {
        Some(s) if s > 0.0 => 1.0 / (2.0 * s * s),
        Some(s) => return Err(EvalError::InvalidConfig(format!("sigma must be positive, got {s}"))),
        None => median_heuristic_gamma(&xs)?,
    };
    let classes = settings.classes.materials().len();
    svm_train(&xs, &ys, classes, &SvmConfig::new(gamma, settings.c))
}

/// Classify `spectra` and build a report; `mse` is attached verbatim.
pub fn score_classifier(
    model: &SvmModel,
    spectra: &[(&AmplitudeMatrix, Material)],
    settings: &SvmSettings,
    mse: Option<f64>,
) -> Result<EvalReport, EvalError> {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (amp, m) in spectra {
        if let Some(label) = settings.classes.label_of(*m) {
            truth.push(label);
            pred.push(model.predict(&featurize_with(amp, settings.features)?));
        }
    }
    let cm = ConfusionMatrix::from_predictions(model.classes, &truth, &pred)?;
    Ok(EvalReport::new(settings.classes.labels(), cm, mse))
}

/// Within every (material, day) group, in input order, the pair at position
/// `test_slot` goes to the test split; everything else is training data.
/// Groups too small to have that position contribute only training pairs.
pub fn split_by_slot(pairs: &[PairedSample], test_slot: usize) -> (Vec<PairedSample>, Vec<PairedSample>) {
    let mut seen: BTreeMap<(Material, u8), usize> = BTreeMap::new();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for p in pairs {
        let k = seen.entry((p.material, p.day)).or_insert(0);
        if *k == test_slot {
            test.push(p.clone());
        } else {
            train.push(p.clone());
        }
        *k += 1;
    }
    (train, test)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Packets kept from the start of every acquisition.
    pub seq_len: usize,
    pub test_slot: usize,
    pub validation_fraction: f64,
    pub ragan: TrainConfig,
    pub dae: DaeConfig,
    pub svm: SvmSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seq_len: 200,
            test_slot: 2,
            validation_fraction: 0.2,
            ragan: TrainConfig {
                hidden: 64,
                max_epochs: 150,
                lambda: 0.001,
                output_head: OutputHead::Sigmoid,
                ..Default::default()
            },
            dae: DaeConfig::default(),
            svm: SvmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub method: String,
    pub accuracy: Option<f64>,
    pub normalized_mse: Option<f64>,
    pub status: String,
}

impl AblationRow {
    fn measured(method: &str, report: &EvalReport) -> Self {
        AblationRow {
            method: method.into(),
            accuracy: Some(report.accuracy),
            normalized_mse: report.normalized_mse,
            status: "ok".into(),
        }
    }
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("method,accuracy,normalized_mse,status\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.method, opt(r.accuracy), opt(r.normalized_mse), r.status);
    }
    out
}

pub const METHOD_RAGAN: &str = "ragan+svm";
pub const METHOD_DAE: &str = "dae+svm";
pub const METHOD_RAW: &str = "raw+svm";
pub const METHOD_CGAN: &str = "cgan+svm";
pub const METHOD_CLEAN: &str = "clean+svm";

pub struct ExperimentOutcome {
    pub rows: Vec<AblationRow>,
    pub reports: BTreeMap<String, EvalReport>,
    pub ragan: TrainOutcome,
    pub train_pairs: usize,
    pub val_pairs: usize,
    pub test_pairs: usize,
    /// Dataset-mean normalized MSE of raw noisy test spectra against clean.
    pub noisy_mse: f64,
    pub ragan_mse: f64,
    pub dae_mse: f64,
}

impl ExperimentOutcome {
    pub fn accuracy(&self, method: &str) -> Option<f64> {
        self.reports.get(method).map(|r| r.accuracy)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ragan(#[from] RaganError),
}

/// Apply a denoiser to every test pair's noisy side.
pub fn denoise_all(
    pairs: &[PairedSample],
    f: impl Fn(&AmplitudeMatrix) -> Result<AmplitudeMatrix, ExperimentError>,
) -> Result<Vec<AmplitudeMatrix>, ExperimentError> {
    pairs.iter().map(|p| f(&p.noisy)).collect()
}

fn evaluate_outputs(
    model: &SvmModel,
    outputs: &[AmplitudeMatrix],
    test: &[PairedSample],
    settings: &SvmSettings,
) -> Result<(EvalReport, f64), EvalError> {
    let mse = dataset_normalized_mse(outputs.iter().zip(test.iter().map(|p| &p.clean)))?;
    let spectra: Vec<_> = outputs.iter().zip(test).map(|(o, p)| (o, p.material)).collect();
    Ok((score_classifier(model, &spectra, settings, Some(mse))?, mse))
}

/// Full ablation on paired data: split, fit the classifier on clean
/// training spectra, train both denoisers, and score every method on the
/// test split. `log` receives progress lines.
pub fn run_ablation(
    pairs: &[PairedSample],
    cfg: &ExperimentConfig,
    mut log: impl FnMut(&str),
) -> Result<ExperimentOutcome, ExperimentError> {
    let pairs: Vec<PairedSample> = pairs.iter().map(|p| p.truncated(cfg.seq_len)).collect();
    let (train_all, test) = split_by_slot(&pairs, cfg.test_slot);
    if test.is_empty() || train_all.is_empty() {
        return Err(EvalError::InvalidConfig(format!(
            "split by slot {} left {} training and {} test pairs",
            cfg.test_slot,
            train_all.len(),
            test.len()
        ))
        .into());
    }
    let (train_pairs, val_pairs) = split_validation(&train_all, cfg.validation_fraction, cfg.ragan.seed);
    log(&format!("split: {} train, {} validation, {} test pairs", train_pairs.len(), val_pairs.len(), test.len()));

    let clean_train: Vec<_> = train_all.iter().map(|p| (&p.clean, p.material)).collect();
    let svm = fit_classifier(&clean_train, &cfg.svm)?;

    let clean_test: Vec<_> = test.iter().map(|p| (&p.clean, p.material)).collect();
    let clean_report = score_classifier(&svm, &clean_test, &cfg.svm, Some(0.0))?;
    let raw_outputs: Vec<AmplitudeMatrix> = test.iter().map(|p| p.noisy.clone()).collect();
    let (raw_report, noisy_mse) = evaluate_outputs(&svm, &raw_outputs, &test, &cfg.svm)?;
    log(&format!("raw: accuracy {:.3}, mse {:.4}", raw_report.accuracy, noisy_mse));

    let ragan = train(&train_pairs, &val_pairs, &cfg.ragan, |r| {
        if r.epoch % 10 == 0 || r.epoch == 1 {
            log(&format!(
                "ragan epoch {}: d {:.4} adv {:.4} content {:.4} val {:.4}",
                r.epoch, r.d_loss, r.g_adversarial, r.g_content, r.val_content
            ));
        }
    })?;
    let gen: &Generator = &ragan.generator;
    let ragan_outputs = denoise_all(&test, |a| Ok(denoise_amplitudes(gen, a)?))?;
    let (ragan_report, ragan_mse) = evaluate_outputs(&svm, &ragan_outputs, &test, &cfg.svm)?;
    log(&format!(
        "ragan: best epoch {}, accuracy {:.3}, mse {:.4}",
        ragan.best_epoch, ragan_report.accuracy, ragan_mse
    ));

    let (dae, _) = dae_train(&train_all, &cfg.dae)?;
    let dae_outputs = denoise_all(&test, |a| Ok(dae.denoise(a)?))?;
    let (dae_report, dae_mse) = evaluate_outputs(&svm, &dae_outputs, &test, &cfg.svm)?;
    log(&format!("dae: accuracy {:.3}, mse {:.4}", dae_report.accuracy, dae_mse));

    let rows = vec![
        AblationRow::measured(METHOD_RAGAN, &ragan_report),
        AblationRow::measured(METHOD_DAE, &dae_report),
        AblationRow::measured(METHOD_RAW, &raw_report),
        AblationRow {
            method: METHOD_CGAN.into(),
            accuracy: None,
            normalized_mse: None,
            status: "unavailable: conditional architecture unspecified".into(),
        },
        AblationRow::measured(METHOD_CLEAN, &clean_report),
    ];
    let mut reports = BTreeMap::new();
    reports.insert(METHOD_RAGAN.to_string(), ragan_report);
    reports.insert(METHOD_DAE.to_string(), dae_report);
    reports.insert(METHOD_RAW.to_string(), raw_report);
    reports.insert(METHOD_CLEAN.to_string(), clean_report);
    Ok(ExperimentOutcome {
        rows,
        reports,
        ragan,
        train_pairs: train_pairs.len(),
        val_pairs: val_pairs.len(),
        test_pairs: test.len(),
        noisy_mse,
        ragan_mse,
        dae_mse,
    })
}
