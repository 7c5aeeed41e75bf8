//! `csishield` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use csishield::csi::{self, normalize_minmax_lenient, AmplitudeMatrix, CfrVector, CsiError, ScaleRecord};
use csishield::eval::ablation::{ablation_csv, fit_classifier, score_classifier, split_by_slot};
use csishield::eval::{
    dataset_normalized_mse, run_ablation, ClassSet, EvalError, ExperimentConfig, FeatureMode, SvmSettings,
};
use csishield::ingest::{
    self, load_paired_dataset, parse_amp_lines, parse_csi_lines, write_amp_lines, IngestError, IqOrder, PairedSample,
    AMP_LINES_TAG,
};
use csishield::nn::NnError;
use csishield::ragan::grid::{day_subset, grid_search, results_csv, GridRanges};
use csishield::ragan::{
    denoise_amplitudes, history_csv, load_checkpoint, save_checkpoint, split_validation, train, Checkpoint, OutputHead,
    RaganError, TrainConfig,
};
use csishield::sim::{generate_dataset, SimError};

use config::RunConfig;
use plot::Series;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<CsiError> for CliError {
    fn from(e: CsiError) -> Self {
        match e {
            CsiError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Csi(c) => c.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => CliError::Usage(e.to_string()),
            SimError::Io { .. } => CliError::Data(e.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<RaganError> for CliError {
    fn from(e: RaganError) -> Self {
        match e {
            RaganError::Config(_) | RaganError::Unsupported(_) | RaganError::Grid(_) => CliError::Usage(e.to_string()),
            RaganError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            RaganError::Csi(c) => c.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            EvalError::NonFiniteFeature(_) => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<csishield::eval::ablation::ExperimentError> for CliError {
    fn from(e: csishield::eval::ablation::ExperimentError) -> Self {
        use csishield::eval::ablation::ExperimentError;
        match e {
            ExperimentError::Eval(e) => e.into(),
            ExperimentError::Ragan(e) => e.into(),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(name = "csishield", version, about = "Restore cluttered Wi-Fi CSI amplitude spectra and classify materials")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic paired dataset and its manifest.
    Simulate {
        /// Acquisitions per (material, condition) cell.
        #[arg(long, default_value_t = 30)]
        count: usize,
    },
    /// Validate and pair a dataset, reporting counts and pairs.
    Ingest {
        manifest: PathBuf,
        /// Also write every paired amplitude matrix as an amp-lines file.
        #[arg(long)]
        write_amplitudes: bool,
    },
    /// Train the generator/discriminator pair and write a checkpoint.
    Train {
        manifest: PathBuf,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Denoise acquisitions with a trained generator.
    Denoise {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Denoise every unshielded acquisition of this dataset.
        #[arg(long, conflicts_with = "inputs")]
        manifest: Option<PathBuf>,
        /// Capture (csi-lines) or amplitude (amp-lines) files.
        inputs: Vec<PathBuf>,
        /// Clean counterparts of `inputs`, in the same order.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        clean: Vec<PathBuf>,
    },
    /// Fit the SVM on clean spectra and score noisy or denoised test spectra.
    EvalSvm {
        manifest: PathBuf,
        /// Denoise the test split with this checkpoint; raw spectra otherwise.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Run the full ablation (RaGAN, DAE, raw, clean) instead.
        #[arg(long, conflicts_with = "checkpoint")]
        ablation: bool,
        #[arg(long, value_parser = parse_class_set)]
        classes: Option<ClassSet>,
        #[arg(long)]
        svm_c: Option<f64>,
        /// RBF kernel width; median heuristic when absent.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_parser = parse_feature_mode)]
        features: Option<FeatureMode>,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Rank hyperparameter combinations by validation content loss.
    GridSearch {
        manifest: PathBuf,
        /// Use the complete 768-cell search space.
        #[arg(long)]
        full: bool,
        #[arg(long, value_delimiter = ',')]
        batch_sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        dropouts: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lr_g_values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lr_d_values: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lambdas: Vec<f64>,
        /// Restrict to pairs acquired on this day.
        #[arg(long)]
        day: Option<u8>,
        #[command(flatten)]
        overrides: TrainOverrides,
    },
    /// Per-subcarrier amplitude plot (SVG) with its data (CSV).
    Plot {
        /// Capture or amp-lines files, overlaid in order.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Legend labels, comma separated; file stems by default.
        #[arg(long, value_delimiter = ',')]
        labels: Vec<String>,
        #[arg(long)]
        title: Option<String>,
    },
}

/// Training flags shared by several subcommands.
#[derive(Debug, Clone, Default, Args)]
struct TrainOverrides {
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr_g: Option<f64>,
    #[arg(long)]
    lr_d: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, value_parser = parse_output_head)]
    output_head: Option<OutputHead>,
    /// Packets kept per acquisition.
    #[arg(long)]
    seq_len: Option<usize>,
    /// Reject hyperparameters outside the grid-search value sets.
    #[arg(long)]
    strict_grid: bool,
}

fn parse_output_head(s: &str) -> std::result::Result<OutputHead, String> {
    match s {
        "dropout-leaky-sigmoid" => Ok(OutputHead::DropoutLeakySigmoid),
        "sigmoid" => Ok(OutputHead::Sigmoid),
        _ => Err("expected dropout-leaky-sigmoid or sigmoid".into()),
    }
}

fn parse_class_set(s: &str) -> std::result::Result<ClassSet, String> {
    match s {
        "five" => Ok(ClassSet::Five),
        "four" => Ok(ClassSet::Four),
        _ => Err("expected five or four".into()),
    }
}

fn parse_feature_mode(s: &str) -> std::result::Result<FeatureMode, String> {
    match s {
        "mean-std" => Ok(FeatureMode::MeanStd),
        "flatten" => Ok(FeatureMode::Flatten),
        _ => Err("expected mean-std or flatten".into()),
    }
}

impl TrainOverrides {
    /// Flags over the config file's `[train]` section over defaults.
    fn resolve(&self, cfg: &RunConfig, seed: Option<u64>) -> Result<TrainConfig> {
        let mut t = cfg.train.unwrap_or_default();
        if let Some(s) = seed.or(cfg.seed) {
            t.seed = s;
        }
        let o = self;
        t.batch_size = o.batch.unwrap_or(t.batch_size);
        t.lr_g = o.lr_g.unwrap_or(t.lr_g);
        t.lr_d = o.lr_d.unwrap_or(t.lr_d);
        t.lambda = o.lambda.unwrap_or(t.lambda);
        t.dropout = o.dropout.unwrap_or(t.dropout);
        t.hidden = o.hidden.unwrap_or(t.hidden);
        t.max_epochs = o.epochs.unwrap_or(t.max_epochs);
        t.patience = o.patience.unwrap_or(t.patience);
        t.output_head = o.output_head.unwrap_or(t.output_head);
        t.validate()?;
        if o.strict_grid {
            GridRanges::single(&t).validate()?;
        }
        Ok(t)
    }

    fn seq_len(&self, cfg: &RunConfig) -> Result<Option<usize>> {
        match self.seq_len.or(cfg.data.seq_len) {
            Some(0) => Err(CliError::Usage("--seq-len must be positive".into())),
            s => Ok(s),
        }
    }
}

/// Paired data cut into the protocol's splits.
struct Splits {
    train_all: Vec<PairedSample>,
    train: Vec<PairedSample>,
    val: Vec<PairedSample>,
    test: Vec<PairedSample>,
}

fn load_splits(manifest: &Path, cfg: &RunConfig, seq_len: Option<usize>, seed: u64) -> Result<Splits> {
    let (report, paired) = load_paired_dataset(manifest)?;
    if !report.valid {
        eprintln!("warning: dataset is incomplete\n{}", report.summary());
    }
    let pairs: Vec<PairedSample> = match seq_len {
        Some(n) => paired.pairs.iter().map(|p| p.truncated(n)).collect(),
        None => paired.pairs,
    };
    let (train_all, test) = split_by_slot(&pairs, cfg.data.test_slot);
    if train_all.is_empty() {
        return Err(CliError::Data("no training pairs after the test split".into()));
    }
    let (train, val) = split_validation(&train_all, cfg.data.validation_fraction, seed);
    Ok(Splits { train_all, train, val, test })
}

fn out_dir(cli_out: &Option<PathBuf>, default: &str) -> Result<PathBuf> {
    let dir = cli_out.clone().unwrap_or_else(|| PathBuf::from(default));
    create_dir(&dir)?;
    Ok(dir)
}

/// Read an amp-lines file as-is, or a capture file as scaled data-subcarrier
/// amplitudes.
fn read_amplitudes(path: &Path) -> Result<(AmplitudeMatrix, ScaleRecord)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let ctx = |e: CliError| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    };
    if text.starts_with(AMP_LINES_TAG) {
        return parse_amp_lines(&text).map_err(|e| ctx(e.into()));
    }
    let frames = parse_csi_lines(&text, IqOrder::RealFirst).map_err(|e| ctx(e.into()))?;
    let cfrs: Vec<CfrVector> = frames.iter().map(|f| f.cfr()).collect();
    let amp = csi::select_data_subcarriers(&csi::assemble_csi(&cfrs)?)?.amplitudes();
    Ok(normalize_minmax_lenient(&amp)?)
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "input".into())
}

fn cmd_simulate(cli: &Cli, cfg: &RunConfig, count: usize) -> Result<()> {
    if count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let sim = cfg.sim.clone().unwrap_or_default();
    let dir = out_dir(&cli.out, "dataset")?;
    let seed = cfg.seed(cli.seed);
    let manifest = generate_dataset(&dir, count, &sim, seed)?;
    let mpath = dir.join("manifest.toml");
    let report = ingest::validate_dataset(&manifest, &dir);
    println!("{}", mpath.display());
    print!("{}", report.summary());
    Ok(())
}

fn cmd_ingest(cli: &Cli, manifest: &Path, write_amplitudes: bool) -> Result<()> {
    let (report, paired) = load_paired_dataset(manifest)?;
    let dir = out_dir(&cli.out, "out")?;
    print!("{}", report.summary());
    println!(
        "{} pairs, {} unpaired acquisitions, {} groups without a counterpart",
        paired.pairs.len(),
        paired.leftovers.len(),
        paired.no_counterpart.len()
    );
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&dir.join("validation.json"), json)?;
    let mut csv = String::from("noisy_id,clean_id,material,day\n");
    for p in &paired.pairs {
        csv.push_str(&format!("{},{},{},{}\n", p.noisy_id, p.clean_id, p.material, p.day));
    }
    write_file(&dir.join("pairs.csv"), csv)?;
    if write_amplitudes {
        let amp_dir = dir.join("amplitudes");
        create_dir(&amp_dir)?;
        for p in &paired.pairs {
            write_file(&amp_dir.join(format!("{}.amp", p.noisy_id)), write_amp_lines(&p.noisy, p.noisy_scale))?;
            write_file(&amp_dir.join(format!("{}.amp", p.clean_id)), write_amp_lines(&p.clean, p.clean_scale))?;
        }
    }
    Ok(())
}

fn cmd_train(cli: &Cli, cfg: &RunConfig, manifest: &Path, o: &TrainOverrides) -> Result<()> {
    let tc = o.resolve(cfg, cli.seed)?;
    let splits = load_splits(manifest, cfg, o.seq_len(cfg)?, tc.seed)?;
    let dir = out_dir(&cli.out, "out")?;
    eprintln!("training on {} pairs, validating on {}", splits.train.len(), splits.val.len());
    let start = Instant::now();
    let outcome = train(&splits.train, &splits.val, &tc, |r| {
        eprintln!(
            "[{:7.1}s] epoch {:4}: d {:.4} adv {:.4} content {:.4} val {:.4}",
            start.elapsed().as_secs_f64(),
            r.epoch,
            r.d_loss,
            r.g_adversarial,
            r.g_content,
            r.val_content
        );
    })?;
    let ckpt = Checkpoint {
        seed: tc.seed,
        train_config: Some(tc),
        generator: outcome.generator,
        discriminator: Some(outcome.discriminator),
    };
    let cpath = dir.join("model.ckpt");
    save_checkpoint(&ckpt, &cpath)?;
    write_file(&dir.join("history.csv"), history_csv(&outcome.history))?;
    println!(
        "{} (best epoch {}, validation content {:.6})",
        cpath.display(),
        outcome.best_epoch,
        outcome.best_val_content
    );
    Ok(())
}

fn cmd_denoise(
    cli: &Cli,
    checkpoint: &Path,
    manifest: Option<&Path>,
    inputs: &[PathBuf],
    clean: &[PathBuf],
) -> Result<()> {
    let gen = load_checkpoint(checkpoint)?.generator;
    let dir = out_dir(&cli.out, "out")?;
    let mut outputs = Vec::new();
    let mut targets = Vec::new();
    let mut noisy = Vec::new();
    if let Some(m) = manifest {
        let (_, paired) = load_paired_dataset(m)?;
        for p in paired.pairs {
            let y = denoise_amplitudes(&gen, &p.noisy)?;
            write_file(&dir.join(format!("{}.amp", p.noisy_id)), write_amp_lines(&y, p.noisy_scale))?;
            outputs.push(y);
            noisy.push(p.noisy);
            targets.push(p.clean);
        }
    } else {
        if inputs.is_empty() {
            return Err(CliError::Usage("give input files or --manifest".into()));
        }
        if !clean.is_empty() && clean.len() != inputs.len() {
            return Err(CliError::Usage(format!("{} inputs but {} clean files", inputs.len(), clean.len())));
        }
        for (i, path) in inputs.iter().enumerate() {
            let (amp, scale) = read_amplitudes(path)?;
            let y = denoise_amplitudes(&gen, &amp)?;
            write_file(&dir.join(format!("{}.amp", file_stem(path))), write_amp_lines(&y, scale))?;
            if let Some(c) = clean.get(i) {
                targets.push(read_amplitudes(c)?.0);
            }
            outputs.push(y);
            noisy.push(amp);
        }
    }
    println!("denoised {} acquisitions into {}", outputs.len(), dir.display());
    if !targets.is_empty() {
        let before = dataset_normalized_mse(noisy.iter().zip(&targets))?;
        let after = dataset_normalized_mse(outputs.iter().zip(&targets))?;
        println!("normalized mse: noisy {before:.6}, denoised {after:.6}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    cli: &Cli,
    cfg: &RunConfig,
    manifest: &Path,
    checkpoint: Option<&Path>,
    ablation: bool,
    svm: SvmSettings,
    o: &TrainOverrides,
) -> Result<()> {
    let tc = o.resolve(cfg, cli.seed)?;
    let dir = out_dir(&cli.out, "out")?;
    let seq_len = o.seq_len(cfg)?;
    if ablation {
        let (_, paired) = load_paired_dataset(manifest)?;
        let mut dae = cfg.dae.clone().unwrap_or_default();
        dae.seed = tc.seed;
        let exp = ExperimentConfig {
            seq_len: seq_len.unwrap_or(usize::MAX),
            test_slot: cfg.data.test_slot,
            validation_fraction: cfg.data.validation_fraction,
            ragan: tc,
            dae,
            svm,
        };
        let start = Instant::now();
        let outcome = run_ablation(&paired.pairs, &exp, |m| eprintln!("[{:7.1}s] {m}", start.elapsed().as_secs_f64()))?;
        let csv = ablation_csv(&outcome.rows);
        write_file(&dir.join("ablation.csv"), &csv)?;
        for (method, report) in &outcome.reports {
            let sub = dir.join(method.replace('+', "_"));
            create_dir(&sub)?;
            report.write(&sub)?;
        }
        print!("{csv}");
        return Ok(());
    }

    let splits = load_splits(manifest, cfg, seq_len, tc.seed)?;
    if splits.test.is_empty() {
        return Err(CliError::Data("the test split is empty".into()));
    }
    let clean_train: Vec<_> = splits.train_all.iter().map(|p| (&p.clean, p.material)).collect();
    let model = fit_classifier(&clean_train, &svm)?;
    let clean_test: Vec<_> = splits.test.iter().map(|p| (&p.clean, p.material)).collect();
    let clean_report = score_classifier(&model, &clean_test, &svm, Some(0.0))?;

    let outputs: Vec<AmplitudeMatrix> = match checkpoint {
        Some(c) => {
            let gen = load_checkpoint(c)?.generator;
            splits.test.iter().map(|p| denoise_amplitudes(&gen, &p.noisy)).collect::<std::result::Result<_, _>>()?
        }
        None => splits.test.iter().map(|p| p.noisy.clone()).collect(),
    };
    let mse = dataset_normalized_mse(outputs.iter().zip(splits.test.iter().map(|p| &p.clean)))?;
    let spectra: Vec<_> = outputs.iter().zip(&splits.test).map(|(a, p)| (a, p.material)).collect();
    let report = score_classifier(&model, &spectra, &svm, Some(mse))?;
    report.write(&dir)?;
    let clean_dir = dir.join("clean");
    create_dir(&clean_dir)?;
    clean_report.write(&clean_dir)?;
    let what = if checkpoint.is_some() { "denoised" } else { "raw" };
    println!(
        "{what}: accuracy {:.4}, normalized mse {mse:.6}; clean: accuracy {:.4}",
        report.accuracy, clean_report.accuracy
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_grid(
    cli: &Cli,
    cfg: &RunConfig,
    manifest: &Path,
    full: bool,
    axes: [Vec<f64>; 4],
    batch_sizes: &[usize],
    day: Option<u8>,
    o: &TrainOverrides,
) -> Result<()> {
    let base = o.resolve(cfg, cli.seed)?;
    let mut ranges =
        if full { GridRanges::full() } else { cfg.grid.clone().unwrap_or_else(|| GridRanges::single(&base)) };
    let [dropouts, lr_g, lr_d, lambdas] = axes;
    if !batch_sizes.is_empty() {
        ranges.batch_sizes = batch_sizes.to_vec();
    }
    for (dst, src) in [
        (&mut ranges.dropouts, dropouts),
        (&mut ranges.lr_g, lr_g),
        (&mut ranges.lr_d, lr_d),
        (&mut ranges.lambdas, lambdas),
    ] {
        if !src.is_empty() {
            *dst = src;
        }
    }
    ranges.validate()?;
    let mut splits = load_splits(manifest, cfg, o.seq_len(cfg)?, base.seed)?;
    if let Some(d) = day {
        splits.train = day_subset(&splits.train, d);
        splits.val = day_subset(&splits.val, d);
        if splits.train.is_empty() {
            return Err(CliError::Data(format!("no training pairs on day {d}")));
        }
    }
    let dir = out_dir(&cli.out, "out")?;
    let journal = dir.join("journal.jsonl");
    let total = ranges.len();
    let mut n = 0;
    let results = grid_search(&splits.train, &splits.val, &base, &ranges, Some(&journal), |r, cached| {
        n += 1;
        let note = if cached { " (journal)" } else { "" };
        eprintln!("[{n}/{total}] {}: val {:.6}{note}", r.key, r.val_content);
    })?;
    let path = dir.join("grid_results.csv");
    write_file(&path, results_csv(&results))?;
    println!("{} ({} cells, best {})", path.display(), results.len(), results[0].key);
    Ok(())
}

fn cmd_plot(cli: &Cli, cfg: &RunConfig, inputs: &[PathBuf], labels: &[String], title: Option<&str>) -> Result<()> {
    if !labels.is_empty() && labels.len() != inputs.len() {
        return Err(CliError::Usage(format!("{} inputs but {} labels", inputs.len(), labels.len())));
    }
    let mut series = Vec::with_capacity(inputs.len());
    for (i, path) in inputs.iter().enumerate() {
        let (amp, _) = read_amplitudes(path)?;
        let label = labels.get(i).cloned().unwrap_or_else(|| file_stem(path));
        series.push(Series::from_amplitudes(&label, &amp));
    }
    if series.iter().any(|s| s.len() != series[0].len()) {
        return Err(CliError::Data("inputs have different subcarrier counts".into()));
    }
    let dir = out_dir(&cli.out, "out")?;
    let title = title.map(str::to_string).or_else(|| cfg.plot.title.clone()).unwrap_or_default();
    write_file(&dir.join("plot.svg"), plot::to_svg(&series, cfg.plot.width, cfg.plot.height, &title))?;
    write_file(&dir.join("plot.csv"), plot::to_csv(&series))?;
    println!("{}", dir.join("plot.svg").display());
    Ok(())
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("CSISHIELD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CSISHIELD_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: &Cli) -> Result<()> {
    init_threads()?;
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate { count } => cmd_simulate(cli, &cfg, *count),
        Command::Ingest { manifest, write_amplitudes } => cmd_ingest(cli, manifest, *write_amplitudes),
        Command::Train { manifest, overrides } => cmd_train(cli, &cfg, manifest, overrides),
        Command::Denoise { checkpoint, manifest, inputs, clean } => {
            cmd_denoise(cli, checkpoint, manifest.as_deref(), inputs, clean)
        }
        Command::EvalSvm { manifest, checkpoint, ablation, classes, svm_c, sigma, features, overrides } => {
            let mut svm = cfg.svm.clone().unwrap_or_default();
            svm.classes = classes.unwrap_or(svm.classes);
            svm.c = svm_c.unwrap_or(svm.c);
            svm.sigma = sigma.or(svm.sigma);
            svm.features = features.unwrap_or(svm.features);
            cmd_eval(cli, &cfg, manifest, checkpoint.as_deref(), *ablation, svm, overrides)
        }
        Command::GridSearch {
            manifest,
            full,
            batch_sizes,
            dropouts,
            lr_g_values,
            lr_d_values,
            lambdas,
            day,
            overrides,
        } => {
            let axes = [dropouts.clone(), lr_g_values.clone(), lr_d_values.clone(), lambdas.clone()];
            cmd_grid(cli, &cfg, manifest, *full, axes, batch_sizes, *day, overrides)
        }
        Command::Plot { inputs, labels, title } => cmd_plot(cli, &cfg, inputs, labels, title.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
