//! Command-line front end.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{
    load_agreement_data, load_corpus, read_lines, ReservedTokens, SplitLabel, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::{agreement_error_rates, perplexity, perplexity_gap};
use crate::lm::{train_epoch, LmConfig, NegativeSource, NegativeState, NeuralLm, TrainConfig};
use crate::ngram::{NGramModel, NegativeDevMode, DEFAULT_MAX_LEN};
use crate::pipeline::{emit_report, run_pipeline, ExperimentConfig, MetricRecord, ReportOptions};
use crate::rng::{stream_rng, NEGATIVE_DEV_STREAM};
use crate::synth::{generate, SynthConfig, DEFAULT_SYNTH_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "antimodel",
    version,
    about = "Anti-model negative data and unlikelihood LSTM training"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit an unsmoothed n-gram anti-model on a corpus.
    FitNgram(FitNgramArgs),
    /// Sample a static negative corpus from an n-gram model.
    GenNegative(GenNegativeArgs),
    /// Train an LSTM language model, optionally with negative data.
    Train(TrainArgs),
    /// Perplexity of a checkpoint on a corpus (and a negative corpus).
    EvalPpl(EvalPplArgs),
    /// Subject-verb agreement error rates of a checkpoint.
    EvalAgreement(EvalAgreementArgs),
    /// Run the full pipeline from a config file and write the report.
    RunAll(RunAllArgs),
    /// Regenerate report files for a pipeline output directory.
    Report(ReportArgs),
    /// Write the synthetic agreement corpus.
    GenSynthetic(GenSyntheticArgs),
}

#[derive(Args, Debug)]
struct FitNgramArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 3)]
    order: usize,
    /// Vocabulary file; built from the input and written here (default
    /// `<out>.vocab`) when it does not exist.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    vocab_min_count: usize,
}

#[derive(Args, Debug)]
struct GenNegativeArgs {
    /// N-gram model file.
    #[arg(long)]
    model: PathBuf,
    /// Positive corpus whose sentences seed the generated ones.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to `<model>.vocab`.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    master_seed: u64,
    #[arg(long, default_value_t = NegativeDevMode::default())]
    negative_dev_mode: NegativeDevMode,
    #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
    max_negative_len: usize,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    embedding_dim: Option<usize>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long)]
    num_layers: Option<usize>,
    #[arg(long)]
    tie_embeddings: Option<bool>,
    #[arg(long)]
    dropout_keep: Option<f64>,
}

impl ModelArgs {
    fn config(&self) -> LmConfig {
        let d = LmConfig::default();
        LmConfig {
            embedding_dim: self.embedding_dim.unwrap_or(d.embedding_dim),
            hidden_units: self.hidden_units.unwrap_or(d.hidden_units),
            num_layers: self.num_layers.unwrap_or(d.num_layers),
            tie_embeddings: self.tie_embeddings.unwrap_or(d.tie_embeddings),
            dropout_keep: self.dropout_keep.unwrap_or(d.dropout_keep),
        }
    }
}

#[derive(Args, Debug)]
struct TrainingArgs {
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    lr_hold_epochs: Option<usize>,
    #[arg(long)]
    grad_clip_norm: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    bptt_len: Option<usize>,
    #[arg(long)]
    unlikelihood_floor: Option<f64>,
    #[arg(long)]
    carry_state: Option<bool>,
    #[arg(long)]
    max_negative_len: Option<usize>,
    #[arg(long)]
    negative_state: Option<NegativeState>,
}

impl TrainingArgs {
    fn config(&self) -> TrainConfig {
        let d = TrainConfig::default();
        TrainConfig {
            alpha: self.alpha,
            learning_rate: self.learning_rate.unwrap_or(d.learning_rate),
            lr_decay: self.lr_decay.unwrap_or(d.lr_decay),
            lr_hold_epochs: self.lr_hold_epochs.unwrap_or(d.lr_hold_epochs),
            grad_clip_norm: self.grad_clip_norm.unwrap_or(d.grad_clip_norm),
            epochs: self.epochs.unwrap_or(d.epochs),
            batch_size: self.batch_size.unwrap_or(d.batch_size),
            bptt_len: self.bptt_len.unwrap_or(d.bptt_len),
            unlikelihood_floor: self.unlikelihood_floor.unwrap_or(d.unlikelihood_floor),
            carry_state: self.carry_state.unwrap_or(d.carry_state),
            max_negative_len: self.max_negative_len.unwrap_or(d.max_negative_len),
            negative_state: self.negative_state.unwrap_or(d.negative_state),
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Positive training corpus.
    #[arg(long)]
    input: PathBuf,
    /// Checkpoint output; the vocabulary is written to `<out>.vocab`.
    #[arg(long)]
    out: PathBuf,
    /// N-gram anti-model for on-the-fly negatives (needed when alpha > 0).
    #[arg(long)]
    anti_model: Option<PathBuf>,
    /// Defaults to `<anti-model>.vocab`, else built from the input.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    vocab_min_count: usize,
    /// Per-epoch metrics CSV; needs `--dev` and `--negative-dev`.
    #[arg(long, requires_all = ["dev", "negative_dev"])]
    metrics: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    #[arg(long)]
    negative_dev: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    master_seed: u64,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    training: TrainingArgs,
}

#[derive(Args, Debug)]
struct EvalPplArgs {
    /// Checkpoint file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Negative corpus; when given the perplexity gap is reported.
    #[arg(long)]
    negative: Option<PathBuf>,
    /// Defaults to `<model>.vocab`.
    #[arg(long)]
    vocab: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalAgreementArgs {
    /// Checkpoint file.
    #[arg(long)]
    model: PathBuf,
    /// Agreement TSV.
    #[arg(long)]
    data: PathBuf,
    /// Defaults to `<model>.vocab`.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Also score instances whose verb is out of vocabulary.
    #[arg(long)]
    include_flagged: bool,
    /// Print the JSON summary instead of CSV.
    #[arg(long)]
    json: bool,
    /// Write to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunAllArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Pipeline output directory.
    #[arg(long)]
    dir: PathBuf,
    #[arg(long, requires = "delta_to")]
    delta_from: Option<String>,
    #[arg(long, requires = "delta_from")]
    delta_to: Option<String>,
}

#[derive(Args, Debug)]
struct GenSyntheticArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SYNTH_SEED)]
    seed: u64,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".vocab");
    PathBuf::from(s)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn fit_ngram(a: FitNgramArgs) -> Result<()> {
    let vocab_path = a.vocab.unwrap_or_else(|| sidecar(&a.out));
    let lines = read_lines(&a.input)?;
    let vocab = if vocab_path.is_file() {
        Vocabulary::load(&vocab_path)?
    } else {
        let v = Vocabulary::build(&lines, a.vocab_min_count, &ReservedTokens::default())?;
        v.save(&vocab_path)?;
        v
    };
    let corpus = crate::corpus::encode_corpus(&lines, &vocab, SplitLabel::Train)?;
    let model = NGramModel::fit(&corpus, &vocab, a.order)?;
    model.save(&a.out)?;
    if vocab_path != sidecar(&a.out) {
        vocab.save(&sidecar(&a.out))?;
    }
    log::info!("wrote {}-gram model to {}", a.order, a.out.display());
    Ok(())
}

fn gen_negative(a: GenNegativeArgs) -> Result<()> {
    let vocab = Vocabulary::load(&a.vocab.unwrap_or_else(|| sidecar(&a.model)))?;
    let model = NGramModel::load(&a.model)?;
    let seeds = load_corpus(&a.input, &vocab, SplitLabel::Dev)?;
    let mut rng = stream_rng(a.master_seed, NEGATIVE_DEV_STREAM);
    let neg = model.generate_negative_corpus(
        &seeds,
        &mut rng,
        a.negative_dev_mode,
        a.max_negative_len,
    )?;
    fs::write(&a.out, neg.to_text(&vocab)).map_err(|e| Error::io(&a.out, e))?;
    log::info!(
        "wrote {} negative sentences to {}",
        neg.len(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let lines = read_lines(&a.input)?;
    let vocab_path = a
        .vocab
        .clone()
        .or_else(|| a.anti_model.as_deref().map(sidecar));
    let vocab = match vocab_path {
        Some(p) => Vocabulary::load(&p)?,
        None => Vocabulary::build(&lines, a.vocab_min_count, &ReservedTokens::default())?,
    };
    let corpus = crate::corpus::encode_corpus(&lines, &vocab, SplitLabel::Train)?;
    let anti = a.anti_model.as_deref().map(NGramModel::load).transpose()?;
    let tcfg = a.training.config();
    if tcfg.alpha > 0.0 && anti.is_none() {
        return Err(Error::InvalidArgument(
            "--anti-model is required when alpha > 0".into(),
        ));
    }
    let eval_sets = match (&a.dev, &a.negative_dev) {
        (Some(d), Some(n)) => Some((
            load_corpus(d, &vocab, SplitLabel::Dev)?,
            load_corpus(n, &vocab, SplitLabel::NegativeDev)?,
        )),
        _ => None,
    };
    let negatives = anti
        .as_ref()
        .map_or(NegativeSource::None, NegativeSource::AntiModel);
    let mut model = NeuralLm::init(
        a.model.config(),
        vocab.size(),
        vocab.fingerprint(),
        a.master_seed,
    )?;
    let id = crate::pipeline::run_id(tcfg.alpha);
    let mut records = Vec::new();
    for epoch in 0..tcfg.epochs {
        let stats = train_epoch(&mut model, &corpus, negatives, &tcfg, epoch)?;
        let (pos, neg) = match &eval_sets {
            Some((d, n)) => {
                let g = perplexity_gap(&model, d, n)?;
                (g.positive.perplexity, g.negative.perplexity)
            }
            None => (f64::NAN, f64::NAN),
        };
        log::info!(
            "epoch {} lr {:.4} train_ppl {:.3} dev_ppl {pos:.3} neg_dev_ppl {neg:.3}",
            epoch + 1,
            stats.learning_rate,
            stats.train_ppl
        );
        records.push(MetricRecord {
            run_id: id.clone(),
            alpha: tcfg.alpha,
            epoch: epoch + 1,
            train_ppl: stats.train_ppl,
            dev_ppl_pos: pos,
            dev_ppl_neg: neg,
            mean_negative_loss: stats.mean_negative_loss,
            wall_seconds: stats.wall_seconds,
        });
    }
    model.save(&a.out)?;
    vocab.save(&sidecar(&a.out))?;
    if let Some(p) = &a.metrics {
        fs::write(p, MetricRecord::to_csv(&records)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn load_model(model: &Path, vocab: Option<PathBuf>) -> Result<(NeuralLm, Vocabulary)> {
    let lm = NeuralLm::load(model)?;
    let vocab = Vocabulary::load(&vocab.unwrap_or_else(|| sidecar(model)))?;
    lm.check_fingerprint(vocab.fingerprint())?;
    Ok((lm, vocab))
}

fn eval_ppl(a: EvalPplArgs) -> Result<()> {
    let (model, vocab) = load_model(&a.model, a.vocab)?;
    let data = load_corpus(&a.data, &vocab, SplitLabel::Dev)?;
    let json = match &a.negative {
        Some(n) => {
            let neg = load_corpus(n, &vocab, SplitLabel::NegativeDev)?;
            serde_json::to_string_pretty(&perplexity_gap(&model, &data, &neg)?)
        }
        None => serde_json::to_string_pretty(&perplexity(&model, &data)?),
    }
    .map_err(|e| Error::Format(e.to_string()))?;
    println!("{json}");
    Ok(())
}

fn eval_agreement(a: EvalAgreementArgs) -> Result<()> {
    let (model, vocab) = load_model(&a.model, a.vocab)?;
    let data = load_agreement_data(&a.data, &vocab)?;
    if !data.rejected.is_empty() {
        log::warn!("{} agreement rows rejected", data.rejected.len());
    }
    let report = agreement_error_rates(&model, &data.instances, a.include_flagged)?;
    let text = if a.json {
        report.to_json() + "\n"
    } else {
        report.to_csv()
    };
    emit(a.out.as_deref(), &text)
}

fn run_all(a: RunAllArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    run_pipeline(&cfg)?;
    let summary = emit_report(&cfg.output_dir, &ReportOptions::default())?;
    log::info!(
        "pipeline complete: {} runs, report in {}",
        summary.runs.len(),
        cfg.output_dir.join("report").display()
    );
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let options = ReportOptions {
        delta: a.delta_from.zip(a.delta_to),
    };
    let summary = emit_report(&a.dir, &options)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn gen_synthetic(a: GenSyntheticArgs) -> Result<()> {
    let cfg = SynthConfig {
        seed: a.seed,
        ..SynthConfig::default()
    };
    for p in generate(&cfg).write_to(&a.out)? {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

/// Parses `argv` (including the program name), runs the subcommand, and
/// returns the process exit code.
pub fn cli_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::FitNgram(a) => fit_ngram(a),
        Command::GenNegative(a) => gen_negative(a),
        Command::Train(a) => train(a),
        Command::EvalPpl(a) => eval_ppl(a),
        Command::EvalAgreement(a) => eval_agreement(a),
        Command::RunAll(a) => run_all(a),
        Command::Report(a) => report(a),
        Command::GenSynthetic(a) => gen_synthetic(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}
