//! End-to-end experiment runner: anti-model fitting, negative dev data,
//! the alpha sweep, evaluation, and reporting.

mod config;
mod manifest;
mod report;
mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub use config::{
    run_id, ExperimentConfig, DEFAULT_ALPHA_SWEEP, DEFAULT_OUTPUT_ROOT, OUTPUT_ROOT_ENV,
};
pub use manifest::{sha256_hex, FileEntry, Manifest, RunEntry, RunStatus, MANIFEST_FILE};
pub use report::{
    agreement_table, delta_row, emit_report, format_percent, parse_agreement_table,
    AgreementTableRow, ReportOptions, ReportSummary, AGREEMENT_TABLE_HEADER,
};

use crate::corpus::{
    encode_corpus, load_agreement_data, read_lines, Corpus, ReservedTokens, SplitLabel, Vocabulary,
};
use crate::error::{Error, Result};
use crate::eval::{
    agreement_error_rates, perplexity, perplexity_gap, PerplexityGap, PerplexityReport,
};
use crate::lm::{train_epoch, NegativeSource, NeuralLm};
use crate::ngram::NGramModel;
use crate::rng::{stream_rng, NEGATIVE_DEV_STREAM};
use manifest::ManifestWriter;

pub const METRICS_CSV_HEADER: &str =
    "run_id,alpha,epoch,train_ppl,dev_ppl_pos,dev_ppl_neg,mean_negative_loss,wall_seconds";

/// One epoch of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    pub run_id: String,
    pub alpha: f64,
    /// 1-based.
    pub epoch: usize,
    pub train_ppl: f64,
    pub dev_ppl_pos: f64,
    pub dev_ppl_neg: f64,
    pub mean_negative_loss: f64,
    pub wall_seconds: f64,
}

impl MetricRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.3}",
            self.run_id,
            self.alpha,
            self.epoch,
            self.train_ppl,
            self.dev_ppl_pos,
            self.dev_ppl_neg,
            self.mean_negative_loss,
            self.wall_seconds
        )
    }

    pub fn to_csv(records: &[MetricRecord]) -> String {
        let mut out = format!("{METRICS_CSV_HEADER}\n");
        for r in records {
            writeln!(out, "{}", r.to_csv_row()).unwrap();
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Vec<MetricRecord>> {
        let mut lines = text.lines();
        if lines.next() != Some(METRICS_CSV_HEADER) {
            return Err(Error::Format("metrics CSV header mismatch".into()));
        }
        lines
            .filter(|l| !l.trim().is_empty())
            .map(|line| {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 8 {
                    return Err(Error::Format(format!(
                        "metrics row has {} fields: `{line}`",
                        f.len()
                    )));
                }
                let num = |s: &str| -> Result<f64> {
                    s.parse()
                        .map_err(|_| Error::Format(format!("bad number `{s}` in metrics row")))
                };
                Ok(MetricRecord {
                    run_id: f[0].to_string(),
                    alpha: num(f[1])?,
                    epoch: f[2]
                        .parse()
                        .map_err(|_| Error::Format(format!("bad epoch `{}`", f[2])))?,
                    train_ppl: num(f[3])?,
                    dev_ppl_pos: num(f[4])?,
                    dev_ppl_neg: num(f[5])?,
                    mean_negative_loss: num(f[6])?,
                    wall_seconds: num(f[7])?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
struct RunEvaluation {
    run_id: String,
    alpha: f64,
    dev: PerplexityGap,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<PerplexityReport>,
}

/// Shared inputs for every run in the sweep.
struct Prepared {
    vocab: Vocabulary,
    train: Corpus,
    dev: Corpus,
    test: Option<Corpus>,
    anti: NGramModel,
    negative_dev: Corpus,
}

fn stage<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| Error::Stage {
        stage: name.to_string(),
        source: Box::new(e),
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs the whole experiment. On failure the manifest is still written,
/// marked failed with the stage name, and the error is returned.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    cfg.check_paths()?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut writer = ManifestWriter::new(out);
    match run_stages(cfg, &mut writer) {
        Ok(()) => writer.finish(None),
        Err(e) => {
            let stage = match &e {
                Error::Stage { stage, .. } => stage.clone(),
                _ => "unknown".to_string(),
            };
            log::error!("pipeline failed in stage {stage}: {e}");
            writer.finish(Some((stage, e.to_string())))?;
            Err(e)
        }
    }
}

fn run_stages(cfg: &ExperimentConfig, w: &mut ManifestWriter) -> Result<()> {
    stage("config", || {
        write_file(&w.path("config.resolved.txt"), cfg.to_text())?;
        w.record("config.resolved.txt", "config", None)
    })?;
    let prep = prepare(cfg, w)?;
    let agreement = match &cfg.agreement {
        Some(path) => Some(stage("agreement_data", || {
            load_agreement_data(path, &prep.vocab)
        })?),
        None => None,
    };
    for &alpha in &cfg.alpha_sweep {
        let id = run_id(alpha);
        w.begin_run(&id, alpha);
        let model = stage(&format!("train:{id}"), || {
            train_run(cfg, &prep, alpha, &id, w)
        })?;
        stage(&format!("evaluate:{id}"), || {
            let eval = RunEvaluation {
                run_id: id.clone(),
                alpha,
                dev: perplexity_gap(&model, &prep.dev, &prep.negative_dev)?,
                test: prep
                    .test
                    .as_ref()
                    .map(|t| perplexity(&model, t))
                    .transpose()?,
            };
            let rel = format!("runs/{id}/evaluation.json");
            let json =
                serde_json::to_string_pretty(&eval).map_err(|e| Error::Format(e.to_string()))?;
            write_file(&w.path(&rel), json + "\n")?;
            w.record(&rel, "evaluation", Some(&id))?;
            if let Some(data) = &agreement {
                let report = agreement_error_rates(&model, &data.instances, cfg.include_flagged)?;
                let csv = format!("runs/{id}/agreement.csv");
                write_file(&w.path(&csv), report.to_csv())?;
                w.record(&csv, "agreement_csv", Some(&id))?;
                let json = format!("runs/{id}/agreement.json");
                write_file(&w.path(&json), report.to_json() + "\n")?;
                w.record(&json, "agreement_json", Some(&id))?;
            }
            Ok(())
        })?;
        w.complete_run(&id);
    }
    Ok(())
}

fn prepare(cfg: &ExperimentConfig, w: &mut ManifestWriter) -> Result<Prepared> {
    let (vocab, train, dev, test) = stage("corpus", || {
        let lines = read_lines(&cfg.train)?;
        let vocab = Vocabulary::build(&lines, cfg.vocab_min_count, &ReservedTokens::default())?;
        vocab.save(&w.path("vocab.txt"))?;
        w.record("vocab.txt", "vocab", None)?;
        let train = encode_corpus(&lines, &vocab, SplitLabel::Train)?;
        let dev = encode_corpus(&read_lines(&cfg.dev)?, &vocab, SplitLabel::Dev)?;
        let test = match &cfg.test {
            Some(p) => Some(encode_corpus(&read_lines(p)?, &vocab, SplitLabel::Test)?),
            None => None,
        };
        Ok((vocab, train, dev, test))
    })?;
    let anti = stage("anti_model", || {
        let anti = NGramModel::fit(&train, &vocab, cfg.ngram_order)?;
        anti.save(&w.path("anti_train.ngram"))?;
        w.record("anti_train.ngram", "ngram", None)?;
        Ok(anti)
    })?;
    let negative_dev = stage("negative_dev", || {
        let dev_anti = NGramModel::fit(&dev, &vocab, cfg.ngram_order)?;
        dev_anti.save(&w.path("anti_dev.ngram"))?;
        w.record("anti_dev.ngram", "ngram", None)?;
        let mut rng = stream_rng(cfg.master_seed, NEGATIVE_DEV_STREAM);
        let neg = dev_anti.generate_negative_corpus(
            &dev,
            &mut rng,
            cfg.negative_dev_mode,
            cfg.training.max_negative_len,
        )?;
        write_file(&w.path("negative_dev.txt"), neg.to_text(&vocab))?;
        w.record("negative_dev.txt", "negative_dev", None)?;
        Ok(neg)
    })?;
    Ok(Prepared {
        vocab,
        train,
        dev,
        test,
        anti,
        negative_dev,
    })
}

fn train_run(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    alpha: f64,
    id: &str,
    w: &mut ManifestWriter,
) -> Result<NeuralLm> {
    let tcfg = cfg.train_config(alpha);
    let mut model = NeuralLm::init(
        cfg.lm,
        prep.vocab.size(),
        prep.vocab.fingerprint(),
        cfg.master_seed,
    )?;
    let mut records = Vec::with_capacity(tcfg.epochs);
    for epoch in 0..tcfg.epochs {
        let stats = train_epoch(
            &mut model,
            &prep.train,
            NegativeSource::AntiModel(&prep.anti),
            &tcfg,
            epoch,
        )?;
        let gap = perplexity_gap(&model, &prep.dev, &prep.negative_dev)?;
        let record = MetricRecord {
            run_id: id.to_string(),
            alpha,
            epoch: epoch + 1,
            train_ppl: stats.train_ppl,
            dev_ppl_pos: gap.positive.perplexity,
            dev_ppl_neg: gap.negative.perplexity,
            mean_negative_loss: stats.mean_negative_loss,
            wall_seconds: if cfg.record_wall_clock {
                stats.wall_seconds
            } else {
                0.0
            },
        };
        log::info!("{}", record.to_csv_row());
        records.push(record);
    }
    let metrics = format!("runs/{id}/metrics.csv");
    write_file(&w.path(&metrics), MetricRecord::to_csv(&records))?;
    w.record(&metrics, "metrics", Some(id))?;
    let ckpt = format!("runs/{id}/model.ckpt");
    model.save(&w.path(&ckpt))?;
    w.record(&ckpt, "checkpoint", Some(id))?;
    Ok(model)
}

/// Where a run's files live relative to the output directory.
pub fn run_dir(output_dir: &Path, run: &str) -> PathBuf {
    output_dir.join("runs").join(run)
}
