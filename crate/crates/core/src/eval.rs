//! Perplexity and subject-verb agreement evaluation.

use std::fmt::Write as _;

use serde::Serialize;

use crate::corpus::{
    bucket_by_attractors, AgreementInstance, Bucket, Corpus, Fingerprint, Sentence, SplitLabel,
};
use crate::error::{Error, Result};
use crate::lm::{NeuralLm, RecurrentState, TokenLosses};

/// Anything that assigns per-token negative log-probabilities to sentences.
pub trait SentenceScorer {
    type State;

    fn fresh_state(&self) -> Self::State;

    /// Per-token losses (nats) for `sentence`, advancing `state`.
    fn token_losses(&self, sentence: &Sentence, state: &mut Self::State) -> TokenLosses;

    /// Vocabulary the scorer was built against, if it tracks one.
    fn vocab_fingerprint(&self) -> Option<Fingerprint> {
        None
    }
}

impl SentenceScorer for NeuralLm {
    type State = RecurrentState;

    fn fresh_state(&self) -> RecurrentState {
        self.zero_state()
    }

    fn token_losses(&self, sentence: &Sentence, state: &mut RecurrentState) -> TokenLosses {
        self.forward_token_losses(sentence, state)
    }

    fn vocab_fingerprint(&self) -> Option<Fingerprint> {
        Some(NeuralLm::vocab_fingerprint(self))
    }
}

fn check_vocab<M: SentenceScorer + ?Sized>(model: &M, fp: Fingerprint) -> Result<()> {
    match model.vocab_fingerprint() {
        Some(expected) if expected != fp => Err(Error::VocabMismatch {
            expected: expected.to_string(),
            found: fp.to_string(),
        }),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerplexityReport {
    #[serde(serialize_with = "crate::eval::display")]
    pub split: SplitLabel,
    pub token_count: usize,
    pub mean_nll: f64,
    pub perplexity: f64,
}

/// Per-token perplexity in nats, end tokens included. Recurrent state is
/// carried across sentence boundaries.
pub fn perplexity<M: SentenceScorer + ?Sized>(
    model: &M,
    corpus: &Corpus,
) -> Result<PerplexityReport> {
    check_vocab(model, corpus.vocab_fingerprint())?;
    let mut state = model.fresh_state();
    let mut total = 0.0;
    let mut count = 0usize;
    for s in corpus.sentences() {
        let losses = model.token_losses(s, &mut state);
        total += losses.as_slice().iter().sum::<f64>();
        count += losses.len();
    }
    if count == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mean_nll = total / count as f64;
    Ok(PerplexityReport {
        split: corpus.split(),
        token_count: count,
        mean_nll,
        perplexity: mean_nll.exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerplexityGap {
    pub positive: PerplexityReport,
    pub negative: PerplexityReport,
    /// `negative.perplexity - positive.perplexity`.
    pub gap: f64,
}

pub fn perplexity_gap<M: SentenceScorer + ?Sized>(
    model: &M,
    positive: &Corpus,
    negative: &Corpus,
) -> Result<PerplexityGap> {
    let positive = perplexity(model, positive)?;
    let negative = perplexity(model, negative)?;
    let gap = negative.perplexity - positive.perplexity;
    Ok(PerplexityGap {
        positive,
        negative,
        gap,
    })
}

/// Total log-probability of a whole sentence scored from a fresh state.
pub fn sentence_log_prob<M: SentenceScorer + ?Sized>(model: &M, sentence: &Sentence) -> f64 {
    let mut state = model.fresh_state();
    -model
        .token_losses(sentence, &mut state)
        .as_slice()
        .iter()
        .sum::<f64>()
}

/// Correct iff the grammatical log-probability is strictly higher; ties are
/// errors.
pub fn prefers_grammatical(grammatical_log_prob: f64, ungrammatical_log_prob: f64) -> bool {
    grammatical_log_prob > ungrammatical_log_prob
}

pub fn judge_agreement<M: SentenceScorer + ?Sized>(
    model: &M,
    instance: &AgreementInstance,
) -> bool {
    prefers_grammatical(
        sentence_log_prob(model, &instance.grammatical),
        sentence_log_prob(model, &instance.ungrammatical),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BucketRow {
    #[serde(rename = "n_attractors", serialize_with = "crate::eval::display")]
    pub bucket: Bucket,
    pub count: usize,
    pub errors: usize,
    /// `None` for an empty bucket.
    pub error_rate: Option<f64>,
}

impl BucketRow {
    fn new(bucket: Bucket, count: usize, errors: usize) -> Self {
        BucketRow {
            bucket,
            count,
            errors,
            error_rate: (count > 0).then(|| errors as f64 / count as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    /// One row per bucket, in [`Bucket::all`] order.
    pub buckets: Vec<BucketRow>,
    pub count: usize,
    pub errors: usize,
    pub error_rate: f64,
    /// Flagged out-of-vocabulary instances left out of the counts.
    pub excluded: usize,
}

pub const AGREEMENT_CSV_HEADER: &str = "n_attractors,count,errors,error_rate";

impl AgreementReport {
    pub fn bucket(&self, bucket: Bucket) -> &BucketRow {
        self.buckets
            .iter()
            .find(|r| r.bucket == bucket)
            .expect("every bucket has a row")
    }

    /// Error rate pooled over every bucket with at least one attractor.
    pub fn attractor_error_rate(&self) -> Option<f64> {
        let (count, errors) = self
            .buckets
            .iter()
            .filter(|r| r.bucket != Bucket::Exact(0))
            .fold((0, 0), |(c, e), r| (c + r.count, e + r.errors));
        (count > 0).then(|| errors as f64 / count as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{AGREEMENT_CSV_HEADER}\n");
        for r in &self.buckets {
            let rate = r.error_rate.map(|x| format!("{x:.6}")).unwrap_or_default();
            writeln!(out, "{},{},{},{rate}", r.bucket, r.count, r.errors).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Scores every instance (flagged OOV-verb instances only when
/// `include_flagged`) and aggregates per attractor bucket.
pub fn agreement_error_rates<M: SentenceScorer + ?Sized>(
    model: &M,
    instances: &[AgreementInstance],
    include_flagged: bool,
) -> Result<AgreementReport> {
    let scored: Vec<&AgreementInstance> = instances
        .iter()
        .filter(|i| include_flagged || !i.oov_verb)
        .collect();
    if scored.is_empty() {
        return Err(Error::InvalidArgument(
            "no agreement instances to score".into(),
        ));
    }
    let buckets = bucket_by_attractors(scored.iter().copied());
    let rows: Vec<BucketRow> = buckets
        .iter()
        .map(|(b, insts)| {
            let errors = insts.iter().filter(|i| !judge_agreement(model, i)).count();
            BucketRow::new(b, insts.len(), errors)
        })
        .collect();
    let count = buckets.total();
    let errors = rows.iter().map(|r| r.errors).sum::<usize>();
    Ok(AgreementReport {
        buckets: rows,
        count,
        errors,
        error_rate: errors as f64 / count as f64,
        excluded: instances.len() - scored.len(),
    })
}

pub(crate) fn display<T: std::fmt::Display, S: serde::Serializer>(
    v: &T,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}
