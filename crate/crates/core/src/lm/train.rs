use std::time::Instant;

use super::{NeuralLm, TrainConfig};
use crate::corpus::{Corpus, Sentence, TokenId};
use crate::error::Result;
use crate::ngram::NGramModel;
use crate::rng::RngState;

/// Where a training epoch gets its negative sentences.
#[derive(Debug, Clone, Copy)]
pub enum NegativeSource<'a> {
    /// Sampled on the fly, each negative seeded by the positive sentence
    /// preceding its paired positive.
    AntiModel(&'a NGramModel),
    /// Pre-generated; positive sentence `j` pairs with negative `j mod len`.
    Static(&'a Corpus),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_ppl: f64,
    /// Mean per-token unlikelihood penalty (before alpha) over the epoch's
    /// negative tokens; 0 when no negatives were used.
    pub mean_negative_loss: f64,
    pub positive_sentences: usize,
    pub positive_tokens: usize,
    pub negative_sentences: usize,
    pub negative_tokens: usize,
    pub updates: usize,
    pub wall_seconds: f64,
}

/// Learning rate for 0-based `epoch`: held for `lr_hold_epochs`, then
/// multiplied by `lr_decay` once per further epoch.
pub fn learning_rate_for_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    let decays = (epoch + 1).saturating_sub(cfg.lr_hold_epochs.max(1));
    cfg.learning_rate * cfg.lr_decay.powi(decays as i32)
}

/// One pass over `positive` in corpus order with clipped SGD.
///
/// Gradients of the summed loss are divided by the number of positive
/// sentences in the batch before clipping. With `alpha == 0` no negative
/// data is drawn, so the run is identical to pure likelihood training.
pub fn train_epoch(
    model: &mut NeuralLm,
    positive: &Corpus,
    negatives: NegativeSource<'_>,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    cfg.validate()?;
    model.check_fingerprint(positive.vocab_fingerprint())?;
    match negatives {
        NegativeSource::AntiModel(m) => m.check_fingerprint(positive.vocab_fingerprint())?,
        NegativeSource::Static(c) => model.check_fingerprint(c.vocab_fingerprint())?,
        NegativeSource::None => {}
    }

    let started = Instant::now();
    let lr = learning_rate_for_epoch(cfg, epoch);
    let seed = model.rng_state().seed;
    let mut rng = model.rng_state().restore();
    let mut state = model.zero_state();
    let use_negatives = cfg.alpha != 0.0;

    let sentences = positive.sentences();
    let mut stats = EpochStats {
        epoch,
        learning_rate: lr,
        train_ppl: 0.0,
        mean_negative_loss: 0.0,
        positive_sentences: 0,
        positive_tokens: 0,
        negative_sentences: 0,
        negative_tokens: 0,
        updates: 0,
        wall_seconds: 0.0,
    };
    let mut pos_loss_sum = 0.0;
    let mut neg_penalty_sum = 0.0;

    for (b, batch) in sentences.chunks(cfg.batch_size).enumerate() {
        let first = b * cfg.batch_size;
        let negative_batch: Vec<Sentence> = if !use_negatives {
            Vec::new()
        } else {
            match negatives {
                NegativeSource::AntiModel(anti) => {
                    let previous: Vec<&[TokenId]> = (first..first + batch.len())
                        .map(|j| {
                            if j == 0 {
                                &[][..]
                            } else {
                                sentences[j - 1].ids()
                            }
                        })
                        .collect();
                    anti.negative_batch(batch, &previous, &mut rng, cfg.max_negative_len)?
                }
                NegativeSource::Static(corpus) => (first..first + batch.len())
                    .map(|j| corpus.sentences()[j % corpus.len()].clone())
                    .collect(),
                NegativeSource::None => Vec::new(),
            }
        };

        let mut out =
            model.batch_gradients(batch, &negative_batch, cfg, &mut state, Some(&mut rng))?;
        pos_loss_sum += out.positive.as_slice().iter().sum::<f64>();
        neg_penalty_sum += out
            .negative
            .as_slice()
            .iter()
            .map(|&l| super::unlikelihood_term(l, cfg.unlikelihood_floor))
            .sum::<f64>();
        stats.positive_sentences += batch.len();
        stats.positive_tokens += out.positive.len();
        stats.negative_sentences += negative_batch.len();
        stats.negative_tokens += out.negative.len();

        out.grads.scale(1.0 / batch.len() as f64);
        let norm = out.grads.l2_norm();
        if norm > cfg.grad_clip_norm {
            out.grads.scale(cfg.grad_clip_norm / norm);
        }
        model.apply_update(&out.grads, lr);
        stats.updates += 1;
    }

    model.set_rng_state(RngState::capture(seed, &rng));
    stats.train_ppl = (pos_loss_sum / stats.positive_tokens.max(1) as f64).exp();
    if stats.negative_tokens > 0 {
        stats.mean_negative_loss = neg_penalty_sum / stats.negative_tokens as f64;
    }
    stats.wall_seconds = started.elapsed().as_secs_f64();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_holds_then_decays() {
        let cfg = TrainConfig {
            learning_rate: 1.0,
            lr_decay: 0.5,
            lr_hold_epochs: 4,
            ..TrainConfig::default()
        };
        let lrs: Vec<f64> = (0..7).map(|e| learning_rate_for_epoch(&cfg, e)).collect();
        assert_eq!(lrs, vec![1.0, 1.0, 1.0, 1.0, 0.5, 0.25, 0.125]);
    }
}
