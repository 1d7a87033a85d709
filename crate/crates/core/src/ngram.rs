//! Unsmoothed maximum-likelihood n-gram anti-models and negative data
//! generation.
//!
//! Counts are taken over each sentence left-padded with `order - 1` start
//! ids and ending at its end id. Tables for every context length
//! `0..order` are kept so that generation can back off when a seed context
//! was never observed: the context is shortened from the left until a seen
//! one is found, ending at the (always populated) unigram table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::corpus::{Corpus, Fingerprint, Sentence, SplitLabel, TokenId, Vocabulary};
use crate::error::{Error, Result};

pub const MAX_ORDER: usize = 8;
pub const DEFAULT_MAX_LEN: usize = 200;

const MODEL_HEADER: &str = "# antimodel-ngram v1";

/// Continuation counts for one context. Iteration is in token-id order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContextCounts {
    total: u64,
    continuations: BTreeMap<TokenId, u64>,
}

impl ContextCounts {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, token: TokenId) -> u64 {
        self.continuations.get(&token).copied().unwrap_or(0)
    }

    pub fn continuations(&self) -> impl Iterator<Item = (TokenId, u64)> + '_ {
        self.continuations.iter().map(|(&t, &c)| (t, c))
    }

    fn add(&mut self, token: TokenId) {
        self.total += 1;
        *self.continuations.entry(token).or_default() += 1;
    }

    /// Inverse CDF over continuations ordered by token id.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TokenId {
        let mut draw = rng.gen_range(0..self.total);
        for (&token, &count) in &self.continuations {
            if draw < count {
                return token;
            }
            draw -= count;
        }
        unreachable!("continuation counts sum to the context total")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramModel {
    order: usize,
    start_id: TokenId,
    end_id: TokenId,
    vocab_fingerprint: Fingerprint,
    /// Keyed by context, for context lengths 0..order.
    tables: BTreeMap<Vec<TokenId>, ContextCounts>,
}

/// How a static negative corpus conditions each generated sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeDevMode {
    /// Sentence `i` is seeded with positive sentence `i - 1`.
    #[default]
    PerSentenceSeeded,
    /// Sentence `i` is seeded with generated sentence `i - 1`.
    SinglePass,
}

impl std::str::FromStr for NegativeDevMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "per_sentence_seeded" | "per_sentence" => Ok(NegativeDevMode::PerSentenceSeeded),
            "single_pass" => Ok(NegativeDevMode::SinglePass),
            other => Err(Error::InvalidArgument(format!(
                "unknown negative dev mode `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for NegativeDevMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NegativeDevMode::PerSentenceSeeded => "per_sentence_seeded",
            NegativeDevMode::SinglePass => "single_pass",
        })
    }
}

impl NGramModel {
    pub fn fit(corpus: &Corpus, vocab: &Vocabulary, order: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(Error::InvalidArgument(format!(
                "n-gram order must be in 1..={MAX_ORDER}, got {order}"
            )));
        }
        if corpus.vocab_fingerprint() != vocab.fingerprint() {
            return Err(Error::VocabMismatch {
                expected: vocab.fingerprint().to_string(),
                found: corpus.vocab_fingerprint().to_string(),
            });
        }
        let mut tables: BTreeMap<Vec<TokenId>, ContextCounts> = BTreeMap::new();
        let pad = order - 1;
        let mut padded = Vec::new();
        for sentence in corpus.sentences() {
            padded.clear();
            padded.resize(pad, vocab.start_id());
            padded.extend_from_slice(sentence.ids());
            for pos in pad..padded.len() {
                let target = padded[pos];
                for len in 0..order {
                    tables
                        .entry(padded[pos - len..pos].to_vec())
                        .or_default()
                        .add(target);
                }
            }
        }
        Ok(NGramModel {
            order,
            start_id: vocab.start_id(),
            end_id: vocab.end_id(),
            vocab_fingerprint: vocab.fingerprint(),
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_fingerprint(&self) -> Fingerprint {
        self.vocab_fingerprint
    }

    /// Counts for an exact context of any length below `order`.
    pub fn counts(&self, context: &[TokenId]) -> Option<&ContextCounts> {
        self.tables.get(context)
    }

    /// Iterates all full-order contexts (length `order - 1`).
    pub fn full_contexts(&self) -> impl Iterator<Item = (&[TokenId], &ContextCounts)> {
        let len = self.order - 1;
        self.tables
            .iter()
            .filter(move |(k, _)| k.len() == len)
            .map(|(k, v)| (k.as_slice(), v))
    }

    pub fn unigram(&self) -> &ContextCounts {
        &self.tables[&Vec::new()]
    }

    /// Longest seen suffix of `context` (which may be empty).
    fn resolve<'a>(&'a self, context: &[TokenId]) -> &'a ContextCounts {
        let mut ctx = context;
        loop {
            if let Some(counts) = self.tables.get(ctx) {
                return counts;
            }
            ctx = &ctx[1..];
        }
    }

    /// Normalises an arbitrary history into a context of length `order - 1`:
    /// keeps the tail, treats anything up to an end id as a sentence
    /// boundary (start padding), and left-pads short histories.
    fn context_from(&self, history: &[TokenId]) -> Vec<TokenId> {
        let n = self.order - 1;
        let tail = &history[history.len().saturating_sub(n)..];
        let tail = match tail.iter().rposition(|&t| t == self.end_id) {
            Some(p) => &tail[p + 1..],
            None => tail,
        };
        let mut ctx = vec![self.start_id; n - tail.len()];
        ctx.extend_from_slice(tail);
        ctx
    }

    /// Conditional probability of `token` after a context of exactly
    /// `order - 1` ids, with backoff for unseen contexts.
    pub fn cond_prob(&self, context: &[TokenId], token: TokenId) -> Result<f64> {
        if context.len() != self.order - 1 {
            return Err(Error::InvalidArgument(format!(
                "context length {} does not match order {}",
                context.len(),
                self.order
            )));
        }
        let counts = self.resolve(context);
        Ok(counts.count(token) as f64 / counts.total() as f64)
    }

    /// Draws the next token given any history (normalised as in generation).
    pub fn sample_next<R: Rng + ?Sized>(&self, history: &[TokenId], rng: &mut R) -> TokenId {
        let ctx = self.context_from(history);
        self.resolve(&ctx).sample(rng)
    }

    /// Ancestral sampling from the tail of `seed_context`. Stops at the end
    /// id or after `max_len` tokens, in which case an end id is appended.
    pub fn generate_sentence<R: Rng + ?Sized>(
        &self,
        seed_context: &[TokenId],
        rng: &mut R,
        max_len: usize,
    ) -> Result<Sentence> {
        if max_len < 1 {
            return Err(Error::InvalidArgument("max_len must be >= 1".into()));
        }
        let mut ctx = self.context_from(seed_context);
        let mut ids = Vec::new();
        loop {
            let tok = self.resolve(&ctx).sample(rng);
            ids.push(tok);
            if tok == self.end_id {
                break;
            }
            if ids.len() == max_len {
                ids.push(self.end_id);
                break;
            }
            if !ctx.is_empty() {
                ctx.remove(0);
                ctx.push(tok);
            }
        }
        Ok(Sentence::from_ids_unchecked(ids))
    }

    /// Static negative corpus with one generated sentence per positive one.
    pub fn generate_negative_corpus<R: Rng + ?Sized>(
        &self,
        positive: &Corpus,
        rng: &mut R,
        mode: NegativeDevMode,
        max_len: usize,
    ) -> Result<Corpus> {
        self.check_fingerprint(positive.vocab_fingerprint())?;
        let mut out: Vec<Sentence> = Vec::with_capacity(positive.len());
        for i in 0..positive.len() {
            let seed: &[TokenId] = match (i, mode) {
                (0, _) => &[],
                (_, NegativeDevMode::PerSentenceSeeded) => positive.sentences()[i - 1].ids(),
                (_, NegativeDevMode::SinglePass) => out[i - 1].ids(),
            };
            let s = self.generate_sentence(seed, rng, max_len)?;
            out.push(s);
        }
        Corpus::new(out, SplitLabel::NegativeDev, self.vocab_fingerprint)
    }

    /// On-the-fly negatives: sentence `k` is seeded by `previous[k]`.
    pub fn negative_batch<R: Rng + ?Sized>(
        &self,
        positive_batch: &[Sentence],
        previous: &[&[TokenId]],
        rng: &mut R,
        max_len: usize,
    ) -> Result<Vec<Sentence>> {
        if positive_batch.len() != previous.len() {
            return Err(Error::LengthMismatch {
                left: positive_batch.len(),
                right: previous.len(),
            });
        }
        previous
            .iter()
            .map(|seed| self.generate_sentence(seed, rng, max_len))
            .collect()
    }

    pub fn check_fingerprint(&self, other: Fingerprint) -> Result<()> {
        if other != self.vocab_fingerprint {
            return Err(Error::VocabMismatch {
                expected: self.vocab_fingerprint.to_string(),
                found: other.to_string(),
            });
        }
        Ok(())
    }

    /// Plain-text count table. One line per context:
    /// `ctx ids (or -) <TAB> total <TAB> id:count id:count ...`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "order {}", self.order);
        let _ = writeln!(out, "vocab {}", self.vocab_fingerprint);
        let _ = writeln!(out, "boundary {} {}", self.start_id, self.end_id);
        let _ = writeln!(out, "contexts {}", self.tables.len());
        for (ctx, counts) in &self.tables {
            if ctx.is_empty() {
                out.push('-');
            } else {
                let ids: Vec<String> = ctx.iter().map(|t| t.to_string()).collect();
                out.push_str(&ids.join(" "));
            }
            let _ = write!(out, "\t{}\t", counts.total);
            let conts: Vec<String> = counts
                .continuations
                .iter()
                .map(|(t, c)| format!("{t}:{c}"))
                .collect();
            out.push_str(&conts.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            path: "<ngram>".into(),
            line,
            message: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut header_field = |key: &str| -> Result<(usize, String)> {
            let (no, line) = lines.next().ok_or_else(|| bad(0, "truncated header"))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| bad(no, &format!("expected `{key}`")))?;
            Ok((no, rest.trim().to_string()))
        };
        let (no, h) = header_field("#")?;
        if format!("# {h}") != MODEL_HEADER {
            return Err(bad(no, "unknown model header"));
        }
        let (no, order) = header_field("order")?;
        let order: usize = order.parse().map_err(|_| bad(no, "bad order"))?;
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(bad(no, "order out of range"));
        }
        let (_, fp) = header_field("vocab")?;
        let vocab_fingerprint: Fingerprint = fp.parse()?;
        let (no, boundary) = header_field("boundary")?;
        let ids: Vec<TokenId> = boundary
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(no, "bad boundary ids"))?;
        if ids.len() != 2 {
            return Err(bad(no, "expected start and end ids"));
        }
        let (no, n) = header_field("contexts")?;
        let n: usize = n.parse().map_err(|_| bad(no, "bad context count"))?;

        let mut tables = BTreeMap::new();
        for (no, line) in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad(no, "expected 3 tab-separated columns"));
            }
            let ctx: Vec<TokenId> = if cols[0] == "-" {
                Vec::new()
            } else {
                cols[0]
                    .split(' ')
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(no, "bad context ids"))?
            };
            if ctx.len() >= order {
                return Err(bad(no, "context longer than order - 1"));
            }
            let total: u64 = cols[1].parse().map_err(|_| bad(no, "bad total"))?;
            let mut counts = ContextCounts::default();
            for pair in cols[2].split(' ').filter(|p| !p.is_empty()) {
                let (t, c) = pair.split_once(':').ok_or_else(|| bad(no, "bad pair"))?;
                let t: TokenId = t.parse().map_err(|_| bad(no, "bad token id"))?;
                let c: u64 = c.parse().map_err(|_| bad(no, "bad count"))?;
                if c == 0 {
                    return Err(bad(no, "zero continuation count"));
                }
                counts.continuations.insert(t, c);
                counts.total += c;
            }
            if counts.total != total || total == 0 {
                return Err(bad(no, "continuation counts do not sum to total"));
            }
            if tables.insert(ctx, counts).is_some() {
                return Err(bad(no, "duplicate context"));
            }
        }
        if tables.len() != n {
            return Err(bad(0, "context count does not match header"));
        }
        if !tables.contains_key(&Vec::new()) {
            return Err(bad(0, "missing unigram table"));
        }
        Ok(NGramModel {
            order,
            start_id: ids[0],
            end_id: ids[1],
            vocab_fingerprint,
            tables,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.display().to_string(),
                line,
                message,
            },
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode_corpus, ReservedTokens};
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn fit(lines: &[&str], order: usize) -> (Vocabulary, Corpus, NGramModel) {
        let v = Vocabulary::build(lines, 1, &ReservedTokens::default()).unwrap();
        let c = encode_corpus(lines, &v, SplitLabel::Train).unwrap();
        let m = NGramModel::fit(&c, &v, order).unwrap();
        (v, c, m)
    }

    fn id(v: &Vocabulary, t: &str) -> TokenId {
        v.id(t).unwrap()
    }

    #[test]
    fn trigram_conditionals() {
        let (v, _, m) = fit(&["a b c", "a b d"], 3);
        let ab = [id(&v, "a"), id(&v, "b")];
        assert_eq!(m.cond_prob(&ab, id(&v, "c")).unwrap(), 0.5);
        assert_eq!(m.cond_prob(&ab, id(&v, "d")).unwrap(), 0.5);
        let counts = m.counts(&ab).unwrap();
        assert_eq!((counts.count(id(&v, "c")), counts.total()), (1, 2));
    }

    #[test]
    fn unigram_includes_end_token() {
        let (v, _, m) = fit(&["a"], 1);
        assert_eq!(m.cond_prob(&[], id(&v, "a")).unwrap(), 0.5);
        assert_eq!(m.cond_prob(&[], v.end_id()).unwrap(), 0.5);
    }

    #[test]
    fn single_continuation_is_certain() {
        let (v, _, m) = fit(&["a b"], 3);
        let ss = [v.start_id(), v.start_id()];
        assert_eq!(m.cond_prob(&ss, id(&v, "a")).unwrap(), 1.0);
    }

    #[test]
    fn unseen_context_backs_off_to_unigram() {
        let (v, _, m) = fit(&["a b c", "a b d"], 3);
        // z is unknown; (unk, unk) and (unk) were never seen.
        let zz = [v.unk_id(), v.unk_id()];
        let a = id(&v, "a");
        // unigram: a b c </s> a b d </s> -> P(a) = 2/8
        assert_eq!(m.cond_prob(&zz, a).unwrap(), 0.25);
        // (c, b) unseen but (b) seen: P(c | b) = 1/2
        let cb = [id(&v, "c"), id(&v, "b")];
        assert_eq!(m.cond_prob(&cb, id(&v, "c")).unwrap(), 0.5);
    }

    #[test]
    fn cond_prob_rejects_wrong_context_length() {
        let (v, _, m) = fit(&["a b"], 3);
        assert!(m.cond_prob(&[id(&v, "a")], id(&v, "b")).is_err());
    }

    #[test]
    fn fit_rejects_bad_order() {
        let v = Vocabulary::build(&["a"], 1, &ReservedTokens::default()).unwrap();
        let c = encode_corpus(&["a"], &v, SplitLabel::Train).unwrap();
        assert!(NGramModel::fit(&c, &v, 0).is_err());
        assert!(NGramModel::fit(&c, &v, 9).is_err());
        assert!(NGramModel::fit(&c, &v, 8).is_ok());
    }

    #[test]
    fn deterministic_chain_generates_training_sentence() {
        let (v, _, m) = fit(&["a b"], 3);
        for seed in 0..20 {
            let mut rng = stream_rng(seed, 0);
            let s = m.generate_sentence(&[], &mut rng, DEFAULT_MAX_LEN).unwrap();
            assert_eq!(v.decode(s.ids()), "a b");
            assert_eq!(s.ids().last(), Some(&v.end_id()));
            let next = m.sample_next(&[v.start_id(), v.start_id()], &mut rng);
            assert_eq!(next, id(&v, "a"));
        }
    }

    #[test]
    fn truncation_appends_end() {
        let long = vec!["a"; 100].join(" ");
        let (v, _, m) = fit(&[long.as_str()], 2);
        let mut rng = stream_rng(3, 0);
        let s = m.generate_sentence(&[id(&v, "a")], &mut rng, 2).unwrap();
        assert_eq!(s.ids(), &[id(&v, "a"), id(&v, "a"), v.end_id()]);
        assert!(m.generate_sentence(&[], &mut rng, 0).is_err());
    }

    #[test]
    fn same_seed_same_draw() {
        let (v, _, m) = fit(&["a b c", "a b d"], 3);
        let ctx = [id(&v, "a"), id(&v, "b")];
        let x = m.sample_next(&ctx, &mut stream_rng(11, 0));
        let y = m.sample_next(&ctx, &mut stream_rng(11, 0));
        assert_eq!(x, y);
    }

    #[test]
    fn fair_context_sampling_frequencies() {
        // P = (1/2, 1/2); 10k draws; each frequency within [0.47, 0.53].
        let (v, _, m) = fit(&["a b c", "a b d"], 3);
        let ctx = [id(&v, "a"), id(&v, "b")];
        let mut rng = stream_rng(5, 0);
        let n = 10_000;
        let c_hits = (0..n)
            .filter(|_| m.sample_next(&ctx, &mut rng) == id(&v, "c"))
            .count();
        let f = c_hits as f64 / n as f64;
        assert!((0.47..=0.53).contains(&f), "frequency {f}");
    }

    #[test]
    fn sampler_matches_conditionals_within_three_sigma() {
        let (v, _, m) = fit(&["a b c", "a b d", "a b d", "a b e e", "a b c"], 3);
        let ctx = [id(&v, "a"), id(&v, "b")];
        let mut rng = stream_rng(9, 0);
        let n = 20_000usize;
        let mut hist: HashMap<TokenId, usize> = HashMap::new();
        for _ in 0..n {
            *hist.entry(m.sample_next(&ctx, &mut rng)).or_default() += 1;
        }
        for (tok, _) in m.counts(&ctx).unwrap().continuations() {
            let p = m.cond_prob(&ctx, tok).unwrap();
            let f = hist.get(&tok).copied().unwrap_or(0) as f64 / n as f64;
            let bound = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
            assert!((f - p).abs() <= bound, "token {tok}: {f} vs {p}");
        }
    }

    #[test]
    fn seeding_with_previous_sentence_uses_sentence_start_distribution() {
        let (v, _, m) = fit(&["a b", "c d"], 3);
        let prev = encode_corpus(&["c d"], &v, SplitLabel::Dev).unwrap();
        let normalised = m.context_from(prev.sentences()[0].ids());
        assert_eq!(normalised, vec![v.start_id(), v.start_id()]);
        let partial = m.context_from(&[id(&v, "c")]);
        assert_eq!(partial, vec![v.start_id(), id(&v, "c")]);
    }

    #[test]
    fn negative_corpus_cardinality_and_determinism() {
        let lines = ["a b c", "a b d", "b c a"];
        let (_, c, m) = fit(&lines, 3);
        let n1 = m
            .generate_negative_corpus(&c, &mut stream_rng(1, 2), NegativeDevMode::default(), 50)
            .unwrap();
        let n2 = m
            .generate_negative_corpus(&c, &mut stream_rng(1, 2), NegativeDevMode::default(), 50)
            .unwrap();
        assert_eq!(n1.len(), 3);
        assert_eq!(n1.split(), SplitLabel::NegativeDev);
        assert_eq!(n1, n2);
        let single = m
            .generate_negative_corpus(&c, &mut stream_rng(1, 2), NegativeDevMode::SinglePass, 50)
            .unwrap();
        assert_eq!(single.len(), 3);
    }

    #[test]
    fn negative_batch_contract() {
        let lines = ["a b c", "a b d", "b c a", "c a b", "a c b d"];
        let (_, c, m) = fit(&lines, 2);
        let batch = &c.sentences()[1..5];
        let prev: Vec<&[TokenId]> = c.sentences()[0..4].iter().map(|s| s.ids()).collect();
        let mut rng = stream_rng(4, 1);
        let snapshot = rng.clone();
        let first = m.negative_batch(batch, &prev, &mut rng, 50).unwrap();
        assert_eq!(first.len(), 4);
        let second = m.negative_batch(batch, &prev, &mut rng, 50).unwrap();
        assert_ne!(first, second);
        let replay = m
            .negative_batch(batch, &prev, &mut snapshot.clone(), 50)
            .unwrap();
        assert_eq!(first, replay);
        assert!(matches!(
            m.negative_batch(batch, &prev[..3], &mut rng, 50),
            Err(Error::LengthMismatch { left: 4, right: 3 })
        ));
    }

    #[test]
    fn model_file_round_trip() {
        let (_, _, m) = fit(&["a b c", "a b d", "the keys are here"], 4);
        let back = NGramModel::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), m.to_text());
    }

    #[test]
    fn model_file_rejects_corruption() {
        let (_, _, m) = fit(&["a b c"], 2);
        let text = m.to_text();
        let broken = text.replacen("\t1\t", "\t2\t", 1);
        assert!(NGramModel::parse(&broken).is_err());
        assert!(NGramModel::parse("garbage").is_err());
    }

    proptest! {
        #[test]
        fn seen_contexts_normalise(
            lines in prop::collection::vec("[a-d]( [a-d]){0,7}", 1..10),
            order in 1usize..5,
        ) {
            let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
            let (_, _, m) = fit(&refs, order);
            for (ctx, counts) in m.full_contexts() {
                let sum: u64 = counts.continuations().map(|(_, c)| c).sum();
                prop_assert_eq!(sum, counts.total());
                let p: f64 = counts
                    .continuations()
                    .map(|(t, _)| m.cond_prob(ctx, t).unwrap())
                    .sum();
                prop_assert!((p - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn generation_terminates(seed in 0u64..500, max_len in 1usize..8) {
            let (v, _, m) = fit(&["a b a b a b a", "b a b", "a a a a a a a a"], 2);
            let s = m.generate_sentence(&[], &mut stream_rng(seed, 0), max_len).unwrap();
            prop_assert!(s.len() <= max_len + 1);
            prop_assert_eq!(s.ids().last(), Some(&v.end_id()));
        }
    }
}
