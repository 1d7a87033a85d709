//! Vocabularies, encoded sentences and corpora, and subject-verb agreement
//! records.
//!
//! Tokenisation is whitespace-only. Any linguistic preprocessing (lower
//! casing, replacing rare words by their part of speech) is expected to have
//! happened upstream.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const UNK_ID: TokenId = 0;
pub const START_ID: TokenId = 1;
pub const END_ID: TokenId = 2;

const VOCAB_HEADER: &str = "# antimodel-vocab v1";

/// Number of exact attractor buckets; larger counts go to the overflow bucket.
pub const MAX_EXACT_ATTRACTORS: usize = 5;

/// Stable 64-bit digest of a vocabulary's id assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u64);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

impl FromStr for Fingerprint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        u64::from_str_radix(s.trim(), 16)
            .map(Fingerprint)
            .map_err(|_| Error::Format(format!("bad vocabulary fingerprint `{s}`")))
    }
}

/// Surface forms of the reserved tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReservedTokens {
    pub unk: String,
    pub start: String,
    pub end: String,
}

impl Default for ReservedTokens {
    fn default() -> Self {
        ReservedTokens {
            unk: "<unk>".to_string(),
            start: "<s>".to_string(),
            end: "</s>".to_string(),
        }
    }
}

/// Bidirectional token/id map.
///
/// Ids 0, 1 and 2 are the unknown, start-boundary and end-boundary tokens.
/// Remaining ids follow descending corpus frequency, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, TokenId>,
    id_to_token: Vec<String>,
    fingerprint: Fingerprint,
}

impl Vocabulary {
    pub fn build<S: AsRef<str>>(
        lines: &[S],
        min_count: usize,
        reserved: &ReservedTokens,
    ) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for line in lines {
            for tok in line.as_ref().split_whitespace() {
                if tok == reserved.unk || tok == reserved.start || tok == reserved.end {
                    continue;
                }
                *counts.entry(tok).or_default() += 1;
            }
        }
        let total: usize = lines
            .iter()
            .map(|l| l.as_ref().split_whitespace().count())
            .sum();
        if total == 0 {
            return Err(Error::EmptyCorpus);
        }

        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let mut tokens = vec![
            reserved.unk.clone(),
            reserved.start.clone(),
            reserved.end.clone(),
        ];
        tokens.extend(kept.into_iter().map(|(t, _)| t.to_string()));
        Self::from_tokens(tokens)
    }

    /// Rebuilds a vocabulary from its id-ordered token list. The first three
    /// entries are the unknown, start and end tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 {
            return Err(Error::Format(
                "vocabulary needs the three reserved tokens".into(),
            ));
        }
        let mut token_to_id = HashMap::with_capacity(tokens.len());
        for (id, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::Format(format!("invalid vocabulary token {tok:?}")));
            }
            if token_to_id.insert(tok.clone(), id as TokenId).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        let mut hasher = Sha256::new();
        for tok in &tokens {
            hasher.update(tok.as_bytes());
            hasher.update(b"\n");
        }
        let digest = hasher.finalize();
        let mut head = [0u8; 8];
        head.copy_from_slice(&digest[..8]);
        Ok(Vocabulary {
            token_to_id,
            id_to_token: tokens,
            fingerprint: Fingerprint(u64::from_be_bytes(head)),
        })
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn unk_id(&self) -> TokenId {
        UNK_ID
    }

    pub fn start_id(&self) -> TokenId {
        START_ID
    }

    pub fn end_id(&self) -> TokenId {
        END_ID
    }

    pub fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.token_to_id.get(token).copied()
    }

    /// Total: unknown tokens map to the unk id.
    pub fn encode_token(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.id_to_token.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    /// Encodes a line as a sentence (terminal end id appended). `None` when
    /// the line has no tokens.
    pub fn encode_line(&self, line: &str) -> Option<Sentence> {
        let mut ids: Vec<TokenId> = line
            .split_whitespace()
            .map(|t| self.encode_token(t))
            .filter(|&id| id != START_ID && id != END_ID)
            .collect();
        if ids.is_empty() {
            return None;
        }
        ids.push(END_ID);
        Some(Sentence { ids })
    }

    /// Space-joined surface form, boundary tokens dropped.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .filter(|&&id| id != START_ID && id != END_ID)
            .map(|&id| self.token(id).unwrap_or(&self.id_to_token[UNK_ID as usize]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.size() * 8);
        out.push_str(VOCAB_HEADER);
        out.push('\n');
        for tok in &self.id_to_token {
            out.push_str(tok);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == VOCAB_HEADER => {}
            _ => return Err(Error::Format("missing vocabulary header".into())),
        }
        Self::from_tokens(lines.map(str::to_string).collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Encoded token ids ending in exactly one end-boundary id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence {
    ids: Vec<TokenId>,
}

impl Sentence {
    pub fn new(ids: Vec<TokenId>, vocab_size: usize) -> Result<Self> {
        let Some((&last, body)) = ids.split_last() else {
            return Err(Error::InvalidArgument("sentence is empty".into()));
        };
        if last != END_ID {
            return Err(Error::InvalidArgument(
                "sentence must end with the end-boundary id".into(),
            ));
        }
        if body.iter().any(|&id| id == END_ID || id == START_ID) {
            return Err(Error::InvalidArgument("boundary id inside sentence".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&id| id as usize >= vocab_size) {
            return Err(Error::InvalidArgument(format!(
                "token id {bad} outside vocabulary of size {vocab_size}"
            )));
        }
        Ok(Sentence { ids })
    }

    /// Caller guarantees the sentence invariants.
    pub(crate) fn from_ids_unchecked(ids: Vec<TokenId>) -> Self {
        debug_assert_eq!(ids.last(), Some(&END_ID));
        Sentence { ids }
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    /// Tokens without the terminal end id.
    pub fn body(&self) -> &[TokenId] {
        &self.ids[..self.ids.len() - 1]
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.ids.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SplitLabel {
    Train,
    Dev,
    Test,
    NegativeDev,
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitLabel::Train => "train",
            SplitLabel::Dev => "dev",
            SplitLabel::Test => "test",
            SplitLabel::NegativeDev => "negative_dev",
        })
    }
}

impl FromStr for SplitLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitLabel::Train),
            "dev" => Ok(SplitLabel::Dev),
            "test" => Ok(SplitLabel::Test),
            "negative_dev" => Ok(SplitLabel::NegativeDev),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    split: SplitLabel,
    vocab_fingerprint: Fingerprint,
    skipped_lines: usize,
}

impl Corpus {
    pub fn new(
        sentences: Vec<Sentence>,
        split: SplitLabel,
        vocab_fingerprint: Fingerprint,
    ) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Corpus {
            sentences,
            split,
            vocab_fingerprint,
            skipped_lines: 0,
        })
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn split(&self) -> SplitLabel {
        self.split
    }

    pub fn vocab_fingerprint(&self) -> Fingerprint {
        self.vocab_fingerprint
    }

    /// Lines dropped during encoding because they had no tokens.
    pub fn skipped_lines(&self) -> usize {
        self.skipped_lines
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// One line per sentence, end boundary dropped.
    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&vocab.decode(s.ids()));
            out.push('\n');
        }
        out
    }
}

pub fn encode_corpus<S: AsRef<str>>(
    lines: &[S],
    vocab: &Vocabulary,
    split: SplitLabel,
) -> Result<Corpus> {
    let mut sentences = Vec::with_capacity(lines.len());
    let mut skipped = 0;
    for line in lines {
        match vocab.encode_line(line.as_ref()) {
            Some(s) => sentences.push(s),
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{split}: skipped {skipped} empty line(s)");
    }
    let mut corpus = Corpus::new(sentences, split, vocab.fingerprint())?;
    corpus.skipped_lines = skipped;
    Ok(corpus)
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn load_corpus(path: &Path, vocab: &Vocabulary, split: SplitLabel) -> Result<Corpus> {
    encode_corpus(&read_lines(path)?, vocab, split)
}

/// A grammatical / ungrammatical sentence pair differing only at the verb.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementInstance {
    pub grammatical: Sentence,
    pub ungrammatical: Sentence,
    pub verb_position: usize,
    pub n_attractors: usize,
    /// Either verb form is out of vocabulary; excluded from scoring unless
    /// explicitly included.
    pub oov_verb: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRecord {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct AgreementData {
    pub instances: Vec<AgreementInstance>,
    pub rejected: Vec<RejectedRecord>,
}

impl AgreementData {
    pub fn flagged(&self) -> usize {
        self.instances.iter().filter(|i| i.oov_verb).count()
    }
}

/// Parses agreement TSV: grammatical, ungrammatical, verb position (0-based
/// token index), attractor count. `#` lines and blank lines are skipped.
pub fn parse_agreement_tsv(text: &str, vocab: &Vocabulary) -> AgreementData {
    let mut data = AgreementData::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        match parse_agreement_row(raw, vocab) {
            Ok(inst) => data.instances.push(inst),
            Err(reason) => {
                log::warn!("agreement line {line_no} rejected: {reason}");
                data.rejected.push(RejectedRecord {
                    line: line_no,
                    reason,
                });
            }
        }
    }
    data
}

fn parse_agreement_row(
    raw: &str,
    vocab: &Vocabulary,
) -> std::result::Result<AgreementInstance, String> {
    let cols: Vec<&str> = raw.split('\t').collect();
    if cols.len() != 4 {
        return Err(format!(
            "expected 4 tab-separated columns, got {}",
            cols.len()
        ));
    }
    let good: Vec<&str> = cols[0].split_whitespace().collect();
    let bad: Vec<&str> = cols[1].split_whitespace().collect();
    let verb_position: usize = cols[2]
        .trim()
        .parse()
        .map_err(|_| format!("bad verb position `{}`", cols[2]))?;
    let n_attractors: usize = cols[3]
        .trim()
        .parse()
        .map_err(|_| format!("bad attractor count `{}`", cols[3]))?;
    if good.is_empty() {
        return Err("empty sentence".into());
    }
    if good.len() != bad.len() {
        return Err(format!(
            "variants differ in length ({} vs {})",
            good.len(),
            bad.len()
        ));
    }
    let diffs: Vec<usize> = (0..good.len()).filter(|&i| good[i] != bad[i]).collect();
    if diffs.len() != 1 {
        return Err(format!(
            "variants must differ at exactly one position, found {}",
            diffs.len()
        ));
    }
    if diffs[0] != verb_position {
        return Err(format!(
            "variants differ at position {} but verb position is {verb_position}",
            diffs[0]
        ));
    }
    let grammatical = vocab
        .encode_line(cols[0])
        .ok_or_else(|| "empty sentence".to_string())?;
    let ungrammatical = vocab
        .encode_line(cols[1])
        .ok_or_else(|| "empty sentence".to_string())?;
    if grammatical.len() != ungrammatical.len() {
        return Err("boundary tokens inside an agreement sentence".into());
    }
    let oov_verb =
        vocab.id(good[verb_position]).is_none() || vocab.id(bad[verb_position]).is_none();
    Ok(AgreementInstance {
        grammatical,
        ungrammatical,
        verb_position,
        n_attractors,
        oov_verb,
    })
}

pub fn load_agreement_data(path: &Path, vocab: &Vocabulary) -> Result<AgreementData> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_agreement_tsv(&text, vocab))
}

/// Attractor bucket: an exact count 0..=5 or the overflow bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bucket {
    Exact(usize),
    Overflow,
}

impl Bucket {
    pub fn of(n_attractors: usize) -> Self {
        if n_attractors <= MAX_EXACT_ATTRACTORS {
            Bucket::Exact(n_attractors)
        } else {
            Bucket::Overflow
        }
    }

    /// All buckets in report order.
    pub fn all() -> impl Iterator<Item = Bucket> {
        (0..=MAX_EXACT_ATTRACTORS)
            .map(Bucket::Exact)
            .chain(std::iter::once(Bucket::Overflow))
    }

    fn index(self) -> usize {
        match self {
            Bucket::Exact(n) => n,
            Bucket::Overflow => MAX_EXACT_ATTRACTORS + 1,
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bucket::Exact(n) => write!(f, "{n}"),
            Bucket::Overflow => write!(f, "{}+", MAX_EXACT_ATTRACTORS + 1),
        }
    }
}

/// Instances partitioned by attractor count.
#[derive(Debug, Clone)]
pub struct AttractorBuckets<'a> {
    buckets: Vec<Vec<&'a AgreementInstance>>,
}

impl<'a> AttractorBuckets<'a> {
    pub fn get(&self, bucket: Bucket) -> &[&'a AgreementInstance] {
        &self.buckets[bucket.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Bucket, &[&'a AgreementInstance])> {
        Bucket::all().map(move |b| (b, self.get(b)))
    }

    pub fn total(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }
}

pub fn bucket_by_attractors<'a, I>(instances: I) -> AttractorBuckets<'a>
where
    I: IntoIterator<Item = &'a AgreementInstance>,
{
    let mut buckets = vec![Vec::new(); MAX_EXACT_ATTRACTORS + 2];
    for inst in instances {
        buckets[Bucket::of(inst.n_attractors).index()].push(inst);
    }
    AttractorBuckets { buckets }
}
