//! Synthetic English-like corpus with long-distance subject-verb agreement.
//!
//! Subjects may be followed by a chain of prepositional phrases whose nouns
//! usually share the subject's number, so the nearest noun is a good but
//! imperfect predictor of the verb form. A tri-gram model sees only the
//! nearest noun and therefore produces agreement errors after attractors,
//! while the agreement test set places only opposite-number nouns between
//! subject and verb.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::MAX_EXACT_ATTRACTORS;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, SYNTHETIC_STREAM};

pub const DEFAULT_SYNTH_SEED: u64 = 7;

const SINGULAR_DETS: &[&str] = &["this", "each", "every", "one"];
const PLURAL_DETS: &[&str] = &["these", "some", "many", "several", "few", "two"];
const NEUTRAL_DETS: &[&str] = &["the", "my", "our", "his", "her", "their"];

const NOUNS: &[(&str, &str)] = &[
    ("key", "keys"),
    ("table", "tables"),
    ("dog", "dogs"),
    ("cat", "cats"),
    ("author", "authors"),
    ("book", "books"),
    ("child", "children"),
    ("teacher", "teachers"),
    ("student", "students"),
    ("box", "boxes"),
    ("car", "cars"),
    ("house", "houses"),
    ("tree", "trees"),
    ("river", "rivers"),
    ("city", "cities"),
    ("letter", "letters"),
    ("window", "windows"),
    ("door", "doors"),
    ("painting", "paintings"),
    ("farmer", "farmers"),
    ("doctor", "doctors"),
    ("lawyer", "lawyers"),
    ("bird", "birds"),
    ("horse", "horses"),
    ("picture", "pictures"),
    ("garden", "gardens"),
    ("road", "roads"),
    ("bottle", "bottles"),
    ("chair", "chairs"),
    ("friend", "friends"),
    ("neighbor", "neighbors"),
    ("pilot", "pilots"),
    ("senator", "senators"),
    ("manager", "managers"),
    ("report", "reports"),
    ("song", "songs"),
    ("girl", "girls"),
    ("boy", "boys"),
    ("engineer", "engineers"),
    ("singer", "singers"),
    ("village", "villages"),
    ("island", "islands"),
];

const ADJECTIVES: &[&str] = &[
    "old", "new", "red", "small", "large", "quiet", "famous", "tall", "broken", "green", "happy",
    "young", "strange", "bright", "heavy", "empty", "busy", "clean", "dark", "warm",
];

const PREPOSITIONS: &[&str] = &[
    "on", "near", "behind", "under", "with", "beside", "above", "from", "by", "across",
];

const COPULAS: &[(&str, &str)] = &[("is", "are"), ("was", "were"), ("seems", "seem")];

const TRANSITIVE: &[(&str, &str)] = &[
    ("likes", "like"),
    ("sees", "see"),
    ("knows", "know"),
    ("finds", "find"),
    ("helps", "help"),
    ("visits", "visit"),
    ("follows", "follow"),
    ("admires", "admire"),
    ("watches", "watch"),
    ("remembers", "remember"),
    ("paints", "paint"),
    ("builds", "build"),
];

const INTRANSITIVE: &[(&str, &str)] = &[
    ("sleeps", "sleep"),
    ("laughs", "laugh"),
    ("waits", "wait"),
    ("smiles", "smile"),
    ("arrives", "arrive"),
    ("runs", "run"),
    ("works", "work"),
    ("sings", "sing"),
];

const PRE_VERB_ADVERBS: &[&str] = &["often", "rarely", "never", "always", "usually"];
const POST_VERB_ADVERBS: &[&str] = &["quickly", "slowly", "here", "today", "again"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub train_sentences: usize,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    /// Agreement instances per attractor count 0..=5.
    pub agreement_per_bucket: usize,
    /// Probability that a noun between subject and verb shares the
    /// subject's number in the running-text splits.
    pub attractor_match_prob: f64,
    /// Probability of adding each further prepositional phrase after the
    /// subject.
    pub pp_continue_prob: f64,
    pub relative_clause_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: DEFAULT_SYNTH_SEED,
            train_sentences: 2000,
            dev_sentences: 500,
            test_sentences: 500,
            agreement_per_bucket: 200,
            attractor_match_prob: 0.75,
            pp_continue_prob: 0.55,
            relative_clause_prob: 0.35,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    /// Agreement TSV rows (without trailing newline).
    pub agreement: Vec<String>,
}

pub const TRAIN_FILE: &str = "train.txt";
pub const DEV_FILE: &str = "dev.txt";
pub const TEST_FILE: &str = "test.txt";
pub const AGREEMENT_FILE: &str = "agreement.tsv";

impl SynthData {
    /// Writes the four files into `dir`, returning their paths.
    pub fn write_to(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            (TRAIN_FILE, &self.train),
            (DEV_FILE, &self.dev),
            (TEST_FILE, &self.test),
            (AGREEMENT_FILE, &self.agreement),
        ];
        let mut out = Vec::new();
        for (name, lines) in files {
            let path = dir.join(name);
            let mut text = lines.join("\n");
            text.push('\n');
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            out.push(path);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Number {
    Singular,
    Plural,
}

impl Number {
    fn flip(self) -> Self {
        match self {
            Number::Singular => Number::Plural,
            Number::Plural => Number::Singular,
        }
    }

    fn pick<'a>(self, pair: &(&'a str, &'a str)) -> &'a str {
        match self {
            Number::Singular => pair.0,
            Number::Plural => pair.1,
        }
    }
}

struct Generator<'c> {
    cfg: &'c SynthConfig,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn choose<'a>(&mut self, items: &[&'a str]) -> &'a str {
        items.choose(&mut self.rng).expect("nonempty word list")
    }

    fn coin(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn number(&mut self) -> Number {
        if self.coin(0.5) {
            Number::Singular
        } else {
            Number::Plural
        }
    }

    fn noun_phrase(&mut self, n: Number, out: &mut Vec<String>) {
        let specific = match n {
            Number::Singular => SINGULAR_DETS,
            Number::Plural => PLURAL_DETS,
        };
        let det = if self.coin(0.5) {
            self.choose(NEUTRAL_DETS)
        } else {
            self.choose(specific)
        };
        out.push(det.into());
        if self.coin(0.3) {
            let adj = self.choose(ADJECTIVES);
            out.push(adj.into());
        }
        let noun = *NOUNS.choose(&mut self.rng).expect("nonempty noun list");
        out.push(n.pick(&noun).into());
    }

    fn prep_phrase(&mut self, n: Number, out: &mut Vec<String>) {
        let prep = self.choose(PREPOSITIONS);
        out.push(prep.into());
        self.noun_phrase(n, out);
    }

    /// Verb phrase starting at the agreeing verb. Returns the verb index.
    fn verb_phrase(&mut self, n: Number, out: &mut Vec<String>) -> usize {
        if self.coin(0.15) {
            let adv = self.choose(PRE_VERB_ADVERBS);
            out.push(adv.into());
        }
        let verb_at = out.len();
        let kind: f64 = self.rng.gen();
        if kind < 0.35 {
            let cop = *COPULAS.choose(&mut self.rng).expect("nonempty");
            out.push(n.pick(&cop).into());
            if self.coin(0.6) {
                let adj = self.choose(ADJECTIVES);
                out.push(adj.into());
            } else {
                let m = self.number();
                self.prep_phrase(m, out);
            }
        } else if kind < 0.75 {
            let verb = *TRANSITIVE.choose(&mut self.rng).expect("nonempty");
            out.push(n.pick(&verb).into());
            let m = self.number();
            self.noun_phrase(m, out);
            if self.coin(0.25) {
                let m = self.number();
                self.prep_phrase(m, out);
            }
        } else {
            let verb = *INTRANSITIVE.choose(&mut self.rng).expect("nonempty");
            out.push(n.pick(&verb).into());
        }
        if self.coin(0.3) {
            let adv = self.choose(POST_VERB_ADVERBS);
            out.push(adv.into());
        }
        verb_at
    }

    fn running_sentence(&mut self) -> String {
        let mut out = Vec::new();
        let n = self.number();
        self.noun_phrase(n, &mut out);
        if self.coin(self.cfg.relative_clause_prob) {
            out.push("that".into());
            let verb = *TRANSITIVE.choose(&mut self.rng).expect("nonempty");
            out.push(n.pick(&verb).into());
            let m = self.intervening_number(n);
            self.noun_phrase(m, &mut out);
        }
        while self.coin(self.cfg.pp_continue_prob) {
            let m = self.intervening_number(n);
            self.prep_phrase(m, &mut out);
        }
        self.verb_phrase(n, &mut out);
        out.join(" ")
    }

    fn intervening_number(&mut self, subject: Number) -> Number {
        if self.coin(self.cfg.attractor_match_prob) {
            subject
        } else {
            subject.flip()
        }
    }

    /// One agreement row with exactly `k` opposite-number nouns between
    /// subject and verb.
    fn agreement_row(&mut self, k: usize) -> String {
        let mut good = Vec::new();
        let n = self.number();
        self.noun_phrase(n, &mut good);
        for _ in 0..k {
            self.prep_phrase(n.flip(), &mut good);
        }
        let verb_at = self.verb_phrase(n, &mut good);
        let mut bad = good.clone();
        bad[verb_at] = flip_verb(&good[verb_at])
            .expect("generated verb is in the lexicon")
            .into();
        format!("{}\t{}\t{verb_at}\t{k}", good.join(" "), bad.join(" "))
    }
}

/// The other number's form of an agreeing verb.
pub fn flip_verb(verb: &str) -> Option<&'static str> {
    COPULAS
        .iter()
        .chain(TRANSITIVE)
        .chain(INTRANSITIVE)
        .find_map(|&(sg, pl)| {
            if verb == sg {
                Some(pl)
            } else if verb == pl {
                Some(sg)
            } else {
                None
            }
        })
}

/// Deterministically generates every split from `cfg.seed`.
pub fn generate(cfg: &SynthConfig) -> SynthData {
    let mut g = Generator {
        cfg,
        rng: stream_rng(cfg.seed, SYNTHETIC_STREAM),
    };
    let train = (0..cfg.train_sentences)
        .map(|_| g.running_sentence())
        .collect();
    let dev = (0..cfg.dev_sentences)
        .map(|_| g.running_sentence())
        .collect();
    let test = (0..cfg.test_sentences)
        .map(|_| g.running_sentence())
        .collect();
    let agreement = (0..=MAX_EXACT_ATTRACTORS)
        .flat_map(|k| std::iter::repeat_n(k, cfg.agreement_per_bucket))
        .collect::<Vec<_>>()
        .into_iter()
        .map(|k| g.agreement_row(k))
        .collect();
    SynthData {
        train,
        dev,
        test,
        agreement,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_agreement_tsv, ReservedTokens, Vocabulary};
    use std::collections::BTreeSet;

    fn small() -> SynthConfig {
        SynthConfig {
            train_sentences: 300,
            dev_sentences: 50,
            test_sentences: 50,
            agreement_per_bucket: 20,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate(&small()), generate(&small()));
        let other = SynthConfig { seed: 8, ..small() };
        assert_ne!(generate(&small()).train, generate(&other).train);
    }

    #[test]
    fn agreement_rows_parse_and_are_balanced() {
        let data = generate(&small());
        let vocab = Vocabulary::build(&data.train, 1, &ReservedTokens::default()).unwrap();
        let parsed = parse_agreement_tsv(&data.agreement.join("\n"), &vocab);
        assert!(parsed.rejected.is_empty(), "{:?}", parsed.rejected);
        assert_eq!(parsed.instances.len(), 6 * 20);
        for k in 0..=5 {
            assert_eq!(
                parsed
                    .instances
                    .iter()
                    .filter(|i| i.n_attractors == k)
                    .count(),
                20
            );
        }
    }

    #[test]
    fn lexicon_has_no_duplicates_and_flip_is_involutive() {
        let mut words = BTreeSet::new();
        let all = SINGULAR_DETS
            .iter()
            .chain(PLURAL_DETS)
            .chain(NEUTRAL_DETS)
            .chain(ADJECTIVES)
            .chain(PREPOSITIONS)
            .chain(PRE_VERB_ADVERBS)
            .chain(POST_VERB_ADVERBS)
            .copied()
            .chain(
                NOUNS
                    .iter()
                    .chain(COPULAS)
                    .chain(TRANSITIVE)
                    .chain(INTRANSITIVE)
                    .flat_map(|&(a, b)| [a, b]),
            )
            .chain(["that"]);
        for w in all {
            assert!(words.insert(w), "duplicate word {w}");
        }
        assert!((180..=200).contains(&words.len()), "{}", words.len());
        for &(sg, pl) in COPULAS.iter().chain(TRANSITIVE) {
            assert_eq!(flip_verb(sg), Some(pl));
            assert_eq!(flip_verb(flip_verb(sg).unwrap()), Some(sg));
        }
        assert_eq!(flip_verb("table"), None);
    }
}
