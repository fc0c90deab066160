//! Binary bag-of-words features over a shared dictionary.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::rado::{Dataset, Label, RadoError};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("no documents")]
    Empty,
    #[error("{docs} documents but {labels} labels")]
    CountMismatch { docs: usize, labels: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("keyword pools must be disjoint and non-empty")]
    BadPools,
    #[error(transparent)]
    Rado(#[from] RadoError),
    #[error("{0}")]
    Io(String),
}

/// Lowercases, splits on anything that is not alphanumeric and drops tokens
/// shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Distinct tokens of a corpus; this is what a peer discloses to build the
/// shared dictionary.
pub fn token_set(corpus: &LabeledCorpus) -> BTreeSet<String> {
    corpus.documents().iter().flat_map(|d| tokenize(d)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dictionary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Dictionary {
    /// Sorted, deduplicated, lowercased.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let set: BTreeSet<String> = tokens.into_iter().map(|t| t.as_ref().to_lowercase()).collect();
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn to_text(&self) -> String {
        self.tokens.iter().map(|t| format!("{t}\n")).collect()
    }

    pub fn from_text(text: &str) -> Self {
        Self::from_tokens(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        fs::write(path, self.to_text()).map_err(|e| TextError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        Ok(Self::from_text(
            &fs::read_to_string(path).map_err(|e| TextError::Io(e.to_string()))?,
        ))
    }
}

/// Union of the token sets of every corpus.
pub fn build_dictionary(corpora: &[&LabeledCorpus]) -> Result<Dictionary, TextError> {
    if corpora.is_empty() || corpora.iter().all(|c| c.is_empty()) {
        return Err(TextError::Empty);
    }
    Ok(Dictionary::from_tokens(corpora.iter().flat_map(|c| token_set(c))))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledCorpus {
    docs: Vec<String>,
    labels: Vec<Label>,
}

impl LabeledCorpus {
    pub fn new(docs: Vec<String>, labels: Vec<Label>) -> Result<Self, TextError> {
        if docs.len() != labels.len() {
            return Err(TextError::CountMismatch {
                docs: docs.len(),
                labels: labels.len(),
            });
        }
        Ok(Self { docs, labels })
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn documents(&self) -> &[String] {
        &self.docs
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// One document per line: `+1` or `-1`, a tab, then the text.
    pub fn to_text(&self) -> String {
        self.docs
            .iter()
            .zip(&self.labels)
            .map(|(d, l)| format!("{l}\t{}\n", d.replace(['\n', '\t'], " ")))
            .collect()
    }

    pub fn from_text(text: &str) -> Result<Self, TextError> {
        let mut docs = Vec::new();
        let mut labels = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (label, doc) = line.split_once('\t').ok_or_else(|| TextError::Parse {
                line: i + 1,
                msg: "missing tab after label".into(),
            })?;
            let label = match label.trim() {
                "+1" | "1" => Label::Positive,
                "-1" => Label::Negative,
                other => {
                    return Err(TextError::Parse {
                        line: i + 1,
                        msg: format!("label must be +1 or -1, got {other:?}"),
                    })
                }
            };
            labels.push(label);
            docs.push(doc.to_string());
        }
        Self::new(docs, labels)
    }

    pub fn save(&self, path: &Path) -> Result<(), TextError> {
        fs::write(path, self.to_text()).map_err(|e| TextError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        Self::from_text(&fs::read_to_string(path).map_err(|e| TextError::Io(e.to_string()))?)
    }
}

/// A peer's vectorized corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalText<T> {
    pub dataset: Dataset<T>,
    /// `f_p`: features present in at least one local document.
    pub presence: Vec<bool>,
    /// Tokens dropped because the dictionary does not contain them.
    pub out_of_vocabulary: usize,
}

pub fn local_text<T: Scalar>(dict: &Dictionary, corpus: &LabeledCorpus) -> Result<LocalText<T>, TextError> {
    if corpus.is_empty() {
        return Err(TextError::Empty);
    }
    let mut rows = Vec::with_capacity(corpus.len());
    let mut presence = vec![false; dict.len()];
    let mut oov = 0;
    for doc in corpus.documents() {
        let mut row = vec![T::zero(); dict.len()];
        for tok in tokenize(doc) {
            match dict.index_of(&tok) {
                Some(j) => {
                    row[j] = T::one();
                    presence[j] = true;
                }
                None => oov += 1,
            }
        }
        rows.push(row);
    }
    Ok(LocalText {
        dataset: Dataset::from_rows(rows, corpus.labels().to_vec())?,
        presence,
        out_of_vocabulary: oov,
    })
}

/// Keyword pools for the synthetic corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassPools {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    /// Label-independent words mixed into every document.
    pub filler: Vec<String>,
}

impl ClassPools {
    pub fn new(positive: &[&str], negative: &[&str], filler: &[&str]) -> Result<Self, TextError> {
        let owned = |v: &[&str]| v.iter().map(|s| s.to_lowercase()).collect::<Vec<_>>();
        let pools = Self {
            positive: owned(positive),
            negative: owned(negative),
            filler: owned(filler),
        };
        let pos: BTreeSet<_> = pools.positive.iter().collect();
        let overlaps = pools.negative.iter().chain(&pools.filler).any(|t| pos.contains(t))
            || pools.negative.iter().any(|t| pools.filler.contains(t));
        if pools.positive.is_empty() || pools.negative.is_empty() || overlaps {
            return Err(TextError::BadPools);
        }
        Ok(pools)
    }

    /// A small clinical-flavoured vocabulary.
    pub fn clinical() -> Self {
        Self::new(
            &[
                "fever",
                "infection",
                "antibiotic",
                "sepsis",
                "cough",
                "pneumonia",
                "culture",
                "inflammation",
                "wound",
                "abscess",
                "viral",
                "bacterial",
            ],
            &[
                "fracture",
                "sprain",
                "cast",
                "orthopedic",
                "xray",
                "bruise",
                "splint",
                "dislocation",
                "tendon",
                "ligament",
                "crutches",
                "bone",
            ],
            &[
                "patient",
                "admitted",
                "reports",
                "history",
                "review",
                "follow",
                "clinic",
                "noted",
                "plan",
                "today",
                "stable",
                "discharged",
            ],
        )
        .expect("built-in pools are disjoint")
    }
}

/// `docs_per_class` documents per label. Each of the class tokens in a
/// document is replaced by one from the other class with probability `noise`.
pub fn synth_corpus(pools: &ClassPools, docs_per_class: usize, noise: f64, seed: u64) -> LabeledCorpus {
    const CLASS_TOKENS: usize = 6;
    const FILLER_TOKENS: usize = 4;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut docs = Vec::with_capacity(2 * docs_per_class);
    let mut labels = Vec::with_capacity(2 * docs_per_class);
    for i in 0..2 * docs_per_class {
        let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
        let (own, other) = match label {
            Label::Positive => (&pools.positive, &pools.negative),
            Label::Negative => (&pools.negative, &pools.positive),
        };
        let mut words: Vec<&str> = Vec::with_capacity(CLASS_TOKENS + FILLER_TOKENS);
        for _ in 0..CLASS_TOKENS {
            let pool = if rng.gen_bool(noise.clamp(0.0, 1.0)) {
                other
            } else {
                own
            };
            words.push(pool.choose(&mut rng).expect("non-empty pool"));
        }
        for _ in 0..FILLER_TOKENS {
            if let Some(w) = pools.filler.choose(&mut rng) {
                words.push(w);
            }
        }
        words.shuffle(&mut rng);
        docs.push(words.join(" "));
        labels.push(label);
    }
    LabeledCorpus { docs, labels }
}
