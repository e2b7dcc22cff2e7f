//! Restricted-input sentence representations.
//!
//! Two views of a sentence are built here. The lemma view is a TF-IDF
//! vector over lemma unigrams and bigrams; the grammar view counts UPOS
//! tags, full DEPREL labels and `Key=Value` morphological features. Both
//! feature spaces are fitted on training data and frozen afterwards:
//! transforming evaluation data only reads them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conllu::{syntactic_words, Sentence};
use crate::sparse::SparseVector;
use crate::supervision::LabeledSentence;

pub const DEFAULT_MAX_FEATURES: usize = 5000;
pub const DEFAULT_NGRAM_MAX: usize = 2;
/// Name recorded with every TF-IDF space: raw term counts times smoothed
/// idf `ln((1+N)/(1+df)) + 1`, then L2 normalization.
pub const TFIDF_WEIGHTING: &str = "raw_tf*smooth_idf,l2";

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FeaturizeError {
    #[error("corpus contains no tokens")]
    EmptyCorpus,
    #[error("ngram_max must be at least 1")]
    InvalidNgramMax,
    #[error("max_features must be at least 1")]
    InvalidMaxFeatures,
    #[error("malformed feature space: {0}")]
    Malformed(String),
}

/// Lowercasing policy applied to lemmas before vectorization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Casing {
    /// Unicode default lowercasing (`İ` becomes `i̇`, `I` becomes `i`).
    #[default]
    Standard,
    /// Turkish dotted/dotless rules (`İ` → `i`, `I` → `ı`), default mapping
    /// for everything else.
    Turkish,
}

impl Casing {
    pub fn as_str(self) -> &'static str {
        match self {
            Casing::Standard => "standard",
            Casing::Turkish => "turkish",
        }
    }
}

pub fn lowercase(s: &str, casing: Casing) -> String {
    match casing {
        Casing::Standard => s.to_lowercase(),
        Casing::Turkish => {
            let mut out = String::with_capacity(s.len());
            for ch in s.chars() {
                match ch {
                    'I' => out.push('ı'),
                    'İ' => out.push('i'),
                    c => out.extend(c.to_lowercase()),
                }
            }
            out
        }
    }
}

/// Anything that can provide `(lemma, form)` pairs in token order.
pub trait LemmaSource {
    fn lemma_form_pairs(&self) -> Vec<(&str, &str)>;
}

impl LemmaSource for Sentence {
    fn lemma_form_pairs(&self) -> Vec<(&str, &str)> {
        syntactic_words(self)
            .iter()
            .map(|t| (t.lemma.as_str(), t.form.as_str()))
            .collect()
    }
}

impl LemmaSource for LabeledSentence {
    fn lemma_form_pairs(&self) -> Vec<(&str, &str)> {
        self.lemmas
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), self.forms.get(i).map_or("", String::as_str)))
            .collect()
    }
}

/// Normalized lemma tokens. Missing lemmas (empty or `_`) fall back to the
/// surface form.
pub fn lemma_text<S: LemmaSource + ?Sized>(s: &S, casing: Casing) -> Vec<String> {
    s.lemma_form_pairs()
        .into_iter()
        .filter_map(|(lemma, form)| {
            let source = if lemma.is_empty() || lemma == "_" {
                log::debug!("missing lemma, using form {form:?}");
                form
            } else {
                lemma
            };
            (!source.is_empty()).then(|| lowercase(source, casing))
        })
        .collect()
}

fn ngrams(doc: &[String], ngram_max: usize) -> impl Iterator<Item = String> + '_ {
    (1..=ngram_max).flat_map(move |n| doc.windows(n).map(|w| w.join(" ")))
}

/// Lemma n-gram vocabulary with document frequencies, frozen at fit time.
///
/// Terms are kept in lexicographic order; a term's position is its index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVocabulary")]
pub struct TfidfVocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    corpus_size: usize,
    max_features: usize,
    ngram_max: usize,
}

#[derive(Deserialize)]
struct RawVocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    corpus_size: usize,
    max_features: usize,
    ngram_max: usize,
}

impl TryFrom<RawVocabulary> for TfidfVocabulary {
    type Error = FeaturizeError;

    fn try_from(raw: RawVocabulary) -> Result<Self, Self::Error> {
        let bad = |m: &str| Err(FeaturizeError::Malformed(m.to_string()));
        if raw.terms.len() != raw.doc_freq.len() {
            return bad("terms and doc_freq differ in length");
        }
        if raw.terms.len() > raw.max_features {
            return bad("more terms than max_features");
        }
        if raw.terms.windows(2).any(|w| w[0] >= w[1]) {
            return bad("terms are not strictly sorted");
        }
        if raw.doc_freq.iter().any(|&d| d == 0 || d as usize > raw.corpus_size) {
            return bad("doc_freq outside [1, corpus_size]");
        }
        Ok(TfidfVocabulary {
            terms: raw.terms,
            doc_freq: raw.doc_freq,
            corpus_size: raw.corpus_size,
            max_features: raw.max_features,
            ngram_max: raw.ngram_max,
        })
    }
}

impl TfidfVocabulary {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn corpus_size(&self) -> usize {
        self.corpus_size
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn ngram_max(&self) -> usize {
        self.ngram_max
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    pub fn doc_freq(&self, term: &str) -> Option<u32> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    /// Smoothed inverse document frequency of the term at `index`.
    pub fn idf_at(&self, index: usize) -> f64 {
        let n = self.corpus_size as f64;
        let df = f64::from(self.doc_freq[index]);
        libm::log((1.0 + n) / (1.0 + df)) + 1.0
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf_at(i))
    }
}

/// Fits the vocabulary: all 1..=`ngram_max`-grams, capped at
/// `max_features` terms by descending document frequency with
/// lexicographic tie-breaking.
pub fn fit_tfidf(
    corpus: &[Vec<String>],
    max_features: usize,
    ngram_max: usize,
) -> Result<TfidfVocabulary, FeaturizeError> {
    if ngram_max == 0 {
        return Err(FeaturizeError::InvalidNgramMax);
    }
    if max_features == 0 {
        return Err(FeaturizeError::InvalidMaxFeatures);
    }
    if corpus.iter().all(Vec::is_empty) {
        return Err(FeaturizeError::EmptyCorpus);
    }
    let mut df: BTreeMap<String, u32> = BTreeMap::new();
    for doc in corpus {
        let unique: BTreeSet<String> = ngrams(doc, ngram_max).collect();
        for term in unique {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u32)> = df.into_iter().collect();
    // BTreeMap iteration is already lexicographic; a stable sort on df keeps it.
    ranked.sort_by_key(|t| core::cmp::Reverse(t.1));
    ranked.truncate(max_features);
    ranked.sort_by(|a, b| a.0.cmp(&b.0));
    let (terms, doc_freq) = ranked.into_iter().unzip();
    Ok(TfidfVocabulary {
        terms,
        doc_freq,
        corpus_size: corpus.len(),
        max_features,
        ngram_max,
    })
}

/// TF-IDF vector of a document, L2-normalized. Out-of-vocabulary terms are
/// ignored; a document with no known term maps to the zero vector.
pub fn tfidf_transform(doc: &[String], vocab: &TfidfVocabulary) -> SparseVector {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for term in ngrams(doc, vocab.ngram_max) {
        if let Some(i) = vocab.index_of(&term) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let pairs: Vec<(usize, f64)> = counts
        .into_iter()
        .map(|(i, tf)| (i, tf * vocab.idf_at(i)))
        .collect();
    let v = SparseVector::from_pairs(vocab.len(), pairs);
    let norm = v.l2_norm();
    if norm > 0.0 {
        v.scaled(1.0 / norm)
    } else {
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Channel {
    Upos,
    Deprel,
    Morph,
}

impl Channel {
    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Upos => "UPOS",
            Channel::Deprel => "DEPREL",
            Channel::Morph => "MORPH",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GrammarFeature {
    pub channel: Channel,
    pub name: String,
}

impl fmt::Display for GrammarFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.channel.as_str(), self.name)
    }
}

fn sentence_features(s: &Sentence) -> impl Iterator<Item = GrammarFeature> + '_ {
    syntactic_words(s).iter().flat_map(|t| {
        let upos = GrammarFeature {
            channel: Channel::Upos,
            name: t.upos.clone(),
        };
        let deprel = GrammarFeature {
            channel: Channel::Deprel,
            name: t.deprel.clone(),
        };
        let morph = t.feats.iter().map(|f| GrammarFeature {
            channel: Channel::Morph,
            name: f.to_string(),
        });
        [upos, deprel].into_iter().chain(morph)
    })
}

/// Channel-tagged UPOS / DEPREL / MORPH features seen in training, ordered
/// by channel then name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInventory")]
pub struct GrammarInventory {
    features: Vec<GrammarFeature>,
}

#[derive(Deserialize)]
struct RawInventory {
    features: Vec<GrammarFeature>,
}

impl TryFrom<RawInventory> for GrammarInventory {
    type Error = FeaturizeError;

    fn try_from(raw: RawInventory) -> Result<Self, Self::Error> {
        if raw.features.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FeaturizeError::Malformed("grammar features are not strictly sorted".into()));
        }
        Ok(GrammarInventory { features: raw.features })
    }
}

impl GrammarInventory {
    pub fn features(&self) -> &[GrammarFeature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn index_of(&self, feature: &GrammarFeature) -> Option<usize> {
        self.features.binary_search(feature).ok()
    }
}

pub fn fit_grammar_inventory<'a, I>(train: I) -> Result<GrammarInventory, FeaturizeError>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    let features: BTreeSet<GrammarFeature> = train.into_iter().flat_map(sentence_features).collect();
    if features.is_empty() {
        return Err(FeaturizeError::EmptyCorpus);
    }
    Ok(GrammarInventory {
        features: features.into_iter().collect(),
    })
}

/// Feature occurrences at transform time that the inventory does not know.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub seen: usize,
    pub unseen: BTreeMap<String, usize>,
}

impl Coverage {
    pub fn unseen_total(&self) -> usize {
        self.unseen.values().sum()
    }
}

pub fn grammar_vector(s: &Sentence, inv: &GrammarInventory) -> SparseVector {
    grammar_vector_with_coverage(s, inv, &mut Coverage::default())
}

/// Per-sentence feature counts; unknown features are tallied in `coverage`.
pub fn grammar_vector_with_coverage(
    s: &Sentence,
    inv: &GrammarInventory,
    coverage: &mut Coverage,
) -> SparseVector {
    let mut pairs = Vec::new();
    for f in sentence_features(s) {
        match inv.index_of(&f) {
            Some(i) => {
                coverage.seen += 1;
                pairs.push((i, 1.0));
            }
            None => *coverage.unseen.entry(f.to_string()).or_insert(0) += 1,
        }
    }
    SparseVector::from_pairs(inv.len(), pairs)
}

/// A fitted, frozen feature space together with its policy flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "snake_case")]
pub enum FeatureSpace {
    LemmaTfidf {
        casing: Casing,
        weighting: String,
        vocabulary: TfidfVocabulary,
    },
    Grammar { inventory: GrammarInventory },
}

impl FeatureSpace {
    pub fn lemma_tfidf(vocabulary: TfidfVocabulary, casing: Casing) -> FeatureSpace {
        FeatureSpace::LemmaTfidf {
            casing,
            weighting: TFIDF_WEIGHTING.to_string(),
            vocabulary,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            FeatureSpace::LemmaTfidf { vocabulary, .. } => vocabulary.len(),
            FeatureSpace::Grammar { inventory } => inventory.len(),
        }
    }

    /// SHA-256 over a canonical rendering of the space; models record it
    /// so they can refuse vectors from a different space.
    pub fn id(&self) -> String {
        let mut h = Sha256::new();
        match self {
            FeatureSpace::LemmaTfidf {
                casing,
                weighting,
                vocabulary,
            } => {
                h.update(format!(
                    "lemma_tfidf\n{}\n{}\n{}\n{}\n{}\n",
                    casing.as_str(),
                    weighting,
                    vocabulary.max_features,
                    vocabulary.ngram_max,
                    vocabulary.corpus_size
                ));
                for (t, df) in vocabulary.terms.iter().zip(&vocabulary.doc_freq) {
                    h.update(format!("{t}\t{df}\n"));
                }
            }
            FeatureSpace::Grammar { inventory } => {
                h.update("grammar\n");
                for f in &inventory.features {
                    h.update(format!("{f}\n"));
                }
            }
        }
        hex::encode(h.finalize())
    }
}
