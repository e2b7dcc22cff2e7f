//! Weak sentence-level LVC labels mined from dependency annotations.
//!
//! Treebanks that annotate `compound:lvc` anywhere are mined with that
//! relation only. All others fall back to plain `compound` arcs from a NOUN
//! dependent to a VERB governor. Candidates then go through manual review;
//! a sentence whose candidates were all rejected is deleted from the
//! dataset rather than relabelled negative.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{syntactic_words, Sentence, Treebank};

pub const EXPLICIT_LVC_DEPREL: &str = "compound:lvc";
pub const COMPOUND_DEPREL: &str = "compound";

/// Which extraction rule produced a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    ExplicitLvc,
    NvCompound,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::ExplicitLvc => "explicit_lvc",
            Relation::NvCompound => "nv_compound",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceKey {
    pub treebank: String,
    pub sent_id: String,
}

/// Stable identity of a candidate across re-extraction and review.
/// Field order gives the review-sheet sort order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CandidateKey {
    pub treebank: String,
    pub sent_id: String,
    pub dep_id: u32,
    pub head_id: u32,
}

impl CandidateKey {
    pub fn sentence(&self) -> SentenceKey {
        SentenceKey {
            treebank: self.treebank.clone(),
            sent_id: self.sent_id.clone(),
        }
    }
}

impl core::fmt::Display for CandidateKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}/{}/{}->{}", self.treebank, self.sent_id, self.dep_id, self.head_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LvcCandidate {
    pub treebank: String,
    pub sent_id: String,
    /// Nominal dependent.
    pub dep_id: u32,
    /// Verbal governor.
    pub head_id: u32,
    pub dep_lemma: String,
    pub head_lemma: String,
    pub relation: Relation,
    /// Sentence text shown to reviewers.
    pub snippet: String,
}

impl LvcCandidate {
    pub fn key(&self) -> CandidateKey {
        CandidateKey {
            treebank: self.treebank.clone(),
            sent_id: self.sent_id.clone(),
            dep_id: self.dep_id,
            head_id: self.head_id,
        }
    }

    fn from_arc(treebank: &str, s: &Sentence, dep: u32, head: u32, relation: Relation) -> LvcCandidate {
        let lemma = |id| s.token(id).map(|t| t.lemma.clone()).unwrap_or_default();
        LvcCandidate {
            treebank: treebank.to_string(),
            sent_id: s.sent_id.clone(),
            dep_id: dep,
            head_id: head,
            dep_lemma: lemma(dep),
            head_lemma: lemma(head),
            relation,
            snippet: s.text.clone(),
        }
    }
}

/// Candidates from `compound:lvc` arcs (exact, case-sensitive), in token
/// order. Arcs attached to the root are skipped.
pub fn extract_explicit_lvc(treebank: &str, s: &Sentence) -> Vec<LvcCandidate> {
    syntactic_words(s)
        .iter()
        .filter(|t| t.deprel == EXPLICIT_LVC_DEPREL)
        .filter(|t| {
            if t.head == 0 {
                log::warn!(
                    "{treebank}/{}: compound:lvc on root token {}; skipped",
                    s.sent_id,
                    t.id
                );
            }
            t.head != 0
        })
        .map(|t| LvcCandidate::from_arc(treebank, s, t.id, t.head, Relation::ExplicitLvc))
        .collect()
}

/// Candidates from bare `compound` arcs with a NOUN dependent and a VERB
/// governor, in token order.
pub fn extract_nv_compound(treebank: &str, s: &Sentence) -> Vec<LvcCandidate> {
    syntactic_words(s)
        .iter()
        .filter(|t| t.deprel == COMPOUND_DEPREL && t.upos == "NOUN")
        .filter(|t| s.token(t.head).is_some_and(|h| h.upos == "VERB"))
        .map(|t| LvcCandidate::from_arc(treebank, s, t.id, t.head, Relation::NvCompound))
        .collect()
}

/// Picks the rule for a treebank: explicit when any `compound:lvc` arc
/// exists, noun–verb fallback otherwise.
pub fn choose_rule(tb: &Treebank) -> Relation {
    let explicit = tb
        .sentences
        .iter()
        .flat_map(syntactic_words)
        .any(|t| t.deprel == EXPLICIT_LVC_DEPREL);
    if explicit {
        Relation::ExplicitLvc
    } else {
        Relation::NvCompound
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreebankExtraction {
    pub treebank: String,
    pub rule: Relation,
    pub sentences: usize,
    pub candidate_sentences: usize,
    pub candidates: Vec<LvcCandidate>,
}

pub fn extract_treebank(tb: &Treebank) -> TreebankExtraction {
    let rule = choose_rule(tb);
    let mut candidates = Vec::new();
    let mut candidate_sentences = 0;
    for s in &tb.sentences {
        let found = match rule {
            Relation::ExplicitLvc => extract_explicit_lvc(&tb.name, s),
            Relation::NvCompound => extract_nv_compound(&tb.name, s),
        };
        if !found.is_empty() {
            candidate_sentences += 1;
        }
        candidates.extend(found);
    }
    TreebankExtraction {
        treebank: tb.name.clone(),
        rule,
        sentences: tb.sentences.len(),
        candidate_sentences,
        candidates,
    }
}

/// Sorts candidates by key and drops repeated keys, keeping the first.
/// Returns the ordered list and the number of duplicates removed.
pub fn review_order(candidates: &[LvcCandidate]) -> (Vec<LvcCandidate>, usize) {
    let mut by_key: BTreeMap<CandidateKey, &LvcCandidate> = BTreeMap::new();
    let mut duplicates = 0;
    for c in candidates {
        match by_key.entry(c.key()) {
            alloc::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(c);
            }
            alloc::collections::btree_map::Entry::Occupied(slot) => {
                log::warn!("duplicate candidate {}; deduplicated", slot.key());
                duplicates += 1;
            }
        }
    }
    (by_key.into_values().cloned().collect(), duplicates)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Keep,
    Remove,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub key: CandidateKey,
    pub verdict: Verdict,
    pub annotator: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SupervisionError {
    #[error("review decisions reference unknown candidates: {}", list(.0))]
    UnknownCandidates(Vec<CandidateKey>),
    #[error("inconsistent counts: total {total}, candidates {candidates}, removed {removed}")]
    InconsistentCounts {
        total: usize,
        candidates: usize,
        removed: usize,
    },
}

fn list(keys: &[CandidateKey]) -> String {
    keys.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReviewOutcome {
    pub kept: Vec<LvcCandidate>,
    pub removed: Vec<LvcCandidate>,
    /// Sentences all of whose candidates were rejected.
    pub removed_sentence_keys: BTreeSet<SentenceKey>,
}

/// Applies reviewer verdicts. Undecided candidates are kept; a candidate
/// with any `remove` verdict is removed.
pub fn apply_review(
    candidates: &[LvcCandidate],
    decisions: &[ReviewDecision],
) -> Result<ReviewOutcome, SupervisionError> {
    let known: BTreeSet<CandidateKey> = candidates.iter().map(LvcCandidate::key).collect();
    let unknown: BTreeSet<CandidateKey> = decisions
        .iter()
        .filter(|d| !known.contains(&d.key))
        .map(|d| d.key.clone())
        .collect();
    if !unknown.is_empty() {
        return Err(SupervisionError::UnknownCandidates(unknown.into_iter().collect()));
    }
    let rejected: BTreeSet<&CandidateKey> = decisions
        .iter()
        .filter(|d| d.verdict == Verdict::Remove)
        .map(|d| &d.key)
        .collect();

    let mut outcome = ReviewOutcome::default();
    let mut surviving: BTreeMap<SentenceKey, usize> = BTreeMap::new();
    for c in candidates {
        let key = c.key();
        let count = surviving.entry(key.sentence()).or_insert(0);
        if rejected.contains(&key) {
            outcome.removed.push(c.clone());
        } else {
            *count += 1;
            outcome.kept.push(c.clone());
        }
    }
    outcome.removed_sentence_keys = surviving
        .into_iter()
        .filter(|&(_, n)| n == 0)
        .map(|(k, _)| k)
        .collect();
    Ok(outcome)
}

/// One dataset row: the lemma sequence of a sentence with its weak label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub treebank: String,
    pub sent_id: String,
    pub surface_text: String,
    pub lemmas: Vec<String>,
    /// Surface forms aligned with `lemmas`, used when a lemma is missing.
    #[serde(default)]
    pub forms: Vec<String>,
    #[serde(with = "crate::label")]
    pub label: bool,
    pub candidates: Vec<CandidateKey>,
}

impl LabeledSentence {
    pub fn key(&self) -> SentenceKey {
        SentenceKey {
            treebank: self.treebank.clone(),
            sent_id: self.sent_id.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub total_sentences: usize,
    pub candidate_sentences: usize,
    pub removed_sentences: usize,
    pub retained_sentences: usize,
    pub positive_sentences: usize,
}

impl DatasetStats {
    /// Derives retained and positive counts from the three primary counts.
    pub fn from_counts(total: usize, candidates: usize, removed: usize) -> Result<DatasetStats, SupervisionError> {
        if removed > candidates || candidates > total {
            return Err(SupervisionError::InconsistentCounts {
                total,
                candidates,
                removed,
            });
        }
        Ok(DatasetStats {
            total_sentences: total,
            candidate_sentences: candidates,
            removed_sentences: removed,
            retained_sentences: total - removed,
            positive_sentences: candidates - removed,
        })
    }

    /// Both accounting identities hold.
    pub fn is_consistent(&self) -> bool {
        self.removed_sentences <= self.total_sentences
            && self.removed_sentences <= self.candidate_sentences
            && self.retained_sentences == self.total_sentences - self.removed_sentences
            && self.positive_sentences == self.candidate_sentences - self.removed_sentences
    }
}

/// Labels every surviving sentence: 1 iff a kept candidate references it.
/// Sentences in `removed_sentence_keys` are dropped.
pub fn assemble_dataset(
    treebanks: &[Treebank],
    kept: &[LvcCandidate],
    removed_sentence_keys: &BTreeSet<SentenceKey>,
) -> (Vec<LabeledSentence>, DatasetStats) {
    let mut by_sentence: BTreeMap<SentenceKey, Vec<CandidateKey>> = BTreeMap::new();
    for c in kept {
        by_sentence.entry(c.key().sentence()).or_default().push(c.key());
    }
    let mut rows = Vec::new();
    let (mut total, mut candidates, mut removed) = (0, 0, 0);
    for tb in treebanks {
        for s in &tb.sentences {
            total += 1;
            let key = SentenceKey {
                treebank: tb.name.clone(),
                sent_id: s.sent_id.clone(),
            };
            if removed_sentence_keys.contains(&key) {
                removed += 1;
                candidates += 1;
                continue;
            }
            let cands = by_sentence.get(&key).cloned().unwrap_or_default();
            if !cands.is_empty() {
                candidates += 1;
            }
            let words = syntactic_words(s);
            rows.push(LabeledSentence {
                treebank: tb.name.clone(),
                sent_id: s.sent_id.clone(),
                surface_text: s.text.clone(),
                lemmas: words.iter().map(|t| t.lemma.clone()).collect(),
                forms: words.iter().map(|t| t.form.clone()).collect(),
                label: !cands.is_empty(),
                candidates: cands,
            });
        }
    }
    let stats = DatasetStats::from_counts(total, candidates, removed)
        .expect("counts accumulated from a single pass are consistent");
    debug_assert_eq!(stats.positive_sentences, rows.iter().filter(|r| r.label).count());
    (rows, stats)
}
