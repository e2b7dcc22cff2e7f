//! Restricted-input light-verb-construction (LVC) detection for UD treebanks.
//!
//! The crate is `no_std` with `alloc`. It covers the whole algorithmic
//! pipeline and leaves file IO, configuration and the command line to the
//! `lvcprobe` companion crate:
//!
//! - [`conllu`]: CoNLL-U parsing and canonical serialization.
//! - [`supervision`]: weak LVC labels mined from `compound:lvc` and
//!   noun–verb `compound` arcs, manual-review application and dataset
//!   accounting.
//! - [`featurize`]: lemma n-gram TF-IDF vectors and grammar-only
//!   UPOS/DEPREL/MORPH count vectors over frozen feature spaces.
//! - [`logreg`]: class-weighted L2 logistic regression and stratified splits.
//! - [`calibrate`]: exhaustive threshold sweeps and τ selection.
//! - [`eval`]: split-wise diagnostic reporting (Random / NLVC / LVC).
#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod calibrate;
pub mod conllu;
pub mod eval;
pub mod featurize;
pub mod logreg;
pub mod sparse;
pub mod supervision;

mod label;

pub use calibrate::{pr_sweep, select_tau_max_f1, select_tau_precision_floor, ThresholdPoint};
pub use conllu::{parse_conllu, serialize_conllu, ParseMode, Sentence, Token, Treebank};
pub use eval::{evaluate_split, Condition, DiagnosticItem, SplitReport};
pub use featurize::{Casing, FeatureSpace, GrammarInventory, TfidfVocabulary};
pub use logreg::{ClassWeights, LogisticModel, SplitSpec};
pub use sparse::SparseVector;
pub use supervision::{DatasetStats, LabeledSentence, LvcCandidate};
