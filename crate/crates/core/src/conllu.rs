//! CoNLL-U reading and writing.
//!
//! Only basic dependency trees are modelled. Empty nodes (`n.m` ids) are
//! counted and dropped; multiword ranges (`n-m` ids) are kept separately
//! from the syntactic words so that they never enter a feature count. DEPS
//! and MISC are carried as opaque strings for round-tripping.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How malformed input is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// The first malformed line or sentence aborts parsing.
    Strict,
    /// Malformed lines are skipped, invalid sentences dropped, both logged.
    Lenient,
}

/// A single `Key=Value` morphological feature.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Feature {
    pub key: String,
    pub value: String,
}

impl Feature {
    /// Parses `Key=Value`. Exactly one `=` with non-empty sides is accepted.
    pub fn parse(s: &str) -> Option<Feature> {
        let (key, value) = s.split_once('=')?;
        if key.is_empty() || value.is_empty() || value.contains('=') {
            return None;
        }
        Some(Feature {
            key: key.to_string(),
            value: value.to_string(),
        })
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.key, self.value)
    }
}

/// A syntactic word (a token line with an integer id).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub id: u32,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: Vec<Feature>,
    /// Governor id, 0 for the root.
    pub head: u32,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// Minimal token with underscores in the unused columns.
    pub fn new(id: u32, form: &str, lemma: &str, upos: &str, head: u32, deprel: &str) -> Token {
        Token {
            id,
            form: form.to_string(),
            lemma: lemma.to_string(),
            upos: upos.to_string(),
            xpos: "_".to_string(),
            feats: Vec::new(),
            head,
            deprel: deprel.to_string(),
            deps: "_".to_string(),
            misc: "_".to_string(),
        }
    }

    pub fn with_feats(mut self, feats: &str) -> Token {
        self.feats = parse_feats(feats).expect("valid FEATS literal");
        self
    }

    fn space_after(&self) -> bool {
        !self.misc.split('|').any(|m| m == "SpaceAfter=No")
    }
}

/// A multiword token line (`start-end`). Carries no lemma, tag or head.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiwordRange {
    pub start: u32,
    pub end: u32,
    pub form: String,
    pub misc: String,
}

/// A sentence-level comment line.
///
/// `sent_id` and `text` comments are lifted into [`Sentence`] fields and
/// only their position is kept here.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comment {
    SentId,
    Text,
    Other(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sent_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub ranges: Vec<MultiwordRange>,
    pub comments: Vec<Comment>,
}

impl Sentence {
    /// Builds a sentence from tokens, deriving the surface text.
    pub fn new(sent_id: &str, tokens: Vec<Token>) -> Sentence {
        let mut s = Sentence {
            sent_id: sent_id.to_string(),
            text: String::new(),
            tokens,
            ranges: Vec::new(),
            comments: alloc::vec![Comment::SentId, Comment::Text],
        };
        s.text = s.derived_text();
        s
    }

    /// Number of tokens attached to the artificial root.
    pub fn root_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.head == 0).count()
    }

    pub fn token(&self, id: u32) -> Option<&Token> {
        id.checked_sub(1)
            .and_then(|i| self.tokens.get(i as usize))
            .filter(|t| t.id == id)
    }

    /// Surface text rebuilt from forms, using multiword forms where present
    /// and honouring `SpaceAfter=No`.
    pub fn derived_text(&self) -> String {
        let mut out = String::new();
        let mut i = 0;
        while i < self.tokens.len() {
            let tok = &self.tokens[i];
            let (form, space, next) = match self.ranges.iter().find(|r| r.start == tok.id) {
                Some(r) => {
                    let space = !r.misc.split('|').any(|m| m == "SpaceAfter=No");
                    let skip = (r.end - r.start + 1) as usize;
                    (r.form.as_str(), space, i + skip)
                }
                None => (tok.form.as_str(), tok.space_after(), i + 1),
            };
            out.push_str(form);
            if space && next < self.tokens.len() {
                out.push(' ');
            }
            i = next;
        }
        out
    }

    fn validate(&self) -> Result<(), ErrorKind> {
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.id as usize != i + 1 {
                return Err(ErrorKind::NonConsecutiveIds);
            }
        }
        let n = self.tokens.len() as u32;
        for tok in &self.tokens {
            if tok.head > n {
                return Err(ErrorKind::DanglingHead {
                    id: tok.id,
                    head: tok.head,
                });
            }
        }
        for r in &self.ranges {
            if r.end > n {
                return Err(ErrorKind::BadRange(format!("{}-{}", r.start, r.end)));
            }
        }
        Ok(())
    }
}

/// Syntactic words of a sentence: integer-id tokens in order, without
/// multiword ranges or empty nodes.
pub fn syntactic_words(s: &Sentence) -> &[Token] {
    &s.tokens
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Treebank {
    pub name: String,
    pub sentences: Vec<Sentence>,
}

impl Treebank {
    pub fn sentence(&self, sent_id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.sent_id == sent_id)
    }
}

/// Bookkeeping from a parse: what was skipped and what looks anomalous.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub sentences: usize,
    pub empty_nodes_skipped: usize,
    pub malformed_lines_skipped: usize,
    pub sentences_dropped: usize,
    /// Sentences kept despite not having exactly one root.
    pub root_anomalies: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ParseOutcome {
    pub treebank: Treebank,
    pub report: ParseReport,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ErrorKind {
    #[error("expected 10 tab-separated columns, found {0}")]
    ColumnCount(usize),
    #[error("empty column {0}")]
    EmptyColumn(usize),
    #[error("invalid token id {0:?}")]
    BadId(String),
    #[error("invalid head {0:?}")]
    BadHead(String),
    #[error("token {0} is its own head")]
    SelfHead(u32),
    #[error("duplicate token id {0}")]
    DuplicateId(u32),
    #[error("invalid FEATS entry {0:?}")]
    BadFeature(String),
    #[error("invalid multiword range {0:?}")]
    BadRange(String),
    #[error("token ids are not 1..n consecutive")]
    NonConsecutiveIds,
    #[error("token {id} points to missing head {head}")]
    DanglingHead { id: u32, head: u32 },
    #[error("sentence has {0} roots")]
    RootCount(usize),
    #[error("sentence has no tokens")]
    NoTokens,
    #[error("duplicate sent_id {0:?}")]
    DuplicateSentId(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ConlluError {
    /// 1-based line number (the first line of the sentence for
    /// sentence-level problems).
    pub line: usize,
    pub kind: ErrorKind,
}

/// Parses a `|`-separated FEATS column (`_` means no features).
pub fn parse_feats(col: &str) -> Result<Vec<Feature>, ErrorKind> {
    if col == "_" {
        return Ok(Vec::new());
    }
    col.split('|')
        .map(|f| Feature::parse(f).ok_or_else(|| ErrorKind::BadFeature(f.to_string())))
        .collect()
}

enum Line {
    Word(Token),
    Range(MultiwordRange),
    EmptyNode,
}

fn parse_line(line: &str) -> Result<Line, ErrorKind> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(ErrorKind::ColumnCount(cols.len()));
    }
    if let Some(i) = cols.iter().position(|c| c.is_empty()) {
        return Err(ErrorKind::EmptyColumn(i + 1));
    }
    let id = cols[0];
    if let Some((a, b)) = id.split_once('-') {
        let bad = || ErrorKind::BadRange(id.to_string());
        let start: u32 = a.parse().map_err(|_| bad())?;
        let end: u32 = b.parse().map_err(|_| bad())?;
        if start == 0 || start >= end {
            return Err(bad());
        }
        return Ok(Line::Range(MultiwordRange {
            start,
            end,
            form: cols[1].to_string(),
            misc: cols[9].to_string(),
        }));
    }
    if id.contains('.') {
        return Ok(Line::EmptyNode);
    }
    let id: u32 = id
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| ErrorKind::BadId(id.to_string()))?;
    let head: u32 = cols[6]
        .parse()
        .map_err(|_| ErrorKind::BadHead(cols[6].to_string()))?;
    if head == id {
        return Err(ErrorKind::SelfHead(id));
    }
    Ok(Line::Word(Token {
        id,
        form: cols[1].to_string(),
        lemma: cols[2].to_string(),
        upos: cols[3].to_string(),
        xpos: cols[4].to_string(),
        feats: parse_feats(cols[5])?,
        head,
        deprel: cols[7].to_string(),
        deps: cols[8].to_string(),
        misc: cols[9].to_string(),
    }))
}

struct Builder<'a> {
    name: &'a str,
    mode: ParseMode,
    report: ParseReport,
    sentences: Vec<Sentence>,
    seen_ids: BTreeSet<String>,
}

impl Builder<'_> {
    fn line_error(&mut self, line: usize, kind: ErrorKind) -> Result<(), ConlluError> {
        match self.mode {
            ParseMode::Strict => Err(ConlluError { line, kind }),
            ParseMode::Lenient => {
                log::warn!("{}: line {}: {}; line skipped", self.name, line, kind);
                self.report.malformed_lines_skipped += 1;
                Ok(())
            }
        }
    }

    fn sentence_error(&mut self, line: usize, kind: ErrorKind) -> Result<(), ConlluError> {
        match self.mode {
            ParseMode::Strict => Err(ConlluError { line, kind }),
            ParseMode::Lenient => {
                log::warn!("{}: sentence at line {}: {}; sentence dropped", self.name, line, kind);
                self.report.sentences_dropped += 1;
                Ok(())
            }
        }
    }

    fn block(&mut self, first_line: usize, lines: &[&str]) -> Result<(), ConlluError> {
        let mut comments = Vec::new();
        let mut sent_id = None;
        let mut text = None;
        let mut tokens: Vec<Token> = Vec::new();
        let mut ranges = Vec::new();
        let mut ids = BTreeSet::new();

        for (offset, raw) in lines.iter().enumerate() {
            let lineno = first_line + offset;
            if let Some(body) = raw.strip_prefix('#') {
                let body = body.trim_start();
                if let Some(v) = comment_value(body, "sent_id") {
                    sent_id = Some(v.to_string());
                    comments.push(Comment::SentId);
                } else if let Some(v) = comment_value(body, "text") {
                    text = Some(v.to_string());
                    comments.push(Comment::Text);
                } else {
                    comments.push(Comment::Other(raw.to_string()));
                }
                continue;
            }
            match parse_line(raw) {
                Ok(Line::Word(tok)) => {
                    if !ids.insert(tok.id) {
                        self.line_error(lineno, ErrorKind::DuplicateId(tok.id))?;
                    } else {
                        tokens.push(tok);
                    }
                }
                Ok(Line::Range(r)) => ranges.push(r),
                Ok(Line::EmptyNode) => self.report.empty_nodes_skipped += 1,
                Err(kind) => self.line_error(lineno, kind)?,
            }
        }

        if tokens.is_empty() {
            return self.sentence_error(first_line, ErrorKind::NoTokens);
        }
        let sent_id = sent_id.unwrap_or_else(|| {
            comments.insert(0, Comment::SentId);
            format!("{}-{}", self.name, self.sentences.len() + 1)
        });
        let mut sentence = Sentence {
            sent_id,
            text: String::new(),
            tokens,
            ranges,
            comments,
        };
        if let Err(kind) = sentence.validate() {
            return self.sentence_error(first_line, kind);
        }
        if self.seen_ids.contains(&sentence.sent_id) {
            let kind = ErrorKind::DuplicateSentId(sentence.sent_id.clone());
            return self.sentence_error(first_line, kind);
        }
        sentence.text = match text {
            Some(t) => t,
            None => {
                let pos = sentence
                    .comments
                    .iter()
                    .position(|c| *c == Comment::SentId)
                    .map_or(0, |p| p + 1);
                sentence.comments.insert(pos, Comment::Text);
                sentence.derived_text()
            }
        };
        let roots = sentence.root_count();
        if roots != 1 {
            match self.mode {
                ParseMode::Strict => {
                    return Err(ConlluError {
                        line: first_line,
                        kind: ErrorKind::RootCount(roots),
                    })
                }
                ParseMode::Lenient => {
                    log::warn!("{}: sentence {} has {} roots; kept", self.name, sentence.sent_id, roots);
                    self.report.root_anomalies.push(sentence.sent_id.clone());
                }
            }
        }
        self.seen_ids.insert(sentence.sent_id.clone());
        self.sentences.push(sentence);
        Ok(())
    }
}

fn comment_value<'a>(body: &'a str, key: &str) -> Option<&'a str> {
    let rest = body.strip_prefix(key)?.trim_start();
    let rest = rest.strip_prefix('=')?;
    Some(rest.strip_prefix(' ').unwrap_or(rest))
}

/// Parses a CoNLL-U document into a named treebank.
///
/// LF and CRLF line endings are accepted. Sentences without a `sent_id`
/// comment get `<name>-<ordinal>`; sentences without a `text` comment get
/// the text rebuilt from their forms.
pub fn parse_conllu(name: &str, input: &str, mode: ParseMode) -> Result<ParseOutcome, ConlluError> {
    let mut builder = Builder {
        name,
        mode,
        report: ParseReport::default(),
        sentences: Vec::new(),
        seen_ids: BTreeSet::new(),
    };
    let mut block: Vec<&str> = Vec::new();
    let mut block_start = 1;
    for (i, raw) in input.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if !block.is_empty() {
                builder.block(block_start, &block)?;
                block.clear();
            }
            block_start = i + 2;
        } else {
            block.push(line);
        }
    }
    if !block.is_empty() {
        builder.block(block_start, &block)?;
    }
    builder.report.sentences = builder.sentences.len();
    Ok(ParseOutcome {
        treebank: Treebank {
            name: name.to_string(),
            sentences: builder.sentences,
        },
        report: builder.report,
    })
}

fn write_sentence(out: &mut String, s: &Sentence) {
    let mut wrote_id = false;
    let mut wrote_text = false;
    for c in &s.comments {
        match c {
            Comment::SentId => {
                out.push_str(&format!("# sent_id = {}\n", s.sent_id));
                wrote_id = true;
            }
            Comment::Text => {
                out.push_str(&format!("# text = {}\n", s.text));
                wrote_text = true;
            }
            Comment::Other(line) => {
                out.push_str(line);
                out.push('\n');
            }
        }
    }
    // Sentences built in code may lack the markers; canonical output always
    // carries both.
    if !wrote_id {
        out.push_str(&format!("# sent_id = {}\n", s.sent_id));
    }
    if !wrote_text {
        out.push_str(&format!("# text = {}\n", s.text));
    }
    for tok in &s.tokens {
        for r in s.ranges.iter().filter(|r| r.start == tok.id) {
            out.push_str(&format!(
                "{}-{}\t{}\t_\t_\t_\t_\t_\t_\t_\t{}\n",
                r.start, r.end, r.form, r.misc
            ));
        }
        let feats = if tok.feats.is_empty() {
            "_".to_string()
        } else {
            tok.feats
                .iter()
                .map(|f| f.to_string())
                .collect::<Vec<_>>()
                .join("|")
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            tok.id, tok.form, tok.lemma, tok.upos, tok.xpos, feats, tok.head, tok.deprel, tok.deps, tok.misc
        ));
    }
    out.push('\n');
}

/// Emits canonical CoNLL-U with LF line endings.
pub fn serialize_conllu(tb: &Treebank) -> String {
    let mut out = String::new();
    for s in &tb.sentences {
        write_sentence(&mut out, s);
    }
    out
}
