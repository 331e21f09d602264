//! Data model and ingestion: bag-structured JSONL datasets, pretrained
//! word embeddings, vocabularies, and the seeded synthetic generator.

mod embeddings;
mod prepare;
mod synth;
mod vocab;

pub use embeddings::{load_embeddings, EmbeddingTable};
pub use prepare::{
    position_id, position_table_rows, prepare_bag, prepare_sentence, truncate_sentence,
    PreparedBag, PreparedSentence,
};
pub use synth::{synth_generate, SynthOutput, SynthSpec};
pub use vocab::{build_vocab, RelationVocab, TypeVocab, Vocab, NA_RELATION};

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{RelexError, Result};

/// One annotated sentence. Spans are half-open `[start, end)` token ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceInstance {
    pub tokens: Vec<String>,
    pub subj_span: (usize, usize),
    pub obj_span: (usize, usize),
    pub dep_edges: Vec<(usize, usize)>,
    /// Pre-extracted relation phrases, when the pipeline that produced the
    /// data ran an open extractor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phrases: Option<Vec<Vec<String>>>,
}

/// All sentences mentioning one entity pair, with the pair's gold relation
/// and coarse entity types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bag {
    pub subj: String,
    pub obj: String,
    pub relation: String,
    pub subj_types: Vec<String>,
    pub obj_types: Vec<String>,
    pub sentences: Vec<SentenceInstance>,
}

fn span_ok(span: (usize, usize), m: usize) -> bool {
    span.0 < span.1 && span.1 <= m
}

fn spans_overlap(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Checks every structural invariant and returns all violations, not just
/// the first.
pub fn validate_bag(bag: &Bag) -> Vec<String> {
    let mut issues = Vec::new();
    if bag.sentences.is_empty() {
        issues.push("bag has no sentences".to_string());
    }
    if bag.relation.is_empty() {
        issues.push("empty relation name".to_string());
    }
    for (si, s) in bag.sentences.iter().enumerate() {
        let m = s.tokens.len();
        if m == 0 {
            issues.push(format!("sentence {si}: no tokens"));
            continue;
        }
        if !span_ok(s.subj_span, m) {
            issues.push(format!(
                "sentence {si}: subj_span {:?} invalid for {m} tokens",
                s.subj_span
            ));
        }
        if !span_ok(s.obj_span, m) {
            issues.push(format!(
                "sentence {si}: obj_span {:?} invalid for {m} tokens",
                s.obj_span
            ));
        }
        if span_ok(s.subj_span, m)
            && span_ok(s.obj_span, m)
            && spans_overlap(s.subj_span, s.obj_span)
        {
            issues.push(format!(
                "sentence {si}: span overlap between subj {:?} and obj {:?}",
                s.subj_span, s.obj_span
            ));
        }
        for &(u, v) in &s.dep_edges {
            if u >= m || v >= m {
                issues.push(format!(
                    "sentence {si}: dep edge ({u}, {v}) out of range for {m} tokens"
                ));
            } else if u == v {
                issues.push(format!("sentence {si}: self edge ({u}, {v})"));
            }
        }
    }
    issues
}

/// Loads a JSONL dataset, one bag per line. Blank lines are skipped. Every
/// bag is validated; the first offending line aborts the load with its line
/// number.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<Bag>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| RelexError::io(path.display().to_string(), e))?;
    load_jsonl_str(&text)
}

pub fn load_jsonl_str(text: &str) -> Result<Vec<Bag>> {
    let mut bags = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let bag: Bag = serde_json::from_str(line).map_err(|e| RelexError::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let issues = validate_bag(&bag);
        if !issues.is_empty() {
            return Err(RelexError::Validation {
                line: lineno,
                issues,
            });
        }
        bags.push(bag);
    }
    Ok(bags)
}

/// Canonical serialization: fixed field order, one compact JSON object per
/// line, trailing newline.
pub fn serialize_jsonl(bags: &[Bag]) -> String {
    let mut out = String::new();
    for bag in bags {
        out.push_str(&serde_json::to_string(bag).expect("bag serialization cannot fail"));
        out.push('\n');
    }
    out
}

pub fn save_jsonl(path: impl AsRef<Path>, bags: &[Bag]) -> Result<()> {
    let path = path.as_ref();
    let mut f =
        fs::File::create(path).map_err(|e| RelexError::io(path.display().to_string(), e))?;
    f.write_all(serialize_jsonl(bags).as_bytes())
        .map_err(|e| RelexError::io(path.display().to_string(), e))
}
