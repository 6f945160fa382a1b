//! The canonical 12-category prompt corpus and corpus file loading.
//!
//! Corpus files are UTF-8 JSON arrays of `{category, prompt_id, text}`. Items
//! whose text was completed from a truncated source carry the original in an
//! optional `expanded_from` field.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Canonical corpus as shipped in `data/canonical_corpus.json`.
pub const CANONICAL_CORPUS_JSON: &str = include_str!("../data/canonical_corpus.json");

/// Category ids with their display names, in canonical order.
pub const CATEGORIES: [(&str, &str); 12] = [
    ("factual_questions", "Factual Questions"),
    ("creative_writing", "Creative Writing"),
    ("mathematical_reasoning", "Mathematical Reasoning"),
    ("emotional_content", "Emotional Content"),
    ("technical_code", "Technical Code"),
    ("philosophical_queries", "Philosophical Queries"),
    ("conversational_chat", "Conversational Chat"),
    ("logical_puzzles", "Logical Puzzles"),
    ("scientific_explanations", "Scientific Explanations"),
    ("language_tasks", "Language Tasks"),
    ("instruction_following", "Instruction Following"),
    ("commonsense_reasoning", "Commonsense Reasoning"),
];

pub fn display_name(category: &str) -> Option<&'static str> {
    CATEGORIES
        .iter()
        .find(|(id, _)| *id == category)
        .map(|(_, name)| *name)
}

/// Inverse of [`display_name`].
pub fn category_id(display: &str) -> Option<&'static str> {
    CATEGORIES
        .iter()
        .find(|(_, name)| *name == display)
        .map(|(id, _)| *id)
}

pub fn is_category(id: &str) -> bool {
    display_name(id).is_some()
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid corpus: {0}")]
    Validation(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptItem {
    pub category: String,
    pub prompt_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expanded_from: Option<String>,
}

fn check_item(item: &PromptItem) -> Result<(), CorpusError> {
    if !is_category(&item.category) {
        return Err(CorpusError::Validation(format!(
            "{}: unknown category {:?}",
            item.prompt_id, item.category
        )));
    }
    let ordinal = item
        .prompt_id
        .strip_prefix(&item.category)
        .and_then(|rest| rest.strip_prefix('.'));
    let well_formed = matches!(ordinal, Some(n) if !n.is_empty()
        && !n.starts_with('0')
        && n.bytes().all(|b| b.is_ascii_digit()));
    if !well_formed {
        return Err(CorpusError::Validation(format!(
            "prompt_id {:?} must be \"{}.<n>\" with n >= 1",
            item.prompt_id, item.category
        )));
    }
    if item.text.trim().is_empty() {
        return Err(CorpusError::Validation(format!(
            "{}: empty prompt text",
            item.prompt_id
        )));
    }
    Ok(())
}

/// Parses and validates corpus JSON.
pub fn parse_corpus(text: &str) -> Result<Vec<PromptItem>, CorpusError> {
    let items: Vec<PromptItem> = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if items.is_empty() {
        return Err(CorpusError::Validation("corpus has no items".into()));
    }
    let mut seen = HashSet::new();
    for item in &items {
        check_item(item)?;
        if !seen.insert(item.prompt_id.as_str()) {
            return Err(CorpusError::Validation(format!(
                "duplicate prompt_id {:?}",
                item.prompt_id
            )));
        }
    }
    Ok(items)
}

pub fn load_corpus(path: &Path) -> Result<Vec<PromptItem>, CorpusError> {
    parse_corpus(&fs::read_to_string(path)?)
}

/// The 24 canonical prompts, two per category, in canonical category order.
pub fn load_canonical() -> Vec<PromptItem> {
    parse_corpus(CANONICAL_CORPUS_JSON).expect("embedded corpus is valid")
}
