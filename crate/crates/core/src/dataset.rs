//! Corpus records, modality extraction and line-delimited JSON files.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::{
    extract_description, function_body, lex, parse, split_identifier, strip_comments,
    FrontendError, NodeKind,
};
use crate::modalities::{binarize, build_cfg, simplify_cfg, BinaryAst, Cfg, ModalityError};

/// One snippet with its documentation, as stored in a corpus file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub code: String,
    pub description: String,
}

/// All modalities of one snippet plus its description tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedRecord {
    pub id: String,
    pub name_tokens: Vec<String>,
    pub body_tokens: Vec<String>,
    pub ast: BinaryAst,
    pub cfg: Cfg,
    pub description_tokens: Vec<String>,
}

impl ExtractedRecord {
    /// The token modality: method-name subtokens followed by body tokens.
    pub fn code_tokens(&self) -> Vec<&str> {
        self.name_tokens
            .iter()
            .chain(&self.body_tokens)
            .map(String::as_str)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Modality(#[from] ModalityError),
    #[error("duplicate id")]
    DuplicateId,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
}

/// Runs the whole extraction pipeline on one record.
pub fn extract_record(record: &CorpusRecord) -> Result<ExtractedRecord, ExtractError> {
    let raw = parse(&record.code).map_err(FrontendError::from)?;
    let description = extract_description(&record.description)?;
    let root = raw.node(raw.root);
    debug_assert_eq!(root.kind, NodeKind::FunctionDecl);
    let name_tokens = split_identifier(&root.label);
    let body_tokens = lex(function_body(&strip_comments(&record.code))).tokens;
    let cfg = simplify_cfg(&build_cfg(&raw)?)?;
    Ok(ExtractedRecord {
        id: record.id.clone(),
        name_tokens,
        body_tokens,
        ast: binarize(&raw),
        cfg,
        description_tokens: description.tokens,
    })
}

/// A record left out of the dataset and why.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Extraction {
    pub records: Vec<ExtractedRecord>,
    pub skipped: Vec<Skipped>,
}

/// Extracts every record, skipping (and reporting) the ones that fail.
pub fn extract_corpus(corpus: &[CorpusRecord]) -> Extraction {
    let mut out = Extraction::default();
    let mut ids = HashSet::new();
    for rec in corpus {
        let result = if ids.insert(rec.id.as_str()) {
            extract_record(rec)
        } else {
            Err(ExtractError::DuplicateId)
        };
        match result {
            Ok(r) => out.records.push(r),
            Err(e) => {
                log::warn!("skipping {}: {e}", rec.id);
                out.skipped.push(Skipped {
                    id: rec.id.clone(),
                    reason: e.to_string(),
                });
            }
        }
    }
    out
}

/// Seeded partition into (train, test) with `round(n · test_ratio)` test
/// items. Both parts keep the input order.
pub fn split<T: Clone>(items: &[T], test_ratio: f64, seed: u64) -> (Vec<T>, Vec<T>) {
    let ratio = test_ratio.clamp(0.0, 1.0);
    let n_test = ((items.len() as f64) * ratio).round() as usize;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; items.len()];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (item, t) in items.iter().zip(is_test) {
        if t {
            test.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    (train, test)
}

pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| DatasetError::Json {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, items: &[T]) -> Result<(), DatasetError> {
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| DatasetError::Json {
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}
