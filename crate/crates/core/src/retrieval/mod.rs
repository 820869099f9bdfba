//! Code-vector index, cosine search and ranking metrics.

mod index;
mod metrics;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{extract_record, CorpusRecord, ExtractedRecord, Skipped};
use crate::frontend::tokenize_text;
use crate::model::{Model, ModelError};
use crate::real::Real;

pub use index::{QueryResult, RetrievalIndex};
pub use metrics::{mrr, success_rate_at_k};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query has no tokens")]
    EmptyQuery,
    #[error("index is empty")]
    EmptyIndex,
    #[error("no queries to evaluate")]
    EmptyQuerySet,
    #[error("ranks start at 1")]
    InvalidRank,
    #[error("ground-truth snippet `{0}` is not in the index")]
    MissingGroundTruth(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("vector width {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("index was built from a different checkpoint")]
    FingerprintMismatch,
    #[error("corrupt index: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn to_f64<R: Real>(v: Vec<R>) -> Vec<f64> {
    v.into_iter().map(Real::to_f64_lossy).collect()
}

/// Encodes already-extracted records in order. Records the model cannot
/// encode are skipped and reported.
pub fn build_index<R: Real>(
    model: &Model<R>,
    records: &[ExtractedRecord],
) -> Result<(RetrievalIndex, Vec<Skipped>), RetrievalError> {
    let mut entries = Vec::with_capacity(records.len());
    let mut skipped = Vec::new();
    for rec in records {
        match model.code_vector(rec) {
            Ok(v) => entries.push((rec.id.clone(), to_f64(v))),
            Err(e) => skipped.push(Skipped {
                id: rec.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let index = RetrievalIndex::new(model.fingerprint(), model.config.hyper.common_dim, entries)?;
    Ok((index, skipped))
}

/// Extracts and encodes raw corpus records.
pub fn build_index_from_corpus<R: Real>(
    model: &Model<R>,
    corpus: &[CorpusRecord],
) -> Result<(RetrievalIndex, Vec<Skipped>), RetrievalError> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for c in corpus {
        match extract_record(c) {
            Ok(r) => records.push(r),
            Err(e) => skipped.push(Skipped {
                id: c.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let (index, more) = build_index(model, &records)?;
    skipped.extend(more);
    Ok((index, skipped))
}

fn check_fingerprint<R: Real>(
    index: &RetrievalIndex,
    model: &Model<R>,
) -> Result<(), RetrievalError> {
    if index.fingerprint() != &model.fingerprint() {
        return Err(RetrievalError::FingerprintMismatch);
    }
    Ok(())
}

/// Top-`k` snippets for a natural-language query.
pub fn search<R: Real>(
    query: &str,
    index: &RetrievalIndex,
    model: &Model<R>,
    k: usize,
) -> Result<QueryResult, RetrievalError> {
    check_fingerprint(index, model)?;
    let tokens = tokenize_text(query);
    if tokens.is_empty() {
        return Err(RetrievalError::EmptyQuery);
    }
    if index.is_empty() {
        return Err(RetrievalError::EmptyIndex);
    }
    let q = to_f64(model.description_vector(&tokens)?);
    Ok(QueryResult {
        query: query.to_string(),
        hits: index.top_k(&q, k)?,
    })
}

/// One evaluation query: a description and the id of its snippet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub id: String,
    pub tokens: Vec<String>,
}

impl From<&ExtractedRecord> for EvalQuery {
    fn from(r: &ExtractedRecord) -> Self {
        Self {
            id: r.id.clone(),
            tokens: r.description_tokens.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub queries: usize,
    pub franks: Vec<(String, usize)>,
    pub success_at_1: f64,
    pub success_at_5: f64,
    pub success_at_10: f64,
    pub mrr: f64,
}

impl EvalReport {
    pub fn from_franks(franks: Vec<(String, usize)>) -> Result<Self, RetrievalError> {
        let ranks: Vec<usize> = franks.iter().map(|f| f.1).collect();
        Ok(Self {
            queries: ranks.len(),
            success_at_1: success_rate_at_k(&ranks, 1)?,
            success_at_5: success_rate_at_k(&ranks, 5)?,
            success_at_10: success_rate_at_k(&ranks, 10)?,
            mrr: mrr(&ranks)?,
            franks,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<8} {:>8}", "metric", "value");
        for (name, v) in [
            ("R@1", self.success_at_1),
            ("R@5", self.success_at_5),
            ("R@10", self.success_at_10),
            ("MRR", self.mrr),
        ] {
            let _ = writeln!(s, "{name:<8} {v:>8.4}");
        }
        let _ = writeln!(s, "{:<8} {:>8}", "queries", self.queries);
        s
    }
}

/// Uses every query's description against the whole index; FRank is the
/// position of the query's own snippet.
pub fn evaluate<R: Real>(
    queries: &[EvalQuery],
    index: &RetrievalIndex,
    model: &Model<R>,
) -> Result<EvalReport, RetrievalError> {
    check_fingerprint(index, model)?;
    let mut franks = Vec::with_capacity(queries.len());
    for q in queries {
        let target = index
            .position(&q.id)
            .ok_or_else(|| RetrievalError::MissingGroundTruth(q.id.clone()))?;
        let v = to_f64(model.description_vector(&q.tokens)?);
        franks.push((q.id.clone(), index.frank(&v, target)?));
    }
    EvalReport::from_franks(franks)
}
