use std::cmp::Ordering;

use super::RetrievalError;
use crate::tensor::cosine;

const MAGIC: &[u8; 4] = b"MMIX";
const VERSION: u32 = 1;

/// Immutable list of code vectors tagged with the fingerprint of the
/// checkpoint that produced them. Vectors are stored as `f64` whatever the
/// model precision.
#[derive(Clone, Debug, PartialEq)]
pub struct RetrievalIndex {
    fingerprint: [u8; 32],
    dim: usize,
    entries: Vec<(String, Vec<f64>)>,
}

/// Ranked `(id, cosine)` pairs.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct QueryResult {
    pub query: String,
    pub hits: Vec<(String, f64)>,
}

impl RetrievalIndex {
    /// Fails on duplicate ids or vectors of the wrong width.
    pub fn new(
        fingerprint: [u8; 32],
        dim: usize,
        entries: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, RetrievalError> {
        let mut seen = std::collections::HashSet::new();
        for (id, v) in &entries {
            if !seen.insert(id.as_str()) {
                return Err(RetrievalError::DuplicateId(id.clone()));
            }
            if v.len() != dim {
                return Err(RetrievalError::Dimension {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        Ok(Self {
            fingerprint,
            dim,
            entries,
        })
    }

    pub fn fingerprint(&self) -> &[u8; 32] {
        &self.fingerprint
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, Vec<f64>)] {
        &self.entries
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.entries.iter().position(|(i, _)| i == id)
    }

    /// Every entry ordered by cosine similarity to `query`, highest first,
    /// ties by ascending id.
    pub fn rank(&self, query: &[f64]) -> Result<Vec<(usize, f64)>, RetrievalError> {
        if query.len() != self.dim {
            return Err(RetrievalError::Dimension {
                expected: self.dim,
                found: query.len(),
            });
        }
        let mut scored: Vec<(usize, f64)> = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, (_, v))| (i, cosine(query, v)))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then_with(|| self.entries[a.0].0.cmp(&self.entries[b.0].0))
        });
        Ok(scored)
    }

    /// Top `k` entries for a query vector.
    pub fn top_k(&self, query: &[f64], k: usize) -> Result<Vec<(String, f64)>, RetrievalError> {
        if self.is_empty() {
            return Err(RetrievalError::EmptyIndex);
        }
        Ok(self
            .rank(query)?
            .into_iter()
            .take(k)
            .map(|(i, s)| (self.entries[i].0.clone(), s))
            .collect())
    }

    /// 1-based rank of entry `target` for `query`.
    pub fn frank(&self, query: &[f64], target: usize) -> Result<usize, RetrievalError> {
        let ranking = self.rank(query)?;
        Ok(ranking
            .iter()
            .position(|&(i, _)| i == target)
            .expect("target in index")
            + 1)
    }

    /// `MMIX` header (magic, version, width, count, fingerprint) followed by
    /// `(id length, id, values)` per entry; little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.fingerprint);
        for (id, v) in &self.entries {
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, RetrievalError> {
        let corrupt = |m: &str| RetrievalError::Corrupt(m.to_string());
        let mut pos = 0;
        let mut take = |n: usize| -> Result<&[u8], RetrievalError> {
            let s = bytes
                .get(pos..pos + n)
                .ok_or_else(|| RetrievalError::Corrupt("truncated index".into()))?;
            pos += n;
            Ok(s)
        };
        if take(4)? != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(corrupt(&format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        let count = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        let fingerprint: [u8; 32] = take(32)?.try_into().expect("32 bytes");
        let mut entries = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let n = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
            let id = String::from_utf8(take(n)?.to_vec()).map_err(|_| corrupt("non-UTF-8 id"))?;
            let v = take(dim * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            entries.push((id, v));
        }
        if pos != bytes.len() {
            return Err(corrupt("trailing bytes"));
        }
        Self::new(fingerprint, dim, entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(entries: &[(&str, [f64; 3])]) -> RetrievalIndex {
        RetrievalIndex::new(
            [7; 32],
            3,
            entries
                .iter()
                .map(|(i, v)| (i.to_string(), v.to_vec()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn orthogonal_self_match() {
        let ix = index(&[
            ("a", [1.0, 0.0, 0.0]),
            ("b", [0.0, 1.0, 0.0]),
            ("c", [0.0, 0.0, 1.0]),
        ]);
        let top = ix.top_k(&[0.0, 1.0, 0.0], 1).unwrap();
        assert_eq!(top, vec![("b".to_string(), 1.0)]);
        assert_eq!(ix.top_k(&[0.0, 1.0, 0.0], 10).unwrap().len(), 3);
    }

    #[test]
    fn ties_break_by_id() {
        let ix = index(&[
            ("z", [1.0, 1.0, 0.0]),
            ("m", [1.0, 1.0, 0.0]),
            ("q", [0.0, 0.0, 1.0]),
        ]);
        let ids: Vec<_> = ix
            .top_k(&[1.0, 1.0, 0.0], 3)
            .unwrap()
            .into_iter()
            .map(|h| h.0)
            .collect();
        assert_eq!(ids, vec!["m", "z", "q"]);
        assert_eq!(ix.frank(&[1.0, 1.0, 0.0], 0).unwrap(), 2);
    }

    #[test]
    fn bytes_round_trip() {
        let ix = index(&[("a", [1.0, -2.5, 0.125]), ("bb", [0.0, 1e-300, 3.0])]);
        let bytes = ix.to_bytes();
        assert_eq!(&bytes[..4], b"MMIX");
        assert_eq!(RetrievalIndex::from_bytes(&bytes).unwrap(), ix);
        assert!(RetrievalIndex::from_bytes(&bytes[..bytes.len() - 2]).is_err());
    }

    #[test]
    fn rejects_duplicates_and_empty_queries() {
        assert!(RetrievalIndex::new(
            [0; 32],
            1,
            vec![("a".into(), vec![1.0]), ("a".into(), vec![2.0])]
        )
        .is_err());
        let empty = RetrievalIndex::new([0; 32], 1, vec![]).unwrap();
        assert!(matches!(
            empty.top_k(&[1.0], 1),
            Err(RetrievalError::EmptyIndex)
        ));
    }
}
