//! Open-set querying of a fused cloud by cosine-similarity thresholding.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{cosine_similarity, Embedding, SemanticPointCloud};

/// Threshold for terrain labels, which match their fusion-time label vectors almost exactly.
pub const TERRAIN_THRESHOLD: f64 = 0.95;
/// Threshold for text-to-image object prompts.
pub const OBJECT_THRESHOLD: f64 = 0.28;

const OBJECT_PREFIXES: [&str; 2] = ["image of an ", "image of a "];

/// Object prompt phrasing: `"image of a {class}"`.
pub fn object_prompt(class: &str) -> String {
    format!("image of a {class}")
}

/// Deterministic stand-in for a text encoder: SHA-256 of the text seeds a
/// Gaussian vector, normalized to unit length.
pub fn pseudo_encode(text: &str, dim: usize) -> Embedding {
    let digest = Sha256::digest(text.as_bytes());
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    let mut rng = ChaCha8Rng::from_seed(seed);
    loop {
        let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        if let Ok(e) = Embedding::new(&raw) {
            return e;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Terrain,
    Object,
}

impl QueryKind {
    pub fn default_threshold(self) -> f64 {
        match self {
            QueryKind::Terrain => TERRAIN_THRESHOLD,
            QueryKind::Object => OBJECT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptQuery {
    pub text: String,
    pub embedding: Embedding,
    pub threshold: f64,
    pub kind: QueryKind,
}

impl PromptQuery {
    pub fn new(
        text: impl Into<String>,
        embedding: Embedding,
        threshold: f64,
        kind: QueryKind,
    ) -> Result<Self> {
        let q = Self {
            text: text.into(),
            embedding,
            threshold,
            kind,
        };
        q.validate()?;
        Ok(q)
    }

    /// Query whose embedding is the pseudo-encoding of `text`, at the kind's default threshold.
    pub fn pseudo(text: &str, kind: QueryKind, dim: usize) -> Self {
        Self {
            text: text.to_string(),
            embedding: pseudo_encode(text, dim),
            threshold: kind.default_threshold(),
            kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "threshold {} of query {:?} outside (0, 1]",
                self.threshold, self.text
            )));
        }
        if self.embedding.is_null() {
            return Err(Error::NullEmbedding);
        }
        if (self.embedding.norm() - 1.0).abs() > 1e-5 {
            return Err(Error::invalid("query embedding must be unit length"));
        }
        Ok(())
    }

    /// Class label: object prompts drop their `"image of a "` phrasing.
    pub fn class_label(&self) -> &str {
        if self.kind == QueryKind::Object {
            for prefix in OBJECT_PREFIXES {
                if let Some(rest) = self.text.strip_prefix(prefix) {
                    return rest;
                }
            }
        }
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptResult {
    pub query: PromptQuery,
    pub matches: BTreeSet<usize>,
    pub scores: BTreeMap<usize, f64>,
}

/// Indices of points whose embedding meets the query threshold.
pub fn classify(cloud: &SemanticPointCloud, query: &PromptQuery) -> Result<PromptResult> {
    if query.embedding.dim() != cloud.dim {
        return Err(Error::DimensionMismatch {
            expected: cloud.dim,
            found: query.embedding.dim(),
        });
    }
    let scored: Vec<Option<(usize, f64)>> = cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if p.observations == 0 {
                return Ok(None);
            }
            let s = cosine_similarity(&p.embedding, &query.embedding)?;
            Ok((s >= query.threshold).then_some((i, s)))
        })
        .collect::<Result<_>>()?;
    let scores: BTreeMap<usize, f64> = scored.into_iter().flatten().collect();
    Ok(PromptResult {
        query: query.clone(),
        matches: scores.keys().copied().collect(),
        scores,
    })
}

/// Assigns each point the best-scoring terrain query that meets its threshold.
///
/// Ties keep the earlier query. `None` means unclassified.
pub fn partition_terrain(
    cloud: &SemanticPointCloud,
    queries: &[PromptQuery],
) -> Result<Vec<Option<String>>> {
    let mut seen = HashSet::new();
    for q in queries {
        if q.kind != QueryKind::Terrain {
            return Err(Error::invalid(format!(
                "query {:?} is not a terrain query",
                q.text
            )));
        }
        if !seen.insert(q.text.as_str()) {
            return Err(Error::DuplicateLabel(q.text.clone()));
        }
        if q.embedding.dim() != cloud.dim {
            return Err(Error::DimensionMismatch {
                expected: cloud.dim,
                found: q.embedding.dim(),
            });
        }
    }
    cloud
        .points
        .par_iter()
        .map(|p| {
            if p.observations == 0 {
                return Ok(None);
            }
            let mut best: Option<(usize, f64)> = None;
            for (k, q) in queries.iter().enumerate() {
                let s = cosine_similarity(&p.embedding, &q.embedding)?;
                if s >= q.threshold && best.map_or(true, |(_, bs)| s > bs) {
                    best = Some((k, s));
                }
            }
            Ok(best.map(|(k, _)| queries[k].text.clone()))
        })
        .collect()
}

/// One prompt bank entry as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    pub text: String,
    pub kind: QueryKind,
    pub threshold: f64,
    pub embedding: Vec<f32>,
}

impl BankEntry {
    pub fn to_query(&self) -> Result<PromptQuery> {
        PromptQuery::new(
            self.text.clone(),
            Embedding::from_f32(&self.embedding)?,
            self.threshold,
            self.kind,
        )
    }

    pub fn from_query(q: &PromptQuery) -> Self {
        Self {
            text: q.text.clone(),
            kind: q.kind,
            threshold: q.threshold,
            embedding: q.embedding.values().to_vec(),
        }
    }
}

/// A prompt bank: JSON array of `{text, kind, threshold, embedding}`.
pub fn load_prompt_bank(path: impl AsRef<Path>) -> Result<Vec<PromptQuery>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<BankEntry> =
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
    entries.iter().map(BankEntry::to_query).collect()
}

pub fn save_prompt_bank(queries: &[PromptQuery], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let entries: Vec<BankEntry> = queries.iter().map(BankEntry::from_query).collect();
    let text = serde_json::to_string(&entries).map_err(|e| Error::json("prompt bank", e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
