use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::AssociationConfig;
use crate::model::Embedding;
use crate::objects::DbscanParams;
use crate::places::PlaceConfig;
use crate::prompt::{load_prompt_bank, pseudo_encode, PromptQuery, QueryKind};

/// Tunables shared by every stage of graph construction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskParams {
    pub dbscan: DbscanParams,
    pub places: PlaceConfig,
    pub association: AssociationConfig,
}

impl TaskParams {
    pub fn validate(&self) -> Result<()> {
        self.dbscan.validate()?;
        self.places.validate()?;
        self.association.validate()
    }
}

/// One query line of a task file. Missing thresholds take the kind's default;
/// missing embeddings come from the prompt bank, then from the pseudo-encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub text: String,
    pub kind: QueryKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
}

/// Task file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub task: String,
    #[serde(default)]
    pub timestamp: f64,
    #[serde(default)]
    pub queries: Vec<QuerySpec>,
    /// Relative paths resolve against the task file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_bank: Option<PathBuf>,
    #[serde(default)]
    pub params: TaskParams,
}

/// A resolved task: named, with embedded queries split by kind.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub name: String,
    pub timestamp: f64,
    pub terrain_queries: Vec<PromptQuery>,
    pub object_queries: Vec<PromptQuery>,
    pub params: TaskParams,
}

impl TaskSpec {
    pub fn new(name: &str, queries: Vec<PromptQuery>, params: TaskParams) -> Result<Self> {
        let (terrain_queries, object_queries) = queries
            .into_iter()
            .partition(|q| q.kind == QueryKind::Terrain);
        let spec = Self {
            name: name.to_string(),
            timestamp: 0.0,
            terrain_queries,
            object_queries,
            params,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terrain_queries.is_empty() && self.object_queries.is_empty() {
            return Err(Error::invalid(format!("task {:?} has no queries", self.name)));
        }
        for q in self.terrain_queries.iter().chain(&self.object_queries) {
            q.validate()?;
        }
        if !self.timestamp.is_finite() {
            return Err(Error::invalid("task timestamp must be finite"));
        }
        self.params.validate()
    }

    pub fn queries(&self) -> impl Iterator<Item = &PromptQuery> {
        self.terrain_queries.iter().chain(&self.object_queries)
    }

    /// Resolves a parsed task file for clouds of dimension `dim`.
    pub fn from_file_doc(doc: &TaskFile, base: &Path, dim: usize) -> Result<Self> {
        let bank = match &doc.prompt_bank {
            Some(p) => load_prompt_bank(base.join(p))?,
            None => Vec::new(),
        };
        let mut queries = Vec::with_capacity(doc.queries.len());
        for q in &doc.queries {
            let embedding = match (&q.embedding, bank.iter().find(|b| b.text == q.text && b.kind == q.kind)) {
                (Some(v), _) => Embedding::from_f32(v)?,
                (None, Some(b)) => b.embedding.clone(),
                (None, None) => {
                    log::info!("query {:?} has no stored embedding; using the pseudo-encoder", q.text);
                    pseudo_encode(&q.text, dim)
                }
            };
            if embedding.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: embedding.dim(),
                });
            }
            let threshold = q.threshold.unwrap_or_else(|| q.kind.default_threshold());
            queries.push(PromptQuery::new(q.text.clone(), embedding, threshold, q.kind)?);
        }
        let mut spec = Self::new(&doc.task, queries, doc.params)?;
        spec.timestamp = doc.timestamp;
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str, base: &Path, dim: usize) -> Result<Self> {
        let doc: TaskFile = serde_json::from_str(text).map_err(|e| Error::json("task file", e))?;
        Self::from_file_doc(&doc, base, dim)
    }

    pub fn load(path: impl AsRef<Path>, dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: TaskFile =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_file_doc(&doc, path.parent().unwrap_or(Path::new(".")), dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_pseudo_fallback() {
        let t = TaskSpec::parse(
            r#"{"task": "nav", "queries": [{"text": "grass", "kind": "terrain"},
                {"text": "image of a car", "kind": "object", "threshold": 0.3}]}"#,
            Path::new("."),
            16,
        )
        .unwrap();
        assert_eq!(t.terrain_queries.len(), 1);
        assert_eq!(t.terrain_queries[0].threshold, 0.95);
        assert_eq!(t.object_queries[0].threshold, 0.3);
        assert_eq!(t.object_queries[0].embedding, pseudo_encode("image of a car", 16));
        assert_eq!(t.params, TaskParams::default());
    }

    #[test]
    fn zero_queries_rejected() {
        let e = TaskSpec::parse(r#"{"task": "nav"}"#, Path::new("."), 4).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn bank_supplies_embeddings() {
        let dir = tempfile::tempdir().unwrap();
        let q = PromptQuery::new("grass", Embedding::basis(4, 2), 0.9, QueryKind::Terrain).unwrap();
        crate::prompt::save_prompt_bank(&[q.clone()], dir.path().join("bank.json")).unwrap();
        let text = r#"{"task": "t", "prompt_bank": "bank.json", "queries": [{"text": "grass", "kind": "terrain"}]}"#;
        std::fs::write(dir.path().join("task.json"), text).unwrap();
        let t = TaskSpec::load(dir.path().join("task.json"), 4).unwrap();
        assert_eq!(t.terrain_queries[0].embedding, q.embedding);
        // bank threshold is not inherited; the file's default applies
        assert_eq!(t.terrain_queries[0].threshold, 0.95);
    }

    #[test]
    fn dimension_checked() {
        let text = r#"{"task": "t", "queries": [{"text": "grass", "kind": "terrain", "embedding": [1.0, 0.0]}]}"#;
        assert!(matches!(
            TaskSpec::parse(text, Path::new("."), 3),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
