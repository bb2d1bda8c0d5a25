use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReconError;
use crate::matching::CorrespondenceSet;

pub const MATCHES_SCHEMA: u32 = 1;

/// `{schema:1, pairs:[[i,j],...], scores:[...]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchesFile {
    pub schema: u32,
    pub pairs: Vec<[usize; 2]>,
    pub scores: Vec<f64>,
}

impl From<&CorrespondenceSet> for MatchesFile {
    fn from(c: &CorrespondenceSet) -> Self {
        MatchesFile {
            schema: MATCHES_SCHEMA,
            pairs: c.pairs.clone(),
            scores: c.scores.clone(),
        }
    }
}

pub fn export_matches_json(corrs: &CorrespondenceSet, path: impl AsRef<Path>) -> Result<(), ReconError> {
    let path = path.as_ref();
    let body = serde_json::to_string_pretty(&MatchesFile::from(corrs))?;
    std::fs::write(path, body + "\n").map_err(|e| ReconError::io(path, e))
}

pub fn read_matches_json(path: impl AsRef<Path>) -> Result<CorrespondenceSet, ReconError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ReconError::io(path, e))?;
    let file: MatchesFile = serde_json::from_str(&text)?;
    if file.schema != MATCHES_SCHEMA {
        return Err(ReconError::UnsupportedFormat(format!("matches schema {}", file.schema)));
    }
    if file.pairs.len() != file.scores.len() {
        return Err(ReconError::UnsupportedFormat("pairs and scores differ in length".into()));
    }
    Ok(CorrespondenceSet {
        pairs: file.pairs,
        scores: file.scores,
    })
}
