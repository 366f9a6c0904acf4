use serde::{Deserialize, Serialize};

use super::PipelineError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaPair {
    pub id: String,
    pub generic: String,
    pub semantic: String,
}

impl FormulaPair {
    pub fn new(
        id: impl Into<String>,
        generic: impl Into<String>,
        semantic: impl Into<String>,
    ) -> Self {
        FormulaPair {
            id: id.into(),
            generic: generic.into(),
            semantic: semantic.into(),
        }
    }
}

/// Reads `generic<TAB>semantic` lines. `%` lines and blank lines are skipped;
/// ids are the 1-based line numbers.
pub fn parse_tsv(text: &str) -> Result<Vec<FormulaPair>, PipelineError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('%') {
            continue;
        }
        let mut parts = line.splitn(2, '\t');
        let generic = parts.next().unwrap_or_default();
        let semantic = parts.next().ok_or(PipelineError::MalformedLine(i + 1))?;
        if generic.trim().is_empty() || semantic.trim().is_empty() || semantic.contains('\t') {
            return Err(PipelineError::MalformedLine(i + 1));
        }
        out.push(FormulaPair::new((i + 1).to_string(), generic, semantic));
    }
    Ok(out)
}

pub fn to_tsv(pairs: &[FormulaPair]) -> String {
    let mut s = String::new();
    for p in pairs {
        s.push_str(&p.generic);
        s.push('\t');
        s.push_str(&p.semantic);
        s.push('\n');
    }
    s
}
