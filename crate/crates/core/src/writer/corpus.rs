use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One training example: `{"src": [...], "tgt": [...], "entities": [...]}`.
///
/// `entities` holds the surface names of related entities used as memory;
/// it may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPair {
    pub src: Vec<String>,
    pub tgt: Vec<String>,
    #[serde(default)]
    pub entities: Vec<String>,
}

impl CorpusPair {
    pub fn new(src: &str, tgt: &str, entities: &[&str]) -> Self {
        CorpusPair {
            src: crate::kg::tokenize(src),
            tgt: crate::kg::tokenize(tgt),
            entities: entities.iter().map(|e| e.to_lowercase()).collect(),
        }
    }
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<CorpusPair>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let mut pair: CorpusPair = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        for t in pair.src.iter_mut().chain(pair.tgt.iter_mut()) {
            *t = t.to_lowercase();
        }
        for e in pair.entities.iter_mut() {
            *e = e.to_lowercase();
        }
        out.push(pair);
    }
    Ok(out)
}

/// The three writing tasks of the incremental chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Task {
    Title2Abstract,
    Abstract2Conclusion,
    Conclusion2Title,
}

impl Task {
    pub const ALL: [Task; 3] = [
        Task::Title2Abstract,
        Task::Abstract2Conclusion,
        Task::Conclusion2Title,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Title2Abstract => "title2abstract",
            Task::Abstract2Conclusion => "abstract2conclusion",
            Task::Conclusion2Title => "conclusion2title",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown task `{s}` (expected title2abstract, abstract2conclusion or conclusion2title)"
                ))
            })
    }
}
