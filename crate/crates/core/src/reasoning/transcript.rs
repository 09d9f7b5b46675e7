use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backend, ReasoningError, ReasoningRequest, ReasoningResponse, ReasoningRole};

/// One validated exchange, stored one per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub role: ReasoningRole,
    pub request_id: String,
    pub request_digest: String,
    pub response: ReasoningResponse,
}

pub(crate) fn write_transcript(path: &Path, records: &[TranscriptRecord]) -> Result<(), ReasoningError> {
    let io = |e: std::io::Error| ReasoningError::Io(format!("{}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for r in records {
        let line = serde_json::to_string(r).expect("transcript records serialize");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_transcript(path: impl AsRef<Path>) -> Result<Vec<TranscriptRecord>, ReasoningError> {
    let path = path.as_ref();
    let io = |e: std::io::Error| ReasoningError::Io(format!("{}: {e}", path.display()));
    let f = File::open(path).map_err(io)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| ReasoningError::Io(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Answers from a recorded transcript. A request whose id is unknown, or
/// whose payload differs from the recorded one, is a replay miss.
pub struct ReplayBackend {
    records: HashMap<(ReasoningRole, String), TranscriptRecord>,
}

impl ReplayBackend {
    pub fn new(records: impl IntoIterator<Item = TranscriptRecord>) -> Self {
        Self { records: records.into_iter().map(|r| ((r.role, r.request_id.clone()), r)).collect() }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ReasoningError> {
        Ok(Self::new(load_transcript(path)?))
    }
}

impl Backend for ReplayBackend {
    fn name(&self) -> &'static str {
        "replay"
    }

    fn respond(&mut self, req: &ReasoningRequest) -> Result<ReasoningResponse, ReasoningError> {
        let role = req.payload.role();
        let miss = |detail: String| ReasoningError::ReplayMiss { role: role.as_str(), id: req.id.clone(), detail };
        let rec = self.records.get(&(role, req.id.clone())).ok_or_else(|| miss(String::new()))?;
        if rec.request_digest != req.payload.digest() {
            return Err(miss(" (request payload differs from the recording)".into()));
        }
        Ok(rec.response.clone())
    }
}
