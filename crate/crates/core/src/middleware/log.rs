use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AccessDecision, MiddlewareError, ScoreUpdate, StageTimings};
use crate::ontology::DuaRecord;
use crate::policy::DataRequest;

/// One committed state change. Replaying the records in order over the
/// same starting graph reproduces the trust registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum LogRecord {
    #[serde(rename_all = "camelCase")]
    Request {
        request_id: String,
        request: DataRequest,
        decision: AccessDecision,
        timings: StageTimings,
    },
    DuaRewrite {
        dua: DuaRecord,
    },
    /// Replica updates that changed local state.
    Scores {
        updates: Vec<ScoreUpdate>,
    },
}

/// Append-only JSON-lines sink, optionally mirrored in memory.
#[derive(Debug, Default)]
pub(crate) struct TransactionLog {
    file: Option<BufWriter<File>>,
    memory: Option<Vec<LogRecord>>,
}

impl TransactionLog {
    pub(crate) fn open(path: &Path) -> Result<Self, MiddlewareError> {
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| MiddlewareError::Io(format!("{}: {e}", path.display())))?;
        Ok(TransactionLog {
            file: Some(BufWriter::new(f)),
            memory: None,
        })
    }

    pub(crate) fn keep_in_memory(&mut self) {
        self.memory.get_or_insert_with(Vec::new);
    }

    pub(crate) fn append(&mut self, record: LogRecord) -> Result<(), MiddlewareError> {
        if let Some(w) = &mut self.file {
            let io = |e: std::io::Error| MiddlewareError::Io(format!("transaction log: {e}"));
            serde_json::to_writer(&mut *w, &record).map_err(|e| MiddlewareError::Io(e.to_string()))?;
            w.write_all(b"\n").map_err(io)?;
            w.flush().map_err(io)?;
        }
        if let Some(m) = &mut self.memory {
            m.push(record);
        }
        Ok(())
    }

    pub(crate) fn records(&self) -> Option<&[LogRecord]> {
        self.memory.as_deref()
    }
}

pub fn read_log(path: &Path) -> Result<Vec<LogRecord>, MiddlewareError> {
    let f = File::open(path).map_err(|e| MiddlewareError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| MiddlewareError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| MiddlewareError::Invalid(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}
