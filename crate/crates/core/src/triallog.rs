//! JSON Lines trial logs: one header line, then one record per input tick.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::TechniqueConfig;
use crate::tasks::Task;
use crate::vec3::Vec3;

pub const LOG_FORMAT: &str = "forcepinch-trial-log/1";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("log is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    /// Peak-force release rollback; `None` enables it for ForcePinch only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rollback: Option<bool>,
    /// Minimum raw force needed for a pinch to engage.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_engage_force: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub format: String,
    pub seed: u64,
    pub task: Task,
    pub technique: TechniqueConfig,
    #[serde(default)]
    pub options: EngineOptions,
    pub profile_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t: f64,
    pub hand_pos: Vec3,
    pub raw_force: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_norm: Option<f64>,
    pub pinching: bool,
    pub object_pos: Vec3,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub header: LogHeader,
    pub records: Vec<LogRecord>,
}

impl TrialLog {
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), LogError> {
        serde_json::to_writer(&mut w, &self.header).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses a log; errors carry the 1-based line number. Blank lines are
    /// skipped.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, LogError> {
        let mut header: Option<LogHeader> = None;
        let mut records = Vec::new();
        for (idx, line) in r.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let malformed = |e: serde_json::Error| LogError::Malformed {
                line: line_no,
                msg: e.to_string(),
            };
            match header {
                None => {
                    let h: LogHeader = serde_json::from_str(&line).map_err(malformed)?;
                    if h.format != LOG_FORMAT {
                        return Err(LogError::Malformed {
                            line: line_no,
                            msg: format!("unsupported log format `{}`", h.format),
                        });
                    }
                    header = Some(h);
                }
                Some(_) => records.push(serde_json::from_str(&line).map_err(malformed)?),
            }
        }
        Ok(Self {
            header: header.ok_or(LogError::Empty)?,
            records,
        })
    }
}
