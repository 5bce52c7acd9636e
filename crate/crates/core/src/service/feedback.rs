//! Append-only JSON-lines feedback log.
//!
//! Every append is written and fsynced under one lock before the caller is
//! acknowledged. On open, an unterminated or unparseable final line (a torn
//! write) is moved to `<log>.quarantine` and cut from the log.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::router::Mode;

#[derive(Debug, thiserror::Error)]
pub enum FeedbackError {
    #[error("line {line} of the feedback log is not a valid event: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error("feedback storage: {0}")]
    Storage(#[from] std::io::Error),
}

/// What a client submits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackSubmission {
    #[serde(default)]
    pub order_ref: Option<String>,
    #[serde(default)]
    pub indication: Option<String>,
    #[serde(default)]
    pub diagnosis: Option<String>,
    pub model_id: String,
    pub threshold_used: f64,
    pub mode: Mode,
    pub served_labels: Vec<String>,
    pub chosen_label: String,
    #[serde(default)]
    pub override_flag: bool,
    #[serde(default)]
    pub comment: Option<String>,
}

/// One logged line: the submission plus server-assigned sequence and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub sequence: u64,
    /// UTC milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub order_ref: Option<String>,
    pub indication: Option<String>,
    pub diagnosis: Option<String>,
    pub model_id: String,
    pub threshold_used: f64,
    pub mode: Mode,
    pub served_labels: Vec<String>,
    pub chosen_label: String,
    pub override_flag: bool,
    pub comment: Option<String>,
}

#[derive(Debug)]
struct Writer {
    file: File,
    next_sequence: u64,
    last_timestamp_ms: u64,
}

#[derive(Debug)]
pub struct FeedbackLog {
    path: PathBuf,
    writer: Mutex<Writer>,
}

/// Bytes cut from the end of the log on open.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quarantined {
    pub path: PathBuf,
    pub bytes: usize,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn quarantine_path(log: &Path) -> PathBuf {
    let mut name = log.file_name().unwrap_or_default().to_os_string();
    name.push(".quarantine");
    log.with_file_name(name)
}

impl FeedbackLog {
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Option<Quarantined>), FeedbackError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let mut events = Vec::new();
        let mut good_end = 0usize;
        let mut torn = None;
        let mut start = 0usize;
        let mut line_no = 0usize;
        while start < bytes.len() {
            line_no += 1;
            let nl = bytes[start..].iter().position(|&b| b == b'\n');
            let end = nl.map_or(bytes.len(), |i| start + i);
            let parsed = serde_json::from_slice::<FeedbackEvent>(&bytes[start..end]);
            let last = end + 1 >= bytes.len();
            match parsed {
                Ok(ev) if nl.is_some() => {
                    events.push(ev);
                    good_end = end + 1;
                }
                // unterminated, or garbled and last
                _ if last => {
                    torn = Some(start);
                    break;
                }
                Err(e) => {
                    return Err(FeedbackError::CorruptLog {
                        line: line_no,
                        reason: e.to_string(),
                    })
                }
                Ok(_) => unreachable!("only the last line can lack a newline"),
            }
            start = end + 1;
        }

        let mut quarantined = None;
        if let Some(from) = torn {
            let q = quarantine_path(&path);
            let mut qf = OpenOptions::new().append(true).create(true).open(&q)?;
            qf.write_all(&bytes[from..])?;
            qf.write_all(b"\n")?;
            qf.sync_all()?;
            file.set_len(good_end as u64)?;
            file.sync_all()?;
            quarantined = Some(Quarantined {
                path: q,
                bytes: bytes.len() - from,
            });
        }
        file.seek(SeekFrom::End(0))?;

        let writer = Writer {
            file,
            next_sequence: events.last().map_or(1, |e| e.sequence + 1),
            last_timestamp_ms: events.iter().map(|e| e.timestamp_ms).max().unwrap_or(0),
        };
        Ok((
            Self {
                path,
                writer: Mutex::new(writer),
            },
            quarantined,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Append and fsync; returns the stored event once it is durable.
    pub fn append(&self, submission: FeedbackSubmission) -> Result<FeedbackEvent, FeedbackError> {
        let mut w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let timestamp_ms = now_ms().max(w.last_timestamp_ms);
        let event = FeedbackEvent {
            sequence: w.next_sequence,
            timestamp_ms,
            order_ref: submission.order_ref,
            indication: submission.indication,
            diagnosis: submission.diagnosis,
            model_id: submission.model_id,
            threshold_used: submission.threshold_used,
            mode: submission.mode,
            served_labels: submission.served_labels,
            chosen_label: submission.chosen_label,
            override_flag: submission.override_flag,
            comment: submission.comment,
        };
        let mut line = serde_json::to_vec(&event).expect("event serializes");
        line.push(b'\n');
        w.file.write_all(&line)?;
        w.file.sync_data()?;
        w.next_sequence += 1;
        w.last_timestamp_ms = timestamp_ms;
        Ok(event)
    }
}

/// Parse every line of a log file.
pub fn read_feedback_log(path: impl AsRef<Path>) -> Result<Vec<FeedbackEvent>, FeedbackError> {
    fs::read_to_string(path)?
        .lines()
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| FeedbackError::CorruptLog {
                line: i + 1,
                reason: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn submission(chosen: &str) -> FeedbackSubmission {
        FeedbackSubmission {
            order_ref: Some("ord-1".into()),
            indication: None,
            diagnosis: None,
            model_id: "abc".into(),
            threshold_used: 0.1,
            mode: Mode::DecisionSupport,
            served_labels: vec!["a".into(), "b".into()],
            chosen_label: chosen.into(),
            override_flag: false,
            comment: None,
        }
    }

    #[test]
    fn appends_with_sequence_and_monotone_time() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fb.jsonl");
        let (log, q) = FeedbackLog::open(&path).unwrap();
        assert!(q.is_none());
        for _ in 0..5 {
            log.append(submission("a")).unwrap();
        }
        drop(log);
        let events = read_feedback_log(&path).unwrap();
        assert_eq!(
            events.iter().map(|e| e.sequence).collect::<Vec<_>>(),
            vec![1, 2, 3, 4, 5]
        );
        assert!(events
            .windows(2)
            .all(|w| w[0].timestamp_ms <= w[1].timestamp_ms));

        let (log, _) = FeedbackLog::open(&path).unwrap();
        assert_eq!(log.append(submission("b")).unwrap().sequence, 6);
    }

    #[test]
    fn torn_final_line_is_quarantined() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fb.jsonl");
        {
            let (log, _) = FeedbackLog::open(&path).unwrap();
            log.append(submission("a")).unwrap();
            log.append(submission("b")).unwrap();
        }
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(br#"{"sequence":3,"timestamp_ms":1,"ord"#)
            .unwrap();
        drop(f);

        let (log, q) = FeedbackLog::open(&path).unwrap();
        let q = q.expect("quarantined");
        assert_eq!(q.path, quarantine_path(&path));
        assert!(fs::read_to_string(&q.path).unwrap().contains(r#""ord"#));
        assert_eq!(read_feedback_log(&path).unwrap().len(), 2);
        assert_eq!(log.append(submission("a")).unwrap().sequence, 3);
        assert_eq!(read_feedback_log(&path).unwrap().len(), 3);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fb.jsonl");
        {
            let (log, _) = FeedbackLog::open(&path).unwrap();
            log.append(submission("a")).unwrap();
        }
        let good = fs::read_to_string(&path).unwrap();
        fs::write(&path, format!("garbage\n{good}")).unwrap();
        assert!(matches!(
            FeedbackLog::open(&path),
            Err(FeedbackError::CorruptLog { line: 1, .. })
        ));
    }

    #[test]
    fn wire_names() {
        let json = serde_json::to_value(submission("a")).unwrap();
        assert_eq!(json["mode"], "CDS");
        assert_eq!(json["override_flag"], false);
        let minimal = r#"{"model_id":"m","threshold_used":0.2,"mode":"AP","served_labels":["x"],"chosen_label":"x","extra":1}"#;
        let s: FeedbackSubmission = serde_json::from_str(minimal).unwrap();
        assert!(!s.override_flag && s.order_ref.is_none());
    }
}
