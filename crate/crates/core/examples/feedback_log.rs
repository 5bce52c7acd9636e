//! Append feedback events durably and recover from a torn final write.
//!
//! ```bash
//! cargo run --example feedback_log
//! ```

use std::io::Write;

use protocoling::router::Mode;
use protocoling::service::{read_feedback_log, FeedbackLog, FeedbackSubmission};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("feedback.jsonl");

    let (log, _) = FeedbackLog::open(&path)?;
    for (chosen, override_flag) in [("mr knee", false), ("mr shoulder", true)] {
        let event = log.append(FeedbackSubmission {
            order_ref: Some("ord-000042".into()),
            indication: None,
            diagnosis: None,
            model_id: "demo".into(),
            threshold_used: 0.1,
            mode: Mode::DecisionSupport,
            served_labels: vec!["mr knee".into(), "mr shoulder".into()],
            chosen_label: chosen.into(),
            override_flag,
            comment: None,
        })?;
        println!("logged #{} at {} ms", event.sequence, event.timestamp_ms);
    }
    drop(log);

    // simulate a crash halfway through a write
    std::fs::OpenOptions::new().append(true).open(&path)?.write_all(br#"{"sequence":3,"timest"#)?;

    let (log, quarantined) = FeedbackLog::open(&path)?;
    if let Some(q) = quarantined {
        println!("moved {} torn bytes to {}", q.bytes, q.path.display());
    }
    println!("{} intact events on disk", read_feedback_log(log.path())?.len());
    Ok(())
}
