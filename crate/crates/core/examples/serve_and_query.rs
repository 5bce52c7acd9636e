//! Run the recommendation service in-process and talk to it over HTTP.
//!
//! ```bash
//! cargo run --release --example serve_and_query
//! ```

use std::sync::Arc;

use protocoling::corpus::{stratified_split, Normalizer};
use protocoling::neural::model_digest;
use protocoling::pipeline::{train_level, TrainOptions};
use protocoling::protocols::Level;
use protocoling::service::{self, AppState, FeedbackLog};
use protocoling::synthgen::{default_demo_spec, generate, SynthSpec};
use serde_json::{json, Value};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = SynthSpec { order_count: 1200, ..default_demo_spec() };
    let corpus = generate(&spec)?;
    let split = stratified_split(&corpus.orders, 0.7, 3)?;
    let options = TrainOptions { epochs: 60, seed: 3, ..TrainOptions::default() };
    let (model, _) = train_level(&split.train, &corpus.hierarchy, Level::Local, &Normalizer::default(), &options)?;

    let dir = tempfile::tempdir()?;
    let (log, _) = FeedbackLog::open(dir.path().join("feedback.jsonl"))?;
    let digest = model_digest(&model.to_bytes());
    let state = Arc::new(AppState::new(model, digest, corpus.hierarchy.clone(), log, 0.1, 5)?);

    let listener = service::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    let (stop, stopped) = tokio::sync::oneshot::channel::<()>();
    let server = tokio::spawn(service::serve_with_shutdown(state, listener, async {
        let _ = stopped.await;
    }));

    let http = reqwest::Client::new();
    let health: Value = http.get(format!("{base}/healthz")).send().await?.json().await?;
    println!("healthz {health}");
    let general: Value = http.get(format!("{base}/api/v1/protocols?level=general")).send().await?.json().await?;
    println!("general protocols {}", general["labels"]);

    let order = &split.test[0];
    let rec: Value = http
        .post(format!("{base}/api/v1/recommend"))
        .json(&json!({"indication": order.indication, "diagnosis": format!("{} zzyzx", order.diagnosis), "k": 3}))
        .send()
        .await?
        .json()
        .await?;
    println!("truth {}\nrecommend {}", order.protocol, serde_json::to_string_pretty(&rec)?);

    let served: Vec<Value> = rec["recommendations"].as_array().cloned().unwrap_or_default();
    let labels: Vec<&str> = served.iter().filter_map(|r| r["label"].as_str()).collect();
    let ack: Value = http
        .post(format!("{base}/api/v1/feedback"))
        .json(&json!({
            "order_ref": order.id, "model_id": health["model_digest"], "threshold_used": rec["threshold_used"],
            "mode": rec["mode"], "served_labels": labels, "chosen_label": order.protocol,
            "override_flag": labels.first() != Some(&order.protocol.as_str()),
        }))
        .send()
        .await?
        .json()
        .await?;
    println!("feedback {ack}");

    let bad = http.post(format!("{base}/api/v1/recommend")).json(&json!({"indication": "x", "diagnosis": "", "k": 99})).send().await?;
    println!("k = 99 -> {} {}", bad.status(), bad.text().await?);

    let _ = stop.send(());
    server.await??;
    Ok(())
}
