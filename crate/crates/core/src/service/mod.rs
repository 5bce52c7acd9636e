//! HTTP service: recommendations, protocol listing and feedback capture.
//!
//! | method | path | body |
//! |---|---|---|
//! | GET | `/healthz` | `{status, model_digest, label_count}` |
//! | GET | `/api/v1/protocols?level=local\|acr\|general` | `{level, labels}` |
//! | POST | `/api/v1/recommend` | `{indication, diagnosis, threshold?, k?}` |
//! | POST | `/api/v1/feedback` | a feedback submission |

mod feedback;

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

pub use feedback::{
    quarantine_path, read_feedback_log, FeedbackError, FeedbackEvent, FeedbackLog,
    FeedbackSubmission, Quarantined,
};

use crate::corpus::Normalizer;
use crate::neural::{model_digest, MlpModel};
use crate::protocols::{load_hierarchy, Level, ProtocolHierarchy};
use crate::router::{route, Mode, RouterError, MAX_K};

/// Per-field limit on request text.
pub const MAX_TEXT_BYTES: usize = 16 * 1024;
const MAX_BODY_BYTES: usize = 4 * MAX_TEXT_BYTES;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("could not load model: {0}")]
    ModelLoadFailure(String),
    #[error("could not bind {addr}: {source}")]
    BindFailure {
        addr: String,
        source: std::io::Error,
    },
    #[error("invalid service setting: {0}")]
    InvalidSetting(String),
    #[error(transparent)]
    Feedback(#[from] FeedbackError),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub model_path: PathBuf,
    pub hierarchy_path: PathBuf,
    pub feedback_log: PathBuf,
    pub default_threshold: f64,
    pub default_k: usize,
}

/// Shared, read-only after startup apart from the feedback writer.
#[derive(Debug)]
pub struct AppState {
    pub model: MlpModel,
    pub model_digest: String,
    pub hierarchy: ProtocolHierarchy,
    pub feedback: FeedbackLog,
    pub default_threshold: f64,
    pub default_k: usize,
    normalizer: Normalizer,
}

impl AppState {
    pub fn new(
        model: MlpModel,
        model_digest: String,
        hierarchy: ProtocolHierarchy,
        feedback: FeedbackLog,
        default_threshold: f64,
        default_k: usize,
    ) -> Result<Self, ServiceError> {
        if hierarchy.labels(model.level) != model.labels.as_slice() {
            return Err(ServiceError::ModelLoadFailure(format!(
                "model labels do not match the hierarchy's {} level",
                model.level
            )));
        }
        if !(default_threshold >= 0.0 && default_threshold.is_finite()) {
            return Err(ServiceError::InvalidSetting(format!(
                "threshold {default_threshold}"
            )));
        }
        if default_k == 0 || default_k > MAX_K.min(model.labels.len()) {
            return Err(ServiceError::InvalidSetting(format!(
                "k = {default_k} must lie in [1, {}]",
                MAX_K.min(model.labels.len())
            )));
        }
        let normalizer = model.normalizer();
        Ok(Self {
            model,
            model_digest,
            hierarchy,
            feedback,
            default_threshold,
            default_k,
            normalizer,
        })
    }

    /// Load model, hierarchy and feedback log from disk.
    pub fn load(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let bytes = std::fs::read(&config.model_path).map_err(|e| {
            ServiceError::ModelLoadFailure(format!("{}: {e}", config.model_path.display()))
        })?;
        let model = MlpModel::from_bytes(&bytes)
            .map_err(|e| ServiceError::ModelLoadFailure(e.to_string()))?;
        let hierarchy = load_hierarchy(&config.hierarchy_path)
            .map_err(|e| ServiceError::ModelLoadFailure(format!("hierarchy: {e}")))?;
        let (feedback, _) = FeedbackLog::open(&config.feedback_log)?;
        Self::new(
            model,
            model_digest(&bytes),
            hierarchy,
            feedback,
            config.default_threshold,
            config.default_k,
        )
    }

    pub fn max_k(&self) -> usize {
        MAX_K.min(self.model.labels.len())
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub model_digest: String,
    pub label_count: usize,
}

#[derive(Debug, Deserialize)]
pub struct ProtocolsQuery {
    pub level: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProtocolList {
    pub level: Level,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecommendRequest {
    #[serde(default)]
    pub indication: String,
    #[serde(default)]
    pub diagnosis: String,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub label: String,
    pub normalized_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedTokens {
    pub indication: Vec<String>,
    pub diagnosis: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub mode: Mode,
    pub delta: f64,
    pub threshold_used: f64,
    pub recommendations: Vec<Recommendation>,
    pub dropped_tokens: DroppedTokens,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FeedbackAck {
    pub accepted: bool,
    pub sequence: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

/// Error responses: status plus `{error}`.
#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

fn unprocessable(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::UNPROCESSABLE_ENTITY, msg.into())
}

impl From<RouterError> for ApiError {
    fn from(e: RouterError) -> Self {
        unprocessable(e.to_string())
    }
}

/// Pure recommendation path, shared by the handler and in-process callers.
pub fn recommend(state: &AppState, req: &RecommendRequest) -> Result<RecommendResponse, ApiError> {
    for (name, text) in [
        ("indication", &req.indication),
        ("diagnosis", &req.diagnosis),
    ] {
        if text.len() > MAX_TEXT_BYTES {
            return Err(ApiError(
                StatusCode::PAYLOAD_TOO_LARGE,
                format!(
                    "{name} is {} bytes; the limit is {MAX_TEXT_BYTES}",
                    text.len()
                ),
            ));
        }
    }
    let threshold = req.threshold.unwrap_or(state.default_threshold);
    let k = req.k.unwrap_or(state.default_k);
    if k == 0 || k > state.max_k() {
        return Err(unprocessable(format!(
            "k = {k} must lie in [1, {}]",
            state.max_k()
        )));
    }
    let (features, report) =
        state
            .model
            .vocabulary
            .encode_texts(&req.indication, &req.diagnosis, &state.normalizer);
    let logits = state
        .model
        .infer_one(&features)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let logits: Vec<f64> = logits.into_iter().map(f64::from).collect();
    let routed = route(&logits, &state.model.labels, threshold, k)?;
    Ok(RecommendResponse {
        mode: routed.mode,
        delta: routed.delta,
        threshold_used: routed.threshold_used,
        recommendations: routed
            .ranked
            .into_iter()
            .map(|r| Recommendation {
                label: r.label,
                normalized_score: r.normalized_score,
            })
            .collect(),
        dropped_tokens: DroppedTokens {
            indication: report.dropped_indication,
            diagnosis: report.dropped_diagnosis,
        },
    })
}

/// Check a submission against the served model before it is logged.
pub fn validate_feedback(state: &AppState, s: &FeedbackSubmission) -> Result<(), ApiError> {
    if s.model_id != state.model_digest {
        return Err(unprocessable("model_id does not match the served model"));
    }
    if s.order_ref.is_none() && s.indication.is_none() && s.diagnosis.is_none() {
        return Err(unprocessable(
            "feedback needs an order_ref or the order texts",
        ));
    }
    if !(s.threshold_used >= 0.0 && s.threshold_used.is_finite()) {
        return Err(unprocessable(
            "threshold_used must be a non-negative number",
        ));
    }
    let known = |l: &String| state.model.labels.contains(l);
    if s.served_labels.is_empty() || !s.served_labels.iter().all(known) {
        return Err(unprocessable(
            "served_labels must be a non-empty list of model labels",
        ));
    }
    if s.override_flag {
        if !known(&s.chosen_label) {
            return Err(unprocessable(format!(
                "`{}` is not a protocol of this model",
                s.chosen_label
            )));
        }
    } else if !s.served_labels.contains(&s.chosen_label) {
        return Err(unprocessable(
            "chosen_label is not in served_labels; set override_flag to pick another protocol",
        ));
    }
    Ok(())
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        model_digest: state.model_digest.clone(),
        label_count: state.model.labels.len(),
    })
}

async fn protocols(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ProtocolsQuery>,
) -> Result<Json<ProtocolList>, ApiError> {
    let level: Level = q
        .level
        .parse()
        .map_err(|e: crate::protocols::HierarchyError| unprocessable(e.to_string()))?;
    Ok(Json(ProtocolList {
        level,
        labels: state.hierarchy.labels(level).to_vec(),
    }))
}

async fn recommend_handler(
    State(state): State<Arc<AppState>>,
    Json(req): Json<RecommendRequest>,
) -> Result<Json<RecommendResponse>, ApiError> {
    recommend(&state, &req).map(Json)
}

async fn feedback_handler(
    State(state): State<Arc<AppState>>,
    Json(sub): Json<FeedbackSubmission>,
) -> Result<Json<FeedbackAck>, ApiError> {
    validate_feedback(&state, &sub)?;
    let writer = Arc::clone(&state);
    let event = tokio::task::spawn_blocking(move || writer.feedback.append(sub))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(FeedbackAck {
        accepted: true,
        sequence: event.sequence,
    }))
}

pub fn app(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/protocols", get(protocols))
        .route("/api/v1/recommend", post(recommend_handler))
        .route("/api/v1/feedback", post(feedback_handler))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(state)
}

pub async fn bind(addr: &str) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| ServiceError::BindFailure {
            addr: addr.to_string(),
            source,
        })
}

/// Serve until `shutdown` resolves.
pub async fn serve_with_shutdown(
    state: Arc<AppState>,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    axum::serve(listener, app(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}

/// Load everything, bind, and serve until Ctrl-C. `on_ready` receives the
/// bound address.
pub async fn serve(
    config: &ServiceConfig,
    bind_address: &str,
    on_ready: impl FnOnce(SocketAddr),
) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::load(config)?);
    let listener = bind(bind_address).await?;
    on_ready(listener.local_addr()?);
    serve_with_shutdown(state, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

/// Default feedback log location next to a model file.
pub fn default_feedback_log(model_path: &Path) -> PathBuf {
    model_path.with_file_name("feedback.jsonl")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Order, Vocabulary};
    use crate::neural::{ModelConfig, Network};
    use crate::protocols::HierarchyRow;

    fn state(dir: &Path) -> AppState {
        let orders = vec![
            Order::new("1", "knee pain", "tear", "a"),
            Order::new("2", "back pain", "stenosis", "b"),
            Order::new("3", "headache", "tumor", "c"),
        ];
        let vocab = Vocabulary::build_with(&orders, &Normalizer::default()).unwrap();
        let cfg = ModelConfig {
            seed: 3,
            ..ModelConfig::new(vocab.dim(), 3)
        };
        let net = Network::init(&cfg).unwrap();
        let labels: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let model = MlpModel::new(cfg, net, vocab, labels, Level::Local).unwrap();
        let h = ProtocolHierarchy::from_rows(&[
            HierarchyRow::new("a", "x", "g"),
            HierarchyRow::new("b", "x", "g"),
            HierarchyRow::new("c", "y", "g"),
        ])
        .unwrap();
        let (log, _) = FeedbackLog::open(dir.join("fb.jsonl")).unwrap();
        let digest = model_digest(&model.to_bytes());
        AppState::new(model, digest, h, log, 0.5, 2).unwrap()
    }

    fn req(ind: &str, threshold: Option<f64>, k: Option<usize>) -> RecommendRequest {
        RecommendRequest {
            indication: ind.into(),
            diagnosis: String::new(),
            threshold,
            k,
        }
    }

    #[test]
    fn recommend_modes_and_echo() {
        let dir = tempfile::tempdir().unwrap();
        let s = state(dir.path());
        let r = recommend(&s, &req("knee zzqx pain", Some(0.0), None)).unwrap();
        assert_eq!(r.mode, Mode::AutoProtocol);
        assert_eq!(r.recommendations.len(), 1);
        assert_eq!(r.dropped_tokens.indication, vec!["zzqx"]);
        let r = recommend(&s, &req("knee", Some(1.5), Some(3))).unwrap();
        assert_eq!(r.mode, Mode::DecisionSupport);
        assert_eq!(r.recommendations.len(), 3);
        let empty = recommend(&s, &req("", None, None)).unwrap();
        assert!(empty.dropped_tokens.indication.is_empty());
    }

    #[test]
    fn recommend_limits() {
        let dir = tempfile::tempdir().unwrap();
        let s = state(dir.path());
        let big = "a".repeat(MAX_TEXT_BYTES + 1);
        assert_eq!(
            recommend(&s, &req(&big, None, None)).unwrap_err().0,
            StatusCode::PAYLOAD_TOO_LARGE
        );
        assert_eq!(
            recommend(&s, &req("x", None, Some(4))).unwrap_err().0,
            StatusCode::UNPROCESSABLE_ENTITY
        );
        assert_eq!(
            recommend(&s, &req("x", Some(-1.0), None)).unwrap_err().0,
            StatusCode::UNPROCESSABLE_ENTITY
        );
    }

    #[test]
    fn feedback_validation() {
        let dir = tempfile::tempdir().unwrap();
        let s = state(dir.path());
        let ok = FeedbackSubmission {
            order_ref: Some("o".into()),
            indication: None,
            diagnosis: None,
            model_id: s.model_digest.clone(),
            threshold_used: 0.5,
            mode: Mode::DecisionSupport,
            served_labels: vec!["a".into(), "b".into()],
            chosen_label: "b".into(),
            override_flag: false,
            comment: None,
        };
        validate_feedback(&s, &ok).unwrap();
        let off_list = FeedbackSubmission {
            chosen_label: "c".into(),
            ..ok.clone()
        };
        assert!(validate_feedback(&s, &off_list).is_err());
        validate_feedback(
            &s,
            &FeedbackSubmission {
                override_flag: true,
                ..off_list.clone()
            },
        )
        .unwrap();
        let unknown = FeedbackSubmission {
            chosen_label: "zz".into(),
            override_flag: true,
            ..ok.clone()
        };
        assert!(validate_feedback(&s, &unknown).is_err());
        assert!(validate_feedback(
            &s,
            &FeedbackSubmission {
                model_id: "other".into(),
                ..ok.clone()
            }
        )
        .is_err());
        assert!(validate_feedback(
            &s,
            &FeedbackSubmission {
                order_ref: None,
                ..ok
            }
        )
        .is_err());
    }

    #[test]
    fn rejects_mismatched_hierarchy() {
        let dir = tempfile::tempdir().unwrap();
        let s = state(dir.path());
        let other = ProtocolHierarchy::from_rows(&[HierarchyRow::new("q", "x", "g")]).unwrap();
        let (log, _) = FeedbackLog::open(dir.path().join("fb2.jsonl")).unwrap();
        assert!(matches!(
            AppState::new(s.model.clone(), s.model_digest.clone(), other, log, 0.5, 2),
            Err(ServiceError::ModelLoadFailure(_))
        ));
    }
}
