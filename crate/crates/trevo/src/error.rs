use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::{json, Value};
use trevo_core::pattern::PatternError;
use trevo_core::summaries::SummaryError;
use trevo_core::TreeError;

/// Error payload shared by every endpoint: a stable machine-readable `code`,
/// a human-readable `message` and optional structured `detail`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), detail: Value::Null }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_REQUEST", message)
    }

    pub fn no_dataset() -> Self {
        Self::new(StatusCode::CONFLICT, "NO_DATASET", "no dataset is loaded")
    }

    pub fn not_found(path: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("no endpoint at {path}"))
    }

    pub fn unknown_selection(name: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UNKNOWN_SELECTION", format!("no selection named '{name}'"))
            .with_detail(json!({ "selection": name }))
    }

    pub fn duplicate_selection(name: &str) -> Self {
        Self::new(StatusCode::CONFLICT, "DUPLICATE_SELECTION", format!("a selection named '{name}' already exists"))
            .with_detail(json!({ "selection": name }))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", message)
    }

    /// Maps a body decoding failure: malformed JSON is a 400, well-formed
    /// JSON of the wrong shape a 422.
    pub fn from_json(e: &serde_json::Error) -> Self {
        let detail = json!({ "line": e.line(), "column": e.column() });
        if e.is_data() {
            Self::invalid(e.to_string()).with_detail(detail)
        } else {
            Self::new(StatusCode::BAD_REQUEST, "INVALID_JSON", e.to_string()).with_detail(detail)
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

fn unprocessable(code: &'static str, message: String) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
}

impl From<TreeError> for ApiError {
    fn from(e: TreeError) -> Self {
        match &e {
            TreeError::UnknownNode(n) => unprocessable("UNKNOWN_NODE", e.to_string()).with_detail(json!({ "node": n })),
            TreeError::UnknownLeaf(n) => unprocessable("UNKNOWN_LEAF", e.to_string()).with_detail(json!({ "node": n })),
            _ => unprocessable("INVALID_REQUEST", e.to_string()),
        }
    }
}

impl From<SummaryError> for ApiError {
    fn from(e: SummaryError) -> Self {
        let msg = e.to_string();
        match e {
            SummaryError::EmptySelection => unprocessable("EMPTY_SELECTION", msg),
            SummaryError::KindMismatch { trait_name, .. } => {
                unprocessable("KIND_MISMATCH", msg).with_detail(json!({ "trait": trait_name }))
            }
            SummaryError::UnknownTrait(t) => unprocessable("UNKNOWN_TRAIT", msg).with_detail(json!({ "trait": t })),
            SummaryError::UnknownState { trait_name, state } => {
                unprocessable("UNKNOWN_STATE", msg).with_detail(json!({ "trait": trait_name, "state": state }))
            }
            SummaryError::InvalidBinCount(_) => unprocessable("INVALID_BIN_COUNT", msg),
            SummaryError::Tree(t) => t.into(),
            _ => unprocessable("INVALID_REQUEST", msg),
        }
    }
}

impl From<PatternError> for ApiError {
    fn from(e: PatternError) -> Self {
        let msg = e.to_string();
        match e {
            PatternError::InvalidQuery(_) => unprocessable("INVALID_QUERY", msg),
            PatternError::UnknownPreset(p) => unprocessable("UNKNOWN_PRESET", msg).with_detail(json!({ "preset": p })),
            PatternError::UnknownTrait(t) => unprocessable("UNKNOWN_TRAIT", msg).with_detail(json!({ "trait": t })),
            PatternError::KindMismatch(t) => unprocessable("KIND_MISMATCH", msg).with_detail(json!({ "trait": t })),
            PatternError::NoPairs => unprocessable("NO_PAIRS", msg),
            PatternError::NoContinuousTrait | PatternError::TooFewLeaves(_) => {
                ApiError::new(StatusCode::CONFLICT, "DATASET_UNSUITABLE", msg)
            }
            PatternError::Tree(t) => t.into(),
            _ => unprocessable("INVALID_QUERY", msg),
        }
    }
}
