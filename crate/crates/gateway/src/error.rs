use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use emcoord_core::comms::CommsError;
use emcoord_core::ledger::LedgerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    Unauthorized,
    NotFound,
    Conflict,
    BadRequest,
    Quorum,
}

/// Error body: `{"code": ..., "detail": ...}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub detail: String,
    /// 401 rather than 403: no usable session at all.
    #[serde(skip)]
    pub no_session: bool,
}

impl ApiError {
    pub fn new(code: ErrorCode, detail: impl Into<String>) -> Self {
        ApiError {
            code,
            detail: detail.into(),
            no_session: false,
        }
    }

    pub fn no_session() -> Self {
        ApiError {
            no_session: true,
            ..ApiError::new(ErrorCode::Unauthorized, "missing or unknown session token")
        }
    }

    pub fn bad_request(detail: impl Into<String>) -> Self {
        ApiError::new(ErrorCode::BadRequest, detail)
    }

    pub fn status(&self) -> StatusCode {
        match self.code {
            ErrorCode::Unauthorized if self.no_session => StatusCode::UNAUTHORIZED,
            ErrorCode::Unauthorized => StatusCode::FORBIDDEN,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Conflict => StatusCode::CONFLICT,
            ErrorCode::BadRequest => StatusCode::BAD_REQUEST,
            ErrorCode::Quorum => StatusCode::SERVICE_UNAVAILABLE,
        }
    }
}

impl From<LedgerError> for ApiError {
    fn from(e: LedgerError) -> Self {
        use LedgerError as L;
        let code = match &e {
            L::Unauthorized(_) | L::AccessDenied(_) => ErrorCode::Unauthorized,
            L::UnknownEvent(_) => ErrorCode::NotFound,
            L::EventExists(_)
            | L::DuplicateEvent { .. }
            | L::TooFar { .. }
            | L::SelfRatification
            | L::InvalidTransition { .. }
            | L::WrongState { .. }
            | L::DuplicateParticipant(_)
            | L::StaleProposal
            | L::InvalidChain(_) => ErrorCode::Conflict,
            L::InvalidRiskLevel(_) | L::InvalidLocation | L::InvalidWorker(_) => {
                ErrorCode::BadRequest
            }
            L::QuorumNotReached { .. }
            | L::DuplicateVote(_)
            | L::UnknownValidator(_)
            | L::BadVote(_) => ErrorCode::Quorum,
        };
        ApiError::new(code, e.to_string())
    }
}

impl From<CommsError> for ApiError {
    fn from(e: CommsError) -> Self {
        let code = match &e {
            CommsError::PeerUnverified(_)
            | CommsError::NoVerifiedPeers
            | CommsError::ChannelUnavailable(_)
            | CommsError::EmergencyModeOff => ErrorCode::Conflict,
            CommsError::Oversize(_) | CommsError::Crypto(_) => ErrorCode::BadRequest,
        };
        ApiError::new(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status(), Json(self)).into_response()
    }
}
