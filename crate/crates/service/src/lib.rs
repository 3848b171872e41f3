//! Review queue for edit proposals: a journaled store, the acceptance
//! statistics editors report on, and an HTTP API over both.

mod describe;
pub mod fixtures;
pub mod http;
mod journal;
mod record;
mod stats;
mod store;

pub use describe::{render_description, source_url, DEFAULT_URL_TEMPLATE};
pub use journal::Journal;
pub use record::{Citation, Decision, FlowClass, ProposalRecord, RecordFilter, Status, UpdateType};
pub use stats::{AcceptanceStats, StatsRow};
pub use store::{Clock, FixedClock, Page, ReviewStore, SystemClock};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no proposal with id `{0}`")]
    NotFound(String),
    #[error("proposal `{0}` was already decided")]
    AlreadyDecided(String),
    #[error("accepting `{0}` requires a citation URL")]
    MissingCitation(String),
    #[error("proposal id `{0}` is already queued with different content")]
    Conflict(String),
    #[error("invalid proposal `{id}`: {reason}")]
    Invalid { id: String, reason: String },
    #[error("missing source URL")]
    MissingUrl,
    #[error("journal {path}: {message}")]
    Journal { path: String, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}
