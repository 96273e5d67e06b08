//! HTTP service for blinded two-rater Likert scoring of territory
//! segmentations, with adjudicated consensus and success-rate analysis.
//!
//! Every session is an append-only JSONL event log; state is rebuilt by
//! replaying it on startup.

pub mod api;
mod composite;
mod error;
pub mod model;
pub mod session;
pub mod store;

pub use api::{router, serve};
pub use composite::composite_png;
pub use error::ServiceError;
pub use model::{ConsensusRecord, Event, LikertRating, RatingItem, Resolution, RUBRIC, SCHEMA_VERSION, SUCCESS_SCORE};
pub use session::{plan_session, Results, Session};
pub use store::Store;
