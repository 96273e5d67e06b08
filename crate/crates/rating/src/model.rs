use std::path::PathBuf;

use dsa_territory::{Method, Occlusion, Stage, View};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Likert definitions shown to raters, indexed by score.
pub const RUBRIC: [&str; 4] = [
    "failure: the segmentation was located in the incorrect hemisphere and/or was outside the boundaries of the expected anatomical area",
    "marginal: the segmentation was in the correct hemisphere, but substantially (>10%) outside the boundaries of the anatomical area",
    "acceptable: the segmentation was minimally outside the expected anatomical area (<10%)",
    "perfect: the segmentation matched anatomical expectations",
];

/// Lowest score counted as a success.
pub const SUCCESS_SCORE: u8 = 2;

/// One (acquisition, method) pair to be scored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingItem {
    pub item_id: String,
    pub patient_id: String,
    pub view: View,
    pub stage: Stage,
    pub occlusion: Occlusion,
    pub method: Method,
    pub minip: PathBuf,
    pub overlay: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertRating {
    pub item_id: String,
    pub rater_id: String,
    pub score: u8,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Resolution {
    Agreement,
    Consensus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusRecord {
    pub item_id: String,
    pub final_score: u8,
    pub resolved_by: Resolution,
}

/// Entries of a session's event log, one JSON object per line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        session_id: String,
        seed: u64,
        raters: Vec<String>,
        adjudicator: String,
        blinded: bool,
        items: Vec<RatingItem>,
    },
    Rating(LikertRating),
    Consensus {
        item_id: String,
        adjudicator: String,
        score: u8,
        timestamp: u64,
    },
}
