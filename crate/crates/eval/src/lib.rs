//! Grading harness around the core scoring library: reference-set and
//! submission IO, the append-only result store, leaderboard rendering,
//! record-level statistics, and the HTTP service.

pub mod leaderboard;
pub mod manifest;
pub mod records;
pub mod service;
pub mod store;
pub mod submission;

pub use leaderboard::{to_csv, to_text, LeaderboardEntry};
pub use manifest::{write_set, Manifest, ManifestEntry, ReferenceSet};
pub use records::{analyze, read_records, Analysis, PieceRecord};
pub use service::{app, ServiceState};
pub use store::{submission_records, Store, StoreRecord};
pub use submission::{grade_submission, GradedSubmission, Submission};
