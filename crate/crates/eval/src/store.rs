//! Append-only JSON-lines result store.
//!
//! Each line is one (submission, piece) record. The in-memory index is
//! rebuilt by replaying the log from the top, so replaying a store file
//! always reproduces the exact leaderboard. A later record with the same
//! (submission id, piece id) supersedes the earlier one.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use amt_eval_core::metrics::{aggregate_submission, MetricsReport};

use crate::leaderboard::LeaderboardEntry;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("duplicate submission id {0}")]
    DuplicateSubmission(String),
    #[error("unknown submission id {0}")]
    UnknownSubmission(String),
}

/// One log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub submission_id: String,
    pub model_name: String,
    pub received_at_ms: u64,
    pub piece_id: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
struct SubmissionSlot {
    model_name: String,
    received_at_ms: u64,
    /// Log position of the submission's first record; orders equal timestamps.
    seq: usize,
    reports: BTreeMap<String, MetricsReport>,
}

/// In-memory view over the append-only log.
#[derive(Debug, Default)]
pub struct Store {
    path: Option<PathBuf>,
    submissions: BTreeMap<String, SubmissionSlot>,
    next_seq: usize,
}

impl Store {
    /// Store backed by a log file; replays it if it exists. A trailing
    /// partial line (from an interrupted write) is ignored.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let mut store = Store {
            path: Some(path.to_path_buf()),
            ..Store::default()
        };
        if path.exists() {
            let file = File::open(path).map_err(|source| StoreError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            for line in BufReader::new(file).lines() {
                let line = line.map_err(|source| StoreError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<StoreRecord>(&line) {
                    Ok(record) => store.index(record),
                    Err(_) => continue, // torn tail line
                }
            }
        }
        Ok(store)
    }

    /// Purely in-memory store (tests, dry runs).
    pub fn in_memory() -> Self {
        Store::default()
    }

    fn index(&mut self, record: StoreRecord) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let slot = self
            .submissions
            .entry(record.submission_id)
            .or_insert_with(|| SubmissionSlot {
                model_name: record.model_name.clone(),
                received_at_ms: record.received_at_ms,
                seq,
                reports: BTreeMap::new(),
            });
        slot.reports.insert(record.piece_id, record.report);
    }

    pub fn has_submission(&self, id: &str) -> bool {
        self.submissions.contains_key(id)
    }

    pub fn submission_count(&self) -> usize {
        self.submissions.len()
    }

    /// Next free submission id of the form `sub-NNNN`.
    pub fn next_submission_id(&self) -> String {
        let mut n = self.submissions.len() + 1;
        loop {
            let id = format!("sub-{n:04}");
            if !self.has_submission(&id) {
                return id;
            }
            n += 1;
        }
    }

    /// Per-piece reports of one submission, ordered by piece id.
    pub fn reports(&self, submission_id: &str) -> Result<Vec<&MetricsReport>, StoreError> {
        self.submissions
            .get(submission_id)
            .map(|slot| slot.reports.values().collect())
            .ok_or_else(|| StoreError::UnknownSubmission(submission_id.to_string()))
    }

    /// Appends one graded submission: all records are serialized into a
    /// single buffer and written with one call, so a failure before the
    /// write leaves the log untouched.
    pub fn append_submission(&mut self, records: Vec<StoreRecord>) -> Result<(), StoreError> {
        if let Some(first) = records.first() {
            if self.has_submission(&first.submission_id) {
                return Err(StoreError::DuplicateSubmission(first.submission_id.clone()));
            }
        }
        if let Some(path) = self.path.clone() {
            let mut buffer = Vec::new();
            for record in &records {
                serde_json::to_writer(&mut buffer, record).expect("record serializes");
                buffer.push(b'\n');
            }
            let mut file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(|source| StoreError::Io {
                    path: path.clone(),
                    source,
                })?;
            file.write_all(&buffer)
                .and_then(|_| file.sync_data())
                .map_err(|source| StoreError::Io { path, source })?;
        }
        for record in records {
            self.index(record);
        }
        Ok(())
    }

    /// Current leaderboard: the latest submission per model name,
    /// aggregated, sorted by F1 descending with earlier submissions
    /// winning ties.
    pub fn leaderboard(&self) -> Vec<LeaderboardEntry> {
        let mut latest: BTreeMap<&str, &SubmissionSlot> = BTreeMap::new();
        for slot in self.submissions.values() {
            let key = slot.model_name.as_str();
            let newer = match latest.get(key) {
                Some(current) => {
                    (slot.received_at_ms, slot.seq) > (current.received_at_ms, current.seq)
                }
                None => true,
            };
            if newer {
                latest.insert(key, slot);
            }
        }
        let mut rows: Vec<(&SubmissionSlot, _)> = latest
            .into_values()
            .map(|slot| {
                let reports: Vec<MetricsReport> = slot.reports.values().cloned().collect();
                let aggregate =
                    aggregate_submission(&reports).expect("stored submissions are non-empty");
                (slot, aggregate)
            })
            .collect();
        rows.sort_by(|(sa, a), (sb, b)| {
            b.f1.total_cmp(&a.f1)
                .then_with(|| sa.received_at_ms.cmp(&sb.received_at_ms))
                .then_with(|| sa.seq.cmp(&sb.seq))
        });
        rows.into_iter()
            .enumerate()
            .map(|(i, (slot, aggregate))| {
                LeaderboardEntry::new(i + 1, slot.model_name.clone(), &aggregate)
            })
            .collect()
    }
}

/// Builds the log records for one graded submission.
pub fn submission_records(
    submission_id: &str,
    model_name: &str,
    received_at_ms: u64,
    reports: &[MetricsReport],
) -> Vec<StoreRecord> {
    reports
        .iter()
        .map(|report| StoreRecord {
            submission_id: submission_id.to_string(),
            model_name: model_name.to_string(),
            received_at_ms,
            piece_id: report.piece_id.clone(),
            report: report.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(piece_id: &str, f1: f64) -> MetricsReport {
        let mut r = MetricsReport::zero(piece_id);
        r.multi_onset_f1 = f1;
        r.precision = f1;
        r.recall = f1;
        r.f1 = f1;
        r
    }

    fn records(sub: &str, model: &str, at: u64, f1: f64) -> Vec<StoreRecord> {
        submission_records(sub, model, at, &[report("p0", f1), report("p1", f1)])
    }

    #[test]
    fn leaderboard_orders_by_f1_descending() {
        let mut store = Store::in_memory();
        store.append_submission(records("s1", "alpha", 10, 0.5938)).unwrap();
        store.append_submission(records("s2", "beta", 20, 0.5998)).unwrap();
        let board = store.leaderboard();
        assert_eq!(board[0].model_name, "beta");
        assert_eq!(board[0].rank, 1);
        assert_eq!(board[1].model_name, "alpha");
        assert_eq!(board[1].rank, 2);
    }

    #[test]
    fn equal_f1_ranks_earlier_submission_higher() {
        let mut store = Store::in_memory();
        store.append_submission(records("s1", "late", 30, 0.5)).unwrap();
        store.append_submission(records("s2", "early", 10, 0.5)).unwrap();
        let board = store.leaderboard();
        assert_eq!(board[0].model_name, "early");
        assert_eq!(board[1].model_name, "late");
    }

    #[test]
    fn resubmission_supersedes_without_growing_the_board() {
        let mut store = Store::in_memory();
        store.append_submission(records("s1", "team", 10, 0.3)).unwrap();
        store.append_submission(records("s2", "other", 15, 0.4)).unwrap();
        store.append_submission(records("s3", "team", 20, 0.6)).unwrap();
        let board = store.leaderboard();
        assert_eq!(board.len(), 2);
        assert_eq!(board[0].model_name, "team");
        assert!((board[0].f1 - 0.6).abs() < 1e-9);
    }

    #[test]
    fn duplicate_submission_id_is_rejected() {
        let mut store = Store::in_memory();
        store.append_submission(records("s1", "team", 10, 0.3)).unwrap();
        let err = store.append_submission(records("s1", "team", 20, 0.4));
        assert!(matches!(err, Err(StoreError::DuplicateSubmission(_))));
    }

    #[test]
    fn replay_reproduces_the_leaderboard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let mut store = Store::open(&path).unwrap();
        store.append_submission(records("s1", "a", 10, 0.31)).unwrap();
        store.append_submission(records("s2", "b", 20, 0.62)).unwrap();
        store.append_submission(records("s3", "a", 30, 0.55)).unwrap();
        let live = store.leaderboard();

        let replayed = Store::open(&path).unwrap();
        assert_eq!(replayed.leaderboard(), live);
        assert_eq!(replayed.submission_count(), 3);
    }

    #[test]
    fn torn_tail_line_is_ignored_on_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let mut store = Store::open(&path).unwrap();
        store.append_submission(records("s1", "a", 10, 0.4)).unwrap();
        // Simulate an interrupted append.
        let mut file = OpenOptions::new().append(true).open(&path).unwrap();
        file.write_all(b"{\"submission_id\": \"s2\", \"model").unwrap();
        drop(file);
        let replayed = Store::open(&path).unwrap();
        assert_eq!(replayed.submission_count(), 1);
        assert_eq!(replayed.leaderboard().len(), 1);
    }

    #[test]
    fn unknown_submission_lookup_fails() {
        let store = Store::in_memory();
        assert!(matches!(
            store.reports("nope"),
            Err(StoreError::UnknownSubmission(_))
        ));
    }
}
