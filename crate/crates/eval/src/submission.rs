//! Submissions (directories of estimated MIDI) and grading against a
//! reference set.
//!
//! Grading never aborts on a bad estimate: pieces that are missing or
//! unparseable score zero and the problem is recorded as a warning on the
//! submission.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use amt_eval_core::matching::Tolerances;
use amt_eval_core::metrics::{aggregate_submission, evaluate_piece, AggregateMetrics, MetricsReport};
use amt_eval_core::smf::parse_smf;

use crate::manifest::{list_midi_files, ReferenceSet};

/// Optional sidecar file mapping piece id to self-reported runtime in ms.
pub const RUNTIME_FILE: &str = "runtime.json";

#[derive(Debug, Error)]
pub enum SubmissionError {
    #[error("cannot read submission directory {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot parse {path}: {source}")]
    BadRuntimeFile {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("reference set is empty")]
    EmptyReferenceSet,
}

/// One incoming submission: estimated MIDI files keyed by piece id.
#[derive(Debug, Clone)]
pub struct Submission {
    pub model_name: String,
    pub files: BTreeMap<String, PathBuf>,
    /// Self-reported per-piece runtimes; empty when not provided.
    pub runtime_ms: BTreeMap<String, f64>,
}

impl Submission {
    /// Reads a submission directory: every `<piece_id>.mid` plus an
    /// optional `runtime.json`.
    pub fn from_dir(model_name: impl Into<String>, dir: &Path) -> Result<Self, SubmissionError> {
        let files = list_midi_files(dir)
            .map_err(|e| SubmissionError::Io {
                path: dir.to_path_buf(),
                source: io::Error::other(e.to_string()),
            })?
            .into_iter()
            .collect();
        let runtime_path = dir.join(RUNTIME_FILE);
        let runtime_ms = if runtime_path.exists() {
            let text = fs::read_to_string(&runtime_path).map_err(|source| SubmissionError::Io {
                path: runtime_path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| SubmissionError::BadRuntimeFile {
                path: runtime_path,
                source,
            })?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            model_name: model_name.into(),
            files,
            runtime_ms,
        })
    }
}

/// Grading output for one submission.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradedSubmission {
    pub model_name: String,
    pub aggregate: AggregateMetrics,
    pub reports: Vec<MetricsReport>,
    pub warnings: Vec<String>,
}

/// Grades a submission against every reference piece. Reference pieces the
/// submission does not cover score all-zero; estimated files that fail to
/// read or parse score all-zero with a warning; extra files that match no
/// reference id are ignored with a warning.
pub fn grade_submission(
    submission: &Submission,
    references: &ReferenceSet,
    tolerances: &Tolerances,
) -> Result<GradedSubmission, SubmissionError> {
    if references.is_empty() {
        return Err(SubmissionError::EmptyReferenceSet);
    }

    let refs: Vec<(&String, &amt_eval_core::note::Piece)> = references.iter().collect();
    let graded: Vec<(MetricsReport, Option<String>)> = refs
        .par_iter()
        .map(|(piece_id, reference)| grade_piece(submission, piece_id, reference, tolerances))
        .collect();

    let mut reports = Vec::with_capacity(graded.len());
    let mut warnings = Vec::new();
    if submission.runtime_ms.is_empty() {
        warnings.push("self-reported runtime missing; runtime_ms recorded as 0".to_string());
    }
    for (report, warning) in graded {
        reports.push(report);
        warnings.extend(warning);
    }
    for extra in submission.files.keys() {
        if references.get(extra).is_none() {
            warnings.push(format!("ignoring {extra}.mid: no such reference piece"));
        }
    }

    let aggregate = aggregate_submission(&reports).expect("reference set is non-empty");
    Ok(GradedSubmission {
        model_name: submission.model_name.clone(),
        aggregate,
        reports,
        warnings,
    })
}

fn grade_piece(
    submission: &Submission,
    piece_id: &str,
    reference: &amt_eval_core::note::Piece,
    tolerances: &Tolerances,
) -> (MetricsReport, Option<String>) {
    let runtime = submission.runtime_ms.get(piece_id).copied().unwrap_or(0.0);
    let path = match submission.files.get(piece_id) {
        Some(path) => path,
        None => {
            return (
                MetricsReport::zero(piece_id),
                Some(format!("{piece_id}: not in submission, scored 0")),
            )
        }
    };
    let bytes = match fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) => {
            return (
                MetricsReport::zero(piece_id),
                Some(format!("{piece_id}: unreadable ({e}), scored 0")),
            )
        }
    };
    match parse_smf(&bytes) {
        Ok(parsed) => (
            evaluate_piece(piece_id, reference, &parsed.piece, tolerances, runtime),
            None,
        ),
        Err(e) => (
            MetricsReport::zero(piece_id),
            Some(format!("{piece_id}: estimate does not parse ({e}), scored 0")),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::write_set;
    use amt_eval_core::generate::{generate_set, SetMix};
    use amt_eval_core::note::{InstrumentTrack, Note, Piece};
    use amt_eval_core::smf::write_smf;

    fn reference_fixture(dir: &Path, count: usize) -> ReferenceSet {
        let pieces = generate_set(5, count, &SetMix::default()).unwrap();
        write_set(dir, 5, &pieces).unwrap();
        ReferenceSet::load(dir).unwrap()
    }

    #[test]
    fn identical_submission_scores_one() {
        let ref_dir = tempfile::tempdir().unwrap();
        let refs = reference_fixture(ref_dir.path(), 4);
        let sub = Submission::from_dir("echo", ref_dir.path()).unwrap();
        let graded = grade_submission(&sub, &refs, &Tolerances::default()).unwrap();
        assert_eq!(graded.aggregate.f1, 1.0);
        assert_eq!(graded.aggregate.precision, 1.0);
        assert_eq!(graded.aggregate.recall, 1.0);
        assert_eq!(graded.aggregate.overlap, 1.0);
        assert_eq!(graded.reports.len(), 4);
    }

    #[test]
    fn empty_submission_scores_zero_everywhere() {
        let ref_dir = tempfile::tempdir().unwrap();
        let refs = reference_fixture(ref_dir.path(), 3);
        let sub = Submission {
            model_name: "empty".into(),
            files: BTreeMap::new(),
            runtime_ms: BTreeMap::new(),
        };
        let graded = grade_submission(&sub, &refs, &Tolerances::default()).unwrap();
        assert_eq!(graded.aggregate.f1, 0.0);
        assert_eq!(graded.reports.len(), 3);
        assert!(graded.warnings.iter().any(|w| w.contains("scored 0")));
    }

    #[test]
    fn transposed_submission_scores_zero_f1() {
        let ref_dir = tempfile::tempdir().unwrap();
        let refs = reference_fixture(ref_dir.path(), 2);
        let sub_dir = tempfile::tempdir().unwrap();
        for (id, piece) in refs.iter() {
            let transposed = Piece::new(
                piece
                    .tracks
                    .iter()
                    .map(|t| {
                        InstrumentTrack::new(
                            t.program,
                            t.notes
                                .iter()
                                .map(|n| Note::new(n.pitch + 1, n.onset, n.offset, n.velocity))
                                .collect(),
                        )
                    })
                    .collect(),
                piece.tempo_map.clone(),
                piece.meter,
            );
            std::fs::write(
                sub_dir.path().join(format!("{id}.mid")),
                write_smf(&transposed).unwrap(),
            )
            .unwrap();
        }
        let sub = Submission::from_dir("transposed", sub_dir.path()).unwrap();
        let graded = grade_submission(&sub, &refs, &Tolerances::default()).unwrap();
        assert_eq!(graded.aggregate.f1, 0.0);
        assert_eq!(graded.aggregate.precision, 0.0);
    }

    #[test]
    fn unparseable_estimate_scores_zero_with_warning() {
        let ref_dir = tempfile::tempdir().unwrap();
        let refs = reference_fixture(ref_dir.path(), 2);
        let sub_dir = tempfile::tempdir().unwrap();
        std::fs::write(sub_dir.path().join("piece_5_0.mid"), b"garbage").unwrap();
        let sub = Submission::from_dir("broken", sub_dir.path()).unwrap();
        let graded = grade_submission(&sub, &refs, &Tolerances::default()).unwrap();
        assert!(graded
            .warnings
            .iter()
            .any(|w| w.contains("does not parse")));
        assert_eq!(graded.reports.len(), 2);
    }

    #[test]
    fn grading_is_deterministic() {
        let ref_dir = tempfile::tempdir().unwrap();
        let refs = reference_fixture(ref_dir.path(), 3);
        let sub = Submission::from_dir("echo", ref_dir.path()).unwrap();
        let a = grade_submission(&sub, &refs, &Tolerances::default()).unwrap();
        let b = grade_submission(&sub, &refs, &Tolerances::default()).unwrap();
        assert_eq!(
            serde_json::to_string(&a.reports).unwrap(),
            serde_json::to_string(&b.reports).unwrap()
        );
    }

    #[test]
    fn runtime_sidecar_is_picked_up() {
        let ref_dir = tempfile::tempdir().unwrap();
        let refs = reference_fixture(ref_dir.path(), 2);
        let sub_dir = tempfile::tempdir().unwrap();
        for (id, piece) in refs.iter() {
            std::fs::write(
                sub_dir.path().join(format!("{id}.mid")),
                write_smf(piece).unwrap(),
            )
            .unwrap();
        }
        std::fs::write(
            sub_dir.path().join(RUNTIME_FILE),
            r#"{"piece_5_0": 20.0, "piece_5_1": 24.1}"#,
        )
        .unwrap();
        let sub = Submission::from_dir("timed", sub_dir.path()).unwrap();
        let graded = grade_submission(&sub, &refs, &Tolerances::default()).unwrap();
        assert!((graded.aggregate.runtime_ms - 22.05).abs() < 1e-9);
        assert!(graded.warnings.is_empty());
    }
}
