//! Note-level metric suite: precision/recall/F1, macro-averaged
//! multi-instrument onset F1, average overlap ratio, and cross-piece
//! aggregation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matching::{match_onset, match_onset_offset, MatchResult, Tolerances};
use crate::note::{Note, Piece};

/// Precision, recall, and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Computes precision/recall/F1 from counts. A zero denominator yields 0,
/// so F1 is 0 exactly when there are no true positives.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> Prf {
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = if tp + fn_ > 0 {
        tp as f64 / (tp + fn_) as f64
    } else {
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf {
        precision,
        recall,
        f1,
    }
}

/// Per-piece scores for one (submission, piece) pair. Serializes to JSON
/// with exactly these snake_case keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub piece_id: String,
    /// Unweighted mean of per-instrument onset F1 scores.
    pub multi_onset_f1: f64,
    /// Onset-only precision over the piece's pooled counts.
    pub precision: f64,
    /// Onset-only recall over the piece's pooled counts.
    pub recall: f64,
    /// Onset-only F1 over the piece's pooled counts.
    pub f1: f64,
    /// Pooled F1 with the offset condition added.
    pub onset_offset_f1: f64,
    /// Mean intersection-over-union across matched pairs.
    pub overlap: f64,
    pub runtime_ms: f64,
    /// Onset-only precision/recall/F1 per program number.
    pub per_instrument: BTreeMap<u8, Prf>,
}

impl MetricsReport {
    /// All-zero report for a piece the submission failed to produce.
    pub fn zero(piece_id: impl Into<String>) -> Self {
        Self {
            piece_id: piece_id.into(),
            multi_onset_f1: 0.0,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            onset_offset_f1: 0.0,
            overlap: 0.0,
            runtime_ms: 0.0,
            per_instrument: BTreeMap::new(),
        }
    }
}

/// Macro multi-instrument onset F1: per-program onset matching over the
/// union of programs present on either side, then the unweighted mean of
/// the per-program F1 values. A program present on only one side scores 0,
/// so hallucinated or missing instruments cost score. Two empty pieces
/// yield 0 with an empty map.
pub fn piece_multi_onset_f1(
    reference: &Piece,
    estimated: &Piece,
    tol: &Tolerances,
) -> (f64, BTreeMap<u8, Prf>) {
    let mut programs: Vec<u8> = reference.programs().chain(estimated.programs()).collect();
    programs.sort_unstable();
    programs.dedup();

    let mut per_instrument = BTreeMap::new();
    for program in programs {
        let m = match_onset(
            reference.notes_for_program(program),
            estimated.notes_for_program(program),
            tol,
        );
        per_instrument.insert(program, prf(m.tp, m.fp, m.fn_));
    }
    let score = if per_instrument.is_empty() {
        0.0
    } else {
        per_instrument.values().map(|p| p.f1).sum::<f64>() / per_instrument.len() as f64
    };
    (score, per_instrument)
}

/// Mean intersection-over-union of the matched note intervals; 0 when no
/// pairs matched.
pub fn average_overlap_ratio(
    pairs: &[(usize, usize)],
    reference: &[Note],
    estimated: &[Note],
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|&(ri, ei)| interval_iou(&reference[ri], &estimated[ei]))
        .sum();
    total / pairs.len() as f64
}

fn interval_iou(a: &Note, b: &Note) -> f64 {
    let intersection = (a.offset.min(b.offset) - a.onset.max(b.onset)).max(0.0);
    let union = a.offset.max(b.offset) - a.onset.min(b.onset);
    if union > 0.0 {
        intersection / union
    } else {
        0.0
    }
}

/// Builds the full per-piece report: macro onset F1, pooled onset-only
/// precision/recall/F1, pooled onset+offset F1, and overlap over the
/// onset-matched pairs of every instrument.
pub fn evaluate_piece(
    piece_id: impl Into<String>,
    reference: &Piece,
    estimated: &Piece,
    tol: &Tolerances,
    runtime_ms: f64,
) -> MetricsReport {
    let (multi_onset_f1, per_instrument) = piece_multi_onset_f1(reference, estimated, tol);

    let mut on = (0usize, 0usize, 0usize);
    let mut on_off = (0usize, 0usize, 0usize);
    let mut iou_sum = 0.0;
    let mut iou_count = 0usize;
    for &program in per_instrument.keys() {
        let ref_notes = reference.notes_for_program(program);
        let est_notes = estimated.notes_for_program(program);
        let m: MatchResult = match_onset(ref_notes, est_notes, tol);
        on.0 += m.tp;
        on.1 += m.fp;
        on.2 += m.fn_;
        for &(ri, ei) in &m.pairs {
            iou_sum += interval_iou(&ref_notes[ri], &est_notes[ei]);
            iou_count += 1;
        }
        let m = match_onset_offset(ref_notes, est_notes, tol);
        on_off.0 += m.tp;
        on_off.1 += m.fp;
        on_off.2 += m.fn_;
    }
    let pooled = prf(on.0, on.1, on.2);
    let overlap = if iou_count > 0 {
        iou_sum / iou_count as f64
    } else {
        0.0
    };

    MetricsReport {
        piece_id: piece_id.into(),
        multi_onset_f1,
        precision: pooled.precision,
        recall: pooled.recall,
        f1: pooled.f1,
        onset_offset_f1: prf(on_off.0, on_off.1, on_off.2).f1,
        overlap,
        runtime_ms,
        per_instrument,
    }
}

/// Leaderboard columns for one submission: unweighted means across pieces.
/// The `f1` column averages the macro multi-instrument onset F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub overlap: f64,
    pub runtime_ms: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot aggregate an empty report list")]
    EmptyAggregation,
}

/// Unweighted mean of each column over the per-piece reports.
pub fn aggregate_submission(reports: &[MetricsReport]) -> Result<AggregateMetrics, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyAggregation);
    }
    let n = reports.len() as f64;
    Ok(AggregateMetrics {
        f1: reports.iter().map(|r| r.multi_onset_f1).sum::<f64>() / n,
        precision: reports.iter().map(|r| r.precision).sum::<f64>() / n,
        recall: reports.iter().map(|r| r.recall).sum::<f64>() / n,
        overlap: reports.iter().map(|r| r.overlap).sum::<f64>() / n,
        runtime_ms: reports.iter().map(|r| r.runtime_ms).sum::<f64>() / n,
    })
}
