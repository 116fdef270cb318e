//! Core scoring library for note-level transcription evaluation.
//!
//! Everything here is pure computation over in-memory data: a Standard
//! MIDI File codec, tolerance-based note matching, the metric suite, the
//! composition rule set with a seeded piece generator, and the statistics
//! used for result analysis. The crate builds without `std` (allocation
//! required); IO, file formats, and the service live in the companion
//! crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod fmath;

pub mod generate;
pub mod matching;
pub mod metrics;
pub mod note;
pub mod rules;
pub mod smf;
pub mod stats;

pub use generate::{generate_piece, generate_set, GenConfig, SetMix};
pub use matching::{match_onset, match_onset_offset, max_bipartite_matching, MatchResult, Tolerances};
pub use metrics::{
    aggregate_submission, average_overlap_ratio, evaluate_piece, piece_multi_onset_f1, prf,
    AggregateMetrics, MetricsReport, Prf,
};
pub use note::{InstrumentTrack, Meter, Note, Piece, TempoMap};
pub use rules::{note_name_to_midi, validate_piece, Rules, Violation};
pub use smf::{parse_smf, write_smf, ParseError, ParseWarning, ParsedSmf, WriteError};
