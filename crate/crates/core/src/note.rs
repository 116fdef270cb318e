//! Symbolic note model: notes, instrument tracks, pieces, and the tempo map
//! that converts between MIDI ticks and wall-clock seconds.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One sounded pitch event, timed in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Note {
    /// MIDI note number, 0–127.
    pub pitch: u8,
    /// Start time in seconds.
    pub onset: f64,
    /// End time in seconds; always strictly greater than `onset`.
    pub offset: f64,
    /// MIDI velocity, 1–127.
    pub velocity: u8,
}

impl Note {
    pub fn new(pitch: u8, onset: f64, offset: f64, velocity: u8) -> Self {
        Self {
            pitch,
            onset,
            offset,
            velocity,
        }
    }

    /// Note length in seconds.
    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }
}

/// Orders notes by (onset, pitch), the canonical track order; offset and
/// velocity break remaining ties so the order is total.
fn note_order(a: &Note, b: &Note) -> core::cmp::Ordering {
    a.onset
        .total_cmp(&b.onset)
        .then_with(|| a.pitch.cmp(&b.pitch))
        .then_with(|| a.offset.total_cmp(&b.offset))
        .then_with(|| a.velocity.cmp(&b.velocity))
}

/// All notes played by one General MIDI program within a piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentTrack {
    /// General MIDI program number, 0–127.
    pub program: u8,
    /// Notes sorted ascending by onset, ties broken by pitch.
    pub notes: Vec<Note>,
}

impl InstrumentTrack {
    pub fn new(program: u8, mut notes: Vec<Note>) -> Self {
        notes.sort_by(note_order);
        Self { program, notes }
    }
}

/// Time signature as notated, e.g. 3/4 or 6/8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meter {
    pub numerator: u8,
    pub denominator: u8,
}

impl Meter {
    pub const fn new(numerator: u8, denominator: u8) -> Self {
        Self {
            numerator,
            denominator,
        }
    }

    /// Measure length expressed in quarter notes (6/8 -> 3 quarters).
    pub fn quarters_per_measure(&self) -> f64 {
        self.numerator as f64 * 4.0 / self.denominator as f64
    }
}

impl Default for Meter {
    fn default() -> Self {
        Meter::new(4, 4)
    }
}

impl core::fmt::Display for Meter {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}/{}", self.numerator, self.denominator)
    }
}

/// Default SMF tempo: 120 BPM, i.e. 500000 microseconds per quarter note.
pub const DEFAULT_US_PER_QUARTER: u32 = 500_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TempoMapError {
    #[error("tempo map division must be positive")]
    ZeroDivision,
    #[error("tempo map ticks must be strictly increasing (entry {index} at tick {tick})")]
    NonIncreasingTicks { index: usize, tick: u64 },
    #[error("tempo of zero microseconds per quarter at tick {tick}")]
    ZeroTempo { tick: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TempoSegment {
    tick: u64,
    us_per_quarter: u32,
    /// Wall-clock seconds accumulated up to `tick`.
    seconds: f64,
}

/// Piecewise-constant tempo over tick time. Converts ticks to seconds and
/// back; both directions are strictly monotone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TempoMap {
    division: u16,
    segments: Vec<TempoSegment>,
}

impl TempoMap {
    /// Builds a map from (tick, microseconds-per-quarter) change points.
    /// A missing entry at tick 0 is filled with the 120 BPM default.
    pub fn new(division: u16, entries: &[(u64, u32)]) -> Result<Self, TempoMapError> {
        if division == 0 {
            return Err(TempoMapError::ZeroDivision);
        }
        let mut segments: Vec<TempoSegment> = Vec::with_capacity(entries.len() + 1);
        segments.push(TempoSegment {
            tick: 0,
            us_per_quarter: DEFAULT_US_PER_QUARTER,
            seconds: 0.0,
        });
        for (index, &(tick, us_per_quarter)) in entries.iter().enumerate() {
            if us_per_quarter == 0 {
                return Err(TempoMapError::ZeroTempo { tick });
            }
            if index == 0 && tick == 0 {
                // Entry at tick 0 replaces the implicit default.
                segments[0].us_per_quarter = us_per_quarter;
                continue;
            }
            let prev = segments.last().expect("tick-0 segment present");
            if tick <= prev.tick {
                return Err(TempoMapError::NonIncreasingTicks { index, tick });
            }
            let prev = *prev;
            let seconds = prev.seconds
                + (tick - prev.tick) as f64 * prev.us_per_quarter as f64
                    / (division as f64 * 1e6);
            segments.push(TempoSegment {
                tick,
                us_per_quarter,
                seconds,
            });
        }
        Ok(Self { division, segments })
    }

    /// Single-tempo map.
    pub fn constant(division: u16, us_per_quarter: u32) -> Self {
        Self::new(division, &[(0, us_per_quarter)]).expect("constant map is valid")
    }

    pub fn division(&self) -> u16 {
        self.division
    }

    /// Change points as (tick, microseconds-per-quarter) pairs.
    pub fn entries(&self) -> impl Iterator<Item = (u64, u32)> + '_ {
        self.segments.iter().map(|s| (s.tick, s.us_per_quarter))
    }

    fn segment_for_tick(&self, tick: u64) -> &TempoSegment {
        match self.segments.binary_search_by(|s| s.tick.cmp(&tick)) {
            Ok(i) => &self.segments[i],
            Err(i) => &self.segments[i - 1],
        }
    }

    /// Seconds elapsed at `tick`: piecewise-linear in the tick count, exact
    /// at segment boundaries.
    pub fn ticks_to_seconds(&self, tick: u64) -> f64 {
        let seg = self.segment_for_tick(tick);
        seg.seconds
            + (tick - seg.tick) as f64 * seg.us_per_quarter as f64 / (self.division as f64 * 1e6)
    }

    /// Inverse of [`ticks_to_seconds`](Self::ticks_to_seconds), returning a
    /// real-valued tick position. Negative times clamp to tick 0.
    pub fn seconds_to_ticks(&self, seconds: f64) -> f64 {
        if seconds <= 0.0 {
            return 0.0;
        }
        let idx = self
            .segments
            .partition_point(|s| s.seconds <= seconds)
            .saturating_sub(1);
        let seg = &self.segments[idx];
        seg.tick as f64
            + (seconds - seg.seconds) * (self.division as f64 * 1e6) / seg.us_per_quarter as f64
    }
}

/// A full piece: one track per instrument program plus timing metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    /// Instrument tracks sorted by program; at most one track per program.
    pub tracks: Vec<InstrumentTrack>,
    pub tempo_map: TempoMap,
    pub meter: Meter,
}

impl Piece {
    /// Assembles a piece, merging tracks that share a program and sorting
    /// tracks by program number.
    pub fn new(tracks: Vec<InstrumentTrack>, tempo_map: TempoMap, meter: Meter) -> Self {
        let mut by_program: Vec<InstrumentTrack> = Vec::new();
        for track in tracks {
            match by_program.iter_mut().find(|t| t.program == track.program) {
                Some(existing) => existing.notes.extend(track.notes),
                None => by_program.push(track),
            }
        }
        for track in &mut by_program {
            track.notes.sort_by(note_order);
        }
        by_program.sort_by_key(|t| t.program);
        Self {
            tracks: by_program,
            tempo_map,
            meter,
        }
    }

    pub fn division(&self) -> u16 {
        self.tempo_map.division()
    }

    /// Notes of the given program, or an empty slice if absent.
    pub fn notes_for_program(&self, program: u8) -> &[Note] {
        self.tracks
            .iter()
            .find(|t| t.program == program)
            .map(|t| t.notes.as_slice())
            .unwrap_or(&[])
    }

    /// Program numbers present, ascending.
    pub fn programs(&self) -> impl Iterator<Item = u8> + '_ {
        self.tracks.iter().map(|t| t.program)
    }

    pub fn note_count(&self) -> usize {
        self.tracks.iter().map(|t| t.notes.len()).sum()
    }

    /// Largest note offset in seconds, or 0 for an empty piece.
    pub fn duration(&self) -> f64 {
        self.tracks
            .iter()
            .flat_map(|t| t.notes.iter())
            .map(|n| n.offset)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn quarter_note_at_default_tempo_is_half_second() {
        let map = TempoMap::constant(480, 500_000);
        assert_eq!(map.ticks_to_seconds(480), 0.5);
    }

    #[test]
    fn tick_zero_is_time_zero() {
        let map = TempoMap::constant(480, 500_000);
        assert_eq!(map.ticks_to_seconds(0), 0.0);
    }

    #[test]
    fn two_segment_integration() {
        // 500000 us/qn until tick 480, then 1000000 us/qn: tick 960 is
        // 0.5 s + 480 * 1e6 / (480 * 1e6) = 1.5 s.
        let map = TempoMap::new(480, &[(0, 500_000), (480, 1_000_000)]).unwrap();
        assert_eq!(map.ticks_to_seconds(960), 1.5);
        assert_eq!(map.ticks_to_seconds(480), 0.5);
    }

    #[test]
    fn missing_tick_zero_gets_default_tempo() {
        let map = TempoMap::new(480, &[(960, 1_000_000)]).unwrap();
        assert_eq!(map.ticks_to_seconds(480), 0.5);
        assert_eq!(map.ticks_to_seconds(960), 1.0);
        assert_eq!(map.ticks_to_seconds(1440), 2.0);
    }

    #[test]
    fn non_increasing_ticks_rejected() {
        let err = TempoMap::new(480, &[(0, 500_000), (480, 600_000), (480, 700_000)]);
        assert!(matches!(
            err,
            Err(TempoMapError::NonIncreasingTicks { index: 2, .. })
        ));
    }

    #[test]
    fn seconds_to_ticks_inverts_tick_grid() {
        let map = TempoMap::new(480, &[(0, 652_174), (960, 500_000), (1920, 1_000_000)]).unwrap();
        for tick in (0..4000).step_by(37) {
            let s = map.ticks_to_seconds(tick);
            let back = map.seconds_to_ticks(s);
            assert!(
                (back - tick as f64).abs() < 1e-6,
                "tick {tick} -> {s} s -> {back}"
            );
        }
    }

    #[test]
    fn conversion_is_strictly_monotone() {
        let map = TempoMap::new(480, &[(0, 900_000), (100, 500_000), (101, 1_000_000)]).unwrap();
        let mut prev = -1.0;
        for tick in 0..500 {
            let s = map.ticks_to_seconds(tick);
            assert!(s > prev);
            prev = s;
        }
    }

    #[test]
    fn piece_merges_duplicate_programs() {
        let a = InstrumentTrack::new(0, vec![Note::new(60, 1.0, 2.0, 64)]);
        let b = InstrumentTrack::new(0, vec![Note::new(62, 0.0, 0.5, 64)]);
        let piece = Piece::new(vec![a, b], TempoMap::constant(480, 500_000), Meter::default());
        assert_eq!(piece.tracks.len(), 1);
        assert_eq!(piece.tracks[0].notes[0].pitch, 62);
        assert_eq!(piece.tracks[0].notes[1].pitch, 60);
    }

    #[test]
    fn track_sorts_by_onset_then_pitch() {
        let track = InstrumentTrack::new(
            0,
            vec![
                Note::new(64, 0.0, 1.0, 80),
                Note::new(60, 0.0, 1.0, 80),
                Note::new(50, 0.5, 1.0, 80),
            ],
        );
        let pitches: Vec<u8> = track.notes.iter().map(|n| n.pitch).collect();
        assert_eq!(pitches, vec![60, 64, 50]);
    }
}
