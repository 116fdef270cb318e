//! The eight composition constraints for test pieces, plus the validator
//! that reports every violation in a piece.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fmath;
use crate::note::Piece;

/// GM programs counted as string instruments (violin, viola, cello).
pub const STRING_PROGRAMS: [u8; 3] = [40, 41, 42];

/// The eight allowed GM programs: piano, violin, viola, cello, flute,
/// bassoon, trombone, oboe.
pub const ALLOWED_PROGRAMS: [u8; 8] = [0, 40, 41, 42, 73, 70, 57, 68];

/// Composition constraints. Rule ids 1-8 map to the fields in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rules {
    /// Rule 1: tempo interval in BPM, inclusive.
    pub tempo_bpm: (f64, f64),
    /// Rule 2: allowed meters as (numerator, denominator) pairs.
    pub meters: Vec<(u8, u8)>,
    /// Rule 3: finest allowed subdivision, in note values per whole note
    /// (16 = sixteenth notes).
    pub max_subdivision: u32,
    /// Rule 4: inclusive MIDI pitch range.
    pub pitch_range: (u8, u8),
    /// Rule 5: inclusive velocity range (pianissimo to fortissimo).
    pub velocity_range: (u8, u8),
    /// Rule 6: allowed GM program numbers.
    pub instrument_whitelist: Vec<u8>,
    /// Rule 7: maximum instruments per piece.
    pub max_instruments: usize,
    /// Rule 8: maximum string instruments per piece.
    pub max_string_instruments: usize,
}

impl Default for Rules {
    fn default() -> Self {
        Self {
            tempo_bpm: (60.0, 90.0),
            meters: [(3, 4), (4, 4), (6, 8)].into_iter().collect(),
            max_subdivision: 16,
            pitch_range: (36, 96), // C2..C7
            velocity_range: (33, 112),
            instrument_whitelist: ALLOWED_PROGRAMS.into_iter().collect(),
            max_instruments: 3,
            max_string_instruments: 1,
        }
    }
}

/// Identifies which constraint a violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum RuleId {
    Tempo = 1,
    Meter = 2,
    Subdivision = 3,
    PitchRange = 4,
    VelocityRange = 5,
    InstrumentWhitelist = 6,
    InstrumentCount = 7,
    StringCount = 8,
}

impl RuleId {
    pub fn id(self) -> u8 {
        self as u8
    }
}

/// Where a violation was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    /// Piece-level property (tempo, meter, instrument counts).
    Global,
    /// A whole track, by index into `piece.tracks`.
    Track(usize),
    /// One note: (track index, note index).
    Note(usize, usize),
}

/// One broken rule, with enough context to point at the culprit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: RuleId,
    pub location: Location,
    pub message: String,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "rule {}: {}", self.rule.id(), self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NoteNameError {
    #[error("empty pitch name")]
    Empty,
    #[error("unknown pitch letter {0:?}")]
    BadLetter(char),
    #[error("malformed accidental or octave in {0:?}")]
    BadSuffix(String),
    #[error("pitch name {0:?} is outside MIDI range 0..=127")]
    OutOfRange(String),
}

/// Converts a pitch name such as "C4", "F#3", or "Bb2" to its MIDI number,
/// with middle C = C4 = 60.
pub fn note_name_to_midi(name: &str) -> Result<u8, NoteNameError> {
    let mut chars = name.chars();
    let letter = chars.next().ok_or(NoteNameError::Empty)?;
    let base: i32 = match letter.to_ascii_uppercase() {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        other => return Err(NoteNameError::BadLetter(other)),
    };
    let rest: String = chars.collect();
    let accidental_len = rest
        .chars()
        .take_while(|&c| c == '#' || c == 'b' || c == 'x')
        .count();
    let (accidentals, octave_str) = rest.split_at(accidental_len);
    let accidental: i32 = accidentals
        .chars()
        .map(|c| match c {
            '#' => 1,
            'x' => 2,
            _ => -1, // 'b'
        })
        .sum();
    let octave: i32 = octave_str
        .parse()
        .map_err(|_| NoteNameError::BadSuffix(String::from(name)))?;
    let midi = (octave + 1) * 12 + base + accidental;
    u8::try_from(midi).map_err(|_| NoteNameError::OutOfRange(String::from(name)))
}

/// Slack in BPM when checking tempo bounds, absorbing the rounding of
/// microseconds-per-quarter to an integer.
const TEMPO_SLACK_BPM: f64 = 0.01;

/// Slack in ticks when checking grid membership.
const GRID_SLACK_TICKS: f64 = 1.0;

/// Checks a piece against every rule and returns all violations found;
/// an empty list means the piece is compliant.
pub fn validate_piece(piece: &Piece, rules: &Rules) -> Vec<Violation> {
    let mut violations = Vec::new();

    // Rule 1: every tempo segment within the BPM interval.
    for (tick, us_per_quarter) in piece.tempo_map.entries() {
        let bpm = 60_000_000.0 / us_per_quarter as f64;
        if bpm < rules.tempo_bpm.0 - TEMPO_SLACK_BPM || bpm > rules.tempo_bpm.1 + TEMPO_SLACK_BPM {
            violations.push(Violation {
                rule: RuleId::Tempo,
                location: Location::Global,
                message: format!(
                    "tempo {:.2} BPM at tick {} outside [{}, {}]",
                    bpm, tick, rules.tempo_bpm.0, rules.tempo_bpm.1
                ),
            });
        }
    }

    // Rule 2: meter must be whitelisted.
    let meter = (piece.meter.numerator, piece.meter.denominator);
    if !rules.meters.contains(&meter) {
        violations.push(Violation {
            rule: RuleId::Meter,
            location: Location::Global,
            message: format!("meter {} is not allowed", piece.meter),
        });
    }

    // Rule 3: onsets and offsets on the subdivision grid (within one tick).
    let grid_step = piece.division() as f64 * 4.0 / rules.max_subdivision as f64;
    for (ti, track) in piece.tracks.iter().enumerate() {
        for (ni, note) in track.notes.iter().enumerate() {
            for (what, seconds) in [("onset", note.onset), ("offset", note.offset)] {
                let tick = piece.tempo_map.seconds_to_ticks(seconds);
                let nearest = fmath::round(tick / grid_step) * grid_step;
                if fmath::abs(tick - nearest) > GRID_SLACK_TICKS {
                    violations.push(Violation {
                        rule: RuleId::Subdivision,
                        location: Location::Note(ti, ni),
                        message: format!(
                            "{} at tick {:.2} is off the 1/{} grid (step {} ticks)",
                            what, tick, rules.max_subdivision, grid_step
                        ),
                    });
                }
            }
        }
    }

    // Rules 4 and 5: pitch and velocity ranges per note.
    for (ti, track) in piece.tracks.iter().enumerate() {
        for (ni, note) in track.notes.iter().enumerate() {
            if note.pitch < rules.pitch_range.0 || note.pitch > rules.pitch_range.1 {
                violations.push(Violation {
                    rule: RuleId::PitchRange,
                    location: Location::Note(ti, ni),
                    message: format!(
                        "pitch {} outside [{}, {}]",
                        note.pitch, rules.pitch_range.0, rules.pitch_range.1
                    ),
                });
            }
            if note.velocity < rules.velocity_range.0 || note.velocity > rules.velocity_range.1 {
                violations.push(Violation {
                    rule: RuleId::VelocityRange,
                    location: Location::Note(ti, ni),
                    message: format!(
                        "velocity {} outside [{}, {}]",
                        note.velocity, rules.velocity_range.0, rules.velocity_range.1
                    ),
                });
            }
        }
    }

    // Rule 6: every program whitelisted.
    for (ti, track) in piece.tracks.iter().enumerate() {
        if !rules.instrument_whitelist.contains(&track.program) {
            violations.push(Violation {
                rule: RuleId::InstrumentWhitelist,
                location: Location::Track(ti),
                message: format!("program {} is not an allowed instrument", track.program),
            });
        }
    }

    // Rule 7: instrument count.
    if piece.tracks.len() > rules.max_instruments {
        violations.push(Violation {
            rule: RuleId::InstrumentCount,
            location: Location::Global,
            message: format!(
                "{} instruments exceed the maximum of {}",
                piece.tracks.len(),
                rules.max_instruments
            ),
        });
    }

    // Rule 8: string instrument count.
    let strings = piece
        .tracks
        .iter()
        .filter(|t| STRING_PROGRAMS.contains(&t.program))
        .count();
    if strings > rules.max_string_instruments {
        violations.push(Violation {
            rule: RuleId::StringCount,
            location: Location::Global,
            message: format!(
                "{} string instruments exceed the maximum of {}",
                strings, rules.max_string_instruments
            ),
        });
    }

    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::note::{InstrumentTrack, Meter, Note, Piece, TempoMap};
    use alloc::vec;

    fn piece_at_tempo(us_per_quarter: u32) -> Piece {
        let map = TempoMap::constant(480, us_per_quarter);
        let note = |pitch, start_tick: u64, end_tick: u64| {
            Note::new(
                pitch,
                map.ticks_to_seconds(start_tick),
                map.ticks_to_seconds(end_tick),
                64,
            )
        };
        Piece::new(
            vec![
                InstrumentTrack::new(0, vec![note(60, 0, 480), note(64, 480, 960)]),
                InstrumentTrack::new(40, vec![note(67, 0, 960)]),
            ],
            map,
            Meter::new(4, 4),
        )
    }

    fn compliant_piece() -> Piece {
        // 75 BPM = 800000 us per quarter; quarter-note notes on the grid.
        piece_at_tempo(800_000)
    }

    #[test]
    fn compliant_piece_has_no_violations() {
        assert!(validate_piece(&compliant_piece(), &Rules::default()).is_empty());
    }

    #[test]
    fn tempo_out_of_range_is_rule_one() {
        let piece = piece_at_tempo(600_000); // 100 BPM
        let violations = validate_piece(&piece, &Rules::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, RuleId::Tempo);
    }

    #[test]
    fn boundary_tempos_are_accepted() {
        // 90 BPM rounds to 666667 us per quarter; the slack absorbs it.
        for us in [1_000_000u32, 666_667] {
            let piece = piece_at_tempo(us);
            assert!(
                validate_piece(&piece, &Rules::default()).is_empty(),
                "tempo {us} should be in range"
            );
        }
    }

    #[test]
    fn disallowed_meter_is_rule_two() {
        let mut piece = compliant_piece();
        piece.meter = Meter::new(5, 4);
        let violations = validate_piece(&piece, &Rules::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, RuleId::Meter);
    }

    #[test]
    fn off_grid_onset_is_rule_three() {
        let mut piece = compliant_piece();
        // Off the sixteenth grid by 37 ticks.
        let map = piece.tempo_map.clone();
        piece.tracks[0]
            .notes
            .push(Note::new(62, map.ticks_to_seconds(997), map.ticks_to_seconds(1440), 64));
        let violations = validate_piece(&piece, &Rules::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, RuleId::Subdivision);
    }

    #[test]
    fn pitch_out_of_range_is_rule_four() {
        let mut piece = compliant_piece();
        piece.tracks[0].notes[0].pitch = 97; // above C7
        let violations = validate_piece(&piece, &Rules::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, RuleId::PitchRange);
    }

    #[test]
    fn velocity_out_of_range_is_rule_five() {
        let mut piece = compliant_piece();
        piece.tracks[0].notes[0].velocity = 120;
        let violations = validate_piece(&piece, &Rules::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, RuleId::VelocityRange);
    }

    #[test]
    fn foreign_instrument_is_rule_six() {
        let mut piece = compliant_piece();
        piece.tracks[1].program = 24; // guitar
        let violations = validate_piece(&piece, &Rules::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, RuleId::InstrumentWhitelist);
    }

    #[test]
    fn four_instruments_is_rule_seven() {
        let map = TempoMap::constant(480, 800_000);
        let note = Note::new(60, 0.0, map.ticks_to_seconds(480), 64);
        let piece = Piece::new(
            vec![
                InstrumentTrack::new(0, vec![note]),
                InstrumentTrack::new(73, vec![note]),
                InstrumentTrack::new(70, vec![note]),
                InstrumentTrack::new(68, vec![note]),
            ],
            map,
            Meter::new(4, 4),
        );
        let violations = validate_piece(&piece, &Rules::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, RuleId::InstrumentCount);
    }

    #[test]
    fn two_strings_is_rule_eight() {
        let map = TempoMap::constant(480, 800_000);
        let note = Note::new(60, 0.0, map.ticks_to_seconds(480), 64);
        let piece = Piece::new(
            vec![
                InstrumentTrack::new(0, vec![note]),
                InstrumentTrack::new(40, vec![note]),
                InstrumentTrack::new(41, vec![note]),
            ],
            map,
            Meter::new(4, 4),
        );
        let violations = validate_piece(&piece, &Rules::default());
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].rule, RuleId::StringCount);
    }

    #[test]
    fn note_names_anchor_to_middle_c() {
        assert_eq!(note_name_to_midi("C4").unwrap(), 60);
        assert_eq!(note_name_to_midi("C2").unwrap(), 36);
        assert_eq!(note_name_to_midi("C7").unwrap(), 96);
        assert_eq!(note_name_to_midi("A4").unwrap(), 69);
        assert_eq!(note_name_to_midi("F#3").unwrap(), 54);
        assert_eq!(note_name_to_midi("Bb2").unwrap(), 46);
        assert_eq!(note_name_to_midi("c4").unwrap(), 60);
    }

    #[test]
    fn octave_step_adds_twelve() {
        for (name, base) in [("C", 0), ("D", 2), ("E", 4), ("F", 5), ("G", 7), ("A", 9), ("B", 11)]
        {
            for octave in 0..7 {
                let lower = note_name_to_midi(&format!("{name}{octave}")).unwrap();
                let upper = note_name_to_midi(&format!("{name}{}", octave + 1)).unwrap();
                assert_eq!(upper, lower + 12);
                assert_eq!(lower as i32 % 12, base);
            }
        }
    }

    #[test]
    fn natural_names_are_injective() {
        use alloc::collections::BTreeMap;
        let mut seen: BTreeMap<u8, String> = BTreeMap::new();
        for octave in 0..=8 {
            for letter in ["C", "D", "E", "F", "G", "A", "B"] {
                let name = format!("{letter}{octave}");
                let midi = note_name_to_midi(&name).unwrap();
                if let Some(previous) = seen.insert(midi, name.clone()) {
                    panic!("{previous} and {name} both map to {midi}");
                }
            }
        }
    }

    #[test]
    fn bad_names_are_rejected() {
        assert!(note_name_to_midi("").is_err());
        assert!(note_name_to_midi("H4").is_err());
        assert!(note_name_to_midi("C").is_err());
        assert!(note_name_to_midi("C#").is_err());
        assert!(note_name_to_midi("C44x").is_err());
        assert!(note_name_to_midi("C99").is_err());
    }
}
