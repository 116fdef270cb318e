//! Seeded generation of rule-conforming test pieces.
//!
//! Output is deterministic in the seed: the same seed always yields the
//! same piece, down to the serialized bytes. Pitches walk a major scale
//! inside each instrument's conventional range, durations are multiples of
//! a sixteenth, and every piece satisfies the full default rule set.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::note::{InstrumentTrack, Meter, Note, Piece, TempoMap};
use crate::rules::STRING_PROGRAMS;

/// Velocity levels for pp, p, mp, mf, f, ff on the common notation scale.
const DYNAMIC_LEVELS: [u8; 6] = [33, 49, 64, 80, 96, 112];

/// Non-string members of the instrument whitelist.
const NON_STRING_PROGRAMS: [u8; 5] = [0, 73, 70, 57, 68];

const DIVISION: u16 = 480;
/// Sixteenth note on the write grid.
const GRID_TICKS: u64 = 120;

/// Major scale intervals.
const SCALE: [u8; 7] = [0, 2, 4, 5, 7, 9, 11];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerateError {
    #[error("instrument count {0} outside 1..=3")]
    InstrumentCount(usize),
    #[error("duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("piece count must be at least 1")]
    ZeroCount,
    #[error("instrument-count mix has no positive weight")]
    EmptyMix,
}

/// Generation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenConfig {
    /// Target piece length in seconds.
    pub duration_secs: f64,
    /// Number of instruments, 1 to 3.
    pub instruments: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            duration_secs: 20.0,
            instruments: 3,
        }
    }
}

/// Proportions of solo/duo/trio pieces in a generated set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetMix {
    pub solo: u32,
    pub duo: u32,
    pub trio: u32,
}

impl Default for SetMix {
    fn default() -> Self {
        // The 6:24:46 split of the 76-piece evaluation set.
        Self {
            solo: 6,
            duo: 24,
            trio: 46,
        }
    }
}

/// Playable MIDI range per whitelisted program, already inside C2..C7.
fn conventional_range(program: u8) -> (u8, u8) {
    match program {
        0 => (36, 96),  // piano
        40 => (55, 96), // violin
        41 => (48, 88), // viola
        42 => (36, 76), // cello
        73 => (60, 96), // flute
        70 => (36, 72), // bassoon
        57 => (40, 72), // trombone
        68 => (58, 91), // oboe
        _ => (36, 96),
    }
}

fn pick_programs(rng: &mut ChaCha8Rng, instruments: usize) -> Vec<u8> {
    let mut programs = Vec::with_capacity(instruments);
    let mut pool: Vec<u8> = NON_STRING_PROGRAMS.to_vec();
    if rng.random_bool(0.5) {
        let s = STRING_PROGRAMS[rng.random_range(0..STRING_PROGRAMS.len())];
        programs.push(s);
    }
    while programs.len() < instruments {
        let i = rng.random_range(0..pool.len());
        programs.push(pool.swap_remove(i));
    }
    programs.truncate(instruments);
    programs
}

/// Generates one compliant piece, deterministically from the seed.
pub fn generate_piece(seed: u64, config: &GenConfig) -> Result<Piece, GenerateError> {
    if config.instruments == 0 || config.instruments > 3 {
        return Err(GenerateError::InstrumentCount(config.instruments));
    }
    if config.duration_secs.is_nan() || config.duration_secs <= 0.0 {
        return Err(GenerateError::NonPositiveDuration(config.duration_secs));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bpm: u32 = rng.random_range(60..=90);
    let us_per_quarter = ((60_000_000u64 + bpm as u64 / 2) / bpm as u64) as u32;
    let meter = match rng.random_range(0..3) {
        0 => Meter::new(3, 4),
        1 => Meter::new(4, 4),
        _ => Meter::new(6, 8),
    };
    let tempo_map = TempoMap::constant(DIVISION, us_per_quarter);

    let quarters_per_measure = meter.quarters_per_measure();
    let measure_secs = quarters_per_measure * 60.0 / bpm as f64;
    let measures = (config.duration_secs / measure_secs + 0.5) as u64;
    let measures = measures.max(1);
    let total_sixteenths = measures * (quarters_per_measure * 4.0) as u64;

    let scale_root: u8 = rng.random_range(0..12);
    let programs = pick_programs(&mut rng, config.instruments);

    let mut tracks = Vec::with_capacity(programs.len());
    for &program in &programs {
        let (lo, hi) = conventional_range(program);
        // All scale pitches inside the playable range.
        let scale_pitches: Vec<u8> = (lo..=hi)
            .filter(|p| SCALE.contains(&((p + 12 - scale_root % 12) % 12)))
            .collect();
        let mut degree = scale_pitches.len() / 2;
        let mut notes = Vec::new();
        let mut pos: u64 = 0;
        while pos < total_sixteenths {
            let dur = *[1u64, 2, 2, 3, 4, 4, 6, 8]
                .get(rng.random_range(0..8))
                .unwrap();
            let dur = dur.min(total_sixteenths - pos);
            if rng.random_range(0..100) < 15 {
                pos += dur; // rest
                continue;
            }
            let step: i32 = rng.random_range(-3..=3);
            degree = (degree as i32 + step).clamp(0, scale_pitches.len() as i32 - 1) as usize;
            let velocity = DYNAMIC_LEVELS[rng.random_range(0..DYNAMIC_LEVELS.len())];
            notes.push(Note::new(
                scale_pitches[degree],
                tempo_map.ticks_to_seconds(pos * GRID_TICKS),
                tempo_map.ticks_to_seconds((pos + dur) * GRID_TICKS),
                velocity,
            ));
            pos += dur;
        }
        tracks.push(InstrumentTrack::new(program, notes));
    }

    Ok(Piece::new(tracks, tempo_map, meter))
}

/// Splits `count` into solo/duo/trio piece counts proportional to the mix,
/// using largest-remainder rounding so the parts always sum to `count`.
fn allocate(count: usize, mix: &SetMix) -> Result<[usize; 3], GenerateError> {
    let weights = [mix.solo as f64, mix.duo as f64, mix.trio as f64];
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(GenerateError::EmptyMix);
    }
    let shares: Vec<f64> = weights.iter().map(|w| count as f64 * w / total).collect();
    let mut parts = [0usize; 3];
    let mut assigned = 0;
    for (i, share) in shares.iter().enumerate() {
        parts[i] = *share as usize;
        assigned += parts[i];
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - parts[a] as f64;
        let fb = shares[b] - parts[b] as f64;
        fb.total_cmp(&fa).then_with(|| a.cmp(&b))
    });
    for &i in order.iter().cycle().take(count - assigned) {
        parts[i] += 1;
    }
    Ok(parts)
}

/// Generates a whole evaluation set: `count` pieces whose instrument-count
/// proportions follow the mix exactly. Deterministic in the seed.
pub fn generate_set(seed: u64, count: usize, mix: &SetMix) -> Result<Vec<Piece>, GenerateError> {
    if count == 0 {
        return Err(GenerateError::ZeroCount);
    }
    let parts = allocate(count, mix)?;
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut pieces = Vec::with_capacity(count);
    for (instruments, &n) in parts.iter().enumerate() {
        for _ in 0..n {
            let piece_seed = seeder.random::<u64>();
            let config = GenConfig {
                duration_secs: 20.0,
                instruments: instruments + 1,
            };
            pieces.push(generate_piece(piece_seed, &config)?);
        }
    }
    Ok(pieces)
}
