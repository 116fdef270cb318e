//! Standard MIDI File codec for formats 0 and 1.
//!
//! Parsing pairs Note-On events with the earliest subsequent Note-Off (or
//! Note-On with velocity 0) of equal pitch on the same channel, resolves
//! tick times to seconds through the merged tempo map, and assigns each
//! note the program most recently set on its channel. Percussion (channel
//! 10, zero-indexed 9) is discarded. Writing emits a format-1 file with a
//! meta track plus one track per instrument, quantized to 480 ticks per
//! quarter note.

use alloc::collections::BTreeMap;
use alloc::collections::VecDeque;
use alloc::vec::Vec;

use thiserror::Error;

use crate::fmath;
use crate::note::{InstrumentTrack, Meter, Note, Piece, TempoMap};

/// Division used for all written files.
pub const WRITE_DIVISION: u16 = 480;

const PERCUSSION_CHANNEL: u8 = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("expected MThd chunk")]
    NotSmf,
    #[error("unexpected end of data")]
    Truncated,
    #[error("header chunk shorter than 6 bytes")]
    ShortHeader,
    #[error("unsupported SMF format {0} (only 0 and 1)")]
    UnsupportedFormat(u16),
    #[error("SMPTE division is not supported")]
    SmpteDivision,
    #[error("division of zero ticks per quarter")]
    ZeroDivision,
    #[error("variable-length quantity longer than 4 bytes")]
    OverlongVlq,
    #[error("unexpected status byte {0:#04x}")]
    UnexpectedStatus(u8),
    #[error("data byte without a running status")]
    MissingRunningStatus,
    #[error("invalid tempo map: {0}")]
    Tempo(crate::note::TempoMapError),
}

/// Parse failure with the byte offset it was detected at.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{kind} at byte {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

/// Non-fatal oddities found while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    /// A Note-On was never closed; the note was ended at the track's final tick.
    UnterminatedNote { channel: u8, pitch: u8, onset_tick: u64 },
    /// A note would have had zero (or negative) duration and was dropped.
    ZeroLengthNote { channel: u8, pitch: u8, tick: u64 },
    /// A Note-Off arrived with no open note to close.
    OrphanNoteOff { channel: u8, pitch: u8, tick: u64 },
}

impl ParseWarning {
    /// True when the warning means a Note-On produced no note.
    pub fn dropped_note(&self) -> bool {
        matches!(self, ParseWarning::ZeroLengthNote { .. })
    }
}

/// Result of parsing: the piece plus any warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSmf {
    pub piece: Piece,
    pub warnings: Vec<ParseWarning>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WriteError {
    #[error("{0} instrument tracks need more than the 15 available non-percussion channels")]
    ChannelCapacity(usize),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            offset: self.pos,
            kind,
        }
    }

    fn err_at(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { offset, kind }
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ParseError> {
        if self.remaining() < n {
            return Err(self.err(ParseErrorKind::Truncated));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, ParseError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ParseError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, ParseError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Variable-length quantity, at most 4 bytes.
    fn vlq(&mut self) -> Result<u32, ParseError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let byte = self.u8()?;
            value = (value << 7) | (byte & 0x7f) as u32;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(self.err_at(start, ParseErrorKind::OverlongVlq))
    }
}

#[derive(Debug, Clone, Copy)]
enum ChannelEvent {
    NoteOn { pitch: u8, velocity: u8 },
    NoteOff { pitch: u8 },
    Program { program: u8 },
}

#[derive(Debug, Clone, Copy)]
struct TimedEvent {
    tick: u64,
    track: usize,
    seq: usize,
    channel: u8,
    event: ChannelEvent,
}

#[derive(Debug, Default)]
struct TrackData {
    events: Vec<TimedEvent>,
    tempo_changes: Vec<(u64, u32)>,
    time_signatures: Vec<(u64, Meter)>,
    end_tick: u64,
}

/// Parses a format 0 or 1 Standard MIDI File into the note model.
pub fn parse_smf(bytes: &[u8]) -> Result<ParsedSmf, ParseError> {
    let mut r = Reader::new(bytes);
    if r.remaining() < 4 || &bytes[0..4] != b"MThd" {
        return Err(r.err_at(0, ParseErrorKind::NotSmf));
    }
    r.pos = 4;
    let header_len = r.u32()?;
    if header_len < 6 {
        return Err(r.err_at(4, ParseErrorKind::ShortHeader));
    }
    let format = r.u16()?;
    if format > 1 {
        return Err(r.err_at(r.pos - 2, ParseErrorKind::UnsupportedFormat(format)));
    }
    let ntracks = r.u16()?;
    let division = r.u16()?;
    if division & 0x8000 != 0 {
        return Err(r.err_at(r.pos - 2, ParseErrorKind::SmpteDivision));
    }
    if division == 0 {
        return Err(r.err_at(r.pos - 2, ParseErrorKind::ZeroDivision));
    }
    // Skip any extra header bytes beyond the standard 6.
    r.take(header_len as usize - 6)?;

    let mut tracks = Vec::with_capacity(ntracks as usize);
    while tracks.len() < ntracks as usize {
        let tag_offset = r.pos;
        let tag = r.take(4)?;
        let len = r.u32()? as usize;
        if tag == b"MTrk" {
            let body = r.take(len)?;
            tracks.push(parse_track(body, tag_offset + 8, tracks.len())?);
        } else {
            // Alien chunk: skip without counting toward ntracks.
            r.take(len)?;
        }
    }

    assemble(division, tracks).map_err(|kind| r.err_at(0, kind))
}

fn parse_track(
    body: &[u8],
    base_offset: usize,
    track_index: usize,
) -> Result<TrackData, ParseError> {
    let mut r = Reader::new(body);
    let mut data = TrackData::default();
    let mut tick: u64 = 0;
    let mut running_status: Option<u8> = None;
    let mut seq = 0usize;

    let shift = |e: ParseError| ParseError {
        offset: e.offset + base_offset,
        kind: e.kind,
    };

    while r.remaining() > 0 {
        tick += r.vlq().map_err(shift)? as u64;
        let status_offset = r.pos;
        let first = r.u8().map_err(shift)?;
        let status = if first & 0x80 != 0 {
            if first < 0xf0 {
                running_status = Some(first);
            }
            first
        } else {
            // Data byte: reuse the running status, reconsuming this byte.
            r.pos -= 1;
            running_status.ok_or_else(|| {
                r.err_at(status_offset + base_offset, ParseErrorKind::MissingRunningStatus)
            })?
        };

        match status {
            0x80..=0xef => {
                let channel = status & 0x0f;
                let kind = status & 0xf0;
                match kind {
                    0x80 | 0x90 | 0xa0 | 0xb0 | 0xe0 => {
                        let d1 = r.u8().map_err(shift)? & 0x7f;
                        let d2 = r.u8().map_err(shift)? & 0x7f;
                        let event = match kind {
                            0x90 if d2 > 0 => Some(ChannelEvent::NoteOn {
                                pitch: d1,
                                velocity: d2,
                            }),
                            0x90 | 0x80 => Some(ChannelEvent::NoteOff { pitch: d1 }),
                            _ => None,
                        };
                        if let Some(event) = event {
                            data.events.push(TimedEvent {
                                tick,
                                track: track_index,
                                seq,
                                channel,
                                event,
                            });
                            seq += 1;
                        }
                    }
                    0xc0 | 0xd0 => {
                        let d1 = r.u8().map_err(shift)? & 0x7f;
                        if kind == 0xc0 {
                            data.events.push(TimedEvent {
                                tick,
                                track: track_index,
                                seq,
                                channel,
                                event: ChannelEvent::Program { program: d1 },
                            });
                            seq += 1;
                        }
                    }
                    _ => unreachable!(),
                }
            }
            0xff => {
                let meta_type = r.u8().map_err(shift)?;
                let len = r.vlq().map_err(shift)? as usize;
                let payload = r.take(len).map_err(shift)?;
                match meta_type {
                    0x51 if len >= 3 => {
                        let us = u32::from_be_bytes([0, payload[0], payload[1], payload[2]]);
                        data.tempo_changes.push((tick, us.max(1)));
                    }
                    0x58 if len >= 2 => {
                        let numerator = payload[0];
                        let denominator = 1u8 << payload[1].min(7);
                        data.time_signatures
                            .push((tick, Meter::new(numerator, denominator)));
                    }
                    0x2f => {
                        data.end_tick = tick;
                        return Ok(data);
                    }
                    _ => {}
                }
            }
            0xf0 | 0xf7 => {
                let len = r.vlq().map_err(shift)? as usize;
                r.take(len).map_err(shift)?;
            }
            other => {
                return Err(r.err_at(
                    status_offset + base_offset,
                    ParseErrorKind::UnexpectedStatus(other),
                ))
            }
        }
    }
    // No End of Track meta; treat the last event tick as the end.
    data.end_tick = tick;
    Ok(data)
}

fn assemble(division: u16, tracks: Vec<TrackData>) -> Result<ParsedSmf, ParseErrorKind> {
    let mut tempo_changes: Vec<(u64, u32)> = tracks
        .iter()
        .flat_map(|t| t.tempo_changes.iter().copied())
        .collect();
    tempo_changes.sort_by_key(|&(tick, _)| tick);
    // A later Set Tempo at the same tick supersedes the earlier one.
    let mut deduped: Vec<(u64, u32)> = Vec::with_capacity(tempo_changes.len());
    for (tick, us) in tempo_changes {
        match deduped.last_mut() {
            Some(last) if last.0 == tick => last.1 = us,
            _ => deduped.push((tick, us)),
        }
    }
    let tempo_map = TempoMap::new(division, &deduped).map_err(ParseErrorKind::Tempo)?;

    let meter = tracks
        .iter()
        .flat_map(|t| t.time_signatures.iter().copied())
        .min_by_key(|&(tick, _)| tick)
        .map(|(_, meter)| meter)
        .unwrap_or_default();

    let mut events: Vec<TimedEvent> =
        tracks.iter().flat_map(|t| t.events.iter().copied()).collect();
    events.sort_by(|a, b| {
        a.tick
            .cmp(&b.tick)
            .then_with(|| a.track.cmp(&b.track))
            .then_with(|| a.seq.cmp(&b.seq))
    });

    let track_ends: Vec<u64> = tracks.iter().map(|t| t.end_tick).collect();

    let mut warnings = Vec::new();
    let mut programs = [0u8; 16];
    // FIFO queues of open (onset_tick, program, velocity, track) per (channel, pitch).
    let mut open: BTreeMap<(u8, u8), VecDeque<(u64, u8, u8, usize)>> = BTreeMap::new();
    // Finished notes as (program, pitch, onset_tick, offset_tick, velocity).
    let mut finished: Vec<(u8, u8, u64, u64, u8)> = Vec::new();

    for ev in &events {
        match ev.event {
            ChannelEvent::Program { program } => programs[ev.channel as usize] = program,
            ChannelEvent::NoteOn { pitch, velocity } => {
                if ev.channel == PERCUSSION_CHANNEL {
                    continue;
                }
                open.entry((ev.channel, pitch)).or_default().push_back((
                    ev.tick,
                    programs[ev.channel as usize],
                    velocity,
                    ev.track,
                ));
            }
            ChannelEvent::NoteOff { pitch } => {
                if ev.channel == PERCUSSION_CHANNEL {
                    continue;
                }
                match open
                    .get_mut(&(ev.channel, pitch))
                    .and_then(VecDeque::pop_front)
                {
                    Some((onset_tick, program, velocity, _)) => {
                        if ev.tick > onset_tick {
                            finished.push((program, pitch, onset_tick, ev.tick, velocity));
                        } else {
                            warnings.push(ParseWarning::ZeroLengthNote {
                                channel: ev.channel,
                                pitch,
                                tick: onset_tick,
                            });
                        }
                    }
                    None => warnings.push(ParseWarning::OrphanNoteOff {
                        channel: ev.channel,
                        pitch,
                        tick: ev.tick,
                    }),
                }
            }
        }
    }

    // Close anything still sounding at its track's final tick.
    for ((channel, pitch), queue) in open {
        for (onset_tick, program, velocity, track) in queue {
            let end = track_ends[track];
            if end > onset_tick {
                warnings.push(ParseWarning::UnterminatedNote {
                    channel,
                    pitch,
                    onset_tick,
                });
                finished.push((program, pitch, onset_tick, end, velocity));
            } else {
                warnings.push(ParseWarning::ZeroLengthNote {
                    channel,
                    pitch,
                    tick: onset_tick,
                });
            }
        }
    }

    let mut by_program: BTreeMap<u8, Vec<Note>> = BTreeMap::new();
    for (program, pitch, onset_tick, offset_tick, velocity) in finished {
        by_program.entry(program).or_default().push(Note::new(
            pitch,
            tempo_map.ticks_to_seconds(onset_tick),
            tempo_map.ticks_to_seconds(offset_tick),
            velocity.max(1),
        ));
    }
    let instrument_tracks = by_program
        .into_iter()
        .map(|(program, notes)| InstrumentTrack::new(program, notes))
        .collect();

    let piece = Piece::new(instrument_tracks, tempo_map, meter);
    Ok(ParsedSmf { piece, warnings })
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut stack = [0u8; 4];
    let mut n = 0;
    loop {
        stack[n] = (value & 0x7f) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let byte = stack[i] | if i > 0 { 0x80 } else { 0 };
        out.push(byte);
    }
}

fn push_chunk(out: &mut Vec<u8>, tag: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum WriteEventKind {
    // Offs sort before ons at the same tick so re-parsing never sees
    // spurious overlap. Ons carry their companion off tick: FIFO pairing
    // closes notes in on order, so same-tick same-pitch ons must be
    // emitted shortest-note first for the round trip to be exact.
    Off { pitch: u8 },
    On { pitch: u8, off_tick: u64, velocity: u8 },
}

/// Serializes a piece as a format-1 Standard MIDI File at 480 ticks per
/// quarter: a tempo/meter track plus one track per instrument program.
/// Note times are rounded to the nearest tick.
pub fn write_smf(piece: &Piece) -> Result<Vec<u8>, WriteError> {
    if piece.tracks.len() > 15 {
        return Err(WriteError::ChannelCapacity(piece.tracks.len()));
    }

    // Rescale the tempo map onto the write division.
    let src_division = piece.division() as f64;
    let mut tempo_entries: Vec<(u64, u32)> = Vec::new();
    for (tick, us) in piece.tempo_map.entries() {
        let scaled =
            fmath::round(tick as f64 * WRITE_DIVISION as f64 / src_division) as u64;
        match tempo_entries.last_mut() {
            Some(last) if last.0 == scaled => last.1 = us,
            _ => tempo_entries.push((scaled, us)),
        }
    }
    let write_map = TempoMap::new(WRITE_DIVISION, &tempo_entries)
        .expect("rescaled tempo map keeps strictly increasing ticks");

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(piece.tracks.len() as u16 + 1).to_be_bytes());
    out.extend_from_slice(&WRITE_DIVISION.to_be_bytes());

    // Meta track: time signature, then every tempo change.
    let mut meta = Vec::new();
    let denominator_log2 = piece.meter.denominator.trailing_zeros() as u8;
    push_vlq(&mut meta, 0);
    meta.extend_from_slice(&[
        0xff,
        0x58,
        0x04,
        piece.meter.numerator,
        denominator_log2,
        24,
        8,
    ]);
    let mut cursor = 0u64;
    for &(tick, us) in &tempo_entries {
        push_vlq(&mut meta, (tick - cursor) as u32);
        cursor = tick;
        let be = us.to_be_bytes();
        meta.extend_from_slice(&[0xff, 0x51, 0x03, be[1], be[2], be[3]]);
    }
    push_vlq(&mut meta, 0);
    meta.extend_from_slice(&[0xff, 0x2f, 0x00]);
    push_chunk(&mut out, b"MTrk", &meta);

    for (index, track) in piece.tracks.iter().enumerate() {
        // Channel 9 is reserved for percussion and skipped.
        let channel = if index < 9 { index as u8 } else { index as u8 + 1 };
        let mut events: Vec<(u64, WriteEventKind)> = Vec::with_capacity(track.notes.len() * 2);
        for note in &track.notes {
            let on_tick = fmath::round(write_map.seconds_to_ticks(note.onset).max(0.0)) as u64;
            let mut off_tick = fmath::round(write_map.seconds_to_ticks(note.offset).max(0.0)) as u64;
            if off_tick <= on_tick {
                off_tick = on_tick + 1;
            }
            events.push((
                on_tick,
                WriteEventKind::On {
                    pitch: note.pitch,
                    off_tick,
                    velocity: note.velocity.clamp(1, 127),
                },
            ));
            events.push((off_tick, WriteEventKind::Off { pitch: note.pitch }));
        }
        events.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)));

        let mut body = Vec::new();
        push_vlq(&mut body, 0);
        body.extend_from_slice(&[0xc0 | channel, track.program & 0x7f]);
        let mut cursor = 0u64;
        for (tick, kind) in events {
            push_vlq(&mut body, (tick - cursor) as u32);
            cursor = tick;
            match kind {
                WriteEventKind::On { pitch, velocity, .. } => {
                    body.extend_from_slice(&[0x90 | channel, pitch & 0x7f, velocity & 0x7f]);
                }
                WriteEventKind::Off { pitch } => {
                    body.extend_from_slice(&[0x80 | channel, pitch & 0x7f, 0x40]);
                }
            }
        }
        push_vlq(&mut body, 0);
        body.extend_from_slice(&[0xff, 0x2f, 0x00]);
        push_chunk(&mut out, b"MTrk", &body);
    }

    Ok(out)
}
