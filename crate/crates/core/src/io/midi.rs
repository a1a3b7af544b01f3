//! Standard MIDI File export for auditioning scores: format 1, division 480,
//! track 0 carrying the tempo map and one track per part. Output is
//! byte-deterministic; running status is never used, so identical scores
//! always serialize to identical bytes.

use crate::score::{validate_score, InvalidScore, Pitch, Score};

/// A rendered Standard MIDI File.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmfBytes(pub Vec<u8>);

impl SmfBytes {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }
}

/// MIDI key used when an unpitched percussion note must be rendered.
const UNPITCHED_KEY: u8 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    // ordering at equal ticks: program changes, then offs, then ons
    Program = 0,
    NoteOff = 1,
    NoteOn = 2,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    tick: u64,
    kind: EventKind,
    key: u8,
    velocity: u8,
}

pub fn export_midi(score: &Score) -> Result<SmfBytes, InvalidScore> {
    let errors = validate_score(score);
    if !errors.is_empty() {
        return Err(InvalidScore(errors));
    }

    let starts = score.measure_start_ticks();
    let total_ticks = *starts.last().unwrap_or(&0);
    let track_count = 1 + score.parts.len();

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes()); // format 1
    out.extend_from_slice(&(track_count as u16).to_be_bytes());
    out.extend_from_slice(&(score.divisions as u16).to_be_bytes());

    out.extend_from_slice(&tempo_track(score, &starts, total_ticks));
    for (index, part) in score.parts.iter().enumerate() {
        let channel = (index % 16) as u8;
        let program = crate::score::lookup(&part.instrument_name)
            .map(|info| info.midi_program)
            .unwrap_or(0);
        out.extend_from_slice(&part_track(
            score,
            index,
            channel,
            program,
            &starts,
            total_ticks,
        ));
    }

    Ok(SmfBytes(out))
}

fn tempo_track(score: &Score, starts: &[u64], total_ticks: u64) -> Vec<u8> {
    let mut data = Vec::new();
    let mut at = 0u64;
    for entry in &score.tempo_map {
        let tick = starts[entry.measure];
        push_varlen(&mut data, tick - at);
        at = tick;
        let uspq = (60_000_000f64 / f64::from(entry.bpm)).round() as u32;
        data.extend_from_slice(&[0xFF, 0x51, 0x03]);
        data.extend_from_slice(&uspq.to_be_bytes()[1..]);
    }
    push_varlen(&mut data, total_ticks - at);
    data.extend_from_slice(&[0xFF, 0x2F, 0x00]);
    wrap_track(data)
}

fn part_track(
    score: &Score,
    part_index: usize,
    channel: u8,
    program: u8,
    starts: &[u64],
    total_ticks: u64,
) -> Vec<u8> {
    let part = &score.parts[part_index];
    let mut events = vec![Event {
        tick: 0,
        kind: EventKind::Program,
        key: program,
        velocity: 0,
    }];
    for (m, measure) in part.measures.iter().enumerate() {
        let base = starts[m];
        for note in &measure.notes {
            let key = match note.pitch {
                Pitch::Pitched(p) => p,
                Pitch::Unpitched => UNPITCHED_KEY,
            };
            let velocity = (note.dynamic.value() * 127.0).round() as u8;
            let on = base + u64::from(note.onset_ticks);
            let gate = (f64::from(note.duration_ticks) * note.articulation)
                .round()
                .max(1.0) as u64;
            let off = (on + gate).min(total_ticks);
            events.push(Event {
                tick: on,
                kind: EventKind::NoteOn,
                key,
                velocity,
            });
            events.push(Event {
                tick: off,
                kind: EventKind::NoteOff,
                key,
                velocity: 0,
            });
        }
    }
    events.sort_by_key(|e| (e.tick, e.kind, e.key));

    let mut data = Vec::new();
    let mut at = 0u64;
    for event in &events {
        push_varlen(&mut data, event.tick - at);
        at = event.tick;
        match event.kind {
            EventKind::Program => data.extend_from_slice(&[0xC0 | channel, event.key]),
            EventKind::NoteOn => {
                data.extend_from_slice(&[0x90 | channel, event.key, event.velocity])
            }
            EventKind::NoteOff => {
                data.extend_from_slice(&[0x80 | channel, event.key, event.velocity])
            }
        }
    }
    push_varlen(&mut data, total_ticks - at);
    data.extend_from_slice(&[0xFF, 0x2F, 0x00]);
    wrap_track(data)
}

fn wrap_track(data: Vec<u8>) -> Vec<u8> {
    let mut track = Vec::with_capacity(data.len() + 8);
    track.extend_from_slice(b"MTrk");
    track.extend_from_slice(&(data.len() as u32).to_be_bytes());
    track.extend_from_slice(&data);
    track
}

fn push_varlen(out: &mut Vec<u8>, mut value: u64) {
    debug_assert!(value <= 0x0FFF_FFFF, "delta time too large for SMF");
    let mut bytes = [0u8; 4];
    let mut n = 0;
    loop {
        bytes[n] = (value & 0x7F) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        let mut b = bytes[i];
        if i > 0 {
            b |= 0x80;
        }
        out.push(b);
    }
}
