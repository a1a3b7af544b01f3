//! Score comparison: diff two renditions of the same work into an ordered,
//! invertible delta set, and apply or invert such sets.
//!
//! Alignment is positional: measure index and note skeleton (onset,
//! duration, pitch) only. Notes identical in all three within one measure
//! are matched in stored order; `occurrence` disambiguates them. A small
//! structural budget tolerates minor ossia or divisi edits; anything larger
//! means the inputs are not renditions of one work.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::canon::{
    self, as_int, as_list, as_real, as_str, as_sym, as_usize, FormatError, MapView, Value,
};
use crate::io::note_value_helpers;
use crate::score::{Note, Pitch, Score, BPM_MAX, BPM_MIN};

pub const DELTA_VERSION: &str = "maestro-delta/1";

/// Fraction of the original's notes that may mismatch structurally before
/// the scores stop counting as the same work.
pub const STRUCTURAL_BUDGET: f64 = 0.05;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("not the same work: {0}")]
pub struct NotSameWork(pub String);

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ApplyError {
    #[error("fingerprint mismatch: delta was built against {expected:016x}, score hashes to {found:016x}")]
    FingerprintMismatch { expected: u64, found: u64 },
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("delta does not match the score: {0}")]
    StateMismatch(String),
}

/// One difference between two renditions.
#[derive(Debug, Clone, PartialEq)]
pub enum DeltaRecord {
    /// Dynamic change on one aligned note, in signed level steps.
    Dynamic {
        part_id: String,
        measure: usize,
        onset: u32,
        duration: u32,
        pitch: Pitch,
        occurrence: u32,
        steps: i32,
    },
    /// Articulation change on one aligned note. Both endpoints are stored
    /// so apply and invert are float-exact.
    Articulation {
        part_id: String,
        measure: usize,
        onset: u32,
        duration: u32,
        pitch: Pitch,
        occurrence: u32,
        from: f64,
        to: f64,
    },
    /// Change in the per-measure tempo difference, in bpm. Cumulative steps
    /// reconstruct the interpretation's tempo curve.
    Tempo { measure: usize, step: i32 },
    /// Structural: a note present only in the interpretation.
    NoteInserted {
        part_id: String,
        measure: usize,
        note: Note,
    },
    /// Structural: a note present only in the original.
    NoteRemoved {
        part_id: String,
        measure: usize,
        note: Note,
    },
    /// Structural: the rendition is titled differently.
    TitleChanged { from: String, to: String },
}

impl DeltaRecord {
    pub fn is_structural(&self) -> bool {
        matches!(
            self,
            DeltaRecord::NoteInserted { .. }
                | DeltaRecord::NoteRemoved { .. }
                | DeltaRecord::TitleChanged { .. }
        )
    }

    /// Structural records that consume the note budget.
    fn is_note_structural(&self) -> bool {
        matches!(
            self,
            DeltaRecord::NoteInserted { .. } | DeltaRecord::NoteRemoved { .. }
        )
    }

    /// Total order used for the canonical record listing.
    fn sort_key(&self) -> (usize, String, u32, u16, u32, u32, u8) {
        match self {
            DeltaRecord::TitleChanged { .. } => (0, String::new(), 0, 0, 0, 0, 0),
            DeltaRecord::Tempo { measure, .. } => (*measure, String::new(), 0, 0, 0, 0, 1),
            DeltaRecord::Dynamic {
                part_id,
                measure,
                onset,
                duration,
                pitch,
                occurrence,
                ..
            } => (
                *measure,
                part_id.clone(),
                *onset,
                pitch.order_key(),
                *duration,
                *occurrence,
                2,
            ),
            DeltaRecord::Articulation {
                part_id,
                measure,
                onset,
                duration,
                pitch,
                occurrence,
                ..
            } => (
                *measure,
                part_id.clone(),
                *onset,
                pitch.order_key(),
                *duration,
                *occurrence,
                3,
            ),
            DeltaRecord::NoteRemoved {
                part_id,
                measure,
                note,
            } => (
                *measure,
                part_id.clone(),
                note.onset_ticks,
                note.pitch.order_key(),
                note.duration_ticks,
                0,
                4,
            ),
            DeltaRecord::NoteInserted {
                part_id,
                measure,
                note,
            } => (
                *measure,
                part_id.clone(),
                note.onset_ticks,
                note.pitch.order_key(),
                note.duration_ticks,
                0,
                5,
            ),
        }
    }
}

/// An ordered set of differences, pinned to both endpoint skeletons.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSet {
    /// Skeleton hash of the score the records apply to.
    pub base_fingerprint: u64,
    /// Skeleton hash of the score the records produce.
    pub target_fingerprint: u64,
    pub records: Vec<DeltaRecord>,
}

impl DeltaSet {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn structural_count(&self) -> usize {
        self.records.iter().filter(|r| r.is_structural()).count()
    }
}

/// FNV-1a hash of the score's skeleton: divisions, part ids, time
/// signatures, and per-measure (onset, duration, pitch) triples. Dynamics,
/// articulation, tempo, title, and movements are performance or metadata
/// dimensions and stay out of the hash.
pub fn skeleton_fingerprint(score: &Score) -> u64 {
    let mut h = Fnv::new();
    h.u32(score.divisions);
    h.usize(score.parts.len());
    for part in &score.parts {
        h.str(&part.id);
        h.usize(part.measures.len());
        for measure in &part.measures {
            h.u32(measure.time_signature.numerator);
            h.u32(measure.time_signature.denominator);
            h.usize(measure.notes.len());
            for note in &measure.notes {
                h.u32(note.onset_ticks);
                h.u32(note.duration_ticks);
                h.u32(u32::from(note.pitch.order_key()));
            }
        }
    }
    h.finish()
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Fnv {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn byte(&mut self, b: u8) {
        self.0 ^= u64::from(b);
        self.0 = self.0.wrapping_mul(0x0000_0100_0000_01B3);
    }

    fn u32(&mut self, v: u32) {
        for b in v.to_le_bytes() {
            self.byte(b);
        }
    }

    fn usize(&mut self, v: usize) {
        for b in (v as u64).to_le_bytes() {
            self.byte(b);
        }
    }

    fn str(&mut self, s: &str) {
        self.usize(s.len());
        for b in s.bytes() {
            self.byte(b);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

// ---------------------------------------------------------------------------
// diff
// ---------------------------------------------------------------------------

pub fn diff_scores(original: &Score, interpretation: &Score) -> Result<DeltaSet, NotSameWork> {
    check_congruent(original, interpretation)?;

    let mut records = Vec::new();

    if original.title != interpretation.title {
        records.push(DeltaRecord::TitleChanged {
            from: original.title.clone(),
            to: interpretation.title.clone(),
        });
    }

    tempo_steps(original, interpretation, &mut records);

    // the budget denominator is the larger rendition, so the check is
    // symmetric and diff(b, a) = invert(diff(a, b)) holds
    let count_notes = |s: &Score| -> usize {
        s.parts
            .iter()
            .map(|p| p.measures.iter().map(|m| m.notes.len()).sum::<usize>())
            .sum()
    };
    let total_notes = count_notes(original).max(count_notes(interpretation));

    for (part_a, part_b) in original.parts.iter().zip(&interpretation.parts) {
        for (measure_index, (ma, mb)) in part_a.measures.iter().zip(&part_b.measures).enumerate() {
            diff_measure(
                &part_a.id,
                measure_index,
                &ma.notes,
                &mb.notes,
                &mut records,
            );
        }
    }

    let structural = records.iter().filter(|r| r.is_note_structural()).count();
    if structural as f64 > STRUCTURAL_BUDGET * total_notes.max(1) as f64 {
        return Err(NotSameWork(format!(
            "{structural} structural note differences exceed the budget of {:.0}% of {total_notes} notes",
            STRUCTURAL_BUDGET * 100.0
        )));
    }

    records.sort_by_key(DeltaRecord::sort_key);
    Ok(DeltaSet {
        base_fingerprint: skeleton_fingerprint(original),
        target_fingerprint: skeleton_fingerprint(interpretation),
        records,
    })
}

fn check_congruent(a: &Score, b: &Score) -> Result<(), NotSameWork> {
    if a.divisions != b.divisions {
        return Err(NotSameWork(format!(
            "divisions differ: {} vs {}",
            a.divisions, b.divisions
        )));
    }
    if a.parts.len() != b.parts.len() {
        return Err(NotSameWork(format!(
            "part counts differ: {} vs {}",
            a.parts.len(),
            b.parts.len()
        )));
    }
    for (pa, pb) in a.parts.iter().zip(&b.parts) {
        if pa.id != pb.id {
            return Err(NotSameWork(format!(
                "part ids differ: `{}` vs `{}`",
                pa.id, pb.id
            )));
        }
        if !pa.instrument_name.eq_ignore_ascii_case(&pb.instrument_name) {
            return Err(NotSameWork(format!(
                "part `{}` is played by `{}` in one score and `{}` in the other",
                pa.id, pa.instrument_name, pb.instrument_name
            )));
        }
        if pa.measures.len() != pb.measures.len() {
            return Err(NotSameWork(format!(
                "part `{}` has {} measures in one score and {} in the other",
                pa.id,
                pa.measures.len(),
                pb.measures.len()
            )));
        }
        for (i, (ma, mb)) in pa.measures.iter().zip(&pb.measures).enumerate() {
            if ma.time_signature != mb.time_signature {
                return Err(NotSameWork(format!(
                    "time signatures differ at measure {i} of part `{}`",
                    pa.id
                )));
            }
        }
    }
    if a.movement_boundaries != b.movement_boundaries {
        return Err(NotSameWork("movement boundaries differ".into()));
    }
    Ok(())
}

fn tempo_steps(a: &Score, b: &Score, records: &mut Vec<DeltaRecord>) {
    let ta = a.expanded_tempo();
    let tb = b.expanded_tempo();
    let mut previous = 0i64;
    for (measure, (&ba, &bb)) in ta.iter().zip(&tb).enumerate() {
        let diff = i64::from(bb) - i64::from(ba);
        if diff != previous {
            records.push(DeltaRecord::Tempo {
                measure,
                step: (diff - previous) as i32,
            });
            previous = diff;
        }
    }
}

type SkeletonKey = (u32, u32, u16);

fn skeleton_key(note: &Note) -> SkeletonKey {
    (
        note.onset_ticks,
        note.duration_ticks,
        note.pitch.order_key(),
    )
}

fn diff_measure(
    part_id: &str,
    measure: usize,
    a_notes: &[Note],
    b_notes: &[Note],
    records: &mut Vec<DeltaRecord>,
) {
    let mut runs_a: BTreeMap<SkeletonKey, Vec<usize>> = BTreeMap::new();
    let mut runs_b: BTreeMap<SkeletonKey, Vec<usize>> = BTreeMap::new();
    for (i, n) in a_notes.iter().enumerate() {
        runs_a.entry(skeleton_key(n)).or_default().push(i);
    }
    for (i, n) in b_notes.iter().enumerate() {
        runs_b.entry(skeleton_key(n)).or_default().push(i);
    }

    let keys: Vec<SkeletonKey> = runs_a.keys().chain(runs_b.keys()).copied().collect();
    let mut seen = std::collections::BTreeSet::new();
    for key in keys {
        if !seen.insert(key) {
            continue;
        }
        let empty = Vec::new();
        let ia = runs_a.get(&key).unwrap_or(&empty);
        let ib = runs_b.get(&key).unwrap_or(&empty);
        let paired = ia.len().min(ib.len());
        for occurrence in 0..paired {
            let na = &a_notes[ia[occurrence]];
            let nb = &b_notes[ib[occurrence]];
            if na.dynamic != nb.dynamic {
                records.push(DeltaRecord::Dynamic {
                    part_id: part_id.to_string(),
                    measure,
                    onset: na.onset_ticks,
                    duration: na.duration_ticks,
                    pitch: na.pitch,
                    occurrence: occurrence as u32,
                    steps: i32::from(nb.dynamic.index()) - i32::from(na.dynamic.index()),
                });
            }
            if na.articulation != nb.articulation {
                records.push(DeltaRecord::Articulation {
                    part_id: part_id.to_string(),
                    measure,
                    onset: na.onset_ticks,
                    duration: na.duration_ticks,
                    pitch: na.pitch,
                    occurrence: occurrence as u32,
                    from: na.articulation,
                    to: nb.articulation,
                });
            }
        }
        for &index in &ia[paired..] {
            records.push(DeltaRecord::NoteRemoved {
                part_id: part_id.to_string(),
                measure,
                note: a_notes[index].clone(),
            });
        }
        for &index in &ib[paired..] {
            records.push(DeltaRecord::NoteInserted {
                part_id: part_id.to_string(),
                measure,
                note: b_notes[index].clone(),
            });
        }
    }
}

// ---------------------------------------------------------------------------
// apply
// ---------------------------------------------------------------------------

pub fn apply_delta(original: &Score, deltas: &DeltaSet) -> Result<Score, ApplyError> {
    let found = skeleton_fingerprint(original);
    if found != deltas.base_fingerprint {
        return Err(ApplyError::FingerprintMismatch {
            expected: deltas.base_fingerprint,
            found,
        });
    }

    let mut score = original.clone();
    let mut tempo_step_at: BTreeMap<usize, i64> = BTreeMap::new();

    for record in &deltas.records {
        match record {
            DeltaRecord::TitleChanged { from, to } => {
                if &score.title != from {
                    return Err(ApplyError::StateMismatch(format!(
                        "title is `{}`, delta expected `{from}`",
                        score.title
                    )));
                }
                score.title = to.clone();
            }
            DeltaRecord::Tempo { measure, step } => {
                *tempo_step_at.entry(*measure).or_insert(0) += i64::from(*step);
            }
            DeltaRecord::Dynamic {
                part_id,
                measure,
                onset,
                duration,
                pitch,
                occurrence,
                steps,
            } => {
                let note = find_note(
                    &mut score,
                    part_id,
                    *measure,
                    *onset,
                    *duration,
                    *pitch,
                    *occurrence,
                )?;
                note.dynamic = note.dynamic.offset(*steps).ok_or_else(|| {
                    ApplyError::OutOfRange(format!(
                        "dynamic step {steps} leaves [1, 8] at measure {measure} of part `{part_id}`"
                    ))
                })?;
            }
            DeltaRecord::Articulation {
                part_id,
                measure,
                onset,
                duration,
                pitch,
                occurrence,
                from,
                to,
            } => {
                let note = find_note(
                    &mut score,
                    part_id,
                    *measure,
                    *onset,
                    *duration,
                    *pitch,
                    *occurrence,
                )?;
                if note.articulation != *from {
                    return Err(ApplyError::StateMismatch(format!(
                        "articulation at measure {measure} of part `{part_id}` is {}, delta expected {from}",
                        note.articulation
                    )));
                }
                if !(crate::score::ARTICULATION_MIN..=crate::score::ARTICULATION_MAX).contains(to) {
                    return Err(ApplyError::OutOfRange(format!(
                        "articulation {to} outside the playable range"
                    )));
                }
                note.articulation = *to;
            }
            DeltaRecord::NoteRemoved {
                part_id,
                measure,
                note,
            } => {
                let notes = measure_notes(&mut score, part_id, *measure)?;
                let position = notes.iter().position(|n| n == note).ok_or_else(|| {
                    ApplyError::StateMismatch(format!(
                        "no note to remove at measure {measure} of part `{part_id}`"
                    ))
                })?;
                notes.remove(position);
            }
            DeltaRecord::NoteInserted {
                part_id,
                measure,
                note,
            } => {
                let notes = measure_notes(&mut score, part_id, *measure)?;
                let at = notes.partition_point(|n| n.order_key() <= note.order_key());
                notes.insert(at, note.clone());
            }
        }
    }

    if !tempo_step_at.is_empty() {
        let expanded = score.expanded_tempo();
        let mut rebuilt = Vec::with_capacity(expanded.len());
        let mut running = 0i64;
        for (measure, &bpm) in expanded.iter().enumerate() {
            if let Some(step) = tempo_step_at.get(&measure) {
                running += step;
            }
            let adjusted = i64::from(bpm) + running;
            if !(i64::from(BPM_MIN)..=i64::from(BPM_MAX)).contains(&adjusted) {
                return Err(ApplyError::OutOfRange(format!(
                    "tempo {adjusted} bpm at measure {measure} outside [{BPM_MIN}, {BPM_MAX}]"
                )));
            }
            rebuilt.push(adjusted as u32);
        }
        score.tempo_map = Score::compress_tempo(&rebuilt);
    }

    Ok(score)
}

fn measure_notes<'a>(
    score: &'a mut Score,
    part_id: &str,
    measure: usize,
) -> Result<&'a mut Vec<Note>, ApplyError> {
    let part = score
        .parts
        .iter_mut()
        .find(|p| p.id == part_id)
        .ok_or_else(|| ApplyError::StateMismatch(format!("no part `{part_id}`")))?;
    part.measures
        .get_mut(measure)
        .map(|m| &mut m.notes)
        .ok_or_else(|| {
            ApplyError::StateMismatch(format!("part `{part_id}` has no measure {measure}"))
        })
}

fn find_note<'a>(
    score: &'a mut Score,
    part_id: &str,
    measure: usize,
    onset: u32,
    duration: u32,
    pitch: Pitch,
    occurrence: u32,
) -> Result<&'a mut Note, ApplyError> {
    let notes = measure_notes(score, part_id, measure)?;
    notes
        .iter_mut()
        .filter(|n| n.onset_ticks == onset && n.duration_ticks == duration && n.pitch == pitch)
        .nth(occurrence as usize)
        .ok_or_else(|| {
            ApplyError::StateMismatch(format!(
                "no note at onset {onset} in measure {measure} of part `{part_id}`"
            ))
        })
}

// ---------------------------------------------------------------------------
// invert
// ---------------------------------------------------------------------------

/// Swaps the direction of every record; an involution.
pub fn invert_delta(deltas: &DeltaSet) -> DeltaSet {
    let mut records: Vec<DeltaRecord> = deltas
        .records
        .iter()
        .map(|record| match record {
            DeltaRecord::Dynamic {
                part_id,
                measure,
                onset,
                duration,
                pitch,
                occurrence,
                steps,
            } => DeltaRecord::Dynamic {
                part_id: part_id.clone(),
                measure: *measure,
                onset: *onset,
                duration: *duration,
                pitch: *pitch,
                occurrence: *occurrence,
                steps: -steps,
            },
            DeltaRecord::Articulation {
                part_id,
                measure,
                onset,
                duration,
                pitch,
                occurrence,
                from,
                to,
            } => DeltaRecord::Articulation {
                part_id: part_id.clone(),
                measure: *measure,
                onset: *onset,
                duration: *duration,
                pitch: *pitch,
                occurrence: *occurrence,
                from: *to,
                to: *from,
            },
            DeltaRecord::Tempo { measure, step } => DeltaRecord::Tempo {
                measure: *measure,
                step: -step,
            },
            DeltaRecord::NoteInserted {
                part_id,
                measure,
                note,
            } => DeltaRecord::NoteRemoved {
                part_id: part_id.clone(),
                measure: *measure,
                note: note.clone(),
            },
            DeltaRecord::NoteRemoved {
                part_id,
                measure,
                note,
            } => DeltaRecord::NoteInserted {
                part_id: part_id.clone(),
                measure: *measure,
                note: note.clone(),
            },
            DeltaRecord::TitleChanged { from, to } => DeltaRecord::TitleChanged {
                from: to.clone(),
                to: from.clone(),
            },
        })
        .collect();
    records.sort_by_key(DeltaRecord::sort_key);
    DeltaSet {
        base_fingerprint: deltas.target_fingerprint,
        target_fingerprint: deltas.base_fingerprint,
        records,
    }
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

pub fn write_delta(deltas: &DeltaSet) -> Vec<u8> {
    let records = deltas.records.iter().map(record_to_value).collect();
    let body = Value::map(vec![
        (
            "base_fingerprint",
            Value::Str(format!("{:016x}", deltas.base_fingerprint)),
        ),
        (
            "target_fingerprint",
            Value::Str(format!("{:016x}", deltas.target_fingerprint)),
        ),
        ("records", Value::List(records)),
    ]);
    canon::write_document(DELTA_VERSION, &body).into_bytes()
}

pub fn parse_delta(bytes: &[u8]) -> Result<DeltaSet, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Syntax {
        line: 1,
        col: 1,
        message: format!("not UTF-8: {e}"),
    })?;
    let body = canon::parse_document(text, DELTA_VERSION)?;
    let mut view = MapView::new(&body, "")?;
    let base_fingerprint =
        parse_fingerprint(view.required("base_fingerprint")?, "base_fingerprint")?;
    let target_fingerprint =
        parse_fingerprint(view.required("target_fingerprint")?, "target_fingerprint")?;
    let records = as_list(view.required("records")?, "records")?
        .iter()
        .map(value_to_record)
        .collect::<Result<Vec<_>, _>>()?;
    view.finish()?;

    let mut keys = Vec::new();
    for record in &records {
        validate_record(record)?;
        keys.push(record.sort_key());
    }
    for pair in keys.windows(2) {
        if pair[0] >= pair[1] {
            return Err(FormatError::schema(
                "records",
                "records must be sorted with no duplicate locations",
            ));
        }
    }
    Ok(DeltaSet {
        base_fingerprint,
        target_fingerprint,
        records,
    })
}

fn validate_record(record: &DeltaRecord) -> Result<(), FormatError> {
    match record {
        DeltaRecord::Dynamic { steps, .. } => {
            if *steps == 0 || !(-7..=7).contains(steps) {
                return Err(FormatError::schema(
                    "records.steps",
                    "dynamic steps must be nonzero in [-7, 7]",
                ));
            }
        }
        DeltaRecord::Articulation { from, to, .. } => {
            if from == to || *from <= 0.0 || *to <= 0.0 {
                return Err(FormatError::schema(
                    "records",
                    "articulation endpoints must be positive and distinct",
                ));
            }
        }
        DeltaRecord::Tempo { step: 0, .. } => {
            return Err(FormatError::schema(
                "records.step",
                "tempo step must be nonzero",
            ));
        }
        _ => {}
    }
    Ok(())
}

fn parse_fingerprint(value: &Value, field: &str) -> Result<u64, FormatError> {
    let s = as_str(value, field)?;
    u64::from_str_radix(s, 16).map_err(|_| FormatError::schema(field, "expected 16 hex digits"))
}

fn record_to_value(record: &DeltaRecord) -> Value {
    match record {
        DeltaRecord::Dynamic {
            part_id,
            measure,
            onset,
            duration,
            pitch,
            occurrence,
            steps,
        } => Value::map(vec![
            ("kind", Value::sym("dynamic")),
            ("part", Value::Str(part_id.clone())),
            ("measure", Value::Int(*measure as i64)),
            ("onset", Value::Int(i64::from(*onset))),
            ("duration", Value::Int(i64::from(*duration))),
            ("pitch", note_value_helpers::pitch_to_value(*pitch)),
            ("occurrence", Value::Int(i64::from(*occurrence))),
            ("steps", Value::Int(i64::from(*steps))),
        ]),
        DeltaRecord::Articulation {
            part_id,
            measure,
            onset,
            duration,
            pitch,
            occurrence,
            from,
            to,
        } => Value::map(vec![
            ("kind", Value::sym("articulation")),
            ("part", Value::Str(part_id.clone())),
            ("measure", Value::Int(*measure as i64)),
            ("onset", Value::Int(i64::from(*onset))),
            ("duration", Value::Int(i64::from(*duration))),
            ("pitch", note_value_helpers::pitch_to_value(*pitch)),
            ("occurrence", Value::Int(i64::from(*occurrence))),
            ("from", Value::Real(*from)),
            ("to", Value::Real(*to)),
        ]),
        DeltaRecord::Tempo { measure, step } => Value::map(vec![
            ("kind", Value::sym("tempo")),
            ("measure", Value::Int(*measure as i64)),
            ("step", Value::Int(i64::from(*step))),
        ]),
        DeltaRecord::NoteInserted {
            part_id,
            measure,
            note,
        } => Value::map(vec![
            ("kind", Value::sym("note_inserted")),
            ("part", Value::Str(part_id.clone())),
            ("measure", Value::Int(*measure as i64)),
            ("note", note_value_helpers::note_to_value(note)),
        ]),
        DeltaRecord::NoteRemoved {
            part_id,
            measure,
            note,
        } => Value::map(vec![
            ("kind", Value::sym("note_removed")),
            ("part", Value::Str(part_id.clone())),
            ("measure", Value::Int(*measure as i64)),
            ("note", note_value_helpers::note_to_value(note)),
        ]),
        DeltaRecord::TitleChanged { from, to } => Value::map(vec![
            ("kind", Value::sym("title")),
            ("from", Value::Str(from.clone())),
            ("to", Value::Str(to.clone())),
        ]),
    }
}

fn value_to_record(value: &Value) -> Result<DeltaRecord, FormatError> {
    let mut view = MapView::new(value, "records")?;
    let kind = as_sym(view.required("kind")?, "records.kind")?.to_string();
    let record = match kind.as_str() {
        "dynamic" => DeltaRecord::Dynamic {
            part_id: as_str(view.required("part")?, "records.part")?.to_string(),
            measure: as_usize(view.required("measure")?, "records.measure")?,
            onset: parse_u32(view.required("onset")?, "records.onset")?,
            duration: parse_u32(view.required("duration")?, "records.duration")?,
            pitch: note_value_helpers::parse_pitch(view.required("pitch")?)?,
            occurrence: parse_u32(view.required("occurrence")?, "records.occurrence")?,
            steps: as_int(view.required("steps")?, "records.steps")? as i32,
        },
        "articulation" => DeltaRecord::Articulation {
            part_id: as_str(view.required("part")?, "records.part")?.to_string(),
            measure: as_usize(view.required("measure")?, "records.measure")?,
            onset: parse_u32(view.required("onset")?, "records.onset")?,
            duration: parse_u32(view.required("duration")?, "records.duration")?,
            pitch: note_value_helpers::parse_pitch(view.required("pitch")?)?,
            occurrence: parse_u32(view.required("occurrence")?, "records.occurrence")?,
            from: as_real(view.required("from")?, "records.from")?,
            to: as_real(view.required("to")?, "records.to")?,
        },
        "tempo" => DeltaRecord::Tempo {
            measure: as_usize(view.required("measure")?, "records.measure")?,
            step: as_int(view.required("step")?, "records.step")? as i32,
        },
        "note_inserted" => DeltaRecord::NoteInserted {
            part_id: as_str(view.required("part")?, "records.part")?.to_string(),
            measure: as_usize(view.required("measure")?, "records.measure")?,
            note: note_value_helpers::parse_note(view.required("note")?)?,
        },
        "note_removed" => DeltaRecord::NoteRemoved {
            part_id: as_str(view.required("part")?, "records.part")?.to_string(),
            measure: as_usize(view.required("measure")?, "records.measure")?,
            note: note_value_helpers::parse_note(view.required("note")?)?,
        },
        "title" => DeltaRecord::TitleChanged {
            from: as_str(view.required("from")?, "records.from")?.to_string(),
            to: as_str(view.required("to")?, "records.to")?.to_string(),
        },
        other => {
            return Err(FormatError::schema(
                "records.kind",
                format!("unknown record kind `{other}`"),
            ))
        }
    };
    view.finish()?;
    Ok(record)
}

fn parse_u32(value: &Value, field: &str) -> Result<u32, FormatError> {
    let i = as_int(value, field)?;
    u32::try_from(i).map_err(|_| FormatError::schema(field, format!("value {i} out of range")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{DynamicLevel, TempoEntry};
    use crate::test_support::{one_part_score, two_part_score};

    #[test]
    fn identical_scores_diff_empty() {
        let s = two_part_score();
        let deltas = diff_scores(&s, &s).unwrap();
        assert!(deltas.is_empty());
        assert_eq!(deltas.base_fingerprint, deltas.target_fingerprint);
    }

    #[test]
    fn single_dynamic_change_is_one_record() {
        let a = two_part_score();
        let mut b = a.clone();
        b.parts[0].measures[2].notes[0].dynamic = DynamicLevel::F; // p -> f
        let deltas = diff_scores(&a, &b).unwrap();
        assert_eq!(deltas.records.len(), 1);
        match &deltas.records[0] {
            DeltaRecord::Dynamic {
                part_id,
                measure,
                steps,
                ..
            } => {
                assert_eq!(part_id, "vln1");
                assert_eq!(*measure, 2);
                assert_eq!(*steps, 3);
            }
            other => panic!("unexpected record {other:?}"),
        }
    }

    #[test]
    fn bulk_removal_is_not_the_same_work() {
        let a = one_part_score();
        let mut b = a.clone();
        // drop 2 of 16 notes: 12.5% exceeds the 5% budget
        b.parts[0].measures[0].notes.remove(0);
        b.parts[0].measures[1].notes.remove(0);
        assert!(diff_scores(&a, &b).is_err());
    }

    #[test]
    fn apply_round_trips_a_mixed_edit() {
        let a = two_part_score();
        let mut b = a.clone();
        b.title = "Duo (live)".into();
        b.parts[0].measures[1].notes[0].dynamic = DynamicLevel::Ff;
        b.parts[0].measures[1].notes[1].articulation = 0.75;
        b.parts[1].measures[3].notes.clear(); // one removal, within budget
        b.tempo_map = vec![
            TempoEntry {
                measure: 0,
                bpm: 120,
            },
            TempoEntry {
                measure: 2,
                bpm: 132,
            },
        ];
        let deltas = diff_scores(&a, &b).unwrap();
        assert_eq!(apply_delta(&a, &deltas).unwrap(), b);
        assert_eq!(apply_delta(&b, &invert_delta(&deltas)).unwrap(), a);
    }

    #[test]
    fn apply_on_empty_delta_is_identity() {
        let a = two_part_score();
        let deltas = diff_scores(&a, &a).unwrap();
        assert_eq!(apply_delta(&a, &deltas).unwrap(), a);
    }

    #[test]
    fn dynamic_step_out_of_range_is_refused() {
        let a = one_part_score();
        let deltas = DeltaSet {
            base_fingerprint: skeleton_fingerprint(&a),
            target_fingerprint: skeleton_fingerprint(&a),
            records: vec![DeltaRecord::Dynamic {
                part_id: "vln1".into(),
                measure: 0,
                onset: 0,
                duration: 480,
                pitch: Pitch::Pitched(60),
                occurrence: 0,
                steps: 5, // mf is 5; 5 + 5 = 10 > 8
            }],
        };
        assert!(matches!(
            apply_delta(&a, &deltas),
            Err(ApplyError::OutOfRange(_))
        ));
    }

    #[test]
    fn fingerprint_mismatch_is_refused() {
        let a = one_part_score();
        let b = two_part_score();
        let deltas = diff_scores(&a, &a).unwrap();
        assert!(matches!(
            apply_delta(&b, &deltas),
            Err(ApplyError::FingerprintMismatch { .. })
        ));
    }

    #[test]
    fn invert_is_an_involution() {
        let a = two_part_score();
        let mut b = a.clone();
        b.parts[0].measures[0].notes[0].dynamic = DynamicLevel::Fff;
        b.parts[0].measures[0].notes[1].articulation = 1.5;
        let deltas = diff_scores(&a, &b).unwrap();
        assert_eq!(invert_delta(&invert_delta(&deltas)), deltas);
    }

    #[test]
    fn delta_file_round_trips() {
        let a = two_part_score();
        let mut b = a.clone();
        b.parts[0].measures[1].notes[0].dynamic = DynamicLevel::Mp;
        b.parts[1].measures[2].notes[0].articulation = 1.25;
        b.tempo_map = vec![TempoEntry {
            measure: 0,
            bpm: 108,
        }];
        let deltas = diff_scores(&a, &b).unwrap();
        let bytes = write_delta(&deltas);
        let parsed = parse_delta(&bytes).unwrap();
        assert_eq!(parsed, deltas);
        assert_eq!(write_delta(&parsed), bytes);
    }
}
