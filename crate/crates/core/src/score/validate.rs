//! Structural validity checks for the score IR. Returns every violation
//! rather than stopping at the first, so callers can report them all.

use std::collections::BTreeSet;
use std::fmt;

use super::{lookup, Score, ARTICULATION_MAX, ARTICULATION_MIN, BPM_MAX, BPM_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructuralErrorCode {
    EmptyParts,
    DuplicatePartId,
    UnknownInstrument,
    GroupMismatch,
    PartLengthMismatch,
    TimeSignatureMismatch,
    BadTimeSignature,
    BadDivisions,
    MeasureIndexMismatch,
    NotesUnsorted,
    NoteOverflow,
    ZeroDuration,
    BadPitch,
    ArticulationOutOfRange,
    TempoMapEmpty,
    TempoMapUnsorted,
    TempoMapRedundant,
    TempoOutOfRange,
    MovementBoundariesInvalid,
}

impl StructuralErrorCode {
    pub fn name(self) -> &'static str {
        match self {
            StructuralErrorCode::EmptyParts => "empty_parts",
            StructuralErrorCode::DuplicatePartId => "duplicate_part_id",
            StructuralErrorCode::UnknownInstrument => "unknown_instrument",
            StructuralErrorCode::GroupMismatch => "group_mismatch",
            StructuralErrorCode::PartLengthMismatch => "part_length_mismatch",
            StructuralErrorCode::TimeSignatureMismatch => "time_signature_mismatch",
            StructuralErrorCode::BadTimeSignature => "bad_time_signature",
            StructuralErrorCode::BadDivisions => "bad_divisions",
            StructuralErrorCode::MeasureIndexMismatch => "measure_index_mismatch",
            StructuralErrorCode::NotesUnsorted => "notes_unsorted",
            StructuralErrorCode::NoteOverflow => "note_overflow",
            StructuralErrorCode::ZeroDuration => "zero_duration",
            StructuralErrorCode::BadPitch => "bad_pitch",
            StructuralErrorCode::ArticulationOutOfRange => "articulation_out_of_range",
            StructuralErrorCode::TempoMapEmpty => "tempo_map_empty",
            StructuralErrorCode::TempoMapUnsorted => "tempo_map_unsorted",
            StructuralErrorCode::TempoMapRedundant => "tempo_map_redundant",
            StructuralErrorCode::TempoOutOfRange => "tempo_out_of_range",
            StructuralErrorCode::MovementBoundariesInvalid => "movement_boundaries_invalid",
        }
    }
}

/// One invariant violation, with enough location to find it in the source.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralError {
    pub code: StructuralErrorCode,
    pub part_id: Option<String>,
    pub measure_index: Option<usize>,
    pub detail: String,
}

impl StructuralError {
    fn score(code: StructuralErrorCode, detail: impl Into<String>) -> Self {
        StructuralError {
            code,
            part_id: None,
            measure_index: None,
            detail: detail.into(),
        }
    }

    fn part(code: StructuralErrorCode, part_id: &str, detail: impl Into<String>) -> Self {
        StructuralError {
            code,
            part_id: Some(part_id.to_string()),
            measure_index: None,
            detail: detail.into(),
        }
    }

    fn measure(
        code: StructuralErrorCode,
        part_id: &str,
        measure: usize,
        detail: impl Into<String>,
    ) -> Self {
        StructuralError {
            code,
            part_id: Some(part_id.to_string()),
            measure_index: Some(measure),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for StructuralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code.name())?;
        if let Some(part) = &self.part_id {
            write!(f, " in part `{part}`")?;
        }
        if let Some(measure) = self.measure_index {
            write!(f, " at measure {measure}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Checks every IR invariant; an empty result means the score is well formed.
pub fn validate_score(score: &Score) -> Vec<StructuralError> {
    let mut errors = Vec::new();

    if score.divisions == 0 {
        errors.push(StructuralError::score(
            StructuralErrorCode::BadDivisions,
            "divisions must be positive",
        ));
    }
    if score.parts.is_empty() {
        errors.push(StructuralError::score(
            StructuralErrorCode::EmptyParts,
            "a score needs at least one part",
        ));
    }

    let mut ids = BTreeSet::new();
    for part in &score.parts {
        if !ids.insert(part.id.as_str()) {
            errors.push(StructuralError::part(
                StructuralErrorCode::DuplicatePartId,
                &part.id,
                "part id used more than once",
            ));
        }
        match lookup(&part.instrument_name) {
            None => errors.push(StructuralError::part(
                StructuralErrorCode::UnknownInstrument,
                &part.id,
                format!("instrument `{}` is not in the table", part.instrument_name),
            )),
            Some(info) if info.group != part.group => errors.push(StructuralError::part(
                StructuralErrorCode::GroupMismatch,
                &part.id,
                format!(
                    "group {} disagrees with table group {}",
                    part.group.name(),
                    info.group.name()
                ),
            )),
            Some(_) => {}
        }
    }

    let reference = score.parts.first();
    let measure_count = reference.map_or(0, |p| p.measures.len());

    for part in score.parts.iter().skip(1) {
        if part.measures.len() != measure_count {
            errors.push(StructuralError::part(
                StructuralErrorCode::PartLengthMismatch,
                &part.id,
                format!(
                    "{} measures, expected {}",
                    part.measures.len(),
                    measure_count
                ),
            ));
        }
    }

    for part in &score.parts {
        for (position, measure) in part.measures.iter().enumerate() {
            if measure.index != position {
                errors.push(StructuralError::measure(
                    StructuralErrorCode::MeasureIndexMismatch,
                    &part.id,
                    position,
                    format!("stored index {} disagrees with position", measure.index),
                ));
            }
            if !measure.time_signature.is_valid() {
                errors.push(StructuralError::measure(
                    StructuralErrorCode::BadTimeSignature,
                    &part.id,
                    position,
                    format!(
                        "{}/{}",
                        measure.time_signature.numerator, measure.time_signature.denominator
                    ),
                ));
                continue;
            }
            if let Some(first) = reference {
                if position < first.measures.len()
                    && first.measures[position].time_signature != measure.time_signature
                {
                    errors.push(StructuralError::measure(
                        StructuralErrorCode::TimeSignatureMismatch,
                        &part.id,
                        position,
                        "time signature differs from the first part",
                    ));
                }
            }
            let length = measure.tick_length(score.divisions);
            for pair in measure.notes.windows(2) {
                let a = (pair[0].onset_ticks, pair[0].pitch.order_key());
                let b = (pair[1].onset_ticks, pair[1].pitch.order_key());
                if a > b {
                    errors.push(StructuralError::measure(
                        StructuralErrorCode::NotesUnsorted,
                        &part.id,
                        position,
                        "notes not sorted by (onset, pitch)",
                    ));
                    break;
                }
            }
            for note in &measure.notes {
                if note.duration_ticks == 0 {
                    errors.push(StructuralError::measure(
                        StructuralErrorCode::ZeroDuration,
                        &part.id,
                        position,
                        format!("note at onset {} has zero duration", note.onset_ticks),
                    ));
                }
                if u64::from(note.onset_ticks) + u64::from(note.duration_ticks) > u64::from(length)
                {
                    errors.push(StructuralError::measure(
                        StructuralErrorCode::NoteOverflow,
                        &part.id,
                        position,
                        format!(
                            "onset {} + duration {} exceeds measure length {}",
                            note.onset_ticks, note.duration_ticks, length
                        ),
                    ));
                }
                if let super::Pitch::Pitched(p) = note.pitch {
                    if p > 127 {
                        errors.push(StructuralError::measure(
                            StructuralErrorCode::BadPitch,
                            &part.id,
                            position,
                            format!("MIDI pitch {p} above 127"),
                        ));
                    }
                }
                if !(ARTICULATION_MIN..=ARTICULATION_MAX).contains(&note.articulation)
                    || !note.articulation.is_finite()
                {
                    errors.push(StructuralError::measure(
                        StructuralErrorCode::ArticulationOutOfRange,
                        &part.id,
                        position,
                        format!(
                            "articulation {} outside [{ARTICULATION_MIN}, {ARTICULATION_MAX}]",
                            note.articulation
                        ),
                    ));
                }
            }
        }
    }

    validate_tempo_map(score, measure_count, &mut errors);
    validate_movements(score, measure_count, &mut errors);

    errors
}

fn validate_tempo_map(score: &Score, measure_count: usize, errors: &mut Vec<StructuralError>) {
    if score.tempo_map.is_empty() {
        errors.push(StructuralError::score(
            StructuralErrorCode::TempoMapEmpty,
            "tempo map must be non-empty",
        ));
        return;
    }
    if score.tempo_map[0].measure != 0 {
        errors.push(StructuralError::score(
            StructuralErrorCode::TempoMapUnsorted,
            "first tempo entry must sit at measure 0",
        ));
    }
    for pair in score.tempo_map.windows(2) {
        if pair[0].measure >= pair[1].measure {
            errors.push(StructuralError::score(
                StructuralErrorCode::TempoMapUnsorted,
                format!(
                    "entries at measures {} and {} out of order",
                    pair[0].measure, pair[1].measure
                ),
            ));
        }
        if pair[0].bpm == pair[1].bpm {
            errors.push(StructuralError::score(
                StructuralErrorCode::TempoMapRedundant,
                format!(
                    "entry at measure {} repeats bpm {}",
                    pair[1].measure, pair[1].bpm
                ),
            ));
        }
    }
    for entry in &score.tempo_map {
        if !(BPM_MIN..=BPM_MAX).contains(&entry.bpm) {
            errors.push(StructuralError::score(
                StructuralErrorCode::TempoOutOfRange,
                format!(
                    "bpm {} at measure {} outside [{BPM_MIN}, {BPM_MAX}]",
                    entry.bpm, entry.measure
                ),
            ));
        }
        if measure_count > 0 && entry.measure >= measure_count {
            errors.push(StructuralError::score(
                StructuralErrorCode::TempoMapUnsorted,
                format!("entry at measure {} beyond the last measure", entry.measure),
            ));
        }
    }
}

fn validate_movements(score: &Score, measure_count: usize, errors: &mut Vec<StructuralError>) {
    let b = &score.movement_boundaries;
    let ok = !b.is_empty()
        && b[0] == 0
        && b.windows(2).all(|w| w[0] < w[1])
        && (measure_count == 0 || b.last().copied().unwrap_or(0) < measure_count);
    if !ok {
        errors.push(StructuralError::score(
            StructuralErrorCode::MovementBoundariesInvalid,
            "boundaries must be sorted, unique, start at 0, and stay within the score",
        ));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{DynamicLevel, Note, Pitch, TempoEntry};
    use crate::test_support::{one_part_score, two_part_score};

    #[test]
    fn well_formed_score_has_no_errors() {
        assert_eq!(validate_score(&one_part_score()), vec![]);
        assert_eq!(validate_score(&two_part_score()), vec![]);
    }

    #[test]
    fn part_length_mismatch_is_flagged() {
        let mut score = two_part_score();
        score.parts[1].measures.pop();
        let errors = validate_score(&score);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].code, StructuralErrorCode::PartLengthMismatch);
        assert_eq!(errors[0].part_id.as_deref(), Some("tpt"));
    }

    #[test]
    fn note_overflow_is_flagged_with_location() {
        let mut score = one_part_score();
        score.parts[0].measures[0].notes.push(Note::new(
            1800,
            200,
            Pitch::Pitched(60),
            DynamicLevel::Mf,
        ));
        score.parts[0].measures[0]
            .notes
            .sort_by_key(Note::order_key);
        let errors = validate_score(&score);
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].code, StructuralErrorCode::NoteOverflow);
        assert_eq!(errors[0].measure_index, Some(0));
    }

    #[test]
    fn each_injected_violation_yields_exactly_its_code() {
        // mutation checks: one edit, one matching error
        let base = two_part_score();

        let mut s = base.clone();
        s.parts[0].measures[1]
            .notes
            .insert(0, Note::new(960, 480, Pitch::Pitched(70), DynamicLevel::F));
        expect_single(&s, StructuralErrorCode::NotesUnsorted);

        let mut s = base.clone();
        s.parts[0].measures[0].notes[0].articulation = 3.0;
        expect_single(&s, StructuralErrorCode::ArticulationOutOfRange);

        let mut s = base.clone();
        s.tempo_map = vec![TempoEntry {
            measure: 0,
            bpm: 300,
        }];
        expect_single(&s, StructuralErrorCode::TempoOutOfRange);

        let mut s = base.clone();
        s.tempo_map = vec![
            TempoEntry {
                measure: 0,
                bpm: 120,
            },
            TempoEntry {
                measure: 2,
                bpm: 120,
            },
        ];
        expect_single(&s, StructuralErrorCode::TempoMapRedundant);

        let mut s = base.clone();
        s.movement_boundaries = vec![1];
        expect_single(&s, StructuralErrorCode::MovementBoundariesInvalid);

        let mut s = base.clone();
        s.parts[1].id = s.parts[0].id.clone();
        expect_single(&s, StructuralErrorCode::DuplicatePartId);

        let mut s = base.clone();
        s.parts[0].instrument_name = "kazoo".into();
        expect_single(&s, StructuralErrorCode::UnknownInstrument);

        let mut s = base.clone();
        s.parts[0].group = crate::score::InstrumentGroup::Brass;
        expect_single(&s, StructuralErrorCode::GroupMismatch);

        let mut s = base.clone();
        // measure 0 of the trumpet is empty, so only the mismatch fires
        s.parts[1].measures[0].time_signature = crate::score::TimeSignature::new(3, 4);
        expect_single(&s, StructuralErrorCode::TimeSignatureMismatch);

        let mut s = base.clone();
        s.parts[0].measures[0].notes[0].duration_ticks = 0;
        expect_single(&s, StructuralErrorCode::ZeroDuration);
    }

    fn expect_single(score: &Score, code: StructuralErrorCode) {
        let errors = validate_score(score);
        assert_eq!(
            errors.len(),
            1,
            "expected one error for {code:?}, got {errors:?}"
        );
        assert_eq!(errors[0].code, code);
    }
}
