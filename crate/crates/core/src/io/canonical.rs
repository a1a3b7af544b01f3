//! The canonical `maestro-score/1` score file: deterministic bytes in, the
//! same bytes out. Parsing validates the structure, so a returned [`Score`]
//! always passes [`validate_score`].

use crate::canon::{self, as_int, as_list, as_real, as_str, as_usize, FormatError, MapView, Value};
use crate::score::{
    validate_score, DynamicLevel, InvalidScore, Measure, Note, Part, Pitch, Score, StructuralError,
    TempoEntry, TimeSignature,
};

pub const SCORE_VERSION: &str = "maestro-score/1";

/// Serializes a valid score to canonical bytes.
pub fn write_canonical(score: &Score) -> Result<Vec<u8>, InvalidScore> {
    let errors = validate_score(score);
    if !errors.is_empty() {
        return Err(InvalidScore(errors));
    }
    Ok(canon::write_document(SCORE_VERSION, &score_to_value(score)).into_bytes())
}

/// Parses canonical bytes into a validated score.
pub fn parse_canonical(bytes: &[u8]) -> Result<Score, FormatError> {
    let (score, errors) = parse_canonical_lenient(bytes)?;
    if let Some(first) = errors.first() {
        return Err(FormatError::schema(
            "score",
            format!("{first}{}", more(errors.len())),
        ));
    }
    Ok(score)
}

/// Parses the document but returns structural problems instead of failing
/// on them, so a checker can report every violation.
pub fn parse_canonical_lenient(bytes: &[u8]) -> Result<(Score, Vec<StructuralError>), FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Syntax {
        line: 1,
        col: 1,
        message: format!("not UTF-8: {e}"),
    })?;
    let body = canon::parse_document(text, SCORE_VERSION)?;
    let score = value_to_score(&body)?;
    let errors = validate_score(&score);
    Ok((score, errors))
}

fn more(n: usize) -> String {
    if n > 1 {
        format!(" (+{} more)", n - 1)
    } else {
        String::new()
    }
}

fn score_to_value(score: &Score) -> Value {
    Value::map(vec![
        ("title", Value::Str(score.title.clone())),
        ("divisions", Value::Int(i64::from(score.divisions))),
        (
            "movement_boundaries",
            Value::List(
                score
                    .movement_boundaries
                    .iter()
                    .map(|&m| Value::Int(m as i64))
                    .collect(),
            ),
        ),
        (
            "tempo_map",
            Value::List(
                score
                    .tempo_map
                    .iter()
                    .map(|e| {
                        Value::map(vec![
                            ("measure", Value::Int(e.measure as i64)),
                            ("bpm", Value::Int(i64::from(e.bpm))),
                        ])
                    })
                    .collect(),
            ),
        ),
        (
            "parts",
            Value::List(score.parts.iter().map(part_to_value).collect()),
        ),
    ])
}

fn part_to_value(part: &Part) -> Value {
    Value::map(vec![
        ("id", Value::Str(part.id.clone())),
        ("instrument", Value::Str(part.instrument_name.clone())),
        (
            "measures",
            Value::List(part.measures.iter().map(measure_to_value).collect()),
        ),
    ])
}

fn measure_to_value(measure: &Measure) -> Value {
    Value::map(vec![
        (
            "time",
            Value::List(vec![
                Value::Int(i64::from(measure.time_signature.numerator)),
                Value::Int(i64::from(measure.time_signature.denominator)),
            ]),
        ),
        (
            "notes",
            Value::List(measure.notes.iter().map(note_to_value).collect()),
        ),
    ])
}

pub(crate) fn note_to_value(note: &Note) -> Value {
    Value::map(vec![
        ("onset", Value::Int(i64::from(note.onset_ticks))),
        ("duration", Value::Int(i64::from(note.duration_ticks))),
        ("pitch", pitch_to_value(note.pitch)),
        ("dynamic", Value::Int(i64::from(note.dynamic.index()))),
        ("articulation", Value::Real(note.articulation)),
    ])
}

pub(crate) fn pitch_to_value(pitch: Pitch) -> Value {
    match pitch {
        Pitch::Pitched(p) => Value::Int(i64::from(p)),
        Pitch::Unpitched => Value::sym("unpitched"),
    }
}

fn value_to_score(body: &Value) -> Result<Score, FormatError> {
    let mut view = MapView::new(body, "")?;
    let title = as_str(view.required("title")?, "title")?.to_string();
    let divisions = parse_u32(view.required("divisions")?, "divisions")?;
    let movement_boundaries =
        as_list(view.required("movement_boundaries")?, "movement_boundaries")?
            .iter()
            .map(|v| as_usize(v, "movement_boundaries"))
            .collect::<Result<Vec<_>, _>>()?;
    let tempo_map = as_list(view.required("tempo_map")?, "tempo_map")?
        .iter()
        .map(parse_tempo_entry)
        .collect::<Result<Vec<_>, _>>()?;
    let parts = as_list(view.required("parts")?, "parts")?
        .iter()
        .map(parse_part)
        .collect::<Result<Vec<_>, _>>()?;
    view.finish()?;
    Ok(Score {
        title,
        divisions,
        parts,
        tempo_map,
        movement_boundaries,
    })
}

fn parse_tempo_entry(value: &Value) -> Result<TempoEntry, FormatError> {
    let mut view = MapView::new(value, "tempo_map")?;
    let measure = as_usize(view.required("measure")?, "tempo_map.measure")?;
    let bpm = parse_u32(view.required("bpm")?, "tempo_map.bpm")?;
    view.finish()?;
    Ok(TempoEntry { measure, bpm })
}

fn parse_part(value: &Value) -> Result<Part, FormatError> {
    let mut view = MapView::new(value, "parts")?;
    let id = as_str(view.required("id")?, "parts.id")?.to_string();
    let instrument = as_str(view.required("instrument")?, "parts.instrument")?.to_string();
    let measures = as_list(view.required("measures")?, "parts.measures")?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_measure(v, i))
        .collect::<Result<Vec<_>, _>>()?;
    view.finish()?;
    Part::new(id, instrument, measures)
        .map_err(|e| FormatError::schema("parts.instrument", e.to_string()))
}

fn parse_measure(value: &Value, index: usize) -> Result<Measure, FormatError> {
    let mut view = MapView::new(value, "measures")?;
    let time = as_list(view.required("time")?, "measures.time")?;
    if time.len() != 2 {
        return Err(FormatError::schema(
            "measures.time",
            "expected [numerator denominator]",
        ));
    }
    let time_signature = TimeSignature::new(
        parse_u32(&time[0], "measures.time")?,
        parse_u32(&time[1], "measures.time")?,
    );
    let notes = as_list(view.required("notes")?, "measures.notes")?
        .iter()
        .map(parse_note)
        .collect::<Result<Vec<_>, _>>()?;
    view.finish()?;
    // keep stored order; the validator rejects unsorted notes
    Ok(Measure {
        index,
        time_signature,
        notes,
    })
}

pub(crate) fn parse_note(value: &Value) -> Result<Note, FormatError> {
    let mut view = MapView::new(value, "notes")?;
    let onset_ticks = parse_u32(view.required("onset")?, "notes.onset")?;
    let duration_ticks = parse_u32(view.required("duration")?, "notes.duration")?;
    let pitch = parse_pitch(view.required("pitch")?)?;
    let dynamic_index = as_int(view.required("dynamic")?, "notes.dynamic")?;
    let dynamic = u8::try_from(dynamic_index)
        .ok()
        .and_then(DynamicLevel::from_index)
        .ok_or_else(|| {
            FormatError::schema(
                "notes.dynamic",
                format!("dynamic index {dynamic_index} outside [1, 8]"),
            )
        })?;
    let articulation = as_real(view.required("articulation")?, "notes.articulation")?;
    view.finish()?;
    Ok(Note {
        onset_ticks,
        duration_ticks,
        pitch,
        dynamic,
        articulation,
    })
}

pub(crate) fn parse_pitch(value: &Value) -> Result<Pitch, FormatError> {
    match value {
        Value::Int(p) => {
            let p = u8::try_from(*p).ok().filter(|&p| p <= 127).ok_or_else(|| {
                FormatError::schema(
                    "notes.pitch",
                    format!("MIDI pitch {value} outside [0, 127]"),
                )
            })?;
            Ok(Pitch::Pitched(p))
        }
        Value::Sym(s) if s == "unpitched" => Ok(Pitch::Unpitched),
        other => Err(FormatError::schema(
            "notes.pitch",
            format!("expected a MIDI pitch or `unpitched`, found {other}"),
        )),
    }
}

fn parse_u32(value: &Value, field: &str) -> Result<u32, FormatError> {
    let i = as_int(value, field)?;
    u32::try_from(i).map_err(|_| FormatError::schema(field, format!("value {i} out of range")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{one_part_score, two_part_score};

    #[test]
    fn write_then_parse_is_identity() {
        for score in [one_part_score(), two_part_score()] {
            let bytes = write_canonical(&score).unwrap();
            let parsed = parse_canonical(&bytes).unwrap();
            assert_eq!(parsed, score);
            // parse . write on canonical bytes is byte identity
            assert_eq!(write_canonical(&parsed).unwrap(), bytes);
        }
    }

    #[test]
    fn writing_twice_gives_identical_bytes() {
        let score = two_part_score();
        assert_eq!(
            write_canonical(&score).unwrap(),
            write_canonical(&score).unwrap()
        );
    }

    #[test]
    fn empty_title_survives() {
        let mut score = one_part_score();
        score.title.clear();
        let parsed = parse_canonical(&write_canonical(&score).unwrap()).unwrap();
        assert_eq!(parsed.title, "");
    }

    #[test]
    fn invalid_score_is_refused_on_write() {
        let mut score = one_part_score();
        score.tempo_map.clear();
        assert!(matches!(write_canonical(&score), Err(InvalidScore(_))));
    }

    #[test]
    fn minimal_document_parses_with_defaults_spelled_out() {
        let text = "maestro-score/1\n\
                    divisions 480\n\
                    movement_boundaries [0]\n\
                    parts [\n  {\n    id \"vln1\"\n    instrument \"violin\"\n    measures [\n      {\n        notes []\n        time [4 4]\n      }\n    ]\n  }\n]\n\
                    tempo_map [\n  {bpm 120 measure 0}\n]\n\
                    title \"\"\n";
        let score = parse_canonical(text.as_bytes()).unwrap();
        assert_eq!(score.divisions, 480);
        assert_eq!(score.measure_count(), 1);
        assert_eq!(
            score.tempo_map,
            vec![TempoEntry {
                measure: 0,
                bpm: 120
            }]
        );
    }

    #[test]
    fn missing_tempo_map_is_schema_error() {
        let score = one_part_score();
        let text = String::from_utf8(write_canonical(&score).unwrap()).unwrap();
        let stripped: String = text
            .lines()
            .scan(false, |skipping, line| {
                if line.starts_with("tempo_map") {
                    *skipping = true;
                    Some(None)
                } else if *skipping {
                    if line == "]" {
                        *skipping = false;
                    }
                    Some(None)
                } else {
                    Some(Some(format!("{line}\n")))
                }
            })
            .flatten()
            .collect();
        match parse_canonical(stripped.as_bytes()) {
            Err(FormatError::Schema { field, .. }) => assert_eq!(field, "tempo_map"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_fields_rejected() {
        let score = one_part_score();
        let mut text = String::from_utf8(write_canonical(&score).unwrap()).unwrap();
        text.push_str("composer \"nobody\"\n");
        match parse_canonical(text.as_bytes()) {
            Err(FormatError::Schema { field, .. }) => assert_eq!(field, "composer"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let err = parse_canonical(b"maestro-score/2\n").unwrap_err();
        assert!(matches!(err, FormatError::Version { .. }));
    }
}
