//! Static playability checks: pitch ranges from the instrument table,
//! minimum performed note duration, sane tempi, and dynamic saturation.
//! The thresholds are configurable; the defaults are deliberate but not
//! sacred.

use crate::canon::{self, format_real, Value};
use crate::score::{lookup, Pitch, Score, BPM_MAX, BPM_MIN};
use crate::segment::segment_score;

pub const VIOLATIONS_VERSION: &str = "maestro-violations/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationCode {
    PitchOutOfRange,
    NoteTooShort,
    DynamicSaturation,
    TempoOutOfRange,
}

impl ViolationCode {
    pub fn name(self) -> &'static str {
        match self {
            ViolationCode::PitchOutOfRange => "pitch_out_of_range",
            ViolationCode::NoteTooShort => "note_too_short",
            ViolationCode::DynamicSaturation => "dynamic_saturation",
            ViolationCode::TempoOutOfRange => "tempo_out_of_range",
        }
    }
}

/// One playability problem, with where it is and how far past the limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub code: ViolationCode,
    pub part_id: Option<String>,
    pub measure_index: Option<usize>,
    pub onset_ticks: Option<u32>,
    /// The offending value, in the unit named by `detail`.
    pub measured: f64,
    /// The configured limit it crossed.
    pub limit: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayabilityConfig {
    /// Shortest performed note a player can articulate, in milliseconds.
    pub min_performed_ms: f64,
    /// Fraction of a part's notes in one segment allowed to sit at the
    /// dynamic extremes before the passage reads as saturated.
    pub saturation_threshold: f64,
    pub min_bpm: u32,
    pub max_bpm: u32,
}

impl Default for PlayabilityConfig {
    fn default() -> Self {
        PlayabilityConfig {
            min_performed_ms: 50.0,
            saturation_threshold: 0.5,
            min_bpm: BPM_MIN,
            max_bpm: BPM_MAX,
        }
    }
}

/// Checks with the default thresholds.
pub fn validate_playability(score: &Score) -> Vec<Violation> {
    validate_playability_with(score, &PlayabilityConfig::default())
}

pub fn validate_playability_with(score: &Score, config: &PlayabilityConfig) -> Vec<Violation> {
    let mut violations = Vec::new();

    for entry in &score.tempo_map {
        if entry.bpm < config.min_bpm || entry.bpm > config.max_bpm {
            violations.push(Violation {
                code: ViolationCode::TempoOutOfRange,
                part_id: None,
                measure_index: Some(entry.measure),
                onset_ticks: None,
                measured: f64::from(entry.bpm),
                limit: f64::from(if entry.bpm < config.min_bpm {
                    config.min_bpm
                } else {
                    config.max_bpm
                }),
                detail: format!(
                    "tempo {} bpm outside [{}, {}]",
                    entry.bpm, config.min_bpm, config.max_bpm
                ),
            });
        }
    }

    let tempi = score.expanded_tempo();
    for part in &score.parts {
        let info = lookup(&part.instrument_name);
        for (measure_index, measure) in part.measures.iter().enumerate() {
            let bpm = tempi.get(measure_index).copied().unwrap_or(120);
            let seconds_per_tick = 60.0 / (f64::from(bpm) * f64::from(score.divisions));
            for note in &measure.notes {
                if let (Some(info), Pitch::Pitched(pitch)) = (info, note.pitch) {
                    if pitch < info.min_pitch || pitch > info.max_pitch {
                        violations.push(Violation {
                            code: ViolationCode::PitchOutOfRange,
                            part_id: Some(part.id.clone()),
                            measure_index: Some(measure_index),
                            onset_ticks: Some(note.onset_ticks),
                            measured: f64::from(pitch),
                            limit: f64::from(if pitch < info.min_pitch {
                                info.min_pitch
                            } else {
                                info.max_pitch
                            }),
                            detail: format!(
                                "pitch {} outside the {} range [{}, {}]",
                                pitch, part.instrument_name, info.min_pitch, info.max_pitch
                            ),
                        });
                    }
                }
                let performed_ms =
                    f64::from(note.duration_ticks) * note.articulation * seconds_per_tick * 1000.0;
                if performed_ms < config.min_performed_ms {
                    violations.push(Violation {
                        code: ViolationCode::NoteTooShort,
                        part_id: Some(part.id.clone()),
                        measure_index: Some(measure_index),
                        onset_ticks: Some(note.onset_ticks),
                        measured: performed_ms,
                        limit: config.min_performed_ms,
                        detail: format!(
                            "performed duration {:.1} ms below {} ms at {} bpm",
                            performed_ms, config.min_performed_ms, bpm
                        ),
                    });
                }
            }
        }
    }

    // saturation is judged per part per segment
    for segment in segment_score(score) {
        for part in &score.parts {
            let mut total = 0usize;
            let mut extreme = 0usize;
            for measure in &part.measures[segment.start_measure..segment.end_measure] {
                for note in &measure.notes {
                    total += 1;
                    if matches!(note.dynamic.index(), 1 | 8) {
                        extreme += 1;
                    }
                }
            }
            if total > 0 {
                let fraction = extreme as f64 / total as f64;
                if fraction > config.saturation_threshold {
                    violations.push(Violation {
                        code: ViolationCode::DynamicSaturation,
                        part_id: Some(part.id.clone()),
                        measure_index: Some(segment.start_measure),
                        onset_ticks: None,
                        measured: fraction,
                        limit: config.saturation_threshold,
                        detail: format!(
                            "{extreme} of {total} notes at ppp or fff in segment {}",
                            segment.id
                        ),
                    });
                }
            }
        }
    }

    violations
}

/// CSV rows for reporting: `code,part_id,measure,onset,measured,limit`.
pub fn violations_to_csv(violations: &[Violation]) -> String {
    let mut out = String::from("code,part_id,measure,onset,measured,limit\n");
    for v in violations {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            v.code.name(),
            v.part_id.as_deref().unwrap_or(""),
            v.measure_index.map(|m| m.to_string()).unwrap_or_default(),
            v.onset_ticks.map(|o| o.to_string()).unwrap_or_default(),
            format_real(v.measured),
            format_real(v.limit),
        ));
    }
    out
}

/// Canonical-text form of the violation list.
pub fn write_violations(violations: &[Violation]) -> Vec<u8> {
    let items = violations
        .iter()
        .map(|v| {
            let mut entries = vec![
                ("code".to_string(), Value::sym(v.code.name())),
                ("measured".to_string(), Value::Real(v.measured)),
                ("limit".to_string(), Value::Real(v.limit)),
                ("detail".to_string(), Value::Str(v.detail.clone())),
            ];
            if let Some(part) = &v.part_id {
                entries.push(("part".to_string(), Value::Str(part.clone())));
            }
            if let Some(measure) = v.measure_index {
                entries.push(("measure".to_string(), Value::Int(measure as i64)));
            }
            if let Some(onset) = v.onset_ticks {
                entries.push(("onset".to_string(), Value::Int(i64::from(onset))));
            }
            Value::Map(entries)
        })
        .collect();
    let body = Value::map(vec![("violations", Value::List(items))]);
    canon::write_document(VIOLATIONS_VERSION, &body).into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::{DynamicLevel, Note, Pitch, TempoEntry};
    use crate::test_support::one_part_score;

    #[test]
    fn clean_fixture_has_no_violations() {
        assert_eq!(validate_playability(&one_part_score()), vec![]);
    }

    #[test]
    fn empty_score_has_nothing_to_flag() {
        let mut score = one_part_score();
        for measure in &mut score.parts[0].measures {
            measure.notes.clear();
        }
        assert_eq!(validate_playability(&score), vec![]);
    }

    #[test]
    fn violin_low_e_is_out_of_range() {
        let mut score = one_part_score();
        score.parts[0].measures[0].notes[0].pitch = Pitch::Pitched(40);
        let violations = validate_playability(&score);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].code, ViolationCode::PitchOutOfRange);
        assert_eq!(violations[0].measured, 40.0);
        assert_eq!(violations[0].limit, 55.0);
    }

    #[test]
    fn thirty_second_note_at_240_bpm_is_too_short() {
        let mut score = one_part_score();
        score.tempo_map = vec![TempoEntry {
            measure: 0,
            bpm: 208,
        }];
        // (60 / 208) / 8 * 0.75 s = 27.0 ms < 50 ms
        score.parts[0].measures[0].notes[0] = Note {
            onset_ticks: 0,
            duration_ticks: 60,
            pitch: Pitch::Pitched(60),
            dynamic: DynamicLevel::Mf,
            articulation: 0.75,
        };
        let violations = validate_playability(&score);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].code, ViolationCode::NoteTooShort);
        let expected_ms = 60.0 / 208.0 / 8.0 * 0.75 * 1000.0;
        assert!((violations[0].measured - expected_ms).abs() < 1e-9);
    }

    #[test]
    fn mostly_fff_part_reads_as_saturated() {
        let mut score = one_part_score();
        for measure in &mut score.parts[0].measures {
            for note in &mut measure.notes {
                note.dynamic = DynamicLevel::Fff;
            }
        }
        score.parts[0].measures[0].notes[0].dynamic = DynamicLevel::Mf;
        let violations = validate_playability(&score);
        assert_eq!(violations.len(), 1);
        assert_eq!(violations[0].code, ViolationCode::DynamicSaturation);
        assert_eq!(violations[0].measured, 15.0 / 16.0);
    }

    #[test]
    fn each_injected_fault_yields_exactly_its_code() {
        let base = one_part_score();

        let mut s = base.clone();
        s.parts[0].measures[2].notes[1].pitch = Pitch::Pitched(110);
        let v = validate_playability(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::PitchOutOfRange);

        let mut s = base.clone();
        s.parts[0].measures[1].notes[0].articulation = 0.25;
        s.parts[0].measures[1].notes[0].duration_ticks = 60;
        let v = validate_playability(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::NoteTooShort);

        // a permissive config turns the same fault back off
        let relaxed = PlayabilityConfig {
            min_performed_ms: 5.0,
            ..PlayabilityConfig::default()
        };
        assert_eq!(validate_playability_with(&s, &relaxed), vec![]);
    }

    #[test]
    fn csv_rows_carry_measured_and_limit() {
        let mut score = one_part_score();
        score.parts[0].measures[0].notes[0].pitch = Pitch::Pitched(40);
        let csv = violations_to_csv(&validate_playability(&score));
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("code,part_id,measure,onset,measured,limit")
        );
        assert_eq!(lines.next(), Some("pitch_out_of_range,vln1,0,0,40.0,55.0"));
    }
}
