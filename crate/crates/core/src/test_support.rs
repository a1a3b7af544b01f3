//! Small score fixtures shared by unit tests.

use crate::score::{DynamicLevel, Measure, Note, Part, Pitch, Score, TempoEntry, TimeSignature};

pub fn measure_with(index: usize, notes: Vec<Note>) -> Measure {
    Measure::new(index, TimeSignature::COMMON, notes)
}

/// One violin part, four 4/4 measures of quarter notes at mf, tempo 120.
pub fn one_part_score() -> Score {
    let measures = (0..4)
        .map(|i| {
            measure_with(
                i,
                (0..4)
                    .map(|q| {
                        Note::new(q * 480, 480, Pitch::Pitched(60 + q as u8), DynamicLevel::Mf)
                    })
                    .collect(),
            )
        })
        .collect();
    Score {
        title: "Fixture".into(),
        divisions: 480,
        parts: vec![Part::new("vln1", "violin", measures).unwrap()],
        tempo_map: vec![TempoEntry {
            measure: 0,
            bpm: 120,
        }],
        movement_boundaries: vec![0],
    }
}

/// Violin plus trumpet over eight measures; the trumpet rests in measure 0.
/// Big enough (23 notes) that one structural edit fits the diff budget.
pub fn two_part_score() -> Score {
    let violin = (0..8)
        .map(|i| {
            measure_with(
                i,
                vec![
                    Note::new(0, 960, Pitch::Pitched(64), DynamicLevel::P),
                    Note::new(960, 960, Pitch::Pitched(67), DynamicLevel::P),
                ],
            )
        })
        .collect();
    let trumpet = (0..8)
        .map(|i| {
            if i == 0 {
                measure_with(i, vec![])
            } else {
                measure_with(
                    i,
                    vec![Note::new(0, 1920, Pitch::Pitched(70), DynamicLevel::F)],
                )
            }
        })
        .collect();
    Score {
        title: "Duo".into(),
        divisions: 480,
        parts: vec![
            Part::new("vln1", "violin", violin).unwrap(),
            Part::new("tpt", "trumpet", trumpet).unwrap(),
        ],
        tempo_map: vec![TempoEntry {
            measure: 0,
            bpm: 120,
        }],
        movement_boundaries: vec![0],
    }
}
