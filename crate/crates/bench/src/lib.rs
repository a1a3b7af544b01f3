//! Deterministic fixture builders for the benchmark suite.

use maestro_core::regression::{TrainingMode, TrainingRow, TrainingSet};
use maestro_core::score::{
    DynamicLevel, Measure, Note, Part, Pitch, Score, TempoEntry, TimeSignature,
};

/// A patterned orchestral score: `parts` parts cycling through the four
/// groups, `measures` measures of quarter notes, eight movements.
pub fn patterned_score(parts: usize, measures: usize) -> Score {
    let pool: [(&str, &str, u8, u8); 8] = [
        ("vln", "violin", 55, 90),
        ("fl", "flute", 60, 96),
        ("tpt", "trumpet", 55, 80),
        ("timp", "timpani", 40, 55),
        ("vla", "viola", 48, 84),
        ("ob", "oboe", 58, 88),
        ("hrn", "french horn", 36, 72),
        ("xyl", "xylophone", 65, 100),
    ];
    let built = (0..parts)
        .map(|pi| {
            let (id, instrument, lo, hi) = pool[pi % pool.len()];
            let measures = (0..measures)
                .map(|m| {
                    let notes = (0..4u32)
                        .map(|q| {
                            let pitch = lo
                                + ((m as u32 * 5 + q * 3 + pi as u32) % u32::from(hi - lo)) as u8;
                            let dynamic = DynamicLevel::from_index(
                                ((m as u32 + q + pi as u32) % 6 + 2) as u8,
                            )
                            .unwrap();
                            Note::new(q * 480, 480, Pitch::Pitched(pitch), dynamic)
                        })
                        .collect();
                    Measure::new(m, TimeSignature::COMMON, notes)
                })
                .collect();
            Part::new(format!("{id}{pi}"), instrument, measures).unwrap()
        })
        .collect();
    let movement_stride = (measures / 8).max(1);
    let movement_boundaries: Vec<usize> = (0..measures).step_by(movement_stride).take(8).collect();
    Score {
        title: "Benchmark".into(),
        divisions: 480,
        parts: built,
        tempo_map: vec![TempoEntry {
            measure: 0,
            bpm: 120,
        }],
        movement_boundaries,
    }
}

/// A dense synthetic training set with `rows` rows.
pub fn patterned_training_set(rows: usize) -> TrainingSet {
    let rows = (0..rows)
        .map(|i| {
            let mut features = [0.0f64; 14];
            for (j, f) in features.iter_mut().enumerate() {
                *f = ((i * 7 + j * 13) % 97) as f64 / 97.0;
            }
            let mut targets = [0.0f64; 8];
            for (e, t) in targets.iter_mut().enumerate() {
                *t = 1.0 + ((i * 11 + e * 17) % 90) as f64 / 10.0;
            }
            TrainingRow {
                score_id: "bench".into(),
                segment_id: i,
                features,
                targets,
            }
        })
        .collect();
    TrainingSet {
        mode: TrainingMode::Absolute,
        rows,
    }
}
