//! Shared support for the integration suites: deterministic random scores,
//! same-skeleton perturbations, and an independent normal-equations oracle.

#![allow(dead_code)]

use maestro_core::score::{
    validate_score, DynamicLevel, Measure, Note, Part, Pitch, Score, TempoEntry, TimeSignature,
};
use rand::rngs::StdRng;
use rand::Rng;

/// Articulation values closed under the search grid within [0.25, 2.0].
pub const ARTICULATIONS: [f64; 5] = [0.5, 0.75, 1.0, 1.25, 1.5];

const INSTRUMENT_POOL: [(&str, &str); 8] = [
    ("vln1", "violin"),
    ("vla", "viola"),
    ("fl", "flute"),
    ("ob", "oboe"),
    ("tpt", "trumpet"),
    ("hrn", "french horn"),
    ("timp", "timpani"),
    ("sn", "snare drum"),
];

/// Pitch range a generator may use per instrument, inside the table range.
fn pitch_span(instrument: &str) -> Option<(u8, u8)> {
    match instrument {
        "violin" => Some((55, 96)),
        "viola" => Some((48, 84)),
        "flute" => Some((60, 96)),
        "oboe" => Some((58, 88)),
        "trumpet" => Some((55, 80)),
        "french horn" => Some((36, 72)),
        "timpani" => Some((40, 55)),
        "snare drum" => None, // unpitched
        _ => Some((48, 84)),
    }
}

/// A random structurally valid score: 1-4 parts, 2-8 measures, mixed time
/// signatures, unique (onset, pitch) per measure so note skeletons align
/// one-to-one under diffing.
pub fn random_score(rng: &mut StdRng) -> Score {
    let part_count = rng.random_range(1..=4);
    let measure_count = rng.random_range(2..=8);
    let signatures: Vec<TimeSignature> = (0..measure_count)
        .map(|_| {
            let (n, d) = *[(4u32, 4u32), (3, 4), (2, 4), (6, 8)]
                .get(rng.random_range(0..4))
                .unwrap();
            TimeSignature::new(n, d)
        })
        .collect();

    let mut chosen: Vec<usize> = (0..INSTRUMENT_POOL.len()).collect();
    for i in (1..chosen.len()).rev() {
        chosen.swap(i, rng.random_range(0..=i));
    }
    chosen.truncate(part_count);

    let parts = chosen
        .iter()
        .map(|&idx| {
            let (id, instrument) = INSTRUMENT_POOL[idx];
            let measures = (0..measure_count)
                .map(|m| {
                    let signature = signatures[m];
                    let length = signature.tick_length(480);
                    let mut notes = Vec::new();
                    let slots = length / 240;
                    for slot in 0..slots {
                        if rng.random_range(0..100) < 55 {
                            continue;
                        }
                        let onset = slot * 240;
                        let max_duration = length - onset;
                        let candidates: Vec<u32> = [240u32, 480, 960]
                            .into_iter()
                            .filter(|&d| d <= max_duration)
                            .collect();
                        let duration = candidates[rng.random_range(0..candidates.len())];
                        let pitch = match pitch_span(instrument) {
                            Some((lo, hi)) => Pitch::Pitched(rng.random_range(lo..=hi)),
                            None => Pitch::Unpitched,
                        };
                        // keep (onset, pitch) unique within the measure
                        if notes
                            .iter()
                            .any(|n: &Note| n.onset_ticks == onset && n.pitch == pitch)
                        {
                            continue;
                        }
                        notes.push(Note {
                            onset_ticks: onset,
                            duration_ticks: duration,
                            pitch,
                            dynamic: DynamicLevel::from_index(rng.random_range(1..=8)).unwrap(),
                            articulation: ARTICULATIONS[rng.random_range(0..ARTICULATIONS.len())],
                        });
                    }
                    Measure::new(m, signature, notes)
                })
                .collect();
            Part::new(id, instrument, measures).expect("pool instruments are in the table")
        })
        .collect();

    let mut tempo_map = vec![TempoEntry {
        measure: 0,
        bpm: rng.random_range(60..=180),
    }];
    if measure_count > 2 && rng.random_range(0..100) < 40 {
        let mut bpm = tempo_map[0].bpm;
        while bpm == tempo_map[0].bpm {
            bpm = rng.random_range(60..=180);
        }
        tempo_map.push(TempoEntry {
            measure: rng.random_range(1..measure_count),
            bpm,
        });
    }

    let mut movement_boundaries = vec![0];
    if measure_count > 3 && rng.random_range(0..100) < 30 {
        movement_boundaries.push(rng.random_range(2..measure_count));
    }

    let score = Score {
        title: format!("Work {}", rng.random_range(1..100)),
        divisions: 480,
        parts,
        tempo_map,
        movement_boundaries,
    };
    debug_assert!(
        validate_score(&score).is_empty(),
        "{:?}",
        validate_score(&score)
    );
    score
}

/// A same-skeleton interpretation: expressive edits everywhere, at most the
/// structural budget's worth of note insertions or removals.
pub fn perturb_score(rng: &mut StdRng, original: &Score) -> Score {
    let mut edited = original.clone();

    let total_notes: usize = original
        .parts
        .iter()
        .map(|p| p.measures.iter().map(|m| m.notes.len()).sum::<usize>())
        .sum();
    let mut structural_budget = (total_notes as f64 * 0.05).floor() as usize;

    if rng.random_range(0..100) < 20 {
        edited.title = format!("{} (alt)", edited.title);
    }

    for part in &mut edited.parts {
        for measure in &mut part.measures {
            for note in &mut measure.notes {
                if rng.random_range(0..100) < 35 {
                    let steps = rng.random_range(-3..=3);
                    if let Some(level) = note.dynamic.offset(steps) {
                        note.dynamic = level;
                    }
                }
                if rng.random_range(0..100) < 25 {
                    note.articulation = ARTICULATIONS[rng.random_range(0..ARTICULATIONS.len())];
                }
            }
            if structural_budget > 0 && !measure.notes.is_empty() && rng.random_range(0..100) < 10 {
                let victim = rng.random_range(0..measure.notes.len());
                measure.notes.remove(victim);
                structural_budget -= 1;
            }
        }
    }

    if rng.random_range(0..100) < 40 {
        let expanded = edited.expanded_tempo();
        let from = rng.random_range(0..expanded.len());
        let step = rng.random_range(-20i64..=20);
        let adjusted: Vec<u32> = expanded
            .iter()
            .enumerate()
            .map(|(m, &bpm)| {
                if m >= from {
                    (i64::from(bpm) + step).clamp(40, 208) as u32
                } else {
                    bpm
                }
            })
            .collect();
        edited.tempo_map = Score::compress_tempo(&adjusted);
    }

    debug_assert!(validate_score(&edited).is_empty());
    edited
}

/// Independent brute-force ridge solve: builds the augmented normal system
/// and runs Gaussian elimination with partial pivoting. Shares no code with
/// the library's Cholesky path.
pub fn oracle_ridge(
    features: &[[f64; 14]],
    targets: &[[f64; 8]],
    lambda: f64,
) -> Option<Vec<[f64; 8]>> {
    let n = 15usize;
    let mut a = vec![vec![0.0f64; n]; n];
    let mut b = vec![vec![0.0f64; 8]; n];
    for (x, y) in features.iter().zip(targets) {
        let mut row = [0.0f64; 15];
        row[0] = 1.0;
        row[1..].copy_from_slice(x);
        for i in 0..n {
            for j in 0..n {
                a[i][j] += row[i] * row[j];
            }
            for e in 0..8 {
                b[i][e] += row[i] * y[e];
            }
        }
    }
    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i] += lambda;
    }

    // forward elimination with partial pivoting
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            for e in 0..8 {
                b[row][e] -= factor * b[col][e];
            }
        }
    }
    // back substitution
    let mut w = vec![[0.0f64; 8]; n];
    for row in (0..n).rev() {
        for e in 0..8 {
            let mut acc = b[row][e];
            for k in row + 1..n {
                acc -= a[row][k] * w[k][e];
            }
            w[row][e] = acc / a[row][row];
        }
    }
    Some(w)
}
