//! Segmentation and per-segment features.
//!
//! A score splits into rated segments at movement boundaries and at
//! instrumentation changes that persist long enough to register. Each
//! segment summarizes into a fixed 14-dimensional vector, and an edit plan
//! ([`TransformPlan`]) has a closed-form pushforward on that vector, so the
//! generator can search plans without materializing candidate scores.

use std::collections::BTreeSet;

use crate::canon::format_real;
use crate::score::{active_groups, DynamicLevel, InstrumentGroup, Score};

/// An instrumentation change must hold this many consecutive measures to
/// open a new segment.
pub const PERSISTENCE_MEASURES: usize = 4;

/// Canonical feature order. Groups appear in canonical group order within
/// each block.
pub const FEATURE_NAMES: [&str; 14] = [
    "activity_strings",
    "activity_woodwinds",
    "activity_brass",
    "activity_percussion",
    "dynamic_strings",
    "dynamic_woodwinds",
    "dynamic_brass",
    "dynamic_percussion",
    "length_strings",
    "length_woodwinds",
    "length_brass",
    "length_percussion",
    "tempo",
    "density",
];

pub const FEATURE_COUNT: usize = 14;

const ACTIVITY_BASE: usize = 0;
const DYNAMIC_BASE: usize = 4;
const LENGTH_BASE: usize = 8;
const TEMPO_INDEX: usize = 12;
const DENSITY_INDEX: usize = 13;

/// A contiguous measure range rated as one unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    /// Global 0-based id in score order.
    pub id: usize,
    pub movement_index: usize,
    pub start_measure: usize,
    /// Exclusive.
    pub end_measure: usize,
    /// Groups sounding anywhere in the segment.
    pub active_groups: BTreeSet<InstrumentGroup>,
}

impl Segment {
    pub fn measure_count(&self) -> usize {
        self.end_measure - self.start_measure
    }
}

/// The fixed 14-dimensional per-segment summary, in canonical order:
/// activity ratio per group, mean dynamic per group, mean note length per
/// group, tempo, and note density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn zero() -> FeatureVector {
        FeatureVector([0.0; FEATURE_COUNT])
    }

    pub fn activity(&self, group: InstrumentGroup) -> f64 {
        self.0[ACTIVITY_BASE + group.index()]
    }

    pub fn group_dynamic(&self, group: InstrumentGroup) -> f64 {
        self.0[DYNAMIC_BASE + group.index()]
    }

    pub fn group_length(&self, group: InstrumentGroup) -> f64 {
        self.0[LENGTH_BASE + group.index()]
    }

    pub fn tempo(&self) -> f64 {
        self.0[TEMPO_INDEX]
    }

    pub fn density(&self) -> f64 {
        self.0[DENSITY_INDEX]
    }

    /// 14 comma-separated shortest-round-trip decimals.
    pub fn to_csv(&self) -> String {
        self.0
            .iter()
            .map(|&x| format_real(x))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Per-group edit offsets plus a global tempo scale, applied to a set of
/// target segments.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformPlan {
    /// Dynamic offset per group, in level steps.
    pub dynamic_offset: [i32; 4],
    /// Articulation multiplier per group.
    pub articulation_scale: [f64; 4],
    /// Tempo multiplier for measures inside target segments.
    pub tempo_scale: f64,
    pub target_segments: BTreeSet<usize>,
}

impl TransformPlan {
    pub fn identity(target_segments: BTreeSet<usize>) -> TransformPlan {
        TransformPlan {
            dynamic_offset: [0; 4],
            articulation_scale: [1.0; 4],
            tempo_scale: 1.0,
            target_segments,
        }
    }

    pub fn is_identity_action(&self) -> bool {
        self.dynamic_offset == [0; 4]
            && self.articulation_scale == [1.0; 4]
            && self.tempo_scale == 1.0
    }
}

/// Splits the score at movement boundaries and at persistent
/// instrumentation changes. Segments partition the measure range.
pub fn segment_score(score: &Score) -> Vec<Segment> {
    let count = score.measure_count();
    if count == 0 {
        return Vec::new();
    }
    let per_measure: Vec<BTreeSet<InstrumentGroup>> = (0..count)
        .map(|m| active_groups(score, m).expect("measure in range"))
        .collect();
    let movements = score.movement_of_measures();

    let mut cuts = vec![0usize];
    for m in 1..count {
        let movement_cut = score.movement_boundaries.binary_search(&m).is_ok();
        let instrumentation_cut = per_measure[m] != per_measure[m - 1]
            && m + PERSISTENCE_MEASURES <= count
            && (m..m + PERSISTENCE_MEASURES).all(|k| per_measure[k] == per_measure[m]);
        if movement_cut || instrumentation_cut {
            cuts.push(m);
        }
    }
    cuts.push(count);

    cuts.windows(2)
        .enumerate()
        .map(|(id, window)| {
            let (start, end) = (window[0], window[1]);
            let mut groups = BTreeSet::new();
            for set in &per_measure[start..end] {
                groups.extend(set.iter().copied());
            }
            Segment {
                id,
                movement_index: movements[start],
                start_measure: start,
                end_measure: end,
                active_groups: groups,
            }
        })
        .collect()
}

/// Computes the feature vector for one segment of the score.
pub fn featurize(score: &Score, segment: &Segment) -> FeatureVector {
    let mut features = [0.0f64; FEATURE_COUNT];
    let divisions = f64::from(score.divisions);

    let segment_ticks: u64 = score.parts.first().map_or(0, |part| {
        part.measures[segment.start_measure..segment.end_measure]
            .iter()
            .map(|m| u64::from(m.tick_length(score.divisions)))
            .sum()
    });

    let mut note_count = 0usize;
    for group in InstrumentGroup::ALL {
        let mut sounding_ticks = 0u64;
        let mut dynamic_sum = 0.0f64;
        let mut length_sum = 0.0f64;
        let mut group_notes = 0usize;

        for measure_index in segment.start_measure..segment.end_measure {
            let mut intervals: Vec<(u32, u32)> = Vec::new();
            for part in score.parts.iter().filter(|p| p.group == group) {
                for note in &part.measures[measure_index].notes {
                    intervals.push((note.onset_ticks, note.onset_ticks + note.duration_ticks));
                    dynamic_sum += note.dynamic.value();
                    length_sum += f64::from(note.duration_ticks) * note.articulation;
                    group_notes += 1;
                }
            }
            sounding_ticks += merged_length(&mut intervals);
        }

        if group_notes > 0 {
            features[ACTIVITY_BASE + group.index()] = if segment_ticks > 0 {
                sounding_ticks as f64 / segment_ticks as f64
            } else {
                0.0
            };
            features[DYNAMIC_BASE + group.index()] = dynamic_sum / group_notes as f64;
            let mean_quarters = length_sum / (group_notes as f64 * divisions);
            features[LENGTH_BASE + group.index()] = (mean_quarters / 4.0).min(1.0);
        }
        note_count += group_notes;
    }

    let tempi = score.expanded_tempo();
    let measures = segment.measure_count();
    if measures > 0 {
        let bpm_sum: u64 = tempi[segment.start_measure..segment.end_measure]
            .iter()
            .map(|&b| u64::from(b))
            .sum();
        let mean_bpm = bpm_sum as f64 / measures as f64;
        features[TEMPO_INDEX] = (mean_bpm / 120.0).clamp(0.0, 2.0);
        features[DENSITY_INDEX] = (note_count as f64 / measures as f64 / 16.0).clamp(0.0, 1.0);
    }

    FeatureVector(features)
}

/// Total length of the union of half-open tick intervals.
fn merged_length(intervals: &mut [(u32, u32)]) -> u64 {
    intervals.sort_unstable();
    let mut total = 0u64;
    let mut current: Option<(u32, u32)> = None;
    for &(start, end) in intervals.iter() {
        match current {
            Some((cs, ce)) if start <= ce => current = Some((cs, ce.max(end))),
            Some((cs, ce)) => {
                total += u64::from(ce - cs);
                current = Some((start, end));
            }
            None => current = Some((start, end)),
        }
    }
    if let Some((cs, ce)) = current {
        total += u64::from(ce - cs);
    }
    total
}

/// Closed-form effect of a plan on a segment's features. Activity and
/// density never move: the edits touch loudness, gate, and tempo only.
pub fn transform_features(
    base: &FeatureVector,
    plan: &TransformPlan,
    segment_in_target: bool,
) -> FeatureVector {
    if !segment_in_target {
        return *base;
    }
    let mut out = *base;
    for group in InstrumentGroup::ALL {
        let g = group.index();
        if base.0[ACTIVITY_BASE + g] > 0.0 {
            let shifted = base.0[DYNAMIC_BASE + g] + f64::from(plan.dynamic_offset[g]) * 0.125;
            out.0[DYNAMIC_BASE + g] = shifted.clamp(0.125, 1.0);
            out.0[LENGTH_BASE + g] =
                (base.0[LENGTH_BASE + g] * plan.articulation_scale[g]).clamp(0.0, 1.0);
        }
    }
    out.0[TEMPO_INDEX] = (base.0[TEMPO_INDEX] * plan.tempo_scale).clamp(0.0, 2.0);
    out
}

/// Materializes a plan: notes of each group in target segments get their
/// dynamic shifted and articulation scaled, and tempo inside target
/// segments is rescaled. Returns the edited score and how many per-note or
/// per-measure clamps actually bound.
pub fn apply_plan(score: &Score, plan: &TransformPlan) -> (Score, usize) {
    let segments = segment_score(score);
    let mut out = score.clone();
    let mut saturations = 0usize;

    let mut measure_in_target = vec![false; score.measure_count()];
    for segment in &segments {
        if plan.target_segments.contains(&segment.id) {
            for flag in &mut measure_in_target[segment.start_measure..segment.end_measure] {
                *flag = true;
            }
        }
    }

    for part in &mut out.parts {
        let g = part.group.index();
        let delta = plan.dynamic_offset[g];
        let alpha = plan.articulation_scale[g];
        for (measure_index, measure) in part.measures.iter_mut().enumerate() {
            if !measure_in_target[measure_index] {
                continue;
            }
            for note in &mut measure.notes {
                let raw = i32::from(note.dynamic.index()) + delta;
                let clamped = raw.clamp(1, 8);
                if clamped != raw {
                    saturations += 1;
                }
                note.dynamic = DynamicLevel::from_index(clamped as u8).expect("clamped to [1, 8]");

                let scaled = note.articulation * alpha;
                let bounded = scaled.clamp(
                    crate::score::ARTICULATION_MIN,
                    crate::score::ARTICULATION_MAX,
                );
                if bounded != scaled {
                    saturations += 1;
                }
                note.articulation = bounded;
            }
        }
    }

    if plan.tempo_scale != 1.0 && measure_in_target.iter().any(|&t| t) {
        let expanded = out.expanded_tempo();
        let mut rebuilt = Vec::with_capacity(expanded.len());
        for (measure, &bpm) in expanded.iter().enumerate() {
            if measure_in_target[measure] {
                let raw = (f64::from(bpm) * plan.tempo_scale).round();
                let clamped = raw.clamp(
                    f64::from(crate::score::BPM_MIN),
                    f64::from(crate::score::BPM_MAX),
                );
                if clamped != raw {
                    saturations += 1;
                }
                rebuilt.push(clamped as u32);
            } else {
                rebuilt.push(bpm);
            }
        }
        out.tempo_map = Score::compress_tempo(&rebuilt);
    }

    (out, saturations)
}
