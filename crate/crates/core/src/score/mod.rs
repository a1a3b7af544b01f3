//! Score intermediate representation: parts of measures of notes, a tempo
//! map, and movement boundaries. Everything is immutable after construction
//! and structurally validated by [`validate_score`].

mod instruments;
mod validate;

pub use instruments::{
    all_instruments, group_of_instrument, lookup, InstrumentInfo, UnknownInstrument,
};
pub use validate::{validate_score, StructuralError, StructuralErrorCode};

use std::collections::BTreeSet;
use thiserror::Error;

/// Ticks per quarter note used throughout unless a score says otherwise.
pub const DEFAULT_DIVISIONS: u32 = 480;

/// Tempo bounds in beats per minute.
pub const BPM_MIN: u32 = 40;
pub const BPM_MAX: u32 = 208;

/// Articulation (gate factor) bounds: performed duration multiplier.
pub const ARTICULATION_MIN: f64 = 0.25;
pub const ARTICULATION_MAX: f64 = 2.0;

/// The four orchestral instrument families, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InstrumentGroup {
    Strings,
    Woodwinds,
    Brass,
    Percussion,
}

impl InstrumentGroup {
    pub const ALL: [InstrumentGroup; 4] = [
        InstrumentGroup::Strings,
        InstrumentGroup::Woodwinds,
        InstrumentGroup::Brass,
        InstrumentGroup::Percussion,
    ];

    pub fn index(self) -> usize {
        match self {
            InstrumentGroup::Strings => 0,
            InstrumentGroup::Woodwinds => 1,
            InstrumentGroup::Brass => 2,
            InstrumentGroup::Percussion => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InstrumentGroup::Strings => "strings",
            InstrumentGroup::Woodwinds => "woodwinds",
            InstrumentGroup::Brass => "brass",
            InstrumentGroup::Percussion => "percussion",
        }
    }

    pub fn from_name(name: &str) -> Option<InstrumentGroup> {
        InstrumentGroup::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(name.trim()))
    }
}

/// Notated loudness quantized to the eight standard markings.
///
/// `value()` maps the 1-based index onto (0, 1]: ppp = 0.125, fff = 1.0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DynamicLevel {
    Ppp = 1,
    Pp = 2,
    P = 3,
    Mp = 4,
    Mf = 5,
    F = 6,
    Ff = 7,
    Fff = 8,
}

impl DynamicLevel {
    pub const ALL: [DynamicLevel; 8] = [
        DynamicLevel::Ppp,
        DynamicLevel::Pp,
        DynamicLevel::P,
        DynamicLevel::Mp,
        DynamicLevel::Mf,
        DynamicLevel::F,
        DynamicLevel::Ff,
        DynamicLevel::Fff,
    ];

    /// 1-based index, ppp = 1 through fff = 8.
    pub fn index(self) -> u8 {
        self as u8
    }

    /// index / 8, exactly representable in binary.
    pub fn value(self) -> f64 {
        f64::from(self.index()) / 8.0
    }

    pub fn marking(self) -> &'static str {
        match self {
            DynamicLevel::Ppp => "ppp",
            DynamicLevel::Pp => "pp",
            DynamicLevel::P => "p",
            DynamicLevel::Mp => "mp",
            DynamicLevel::Mf => "mf",
            DynamicLevel::F => "f",
            DynamicLevel::Ff => "ff",
            DynamicLevel::Fff => "fff",
        }
    }

    pub fn from_index(index: u8) -> Option<DynamicLevel> {
        DynamicLevel::ALL
            .get(index.checked_sub(1)? as usize)
            .copied()
    }

    pub fn from_marking(marking: &str) -> Option<DynamicLevel> {
        DynamicLevel::ALL
            .into_iter()
            .find(|d| d.marking() == marking)
    }

    /// Shift by a signed step count; `None` when the result leaves [1, 8].
    pub fn offset(self, steps: i32) -> Option<DynamicLevel> {
        let idx = i32::from(self.index()) + steps;
        u8::try_from(idx).ok().and_then(DynamicLevel::from_index)
    }
}

/// A note's pitch: a MIDI key, or unpitched percussion. Unpitched sorts
/// after every pitched value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pitch {
    Pitched(u8),
    Unpitched,
}

impl Pitch {
    /// Total-order key: MIDI pitch, with unpitched at 128.
    pub fn order_key(self) -> u16 {
        match self {
            Pitch::Pitched(p) => u16::from(p),
            Pitch::Unpitched => 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Note {
    /// Ticks from the start of the owning measure.
    pub onset_ticks: u32,
    pub duration_ticks: u32,
    pub pitch: Pitch,
    pub dynamic: DynamicLevel,
    /// Performed-duration multiplier (gate factor) in [0.25, 2.0].
    pub articulation: f64,
}

impl Note {
    pub fn new(onset_ticks: u32, duration_ticks: u32, pitch: Pitch, dynamic: DynamicLevel) -> Note {
        Note {
            onset_ticks,
            duration_ticks,
            pitch,
            dynamic,
            articulation: 1.0,
        }
    }

    /// Canonical within-measure ordering: onset, pitch, then the remaining
    /// fields as tiebreakers so sorting is total.
    pub fn order_key(&self) -> (u32, u16, u32, u8, u64) {
        (
            self.onset_ticks,
            self.pitch.order_key(),
            self.duration_ticks,
            self.dynamic.index(),
            self.articulation.to_bits(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSignature {
    pub numerator: u32,
    pub denominator: u32,
}

impl TimeSignature {
    pub const COMMON: TimeSignature = TimeSignature {
        numerator: 4,
        denominator: 4,
    };

    pub fn new(numerator: u32, denominator: u32) -> TimeSignature {
        TimeSignature {
            numerator,
            denominator,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.numerator >= 1 && matches!(self.denominator, 1 | 2 | 4 | 8 | 16 | 32)
    }

    /// Measure length in ticks: numerator x (4 / denominator) quarters.
    pub fn tick_length(&self, divisions: u32) -> u32 {
        self.numerator * 4 * divisions / self.denominator
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub index: usize,
    pub time_signature: TimeSignature,
    /// Sorted by [`Note::order_key`].
    pub notes: Vec<Note>,
}

impl Measure {
    pub fn new(index: usize, time_signature: TimeSignature, mut notes: Vec<Note>) -> Measure {
        notes.sort_by_key(Note::order_key);
        Measure {
            index,
            time_signature,
            notes,
        }
    }

    pub fn empty(index: usize, time_signature: TimeSignature) -> Measure {
        Measure {
            index,
            time_signature,
            notes: Vec::new(),
        }
    }

    pub fn tick_length(&self, divisions: u32) -> u32 {
        self.time_signature.tick_length(divisions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    /// Unique within a score, e.g. "vln1".
    pub id: String,
    /// Key into the embedded instrument table.
    pub instrument_name: String,
    pub group: InstrumentGroup,
    pub measures: Vec<Measure>,
}

impl Part {
    /// Builds a part, deriving the group from the instrument table.
    pub fn new(
        id: impl Into<String>,
        instrument_name: impl Into<String>,
        measures: Vec<Measure>,
    ) -> Result<Part, UnknownInstrument> {
        let instrument_name = instrument_name.into();
        let group = group_of_instrument(&instrument_name)?;
        Ok(Part {
            id: id.into(),
            instrument_name,
            group,
            measures,
        })
    }
}

/// One tempo-map entry: `bpm` takes effect at the start of `measure` and
/// persists until the next entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TempoEntry {
    pub measure: usize,
    pub bpm: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub title: String,
    /// Ticks per quarter note.
    pub divisions: u32,
    pub parts: Vec<Part>,
    /// Sorted by measure, unique measures, first entry at measure 0, and no
    /// entry repeating the previous effective bpm.
    pub tempo_map: Vec<TempoEntry>,
    /// Sorted unique measure indices beginning each movement; first is 0.
    pub movement_boundaries: Vec<usize>,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("structurally invalid score: {}{}", .0.first().map(|e| e.to_string()).unwrap_or_default(), if .0.len() > 1 { format!(" (+{} more)", .0.len() - 1) } else { String::new() })]
pub struct InvalidScore(pub Vec<StructuralError>);

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("measure index {index} out of range: score has {count} measures")]
pub struct IndexOutOfRange {
    pub index: usize,
    pub count: usize,
}

impl Score {
    pub fn measure_count(&self) -> usize {
        self.parts.first().map_or(0, |p| p.measures.len())
    }

    /// Tick offset of each measure start, plus the total length as the last
    /// element (so the result has `measure_count() + 1` entries).
    pub fn measure_start_ticks(&self) -> Vec<u64> {
        let mut starts = Vec::with_capacity(self.measure_count() + 1);
        let mut at = 0u64;
        starts.push(at);
        if let Some(part) = self.parts.first() {
            for measure in &part.measures {
                at += u64::from(measure.tick_length(self.divisions));
                starts.push(at);
            }
        }
        starts
    }

    pub fn total_ticks(&self) -> u64 {
        *self.measure_start_ticks().last().unwrap_or(&0)
    }

    /// Effective tempo of every measure, expanded from the tempo map.
    pub fn expanded_tempo(&self) -> Vec<u32> {
        let count = self.measure_count();
        let mut out = Vec::with_capacity(count);
        let mut entry = 0;
        let mut bpm = self.tempo_map.first().map_or(120, |e| e.bpm);
        for measure in 0..count {
            while entry < self.tempo_map.len() && self.tempo_map[entry].measure <= measure {
                bpm = self.tempo_map[entry].bpm;
                entry += 1;
            }
            out.push(bpm);
        }
        out
    }

    /// Collapses a per-measure tempo sequence back into change points.
    pub fn compress_tempo(per_measure: &[u32]) -> Vec<TempoEntry> {
        let mut map = Vec::new();
        let mut last = None;
        for (measure, &bpm) in per_measure.iter().enumerate() {
            if last != Some(bpm) {
                map.push(TempoEntry { measure, bpm });
                last = Some(bpm);
            }
        }
        map
    }

    /// Movement index owning each measure.
    pub fn movement_of_measures(&self) -> Vec<usize> {
        let count = self.measure_count();
        let mut out = Vec::with_capacity(count);
        let mut movement = 0usize;
        for measure in 0..count {
            while movement + 1 < self.movement_boundaries.len()
                && self.movement_boundaries[movement + 1] <= measure
            {
                movement += 1;
            }
            out.push(movement);
        }
        out
    }
}

/// Groups with at least one sounding note in the given measure.
pub fn active_groups(
    score: &Score,
    measure_index: usize,
) -> Result<BTreeSet<InstrumentGroup>, IndexOutOfRange> {
    let count = score.measure_count();
    if measure_index >= count {
        return Err(IndexOutOfRange {
            index: measure_index,
            count,
        });
    }
    let mut groups = BTreeSet::new();
    for part in &score.parts {
        if !part.measures[measure_index].notes.is_empty() {
            groups.insert(part.group);
        }
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dynamic_marking_round_trip() {
        for level in DynamicLevel::ALL {
            assert_eq!(DynamicLevel::from_marking(level.marking()), Some(level));
            assert_eq!(DynamicLevel::from_index(level.index()), Some(level));
        }
        assert_eq!(DynamicLevel::from_index(0), None);
        assert_eq!(DynamicLevel::from_index(9), None);
        assert_eq!(DynamicLevel::Ppp.value(), 0.125);
        assert_eq!(DynamicLevel::Fff.value(), 1.0);
    }

    #[test]
    fn dynamic_offset_clips_to_range() {
        assert_eq!(DynamicLevel::P.offset(3), Some(DynamicLevel::F));
        assert_eq!(DynamicLevel::Ff.offset(5), None);
        assert_eq!(DynamicLevel::Pp.offset(-2), None);
        assert_eq!(DynamicLevel::Mf.offset(0), Some(DynamicLevel::Mf));
    }

    #[test]
    fn unpitched_sorts_after_pitched() {
        assert!(Pitch::Pitched(127).order_key() < Pitch::Unpitched.order_key());
    }

    #[test]
    fn time_signature_lengths() {
        assert_eq!(TimeSignature::COMMON.tick_length(480), 1920);
        assert_eq!(TimeSignature::new(3, 4).tick_length(480), 1440);
        assert_eq!(TimeSignature::new(6, 8).tick_length(480), 1440);
        assert!(!TimeSignature::new(4, 3).is_valid());
        assert!(!TimeSignature::new(0, 4).is_valid());
    }

    #[test]
    fn tempo_expansion_and_compression() {
        let score = crate::test_support::one_part_score();
        assert_eq!(score.expanded_tempo(), vec![120; score.measure_count()]);
        let compressed = Score::compress_tempo(&[120, 120, 140, 140, 120]);
        assert_eq!(
            compressed,
            vec![
                TempoEntry {
                    measure: 0,
                    bpm: 120
                },
                TempoEntry {
                    measure: 2,
                    bpm: 140
                },
                TempoEntry {
                    measure: 4,
                    bpm: 120
                },
            ]
        );
    }
}
