//! Embedded orchestral instrument table: name, family group, General MIDI
//! program, and playable pitch range. The table ships as a data file so other
//! tools can consume the same mapping.

use std::sync::OnceLock;
use thiserror::Error;

use super::InstrumentGroup;

const TABLE_CSV: &str = include_str!("../../data/instruments.csv");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstrumentInfo {
    pub name: &'static str,
    pub group: InstrumentGroup,
    pub midi_program: u8,
    pub min_pitch: u8,
    pub max_pitch: u8,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("unknown instrument `{0}`")]
pub struct UnknownInstrument(pub String);

fn table() -> &'static [InstrumentInfo] {
    static TABLE: OnceLock<Vec<InstrumentInfo>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut rows = Vec::new();
        for line in TABLE_CSV.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("name,") {
                continue;
            }
            let mut cols = line.split(',');
            let (name, group, program, min, max) = (
                cols.next().expect("instrument table: name column"),
                cols.next().expect("instrument table: group column"),
                cols.next().expect("instrument table: midi_program column"),
                cols.next().expect("instrument table: min_pitch column"),
                cols.next().expect("instrument table: max_pitch column"),
            );
            rows.push(InstrumentInfo {
                name,
                group: InstrumentGroup::from_name(group).expect("instrument table: valid group"),
                midi_program: program.parse().expect("instrument table: valid program"),
                min_pitch: min.parse().expect("instrument table: valid min_pitch"),
                max_pitch: max.parse().expect("instrument table: valid max_pitch"),
            });
        }
        rows
    })
}

/// All rows of the embedded table, in file order.
pub fn all_instruments() -> &'static [InstrumentInfo] {
    table()
}

/// Case-insensitive lookup on the trimmed instrument name.
pub fn lookup(name: &str) -> Option<&'static InstrumentInfo> {
    let needle = name.trim().to_ascii_lowercase();
    table().iter().find(|info| info.name == needle)
}

/// The instrument family for a table name, or `UnknownInstrument`.
pub fn group_of_instrument(name: &str) -> Result<InstrumentGroup, UnknownInstrument> {
    lookup(name)
        .map(|info| info.group)
        .ok_or_else(|| UnknownInstrument(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_parses_and_is_sane() {
        let rows = all_instruments();
        assert!(
            rows.len() >= 30,
            "expected a full orchestral table, got {}",
            rows.len()
        );
        for info in rows {
            assert!(info.min_pitch <= info.max_pitch, "{}", info.name);
            assert!(info.midi_program <= 127, "{}", info.name);
            assert_eq!(info.name, info.name.to_ascii_lowercase(), "{}", info.name);
        }
    }

    #[test]
    fn standard_taxonomy_lookups() {
        assert_eq!(
            group_of_instrument("violin").unwrap(),
            InstrumentGroup::Strings
        );
        assert_eq!(
            group_of_instrument("timpani").unwrap(),
            InstrumentGroup::Percussion
        );
        assert_eq!(
            group_of_instrument("Trumpet").unwrap(),
            InstrumentGroup::Brass
        );
        assert_eq!(
            group_of_instrument("  FLUTE ").unwrap(),
            InstrumentGroup::Woodwinds
        );
        assert_eq!(
            group_of_instrument("kazoo"),
            Err(UnknownInstrument("kazoo".into()))
        );
    }

    #[test]
    fn violin_range_starts_at_g3() {
        assert_eq!(lookup("violin").unwrap().min_pitch, 55);
    }
}
