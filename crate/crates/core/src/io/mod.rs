//! Score input and output.
//!
//! The canonical `maestro-score/1` text format is the source of truth;
//! MusicXML is import-only and Standard MIDI Files are export-only.

mod canonical;
mod midi;
mod musicxml;

pub use canonical::{parse_canonical, parse_canonical_lenient, write_canonical};
pub use midi::{export_midi, SmfBytes};
pub use musicxml::{import_musicxml, ImportError, ImportWarning};

/// Note and pitch node conversions shared with the delta format.
pub(crate) mod note_value_helpers {
    pub(crate) use super::canonical::{note_to_value, parse_note, parse_pitch, pitch_to_value};
}
