//! MusicXML 3.x partwise import, covering the subset the pipeline consumes:
//! parts, measures, time signatures, notes and rests with pitch and
//! duration, dynamics directions ppp..fff, `<sound tempo>`, and instrument
//! names. Every element class the importer skips is reported as one warning
//! category with a count, and dropped notes always show up under a
//! `*-note` category, so nothing disappears silently.

use std::collections::BTreeMap;

use roxmltree::{Document, Node};
use thiserror::Error;

use crate::score::{
    validate_score, DynamicLevel, Measure, Note, Part, Pitch, Score, TempoEntry, TimeSignature,
    BPM_MAX, BPM_MIN, DEFAULT_DIVISIONS,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ImportError {
    #[error("XML syntax error: {0}")]
    XmlSyntax(String),
    #[error("unsupported structure: {0}")]
    UnsupportedStructure(String),
    #[error("unknown instrument `{0}`")]
    UnknownInstrument(String),
}

/// One skipped element class and how many times it was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportWarning {
    pub category: String,
    pub count: usize,
}

/// Dynamic assumed before the first marking in a part.
const DEFAULT_DYNAMIC: DynamicLevel = DynamicLevel::Mf;
const DEFAULT_BPM: u32 = 120;

struct Warnings(BTreeMap<String, usize>);

impl Warnings {
    fn add(&mut self, category: &str) {
        *self.0.entry(category.to_string()).or_insert(0) += 1;
    }

    fn into_sorted(self) -> Vec<ImportWarning> {
        self.0
            .into_iter()
            .map(|(category, count)| ImportWarning { category, count })
            .collect()
    }
}

pub fn import_musicxml(bytes: &[u8]) -> Result<(Score, Vec<ImportWarning>), ImportError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| ImportError::XmlSyntax(format!("not UTF-8: {e}")))?;
    let doc = Document::parse(text).map_err(|e| ImportError::XmlSyntax(e.to_string()))?;
    let root = doc.root_element();
    if root.has_tag_name("score-timewise") {
        return Err(ImportError::UnsupportedStructure(
            "timewise documents are not supported; convert to partwise".into(),
        ));
    }
    if !root.has_tag_name("score-partwise") {
        return Err(ImportError::UnsupportedStructure(format!(
            "root element `{}` is not a partwise score",
            root.tag_name().name()
        )));
    }

    let mut warnings = Warnings(BTreeMap::new());
    let title = find_title(root);
    let instrument_names = part_list(root)?;

    let mut parts = Vec::new();
    let mut tempo_points: BTreeMap<usize, u32> = BTreeMap::new();
    for part_node in root.children().filter(|n| n.has_tag_name("part")) {
        let part_id = part_node
            .attribute("id")
            .ok_or_else(|| ImportError::UnsupportedStructure("part without id attribute".into()))?;
        let instrument = instrument_names.get(part_id).cloned().ok_or_else(|| {
            ImportError::UnsupportedStructure(format!("part `{part_id}` missing from part-list"))
        })?;
        let measures = import_part(part_node, &mut tempo_points, &mut warnings)?;
        let part = Part::new(part_id, instrument, measures)
            .map_err(|e| ImportError::UnknownInstrument(e.0))?;
        parts.push(part);
    }

    let tempo_map = finalize_tempo(tempo_points, &mut warnings);
    let score = Score {
        title,
        divisions: DEFAULT_DIVISIONS,
        parts,
        tempo_map,
        movement_boundaries: vec![0],
    };
    let errors = validate_score(&score);
    if let Some(first) = errors.first() {
        return Err(ImportError::UnsupportedStructure(format!(
            "imported score is inconsistent: {first}"
        )));
    }
    Ok((score, warnings.into_sorted()))
}

fn find_title(root: Node) -> String {
    for work in root.children().filter(|n| n.has_tag_name("work")) {
        for t in work.children().filter(|n| n.has_tag_name("work-title")) {
            if let Some(text) = t.text() {
                return text.trim().to_string();
            }
        }
    }
    root.children()
        .find(|n| n.has_tag_name("movement-title"))
        .and_then(|n| n.text())
        .map(|t| t.trim().to_string())
        .unwrap_or_default()
}

fn part_list(root: Node) -> Result<BTreeMap<String, String>, ImportError> {
    let list = root
        .children()
        .find(|n| n.has_tag_name("part-list"))
        .ok_or_else(|| ImportError::UnsupportedStructure("missing part-list".into()))?;
    let mut names = BTreeMap::new();
    for score_part in list.children().filter(|n| n.has_tag_name("score-part")) {
        let id = score_part
            .attribute("id")
            .ok_or_else(|| ImportError::UnsupportedStructure("score-part without id".into()))?;
        let name = score_part
            .children()
            .find(|n| n.has_tag_name("part-name"))
            .and_then(|n| n.text())
            .map(|t| t.trim().to_string())
            .unwrap_or_default();
        names.insert(id.to_string(), name);
    }
    Ok(names)
}

struct PartCursor {
    /// Source duration units per quarter note.
    divisions: i64,
    time_signature: TimeSignature,
    dynamic: DynamicLevel,
    /// Position inside the current measure, in source units.
    position: i64,
    /// Onset of the most recent note, for `<chord/>` members.
    previous_onset: i64,
}

fn import_part(
    part_node: Node,
    tempo_points: &mut BTreeMap<usize, u32>,
    warnings: &mut Warnings,
) -> Result<Vec<Measure>, ImportError> {
    let mut cursor = PartCursor {
        divisions: 1,
        time_signature: TimeSignature::COMMON,
        dynamic: DEFAULT_DYNAMIC,
        position: 0,
        previous_onset: 0,
    };
    let mut measures = Vec::new();
    for (measure_index, measure_node) in part_node
        .children()
        .filter(|n| n.has_tag_name("measure"))
        .enumerate()
    {
        cursor.position = 0;
        cursor.previous_onset = 0;
        let mut notes = Vec::new();
        for child in measure_node.children().filter(Node::is_element) {
            match child.tag_name().name() {
                "attributes" => read_attributes(child, &mut cursor, warnings),
                "direction" => {
                    read_direction(child, &mut cursor, measure_index, tempo_points, warnings)
                }
                "sound" => read_sound(child, measure_index, tempo_points, warnings),
                "note" => read_note(child, &mut cursor, &mut notes, warnings),
                "backup" => {
                    cursor.position -= child_duration(child).unwrap_or(0);
                    cursor.position = cursor.position.max(0);
                }
                "forward" => cursor.position += child_duration(child).unwrap_or(0),
                other => warnings.add(&format!("ignored:{other}")),
            }
        }
        let measure_ticks = cursor.time_signature.tick_length(DEFAULT_DIVISIONS);
        let notes = clip_notes(notes, measure_ticks, warnings);
        measures.push(Measure::new(measure_index, cursor.time_signature, notes));
    }
    Ok(measures)
}

fn read_attributes(node: Node, cursor: &mut PartCursor, warnings: &mut Warnings) {
    for child in node.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "divisions" => {
                if let Some(d) = child.text().and_then(|t| t.trim().parse::<i64>().ok()) {
                    if d > 0 {
                        cursor.divisions = d;
                    }
                }
            }
            "time" => {
                let beats = child
                    .children()
                    .find(|n| n.has_tag_name("beats"))
                    .and_then(|n| n.text())
                    .and_then(|t| t.trim().parse::<u32>().ok());
                let beat_type = child
                    .children()
                    .find(|n| n.has_tag_name("beat-type"))
                    .and_then(|n| n.text())
                    .and_then(|t| t.trim().parse::<u32>().ok());
                if let (Some(numerator), Some(denominator)) = (beats, beat_type) {
                    cursor.time_signature = TimeSignature::new(numerator, denominator);
                }
            }
            other => warnings.add(&format!("ignored:{other}")),
        }
    }
}

fn read_direction(
    node: Node,
    cursor: &mut PartCursor,
    measure_index: usize,
    tempo_points: &mut BTreeMap<usize, u32>,
    warnings: &mut Warnings,
) {
    for child in node.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "direction-type" => {
                for dt in child.children().filter(Node::is_element) {
                    match dt.tag_name().name() {
                        "dynamics" => {
                            for marking in dt.children().filter(Node::is_element) {
                                match DynamicLevel::from_marking(marking.tag_name().name()) {
                                    // applies to notes at or after this point in the stream
                                    Some(level) => cursor.dynamic = level,
                                    None => warnings.add("ignored:dynamic-marking"),
                                }
                            }
                        }
                        other => warnings.add(&format!("ignored:{other}")),
                    }
                }
            }
            "sound" => read_sound(child, measure_index, tempo_points, warnings),
            other => warnings.add(&format!("ignored:{other}")),
        }
    }
}

fn read_sound(
    node: Node,
    measure_index: usize,
    tempo_points: &mut BTreeMap<usize, u32>,
    warnings: &mut Warnings,
) {
    match node
        .attribute("tempo")
        .and_then(|t| t.trim().parse::<f64>().ok())
    {
        Some(tempo) if tempo > 0.0 => {
            let rounded = tempo.round() as i64;
            let clamped = rounded.clamp(i64::from(BPM_MIN), i64::from(BPM_MAX)) as u32;
            if i64::from(clamped) != rounded || (tempo - tempo.round()).abs() > 0.0 {
                warnings.add("quantized:tempo");
            }
            tempo_points.entry(measure_index).or_insert(clamped);
        }
        _ => warnings.add("ignored:sound"),
    }
}

fn read_note(node: Node, cursor: &mut PartCursor, notes: &mut Vec<Note>, warnings: &mut Warnings) {
    let mut is_rest = false;
    let mut is_chord = false;
    let mut is_grace = false;
    let mut is_cue = false;
    let mut duration: Option<i64> = None;
    let mut pitch: Option<Pitch> = None;

    for child in node.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "rest" => is_rest = true,
            "chord" => is_chord = true,
            "grace" => is_grace = true,
            "cue" => is_cue = true,
            "duration" => duration = child.text().and_then(|t| t.trim().parse::<i64>().ok()),
            "pitch" => pitch = read_pitch(child),
            "unpitched" => pitch = Some(Pitch::Unpitched),
            other => warnings.add(&format!("ignored:{other}")),
        }
    }

    if is_grace {
        if !is_rest {
            warnings.add("ignored:grace-note");
        }
        return; // grace notes carry no duration and are dropped whole
    }
    if is_cue {
        if !is_rest {
            warnings.add("ignored:cue-note");
        }
        return;
    }
    let Some(duration) = duration.filter(|&d| d > 0) else {
        if !is_rest {
            warnings.add("ignored:malformed-note");
        }
        return;
    };

    if is_rest {
        cursor.previous_onset = cursor.position;
        cursor.position += duration;
        return;
    }

    let onset_src = if is_chord {
        cursor.previous_onset
    } else {
        cursor.position
    };
    let onset_ticks = convert_ticks(onset_src, cursor.divisions, warnings);
    let duration_ticks = convert_ticks(duration, cursor.divisions, warnings).max(1);

    let Some(pitch) = pitch else {
        warnings.add("ignored:malformed-note");
        return;
    };

    notes.push(Note {
        onset_ticks,
        duration_ticks,
        pitch,
        dynamic: cursor.dynamic,
        articulation: 1.0,
    });

    if !is_chord {
        cursor.previous_onset = cursor.position;
        cursor.position += duration;
    }
}

fn read_pitch(node: Node) -> Option<Pitch> {
    let step = node
        .children()
        .find(|n| n.has_tag_name("step"))?
        .text()?
        .trim()
        .to_string();
    let octave = node
        .children()
        .find(|n| n.has_tag_name("octave"))?
        .text()?
        .trim()
        .parse::<i32>()
        .ok()?;
    let alter = node
        .children()
        .find(|n| n.has_tag_name("alter"))
        .and_then(|n| n.text())
        .and_then(|t| t.trim().parse::<f64>().ok())
        .map(|a| a.round() as i32)
        .unwrap_or(0);
    let semitone = match step.as_str() {
        "C" => 0,
        "D" => 2,
        "E" => 4,
        "F" => 5,
        "G" => 7,
        "A" => 9,
        "B" => 11,
        _ => return None,
    };
    let midi = (octave + 1) * 12 + semitone + alter;
    u8::try_from(midi)
        .ok()
        .filter(|&p| p <= 127)
        .map(Pitch::Pitched)
}

/// Rescales a source-division tick count onto divisions 480, warning when
/// the conversion is inexact.
fn convert_ticks(value: i64, divisions: i64, warnings: &mut Warnings) -> u32 {
    let scaled = value * i64::from(DEFAULT_DIVISIONS);
    if scaled % divisions != 0 {
        warnings.add("quantized:duration");
    }
    let ticks = (scaled as f64 / divisions as f64).round();
    ticks.max(0.0) as u32
}

/// Drops notes starting at or past the barline and truncates notes that
/// spill over it, so the measure always validates.
fn clip_notes(notes: Vec<Note>, measure_ticks: u32, warnings: &mut Warnings) -> Vec<Note> {
    let mut kept = Vec::with_capacity(notes.len());
    for mut note in notes {
        if note.onset_ticks >= measure_ticks {
            warnings.add("ignored:overflow-note");
            continue;
        }
        if note.onset_ticks + note.duration_ticks > measure_ticks {
            note.duration_ticks = measure_ticks - note.onset_ticks;
            warnings.add("quantized:duration");
        }
        kept.push(note);
    }
    kept
}

fn finalize_tempo(points: BTreeMap<usize, u32>, _warnings: &mut Warnings) -> Vec<TempoEntry> {
    let mut entries = Vec::new();
    if !points.contains_key(&0) {
        entries.push(TempoEntry {
            measure: 0,
            bpm: DEFAULT_BPM,
        });
    }
    for (measure, bpm) in points {
        entries.push(TempoEntry { measure, bpm });
    }
    // drop entries repeating the effective bpm so the map stays canonical
    let mut compressed: Vec<TempoEntry> = Vec::new();
    for entry in entries {
        if compressed.last().map(|e| e.bpm) != Some(entry.bpm) {
            compressed.push(entry);
        }
    }
    compressed
}

fn child_duration(node: Node) -> Option<i64> {
    node.children()
        .find(|n| n.has_tag_name("duration"))
        .and_then(|n| n.text())
        .and_then(|t| t.trim().parse::<i64>().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wrap(parts_xml: &str, part_list: &str) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<score-partwise version=\"3.1\">\n<part-list>{part_list}</part-list>\n{parts_xml}\n</score-partwise>"
        )
    }

    fn violin_list() -> &'static str {
        "<score-part id=\"P1\"><part-name>Violin</part-name></score-part>"
    }

    #[test]
    fn minimal_part_imports() {
        let xml = wrap(
            "<part id=\"P1\"><measure number=\"1\"><attributes><divisions>4</divisions><time><beats>4</beats><beat-type>4</beat-type></time></attributes><note><pitch><step>C</step><octave>4</octave></pitch><duration>16</duration></note></measure></part>",
            violin_list(),
        );
        let (score, warnings) = import_musicxml(xml.as_bytes()).unwrap();
        assert_eq!(score.parts.len(), 1);
        assert_eq!(score.parts[0].instrument_name, "Violin");
        let note = &score.parts[0].measures[0].notes[0];
        assert_eq!(note.pitch, Pitch::Pitched(60));
        assert_eq!(note.duration_ticks, 1920);
        assert_eq!(note.dynamic, DynamicLevel::Mf);
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(
            score.tempo_map,
            vec![TempoEntry {
                measure: 0,
                bpm: 120
            }]
        );
    }

    #[test]
    fn timewise_is_unsupported() {
        let xml = "<score-timewise></score-timewise>";
        assert!(matches!(
            import_musicxml(xml.as_bytes()),
            Err(ImportError::UnsupportedStructure(_))
        ));
    }

    #[test]
    fn broken_xml_is_a_syntax_error() {
        assert!(matches!(
            import_musicxml(b"<score-partwise>"),
            Err(ImportError::XmlSyntax(_))
        ));
    }

    #[test]
    fn harmony_produces_one_warning_category() {
        let xml = wrap(
            "<part id=\"P1\"><measure number=\"1\"><harmony/><harmony/><note><rest/><duration>4</duration></note></measure></part>",
            violin_list(),
        );
        let (_, warnings) = import_musicxml(xml.as_bytes()).unwrap();
        assert_eq!(
            warnings,
            vec![ImportWarning {
                category: "ignored:harmony".into(),
                count: 2
            }]
        );
    }

    #[test]
    fn unknown_instrument_is_an_error() {
        let xml = wrap(
            "<part id=\"P1\"><measure number=\"1\"><note><rest/><duration>4</duration></note></measure></part>",
            "<score-part id=\"P1\"><part-name>Kazoo</part-name></score-part>",
        );
        assert_eq!(
            import_musicxml(xml.as_bytes()),
            Err(ImportError::UnknownInstrument("Kazoo".into()))
        );
    }

    #[test]
    fn dynamics_attach_to_following_notes_and_persist() {
        let xml = wrap(
            "<part id=\"P1\"><measure number=\"1\"><attributes><divisions>1</divisions></attributes>\
             <note><pitch><step>C</step><octave>4</octave></pitch><duration>1</duration></note>\
             <direction><direction-type><dynamics><p/></dynamics></direction-type></direction>\
             <note><pitch><step>D</step><octave>4</octave></pitch><duration>1</duration></note>\
             <note><pitch><step>E</step><octave>4</octave></pitch><duration>1</duration></note>\
             <note><pitch><step>F</step><octave>4</octave></pitch><duration>1</duration></note>\
             </measure></part>",
            violin_list(),
        );
        let (score, _) = import_musicxml(xml.as_bytes()).unwrap();
        let dynamics: Vec<_> = score.parts[0].measures[0]
            .notes
            .iter()
            .map(|n| n.dynamic)
            .collect();
        assert_eq!(
            dynamics,
            vec![
                DynamicLevel::Mf,
                DynamicLevel::P,
                DynamicLevel::P,
                DynamicLevel::P
            ]
        );
    }

    #[test]
    fn chords_share_the_onset() {
        let xml = wrap(
            "<part id=\"P1\"><measure number=\"1\"><attributes><divisions>1</divisions></attributes>\
             <note><pitch><step>C</step><octave>4</octave></pitch><duration>2</duration></note>\
             <note><chord/><pitch><step>E</step><octave>4</octave></pitch><duration>2</duration></note>\
             <note><pitch><step>G</step><octave>4</octave></pitch><duration>2</duration></note>\
             </measure></part>",
            violin_list(),
        );
        let (score, _) = import_musicxml(xml.as_bytes()).unwrap();
        let onsets: Vec<_> = score.parts[0].measures[0]
            .notes
            .iter()
            .map(|n| n.onset_ticks)
            .collect();
        assert_eq!(onsets, vec![0, 0, 960]);
    }

    #[test]
    fn grace_notes_drop_with_a_counted_category() {
        let xml = wrap(
            "<part id=\"P1\"><measure number=\"1\"><attributes><divisions>1</divisions></attributes>\
             <note><grace/><pitch><step>B</step><octave>3</octave></pitch></note>\
             <note><pitch><step>C</step><octave>4</octave></pitch><duration>4</duration></note>\
             </measure></part>",
            violin_list(),
        );
        let (score, warnings) = import_musicxml(xml.as_bytes()).unwrap();
        assert_eq!(score.parts[0].measures[0].notes.len(), 1);
        assert!(warnings.contains(&ImportWarning {
            category: "ignored:grace-note".into(),
            count: 1
        }));
    }

    #[test]
    fn sound_tempo_lands_in_the_tempo_map() {
        let xml = wrap(
            "<part id=\"P1\">\
             <measure number=\"1\"><direction><sound tempo=\"90\"/></direction><note><rest/><duration>4</duration></note></measure>\
             <measure number=\"2\"><sound tempo=\"140\"/><note><rest/><duration>4</duration></note></measure>\
             </part>",
            violin_list(),
        );
        let (score, _) = import_musicxml(xml.as_bytes()).unwrap();
        assert_eq!(
            score.tempo_map,
            vec![
                TempoEntry {
                    measure: 0,
                    bpm: 90
                },
                TempoEntry {
                    measure: 1,
                    bpm: 140
                }
            ]
        );
    }
}
