//! Golden import check: the two-part fixture must land on exactly this IR,
//! field by field, and the importer must account for every note it drops.

use maestro_core::io::{import_musicxml, ImportWarning};
use maestro_core::score::{
    DynamicLevel, Measure, Note, Part, Pitch, Score, TempoEntry, TimeSignature,
};

const FIXTURE: &str = include_str!("data/quartet.musicxml");

fn note(onset: u32, duration: u32, pitch: u8, dynamic: DynamicLevel) -> Note {
    Note {
        onset_ticks: onset,
        duration_ticks: duration,
        pitch: Pitch::Pitched(pitch),
        dynamic,
        articulation: 1.0,
    }
}

#[test]
fn golden_fixture_imports_to_the_expected_ir() {
    let (score, warnings) = import_musicxml(FIXTURE.as_bytes()).unwrap();
    assert_eq!(
        warnings,
        vec![],
        "fixture exercises only supported elements"
    );

    let four_four = TimeSignature::new(4, 4);
    let expected = Score {
        title: "Golden Duo".into(),
        divisions: 480,
        parts: vec![
            Part {
                id: "P1".into(),
                instrument_name: "Violin".into(),
                group: maestro_core::score::InstrumentGroup::Strings,
                measures: vec![
                    Measure::new(
                        0,
                        four_four,
                        vec![
                            note(0, 480, 72, DynamicLevel::P),
                            note(480, 480, 74, DynamicLevel::P),
                            note(960, 960, 76, DynamicLevel::P),
                        ],
                    ),
                    Measure::new(1, four_four, vec![note(0, 1920, 77, DynamicLevel::F)]),
                    Measure::new(2, four_four, vec![note(0, 960, 79, DynamicLevel::F)]),
                    Measure::new(3, four_four, vec![note(0, 1920, 76, DynamicLevel::F)]),
                ],
            },
            Part {
                id: "P2".into(),
                instrument_name: "Flute".into(),
                group: maestro_core::score::InstrumentGroup::Woodwinds,
                measures: vec![
                    Measure::new(0, four_four, vec![]),
                    Measure::new(
                        1,
                        four_four,
                        vec![
                            note(0, 960, 81, DynamicLevel::P),
                            note(960, 960, 83, DynamicLevel::P),
                        ],
                    ),
                    Measure::new(2, four_four, vec![note(0, 1920, 84, DynamicLevel::P)]),
                    Measure::new(3, four_four, vec![note(0, 1920, 81, DynamicLevel::P)]),
                ],
            },
        ],
        tempo_map: vec![TempoEntry {
            measure: 0,
            bpm: 90,
        }],
        movement_boundaries: vec![0],
    };

    assert_eq!(score.title, expected.title);
    assert_eq!(score.divisions, expected.divisions);
    assert_eq!(score.tempo_map, expected.tempo_map);
    assert_eq!(score.movement_boundaries, expected.movement_boundaries);
    assert_eq!(score.parts.len(), expected.parts.len());
    for (got, want) in score.parts.iter().zip(&expected.parts) {
        assert_eq!(got.id, want.id);
        assert_eq!(got.instrument_name, want.instrument_name);
        assert_eq!(got.group, want.group);
        assert_eq!(got.measures, want.measures, "part {}", want.id);
    }
    assert_eq!(score, expected);
}

/// Every `<note>` element is either imported or counted in a `*-note`
/// warning category; nothing vanishes silently.
#[test]
fn dropped_notes_are_always_counted() {
    let xml = r#"<?xml version="1.0"?>
<score-partwise>
  <part-list>
    <score-part id="P1"><part-name>Violin</part-name></score-part>
  </part-list>
  <part id="P1">
    <measure number="1">
      <attributes><divisions>1</divisions><time><beats>4</beats><beat-type>4</beat-type></time></attributes>
      <note><grace/><pitch><step>B</step><octave>4</octave></pitch></note>
      <note><pitch><step>C</step><octave>5</octave></pitch><duration>1</duration><tie type="start"/></note>
      <note><pitch><step>C</step><octave>5</octave></pitch><duration>1</duration></note>
      <note><cue/><pitch><step>D</step><octave>5</octave></pitch><duration>1</duration></note>
      <note><pitch><step>E</step><octave>5</octave></pitch><duration>4</duration></note>
      <note><rest/><duration>1</duration></note>
    </measure>
  </part>
</score-partwise>"#;
    let (score, warnings) = import_musicxml(xml.as_bytes()).unwrap();

    let xml_note_elements = 5; // non-rest <note> elements above
    let imported: usize = score.parts[0].measures.iter().map(|m| m.notes.len()).sum();
    let dropped: usize = warnings
        .iter()
        .filter(|w| w.category.starts_with("ignored:") && w.category.ends_with("-note"))
        .map(|w| w.count)
        .sum();
    assert_eq!(imported + dropped, xml_note_elements);
    assert!(warnings.contains(&ImportWarning {
        category: "ignored:grace-note".into(),
        count: 1
    }));
    assert!(warnings.contains(&ImportWarning {
        category: "ignored:cue-note".into(),
        count: 1
    }));
    assert!(warnings.contains(&ImportWarning {
        category: "ignored:tie".into(),
        count: 1
    }));

    // the overflowing whole note was clipped at the barline, not dropped
    assert!(warnings.iter().any(|w| w.category == "quantized:duration"));
    let clipped = score.parts[0].measures[0]
        .notes
        .iter()
        .find(|n| n.onset_ticks == 960)
        .unwrap();
    assert_eq!(clipped.duration_ticks, 960);
}
