//! maestro-core: a symbolic-music toolkit that learns how score-level
//! choices map to listener-rated emotions and uses the fitted model to
//! generate an emotionally targeted interpretation of an existing work.
//!
//! The pipeline, end to end:
//!
//! 1. [`io`] reads scores (canonical text or a MusicXML subset) into the
//!    [`score`] intermediate representation and writes Standard MIDI Files
//!    for audition.
//! 2. [`diff`] compares an original with an interpretation of the same work
//!    and produces an invertible delta set.
//! 3. [`segment`] splits a score into rated segments and summarizes each as
//!    a fixed 14-dimensional feature vector, with a closed-form pushforward
//!    of features under an edit plan.
//! 4. [`survey`] aggregates participant ratings into per-segment emotion
//!    targets.
//! 5. [`regression`] fits the ridge least-squares model tying features to
//!    emotions.
//! 6. [`generate`] searches the edit-plan grid in feature space and
//!    materializes the winner as a new interpretation.
//! 7. [`playability`] flags content human players could not execute.
//!
//! Every file format is byte-deterministic; every operation is a pure
//! function, so values can be shared freely across threads.

pub mod canon;
pub mod diff;
pub mod generate;
pub mod io;
pub mod playability;
pub mod regression;
pub mod score;
pub mod segment;
pub mod survey;

pub use canon::FormatError;
pub use diff::{
    apply_delta, diff_scores, invert_delta, skeleton_fingerprint, DeltaRecord, DeltaSet,
};
pub use generate::{
    generate, GenerateError, GenerationConfig, GenerationReport, SegmentChoice, SegmentSelection,
};
pub use io::{
    export_midi, import_musicxml, parse_canonical, write_canonical, ImportWarning, SmfBytes,
};
pub use playability::{validate_playability, PlayabilityConfig, Violation, ViolationCode};
pub use regression::{
    build_delta_dataset, load_model, save_model, train, RegressionModel, TrainingMode, TrainingRow,
    TrainingSet,
};
pub use score::{
    active_groups, group_of_instrument, validate_score, DynamicLevel, InstrumentGroup,
    InvalidScore, Measure, Note, Part, Pitch, Score, StructuralError, StructuralErrorCode,
    TempoEntry, TimeSignature, UnknownInstrument,
};
pub use segment::{
    apply_plan, featurize, segment_score, transform_features, FeatureVector, Segment, TransformPlan,
};
pub use survey::{
    aggregate, parse_ratings_csv, Emotion, EmotionVector, RatingRow, SegmentAggregate,
};

#[cfg(test)]
pub(crate) mod test_support;
