//! Participant ratings: CSV ingestion and per-segment aggregation into the
//! emotion targets the regression trains on.
//!
//! Ratings are integers on a 1-10 scale, one row per (participant, segment,
//! emotion). Aggregation uses integer sums throughout, so results are exact
//! and independent of row order.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::canon::{self, format_real, Value};

/// The eight base emotions, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Emotion {
    Joy,
    Sadness,
    Anticipation,
    Surprise,
    Anger,
    Calmness,
    Fear,
    Confidence,
}

pub const EMOTION_COUNT: usize = 8;

impl Emotion {
    pub const ALL: [Emotion; EMOTION_COUNT] = [
        Emotion::Joy,
        Emotion::Sadness,
        Emotion::Anticipation,
        Emotion::Surprise,
        Emotion::Anger,
        Emotion::Calmness,
        Emotion::Fear,
        Emotion::Confidence,
    ];

    pub fn index(self) -> usize {
        match self {
            Emotion::Joy => 0,
            Emotion::Sadness => 1,
            Emotion::Anticipation => 2,
            Emotion::Surprise => 3,
            Emotion::Anger => 4,
            Emotion::Calmness => 5,
            Emotion::Fear => 6,
            Emotion::Confidence => 7,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Joy => "joy",
            Emotion::Sadness => "sadness",
            Emotion::Anticipation => "anticipation",
            Emotion::Surprise => "surprise",
            Emotion::Anger => "anger",
            Emotion::Calmness => "calmness",
            Emotion::Fear => "fear",
            Emotion::Confidence => "confidence",
        }
    }

    pub fn from_name(name: &str) -> Option<Emotion> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(name.trim()))
    }
}

/// Eight reals in canonical emotion order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionVector(pub [f64; EMOTION_COUNT]);

impl EmotionVector {
    pub fn zero() -> EmotionVector {
        EmotionVector([0.0; EMOTION_COUNT])
    }

    pub fn get(&self, emotion: Emotion) -> f64 {
        self.0[emotion.index()]
    }

    /// Index of the largest entry, ties broken by canonical emotion order.
    pub fn argmax(&self) -> Emotion {
        let mut best = Emotion::Joy;
        for emotion in Emotion::ALL {
            if self.0[emotion.index()] > self.0[best.index()] {
                best = emotion;
            }
        }
        best
    }
}

/// One parsed rating row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingRow {
    pub participant_id: String,
    pub segment_id: usize,
    pub emotion: Emotion,
    pub rating: u8,
}

/// Aggregated ratings for one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentAggregate {
    pub segment_id: usize,
    pub mean: EmotionVector,
    /// Population standard deviation per emotion.
    pub stddev: [f64; EMOTION_COUNT],
    /// Participants contributing at least one rating to the segment.
    pub n_raters: usize,
    /// argmax of the means, canonical-order tie-break.
    pub majority: Emotion,
}

pub const RATINGS_HEADER: &str = "participant_id,segment_id,emotion,rating";
pub const AGGREGATE_VERSION: &str = "maestro-ratings/1";

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RatingsError {
    #[error("CSV syntax error at row {row}: {message}")]
    CsvSyntax { row: usize, message: String },
    #[error("rating out of range at row {row}: {found} is not in [1, 10]")]
    Range { row: usize, found: i64 },
    #[error("unknown emotion `{name}` at row {row}")]
    UnknownEmotion { row: usize, name: String },
    #[error("duplicate rating at row {row}: participant `{participant}` already rated {emotion} for segment {segment}")]
    DuplicateRating {
        row: usize,
        participant: String,
        segment: usize,
        emotion: String,
    },
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AggregateError {
    #[error("segment {segment_id} has no ratings{}", .emotion.map(|e| format!(" for {}", e.name())).unwrap_or_default())]
    EmptySegment {
        segment_id: usize,
        emotion: Option<Emotion>,
    },
}

/// Parses the fixed-header ratings CSV. Row numbers in errors are 1-based
/// file lines (the header is row 1).
pub fn parse_ratings_csv(bytes: &[u8]) -> Result<Vec<RatingRow>, RatingsError> {
    let text = std::str::from_utf8(bytes).map_err(|e| RatingsError::CsvSyntax {
        row: 1,
        message: format!("not UTF-8: {e}"),
    })?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == RATINGS_HEADER => {}
        Some((_, header)) => {
            return Err(RatingsError::CsvSyntax {
                row: 1,
                message: format!("header must be exactly `{RATINGS_HEADER}`, found `{header}`"),
            })
        }
        None => {
            return Err(RatingsError::CsvSyntax {
                row: 1,
                message: "empty file".into(),
            })
        }
    }

    let mut rows = Vec::new();
    let mut seen: BTreeSet<(String, usize, Emotion)> = BTreeSet::new();
    for (index, line) in lines {
        let row = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(RatingsError::CsvSyntax {
                row,
                message: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let participant_id = fields[0].trim().to_string();
        if participant_id.is_empty() {
            return Err(RatingsError::CsvSyntax {
                row,
                message: "empty participant_id".into(),
            });
        }
        let segment_id =
            fields[1]
                .trim()
                .parse::<usize>()
                .map_err(|_| RatingsError::CsvSyntax {
                    row,
                    message: format!("bad segment_id `{}`", fields[1]),
                })?;
        let emotion =
            Emotion::from_name(fields[2]).ok_or_else(|| RatingsError::UnknownEmotion {
                row,
                name: fields[2].trim().to_string(),
            })?;
        let rating_value =
            fields[3]
                .trim()
                .parse::<i64>()
                .map_err(|_| RatingsError::CsvSyntax {
                    row,
                    message: format!("bad rating `{}`", fields[3]),
                })?;
        if !(1..=10).contains(&rating_value) {
            return Err(RatingsError::Range {
                row,
                found: rating_value,
            });
        }
        if !seen.insert((participant_id.clone(), segment_id, emotion)) {
            return Err(RatingsError::DuplicateRating {
                row,
                participant: participant_id,
                segment: segment_id,
                emotion: emotion.name().to_string(),
            });
        }
        rows.push(RatingRow {
            participant_id,
            segment_id,
            emotion,
            rating: rating_value as u8,
        });
    }
    Ok(rows)
}

/// Aggregates one segment: per-emotion mean and population stddev over the
/// available ratings, plus the majority emotion. Participants may skip
/// cells, but every emotion needs at least one rating.
pub fn aggregate(
    rows: &[RatingRow],
    segment_id: usize,
) -> Result<SegmentAggregate, AggregateError> {
    let mut sums = [0u64; EMOTION_COUNT];
    let mut squares = [0u64; EMOTION_COUNT];
    let mut counts = [0u64; EMOTION_COUNT];
    let mut raters = BTreeSet::new();

    for row in rows.iter().filter(|r| r.segment_id == segment_id) {
        let e = row.emotion.index();
        let r = u64::from(row.rating);
        sums[e] += r;
        squares[e] += r * r;
        counts[e] += 1;
        raters.insert(row.participant_id.as_str());
    }

    if raters.is_empty() {
        return Err(AggregateError::EmptySegment {
            segment_id,
            emotion: None,
        });
    }

    let mut mean = [0.0f64; EMOTION_COUNT];
    let mut stddev = [0.0f64; EMOTION_COUNT];
    for emotion in Emotion::ALL {
        let e = emotion.index();
        if counts[e] == 0 {
            return Err(AggregateError::EmptySegment {
                segment_id,
                emotion: Some(emotion),
            });
        }
        let n = counts[e] as f64;
        mean[e] = sums[e] as f64 / n;
        let variance = (squares[e] as f64 / n - mean[e] * mean[e]).max(0.0);
        stddev[e] = variance.sqrt();
    }

    let mean = EmotionVector(mean);
    Ok(SegmentAggregate {
        segment_id,
        mean,
        stddev,
        n_raters: raters.len(),
        majority: mean.argmax(),
    })
}

/// Aggregates every segment id present in the rows, in ascending order.
pub fn aggregate_all(rows: &[RatingRow]) -> Result<Vec<SegmentAggregate>, AggregateError> {
    let ids: BTreeSet<usize> = rows.iter().map(|r| r.segment_id).collect();
    ids.into_iter().map(|id| aggregate(rows, id)).collect()
}

/// Serializes aggregates as a canonical `maestro-ratings/1` document.
pub fn write_aggregates(aggregates: &[SegmentAggregate]) -> Vec<u8> {
    let segments = aggregates
        .iter()
        .map(|a| {
            Value::map(vec![
                ("segment", Value::Int(a.segment_id as i64)),
                ("n_raters", Value::Int(a.n_raters as i64)),
                ("majority", Value::sym(a.majority.name())),
                (
                    "mean",
                    Value::List(a.mean.0.iter().map(|&x| Value::Real(x)).collect()),
                ),
                (
                    "stddev",
                    Value::List(a.stddev.iter().map(|&x| Value::Real(x)).collect()),
                ),
            ])
        })
        .collect();
    let body = Value::map(vec![
        (
            "emotions",
            Value::List(Emotion::ALL.iter().map(|e| Value::sym(e.name())).collect()),
        ),
        ("segments", Value::List(segments)),
    ]);
    canon::write_document(AGGREGATE_VERSION, &body).into_bytes()
}

/// Human-oriented one-line summary used by reporting.
pub fn describe_aggregate(a: &SegmentAggregate) -> String {
    let means: Vec<String> = Emotion::ALL
        .iter()
        .map(|e| format!("{} {}", e.name(), format_real(a.mean.get(*e))))
        .collect();
    format!(
        "segment {} ({} raters): majority {}; {}",
        a.segment_id,
        a.n_raters,
        a.majority.name(),
        means.join(", ")
    )
}
