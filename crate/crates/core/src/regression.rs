//! Multi-output linear regression tying segment features to emotion
//! ratings.
//!
//! Training solves the ridge normal equations in closed form: with the
//! design matrix augmented by a leading ones column, W = (XᵀX + λI₀)⁻¹XᵀY,
//! where I₀ is the identity with the bias entry zeroed so the intercept is
//! never shrunk. The 15x15 system is solved by Cholesky factorization;
//! everything is deterministic, so retraining on identical data reproduces
//! the weights bit for bit.

use thiserror::Error;

use crate::canon::{self, as_list, as_real, as_str, as_sym, as_usize, FormatError, MapView, Value};
use crate::diff::{diff_scores, NotSameWork};
use crate::score::Score;
use crate::segment::{featurize, segment_score, FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use crate::survey::{Emotion, EmotionVector, SegmentAggregate, EMOTION_COUNT};

/// Features plus the bias column.
pub const AUGMENTED: usize = FEATURE_COUNT + 1;

pub const MODEL_VERSION: &str = "maestro-model/1";
pub const DATASET_VERSION: &str = "maestro-dataset/1";

/// Ridge coefficient used when the caller does not pick one.
pub const DEFAULT_LAMBDA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    /// Rows are segments; targets are mean ratings on the 1-10 scale.
    Absolute,
    /// Rows are feature differences between two renditions; targets are
    /// rating differences.
    Delta,
}

impl TrainingMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainingMode::Absolute => "absolute",
            TrainingMode::Delta => "delta",
        }
    }

    pub fn from_name(name: &str) -> Option<TrainingMode> {
        match name {
            "absolute" => Some(TrainingMode::Absolute),
            "delta" => Some(TrainingMode::Delta),
            _ => None,
        }
    }
}

/// One training example with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub score_id: String,
    pub segment_id: usize,
    pub features: [f64; FEATURE_COUNT],
    pub targets: [f64; EMOTION_COUNT],
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub mode: TrainingMode,
    pub rows: Vec<TrainingRow>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Checks the invariants a set must satisfy before training.
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.rows.is_empty() {
            return Err(TrainError::InvalidTrainingSet(
                "training set is empty".into(),
            ));
        }
        for row in &self.rows {
            if row.features.iter().any(|x| !x.is_finite())
                || row.targets.iter().any(|y| !y.is_finite())
            {
                return Err(TrainError::InvalidTrainingSet(format!(
                    "non-finite entry in row for `{}` segment {}",
                    row.score_id, row.segment_id
                )));
            }
            if self.mode == TrainingMode::Absolute {
                for &y in &row.targets {
                    if !(1.0..=10.0).contains(&y) {
                        return Err(TrainError::InvalidTrainingSet(format!(
                            "absolute-mode target {y} outside [1, 10] for `{}` segment {}",
                            row.score_id, row.segment_id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The fitted weight matrix, bias row first.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub mode: TrainingMode,
    pub lambda: f64,
    /// Rows that went into the fit.
    pub n_rows: usize,
    /// `weights[0]` is the bias row; `weights[1 + j]` multiplies feature j.
    pub weights: [[f64; EMOTION_COUNT]; AUGMENTED],
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TrainError {
    #[error("normal equations are singular; raise lambda above zero")]
    SingularSystem,
    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DatasetError {
    #[error(transparent)]
    NotSameWork(#[from] NotSameWork),
    #[error("segmentation mismatch: {0}")]
    SegmentationMismatch(String),
    #[error("no aggregate for segment {segment_id} of `{score_id}`")]
    MissingAggregate { score_id: String, segment_id: usize },
}

/// Fits the ridge model. Features that are zero in every row take weight
/// zero and drop out of the system; with λ = 0 the remaining columns must
/// be linearly independent.
pub fn train(ts: &TrainingSet, lambda: f64) -> Result<RegressionModel, TrainError> {
    ts.validate()?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(TrainError::InvalidTrainingSet(format!(
            "lambda {lambda} must be finite and non-negative"
        )));
    }

    let mut active = [false; AUGMENTED];
    active[0] = true; // bias column
    for row in &ts.rows {
        for (j, &x) in row.features.iter().enumerate() {
            if x != 0.0 {
                active[j + 1] = true;
            }
        }
    }
    let columns: Vec<usize> = (0..AUGMENTED).filter(|&i| active[i]).collect();
    let k = columns.len();

    // normal system over the active columns: A = XᵀX + λI₀, B = XᵀY
    let mut a = vec![0.0f64; k * k];
    let mut b = vec![[0.0f64; EMOTION_COUNT]; k];
    for row in &ts.rows {
        let x = design_row(&row.features);
        for (ri, &ci) in columns.iter().enumerate() {
            for (rj, &cj) in columns.iter().enumerate().skip(ri) {
                a[ri * k + rj] += x[ci] * x[cj];
            }
            for e in 0..EMOTION_COUNT {
                b[ri][e] += x[ci] * row.targets[e];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            a[i * k + j] = a[j * k + i];
        }
    }
    for i in 1..k {
        a[i * k + i] += lambda; // bias stays unregularized
    }

    let solved = cholesky_solve(a, b, k).ok_or(TrainError::SingularSystem)?;
    let mut weights = [[0.0f64; EMOTION_COUNT]; AUGMENTED];
    for (ri, &ci) in columns.iter().enumerate() {
        weights[ci] = solved[ri];
    }
    Ok(RegressionModel {
        mode: ts.mode,
        lambda,
        n_rows: ts.rows.len(),
        weights,
    })
}

pub fn design_row(features: &[f64; FEATURE_COUNT]) -> [f64; AUGMENTED] {
    let mut x = [1.0f64; AUGMENTED];
    x[1..].copy_from_slice(features);
    x
}

/// Solves the k x k system A W = B for symmetric positive-definite A.
/// `None` when a pivot collapses, which with λ = 0 means the design is rank
/// deficient.
fn cholesky_solve(
    mut a: Vec<f64>,
    mut w: Vec<[f64; EMOTION_COUNT]>,
    k: usize,
) -> Option<Vec<[f64; EMOTION_COUNT]>> {
    let scale = (0..k)
        .map(|i| a[i * k + i].abs())
        .fold(0.0f64, f64::max)
        .max(1.0);
    let tolerance = 1e-12 * scale;

    // in-place lower-triangular factor
    for p in 0..k {
        for j in 0..p {
            a[p * k + p] -= a[p * k + j] * a[p * k + j];
        }
        if a[p * k + p] <= tolerance {
            return None;
        }
        a[p * k + p] = a[p * k + p].sqrt();
        for i in p + 1..k {
            for j in 0..p {
                a[i * k + p] -= a[i * k + j] * a[p * k + j];
            }
            a[i * k + p] /= a[p * k + p];
        }
    }

    // forward substitution: L z = b
    for i in 0..k {
        for j in 0..i {
            for e in 0..EMOTION_COUNT {
                w[i][e] -= a[i * k + j] * w[j][e];
            }
        }
        for e in 0..EMOTION_COUNT {
            w[i][e] /= a[i * k + i];
        }
    }
    // back substitution: Lᵀ w = z
    for i in (0..k).rev() {
        for j in i + 1..k {
            for e in 0..EMOTION_COUNT {
                w[i][e] -= a[j * k + i] * w[j][e];
            }
        }
        for e in 0..EMOTION_COUNT {
            w[i][e] /= a[i * k + i];
        }
    }
    Some(w)
}

impl RegressionModel {
    /// ŷ = [1 | x] · W, unclamped. Clamping to the rating scale happens only
    /// at presentation, never inside objectives.
    pub fn predict(&self, features: &FeatureVector) -> EmotionVector {
        let mut out = [0.0f64; EMOTION_COUNT];
        for e in 0..EMOTION_COUNT {
            out[e] = self.predict_emotion(features, Emotion::ALL[e]);
        }
        EmotionVector(out)
    }

    /// Single-emotion prediction; summation order is fixed (bias, then
    /// features in canonical order) so results are reproducible.
    pub fn predict_emotion(&self, features: &FeatureVector, emotion: Emotion) -> f64 {
        let e = emotion.index();
        let mut acc = self.weights[0][e];
        for j in 0..FEATURE_COUNT {
            acc += features.0[j] * self.weights[j + 1][e];
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().flatten().all(|w| w.is_finite()) && self.lambda.is_finite()
    }
}

/// Relative residual of the normal equations, ‖Xᵀ(XW − Y) + λI₀W‖ / ‖XᵀY‖
/// in Frobenius norms. Training is correct when this is tiny.
pub fn normal_equations_residual(ts: &TrainingSet, lambda: f64, model: &RegressionModel) -> f64 {
    let n = ts.rows.len();
    let mut residual = [[0.0f64; EMOTION_COUNT]; AUGMENTED];
    let mut rhs = [[0.0f64; EMOTION_COUNT]; AUGMENTED];

    // XW − Y, accumulated straight into Xᵀ(XW − Y)
    for row in ts.rows.iter().take(n) {
        let x = design_row(&row.features);
        for e in 0..EMOTION_COUNT {
            let mut fitted = 0.0;
            for i in 0..AUGMENTED {
                fitted += x[i] * model.weights[i][e];
            }
            let gap = fitted - row.targets[e];
            for i in 0..AUGMENTED {
                residual[i][e] += x[i] * gap;
                rhs[i][e] += x[i] * row.targets[e];
            }
        }
    }
    for i in 1..AUGMENTED {
        for e in 0..EMOTION_COUNT {
            residual[i][e] += lambda * model.weights[i][e];
        }
    }

    let frob = |m: &[[f64; EMOTION_COUNT]; AUGMENTED]| {
        m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    };
    frob(&residual) / frob(&rhs).max(f64::MIN_POSITIVE)
}

/// Mean absolute prediction error per emotion over the given rows.
pub fn mean_absolute_error(model: &RegressionModel, rows: &[TrainingRow]) -> [f64; EMOTION_COUNT] {
    let mut sums = [0.0f64; EMOTION_COUNT];
    for row in rows {
        let predicted = model.predict(&FeatureVector(row.features));
        for e in 0..EMOTION_COUNT {
            sums[e] += (predicted.0[e] - row.targets[e]).abs();
        }
    }
    let n = rows.len().max(1) as f64;
    sums.map(|s| s / n)
}

/// One (original, interpretation) pair with the aggregated ratings of both,
/// ready to contribute delta rows.
pub struct DeltaPair<'a> {
    pub original: &'a Score,
    pub interpretation: &'a Score,
    pub original_ratings: &'a [SegmentAggregate],
    pub interpretation_ratings: &'a [SegmentAggregate],
}

/// Builds a delta-mode training set: one row per segment, X = feature
/// difference, Y = mean-rating difference.
pub fn build_delta_dataset(pairs: &[DeltaPair]) -> Result<TrainingSet, DatasetError> {
    let mut rows = Vec::new();
    for pair in pairs {
        // proves the two scores are renditions of one work
        diff_scores(pair.original, pair.interpretation).map_err(DatasetError::NotSameWork)?;

        let segments_a = segment_score(pair.original);
        let segments_b = segment_score(pair.interpretation);
        if segments_a.len() != segments_b.len()
            || segments_a
                .iter()
                .zip(&segments_b)
                .any(|(a, b)| a.start_measure != b.start_measure || a.end_measure != b.end_measure)
        {
            return Err(DatasetError::SegmentationMismatch(format!(
                "`{}` and `{}` segment differently",
                pair.original.title, pair.interpretation.title
            )));
        }

        let score_id = pair.original.title.clone();
        for segment in &segments_a {
            let base = featurize(pair.original, segment);
            let interp = featurize(pair.interpretation, &segments_b[segment.id]);
            let rating_a = find_aggregate(pair.original_ratings, segment.id).ok_or_else(|| {
                DatasetError::MissingAggregate {
                    score_id: score_id.clone(),
                    segment_id: segment.id,
                }
            })?;
            let rating_b =
                find_aggregate(pair.interpretation_ratings, segment.id).ok_or_else(|| {
                    DatasetError::MissingAggregate {
                        score_id: score_id.clone(),
                        segment_id: segment.id,
                    }
                })?;

            let mut features = [0.0f64; FEATURE_COUNT];
            for j in 0..FEATURE_COUNT {
                features[j] = interp.0[j] - base.0[j];
            }
            let mut targets = [0.0f64; EMOTION_COUNT];
            for e in 0..EMOTION_COUNT {
                targets[e] = rating_b.mean.0[e] - rating_a.mean.0[e];
            }
            rows.push(TrainingRow {
                score_id: score_id.clone(),
                segment_id: segment.id,
                features,
                targets,
            });
        }
    }
    Ok(TrainingSet {
        mode: TrainingMode::Delta,
        rows,
    })
}

fn find_aggregate(aggregates: &[SegmentAggregate], segment_id: usize) -> Option<&SegmentAggregate> {
    aggregates.iter().find(|a| a.segment_id == segment_id)
}

// ---------------------------------------------------------------------------
// model file
// ---------------------------------------------------------------------------

pub fn save_model(model: &RegressionModel) -> Result<Vec<u8>, FormatError> {
    if !model.is_finite() {
        return Err(FormatError::schema("weights", "non-finite"));
    }
    let weights = model
        .weights
        .iter()
        .map(|row| Value::List(row.iter().map(|&w| Value::Real(w)).collect()))
        .collect();
    let body = Value::map(vec![
        ("mode", Value::sym(model.mode.name())),
        ("lambda", Value::Real(model.lambda)),
        ("n_rows", Value::Int(model.n_rows as i64)),
        (
            "features",
            Value::List(FEATURE_NAMES.iter().map(|n| Value::sym(n)).collect()),
        ),
        (
            "emotions",
            Value::List(Emotion::ALL.iter().map(|e| Value::sym(e.name())).collect()),
        ),
        ("weights", Value::List(weights)),
    ]);
    Ok(canon::write_document(MODEL_VERSION, &body).into_bytes())
}

pub fn load_model(bytes: &[u8]) -> Result<RegressionModel, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Syntax {
        line: 1,
        col: 1,
        message: format!("not UTF-8: {e}"),
    })?;
    let body = canon::parse_document(text, MODEL_VERSION)?;
    let mut view = MapView::new(&body, "")?;

    let mode_name = as_sym(view.required("mode")?, "mode")?;
    let mode = TrainingMode::from_name(mode_name)
        .ok_or_else(|| FormatError::schema("mode", format!("unknown mode `{mode_name}`")))?;
    let lambda = as_real(view.required("lambda")?, "lambda")?;
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(FormatError::schema(
            "lambda",
            "must be finite and non-negative",
        ));
    }
    let n_rows = as_usize(view.required("n_rows")?, "n_rows")?;

    check_order_stamp(view.required("features")?, "features", &FEATURE_NAMES)?;
    let emotion_names: Vec<&str> = Emotion::ALL.iter().map(|e| e.name()).collect();
    check_order_stamp(view.required("emotions")?, "emotions", &emotion_names)?;

    let rows = as_list(view.required("weights")?, "weights")?;
    if rows.len() != AUGMENTED {
        return Err(FormatError::schema(
            "weights",
            format!("expected {AUGMENTED} rows, found {}", rows.len()),
        ));
    }
    let mut weights = [[0.0f64; EMOTION_COUNT]; AUGMENTED];
    for (i, row) in rows.iter().enumerate() {
        let cells = as_list(row, "weights")?;
        if cells.len() != EMOTION_COUNT {
            return Err(FormatError::schema(
                "weights",
                format!(
                    "row {i} has {} entries, expected {EMOTION_COUNT}",
                    cells.len()
                ),
            ));
        }
        for (e, cell) in cells.iter().enumerate() {
            let w = as_real(cell, "weights")?;
            if !w.is_finite() {
                return Err(FormatError::schema("weights", "non-finite"));
            }
            weights[i][e] = w;
        }
    }
    view.finish()?;
    Ok(RegressionModel {
        mode,
        lambda,
        n_rows,
        weights,
    })
}

fn check_order_stamp(value: &Value, field: &str, expected: &[&str]) -> Result<(), FormatError> {
    let items = as_list(value, field)?;
    if items.len() != expected.len() {
        return Err(FormatError::schema(
            field,
            format!("expected {} names", expected.len()),
        ));
    }
    for (item, want) in items.iter().zip(expected) {
        let name = as_sym(item, field)?;
        if name != *want {
            return Err(FormatError::schema(
                field,
                format!("order stamp mismatch: `{name}` where `{want}` belongs"),
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// dataset file
// ---------------------------------------------------------------------------

pub fn write_dataset(ts: &TrainingSet) -> Vec<u8> {
    let rows = ts
        .rows
        .iter()
        .map(|row| {
            Value::map(vec![
                ("score", Value::Str(row.score_id.clone())),
                ("segment", Value::Int(row.segment_id as i64)),
                (
                    "features",
                    Value::List(row.features.iter().map(|&x| Value::Real(x)).collect()),
                ),
                (
                    "targets",
                    Value::List(row.targets.iter().map(|&y| Value::Real(y)).collect()),
                ),
            ])
        })
        .collect();
    let body = Value::map(vec![
        ("mode", Value::sym(ts.mode.name())),
        ("rows", Value::List(rows)),
    ]);
    canon::write_document(DATASET_VERSION, &body).into_bytes()
}

pub fn parse_dataset(bytes: &[u8]) -> Result<TrainingSet, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Syntax {
        line: 1,
        col: 1,
        message: format!("not UTF-8: {e}"),
    })?;
    let body = canon::parse_document(text, DATASET_VERSION)?;
    let mut view = MapView::new(&body, "")?;
    let mode_name = as_sym(view.required("mode")?, "mode")?;
    let mode = TrainingMode::from_name(mode_name)
        .ok_or_else(|| FormatError::schema("mode", format!("unknown mode `{mode_name}`")))?;
    let rows = as_list(view.required("rows")?, "rows")?
        .iter()
        .map(|row| {
            let mut view = MapView::new(row, "rows")?;
            let score_id = as_str(view.required("score")?, "rows.score")?.to_string();
            let segment_id = as_usize(view.required("segment")?, "rows.segment")?;
            let features =
                fixed_reals::<FEATURE_COUNT>(view.required("features")?, "rows.features")?;
            let targets = fixed_reals::<EMOTION_COUNT>(view.required("targets")?, "rows.targets")?;
            view.finish()?;
            Ok(TrainingRow {
                score_id,
                segment_id,
                features,
                targets,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    view.finish()?;
    Ok(TrainingSet { mode, rows })
}

fn fixed_reals<const N: usize>(value: &Value, field: &str) -> Result<[f64; N], FormatError> {
    let items = as_list(value, field)?;
    if items.len() != N {
        return Err(FormatError::schema(
            field,
            format!("expected {N} reals, found {}", items.len()),
        ));
    }
    let mut out = [0.0f64; N];
    for (i, item) in items.iter().enumerate() {
        out[i] = as_real(item, field)?;
    }
    Ok(out)
}
