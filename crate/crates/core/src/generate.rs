//! Interpretation generation: pick target segments, search the edit-plan
//! grid exhaustively in feature space, and materialize the winning plan.
//!
//! The search evaluates every plan with a fixed arithmetic order (segments
//! ascending, bias first, groups in canonical order), and the argmax breaks
//! objective ties by the lexicographically smallest grid index tuple
//! (dynamics, tempo, articulation). Both choices make the result
//! independent of evaluation order and parallelism.

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::canon::{
    self, as_bool, as_int, as_list, as_real, as_str, as_sym, as_usize, FormatError, MapView, Value,
};
use crate::regression::{RegressionModel, TrainingMode, TrainingSet};
use crate::score::{validate_score, InstrumentGroup, InvalidScore, Score};
use crate::segment::{
    apply_plan, featurize, segment_score, transform_features, FeatureVector, Segment,
    TransformPlan, FEATURE_COUNT,
};
use crate::survey::{Emotion, EmotionVector, EMOTION_COUNT};

pub const REPORT_VERSION: &str = "maestro-report/1";

/// Default deviation-penalty weight.
pub const DEFAULT_ETA: f64 = 0.1;

pub fn default_delta_grid() -> Vec<i32> {
    vec![-2, -1, 0, 1, 2]
}

pub fn default_alpha_grid() -> Vec<f64> {
    vec![0.75, 1.0, 1.25]
}

pub fn default_tau_grid() -> Vec<f64> {
    vec![0.8, 0.9, 1.0, 1.1, 1.2]
}

/// How target segments are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SegmentSelection {
    /// Corpus nearest-neighbour rule when a delta corpus is given, else the
    /// model's strongest positive dynamics weight; never selects nothing.
    Auto,
    All,
    Explicit(BTreeSet<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub target: Emotion,
    /// Deviation-penalty weight; larger values keep the output closer to
    /// the original.
    pub eta: f64,
    pub delta_grid: Vec<i32>,
    pub alpha_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub segment_selection: SegmentSelection,
}

impl GenerationConfig {
    pub fn new(target: Emotion) -> GenerationConfig {
        GenerationConfig {
            target,
            eta: DEFAULT_ETA,
            delta_grid: default_delta_grid(),
            alpha_grid: default_alpha_grid(),
            tau_grid: default_tau_grid(),
            segment_selection: SegmentSelection::Auto,
        }
    }

    /// Sorts the grids and checks each contains its identity action.
    pub fn normalized(mut self) -> Result<GenerationConfig, GenerateError> {
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(GenerateError::InvalidGrid(format!(
                "eta {} must be finite and non-negative",
                self.eta
            )));
        }
        self.delta_grid.sort_unstable();
        self.delta_grid.dedup();
        self.alpha_grid.sort_by(f64::total_cmp);
        self.alpha_grid.dedup();
        self.tau_grid.sort_by(f64::total_cmp);
        self.tau_grid.dedup();
        if self.delta_grid.is_empty() || self.alpha_grid.is_empty() || self.tau_grid.is_empty() {
            return Err(GenerateError::EmptyGrid);
        }
        if !self.delta_grid.contains(&0) {
            return Err(GenerateError::InvalidGrid(
                "dynamic grid must contain 0".into(),
            ));
        }
        if !self.alpha_grid.contains(&1.0) {
            return Err(GenerateError::InvalidGrid(
                "articulation grid must contain 1.0".into(),
            ));
        }
        if !self.tau_grid.contains(&1.0) {
            return Err(GenerateError::InvalidGrid(
                "tempo grid must contain 1.0".into(),
            ));
        }
        if self.delta_grid.iter().any(|d| !(-7..=7).contains(d)) {
            return Err(GenerateError::InvalidGrid(
                "dynamic offsets must lie in [-7, 7]".into(),
            ));
        }
        if self.alpha_grid.iter().any(|&a| !(a.is_finite() && a > 0.0)) {
            return Err(GenerateError::InvalidGrid(
                "articulation scales must be positive".into(),
            ));
        }
        if self.tau_grid.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return Err(GenerateError::InvalidGrid(
                "tempo scales must be positive".into(),
            ));
        }
        Ok(self)
    }
}

/// Why a segment was or was not targeted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentChoice {
    pub segment_id: usize,
    pub selected: bool,
    pub rationale: String,
}

/// Everything the search decided, alongside the winning plan.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub target: Emotion,
    pub mode: TrainingMode,
    pub eta: f64,
    pub plan: TransformPlan,
    pub objective: f64,
    pub objective_identity: f64,
    /// Weighted mean prediction over all segments, before any edit.
    pub predicted_before: EmotionVector,
    /// Same, under the winning plan.
    pub predicted_after: EmotionVector,
    pub segments: Vec<SegmentChoice>,
    /// Note- or measure-level clamps that actually bound during
    /// materialization.
    pub clamp_saturations: usize,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GenerateError {
    #[error(transparent)]
    InvalidScore(#[from] InvalidScore),
    #[error("score has no measures to interpret")]
    EmptyScore,
    #[error("a search grid is empty")]
    EmptyGrid,
    #[error("bad search grid: {0}")]
    InvalidGrid(String),
    #[error("explicit segment id {0} does not exist")]
    UnknownSegment(usize),
}

/// Deviation penalty: one grid step of any kind costs about the same.
/// Groups accumulate in canonical order; this order is part of the
/// objective's definition.
pub fn penalty(plan: &TransformPlan) -> f64 {
    let mut pen = 0.0;
    for g in 0..4 {
        pen += f64::from(plan.dynamic_offset[g].abs()) / 2.0;
    }
    for g in 0..4 {
        pen += (plan.articulation_scale[g] - 1.0).abs() / 0.25;
    }
    pen += (plan.tempo_scale - 1.0).abs() / 0.2;
    pen
}

/// J(plan): measure-weighted mean predicted target emotion of the
/// transformed segments, minus `eta` times the deviation penalty. Segments
/// accumulate in id order.
pub fn objective(
    model: &RegressionModel,
    segments: &[(FeatureVector, f64)],
    plan: &TransformPlan,
    target: Emotion,
    eta: f64,
) -> f64 {
    let flags: Vec<bool> = (0..segments.len())
        .map(|id| plan.target_segments.contains(&id))
        .collect();
    objective_with_flags(model, segments, plan, &flags, target, eta)
}

fn objective_with_flags(
    model: &RegressionModel,
    segments: &[(FeatureVector, f64)],
    plan: &TransformPlan,
    flags: &[bool],
    target: Emotion,
    eta: f64,
) -> f64 {
    let mut weighted = 0.0f64;
    let mut total = 0.0f64;
    for ((features, weight), &selected) in segments.iter().zip(flags) {
        let transformed = transform_features(features, plan, selected);
        let predicted = match model.mode {
            TrainingMode::Absolute => model.predict_emotion(&transformed, target),
            TrainingMode::Delta => {
                let mut delta = [0.0f64; FEATURE_COUNT];
                for j in 0..FEATURE_COUNT {
                    delta[j] = transformed.0[j] - features.0[j];
                }
                model.predict_emotion(&FeatureVector(delta), target)
            }
        };
        weighted += weight * predicted;
        total += weight;
    }
    weighted / total - eta * penalty(plan)
}

/// Chooses which segments the plan may touch, with a per-segment rationale.
///
/// With a delta corpus, a segment is targeted when its nearest corpus row
/// by Euclidean feature distance carries any nonzero feature change. Without
/// one, the group holding the largest positive dynamics weight for the
/// target emotion marks every segment it sounds in. If either rule selects
/// nothing, every segment is targeted and the rationale says so.
pub fn select_target_segments(
    score: &Score,
    segments: &[Segment],
    model: &RegressionModel,
    target: Emotion,
    delta_corpus: Option<&TrainingSet>,
) -> (BTreeSet<usize>, Vec<SegmentChoice>) {
    let features: Vec<FeatureVector> = segments.iter().map(|s| featurize(score, s)).collect();
    let mut selected = BTreeSet::new();
    let mut choices = Vec::with_capacity(segments.len());

    match delta_corpus.filter(|c| !c.rows.is_empty()) {
        Some(corpus) => {
            for (id, feature) in features.iter().enumerate() {
                let mut best_row = 0usize;
                let mut best_distance = f64::INFINITY;
                for (row_index, row) in corpus.rows.iter().enumerate() {
                    let mut distance = 0.0f64;
                    for j in 0..FEATURE_COUNT {
                        let gap = feature.0[j] - row.features[j];
                        distance += gap * gap;
                    }
                    if distance < best_distance {
                        best_distance = distance;
                        best_row = row_index;
                    }
                }
                let adapted = corpus.rows[best_row].features.iter().any(|&x| x != 0.0);
                if adapted {
                    selected.insert(id);
                }
                choices.push(SegmentChoice {
                    segment_id: id,
                    selected: adapted,
                    rationale: format!("corpus-nn:{best_row}"),
                });
            }
        }
        None => {
            // strongest positive dynamics weight for the target emotion
            let e = target.index();
            let mut best_group: Option<InstrumentGroup> = None;
            let mut best_weight = 0.0f64;
            for group in InstrumentGroup::ALL {
                let w = model.weights[1 + 4 + group.index()][e];
                if w > best_weight {
                    best_weight = w;
                    best_group = Some(group);
                }
            }
            if let Some(group) = best_group {
                for (id, feature) in features.iter().enumerate() {
                    let active = feature.activity(group) > 0.0;
                    if active {
                        selected.insert(id);
                    }
                    choices.push(SegmentChoice {
                        segment_id: id,
                        selected: active,
                        rationale: if active {
                            format!("model-group:{}", group.name())
                        } else {
                            format!("inactive:{}", group.name())
                        },
                    });
                }
            }
            // no positive weight: fall through to the fallback below
        }
    }

    if selected.is_empty() {
        selected = (0..segments.len()).collect();
        choices = (0..segments.len())
            .map(|id| SegmentChoice {
                segment_id: id,
                selected: true,
                rationale: "fallback:all".into(),
            })
            .collect();
    }
    (selected, choices)
}

/// Runs the full pipeline: selection, exhaustive grid search in feature
/// space, then materialization of the single winning plan.
pub fn generate(
    score: &Score,
    model: &RegressionModel,
    config: &GenerationConfig,
    delta_corpus: Option<&TrainingSet>,
) -> Result<(Score, GenerationReport), GenerateError> {
    let errors = validate_score(score);
    if !errors.is_empty() {
        return Err(GenerateError::InvalidScore(InvalidScore(errors)));
    }
    let config = config.clone().normalized()?;

    let segments = segment_score(score);
    if segments.is_empty() {
        return Err(GenerateError::EmptyScore);
    }
    let weighted_features: Vec<(FeatureVector, f64)> = segments
        .iter()
        .map(|s| (featurize(score, s), s.measure_count() as f64))
        .collect();

    let (selected, choices) = match &config.segment_selection {
        SegmentSelection::Auto => {
            select_target_segments(score, &segments, model, config.target, delta_corpus)
        }
        SegmentSelection::All => {
            let all: BTreeSet<usize> = (0..segments.len()).collect();
            let choices = (0..segments.len())
                .map(|id| SegmentChoice {
                    segment_id: id,
                    selected: true,
                    rationale: "all".into(),
                })
                .collect();
            (all, choices)
        }
        SegmentSelection::Explicit(ids) => {
            if let Some(&bad) = ids.iter().find(|id| **id >= segments.len()) {
                return Err(GenerateError::UnknownSegment(bad));
            }
            let choices = (0..segments.len())
                .map(|id| SegmentChoice {
                    segment_id: id,
                    selected: ids.contains(&id),
                    rationale: if ids.contains(&id) {
                        "explicit"
                    } else {
                        "unselected"
                    }
                    .into(),
                })
                .collect();
            (ids.clone(), choices)
        }
    };
    let flags: Vec<bool> = (0..segments.len())
        .map(|id| selected.contains(&id))
        .collect();

    let winner = search_grid(model, &weighted_features, &flags, &config);
    let plan = TransformPlan {
        dynamic_offset: winner.delta,
        articulation_scale: winner.alpha,
        tempo_scale: winner.tau,
        target_segments: selected,
    };

    let identity = TransformPlan::identity(plan.target_segments.clone());
    let objective_identity = objective_with_flags(
        model,
        &weighted_features,
        &identity,
        &flags,
        config.target,
        config.eta,
    );
    // the identity action is always in the grid
    debug_assert!(winner.objective >= objective_identity);

    let (output, clamp_saturations) = apply_plan(score, &plan);
    debug_assert!(validate_score(&output).is_empty());

    let predicted_before = weighted_prediction(model, &weighted_features, &identity, &flags);
    let predicted_after = weighted_prediction(model, &weighted_features, &plan, &flags);

    let report = GenerationReport {
        target: config.target,
        mode: model.mode,
        eta: config.eta,
        plan,
        objective: winner.objective,
        objective_identity,
        predicted_before,
        predicted_after,
        segments: choices,
        clamp_saturations,
    };
    Ok((output, report))
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    objective: f64,
    /// Grid indices in tie-break order: dynamics, tempo, articulation.
    key: [usize; 9],
    delta: [i32; 4],
    alpha: [f64; 4],
    tau: f64,
}

fn better(a: Candidate, b: Candidate) -> Candidate {
    if a.objective > b.objective || (a.objective == b.objective && a.key < b.key) {
        a
    } else {
        b
    }
}

fn search_grid(
    model: &RegressionModel,
    segments: &[(FeatureVector, f64)],
    flags: &[bool],
    config: &GenerationConfig,
) -> Candidate {
    let d = &config.delta_grid;
    let a = &config.alpha_grid;
    let t = &config.tau_grid;

    // outer product over the four dynamic offsets, parallelized; the inner
    // loops cover tempo and articulation
    let dn = d.len();
    let outer: Vec<[usize; 4]> = (0..dn * dn * dn * dn)
        .map(|i| [i / (dn * dn * dn), i / (dn * dn) % dn, i / dn % dn, i % dn])
        .collect();

    outer
        .par_iter()
        .map(|&delta_index| {
            let delta = [
                d[delta_index[0]],
                d[delta_index[1]],
                d[delta_index[2]],
                d[delta_index[3]],
            ];
            let mut local: Option<Candidate> = None;
            let mut plan = TransformPlan {
                dynamic_offset: delta,
                articulation_scale: [1.0; 4],
                tempo_scale: 1.0,
                target_segments: BTreeSet::new(),
            };
            for (ti, &tau) in t.iter().enumerate() {
                plan.tempo_scale = tau;
                for (a0, &alpha0) in a.iter().enumerate() {
                    for (a1, &alpha1) in a.iter().enumerate() {
                        for (a2, &alpha2) in a.iter().enumerate() {
                            for (a3, &alpha3) in a.iter().enumerate() {
                                plan.articulation_scale = [alpha0, alpha1, alpha2, alpha3];
                                let objective = objective_with_flags(
                                    model,
                                    segments,
                                    &plan,
                                    flags,
                                    config.target,
                                    config.eta,
                                );
                                let candidate = Candidate {
                                    objective,
                                    key: [
                                        delta_index[0],
                                        delta_index[1],
                                        delta_index[2],
                                        delta_index[3],
                                        ti,
                                        a0,
                                        a1,
                                        a2,
                                        a3,
                                    ],
                                    delta,
                                    alpha: plan.articulation_scale,
                                    tau,
                                };
                                local = Some(match local {
                                    Some(best) => better(best, candidate),
                                    None => candidate,
                                });
                            }
                        }
                    }
                }
            }
            local.expect("grids are non-empty")
        })
        .reduce_with(better)
        .expect("grids are non-empty")
}

fn weighted_prediction(
    model: &RegressionModel,
    segments: &[(FeatureVector, f64)],
    plan: &TransformPlan,
    flags: &[bool],
) -> EmotionVector {
    let mut sums = [0.0f64; EMOTION_COUNT];
    let mut total = 0.0f64;
    for ((features, weight), &selected) in segments.iter().zip(flags) {
        let transformed = transform_features(features, plan, selected);
        let predicted = match model.mode {
            TrainingMode::Absolute => model.predict(&transformed),
            TrainingMode::Delta => {
                let mut delta = [0.0f64; FEATURE_COUNT];
                for j in 0..FEATURE_COUNT {
                    delta[j] = transformed.0[j] - features.0[j];
                }
                model.predict(&FeatureVector(delta))
            }
        };
        for e in 0..EMOTION_COUNT {
            sums[e] += weight * predicted.0[e];
        }
        total += weight;
    }
    EmotionVector(sums.map(|s| s / total))
}

// ---------------------------------------------------------------------------
// report file
// ---------------------------------------------------------------------------

pub fn write_report(report: &GenerationReport) -> Vec<u8> {
    let group_suffix = ["strings", "woodwinds", "brass", "percussion"];
    let mut plan_entries = Vec::new();
    for (g, suffix) in group_suffix.iter().enumerate() {
        plan_entries.push((
            format!("delta_{suffix}"),
            Value::Int(i64::from(report.plan.dynamic_offset[g])),
        ));
        plan_entries.push((
            format!("alpha_{suffix}"),
            Value::Real(report.plan.articulation_scale[g]),
        ));
    }
    plan_entries.push(("tau".to_string(), Value::Real(report.plan.tempo_scale)));
    plan_entries.push((
        "targets".to_string(),
        Value::List(
            report
                .plan
                .target_segments
                .iter()
                .map(|&id| Value::Int(id as i64))
                .collect(),
        ),
    ));

    let segments = report
        .segments
        .iter()
        .map(|c| {
            Value::map(vec![
                ("id", Value::Int(c.segment_id as i64)),
                ("selected", Value::bool(c.selected)),
                ("rationale", Value::Str(c.rationale.clone())),
            ])
        })
        .collect();

    let body = Value::map(vec![
        ("target", Value::sym(report.target.name())),
        ("mode", Value::sym(report.mode.name())),
        ("eta", Value::Real(report.eta)),
        ("objective", Value::Real(report.objective)),
        ("objective_identity", Value::Real(report.objective_identity)),
        (
            "clamp_saturations",
            Value::Int(report.clamp_saturations as i64),
        ),
        (
            "predicted_before",
            Value::List(
                report
                    .predicted_before
                    .0
                    .iter()
                    .map(|&x| Value::Real(x))
                    .collect(),
            ),
        ),
        (
            "predicted_after",
            Value::List(
                report
                    .predicted_after
                    .0
                    .iter()
                    .map(|&x| Value::Real(x))
                    .collect(),
            ),
        ),
        ("plan", Value::Map(plan_entries)),
        ("segments", Value::List(segments)),
    ]);
    canon::write_document(REPORT_VERSION, &body).into_bytes()
}

pub fn parse_report(bytes: &[u8]) -> Result<GenerationReport, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Syntax {
        line: 1,
        col: 1,
        message: format!("not UTF-8: {e}"),
    })?;
    let body = canon::parse_document(text, REPORT_VERSION)?;
    let mut view = MapView::new(&body, "")?;

    let target_name = as_sym(view.required("target")?, "target")?;
    let target = Emotion::from_name(target_name)
        .ok_or_else(|| FormatError::schema("target", format!("unknown emotion `{target_name}`")))?;
    let mode_name = as_sym(view.required("mode")?, "mode")?;
    let mode = TrainingMode::from_name(mode_name)
        .ok_or_else(|| FormatError::schema("mode", format!("unknown mode `{mode_name}`")))?;
    let eta = as_real(view.required("eta")?, "eta")?;
    let objective = as_real(view.required("objective")?, "objective")?;
    let objective_identity = as_real(view.required("objective_identity")?, "objective_identity")?;
    let clamp_saturations = as_usize(view.required("clamp_saturations")?, "clamp_saturations")?;
    let predicted_before = EmotionVector(fixed_reals(
        view.required("predicted_before")?,
        "predicted_before",
    )?);
    let predicted_after = EmotionVector(fixed_reals(
        view.required("predicted_after")?,
        "predicted_after",
    )?);

    let mut plan_view = MapView::new(view.required("plan")?, "plan")?;
    let group_suffix = ["strings", "woodwinds", "brass", "percussion"];
    let mut dynamic_offset = [0i32; 4];
    let mut articulation_scale = [1.0f64; 4];
    for (g, suffix) in group_suffix.iter().enumerate() {
        dynamic_offset[g] = as_int(plan_view.required(&format!("delta_{suffix}"))?, "plan")? as i32;
        articulation_scale[g] = as_real(plan_view.required(&format!("alpha_{suffix}"))?, "plan")?;
    }
    let tempo_scale = as_real(plan_view.required("tau")?, "plan.tau")?;
    let target_segments: BTreeSet<usize> = as_list(plan_view.required("targets")?, "plan.targets")?
        .iter()
        .map(|v| as_usize(v, "plan.targets"))
        .collect::<Result<_, _>>()?;
    plan_view.finish()?;

    let segments = as_list(view.required("segments")?, "segments")?
        .iter()
        .map(|v| {
            let mut view = MapView::new(v, "segments")?;
            let segment_id = as_usize(view.required("id")?, "segments.id")?;
            let selected = as_bool(view.required("selected")?, "segments.selected")?;
            let rationale = as_str(view.required("rationale")?, "segments.rationale")?.to_string();
            view.finish()?;
            Ok(SegmentChoice {
                segment_id,
                selected,
                rationale,
            })
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    view.finish()?;

    Ok(GenerationReport {
        target,
        mode,
        eta,
        plan: TransformPlan {
            dynamic_offset,
            articulation_scale,
            tempo_scale,
            target_segments,
        },
        objective,
        objective_identity,
        predicted_before,
        predicted_after,
        segments,
        clamp_saturations,
    })
}

fn fixed_reals(value: &Value, field: &str) -> Result<[f64; EMOTION_COUNT], FormatError> {
    let items = as_list(value, field)?;
    if items.len() != EMOTION_COUNT {
        return Err(FormatError::schema(
            field,
            format!("expected {EMOTION_COUNT} reals"),
        ));
    }
    let mut out = [0.0f64; EMOTION_COUNT];
    for (i, item) in items.iter().enumerate() {
        out[i] = as_real(item, field)?;
    }
    Ok(out)
}
