//! One function per subcommand. Payload goes to stdout; warnings and
//! progress go to stderr.

use clap::Args;
use serde_json::{json, Value as Json};

use maestro_core::diff as diffmod;
use maestro_core::generate as genmod;
use maestro_core::io;
use maestro_core::playability as playmod;
use maestro_core::regression as regmod;
use maestro_core::score::Score;
use maestro_core::segment::{featurize as featurize_segment, segment_score, FEATURE_NAMES};
use maestro_core::survey as surveymod;
use maestro_core::survey::Emotion;

use crate::{CliError, Context};

// ---------------------------------------------------------------------------
// argument types
// ---------------------------------------------------------------------------

#[derive(Args)]
pub struct ScoreArg {
    /// Canonical score file (.ms1).
    #[arg(long, value_name = "FILE")]
    pub score: String,
}

#[derive(Args)]
pub struct ImportArgs {
    /// MusicXML document (partwise).
    #[arg(long, value_name = "FILE")]
    pub input: String,
    /// Canonical score to write.
    #[arg(long, value_name = "FILE")]
    pub out: String,
}

#[derive(Args)]
pub struct ExportMidiArgs {
    #[arg(long, value_name = "FILE")]
    pub score: String,
    /// Standard MIDI File to write.
    #[arg(long, value_name = "FILE")]
    pub out: String,
}

#[derive(Args)]
pub struct DiffArgs {
    #[arg(long, value_name = "FILE")]
    pub original: String,
    #[arg(long, value_name = "FILE")]
    pub interpretation: String,
    /// Delta set to write (.md1).
    #[arg(long, value_name = "FILE")]
    pub out: String,
}

#[derive(Args)]
pub struct ApplyDeltaArgs {
    #[arg(long, value_name = "FILE")]
    pub score: String,
    #[arg(long, value_name = "FILE")]
    pub delta: String,
    #[arg(long, value_name = "FILE")]
    pub out: String,
}

#[derive(Args)]
pub struct SurveyArgs {
    /// Ratings CSV with header participant_id,segment_id,emotion,rating.
    #[arg(long, value_name = "FILE")]
    pub ratings: String,
    /// Write the maestro-ratings/1 document here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<String>,
}

#[derive(Args)]
pub struct BuildDatasetArgs {
    /// Absolute mode: score file, paired positionally with --ratings.
    #[arg(long, value_name = "FILE")]
    pub score: Vec<String>,
    /// Absolute mode: ratings CSV for the matching --score.
    #[arg(long, value_name = "FILE")]
    pub ratings: Vec<String>,
    /// Delta mode: ORIGINAL,INTERPRETATION,ORIGINAL_CSV,INTERPRETATION_CSV.
    #[arg(long, value_name = "SPEC")]
    pub pair: Vec<String>,
    /// Dataset to write (.mds1).
    #[arg(long, value_name = "FILE")]
    pub out: String,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset file (.mds1).
    #[arg(long, value_name = "FILE")]
    pub dataset: String,
    /// Model to write (.mm1).
    #[arg(long, value_name = "FILE")]
    pub out: String,
    /// Ridge coefficient; overrides the config file.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Hold out every K-th row and report its mean absolute error.
    #[arg(long, value_name = "K")]
    pub holdout_every: Option<usize>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long, value_name = "FILE")]
    pub model: String,
    #[arg(long, value_name = "FILE")]
    pub score: String,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[arg(long, value_name = "FILE")]
    pub score: String,
    #[arg(long, value_name = "FILE")]
    pub model: String,
    /// Target emotion: joy, sadness, anticipation, surprise, anger,
    /// calmness, fear, or confidence.
    #[arg(long, value_name = "EMOTION")]
    pub target: String,
    /// Generated interpretation to write (.ms1).
    #[arg(long, value_name = "FILE")]
    pub out: String,
    /// Generation report to write (.mr1).
    #[arg(long, value_name = "FILE")]
    pub report: Option<String>,
    /// Deviation penalty weight; overrides the config file.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Segment selection: `auto`, `all`, or comma-separated ids.
    #[arg(long, default_value = "auto", value_name = "SEL")]
    pub segments: String,
    /// Delta dataset steering segment selection toward adapted passages.
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<String>,
}

// ---------------------------------------------------------------------------
// small helpers
// ---------------------------------------------------------------------------

fn read_bytes(path: &str) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Input(format!("cannot read `{path}`: {e}")))
}

fn write_bytes(path: &str, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Input(format!("cannot write `{path}`: {e}")))
}

fn load_score(path: &str) -> Result<Score, CliError> {
    io::parse_canonical(&read_bytes(path)?).map_err(|e| CliError::Input(format!("`{path}`: {e}")))
}

fn load_model(path: &str) -> Result<regmod::RegressionModel, CliError> {
    regmod::load_model(&read_bytes(path)?).map_err(|e| CliError::Input(format!("`{path}`: {e}")))
}

fn load_ratings(path: &str) -> Result<Vec<surveymod::RatingRow>, CliError> {
    surveymod::parse_ratings_csv(&read_bytes(path)?)
        .map_err(|e| CliError::Input(format!("`{path}`: {e}")))
}

fn parse_target(name: &str) -> Result<Emotion, CliError> {
    Emotion::from_name(name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown emotion `{name}`; expected one of {}",
            Emotion::ALL.map(|e| e.name()).join(", ")
        ))
    })
}

fn emit_json(payload: &Json) {
    println!("{payload}");
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

pub fn import_musicxml(ctx: &Context, args: ImportArgs) -> Result<(), CliError> {
    let (score, warnings) = io::import_musicxml(&read_bytes(&args.input)?)
        .map_err(|e| CliError::Input(format!("`{}`: {e}", args.input)))?;
    let bytes = io::write_canonical(&score).map_err(|e| CliError::Internal(e.to_string()))?;
    write_bytes(&args.out, &bytes)?;
    for warning in &warnings {
        eprintln!("warning: {} x{}", warning.category, warning.count);
    }
    if ctx.json {
        emit_json(&json!({
            "out": args.out,
            "parts": score.parts.len(),
            "measures": score.measure_count(),
            "warnings": warnings.iter().map(|w| json!({"category": w.category, "count": w.count})).collect::<Vec<_>>(),
        }));
    } else if ctx.verbose {
        eprintln!(
            "imported {} parts, {} measures -> {}",
            score.parts.len(),
            score.measure_count(),
            args.out
        );
    }
    Ok(())
}

pub fn export_midi(ctx: &Context, args: ExportMidiArgs) -> Result<(), CliError> {
    let score = load_score(&args.score)?;
    let smf = io::export_midi(&score).map_err(|e| CliError::Domain(e.to_string()))?;
    write_bytes(&args.out, smf.as_bytes())?;
    if ctx.json {
        emit_json(&json!({"out": args.out, "bytes": smf.as_bytes().len()}));
    }
    Ok(())
}

pub fn validate(ctx: &Context, args: ScoreArg) -> Result<(), CliError> {
    // the lenient parse reports every structural problem, not just the first
    let bytes = read_bytes(&args.score)?;
    let (_, errors) = io::parse_canonical_lenient(&bytes)
        .map_err(|e| CliError::Input(format!("`{}`: {e}", args.score)))?;
    if ctx.json {
        emit_json(&json!(errors
            .iter()
            .map(|e| json!({
                "code": e.code.name(),
                "part": e.part_id,
                "measure": e.measure_index,
                "detail": e.detail,
            }))
            .collect::<Vec<_>>()));
    } else {
        for error in &errors {
            println!("{error}");
        }
    }
    if errors.is_empty() {
        if !ctx.json {
            println!("ok");
        }
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "{} structural errors",
            errors.len()
        )))
    }
}

pub fn diff(ctx: &Context, args: DiffArgs) -> Result<(), CliError> {
    let original = load_score(&args.original)?;
    let interpretation = load_score(&args.interpretation)?;
    let deltas = diffmod::diff_scores(&original, &interpretation)
        .map_err(|e| CliError::Domain(e.to_string()))?;
    write_bytes(&args.out, &diffmod::write_delta(&deltas))?;
    if ctx.json {
        emit_json(&json!({
            "out": args.out,
            "records": deltas.records.len(),
            "structural": deltas.structural_count(),
        }));
    } else if ctx.verbose {
        eprintln!(
            "{} records ({} structural) -> {}",
            deltas.records.len(),
            deltas.structural_count(),
            args.out
        );
    }
    Ok(())
}

pub fn apply_delta(ctx: &Context, args: ApplyDeltaArgs) -> Result<(), CliError> {
    let score = load_score(&args.score)?;
    let deltas = diffmod::parse_delta(&read_bytes(&args.delta)?)
        .map_err(|e| CliError::Input(format!("`{}`: {e}", args.delta)))?;
    let result =
        diffmod::apply_delta(&score, &deltas).map_err(|e| CliError::Domain(e.to_string()))?;
    let bytes = io::write_canonical(&result).map_err(|e| CliError::Internal(e.to_string()))?;
    write_bytes(&args.out, &bytes)?;
    if ctx.json {
        emit_json(&json!({"out": args.out}));
    }
    Ok(())
}

pub fn segment(ctx: &Context, args: ScoreArg) -> Result<(), CliError> {
    let score = load_score(&args.score)?;
    let segments = segment_score(&score);
    if ctx.json {
        emit_json(&json!(segments
            .iter()
            .map(|s| json!({
                "id": s.id,
                "movement": s.movement_index,
                "start_measure": s.start_measure,
                "end_measure": s.end_measure,
                "active_groups": s.active_groups.iter().map(|g| g.name()).collect::<Vec<_>>(),
            }))
            .collect::<Vec<_>>()));
    } else {
        for s in &segments {
            let groups: Vec<&str> = s.active_groups.iter().map(|g| g.name()).collect();
            println!(
                "segment {}: movement {}, measures [{}, {}), groups {{{}}}",
                s.id,
                s.movement_index,
                s.start_measure,
                s.end_measure,
                groups.join(", ")
            );
        }
    }
    Ok(())
}

pub fn featurize(ctx: &Context, args: ScoreArg) -> Result<(), CliError> {
    let score = load_score(&args.score)?;
    let segments = segment_score(&score);
    if ctx.json {
        emit_json(&json!(segments
            .iter()
            .map(|s| {
                let features = featurize_segment(&score, s);
                json!({
                    "segment": s.id,
                    "features": FEATURE_NAMES
                        .iter()
                        .zip(features.0.iter())
                        .map(|(name, value)| json!({"name": name, "value": value}))
                        .collect::<Vec<_>>(),
                })
            })
            .collect::<Vec<_>>()));
    } else {
        // one line of 14 comma-separated decimals per segment, in id order
        for s in &segments {
            println!("{}", featurize_segment(&score, s).to_csv());
        }
    }
    Ok(())
}

pub fn survey_aggregate(ctx: &Context, args: SurveyArgs) -> Result<(), CliError> {
    let rows = load_ratings(&args.ratings)?;
    let aggregates =
        surveymod::aggregate_all(&rows).map_err(|e| CliError::Domain(e.to_string()))?;
    let document = surveymod::write_aggregates(&aggregates);
    match &args.out {
        Some(path) => write_bytes(path, &document)?,
        None => {
            if !ctx.json {
                print!("{}", String::from_utf8_lossy(&document));
            }
        }
    }
    if ctx.json {
        emit_json(&json!(aggregates
            .iter()
            .map(|a| json!({
                "segment": a.segment_id,
                "n_raters": a.n_raters,
                "majority": a.majority.name(),
                "mean": a.mean.0,
                "stddev": a.stddev,
            }))
            .collect::<Vec<_>>()));
    }
    Ok(())
}

pub fn build_dataset(ctx: &Context, args: BuildDatasetArgs) -> Result<(), CliError> {
    let absolute_mode = !args.score.is_empty();
    let delta_mode = !args.pair.is_empty();
    if absolute_mode == delta_mode {
        return Err(CliError::Usage(
            "use either --score/--ratings pairs (absolute) or --pair entries (delta), not both"
                .into(),
        ));
    }

    let ts = if absolute_mode {
        if args.score.len() != args.ratings.len() {
            return Err(CliError::Usage(format!(
                "{} --score flags but {} --ratings flags; they pair positionally",
                args.score.len(),
                args.ratings.len()
            )));
        }
        let mut rows = Vec::new();
        for (score_path, ratings_path) in args.score.iter().zip(&args.ratings) {
            let score = load_score(score_path)?;
            let ratings = load_ratings(ratings_path)?;
            let aggregates =
                surveymod::aggregate_all(&ratings).map_err(|e| CliError::Domain(e.to_string()))?;
            for segment in segment_score(&score) {
                let aggregate = aggregates
                    .iter()
                    .find(|a| a.segment_id == segment.id)
                    .ok_or_else(|| {
                        CliError::Domain(format!(
                            "`{ratings_path}` has no ratings for segment {} of `{score_path}`",
                            segment.id
                        ))
                    })?;
                rows.push(regmod::TrainingRow {
                    score_id: score.title.clone(),
                    segment_id: segment.id,
                    features: featurize_segment(&score, &segment).0,
                    targets: aggregate.mean.0,
                });
            }
        }
        regmod::TrainingSet {
            mode: regmod::TrainingMode::Absolute,
            rows,
        }
    } else {
        let mut scores = Vec::new();
        for spec in &args.pair {
            let fields: Vec<&str> = spec.split(',').collect();
            if fields.len() != 4 {
                return Err(CliError::Usage(format!(
                    "--pair expects ORIGINAL,INTERPRETATION,ORIGINAL_CSV,INTERPRETATION_CSV, got `{spec}`"
                )));
            }
            let original = load_score(fields[0])?;
            let interpretation = load_score(fields[1])?;
            let original_ratings = surveymod::aggregate_all(&load_ratings(fields[2])?)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            let interpretation_ratings = surveymod::aggregate_all(&load_ratings(fields[3])?)
                .map_err(|e| CliError::Domain(e.to_string()))?;
            scores.push((
                original,
                interpretation,
                original_ratings,
                interpretation_ratings,
            ));
        }
        let pairs: Vec<regmod::DeltaPair> = scores
            .iter()
            .map(|(o, i, or, ir)| regmod::DeltaPair {
                original: o,
                interpretation: i,
                original_ratings: or,
                interpretation_ratings: ir,
            })
            .collect();
        regmod::build_delta_dataset(&pairs).map_err(|e| CliError::Domain(e.to_string()))?
    };

    write_bytes(&args.out, &regmod::write_dataset(&ts))?;
    if ctx.json {
        emit_json(&json!({"out": args.out, "mode": ts.mode.name(), "rows": ts.rows.len()}));
    } else if ctx.verbose {
        eprintln!("{} {} rows -> {}", ts.rows.len(), ts.mode.name(), args.out);
    }
    Ok(())
}

pub fn train(ctx: &Context, args: TrainArgs) -> Result<(), CliError> {
    let ts = regmod::parse_dataset(&read_bytes(&args.dataset)?)
        .map_err(|e| CliError::Input(format!("`{}`: {e}", args.dataset)))?;
    let lambda = args.lambda.unwrap_or(ctx.defaults.lambda);

    let (fit_rows, holdout_rows): (Vec<_>, Vec<_>) = match args.holdout_every {
        None => (ts.rows.clone(), Vec::new()),
        Some(0) => return Err(CliError::Usage("--holdout-every must be at least 1".into())),
        Some(k) => {
            let held: Vec<_> = ts
                .rows
                .iter()
                .enumerate()
                .filter(|(i, _)| i % k == 0)
                .map(|(_, r)| r.clone())
                .collect();
            let kept: Vec<_> = ts
                .rows
                .iter()
                .enumerate()
                .filter(|(i, _)| i % k != 0)
                .map(|(_, r)| r.clone())
                .collect();
            (kept, held)
        }
    };
    if fit_rows.is_empty() {
        return Err(CliError::Domain("holdout left no rows to train on".into()));
    }

    let fit_set = regmod::TrainingSet {
        mode: ts.mode,
        rows: fit_rows,
    };
    let model = regmod::train(&fit_set, lambda).map_err(|e| CliError::Domain(e.to_string()))?;
    let bytes = regmod::save_model(&model).map_err(|e| CliError::Internal(e.to_string()))?;
    write_bytes(&args.out, &bytes)?;

    let mae =
        (!holdout_rows.is_empty()).then(|| regmod::mean_absolute_error(&model, &holdout_rows));
    if let Some(mae) = &mae {
        for (emotion, error) in Emotion::ALL.iter().zip(mae.iter()) {
            eprintln!("holdout MAE {}: {:.4}", emotion.name(), error);
        }
    }
    if ctx.json {
        emit_json(&json!({
            "out": args.out,
            "mode": model.mode.name(),
            "lambda": model.lambda,
            "rows": model.n_rows,
            "holdout_rows": holdout_rows.len(),
            "holdout_mae": mae.map(|m| {
                Emotion::ALL.iter().zip(m.iter()).map(|(e, v)| json!({"emotion": e.name(), "mae": v})).collect::<Vec<_>>()
            }),
        }));
    }
    Ok(())
}

pub fn predict(ctx: &Context, args: PredictArgs) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let score = load_score(&args.score)?;
    if model.mode == regmod::TrainingMode::Delta {
        eprintln!("warning: delta-mode model applied to absolute segment features");
    }
    let segments = segment_score(&score);
    let clamp = |x: f64| {
        // ratings live on [1, 10]; clamping happens only here, at presentation
        if model.mode == regmod::TrainingMode::Absolute {
            x.clamp(1.0, 10.0)
        } else {
            x
        }
    };

    let mut rows = Vec::new();
    for s in &segments {
        let predicted = model.predict(&featurize_segment(&score, s));
        rows.push((s.id, predicted.0.map(clamp)));
    }

    if ctx.json {
        emit_json(&json!(rows
            .iter()
            .map(|(id, values)| json!({
                "segment": id,
                "predicted": Emotion::ALL
                    .iter()
                    .zip(values.iter())
                    .map(|(e, v)| json!({"emotion": e.name(), "value": v}))
                    .collect::<Vec<_>>(),
            }))
            .collect::<Vec<_>>()));
    } else {
        let header: Vec<&str> = Emotion::ALL.iter().map(|e| e.name()).collect();
        println!("segment_id,{}", header.join(","));
        for (id, values) in &rows {
            let cells: Vec<String> = values
                .iter()
                .map(|&v| maestro_core::canon::format_real(v))
                .collect();
            println!("{id},{}", cells.join(","));
        }
    }
    Ok(())
}

pub fn generate(ctx: &Context, args: GenerateArgs) -> Result<(), CliError> {
    // argv problems are usage errors and precede any file access
    let target = parse_target(&args.target)?;
    let segment_selection = parse_selection(&args.segments)?;
    let score = load_score(&args.score)?;
    let model = load_model(&args.model)?;
    let corpus = match &args.corpus {
        None => None,
        Some(path) => Some(
            regmod::parse_dataset(&read_bytes(path)?)
                .map_err(|e| CliError::Input(format!("`{path}`: {e}")))?,
        ),
    };

    let config = genmod::GenerationConfig {
        target,
        eta: args.eta.unwrap_or(ctx.defaults.eta),
        delta_grid: ctx.defaults.delta_grid.clone(),
        alpha_grid: ctx.defaults.alpha_grid.clone(),
        tau_grid: ctx.defaults.tau_grid.clone(),
        segment_selection,
    };

    let (output, report) = genmod::generate(&score, &model, &config, corpus.as_ref())
        .map_err(|e| CliError::Domain(e.to_string()))?;
    let bytes = io::write_canonical(&output).map_err(|e| CliError::Internal(e.to_string()))?;
    write_bytes(&args.out, &bytes)?;
    if let Some(report_path) = &args.report {
        write_bytes(report_path, &genmod::write_report(&report))?;
    }

    if ctx.json {
        emit_json(&json!({
            "out": args.out,
            "report": args.report,
            "target": report.target.name(),
            "objective": report.objective,
            "objective_identity": report.objective_identity,
            "clamp_saturations": report.clamp_saturations,
            "plan": {
                "delta": report.plan.dynamic_offset,
                "alpha": report.plan.articulation_scale,
                "tau": report.plan.tempo_scale,
                "targets": report.plan.target_segments.iter().copied().collect::<Vec<_>>(),
            },
        }));
    } else if ctx.verbose {
        eprintln!(
            "objective {} (identity {}), {} clamp saturations -> {}",
            report.objective, report.objective_identity, report.clamp_saturations, args.out
        );
    }
    Ok(())
}

fn parse_selection(spec: &str) -> Result<genmod::SegmentSelection, CliError> {
    match spec {
        "auto" => Ok(genmod::SegmentSelection::Auto),
        "all" => Ok(genmod::SegmentSelection::All),
        other => {
            let ids = other
                .split(',')
                .map(|part| {
                    part.trim().parse::<usize>().map_err(|_| {
                        CliError::Usage(format!(
                            "--segments expects `auto`, `all`, or comma-separated ids, got `{other}`"
                        ))
                    })
                })
                .collect::<Result<std::collections::BTreeSet<usize>, _>>()?;
            Ok(genmod::SegmentSelection::Explicit(ids))
        }
    }
}

pub fn playability(ctx: &Context, args: ScoreArg) -> Result<(), CliError> {
    let score = load_score(&args.score)?;
    let violations = playmod::validate_playability_with(&score, &ctx.defaults.playability());
    if ctx.json {
        emit_json(&json!(violations
            .iter()
            .map(|v| json!({
                "code": v.code.name(),
                "part": v.part_id,
                "measure": v.measure_index,
                "onset": v.onset_ticks,
                "measured": v.measured,
                "limit": v.limit,
                "detail": v.detail,
            }))
            .collect::<Vec<_>>()));
    } else {
        print!("{}", playmod::violations_to_csv(&violations));
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(CliError::Domain(format!(
            "{} playability violations",
            violations.len()
        )))
    }
}
