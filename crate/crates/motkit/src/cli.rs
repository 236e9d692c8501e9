//! Command implementations behind the `motkit` binary: synth, train, track,
//! eval, and sweep. Every command is a function from input files to output
//! files plus an exit code: 0 success, 1 usage error, 2 data error,
//! 3 numeric failure.

use crate::checkpoint::{load_model, save_model, CheckpointError};
use crate::config::{ConfigError, ConfigProfile, PredictorKind};
use crate::metrics::{evaluate, reports_to_csv, reports_to_text, EvalReport};
use crate::model::ModelParams;
use crate::mot::{
    read_mot_file, read_seqinfo, write_mot_file, MotError, MotRecord,
};
use crate::synth::{emit_mot_files, generate, parse_scenario_file, SynthError};
use crate::tracker::{
    detections_by_frame, run_sequence, KalmanPredictor, MotionPredictor, TrackError,
    TransformerPredictor,
};
use crate::train::{segment_trajectories, split_by_identity, trace_to_csv, train, TrainError};
use crate::assoc::CostWeights;
use crate::geometry::ImageDims;
use std::fmt;
use std::path::{Path, PathBuf};

/// Errors carrying the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<MotError> for CliError {
    fn from(e: MotError) -> Self {
        match e {
            MotError::Io { .. } => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Mot(m) => m.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::UnknownProfile(_) | ConfigError::Io { .. } => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io(_) => CliError::Usage(format!("checkpoint: {e}")),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            TrainError::NoSegments => CliError::Data(e.to_string()),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

impl From<TrackError> for CliError {
    fn from(e: TrackError) -> Self {
        match e {
            TrackError::Predictor { .. } => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

/// A sequence on disk: its name, gt/det records, dims, and frame count.
struct Sequence {
    name: String,
    dims: ImageDims,
    n_frames: u32,
    gt: Option<Vec<MotRecord>>,
    dets: Option<Vec<MotRecord>>,
}

/// Accept either a sequence directory (containing gt.txt / det.txt) or a
/// bare file; directories of sequence subdirectories expand to many.
fn load_sequences(path: &Path, want_gt: bool) -> Result<Vec<Sequence>, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("{} does not exist", path.display())));
    }
    let target = if want_gt { "gt.txt" } else { "det.txt" };
    let mut out = Vec::new();
    if path.is_file() {
        let dir = path.parent().unwrap_or(Path::new("."));
        let (dims, seq_len) = read_seqinfo(dir);
        let records = read_mot_file(path, dims)?;
        let n_frames = seq_len
            .or(records.iter().map(|r| r.frame).max())
            .unwrap_or(0);
        let name = dir
            .file_name()
            .or(path.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sequence".into());
        out.push(Sequence {
            name,
            dims,
            n_frames,
            gt: want_gt.then_some(records.clone()),
            dets: (!want_gt).then_some(records),
        });
        return Ok(out);
    }
    if path.join(target).exists() {
        let (dims, seq_len) = read_seqinfo(path);
        let records = read_mot_file(&path.join(target), dims)?;
        let n_frames = seq_len
            .or(records.iter().map(|r| r.frame).max())
            .unwrap_or(0);
        let name = path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "sequence".into());
        out.push(Sequence {
            name,
            dims,
            n_frames,
            gt: want_gt.then_some(records.clone()),
            dets: (!want_gt).then_some(records),
        });
        return Ok(out);
    }
    // directory of sequence subdirectories
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join(target).exists())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(CliError::Usage(format!(
            "{} contains no {target} (directly or in subdirectories)",
            path.display()
        )));
    }
    for dir in subdirs {
        out.extend(load_sequences(&dir, want_gt)?);
    }
    Ok(out)
}

/// Generate a scenario's files into `out`.
pub fn cmd_synth(scenario: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    if !scenario.exists() {
        return Err(CliError::Usage(format!("scenario file {} not found", scenario.display())));
    }
    let mut s = parse_scenario_file(scenario)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let g = generate(&s)?;
    emit_mot_files(&g, out)?;
    println!(
        "wrote {} gt and {} det records for '{}' into {}",
        g.gt.len(),
        g.dets.len(),
        g.name,
        out.display()
    );
    Ok(())
}

/// Train a predictor on every gt sequence under `gt_path`.
pub fn cmd_train(
    gt_path: &Path,
    profile_arg: &str,
    out: &Path,
    loss_csv: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let mut profile = ConfigProfile::resolve(profile_arg)?;
    if let Some(seed) = seed {
        profile.train.seed = seed;
    }
    let sequences = load_sequences(gt_path, true)?;
    // identities must stay distinct across sequences
    let mut records = Vec::new();
    for (i, seq) in sequences.iter().enumerate() {
        let offset = (i as i64) * 1_000_000;
        for r in seq.gt.as_ref().expect("gt loaded") {
            let mut r = *r;
            r.id += offset;
            records.push(r);
        }
    }
    let segments = segment_trajectories(&records, profile.model.t);
    let (train_segs, val_segs) = split_by_identity(segments);
    println!(
        "training on {} segments ({} validation) from {} sequence(s)",
        train_segs.len(),
        val_segs.len(),
        sequences.len()
    );
    let mut params = ModelParams::init(profile.model, profile.train.seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let outcome = train(&train_segs, &val_segs, &mut params, &profile.train)?;
    for e in &outcome.trace {
        match e.val_loss {
            Some(v) => println!("epoch {:>3}  train {:.6}  val {:.6}", e.epoch, e.train_loss, v),
            None => println!("epoch {:>3}  train {:.6}", e.epoch, e.train_loss),
        }
    }
    save_model(out, &params)?;
    println!("checkpoint written to {}", out.display());
    if let Some(csv_path) = loss_csv {
        write_text(csv_path, &trace_to_csv(&outcome.trace))?;
    }
    Ok(())
}

pub struct TrackOptions<'s> {
    pub predictor: Option<PredictorKind>,
    pub cost_profile: Option<&'s str>,
    pub seed: Option<u64>,
}

/// Run the tracker over a detection sequence and write a results file.
pub fn cmd_track(
    det_path: &Path,
    checkpoint: Option<&Path>,
    profile_arg: &str,
    out: &Path,
    opts: TrackOptions<'_>,
) -> Result<(), CliError> {
    let mut profile = ConfigProfile::resolve(profile_arg)?;
    if let Some(kind) = opts.predictor {
        profile.predictor = kind;
    }
    if let Some(name) = opts.cost_profile {
        profile.assoc.weights = CostWeights::by_name(name)
            .ok_or_else(|| CliError::Usage(format!("unknown cost profile '{name}'")))?;
    }
    let sequences = load_sequences(det_path, false)?;
    if sequences.len() != 1 {
        return Err(CliError::Usage(format!(
            "track expects one detection sequence, found {}",
            sequences.len()
        )));
    }
    let seq = &sequences[0];

    let mut t = profile.model.t;
    let mut kalman;
    let mut transformer;
    let predictor: &mut dyn MotionPredictor = match profile.predictor {
        PredictorKind::Kalman => {
            kalman = KalmanPredictor::default();
            &mut kalman
        }
        PredictorKind::Transformer => {
            let path = checkpoint.ok_or_else(|| {
                CliError::Usage("transformer tracking needs --checkpoint <file>".into())
            })?;
            if !path.exists() {
                return Err(CliError::Usage(format!(
                    "checkpoint {} not found",
                    path.display()
                )));
            }
            let params = load_model(path)?;
            t = params.config.t;
            transformer = TransformerPredictor::new(params);
            &mut transformer
        }
    };

    let dets = detections_by_frame(seq.dets.as_ref().expect("dets loaded"));
    let results =
        run_sequence(&dets, seq.n_frames, predictor, profile.assoc, profile.lifecycle, t)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    write_mot_file(out, &results, seq.dims)?;
    println!(
        "tracked {} frames, {} output records, results in {}",
        seq.n_frames,
        results.len(),
        out.display()
    );
    Ok(())
}

/// Score results against ground truth; writes an aligned text report and a
/// CSV beside it.
pub fn cmd_eval(
    gt_path: &Path,
    results_path: &Path,
    out: &Path,
    match_iou: f64,
) -> Result<Vec<EvalReport>, CliError> {
    if !(0.0 < match_iou && match_iou < 1.0) {
        return Err(CliError::Usage(format!("--match-iou {match_iou} outside (0, 1)")));
    }
    let gt_sequences = load_sequences(gt_path, true)?;
    let mut reports = Vec::new();
    for seq in &gt_sequences {
        let results_file = if results_path.is_file() {
            results_path.to_path_buf()
        } else {
            let candidate = results_path.join(format!("{}.txt", seq.name));
            if candidate.exists() {
                candidate
            } else {
                return Err(CliError::Usage(format!(
                    "no results file for sequence '{}' under {}",
                    seq.name,
                    results_path.display()
                )));
            }
        };
        let hyp = read_mot_file(&results_file, seq.dims)?;
        let mut report = evaluate(seq.gt.as_ref().expect("gt loaded"), &hyp, match_iou);
        report.sequence = seq.name.clone();
        reports.push(report);
    }
    let text = reports_to_text(&reports);
    print!("{text}");
    write_text(out, &text)?;
    write_text(&out.with_extension("csv"), &reports_to_csv(&reports))?;
    Ok(reports)
}

/// Sweep axes: retrain per value where the axis touches training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    T,
    MaskProb,
    Cost,
    IouThreshold,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "T" | "t" => Some(Self::T),
            "p" | "mask_prob" => Some(Self::MaskProb),
            "cost" => Some(Self::Cost),
            "iou_threshold" => Some(Self::IouThreshold),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::T => "T",
            Self::MaskProb => "p",
            Self::Cost => "cost",
            Self::IouThreshold => "iou_threshold",
        }
    }
}

fn train_for_sweep(
    gt: &[MotRecord],
    profile: &ConfigProfile,
) -> Result<ModelParams, CliError> {
    let segments = segment_trajectories(gt, profile.model.t);
    let (train_segs, val_segs) = split_by_identity(segments);
    let mut params = ModelParams::init(profile.model, profile.train.seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    train(&train_segs, &val_segs, &mut params, &profile.train)?;
    Ok(params)
}

fn track_in_memory(
    dets: &[MotRecord],
    n_frames: u32,
    profile: &ConfigProfile,
    params: Option<&ModelParams>,
) -> Result<Vec<MotRecord>, CliError> {
    let grouped = detections_by_frame(dets);
    let mut kalman;
    let mut transformer;
    let mut t = profile.model.t;
    let predictor: &mut dyn MotionPredictor = match (profile.predictor, params) {
        (PredictorKind::Kalman, _) | (_, None) => {
            kalman = KalmanPredictor::default();
            &mut kalman
        }
        (PredictorKind::Transformer, Some(p)) => {
            t = p.config.t;
            transformer = TransformerPredictor::new(p.clone());
            &mut transformer
        }
    };
    Ok(run_sequence(&grouped, n_frames, predictor, profile.assoc, profile.lifecycle, t)?)
}

/// One evaluation per swept value plus a summary CSV.
pub fn cmd_sweep(
    scenario: &Path,
    axis: SweepAxis,
    values: &[String],
    profile_arg: &str,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    let base_profile = {
        let mut p = ConfigProfile::resolve(profile_arg)?;
        if let Some(seed) = seed {
            p.train.seed = seed;
        }
        p
    };
    let mut s = parse_scenario_file(scenario)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    let g = generate(&s)?;
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out_dir.display())))?;

    // axes that do not retrain share one model
    let shared_model = match (axis, base_profile.predictor) {
        (SweepAxis::Cost | SweepAxis::IouThreshold, PredictorKind::Transformer) => {
            Some(train_for_sweep(&g.gt, &base_profile)?)
        }
        _ => None,
    };

    let mut summary = String::from("axis,value,mota,idf1,idsw,fp,fn,gt\n");
    for value in values {
        let mut profile = base_profile.clone();
        let parse_num = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("bad sweep value '{v}'")))
        };
        match axis {
            SweepAxis::T => {
                profile.model.t = parse_num(value)? as usize;
                if profile.model.t == 0 {
                    return Err(CliError::Usage("T must be positive".into()));
                }
            }
            SweepAxis::MaskProb => {
                profile.train.mask_prob = parse_num(value)?;
                if !(0.0..1.0).contains(&profile.train.mask_prob) {
                    return Err(CliError::Usage(format!("p {} outside [0, 1)", value)));
                }
            }
            SweepAxis::Cost => {
                profile.assoc.weights = CostWeights::by_name(value).ok_or_else(|| {
                    CliError::Usage(format!("unknown cost profile '{value}'"))
                })?;
            }
            SweepAxis::IouThreshold => {
                profile.assoc.iou_threshold = parse_num(value)?;
                if !(0.0..1.0).contains(&profile.assoc.iou_threshold) {
                    return Err(CliError::Usage(format!(
                        "iou_threshold {} outside [0, 1)",
                        value
                    )));
                }
            }
        }
        let model = match (&shared_model, profile.predictor) {
            (_, PredictorKind::Kalman) => None,
            (Some(m), _) => Some(m.clone()),
            (None, PredictorKind::Transformer) => Some(train_for_sweep(&g.gt, &profile)?),
        };
        let results = track_in_memory(&g.dets, g.n_frames, &profile, model.as_ref())?;
        let mut report = evaluate(&g.gt, &results, 0.5);
        report.sequence = format!("{}={}", axis.name(), value);
        println!(
            "{} = {:>6}: IDF1 {:.4}  MOTA {:.4}  IDSW {}",
            axis.name(),
            value,
            report.idf1,
            report.mota,
            report.id_switches
        );
        let report_path = out_dir.join(format!("report_{}_{}.txt", axis.name(), value));
        write_text(&report_path, &reports_to_text(std::slice::from_ref(&report)))?;
        write_text(
            &report_path.with_extension("csv"),
            &reports_to_csv(std::slice::from_ref(&report)),
        )?;
        summary.push_str(&format!(
            "{},{},{:.6},{:.6},{},{},{},{}\n",
            axis.name(),
            value,
            report.mota,
            report.idf1,
            report.id_switches,
            report.fp,
            report.fn_count,
            report.gt_count
        ));
    }
    write_text(&out_dir.join("summary.csv"), &summary)?;
    println!("sweep summary in {}", out_dir.join("summary.csv").display());
    Ok(())
}
