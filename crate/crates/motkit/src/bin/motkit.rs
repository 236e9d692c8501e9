use clap::{Parser, Subcommand};
use motkit::cli::{
    cmd_eval, cmd_sweep, cmd_synth, cmd_track, cmd_train, CliError, SweepAxis, TrackOptions,
};
use motkit::config::PredictorKind;
use std::path::PathBuf;
use std::process::ExitCode;

/// Tracking-by-detection toolkit: synthetic scenarios, motion-predictor
/// training, tracking, and CLEAR-MOT/IDF1 evaluation.
#[derive(Parser)]
#[command(name = "motkit", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate gt.txt/det.txt for a scenario file.
    Synth {
        /// Scenario description (key = value lines).
        scenario: PathBuf,
        /// Output sequence directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the motion predictor on ground-truth tracks.
    Train {
        /// Sequence directory (gt.txt), gt file, or directory of sequences.
        gt: PathBuf,
        /// Profile name (paper | toy) or config file path.
        #[arg(long, default_value = "toy")]
        profile: String,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        /// Also write the per-epoch loss trace as CSV.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Track a detection sequence and write a MOT results file.
    Track {
        /// Sequence directory (det.txt) or detection file.
        det: PathBuf,
        /// Model checkpoint (required for the transformer predictor).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "toy")]
        profile: String,
        /// Results file to write.
        #[arg(long)]
        out: PathBuf,
        /// Override the profile predictor (kalman | transformer).
        #[arg(long)]
        predictor: Option<String>,
        /// Association cost profile (iou | iou_l1 | iou_dtheta | iou_l1_dtheta).
        #[arg(long)]
        cost_profile: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score tracking results against ground truth.
    Eval {
        /// Sequence directory (gt.txt), gt file, or directory of sequences.
        gt: PathBuf,
        /// Results file, or directory holding <sequence>.txt files.
        results: PathBuf,
        /// Report path; a CSV twin is written beside it.
        #[arg(long)]
        out: PathBuf,
        /// IoU gate for gt/hypothesis correspondence.
        #[arg(long, default_value_t = 0.5)]
        match_iou: f64,
    },
    /// Train/track/eval across one swept axis; emits per-value reports and a
    /// summary CSV.
    Sweep {
        /// Scenario description file to generate data from.
        scenario: PathBuf,
        /// Axis: T | p | cost | iou_threshold.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. 5,10,20,30.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "toy")]
        profile: String,
        /// Output directory for reports and summary.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Synth { scenario, out, seed } => cmd_synth(&scenario, &out, seed),
        Cmd::Train { gt, profile, out, loss_csv, seed } => {
            cmd_train(&gt, &profile, &out, loss_csv.as_deref(), seed)
        }
        Cmd::Track { det, checkpoint, profile, out, predictor, cost_profile, seed } => {
            let predictor = match predictor.as_deref() {
                None => None,
                Some(name) => Some(PredictorKind::parse(name).ok_or_else(|| {
                    CliError::Usage(format!("unknown predictor '{name}'"))
                })?),
            };
            cmd_track(
                &det,
                checkpoint.as_deref(),
                &profile,
                &out,
                TrackOptions { predictor, cost_profile: cost_profile.as_deref(), seed },
            )
        }
        Cmd::Eval { gt, results, out, match_iou } => {
            cmd_eval(&gt, &results, &out, match_iou).map(|_| ())
        }
        Cmd::Sweep { scenario, axis, values, profile, out, seed } => {
            let axis = SweepAxis::parse(&axis)
                .ok_or_else(|| CliError::Usage(format!("unknown axis '{axis}'")))?;
            let values: Vec<String> =
                values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            cmd_sweep(&scenario, axis, &values, &profile, &out, seed)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes, anything else is usage
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
