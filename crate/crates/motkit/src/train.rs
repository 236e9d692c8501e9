//! Training of the motion predictor: sliding-window segmentation of
//! ground-truth trajectories, masked-token augmentation, the mean-L1
//! objective over the four box attributes, and an Adam loop that is
//! bit-reproducible for a fixed seed.

use crate::embedding::{HistoricalTrajectory, Slot};
use crate::geometry::BBox;
use crate::model::{bind_model, forward_on_tape, ModelError, ModelParams};
use crate::mot::MotRecord;
use crate::optim::{adam_step, clip_global_norm, AdamConfig, AdamState};
use crate::tensor::{Tape, TensorError, TensorId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training segments (trajectories shorter than T+1?)")]
    NoSegments,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// A window of T+1 consecutive same-identity boxes: T history + 1 target.
#[derive(Debug, Clone)]
pub struct TrajectorySegment {
    pub track_id: i64,
    pub history: Vec<BBox>,
    pub target: BBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub mask_prob: f64,
    pub seed: u64,
    /// Optional global-norm gradient clip; off by default.
    pub clip_norm: Option<f64>,
}

impl TrainConfig {
    /// Paper-scale defaults.
    pub fn paper() -> Self {
        Self { lr: 1e-4, epochs: 50, batch_size: 512, mask_prob: 0.1, seed: 0, clip_norm: None }
    }

    /// CI-scale defaults.
    pub fn toy() -> Self {
        Self { lr: 1e-3, epochs: 12, batch_size: 64, mask_prob: 0.1, seed: 0, clip_norm: None }
    }
}

/// Sliding windows of length T+1 with stride 1 over runs of consecutive
/// frames of each identity. A run of length L yields max(0, L - T) segments.
pub fn segment_trajectories(records: &[MotRecord], t: usize) -> Vec<TrajectorySegment> {
    let mut by_id: BTreeMap<i64, Vec<(u32, BBox)>> = BTreeMap::new();
    for r in records {
        if r.id > 0 {
            by_id.entry(r.id).or_default().push((r.frame, r.bbox));
        }
    }
    let mut segments = Vec::new();
    for (id, mut frames) in by_id {
        frames.sort_by_key(|(f, _)| *f);
        frames.dedup_by_key(|(f, _)| *f);
        // split into consecutive-frame runs
        let mut run: Vec<BBox> = Vec::new();
        let mut prev_frame: Option<u32> = None;
        let mut flush = |run: &mut Vec<BBox>| {
            if run.len() > t {
                for w in run.windows(t + 1) {
                    segments.push(TrajectorySegment {
                        track_id: id,
                        history: w[..t].to_vec(),
                        target: w[t],
                    });
                }
            }
            run.clear();
        };
        for (frame, bbox) in frames {
            if let Some(p) = prev_frame {
                if frame != p + 1 {
                    flush(&mut run);
                }
            }
            run.push(bbox);
            prev_frame = Some(frame);
        }
        flush(&mut run);
    }
    segments
}

/// Independently mask each history slot with probability `p`. If everything
/// got masked, the most recent slot is restored so at least one observation
/// survives. The target is never touched.
pub fn apply_mask_augmentation(
    seg: &TrajectorySegment,
    p: f64,
    rng: &mut ChaCha8Rng,
) -> HistoricalTrajectory {
    let mut slots: Vec<Slot> = seg
        .history
        .iter()
        .map(|b| if rng.random::<f64>() < p { Slot::Mask } else { Slot::Box(*b) })
        .collect();
    if slots.iter().all(|s| matches!(s, Slot::Mask)) {
        let last = slots.len() - 1;
        slots[last] = Slot::Box(seg.history[last]);
    }
    HistoricalTrajectory::new(slots)
}

/// Mean absolute difference over the four attributes, on the tape.
pub fn l1_loss(tape: &mut Tape, pred: TensorId, gt: &BBox) -> Result<TensorId, TensorError> {
    let target = tape.leaf(gt.values().to_vec(), vec![1, 4], false)?;
    let diff = tape.sub(pred, target)?;
    let absd = tape.abs(diff)?;
    tape.mean(absd)
}

/// Plain-scalar twin of `l1_loss`, used for validation.
pub fn l1_loss_scalar(pred: &BBox, gt: &BBox) -> f64 {
    crate::geometry::l1_box_distance(pred, gt) / 4.0
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub trace: Vec<EpochStats>,
}

/// Split segments into train/validation by trajectory identity (not by
/// window) so overlapping windows never leak across the split. Every tenth
/// identity goes to validation.
pub fn split_by_identity(
    segments: Vec<TrajectorySegment>,
) -> (Vec<TrajectorySegment>, Vec<TrajectorySegment>) {
    let mut ids: Vec<i64> = segments.iter().map(|s| s.track_id).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() < 2 {
        return (segments, Vec::new());
    }
    let val_ids: Vec<i64> = ids.iter().copied().step_by(10).collect();
    let (val, train): (Vec<_>, Vec<_>) =
        segments.into_iter().partition(|s| val_ids.contains(&s.track_id));
    (train, val)
}

/// Mean validation loss with un-masked histories.
pub fn validation_loss(
    segments: &[TrajectorySegment],
    params: &ModelParams,
) -> Result<Option<f64>, ModelError> {
    if segments.is_empty() {
        return Ok(None);
    }
    let mut total = 0.0;
    for seg in segments {
        let h = HistoricalTrajectory::new(seg.history.iter().map(|b| Slot::Box(*b)).collect());
        let pred = crate::model::predict_box(&h, params)?;
        total += l1_loss_scalar(&pred, &seg.target);
    }
    Ok(Some(total / segments.len() as f64))
}

/// Train in place: epochs of shuffled mini-batches, masks resampled per
/// epoch, one tape per step, mean-over-batch L1 loss, Adam updates.
pub fn train(
    train_segments: &[TrajectorySegment],
    val_segments: &[TrajectorySegment],
    params: &mut ModelParams,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    if train_segments.is_empty() {
        return Err(TrainError::NoSegments);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut states: Vec<AdamState> = {
        let mut lens = Vec::new();
        params.visit(|p| lens.push(p.data.len()));
        lens.into_iter().map(AdamState::new).collect()
    };

    let mut order: Vec<usize> = (0..train_segments.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let mut tape = Tape::new();
            let bound = bind_model(&mut tape, params, true)?;
            let mut item_losses = Vec::with_capacity(chunk.len());
            for &seg_idx in chunk {
                let seg = &train_segments[seg_idx];
                let h = apply_mask_augmentation(seg, cfg.mask_prob, &mut rng);
                let pred = forward_on_tape(&mut tape, &h, &bound, &params.config)?;
                item_losses.push(l1_loss(&mut tape, pred, &seg.target)?);
            }
            let loss = if item_losses.len() == 1 {
                item_losses[0]
            } else {
                let stacked = tape.concat(1, &item_losses)?;
                tape.mean(stacked)?
            };
            let loss_value = tape.value(loss)[0];
            if !loss_value.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: batch_idx });
            }
            epoch_loss += loss_value * chunk.len() as f64;
            seen += chunk.len();

            if cfg.lr > 0.0 {
                tape.backward(loss)?;
                let ids = bound.ids();
                let mut grads: Vec<Vec<f64>> = ids
                    .iter()
                    .map(|id| {
                        tape.grad(*id)
                            .map(|g| g.to_vec())
                            .unwrap_or_else(|| vec![0.0; tape.value(*id).len()])
                    })
                    .collect();
                if let Some(max_norm) = cfg.clip_norm {
                    let mut refs: Vec<&mut Vec<f64>> = grads.iter_mut().collect();
                    clip_global_norm(&mut refs, max_norm);
                }
                for ((slot, grad), state) in
                    params.visit_mut().into_iter().zip(&grads).zip(&mut states)
                {
                    let (_, data) = slot;
                    adam_step(data, grad, state, &adam);
                }
            }
        }
        let train_loss = epoch_loss / seen as f64;
        let val_loss = validation_loss(val_segments, params)?;
        trace.push(EpochStats { epoch, train_loss, val_loss });
    }
    Ok(TrainOutcome { trace })
}

/// Render the loss trace as `epoch,mean_loss,val_loss` CSV.
pub fn trace_to_csv(trace: &[EpochStats]) -> String {
    let mut out = String::from("epoch,mean_loss,val_loss\n");
    for e in trace {
        let val = e.val_loss.map(|v| format!("{v:.9}")).unwrap_or_default();
        out.push_str(&format!("{},{:.9},{}\n", e.epoch, e.train_loss, val));
    }
    out
}
