//! Per-frame tracking loop: predict a box for every live track, associate
//! predictions with detections by gated Hungarian matching, update track
//! histories and lifecycle state, and emit the active tracks.

use crate::assoc::{
    build_cost, gate_and_assign, CostMatrix, CostWeights, MotionContext, DIRECTION_LOOKBACK,
};
use crate::embedding::{HistoricalTrajectory, Slot};
use crate::geometry::{iou, BBox};
use crate::kalman::{kf_init, kf_predict, kf_update, KalmanNoise, KalmanState};
use crate::model::{predict_box, ModelError, ModelParams};
use crate::mot::MotRecord;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("frame {got} is not after frame {last}")]
    OutOfOrderFrame { got: u32, last: u32 },
    #[error(transparent)]
    Assoc(#[from] crate::assoc::AssocError),
    #[error("predictor failed for track {id}: {msg}")]
    Predictor { id: u64, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Tentative,
    Active,
    Lost,
}

/// One tracked identity.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub state: TrackState,
    pub history: HistoricalTrajectory,
    pub hits: u32,
    pub misses: u32,
    pub last_prediction: Option<BBox>,
}

/// A detector output for one frame.
#[derive(Debug, Clone, Copy)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
}

/// What an unmatched track appends to its history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionHistory {
    /// Append a mask slot (mirrors the masked-token training augmentation).
    MaskSlot,
    /// Append the track's own prediction for the frame.
    Prediction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifecycleConfig {
    pub min_hits: u32,
    pub max_age: u32,
    pub confidence_gate: f64,
    pub occlusion_history: OcclusionHistory,
}

impl Default for LifecycleConfig {
    fn default() -> Self {
        Self {
            min_hits: 3,
            max_age: 30,
            confidence_gate: 0.4,
            occlusion_history: OcclusionHistory::MaskSlot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssocConfig {
    pub weights: CostWeights,
    pub iou_threshold: f64,
}

impl Default for AssocConfig {
    fn default() -> Self {
        Self { weights: CostWeights::iou_l1(), iou_threshold: 0.3 }
    }
}

/// Motion model interface shared by the Kalman baseline and the transformer
/// predictor; the pipeline drives it with lifecycle events.
pub trait MotionPredictor {
    /// Predicted box for the current frame, before seeing its detections.
    fn predict(&mut self, id: u64, history: &HistoricalTrajectory) -> Result<BBox, String>;
    fn track_born(&mut self, _id: u64, _b: &BBox) {}
    fn track_matched(&mut self, _id: u64, _b: &BBox) {}
    fn track_missed(&mut self, _id: u64) {}
    fn track_removed(&mut self, _id: u64) {}
}

/// Transformer predictor: stateless across frames, reads the history window.
pub struct TransformerPredictor {
    pub params: ModelParams,
}

impl TransformerPredictor {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }
}

impl MotionPredictor for TransformerPredictor {
    fn predict(&mut self, _id: u64, history: &HistoricalTrajectory) -> Result<BBox, String> {
        predict_box(history, &self.params).map_err(|e: ModelError| e.to_string())
    }
}

/// Constant-velocity Kalman baseline, one filter state per live track.
pub struct KalmanPredictor {
    noise: KalmanNoise,
    states: BTreeMap<u64, KalmanState>,
}

impl KalmanPredictor {
    pub fn new(noise: KalmanNoise) -> Self {
        Self { noise, states: BTreeMap::new() }
    }
}

impl Default for KalmanPredictor {
    fn default() -> Self {
        Self::new(KalmanNoise::default())
    }
}

impl MotionPredictor for KalmanPredictor {
    fn predict(&mut self, id: u64, history: &HistoricalTrajectory) -> Result<BBox, String> {
        let state = match self.states.get(&id) {
            Some(s) => s.clone(),
            None => {
                // tolerate a missing state (e.g. deserialized tracks)
                let b = history.most_recent_box().ok_or("empty history")?;
                kf_init(b, self.noise)
            }
        };
        let (next, pred) = kf_predict(&state);
        self.states.insert(id, next);
        Ok(pred)
    }

    fn track_born(&mut self, id: u64, b: &BBox) {
        self.states.insert(id, kf_init(b, self.noise));
    }

    fn track_matched(&mut self, id: u64, b: &BBox) {
        if let Some(state) = self.states.get(&id) {
            // a failed update leaves the predicted state in place
            if let Ok(updated) = kf_update(state, b) {
                self.states.insert(id, updated);
            }
        }
    }

    fn track_removed(&mut self, id: u64) {
        self.states.remove(&id);
    }
}

/// Track displacement over the direction lookback window, for the dtheta cost.
fn motion_context(track: &Track) -> MotionContext {
    let slots = track.history.slots();
    let latest = slots.iter().enumerate().rev().find_map(|(i, s)| match s {
        Slot::Box(b) => Some((i, *b)),
        Slot::Mask => None,
    });
    let Some((latest_idx, latest_box)) = latest else {
        return MotionContext { direction: None, last_center: (0.0, 0.0) };
    };
    let earlier = slots[..latest_idx]
        .iter()
        .enumerate()
        .rev()
        .filter(|(i, _)| latest_idx - i >= DIRECTION_LOOKBACK)
        .find_map(|(_, s)| match s {
            Slot::Box(b) => Some(*b),
            Slot::Mask => None,
        });
    MotionContext {
        direction: earlier.map(|e| (latest_box.cx - e.cx, latest_box.cy - e.cy)),
        last_center: (latest_box.cx, latest_box.cy),
    }
}

/// Tracker state across a sequence.
pub struct Tracker<'a> {
    predictor: &'a mut dyn MotionPredictor,
    assoc: AssocConfig,
    lifecycle: LifecycleConfig,
    t: usize,
    tracks: Vec<Track>,
    next_id: u64,
    last_frame: Option<u32>,
}

impl<'a> Tracker<'a> {
    pub fn new(
        predictor: &'a mut dyn MotionPredictor,
        assoc: AssocConfig,
        lifecycle: LifecycleConfig,
        t: usize,
    ) -> Self {
        Self { predictor, assoc, lifecycle, t, tracks: Vec::new(), next_id: 1, last_frame: None }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advance one frame. Detections must all belong to `frame`, and frames
    /// must be strictly increasing across calls.
    pub fn step(
        &mut self,
        frame: u32,
        detections: &[Detection],
    ) -> Result<Vec<MotRecord>, TrackError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackError::OutOfOrderFrame { got: frame, last });
            }
        }
        self.last_frame = Some(frame);

        let dets: Vec<Detection> = detections
            .iter()
            .filter(|d| d.confidence >= self.lifecycle.confidence_gate)
            .copied()
            .collect();

        // 1. predictions for every live track
        let mut preds = Vec::with_capacity(self.tracks.len());
        for track in &mut self.tracks {
            let pred = self
                .predictor
                .predict(track.id, &track.history)
                .map_err(|msg| TrackError::Predictor { id: track.id, msg })?;
            track.last_prediction = Some(pred);
            preds.push(pred);
        }

        // 2. gated optimal assignment
        let det_boxes: Vec<BBox> = dets.iter().map(|d| d.bbox).collect();
        let contexts: Vec<MotionContext> = self.tracks.iter().map(motion_context).collect();
        let cost = build_cost(&preds, &det_boxes, &contexts, &self.assoc.weights)?;
        let ious = CostMatrix::from_fn(preds.len(), det_boxes.len(), |i, j| {
            iou(&preds[i], &det_boxes[j])
        })?;
        let assignment = gate_and_assign(&cost, &ious, self.assoc.iou_threshold)?;

        // 3. matched tracks absorb their detection
        let mut outputs = Vec::new();
        for &(ti, dj) in &assignment.matches {
            let track = &mut self.tracks[ti];
            let b = det_boxes[dj];
            track.history.push_box(b);
            track.hits += 1;
            track.misses = 0;
            track.state = if track.state == TrackState::Tentative
                && track.hits < self.lifecycle.min_hits
            {
                TrackState::Tentative
            } else {
                TrackState::Active
            };
            self.predictor.track_matched(track.id, &b);
            if track.state == TrackState::Active {
                outputs.push(MotRecord { frame, id: track.id as i64, bbox: b, conf: 1.0 });
            }
        }

        // 4. unmatched tracks miss one frame
        for &ti in &assignment.unmatched_predictions {
            let track = &mut self.tracks[ti];
            match self.lifecycle.occlusion_history {
                OcclusionHistory::MaskSlot => track.history.push_mask(),
                OcclusionHistory::Prediction => {
                    let pred = track.last_prediction.expect("set above");
                    track.history.push_box(pred);
                }
            }
            track.misses += 1;
            track.hits = 0;
            if track.state == TrackState::Active {
                track.state = TrackState::Lost;
            }
            self.predictor.track_missed(track.id);
        }

        // 5. unmatched detections spawn tentative tracks
        for &dj in &assignment.unmatched_detections {
            let b = det_boxes[dj];
            let id = self.next_id;
            self.next_id += 1;
            self.tracks.push(Track {
                id,
                state: TrackState::Tentative,
                history: HistoricalTrajectory::newborn(self.t, b),
                hits: 1,
                misses: 0,
                last_prediction: None,
            });
            self.predictor.track_born(id, &b);
        }

        // 6. expire tracks that have been missing too long
        let max_age = self.lifecycle.max_age;
        let predictor = &mut *self.predictor;
        self.tracks.retain(|t| {
            let keep = t.misses <= max_age;
            if !keep {
                predictor.track_removed(t.id);
            }
            keep
        });

        outputs.sort_by_key(|r| r.id);
        Ok(outputs)
    }
}

/// Fold the tracker over a frame-indexed detection set, covering every frame
/// from 1 to `n_frames` (frames without detections still advance the clock).
pub fn run_sequence(
    detections: &BTreeMap<u32, Vec<Detection>>,
    n_frames: u32,
    predictor: &mut dyn MotionPredictor,
    assoc: AssocConfig,
    lifecycle: LifecycleConfig,
    t: usize,
) -> Result<Vec<MotRecord>, TrackError> {
    let mut tracker = Tracker::new(predictor, assoc, lifecycle, t);
    let mut out = Vec::new();
    let empty = Vec::new();
    for frame in 1..=n_frames {
        let dets = detections.get(&frame).unwrap_or(&empty);
        out.extend(tracker.step(frame, dets)?);
    }
    Ok(out)
}

/// Group raw detection records by frame.
pub fn detections_by_frame(records: &[MotRecord]) -> BTreeMap<u32, Vec<Detection>> {
    let mut map: BTreeMap<u32, Vec<Detection>> = BTreeMap::new();
    for r in records {
        map.entry(r.frame)
            .or_default()
            .push(Detection { bbox: r.bbox, confidence: r.conf });
    }
    map
}
