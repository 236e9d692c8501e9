// temporary tuning harness, not part of the deliverable
use motkit::config::{ConfigProfile, PredictorKind};
use motkit::metrics::evaluate;
use motkit::model::ModelParams;
use motkit::mot::MotRecord;
use motkit::synth::{dance_toy, generate, MotionKind, Scenario};
use motkit::tracker::{
    detections_by_frame, run_sequence, KalmanPredictor, MotionPredictor, OcclusionHistory,
    TransformerPredictor,
};
use motkit::train::{segment_trajectories, split_by_identity, train};
use std::time::Instant;

fn track_with(
    dets: &[MotRecord],
    n_frames: u32,
    profile: &ConfigProfile,
    params: Option<&ModelParams>,
) -> Vec<MotRecord> {
    let grouped = detections_by_frame(dets);
    let mut kalman;
    let mut transformer;
    let mut t = profile.model.t;
    let predictor: &mut dyn MotionPredictor = match params {
        None => {
            kalman = KalmanPredictor::default();
            &mut kalman
        }
        Some(p) => {
            t = p.config.t;
            transformer = TransformerPredictor::new(p.clone());
            &mut transformer
        }
    };
    run_sequence(&grouped, n_frames, predictor, profile.assoc, profile.lifecycle, t).unwrap()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("a3");

    match mode {
        "a3" => {
            // Linear scenario trainability
            let n_seeds: usize = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(3);
            for seed in [1u64, 2, 3].into_iter().take(n_seeds) {
                let s = Scenario {
                    name: "linear".into(),
                    n_objects: 6,
                    n_frames: 500,
                    motion_kind: MotionKind::Linear,
                    occlusion_windows: vec![],
                    detection_noise_std: 0.0,
                    seed,
                    shape_shift: false,
                    dims: motkit::mot::DEFAULT_DIMS,
                };
                let g = generate(&s).unwrap();
                let mut profile = ConfigProfile::toy();
                if let Some(ep) = args.get(2) {
                    profile.train.epochs = ep.parse().unwrap();
                }
                if let Some(lr) = args.get(3) {
                    profile.train.lr = lr.parse().unwrap();
                }
                if let Some(bs) = args.get(4) {
                    profile.train.batch_size = bs.parse().unwrap();
                }
                if let Some(sc) = args.get(5) {
                    profile.model.spatial_scale = sc.parse().unwrap();
                }
                profile.train.seed = seed;
                let segs = segment_trajectories(&g.gt, profile.model.t);
                println!("seed {seed}: {} segments", segs.len());
                let (tr, va) = split_by_identity(segs);
                let mut params = ModelParams::init(profile.model, seed).unwrap();
                let t0 = Instant::now();
                let out = train(&tr, &va, &mut params, &profile.train).unwrap();
                let el = t0.elapsed().as_secs_f64();
                let last = out.trace.last().unwrap();
                println!(
                    "seed {seed}: {:.1}s  train {:.5} val {:?}",
                    el, last.train_loss, last.val_loss
                );
                // one-step prediction IoU on validation
                let mut ious = Vec::new();
                for seg in va.iter().take(500) {
                    let h = motkit::embedding::HistoricalTrajectory::new(
                        seg.history.iter().map(|b| motkit::embedding::Slot::Box(*b)).collect(),
                    );
                    let pred = motkit::model::predict_box(&h, &params).unwrap();
                    ious.push(motkit::geometry::iou(&pred, &seg.target));
                }
                let mean_iou: f64 = ious.iter().sum::<f64>() / ious.len() as f64;
                println!("seed {seed}: mean one-step IoU {mean_iou:.4}");
            }
        }
        "a4" => {
            // dance-toy comparative
            let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(8);
            let t_hist: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(20);
            let occl = args.get(4).map(|s| s.as_str()).unwrap_or("mask");
            for seed in [11u64, 12, 13] {
                let s = dance_toy(seed);
                let g = generate(&s).unwrap();
                let mut profile = ConfigProfile::toy();
                profile.train.epochs = epochs;
                profile.train.seed = seed;
                profile.model.t = t_hist;
                profile.lifecycle.occlusion_history = match occl {
                    "pred" => OcclusionHistory::Prediction,
                    _ => OcclusionHistory::MaskSlot,
                };
                let segs = segment_trajectories(&g.gt, profile.model.t);
                let (tr, va) = split_by_identity(segs);
                let mut params = ModelParams::init(profile.model, seed).unwrap();
                let t0 = Instant::now();
                let out = train(&tr, &va, &mut params, &profile.train).unwrap();
                let train_time = t0.elapsed().as_secs_f64();
                let last = out.trace.last().unwrap();

                let t0 = Instant::now();
                let tf_results = track_with(&g.dets, g.n_frames, &profile, Some(&params));
                let track_time = t0.elapsed().as_secs_f64();
                let tf_report = evaluate(&g.gt, &tf_results, 0.5);

                profile.predictor = PredictorKind::Kalman;
                let kf_results = track_with(&g.dets, g.n_frames, &profile, None);
                let kf_report = evaluate(&g.gt, &kf_results, 0.5);
                println!(
                    "seed {seed}: train {train_time:.0}s (val {:?}) track {track_time:.0}s | TF idf1 {:.4} idsw {} mota {:.4} | KF idf1 {:.4} idsw {} mota {:.4}",
                    last.val_loss,
                    tf_report.idf1,
                    tf_report.id_switches,
                    tf_report.mota,
                    kf_report.idf1,
                    kf_report.id_switches,
                    kf_report.mota
                );
            }
        }
        "a10" => {
            // Kalman failure signature on DirectionShift
            let s = Scenario {
                name: "ds".into(),
                n_objects: 1,
                n_frames: 200,
                motion_kind: MotionKind::DirectionShift,
                occlusion_windows: vec![],
                detection_noise_std: 0.0,
                seed: 5,
                shape_shift: false,
                dims: motkit::mot::DEFAULT_DIMS,
            };
            let g = generate(&s).unwrap();
            let shift = g.objects[0].shift_frames[0];
            use motkit::kalman::{kf_init, kf_predict, kf_update, KalmanNoise};
            let frames: std::collections::BTreeMap<u32, motkit::geometry::BBox> =
                g.gt.iter().map(|r| (r.frame, r.bbox)).collect();
            let mut state = kf_init(frames.get(&1).unwrap(), KalmanNoise::default());
            let mut errors = Vec::new();
            for f in 2..=s.n_frames {
                let (pred_state, pred_box) = kf_predict(&state);
                let truth = frames.get(&f).unwrap();
                errors.push((f, motkit::geometry::l1_box_distance(&pred_box, truth)));
                state = kf_update(&pred_state, truth).unwrap();
            }
            let at_shift = errors.iter().find(|(f, _)| *f == shift).unwrap().1;
            let trailing: Vec<f64> = errors
                .iter()
                .filter(|(f, _)| *f >= shift - 10 && *f < shift)
                .map(|(_, e)| *e)
                .collect();
            let avg = trailing.iter().sum::<f64>() / trailing.len() as f64;
            println!("shift frame {shift}: error {at_shift:.6} trailing avg {avg:.8} ratio {:.1}", at_shift / avg);
        }

        "diag" => {
            let s = Scenario {
                name: "linear".into(),
                n_objects: 6,
                n_frames: 500,
                motion_kind: MotionKind::Linear,
                occlusion_windows: vec![],
                detection_noise_std: 0.0,
                seed: 1,
                shape_shift: false,
                dims: motkit::mot::DEFAULT_DIMS,
            };
            let g = generate(&s).unwrap();
            let mut profile = ConfigProfile::toy();
            profile.train.epochs = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(12);
            profile.train.lr = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
            profile.train.batch_size = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(16);
            profile.model.spatial_scale = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(30.0);
            profile.train.seed = 1;
            let segs = segment_trajectories(&g.gt, profile.model.t);
            let (tr, va) = split_by_identity(segs);
            let mut params = ModelParams::init(profile.model, 1).unwrap();
            let out = train(&tr, &va, &mut params, &profile.train).unwrap();
            println!("final train {:.5}", out.trace.last().unwrap().train_loss);
            for (name, set) in [("train", &tr), ("val", &va)] {
                let mut errs = [0.0f64; 4];
                let mut copy_errs = [0.0f64; 4];
                let mut n = 0.0;
                for seg in set.iter().take(400) {
                    let h = motkit::embedding::HistoricalTrajectory::new(
                        seg.history.iter().map(|b| motkit::embedding::Slot::Box(*b)).collect(),
                    );
                    let pred = motkit::model::predict_box(&h, &params).unwrap();
                    let pv = pred.values();
                    let tv = seg.target.values();
                    let lv = seg.history.last().unwrap().values();
                    for i in 0..4 {
                        errs[i] += (pv[i] - tv[i]).abs();
                        copy_errs[i] += (lv[i] - tv[i]).abs();
                    }
                    n += 1.0;
                }
                println!(
                    "{name}: model cx {:.4} cy {:.4} w {:.4} h {:.4} | copy-last cx {:.4} cy {:.4} w {:.4} h {:.4}",
                    errs[0] / n, errs[1] / n, errs[2] / n, errs[3] / n,
                    copy_errs[0] / n, copy_errs[1] / n, copy_errs[2] / n, copy_errs[3] / n
                );
            }
        }
        other => eprintln!("unknown mode {other}"),
    }
}
