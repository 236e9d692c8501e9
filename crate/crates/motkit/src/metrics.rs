//! Tracking evaluation: CLEAR-MOT accuracy (MOTA, FP/FN/ID switches) with the
//! standard correspondence carry-over, and IDF1 from the exact global
//! identity matching. Per-threshold sweeps reuse the same machinery.

use crate::assoc::{hungarian, CostMatrix};
use crate::geometry::iou;
use crate::mot::MotRecord;
use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub sequence: String,
    pub mota: f64,
    pub idf1: f64,
    pub id_switches: u64,
    pub fp: u64,
    pub fn_count: u64,
    pub gt_count: u64,
}

fn by_frame(records: &[MotRecord]) -> BTreeMap<u32, Vec<&MotRecord>> {
    let mut map: BTreeMap<u32, Vec<&MotRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.frame).or_default().push(r);
    }
    for v in map.values_mut() {
        v.sort_by_key(|r| r.id);
    }
    map
}

/// Score hypothesis tracks against ground truth at one IoU gate.
///
/// Frames present in only one of the two inputs count as having no boxes on
/// the other side.
pub fn evaluate(gt: &[MotRecord], hyp: &[MotRecord], match_iou: f64) -> EvalReport {
    assert!(
        match_iou > 0.0 && match_iou < 1.0,
        "match_iou must lie in (0, 1), got {match_iou}"
    );
    let gt_frames = by_frame(gt);
    let hyp_frames = by_frame(hyp);
    let mut frames: Vec<u32> = gt_frames.keys().chain(hyp_frames.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();

    let mut fp = 0u64;
    let mut fn_count = 0u64;
    let mut id_switches = 0u64;
    let gt_count = gt.len() as u64;

    // correspondence carried from the previous frame, and the last hypothesis
    // each identity ever matched (for switch counting across gaps)
    let mut corr: BTreeMap<i64, i64> = BTreeMap::new();
    let mut last_matched: BTreeMap<i64, i64> = BTreeMap::new();

    // identity-overlap counts for IDF1
    let mut pair_overlap: BTreeMap<(i64, i64), u64> = BTreeMap::new();

    let empty: Vec<&MotRecord> = Vec::new();
    for frame in frames {
        let gts = gt_frames.get(&frame).unwrap_or(&empty);
        let hyps = hyp_frames.get(&frame).unwrap_or(&empty);

        // IDF1 overlaps are gate-checked per identity pair independent of the
        // CLEAR correspondence
        for g in gts {
            for h in hyps {
                if iou(&g.bbox, &h.bbox) >= match_iou {
                    *pair_overlap.entry((g.id, h.id)).or_insert(0) += 1;
                }
            }
        }

        let mut gt_open: Vec<usize> = (0..gts.len()).collect();
        let mut hyp_open: Vec<usize> = (0..hyps.len()).collect();
        let mut matched: Vec<(usize, usize)> = Vec::new();

        // keep still-valid correspondences from the previous frame
        let mut kept: Vec<(usize, usize)> = Vec::new();
        for (pos_g, &gi) in gt_open.iter().enumerate() {
            if let Some(&h_id) = corr.get(&gts[gi].id) {
                if let Some(pos_h) = hyp_open
                    .iter()
                    .position(|&hi| hyps[hi].id == h_id)
                {
                    let hi = hyp_open[pos_h];
                    if iou(&gts[gi].bbox, &hyps[hi].bbox) >= match_iou {
                        kept.push((pos_g, pos_h));
                    }
                }
            }
        }
        // remove kept in reverse position order to keep indices valid
        kept.sort_by(|a, b| b.cmp(a));
        let mut kept_pairs = Vec::new();
        for (pos_g, pos_h) in kept {
            let gi = gt_open.remove(pos_g);
            let hi = hyp_open.remove(pos_h);
            kept_pairs.push((gi, hi));
        }
        matched.extend(kept_pairs);

        // optimal matching over what remains, gated at the threshold
        if !gt_open.is_empty() && !hyp_open.is_empty() {
            let cost = CostMatrix::from_fn(gt_open.len(), hyp_open.len(), |i, j| {
                1.0 - iou(&gts[gt_open[i]].bbox, &hyps[hyp_open[j]].bbox)
            })
            .expect("IoU costs are finite");
            let assignment = hungarian(&cost);
            let mut used_g = vec![false; gt_open.len()];
            let mut used_h = vec![false; hyp_open.len()];
            for (i, j) in assignment.matches {
                let gi = gt_open[i];
                let hi = hyp_open[j];
                if iou(&gts[gi].bbox, &hyps[hi].bbox) >= match_iou {
                    matched.push((gi, hi));
                    used_g[i] = true;
                    used_h[j] = true;
                }
            }
            gt_open = gt_open
                .iter()
                .enumerate()
                .filter(|(i, _)| !used_g[*i])
                .map(|(_, &gi)| gi)
                .collect();
            hyp_open = hyp_open
                .iter()
                .enumerate()
                .filter(|(j, _)| !used_h[*j])
                .map(|(_, &hi)| hi)
                .collect();
        }

        fn_count += gt_open.len() as u64;
        fp += hyp_open.len() as u64;

        // record correspondences and count identity switches
        corr.clear();
        for (gi, hi) in matched {
            let g_id = gts[gi].id;
            let h_id = hyps[hi].id;
            if let Some(&prev) = last_matched.get(&g_id) {
                if prev != h_id {
                    id_switches += 1;
                }
            }
            last_matched.insert(g_id, h_id);
            corr.insert(g_id, h_id);
        }
    }

    // IDF1 via the exact bipartite matching that maximizes matched frames
    let gt_ids: Vec<i64> = {
        let mut v: Vec<i64> = gt.iter().map(|r| r.id).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let hyp_ids: Vec<i64> = {
        let mut v: Vec<i64> = hyp.iter().map(|r| r.id).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let idtp = if gt_ids.is_empty() || hyp_ids.is_empty() {
        0
    } else {
        let cost = CostMatrix::from_fn(gt_ids.len(), hyp_ids.len(), |i, j| {
            -(pair_overlap.get(&(gt_ids[i], hyp_ids[j])).copied().unwrap_or(0) as f64)
        })
        .expect("overlap counts are finite");
        let assignment = hungarian(&cost);
        assignment
            .matches
            .iter()
            .map(|&(i, j)| pair_overlap.get(&(gt_ids[i], hyp_ids[j])).copied().unwrap_or(0))
            .sum::<u64>()
    };
    let hyp_count = hyp.len() as u64;
    let idf1 = if gt_count + hyp_count == 0 {
        1.0
    } else {
        2.0 * idtp as f64 / (gt_count + hyp_count) as f64
    };
    let mota = if gt_count == 0 {
        if fp + id_switches == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - (fp + fn_count + id_switches) as f64 / gt_count as f64
    };
    EvalReport {
        sequence: String::new(),
        mota,
        idf1,
        id_switches,
        fp,
        fn_count,
        gt_count,
    }
}

/// One evaluation per threshold; thresholds must be strictly increasing.
pub fn iou_threshold_sweep(
    gt: &[MotRecord],
    hyp: &[MotRecord],
    thresholds: &[f64],
) -> Vec<(f64, EvalReport)> {
    assert!(
        thresholds.windows(2).all(|w| w[0] < w[1]),
        "thresholds must be strictly increasing"
    );
    thresholds.iter().map(|&t| (t, evaluate(gt, hyp, t))).collect()
}

pub const CSV_HEADER: &str = "sequence,mota,idf1,idsw,fp,fn,gt";

pub fn report_csv_row(r: &EvalReport) -> String {
    format!(
        "{},{:.6},{:.6},{},{},{},{}",
        r.sequence, r.mota, r.idf1, r.id_switches, r.fp, r.fn_count, r.gt_count
    )
}

pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&report_csv_row(r));
        out.push('\n');
    }
    out
}

/// Aligned plain-text table.
pub fn reports_to_text(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:>8} {:>8} {:>6} {:>6} {:>6} {:>8}",
        "sequence", "MOTA", "IDF1", "IDSW", "FP", "FN", "GT"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<20} {:>8.4} {:>8.4} {:>6} {:>6} {:>6} {:>8}",
            r.sequence, r.mota, r.idf1, r.id_switches, r.fp, r.fn_count, r.gt_count
        );
    }
    out
}
