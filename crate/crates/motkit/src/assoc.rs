//! Cost-matrix construction and optimal bipartite assignment.
//!
//! The Hungarian solver is the shortest-augmenting-path formulation with row
//! and column potentials, exact in O(n^3). Rectangular problems are oriented
//! so rows <= cols and transposed back; every row of the smaller side is
//! matched, which yields the minimum-total-cost maximum matching.

use crate::geometry::{iou, l1_box_distance, BBox};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AssocError {
    #[error("cost matrix contains a non-finite entry at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("cost matrix rows have inconsistent lengths")]
    Ragged,
    #[error("at least one cost weight must be positive")]
    AllZeroWeights,
    #[error("iou threshold {0} must lie in [0, 1)")]
    BadThreshold(f64),
}

/// Dense rows x cols cost matrix, lower is better.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, AssocError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut values = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(AssocError::Ragged);
            }
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(AssocError::NonFiniteCost { row: i, col: j });
                }
                values.push(*v);
            }
        }
        Ok(Self { rows: r, cols: c, values })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, AssocError> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                if !v.is_finite() {
                    return Err(AssocError::NonFiniteCost { row: i, col: j });
                }
                values.push(v);
            }
        }
        Ok(Self { rows, cols, values })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }
}

/// Result of bipartite matching: matched index pairs plus the leftovers on
/// both sides. Indices partition each side, none repeated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, c: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(i, j)| c.get(i, j)).sum()
    }
}

/// Exact assignment on a matrix with rows <= cols. Returns row -> col.
fn solve_oriented(cost: &dyn Fn(usize, usize) -> f64, n: usize, m: usize) -> Vec<usize> {
    debug_assert!(n <= m);
    const INF: f64 = f64::INFINITY;
    // 1-based potentials over rows (u) and cols (v); p[j] = row matched to col j
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Minimum-total-cost maximum matching over a (possibly rectangular) finite
/// cost matrix.
pub fn hungarian(c: &CostMatrix) -> Assignment {
    if c.rows == 0 || c.cols == 0 {
        return Assignment {
            matches: Vec::new(),
            unmatched_predictions: (0..c.rows).collect(),
            unmatched_detections: (0..c.cols).collect(),
        };
    }
    let mut matches: Vec<(usize, usize)> = if c.rows <= c.cols {
        let assignment = solve_oriented(&|i, j| c.get(i, j), c.rows, c.cols);
        assignment.iter().enumerate().map(|(i, &j)| (i, j)).collect()
    } else {
        let assignment = solve_oriented(&|i, j| c.get(j, i), c.cols, c.rows);
        assignment.iter().enumerate().map(|(j, &i)| (i, j)).collect()
    };
    matches.sort_unstable();
    let mut row_used = vec![false; c.rows];
    let mut col_used = vec![false; c.cols];
    for &(i, j) in &matches {
        row_used[i] = true;
        col_used[j] = true;
    }
    Assignment {
        matches,
        unmatched_predictions: (0..c.rows).filter(|&i| !row_used[i]).collect(),
        unmatched_detections: (0..c.cols).filter(|&j| !col_used[j]).collect(),
    }
}

/// Association cost weights; the matched pair cost is
/// `w_iou * (1 - IoU) + w_l1 * L1 + w_dtheta * dtheta_norm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub w_iou: f64,
    pub w_l1: f64,
    pub w_dtheta: f64,
}

impl CostWeights {
    /// IoU-only cost.
    pub fn iou_only() -> Self {
        Self { w_iou: 1.0, w_l1: 0.0, w_dtheta: 0.0 }
    }

    /// Default profile: IoU and L1 at equal weight.
    pub fn iou_l1() -> Self {
        Self { w_iou: 1.0, w_l1: 1.0, w_dtheta: 0.0 }
    }

    pub fn iou_dtheta() -> Self {
        Self { w_iou: 1.0, w_l1: 0.0, w_dtheta: 1.0 }
    }

    pub fn iou_l1_dtheta() -> Self {
        Self { w_iou: 1.0, w_l1: 1.0, w_dtheta: 1.0 }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "iou" => Some(Self::iou_only()),
            "iou_l1" => Some(Self::iou_l1()),
            "iou_dtheta" => Some(Self::iou_dtheta()),
            "iou_l1_dtheta" => Some(Self::iou_l1_dtheta()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), AssocError> {
        if self.w_iou <= 0.0 && self.w_l1 <= 0.0 && self.w_dtheta <= 0.0 {
            return Err(AssocError::AllZeroWeights);
        }
        Ok(())
    }
}

/// How many slots back the direction vector looks.
pub const DIRECTION_LOOKBACK: usize = 3;

/// Direction-difference term: angle between the track's recent displacement
/// and the displacement to the candidate detection, normalized by pi.
/// Zero-length vectors (or no usable history) contribute 0.
pub fn dtheta_norm(track_dir: Option<(f64, f64)>, last_center: (f64, f64), det: &BBox) -> f64 {
    let (dx1, dy1) = match track_dir {
        Some(d) => d,
        None => return 0.0,
    };
    let dx2 = det.cx - last_center.0;
    let dy2 = det.cy - last_center.1;
    let n1 = (dx1 * dx1 + dy1 * dy1).sqrt();
    let n2 = (dx2 * dx2 + dy2 * dy2).sqrt();
    if n1 == 0.0 || n2 == 0.0 {
        return 0.0;
    }
    let cos = ((dx1 * dx2 + dy1 * dy2) / (n1 * n2)).clamp(-1.0, 1.0);
    cos.acos() / std::f64::consts::PI
}

/// Per-prediction motion context for the direction cost.
#[derive(Debug, Clone, Copy)]
pub struct MotionContext {
    /// Displacement of the track center over the lookback window.
    pub direction: Option<(f64, f64)>,
    /// Latest observed center of the track.
    pub last_center: (f64, f64),
}

/// Build the prediction x detection cost matrix. `contexts` must parallel
/// `preds`; it only matters when `w_dtheta > 0`.
pub fn build_cost(
    preds: &[BBox],
    dets: &[BBox],
    contexts: &[MotionContext],
    weights: &CostWeights,
) -> Result<CostMatrix, AssocError> {
    weights.validate()?;
    assert_eq!(preds.len(), contexts.len(), "one motion context per prediction");
    CostMatrix::from_fn(preds.len(), dets.len(), |i, j| {
        let p = &preds[i];
        let d = &dets[j];
        let mut cost = 0.0;
        if weights.w_iou > 0.0 {
            cost += weights.w_iou * (1.0 - iou(p, d));
        }
        if weights.w_l1 > 0.0 {
            cost += weights.w_l1 * l1_box_distance(p, d);
        }
        if weights.w_dtheta > 0.0 {
            let ctx = &contexts[i];
            cost += weights.w_dtheta * dtheta_norm(ctx.direction, ctx.last_center, d);
        }
        cost
    })
}

/// Hungarian assignment followed by an IoU gate: matches whose IoU falls
/// below the threshold are dissolved back into the unmatched sets.
pub fn gate_and_assign(
    c: &CostMatrix,
    iou_matrix: &CostMatrix,
    iou_threshold: f64,
) -> Result<Assignment, AssocError> {
    if !(0.0..1.0).contains(&iou_threshold) {
        return Err(AssocError::BadThreshold(iou_threshold));
    }
    let mut a = hungarian(c);
    let (kept, dropped): (Vec<_>, Vec<_>) = a
        .matches
        .into_iter()
        .partition(|&(i, j)| iou_matrix.get(i, j) >= iou_threshold);
    a.matches = kept;
    for (i, j) in dropped {
        a.unmatched_predictions.push(i);
        a.unmatched_detections.push(j);
    }
    a.unmatched_predictions.sort_unstable();
    a.unmatched_detections.sort_unstable();
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cm(rows: Vec<Vec<f64>>) -> CostMatrix {
        CostMatrix::from_rows(rows).unwrap()
    }

    /// Exhaustive minimum over all maximum matchings (small instances only).
    fn brute_force_min(c: &CostMatrix) -> f64 {
        fn recurse(
            c: &CostMatrix,
            row: usize,
            used: &mut Vec<bool>,
            picked: usize,
            target: usize,
            acc: f64,
            best: &mut f64,
        ) {
            if picked == target {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            if row == c.rows {
                return;
            }
            let remaining_rows = c.rows - row;
            let needed = target - picked;
            if remaining_rows < needed {
                return;
            }
            // skip this row only if rows outnumber cols
            if c.rows > c.cols {
                recurse(c, row + 1, used, picked, target, acc, best);
            }
            for j in 0..c.cols {
                if !used[j] {
                    used[j] = true;
                    recurse(c, row + 1, used, picked + 1, target, acc + c.get(row, j), best);
                    used[j] = false;
                }
            }
        }
        let target = c.rows.min(c.cols);
        let mut best = f64::INFINITY;
        let mut used = vec![false; c.cols];
        recurse(c, 0, &mut used, 0, target, 0.0, &mut best);
        best
    }

    #[test]
    fn single_cell() {
        let a = hungarian(&cm(vec![vec![0.3]]));
        assert_eq!(a.matches, vec![(0, 0)]);
        assert!(a.unmatched_predictions.is_empty());
        assert!(a.unmatched_detections.is_empty());
    }

    #[test]
    fn diagonal_optimum() {
        let c = cm(vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        let a = hungarian(&c);
        assert_eq!(a.matches, vec![(0, 0), (1, 1)]);
        assert_eq!(a.total_cost(&c), 2.0);
    }

    #[test]
    fn rectangular_both_orientations() {
        let wide = cm(vec![vec![5.0, 1.0, 3.0]]);
        let a = hungarian(&wide);
        assert_eq!(a.matches, vec![(0, 1)]);
        assert_eq!(a.unmatched_detections, vec![0, 2]);

        let tall = cm(vec![vec![5.0], vec![1.0], vec![3.0]]);
        let a = hungarian(&tall);
        assert_eq!(a.matches, vec![(1, 0)]);
        assert_eq!(a.unmatched_predictions, vec![0, 2]);
    }

    #[test]
    fn empty_sides() {
        let a = hungarian(&CostMatrix::from_fn(0, 3, |_, _| 0.0).unwrap());
        assert_eq!(a.unmatched_detections, vec![0, 1, 2]);
        let a = hungarian(&CostMatrix::from_fn(2, 0, |_, _| 0.0).unwrap());
        assert_eq!(a.unmatched_predictions, vec![0, 1]);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(CostMatrix::from_rows(vec![vec![0.0, f64::NAN]]).is_err());
        assert!(CostMatrix::from_rows(vec![vec![f64::INFINITY]]).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..300 {
            let rows = rng.random_range(1..=6);
            let cols = rng.random_range(1..=6);
            let c = CostMatrix::from_fn(rows, cols, |_, _| rng.random_range(-5.0..5.0)).unwrap();
            let a = hungarian(&c);
            assert_eq!(a.matches.len(), rows.min(cols), "case {case}");
            let total = a.total_cost(&c);
            let best = brute_force_min(&c);
            assert!(
                (total - best).abs() < 1e-9,
                "case {case} ({rows}x{cols}): got {total}, brute {best}"
            );
        }
    }

    #[test]
    fn scaling_preserves_optimality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let c = CostMatrix::from_fn(4, 4, |_, _| rng.random_range(0.0..1.0)).unwrap();
            let scaled = CostMatrix::from_fn(4, 4, |i, j| 13.5 * c.get(i, j)).unwrap();
            let a = hungarian(&scaled);
            let best = brute_force_min(&c);
            assert!((a.total_cost(&c) - best).abs() < 1e-9);
        }
    }

    fn bb(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx, cy, w, h).unwrap()
    }

    fn no_ctx(n: usize) -> Vec<MotionContext> {
        vec![MotionContext { direction: None, last_center: (0.0, 0.0) }; n]
    }

    #[test]
    fn cost_examples() {
        let a = bb(0.5, 0.5, 0.4, 0.4);
        // identical pair, IoU-only: zero cost
        let c = build_cost(&[a], &[a], &no_ctx(1), &CostWeights::iou_only()).unwrap();
        assert!(c.get(0, 0).abs() < 1e-12);

        // iou_l1 on the derived 0.6-IoU pair: (1 - 0.6) + 0.1 = 0.5
        let b = bb(0.6, 0.5, 0.4, 0.4);
        let c = build_cost(&[a], &[b], &no_ctx(1), &CostWeights::iou_l1()).unwrap();
        assert!((c.get(0, 0) - 0.5).abs() < 1e-12, "{}", c.get(0, 0));

        // default profile weights
        assert_eq!(CostWeights::by_name("iou_l1"), Some(CostWeights::iou_l1()));
        assert_eq!(CostWeights::iou_l1(), CostWeights { w_iou: 1.0, w_l1: 1.0, w_dtheta: 0.0 });
    }

    #[test]
    fn all_zero_weights_rejected() {
        let w = CostWeights { w_iou: 0.0, w_l1: 0.0, w_dtheta: 0.0 };
        assert!(matches!(
            build_cost(&[], &[], &[], &w),
            Err(AssocError::AllZeroWeights)
        ));
    }

    #[test]
    fn dtheta_basics() {
        // straight continuation: angle 0
        let d = dtheta_norm(Some((0.1, 0.0)), (0.5, 0.5), &bb(0.6, 0.5, 0.1, 0.1));
        assert!(d.abs() < 1e-12);
        // reversal: angle pi -> 1
        let d = dtheta_norm(Some((0.1, 0.0)), (0.5, 0.5), &bb(0.4, 0.5, 0.1, 0.1));
        assert!((d - 1.0).abs() < 1e-12);
        // right angle -> 0.5
        let d = dtheta_norm(Some((0.1, 0.0)), (0.5, 0.5), &bb(0.5, 0.6, 0.1, 0.1));
        assert!((d - 0.5).abs() < 1e-12);
        // degenerate vectors -> 0
        assert_eq!(dtheta_norm(None, (0.5, 0.5), &bb(0.6, 0.5, 0.1, 0.1)), 0.0);
        assert_eq!(dtheta_norm(Some((0.0, 0.0)), (0.5, 0.5), &bb(0.6, 0.5, 0.1, 0.1)), 0.0);
        assert_eq!(dtheta_norm(Some((0.1, 0.0)), (0.6, 0.5), &bb(0.6, 0.5, 0.1, 0.1)), 0.0);
    }

    #[test]
    fn gating_behaviour() {
        let a = bb(0.5, 0.5, 0.4, 0.4);
        let b = bb(0.6, 0.5, 0.4, 0.4); // IoU 0.6 with a
        let cost = build_cost(&[a], &[b], &no_ctx(1), &CostWeights::iou_only()).unwrap();
        let ious = CostMatrix::from_fn(1, 1, |_, _| crate::geometry::iou(&a, &b)).unwrap();

        // threshold 0 keeps the match
        let g = gate_and_assign(&cost, &ious, 0.0).unwrap();
        assert_eq!(g.matches.len(), 1);
        // threshold 0.99 dissolves it
        let g = gate_and_assign(&cost, &ious, 0.99).unwrap();
        assert!(g.matches.is_empty());
        assert_eq!(g.unmatched_predictions, vec![0]);
        assert_eq!(g.unmatched_detections, vec![0]);

        // disjoint boxes, threshold 0.3: nothing matches
        let far = bb(0.05, 0.05, 0.05, 0.05);
        let cost = build_cost(&[a], &[far], &no_ctx(1), &CostWeights::iou_l1()).unwrap();
        let ious = CostMatrix::from_fn(1, 1, |_, _| crate::geometry::iou(&a, &far)).unwrap();
        let g = gate_and_assign(&cost, &ious, 0.3).unwrap();
        assert!(g.matches.is_empty());

        assert!(gate_and_assign(&cost, &ious, 1.0).is_err());
    }

    #[test]
    fn gating_monotone_in_threshold() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..20 {
            let preds: Vec<BBox> = (0..4)
                .map(|_| bb(rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), 0.2, 0.2))
                .collect();
            let dets: Vec<BBox> = (0..4)
                .map(|_| bb(rng.random_range(0.2..0.8), rng.random_range(0.2..0.8), 0.2, 0.2))
                .collect();
            let cost =
                build_cost(&preds, &dets, &no_ctx(4), &CostWeights::iou_l1()).unwrap();
            let ious = CostMatrix::from_fn(4, 4, |i, j| iou(&preds[i], &dets[j])).unwrap();
            let mut prev = usize::MAX;
            for thr in [0.0, 0.2, 0.4, 0.6, 0.8] {
                let g = gate_and_assign(&cost, &ious, thr).unwrap();
                assert!(g.matches.len() <= prev);
                prev = g.matches.len();
            }
        }
    }
}
