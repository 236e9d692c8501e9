//! Historical trajectory embedding: sinusoidal spatial encoding of each
//! bounding box, a learnable prediction token appended at the end, learnable
//! mask tokens for missing/padded slots, and reverse-order temporal encoding
//! so the newest entries always carry the smallest serial numbers.

use crate::geometry::BBox;
use crate::tensor::{Tape, TensorError, TensorId};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding dimension {0} is not divisible by 8")]
    BadDimension(usize),
    #[error("temporal serial {serial} out of range 1..={max}")]
    SerialOutOfRange { serial: usize, max: usize },
    #[error("trajectory must contain at least one observed box")]
    AllMasked,
    #[error("trajectory has {got} slots, expected {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// One slot of a historical trajectory: an observed box or a masked gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Slot {
    Box(BBox),
    Mask,
}

/// Fixed-capacity window over the last `T` frames of one object.
/// Mask slots stand in for padding (newborns, left side) and for frames
/// without an observation.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoricalTrajectory {
    slots: Vec<Slot>,
}

impl HistoricalTrajectory {
    pub fn new(slots: Vec<Slot>) -> Self {
        assert!(!slots.is_empty(), "trajectory length must be positive");
        Self { slots }
    }

    /// Newborn history: `t - 1` mask slots followed by the first observation.
    pub fn newborn(t: usize, b: BBox) -> Self {
        assert!(t >= 1);
        let mut slots = vec![Slot::Mask; t - 1];
        slots.push(Slot::Box(b));
        Self { slots }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// Evict the oldest slot and append an observed box.
    pub fn push_box(&mut self, b: BBox) {
        self.slots.remove(0);
        self.slots.push(Slot::Box(b));
    }

    /// Evict the oldest slot and append a mask (missed frame).
    pub fn push_mask(&mut self) {
        self.slots.remove(0);
        self.slots.push(Slot::Mask);
    }

    pub fn has_box(&self) -> bool {
        self.slots.iter().any(|s| matches!(s, Slot::Box(_)))
    }

    pub fn most_recent_box(&self) -> Option<&BBox> {
        self.slots.iter().rev().find_map(|s| match s {
            Slot::Box(b) => Some(b),
            Slot::Mask => None,
        })
    }

    /// Most recent box together with its distance (in slots) from the end.
    pub fn most_recent_box_with_age(&self) -> Option<(&BBox, usize)> {
        self.slots.iter().rev().enumerate().find_map(|(age, s)| match s {
            Slot::Box(b) => Some((b, age)),
            Slot::Mask => None,
        })
    }
}

/// Learnable tokens of the embedding stage.
#[derive(Debug, Clone)]
pub struct EmbeddingParams {
    pub prediction_token: Vec<f64>,
    pub mask_token: Vec<f64>,
}

impl EmbeddingParams {
    /// i.i.d. normal init, mean 0, std 0.02.
    pub fn init(d: usize, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, 0.02).expect("std is positive");
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| normal.sample(rng)).collect() };
        Self { prediction_token: draw(d), mask_token: draw(d) }
    }

    pub fn dim(&self) -> usize {
        self.prediction_token.len()
    }
}

/// Scale applied to each normalized coordinate before the sinusoid, mapping
/// [0,1] into a position-like range. Exposed in the model config.
pub const DEFAULT_SPATIAL_SCALE: f64 = 100.0;

/// Sinusoidal encoding of one scalar `pos` into `dims` values,
/// sin/cos-interleaved with frequency base 10000.
fn sinusoid_into(pos: f64, dims: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), dims);
    let mut i = 0;
    while i < dims {
        let exponent = i as f64 / dims as f64; // 2*(i/2)/dims for the pair
        let rate = 1.0 / 10000f64.powf(exponent);
        out[i] = (pos * rate).sin();
        if i + 1 < dims {
            out[i + 1] = (pos * rate).cos();
        }
        i += 2;
    }
}

/// Spatial embedding of a box: four contiguous blocks of `d/4` dims, one per
/// coordinate in order (cx, cy, w, h), each a sinusoid of the scaled value.
pub fn pe_spat(b: &BBox, d: usize, scale: f64) -> Result<Vec<f64>, EmbeddingError> {
    if d % 8 != 0 || d == 0 {
        return Err(EmbeddingError::BadDimension(d));
    }
    let block = d / 4;
    let mut out = vec![0.0; d];
    for (i, v) in b.values().iter().enumerate() {
        sinusoid_into(v * scale, block, &mut out[i * block..(i + 1) * block]);
    }
    Ok(out)
}

/// Temporal embedding of an integer serial number `k` in `d` dims.
pub fn pe_temp(k: usize, d: usize, max_serial: usize) -> Result<Vec<f64>, EmbeddingError> {
    if k < 1 || k > max_serial {
        return Err(EmbeddingError::SerialOutOfRange { serial: k, max: max_serial });
    }
    let mut out = vec![0.0; d];
    sinusoid_into(k as f64, d, &mut out);
    Ok(out)
}

/// Tensor handles produced by `build_embedding`.
pub struct EmbeddingOut {
    /// X_spat + temporal encodings, shape (T+1) x D.
    pub z: TensorId,
    /// Spatial rows alone (boxes/mask token/prediction token), re-injected
    /// before every encoder layer.
    pub x_spat: TensorId,
}

/// Token tensor ids for the learnable embedding parameters, registered on a
/// tape once per forward pass.
pub struct BoundTokens {
    pub prediction_token: TensorId,
    pub mask_token: TensorId,
}

pub fn bind_tokens(
    tape: &mut Tape,
    params: &EmbeddingParams,
    trainable: bool,
) -> Result<BoundTokens, TensorError> {
    let d = params.dim();
    Ok(BoundTokens {
        prediction_token: tape.leaf(params.prediction_token.clone(), vec![1, d], trainable)?,
        mask_token: tape.leaf(params.mask_token.clone(), vec![1, d], trainable)?,
    })
}

/// Assemble the historical trajectory embedding on a tape.
///
/// Row i (i < T) is the spatial encoding of slot i, or the mask token for
/// masked slots; row T is the prediction token. Temporal serials run from
/// T+1 (oldest slot) down to 1 (prediction token), so the most recent box
/// always receives serial 2 regardless of padding.
pub fn build_embedding(
    tape: &mut Tape,
    h: &HistoricalTrajectory,
    tokens: &BoundTokens,
    d: usize,
    scale: f64,
) -> Result<EmbeddingOut, EmbeddingError> {
    if !h.has_box() {
        return Err(EmbeddingError::AllMasked);
    }
    let t = h.len();
    let mut rows: Vec<TensorId> = Vec::with_capacity(t + 1);
    for slot in h.slots() {
        match slot {
            Slot::Box(b) => {
                let row = pe_spat(b, d, scale)?;
                rows.push(tape.leaf(row, vec![1, d], false)?);
            }
            Slot::Mask => rows.push(tokens.mask_token),
        }
    }
    rows.push(tokens.prediction_token);
    let x_spat = tape.concat(0, &rows)?;

    // serials (T+1, T, ..., 2, 1) assigned front-to-back
    let mut temp = vec![0.0; (t + 1) * d];
    for i in 0..=t {
        let serial = t + 1 - i;
        let enc = pe_temp(serial, d, t + 1)?;
        temp[i * d..(i + 1) * d].copy_from_slice(&enc);
    }
    let temp_id = tape.leaf(temp, vec![t + 1, d], false)?;
    let z = tape.add(x_spat, temp_id)?;
    Ok(EmbeddingOut { z, x_spat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn bb(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx, cy, w, h).unwrap()
    }

    #[test]
    fn pe_spat_zero_box_alternates_sin_cos() {
        let z = bb(0.0, 0.0, 0.0, 0.0);
        for d in [8, 16, 64] {
            let enc = pe_spat(&z, d, DEFAULT_SPATIAL_SCALE).unwrap();
            for (i, v) in enc.iter().enumerate() {
                let expected = if (i % (d / 4)) % 2 == 0 { 0.0 } else { 1.0 };
                assert_eq!(*v, expected, "dim {i} of D={d}");
            }
        }
    }

    #[test]
    fn pe_spat_rejects_bad_dims() {
        let b = bb(0.5, 0.5, 0.1, 0.1);
        assert!(pe_spat(&b, 12, 100.0).is_err());
        assert!(pe_spat(&b, 0, 100.0).is_err());
        assert!(pe_spat(&b, 16, 100.0).is_ok());
    }

    #[test]
    fn pe_spat_first_block_matches_scalar_sinusoid() {
        // b = (0.5, 0, 0, 0), D = 16: first block is the 4-dim sinusoid of 0.5 * s
        let b = bb(0.5, 0.0, 0.0, 0.0);
        let s = DEFAULT_SPATIAL_SCALE;
        let enc = pe_spat(&b, 16, s).unwrap();
        let pos = 0.5 * s;
        let expected = [
            pos.sin(),
            pos.cos(),
            (pos / 10000f64.powf(2.0 / 4.0)).sin(),
            (pos / 10000f64.powf(2.0 / 4.0)).cos(),
        ];
        for i in 0..4 {
            assert!((enc[i] - expected[i]).abs() < 1e-15, "dim {i}");
        }
    }

    #[test]
    fn pe_spat_injective_on_grid() {
        // 10^4 distinct boxes: 10 values per coordinate
        let mut encodings: Vec<Vec<f64>> = Vec::with_capacity(10_000);
        for a in 0..10 {
            for b in 0..10 {
                for c in 0..10 {
                    for e in 0..10 {
                        let bx = bb(
                            a as f64 / 10.0,
                            b as f64 / 10.0,
                            c as f64 / 10.0,
                            e as f64 / 10.0,
                        );
                        encodings.push(pe_spat(&bx, 16, DEFAULT_SPATIAL_SCALE).unwrap());
                    }
                }
            }
        }
        // sort-based duplicate detection keeps this O(n log n)
        let mut keys: Vec<Vec<u64>> = encodings
            .iter()
            .map(|e| e.iter().map(|v| v.to_bits()).collect())
            .collect();
        keys.sort();
        let before = keys.len();
        keys.dedup();
        assert_eq!(keys.len(), before, "pe_spat collided on the grid");
    }

    #[test]
    fn pe_temp_matches_transformer_convention() {
        let d = 8;
        let enc = pe_temp(1, d, 31).unwrap();
        for i in 0..d / 2 {
            let rate = 1.0 / 10000f64.powf(2.0 * i as f64 / d as f64);
            assert!((enc[2 * i] - (1.0 * rate).sin()).abs() < 1e-15);
            assert!((enc[2 * i + 1] - (1.0 * rate).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn pe_temp_distinct_and_deterministic() {
        let t = 30;
        let d = 16;
        let encs: Vec<Vec<f64>> = (1..=t + 1).map(|k| pe_temp(k, d, t + 1).unwrap()).collect();
        for a in 0..encs.len() {
            for b in a + 1..encs.len() {
                assert_ne!(encs[a], encs[b], "serials {} and {}", a + 1, b + 1);
            }
        }
        assert_eq!(pe_temp(7, d, t + 1).unwrap(), pe_temp(7, d, t + 1).unwrap());
        assert!(pe_temp(0, d, t + 1).is_err());
        assert!(pe_temp(t + 2, d, t + 1).is_err());
    }

    #[test]
    fn build_embedding_layout() {
        let d = 16;
        let t = 4;
        let params = EmbeddingParams::init(d, &mut ChaCha8Rng::seed_from_u64(0));
        let zero = bb(0.0, 0.0, 0.0, 0.0);
        let h = HistoricalTrajectory::new(vec![Slot::Box(zero); t]);

        let mut tape = Tape::new();
        let tokens = bind_tokens(&mut tape, &params, false).unwrap();
        let out = build_embedding(&mut tape, &h, &tokens, d, 100.0).unwrap();
        assert_eq!(tape.shape(out.z), &[t + 1, d]);
        assert_eq!(tape.shape(out.x_spat), &[t + 1, d]);

        // identical boxes: identical spatial rows 0..T-1
        let xs = tape.value(out.x_spat);
        for i in 1..t {
            assert_eq!(xs[..d], xs[i * d..(i + 1) * d], "row {i}");
        }
        // row T is the prediction token
        assert_eq!(&xs[t * d..], params.prediction_token.as_slice());

        // temporal encoding breaks ties: Z rows pairwise distinct
        let z = tape.value(out.z);
        for a in 0..=t {
            for b in a + 1..=t {
                assert_ne!(z[a * d..(a + 1) * d], z[b * d..(b + 1) * d]);
            }
        }
    }

    #[test]
    fn newborn_padding_is_left_side() {
        let d = 16;
        let t = 6;
        let params = EmbeddingParams::init(d, &mut ChaCha8Rng::seed_from_u64(1));
        let b = bb(0.4, 0.6, 0.1, 0.2);
        let h = HistoricalTrajectory::newborn(t, b);
        assert_eq!(h.slots()[..t - 1], vec![Slot::Mask; t - 1]);
        assert_eq!(h.slots()[t - 1], Slot::Box(b));

        let mut tape = Tape::new();
        let tokens = bind_tokens(&mut tape, &params, false).unwrap();
        let out = build_embedding(&mut tape, &h, &tokens, d, 100.0).unwrap();
        let xs = tape.value(out.x_spat);
        for i in 0..t - 1 {
            assert_eq!(&xs[i * d..(i + 1) * d], params.mask_token.as_slice(), "row {i}");
        }
        assert_eq!(
            &xs[(t - 1) * d..t * d],
            pe_spat(&b, d, 100.0).unwrap().as_slice()
        );
    }

    #[test]
    fn serial_numbers_run_from_t_plus_one_down_to_one() {
        let d = 8;
        let t = 5;
        let params = EmbeddingParams::init(d, &mut ChaCha8Rng::seed_from_u64(2));
        let b = bb(0.5, 0.5, 0.1, 0.1);
        let h = HistoricalTrajectory::new(vec![Slot::Box(b); t]);
        let mut tape = Tape::new();
        let tokens = bind_tokens(&mut tape, &params, false).unwrap();
        let out = build_embedding(&mut tape, &h, &tokens, d, 100.0).unwrap();
        // subtract X_spat to recover the temporal rows, compare to pe_temp
        let xs = tape.value(out.x_spat);
        let z = tape.value(out.z);
        for i in 0..=t {
            let serial = t + 1 - i;
            let expect = pe_temp(serial, d, t + 1).unwrap();
            for j in 0..d {
                let got = z[i * d + j] - xs[i * d + j];
                assert!((got - expect[j]).abs() < 1e-12, "row {i} dim {j}");
            }
        }
    }

    #[test]
    fn mask_substitution_hides_replaced_box() {
        // masking a slot destroys its box: the resulting embedding is the
        // same no matter which box the mask replaced
        let d = 16;
        let t = 4;
        let params = EmbeddingParams::init(d, &mut ChaCha8Rng::seed_from_u64(3));
        let base = bb(0.5, 0.5, 0.1, 0.1);
        let build = |original: BBox| {
            let mut slots =
                vec![Slot::Box(base), Slot::Box(original), Slot::Box(base), Slot::Box(base)];
            slots[1] = Slot::Mask; // the augmentation step
            let h = HistoricalTrajectory::new(slots);
            assert_eq!(h.len(), t);
            let mut tape = Tape::new();
            let tokens = bind_tokens(&mut tape, &params, false).unwrap();
            let out = build_embedding(&mut tape, &h, &tokens, d, 100.0).unwrap();
            tape.value(out.z).to_vec()
        };
        let z1 = build(bb(0.1, 0.1, 0.1, 0.1));
        let z2 = build(bb(0.9, 0.9, 0.3, 0.3));
        assert_eq!(z1, z2);
    }

    #[test]
    fn all_masked_rejected() {
        let d = 16;
        let params = EmbeddingParams::init(d, &mut ChaCha8Rng::seed_from_u64(4));
        let h = HistoricalTrajectory::new(vec![Slot::Mask; 5]);
        let mut tape = Tape::new();
        let tokens = bind_tokens(&mut tape, &params, false).unwrap();
        assert!(matches!(
            build_embedding(&mut tape, &h, &tokens, d, 100.0),
            Err(EmbeddingError::AllMasked)
        ));
    }

    #[test]
    fn tokens_receive_gradients() {
        let d = 16;
        let t = 4;
        let params = EmbeddingParams::init(d, &mut ChaCha8Rng::seed_from_u64(5));
        let mut slots = vec![Slot::Mask; t];
        slots[t - 1] = Slot::Box(bb(0.5, 0.5, 0.1, 0.1));
        let h = HistoricalTrajectory::new(slots);

        let mut tape = Tape::new();
        let tokens = bind_tokens(&mut tape, &params, true).unwrap();
        let out = build_embedding(&mut tape, &h, &tokens, d, 100.0).unwrap();
        let loss = tape.mean(out.z).unwrap();
        tape.backward(loss).unwrap();
        let g_pred = tape.grad(tokens.prediction_token).unwrap();
        let g_mask = tape.grad(tokens.mask_token).unwrap();
        assert!(g_pred.iter().any(|v| *v != 0.0));
        assert!(g_mask.iter().any(|v| *v != 0.0));
        // three mask rows feed the mask token: its adjoint is 3x the pred token's
        assert!((g_mask[0] - 3.0 * g_pred[0]).abs() < 1e-15);
    }
}
