//! Adaptable motion predictor: a post-norm transformer encoder over the
//! historical trajectory embedding, with the spatial rows re-injected before
//! every layer, and a prediction head that turns the refined prediction token
//! into a bounding box through Linear-ReLU-Linear-ReLU-Linear-Sigmoid.

use crate::embedding::{
    bind_tokens, build_embedding, BoundTokens, EmbeddingError, EmbeddingParams,
    HistoricalTrajectory, DEFAULT_SPATIAL_SCALE,
};
use crate::geometry::BBox;
use crate::tensor::{Tape, TensorError, TensorId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("batch item {index}: {source}")]
    BatchItem { index: usize, source: Box<ModelError> },
    #[error("config invalid: {0}")]
    BadConfig(String),
}

/// Architecture hyperparameters of the encoder and head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    pub n_layers: usize,
    pub n_heads: usize,
    pub d: usize,
    pub ffn_dim: usize,
    pub head_hidden: usize,
    /// Historical trajectory length T.
    pub t: usize,
    /// Scale applied to coordinates inside the spatial sinusoid.
    pub spatial_scale: f64,
}

impl EncoderConfig {
    /// Paper-scale preset: 6 layers, 8 heads, D = 512, T = 30.
    pub fn paper() -> Self {
        Self {
            n_layers: 6,
            n_heads: 8,
            d: 512,
            ffn_dim: 4 * 512,
            head_hidden: 512,
            t: 30,
            spatial_scale: DEFAULT_SPATIAL_SCALE,
        }
    }

    /// CI-scale preset.
    pub fn toy() -> Self {
        Self {
            n_layers: 2,
            n_heads: 4,
            d: 64,
            ffn_dim: 4 * 64,
            head_hidden: 64,
            t: 10,
            spatial_scale: DEFAULT_SPATIAL_SCALE,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.d == 0 || self.n_layers == 0 || self.n_heads == 0 || self.t == 0 {
            return Err(ModelError::BadConfig("all dimensions must be positive".into()));
        }
        if self.d % self.n_heads != 0 {
            return Err(ModelError::BadConfig(format!(
                "D = {} not divisible by {} heads",
                self.d, self.n_heads
            )));
        }
        if self.d % 8 != 0 {
            return Err(ModelError::BadConfig(format!("D = {} not divisible by 8", self.d)));
        }
        Ok(())
    }
}

/// A named, shaped parameter array.
#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub name: String,
    pub data: Vec<f64>,
    pub shape: Vec<usize>,
}

impl ParamTensor {
    fn new(name: impl Into<String>, data: Vec<f64>, shape: Vec<usize>) -> Self {
        let name = name.into();
        debug_assert_eq!(data.len(), shape.iter().product::<usize>(), "{name}");
        Self { name, data, shape }
    }
}

#[derive(Debug, Clone)]
pub struct LayerParams {
    pub wq: ParamTensor,
    pub bq: ParamTensor,
    pub wk: ParamTensor,
    pub bk: ParamTensor,
    pub wv: ParamTensor,
    pub bv: ParamTensor,
    pub wo: ParamTensor,
    pub bo: ParamTensor,
    pub ffn_w1: ParamTensor,
    pub ffn_b1: ParamTensor,
    pub ffn_w2: ParamTensor,
    pub ffn_b2: ParamTensor,
    pub norm1_gain: ParamTensor,
    pub norm1_bias: ParamTensor,
    pub norm2_gain: ParamTensor,
    pub norm2_bias: ParamTensor,
}

#[derive(Debug, Clone)]
pub struct HeadParams {
    pub w1: ParamTensor,
    pub b1: ParamTensor,
    pub w2: ParamTensor,
    pub b2: ParamTensor,
    pub w3: ParamTensor,
    pub b3: ParamTensor,
}

/// All learnable arrays of the predictor.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub config: EncoderConfig,
    pub embed: EmbeddingParams,
    pub layers: Vec<LayerParams>,
    pub head: HeadParams,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect()
}

impl ModelParams {
    /// Seeded initialization: Xavier-uniform weights, zero biases, unit
    /// layer-norm gains, N(0, 0.02) tokens.
    pub fn init(config: EncoderConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.d;
        let f = config.ffn_dim;
        let hh = config.head_hidden;
        let embed = EmbeddingParams::init(d, &mut rng);
        let mut layers = Vec::with_capacity(config.n_layers);
        for l in 0..config.n_layers {
            let p = |suffix: &str| format!("enc.{l}.{suffix}");
            layers.push(LayerParams {
                wq: ParamTensor::new(p("attn.wq"), xavier(&mut rng, d, d), vec![d, d]),
                bq: ParamTensor::new(p("attn.bq"), vec![0.0; d], vec![d]),
                wk: ParamTensor::new(p("attn.wk"), xavier(&mut rng, d, d), vec![d, d]),
                bk: ParamTensor::new(p("attn.bk"), vec![0.0; d], vec![d]),
                wv: ParamTensor::new(p("attn.wv"), xavier(&mut rng, d, d), vec![d, d]),
                bv: ParamTensor::new(p("attn.bv"), vec![0.0; d], vec![d]),
                wo: ParamTensor::new(p("attn.wo"), xavier(&mut rng, d, d), vec![d, d]),
                bo: ParamTensor::new(p("attn.bo"), vec![0.0; d], vec![d]),
                ffn_w1: ParamTensor::new(p("ffn.w1"), xavier(&mut rng, d, f), vec![d, f]),
                ffn_b1: ParamTensor::new(p("ffn.b1"), vec![0.0; f], vec![f]),
                ffn_w2: ParamTensor::new(p("ffn.w2"), xavier(&mut rng, f, d), vec![f, d]),
                ffn_b2: ParamTensor::new(p("ffn.b2"), vec![0.0; d], vec![d]),
                norm1_gain: ParamTensor::new(p("norm1.gain"), vec![1.0; d], vec![d]),
                norm1_bias: ParamTensor::new(p("norm1.bias"), vec![0.0; d], vec![d]),
                norm2_gain: ParamTensor::new(p("norm2.gain"), vec![1.0; d], vec![d]),
                norm2_bias: ParamTensor::new(p("norm2.bias"), vec![0.0; d], vec![d]),
            });
        }
        let head = HeadParams {
            w1: ParamTensor::new("head.w1", xavier(&mut rng, d, hh), vec![d, hh]),
            b1: ParamTensor::new("head.b1", vec![0.0; hh], vec![hh]),
            w2: ParamTensor::new("head.w2", xavier(&mut rng, hh, hh), vec![hh, hh]),
            b2: ParamTensor::new("head.b2", vec![0.0; hh], vec![hh]),
            w3: ParamTensor::new("head.w3", xavier(&mut rng, hh, 4), vec![hh, 4]),
            b3: ParamTensor::new("head.b3", vec![0.0; 4], vec![4]),
        };
        Ok(Self { config, embed, layers, head })
    }

    /// Deterministic iteration over every parameter, tokens first.
    pub fn visit(&self, mut f: impl FnMut(&ParamTensor)) {
        f(&ParamTensor::new(
            "embed.pred_token",
            self.embed.prediction_token.clone(),
            vec![self.config.d],
        ));
        f(&ParamTensor::new(
            "embed.mask_token",
            self.embed.mask_token.clone(),
            vec![self.config.d],
        ));
        for l in &self.layers {
            for t in [
                &l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.ffn_w1, &l.ffn_b1,
                &l.ffn_w2, &l.ffn_b2, &l.norm1_gain, &l.norm1_bias, &l.norm2_gain, &l.norm2_bias,
            ] {
                f(t);
            }
        }
        for t in [
            &self.head.w1,
            &self.head.b1,
            &self.head.w2,
            &self.head.b2,
            &self.head.w3,
            &self.head.b3,
        ] {
            f(t);
        }
    }

    /// Mutable slices of every parameter in `visit` order, token slices first.
    pub fn visit_mut(&mut self) -> Vec<(&str, &mut Vec<f64>)> {
        let mut out: Vec<(&str, &mut Vec<f64>)> = Vec::new();
        out.push(("embed.pred_token", &mut self.embed.prediction_token));
        out.push(("embed.mask_token", &mut self.embed.mask_token));
        for l in &mut self.layers {
            for t in [
                &mut l.wq,
                &mut l.bq,
                &mut l.wk,
                &mut l.bk,
                &mut l.wv,
                &mut l.bv,
                &mut l.wo,
                &mut l.bo,
                &mut l.ffn_w1,
                &mut l.ffn_b1,
                &mut l.ffn_w2,
                &mut l.ffn_b2,
                &mut l.norm1_gain,
                &mut l.norm1_bias,
                &mut l.norm2_gain,
                &mut l.norm2_bias,
            ] {
                out.push((t.name.as_str(), &mut t.data));
            }
        }
        for t in [
            &mut self.head.w1,
            &mut self.head.b1,
            &mut self.head.w2,
            &mut self.head.b2,
            &mut self.head.w3,
            &mut self.head.b3,
        ] {
            out.push((t.name.as_str(), &mut t.data));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(|p| n += p.data.len());
        n
    }
}

/// Tape handles for every parameter of one forward pass.
pub struct BoundModel {
    pub tokens: BoundTokens,
    pub layers: Vec<BoundLayer>,
    pub head: BoundHead,
}

pub struct BoundLayer {
    pub wq: TensorId,
    pub bq: TensorId,
    pub wk: TensorId,
    pub bk: TensorId,
    pub wv: TensorId,
    pub bv: TensorId,
    pub wo: TensorId,
    pub bo: TensorId,
    pub ffn_w1: TensorId,
    pub ffn_b1: TensorId,
    pub ffn_w2: TensorId,
    pub ffn_b2: TensorId,
    pub norm1_gain: TensorId,
    pub norm1_bias: TensorId,
    pub norm2_gain: TensorId,
    pub norm2_bias: TensorId,
}

pub struct BoundHead {
    pub w1: TensorId,
    pub b1: TensorId,
    pub w2: TensorId,
    pub b2: TensorId,
    pub w3: TensorId,
    pub b3: TensorId,
}

impl BoundModel {
    /// Parameter tensor ids in `ModelParams::visit` order.
    pub fn ids(&self) -> Vec<TensorId> {
        let mut ids = vec![self.tokens.prediction_token, self.tokens.mask_token];
        for l in &self.layers {
            ids.extend([
                l.wq, l.bq, l.wk, l.bk, l.wv, l.bv, l.wo, l.bo, l.ffn_w1, l.ffn_b1, l.ffn_w2,
                l.ffn_b2, l.norm1_gain, l.norm1_bias, l.norm2_gain, l.norm2_bias,
            ]);
        }
        ids.extend([
            self.head.w1,
            self.head.b1,
            self.head.w2,
            self.head.b2,
            self.head.w3,
            self.head.b3,
        ]);
        ids
    }
}

/// Register every parameter on the tape. `trainable` marks them for gradients.
pub fn bind_model(
    tape: &mut Tape,
    params: &ModelParams,
    trainable: bool,
) -> Result<BoundModel, ModelError> {
    let tokens = bind_tokens(tape, &params.embed, trainable)?;
    let mut layers = Vec::with_capacity(params.layers.len());
    for l in &params.layers {
        let mut bind =
            |t: &ParamTensor| tape.leaf(t.data.clone(), t.shape.clone(), trainable);
        layers.push(BoundLayer {
            wq: bind(&l.wq)?,
            bq: bind(&l.bq)?,
            wk: bind(&l.wk)?,
            bk: bind(&l.bk)?,
            wv: bind(&l.wv)?,
            bv: bind(&l.bv)?,
            wo: bind(&l.wo)?,
            bo: bind(&l.bo)?,
            ffn_w1: bind(&l.ffn_w1)?,
            ffn_b1: bind(&l.ffn_b1)?,
            ffn_w2: bind(&l.ffn_w2)?,
            ffn_b2: bind(&l.ffn_b2)?,
            norm1_gain: bind(&l.norm1_gain)?,
            norm1_bias: bind(&l.norm1_bias)?,
            norm2_gain: bind(&l.norm2_gain)?,
            norm2_bias: bind(&l.norm2_bias)?,
        });
    }
    let mut bind = |t: &ParamTensor| tape.leaf(t.data.clone(), t.shape.clone(), trainable);
    let head = BoundHead {
        w1: bind(&params.head.w1)?,
        b1: bind(&params.head.b1)?,
        w2: bind(&params.head.w2)?,
        b2: bind(&params.head.b2)?,
        w3: bind(&params.head.w3)?,
        b3: bind(&params.head.b3)?,
    };
    Ok(BoundModel { tokens, layers, head })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EncodeOptions {
    /// Test harness hook: treat both layer norms as identity.
    pub skip_layer_norm: bool,
}

fn linear(
    tape: &mut Tape,
    x: TensorId,
    w: TensorId,
    b: TensorId,
) -> Result<TensorId, TensorError> {
    let y = tape.matmul(x, w)?;
    tape.add_row_broadcast(y, b)
}

fn mhsa(
    tape: &mut Tape,
    x: TensorId,
    layer: &BoundLayer,
    n_heads: usize,
) -> Result<TensorId, TensorError> {
    let d = tape.shape(x)[1];
    let head_dim = d / n_heads;
    let q = linear(tape, x, layer.wq, layer.bq)?;
    let k = linear(tape, x, layer.wk, layer.bk)?;
    let v = linear(tape, x, layer.wv, layer.bv)?;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut heads = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let (lo, hi) = (h * head_dim, (h + 1) * head_dim);
        let qh = tape.slice(q, 1, lo, hi)?;
        let kh = tape.slice(k, 1, lo, hi)?;
        let vh = tape.slice(v, 1, lo, hi)?;
        let kt = tape.transpose(kh)?;
        let scores = tape.matmul(qh, kt)?;
        let scaled = tape.scalar_mul(scores, scale)?;
        let attn = tape.softmax(scaled, 1)?;
        heads.push(tape.matmul(attn, vh)?);
    }
    let cat = tape.concat(1, &heads)?;
    linear(tape, cat, layer.wo, layer.bo)
}

/// Run the encoder stack over Z with X_spat added before every layer.
pub fn encode(
    tape: &mut Tape,
    z: TensorId,
    x_spat: TensorId,
    model: &BoundModel,
    config: &EncoderConfig,
) -> Result<TensorId, ModelError> {
    encode_with_options(tape, z, x_spat, model, config, EncodeOptions::default())
}

pub fn encode_with_options(
    tape: &mut Tape,
    z: TensorId,
    x_spat: TensorId,
    model: &BoundModel,
    config: &EncoderConfig,
    opts: EncodeOptions,
) -> Result<TensorId, ModelError> {
    if tape.shape(z) != tape.shape(x_spat) {
        return Err(TensorError::ShapeMismatch {
            op: "encode",
            lhs: tape.shape(z).to_vec(),
            rhs: tape.shape(x_spat).to_vec(),
        }
        .into());
    }
    let mut h = z;
    for layer in &model.layers {
        let h_in = tape.add(h, x_spat)?;
        let attn = mhsa(tape, h_in, layer, config.n_heads)?;
        let res1 = tape.add(h_in, attn)?;
        let n1 = if opts.skip_layer_norm {
            res1
        } else {
            tape.layer_norm(res1, layer.norm1_gain, layer.norm1_bias, LAYER_NORM_EPS)?
        };
        let f1 = linear(tape, n1, layer.ffn_w1, layer.ffn_b1)?;
        let f1a = tape.relu(f1)?;
        let f2 = linear(tape, f1a, layer.ffn_w2, layer.ffn_b2)?;
        let res2 = tape.add(n1, f2)?;
        h = if opts.skip_layer_norm {
            res2
        } else {
            tape.layer_norm(res2, layer.norm2_gain, layer.norm2_bias, LAYER_NORM_EPS)?
        };
    }
    Ok(h)
}

/// Head over the refined prediction token: three linear layers with ReLU
/// between them and Sigmoid at the end, mapping into (0,1)^4.
pub fn head_forward(
    tape: &mut Tape,
    token: TensorId,
    head: &BoundHead,
) -> Result<TensorId, TensorError> {
    let h1 = linear(tape, token, head.w1, head.b1)?;
    let a1 = tape.relu(h1)?;
    let h2 = linear(tape, a1, head.w2, head.b2)?;
    let a2 = tape.relu(h2)?;
    let h3 = linear(tape, a2, head.w3, head.b3)?;
    tape.sigmoid(h3)
}

/// Forward pass on an existing tape, returning the prediction tensor [1 x 4].
pub fn forward_on_tape(
    tape: &mut Tape,
    h: &HistoricalTrajectory,
    model: &BoundModel,
    config: &EncoderConfig,
) -> Result<TensorId, ModelError> {
    let emb = build_embedding(tape, h, &model.tokens, config.d, config.spatial_scale)?;
    let refined = encode(tape, emb.z, emb.x_spat, model, config)?;
    let t = h.len();
    let token = tape.slice(refined, 0, t, t + 1)?;
    Ok(head_forward(tape, token, &model.head)?)
}

/// Predict the current-frame box for one trajectory.
pub fn predict_box(
    h: &HistoricalTrajectory,
    params: &ModelParams,
) -> Result<BBox, ModelError> {
    let mut tape = Tape::new();
    let model = bind_model(&mut tape, params, false)?;
    let pred = forward_on_tape(&mut tape, h, &model, &params.config)?;
    let v = tape.value(pred);
    Ok(BBox::new(v[0], v[1], v[2], v[3]).expect("sigmoid output is finite and positive"))
}

/// Elementwise batch prediction; output order matches input order.
pub fn predict_batch(
    hs: &[HistoricalTrajectory],
    params: &ModelParams,
) -> Result<Vec<BBox>, ModelError> {
    hs.iter()
        .enumerate()
        .map(|(index, h)| {
            predict_box(h, params)
                .map_err(|source| ModelError::BatchItem { index, source: Box::new(source) })
        })
        .collect()
}
