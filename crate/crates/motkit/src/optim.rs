//! Adam optimizer with bias correction, plus optional global-norm clipping.

/// Per-parameter first/second moment state.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { step: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One Adam update in place. `state` must be shaped like `param`.
pub fn adam_step(param: &mut [f64], grad: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    assert_eq!(param.len(), grad.len(), "grad length mismatch");
    assert_eq!(param.len(), state.m.len(), "state length mismatch");
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - cfg.beta1.powf(t);
    let bc2 = 1.0 - cfg.beta2.powf(t);
    for i in 0..param.len() {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        param[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Scale a set of gradient buffers so their joint L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut [&mut Vec<f64>], max_norm: f64) {
    let sq: f64 = grads.iter().flat_map(|g| g.iter()).map(|v| v * v).sum();
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            for v in g.iter_mut() {
                *v *= scale;
            }
        }
    }
}
