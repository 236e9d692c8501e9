//! SORT-style constant-velocity Kalman filter over normalized center-format
//! boxes. State is (cx, cy, w, h, vcx, vcy, vw, vh); the measurement picks
//! out the four position components.

use crate::geometry::BBox;
use nalgebra::{SMatrix, SVector};
use thiserror::Error;

type V8 = SVector<f64, 8>;
type M8 = SMatrix<f64, 8, 8>;
type M48 = SMatrix<f64, 4, 8>;
type M4 = SMatrix<f64, 4, 4>;
type V4 = SVector<f64, 4>;

#[derive(Debug, Error)]
pub enum KalmanError {
    #[error("innovation covariance is not positive definite")]
    NonPsdInnovation,
}

/// Noise parameters, in normalized units per frame.
#[derive(Debug, Clone, Copy)]
pub struct KalmanNoise {
    pub init_pos_std: f64,
    pub init_vel_std: f64,
    pub process_pos_var: f64,
    pub process_vel_var: f64,
    pub measurement_var: f64,
}

impl Default for KalmanNoise {
    fn default() -> Self {
        Self {
            init_pos_std: 0.05,
            init_vel_std: 0.1,
            process_pos_var: 1e-4,
            process_vel_var: 1e-4,
            measurement_var: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KalmanState {
    pub mean: V8,
    pub covariance: M8,
    noise: KalmanNoise,
}

fn transition() -> M8 {
    let mut f = M8::identity();
    for i in 0..4 {
        f[(i, 4 + i)] = 1.0;
    }
    f
}

fn measurement() -> M48 {
    let mut h = M48::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn symmetrize(p: &mut M8) {
    let pt = p.transpose();
    *p = (*p + pt) * 0.5;
}

/// Initialize from a first observation: zero velocity, diagonal covariance.
pub fn kf_init(b: &BBox, noise: KalmanNoise) -> KalmanState {
    let mut mean = V8::zeros();
    mean[0] = b.cx;
    mean[1] = b.cy;
    mean[2] = b.w;
    mean[3] = b.h;
    let mut covariance = M8::zeros();
    for i in 0..4 {
        covariance[(i, i)] = noise.init_pos_std * noise.init_pos_std;
        covariance[(4 + i, 4 + i)] = noise.init_vel_std * noise.init_vel_std;
    }
    KalmanState { mean, covariance, noise }
}

/// Advance one frame under constant velocity; returns the predicted box.
pub fn kf_predict(s: &KalmanState) -> (KalmanState, BBox) {
    let f = transition();
    let mean = f * s.mean;
    let mut q = M8::zeros();
    for i in 0..4 {
        q[(i, i)] = s.noise.process_pos_var;
        q[(4 + i, 4 + i)] = s.noise.process_vel_var;
    }
    let mut covariance = f * s.covariance * f.transpose() + q;
    symmetrize(&mut covariance);
    let b = BBox::new(mean[0], mean[1], mean[2].max(0.0), mean[3].max(0.0))
        .expect("finite state");
    (KalmanState { mean, covariance, noise: s.noise }, b)
}

/// Standard measurement correction with the Joseph-form covariance update.
pub fn kf_update(s: &KalmanState, z: &BBox) -> Result<KalmanState, KalmanError> {
    let h = measurement();
    let r = M4::identity() * s.noise.measurement_var;
    let innovation_cov = h * s.covariance * h.transpose() + r;
    let chol = innovation_cov.cholesky().ok_or(KalmanError::NonPsdInnovation)?;
    let gain = s.covariance * h.transpose() * chol.inverse();
    let zv = V4::new(z.cx, z.cy, z.w, z.h);
    let innovation = zv - h * s.mean;
    let mean = s.mean + gain * innovation;
    let ikh = M8::identity() - gain * h;
    let mut covariance = ikh * s.covariance * ikh.transpose() + gain * r * gain.transpose();
    symmetrize(&mut covariance);
    Ok(KalmanState { mean, covariance, noise: s.noise })
}

impl KalmanState {
    pub fn position_box(&self) -> BBox {
        BBox::new(
            self.mean[0],
            self.mean[1],
            self.mean[2].max(0.0),
            self.mean[3].max(0.0),
        )
        .expect("finite state")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::l1_box_distance;

    fn bb(cx: f64, cy: f64, w: f64, h: f64) -> BBox {
        BBox::new(cx, cy, w, h).unwrap()
    }

    #[test]
    fn init_gives_zero_velocity_and_prediction_stays_put() {
        let s = kf_init(&bb(0.4, 0.6, 0.1, 0.2), KalmanNoise::default());
        for i in 4..8 {
            assert_eq!(s.mean[i], 0.0);
        }
        let (s2, pred) = kf_predict(&s);
        assert_eq!(pred.values(), [0.4, 0.6, 0.1, 0.2]);
        // process noise grows the covariance
        assert!(s2.covariance.trace() > s.covariance.trace());
    }

    #[test]
    fn constant_velocity_step() {
        let mut s = kf_init(&bb(0.5, 0.5, 0.2, 0.2), KalmanNoise::default());
        s.mean[4] = 0.01; // vcx
        let (s2, pred) = kf_predict(&s);
        assert!((pred.cx - 0.51).abs() < 1e-15);
        assert_eq!(pred.cy, 0.5);
        let (_, pred2) = kf_predict(&s2);
        assert!((pred2.cx - 0.52).abs() < 1e-15);
    }

    #[test]
    fn covariance_stays_symmetric_psd_over_many_predicts() {
        let mut s = kf_init(&bb(0.5, 0.5, 0.1, 0.1), KalmanNoise::default());
        for _ in 0..100 {
            let (next, _) = kf_predict(&s);
            s = next;
        }
        let c = s.covariance;
        for i in 0..8 {
            for j in 0..8 {
                assert!((c[(i, j)] - c[(j, i)]).abs() < 1e-9);
            }
        }
        let eig = c.symmetric_eigenvalues();
        for v in eig.iter() {
            assert!(*v >= -1e-12, "eigenvalue {v}");
        }
    }

    #[test]
    fn update_with_predicted_box_keeps_position() {
        let s = kf_init(&bb(0.3, 0.3, 0.1, 0.1), KalmanNoise::default());
        let (s, pred) = kf_predict(&s);
        let s2 = kf_update(&s, &pred).unwrap();
        for i in 0..4 {
            assert!((s2.mean[i] - s.mean[i]).abs() < 1e-12);
        }
        // measured block variance shrinks
        assert!(s2.covariance[(0, 0)] <= s.covariance[(0, 0)]);
    }

    #[test]
    fn repeated_updates_converge_to_measurement() {
        let mut s = kf_init(&bb(0.2, 0.2, 0.1, 0.1), KalmanNoise::default());
        let target = bb(0.8, 0.7, 0.15, 0.25);
        for _ in 0..50 {
            let (pred, _) = kf_predict(&s);
            s = kf_update(&pred, &target).unwrap();
        }
        let got = s.position_box();
        assert!(
            l1_box_distance(&got, &target) < 1e-3,
            "distance {}",
            l1_box_distance(&got, &target)
        );
    }

    #[test]
    fn linear_motion_error_vanishes_with_observations() {
        // exactly linear trajectory, noise-free: one-step prediction error
        // drops below 1e-3 after 20 frames
        let v = (0.008, -0.004);
        let pos = |t: f64| bb(0.2 + v.0 * t, 0.7 + v.1 * t, 0.1, 0.1);
        let mut s = kf_init(&pos(0.0), KalmanNoise::default());
        let mut err = f64::INFINITY;
        for t in 1..=25 {
            let (pred_state, pred_box) = kf_predict(&s);
            let truth = pos(t as f64);
            err = l1_box_distance(&pred_box, &truth);
            s = kf_update(&pred_state, &truth).unwrap();
        }
        assert!(err < 1e-3, "after 25 frames error {err}");
    }
}
