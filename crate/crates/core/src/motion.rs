//! Constant-velocity Kalman filter over `(cx, cy, w, h)`.
//!
//! State is `[cx, cy, w, h, vcx, vcy, vw, vh]`, velocities per frame. Noise
//! standard deviations are proportional to the current box height.

use nalgebra::{SMatrix, SVector};

use crate::geometry::BBox;

pub type StateVec = SVector<f64, 8>;
pub type StateCov = SMatrix<f64, 8, 8>;
type MeasVec = SVector<f64, 4>;
type MeasCov = SMatrix<f64, 4, 4>;
type MeasMat = SMatrix<f64, 4, 8>;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Position/size noise std as a fraction of box height.
    pub std_weight_position: f64,
    /// Velocity noise std as a fraction of box height.
    pub std_weight_velocity: f64,
    /// Initial position std in units of `std_weight_position * h`.
    pub init_position_scale: f64,
    /// Initial velocity std in units of `std_weight_velocity * h`.
    pub init_velocity_scale: f64,
    /// Smallest width/height a predicted box may take.
    pub min_size: f64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            init_position_scale: 2.0,
            init_velocity_scale: 10.0,
            min_size: 1.0,
        }
    }
}

impl MotionConfig {
    fn height_scale(&self, h: f64) -> f64 {
        h.max(self.min_size)
    }

    pub fn initial_covariance(&self, h: f64) -> StateCov {
        let h = self.height_scale(h);
        let p = self.init_position_scale * self.std_weight_position * h;
        let v = self.init_velocity_scale * self.std_weight_velocity * h;
        StateCov::from_diagonal(&StateVec::from([p, p, p, p, v, v, v, v]).map(|s| s * s))
    }

    pub fn process_noise(&self, h: f64) -> StateCov {
        let h = self.height_scale(h);
        let p = self.std_weight_position * h;
        let v = self.std_weight_velocity * h;
        StateCov::from_diagonal(&StateVec::from([p, p, p, p, v, v, v, v]).map(|s| s * s))
    }

    pub fn measurement_noise(&self, h: f64) -> MeasCov {
        let p = self.std_weight_position * self.height_scale(h);
        MeasCov::from_diagonal_element(p * p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionState {
    pub mean: StateVec,
    pub covariance: StateCov,
    pub frame: usize,
}

fn transition() -> StateCov {
    let mut f = StateCov::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn observation() -> MeasMat {
    let mut h = MeasMat::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn measure(b: &BBox) -> MeasVec {
    let (cx, cy) = b.center();
    MeasVec::new(cx, cy, b.w(), b.h())
}

fn symmetrize(p: &StateCov) -> StateCov {
    (p + p.transpose()) * 0.5
}

impl MotionState {
    pub fn init(b0: &BBox, frame: usize, cfg: &MotionConfig) -> Self {
        let z = measure(b0);
        let mean = StateVec::from([z[0], z[1], z[2], z[3], 0.0, 0.0, 0.0, 0.0]);
        Self { mean, covariance: cfg.initial_covariance(b0.h()), frame }
    }

    /// Box described by the current mean, with size clamped to `min_size`.
    pub fn bbox(&self, cfg: &MotionConfig) -> BBox {
        let w = self.mean[2].max(cfg.min_size);
        let h = self.mean[3].max(cfg.min_size);
        BBox::from_center(self.mean[0], self.mean[1], w, h)
            .expect("state mean stays finite with positive size")
    }

    /// One-frame constant-velocity prediction.
    pub fn predict(&self, cfg: &MotionConfig) -> (BBox, MotionState) {
        let f = transition();
        let mut mean = f * self.mean;
        mean[2] = mean[2].max(cfg.min_size);
        mean[3] = mean[3].max(cfg.min_size);
        let covariance = symmetrize(&(f * self.covariance * f.transpose() + cfg.process_noise(self.mean[3])));
        let next = MotionState { mean, covariance, frame: self.frame + 1 };
        (next.bbox(cfg), next)
    }

    /// Measurement update on `(cx, cy, w, h)`, Joseph form.
    pub fn update(&self, observed: &BBox, cfg: &MotionConfig) -> MotionState {
        let h = observation();
        let r = cfg.measurement_noise(self.mean[3]);
        let p = &self.covariance;
        let s = h * p * h.transpose() + r;
        let s_inv = s
            .cholesky()
            .map(|c| c.inverse())
            .or_else(|| s.try_inverse())
            .unwrap_or_else(MeasCov::zeros);
        let gain = p * h.transpose() * s_inv;
        let innovation = measure(observed) - h * self.mean;
        let mut mean = self.mean + gain * innovation;
        mean[2] = mean[2].max(cfg.min_size);
        mean[3] = mean[3].max(cfg.min_size);
        let ikh = StateCov::identity() - gain * h;
        let covariance = symmetrize(&(ikh * p * ikh.transpose() + gain * r * gain.transpose()));
        MotionState { mean, covariance, frame: self.frame }
    }

    /// Smallest eigenvalue of the covariance.
    pub fn min_eigenvalue(&self) -> f64 {
        self.covariance.symmetric_eigen().eigenvalues.min()
    }
}
