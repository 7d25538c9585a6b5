//! Constant-velocity Kalman filter over `[u, v, s, r, u̇, v̇, ṡ]`: box center,
//! area, aspect ratio and the velocities of the first three.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::SortError;
use crate::geometry::BBox;

pub type State = SVector<f64, 7>;
pub type Covariance = SMatrix<f64, 7, 7>;
type Measurement = SVector<f64, 4>;
type Observation = SMatrix<f64, 4, 7>;

/// Diagonal noise of the filter as standard deviations relative to the box
/// size. Entries for `u, v, u̇, v̇` are multiplied by `sqrt(area)`, those for
/// `s, ṡ` by the area, and the aspect-ratio entry is absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanParams {
    /// Measurement noise on `[u, v, s, r]`.
    pub measurement_noise: [f64; 4],
    /// Uncertainty of a freshly spawned track.
    pub initial_covariance: [f64; 7],
    /// Process noise per frame of prediction.
    pub process_noise: [f64; 7],
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            measurement_noise: [0.05, 0.05, 0.1, 0.05],
            initial_covariance: [0.1, 0.1, 0.2, 0.1, 0.5, 0.5, 1.0],
            process_noise: [0.05, 0.05, 0.1, 0.05, 0.03, 0.03, 0.06],
        }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<(), SortError> {
        let ok = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if ok(&self.measurement_noise) && ok(&self.initial_covariance) && ok(&self.process_noise) {
            Ok(())
        } else {
            Err(SortError::Config("noise magnitudes must be finite and non-negative".into()))
        }
    }
}

/// Scale of each state component for an area `s`.
fn scales(s: f64) -> [f64; 7] {
    let s = s.max(1.0);
    let l = s.sqrt();
    [l, l, s, 1.0, l, l, s]
}

fn variances<const N: usize>(weights: &[f64; N], s: f64) -> SVector<f64, N> {
    let sc = scales(s);
    SVector::from_fn(|i, _| (weights[i] * sc[i]).powi(2))
}

fn observation() -> Observation {
    Observation::from_fn(|i, j| if i == j { 1.0 } else { 0.0 })
}

/// `[cx, cy, area, w/h]` of a box with positive area.
pub fn box_to_measurement(b: &BBox) -> Result<[f64; 4], SortError> {
    if !(b.w > 0.0 && b.h > 0.0 && b.x.is_finite() && b.y.is_finite() && b.w.is_finite() && b.h.is_finite()) {
        return Err(SortError::DegenerateMeasurement(*b));
    }
    let c = b.center();
    Ok([c.x, c.y, b.w * b.h, b.w / b.h])
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanTrack {
    pub mean: State,
    pub covariance: Covariance,
    pub id: u64,
    pub hits: u32,
    pub hit_streak: u32,
    pub age: u32,
    pub time_since_update: u32,
}

impl KalmanTrack {
    pub fn new(id: u64, bbox: &BBox, params: &KalmanParams) -> Result<Self, SortError> {
        let z = box_to_measurement(bbox)?;
        let mut mean = State::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from_slice(&z);
        Ok(Self {
            mean,
            covariance: Covariance::from_diagonal(&variances(&params.initial_covariance, z[2])),
            id,
            hits: 1,
            hit_streak: 1,
            age: 0,
            time_since_update: 0,
        })
    }

    /// Advances the state by `dt` frames.
    pub fn predict(&mut self, dt: f64, params: &KalmanParams) {
        if self.mean[2] + dt * self.mean[6] <= 0.0 {
            self.mean[6] = 0.0;
        }
        let mut f = Covariance::identity();
        f[(0, 4)] = dt;
        f[(1, 5)] = dt;
        f[(2, 6)] = dt;
        self.mean = f * self.mean;
        let q = Covariance::from_diagonal(&variances(&params.process_noise, self.mean[2])) * dt;
        self.covariance = symmetrize(f * self.covariance * f.transpose() + q);
        self.age += 1;
        if self.time_since_update > 0 {
            self.hit_streak = 0;
        }
        self.time_since_update += 1;
    }

    /// Corrects the state with an observed box.
    pub fn update(&mut self, bbox: &BBox, params: &KalmanParams) -> Result<(), SortError> {
        let z = Measurement::from(box_to_measurement(bbox)?);
        let h = observation();
        let r = SMatrix::<f64, 4, 4>::from_diagonal(&variances(&params.measurement_noise, self.mean[2]));
        let innovation = z - h * self.mean;
        let s = h * self.covariance * h.transpose() + r;
        let s_inv = s.try_inverse().ok_or(SortError::Singular)?;
        let gain = self.covariance * h.transpose() * s_inv;
        self.mean += gain * innovation;
        // Joseph form keeps the covariance PSD under rounding.
        let a = Covariance::identity() - gain * h;
        self.covariance = symmetrize(a * self.covariance * a.transpose() + gain * r * gain.transpose());
        self.hits += 1;
        self.hit_streak += 1;
        self.time_since_update = 0;
        Ok(())
    }

    /// Current box; a negative area projects to an empty box.
    pub fn bbox(&self) -> BBox {
        state_to_box(&self.mean)
    }
}

pub fn state_to_box(x: &State) -> BBox {
    let s = x[2].max(0.0);
    let r = x[3].max(f64::MIN_POSITIVE);
    let w = (s * r).sqrt();
    let h = if w > 0.0 { s / w } else { 0.0 };
    BBox::new(x[0] - w / 2.0, x[1] - h / 2.0, w, h)
}

fn symmetrize(m: Covariance) -> Covariance {
    (m + m.transpose()) * 0.5
}
