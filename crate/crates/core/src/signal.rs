//! The sensing pipeline: offset and gripper-weight removal, moving-average smoothing,
//! and reproducible Gaussian sensor noise.

use alloc::collections::VecDeque;
use core::ops::{Add, Mul};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{self, ParamError};
use crate::geometry::Vec3;
use crate::STANDARD_GRAVITY;

/// Sliding-window arithmetic mean.
///
/// Until `window` samples have arrived the output is the mean of the samples seen so far.
/// The mean is recomputed from the buffer on every step, so there is no accumulated
/// rounding drift and output is a pure function of the last `window` inputs.
#[derive(Debug, Clone)]
pub struct MovingAverage<T = Vec3> {
    window: usize,
    buffer: VecDeque<T>,
}

impl<T> MovingAverage<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    pub fn new(window: usize) -> Result<Self, ParamError> {
        if window == 0 {
            return Err(ParamError::NotPositive {
                name: "window",
                value: 0.0,
            });
        }
        Ok(Self {
            window,
            buffer: VecDeque::with_capacity(window),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn is_warm(&self) -> bool {
        self.buffer.len() == self.window
    }

    pub fn reset(&mut self) {
        self.buffer.clear();
    }

    /// Pushes a sample and returns the current mean.
    pub fn step(&mut self, sample: T) -> T {
        if self.buffer.len() == self.window {
            self.buffer.pop_front();
        }
        self.buffer.push_back(sample);
        self.mean().unwrap_or_default()
    }

    pub fn mean(&self) -> Option<T> {
        if self.buffer.is_empty() {
            return None;
        }
        let sum = self.buffer.iter().fold(T::default(), |acc, &x| acc + x);
        Some(sum * (1.0 / self.buffer.len() as f64))
    }
}

/// Free-function form of [`MovingAverage::step`].
pub fn filter_step<T>(f: &mut MovingAverage<T>, sample: T) -> T
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    f.step(sample)
}

/// Static loads the FT sensor sees that are not the payload.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BiasModel {
    /// Constant sensor offset, N.
    pub ft_offset: Vec3,
    /// Gripper mass, kg.
    pub gripper_mass: f64,
    /// Gravity vector in the base frame, m/s².
    pub gravity: Vec3,
    /// Skip the [9, 10.5] m/s² sanity band on `gravity`.
    pub allow_any_gravity: bool,
    /// Also remove the gripper's inertial reaction `−m_g·a` using the accelerometer.
    pub gripper_inertia: bool,
}

impl Default for BiasModel {
    fn default() -> Self {
        Self {
            ft_offset: Vec3::ZERO,
            gripper_mass: 1.0,
            gravity: Vec3::vertical(-STANDARD_GRAVITY),
            allow_any_gravity: false,
            gripper_inertia: true,
        }
    }
}

impl BiasModel {
    pub const GRAVITY_BAND: (f64, f64) = (9.0, 10.5);

    pub fn validate(&self) -> Result<(), crate::ConfigError> {
        use crate::ConfigError;
        if !self.ft_offset.is_finite() {
            return Err(ConfigError::new(
                "ft_offset",
                ParamError::NotFinite {
                    name: "ft_offset",
                    value: self.ft_offset.norm(),
                },
            ));
        }
        error::non_negative("gripper_mass", self.gripper_mass).map_err(|e| ConfigError::new("gripper_mass", e))?;
        let g = self.gravity.norm();
        error::finite("gravity", g).map_err(|e| ConfigError::new("gravity", e))?;
        let (lo, hi) = Self::GRAVITY_BAND;
        if !self.allow_any_gravity && !(lo..=hi).contains(&g) {
            return Err(ConfigError::new(
                "gravity",
                ParamError::OutOfRange {
                    name: "|gravity|",
                    value: g,
                    min: lo,
                    max: hi,
                },
            ));
        }
        Ok(())
    }

    pub fn gravity_magnitude(&self) -> f64 {
        self.gravity.norm()
    }
}

/// Removes the sensor offset and the gripper's weight from a base-frame FT reading,
/// leaving the force exerted by everything beyond the gripper.
pub fn compensate(raw_ft_base: Vec3, bias: &BiasModel) -> Vec3 {
    raw_ft_base - bias.ft_offset - bias.gravity * bias.gripper_mass
}

/// Like [`compensate`], but removes the gripper's full load `m_g·(g − a)` so that its
/// inertia during motion does not show up as external force.
pub fn compensate_dynamic(raw_ft_base: Vec3, accel_base: Vec3, bias: &BiasModel) -> Vec3 {
    raw_ft_base - bias.ft_offset - (bias.gravity - accel_base) * bias.gripper_mass
}

/// Per-axis independent white Gaussian noise for the FT sensor and accelerometer.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct NoiseModel {
    /// FT noise standard deviation per axis, N.
    pub ft_sigma: f64,
    /// Accelerometer noise standard deviation per axis, m/s².
    pub accel_sigma: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            ft_sigma: 2.0,
            accel_sigma: 0.02,
            seed: 42,
        }
    }
}

impl NoiseModel {
    pub const fn noiseless() -> Self {
        Self {
            ft_sigma: 0.0,
            accel_sigma: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), crate::ConfigError> {
        use crate::ConfigError;
        error::non_negative("ft_sigma", self.ft_sigma).map_err(|e| ConfigError::new("ft_sigma", e))?;
        error::non_negative("accel_sigma", self.accel_sigma).map_err(|e| ConfigError::new("accel_sigma", e))?;
        Ok(())
    }

    /// Returns `(ft_noise, accel_noise)` for `tick`.
    ///
    /// Each tick owns its own ChaCha stream, so samples depend only on `(seed, tick)`
    /// and not on how many earlier ticks were drawn.
    pub fn sample(&self, tick: u64) -> (Vec3, Vec3) {
        if self.ft_sigma == 0.0 && self.accel_sigma == 0.0 {
            return (Vec3::ZERO, Vec3::ZERO);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(tick);
        let mut n = || -> f64 { StandardNormal.sample(&mut rng) };
        let ft = Vec3::new(n(), n(), n()) * self.ft_sigma;
        let acc = Vec3::new(n(), n(), n()) * self.accel_sigma;
        (ft, acc)
    }
}

/// Free-function form of [`NoiseModel::sample`].
pub fn sample_noise(model: &NoiseModel, tick: u64) -> (Vec3, Vec3) {
    model.sample(tick)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn z(v: f64) -> Vec3 {
        Vec3::vertical(v)
    }

    #[test]
    fn compensate_gripper_only_cancels() {
        let bias = BiasModel {
            gripper_mass: 1.0,
            ..BiasModel::default()
        };
        assert_eq!(compensate(z(-9.81), &bias), Vec3::ZERO);
    }

    #[test]
    fn compensate_leaves_payload_weight() {
        let bias = BiasModel::default();
        let out = compensate(z(-24.525), &bias);
        assert_eq!(out.x, 0.0);
        assert_eq!(out.y, 0.0);
        assert!((out.z - -14.715).abs() < 1e-12);
    }

    #[test]
    fn compensate_pure_offset() {
        let bias = BiasModel {
            ft_offset: Vec3::new(1.0, 2.0, 3.0),
            gripper_mass: 0.0,
            ..BiasModel::default()
        };
        assert_eq!(compensate(Vec3::new(1.0, 2.0, 3.0), &bias), Vec3::ZERO);
    }

    #[test]
    fn dynamic_compensation_removes_gripper_inertia() {
        let bias = BiasModel::default();
        let a = Vec3::new(0.5, -0.2, 1.3);
        let raw = (bias.gravity - a) * (bias.gripper_mass + 1.5);
        let out = compensate_dynamic(raw, a, &bias);
        assert!((out - (bias.gravity - a) * 1.5).norm() < 1e-12);
        assert_eq!(
            compensate_dynamic(Vec3::vertical(-24.525), Vec3::ZERO, &bias),
            compensate(Vec3::vertical(-24.525), &bias)
        );
    }

    #[test]
    fn gravity_band_is_enforced_unless_overridden() {
        let mut bias = BiasModel {
            gravity: z(-1.62),
            ..BiasModel::default()
        };
        assert!(bias.validate().is_err());
        bias.allow_any_gravity = true;
        assert!(bias.validate().is_ok());
        bias.gripper_mass = -0.1;
        assert_eq!(bias.validate().unwrap_err().path, "gripper_mass");
    }

    #[test]
    fn warm_up_averages_what_has_arrived() {
        let mut f = MovingAverage::new(3).unwrap();
        let out: Vec<f64> = [1.0, 2.0, 3.0, 4.0].iter().map(|&s| f.step(z(s)).z).collect();
        assert_eq!(out, vec![1.0, 1.5, 2.0, 3.0]);
    }

    #[test]
    fn window_one_passes_through() {
        let mut f = MovingAverage::new(1).unwrap();
        for s in [3.0, -7.5, 0.25] {
            assert_eq!(f.step(z(s)), z(s));
        }
    }

    #[test]
    fn zero_window_rejected() {
        assert!(MovingAverage::<f64>::new(0).is_err());
    }

    #[test]
    fn zero_sigma_is_silent() {
        let m = NoiseModel {
            ft_sigma: 0.0,
            accel_sigma: 0.0,
            seed: 9,
        };
        for tick in 0..100 {
            assert_eq!(m.sample(tick), (Vec3::ZERO, Vec3::ZERO));
        }
    }

    #[test]
    fn same_seed_and_tick_repeat() {
        let m = NoiseModel::default();
        assert_eq!(m.sample(1234), m.sample(1234));
        assert_ne!(m.sample(1234), m.sample(1235));
        let other = NoiseModel { seed: 43, ..m };
        assert_ne!(m.sample(1234), other.sample(1234));
    }

    #[test]
    fn empirical_sigma_matches() {
        let m = NoiseModel {
            ft_sigma: 4.0,
            accel_sigma: 0.5,
            seed: 7,
        };
        let n = 100_000u64;
        let (mut s, mut s2, mut a2) = (0.0, 0.0, 0.0);
        for tick in 0..n {
            let (ft, acc) = m.sample(tick);
            s += ft.z;
            s2 += ft.z * ft.z;
            a2 += acc.x * acc.x;
        }
        let mean = s / n as f64;
        let std = (s2 / n as f64 - mean * mean).sqrt();
        assert!((std - 4.0).abs() / 4.0 < 0.02, "ft std {std}");
        assert!(mean.abs() < 0.05, "ft mean {mean}");
        let astd = (a2 / n as f64).sqrt();
        assert!((astd - 0.5).abs() / 0.5 < 0.02, "accel std {astd}");
    }

    proptest! {
        #[test]
        fn constant_input_is_a_fixed_point(c in -1e3..1e3f64, window in 1usize..80, n in 1usize..200) {
            let mut f = MovingAverage::new(window).unwrap();
            for _ in 0..n {
                let out = f.step(c);
                prop_assert!((out - c).abs() <= 1e-12 * c.abs().max(1.0));
            }
        }

        #[test]
        fn output_is_mean_of_recent_inputs(xs in prop::collection::vec(-100.0..100.0f64, 1..120), window in 1usize..40) {
            let mut f = MovingAverage::new(window).unwrap();
            for (i, &x) in xs.iter().enumerate() {
                let out = f.step(x);
                let lo = (i + 1).saturating_sub(window);
                let tail = &xs[lo..=i];
                let want = tail.iter().sum::<f64>() / tail.len() as f64;
                prop_assert!((out - want).abs() <= 1e-9);
            }
        }

        #[test]
        fn filter_is_linear(
            xs in prop::collection::vec(-50.0..50.0f64, 1..60),
            ys in prop::collection::vec(-50.0..50.0f64, 60),
            a in -3.0..3.0f64,
            b in -3.0..3.0f64,
            window in 1usize..20,
        ) {
            let mut fx = MovingAverage::new(window).unwrap();
            let mut fy = MovingAverage::new(window).unwrap();
            let mut fc = MovingAverage::new(window).unwrap();
            for (&x, &y) in xs.iter().zip(&ys) {
                let lhs = fc.step(a * x + b * y);
                let rhs = a * fx.step(x) + b * fy.step(y);
                prop_assert!((lhs - rhs).abs() <= 1e-9);
            }
        }

        #[test]
        fn compensate_is_affine(
            r1 in (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64),
            r2 in (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64),
            m_g in 0.0..5.0f64,
        ) {
            let bias = BiasModel { gripper_mass: m_g, ..BiasModel::default() };
            let v1 = Vec3::new(r1.0, r1.1, r1.2);
            let v2 = Vec3::new(r2.0, r2.1, r2.2);
            let lhs = compensate(v1, &bias) - compensate(v2, &bias);
            prop_assert!((lhs - (v1 - v2)).norm() <= 1e-12);
        }
    }
}
