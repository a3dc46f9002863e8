//! Online payload mass estimation from vertical force and gravity-corrected acceleration.

use crate::error::{self, ConfigError, ParamError};
use crate::geometry::Vec3;
use crate::math;
use crate::signal::MovingAverage;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EstimatorConfig {
    /// Below this |p̈_z| (m/s²) the ratio is not formed and the last estimate is held.
    pub accel_floor: f64,
    /// Moving-average length applied to the instantaneous ratio, samples.
    pub estimate_filter_window: usize,
    /// Keep the estimator disabled (output zero) until a grasp event.
    pub gate_after_grasp_only: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            accel_floor: 1.0,
            estimate_filter_window: 10,
            gate_after_grasp_only: true,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        error::positive("accel_floor", self.accel_floor).map_err(|e| ConfigError::new("accel_floor", e))?;
        if self.estimate_filter_window == 0 {
            return Err(ConfigError::new(
                "estimate_filter_window",
                ParamError::NotPositive {
                    name: "estimate_filter_window",
                    value: 0.0,
                },
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MassEstimate {
    /// Filtered estimate, kg. May be negative.
    pub m_u_hat: f64,
    /// Value handed to the controller, kg. Never negative.
    pub m_u_applied: f64,
    pub valid: bool,
    /// Unfiltered ratio from the latest valid sample, kg.
    pub raw_ratio: f64,
}

/// `f_z = f·ẑ` and `p̈_z = (p̈ − g)·ẑ`.
pub fn vertical_projections(f_base: Vec3, accel_base: Vec3, g: Vec3) -> (f64, f64) {
    (f_base.z, (accel_base - g).z)
}

/// Instantaneous `f_z / p̈_z − m_g`, or `None` when the denominator is under the floor
/// or any input is not finite.
pub fn mass_ratio(f_z: f64, accel_z_grav: f64, m_g: f64, accel_floor: f64) -> Option<f64> {
    if !(f_z.is_finite() && accel_z_grav.is_finite() && m_g.is_finite()) {
        return None;
    }
    if math::abs(accel_z_grav) < accel_floor {
        return None;
    }
    let r = f_z / accel_z_grav - m_g;
    r.is_finite().then_some(r)
}

/// One estimator update. `filter` smooths the raw ratio and is only fed valid samples.
/// Invalid samples hold `prev`.
pub fn estimate_mass(
    f_z: f64,
    accel_z_grav: f64,
    m_g: f64,
    cfg: &EstimatorConfig,
    prev: &MassEstimate,
    filter: &mut MovingAverage<f64>,
) -> MassEstimate {
    match mass_ratio(f_z, accel_z_grav, m_g, cfg.accel_floor) {
        Some(raw) => {
            let m_u_hat = filter.step(raw);
            MassEstimate {
                m_u_hat,
                m_u_applied: m_u_hat.max(0.0),
                valid: true,
                raw_ratio: raw,
            }
        }
        None => MassEstimate { valid: false, ..*prev },
    }
}

/// Stateful estimator with the post-grasp enable gate.
#[derive(Debug, Clone)]
pub struct MassEstimator {
    cfg: EstimatorConfig,
    filter: MovingAverage<f64>,
    enabled: bool,
    last: MassEstimate,
}

impl MassEstimator {
    pub fn new(cfg: EstimatorConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        let filter = MovingAverage::new(cfg.estimate_filter_window)
            .map_err(|e| ConfigError::new("estimate_filter_window", e))?;
        Ok(Self {
            enabled: !cfg.gate_after_grasp_only,
            cfg,
            filter,
            last: MassEstimate::default(),
        })
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub fn last(&self) -> MassEstimate {
        self.last
    }

    /// Clears the filter and the held estimate.
    pub fn reset(&mut self) {
        self.filter.reset();
        self.last = MassEstimate::default();
    }

    /// Called on grasp: start over from an empty filter.
    pub fn enable(&mut self) {
        self.reset();
        self.enabled = true;
    }

    /// Called on release when gating is on. The estimate returns to zero.
    pub fn disable(&mut self) {
        self.reset();
        self.enabled = !self.cfg.gate_after_grasp_only;
    }

    pub fn update(&mut self, f_z: f64, accel_z_grav: f64, m_g: f64) -> MassEstimate {
        if !self.enabled {
            self.last = MassEstimate::default();
            return self.last;
        }
        self.last = estimate_mass(f_z, accel_z_grav, m_g, &self.cfg, &self.last, &mut self.filter);
        self.last
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{compensate, BiasModel};
    use proptest::prelude::*;

    const G: Vec3 = Vec3::new(0.0, 0.0, -9.81);

    fn always_on() -> EstimatorConfig {
        EstimatorConfig {
            gate_after_grasp_only: false,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn projections() {
        let (fz, az) = vertical_projections(Vec3::vertical(-14.715), Vec3::ZERO, G);
        assert_eq!((fz, az), (-14.715, 9.81));
        assert_eq!(vertical_projections(Vec3::ZERO, G, G), (0.0, 0.0));
        assert_eq!(vertical_projections(Vec3::new(3.0, -4.0, 0.0), Vec3::ZERO, G).0, 0.0);
    }

    #[test]
    fn total_load_with_gripper_subtracted() {
        let mut est = MassEstimator::new(always_on()).unwrap();
        let e = est.update(24.525, 9.81, 1.0);
        assert!(e.valid);
        assert!((e.m_u_hat - 1.5).abs() < 1e-12);
        let mut est = MassEstimator::new(always_on()).unwrap();
        assert_eq!(est.update(0.0, 9.81, 0.0).m_u_hat, 0.0);
    }

    #[test]
    fn upward_reaction_goes_negative_but_applied_clamps() {
        let mut est = MassEstimator::new(always_on()).unwrap();
        let e = est.update(-5.0, 9.81, 0.0);
        assert!(e.m_u_hat < 0.0);
        assert_eq!(e.m_u_applied, 0.0);
    }

    #[test]
    fn small_denominator_holds_last() {
        let mut est = MassEstimator::new(always_on()).unwrap();
        let good = est.update(14.715, 9.81, 0.0);
        let held = est.update(1.0, 0.5, 0.0);
        assert!(!held.valid);
        assert_eq!(held.m_u_hat, good.m_u_hat);
        assert_eq!(held.m_u_applied, good.m_u_applied);
        let free_fall = est.update(0.0, 0.0, 0.0);
        assert!(!free_fall.valid && free_fall.m_u_hat.is_finite());
        let nan = est.update(f64::NAN, 9.81, 0.0);
        assert!(!nan.valid && nan.m_u_hat.is_finite());
    }

    #[test]
    fn gate_keeps_zero_until_enabled() {
        let mut est = MassEstimator::new(EstimatorConfig::default()).unwrap();
        assert_eq!(est.update(14.715, 9.81, 0.0), MassEstimate::default());
        est.enable();
        assert!((est.update(14.715, 9.81, 0.0).m_u_hat - 1.5).abs() < 1e-12);
        est.disable();
        assert_eq!(est.update(14.715, 9.81, 0.0).m_u_hat, 0.0);
    }

    #[test]
    fn bad_config_is_rejected() {
        let cfg = EstimatorConfig {
            accel_floor: 0.0,
            ..EstimatorConfig::default()
        };
        assert_eq!(MassEstimator::new(cfg).unwrap_err().path, "accel_floor");
        let cfg = EstimatorConfig {
            estimate_filter_window: 0,
            ..EstimatorConfig::default()
        };
        assert_eq!(MassEstimator::new(cfg).unwrap_err().path, "estimate_filter_window");
    }

    /// Reading the wrist supports for total mass `m` at acceleration `a`, load convention.
    fn raw_reading(m: f64, a: Vec3) -> Vec3 {
        (G - a) * m
    }

    #[test]
    fn compensated_and_raw_paths_agree() {
        let bias = BiasModel::default();
        let m_g = bias.gripper_mass;
        for m_u in [0.0, 0.5, 1.5, 5.0] {
            for az in [0.0, 1.3, -2.0] {
                let a = Vec3::vertical(az);
                let raw = raw_reading(m_g + m_u, a);
                let (fz_c, acc) = vertical_projections(-compensate(raw, &bias), a, G);
                let (fz_r, _) = vertical_projections(-raw, a, G);
                let via_comp = mass_ratio(fz_c, acc, 0.0, 1.0).unwrap();
                let via_raw = mass_ratio(fz_r, acc, m_g, 1.0).unwrap();
                // the compensated path removes the gripper's weight but not its inertia
                let inertia = m_g * az / acc;
                assert!((via_comp - (m_u + inertia)).abs() <= 1e-12 * (1.0 + m_u), "{m_u} {az}");
                assert!((via_raw - m_u).abs() <= 1e-12 * (1.0 + m_u));
                if az == 0.0 {
                    assert!((via_comp - via_raw).abs() <= 1e-12 * (1.0 + m_u));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn noiseless_quasi_static_recovery(m_u in 0.0..10.0f64, window in 1usize..60) {
            let cfg = EstimatorConfig { estimate_filter_window: window, ..always_on() };
            let mut est = MassEstimator::new(cfg).unwrap();
            let mut e = MassEstimate::default();
            for _ in 0..window + 5 {
                e = est.update(m_u * 9.81, 9.81, 0.0);
            }
            prop_assert!((e.m_u_hat - m_u).abs() <= 1e-12 * m_u.max(1e-300) || (m_u == 0.0 && e.m_u_hat == 0.0));
        }

        #[test]
        fn never_non_finite_and_applied_non_negative(
            stream in prop::collection::vec((-1e4..1e4f64, -20.0..20.0f64), 1..200),
        ) {
            let mut est = MassEstimator::new(always_on()).unwrap();
            for (fz, az) in stream {
                let e = est.update(fz, az, 0.0);
                prop_assert!(e.m_u_hat.is_finite() && e.m_u_applied.is_finite());
                prop_assert!(e.m_u_applied >= 0.0);
                if az.abs() < 1.0 { prop_assert!(!e.valid); }
            }
            let e = est.update(1.0, 0.0, 0.0);
            prop_assert!(e.m_u_hat.is_finite());
        }
    }
}
