//! Virtual mass-spring-damper dynamics that turn measured force into commanded motion.

use crate::error::{self, ParamError};
use crate::geometry::Vec3;
use crate::math;

/// Virtual mass (kg), damping (N·s/m) and stiffness (N/m), applied equally on every axis.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AdmittanceParams {
    pub m_a: f64,
    pub b_a: f64,
    pub k_a: f64,
}

impl AdmittanceParams {
    pub fn new(m_a: f64, b_a: f64, k_a: f64) -> Result<Self, ParamError> {
        let p = Self { m_a, b_a, k_a };
        p.validate()?;
        Ok(p)
    }

    /// Damping chosen as `2√(m·k)`.
    pub fn critically_damped(m_a: f64, k_a: f64) -> Result<Self, ParamError> {
        Self::new(m_a, critical_damping(m_a, k_a)?, k_a)
    }

    /// Skips the sign checks on damping and stiffness. Only stability studies need this.
    pub fn new_raw(m_a: f64, b_a: f64, k_a: f64) -> Self {
        Self { m_a, b_a, k_a }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        error::positive("m_a", self.m_a)?;
        error::non_negative("b_a", self.b_a)?;
        error::non_negative("k_a", self.k_a)?;
        Ok(())
    }

    /// Same check as [`validate`](Self::validate) but reports which field failed.
    pub fn validate_fields(&self) -> Result<(), crate::ConfigError> {
        use crate::ConfigError;
        error::positive("m_a", self.m_a).map_err(|e| ConfigError::new("m_a", e))?;
        error::non_negative("b_a", self.b_a).map_err(|e| ConfigError::new("b_a", e))?;
        error::non_negative("k_a", self.k_a).map_err(|e| ConfigError::new("k_a", e))?;
        Ok(())
    }
}

/// Ideal admittance position and velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdmittanceState {
    pub p_a: Vec3,
    pub v_a: Vec3,
}

impl AdmittanceState {
    pub fn at_rest(p_a: Vec3) -> Self {
        Self { p_a, v_a: Vec3::ZERO }
    }
}

/// Virtual force injected to cancel the estimated payload weight. Always vertical.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExcitationForce {
    pub f_exc: Vec3,
}

impl ExcitationForce {
    pub const NONE: ExcitationForce = ExcitationForce { f_exc: Vec3::ZERO };

    pub fn vertical(fz: f64) -> Self {
        Self {
            f_exc: Vec3::vertical(fz),
        }
    }
}

pub fn critical_damping(m_a: f64, k_a: f64) -> Result<f64, ParamError> {
    error::positive("m_a", m_a)?;
    error::non_negative("k_a", k_a)?;
    Ok(2.0 * math::sqrt(m_a * k_a))
}

/// `p̈_a = (f_ext + f_exc − b·v_a − k·(p_a − p_0)) / m`, with a static reference.
pub fn admittance_accel(
    params: &AdmittanceParams,
    state: &AdmittanceState,
    p_0: Vec3,
    f_ext: Vec3,
    f_exc: ExcitationForce,
) -> Vec3 {
    let spring = (state.p_a - p_0) * params.k_a;
    let damper = state.v_a * params.b_a;
    (f_ext + f_exc.f_exc - damper - spring) / params.m_a
}

/// Semi-implicit Euler: velocity first, then position with the new velocity.
pub fn integrate_step(state: &AdmittanceState, accel: Vec3, dt: f64) -> Result<AdmittanceState, ParamError> {
    error::positive("dt", dt)?;
    let v_a = state.v_a + accel * dt;
    Ok(AdmittanceState {
        p_a: state.p_a + v_a * dt,
        v_a,
    })
}

/// One classical Runge-Kutta step of the admittance dynamics with `p_0` and the
/// total applied force held constant across the step. Reference integrator only.
pub fn rk4_step(
    params: &AdmittanceParams,
    state: &AdmittanceState,
    p_0: Vec3,
    force: Vec3,
    dt: f64,
) -> Result<AdmittanceState, ParamError> {
    error::positive("dt", dt)?;
    let f = |p: Vec3, v: Vec3| -> (Vec3, Vec3) {
        let s = AdmittanceState { p_a: p, v_a: v };
        (v, admittance_accel(params, &s, p_0, force, ExcitationForce::NONE))
    };
    let (p, v) = (state.p_a, state.v_a);
    let (k1p, k1v) = f(p, v);
    let (k2p, k2v) = f(p + k1p * (dt / 2.0), v + k1v * (dt / 2.0));
    let (k3p, k3v) = f(p + k2p * (dt / 2.0), v + k2v * (dt / 2.0));
    let (k4p, k4v) = f(p + k3p * dt, v + k3v * dt);
    Ok(AdmittanceState {
        p_a: p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0),
        v_a: v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0),
    })
}

/// `F_exc = m̂_u · p̈_z · ẑ`, where `p̈_z = (p̈ − g)·ẑ`.
///
/// With z up and `g = (0, 0, −9.81)` a hovering payload gives `p̈_z = +9.81`, so the
/// force points up and cancels the weight carried in `f_ext`.
pub fn excitation_from_estimate(m_u_hat: f64, accel_z_grav: f64) -> ExcitationForce {
    ExcitationForce::vertical(m_u_hat * accel_z_grav)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn critical_damping_values() {
        assert_eq!(critical_damping(4.0, 2500.0).unwrap(), 200.0);
        assert_eq!(critical_damping(4.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(critical_damping(4.0, 300.0).unwrap(), 69.2820323, epsilon = 1e-7);
        assert!(critical_damping(0.0, 300.0).is_err());
        assert!(critical_damping(-1.0, 300.0).is_err());
    }

    #[test]
    fn params_reject_bad_values() {
        assert!(AdmittanceParams::new(4.0, -1.0, 300.0).is_err());
        assert!(AdmittanceParams::new(4.0, 1.0, f64::NAN).is_err());
        let p = AdmittanceParams::critically_damped(4.0, 300.0).unwrap();
        assert_eq!(p.b_a, 2.0 * (4.0f64 * 300.0).sqrt());
        let err = AdmittanceParams::new_raw(4.0, 10.0, 0.0 - 1.0)
            .validate_fields()
            .unwrap_err();
        assert_eq!(err.path, "k_a");
    }

    #[test]
    fn equilibrium_is_zero_accel() {
        let p = AdmittanceParams::critically_damped(4.0, 300.0).unwrap();
        let a = admittance_accel(
            &p,
            &AdmittanceState::at_rest(Vec3::ZERO),
            Vec3::ZERO,
            Vec3::ZERO,
            ExcitationForce::NONE,
        );
        assert_eq!(a, Vec3::ZERO);
    }

    #[test]
    fn payload_weight_on_free_mass() {
        let p = AdmittanceParams::new(4.0, 0.0, 0.0).unwrap();
        let a = admittance_accel(
            &p,
            &AdmittanceState::default(),
            Vec3::ZERO,
            Vec3::vertical(-14.715),
            ExcitationForce::NONE,
        );
        assert_relative_eq!(a.z, -3.678750, epsilon = 1e-12);
        assert_eq!((a.x, a.y), (0.0, 0.0));
    }

    #[test]
    fn sag_point_is_equilibrium() {
        let p = AdmittanceParams::critically_damped(4.0, 1800.0).unwrap();
        let p0 = Vec3::new(0.4, 0.0, 0.25);
        let s = AdmittanceState::at_rest(p0 + Vec3::vertical(-0.008175));
        let a = admittance_accel(&p, &s, p0, Vec3::vertical(-14.715), ExcitationForce::NONE);
        assert!(a.norm() <= 1e-12, "{a:?}");
    }

    #[test]
    fn one_euler_step() {
        let s = integrate_step(&AdmittanceState::default(), Vec3::vertical(-1.0), 0.002).unwrap();
        assert_eq!(s.v_a, Vec3::vertical(-0.002));
        assert_relative_eq!(s.p_a.z, -4e-6, epsilon = 1e-18);
        let rest = integrate_step(&AdmittanceState::default(), Vec3::ZERO, 0.002).unwrap();
        assert_eq!(rest, AdmittanceState::default());
        assert!(integrate_step(&s, Vec3::ZERO, 0.0).is_err());
        assert!(integrate_step(&s, Vec3::ZERO, -0.002).is_err());
    }

    /// Closed form for a critically damped release from rest at `x0`:
    /// `x(t) = x0 (1 + ωt) e^{−ωt}`.
    fn critical_release(x0: f64, omega: f64, t: f64) -> f64 {
        x0 * (1.0 + omega * t) * (-omega * t).exp()
    }

    #[test]
    fn critically_damped_release_settles_without_overshoot() {
        let p = AdmittanceParams::critically_damped(4.0, 300.0).unwrap();
        let omega = (300.0f64 / 4.0).sqrt();
        let p0 = Vec3::ZERO;
        let mut s = AdmittanceState::at_rest(Vec3::vertical(0.010));
        let dt = 0.002;
        let mut worst_gap: f64 = 0.0;
        for i in 1..=10_000 {
            let a = admittance_accel(&p, &s, p0, Vec3::ZERO, ExcitationForce::NONE);
            s = integrate_step(&s, a, dt).unwrap();
            assert!(s.p_a.z >= -1e-9, "overshoot at step {i}: {}", s.p_a.z);
            worst_gap = worst_gap.max((s.p_a.z - critical_release(0.010, omega, i as f64 * dt)).abs());
        }
        assert!((s.p_a - p0).norm() < 1e-6);
        // first-order integrator, so only loose agreement with the closed form
        assert!(worst_gap < 1e-4, "{worst_gap}");
    }

    #[test]
    fn rk4_tracks_closed_form_tightly() {
        let p = AdmittanceParams::critically_damped(4.0, 300.0).unwrap();
        let omega = (300.0f64 / 4.0).sqrt();
        let mut s = AdmittanceState::at_rest(Vec3::vertical(0.010));
        for i in 1..=2_000 {
            s = rk4_step(&p, &s, Vec3::ZERO, Vec3::ZERO, 0.002).unwrap();
            let want = critical_release(0.010, omega, i as f64 * 0.002);
            assert!((s.p_a.z - want).abs() < 1e-10);
        }
    }

    #[test]
    fn excitation_cancels_weight() {
        assert_eq!(excitation_from_estimate(0.0, 9.81).f_exc, Vec3::ZERO);
        let f = excitation_from_estimate(1.5, 9.81);
        assert_relative_eq!(f.f_exc.z, 14.715, epsilon = 1e-12);
        assert_eq!((f.f_exc.x, f.f_exc.y), (0.0, 0.0));

        // exact compensation holds the reference with no sag
        let p = AdmittanceParams::critically_damped(4.0, 300.0).unwrap();
        let p0 = Vec3::new(0.4, 0.0, 0.25);
        let mut s = AdmittanceState::at_rest(p0);
        for _ in 0..5_000 {
            let a = admittance_accel(&p, &s, p0, Vec3::vertical(-14.715), f);
            s = integrate_step(&s, a, 0.002).unwrap();
        }
        assert!((s.p_a - p0).norm() < 1e-6);
    }

    fn v3() -> impl Strategy<Value = Vec3> {
        (-10.0..10.0f64, -10.0..10.0f64, -10.0..10.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn accel_is_linear(
            m in 0.5..10.0f64, b in 0.0..300.0f64, k in 0.0..3000.0f64,
            f1 in v3(), f2 in v3(), d1 in v3(), d2 in v3(), v1 in v3(), v2 in v3(),
            e1 in -20.0..20.0f64, e2 in -20.0..20.0f64, c in -3.0..3.0f64,
        ) {
            let p = AdmittanceParams::new(m, b, k).unwrap();
            let acc = |f: Vec3, d: Vec3, v: Vec3, e: f64| {
                admittance_accel(&p, &AdmittanceState { p_a: d, v_a: v }, Vec3::ZERO, f, ExcitationForce::vertical(e))
            };
            let lhs = acc(f1 + f2 * c, d1 + d2 * c, v1 + v2 * c, e1 + e2 * c);
            let rhs = acc(f1, d1, v1, e1) + acc(f2, d2, v2, e2) * c;
            prop_assert!((lhs - rhs).norm() <= 1e-8 * (1.0 + rhs.norm()));
        }

        #[test]
        fn zero_accel_iff_force_balance(
            k in 1.0..3000.0f64, fz in -50.0..50.0f64, e in -50.0..50.0f64,
        ) {
            let p = AdmittanceParams::critically_damped(4.0, k).unwrap();
            let p0 = Vec3::new(0.3, 0.0, 0.3);
            let s = AdmittanceState::at_rest(p0 + Vec3::vertical((fz + e) / k));
            let a = admittance_accel(&p, &s, p0, Vec3::vertical(fz), ExcitationForce::vertical(e));
            prop_assert!(a.norm() <= 1e-11 * (1.0 + (fz.abs() + e.abs()) / 4.0));
        }
    }
}
