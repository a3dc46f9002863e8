//! The simulated end-effector: an inner velocity loop, a gripper that can carry a
//! point-mass payload, a penalty-contact table, and synthetic FT and accelerometer sensors.
//!
//! Force readings use the load convention: the wrist reading is the force the tool
//! exerts on the sensor, so a hanging mass `m` at rest reads `m·g` (negative z).

use crate::error::{self, ConfigError, ParamError};
use crate::geometry::{self, AxisAngle, Vec3};
use crate::signal::{BiasModel, NoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// True tool-frame position, m.
    pub p: Vec3,
    pub v: Vec3,
    /// Acceleration over the last step, m/s².
    pub a: Vec3,
    pub payload_attached: bool,
    /// Attached payload mass, kg. Zero when detached.
    pub m_u_true: f64,
    /// Distance from the tool frame down to the lowest point of the tool or payload, m.
    pub reach: f64,
}

impl PlantState {
    pub fn at_rest(p: Vec3) -> Self {
        Self { p, ..Self::default() }
    }

    /// Height of the lowest point of the tool (or carried payload).
    pub fn bottom_z(&self) -> f64 {
        self.p.z - self.reach
    }
}

/// First-order velocity tracking, `R(s) = 1/(τ_v s + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct InnerLoopModel {
    pub tau_v: f64,
}

impl Default for InnerLoopModel {
    fn default() -> Self {
        Self { tau_v: 0.05 }
    }
}

impl InnerLoopModel {
    pub fn validate(&self) -> Result<(), ConfigError> {
        error::positive("tau_v", self.tau_v).map_err(|e| ConfigError::new("tau_v", e))?;
        Ok(())
    }
}

/// Horizontal table at `z_table` modelled as a unilateral spring-damper.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TableContact {
    pub z_table: f64,
    pub k_contact: f64,
    pub d_contact: f64,
    /// A payload grasped with its bottom within this height of the table starts out
    /// resting on it, m.
    pub capture_height: f64,
}

impl Default for TableContact {
    fn default() -> Self {
        Self {
            z_table: 0.0,
            k_contact: 1e5,
            d_contact: 1e3,
            capture_height: 0.01,
        }
    }
}

impl TableContact {
    pub fn validate(&self) -> Result<(), ConfigError> {
        error::finite("z_table", self.z_table).map_err(|e| ConfigError::new("z_table", e))?;
        error::positive("k_contact", self.k_contact).map_err(|e| ConfigError::new("k_contact", e))?;
        error::non_negative("d_contact", self.d_contact).map_err(|e| ConfigError::new("d_contact", e))?;
        error::non_negative("capture_height", self.capture_height)
            .map_err(|e| ConfigError::new("capture_height", e))?;
        Ok(())
    }
}

/// Upward force the table exerts on the tool, N. Zero above the table, never negative.
pub fn contact_force(state: &PlantState, world: &TableContact) -> f64 {
    let pen = world.z_table - state.bottom_z();
    if pen > 0.0 {
        (world.k_contact * pen - world.d_contact * state.v.z).max(0.0)
    } else {
        0.0
    }
}

/// Advances the inner velocity loop by one tick:
/// `v' = v + (dt/τ)(v_cmd − v)`, `p' = p + v'·dt`, `a' = (v' − v)/dt`.
///
/// The velocity loop is assumed stiff enough that table contact does not deflect the
/// tool; contact shows up only in the force reading.
pub fn plant_step(state: &PlantState, v_cmd: Vec3, inner: &InnerLoopModel, dt: f64) -> Result<PlantState, ParamError> {
    error::positive("dt", dt)?;
    let v = state.v + (v_cmd - state.v) * (dt / inner.tau_v);
    Ok(PlantState {
        p: state.p + v * dt,
        v,
        a: (v - state.v) / dt,
        ..*state
    })
}

/// A force sample in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtReading {
    pub tick: u64,
    pub force: Vec3,
}

/// An acceleration sample in the base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelReading {
    pub tick: u64,
    pub accel: Vec3,
}

/// Noise-free wrist force in the base frame:
/// `(m_g + m_u)(g − a) + F_contact ẑ + offset`.
pub fn true_wrist_force(state: &PlantState, world: &TableContact, bias: &BiasModel) -> Vec3 {
    let m = bias.gripper_mass + if state.payload_attached { state.m_u_true } else { 0.0 };
    (bias.gravity - state.a) * m + Vec3::vertical(contact_force(state, world)) + bias.ft_offset
}

/// FT reading in the sensor frame, given the sensor-to-base rotation.
pub fn read_ft(
    state: &PlantState,
    world: &TableContact,
    bias: &BiasModel,
    noise: &NoiseModel,
    tick: u64,
    sensor_to_base: &AxisAngle,
) -> FtReading {
    let base = true_wrist_force(state, world, bias) + noise.sample(tick).0;
    FtReading {
        tick,
        force: geometry::to_sensor_frame(sensor_to_base, base),
    }
}

/// Coordinate acceleration (gravity not included) in the base frame, plus noise.
pub fn read_accel(state: &PlantState, noise: &NoiseModel, tick: u64) -> AccelReading {
    AccelReading {
        tick,
        accel: state.a + noise.sample(tick).1,
    }
}

/// Attaches or releases the payload.
///
/// When attaching, a payload whose bottom (at `payload_reach` below the tool) would be
/// within `world.capture_height` of the table is taken to be resting on the table, with
/// the table compressed just enough to carry its weight. Lifting off then unloads the
/// contact gradually. Re-attaching an attached payload changes nothing.
pub fn set_gripper(
    state: &PlantState,
    attach: bool,
    m_u: f64,
    payload_reach: f64,
    world: &TableContact,
    g_mag: f64,
) -> Result<PlantState, ParamError> {
    error::non_negative("m_u", m_u)?;
    error::non_negative("payload_reach", payload_reach)?;
    if !attach {
        return Ok(PlantState {
            payload_attached: false,
            m_u_true: 0.0,
            reach: 0.0,
            ..*state
        });
    }
    if state.payload_attached {
        return Ok(*state);
    }
    let gap = state.p.z - payload_reach - world.z_table;
    let reach = if gap < world.capture_height {
        state.p.z - world.z_table + m_u * g_mag / world.k_contact
    } else {
        payload_reach
    };
    Ok(PlantState {
        payload_attached: true,
        m_u_true: m_u,
        reach,
        ..*state
    })
}
