//! Waypoint sequencing with grasp and release events.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{self, ConfigError, ParamError};
use crate::geometry::Vec3;

/// Action performed when a waypoint is reached.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum WaypointEvent {
    #[default]
    None,
    /// Close the gripper on a payload of `m_u` kg.
    Grasp {
        m_u: f64,
    },
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Waypoint {
    pub p_0: Vec3,
    #[cfg_attr(feature = "serde", serde(default))]
    pub event: WaypointEvent,
    /// Time to stay at the waypoint after arriving before moving on, s.
    #[cfg_attr(feature = "serde", serde(default))]
    pub hold: f64,
}

impl Waypoint {
    pub const fn new(p_0: Vec3) -> Self {
        Self {
            p_0,
            event: WaypointEvent::None,
            hold: 0.0,
        }
    }

    pub const fn with_event(mut self, event: WaypointEvent) -> Self {
        self.event = event;
        self
    }

    pub const fn with_hold(mut self, hold: f64) -> Self {
        self.hold = hold;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissionState {
    Moving,
    Completed,
    FailedTimeout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MissionStatus {
    pub current_index: usize,
    pub state: MissionState,
    /// First arrival time at each waypoint, s.
    pub arrival_times: Vec<Option<f64>>,
    /// When the current waypoint became the target, s.
    pub segment_start: f64,
}

impl MissionStatus {
    pub fn new(n_waypoints: usize) -> Self {
        Self {
            current_index: 0,
            state: MissionState::Moving,
            arrival_times: vec![None; n_waypoints],
            segment_start: 0.0,
        }
    }

    pub fn arrived(&self) -> bool {
        self.arrival_times.get(self.current_index).is_some_and(|t| t.is_some())
    }
}

/// Advances the mission by one tick and returns the event fired on arrival, if any.
///
/// A waypoint is reached when `‖p − p_0‖ < eps`; its event fires once, and the mission
/// moves on after the waypoint's hold time. The mission fails when a waypoint is not
/// reached within `timeout` seconds of becoming the target.
pub fn mission_tick(
    status: &mut MissionStatus,
    p_measured: Vec3,
    waypoints: &[Waypoint],
    eps: f64,
    t: f64,
    timeout: f64,
) -> Option<WaypointEvent> {
    if status.state != MissionState::Moving {
        return None;
    }
    let idx = status.current_index;
    let wp = &waypoints[idx];
    let mut fired = None;
    if !status.arrived() && p_measured.distance(wp.p_0) < eps {
        status.arrival_times[idx] = Some(t);
        fired = Some(wp.event);
    }
    match status.arrival_times[idx] {
        Some(ta) if t - ta >= wp.hold => {
            if idx + 1 == waypoints.len() {
                status.state = MissionState::Completed;
            } else {
                status.current_index += 1;
                status.segment_start = t;
            }
        }
        Some(_) => {}
        None => {
            if t - status.segment_start > timeout {
                status.state = MissionState::FailedTimeout;
            }
        }
    }
    fired
}

/// Checks positions, holds and the grasp/release ordering.
pub fn validate_waypoints(waypoints: &[Waypoint]) -> Result<(), ConfigError> {
    if waypoints.is_empty() {
        return Err(ConfigError::new(
            "waypoints",
            ParamError::Degenerate("at least one waypoint is required"),
        ));
    }
    let mut holding = false;
    for (i, wp) in waypoints.iter().enumerate() {
        if !wp.p_0.is_finite() {
            return Err(ConfigError::new(
                format!("waypoints[{i}].p_0"),
                ParamError::NotFinite {
                    name: "p_0",
                    value: wp.p_0.norm(),
                },
            ));
        }
        error::non_negative("hold", wp.hold).map_err(|e| ConfigError::new(format!("waypoints[{i}].hold"), e))?;
        let path = || format!("waypoints[{i}].event");
        match wp.event {
            WaypointEvent::Grasp { m_u } => {
                error::non_negative("m_u", m_u).map_err(|e| ConfigError::new(path(), e))?;
                if holding {
                    return Err(ConfigError::new(
                        path(),
                        ParamError::Degenerate("grasp while already holding a payload"),
                    ));
                }
                holding = true;
            }
            WaypointEvent::Release => {
                if !holding {
                    return Err(ConfigError::new(
                        path(),
                        ParamError::Degenerate("release without a prior grasp"),
                    ));
                }
                holding = false;
            }
            WaypointEvent::None => {}
        }
    }
    Ok(())
}

/// Height of the tool frame above the table when grasping, m.
pub const GRASP_CLEARANCE: f64 = 0.05;
/// Table height the canonical path is laid out for, m.
pub const CANONICAL_TABLE_Z: f64 = 0.0;
/// Canonical payload, kg.
pub const CANONICAL_PAYLOAD: f64 = 1.5;
/// Hold after lifting, s. Long enough to measure the settled sag.
pub const LIFT_HOLD: f64 = 2.0;
/// Workspace bounds `[min, max]` per axis, m.
pub const WORKSPACE: [(f64, f64); 3] = [(0.0, 1.0), (-0.5, 0.5), (0.0, 0.6)];

/// Home, above bin, bin (grasp), lift, shelf approach, shelf (release). All at y = 0.
pub fn default_waypoints() -> Vec<Waypoint> {
    let at = |x: f64, z: f64| Vec3::new(x, 0.0, z);
    vec![
        Waypoint::new(at(0.30, 0.30)),
        Waypoint::new(at(0.40, 0.15)),
        Waypoint::new(at(0.40, CANONICAL_TABLE_Z + GRASP_CLEARANCE))
            .with_event(WaypointEvent::Grasp { m_u: CANONICAL_PAYLOAD }),
        Waypoint::new(at(0.40, 0.25)).with_hold(LIFT_HOLD),
        Waypoint::new(at(0.70, 0.35)),
        Waypoint::new(at(0.80, 0.33)).with_event(WaypointEvent::Release),
    ]
}

pub fn in_workspace(p: Vec3) -> bool {
    let [x, y, z] = WORKSPACE;
    (x.0..=x.1).contains(&p.x) && (y.0..=y.1).contains(&p.y) && (z.0..=z.1).contains(&p.z)
}
