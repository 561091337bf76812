//! Turn-by-turn navigation over waypoint routes: haversine distances,
//! initial bearings, and the arrival/turn state kept between GPS fixes.

use std::fmt;

use thiserror::Error;

/// Mean Earth radius in meters, used by the haversine distance.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("a route needs at least two waypoints")]
    TooFewWaypoints,
    #[error("arrival radius must be positive")]
    BadArrivalRadius,
    #[error("latitude {0} outside [-90, 90]")]
    BadLatitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    BadLongitude(f64),
}

/// Great-circle distance in meters between two `(lat, lon)` points, degrees.
pub fn haversine_m(from: (f64, f64), to: (f64, f64)) -> f64 {
    let (lat1, lon1) = (from.0.to_radians(), from.1.to_radians());
    let (lat2, lon2) = (to.0.to_radians(), to.1.to_radians());
    let dlat = lat2 - lat1;
    let dlon = lon2 - lon1;
    let a = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * a.sqrt().asin()
}

/// Initial great-circle bearing from one point to another, in degrees
/// normalized to [0, 360).
pub fn initial_bearing_deg(from: (f64, f64), to: (f64, f64)) -> f64 {
    let (lat1, lon1) = (from.0.to_radians(), from.1.to_radians());
    let (lat2, lon2) = (to.0.to_radians(), to.1.to_radians());
    let dlon = lon2 - lon1;
    let x = dlon.sin() * lat2.cos();
    let y = lat1.cos() * lat2.sin() - lat1.sin() * lat2.cos() * dlon.cos();
    let deg = x.atan2(y).to_degrees();
    if deg < 0.0 {
        deg + 360.0
    } else {
        deg
    }
}

/// Wrap a bearing difference into (-180, 180]. Negative means left.
pub fn normalize_bearing_delta(delta_deg: f64) -> f64 {
    let mut d = delta_deg % 360.0;
    if d <= -180.0 {
        d += 360.0;
    } else if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Turn bucket for a bearing change: within 30 degrees either way counts as
/// straight, otherwise the sign decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TurnDirection {
    Left,
    Right,
    Straight,
}

impl TurnDirection {
    pub fn from_bearing_delta(delta_deg: f64) -> Self {
        let d = normalize_bearing_delta(delta_deg);
        if d.abs() < 30.0 {
            TurnDirection::Straight
        } else if d < 0.0 {
            TurnDirection::Left
        } else {
            TurnDirection::Right
        }
    }
}

impl fmt::Display for TurnDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TurnDirection::Left => "left",
            TurnDirection::Right => "right",
            TurnDirection::Straight => "straight",
        })
    }
}

/// A navigation instruction, rendered with the fixed message templates.
#[derive(Debug, Clone, PartialEq)]
pub enum Instruction {
    Turn {
        direction: TurnDirection,
        distance_m: f64,
    },
    DestinationReached,
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Turn {
                direction,
                distance_m,
            } => write!(f, "turn {direction} in {distance_m:.0} meters"),
            Instruction::DestinationReached => f.write_str("destination reached"),
        }
    }
}

/// An ordered waypoint list. The first waypoint is the route origin;
/// arriving there produces no turn instruction, only retargeting.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub waypoints: Vec<(f64, f64)>,
    pub arrival_radius_m: f64,
}

impl Route {
    pub fn new(waypoints: Vec<(f64, f64)>, arrival_radius_m: f64) -> Result<Self, RouteError> {
        if waypoints.len() < 2 {
            return Err(RouteError::TooFewWaypoints);
        }
        if arrival_radius_m <= 0.0 || arrival_radius_m.is_nan() {
            return Err(RouteError::BadArrivalRadius);
        }
        for &(lat, lon) in &waypoints {
            if !(-90.0..=90.0).contains(&lat) {
                return Err(RouteError::BadLatitude(lat));
            }
            if !(-180.0..=180.0).contains(&lon) {
                return Err(RouteError::BadLongitude(lon));
            }
        }
        Ok(Self {
            waypoints,
            arrival_radius_m,
        })
    }
}

/// Mutable navigation state over a route: current target, last fix, and the
/// completion latch that guarantees "destination reached" fires exactly once.
#[derive(Debug, Clone, PartialEq)]
pub struct RouteProgress {
    route: Route,
    next_index: usize,
    last_fix: Option<(f64, f64)>,
    completed: bool,
}

impl RouteProgress {
    pub fn new(route: Route) -> Self {
        Self {
            route,
            next_index: 0,
            last_fix: None,
            completed: false,
        }
    }

    pub fn completed(&self) -> bool {
        self.completed
    }

    pub fn route(&self) -> &Route {
        &self.route
    }

    pub fn next_waypoint(&self) -> Option<(f64, f64)> {
        (!self.completed)
            .then(|| self.route.waypoints.get(self.next_index).copied())
            .flatten()
    }

    /// Travel heading from the previous fix, when the fixes are far enough
    /// apart to define one.
    fn travel_heading(&self, fix: (f64, f64)) -> Option<f64> {
        let last = self.last_fix?;
        if haversine_m(last, fix) < 1e-6 {
            return None;
        }
        Some(initial_bearing_deg(last, fix))
    }
}

/// Advance navigation by one GPS fix.
///
/// Within the arrival radius of the current target the route advances: the
/// final waypoint emits "destination reached" (once); an intermediate
/// waypoint emits a turn instruction whose direction is the change from the
/// travel heading onto the next leg and whose distance is from the fix to the
/// waypoint just passed. Arriving at the route origin retargets silently.
pub fn navigate_step(progress: &mut RouteProgress, fix: (f64, f64)) -> Option<Instruction> {
    if progress.completed {
        return None;
    }
    let heading = progress.travel_heading(fix);
    progress.last_fix = Some(fix);

    let target = progress.route.waypoints[progress.next_index];
    let distance = haversine_m(fix, target);
    if distance > progress.route.arrival_radius_m {
        return None;
    }

    if progress.next_index + 1 == progress.route.waypoints.len() {
        progress.completed = true;
        return Some(Instruction::DestinationReached);
    }

    let passed = progress.next_index;
    progress.next_index += 1;
    if passed == 0 {
        // Departing the origin is not a turn.
        return None;
    }

    let leg_bearing = initial_bearing_deg(
        progress.route.waypoints[passed],
        progress.route.waypoints[progress.next_index],
    );
    // Without fix-derived heading, fall back to the inbound leg direction.
    let heading = heading.unwrap_or_else(|| {
        initial_bearing_deg(
            progress.route.waypoints[passed - 1],
            progress.route.waypoints[passed],
        )
    });
    Some(Instruction::Turn {
        direction: TurnDirection::from_bearing_delta(leg_bearing - heading),
        distance_m: distance,
    })
}
