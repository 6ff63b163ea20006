//! Car-following kinematics on a one-second tick.
//!
//! Speeds update with bounded acceleration, the segment speed limit, and a
//! collision-free safe speed against the leader (Krauss-style: the follower
//! must be able to stop even if the leader brakes hard). A final cap keeps a
//! vehicle from overrunning the available gap within one tick, so vehicles
//! never overlap no matter what the closed form says.

/// Vehicle body length, metres.
pub const VEHICLE_LEN: f64 = 5.0;
/// Minimum standing gap between a follower's nose and its leader's tail.
pub const MIN_GAP: f64 = 2.0;
/// Comfortable acceleration, m/s per tick.
pub const ACCEL: f64 = 2.6;
/// Braking deceleration used in the safe-speed bound, m/s^2.
pub const DECEL: f64 = 4.5;
/// Driver reaction time, seconds.
pub const REACTION: f64 = 1.0;
/// Tick duration, seconds.
pub const TICK: f64 = 1.0;
/// Below this speed a vehicle counts as stopped (waiting).
pub const STOP_SPEED: f64 = 0.1;

/// Net gap from a follower at `pos` to a leader's rear bumper at
/// `leader_pos`, after body length and the minimum standing gap.
pub fn net_gap(pos: f64, leader_pos: f64) -> f64 {
    leader_pos - pos - VEHICLE_LEN - MIN_GAP
}

/// Maximum speed that still lets the follower stop behind the leader.
fn safe_speed(leader_speed: f64, gap: f64) -> f64 {
    let bt = DECEL * REACTION;
    -bt + (bt * bt + leader_speed * leader_speed + 2.0 * DECEL * gap).sqrt()
}

/// Next-tick speed given the previous-tick world: current speed, the
/// segment's limit, optionally a leader `(speed, net gap)`, and optionally a
/// hard barrier (stop line) at `barrier` metres ahead.
pub fn next_speed(
    speed: f64,
    speed_limit: f64,
    leader: Option<(f64, f64)>,
    barrier: Option<f64>,
) -> f64 {
    let mut v = (speed + ACCEL * TICK).min(speed_limit);
    if let Some((leader_speed, gap)) = leader {
        let gap = gap.max(0.0);
        v = v.min(safe_speed(leader_speed, gap)).min(gap / TICK);
    }
    if let Some(dist) = barrier {
        let dist = dist.max(0.0);
        // A barrier is a standing obstacle with no body length.
        v = v.min(safe_speed(0.0, dist)).min(dist / TICK);
    }
    v.max(0.0)
}
