//! Terrain, node placement and mobility models.
//!
//! Three models: random waypoint, reference-point group mobility, and no
//! mobility. Motion is piecewise linear, so positions are evaluated lazily
//! at event times instead of being stepped — the only mobility events a run
//! sees are waypoint arrivals.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::time::SimTime;

/// Cartesian position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    pub fn distance_sq(self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }
}

/// Rectangular simulation area; all positions stay inside it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Terrain {
    pub width_m: f64,
    pub height_m: f64,
}

impl Terrain {
    pub fn contains(&self, p: Position) -> bool {
        p.x >= 0.0 && p.x <= self.width_m && p.y >= 0.0 && p.y <= self.height_m
    }

    pub fn clamp(&self, p: Position) -> Position {
        Position {
            x: p.x.clamp(0.0, self.width_m),
            y: p.y.clamp(0.0, self.height_m),
        }
    }

    pub fn center(&self) -> Position {
        Position {
            x: self.width_m / 2.0,
            y: self.height_m / 2.0,
        }
    }

    fn sample(&self, rng: &mut ChaCha12Rng) -> Position {
        Position {
            x: rng.gen_range(0.0..=self.width_m),
            y: rng.gen_range(0.0..=self.height_m),
        }
    }
}

impl Default for Terrain {
    fn default() -> Self {
        Terrain {
            width_m: 1500.0,
            height_m: 1500.0,
        }
    }
}

/// Which mobility model a scenario uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MobilityModel {
    Rwp,
    Group,
    None,
}

/// Random-waypoint parameters. A pause of zero means continuous movement.
#[derive(Debug, Clone, Copy)]
pub struct WaypointParams {
    pub pause: SimTime,
    pub max_speed_mps: f64,
}

/// One mover's motion. `Moving` with a future `depart` covers the pause at
/// the previous waypoint: the position holds at `from` until departure.
#[derive(Debug, Clone, Copy)]
pub enum Motion {
    Fixed {
        pos: Position,
    },
    Moving {
        from: Position,
        to: Position,
        speed_mps: f64,
        depart: SimTime,
        arrive: SimTime,
    },
}

impl Motion {
    /// Position at time `t`. Exact linear interpolation along the leg.
    pub fn position_at(&self, t: SimTime) -> Position {
        match *self {
            Motion::Fixed { pos } => pos,
            Motion::Moving {
                from,
                to,
                depart,
                arrive,
                ..
            } => {
                if t <= depart {
                    return from;
                }
                if t >= arrive {
                    return to;
                }
                let total = (arrive - depart).as_micros() as f64;
                let frac = (t - depart).as_micros() as f64 / total;
                Position {
                    x: from.x + (to.x - from.x) * frac,
                    y: from.y + (to.y - from.y) * frac,
                }
            }
        }
    }

    /// True while the mover sits still (paused or fixed) at time `t`.
    pub fn is_stationary_at(&self, t: SimTime) -> bool {
        match *self {
            Motion::Fixed { .. } => true,
            Motion::Moving { depart, arrive, .. } => t <= depart || t >= arrive,
        }
    }
}

/// `n` i.i.d. uniform positions inside the terrain.
pub fn place_uniform(n: usize, terrain: &Terrain, rng: &mut ChaCha12Rng) -> Vec<Position> {
    (0..n).map(|_| terrain.sample(rng)).collect()
}

/// Picks the next waypoint leg after arriving at `at` (or at the initial
/// position) at time `now`. The pause is applied before departure; speed is
/// drawn uniform from (0, max] — an exactly-zero draw is redrawn, since a
/// zero-speed leg never arrives.
pub fn next_waypoint(
    at: Position,
    now: SimTime,
    params: &WaypointParams,
    terrain: &Terrain,
    rng: &mut ChaCha12Rng,
) -> Motion {
    let to = terrain.sample(rng);
    let mut speed = rng.gen_range(0.0..=params.max_speed_mps);
    while speed <= 0.0 {
        speed = rng.gen_range(0.0..=params.max_speed_mps);
    }
    let depart = now + params.pause;
    let dist = at.distance(to);
    let travel = SimTime::from_secs_f64(dist / speed).max(SimTime::from_micros(1));
    Motion::Moving {
        from: at,
        to,
        speed_mps: speed,
        depart,
        arrive: depart + travel,
    }
}

/// Offset uniform in a disk of the given radius, drawn per waypoint for
/// group members.
pub fn disk_offset(radius_m: f64, rng: &mut ChaCha12Rng) -> (f64, f64) {
    let r = radius_m * rng.gen_range(0.0f64..=1.0).sqrt();
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    (r * theta.cos(), r * theta.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;

    fn terrain() -> Terrain {
        Terrain::default()
    }

    #[test]
    fn placement_is_deterministic_in_seed() {
        let a = place_uniform(2, &terrain(), &mut substream(9, 0));
        let b = place_uniform(2, &terrain(), &mut substream(9, 0));
        assert_eq!(a[0].x, b[0].x);
        assert_eq!(a[1].y, b[1].y);
    }

    #[test]
    fn placement_stays_in_bounds() {
        let t = terrain();
        for p in place_uniform(500, &t, &mut substream(3, 0)) {
            assert!(t.contains(p));
        }
    }

    #[test]
    fn placement_mean_approaches_center() {
        // Law of large numbers: empirical mean within 2% of the center.
        let t = terrain();
        let pts = place_uniform(10_000, &t, &mut substream(11, 0));
        let mx = pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.y).sum::<f64>() / pts.len() as f64;
        let c = t.center();
        assert!((mx - c.x).abs() < 0.02 * t.width_m);
        assert!((my - c.y).abs() < 0.02 * t.height_m);
    }

    #[test]
    fn zero_pause_departs_at_arrival() {
        let params = WaypointParams {
            pause: SimTime::ZERO,
            max_speed_mps: 10.0,
        };
        let now = SimTime::from_secs(5);
        let m = next_waypoint(Position { x: 0.0, y: 0.0 }, now, &params, &terrain(), &mut substream(1, 1));
        match m {
            Motion::Moving { depart, .. } => assert_eq!(depart, now),
            _ => panic!("expected a moving leg"),
        }
    }

    #[test]
    fn pause_delays_departure_exactly() {
        let params = WaypointParams {
            pause: SimTime::from_secs(30),
            max_speed_mps: 10.0,
        };
        let now = SimTime::from_secs(5);
        let m = next_waypoint(Position { x: 0.0, y: 0.0 }, now, &params, &terrain(), &mut substream(1, 1));
        match m {
            Motion::Moving { depart, .. } => assert_eq!(depart, now + SimTime::from_secs(30)),
            _ => panic!("expected a moving leg"),
        }
    }

    #[test]
    fn midpoint_in_time_is_midpoint_in_space() {
        let m = Motion::Moving {
            from: Position { x: 0.0, y: 0.0 },
            to: Position { x: 100.0, y: 200.0 },
            speed_mps: 5.0,
            depart: SimTime::from_secs(10),
            arrive: SimTime::from_secs(30),
        };
        let p = m.position_at(SimTime::from_secs(20));
        assert_relative_eq!(p.x, 50.0, epsilon = 1e-9);
        assert_relative_eq!(p.y, 100.0, epsilon = 1e-9);
    }

    #[test]
    fn arrival_time_matches_kinematics() {
        // Independent check: arrive - depart == distance / speed.
        let params = WaypointParams {
            pause: SimTime::ZERO,
            max_speed_mps: 10.0,
        };
        let start = Position { x: 700.0, y: 700.0 };
        let m = next_waypoint(start, SimTime::ZERO, &params, &terrain(), &mut substream(4, 2));
        match m {
            Motion::Moving {
                to,
                speed_mps,
                depart,
                arrive,
                ..
            } => {
                let expect = start.distance(to) / speed_mps;
                let got = (arrive - depart).as_secs_f64();
                // Integer-tick rounding keeps the error under one tick.
                assert!((got - expect).abs() <= 1e-6, "got {got}, expect {expect}");
            }
            _ => panic!("expected a moving leg"),
        }
    }

    #[test]
    fn fixed_model_never_moves() {
        let m = Motion::Fixed {
            pos: Position { x: 3.0, y: 4.0 },
        };
        for s in [0u64, 10, 1000] {
            let p = m.position_at(SimTime::from_secs(s));
            assert_eq!((p.x, p.y), (3.0, 4.0));
        }
    }

    #[test]
    fn disk_offsets_respect_radius() {
        let mut rng = substream(5, 3);
        for _ in 0..1000 {
            let (dx, dy) = disk_offset(100.0, &mut rng);
            assert!((dx * dx + dy * dy).sqrt() <= 100.0 + 1e-9);
        }
        let (dx, dy) = disk_offset(0.0, &mut rng);
        assert_eq!((dx, dy), (0.0, 0.0));
    }
}
