//! Collision worlds exposed to the planner through [`Environment`].

pub mod arm;
pub mod grid;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::manifold::Configuration;

pub use arm::{ArmWorld, Circle};
pub use grid::{
    load_map, make_corridor_map, make_doorway_map, save_map, CorridorParams, DoorwayParams, GridMap, MapError,
    ParseError,
};

pub trait Environment: Send + Sync + fmt::Debug {
    /// Chart box `[lo, hi]` per coordinate used for uniform sampling.
    fn bounds(&self) -> Vec<[f64; 2]>;
    fn in_collision(&self, q: &Configuration) -> bool;
}

/// No obstacles inside a box.
#[derive(Debug, Clone, PartialEq)]
pub struct FreeSpace {
    pub bounds: Vec<[f64; 2]>,
}

impl Environment for FreeSpace {
    fn bounds(&self) -> Vec<[f64; 2]> {
        self.bounds.clone()
    }

    fn in_collision(&self, q: &Configuration) -> bool {
        q.as_slice().iter().zip(&self.bounds).any(|(x, [lo, hi])| x < lo || x > hi)
    }
}

impl Environment for ArmWorld {
    fn bounds(&self) -> Vec<[f64; 2]> {
        self.joint_limits.to_vec()
    }

    fn in_collision(&self, q: &Configuration) -> bool {
        let c = q.as_slice();
        ArmWorld::in_collision(self, [c[0], c[1]])
    }
}

/// A disk robot of radius `robot_radius` on an occupancy grid; the pose is
/// `(x, y, θ)` and the footprint ignores `θ`.
#[derive(Debug, Clone)]
pub struct Se2World {
    pub map: Arc<GridMap>,
    pub robot_radius: f64,
}

impl Environment for Se2World {
    fn bounds(&self) -> Vec<[f64; 2]> {
        let (ex, ey) = self.map.extent();
        vec![ex, ey, [-PI, PI]]
    }

    fn in_collision(&self, q: &Configuration) -> bool {
        let c = q.as_slice();
        self.map.disk_in_collision(c[0], c[1], self.robot_radius)
    }
}
