//! Planar two-link arm among circular obstacles.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmWorld {
    pub link_lengths: [f64; 2],
    pub base: [f64; 2],
    pub obstacles: Vec<Circle>,
    /// `[lo, hi]` per joint, radians.
    pub joint_limits: [[f64; 2]; 2],
}

impl Default for ArmWorld {
    fn default() -> Self {
        Self { link_lengths: [1.0, 1.0], base: [0.0, 0.0], obstacles: Vec::new(), joint_limits: [[-PI, PI], [-PI, PI]] }
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (cx * cx + cy * cy).sqrt()
}

impl ArmWorld {
    pub fn validate(&self) -> Result<()> {
        let limits_ok = self.joint_limits.iter().all(|[lo, hi]| lo < hi && *lo >= -PI && *hi <= PI);
        let links_ok = self.link_lengths.iter().all(|l| *l > 0.0 && l.is_finite());
        let obstacles_ok = self.obstacles.iter().all(|c| c.radius > 0.0 && c.radius.is_finite());
        if limits_ok && links_ok && obstacles_ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter("invalid arm world".into()))
        }
    }

    /// Base, elbow and tip positions.
    pub fn forward_kinematics(&self, q: [f64; 2]) -> [[f64; 2]; 3] {
        let [l1, l2] = self.link_lengths;
        let elbow = [self.base[0] + l1 * q[0].cos(), self.base[1] + l1 * q[0].sin()];
        let tip = [elbow[0] + l2 * (q[0] + q[1]).cos(), elbow[1] + l2 * (q[0] + q[1]).sin()];
        [self.base, elbow, tip]
    }

    pub fn within_limits(&self, q: [f64; 2]) -> bool {
        q.iter().zip(&self.joint_limits).all(|(x, [lo, hi])| x >= lo && x <= hi)
    }

    /// True if a joint limit is violated or a link touches an obstacle.
    pub fn in_collision(&self, q: [f64; 2]) -> bool {
        if !self.within_limits(q) {
            return true;
        }
        let [b, e, t] = self.forward_kinematics(q);
        self.obstacles.iter().any(|c| {
            point_segment_distance(c.center, b, e) <= c.radius || point_segment_distance(c.center, e, t) <= c.radius
        })
    }
}
