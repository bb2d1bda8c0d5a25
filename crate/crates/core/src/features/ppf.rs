use nalgebra::{Point3, Vector3};

use crate::geometry::angle_between;

/// `[‖d‖, ∠(n1, d), ∠(n2, d), ∠(n1, n2)]` with `d = p2 − p1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ppf {
    pub dist: f64,
    pub angle_n1_d: f64,
    pub angle_n2_d: f64,
    pub angle_n1_n2: f64,
    /// Set when `p1 == p2`: `d` has no direction, so every angle channel
    /// carries `∠(n1, n2)`.
    pub coincident: bool,
}

impl Ppf {
    pub fn to_array(&self) -> [f64; 4] {
        [self.dist, self.angle_n1_d, self.angle_n2_d, self.angle_n1_n2]
    }
}

pub fn ppf(p1: &Point3<f64>, p2: &Point3<f64>, n1: &Vector3<f64>, n2: &Vector3<f64>) -> Ppf {
    let d = p2 - p1;
    let dist = d.norm();
    let angle_n1_n2 = angle_between(n1, n2);
    if dist == 0.0 {
        return Ppf {
            dist: 0.0,
            angle_n1_d: angle_n1_n2,
            angle_n2_d: angle_n1_n2,
            angle_n1_n2,
            coincident: true,
        };
    }
    Ppf {
        dist,
        angle_n1_d: angle_between(n1, &d),
        angle_n2_d: angle_between(n2, &d),
        angle_n1_n2,
        coincident: false,
    }
}
