use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Fiber point in `Z = [-1,1]^2`.
pub type Fiber = [f64; 2];

/// Linear fiber map `G(y,z) = contraction * z + coupling * e(y)` with
/// `e(y) = (cos 2 pi y, sin 2 pi y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewFactor {
    pub contraction: f64,
    pub coupling: f64,
}

impl SkewFactor {
    /// `G(y,z) = (z + e(y)) / 4`.
    pub fn solenoid() -> Self {
        Self {
            contraction: 0.25,
            coupling: 0.25,
        }
    }

    pub fn apply(&self, y: f64, z: &Fiber) -> Fiber {
        let (s, c) = (2.0 * PI * y).sin_cos();
        [
            self.contraction * z[0] + self.coupling * c,
            self.contraction * z[1] + self.coupling * s,
        ]
    }

    pub fn fiber_distance(a: &Fiber, b: &Fiber) -> f64 {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}
