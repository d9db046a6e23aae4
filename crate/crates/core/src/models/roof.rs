use super::branch::Point;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Roof function `r: Y -> (0, inf)`, depending on one coordinate axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Roof {
    /// `r(y) = sum_k poly[k] y^k + sum_k cos[k-1] cos(2 pi k y) + sin[k-1] sin(2 pi k y)`
    /// evaluated on coordinate `axis`.
    Series {
        poly: Vec<f64>,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
        #[serde(default)]
        axis: usize,
    },
    /// `r(y) = -ln y + offset`; unbounded near `y = 0`.
    NegLog { offset: f64 },
}

impl Roof {
    pub fn constant(c: f64) -> Self {
        Roof::Series {
            poly: vec![c],
            cos: vec![],
            sin: vec![],
            axis: 0,
        }
    }

    /// `2 + y(1-y)` on the given axis.
    pub fn quadratic(axis: usize) -> Self {
        Roof::Series {
            poly: vec![2.0, 1.0, -1.0],
            cos: vec![],
            sin: vec![],
            axis,
        }
    }

    /// `xi o F - xi + zeta` for `F(y) = 2y mod 1` and `xi(y) = amp sin(2 pi y)`.
    pub fn doubling_coboundary(amp: f64, zeta: f64) -> Self {
        Roof::Series {
            poly: vec![zeta],
            cos: vec![],
            sin: vec![-amp, amp],
            axis: 0,
        }
    }

    pub fn eval(&self, y: &Point) -> f64 {
        match self {
            Roof::Series {
                poly,
                cos,
                sin,
                axis,
            } => {
                let x = y[*axis];
                let mut acc = poly.iter().rev().fold(0.0, |acc, c| acc * x + c);
                for (k, c) in cos.iter().enumerate() {
                    acc += c * (2.0 * PI * (k + 1) as f64 * x).cos();
                }
                for (k, s) in sin.iter().enumerate() {
                    acc += s * (2.0 * PI * (k + 1) as f64 * x).sin();
                }
                acc
            }
            Roof::NegLog { offset } => -y[0].ln() + offset,
        }
    }

    pub fn grad(&self, y: &Point) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        match self {
            Roof::Series {
                poly,
                cos,
                sin,
                axis,
            } => {
                let x = y[*axis];
                let mut d = poly
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| c * k as f64 * x.powi(k as i32 - 1))
                    .sum::<f64>();
                for (k, c) in cos.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64;
                    d -= c * w * (w * x).sin();
                }
                for (k, s) in sin.iter().enumerate() {
                    let w = 2.0 * PI * (k + 1) as f64;
                    d += s * w * (w * x).cos();
                }
                g[*axis] = d;
            }
            Roof::NegLog { .. } => g[0] = -1.0 / y[0],
        }
        g
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Roof::Series { poly, cos, sin, .. } => {
                poly.iter().skip(1).all(|c| *c == 0.0)
                    && cos.iter().all(|c| *c == 0.0)
                    && sin.iter().all(|c| *c == 0.0)
            }
            Roof::NegLog { .. } => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_values_and_gradient() {
        let r = Roof::quadratic(0);
        assert_eq!(r.eval(&[0.0, 0.0]), 2.0);
        assert_eq!(r.eval(&[0.5, 0.0]), 2.25);
        assert!((r.grad(&[0.25, 0.0])[0] - 0.5).abs() < 1e-15);
        let r2 = Roof::quadratic(0);
        // second axis untouched
        assert_eq!(r2.grad(&[0.25, 0.7])[1], 0.0);
    }

    #[test]
    fn coboundary_matches_definition() {
        let r = Roof::doubling_coboundary(0.1, 2.0);
        let xi = |y: f64| 0.1 * (2.0 * PI * y).sin();
        for i in 0..50 {
            let y = i as f64 / 50.0;
            let fy = (2.0 * y).fract();
            assert!((r.eval(&[y, 0.0]) - (xi(fy) - xi(y) + 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_difference() {
        let r = Roof::Series {
            poly: vec![1.0, 0.3, 0.0, -0.2],
            cos: vec![0.1],
            sin: vec![0.0, 0.05],
            axis: 0,
        };
        for i in 1..20 {
            let y = i as f64 / 20.0;
            let h = 1e-6;
            let fd = (r.eval(&[y + h, 0.0]) - r.eval(&[y - h, 0.0])) / (2.0 * h);
            assert!((fd - r.grad(&[y, 0.0])[0]).abs() < 1e-6);
        }
    }
}
