//! Inverse-branch families of full-branch expanding maps on the unit cube.
//!
//! All built-in branches have diagonal Jacobians, so a point carries two
//! coordinates and a derivative carries two diagonal entries; one-dimensional
//! systems leave the second slot at zero (resp. one for derivatives).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A point of `Y`. One-dimensional systems use only the first coordinate.
pub type Point = [f64; 2];

const DOMAIN_SLACK: f64 = 1e-12;

/// A single inverse branch `h: Y -> range(h)` with a closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Branch {
    /// `h(y)_i = scale_i * y_i + offset_i`.
    Affine { scale: [f64; 2], offset: [f64; 2] },
    /// One-dimensional Möbius map `h(y) = (a y + b) / (c y + d)`.
    Mobius { a: f64, b: f64, c: f64, d: f64 },
}

impl Branch {
    pub fn affine_1d(scale: f64, offset: f64) -> Self {
        Branch::Affine {
            scale: [scale, 1.0],
            offset: [offset, 0.0],
        }
    }

    /// The `n`-th Gauss branch `y -> 1/(n+y)`.
    pub fn gauss(n: usize) -> Self {
        Branch::Mobius {
            a: 0.0,
            b: 1.0,
            c: 1.0,
            d: n as f64,
        }
    }

    pub fn apply(&self, y: &Point) -> Point {
        match *self {
            Branch::Affine { scale, offset } => [
                scale[0] * y[0] + offset[0],
                scale[1] * y[1] + offset[1],
            ],
            Branch::Mobius { a, b, c, d } => [(a * y[0] + b) / (c * y[0] + d), 0.0],
        }
    }

    /// Diagonal of `Dh(y)`.
    pub fn jacobian(&self, y: &Point) -> [f64; 2] {
        match *self {
            Branch::Affine { scale, .. } => scale,
            Branch::Mobius { a, b, c, d } => {
                let den = c * y[0] + d;
                [(a * d - b * c) / (den * den), 1.0]
            }
        }
    }

    /// Inverse of the branch, i.e. the forward map restricted to `range(h)`.
    pub fn invert(&self, x: &Point) -> Point {
        match *self {
            Branch::Affine { scale, offset } => {
                [(x[0] - offset[0]) / scale[0], (x[1] - offset[1]) / scale[1]]
            }
            Branch::Mobius { a, b, c, d } => [(d * x[0] - b) / (a - c * x[0]), 0.0],
        }
    }

    /// Lebesgue measure of `h([0,1]^dim)`.
    pub fn range_measure(&self, dim: usize) -> f64 {
        match *self {
            Branch::Affine { scale, .. } => scale.iter().take(dim).map(|s| s.abs()).product(),
            Branch::Mobius { .. } => (self.apply(&[1.0, 0.0])[0] - self.apply(&[0.0, 0.0])[0]).abs(),
        }
    }
}

/// Enumerable part of the branch family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BranchSet {
    Finite(Vec<Branch>),
    /// Gauss branches `h_n(y) = 1/(n+y)`, `n >= 1`. The first `explicit`
    /// branches are enumerated; the rest are treated analytically.
    Gauss { explicit: usize },
}

/// Indexed family of inverse branches with common domain `Y = (0,1)^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchFamily {
    pub dim: usize,
    pub set: BranchSet,
    /// Hölder exponent of the branch data.
    pub alpha: f64,
}

/// Result of evaluating a composed branch `h_w` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEval {
    pub point: Point,
    pub jacobian: [f64; 2],
    pub log_det: f64,
}

impl BranchEval {
    pub fn det(&self) -> f64 {
        self.log_det.exp()
    }
}

impl BranchFamily {
    pub fn finite(dim: usize, branches: Vec<Branch>) -> Self {
        Self {
            dim,
            set: BranchSet::Finite(branches),
            alpha: 1.0,
        }
    }

    pub fn gauss(explicit: usize) -> Self {
        Self {
            dim: 1,
            set: BranchSet::Gauss { explicit },
            alpha: 1.0,
        }
    }

    /// Number of branches, `None` for countable families.
    pub fn count(&self) -> Option<usize> {
        match &self.set {
            BranchSet::Finite(b) => Some(b.len()),
            BranchSet::Gauss { .. } => None,
        }
    }

    pub fn is_countable(&self) -> bool {
        self.count().is_none()
    }

    /// Indices of the enumerated branches.
    pub fn indices(&self) -> std::ops::Range<usize> {
        match &self.set {
            BranchSet::Finite(b) => 0..b.len(),
            BranchSet::Gauss { explicit } => 1..explicit + 1,
        }
    }

    pub fn branch(&self, index: usize) -> Result<Branch> {
        match &self.set {
            BranchSet::Finite(b) => b.get(index).copied().ok_or_else(|| Error::InvalidBranch {
                index,
                valid: format!("0..{}", b.len()),
            }),
            BranchSet::Gauss { explicit } => {
                if index >= 1 && index <= *explicit {
                    Ok(Branch::gauss(index))
                } else {
                    Err(Error::InvalidBranch {
                        index,
                        valid: format!("1..={explicit}"),
                    })
                }
            }
        }
    }

    pub fn check_domain(&self, y: &Point) -> Result<()> {
        let ok = y
            .iter()
            .take(self.dim)
            .all(|&c| c.is_finite() && (-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&c));
        if ok {
            Ok(())
        } else {
            Err(Error::OutOfDomain(y[..self.dim].to_vec()))
        }
    }

    /// `h_w(y)` with `w` applied right-to-left, together with `Dh_w(y)` and
    /// `log|det Dh_w(y)|` accumulated by the chain rule.
    pub fn eval_word(&self, word: &[usize], y: &Point) -> Result<BranchEval> {
        self.check_domain(y)?;
        let mut point = *y;
        let mut jac = [1.0, 1.0];
        let mut log_det = 0.0;
        for &i in word.iter().rev() {
            let h = self.branch(i)?;
            let d = h.jacobian(&point);
            point = h.apply(&point);
            for k in 0..self.dim {
                jac[k] *= d[k];
                log_det += d[k].abs().ln();
            }
        }
        Ok(BranchEval {
            point,
            jacobian: jac,
            log_det,
        })
    }

    /// The orbit `x_k = h_{w_k} ... h_{w_{n-1}}(y)` for `k = 0..n`, with the
    /// diagonal derivative `dx_k/dy`. Entry `n` is `y` itself.
    pub fn word_chain(&self, word: &[usize], y: &Point) -> Result<Vec<(Point, [f64; 2])>> {
        self.check_domain(y)?;
        let n = word.len();
        let mut chain = vec![(*y, [1.0, 1.0]); n + 1];
        for k in (0..n).rev() {
            let (x, j) = chain[k + 1];
            let h = self.branch(word[k])?;
            let d = h.jacobian(&x);
            chain[k] = (h.apply(&x), [d[0] * j[0], d[1] * j[1]]);
        }
        Ok(chain)
    }

    /// Forward map `F`: the branch whose range contains `x` and the preimage.
    pub fn forward(&self, x: &Point) -> Option<(usize, Point)> {
        match &self.set {
            BranchSet::Gauss { .. } => {
                if !(x[0] > 0.0 && x[0] <= 1.0) {
                    return None;
                }
                let inv = 1.0 / x[0];
                let n = inv.floor().max(1.0);
                Some((n as usize, [(inv - n).clamp(0.0, 1.0), 0.0]))
            }
            BranchSet::Finite(branches) => {
                let mut fallback = None;
                for (i, h) in branches.iter().enumerate() {
                    let y = h.invert(x);
                    let inside = y
                        .iter()
                        .take(self.dim)
                        .all(|&c| (-1e-13..1.0 - 1e-13).contains(&c));
                    if inside {
                        return Some((i, clamp_unit(y, self.dim)));
                    }
                    let closed = y
                        .iter()
                        .take(self.dim)
                        .all(|&c| (-1e-13..=1.0 + 1e-13).contains(&c));
                    if closed && fallback.is_none() {
                        fallback = Some((i, clamp_unit(y, self.dim)));
                    }
                }
                fallback
            }
        }
    }

    /// Certified bound on `sum_{n > explicit} |det Dh_n|_inf` for countable families.
    pub fn tail_mass_bound(&self) -> f64 {
        match &self.set {
            BranchSet::Finite(_) => 0.0,
            // sum_{n>N} 1/n^2 <= 1/N
            BranchSet::Gauss { explicit } => 1.0 / *explicit as f64,
        }
    }
}

fn clamp_unit(mut y: Point, dim: usize) -> Point {
    for c in y.iter_mut().take(dim) {
        *c = c.clamp(0.0, 1.0);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling() -> BranchFamily {
        BranchFamily::finite(
            1,
            vec![Branch::affine_1d(0.5, 0.0), Branch::affine_1d(0.5, 0.5)],
        )
    }

    #[test]
    fn doubling_single_branch() {
        let e = doubling().eval_word(&[0], &[0.5, 0.0]).unwrap();
        assert_eq!(e.point[0], 0.25);
        assert_eq!(e.jacobian[0], 0.5);
        assert!((e.log_det - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn composition_matches_sequential_calls() {
        let fam = doubling();
        let inner = fam.eval_word(&[1], &[0.5, 0.0]).unwrap();
        let outer = fam.eval_word(&[0], &inner.point).unwrap();
        let both = fam.eval_word(&[0, 1], &[0.5, 0.0]).unwrap();
        assert_eq!(both.point, outer.point);
        assert_eq!(both.jacobian[0], inner.jacobian[0] * outer.jacobian[0]);
        assert_eq!(both.jacobian[0], 0.25);
    }

    #[test]
    fn gauss_branch_two() {
        let fam = BranchFamily::gauss(100);
        let e = fam.eval_word(&[2], &[0.0, 0.0]).unwrap();
        assert_eq!(e.point[0], 0.5);
        assert!((e.det() - 0.25).abs() < 1e-15);
        assert!(fam.eval_word(&[0], &[0.0, 0.0]).is_err());
        assert!(fam.eval_word(&[101], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn out_of_domain_rejected() {
        assert!(matches!(
            doubling().eval_word(&[0], &[1.5, 0.0]),
            Err(Error::OutOfDomain(_))
        ));
    }

    #[test]
    fn forward_half_open_ties() {
        let fam = doubling();
        assert_eq!(fam.forward(&[0.5, 0.0]).unwrap().0, 1);
        assert_eq!(fam.forward(&[0.25, 0.0]).unwrap(), (0, [0.5, 0.0]));
        let g = BranchFamily::gauss(10);
        let (n, y) = g.forward(&[1.0 / 3.5, 0.0]).unwrap();
        assert_eq!(n, 3);
        assert!((y[0] - 0.5).abs() < 1e-12);
    }
}
