//! Temporal distortion on the skew product `X = Y x Z`.
//!
//! A point on the attractor is recorded as its base coordinate plus its
//! backward itinerary (most recent branch first). Itineraries are extended
//! past their recorded prefix by cycling through all branches.

use crate::error::{Error, Result};
use crate::models::{Branch, BranchSet, Fiber, ModelSystem, SkewFactor};
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewPoint {
    pub y: f64,
    pub history: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionValue {
    pub value: f64,
    /// Number of inverse-branch steps summed in each series.
    pub depth: usize,
    /// Geometric bound on the neglected tail.
    pub error_bound: f64,
    /// `|D_depth - D_{depth/2}|`.
    pub half_depth_gap: f64,
    /// `[x1,x2]` and `[x2,x1]` as `(y, z)`.
    pub product_12: (f64, Fiber),
    pub product_21: (f64, Fiber),
}

/// Contraction and roof data needed by the series.
#[derive(Debug, Clone)]
pub struct SkewGeometry {
    branches: Vec<Branch>,
    skew: SkewFactor,
    /// `sup |Dh|` over branches.
    pub lambda: f64,
    /// `sup |r'|` on a 1025-node grid.
    pub roof_lip: f64,
}

impl SkewGeometry {
    pub fn new(model: &ModelSystem) -> Result<Self> {
        let skew = model.skew.ok_or_else(|| Error::NoSkewFactor(model.id.clone()))?;
        let branches = match &model.family.set {
            BranchSet::Finite(b) if model.dim() == 1 => b.clone(),
            _ => {
                return Err(Error::Precondition(
                    "temporal distortion needs a finite one-dimensional family".into(),
                ))
            }
        };
        let nodes = (0..=1024).map(|i| [i as f64 / 1024.0, 0.0]);
        let mut lambda: f64 = 0.0;
        let mut lip: f64 = 0.0;
        for y in nodes {
            for h in &branches {
                lambda = lambda.max(h.jacobian(&y)[0].abs());
            }
            lip = lip.max(model.roof.grad(&y)[0].abs());
        }
        if !(lambda < 1.0) {
            return Err(Error::Precondition(format!("inverse branches do not contract ({lambda})")));
        }
        Ok(Self {
            branches,
            skew,
            lambda,
            roof_lip: lip,
        })
    }

    fn branch_at(&self, history: &[usize], j: usize) -> Result<&Branch> {
        let i = history.get(j).copied().unwrap_or(j % self.branches.len());
        self.branches.get(i).ok_or_else(|| Error::InvalidBranch {
            index: i,
            valid: format!("0..{}", self.branches.len()),
        })
    }

    /// `h_{w_j} ... h_{w_1}(y)` for `j = 1..=depth`.
    pub fn inverse_chain(&self, y: f64, history: &[usize], depth: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(depth);
        let mut p = [y, 0.0];
        for j in 0..depth {
            p = self.branch_at(history, j)?.apply(&p);
            out.push(p[0]);
        }
        Ok(out)
    }

    /// Steps after which the fiber graph is fixed to within `tol`.
    pub fn fiber_depth(&self, tol: f64) -> usize {
        let c = self.skew.contraction;
        if c <= 0.0 {
            return 1;
        }
        let mut k = 1;
        while c.powi(k as i32) * 2f64.sqrt() >= tol && k < 10_000 {
            k += 1;
        }
        k
    }

    /// Fiber coordinate of the unstable graph with itinerary `history` over
    /// base point `y`: `sum_k c^{k-1} kappa e(y_{-k})`.
    pub fn leaf_fiber(&self, y: f64, history: &[usize], tol: f64) -> Result<Fiber> {
        let chain = self.inverse_chain(y, history, self.fiber_depth(tol))?;
        let mut z = [0.0, 0.0];
        for &yk in chain.iter().rev() {
            z = self.skew.apply(yk, &z);
        }
        Ok(z)
    }

    /// `[x1, x2]`: base of `x2` on the unstable leaf of `x1`.
    pub fn local_product(&self, x1: &SkewPoint, x2: &SkewPoint, tol: f64) -> Result<(f64, Fiber)> {
        self.same_element(x1.y, x2.y)?;
        Ok((x2.y, self.leaf_fiber(x2.y, &x1.history, tol)?))
    }

    fn element(&self, y: f64) -> Option<usize> {
        self.branches.iter().position(|h| {
            let a = h.apply(&[0.0, 0.0])[0];
            let b = h.apply(&[1.0, 0.0])[0];
            let (lo, hi) = (a.min(b), a.max(b));
            lo <= y && y <= hi
        })
    }

    fn same_element(&self, y1: f64, y2: f64) -> Result<()> {
        match (self.element(y1), self.element(y2)) {
            (Some(a), Some(b)) if a == b => Ok(()),
            _ => Err(Error::LocalProduct(format!(
                "base points {y1} and {y2} lie in different partition elements"
            ))),
        }
    }

    /// `D0(x, x') = sum_{j<=depth} r(z_j) - r(z_j')` along the chain of `x`.
    pub fn d0(&self, model: &ModelSystem, x: &SkewPoint, y_prime: f64, depth: usize) -> Result<f64> {
        let a = self.inverse_chain(x.y, &x.history, depth)?;
        let b = self.inverse_chain(y_prime, &x.history, depth)?;
        Ok(a.iter()
            .zip(&b)
            .map(|(p, q)| model.roof_at(&[*p, 0.0]) - model.roof_at(&[*q, 0.0]))
            .sum())
    }

    /// Bound on the tail of both series beyond `depth`.
    pub fn tail_bound(&self, dy: f64, depth: usize) -> f64 {
        2.0 * self.roof_lip * dy.abs() * self.lambda.powi(depth as i32 + 1) / (1.0 - self.lambda)
    }
}

/// `D(x1,x2) = D0(x1,[x1,x2]) + D0(x2,[x2,x1])`, summed until the geometric
/// tail bound drops below `tol`, and recomputed at twice that depth.
pub fn temporal_distortion(model: &ModelSystem, x1: &SkewPoint, x2: &SkewPoint, tol: f64) -> Result<DistortionValue> {
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance {tol} must be positive")));
    }
    let geo = SkewGeometry::new(model)?;
    let p12 = geo.local_product(x1, x2, tol)?;
    let p21 = geo.local_product(x2, x1, tol)?;
    let dy = x1.y - x2.y;
    let mut depth = 1;
    while geo.tail_bound(dy, depth) > tol && depth < 4096 {
        depth += 1;
    }
    let eval = |d: usize| -> Result<f64> { Ok(geo.d0(model, x1, x2.y, d)? + geo.d0(model, x2, x1.y, d)?) };
    let coarse = eval(depth)?;
    let fine = eval(2 * depth)?;
    Ok(DistortionValue {
        value: fine,
        depth: 2 * depth,
        error_bound: geo.tail_bound(dy, 2 * depth),
        half_depth_gap: (fine - coarse).abs(),
        product_12: p12,
        product_21: p21,
    })
}

/// Two attractor points over the same partition element with independent
/// random itineraries of length `history`.
pub fn random_pair<R: Rng>(model: &ModelSystem, history: usize, rng: &mut R) -> Result<(SkewPoint, SkewPoint)> {
    let geo = SkewGeometry::new(model)?;
    let nb = geo.branches.len();
    let h = &geo.branches[rng.random_range(0..nb)];
    let point = |rng: &mut R| SkewPoint {
        y: h.apply(&[rng.random::<f64>(), 0.0])[0],
        history: (0..history).map(|_| rng.random_range(0..nb)).collect(),
    };
    let a = point(rng);
    let b = point(rng);
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Roof;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_roof_has_no_distortion() {
        let m = ModelSystem::builtin("C").unwrap().with_roof(Roof::constant(2.0));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let (a, b) = random_pair(&m, 40, &mut rng).unwrap();
            assert_eq!(temporal_distortion(&m, &a, &b, 1e-12).unwrap().value, 0.0);
        }
    }

    #[test]
    fn diagonal_and_same_leaf() {
        let m = ModelSystem::builtin("C").unwrap();
        let x = SkewPoint { y: 0.2, history: vec![1, 0, 0, 1, 1] };
        assert_eq!(temporal_distortion(&m, &x, &x, 1e-12).unwrap().value, 0.0);
        let x2 = SkewPoint { y: 0.4, ..x.clone() };
        assert_eq!(temporal_distortion(&m, &x, &x2, 1e-12).unwrap().value, 0.0);
    }

    #[test]
    fn local_product_coordinates() {
        let m = ModelSystem::builtin("C").unwrap();
        let geo = SkewGeometry::new(&m).unwrap();
        let x1 = SkewPoint { y: 0.1, history: (0..40).map(|i| (i * i + 1) % 2).collect() };
        let x2 = SkewPoint { y: 0.3, history: vec![1, 1] };
        let (y, z) = geo.local_product(&x1, &x2, 1e-14).unwrap();
        assert_eq!(y, x2.y);
        // z is invariant under the fiber map along the chain of x1
        let pre = geo.inverse_chain(0.3, &x1.history, 1).unwrap()[0];
        let z_pre = geo.leaf_fiber(pre, &x1.history[1..], 1e-14).unwrap();
        let img = m.skew.unwrap().apply(pre, &z_pre);
        assert!(SkewFactor::fiber_distance(&img, &z) < 1e-12);
        let far = SkewPoint { y: 0.9, history: vec![] };
        assert!(matches!(temporal_distortion(&m, &x1, &far, 1e-10), Err(Error::LocalProduct(_))));
        let b = ModelSystem::builtin("B").unwrap();
        assert!(matches!(temporal_distortion(&b, &x1, &x2, 1e-10), Err(Error::NoSkewFactor(_))));
    }
}
