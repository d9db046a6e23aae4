use crate::error::{Error, Result};
use crate::models::{Branch, BranchSet, ModelSystem, Point};
use serde::{Deserialize, Serialize};

/// Expanding model viewed as the unstable-disk dynamics of an attractor with
/// trivial holonomy (`pi = id`, `C2 = C3 = 1`, `alpha = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientSystem {
    pub model: ModelSystem,
    pub dim: usize,
    /// Uniform expansion factor of `F`.
    pub kappa: f64,
    /// Backward contraction `1/kappa`.
    pub lambda: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub p: Point,
    pub delta0: f64,
}

impl AmbientSystem {
    /// Requires a finite family of affine branches sharing one isotropic
    /// contraction, so that `phi_n` is conformal with factor `kappa^n`.
    pub fn from_model(model: &ModelSystem, p: Option<Point>, delta0: Option<f64>) -> Result<Self> {
        let dim = model.dim();
        let branches = match &model.family.set {
            BranchSet::Finite(b) => b,
            BranchSet::Gauss { .. } => {
                return Err(Error::Precondition(
                    "inducing needs a finite conformal affine family".into(),
                ))
            }
        };
        let mut scale = None;
        for h in branches {
            let s = match h {
                Branch::Affine { scale, .. } => *scale,
                _ => return Err(Error::Precondition("inducing needs affine branches".into())),
            };
            if !(s[0] > 0.0 && s[0] < 1.0) || (dim == 2 && s[1] != s[0]) {
                return Err(Error::Precondition(format!("branch scale {s:?} is not an isotropic contraction")));
            }
            match scale {
                None => scale = Some(s[0]),
                Some(c) if c != s[0] => {
                    return Err(Error::Precondition("branches must share one contraction".into()))
                }
                _ => {}
            }
        }
        let s = scale.ok_or_else(|| Error::Precondition("empty branch family".into()))?;
        let p = p.unwrap_or(if dim == 1 { [0.5, 0.0] } else { [0.5, 0.5] });
        let delta0 = delta0.unwrap_or(0.5);
        let room = (0..dim).map(|i| p[i].min(1.0 - p[i])).fold(f64::INFINITY, f64::min);
        if !(delta0 > 0.0 && delta0 <= room) {
            return Err(Error::Precondition(format!(
                "delta0 = {delta0} must be positive and keep the disk around p inside the domain"
            )));
        }
        Ok(Self {
            model: model.clone(),
            dim,
            kappa: 1.0 / s,
            lambda: s,
            alpha: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            p,
            delta0,
        })
    }

    /// Least `N1` such that the preimages of `p` of orders `1..=N1` are
    /// `delta`-dense in the domain (checked on a 64^d sample grid).
    pub fn density_horizon(&self, delta: f64, max_n: usize) -> Result<usize> {
        let fam = &self.model.family;
        let samples: Vec<Point> = if self.dim == 1 {
            (0..=64).map(|i| [i as f64 / 64.0, 0.0]).collect()
        } else {
            (0..=64)
                .flat_map(|i| (0..=64).map(move |j| [i as f64 / 64.0, j as f64 / 64.0]))
                .collect()
        };
        let mut covered = vec![false; samples.len()];
        let mut level = vec![self.p];
        for n in 1..=max_n {
            let mut next = Vec::with_capacity(level.len() * fam.indices().len());
            for y in &level {
                for i in fam.indices() {
                    next.push(fam.branch(i)?.apply(y));
                }
            }
            for (s, c) in samples.iter().zip(covered.iter_mut()) {
                if !*c {
                    *c = next
                        .iter()
                        .any(|q| (q[0] - s[0]).hypot(q[1] - s[1]) < delta);
                }
            }
            if covered.iter().all(|&c| c) {
                return Ok(n);
            }
            if next.len() > 1 << 20 {
                break;
            }
            level = next;
        }
        Err(Error::NoAdmissibleConstants(format!(
            "backward orbit of p not {delta}-dense within {max_n} steps"
        )))
    }
}

/// Optional overrides for [`derive_constants`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantOverrides {
    pub l: Option<u32>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InducingConstants {
    pub delta0: f64,
    pub delta1: f64,
    pub delta: f64,
    pub l: u32,
    pub epsilon: f64,
    pub n1: usize,
    pub n2: usize,
    pub n: usize,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub d_u: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub a1: f64,
    pub a0: f64,
    pub d: f64,
}

/// `Leb(union_{i>=k} I_i) / Leb(I_k)` for annuli in dimension `d`.
pub fn annulus_ratio(d: usize, lambda: f64, k: u32) -> f64 {
    let outer = (1.0 + lambda.powi(k as i32 - 1)).powi(d as i32);
    let inner = (1.0 + lambda.powi(k as i32)).powi(d as i32);
    (outer - 1.0) / (outer - inner)
}

/// `sup_k D(d, lambda, k)`; the sequence tends to `1/(1-lambda)`.
pub fn annulus_ratio_sup(d: usize, lambda: f64) -> f64 {
    (1..=200)
        .map(|k| annulus_ratio(d, lambda, k))
        .filter(|v| v.is_finite())
        .fold(1.0 / (1.0 - lambda), f64::max)
}

/// Smallest `L >= 3` with `C1 C2^2 (2^d - 1)/(L-1)^d < 1/4`.
pub fn least_l(c1: f64, c2: f64, d: usize) -> u32 {
    let lhs = |l: u32| c1 * c2 * c2 * ((1u64 << d) - 1) as f64 / ((l - 1) as f64).powi(d as i32);
    (3..).find(|&l| lhs(l) < 0.25).expect("unbounded search")
}

pub fn derive_constants(amb: &AmbientSystem, ov: &ConstantOverrides) -> Result<InducingConstants> {
    let d_u = amb.dim;
    let (c1, c2, c3, c4, alpha, lambda) = (amb.c1, amb.c2, amb.c3, amb.c4, amb.alpha, amb.lambda);
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Precondition(format!("lambda = {lambda} outside (0,1)")));
    }
    let delta0 = amb.delta0;
    let l = match ov.l {
        Some(l) if l >= 3 => l,
        Some(l) => return Err(Error::Precondition(format!("L = {l} below 3"))),
        None => least_l(c1, c2, d_u),
    };
    let lhs = c1 * c2 * c2 * ((1u64 << d_u) - 1) as f64 / ((l - 1) as f64).powi(d_u as i32);
    if lhs >= 0.25 {
        return Err(Error::NoAdmissibleConstants(format!("L = {l} violates the collar inequality")));
    }
    let ladder = |j: i32| delta0 * 2f64.powi(-j);
    let delta_ok = |d: f64| c3 * (3.0 * d).powf(alpha) < 0.5 * delta0 && c4 * (l as f64 + 1.0) * d < delta0;
    let delta = match ov.delta {
        Some(d) if delta_ok(d) => d,
        Some(d) => return Err(Error::NoAdmissibleConstants(format!("delta = {d} violates the product-structure bounds"))),
        None => (1..60)
            .map(ladder)
            .find(|&d| delta_ok(d))
            .ok_or_else(|| Error::NoAdmissibleConstants("no delta on the ladder".into()))?,
    };
    let delta1 = (1..60)
        .map(ladder)
        .find(|&d| d > delta && d < delta0)
        .unwrap_or(0.5 * (delta + delta0));
    let eps_cap = (delta / c3)
        .powf(1.0 / alpha)
        .min((delta * (lambda.powf(-alpha) - 1.0) / c3).powf(1.0 / alpha))
        .min(0.5 * delta0)
        .min(delta0 - l as f64 * delta);
    let epsilon = match ov.epsilon {
        Some(e) if e > 0.0 && e < eps_cap => e,
        Some(e) => return Err(Error::NoAdmissibleConstants(format!("epsilon = {e} not below {eps_cap}"))),
        None => (1..60)
            .map(ladder)
            .find(|&e| e < eps_cap)
            .ok_or_else(|| Error::NoAdmissibleConstants("no epsilon on the ladder".into()))?,
    };
    let n1 = amb.density_horizon(delta, 16)?;
    let n2 = (1..)
        .find(|&k| lambda.powi(k) < epsilon / delta0)
        .expect("lambda < 1") as usize;
    let d = annulus_ratio_sup(d_u, lambda.powf(alpha));
    let a1 = 1.0 / (c1 * c2 * c2 * d);
    Ok(InducingConstants {
        delta0,
        delta1,
        delta,
        l,
        epsilon,
        n1,
        n2,
        n: n1 + n2,
        c1,
        c2,
        c3,
        c4,
        d_u,
        lambda,
        alpha,
        a1,
        a0: (2.0 + a1) / (2.0 * a1),
        d,
    })
}

/// The `k >= 1` with `delta(1 + lambda^{alpha k}) <= dist < delta(1 + lambda^{alpha(k-1)})`.
/// Endpoints are compared with a relative slack of `1e-12` so that decimal
/// inputs on a boundary land on the closed side.
pub fn annulus_index(dist: f64, delta: f64, lambda_alpha: f64) -> Option<u32> {
    let tol = 1e-12;
    let edge = |k: i32| delta * (1.0 + lambda_alpha.powi(k));
    if dist >= edge(0) * (1.0 - tol) || dist <= delta * (1.0 + tol) {
        return None;
    }
    let mut k = 1;
    while dist < edge(k) * (1.0 - tol) {
        k += 1;
        if k > 2000 {
            return None;
        }
    }
    Some(k as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collar_exponent() {
        assert_eq!(least_l(1.0, 1.0, 1), 6);
        assert_eq!(least_l(1.0, 1.0, 2), 5);
    }

    #[test]
    fn annulus_constants() {
        assert!((annulus_ratio_sup(1, 0.5) - 2.0).abs() < 1e-12);
        let a1 = 1.0 / annulus_ratio_sup(1, 0.5);
        assert!((a1 - 0.5).abs() < 1e-12);
        assert!(((2.0 + a1) / (2.0 * a1) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn annulus_indices() {
        assert_eq!(annulus_index(0.17, 0.1, 0.5), Some(1));
        assert_eq!(annulus_index(0.15, 0.1, 0.5), Some(1));
        assert_eq!(annulus_index(0.20, 0.1, 0.5), None);
        assert_eq!(annulus_index(0.124, 0.1, 0.5), Some(3));
        assert_eq!(annulus_index(0.125, 0.1, 0.5), Some(2));
        assert_eq!(annulus_index(0.1, 0.1, 0.5), None);
    }

    #[test]
    fn planar_constants() {
        let e = ModelSystem::builtin("E").unwrap();
        let amb = AmbientSystem::from_model(&e, None, None).unwrap();
        let c = derive_constants(&amb, &ConstantOverrides::default()).unwrap();
        assert_eq!(c.l, 5);
        assert!(3.0 * c.delta < 0.5 * c.delta0 && 6.0 * c.delta < c.delta0);
        assert!(c.epsilon < c.delta);
        assert!(c.lambda.powi(c.n2 as i32) < c.epsilon / c.delta0);
        assert!(c.lambda.powi(c.n2 as i32 - 1) >= c.epsilon / c.delta0);
        assert!(AmbientSystem::from_model(&ModelSystem::builtin("D").unwrap(), None, None).is_err());
    }
}
