//! Concrete expanding systems: inverse-branch families, roof functions and
//! stable skew factors, plus verification of the standing conditions.

mod branch;
mod custom;
mod roof;
mod skew;
mod verify;

pub use branch::{Branch, BranchEval, BranchFamily, BranchSet, Point};
pub use custom::{load_custom_model, parse_custom_model};
pub use roof::Roof;
pub use skew::{Fiber, SkewFactor};
pub use verify::{
    verify_gibbs_markov, verify_skew_contraction, ConditionVerdict, GibbsMarkovOptions,
    GibbsMarkovReport, SeriesCertificate, SkewReport,
};

use crate::error::{Error, Result};
use serde::Serialize;

/// Enumerated Gauss branches before the analytic tail takes over.
pub const GAUSS_EXPLICIT_BRANCHES: usize = 1 << 15;

/// Expanding map with roof and optional skew factor.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSystem {
    pub id: String,
    pub family: BranchFamily,
    pub roof: Roof,
    pub skew: Option<SkewFactor>,
}

/// Catalog entry returned by [`list_models`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelDescriptor {
    pub letter: char,
    pub id: &'static str,
    pub dimension: usize,
    /// `None` for countable families.
    pub branches: Option<usize>,
    pub countable: bool,
    pub roof: &'static str,
    pub skew_contraction: Option<f64>,
}

pub const BUILTIN_IDS: [&str; 5] = [
    "doubling-quadratic",
    "doubling-constant",
    "solenoid-skew",
    "gauss",
    "planar-triple",
];

pub fn list_models() -> Vec<ModelDescriptor> {
    let roofs = [
        "2 + y(1-y)",
        "2",
        "2 + y(1-y)",
        "-log y + 2",
        "2 + y1(1-y1)",
    ];
    BUILTIN_IDS
        .iter()
        .zip("ABCDE".chars())
        .zip(roofs)
        .map(|((id, letter), roof)| {
            let m = ModelSystem::builtin(id).expect("builtin");
            ModelDescriptor {
                letter,
                id,
                dimension: m.dim(),
                branches: m.family.count(),
                countable: m.family.is_countable(),
                roof,
                skew_contraction: m.skew.map(|s| s.contraction),
            }
        })
        .collect()
}

fn doubling_family() -> BranchFamily {
    BranchFamily::finite(
        1,
        vec![Branch::affine_1d(0.5, 0.0), Branch::affine_1d(0.5, 0.5)],
    )
}

impl ModelSystem {
    /// Built-in model by id string or letter (`A`..`E`).
    pub fn builtin(id: &str) -> Result<Self> {
        let canonical = match id {
            "A" | "a" => "doubling-quadratic",
            "B" | "b" => "doubling-constant",
            "C" | "c" => "solenoid-skew",
            "D" | "d" => "gauss",
            "E" | "e" => "planar-triple",
            other => other,
        };
        let (family, roof, skew) = match canonical {
            "doubling-quadratic" => (doubling_family(), Roof::quadratic(0), None),
            "doubling-constant" => (doubling_family(), Roof::constant(2.0), None),
            "solenoid-skew" => (
                doubling_family(),
                Roof::quadratic(0),
                Some(SkewFactor::solenoid()),
            ),
            "gauss" => (
                BranchFamily::gauss(GAUSS_EXPLICIT_BRANCHES),
                Roof::NegLog { offset: 2.0 },
                None,
            ),
            "planar-triple" => {
                let mut b = Vec::with_capacity(9);
                for i in 0..3 {
                    for j in 0..3 {
                        b.push(Branch::Affine {
                            scale: [1.0 / 3.0, 1.0 / 3.0],
                            offset: [i as f64 / 3.0, j as f64 / 3.0],
                        });
                    }
                }
                (BranchFamily::finite(2, b), Roof::quadratic(0), None)
            }
            _ => return Err(Error::UnknownModel(id.to_string())),
        };
        Ok(Self {
            id: canonical.to_string(),
            family,
            roof,
            skew,
        })
    }

    /// Doubling map with the cohomologous roof `xi o F - xi + 2`,
    /// `xi(y) = amp sin(2 pi y)`, carrying the solenoid fiber.
    pub fn doubling_coboundary(amp: f64) -> Self {
        Self {
            id: "doubling-coboundary".into(),
            family: doubling_family(),
            roof: Roof::doubling_coboundary(amp, 2.0),
            skew: Some(SkewFactor::solenoid()),
        }
    }

    pub fn with_roof(mut self, roof: Roof) -> Self {
        self.roof = roof;
        self
    }

    pub fn with_skew(mut self, skew: SkewFactor) -> Self {
        self.skew = Some(skew);
        self
    }

    /// Model selection by id: builtins or a path to a TOML description.
    pub fn resolve(id: &str) -> Result<Self> {
        if id == "doubling-coboundary" {
            return Ok(Self::doubling_coboundary(0.1));
        }
        if id.ends_with(".toml") {
            return load_custom_model(std::path::Path::new(id));
        }
        Self::builtin(id)
    }

    pub fn dim(&self) -> usize {
        self.family.dim
    }

    pub fn roof_at(&self, y: &Point) -> f64 {
        self.roof.eval(y)
    }

    /// Forward map on `Y`.
    pub fn forward(&self, y: &Point) -> Option<Point> {
        self.family.forward(y).map(|(_, x)| x)
    }
}

/// `(h_w(y), Dh_w(y), log|det Dh_w(y)|)`.
pub fn branch_eval(model: &ModelSystem, word: &[usize], y: &Point) -> Result<BranchEval> {
    model.family.eval_word(word, y)
}

/// `r_n(h_w(y)) = sum_{j<n} r(F^j h_w y)`, summed along the inverse chain.
pub fn birkhoff_roof(model: &ModelSystem, word: &[usize], y: &Point) -> Result<f64> {
    let chain = model.family.word_chain(word, y)?;
    Ok(chain[..word.len()]
        .iter()
        .map(|(x, _)| model.roof.eval(x))
        .sum())
}

/// Gradient of `r_n o h_w` at `y` by the chain rule.
pub fn birkhoff_roof_grad(model: &ModelSystem, word: &[usize], y: &Point) -> Result<[f64; 2]> {
    let chain = model.family.word_chain(word, y)?;
    let mut g = [0.0, 0.0];
    for (x, j) in &chain[..word.len()] {
        let dr = model.roof.grad(x);
        g[0] += dr[0] * j[0];
        g[1] += dr[1] * j[1];
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_contents() {
        let cat = list_models();
        assert_eq!(cat.len(), 5);
        assert!(cat[3].countable && cat[3].branches.is_none());
        assert_eq!(cat[4].dimension, 2);
        assert_eq!(cat[4].branches, Some(9));
        assert_eq!(cat[2].skew_contraction, Some(0.25));
    }

    #[test]
    fn birkhoff_at_fixed_point() {
        let a = ModelSystem::builtin("A").unwrap();
        assert_eq!(birkhoff_roof(&a, &[0, 0], &[0.0, 0.0]).unwrap(), 4.0);
    }

    #[test]
    fn birkhoff_constant_roof() {
        let b = ModelSystem::builtin("B").unwrap();
        let v = birkhoff_roof(&b, &[1, 0, 1, 1, 0], &[0.37, 0.0]).unwrap();
        assert_eq!(v, 10.0);
    }

    #[test]
    fn birkhoff_matches_forward_orbit() {
        let a = ModelSystem::builtin("A").unwrap();
        let x = branch_eval(&a, &[0, 1], &[0.3, 0.0]).unwrap().point;
        let fx = a.forward(&x).unwrap();
        let oracle = a.roof_at(&x) + a.roof_at(&fx);
        let v = birkhoff_roof(&a, &[0, 1], &[0.3, 0.0]).unwrap();
        assert!((v - oracle).abs() < 1e-12);
    }

    #[test]
    fn unknown_model() {
        assert!(matches!(
            ModelSystem::builtin("tent"),
            Err(Error::UnknownModel(_))
        ));
    }
}
