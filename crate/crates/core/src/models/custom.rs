//! User-supplied one-dimensional models in TOML.
//!
//! ```toml
//! id = "tent-like"
//! [[branch]]
//! kind = "affine"
//! scale = [0.5, 1.0]
//! offset = [0.0, 0.0]
//! [[branch]]
//! kind = "mobius"
//! a = -0.5
//! b = 1.0
//! c = 0.0
//! d = 1.0
//! [roof]
//! kind = "series"
//! poly = [2.0]
//! [skew]
//! contraction = 0.25
//! coupling = 0.25
//! ```

use super::branch::{Branch, BranchFamily};
use super::roof::Roof;
use super::skew::SkewFactor;
use super::ModelSystem;
use crate::error::{Error, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CustomModel {
    id: Option<String>,
    #[serde(default)]
    alpha: Option<f64>,
    branch: Vec<Branch>,
    roof: Roof,
    skew: Option<SkewFactor>,
}

pub fn parse_custom_model(text: &str) -> Result<ModelSystem> {
    let spec: CustomModel = toml::from_str(text).map_err(|e| Error::ModelSpec(e.to_string()))?;
    if spec.branch.is_empty() {
        return Err(Error::ModelSpec("at least one branch is required".into()));
    }
    for (i, h) in spec.branch.iter().enumerate() {
        let lo = h.apply(&[0.0, 0.0])[0];
        let hi = h.apply(&[1.0, 0.0])[0];
        let ok = [lo, hi].iter().all(|v| v.is_finite() && (-1e-12..=1.0 + 1e-12).contains(v));
        if !ok {
            return Err(Error::ModelSpec(format!("branch {i} does not map [0,1] into itself")));
        }
        if h.jacobian(&[0.5, 0.0])[0].abs() >= 1.0 {
            return Err(Error::ModelSpec(format!("branch {i} is not contracting")));
        }
    }
    if let Roof::Series { axis, .. } = &spec.roof {
        if *axis != 0 {
            return Err(Error::ModelSpec("custom models are one-dimensional; roof axis must be 0".into()));
        }
    }
    let mut family = BranchFamily::finite(1, spec.branch);
    if let Some(a) = spec.alpha {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::ModelSpec(format!("alpha {a} outside (0,1]")));
        }
        family.alpha = a;
    }
    Ok(ModelSystem {
        id: spec.id.unwrap_or_else(|| "custom".into()),
        family,
        roof: spec.roof,
        skew: spec.skew,
    })
}

pub fn load_custom_model(path: &Path) -> Result<ModelSystem> {
    let text = std::fs::read_to_string(path)?;
    parse_custom_model(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOUBLING: &str = r#"
id = "doubling-toml"
[[branch]]
kind = "affine"
scale = [0.5, 1.0]
offset = [0.0, 0.0]
[[branch]]
kind = "affine"
scale = [0.5, 1.0]
offset = [0.5, 0.0]
[roof]
kind = "series"
poly = [2.0, 1.0, -1.0]
"#;

    #[test]
    fn toml_doubling_equals_builtin() {
        let m = parse_custom_model(DOUBLING).unwrap();
        let a = ModelSystem::builtin("A").unwrap();
        assert_eq!(m.family, a.family);
        assert_eq!(m.roof, a.roof);
        assert_eq!(m.id, "doubling-toml");
    }

    #[test]
    fn rejects_expanding_branch() {
        let bad = DOUBLING.replace("scale = [0.5, 1.0]\noffset = [0.5, 0.0]", "scale = [1.5, 1.0]\noffset = [0.0, 0.0]");
        assert!(matches!(parse_custom_model(&bad), Err(Error::ModelSpec(_))));
        assert!(matches!(parse_custom_model("id = 3"), Err(Error::ModelSpec(_))));
    }
}
