use crate::error::{Error, Result};
use crate::inducing::ConstantOverrides;
use crate::semiflow::Observable;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Run configuration. Every field may come from the TOML file given with
/// `--config`; command-line flags take precedence. Unset fields are filled
/// with per-subcommand defaults before the run and recorded in the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    /// `log2` of the cells per axis.
    pub res: Option<u32>,
    pub nmax: Option<usize>,
    pub b: Option<Vec<f64>>,
    pub sigma: Option<Vec<f64>>,
    pub n0: Option<usize>,
    pub nodes: Option<usize>,
    pub pairs: Option<usize>,
    pub steps: Option<usize>,
    pub samples: Option<usize>,
    pub tmax: Option<f64>,
    pub dt: Option<f64>,
    pub observable: Option<Observable>,
    pub observable_w: Option<Observable>,
    pub models: Option<Vec<String>>,
    pub degree: Option<usize>,
    pub tol: Option<f64>,
    pub constants: Option<ConstantOverrides>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

pub const DEFAULT_SEED: u64 = 20160;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merge(mut self, over: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(model, res, nmax, b, sigma, n0, nodes, pairs, steps, samples, tmax, dt, observable,
              observable_w, models, degree, tol, constants, seed, out, threads);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("mtower-out"))
    }
}

/// Parses an observable name as accepted by `--observable`; parameters take
/// their defaults (use the config file for others).
pub fn observable_by_name(name: &str) -> Result<Observable> {
    Ok(match name {
        "constant" => Observable::Constant { value: 1.0 },
        "height-cos" => Observable::HeightCos { k: 1 },
        "base-bump" => Observable::BaseBump { center: 0.5, width: 0.25 },
        "base-cos" => Observable::BaseCos { k: 1 },
        "base-sin" => Observable::BaseSin { k: 1 },
        "odd-bump" => Observable::OddBump { center: 0.25, width: 0.2 },
        "coordinate" => Observable::Coordinate { axis: 0 },
        "height-indicator" => Observable::HeightIndicator { lo: 0.25, hi: 0.5 },
        other => return Err(Error::Config(format!("unknown observable `{other}`"))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let text = r#"
model = "A"
b = [40.0, 100.0]
seed = 3
[observable]
kind = "height-cos"
k = 2
"#;
        let c: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(c.observable, Some(Observable::HeightCos { k: 2 }));
        let merged = c.clone().merge(RunConfig { seed: Some(9), ..Default::default() });
        assert_eq!(merged.seed(), 9);
        assert_eq!(merged.b, c.b);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }
}
