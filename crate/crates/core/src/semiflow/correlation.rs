use super::suspension::{FlowPoint, SuspensionSystem};
use crate::error::{Error, Result};
use crate::stats::linear_fit;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Batches used for Monte-Carlo error bars.
pub const BATCHES: usize = 32;

/// Observables on the suspension, named for configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Observable {
    Constant { value: f64 },
    /// `cos(2 pi k u / r(y))`.
    HeightCos { k: u32 },
    /// Tent of the given half-width around `center` in `y_0`, times
    /// `sin^2(pi u / r(y))`.
    BaseBump { center: f64, width: f64 },
    /// `cos(2 pi k y_0) sin^2(pi u / r(y))`.
    BaseCos { k: u32 },
    /// `sin(2 pi k y_0) sin^2(pi u / r(y))`.
    BaseSin { k: u32 },
    /// Tent at `center` minus tent at `1 - center`, times
    /// `sin^2(pi u / r(y))`; odd under `y_0 -> 1 - y_0`.
    OddBump { center: f64, width: f64 },
    /// `(y_axis - 1/2) sin^2(pi u / r(y))`.
    Coordinate { axis: usize },
    /// Indicator of `lo <= u / r(y) < hi`.
    HeightIndicator { lo: f64, hi: f64 },
}

impl Observable {
    pub fn eval(&self, p: &FlowPoint, r: f64) -> f64 {
        let s = p.u / r;
        let envelope = || (PI * s).sin().powi(2);
        match *self {
            Observable::Constant { value } => value,
            Observable::HeightCos { k } => (2.0 * PI * k as f64 * s).cos(),
            Observable::BaseBump { center, width } => {
                (1.0 - (p.y[0] - center).abs() / width).max(0.0) * envelope()
            }
            Observable::BaseCos { k } => (2.0 * PI * k as f64 * p.y[0]).cos() * envelope(),
            Observable::BaseSin { k } => (2.0 * PI * k as f64 * p.y[0]).sin() * envelope(),
            Observable::OddBump { center, width } => {
                let tent = |c: f64| (1.0 - (p.y[0] - c).abs() / width).max(0.0);
                (tent(center) - tent(1.0 - center)) * envelope()
            }
            Observable::Coordinate { axis } => (p.y[axis.min(1)] - 0.5) * envelope(),
            Observable::HeightIndicator { lo, hi } => f64::from(lo <= s && s < hi),
        }
    }

    /// Hölder exponent in the base variable.
    pub fn alpha(&self) -> f64 {
        match self {
            Observable::HeightIndicator { .. } => 0.0,
            _ => 1.0,
        }
    }

    /// Number of flow derivatives available; `None` when unbounded.
    pub fn flow_order(&self) -> Option<u32> {
        match self {
            Observable::HeightIndicator { .. } => Some(0),
            _ => None,
        }
    }

    /// Grid estimate of `||v||_{alpha,k}`: sup norm plus seminorm over
    /// neighbouring nodes of `(y_0, u/r)`, for `v` and its flow derivatives.
    pub fn norm_estimate(&self, system: &SuspensionSystem, k: u32, nodes: usize) -> f64 {
        let n = nodes.max(3);
        let alpha = self.alpha().max(1e-3);
        let mut total = 0.0;
        let h = 1e-4;
        for j in 0..=k {
            let field = |y0: f64, s: f64| {
                let y = [y0, 0.5];
                let r = system.roof(&y);
                let at = |u: f64| self.eval(&FlowPoint { y, u, z: None }, r);
                let u = s * (r - 2.0 * h * j as f64) + h * j as f64;
                // central differences in u for the j-th flow derivative
                (0..=j)
                    .map(|i| {
                        let binom = (1..=i).fold(1.0, |b, m| b * (j - m + 1) as f64 / m as f64);
                        let sign = if (j - i) % 2 == 0 { 1.0 } else { -1.0 };
                        sign * binom * at(u + h * (2.0 * i as f64 - j as f64))
                    })
                    .sum::<f64>()
                    / (2.0 * h).powi(j as i32)
            };
            let c = |i: usize| i as f64 / (n - 1) as f64;
            let mut sup: f64 = 0.0;
            let mut semi: f64 = 0.0;
            for a in 0..n {
                for b in 0..n {
                    let v = field(c(a), c(b));
                    sup = sup.max(v.abs());
                    if a + 1 < n {
                        semi = semi.max((field(c(a + 1), c(b)) - v).abs() / c(1).powf(alpha));
                    }
                    if b + 1 < n {
                        semi = semi.max((field(c(a), c(b + 1)) - v).abs() / c(1).powf(alpha));
                    }
                }
            }
            total += sup + semi;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSeries {
    pub t: Vec<f64>,
    pub rho: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

#[derive(Default, Clone)]
struct Moments {
    n: f64,
    v: f64,
    w: Vec<f64>,
    vw: Vec<f64>,
}

impl Moments {
    fn rho(&self) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.vw)
            .map(|(w, vw)| vw / self.n - (self.v / self.n) * (w / self.n))
            .collect()
    }
}

/// Monte-Carlo `rho_{v,w}(t)` over `mu^r` with batch-means error bars.
pub fn correlation_series(
    system: &SuspensionSystem,
    v: &Observable,
    w: &Observable,
    t_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<CorrelationSeries> {
    if let Some(t) = t_grid.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::Precondition(format!("negative time {t}")));
    }
    let mut order: Vec<usize> = (0..t_grid.len()).collect();
    order.sort_by(|&a, &b| t_grid[a].total_cmp(&t_grid[b]));
    let m = t_grid.len();
    let batches: Result<Vec<Moments>> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let count = n_samples / BATCHES + usize::from(b < n_samples % BATCHES);
            let pts = system.sample_stream(count, seed, b as u64)?;
            let mut mo = Moments {
                n: count as f64,
                v: 0.0,
                w: vec![0.0; m],
                vw: vec![0.0; m],
            };
            for p in &pts {
                let vp = v.eval(p, system.roof(&p.y));
                mo.v += vp;
                let (mut q, mut at) = (*p, 0.0);
                for &i in &order {
                    q = system.flow(&q, t_grid[i] - at)?;
                    at = t_grid[i];
                    let wq = w.eval(&q, system.roof(&q.y));
                    mo.w[i] += wq;
                    mo.vw[i] += vp * wq;
                }
            }
            Ok(mo)
        })
        .collect();
    let batches = batches?;
    let mut all = Moments {
        n: 0.0,
        v: 0.0,
        w: vec![0.0; m],
        vw: vec![0.0; m],
    };
    for b in &batches {
        all.n += b.n;
        all.v += b.v;
        for i in 0..m {
            all.w[i] += b.w[i];
            all.vw[i] += b.vw[i];
        }
    }
    if n_samples == 0 {
        return Ok(CorrelationSeries {
            t: t_grid.to_vec(),
            rho: vec![0.0; m],
            stderr: vec![f64::INFINITY; m],
            samples: 0,
        });
    }
    let rho = all.rho();
    let per: Vec<Vec<f64>> = batches.iter().filter(|b| b.n > 0.0).map(Moments::rho).collect();
    let k = per.len() as f64;
    let stderr = (0..m)
        .map(|i| {
            if k < 2.0 {
                return f64::INFINITY;
            }
            let mean = per.iter().map(|r| r[i]).sum::<f64>() / k;
            let var = per.iter().map(|r| (r[i] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        })
        .collect();
    Ok(CorrelationSeries {
        t: t_grid.to_vec(),
        rho,
        stderr,
        samples: n_samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayVerdict {
    Exponential,
    NoDecayDetected,
    Indeterminate,
}

impl std::fmt::Display for DecayVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DecayVerdict::Exponential => "exponential",
            DecayVerdict::NoDecayDetected => "no-decay-detected",
            DecayVerdict::Indeterminate => "indeterminate",
        })
    }
}

/// `|rho(t)| ~ C e^{-c t}` over the points above three standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub c: f64,
    pub big_c: f64,
    pub r_squared: f64,
    pub points: usize,
    pub verdict: DecayVerdict,
}

pub const MIN_FIT_POINTS: usize = 10;

pub fn decay_fit(series: &CorrelationSeries) -> DecayFit {
    let pts: Vec<(f64, f64)> = series
        .t
        .iter()
        .zip(series.rho.iter().zip(&series.stderr))
        .filter(|(_, (r, s))| r.abs() > 3.0 * **s && r.abs() > 0.0)
        .map(|(t, (r, _))| (*t, r.abs().ln()))
        .collect();
    if pts.len() < MIN_FIT_POINTS {
        return DecayFit {
            c: f64::NAN,
            big_c: f64::NAN,
            r_squared: f64::NAN,
            points: pts.len(),
            verdict: DecayVerdict::Indeterminate,
        };
    }
    let fit = linear_fit(&pts);
    let c = -fit.slope;
    let verdict = if c > 0.0 && fit.r_squared >= 0.9 {
        DecayVerdict::Exponential
    } else {
        DecayVerdict::NoDecayDetected
    };
    DecayFit {
        c,
        big_c: fit.intercept.exp(),
        r_squared: fit.r_squared,
        points: pts.len(),
        verdict,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64, stderr: f64) -> CorrelationSeries {
        let t: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        CorrelationSeries {
            rho: t.iter().map(|&s| f(s)).collect(),
            stderr: vec![stderr; t.len()],
            t,
            samples: 1,
        }
    }

    #[test]
    fn exact_exponential() {
        let fit = decay_fit(&synthetic(|t| (-0.7 * t).exp(), 1e-9));
        assert_eq!(fit.verdict, DecayVerdict::Exponential);
        assert!((fit.c - 0.7).abs() < 0.02 && fit.r_squared > 0.99);
        assert!((fit.big_c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noise_is_indeterminate() {
        let fit = decay_fit(&synthetic(|t| 1e-3 * (37.0 * t).sin(), 1e-2));
        assert_eq!(fit.verdict, DecayVerdict::Indeterminate);
        assert_eq!(fit.points, 0);
    }

    #[test]
    fn recurrence_is_not_decay() {
        let fit = decay_fit(&synthetic(|t| 0.5 * (PI * t).cos(), 1e-4));
        assert_eq!(fit.verdict, DecayVerdict::NoDecayDetected);
    }

    #[test]
    fn observables_respect_identification() {
        let top = FlowPoint { y: [0.3, 0.0], u: 2.0, z: None };
        let bottom = FlowPoint { y: [0.6, 0.0], u: 0.0, z: None };
        for v in [
            Observable::HeightCos { k: 2 },
            Observable::BaseBump { center: 0.5, width: 0.25 },
            Observable::BaseCos { k: 1 },
            Observable::BaseSin { k: 1 },
            Observable::OddBump { center: 0.25, width: 0.2 },
            Observable::Coordinate { axis: 0 },
        ] {
            assert!((v.eval(&top, 2.0) - v.eval(&bottom, 2.1)).abs() < 1e-12, "{v:?}");
        }
    }
}
