//! Lower estimates of `||L_s^n||_b` by maximizing over a test dictionary.

use super::cancel::{random_cone_pair, DEFAULT_C4};
use super::grid::GridFunction;
use super::operator::{holder_norms, EigenData, NormalizedOperator, TwistParameter};
use crate::error::Result;
use crate::models::{ModelSystem, Point};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Differences below this are treated as dictionary noise.
pub const DICTIONARY_NOISE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionRow {
    pub n: usize,
    /// `max ||L_s^n v||_b / ||v||_b` over the dictionary; a lower bound.
    pub estimate: f64,
    /// Dictionary index attaining the maximum.
    pub argmax: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub b: f64,
    pub dictionary_size: usize,
    pub rows: Vec<ContractionRow>,
}

impl ContractionReport {
    pub fn estimate(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).map(|r| r.estimate)
    }
}

/// Verdict on the decay window `[n1, 3 n1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayWindow {
    /// First `n` with estimate below `0.9`.
    pub n1: Option<usize>,
    /// `n1 / log|b|`.
    pub a_hat: f64,
    /// Largest `est(n+1) - est(n)` inside the window over steps that are not
    /// both below the noise floor.
    pub worst_increment: f64,
    pub strictly_decreasing: bool,
}

/// Constants, low trigonometric modes, `e^{i b t y}` waves and (for
/// `|b| >= 1`) cone-shaped functions.
pub fn test_dictionary(dim: usize, nodes: usize, b: f64, alpha: f64, seed: u64) -> Result<Vec<GridFunction>> {
    let mut dict = vec![GridFunction::constant(dim, nodes, Complex64::new(1.0, 0.0))];
    for k in 1..=6 {
        let k = k as f64;
        dict.push(GridFunction::from_fn(dim, nodes, move |y: &Point| {
            Complex64::from_polar(1.0, 2.0 * PI * k * (y[0] + y[1]))
        }));
        dict.push(GridFunction::from_real_fn(dim, nodes, move |y: &Point| {
            (2.0 * PI * k * y[0]).cos() + (2.0 * PI * k * y[1]).sin()
        }));
    }
    for t in [0.25, 0.5, 1.0, 2.0] {
        let w = t * b;
        dict.push(GridFunction::from_fn(dim, nodes, move |y: &Point| {
            Complex64::from_polar(1.0, w * (y[0] + y[1]))
        }));
        dict.push(GridFunction::from_fn(dim, nodes, move |y: &Point| {
            Complex64::from_polar(1.0, w * (y[0] * y[0] - y[1]))
        }));
    }
    // the cone C_b is only defined for |b| >= 1
    let cones = if b.abs() >= 1.0 { 8 } else { 0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cones {
        dict.push(random_cone_pair(dim, nodes, b, DEFAULT_C4, alpha, &mut rng)?.v);
    }
    Ok(dict)
}

/// `est(n)` for `n = 1..=n_max`.
pub fn norm_contraction_probe(
    model: &ModelSystem,
    tp: &TwistParameter,
    eig: &EigenData,
    n_max: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let op = NormalizedOperator::new(model, tp, eig)?;
    let alpha = model.family.alpha;
    let nodes = eig.f.nodes();
    let dict = test_dictionary(model.dim(), nodes, tp.b, alpha, seed)?;
    let base: Vec<f64> = dict.iter().map(|v| holder_norms(v, tp.b, alpha).b_norm).collect();
    let mut current = dict.clone();
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let mut best = (0.0, 0);
        for (i, v) in current.iter_mut().enumerate() {
            *v = op.apply(v)?;
            let r = holder_norms(v, tp.b, alpha).b_norm / base[i];
            if r > best.0 {
                best = (r, i);
            }
        }
        rows.push(ContractionRow {
            n,
            estimate: best.0,
            argmax: best.1,
        });
    }
    Ok(ContractionReport {
        b: tp.b,
        dictionary_size: dict.len(),
        rows,
    })
}

pub fn decay_window(report: &ContractionReport) -> DecayWindow {
    let n1 = report.rows.iter().find(|r| r.estimate < 0.9).map(|r| r.n);
    let a_hat = n1.map(|n| n as f64 / report.b.abs().ln()).unwrap_or(f64::NAN);
    let mut worst = f64::NEG_INFINITY;
    let mut ok = n1.is_some();
    if let Some(n1) = n1 {
        for n in n1..3 * n1 {
            match (report.estimate(n), report.estimate(n + 1)) {
                (Some(a), Some(b)) => {
                    let d = b - a;
                    worst = worst.max(d);
                    let noise = a <= DICTIONARY_NOISE && b <= DICTIONARY_NOISE;
                    if !(d < 0.0 || noise && d <= DICTIONARY_NOISE) {
                        ok = false;
                    }
                }
                _ => ok = false,
            }
        }
    }
    DecayWindow {
        n1,
        a_hat,
        worst_increment: worst,
        strictly_decreasing: ok,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::operator::{leading_eigendata, EigenOptions};

    #[test]
    fn real_parameter_attains_one() {
        let a = ModelSystem::builtin("A").unwrap();
        let eig = leading_eigendata(&a, 0.0, &EigenOptions { nodes: 1025, ..EigenOptions::for_model(&a) }).unwrap();
        let rep = norm_contraction_probe(&a, &TwistParameter::new(0.0, 0.0), &eig, 3, 1).unwrap();
        for r in &rep.rows {
            assert!((r.estimate - 1.0).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn window_logic() {
        let rows = [1.2, 0.95, 0.8, 0.5, 0.3, 0.2, 0.1, 0.05, 0.02, 0.01]
            .iter()
            .enumerate()
            .map(|(i, e)| ContractionRow { n: i + 1, estimate: *e, argmax: 0 })
            .collect();
        let rep = ContractionReport { b: 100.0, dictionary_size: 1, rows };
        let w = decay_window(&rep);
        assert_eq!(w.n1, Some(3));
        assert!(w.strictly_decreasing);
        assert!((w.a_hat - 3.0 / 100f64.ln()).abs() < 1e-12);
    }
}
