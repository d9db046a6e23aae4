use crate::error::{Error, Result};
use crate::models::{birkhoff_roof, birkhoff_roof_grad, ModelSystem, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniReport {
    pub word1: Vec<usize>,
    pub word2: Vec<usize>,
    pub n0: usize,
    /// `inf |D psi . l|` over the grid.
    pub e: f64,
    pub sup_derivative: f64,
    /// `|D psi . l| >= E/2` at every grid node for the field used.
    pub smoothed_slack_ok: bool,
    /// Max relative deviation of the closed-form derivative from central
    /// differences at step `1e-6`.
    pub fd_max_rel_err: f64,
    pub degenerate: bool,
}

/// `psi = r_n o h_1 - r_n o h_2`.
pub fn psi(model: &ModelSystem, w1: &[usize], w2: &[usize], y: &Point) -> Result<f64> {
    Ok(birkhoff_roof(model, w1, y)? - birkhoff_roof(model, w2, y)?)
}

pub fn psi_grad(model: &ModelSystem, w1: &[usize], w2: &[usize], y: &Point) -> Result<[f64; 2]> {
    let a = birkhoff_roof_grad(model, w1, y)?;
    let b = birkhoff_roof_grad(model, w2, y)?;
    Ok([a[0] - b[0], a[1] - b[1]])
}

/// UNI constant `E = inf_y |D psi(y) . l|` for the constant unit field `l`
/// (default the first coordinate direction).
pub fn uni_estimate(
    model: &ModelSystem,
    w1: &[usize],
    w2: &[usize],
    ell: Option<[f64; 2]>,
    nodes: usize,
) -> Result<UniReport> {
    if w1.len() != w2.len() {
        return Err(Error::UnequalWords(w1.len(), w2.len()));
    }
    if w1.is_empty() {
        return Err(Error::Precondition("UNI needs words of length n0 >= 1".into()));
    }
    let dim = model.dim();
    let ell = ell.unwrap_or([1.0, 0.0]);
    let norm = ell[0].hypot(if dim == 2 { ell[1] } else { 0.0 });
    if !(norm > 0.0) {
        return Err(Error::Precondition("direction field must be nonzero".into()));
    }
    let ell = [ell[0] / norm, if dim == 2 { ell[1] / norm } else { 0.0 }];
    let n = nodes.max(2);
    let pts: Vec<Point> = if dim == 1 {
        (0..n).map(|i| [i as f64 / (n - 1) as f64, 0.0]).collect()
    } else {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| [i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64]))
            .collect()
    };
    let mut e = f64::INFINITY;
    let mut sup: f64 = 0.0;
    let mut derivs = Vec::with_capacity(pts.len());
    for y in &pts {
        let g = psi_grad(model, w1, w2, y)?;
        let d = (g[0] * ell[0] + g[1] * ell[1]).abs();
        e = e.min(d);
        sup = sup.max(d);
        derivs.push(d);
    }
    let smoothed_slack_ok = derivs.iter().all(|d| *d >= 0.5 * e);
    // finite-difference cross-check on interior samples
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let h = 1e-6;
    let mut fd_max_rel_err: f64 = 0.0;
    for _ in 0..1000 {
        let mut y = [rng.random_range(1e-3..1.0 - 1e-3), 0.0];
        if dim == 2 {
            y[1] = rng.random_range(1e-3..1.0 - 1e-3);
        }
        let g = psi_grad(model, w1, w2, &y)?;
        let exact = g[0] * ell[0] + g[1] * ell[1];
        let plus = [y[0] + h * ell[0], y[1] + h * ell[1]];
        let minus = [y[0] - h * ell[0], y[1] - h * ell[1]];
        let fd = (psi(model, w1, w2, &plus)? - psi(model, w1, w2, &minus)?) / (2.0 * h);
        let scale = exact.abs().max(1.0);
        fd_max_rel_err = fd_max_rel_err.max((fd - exact).abs() / scale);
    }
    Ok(UniReport {
        word1: w1.to_vec(),
        word2: w2.to_vec(),
        n0: w1.len(),
        e,
        sup_derivative: sup,
        smoothed_slack_ok,
        fd_max_rel_err,
        degenerate: e <= 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_quadratic_uni() {
        let a = ModelSystem::builtin("A").unwrap();
        let r = uni_estimate(&a, &[0], &[1], None, 4097).unwrap();
        assert!((r.e - 0.5).abs() < 1e-12);
        assert!(r.fd_max_rel_err < 1e-4);
        assert!(!r.degenerate);
        // psi(y) = y/2 - 1/4
        assert!((psi(&a, &[0], &[1], &[0.3, 0.0]).unwrap() - (0.15 - 0.25)).abs() < 1e-14);
    }

    #[test]
    fn degenerate_cases() {
        let b = ModelSystem::builtin("B").unwrap();
        assert_eq!(uni_estimate(&b, &[0], &[1], None, 257).unwrap().e, 0.0);
        let a = ModelSystem::builtin("A").unwrap();
        let same = uni_estimate(&a, &[0], &[0], None, 257).unwrap();
        assert_eq!(same.e, 0.0);
        assert!(same.degenerate);
        assert!(matches!(
            uni_estimate(&a, &[0, 1], &[1], None, 257),
            Err(Error::UnequalWords(2, 1))
        ));
    }
}
