use super::distortion::{random_pair, temporal_distortion};
use crate::error::{Error, Result};
use crate::models::{BranchSet, ModelSystem, SkewFactor};
use crate::transfer::uni_estimate;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

/// Least-squares fit of `r = xi o F - xi + zeta` with trigonometric `xi`
/// (no constant mode) and `zeta` constant on each branch domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohomologyFit {
    pub degree: usize,
    pub xi_cos: Vec<f64>,
    pub xi_sin: Vec<f64>,
    pub zeta: Vec<f64>,
    /// `sup |r - xi o F + xi - zeta|` over the fitting grid.
    pub residual: f64,
    pub grid: usize,
}

impl CohomologyFit {
    pub fn xi(&self, y: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.degree {
            let (sn, cs) = (2.0 * PI * (k + 1) as f64 * y).sin_cos();
            s += self.xi_cos[k] * cs + self.xi_sin[k] * sn;
        }
        s
    }
}

pub fn cohomology_probe(model: &ModelSystem, degree: usize) -> Result<CohomologyFit> {
    let nb = match (&model.family.set, model.dim()) {
        (BranchSet::Finite(b), 1) => b.len(),
        _ => {
            return Err(Error::Precondition(
                "cohomology probe needs a finite one-dimensional family".into(),
            ))
        }
    };
    let cols = 2 * degree + nb;
    let m = (8 * cols).max(2048);
    let mut a = DMatrix::<f64>::zeros(m, cols);
    let mut rhs = DVector::<f64>::zeros(m);
    for j in 0..m {
        let y = (j as f64 + 0.5) / m as f64;
        let (i, fy) = model
            .family
            .forward(&[y, 0.0])
            .ok_or_else(|| Error::OutOfDomain(vec![y]))?;
        for k in 0..degree {
            let w = 2.0 * PI * (k + 1) as f64;
            a[(j, k)] = (w * fy[0]).cos() - (w * y).cos();
            a[(j, degree + k)] = (w * fy[0]).sin() - (w * y).sin();
        }
        a[(j, 2 * degree + i)] = 1.0;
        rhs[j] = model.roof_at(&[y, 0.0]);
    }
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Precondition(format!("least squares failed: {e}")))?;
    let residual = (&a * &x - &rhs).amax();
    Ok(CohomologyFit {
        degree,
        xi_cos: x.rows(0, degree).iter().copied().collect(),
        xi_sin: x.rows(degree, degree).iter().copied().collect(),
        zeta: x.rows(2 * degree, nb).iter().copied().collect(),
        residual,
        grid: m,
    })
}

/// One line of the UNI / cohomology / distortion cross-table. Quantities the
/// model does not support are `NaN`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub model: String,
    pub degree: usize,
    pub e: f64,
    pub sup_derivative: f64,
    pub residual: f64,
    pub max_abs_d: f64,
    pub e_small: bool,
    pub residual_small: bool,
    pub d_small: bool,
    pub flagged: bool,
}

pub const CONSISTENCY_DEGREE: usize = 16;
pub const CONSISTENCY_PAIRS: usize = 20;

/// Compares the UNI constant for the two length-one words `0, 1`, the
/// cohomology residual and `max |D|` over sampled pairs (the solenoid fiber
/// is attached when the model has none). A model is flagged when the three
/// smallness verdicts disagree.
pub fn uni_cohomology_consistency(models: &[ModelSystem], degree: usize, seed: u64) -> Vec<ConsistencyRow> {
    models.iter().map(|m| consistency_row(m, degree, seed)).collect()
}

fn consistency_row(model: &ModelSystem, degree: usize, seed: u64) -> ConsistencyRow {
    let (e, sup) = uni_estimate(model, &[0], &[1], None, if model.dim() == 1 { 4097 } else { 129 })
        .map(|u| (u.e, u.sup_derivative))
        .unwrap_or((f64::NAN, f64::NAN));
    let residual = cohomology_probe(model, degree)
        .map(|f| f.residual)
        .unwrap_or(f64::NAN);
    let skewed = if model.skew.is_some() {
        model.clone()
    } else {
        model.clone().with_skew(SkewFactor::solenoid())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_d = 0.0f64;
    for _ in 0..CONSISTENCY_PAIRS {
        let d = random_pair(&skewed, 64, &mut rng).and_then(|(a, b)| temporal_distortion(&skewed, &a, &b, 1e-12));
        match d {
            Ok(d) => max_d = max_d.max(d.value.abs()),
            Err(_) => {
                max_d = f64::NAN;
                break;
            }
        }
    }
    let e_small = e <= 1e-3 * sup.max(1.0);
    let residual_small = residual <= 1e-6;
    let d_small = max_d <= 1e-8;
    let all_known = e.is_finite() && residual.is_finite() && max_d.is_finite();
    ConsistencyRow {
        model: model.id.clone(),
        degree,
        e,
        sup_derivative: sup,
        residual,
        max_abs_d: max_d,
        e_small,
        residual_small,
        d_small,
        flagged: all_known && (e_small != residual_small || d_small != residual_small),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_roof_is_trivially_cohomologous() {
        let fit = cohomology_probe(&ModelSystem::builtin("B").unwrap(), 8).unwrap();
        assert!(fit.residual < 1e-12);
        assert!(fit.zeta.iter().all(|z| (z - 2.0).abs() < 1e-12));
        assert!(fit.xi_cos.iter().chain(&fit.xi_sin).all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn recovers_constructed_coboundary() {
        let fit = cohomology_probe(&ModelSystem::doubling_coboundary(0.1), 8).unwrap();
        assert!(fit.residual < 1e-6);
        for i in 0..=50 {
            let y = i as f64 / 50.0;
            let xi = 0.1 * (2.0 * PI * y).sin();
            assert!((fit.xi(y) - xi).abs() < 1e-4);
        }
    }

    #[test]
    fn empty_table() {
        assert!(uni_cohomology_consistency(&[], CONSISTENCY_DEGREE, 1).is_empty());
    }
}
