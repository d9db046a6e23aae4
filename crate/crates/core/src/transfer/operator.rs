//! Twisted transfer operators `P_s` and their normalized versions `L_s`.

use super::grid::{node_point, stencil, GridFunction, Stencil};
use super::zeta::hurwitz_zeta;
use crate::error::{Error, Result};
use crate::models::{Branch, BranchSet, ModelSystem, Point, Roof};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

/// Abscissa of the holomorphic strip used when none is configured.
pub const DEFAULT_ABSCISSA: f64 = 0.05;
/// Certified bound required on the countable-branch remainder.
pub const TAIL_TOLERANCE: f64 = 1e-10;

/// `s = sigma + i b` together with the strip half-width `|sigma| < eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwistParameter {
    pub sigma: f64,
    pub b: f64,
    pub abscissa: f64,
}

impl TwistParameter {
    pub fn new(sigma: f64, b: f64) -> Self {
        Self {
            sigma,
            b,
            abscissa: DEFAULT_ABSCISSA,
        }
    }

    pub fn with_abscissa(mut self, eps: f64) -> Self {
        self.abscissa = eps;
        self
    }

    pub fn s(&self) -> Complex64 {
        Complex64::new(self.sigma, self.b)
    }

    pub fn real_part(&self) -> Self {
        Self { b: 0.0, ..*self }
    }

    pub fn check(&self) -> Result<()> {
        if self.sigma.abs() < self.abscissa && self.b.is_finite() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "|sigma| = {} must be below the abscissa {}",
                self.sigma.abs(),
                self.abscissa
            )))
        }
    }
}

/// `e^{-s r(x)} |det Dh(y)|` with `x = h(y)`.
fn branch_weight(model: &ModelSystem, s: Complex64, h: &Branch, y: &Point) -> (Point, Complex64) {
    let x = h.apply(y);
    let det: f64 = h
        .jacobian(y)
        .iter()
        .take(model.dim())
        .map(|d| d.abs())
        .product();
    (x, (-s * model.roof.eval(&x)).exp() * det)
}

/// `P_s` assembled as a sparse matrix acting on node values: row `k` holds
/// the interpolation weights of all branch images of node `k`.
#[derive(Debug, Clone)]
pub struct TransferOperator {
    dim: usize,
    nodes: usize,
    pub tp: TwistParameter,
    offsets: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<Complex64>,
    /// Certified bound on the countable-branch remainder per unit `|v|`
    /// scale; zero for finite families.
    pub truncation_bound: f64,
}

/// Row under construction; merges repeated columns among the last few
/// entries, which is where monotone branch sweeps put them.
struct RowBuilder {
    cols: Vec<u32>,
    weights: Vec<Complex64>,
}

impl RowBuilder {
    fn new() -> Self {
        Self {
            cols: Vec::new(),
            weights: Vec::new(),
        }
    }

    fn add(&mut self, col: usize, w: Complex64) {
        let c = col as u32;
        let n = self.cols.len();
        for k in n.saturating_sub(4)..n {
            if self.cols[k] == c {
                self.weights[k] += w;
                return;
            }
        }
        self.cols.push(c);
        self.weights.push(w);
    }

    fn add_stencil(&mut self, st: &Stencil, w: Complex64) {
        for k in 0..st.len {
            self.add(st.idx[k], w * st.w[k]);
        }
    }
}

impl TransferOperator {
    pub fn new(model: &ModelSystem, tp: &TwistParameter, nodes: usize) -> Result<Self> {
        tp.check()?;
        let dim = model.dim();
        if nodes < 3 {
            return Err(Error::GridTooCoarse { got: nodes, min: 3 });
        }
        let s = tp.s();
        let total = nodes.pow(dim as u32);
        let rows: Vec<(RowBuilder, f64)> = match &model.family.set {
            BranchSet::Finite(branches) => (0..total)
                .into_par_iter()
                .map(|k| {
                    let y = node_point(dim, nodes, k);
                    let mut row = RowBuilder::new();
                    for h in branches {
                        let (x, w) = branch_weight(model, s, h, &y);
                        row.add_stencil(&stencil(dim, nodes, &x), w);
                    }
                    (row, 0.0)
                })
                .collect(),
            BranchSet::Gauss { .. } => {
                let offset = match model.roof {
                    Roof::NegLog { offset } => offset,
                    _ => {
                        return Err(Error::Precondition(
                            "countable families are supported with the logarithmic roof".into(),
                        ))
                    }
                };
                (0..total)
                    .into_par_iter()
                    .map(|k| gauss_row(s, offset, node_point(1, nodes, k)[0], nodes))
                    .collect()
            }
        };
        let truncation_bound = rows.iter().fold(0.0f64, |m, r| m.max(r.1));
        if truncation_bound > TAIL_TOLERANCE {
            return Err(Error::Truncation {
                bound: truncation_bound,
                tol: TAIL_TOLERANCE,
            });
        }
        let mut offsets = Vec::with_capacity(total + 1);
        offsets.push(0);
        let nnz: usize = rows.iter().map(|r| r.0.cols.len()).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut weights = Vec::with_capacity(nnz);
        for (row, _) in rows {
            cols.extend(row.cols);
            weights.extend(row.weights);
            offsets.push(cols.len());
        }
        Ok(Self {
            dim,
            nodes,
            tp: *tp,
            offsets,
            cols,
            weights,
            truncation_bound,
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    fn check_grid(&self, v: &GridFunction) -> Result<()> {
        if v.dim() != self.dim || v.nodes() != self.nodes {
            return Err(Error::Precondition(format!(
                "grid {}^{} does not match operator grid {}^{}",
                v.nodes(),
                v.dim(),
                self.nodes,
                self.dim
            )));
        }
        Ok(())
    }

    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        self.check_grid(v)?;
        let vals = v.values();
        let out = (0..self.offsets.len() - 1)
            .into_par_iter()
            .map(|k| {
                let (a, b) = (self.offsets[k], self.offsets[k + 1]);
                self.cols[a..b]
                    .iter()
                    .zip(&self.weights[a..b])
                    .map(|(c, w)| w * vals[*c as usize])
                    .sum()
            })
            .collect();
        Ok(v.like(out))
    }
}

/// `(P_s v)(y) = sum_h e^{-s r(h y)} |det Dh(y)| v(h y)`.
pub fn apply_twisted(model: &ModelSystem, tp: &TwistParameter, v: &GridFunction) -> Result<GridFunction> {
    check_model_grid(model, v)?;
    TransferOperator::new(model, tp, v.nodes())?.apply(v)
}

fn check_model_grid(model: &ModelSystem, v: &GridFunction) -> Result<()> {
    if v.dim() != model.dim() {
        return Err(Error::Precondition(format!(
            "grid dimension {} differs from model dimension {}",
            v.dim(),
            model.dim()
        )));
    }
    Ok(())
}

/// Apply `P_s` to several functions on a common grid; also returns the
/// certified bound on the countable-branch remainder.
pub fn apply_twisted_batch(
    model: &ModelSystem,
    tp: &TwistParameter,
    vs: &[GridFunction],
) -> Result<(Vec<GridFunction>, f64)> {
    let Some(first) = vs.first() else {
        tp.check()?;
        return Ok((vec![], 0.0));
    };
    check_model_grid(model, first)?;
    let op = TransferOperator::new(model, tp, first.nodes())?;
    let out = vs.iter().map(|v| op.apply(v)).collect::<Result<Vec<_>>>()?;
    Ok((out, op.truncation_bound))
}

/// Number of Gauss branches summed one by one before grouping by grid cell.
fn gauss_direct_cutoff(nodes: usize) -> usize {
    ((2.0 * (nodes as f64).sqrt()) as usize).max(64)
}

/// One row of `P_s` for the Gauss family. Branches `n <= n_d` are summed
/// directly; beyond that the points `1/(n+y)` are grouped by grid cell, on
/// which the interpolant is affine, and each group is summed in closed form
/// through Hurwitz zeta differences.
fn gauss_row(s: Complex64, offset: f64, y: f64, nodes: usize) -> (RowBuilder, f64) {
    let mut row = RowBuilder::new();
    let n_d = gauss_direct_cutoff(nodes);
    let pre = (-s * offset).exp();
    let p2 = s + 2.0;
    let p3 = s + 3.0;
    for n in 1..=n_d {
        let q = n as f64 + y;
        let w = pre * (-p2 * q.ln()).exp();
        row.add_stencil(&stencil(1, nodes, &[1.0 / q, 0.0]), w);
    }
    let m = (nodes - 1) as f64;
    let mut cur = n_d + 1;
    let top = ((m / (cur as f64 + y)).floor() as usize).min(nodes - 2);
    let mut z_lo = (hurwitz_zeta(p2, cur as f64 + y), hurwitz_zeta(p3, cur as f64 + y));
    let mut err = 0.0;
    for i in (0..=top).rev() {
        let (s2, s3, e2, e3);
        if i == 0 {
            s2 = z_lo.0.value;
            s3 = z_lo.1.value;
            e2 = z_lo.0.error_bound;
            e3 = z_lo.1.error_bound;
        } else {
            let hi = (m / i as f64 - y).floor() as usize;
            if hi < cur {
                continue;
            }
            let q_hi = (hi + 1) as f64 + y;
            let z_hi = (hurwitz_zeta(p2, q_hi), hurwitz_zeta(p3, q_hi));
            s2 = z_lo.0.value - z_hi.0.value;
            s3 = z_lo.1.value - z_hi.1.value;
            e2 = z_lo.0.error_bound + z_hi.0.error_bound;
            e3 = z_lo.1.error_bound + z_hi.1.error_bound;
            z_lo = z_hi;
            cur = hi + 1;
        }
        // on cell i the interpolant is v_i + (v_{i+1}-v_i)(m x - i)
        let fi = i as f64;
        row.add(i + 1, pre * (-s2 * fi + s3 * m));
        row.add(i, pre * (s2 * (1.0 + fi) - s3 * m));
        // per unit node values
        err += pre.norm() * ((1.0 + 2.0 * fi) * e2 + 2.0 * m * e3);
    }
    (row, err)
}

/// `A_{s,h_w,n} g` evaluated at the grid nodes of `like`, where `g` receives
/// `(y, h_w(y))`. Used with exact closures (e.g. a cutoff) as well as grid
/// interpolants.
pub fn apply_word_fn<G>(
    model: &ModelSystem,
    s: Complex64,
    word: &[usize],
    like: &GridFunction,
    g: G,
) -> Result<GridFunction>
where
    G: Fn(&Point, &Point) -> Complex64 + Sync,
{
    let fam = &model.family;
    for &i in word {
        fam.branch(i)?;
    }
    let vals = (0..like.len())
        .into_par_iter()
        .map(|idx| {
            let y = like.node(idx);
            let chain = fam.word_chain(word, &y).expect("validated word");
            let x = chain[0].0;
            let det: f64 = chain[0].1.iter().take(model.dim()).map(|d| d.abs()).product();
            let rn: f64 = chain[..word.len()].iter().map(|(p, _)| model.roof.eval(p)).sum();
            (-s * rn).exp() * det * g(&y, &x)
        })
        .collect();
    Ok(like.like(vals))
}

/// All words of length `n` for a finite family, in lexicographic order.
pub fn words_of_length(model: &ModelSystem, n: usize) -> Result<Vec<Vec<usize>>> {
    let nb = model.family.count().ok_or_else(|| {
        Error::Precondition("word enumeration needs a finite branch family".into())
    })?;
    let total = nb.checked_pow(n as u32).filter(|t| *t <= 1 << 20).ok_or_else(|| {
        Error::Precondition(format!("{nb}^{n} words is too many to enumerate"))
    })?;
    Ok((0..total)
        .map(|mut c| {
            let mut w = vec![0; n];
            for slot in w.iter_mut().rev() {
                *slot = c % nb;
                c /= nb;
            }
            w
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenData {
    pub sigma: f64,
    pub lambda: f64,
    #[serde(skip)]
    pub f: GridFunction,
    /// `|P_sigma f - lambda f|_inf`.
    pub residual: f64,
    pub iterations: usize,
    pub truncation_bound: f64,
    pub min_f: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenOptions {
    pub nodes: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub abscissa: f64,
}

impl EigenOptions {
    /// `2^14 + 1` nodes in one dimension, `513^2` in two.
    pub fn for_model(model: &ModelSystem) -> Self {
        Self {
            nodes: if model.dim() == 1 { (1 << 14) + 1 } else { 513 },
            max_iter: 2000,
            tol: 1e-12,
            abscissa: DEFAULT_ABSCISSA,
        }
    }
}

/// Power iteration for the leading eigenpair of `P_sigma`, normalized so
/// that `int f dLeb = 1`.
pub fn leading_eigendata(model: &ModelSystem, sigma: f64, opts: &EigenOptions) -> Result<EigenData> {
    let tp = TwistParameter::new(sigma, 0.0).with_abscissa(opts.abscissa);
    tp.check()?;
    let one = Complex64::new(1.0, 0.0);
    let op = TransferOperator::new(model, &tp, opts.nodes)?;
    let bound = op.truncation_bound;
    let mut f = GridFunction::constant(model.dim(), opts.nodes, one);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let pf = op.apply(&f)?;
        let lambda = pf.integrate().re;
        if !(lambda > 0.0) {
            return Err(Error::NoConvergence {
                iterations: it,
                residual,
            });
        }
        residual = pf
            .values()
            .iter()
            .zip(f.values())
            .fold(0.0f64, |m, (p, q)| m.max((p - q * lambda).norm()));
        f = pf.scale(Complex64::new(1.0 / lambda, 0.0));
        if residual <= opts.tol * lambda.max(1.0) {
            let min_f = f.min_re();
            if min_f <= 0.0 {
                return Err(Error::NoConvergence {
                    iterations: it,
                    residual,
                });
            }
            return Ok(EigenData {
                sigma,
                lambda,
                f,
                residual,
                iterations: it,
                truncation_bound: bound,
                min_f,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// `L_s v = (lambda_sigma f_sigma)^{-1} P_s(f_sigma v)` with the sparse
/// operator and eigendata bundled for repeated use.
#[derive(Debug, Clone)]
pub struct NormalizedOperator {
    pub p: TransferOperator,
    pub eig: EigenData,
}

impl NormalizedOperator {
    pub fn new(model: &ModelSystem, tp: &TwistParameter, eig: &EigenData) -> Result<Self> {
        if (tp.sigma - eig.sigma).abs() > 1e-15 {
            return Err(Error::Precondition(format!(
                "eigendata computed at sigma = {} but s has real part {}",
                eig.sigma, tp.sigma
            )));
        }
        Ok(Self {
            p: TransferOperator::new(model, tp, eig.f.nodes())?,
            eig: eig.clone(),
        })
    }

    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        let fv = v.zip_with(&self.eig.f, |a, b| a * b);
        let lam = self.eig.lambda;
        Ok(self.p.apply(&fv)?.zip_with(&self.eig.f, |a, f| a / (f * lam)))
    }

    pub fn power(&self, v: &GridFunction, n: usize) -> Result<GridFunction> {
        let mut w = v.clone();
        for _ in 0..n {
            w = self.apply(&w)?;
        }
        Ok(w)
    }
}

/// `L_s v = (lambda_sigma f_sigma)^{-1} P_s(f_sigma v)`.
pub fn apply_normalized(
    model: &ModelSystem,
    tp: &TwistParameter,
    eig: &EigenData,
    v: &GridFunction,
) -> Result<GridFunction> {
    NormalizedOperator::new(model, tp, eig)?.apply(v)
}

pub fn apply_normalized_power(
    model: &ModelSystem,
    tp: &TwistParameter,
    eig: &EigenData,
    v: &GridFunction,
    n: usize,
) -> Result<GridFunction> {
    NormalizedOperator::new(model, tp, eig)?.power(v, n)
}

/// `L_s^n g` summed over all words of length `n`, with `g` evaluated
/// exactly at `(w, y, h_w y)` rather than interpolated.
pub fn normalized_words_fn<G>(
    model: &ModelSystem,
    s: Complex64,
    eig: &EigenData,
    n: usize,
    g: G,
) -> Result<GridFunction>
where
    G: Fn(&[usize], &Point, &Point) -> Complex64 + Sync,
{
    let words = words_of_length(model, n)?;
    let like = &eig.f;
    let lam = eig.lambda.powi(n as i32);
    let fam = &model.family;
    let vals = (0..like.len())
        .into_par_iter()
        .map(|idx| {
            let y = like.node(idx);
            let mut acc = Complex64::new(0.0, 0.0);
            for w in &words {
                let chain = fam.word_chain(w, &y).expect("finite family word");
                let x = chain[0].0;
                let det: f64 = chain[0].1.iter().take(model.dim()).map(|d| d.abs()).product();
                let rn: f64 = chain[..n].iter().map(|(p, _)| model.roof.eval(p)).sum();
                acc += (-s * rn).exp() * det * like.eval(&x) * g(w, &y, &x);
            }
            acc / (like.values()[idx] * lam)
        })
        .collect();
    Ok(like.like(vals))
}

/// `(|v|_inf, |v|_alpha, ||v||_b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderNorms {
    pub sup: f64,
    pub seminorm: f64,
    pub b_norm: f64,
}

pub fn holder_norms(v: &GridFunction, b: f64, alpha: f64) -> HolderNorms {
    let sup = v.sup_norm();
    let seminorm = v.seminorm(alpha);
    HolderNorms {
        sup,
        seminorm,
        b_norm: sup.max(seminorm / (1.0 + b.abs().powf(alpha))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(c: f64) -> Complex64 {
        Complex64::new(c, 0.0)
    }

    #[test]
    fn doubling_preserves_constants() {
        let a = ModelSystem::builtin("A").unwrap();
        let one = GridFunction::constant(1, 257, real(1.0));
        let p = apply_twisted(&a, &TwistParameter::new(0.0, 0.0), &one).unwrap();
        assert!(p.values().iter().all(|z| (z - 1.0).norm() < 1e-15));
    }

    #[test]
    fn doubling_affine_image() {
        let a = ModelSystem::builtin("A").unwrap();
        let v = GridFunction::from_real_fn(1, 257, |y| y[0]);
        let p = apply_twisted(&a, &TwistParameter::new(0.0, 0.0), &v).unwrap();
        for k in 0..257 {
            let y = p.node(k)[0];
            assert!((p.values()[k].re - (2.0 * y + 1.0) / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_roof_real_shift() {
        let b = ModelSystem::builtin("B").unwrap();
        let one = GridFunction::constant(1, 65, real(1.0));
        let tp = TwistParameter::new(0.03, 0.0);
        let p = apply_twisted(&b, &tp, &one).unwrap();
        assert!(p.values().iter().all(|z| (z.re - (-0.06f64).exp()).abs() < 1e-15));
        assert!(apply_twisted(&b, &TwistParameter::new(0.2, 0.0), &one).is_err());
    }

    #[test]
    fn gauss_row_matches_brute_force() {
        let d = ModelSystem::builtin("D").unwrap();
        let nodes = 257;
        let v = GridFunction::from_real_fn(1, nodes, |y| (3.0 * y[0]).cos() + y[0]);
        let tp = TwistParameter::new(0.02, 3.0);
        let p = apply_twisted(&d, &tp, &v).unwrap();
        let s = tp.s();
        for &k in &[0usize, 17, 128, 256] {
            let y = p.node(k)[0];
            let mut brute = Complex64::new(0.0, 0.0);
            for n in 1..2_000_000 {
                let q = n as f64 + y;
                brute += (-s * (2.0 + q.ln())).exp() / (q * q) * v.eval(&[1.0 / q, 0.0]);
            }
            // remainder of the brute sum is below 1/2e6
            assert!((brute - p.values()[k]).norm() < 2e-6, "node {k}");
        }
    }

    #[test]
    fn word_enumeration_order() {
        let a = ModelSystem::builtin("A").unwrap();
        let w = words_of_length(&a, 2).unwrap();
        assert_eq!(w, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        let d = ModelSystem::builtin("D").unwrap();
        assert!(words_of_length(&d, 1).is_err());
    }
}
