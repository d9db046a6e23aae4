//! Sampled verification of the expanding-map conditions (i)-(iv) and of the
//! fiber contraction (v). Suprema are estimated on finite samples, so every
//! reported constant is a lower bound of the true one.

use super::branch::{BranchSet, Point};
use super::skew::SkewFactor;
use super::{birkhoff_roof_grad, ModelSystem};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub pass: bool,
    pub estimate: f64,
}

/// Partial sum plus analytic tail of the exponential-moment series (iv).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesCertificate {
    pub epsilon: f64,
    pub terms: usize,
    pub partial_sum: f64,
    pub tail_bound: f64,
}

impl SeriesCertificate {
    pub fn upper(&self) -> f64 {
        self.partial_sum + self.tail_bound
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GibbsMarkovOptions {
    /// Points per axis of the sampling grid.
    pub resolution: usize,
    pub epsilon: f64,
    pub max_word_len: usize,
    pub words_per_len: usize,
    /// Partial-sum length for countable families.
    pub series_terms: usize,
    pub seed: u64,
}

impl GibbsMarkovOptions {
    pub fn new(resolution: usize) -> Self {
        Self {
            resolution,
            epsilon: 0.5,
            max_word_len: 10,
            words_per_len: 128,
            series_terms: 1_000_000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GibbsMarkovReport {
    /// `sup |Dh|` over sampled words of each length `1..=max_word_len`.
    pub dh_sup_by_len: Vec<f64>,
    /// Largest single-branch `|Dh|_inf`.
    pub dh_sup_single: f64,
    pub rho0: f64,
    pub c1_expansion: f64,
    /// Max over sampled branches of the Hölder seminorm of `log|det Dh|`.
    pub log_det_holder: f64,
    /// Max over sampled branches of `|D(r o h)|_inf`.
    pub roof_derivative: f64,
    pub roof_inf: f64,
    /// `|Leb(union of ranges) - Leb(Y)|` including the certified tail.
    pub tiling_defect: f64,
    pub cell_volume: f64,
    pub c1: f64,
    pub cond_i: ConditionVerdict,
    pub cond_ii: ConditionVerdict,
    pub cond_iii: ConditionVerdict,
    pub cond_iv: ConditionVerdict,
    pub series_iv: SeriesCertificate,
    pub tiling_ok: bool,
}

impl GibbsMarkovReport {
    pub fn all_pass(&self) -> bool {
        self.cond_i.pass && self.cond_ii.pass && self.cond_iii.pass && self.cond_iv.pass && self.tiling_ok
    }
}

fn sample_points(dim: usize, per_axis: usize) -> Vec<Point> {
    let n = per_axis.max(2);
    let coord = |i: usize| i as f64 / (n - 1) as f64;
    if dim == 1 {
        (0..n).map(|i| [coord(i), 0.0]).collect()
    } else {
        (0..n)
            .flat_map(|i| (0..n).map(move |j| [coord(i), coord(j)]))
            .collect()
    }
}

/// Max quotient `|f(x) - f(x')| / d(x,x')^alpha` over grid pairs at
/// separations `2^-j`, `j = 2..q`, along each axis.
pub(crate) fn holder_seminorm_fn<F: Fn(&Point) -> f64>(
    f: F,
    dim: usize,
    resolution: usize,
    alpha: f64,
) -> f64 {
    let q = (resolution as f64).log2().floor() as i32;
    let lines = if dim == 1 { 1 } else { 9 };
    let mut best: f64 = 0.0;
    for j in 2..=q.max(2) {
        let sep = 2f64.powi(-j);
        let steps = (1.0 / sep).round() as usize;
        for line in 0..lines {
            let fixed = (line as f64 + 0.5) / lines as f64;
            for axis in 0..dim {
                for k in 0..steps {
                    let mut a = [fixed, fixed];
                    let mut b = [fixed, fixed];
                    a[axis] = k as f64 * sep;
                    b[axis] = (k + 1) as f64 * sep;
                    if dim == 1 {
                        a[1] = 0.0;
                        b[1] = 0.0;
                    }
                    let q = (f(&a) - f(&b)).abs() / sep.powf(alpha);
                    best = best.max(q);
                }
            }
        }
    }
    best
}

fn sampled_words(model: &ModelSystem, len: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let idx = model.family.indices();
    let mut words: Vec<Vec<usize>> = Vec::new();
    // constant words realise the extremal contraction for the built-ins
    let probe: Vec<usize> = idx.clone().take(4).collect();
    for &i in &probe {
        words.push(vec![i; len]);
    }
    match model.family.count() {
        Some(nb) if (nb as f64).powi(len as i32) <= count as f64 => {
            let total = nb.pow(len as u32);
            for mut code in 0..total {
                let mut w = Vec::with_capacity(len);
                for _ in 0..len {
                    w.push(code % nb);
                    code /= nb;
                }
                words.push(w);
            }
        }
        _ => {
            let hi = match model.family.count() {
                Some(nb) => nb,
                None => 8,
            };
            for _ in 0..count {
                words.push(
                    (0..len)
                        .map(|_| idx.start + rng.random_range(0..hi))
                        .collect(),
                );
            }
        }
    }
    words
}

/// Estimate the constants of conditions (i)-(iv) and certify (iv).
pub fn verify_gibbs_markov(model: &ModelSystem, opts: &GibbsMarkovOptions) -> Result<GibbsMarkovReport> {
    if opts.resolution < 64 {
        return Err(Error::GridTooCoarse {
            got: opts.resolution,
            min: 64,
        });
    }
    let dim = model.dim();
    let fam = &model.family;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pts = sample_points(dim, opts.resolution.min(if dim == 1 { 257 } else { 33 }));

    // (i): sup |Dh_w| for words of each length
    let mut dh_sup_by_len = Vec::with_capacity(opts.max_word_len);
    for len in 1..=opts.max_word_len {
        let mut sup: f64 = 0.0;
        for w in sampled_words(model, len, opts.words_per_len, &mut rng) {
            for y in &pts {
                let e = fam.eval_word(&w, y)?;
                let norm = e.jacobian.iter().take(dim).fold(0.0f64, |m, d| m.max(d.abs()));
                sup = sup.max(norm);
            }
        }
        dh_sup_by_len.push(sup);
    }
    let last = *dh_sup_by_len.last().unwrap();
    let rho0 = last.powf(1.0 / opts.max_word_len as f64);
    let c1_expansion = dh_sup_by_len
        .iter()
        .enumerate()
        .map(|(k, s)| s / rho0.powi(k as i32 + 1))
        .fold(1.0f64, f64::max);

    // single-branch data: (ii), (iii)
    let single: Vec<usize> = fam.indices().take(64).collect();
    let mut log_det_holder: f64 = 0.0;
    let mut roof_derivative: f64 = 0.0;
    let mut dh_sup_single: f64 = 0.0;
    let mut roof_inf = f64::INFINITY;
    for &i in &single {
        let h = fam.branch(i)?;
        let logdet = |y: &Point| {
            h.jacobian(y)
                .iter()
                .take(dim)
                .map(|d| d.abs().ln())
                .sum::<f64>()
        };
        log_det_holder = log_det_holder.max(holder_seminorm_fn(logdet, dim, opts.resolution, fam.alpha));
        for y in &pts {
            let g = birkhoff_roof_grad(model, &[i], y)?;
            roof_derivative = roof_derivative.max(g[0].hypot(g[1]));
            let j = h.jacobian(y);
            dh_sup_single = dh_sup_single.max(j.iter().take(dim).fold(0.0f64, |m, d| m.max(d.abs())));
            roof_inf = roof_inf.min(model.roof.eval(&h.apply(y)));
        }
    }

    let series_iv = exponential_moment_series(model, &pts, opts)?;

    // tiling: enumerated range measures plus certified tail
    let covered: f64 = fam
        .indices()
        .map(|i| fam.branch(i).map(|h| h.range_measure(dim)))
        .sum::<Result<f64>>()?;
    let tail = match fam.set {
        BranchSet::Gauss { explicit } => 1.0 / (explicit as f64 + 1.0),
        BranchSet::Finite(_) => 0.0,
    };
    let tiling_defect = (covered + tail - 1.0).abs();
    let cell_volume = (1.0 / opts.resolution as f64).powi(dim as i32);
    let tiling_ok = tiling_defect <= cell_volume && ranges_disjoint(model, opts.resolution.min(512));

    let c1 = c1_expansion.max(log_det_holder).max(roof_derivative).max(1.0);
    Ok(GibbsMarkovReport {
        dh_sup_by_len,
        dh_sup_single,
        rho0,
        c1_expansion,
        log_det_holder,
        roof_derivative,
        roof_inf,
        tiling_defect,
        cell_volume,
        c1,
        cond_i: ConditionVerdict {
            pass: rho0 < 1.0 && c1_expansion.is_finite(),
            estimate: c1_expansion,
        },
        cond_ii: ConditionVerdict {
            pass: log_det_holder <= c1,
            estimate: log_det_holder,
        },
        cond_iii: ConditionVerdict {
            pass: roof_derivative <= c1 && roof_inf > 0.0,
            estimate: roof_derivative,
        },
        cond_iv: ConditionVerdict {
            pass: series_iv.upper().is_finite(),
            estimate: series_iv.upper(),
        },
        series_iv,
    tiling_ok,
    })
}

/// `sum_h exp(eps |r o h|_inf) |det Dh|_inf`.
fn exponential_moment_series(
    model: &ModelSystem,
    pts: &[Point],
    opts: &GibbsMarkovOptions,
) -> Result<SeriesCertificate> {
    let eps = opts.epsilon;
    let fam = &model.family;
    match &fam.set {
        BranchSet::Finite(branches) => {
            let mut sum = 0.0;
            for h in branches {
                let mut rsup: f64 = 0.0;
                let mut dsup: f64 = 0.0;
                for y in pts {
                    rsup = rsup.max(model.roof.eval(&h.apply(y)).abs());
                    let det: f64 = h.jacobian(y).iter().take(fam.dim).map(|d| d.abs()).product();
                    dsup = dsup.max(det);
                }
                sum += (eps * rsup).exp() * dsup;
            }
            Ok(SeriesCertificate {
                epsilon: eps,
                terms: branches.len(),
                partial_sum: sum,
                tail_bound: 0.0,
            })
        }
        BranchSet::Gauss { .. } => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::Precondition(format!(
                    "exponential moment exponent {eps} must lie in (0,1) for the Gauss tail"
                )));
            }
            // r o h_n = log(n+y) + offset is increasing in y and |det Dh_n| = (n+y)^-2
            // is decreasing, so both suprema sit at the interval ends.
            let offset = match model.roof {
                super::Roof::NegLog { offset } => offset,
                _ => {
                    return Err(Error::Precondition(
                        "countable series certificate needs the logarithmic roof".into(),
                    ))
                }
            };
            let big_n = opts.series_terms;
            let mut sum = 0.0;
            for n in (1..=big_n).rev() {
                let nf = n as f64;
                let rsup = ((nf + 1.0).ln() + offset).abs();
                sum += (eps * rsup).exp() / (nf * nf);
            }
            let nf = big_n as f64;
            let tail = (eps * offset).exp() * (1.0 + 1.0 / nf).powf(eps) * nf.powf(eps - 1.0) / (1.0 - eps);
            Ok(SeriesCertificate {
                epsilon: eps,
                terms: big_n,
                partial_sum: sum,
                tail_bound: tail,
            })
        }
    }
}

/// Every sampled cell center lies in at most one branch range.
fn ranges_disjoint(model: &ModelSystem, per_axis: usize) -> bool {
    let fam = &model.family;
    let BranchSet::Finite(branches) = &fam.set else {
        // Gauss ranges [1/(n+1), 1/n) are disjoint by construction
        return true;
    };
    let centers: Vec<Point> = if fam.dim == 1 {
        (0..per_axis).map(|i| [(i as f64 + 0.5) / per_axis as f64, 0.0]).collect()
    } else {
        let m = per_axis.min(128);
        (0..m)
            .flat_map(|i| (0..m).map(move |j| [(i as f64 + 0.5) / m as f64, (j as f64 + 0.5) / m as f64]))
            .collect()
    };
    centers.iter().all(|x| {
        branches
            .iter()
            .filter(|h| {
                let y = h.invert(x);
                y.iter().take(fam.dim).all(|c| (0.0..1.0).contains(c))
            })
            .count()
            == 1
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkewReport {
    pub gamma0: f64,
    pub c: f64,
    pub max_step_ratio: f64,
    pub samples: usize,
    /// Every sample obeys `d <= C gamma0^n d0` with the reported constants.
    pub pass: bool,
}

/// Fit `(C, gamma0)` in `d(f^n(y,z), f^n(y,z')) <= C gamma0^n d(z,z')`.
pub fn verify_skew_contraction(
    model: &ModelSystem,
    n_pairs: usize,
    n_steps: usize,
    seed: u64,
) -> Result<SkewReport> {
    let skew = model
        .skew
        .ok_or_else(|| Error::NoSkewFactor(model.id.clone()))?;
    if n_pairs == 0 || n_steps == 0 {
        return Err(Error::Precondition("need at least one pair and one step".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // ratios[n-1] = max over samples of d_n / d_0
    let mut ratios = vec![0.0f64; n_steps];
    let mut max_step_ratio: f64 = 0.0;
    for _ in 0..n_pairs {
        let mut y: Point = [rng.random::<f64>(), 0.0];
        let mut z = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let mut z2 = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let d0 = SkewFactor::fiber_distance(&z, &z2);
        if d0 == 0.0 {
            continue;
        }
        let mut prev = d0;
        for ratio in ratios.iter_mut() {
            z = skew.apply(y[0], &z);
            z2 = skew.apply(y[0], &z2);
            y = model.forward(&y).unwrap_or([0.0, 0.0]);
            let d = SkewFactor::fiber_distance(&z, &z2);
            max_step_ratio = max_step_ratio.max(d / prev);
            *ratio = ratio.max(d / d0);
            prev = d;
            // below this the difference is dominated by cancellation
            if d < 1e-7 {
                break;
            }
        }
    }
    let gamma0 = ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| **r > 0.0)
        .map(|(k, r)| r.powf(1.0 / (k + 1) as f64))
        .fold(0.0f64, f64::max);
    let c = ratios
        .iter()
        .enumerate()
        .map(|(k, r)| r / gamma0.powi(k as i32 + 1))
        .fold(1.0f64, f64::max);
    let pass = gamma0 < 1.0
        && ratios
            .iter()
            .enumerate()
            .all(|(k, r)| *r <= c * gamma0.powi(k as i32 + 1) * (1.0 + 1e-12));
    Ok(SkewReport {
        gamma0,
        c,
        max_step_ratio,
        samples: n_pairs,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_constants_exact() {
        let a = ModelSystem::builtin("A").unwrap();
        let r = verify_gibbs_markov(&a, &GibbsMarkovOptions::new(4096)).unwrap();
        assert!(r.dh_sup_by_len.iter().enumerate().all(|(k, s)| (s - 0.5f64.powi(k as i32 + 1)).abs() < 1e-15));
        assert!((r.rho0 - 0.5).abs() < 1e-12);
        assert_eq!(r.dh_sup_single, 0.5);
        assert_eq!(r.log_det_holder, 0.0);
        assert!(r.all_pass());
    }

    #[test]
    fn coarse_grid_rejected() {
        let a = ModelSystem::builtin("A").unwrap();
        assert!(matches!(
            verify_gibbs_markov(&a, &GibbsMarkovOptions::new(32)),
            Err(Error::GridTooCoarse { .. })
        ));
    }

    #[test]
    fn skew_requires_factor() {
        let a = ModelSystem::builtin("A").unwrap();
        assert!(matches!(
            verify_skew_contraction(&a, 10, 5, 1),
            Err(Error::NoSkewFactor(_))
        ));
    }

    #[test]
    fn solenoid_contraction() {
        let c = ModelSystem::builtin("C").unwrap();
        let r = verify_skew_contraction(&c, 1000, 20, 3).unwrap();
        assert!((r.gamma0 - 0.25).abs() < 1e-9);
        assert!((r.c - 1.0).abs() < 1e-6);
        assert!(r.pass);
        let half = c.clone().with_skew(SkewFactor {
            contraction: 0.5,
            coupling: 1.0,
        });
        let r = verify_skew_contraction(&half, 1000, 20, 3).unwrap();
        assert!((r.gamma0 - 0.5).abs() < 1e-9);
        let one = verify_skew_contraction(&c, 1, 1, 9).unwrap();
        assert!(one.max_step_ratio <= 0.25 + 1e-15);
    }
}
