use super::partition::{InducingResult, PartitionState, FINISHED, LIVE, NO_COMPONENT};
use crate::error::{Error, Result};
use crate::stats::linear_fit;
use serde::Serialize;
use std::collections::BTreeMap;

/// Allowance on the proved `1/4` bounds for boundary-cell effects.
pub const GRID_SLACK: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collar {
    pub owner: u32,
    pub birth: usize,
    pub cells: usize,
    pub outer_ring: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollarCensus {
    pub n: usize,
    pub collars: Vec<Collar>,
    /// Cells with `t = 1`; equals the total outer-ring count.
    pub t_one_cells: usize,
    /// B cells without an owner or with `t` inconsistent with the annulus
    /// index recorded at birth.
    pub inconsistent: usize,
    /// New collars meeting older collars, summed over all generations.
    pub disjointness_violations: usize,
    /// `A^(eps)` cells with `t > 1`, summed over all generations.
    pub eps_violations: usize,
}

impl CollarCensus {
    pub fn pass(&self) -> bool {
        self.disjointness_violations == 0 && self.eps_violations == 0 && self.inconsistent == 0
    }
}

pub fn collar_census(state: &PartitionState) -> CollarCensus {
    let mut map: BTreeMap<u32, Collar> = BTreeMap::new();
    let mut inconsistent = 0;
    let mut t_one = 0;
    for k in 0..state.status.len() {
        if !state.is_b(k) {
            continue;
        }
        if state.t[k] == 1 {
            t_one += 1;
        }
        let o = state.owner[k];
        if o == NO_COMPONENT {
            inconsistent += 1;
            continue;
        }
        let birth = state.components[o as usize].birth;
        if state.k_set[k] as i64 - (state.n - birth) as i64 != state.t[k] as i64 {
            inconsistent += 1;
        }
        let e = map.entry(o).or_insert(Collar {
            owner: o,
            birth,
            cells: 0,
            outer_ring: 0,
        });
        e.cells += 1;
        if state.t[k] == 1 {
            e.outer_ring += 1;
        }
    }
    CollarCensus {
        n: state.n,
        collars: map.into_values().collect(),
        t_one_cells: t_one,
        inconsistent,
        disjointness_violations: state.records.iter().map(|r| r.collar_violations).sum(),
        eps_violations: state.records.iter().map(|r| r.eps_violations).sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioRow {
    pub n: usize,
    /// `Leb(B_{n-1} & A_n)/Leb(B_{n-1})`, `None` when `B_{n-1}` is empty.
    pub ratio_a: Option<f64>,
    pub ratio_b: Option<f64>,
    pub ratio_c: Option<f64>,
    pub leb_a: f64,
    pub leb_b: f64,
    /// `Leb(B_n) <= a0 Leb(A_n)`.
    pub facts2_ok: bool,
    /// Corollary bounds (a)-(d) of the one-step estimates.
    pub cor_ok: bool,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub a1: f64,
    pub a0: f64,
    pub rows: Vec<RatioRow>,
}

impl RatioReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.bound_ok)
    }
}

pub fn ratio_report(result: &InducingResult) -> RatioReport {
    let c = &result.constants;
    let q = 0.25 + GRID_SLACK;
    let rows = result
        .state
        .records
        .iter()
        .map(|r| {
            let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
            let ratio_a = ratio(r.leb_ba, r.leb_b_prev);
            let ratio_b = ratio(r.leb_ab, r.leb_a_prev);
            let ratio_c = ratio(r.leb_ar, r.leb_a_prev);
            let facts2_ok = r.leb_b <= c.a0 * r.leb_a;
            let tol = 1e-12;
            let cor_ok = r.leb_aa + tol >= (0.5 - GRID_SLACK) * r.leb_a_prev
                && r.leb_b <= q * r.leb_a_prev + (1.0 - c.a1) * r.leb_b_prev + tol;
            RatioRow {
                n: r.n,
                ratio_a,
                ratio_b,
                ratio_c,
                leb_a: r.leb_a,
                leb_b: r.leb_b,
                facts2_ok,
                cor_ok,
                bound_ok: ratio_b.is_none_or(|v| v <= q) && ratio_c.is_none_or(|v| v <= q) && facts2_ok,
            }
        })
        .collect();
    RatioReport {
        a1: c.a1,
        a0: c.a0,
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub gamma: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(n, log Leb(R>n) - fit)` over the fitted suffix.
    pub residuals: Vec<(usize, f64)>,
    pub first_n: usize,
    pub exponential: bool,
    pub monotone: bool,
}

/// Least-squares fit of `log Leb(R>n)` over the longest suffix whose cell
/// counts exceed `min_cells`.
pub fn tail_fit_table(tail: &[(usize, f64)], cell_volume: f64, min_cells: f64) -> Result<TailFit> {
    let nonzero = tail.iter().filter(|(_, v)| *v > 0.0).count();
    if nonzero < 6 {
        return Err(Error::InsufficientData(format!("{nonzero} nonzero tail entries, need 6")));
    }
    let mut start = tail.len();
    while start > 0 && tail[start - 1].1 > min_cells * cell_volume {
        start -= 1;
    }
    let suffix = &tail[start..];
    if suffix.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "only {} tail entries above {min_cells} cells",
            suffix.len()
        )));
    }
    let pts: Vec<(f64, f64)> = suffix.iter().map(|(n, v)| (*n as f64, v.ln())).collect();
    let fit = linear_fit(&pts);
    let residuals = suffix
        .iter()
        .zip(&pts)
        .map(|((n, _), (x, y))| (*n, y - (fit.intercept + fit.slope * x)))
        .collect();
    let gamma = fit.slope.exp();
    Ok(TailFit {
        gamma,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        residuals,
        first_n: suffix[0].0,
        exponential: gamma < 1.0 - 1e-12,
        monotone: tail.windows(2).all(|w| w[1].1 <= w[0].1),
    })
}

pub fn tail_fit(result: &InducingResult) -> Result<TailFit> {
    tail_fit_table(&result.tail, result.state.grid.cell_volume(), 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkovVerdict {
    pub id: u32,
    pub birth: usize,
    pub cells: usize,
    /// Fraction of sampled Y cells whose `g_n`-preimage lies within one
    /// cell diagonal of a cell of the component.
    pub coverage: f64,
    pub onto: bool,
    pub into: bool,
    pub injective: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovReport {
    pub verdicts: Vec<MarkovVerdict>,
    pub sampled_y_cells: usize,
}

impl MarkovReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.onto && v.into && v.injective)
    }

    pub fn pass_fraction(&self) -> f64 {
        if self.verdicts.is_empty() {
            return 1.0;
        }
        self.verdicts.iter().filter(|v| v.onto && v.into && v.injective).count() as f64 / self.verdicts.len() as f64
    }
}

/// Onto, into and injectivity verdicts for every finished component.
/// Coverage is tested on an evenly strided sample of at most `max_samples`
/// Y cells.
pub fn markov_check(result: &InducingResult, lambda: f64, p: &[f64; 2], max_samples: usize) -> MarkovReport {
    let st = &result.state;
    let grid = &st.grid;
    let c = &result.constants;
    let y_cells: Vec<usize> = (0..st.status.len()).filter(|&k| st.status[k] != 0).collect();
    // a component of c cells resolves at most about c preimage cells, so
    // small components get a proportionally smaller sample
    let sample_for = |cells: usize| -> Vec<usize> {
        let want = (64 * cells).clamp(256, max_samples.max(1));
        let stride = y_cells.len().div_ceil(want).max(1);
        y_cells.iter().step_by(stride).copied().collect()
    };
    let mut samples: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut members: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for k in 0..st.status.len() {
        if st.status[k] == FINISHED {
            members.entry(st.owner[k]).or_default().push(k);
        }
    }
    let reach = grid.h * (grid.dim as f64).sqrt() * (1.0 + 1e-9);
    let verdicts = members
        .into_iter()
        .map(|(id, cells)| {
            let want = (64 * cells.len()).clamp(256, max_samples.max(1));
            let sample = samples.entry(want).or_insert_with(|| sample_for(cells.len()));
            let comp = &st.components[id as usize];
            let ln = lambda.powi(comp.birth as i32);
            // injectivity: distinct cells land in distinct Y cells
            let mut targets: Vec<usize> = cells
                .iter()
                .filter_map(|&k| grid.locate(&st.image[k]))
                .collect();
            let located = targets.len();
            targets.sort_unstable();
            targets.dedup();
            let injective = located == cells.len() && targets.len() == cells.len();
            let into = cells.iter().all(|&k| {
                let z = st.image[k];
                (z[0] - p[0]).hypot(z[1] - p[1]) < c.l as f64 * c.delta
            });
            let hit = sample
                .iter()
                .filter(|&&s| {
                    let z = grid.center(s);
                    let x = [comp.center[0] + (z[0] - p[0]) * ln, comp.center[1] + (z[1] - p[1]) * ln];
                    near_owned(st, x, reach, id)
                })
                .count();
            let coverage = hit as f64 / sample.len().max(1) as f64;
            MarkovVerdict {
                id,
                birth: comp.birth,
                cells: cells.len(),
                coverage,
                onto: coverage >= 0.99,
                into,
                injective,
            }
        })
        .collect();
    MarkovReport {
        verdicts,
        sampled_y_cells: samples.values().map(|s| s.len()).max().unwrap_or(0),
    }
}

fn near_owned(st: &PartitionState, x: [f64; 2], reach: f64, id: u32) -> bool {
    let grid = &st.grid;
    let span = (reach / grid.h).ceil() as i64;
    let base = [
        ((x[0] - grid.origin[0]) / grid.h - 0.5).round() as i64,
        ((x[1] - grid.origin[1]) / grid.h - 0.5).round() as i64,
    ];
    let m = grid.m as i64;
    let ok = |i: i64| (0..m).contains(&i);
    let check = |k: usize| {
        let y = grid.center(k);
        st.status[k] == FINISHED && st.owner[k] == id && (y[0] - x[0]).hypot(y[1] - x[1]) <= reach
    };
    if ok(base[0]) && (grid.dim == 1 || ok(base[1])) {
        let k0 = if grid.dim == 1 { base[0] } else { base[0] * m + base[1] };
        if check(k0 as usize) {
            return true;
        }
    }
    if grid.dim == 1 {
        (base[0] - span..=base[0] + span).filter(|&i| ok(i)).any(|i| check(i as usize))
    } else {
        (base[0] - span..=base[0] + span).filter(|&i| ok(i)).any(|i| {
            (base[1] - span..=base[1] + span)
                .filter(|&j| ok(j))
                .any(|j| check((i * m + j) as usize))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyfactReport {
    pub window: usize,
    /// `(n, Leb(union_{i<=N} {R=n+i}) / Leb(A_{n-1}))` for windows inside the run.
    pub ratios: Vec<(usize, f64)>,
    pub c1_hat: Option<f64>,
}

/// Empirical lower constant in `Leb(union_{i=0}^N {R=n+i}) >= c1 Leb(A_{n-1})`.
pub fn keyfact_report(result: &InducingResult) -> KeyfactReport {
    let recs = &result.state.records;
    let w = result.constants.n;
    let finished: Vec<f64> = recs.iter().map(|r| r.leb_ar + r.leb_br).collect();
    let mut ratios = Vec::new();
    for (i, r) in recs.iter().enumerate() {
        if i + w >= recs.len() || r.leb_a_prev <= 0.0 {
            continue;
        }
        let mass: f64 = finished[i..=i + w].iter().sum();
        ratios.push((r.n, mass / r.leb_a_prev));
    }
    let c1_hat = ratios.iter().map(|x| x.1).reduce(f64::min);
    KeyfactReport {
        window: w,
        ratios,
        c1_hat,
    }
}

/// Label conservation: A, B and finished cells partition the Y cells.
pub fn label_counts(state: &PartitionState) -> (usize, usize, usize) {
    let a = state.count_a();
    let b = state.count_b();
    let f = state.count_finished();
    debug_assert_eq!(a + b + f, state.status.iter().filter(|&&s| s == LIVE || s == FINISHED).count());
    (a, b, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_tail() {
        let tail: Vec<(usize, f64)> = (0..10).map(|n| (n, 0.5f64.powi(n as i32))).collect();
        let fit = tail_fit_table(&tail, 1e-9, 100.0).unwrap();
        assert!((fit.gamma - 0.5).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(fit.exponential && fit.monotone);
    }

    #[test]
    fn constant_tail() {
        let tail: Vec<(usize, f64)> = (0..10).map(|n| (n, 0.3)).collect();
        let fit = tail_fit_table(&tail, 1e-9, 100.0).unwrap();
        assert!((fit.gamma - 1.0).abs() < 1e-12);
        assert!(!fit.exponential);
        assert!(tail_fit_table(&tail[..4], 1e-9, 100.0).is_err());
    }
}
