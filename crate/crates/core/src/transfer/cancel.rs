//! Oscillatory cancellation: the ball family, the cutoff `chi`, the cone
//! `C_b` and the damped cone iteration.

use super::grid::GridFunction;
use super::operator::{apply_word_fn, normalized_words_fn, EigenData, TwistParameter};
use super::probes::random_trig;
use super::uni::{psi, uni_estimate};
use crate::error::{Error, Result};
use crate::models::{ModelSystem, Point};
use crate::stats::linear_fit;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BallType {
    H1,
    H2,
}

/// How the shifted center `y''` of a ball was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Selection {
    /// `|v(h_m y')| <= u(h_m y')/2` for some `m`; no shift needed.
    Threshold,
    /// Phase condition `b(psi(y'') - psi(y')) = theta(y') - pi mod 2 pi`.
    Phase,
    /// Neither of the above verified on the grid; first lattice candidate
    /// in `B_{Delta/|b|}(y')` on which a case holds.
    Search,
    Unresolved,
    Untyped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ball {
    pub center: Point,
    pub shifted: Point,
    /// `delta/|b|`.
    pub radius: f64,
    pub kind: Option<BallType>,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallFamily {
    pub dim: usize,
    pub b: f64,
    pub delta: f64,
    /// `Delta = 4 pi / E`.
    pub big_delta: f64,
    pub e: f64,
    /// `E' = max(16 pi / E, 2)`.
    pub e_prime: f64,
    /// `(delta + Delta)/|b|`.
    pub exclusion: f64,
    /// `|b| < E'`: the family is still built but the lemma's range of `b`
    /// is not reached.
    pub below_threshold: bool,
    pub typed: bool,
    pub balls: Vec<Ball>,
}

impl BallFamily {
    pub fn typed_count(&self) -> usize {
        self.balls.iter().filter(|b| b.kind.is_some()).count()
    }
}

/// Greedy maximal family of centers `y'` on a lattice of step
/// `(delta+Delta)/(8|b|)` with disjoint balls `B_{(delta+Delta)/|b|}(y')`
/// inside `Y = (0,1)^dim`.
pub fn ball_family(b: f64, delta: f64, e: f64, dim: usize) -> Result<BallFamily> {
    if !(e > 0.0) {
        return Err(Error::Precondition(format!("UNI constant E = {e} must be positive")));
    }
    let big_delta = 4.0 * PI / e;
    if !(delta > 0.0 && delta < big_delta) {
        return Err(Error::Precondition(format!(
            "need 0 < delta < Delta = {big_delta}, got {delta}"
        )));
    }
    if b.abs() < 1.0 {
        return Err(Error::Precondition(format!("|b| = {} below 1", b.abs())));
    }
    let e_prime = (16.0 * PI / e).max(2.0);
    let rho = (delta + big_delta) / b.abs();
    let radius = delta / b.abs();
    let mut centers: Vec<Point> = Vec::new();
    if 2.0 * rho <= 1.0 {
        let step = rho / 8.0;
        let count = ((1.0 - 2.0 * rho) / step).floor() as usize + 1;
        let lattice: Vec<Point> = if dim == 1 {
            (0..count).map(|i| [rho + i as f64 * step, 0.0]).collect()
        } else {
            (0..count)
                .flat_map(|i| (0..count).map(move |j| [rho + i as f64 * step, rho + j as f64 * step]))
                .collect()
        };
        for p in lattice {
            if centers.iter().all(|c| dist(c, &p) >= 2.0 * rho) {
                centers.push(p);
            }
        }
    }
    Ok(BallFamily {
        dim,
        b,
        delta,
        big_delta,
        e,
        e_prime,
        exclusion: rho,
        below_threshold: b.abs() < e_prime,
        typed: false,
        balls: centers
            .into_iter()
            .map(|c| Ball {
                center: c,
                shifted: c,
                radius,
                kind: None,
                selection: Selection::Untyped,
            })
            .collect(),
    })
}

fn dist(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Node indices of the grid within distance `r` of `c`.
fn nodes_in_ball(dim: usize, nodes: usize, c: &Point, r: f64) -> Vec<usize> {
    let m = (nodes - 1) as f64;
    let range = |x: f64| {
        let lo = ((x - r) * m).ceil().max(0.0) as usize;
        let hi = (((x + r) * m).floor().min(m)) as usize;
        lo..=hi
    };
    let mut out = Vec::new();
    if dim == 1 {
        for i in range(c[0]) {
            if (i as f64 / m - c[0]).abs() <= r {
                out.push(i);
            }
        }
    } else {
        for i in range(c[0]) {
            for j in range(c[1]) {
                if dist(&[i as f64 / m, j as f64 / m], c) <= r {
                    out.push(i * nodes + j);
                }
            }
        }
    }
    out
}

/// Branch pair from (UNI) with the cancellation constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CancelSetup {
    pub w1: Vec<usize>,
    pub w2: Vec<usize>,
    pub e: f64,
    pub delta: f64,
    pub c4: f64,
    /// Direction field `l` (constant).
    pub ell: [f64; 2],
}

pub const DEFAULT_CANCEL_DELTA: f64 = 1.0;
pub const DEFAULT_C4: f64 = 8.0;

impl CancelSetup {
    /// Measures `E` for the given words on a 4097-node (1D) or 257^2 grid.
    pub fn new(model: &ModelSystem, w1: &[usize], w2: &[usize]) -> Result<Self> {
        let nodes = if model.dim() == 1 { 4097 } else { 257 };
        let uni = uni_estimate(model, w1, w2, None, nodes)?;
        Ok(Self {
            w1: w1.to_vec(),
            w2: w2.to_vec(),
            e: uni.e,
            delta: DEFAULT_CANCEL_DELTA,
            c4: DEFAULT_C4,
            ell: [1.0, 0.0],
        })
    }

    pub fn n0(&self) -> usize {
        self.w1.len()
    }

    pub fn degenerate(&self) -> bool {
        self.e <= 1e-12
    }
}

/// A pair `(u, v)` of grid functions, candidate member of `C_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConePair {
    pub u: GridFunction,
    pub v: GridFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeCheck {
    pub ok: bool,
    pub min_u: f64,
    /// `max (|v| - u)` over nodes.
    pub max_excess: f64,
    /// `|log u|_alpha / (C4 |b|^alpha)`.
    pub log_u_ratio: f64,
    /// `max |v(x)-v(y)| / (C4 |b|^alpha u(y) d(x,y)^alpha)` over sampled pairs.
    pub v_ratio: f64,
    /// Node of the worst pointwise violation, if any.
    pub worst: Option<Point>,
}

/// Grid membership test for `C_b`.
pub fn cone_check(pair: &ConePair, b: f64, c4: f64, alpha: f64) -> ConeCheck {
    let u = pair.u.values();
    let v = pair.v.values();
    let min_u = pair.u.min_re();
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst_idx = 0;
    for (k, (a, c)) in v.iter().zip(u).enumerate() {
        let ex = a.norm() - c.re;
        if ex > max_excess {
            max_excess = ex;
            worst_idx = k;
        }
    }
    let scale = c4 * b.abs().powf(alpha);
    let log_u_ratio = if min_u > 0.0 {
        pair.u.map(|z| Complex64::new(z.re.ln(), 0.0)).seminorm(alpha) / scale
    } else {
        f64::INFINITY
    };
    let v_ratio = if min_u > 0.0 {
        pair.u.pair_sup_idx(alpha, |x, y| (v[x] - v[y]).norm() / u[y].re) / scale
    } else {
        f64::INFINITY
    };
    let ok = min_u > 0.0 && max_excess <= 1e-12 && log_u_ratio <= 1.0 && v_ratio <= 1.0;
    ConeCheck {
        ok,
        min_u,
        max_excess,
        log_u_ratio,
        v_ratio,
        worst: if max_excess > 1e-12 {
            Some(pair.u.node(worst_idx))
        } else {
            None
        },
    }
}

/// Random member of `C_b`: `u = exp(a)` with slowly varying `a`, and
/// `v = u rho e^{i theta}` with `rho in [0.2, 1]` and phase slope up to `|b|`.
/// Candidates are drawn until the grid test passes.
pub fn random_cone_pair(
    dim: usize,
    nodes: usize,
    b: f64,
    c4: f64,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ConePair> {
    for _ in 0..32 {
        let a = random_trig(dim, nodes, 2, rng);
        let amp = 0.1 / a.seminorm(1.0).max(1e-12);
        let r = random_trig(dim, nodes, 2, rng);
        let rs = r.sup_norm().max(1e-12);
        let slope = rng.random_range(-1.0..1.0) * b;
        let slope2 = if dim == 2 { rng.random_range(-1.0..1.0) * b } else { 0.0 };
        let wobble = random_trig(dim, nodes, 3, rng);
        let ws = 0.5 / wobble.seminorm(1.0).max(1e-12);
        let mut vals_u = Vec::with_capacity(a.len());
        let mut vals_v = Vec::with_capacity(a.len());
        for k in 0..a.len() {
            let y = a.node(k);
            let u = (amp * a.values()[k].re).exp();
            let rho = 0.6 + 0.4 * r.values()[k].re / rs;
            let theta = slope * y[0] + slope2 * y[1] + ws * wobble.values()[k].re;
            vals_u.push(Complex64::new(u, 0.0));
            vals_v.push(Complex64::from_polar(u * rho, theta));
        }
        let pair = ConePair {
            u: a.like(vals_u),
            v: a.like(vals_v),
        };
        if cone_check(&pair, b, c4, alpha).ok {
            return Ok(pair);
        }
    }
    Err(Error::Precondition("no random cone pair passed the membership test".into()))
}

/// Per-node values of `A_{s,h_m,n0}(f v)` and `A_{sigma,h_m,n0}(f u)`.
struct CaseData {
    z1: GridFunction,
    z2: GridFunction,
    u1: GridFunction,
    u2: GridFunction,
}

impl CaseData {
    fn new(
        model: &ModelSystem,
        tp: &TwistParameter,
        eig: &EigenData,
        setup: &CancelSetup,
        pair: &ConePair,
    ) -> Result<Self> {
        let f = &eig.f;
        let s = tp.s();
        let sig = Complex64::new(tp.sigma, 0.0);
        let fv = |_: &Point, x: &Point| f.eval(x) * pair.v.eval(x);
        let fu = |_: &Point, x: &Point| f.eval(x) * pair.u.eval(x);
        Ok(Self {
            z1: apply_word_fn(model, s, &setup.w1, f, fv)?,
            z2: apply_word_fn(model, s, &setup.w2, f, fv)?,
            u1: apply_word_fn(model, sig, &setup.w1, f, fu)?,
            u2: apply_word_fn(model, sig, &setup.w2, f, fu)?,
        })
    }

    fn holds(&self, kind: BallType, idx: &[usize]) -> bool {
        let (a1, a2) = match kind {
            BallType::H1 => (0.75, 1.0),
            BallType::H2 => (1.0, 0.75),
        };
        idx.iter().all(|&k| {
            let lhs = (self.z1.values()[k] + self.z2.values()[k]).norm();
            lhs <= a1 * self.u1.values()[k].re + a2 * self.u2.values()[k].re
        })
    }

    fn first_case(&self, dim: usize, nodes: usize, c: &Point, r: f64) -> Option<BallType> {
        let idx = nodes_in_ball(dim, nodes, c, r);
        if idx.is_empty() {
            return None;
        }
        [BallType::H1, BallType::H2]
            .into_iter()
            .find(|k| self.holds(*k, &idx))
    }
}

/// Choose `y''` and the type of every ball for the pair `(u, v)`; each
/// chosen case is verified at all grid nodes of `B_{delta/|b|}(y'')`.
pub fn assign_types(
    model: &ModelSystem,
    tp: &TwistParameter,
    eig: &EigenData,
    setup: &CancelSetup,
    family: &mut BallFamily,
    pair: &ConePair,
) -> Result<()> {
    if (family.b - tp.b).abs() > 0.0 {
        return Err(Error::Precondition(format!(
            "ball family built for b = {} used with b = {}",
            family.b, tp.b
        )));
    }
    let data = CaseData::new(model, tp, eig, setup, pair)?;
    let nodes = eig.f.nodes();
    let dim = model.dim();
    let fam = &model.family;
    let b = tp.b;
    let ell = setup.ell;
    let reach = family.big_delta / b.abs();
    for ball in family.balls.iter_mut() {
        let yp = ball.center;
        let r = ball.radius;
        ball.kind = None;
        ball.selection = Selection::Unresolved;
        ball.shifted = yp;
        // step (1): small |v| on one branch image
        let x1 = fam.eval_word(&setup.w1, &yp)?.point;
        let x2 = fam.eval_word(&setup.w2, &yp)?.point;
        let (v1, v2) = (pair.v.eval(&x1), pair.v.eval(&x2));
        let (u1, u2) = (pair.u.eval(&x1).re, pair.u.eval(&x2).re);
        let small = [
            (v1.norm() <= 0.5 * u1, BallType::H1),
            (v2.norm() <= 0.5 * u2, BallType::H2),
        ];
        if let Some((_, k)) = small.iter().find(|(c, _)| *c) {
            if data.holds(*k, &nodes_in_ball(dim, nodes, &yp, r)) {
                ball.kind = Some(*k);
                ball.selection = Selection::Threshold;
                continue;
            }
        }
        // step (3): phase matching along the integral curve of l
        let psi0 = psi(model, &setup.w1, &setup.w2, &yp)?;
        let theta = (v1.arg() - v2.arg()) - b * psi0;
        let target = theta - PI;
        let steps = 512;
        let mut prev: Option<(f64, f64)> = None;
        let mut found = None;
        for k in 0..=steps {
            let t = reach * k as f64 / steps as f64;
            let y = [yp[0] + t * ell[0], yp[1] + t * ell[1]];
            let g = b * (psi(model, &setup.w1, &setup.w2, &y)? - psi0) - target;
            let wrap = (g / (2.0 * PI)).floor();
            if let Some((tp_, gp)) = prev {
                let wp = (gp / (2.0 * PI)).floor();
                if wrap != wp {
                    // crossing of a multiple of 2 pi between the samples
                    let level = 2.0 * PI * wrap.max(wp);
                    let frac = ((level - gp) / (g - gp)).clamp(0.0, 1.0);
                    found = Some(tp_ + frac * (t - tp_));
                    break;
                }
            }
            if g.rem_euclid(2.0 * PI) == 0.0 {
                found = Some(t);
                break;
            }
            prev = Some((t, g));
        }
        if let Some(t) = found {
            let ys = [yp[0] + t * ell[0], yp[1] + t * ell[1]];
            if let Some(k) = data.first_case(dim, nodes, &ys, r) {
                ball.kind = Some(k);
                ball.shifted = ys;
                ball.selection = Selection::Phase;
                continue;
            }
        }
        // lattice search inside B_{Delta/|b|}(y')
        let per_axis = 33;
        let mut cands: Vec<Point> = Vec::new();
        for i in 0..per_axis {
            let a = -reach + 2.0 * reach * i as f64 / (per_axis - 1) as f64;
            if dim == 1 {
                cands.push([yp[0] + a, 0.0]);
            } else {
                for j in 0..per_axis {
                    let c = -reach + 2.0 * reach * j as f64 / (per_axis - 1) as f64;
                    cands.push([yp[0] + a, yp[1] + c]);
                }
            }
        }
        cands.retain(|c| dist(c, &yp) <= reach);
        cands.sort_by(|a, b| dist(a, &yp).total_cmp(&dist(b, &yp)));
        for c in cands {
            if let Some(k) = data.first_case(dim, nodes, &c, r) {
                ball.kind = Some(k);
                ball.shifted = c;
                ball.selection = Selection::Search;
                break;
            }
        }
    }
    family.typed = true;
    Ok(())
}

/// `t -> 0` for `t <= 0`, `1` for `t >= 1`, `C^infinity` in between.
fn smooth_step(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        let a = (-1.0 / t).exp();
        let c = (-1.0 / (1.0 - t)).exp();
        let s = a / (a + c);
        (s, s * (1.0 - s) * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t))))
    }
}

/// Bump `omega_i`: one on `B_{r/2}(c)`, zero off `B_r(c)`; value and
/// gradient norm.
fn bump(c: &Point, r: f64, y: &Point) -> (f64, f64) {
    let d = dist(c, y);
    let (s, ds) = smooth_step((r - d) / (0.5 * r));
    (s, ds * 2.0 / r)
}

/// `chi = 1 - omega / C'` with `omega = omega_i o F^{n0}` on the range of
/// the branch named by the type of ball `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiCutoff {
    pub w1: Vec<usize>,
    pub w2: Vec<usize>,
    pub balls: Vec<Ball>,
    pub c_prime: f64,
    pub eta: f64,
    /// Measured `||omega||_{C^1}`.
    pub omega_c1: f64,
}

impl ChiCutoff {
    pub fn omega_at(&self, kind: BallType, y: &Point) -> f64 {
        self.balls
            .iter()
            .filter(|b| b.kind == Some(kind))
            .map(|b| bump(&b.shifted, b.radius, y).0)
            .sum()
    }

    /// `chi(h_w y)`.
    pub fn on_word(&self, w: &[usize], y: &Point) -> f64 {
        let kind = if w == self.w1.as_slice() {
            BallType::H1
        } else if w == self.w2.as_slice() {
            BallType::H2
        } else {
            return 1.0;
        };
        1.0 - self.omega_at(kind, y) / self.c_prime
    }

    /// `chi(x)` through the forward itinerary of `x`.
    pub fn eval(&self, model: &ModelSystem, x: &Point) -> f64 {
        let n0 = self.w1.len();
        let mut w = Vec::with_capacity(n0);
        let mut y = *x;
        for _ in 0..n0 {
            match model.family.forward(&y) {
                Some((i, fy)) => {
                    w.push(i);
                    y = fy;
                }
                None => return 1.0,
            }
        }
        self.on_word(&w, &y)
    }

    pub fn grid(&self, model: &ModelSystem, nodes: usize) -> GridFunction {
        GridFunction::from_real_fn(model.dim(), nodes, |x| self.eval(model, x))
    }
}

/// Assemble `chi` from a typed family. `C' = max(||omega||_{C^1}/|b|, 4) + 1`.
pub fn chi_cutoff(model: &ModelSystem, family: &BallFamily, setup: &CancelSetup, nodes: usize) -> Result<ChiCutoff> {
    if !family.typed && !family.balls.is_empty() {
        return Err(Error::Precondition("ball family has not been typed".into()));
    }
    let fam = &model.family;
    let dim = model.dim();
    let mut dsup: f64 = 0.0;
    let mut vsup: f64 = 0.0;
    for ball in family.balls.iter().filter(|b| b.kind.is_some()) {
        let w = match ball.kind {
            Some(BallType::H1) => &setup.w1,
            _ => &setup.w2,
        };
        for k in nodes_in_ball(dim, nodes, &ball.shifted, ball.radius) {
            let y = super::grid::node_point(dim, nodes, k);
            let (val, grad) = bump(&ball.shifted, ball.radius, &y);
            let jac = fam.eval_word(w, &y)?.jacobian;
            let contraction = jac.iter().take(dim).fold(f64::INFINITY, |m, d| m.min(d.abs()));
            vsup = vsup.max(val);
            dsup = dsup.max(grad / contraction);
        }
    }
    let omega_c1 = vsup + dsup;
    let c_prime = (omega_c1 / family.b.abs()).max(4.0) + 1.0;
    Ok(ChiCutoff {
        w1: setup.w1.clone(),
        w2: setup.w2.clone(),
        balls: family.balls.iter().filter(|b| b.kind.is_some()).copied().collect(),
        c_prime,
        eta: 1.0 - 1.0 / c_prime,
        omega_c1,
    })
}

fn untyped_chi(setup: &CancelSetup) -> ChiCutoff {
    ChiCutoff {
        w1: setup.w1.clone(),
        w2: setup.w2.clone(),
        balls: vec![],
        c_prime: 5.0,
        eta: 0.8,
        omega_c1: 0.0,
    }
}

/// `(L_sigma^{n0}(chi u), L_s^{n0} v)`.
pub fn damped_step(
    model: &ModelSystem,
    tp: &TwistParameter,
    eig: &EigenData,
    setup: &CancelSetup,
    chi: &ChiCutoff,
    pair: &ConePair,
) -> Result<ConePair> {
    let n0 = setup.n0();
    let sig = Complex64::new(tp.sigma, 0.0);
    let u = normalized_words_fn(model, sig, eig, n0, |w, y, x| pair.u.eval(x) * chi.on_word(w, y))?;
    let v = normalized_words_fn(model, tp.s(), eig, n0, |_, _, x| pair.v.eval(x))?;
    Ok(ConePair { u, v })
}

#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub b: f64,
    pub pairs: usize,
    pub balls: usize,
    pub typed: usize,
    pub untyped: usize,
    /// `max (|L_s^{n0} v| - L_sigma^{n0}(chi u))` over nodes and pairs.
    pub max_excess: f64,
    pub chi_min: f64,
    pub chi_max: f64,
    pub below_threshold: bool,
    pub c_prime_max: f64,
}

/// Pointwise domination `|L_s^{n0} v| <= L_sigma^{n0}(chi u)` over random
/// cone pairs.
pub fn cancellation_domination(
    model: &ModelSystem,
    tp: &TwistParameter,
    eig: &EigenData,
    setup: &CancelSetup,
    pairs: usize,
    seed: u64,
) -> Result<DominationReport> {
    let family0 = ball_family(tp.b, setup.delta, setup.e, model.dim())?;
    let nodes = eig.f.nodes();
    let alpha = model.family.alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = DominationReport {
        b: tp.b,
        pairs,
        balls: 0,
        typed: 0,
        untyped: 0,
        max_excess: f64::NEG_INFINITY,
        chi_min: f64::INFINITY,
        chi_max: f64::NEG_INFINITY,
        below_threshold: family0.below_threshold,
        c_prime_max: 0.0,
    };
    for _ in 0..pairs {
        let pair = random_cone_pair(model.dim(), nodes, tp.b, setup.c4, alpha, &mut rng)?;
        let mut family = family0.clone();
        assign_types(model, tp, eig, setup, &mut family, &pair)?;
        let chi = chi_cutoff(model, &family, setup, nodes)?;
        rep.balls += family.balls.len();
        rep.typed += family.typed_count();
        rep.untyped += family.balls.len() - family.typed_count();
        rep.c_prime_max = rep.c_prime_max.max(chi.c_prime);
        let next = damped_step(model, tp, eig, setup, &chi, &pair)?;
        for (v, u) in next.v.values().iter().zip(next.u.values()) {
            rep.max_excess = rep.max_excess.max(v.norm() - u.re);
        }
        // chi on the ball nodes pulled back, plus a coarse global sweep
        let g = chi.grid(model, 1025.min(nodes));
        rep.chi_min = rep.chi_min.min(g.min_re());
        rep.chi_max = rep.chi_max.max(g.max_re());
        for ball in &chi.balls {
            let w = if ball.kind == Some(BallType::H1) { &setup.w1 } else { &setup.w2 };
            let x = model.family.eval_word(w, &ball.shifted)?.point;
            let c = chi.eval(model, &x);
            rep.chi_min = rep.chi_min.min(c);
            rep.chi_max = rep.chi_max.max(c);
        }
    }
    Ok(rep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConeStep {
    pub m: usize,
    /// `int u_m^2 dmu`.
    pub l2_u: f64,
    /// `int |v_m|^2 dmu`.
    pub l2_v: f64,
    pub cone_ok: bool,
    pub check: ConeCheck,
    /// `max (|v_m| - u_m)` after the step into `m`.
    pub domination_excess: f64,
    pub typed_balls: usize,
    pub balls: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeRun {
    pub b: f64,
    pub steps: Vec<ConeStep>,
    /// `exp` of the least-squares slope of `log int |v_m|^2 dmu` in `m`.
    pub beta_hat: f64,
    pub uni_degenerate: bool,
    pub below_threshold: bool,
    pub all_in_cone: bool,
}

/// `u_0 = 1`, `v_0 = v/|v|_inf`, `u_{m+1} = L_sigma^{n0}(chi_m u_m)`,
/// `v_{m+1} = L_s^{n0} v_m`. The invariant measure is `eig.f` Lebesgue,
/// which is `mu` when `sigma = 0`.
pub fn cone_iterate(
    model: &ModelSystem,
    tp: &TwistParameter,
    eig: &EigenData,
    setup: &CancelSetup,
    v0: &GridFunction,
    m_max: usize,
) -> Result<ConeRun> {
    if tp.b.abs() < 1.0 {
        return Err(Error::Precondition("cone iteration needs |b| >= 1".into()));
    }
    let alpha = model.family.alpha;
    let sup = v0.sup_norm();
    if !(sup > 0.0) {
        return Err(Error::Precondition("v0 must be nonzero".into()));
    }
    let nodes = eig.f.nodes();
    let mut pair = ConePair {
        u: GridFunction::constant(model.dim(), nodes, Complex64::new(1.0, 0.0)),
        v: v0.scale(Complex64::new(1.0 / sup, 0.0)),
    };
    let family0 = if setup.degenerate() {
        None
    } else {
        Some(ball_family(tp.b, setup.delta, setup.e, model.dim())?)
    };
    let mu = &eig.f;
    let mut steps = Vec::with_capacity(m_max + 1);
    let mut excess = f64::NEG_INFINITY;
    let mut typed = 0;
    let mut balls = 0;
    for m in 0..=m_max {
        let check = cone_check(&pair, tp.b, setup.c4, alpha);
        let l2_u = pair.u.map(|z| z * z).integrate_against(mu).re;
        let l2_v = pair.v.map(|z| Complex64::new(z.norm_sqr(), 0.0)).integrate_against(mu).re;
        steps.push(ConeStep {
            m,
            l2_u,
            l2_v,
            cone_ok: check.ok,
            check,
            domination_excess: excess,
            typed_balls: typed,
            balls,
        });
        if m == m_max {
            break;
        }
        let chi = match &family0 {
            Some(f0) => {
                let mut family = f0.clone();
                assign_types(model, tp, eig, setup, &mut family, &pair)?;
                typed = family.typed_count();
                balls = family.balls.len();
                chi_cutoff(model, &family, setup, nodes)?
            }
            None => untyped_chi(setup),
        };
        pair = damped_step(model, tp, eig, setup, &chi, &pair)?;
        excess = pair
            .v
            .values()
            .iter()
            .zip(pair.u.values())
            .fold(f64::NEG_INFINITY, |mx, (v, u)| mx.max(v.norm() - u.re));
    }
    let pts: Vec<(f64, f64)> = steps
        .iter()
        .filter(|s| s.l2_v > 1e-28)
        .map(|s| (s.m as f64, s.l2_v.ln()))
        .collect();
    let beta_hat = if pts.len() >= 2 {
        linear_fit(&pts).slope.exp()
    } else {
        0.0
    };
    Ok(ConeRun {
        b: tp.b,
        all_in_cone: steps.iter().all(|s| s.cone_ok),
        steps,
        beta_hat,
        uni_degenerate: setup.degenerate(),
        below_threshold: family0.as_ref().map(|f| f.below_threshold).unwrap_or(true),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FedReport {
    pub trials: usize,
    pub k: f64,
    /// `mu(B_hat)`.
    pub hat_measure: f64,
    /// `min int_{B_hat} w dmu / int_Y w dmu` over the trials.
    pub c1_hat: f64,
}

/// Lower bound `int_{B_hat} w dmu >= c1 int_Y w dmu` over random positive `w`
/// with `|log w|_alpha <= K |b|^alpha`.
pub fn prop_fed_probe(
    model: &ModelSystem,
    eig: &EigenData,
    family: &BallFamily,
    k: f64,
    trials: usize,
    seed: u64,
) -> Result<FedReport> {
    let nodes = eig.f.nodes();
    let dim = model.dim();
    let alpha = model.family.alpha;
    let mut indicator = vec![Complex64::new(0.0, 0.0); eig.f.len()];
    for ball in &family.balls {
        for idx in nodes_in_ball(dim, nodes, &ball.shifted, 0.5 * ball.radius) {
            indicator[idx] = Complex64::new(1.0, 0.0);
        }
    }
    let ind = eig.f.like(indicator);
    let hat_measure = ind.integrate_against(&eig.f).re;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c1_hat = f64::INFINITY;
    let bound = k * family.b.abs().powf(alpha);
    for _ in 0..trials {
        let a = random_trig(dim, nodes, 4, &mut rng);
        let scale = rng.random_range(0.0..1.0) * bound / a.seminorm(alpha).max(1e-12);
        let w = a.map(|z| Complex64::new((scale * z.re).exp(), 0.0));
        let wf = w.zip_with(&eig.f, |a, b| a * b);
        let total = wf.integrate().re;
        let part = wf.integrate_against(&ind).re;
        c1_hat = c1_hat.min(part / total);
    }
    Ok(FedReport {
        trials,
        k,
        hat_measure,
        c1_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_constants() {
        let f = ball_family(200.0, 1.0, 0.5, 1).unwrap();
        assert!((f.big_delta - 8.0 * PI).abs() < 1e-12);
        assert!((f.e_prime - 32.0 * PI).abs() < 1e-12);
        assert!((f.balls[0].radius - 1.0 / 200.0).abs() < 1e-15);
        assert!((f.exclusion - (1.0 + 8.0 * PI) / 200.0).abs() < 1e-15);
        for (i, a) in f.balls.iter().enumerate() {
            assert!(a.center[0] - f.exclusion >= -1e-15 && a.center[0] + f.exclusion <= 1.0 + 1e-15);
            for b in &f.balls[i + 1..] {
                assert!(dist(&a.center, &b.center) >= 2.0 * f.exclusion - 1e-15);
            }
        }
        assert!(ball_family(40.0, 0.5, 0.5, 1).unwrap().balls.is_empty());
        assert!(ball_family(200.0, 30.0, 0.5, 1).is_err());
    }

    #[test]
    fn smooth_step_profile() {
        assert_eq!(smooth_step(0.0).0, 0.0);
        assert_eq!(smooth_step(1.0).0, 1.0);
        let (s, d) = smooth_step(0.5);
        assert!((s - 0.5).abs() < 1e-15 && (d - 2.0).abs() < 1e-12);
        let (inner, _) = bump(&[0.5, 0.0], 0.1, &[0.52, 0.0]);
        assert_eq!(inner, 1.0);
        assert_eq!(bump(&[0.5, 0.0], 0.1, &[0.61, 0.0]).0, 0.0);
    }
}
