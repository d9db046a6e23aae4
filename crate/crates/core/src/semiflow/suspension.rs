use crate::error::{Error, Result};
use crate::inducing::{tail_fit, InducingResult, MarkovReport, TailFit};
use crate::models::{verify_gibbs_markov, Fiber, GibbsMarkovOptions, ModelSystem, Point};
use crate::transfer::{leading_eigendata, EigenOptions, GridFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Points drawn per independent random stream.
pub const STREAM_LEN: usize = 1 << 14;

/// Suspension `Y^r` (or `X^r` when the model carries a skew factor) over a
/// model with invariant base density `f0`.
#[derive(Debug, Clone)]
pub struct SuspensionSystem {
    pub model: ModelSystem,
    pub density: GridFunction,
    pub density_max: f64,
    pub roof_inf: f64,
    pub roof_sup: f64,
    /// `r_bar = int r dmu`.
    pub mean_roof: f64,
    /// `int dmu^r`; one up to quadrature error.
    pub normalization: f64,
}

/// Point `(y, u)` of the suspension, with fiber coordinate when present.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowPoint {
    pub y: Point,
    pub u: f64,
    pub z: Option<Fiber>,
}

fn grid_points(dim: usize, n: usize) -> Vec<Point> {
    let c = |i: usize| i as f64 / (n - 1) as f64;
    if dim == 1 {
        (0..n).map(|i| [c(i), 0.0]).collect()
    } else {
        (0..n).flat_map(|i| (0..n).map(move |j| [c(i), c(j)])).collect()
    }
}

/// Builds the suspension after checking the standing conditions; `f0` comes
/// from the leading eigenfunction of the real transfer operator.
pub fn suspend(model: &ModelSystem) -> Result<SuspensionSystem> {
    let rep = verify_gibbs_markov(model, &GibbsMarkovOptions::new(64))?;
    if !rep.all_pass() {
        return Err(Error::Precondition(format!("model `{}` fails the Gibbs-Markov checks", model.id)));
    }
    let nodes = if model.dim() == 1 { 2049 } else { 129 };
    let eig = leading_eigendata(
        model,
        0.0,
        &EigenOptions {
            nodes,
            ..EigenOptions::for_model(model)
        },
    )?;
    let density = eig.f;
    let roof = GridFunction::from_real_fn(model.dim(), nodes, |y: &Point| model.roof_at(y));
    let pts = grid_points(model.dim(), nodes);
    let (mut inf, mut sup) = (f64::INFINITY, 0.0f64);
    for y in &pts {
        let r = model.roof_at(y);
        inf = inf.min(r);
        sup = sup.max(r);
    }
    if !(inf > 0.0) {
        return Err(Error::Precondition(format!("roof infimum {inf} is not positive")));
    }
    let mean_roof = roof.integrate_against(&density).re;
    let normalization = density.integrate().re;
    let density_max = density.max_re();
    Ok(SuspensionSystem {
        model: model.clone(),
        density,
        density_max,
        roof_inf: inf,
        roof_sup: sup,
        mean_roof,
        normalization,
    })
}

impl SuspensionSystem {
    pub fn roof(&self, y: &Point) -> f64 {
        self.model.roof_at(y)
    }

    /// Expected acceptance rate of the rejection sampler.
    pub fn rejection_efficiency(&self) -> f64 {
        if !self.roof_sup.is_finite() {
            return 0.0;
        }
        self.mean_roof / (self.density_max * self.roof_sup)
    }

    /// `F_t` (or `f_t` on `X^r`) by explicit roof crossings.
    pub fn flow(&self, p: &FlowPoint, t: f64) -> Result<FlowPoint> {
        if t < 0.0 {
            return Err(Error::Precondition(format!("negative time {t}")));
        }
        let mut q = *p;
        q.u += t;
        loop {
            let r = self.roof(&q.y);
            if q.u < r {
                return Ok(q);
            }
            q.u -= r;
            if let (Some(z), Some(g)) = (q.z, self.model.skew) {
                q.z = Some(g.apply(q.y[0], &z));
            }
            q.y = self
                .model
                .forward(&q.y)
                .ok_or_else(|| Error::OutOfDomain(q.y[..self.model.dim()].to_vec()))?;
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> FlowPoint {
        let dim = self.model.dim();
        let bound = self.density_max * self.roof_sup;
        loop {
            let mut y = [rng.random::<f64>(), 0.0];
            if dim == 2 {
                y[1] = rng.random();
            }
            let w = self.density.eval(&y).re * self.roof(&y);
            if rng.random::<f64>() * bound < w {
                let u = rng.random::<f64>() * self.roof(&y);
                let z = self.model.skew.map(|_| [2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0]);
                return FlowPoint { y, u, z };
            }
        }
    }

    /// `count` points from the stream `(seed, stream)`.
    pub fn sample_stream(&self, count: usize, seed: u64, stream: u64) -> Result<Vec<FlowPoint>> {
        let eff = self.rejection_efficiency();
        if count > 0 && !(eff >= 0.01) {
            return Err(Error::RejectionEfficiency(eff));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Ok((0..count).map(|_| self.draw(&mut rng)).collect())
    }
}

/// `n` points distributed as `mu^r`; the fiber coordinate, when present, is
/// uniform on `Z`.
pub fn sample_invariant(system: &SuspensionSystem, n: usize, seed: u64) -> Result<Vec<FlowPoint>> {
    let streams = n.div_ceil(STREAM_LEN);
    let parts: Result<Vec<Vec<FlowPoint>>> = (0..streams)
        .into_par_iter()
        .map(|s| system.sample_stream(STREAM_LEN.min(n - s * STREAM_LEN), seed, s as u64))
        .collect();
    Ok(parts?.concat())
}

/// Roof of a first-return structure: `r(x) = sum_{l < N(x)} tau(g^l x)`.
pub fn first_return_roof<T, G, P>(x: &P, returns: usize, tau: T, g: G) -> f64
where
    T: Fn(&P) -> f64,
    G: Fn(&P) -> P,
    P: Clone,
{
    let mut p = x.clone();
    let mut sum = 0.0;
    for l in 0..returns {
        sum += tau(&p);
        if l + 1 < returns {
            p = g(&p);
        }
    }
    sum
}

/// Suspension over an inducing result with `r = R` (unit ambient roof, so
/// `r` is the first-return roof with `N = R`).
#[derive(Debug, Clone, Serialize)]
pub struct InducedSuspension {
    pub fit: TailFit,
    /// `(n, Leb(R > n) / Leb(Y))`.
    pub tail: Vec<(usize, f64)>,
    /// Every `epsilon` below this has `int e^{epsilon R} dLeb < infinity`.
    pub epsilon_max: f64,
    pub mean_roof: f64,
}

impl InducedSuspension {
    pub fn from_tail(tail: &[(usize, f64)], fit: TailFit) -> Result<Self> {
        if !(fit.gamma < 1.0 && fit.gamma > 0.0) {
            return Err(Error::Precondition(format!(
                "tail rate {} does not certify an exponential roof tail",
                fit.gamma
            )));
        }
        let total = tail.first().map(|t| t.1).filter(|&v| v > 0.0).ok_or_else(|| {
            Error::InsufficientData("empty return-time tail".into())
        })?;
        let tail: Vec<(usize, f64)> = tail.iter().map(|&(n, v)| (n, v / total)).collect();
        let epsilon_max = -fit.gamma.ln();
        let mut s = Self {
            fit,
            tail,
            epsilon_max,
            mean_roof: 0.0,
        };
        // int R = sum_{n>=0} Leb(R > n)
        s.mean_roof = s.tail.iter().map(|t| t.1).sum::<f64>() + s.extrapolated_tail(0.0, true);
        Ok(s)
    }

    fn last(&self) -> (usize, f64) {
        *self.tail.last().expect("nonempty tail")
    }

    /// Geometric continuation past the table of either `sum Leb(R > n)` or
    /// `sum e^{eps n} Leb(R = n)`.
    fn extrapolated_tail(&self, eps: f64, survival: bool) -> f64 {
        let (n, v) = self.last();
        let q = eps.exp() * self.fit.gamma;
        let first = if survival { v * self.fit.gamma } else { v * (eps * (n as f64 + 1.0)).exp() * (1.0 - self.fit.gamma) };
        first / (1.0 - q)
    }

    /// `int e^{eps R} dLeb / Leb(Y)`, or `None` when the fitted tail makes it
    /// diverge.
    pub fn exponential_moment(&self, eps: f64) -> Option<f64> {
        if eps >= self.epsilon_max {
            return None;
        }
        let mut sum = 0.0;
        for w in self.tail.windows(2) {
            let (n, _) = w[1];
            sum += (eps * n as f64).exp() * (w[0].1 - w[1].1);
        }
        Some(sum + self.extrapolated_tail(eps, false))
    }
}

/// Suspension over an inducing result that passed the Markov check.
pub fn suspend_induced(result: &InducingResult, markov: &MarkovReport) -> Result<InducedSuspension> {
    if !markov.all_pass() {
        return Err(Error::Precondition("inducing result fails the Markov check".into()));
    }
    InducedSuspension::from_tail(&result.tail, tail_fit(result)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_return_roof_sums_along_orbit() {
        let r = first_return_roof(&0.1f64, 3, |x| *x, |x| 2.0 * x);
        assert!((r - 0.7).abs() < 1e-15);
        assert_eq!(first_return_roof(&0.3f64, 1, |x| *x + 2.0, |x| *x), 2.3);
    }

    #[test]
    fn geometric_tail_moment() {
        let g: f64 = 0.6;
        let tail: Vec<(usize, f64)> = (0..=12).map(|n| (n, g.powi(n as i32))).collect();
        let fit = crate::inducing::tail_fit_table(&tail, 1e-9, 1.0).unwrap();
        let s = InducedSuspension::from_tail(&tail, fit).unwrap();
        assert!((s.epsilon_max + g.ln()).abs() < 1e-9);
        // R geometric on {1,2,...}: E R = 1/(1-g), E e^{eR} = (1-g)e^e/(1-g e^e)
        assert!((s.mean_roof - 1.0 / (1.0 - g)).abs() < 1e-9);
        let e: f64 = 0.3;
        let exact = (1.0 - g) * e.exp() / (1.0 - g * e.exp());
        assert!((s.exponential_moment(e).unwrap() - exact).abs() < 1e-9);
        assert!(s.exponential_moment(0.52).is_none());
    }
}
