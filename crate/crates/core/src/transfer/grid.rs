use crate::models::Point;
use num_complex::Complex64;
use rayon::prelude::*;

/// Complex samples on the uniform node grid `{i/(n-1)}^dim` of `[0,1]^dim`,
/// row-major with axis 0 slowest. Off-node values use multilinear
/// interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    dim: usize,
    nodes: usize,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn from_values(dim: usize, nodes: usize, values: Vec<Complex64>) -> Self {
        assert!(dim == 1 || dim == 2, "grid dimension must be 1 or 2");
        assert!(nodes >= 2);
        assert_eq!(values.len(), nodes.pow(dim as u32));
        Self { dim, nodes, values }
    }

    pub fn from_fn<F>(dim: usize, nodes: usize, f: F) -> Self
    where
        F: Fn(&Point) -> Complex64 + Sync,
    {
        let total = nodes.pow(dim as u32);
        let values = (0..total)
            .into_par_iter()
            .map(|k| f(&node_point(dim, nodes, k)))
            .collect();
        Self::from_values(dim, nodes, values)
    }

    pub fn from_real_fn<F>(dim: usize, nodes: usize, f: F) -> Self
    where
        F: Fn(&Point) -> f64 + Sync,
    {
        Self::from_fn(dim, nodes, |y| Complex64::new(f(y), 0.0))
    }

    pub fn constant(dim: usize, nodes: usize, c: Complex64) -> Self {
        Self::from_values(dim, nodes, vec![c; nodes.pow(dim as u32)])
    }

    pub fn like(&self, values: Vec<Complex64>) -> Self {
        Self::from_values(self.dim, self.nodes, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.nodes - 1) as f64
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn node(&self, k: usize) -> Point {
        node_point(self.dim, self.nodes, k)
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.re).collect()
    }

    /// Multilinear interpolation; arguments are clamped to `[0,1]`.
    pub fn eval(&self, x: &Point) -> Complex64 {
        stencil(self.dim, self.nodes, x).apply(&self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn min_re(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, z| m.min(z.re))
    }

    pub fn max_re(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, z| m.max(z.re))
    }

    /// Hölder seminorm estimate from node pairs at separations `2^-j`
    /// (`j = 2..q`, down to the grid step) along each axis. A lower bound of
    /// the continuum seminorm of the interpolant.
    pub fn seminorm(&self, alpha: f64) -> f64 {
        self.pair_sup(alpha, |a, b| (a - b).norm())
    }

    /// Max over the same pairs of `|g(v(x), v(y))| / d(x,y)^alpha`.
    pub(crate) fn pair_sup<G>(&self, alpha: f64, g: G) -> f64
    where
        G: Fn(Complex64, Complex64) -> f64 + Sync,
    {
        let v = &self.values;
        self.pair_sup_idx(alpha, |a, b| g(v[a], v[b]))
    }

    /// Max over node pairs `(a, b)` at dyadic separations, in both orders,
    /// of `g(a, b) / d(a,b)^alpha`.
    pub(crate) fn pair_sup_idx<G>(&self, alpha: f64, g: G) -> f64
    where
        G: Fn(usize, usize) -> f64 + Sync,
    {
        let n = self.nodes;
        let h = self.step();
        let shifts: Vec<usize> = std::iter::successors(Some(1usize), |k| Some(k * 2))
            .take_while(|k| *k == 1 || *k <= (n - 1) / 4)
            .collect();
        shifts
            .par_iter()
            .map(|&k| {
                let scale = (k as f64 * h).powf(alpha);
                let mut best: f64 = 0.0;
                let mut pair = |a: usize, b: usize| {
                    best = best.max(g(a, b)).max(g(b, a));
                };
                if self.dim == 1 {
                    for i in 0..n - k {
                        pair(i + k, i);
                    }
                } else {
                    for i in 0..n {
                        for j in 0..n {
                            if j + k < n {
                                pair(i * n + j + k, i * n + j);
                            }
                            if i + k < n {
                                pair((i + k) * n + j, i * n + j);
                            }
                        }
                    }
                }
                best / scale
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Trapezoid rule on the node grid.
    pub fn integrate(&self) -> Complex64 {
        let w = trapezoid_weights(self.nodes);
        let n = self.nodes;
        if self.dim == 1 {
            self.values.iter().zip(&w).map(|(v, w)| v * w).sum()
        } else {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| self.values[i * n + j] * w[j])
                        .sum::<Complex64>()
                        * w[i]
                })
                .sum()
        }
    }

    /// `int v w dLeb` by the trapezoid rule.
    pub fn integrate_against(&self, w: &GridFunction) -> Complex64 {
        self.zip_with(w, |a, b| a * b).integrate()
    }

    pub fn map<F: Fn(Complex64) -> Complex64 + Sync>(&self, f: F) -> Self {
        self.like(self.values.par_iter().map(|z| f(*z)).collect())
    }

    pub fn zip_with<F>(&self, other: &GridFunction, f: F) -> Self
    where
        F: Fn(Complex64, Complex64) -> Complex64 + Sync,
    {
        assert_eq!(self.values.len(), other.values.len(), "grid mismatch");
        self.like(
            self.values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(a, b)| f(*a, *b))
                .collect(),
        )
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(|z| z * c)
    }
}

/// Interpolation nodes and weights of a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stencil {
    pub idx: [usize; 4],
    pub w: [f64; 4],
    pub len: usize,
}

impl Stencil {
    pub fn apply(&self, v: &[Complex64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.len {
            acc += v[self.idx[k]] * self.w[k];
        }
        acc
    }
}

pub(crate) fn stencil(dim: usize, nodes: usize, x: &Point) -> Stencil {
    let m = (nodes - 1) as f64;
    let locate = |c: f64| {
        let t = c.clamp(0.0, 1.0) * m;
        let i = (t.floor() as usize).min(nodes - 2);
        (i, t - i as f64)
    };
    let (i, a) = locate(x[0]);
    if dim == 1 {
        Stencil {
            idx: [i, i + 1, 0, 0],
            w: [1.0 - a, a, 0.0, 0.0],
            len: 2,
        }
    } else {
        let (j, b) = locate(x[1]);
        let n = nodes;
        Stencil {
            idx: [i * n + j, i * n + j + 1, (i + 1) * n + j, (i + 1) * n + j + 1],
            w: [(1.0 - a) * (1.0 - b), (1.0 - a) * b, a * (1.0 - b), a * b],
            len: 4,
        }
    }
}

pub(crate) fn node_point(dim: usize, nodes: usize, k: usize) -> Point {
    let m = (nodes - 1) as f64;
    if dim == 1 {
        [k as f64 / m, 0.0]
    } else {
        [(k / nodes) as f64 / m, (k % nodes) as f64 / m]
    }
}

pub(crate) fn trapezoid_weights(nodes: usize) -> Vec<f64> {
    let h = 1.0 / (nodes - 1) as f64;
    let mut w = vec![h; nodes];
    w[0] = h / 2.0;
    w[nodes - 1] = h / 2.0;
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_reproduces_nodes() {
        let g = GridFunction::from_real_fn(2, 17, |y| (3.0 * y[0]).sin() + y[1] * y[1]);
        for k in [0, 5, 100, 288] {
            let p = g.node(k);
            assert_eq!(g.eval(&p), g.values()[k]);
        }
        let l = GridFunction::from_real_fn(1, 9, |y| 2.0 * y[0] + 1.0);
        assert!((l.eval(&[0.3, 0.0]).re - 1.6).abs() < 1e-14);
    }

    #[test]
    fn seminorm_of_identity() {
        let g = GridFunction::from_real_fn(1, 1025, |y| y[0]);
        assert!((g.seminorm(1.0) - 1.0).abs() < 1e-12);
        assert_eq!(GridFunction::constant(1, 65, Complex64::new(2.0, 1.0)).seminorm(1.0), 0.0);
    }

    #[test]
    fn trapezoid_exact_for_bilinear() {
        let g = GridFunction::from_real_fn(2, 33, |y| 1.0 + y[0] + 2.0 * y[0] * y[1]);
        assert!((g.integrate().re - 2.0).abs() < 1e-13);
    }
}
