//! The inductive construction of `R` on a cell grid over `Y = B_delta(p)`.
//!
//! Every set is a set of cells, classified by the cell center. A cell's
//! forward orbit `phi_n(y)` is advanced one step per generation; two cells
//! belong to the same candidate `U^L_{nj}` when they share the itinerary of
//! length `n` and land in `D_L`.

use super::constants::{annulus_index, AmbientSystem, InducingConstants};
use super::edt::squared_distance;
use crate::error::{Error, Result};
use crate::models::Point;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;

pub const OUTSIDE: u8 = 0;
pub const LIVE: u8 = 1;
pub const FINISHED: u8 = 2;

pub const NO_COMPONENT: u32 = u32::MAX;

/// Uniform grid of `m^dim` cells on the box `[p - delta, p + delta]^dim`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellGrid {
    pub dim: usize,
    pub m: usize,
    pub h: f64,
    pub origin: Point,
}

impl CellGrid {
    pub fn new(dim: usize, m: usize, p: &Point, delta: f64) -> Self {
        let mut origin = [0.0, 0.0];
        for i in 0..dim {
            origin[i] = p[i] - delta;
        }
        Self {
            dim,
            m,
            h: 2.0 * delta / m as f64,
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn center(&self, k: usize) -> Point {
        if self.dim == 1 {
            [self.origin[0] + (k as f64 + 0.5) * self.h, 0.0]
        } else {
            let (i, j) = (k / self.m, k % self.m);
            [
                self.origin[0] + (i as f64 + 0.5) * self.h,
                self.origin[1] + (j as f64 + 0.5) * self.h,
            ]
        }
    }

    /// Cell containing `x`, if inside the box.
    pub fn locate(&self, x: &Point) -> Option<usize> {
        let idx = |a: usize| {
            let t = ((x[a] - self.origin[a]) / self.h).floor();
            (t >= 0.0 && t < self.m as f64).then_some(t as usize)
        };
        if self.dim == 1 {
            idx(0)
        } else {
            Some(idx(0)? * self.m + idx(1)?)
        }
    }

    /// Cells whose centers lie in the open ball `B_r(c)`, or `None` if the
    /// ball leaves the box.
    pub fn cells_in_ball(&self, c: &Point, r: f64) -> Option<Vec<usize>> {
        let span = |a: usize| {
            let lo = ((c[a] - r - self.origin[a]) / self.h - 0.5).ceil();
            let hi = ((c[a] + r - self.origin[a]) / self.h - 0.5).floor();
            (lo.max(0.0) as usize, hi.min(self.m as f64 - 1.0))
        };
        for a in 0..self.dim {
            if c[a] - r < self.origin[a] || c[a] + r > self.origin[a] + self.m as f64 * self.h {
                return None;
            }
        }
        let mut out = Vec::new();
        let (i0, i1) = span(0);
        if i1 < i0 as f64 {
            return Some(out);
        }
        if self.dim == 1 {
            for i in i0..=i1 as usize {
                if (self.center(i)[0] - c[0]).abs() < r {
                    out.push(i);
                }
            }
        } else {
            let (j0, j1) = span(1);
            if j1 < j0 as f64 {
                return Some(out);
            }
            for i in i0..=i1 as usize {
                for j in j0..=j1 as usize {
                    let k = i * self.m + j;
                    let y = self.center(k);
                    if (y[0] - c[0]).hypot(y[1] - c[1]) < r {
                        out.push(k);
                    }
                }
            }
        }
        Some(out)
    }
}

/// A finished-or-collar-producing component `U^L_{nj}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Component {
    pub id: u32,
    pub birth: usize,
    /// `h_w(p)`, the preimage of `p` inside the component.
    pub center: Point,
    pub cells_l: usize,
    pub cells_1: usize,
    pub cells_2: usize,
}

/// Measure ledger for one generation `n` (sets at `n-1` against sets at `n`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GenerationRecord {
    pub n: usize,
    pub leb_a_prev: f64,
    pub leb_b_prev: f64,
    pub leb_aa: f64,
    pub leb_ab: f64,
    pub leb_ar: f64,
    pub leb_ba: f64,
    pub leb_bb: f64,
    pub leb_br: f64,
    pub leb_a: f64,
    pub leb_b: f64,
    /// `Leb(R > n)`.
    pub leb_y: f64,
    pub leb_a_eps: f64,
    pub components: usize,
    pub finished_cells: usize,
    /// Cells of `A^(eps)_{n-1}` with `t_{n-1} > 1`.
    pub eps_violations: usize,
    /// Cells of some `U^{L-1}_{nj}` lying in `B_{n-1}`.
    pub collar_violations: usize,
    /// Candidate groups whose cell set disagrees with the disk enumeration.
    pub conflicts: usize,
    /// Candidate groups rejected because the disk leaves `A^(eps)_{n-1}`.
    pub rejected: usize,
}

#[derive(Debug, Clone)]
pub struct PartitionState {
    pub grid: CellGrid,
    pub n: usize,
    pub status: Vec<u8>,
    pub t: Vec<u32>,
    /// Return time on finished cells, 0 elsewhere.
    pub r: Vec<u16>,
    /// Component of a finished cell, or the collar owner of a B cell.
    pub owner: Vec<u32>,
    /// Annulus index assigned when the cell entered its collar.
    pub k_set: Vec<u32>,
    /// `phi_n(y)` at the current generation (frozen once finished).
    pub image: Vec<Point>,
    itinerary: Vec<u64>,
    pub components: Vec<Component>,
    pub records: Vec<GenerationRecord>,
    pub y_cells: usize,
}

fn mix(h: u64, i: usize) -> u64 {
    let mut z = h ^ (i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl PartitionState {
    /// Generation 0: `Y_0 = Y`, `t_0 = 0`.
    pub fn initial(amb: &AmbientSystem, c: &InducingConstants, resolution: usize) -> Result<Self> {
        if resolution < 16 {
            return Err(Error::GridTooCoarse { got: resolution, min: 16 });
        }
        let grid = CellGrid::new(amb.dim, resolution, &amb.p, c.delta);
        let n = grid.len();
        let p = amb.p;
        let status: Vec<u8> = (0..n)
            .map(|k| {
                let y = grid.center(k);
                if (y[0] - p[0]).hypot(y[1] - p[1]) < c.delta {
                    LIVE
                } else {
                    OUTSIDE
                }
            })
            .collect();
        let y_cells = status.iter().filter(|&&s| s == LIVE).count();
        Ok(Self {
            image: (0..n).map(|k| grid.center(k)).collect(),
            grid,
            n: 0,
            status,
            t: vec![0; n],
            r: vec![0; n],
            owner: vec![NO_COMPONENT; n],
            k_set: vec![0; n],
            itinerary: vec![0; n],
            components: Vec::new(),
            records: Vec::new(),
            y_cells,
        })
    }

    pub fn leb(&self, cells: usize) -> f64 {
        cells as f64 * self.grid.cell_volume()
    }

    pub fn is_a(&self, k: usize) -> bool {
        self.status[k] == LIVE && self.t[k] == 0
    }

    pub fn is_b(&self, k: usize) -> bool {
        self.status[k] == LIVE && self.t[k] >= 1
    }

    pub fn count_a(&self) -> usize {
        (0..self.status.len()).filter(|&k| self.is_a(k)).count()
    }

    pub fn count_b(&self) -> usize {
        (0..self.status.len()).filter(|&k| self.is_b(k)).count()
    }

    pub fn count_finished(&self) -> usize {
        self.status.iter().filter(|&&s| s == FINISHED).count()
    }
}

/// One step of the construction, from generation `n-1` to `n`.
pub fn advance_generation(state: &mut PartitionState, amb: &AmbientSystem, c: &InducingConstants) -> Result<GenerationRecord> {
    let n = state.n + 1;
    let grid = state.grid.clone();
    let fam = &amb.model.family;
    let p = amb.p;
    let lam_n = amb.lambda.powi(n as i32);
    let ld = c.l as f64 * c.delta;

    // phi_n on live cells
    let status = &state.status;
    let step: Vec<Option<(usize, Point)>> = state
        .image
        .par_iter()
        .enumerate()
        .map(|(k, z)| if status[k] == LIVE { fam.forward(z) } else { None })
        .collect();
    for (k, s) in step.into_iter().enumerate() {
        if let Some((i, z)) = s {
            state.image[k] = z;
            state.itinerary[k] = mix(state.itinerary[k], i);
        } else if state.status[k] == LIVE {
            return Err(Error::OutOfDomain(state.image[k].to_vec()));
        }
    }

    // A^(eps)_{n-1}
    let a_mask: Vec<bool> = (0..grid.len()).map(|k| state.is_a(k)).collect();
    let sq = squared_distance(&a_mask, grid.m, grid.dim);
    let radius = c.epsilon * lam_n / grid.h;
    let r2 = radius * radius;
    let in_eps: Vec<bool> = (0..grid.len())
        .map(|k| state.status[k] == LIVE && sq[k] < r2)
        .collect();

    let mut rec = GenerationRecord {
        n,
        leb_a_prev: state.leb(a_mask.iter().filter(|&&a| a).count()),
        leb_b_prev: state.leb(state.count_b()),
        ..Default::default()
    };
    rec.leb_a_eps = state.leb(in_eps.iter().filter(|&&a| a).count());
    rec.eps_violations = (0..grid.len()).filter(|&k| in_eps[k] && state.t[k] > 1).count();

    // candidate groups: live cells with phi_n y in D_L, keyed by itinerary
    let dist_img = |k: usize| {
        let z = state.image[k];
        (z[0] - p[0]).hypot(z[1] - p[1])
    };
    let mut groups: HashMap<u64, Vec<usize>> = HashMap::new();
    for k in 0..grid.len() {
        if state.status[k] == LIVE && dist_img(k) < ld {
            groups.entry(state.itinerary[k]).or_default().push(k);
        }
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by_key(|g| g[0]);

    let prev_t = state.t.clone();
    let mut touched = vec![false; grid.len()];
    for cells in groups {
        let k0 = cells[0];
        let y0 = grid.center(k0);
        let z0 = state.image[k0];
        let center = [y0[0] + (p[0] - z0[0]) * lam_n, y0[1] + (p[1] - z0[1]) * lam_n];
        let rl = ld * lam_n;
        if (center[0] - p[0]).hypot(center[1] - p[1]) + rl >= c.delta {
            rec.rejected += 1;
            continue;
        }
        let disk = match grid.cells_in_ball(&center, rl) {
            Some(d) => d,
            None => {
                rec.rejected += 1;
                continue;
            }
        };
        if !disk.iter().all(|&k| in_eps[k]) {
            rec.rejected += 1;
            continue;
        }
        if disk != cells {
            rec.conflicts += 1;
        }
        let id = state.components.len() as u32;
        let mut comp = Component {
            id,
            birth: n,
            center,
            cells_l: cells.len(),
            cells_1: 0,
            cells_2: 0,
        };
        for &k in &cells {
            if touched[k] {
                rec.conflicts += 1;
                continue;
            }
            touched[k] = true;
            let d = dist_img(k);
            if d < (c.l - 1) as f64 * c.delta && prev_t[k] >= 1 {
                rec.collar_violations += 1;
            }
            let was_a = prev_t[k] == 0;
            if d < c.delta {
                state.status[k] = FINISHED;
                state.r[k] = n as u16;
                state.owner[k] = id;
                comp.cells_1 += 1;
                if was_a {
                    rec.leb_ar += 1.0;
                } else {
                    rec.leb_br += 1.0;
                }
            } else if d < 2.0 * c.delta {
                let kk = annulus_index(d, c.delta, c.lambda.powf(c.alpha)).unwrap_or(2000);
                state.t[k] = kk;
                state.k_set[k] = kk;
                state.owner[k] = id;
                comp.cells_2 += 1;
            }
        }
        if comp.cells_1 > 0 || comp.cells_2 > 0 {
            state.components.push(comp);
            rec.components += 1;
        }
    }

    // remaining live cells: A stays, B decrements
    for k in 0..grid.len() {
        if state.status[k] != LIVE {
            continue;
        }
        if !touched[k] && prev_t[k] >= 1 {
            state.t[k] = prev_t[k] - 1;
            if state.t[k] == 0 {
                state.owner[k] = NO_COMPONENT;
            }
        }
        let now_a = state.t[k] == 0;
        match (prev_t[k] == 0, now_a) {
            (true, true) => rec.leb_aa += 1.0,
            (true, false) => rec.leb_ab += 1.0,
            (false, true) => rec.leb_ba += 1.0,
            (false, false) => rec.leb_bb += 1.0,
        }
    }
    let vol = grid.cell_volume();
    rec.finished_cells = (rec.leb_ar + rec.leb_br).round() as usize;
    for v in [
        &mut rec.leb_aa,
        &mut rec.leb_ab,
        &mut rec.leb_ar,
        &mut rec.leb_ba,
        &mut rec.leb_bb,
        &mut rec.leb_br,
    ] {
        *v *= vol;
    }
    rec.leb_a = state.leb(state.count_a());
    rec.leb_b = state.leb(state.count_b());
    rec.leb_y = rec.leb_a + rec.leb_b;
    state.n = n;
    state.records.push(rec);
    Ok(rec)
}

#[derive(Debug, Clone)]
pub struct InducingResult {
    pub constants: InducingConstants,
    pub state: PartitionState,
    /// `(n, Leb(R > n))` for `n = 0..=n_max`.
    pub tail: Vec<(usize, f64)>,
}

pub fn build_inducing(amb: &AmbientSystem, c: &InducingConstants, resolution: usize, n_max: usize) -> Result<InducingResult> {
    if n_max < 1 {
        return Err(Error::Precondition("n_max must be at least 1".into()));
    }
    let mut state = PartitionState::initial(amb, c, resolution)?;
    let mut tail = vec![(0, state.leb(state.y_cells))];
    for _ in 0..n_max {
        let rec = advance_generation(&mut state, amb, c)?;
        tail.push((rec.n, rec.leb_y));
    }
    Ok(InducingResult {
        constants: *c,
        state,
        tail,
    })
}
