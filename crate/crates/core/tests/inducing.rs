use markov_tower::inducing::*;
use markov_tower::models::ModelSystem;
use markov_tower::Error;

fn setup(id: &str) -> (AmbientSystem, InducingConstants) {
    let amb = AmbientSystem::from_model(&ModelSystem::builtin(id).unwrap(), None, None).unwrap();
    let c = derive_constants(&amb, &ConstantOverrides::default()).unwrap();
    (amb, c)
}

fn dist(a: [f64; 2], b: [f64; 2], dim: usize) -> f64 {
    if dim == 1 {
        (a[0] - b[0]).abs()
    } else {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}

/// Brute-force finished set at generation `n` while nothing has finished
/// earlier: `y` finishes iff `|F^n y - p| < delta` and the preimage disk of
/// `D_L` around `h_w(p)` fits inside `Y`. `F` is `y -> s y mod 1` per axis.
fn first_generations_oracle(id: &str, s: f64, resolution: usize) {
    let (amb, c) = setup(id);
    let mut st = PartitionState::initial(&amb, &c, resolution).unwrap();
    let dim = amb.dim;
    let p = amb.p;
    let mut finished_somewhere = false;
    for n in 1..=8 {
        let rec = advance_generation(&mut st, &amb, &c).unwrap();
        let scale = s.powi(n);
        let mut expected = 0usize;
        for k in 0..st.status.len() {
            let y = st.grid.center(k);
            if dist(y, p, dim) >= c.delta {
                assert_eq!(st.status[k], OUTSIDE);
                continue;
            }
            let mut z = y;
            for _ in 0..n {
                for a in z.iter_mut().take(dim) {
                    *a = *a * s - (*a * s).floor();
                }
            }
            let mut center = [0.0; 2];
            for a in 0..dim {
                let j = (y[a] * scale).floor();
                center[a] = (p[a] + j) / scale;
            }
            let fits = dist(center, p, dim) + c.l as f64 * c.delta / scale < c.delta;
            let fin = fits && dist(z, p, dim) < c.delta;
            expected += usize::from(fin);
            assert_eq!(st.status[k] == FINISHED, fin, "{id} n={n} cell {k} y={y:?}");
            if fin {
                assert_eq!(st.r[k] as i32, n);
            }
        }
        assert_eq!(rec.finished_cells, expected);
        if expected > 0 {
            finished_somewhere = true;
            break;
        }
        assert_eq!(st.count_a(), st.y_cells, "nothing finished yet, so A is all of Y");
    }
    assert!(finished_somewhere);
}

#[test]
fn planar_first_generations_match_brute_force() {
    first_generations_oracle("E", 3.0, 512);
}

#[test]
fn doubling_first_generations_match_enumeration() {
    first_generations_oracle("A", 2.0, 1 << 14);
}

#[test]
fn zero_generations_rejected() {
    let (amb, c) = setup("E");
    assert!(matches!(build_inducing(&amb, &c, 256, 0), Err(Error::Precondition(_))));
}

#[test]
fn gauss_is_not_conformal_affine() {
    assert!(AmbientSystem::from_model(&ModelSystem::builtin("D").unwrap(), None, None).is_err());
}

#[test]
fn ledger_and_label_conservation() {
    for (id, res) in [("E", 256), ("E", 512), ("A", 1 << 12)] {
        let (amb, c) = setup(id);
        let mut st = PartitionState::initial(&amb, &c, res).unwrap();
        let census = collar_census(&st);
        assert!(census.collars.is_empty() && census.t_one_cells == 0);
        let mut prev_leb_y = st.leb(st.y_cells);
        for _ in 0..12 {
            let before = st.clone();
            let rec = advance_generation(&mut st, &amb, &c).unwrap();
            assert_eq!(st.count_a() + st.count_b() + st.count_finished(), st.y_cells);
            let tol = 1e-12;
            assert!((rec.leb_a_prev - rec.leb_aa - rec.leb_ab - rec.leb_ar).abs() < tol);
            assert!((rec.leb_b_prev - rec.leb_ba - rec.leb_bb - rec.leb_br).abs() < tol);
            assert!(rec.leb_y <= prev_leb_y + tol);
            assert!((prev_leb_y - rec.leb_y - st.leb(rec.finished_cells)).abs() < tol);
            prev_leb_y = rec.leb_y;
            // t-dynamics: decrement, refresh to an annulus index, or exit
            for k in 0..st.status.len() {
                if before.status[k] != LIVE || st.status[k] != LIVE {
                    continue;
                }
                let (t0, t1) = (before.t[k], st.t[k]);
                let refreshed = st.k_set[k] == t1 && st.owner[k] != NO_COMPONENT && t1 >= 1;
                assert!(t1 == t0.saturating_sub(1) || refreshed, "{id} cell {k}: {t0} -> {t1}");
            }
            let census = collar_census(&st);
            let rings: usize = census.collars.iter().map(|c| c.outer_ring).sum();
            assert_eq!(rings, census.t_one_cells);
            assert_eq!(census.t_one_cells, (0..st.status.len()).filter(|&k| st.is_b(k) && st.t[k] == 1).count());
        }
    }
}

#[test]
fn ratio_rows_guard_empty_denominators() {
    let (amb, c) = setup("E");
    let res = build_inducing(&amb, &c, 256, 6).unwrap();
    let rep = ratio_report(&res);
    let first = &rep.rows[0];
    assert_eq!(res.state.records[0].leb_b_prev, 0.0);
    assert!(first.ratio_a.is_none());
    assert_eq!(rep.a0, c.a0);
    assert!(rep.all_ok());
}

#[test]
fn truncated_component_is_not_onto() {
    let (amb, c) = setup("E");
    let mut res = build_inducing(&amb, &c, 512, 12).unwrap();
    let before = markov_check(&res, c.lambda, &amb.p, 4096);
    assert!(before.all_pass());
    let big = before.verdicts.iter().max_by_key(|v| v.cells).unwrap().id;
    let comp = res.state.components[big as usize].clone();
    let st = &mut res.state;
    for k in 0..st.status.len() {
        if st.status[k] == FINISHED && st.owner[k] == big && st.grid.center(k)[0] < comp.center[0] {
            st.status[k] = LIVE;
        }
    }
    let after = markov_check(&res, c.lambda, &amb.p, 4096);
    let v = after.verdicts.iter().find(|v| v.id == big).unwrap();
    assert!(!v.onto, "coverage {}", v.coverage);
    assert!(v.coverage < 0.6);
    assert!(after.verdicts.iter().filter(|w| w.id != big).all(|w| w.onto));
}

#[test]
fn doubling_components_are_markov() {
    let (amb, c) = setup("A");
    let res = build_inducing(&amb, &c, 1 << 14, 6).unwrap();
    let mk = markov_check(&res, c.lambda, &amb.p, 4096);
    assert!(!mk.verdicts.is_empty());
    assert!(mk.all_pass());
}

#[test]
fn resolution_stability() {
    let (amb, c) = setup("E");
    let coarse = build_inducing(&amb, &c, 512, 8).unwrap();
    let fine = build_inducing(&amb, &c, 1024, 8).unwrap();
    let h = coarse.state.grid.h;
    let vol = coarse.state.grid.cell_volume();
    for ((n, a), (_, b)) in coarse.tail.iter().zip(&fine.tail) {
        // two cells per boundary: the rim of Y plus the D_1 and D_2 rims of
        // every component born by generation n
        let rims: f64 = coarse
            .state
            .components
            .iter()
            .filter(|comp| comp.birth <= *n)
            .map(|comp| 2.0 * std::f64::consts::PI * 3.0 * c.delta * c.lambda.powi(comp.birth as i32) / h + 2.0)
            .sum::<f64>()
            + 2.0 * std::f64::consts::PI * c.delta / h;
        assert!((a - b).abs() <= 2.0 * rims * vol, "n = {n}: {a} vs {b}");
    }
    let (ca, fa) = (tail_fit(&coarse).unwrap(), tail_fit(&fine).unwrap());
    assert!((ca.gamma - fa.gamma).abs() < 0.05);
}

#[test]
fn keyfact_lower_bound_is_positive() {
    let (amb, c) = setup("E");
    let res = build_inducing(&amb, &c, 512, 12).unwrap();
    let k = keyfact_report(&res);
    assert!(!k.ratios.is_empty());
    assert!(k.ratios.iter().all(|(_, r)| *r > 0.0));
}
