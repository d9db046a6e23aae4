use markov_tower::inducing::{build_inducing, derive_constants, markov_check, AmbientSystem, ConstantOverrides};
use markov_tower::models::{ModelSystem, Roof};
use markov_tower::semiflow::*;
use markov_tower::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(id: &str) -> ModelSystem {
    ModelSystem::builtin(id).unwrap()
}

#[test]
fn mean_roofs() {
    let b = suspend(&model("B")).unwrap();
    assert!((b.mean_roof - 2.0).abs() < 1e-9);
    let a = suspend(&model("A")).unwrap();
    assert!((a.mean_roof - (2.0 + 1.0 / 6.0)).abs() < 1e-6);
    assert!((a.normalization - 1.0).abs() < 1e-6);
    assert!(a.roof_inf > 0.0);
}

#[test]
fn unbounded_roof_defeats_rejection() {
    let d = suspend(&model("D")).unwrap();
    assert!(matches!(d.sample_stream(10, 1, 0), Err(Error::RejectionEfficiency(_))));
    assert!(sample_invariant(&d, 0, 1).unwrap().is_empty());
}

#[test]
fn constant_roof_heights_are_uniform() {
    let b = suspend(&model("B")).unwrap();
    let pts = sample_invariant(&b, 100_000, 11).unwrap();
    let mut h: Vec<f64> = pts.iter().map(|p| p.u / 2.0).collect();
    h.sort_by(f64::total_cmp);
    let n = h.len() as f64;
    let ks = h
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
        .fold(0.0, f64::max);
    assert!(ks < 0.01, "KS = {ks}");
    assert_eq!(pts, sample_invariant(&b, 100_000, 11).unwrap());
    assert!(sample_invariant(&b, 0, 11).unwrap().is_empty());
}

#[test]
fn base_marginal_is_roof_weighted() {
    // under mu^r the base marginal is r f0 / r_bar, so E[1/r] = 1/r_bar
    let a = suspend(&model("A")).unwrap();
    let pts = sample_invariant(&a, 200_000, 5).unwrap();
    let inv: Vec<f64> = pts.iter().map(|p| 1.0 / a.roof(&p.y)).collect();
    let n = inv.len() as f64;
    let mean = inv.iter().sum::<f64>() / n;
    let sd = (inv.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - 1.0 / a.mean_roof).abs() < 3.0 * sd / n.sqrt());
    assert!(pts.iter().all(|p| p.u >= 0.0 && p.u < a.roof(&p.y)));
}

#[test]
fn flow_semigroup() {
    let a = suspend(&model("C")).unwrap();
    let pts = sample_invariant(&a, 200, 3).unwrap();
    for p in &pts {
        for (t1, t2) in [(0.75, 1.5), (2.5, 0.125), (3.0, 4.25)] {
            let two = a.flow(&a.flow(p, t1).unwrap(), t2).unwrap();
            let one = a.flow(p, t1 + t2).unwrap();
            assert_eq!(one.y, two.y);
            assert_eq!(one.z, two.z);
            assert!((one.u - two.u).abs() < 1e-12);
        }
    }
    assert!(a.flow(&pts[0], -1.0).is_err());
}

#[test]
fn constant_observable_does_not_correlate() {
    let a = suspend(&model("A")).unwrap();
    let t: Vec<f64> = (0..8).map(|i| i as f64).collect();
    let s = correlation_series(
        &a,
        &Observable::Constant { value: 1.0 },
        &Observable::BaseBump { center: 0.5, width: 0.25 },
        &t,
        20_000,
        2,
    )
    .unwrap();
    for (r, e) in s.rho.iter().zip(&s.stderr) {
        assert!(r.abs() <= e.max(1e-12), "{r} vs {e}");
    }
    assert!(correlation_series(&a, &Observable::Constant { value: 1.0 }, &Observable::Constant { value: 1.0 }, &[-0.5], 10, 1).is_err());
}

#[test]
fn correlation_at_zero_is_covariance() {
    let b = suspend(&model("B")).unwrap();
    let v = Observable::HeightCos { k: 1 };
    let s = correlation_series(&b, &v, &v, &[0.0, 1.0, 2.0], 64_000, 4).unwrap();
    // rho(t) = cos(pi t) / 2 for the rotation by t on the circle of length 2
    assert!((s.rho[0] - 0.5).abs() < 4.0 * s.stderr[0]);
    assert!((s.rho[1] + s.rho[0]).abs() < 1e-12);
    assert!((s.rho[2] - s.rho[0]).abs() < 1e-12);
}

#[test]
fn observable_norms() {
    let a = suspend(&model("A")).unwrap();
    let v = Observable::Coordinate { axis: 0 };
    let n0 = v.norm_estimate(&a, 0, 33);
    let n1 = v.norm_estimate(&a, 1, 33);
    assert!(n0.is_finite() && n1 > n0);
    assert_eq!(Observable::HeightIndicator { lo: 0.2, hi: 0.4 }.flow_order(), Some(0));
}

#[test]
fn induced_suspension_from_planar_tower() {
    let amb = AmbientSystem::from_model(&model("E"), None, None).unwrap();
    let c = derive_constants(&amb, &ConstantOverrides::default()).unwrap();
    let res = build_inducing(&amb, &c, 512, 10).unwrap();
    let mk = markov_check(&res, c.lambda, &amb.p, 4096);
    let s = suspend_induced(&res, &mk).unwrap();
    assert!(s.fit.gamma < 1.0);
    assert!((s.epsilon_max + s.fit.gamma.ln()).abs() < 1e-12);
    assert!(s.exponential_moment(0.5 * s.epsilon_max).unwrap().is_finite());
    assert!(s.exponential_moment(s.epsilon_max).is_none());
    assert!(s.mean_roof >= 1.0);
}

#[test]
fn coboundary_roof_has_no_distortion() {
    let m = ModelSystem::doubling_coboundary(0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..20 {
        let (a, b) = random_pair(&m, 64, &mut rng).unwrap();
        let d = temporal_distortion(&m, &a, &b, 1e-12).unwrap();
        assert!(d.value.abs() < 1e-8, "{d:?}");
    }
}

#[test]
fn quadratic_roof_distorts_and_depths_agree() {
    let m = model("C");
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut max: f64 = 0.0;
    for _ in 0..20 {
        let (a, b) = random_pair(&m, 64, &mut rng).unwrap();
        let d = temporal_distortion(&m, &a, &b, 1e-10).unwrap();
        let coarse_bound = SkewGeometry::new(&m).unwrap().tail_bound(a.y - b.y, d.depth / 2);
        assert!(d.half_depth_gap <= coarse_bound + 1e-14, "{d:?}");
        max = max.max(d.value.abs());
    }
    assert!(max > 1e-3, "max |D| = {max}");
}

#[test]
fn same_leaf_antisymmetry() {
    let m = model("C");
    let geo = SkewGeometry::new(&m).unwrap();
    let x1 = SkewPoint { y: 0.1, history: vec![1, 0, 1, 1, 0, 0, 1] };
    let x2 = SkewPoint { y: 0.35, history: x1.history.clone() };
    let a = geo.d0(&m, &x1, x2.y, 50).unwrap();
    let b = geo.d0(&m, &x2, x1.y, 50).unwrap();
    assert!((a + b).abs() < 1e-14);
    assert!(a.abs() > 1e-3);
}

#[test]
fn telescoping_against_fitted_coboundary() {
    for m in [model("A"), ModelSystem::doubling_coboundary(0.1)] {
        let fit = cohomology_probe(&m, 16).unwrap();
        let geo = SkewGeometry::new(&m.clone().with_skew(markov_tower::models::SkewFactor::solenoid())).unwrap();
        let x = SkewPoint { y: 0.2, history: vec![0, 1, 1, 0, 1, 0, 0, 0, 1, 1] };
        let yp = 0.4;
        let n = 10;
        let zs = geo.inverse_chain(x.y, &x.history, n).unwrap();
        let zp = geo.inverse_chain(yp, &x.history, n).unwrap();
        let sum = geo.d0(&m, &x, yp, n).unwrap();
        let tele = fit.xi(x.y) - fit.xi(yp) - fit.xi(zs[n - 1]) + fit.xi(zp[n - 1]);
        assert!((sum - tele).abs() <= 2.0 * fit.residual * n as f64 + 1e-9, "{}", m.id);
    }
}

#[test]
fn quadratic_roof_is_not_a_coboundary() {
    let a = model("A");
    for deg in [8, 32, 64] {
        assert!(cohomology_probe(&a, deg).unwrap().residual > 0.01);
    }
    assert!(cohomology_probe(&model("E"), 4).is_err());
}

#[test]
fn consistency_table() {
    let rows = uni_cohomology_consistency(
        &[model("A"), model("B"), ModelSystem::doubling_coboundary(0.1)],
        CONSISTENCY_DEGREE,
        9,
    );
    assert!(rows.iter().all(|r| !r.flagged), "{rows:?}");
    assert!((rows[0].e - 0.5).abs() < 1e-9 && rows[0].residual > 0.01 && rows[0].max_abs_d > 0.0);
    assert!(rows[1].e == 0.0 && rows[1].residual < 1e-9 && rows[1].max_abs_d == 0.0);
    assert!(rows[2].e_small && rows[2].residual_small && rows[2].max_abs_d < 1e-8);
    let c = model("B").with_roof(Roof::constant(3.0));
    assert!(!uni_cohomology_consistency(&[c], 16, 1)[0].flagged);
}
