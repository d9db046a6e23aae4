use markov_tower::models::ModelSystem;
use markov_tower::transfer::*;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const N1: usize = 4097;

fn model(id: &str) -> ModelSystem {
    ModelSystem::builtin(id).unwrap()
}

fn one(dim: usize, nodes: usize) -> GridFunction {
    GridFunction::constant(dim, nodes, Complex64::new(1.0, 0.0))
}

fn max_dev(v: &GridFunction, f: impl Fn(&[f64; 2]) -> Complex64) -> f64 {
    (0..v.len()).map(|k| (v.values()[k] - f(&v.node(k))).norm()).fold(0.0, f64::max)
}

fn eig(m: &ModelSystem, nodes: usize) -> EigenData {
    leading_eigendata(m, 0.0, &EigenOptions { nodes, ..EigenOptions::for_model(m) }).unwrap()
}

#[test]
fn twisted_operator_closed_forms() {
    let a = model("A");
    let p1 = apply_twisted(&a, &TwistParameter::new(0.0, 0.0), &one(1, N1)).unwrap();
    assert!(max_dev(&p1, |_| Complex64::new(1.0, 0.0)) < 1e-14);
    let sigma = 0.03;
    let pb = apply_twisted(&model("B"), &TwistParameter::new(sigma, 0.0), &one(1, N1)).unwrap();
    assert!(max_dev(&pb, |_| Complex64::new((-2.0 * sigma).exp(), 0.0)) < 1e-14);
    let y = GridFunction::from_real_fn(1, N1, |p| p[0]);
    let py = apply_twisted(&a, &TwistParameter::new(0.0, 0.0), &y).unwrap();
    assert!(max_dev(&py, |p| Complex64::new((2.0 * p[0] + 1.0) / 4.0, 0.0)) < 1e-12);
    assert!(apply_twisted(&a, &TwistParameter::new(0.5, 0.0), &y).is_err());
}

#[test]
fn leading_eigendata_examples() {
    let a = eig(&model("A"), 16385);
    assert!((a.lambda - 1.0).abs() < 1e-6);
    assert!(max_dev(&a.f, |_| Complex64::new(1.0, 0.0)) < 1e-6);
    assert!(a.min_f > 0.0);
    let b = model("B");
    let opts = EigenOptions { nodes: N1, abscissa: 0.2, ..EigenOptions::for_model(&b) };
    let eb = leading_eigendata(&b, 0.1, &opts).unwrap();
    assert!((eb.lambda - (-0.2f64).exp()).abs() < 1e-12);
    let e = eig(&model("E"), 129);
    assert!((e.lambda - 1.0).abs() < 1e-6);
    assert!(max_dev(&e.f, |_| Complex64::new(1.0, 0.0)) < 1e-6);
}

#[test]
fn normalized_operator_examples() {
    let a = model("A");
    let ea = eig(&a, N1);
    let l1 = apply_normalized(&a, &TwistParameter::new(0.0, 0.0), &ea, &one(1, N1)).unwrap();
    assert!(max_dev(&l1, |_| Complex64::new(1.0, 0.0)) < 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for b in [3.0, 37.0, 100.0] {
        let tp = TwistParameter::new(0.0, b);
        for _ in 0..5 {
            let v = random_cone_pair(1, N1, b, DEFAULT_C4, 1.0, &mut rng).unwrap().v;
            let lv = apply_normalized(&a, &tp, &ea, &v).unwrap();
            assert!(lv.sup_norm() <= v.sup_norm() + 1e-6);
        }
    }
    let bm = model("B");
    let eb = eig(&bm, N1);
    let b = 2.5;
    let lb = apply_normalized(&bm, &TwistParameter::new(0.0, b), &eb, &one(1, N1)).unwrap();
    assert!(max_dev(&lb, |_| Complex64::from_polar(1.0, -2.0 * b)) < 1e-12);
}

#[test]
fn holder_norm_examples() {
    let c = GridFunction::constant(1, 1025, Complex64::new(-3.0, 0.0));
    let h = holder_norms(&c, 17.0, 0.7);
    assert_eq!((h.sup, h.seminorm, h.b_norm), (3.0, 0.0, 3.0));
    let y = GridFunction::from_real_fn(1, 1025, |p| p[0]);
    let h1 = holder_norms(&y, 1.0, 1.0);
    assert!((h1.sup - 1.0).abs() < 1e-15 && (h1.seminorm - 1.0).abs() < 1e-12);
    assert!((h1.b_norm - 1.0).abs() < 1e-12);
    assert!((holder_norms(&y, 9.0, 1.0).b_norm - 1.0).abs() < 1e-12);
}

#[test]
fn lasota_yorke_rates() {
    let a = model("A");
    let ea = eig(&a, N1);
    let r = lasota_yorke_probe(&a, &TwistParameter::new(0.0, 0.0), &ea, 8, 100, 0.5, 1).unwrap();
    assert!(r.rho_hat <= 0.55, "{r:?}");
    assert!(r.pass && r.constant_input_ratio.is_finite() && r.constant_input_ratio <= r.c3_hat + 1e-12);
    let e = model("E");
    let ee = eig(&e, 129);
    let r = lasota_yorke_probe(&e, &TwistParameter::new(0.0, 0.0), &ee, 5, 20, 1.0 / 3.0, 2).unwrap();
    assert!(r.rho_hat <= 1.0 / 3.0 + 0.05, "{r:?}");
}

#[test]
fn uni_examples() {
    let a = model("A");
    let r = uni_estimate(&a, &[0], &[1], None, N1).unwrap();
    assert!((r.e - 0.5).abs() < 1e-9 && r.fd_max_rel_err <= 1e-4 && r.smoothed_slack_ok);
    assert_eq!(uni_estimate(&a, &[0], &[0], None, N1).unwrap().e, 0.0);
    assert_eq!(uni_estimate(&model("B"), &[1, 0], &[0, 1], None, N1).unwrap().e, 0.0);
    assert!(uni_estimate(&a, &[0], &[0, 1], None, N1).is_err());
    // psi(y) = y/2 - 1/4 for the two length-one branches
    for y in [0.1, 0.4, 0.9] {
        assert!((psi(&a, &[0], &[1], &[y, 0.0]).unwrap() - (0.25 - 0.5 * y)).abs() < 1e-12
            || (psi(&a, &[0], &[1], &[y, 0.0]).unwrap() - (0.5 * y - 0.25)).abs() < 1e-12);
    }
}

fn typed_family(b: f64, seed: u64) -> (ModelSystem, EigenData, CancelSetup, BallFamily, ConePair) {
    let a = model("A");
    let ea = eig(&a, 16385);
    let setup = CancelSetup::new(&a, &[0], &[1]).unwrap();
    let mut fam = ball_family(b, setup.delta, setup.e, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pair = random_cone_pair(1, 16385, b, setup.c4, 1.0, &mut rng).unwrap();
    assign_types(&a, &TwistParameter::new(0.0, b), &ea, &setup, &mut fam, &pair).unwrap();
    (a, ea, setup, fam, pair)
}

#[test]
fn balls_receive_types_at_b_200() {
    let (_, _, _, fam, _) = typed_family(200.0, 5);
    assert!(!fam.balls.is_empty());
    assert_eq!(fam.typed_count(), fam.balls.len(), "{:?}", fam.balls.iter().map(|b| b.selection).collect::<Vec<_>>());
}

#[test]
fn chi_cutoff_range_and_single_ball() {
    let (a, _, setup, fam, _) = typed_family(400.0, 6);
    let chi = chi_cutoff(&a, &fam, &setup, 16385).unwrap();
    let g = chi.grid(&a, 16385);
    assert!(g.min_re() >= 0.75 - 1e-12 && g.max_re() <= 1.0 + 1e-12);
    assert!((chi.eta - (1.0 - 1.0 / chi.c_prime)).abs() < 1e-15);

    let ball = *fam.balls.iter().find(|b| b.kind == Some(BallType::H1)).expect("an h1 ball");
    let single = BallFamily { balls: vec![ball], ..fam.clone() };
    let chi1 = chi_cutoff(&a, &single, &setup, 16385).unwrap();
    for i in -10..=10 {
        let y = [ball.shifted[0] + 0.5 * ball.radius * i as f64 / 10.5, 0.0];
        let x = a.family.eval_word(&setup.w1, &y).unwrap().point;
        assert!((chi1.eval(&a, &x) - chi1.eta).abs() < 1e-12);
        // the other branch over the same ball is untouched
        let x2 = a.family.eval_word(&setup.w2, &y).unwrap().point;
        assert_eq!(chi1.eval(&a, &x2), 1.0);
    }

    let empty = BallFamily { balls: vec![], ..fam };
    let chi0 = chi_cutoff(&a, &empty, &setup, 16385).unwrap();
    assert_eq!(chi0.grid(&a, 1025).min_re(), 1.0);
}

#[test]
fn cone_iteration_examples() {
    let a = model("A");
    let ea = eig(&a, 16385);
    let setup = CancelSetup::new(&a, &[0], &[1]).unwrap();
    let v0 = GridFunction::from_fn(1, 16385, |y| Complex64::from_polar(2.0 + (5.0 * y[0]).sin(), 3.0 * y[0]));
    let run = cone_iterate(&a, &TwistParameter::new(0.0, 100.0), &ea, &setup, &v0, 12).unwrap();
    let s0 = &run.steps[0];
    assert_eq!(s0.m, 0);
    assert!((s0.l2_u - 1.0).abs() < 1e-9);
    assert!(run.steps.windows(2).all(|w| w[1].l2_u <= w[0].l2_u + 1e-12));
    assert!(run.beta_hat < 1.0 && run.all_in_cone && !run.uni_degenerate);

    let b = model("B");
    let eb = eig(&b, 4097);
    let sb = CancelSetup::new(&b, &[0], &[1]).unwrap();
    let v0 = GridFunction::from_fn(1, 4097, |y| Complex64::from_polar(1.0, 3.0 * y[0]));
    let rb = cone_iterate(&b, &TwistParameter::new(0.0, 100.0), &eb, &sb, &v0, 6).unwrap();
    assert!(rb.uni_degenerate);
    assert!(rb.beta_hat > 0.9, "{}", rb.beta_hat);
}

#[test]
fn norm_probe_examples() {
    let a = model("A");
    let ea = eig(&a, 4097);
    let flat = norm_contraction_probe(&a, &TwistParameter::new(0.0, 0.0), &ea, 4, 1).unwrap();
    assert!(flat.rows.iter().all(|r| (r.estimate - 1.0).abs() < 1e-6));
    let ea = eig(&a, 16385);
    let b: f64 = 100.0;
    let n = 2 * b.ln().ceil() as usize;
    let rep = norm_contraction_probe(&a, &TwistParameter::new(0.0, b), &ea, n, 2).unwrap();
    assert!(rep.estimate(n).unwrap() < 1.0);
    assert!(rep.rows.windows(2).all(|w| w[1].estimate <= w[0].estimate + DICTIONARY_NOISE));
}

#[test]
fn mass_positivity_and_measure_lower_bound() {
    for (id, nodes) in [("A", 16385), ("E", 257)] {
        let m = model(id);
        assert!(mass_conservation(&m, nodes, 100, 3).unwrap().max_defect <= 1e-8, "{id}");
    }
    let (a, ea, _, fam, _) = typed_family(400.0, 7);
    assert!(ea.min_f > 0.0);
    let fed = prop_fed_probe(&a, &ea, &fam, 1.0, 100, 8).unwrap();
    assert!(fed.c1_hat > 0.0 && fed.c1_hat <= 1.0);
}
