use super::commands::{
    chi_range_ok, cone_start, correlate, distortion_rows, domination_ok, eigendata, time_grid, write_cohomology,
    write_cone, write_contraction, write_correlation, CancelRow, InduceBundle, BETA_BOUND, DOMINATION_SLACK, TRANSFER_NODES,
};
use super::config::RunConfig;
use super::output::{to_json, Outputs};
use crate::error::Result;
use crate::inducing::{build_inducing, tail_fit, AmbientSystem};
use crate::models::{ModelSystem, Roof};
use crate::semiflow::{uni_cohomology_consistency, DecayVerdict, Observable, CONSISTENCY_DEGREE};
use crate::transfer::{
    cancellation_domination, cone_iterate, decay_window, leading_eigendata, mass_conservation,
    norm_contraction_probe, uni_estimate, CancelSetup, EigenOptions, TwistParameter,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

pub const CRITERIA: usize = 12;

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub summary: String,
    pub seconds: f64,
    pub details: serde_json::Value,
}

impl Criterion {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<22} {} ({:.1} s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.summary,
            self.seconds
        )
    }
}

struct Recorder {
    list: Vec<Criterion>,
    start: Instant,
}

impl Recorder {
    fn new() -> Self {
        Self {
            list: Vec::new(),
            start: Instant::now(),
        }
    }

    fn restart(&mut self) {
        self.start = Instant::now();
    }

    fn push(&mut self, id: usize, name: &'static str, pass: bool, summary: String, details: serde_json::Value) {
        let c = Criterion {
            id,
            name,
            pass,
            summary,
            seconds: self.start.elapsed().as_secs_f64(),
            details,
        };
        println!("{}", c.line());
        self.list.push(c);
        self.start = Instant::now();
    }
}

fn builtin(id: &str) -> Result<ModelSystem> {
    ModelSystem::builtin(id)
}

/// Runs criteria 1 to 11, writing their tables under `out`.
pub fn run_criteria(seed: u64, out: &mut Outputs) -> Result<Vec<Criterion>> {
    let mut rec = Recorder::new();
    let cfg = RunConfig::default();

    // 1-4: one planar inducing run
    let e = builtin("E")?;
    let bundle = InduceBundle::run(&e, &cfg, 10, 12)?;
    bundle.write_components(out, "c01_markov/components.csv")?;
    bundle.write_tails(out, "c02_tails/tails_1024.csv")?;
    bundle.write_ratios(out, "c03_ratios/ratios.csv")?;
    let secs = bundle.seconds;
    rec.push(
        1,
        "markov",
        bundle.markov.all_pass() && secs < 120.0,
        format!(
            "{} components, pass fraction {:.4}, run {:.1} s",
            bundle.markov.verdicts.len(),
            bundle.markov.pass_fraction(),
            secs
        ),
        bundle.summary(),
    );

    let amb = AmbientSystem::from_model(&e, None, None)?;
    let fine = build_inducing(&amb, &bundle.constants, 2048, 12)?;
    let fine_fit = tail_fit(&fine);
    let mut fine_rows = Vec::new();
    for &(n, leb) in &fine.tail {
        fine_rows.push(TailPair { n, leb_r_gt_n: leb });
    }
    out.csv("c02_tails/tails_2048.csv", &fine_rows)?;
    let (g1, g2) = (
        bundle.fit.as_ref().map(|f| f.gamma).unwrap_or(f64::NAN),
        fine_fit.as_ref().map(|f| f.gamma).unwrap_or(f64::NAN),
    );
    let fine_ok = fine_fit.as_ref().is_ok_and(|f| f.gamma < 1.0);
    rec.push(
        2,
        "exponential_tail",
        bundle.tail_ok() && fine_ok && (g1 - g2).abs() <= 0.05,
        format!(
            "gamma {:.4} (R2 {:.4}), at 2048: {:.4}",
            g1,
            bundle.fit.as_ref().map(|f| f.r_squared).unwrap_or(f64::NAN),
            g2
        ),
        serde_json::json!({"fit_1024": bundle.fit.as_ref().ok().map(to_json),
            "fit_2048": fine_fit.as_ref().ok().map(to_json)}),
    );

    let worst = |f: fn(&crate::inducing::RatioRow) -> Option<f64>| {
        bundle.ratios.rows.iter().filter_map(f).fold(0.0f64, f64::max)
    };
    rec.restart();
    rec.push(
        3,
        "ratio_bounds",
        bundle.ratios.all_ok(),
        format!(
            "max ratio (b) {:.4}, (c) {:.4}, a0 {:.4}",
            worst(|r| r.ratio_b),
            worst(|r| r.ratio_c),
            bundle.ratios.a0
        ),
        to_json(&bundle.ratios),
    );
    rec.push(
        4,
        "collar_census",
        bundle.census.pass(),
        format!(
            "{} collars, disjointness {}, eps {}, inconsistent {}",
            bundle.census.collars.len(),
            bundle.census.disjointness_violations,
            bundle.census.eps_violations,
            bundle.census.inconsistent
        ),
        serde_json::json!({"t_one_cells": bundle.census.t_one_cells}),
    );
    drop(bundle);
    drop(fine);

    // 5: operator sanity
    let a = builtin("A")?;
    let d = builtin("D")?;
    let mut mass_rows = Vec::new();
    for (m, nodes) in [(&a, TRANSFER_NODES), (&d, 32769), (&e, 257)] {
        let r = mass_conservation(m, nodes, 100, seed)?;
        mass_rows.push(MassRow {
            model: m.id.clone(),
            nodes,
            max_defect: r.max_defect,
        });
    }
    let mut eig_rows = Vec::new();
    for (m, nodes) in [(&a, TRANSFER_NODES), (&e, 129)] {
        let eig = eigendata(m, 0.0, nodes)?;
        eig_rows.push(EigRow {
            model: m.id.clone(),
            lambda: eig.lambda,
            max_abs_f_minus_one: eig.f.values().iter().fold(0.0, |s, z| s.max((z - 1.0).norm())),
            truncation_bound: eig.truncation_bound,
            residual: eig.residual,
        });
    }
    let deig = leading_eigendata(&d, 0.0, &EigenOptions::for_model(&d))?;
    eig_rows.push(EigRow {
        model: d.id.clone(),
        lambda: deig.lambda,
        max_abs_f_minus_one: f64::NAN,
        truncation_bound: deig.truncation_bound,
        residual: deig.residual,
    });
    out.csv("c05_operator/mass.csv", &mass_rows)?;
    out.csv("c05_operator/eigen.csv", &eig_rows)?;
    let mass_ok = mass_rows.iter().all(|r| r.max_defect <= 1e-8);
    let eig_ok = eig_rows[..2]
        .iter()
        .all(|r| (r.lambda - 1.0).abs() <= 1e-6 && r.max_abs_f_minus_one <= 1e-6);
    let d_ok = deig.truncation_bound < 1e-10;
    rec.push(
        5,
        "operator_sanity",
        mass_ok && eig_ok && d_ok,
        format!(
            "max mass defect {:.2e}, max |lambda - 1| {:.2e}, D tail {:.2e}",
            mass_rows.iter().fold(0.0f64, |s, r| s.max(r.max_defect)),
            eig_rows[..2].iter().fold(0.0f64, |s, r| s.max((r.lambda - 1.0).abs())),
            deig.truncation_bound
        ),
        serde_json::Value::Null,
    );

    // 6: UNI
    let b_model = builtin("B")?;
    let ua = uni_estimate(&a, &[0], &[1], None, 4097)?;
    let ub = uni_estimate(&b_model, &[0], &[1], None, 4097)?;
    out.csv(
        "c06_uni/uni.csv",
        &[
            UniCsv {
                model: a.id.clone(),
                e: ua.e,
                fd_max_rel_err: ua.fd_max_rel_err,
            },
            UniCsv {
                model: b_model.id.clone(),
                e: ub.e,
                fd_max_rel_err: ub.fd_max_rel_err,
            },
        ],
    )?;
    rec.push(
        6,
        "uni",
        (ua.e - 0.5).abs() <= 1e-9 && ub.e.abs() <= 1e-12 && ua.fd_max_rel_err <= 1e-4,
        format!("E(A) = {:.12}, E(B) = {:.1e}, fd error {:.1e}", ua.e, ub.e, ua.fd_max_rel_err),
        serde_json::json!({"A": to_json(&ua), "B": to_json(&ub)}),
    );

    // 7-9: cancellation, cone contraction, norm decay
    let bs = [40.0, 100.0, 400.0];
    let eig = eigendata(&a, 0.0, TRANSFER_NODES)?;
    let setup = CancelSetup::new(&a, &[0], &[1])?;
    let reps = bs
        .iter()
        .map(|&b| cancellation_domination(&a, &TwistParameter::new(0.0, b), &eig, &setup, 100, seed))
        .collect::<Result<Vec<_>>>()?;
    out.csv("c07_cancel/cancel.csv", &reps.iter().map(CancelRow::from).collect::<Vec<_>>())?;
    rec.push(
        7,
        "cancellation",
        reps.iter().all(|r| domination_ok(r) && chi_range_ok(r)),
        format!(
            "max excess {:.2e} (slack {:.0e}), chi in [{:.3}, {:.3}]",
            reps.iter().fold(f64::NEG_INFINITY, |s, r| s.max(r.max_excess)),
            DOMINATION_SLACK,
            reps.iter().fold(1.0f64, |s, r| s.min(r.chi_min)),
            reps.iter().fold(0.0f64, |s, r| s.max(r.chi_max))
        ),
        to_json(&reps),
    );

    let v0 = cone_start(1, TRANSFER_NODES);
    let runs = bs
        .iter()
        .map(|&b| cone_iterate(&a, &TwistParameter::new(0.0, b), &eig, &setup, &v0, 30))
        .collect::<Result<Vec<_>>>()?;
    write_cone(out, "c08_cone/cone.csv", &runs)?;
    rec.push(
        8,
        "l2_contraction",
        runs.iter().all(|r| r.beta_hat <= BETA_BOUND && r.all_in_cone),
        format!(
            "beta {}",
            runs.iter()
                .map(|r| format!("{:.4}@{}", r.beta_hat, r.b))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        serde_json::json!(runs
            .iter()
            .map(|r| serde_json::json!({"b": r.b, "beta_hat": r.beta_hat, "all_in_cone": r.all_in_cone}))
            .collect::<Vec<_>>()),
    );

    let probe = norm_contraction_probe(&a, &TwistParameter::new(0.0, 100.0), &eig, 30, seed)?;
    let window = decay_window(&probe);
    write_contraction(out, "c09_norm/contraction.csv", std::slice::from_ref(&probe))?;
    rec.push(
        9,
        "norm_decay",
        window.strictly_decreasing,
        format!(
            "n1 = {:?}, A = {:.3}, worst increment {:.2e}",
            window.n1, window.a_hat, window.worst_increment
        ),
        to_json(&window),
    );
    drop(eig);

    // 10: correlation dichotomy
    let t = time_grid(30.0, 0.25)?;
    let start = Instant::now();
    let coord = Observable::Coordinate { axis: 0 };
    let (sa, fa) = correlate(&a, &coord, &coord, &t, 1_000_000, seed)?;
    let secs_a = start.elapsed().as_secs_f64();
    let hc = Observable::HeightCos { k: 1 };
    let (sb, fb) = correlate(&b_model, &hc, &hc, &t, 1_000_000, seed)?;
    write_correlation(out, "c10_correlation/correlation_A.csv", &sa)?;
    write_correlation(out, "c10_correlation/correlation_B.csv", &sb)?;
    let late = sb
        .t
        .iter()
        .zip(&sb.rho)
        .filter(|(t, _)| **t > 10.0)
        .fold(0.0f64, |s, (_, r)| s.max(r.abs()));
    let a_ok = fa.verdict == DecayVerdict::Exponential && fa.c > 0.0 && fa.r_squared >= 0.9 && secs_a < 300.0;
    let b_ok = fb.verdict == DecayVerdict::NoDecayDetected && late > 0.1 * sb.rho[0].abs();
    rec.push(
        10,
        "correlation_dichotomy",
        a_ok && b_ok,
        format!(
            "A: {} c = {:.3} R2 = {:.3} ({:.1} s); B: {}, late amplitude {:.3} of rho(0)",
            fa.verdict,
            fa.c,
            fa.r_squared,
            secs_a,
            fb.verdict,
            late / sb.rho[0].abs()
        ),
        serde_json::json!({"A": to_json(&fa), "B": to_json(&fb), "A_seconds": secs_a}),
    );

    // 11: temporal distortion and cohomology
    let c = builtin("C")?;
    let constant = c.clone().with_roof(Roof::constant(2.0));
    let cob = ModelSystem::doubling_coboundary(0.1);
    let mut rows = distortion_rows(&constant, 20, 1e-12, seed)?;
    rows.extend(distortion_rows(&cob, 20, 1e-12, seed)?);
    let flat_ok = rows.iter().all(|r| r.d.abs() < 1e-8 && r.depth_agreement);
    let twisted = distortion_rows(&c, 20, 1e-10, seed)?;
    let twisted_max = twisted.iter().fold(0.0f64, |s, r| s.max(r.d.abs()));
    rows.extend(twisted);
    out.csv("c11_distortion/distortion.csv", &rows)?;
    let models = [a.clone(), b_model.clone(), cob.clone()];
    let table = uni_cohomology_consistency(&models, CONSISTENCY_DEGREE, seed);
    write_cohomology(out, "c11_distortion/cohomology.csv", &table)?;
    let flags = table.iter().filter(|r| r.flagged).count();
    rec.push(
        11,
        "distortion_cohomology",
        flat_ok && twisted_max > 1e-3 && flags == 0,
        format!(
            "flat roofs max |D| {:.1e}, model C max |D| {:.3}, {} flagged",
            rows[..40].iter().fold(0.0f64, |s, r| s.max(r.d.abs())),
            twisted_max,
            flags
        ),
        to_json(&table),
    );
    Ok(rec.list)
}

/// Byte comparison of every CSV written by two runs.
pub fn compare_outputs(first: &Outputs, second: &Outputs) -> Result<Vec<String>> {
    let mut mismatched = Vec::new();
    if first.files.len() != second.files.len() {
        mismatched.push(format!("{} vs {} files", first.files.len(), second.files.len()));
    }
    for f in &first.files {
        let a = std::fs::read(first.root().join(&f.path))?;
        let b = std::fs::read(second.root().join(&f.path)).unwrap_or_default();
        if a != b {
            mismatched.push(f.path.clone());
        }
    }
    Ok(mismatched)
}

/// Full suite: criteria 1 to 11, then (unless `rerun` is false) a second
/// run into `rerun/` whose CSVs must match byte for byte.
pub fn run_suite(seed: u64, out: &mut Outputs, rerun: bool) -> Result<Vec<Criterion>> {
    let mut list = run_criteria(seed, out)?;
    if !rerun {
        return Ok(list);
    }
    let start = Instant::now();
    println!("re-running criteria 1-11 for the determinism check");
    let dir = out.root().join("rerun");
    if dir.exists() {
        std::fs::remove_dir_all(&dir)?;
    }
    let mut second = Outputs::new(&dir)?;
    run_criteria(seed, &mut second)?;
    let mismatched = compare_outputs(out, &second)?;
    let c = Criterion {
        id: 12,
        name: "determinism",
        pass: mismatched.is_empty(),
        summary: if mismatched.is_empty() {
            format!("{} CSV files identical", out.files.len())
        } else {
            format!("differs: {}", mismatched.join(", "))
        },
        seconds: start.elapsed().as_secs_f64(),
        details: serde_json::json!({"mismatched": mismatched}),
    };
    println!("{}", c.line());
    list.push(c);
    Ok(list)
}

pub fn verdict_key(c: &Criterion) -> String {
    format!("c{:02}_{}", c.id, c.name)
}

pub fn summarize(list: &[Criterion]) -> (BTreeMap<String, bool>, serde_json::Value) {
    let verdicts = list.iter().map(|c| (verdict_key(c), c.pass)).collect();
    (verdicts, to_json(&list))
}

#[derive(Serialize)]
struct TailPair {
    n: usize,
    #[serde(rename = "leb_R_gt_n")]
    leb_r_gt_n: f64,
}

#[derive(Serialize)]
struct MassRow {
    model: String,
    nodes: usize,
    max_defect: f64,
}

#[derive(Serialize)]
struct EigRow {
    model: String,
    lambda: f64,
    max_abs_f_minus_one: f64,
    truncation_bound: f64,
    residual: f64,
}

#[derive(Serialize)]
struct UniCsv {
    model: String,
    e: f64,
    fd_max_rel_err: f64,
}
