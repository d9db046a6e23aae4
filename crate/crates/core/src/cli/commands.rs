use super::config::RunConfig;
use super::output::{to_json, Manifest, Outputs};
use crate::error::{Error, Result};
use crate::inducing::{
    build_inducing, collar_census, derive_constants, markov_check, ratio_report, tail_fit, AmbientSystem,
    CollarCensus, InducingConstants, InducingResult, MarkovReport, RatioReport, TailFit,
};
use crate::models::{list_models, ModelSystem};
use crate::semiflow::{
    correlation_series, decay_fit, random_pair, suspend, temporal_distortion, uni_cohomology_consistency,
    CorrelationSeries, DecayFit, Observable, SkewGeometry, CONSISTENCY_DEGREE,
};
use crate::transfer::{
    cancellation_domination, cone_iterate, decay_window, leading_eigendata, norm_contraction_probe, mass_conservation, uni_estimate, CancelSetup,
    ConeRun, ContractionReport, DominationReport, EigenData, EigenOptions, GridFunction, TwistParameter,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Bound used by the pointwise domination verdict.
pub const DOMINATION_SLACK: f64 = 1e-10;
/// Upper bound on the fitted cone decay factor.
pub const BETA_BOUND: f64 = 0.98;
pub const MARKOV_SAMPLES: usize = 4096;
pub const TRANSFER_NODES: usize = 16385;

pub fn model_of(cfg: &mut RunConfig, default: &str) -> Result<ModelSystem> {
    let id = cfg.model.get_or_insert_with(|| default.to_string()).clone();
    ModelSystem::resolve(&id)
}

#[derive(Serialize)]
struct TailRow {
    n: usize,
    #[serde(rename = "leb_R_gt_n")]
    leb_r_gt_n: f64,
    leb_a_n: f64,
    leb_b_n: f64,
}

#[derive(Serialize)]
struct RatioCsvRow {
    n: usize,
    ratio_a: Option<f64>,
    ratio_b: Option<f64>,
    ratio_c: Option<f64>,
    bound_ok: bool,
}

#[derive(Serialize)]
struct ComponentRow {
    id: u32,
    birth_n: usize,
    cells: usize,
    onto: bool,
    into: bool,
    injective: bool,
    coverage: f64,
}

/// One inducing run with all its reports.
pub struct InduceBundle {
    pub constants: InducingConstants,
    pub result: InducingResult,
    pub markov: MarkovReport,
    pub fit: Result<TailFit>,
    pub ratios: RatioReport,
    pub census: CollarCensus,
    pub seconds: f64,
}

impl InduceBundle {
    pub fn run(model: &ModelSystem, cfg: &RunConfig, res: u32, nmax: usize) -> Result<Self> {
        let start = std::time::Instant::now();
        if !(4..=14).contains(&res) {
            return Err(Error::Precondition(format!("res = {res} outside 4..=14")));
        }
        let amb = AmbientSystem::from_model(model, None, None)?;
        let constants = derive_constants(&amb, &cfg.constants.unwrap_or_default())?;
        let result = build_inducing(&amb, &constants, 1 << res, nmax)?;
        let markov = markov_check(&result, constants.lambda, &amb.p, MARKOV_SAMPLES);
        let fit = tail_fit(&result);
        let ratios = ratio_report(&result);
        let census = collar_census(&result.state);
        Ok(Self {
            constants,
            result,
            markov,
            fit,
            ratios,
            census,
            seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn ratio_bound_ok(&self) -> bool {
        self.ratios.all_ok()
    }

    pub fn tail_ok(&self) -> bool {
        self.fit
            .as_ref()
            .is_ok_and(|f| f.gamma < 1.0 && f.r_squared >= 0.95 && f.monotone)
    }

    pub fn write_tails(&self, out: &mut Outputs, name: &str) -> Result<()> {
        let recs = &self.result.state.records;
        let mut rows = Vec::with_capacity(self.result.tail.len());
        for &(n, leb) in &self.result.tail {
            let (a, b) = if n == 0 {
                recs.first().map(|r| (r.leb_a_prev, r.leb_b_prev)).unwrap_or((leb, 0.0))
            } else {
                let r = &recs[n - 1];
                (r.leb_a, r.leb_b)
            };
            rows.push(TailRow {
                n,
                leb_r_gt_n: leb,
                leb_a_n: a,
                leb_b_n: b,
            });
        }
        out.csv(name, &rows)
    }

    pub fn write_ratios(&self, out: &mut Outputs, name: &str) -> Result<()> {
        let rows: Vec<RatioCsvRow> = self
            .ratios
            .rows
            .iter()
            .map(|r| RatioCsvRow {
                n: r.n,
                ratio_a: r.ratio_a,
                ratio_b: r.ratio_b,
                ratio_c: r.ratio_c,
                bound_ok: r.bound_ok,
            })
            .collect();
        out.csv(name, &rows)
    }

    pub fn write_components(&self, out: &mut Outputs, name: &str) -> Result<()> {
        let rows: Vec<ComponentRow> = self
            .markov
            .verdicts
            .iter()
            .map(|v| ComponentRow {
                id: v.id,
                birth_n: v.birth,
                cells: v.cells,
                onto: v.onto,
                into: v.into,
                injective: v.injective,
                coverage: v.coverage,
            })
            .collect();
        out.csv(name, &rows)
    }

    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "components": self.markov.verdicts.len(),
            "markov_pass_fraction": self.markov.pass_fraction(),
            "tail_fit": self.fit.as_ref().ok().map(to_json),
            "census": {
                "disjointness_violations": self.census.disjointness_violations,
                "eps_violations": self.census.eps_violations,
                "inconsistent": self.census.inconsistent,
            },
            "seconds": self.seconds,
        })
    }
}

pub fn cmd_models(out: &mut Outputs, _man: &mut Manifest) -> Result<()> {
    out.csv("models.csv", &list_models())
}

fn induce_inputs(cfg: &mut RunConfig) -> Result<(ModelSystem, u32, usize)> {
    let model = model_of(cfg, "planar-triple")?;
    let res = *cfg.res.get_or_insert(10);
    let nmax = *cfg.nmax.get_or_insert(12);
    if nmax == 0 {
        return Err(Error::Precondition("--nmax must be at least 1".into()));
    }
    Ok((model, res, nmax))
}

pub fn cmd_induce(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let (model, res, nmax) = induce_inputs(cfg)?;
    let bundle = InduceBundle::run(&model, cfg, res, nmax)?;
    bundle.write_tails(out, "tails.csv")?;
    bundle.write_ratios(out, "ratios.csv")?;
    bundle.write_components(out, "components.csv")?;
    man.constants = to_json(&bundle.constants);
    man.details = bundle.summary();
    man.verdict("markov", bundle.markov.all_pass());
    man.verdict("collar_census", bundle.census.pass());
    man.verdict("ratio_bounds", bundle.ratio_bound_ok());
    man.verdict("exponential_tail", bundle.tail_ok());
    Ok(())
}

pub fn cmd_ratios(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let (model, res, nmax) = induce_inputs(cfg)?;
    let bundle = InduceBundle::run(&model, cfg, res, nmax)?;
    bundle.write_ratios(out, "ratios.csv")?;
    man.constants = to_json(&bundle.constants);
    man.details = to_json(&bundle.ratios);
    man.verdict("ratio_bounds", bundle.ratio_bound_ok());
    Ok(())
}

pub fn cmd_tails(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let (model, res, nmax) = induce_inputs(cfg)?;
    let bundle = InduceBundle::run(&model, cfg, res, nmax)?;
    bundle.write_tails(out, "tails.csv")?;
    man.constants = to_json(&bundle.constants);
    man.details = bundle.summary();
    man.verdict("exponential_tail", bundle.tail_ok());
    Ok(())
}

#[derive(Serialize)]
struct SpectrumRow {
    sigma: f64,
    lambda_sigma: f64,
    residual: f64,
    iterations: usize,
    min_f: f64,
    max_abs_f_minus_one: f64,
    truncation_bound: f64,
}

pub fn default_nodes(model: &ModelSystem) -> usize {
    if model.dim() == 1 {
        TRANSFER_NODES
    } else {
        257
    }
}

pub fn eigendata(model: &ModelSystem, sigma: f64, nodes: usize) -> Result<EigenData> {
    leading_eigendata(
        model,
        sigma,
        &EigenOptions {
            nodes,
            ..EigenOptions::for_model(model)
        },
    )
}

pub fn cmd_spectrum(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let model = model_of(cfg, "doubling-quadratic")?;
    let nodes = *cfg.nodes.get_or_insert(default_nodes(&model));
    let sigmas = cfg.sigma.get_or_insert_with(|| vec![0.0]).clone();
    let mut rows = Vec::new();
    for s in sigmas {
        let eig = eigendata(&model, s, nodes)?;
        rows.push(SpectrumRow {
            sigma: s,
            lambda_sigma: eig.lambda,
            residual: eig.residual,
            iterations: eig.iterations,
            min_f: eig.min_f,
            max_abs_f_minus_one: eig.f.values().iter().fold(0.0, |m, z| m.max((z.re - 1.0).abs())),
            truncation_bound: eig.truncation_bound,
        });
    }
    out.csv("spectrum.csv", &rows)?;
    let mass = mass_conservation(&model, nodes, 100, cfg.seed())?;
    man.verdict("mass_conservation", mass.max_defect <= 1e-8);
    man.details = to_json(&mass);
    Ok(())
}

#[derive(Serialize)]
struct UniRow {
    model: String,
    n0: usize,
    word1: String,
    word2: String,
    e: f64,
    sup_derivative: f64,
    fd_max_rel_err: f64,
    degenerate: bool,
}

fn words(n0: usize) -> (Vec<usize>, Vec<usize>) {
    let w1 = vec![0; n0];
    let mut w2 = vec![0; n0];
    w2[0] = 1;
    (w1, w2)
}

pub fn cmd_uni(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let model = model_of(cfg, "doubling-quadratic")?;
    let n0 = *cfg.n0.get_or_insert(1);
    if n0 == 0 {
        return Err(Error::Precondition("--n0 must be at least 1".into()));
    }
    let nodes = *cfg.nodes.get_or_insert(if model.dim() == 1 { 4097 } else { 129 });
    let (w1, w2) = words(n0);
    let r = uni_estimate(&model, &w1, &w2, None, nodes)?;
    let join = |w: &[usize]| w.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
    out.csv(
        "uni.csv",
        &[UniRow {
            model: model.id.clone(),
            n0,
            word1: join(&w1),
            word2: join(&w2),
            e: r.e,
            sup_derivative: r.sup_derivative,
            fd_max_rel_err: r.fd_max_rel_err,
            degenerate: r.degenerate,
        }],
    )?;
    man.details = to_json(&r);
    Ok(())
}

#[derive(Serialize)]
pub struct CancelRow {
    pub b: f64,
    pub pairs: usize,
    pub balls: usize,
    pub typed: usize,
    pub untyped: usize,
    pub max_excess: f64,
    pub chi_min: f64,
    pub chi_max: f64,
    pub below_threshold: bool,
}

impl From<&DominationReport> for CancelRow {
    fn from(r: &DominationReport) -> Self {
        Self {
            b: r.b,
            pairs: r.pairs,
            balls: r.balls,
            typed: r.typed,
            untyped: r.untyped,
            max_excess: r.max_excess,
            chi_min: r.chi_min,
            chi_max: r.chi_max,
            below_threshold: r.below_threshold,
        }
    }
}

pub fn domination_ok(r: &DominationReport) -> bool {
    r.max_excess <= DOMINATION_SLACK
}

pub fn chi_range_ok(r: &DominationReport) -> bool {
    (r.balls == 0 || r.chi_min >= 0.75 - 1e-12) && r.chi_max <= 1.0 + 1e-12
}

fn transfer_inputs(cfg: &mut RunConfig) -> Result<(ModelSystem, usize, Vec<f64>, CancelSetup)> {
    let model = model_of(cfg, "doubling-quadratic")?;
    let nodes = *cfg.nodes.get_or_insert(default_nodes(&model));
    let bs = cfg.b.get_or_insert_with(|| vec![40.0, 100.0, 400.0]).clone();
    let n0 = *cfg.n0.get_or_insert(1);
    if n0 == 0 {
        return Err(Error::Precondition("--n0 must be at least 1".into()));
    }
    let (w1, w2) = words(n0);
    let setup = CancelSetup::new(&model, &w1, &w2)?;
    Ok((model, nodes, bs, setup))
}

pub fn cancel_reports(cfg: &mut RunConfig) -> Result<Vec<DominationReport>> {
    let (model, nodes, bs, setup) = transfer_inputs(cfg)?;
    let pairs = *cfg.pairs.get_or_insert(100);
    let eig = eigendata(&model, 0.0, nodes)?;
    bs.iter()
        .map(|&b| cancellation_domination(&model, &TwistParameter::new(0.0, b), &eig, &setup, pairs, cfg.seed()))
        .collect()
}

pub fn cmd_cancel(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let reps = cancel_reports(cfg)?;
    out.csv("cancel.csv", &reps.iter().map(CancelRow::from).collect::<Vec<_>>())?;
    man.verdict("domination", reps.iter().all(domination_ok));
    man.verdict("chi_range", reps.iter().all(chi_range_ok));
    man.details = to_json(&reps);
    Ok(())
}

#[derive(Serialize)]
struct ConeRow {
    b: f64,
    m: usize,
    l2_u: f64,
    l2_v: f64,
    cone_ok: bool,
    domination_excess: f64,
    typed_balls: usize,
    balls: usize,
}

/// Starting vector for the cone iteration.
pub fn cone_start(dim: usize, nodes: usize) -> GridFunction {
    GridFunction::from_fn(dim, nodes, |y| {
        Complex64::from_polar(1.0 + 0.5 * (6.0 * y[0]).cos(), 3.0 * (y[0] + y[1]))
    })
}

pub fn cone_runs(cfg: &mut RunConfig) -> Result<Vec<ConeRun>> {
    let (model, nodes, bs, setup) = transfer_inputs(cfg)?;
    let steps = *cfg.steps.get_or_insert(30);
    let eig = eigendata(&model, 0.0, nodes)?;
    let v0 = cone_start(model.dim(), nodes);
    bs.iter()
        .map(|&b| cone_iterate(&model, &TwistParameter::new(0.0, b), &eig, &setup, &v0, steps))
        .collect()
}

pub fn write_cone(out: &mut Outputs, name: &str, runs: &[ConeRun]) -> Result<()> {
    let rows: Vec<ConeRow> = runs
        .iter()
        .flat_map(|r| {
            r.steps.iter().map(move |s| ConeRow {
                b: r.b,
                m: s.m,
                l2_u: s.l2_u,
                l2_v: s.l2_v,
                cone_ok: s.cone_ok,
                domination_excess: s.domination_excess,
                typed_balls: s.typed_balls,
                balls: s.balls,
            })
        })
        .collect();
    out.csv(name, &rows)
}

#[derive(Serialize)]
struct ContractionCsv {
    b: f64,
    n: usize,
    norm_estimate: f64,
}

pub fn write_contraction(out: &mut Outputs, name: &str, reps: &[ContractionReport]) -> Result<()> {
    let rows: Vec<ContractionCsv> = reps
        .iter()
        .flat_map(|r| {
            r.rows.iter().map(move |row| ContractionCsv {
                b: r.b,
                n: row.n,
                norm_estimate: row.estimate,
            })
        })
        .collect();
    out.csv(name, &rows)
}

pub fn cmd_cone(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let runs = cone_runs(cfg)?;
    write_cone(out, "cone.csv", &runs)?;
    let model = model_of(cfg, "doubling-quadratic")?;
    let nodes = cfg.nodes.unwrap_or(TRANSFER_NODES);
    let eig = eigendata(&model, 0.0, nodes)?;
    let steps = cfg.steps.unwrap_or(30);
    let probes = runs
        .iter()
        .map(|r| norm_contraction_probe(&model, &TwistParameter::new(0.0, r.b), &eig, steps, cfg.seed()))
        .collect::<Result<Vec<_>>>()?;
    write_contraction(out, "contraction.csv", &probes)?;
    man.verdict("beta_bound", runs.iter().all(|r| r.beta_hat <= BETA_BOUND));
    man.verdict("cone_membership", runs.iter().all(|r| r.all_in_cone));
    man.details = serde_json::json!(runs
        .iter()
        .zip(&probes)
        .map(|(r, p)| serde_json::json!({"b": r.b, "beta_hat": r.beta_hat, "all_in_cone": r.all_in_cone,
            "below_threshold": r.below_threshold, "decay_window": to_json(&decay_window(p))}))
        .collect::<Vec<_>>());
    Ok(())
}

#[derive(Serialize)]
struct CorrelationRow {
    t: f64,
    rho: f64,
    stderr: f64,
}

pub fn write_correlation(out: &mut Outputs, name: &str, s: &CorrelationSeries) -> Result<()> {
    let rows: Vec<CorrelationRow> = (0..s.t.len())
        .map(|i| CorrelationRow {
            t: s.t[i],
            rho: s.rho[i],
            stderr: s.stderr[i],
        })
        .collect();
    out.csv(name, &rows)
}

pub fn time_grid(tmax: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && tmax >= 0.0) {
        return Err(Error::Precondition(format!("need dt > 0 and tmax >= 0 (got {dt}, {tmax})")));
    }
    let n = (tmax / dt + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| i as f64 * dt).collect())
}

pub fn correlate(
    model: &ModelSystem,
    v: &Observable,
    w: &Observable,
    t: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(CorrelationSeries, DecayFit)> {
    let sys = suspend(model)?;
    let s = correlation_series(&sys, v, w, t, samples, seed)?;
    let fit = decay_fit(&s);
    Ok((s, fit))
}

pub fn cmd_correlate(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let model = model_of(cfg, "doubling-quadratic")?;
    let v = *cfg.observable.get_or_insert(Observable::Coordinate { axis: 0 });
    let w = *cfg.observable_w.get_or_insert(v);
    let samples = *cfg.samples.get_or_insert(1_000_000);
    let t = time_grid(*cfg.tmax.get_or_insert(30.0), *cfg.dt.get_or_insert(0.25))?;
    let (s, fit) = correlate(&model, &v, &w, &t, samples, cfg.seed())?;
    write_correlation(out, "correlation.csv", &s)?;
    man.details = to_json(&fit);
    Ok(())
}

#[derive(Serialize)]
pub struct DistortionRow {
    pub model: String,
    pub pair_id: usize,
    #[serde(rename = "D")]
    pub d: f64,
    pub depth: usize,
    pub err_bound: f64,
    pub half_depth_gap: f64,
    pub depth_agreement: bool,
}

pub fn distortion_rows(model: &ModelSystem, pairs: usize, tol: f64, seed: u64) -> Result<Vec<DistortionRow>> {
    let geo = SkewGeometry::new(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..pairs)
        .map(|i| {
            let (a, b) = random_pair(model, 64, &mut rng)?;
            let d = temporal_distortion(model, &a, &b, tol)?;
            let coarse = geo.tail_bound(a.y - b.y, d.depth / 2);
            Ok(DistortionRow {
                model: model.id.clone(),
                pair_id: i,
                d: d.value,
                depth: d.depth,
                err_bound: d.error_bound,
                half_depth_gap: d.half_depth_gap,
                depth_agreement: d.half_depth_gap <= coarse + 1e-14,
            })
        })
        .collect()
}

pub fn cmd_distortion(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let model = model_of(cfg, "solenoid-skew")?;
    let pairs = *cfg.pairs.get_or_insert(20);
    let tol = *cfg.tol.get_or_insert(1e-12);
    let rows = distortion_rows(&model, pairs, tol, cfg.seed())?;
    out.csv("distortion.csv", &rows)?;
    man.verdict("depth_agreement", rows.iter().all(|r| r.depth_agreement));
    man.details = serde_json::json!({"max_abs_d": rows.iter().fold(0.0f64, |m, r| m.max(r.d.abs()))});
    Ok(())
}

pub fn cmd_consistency(cfg: &mut RunConfig, out: &mut Outputs, man: &mut Manifest) -> Result<()> {
    let ids = cfg
        .models
        .get_or_insert_with(|| vec!["A".into(), "B".into(), "doubling-coboundary".into()])
        .clone();
    let degree = *cfg.degree.get_or_insert(CONSISTENCY_DEGREE);
    let models: Vec<ModelSystem> = ids.iter().map(|m| ModelSystem::resolve(m)).collect::<Result<_>>()?;
    let rows = uni_cohomology_consistency(&models, degree, cfg.seed());
    write_cohomology(out, "cohomology.csv", &rows)?;
    man.verdict("no_inconsistency", rows.iter().all(|r| !r.flagged));
    Ok(())
}

#[derive(Serialize)]
struct CohomologyRow<'a> {
    model: &'a str,
    basis_degree: usize,
    residual: f64,
    #[serde(rename = "E")]
    e: f64,
    max_abs_d: f64,
    flagged: bool,
}

pub fn write_cohomology(out: &mut Outputs, name: &str, rows: &[crate::semiflow::ConsistencyRow]) -> Result<()> {
    let csv: Vec<CohomologyRow> = rows
        .iter()
        .map(|r| CohomologyRow {
            model: &r.model,
            basis_degree: r.degree,
            residual: r.residual,
            e: r.e,
            max_abs_d: r.max_abs_d,
            flagged: r.flagged,
        })
        .collect();
    out.csv(name, &csv)
}
