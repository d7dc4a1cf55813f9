use super::{Cell, EdpfSpec, ExperimentConfig, LimitsSpec, Report, RuinSpec, Table};
use crate::error::{Error, Result};
use crate::estimator::{conditional_estimate, run_ruin_probability, simulate_passages, BatchPlan, Method, Tolerance, Verdict};
use crate::ladder_calculus::LadderSystem;
use crate::limit_laws::{
    edpf_limit_convolution, edpf_limit_cramer, overshoot_limit, q_infinity_mass, quintuple_limit_density,
    time_marginal_limit, undershoot_limit, undershoot_max_limit, LimitLaw,
};
use crate::path_sim::{run_streams, simulate_descending_ladder};
use crate::risk_model::Regime;

fn verdict_cell(v: Option<Verdict>) -> Cell {
    v.map(|v| v.as_str()).unwrap_or("").into()
}

fn alpha_of(sys: &LadderSystem) -> Result<f64> {
    sys.alpha().ok_or_else(|| Error::RegimeMismatch("the model has no exponential index α".into()))
}

/// Paths per batch so that `batches` batches hold at least `paths` in total.
fn per_batch(paths: u64, batches: u64) -> u64 {
    paths.div_ceil(batches).max(1)
}

/// Analytic ruin probability, Monte Carlo estimate and the Cramér
/// approximation `C·e^{−αu}` on the configured reserves.
pub fn cmd_ruin(config: &ExperimentConfig, spec: &RuinSpec, workers: usize) -> Result<Report> {
    let model = &config.model;
    let sys = LadderSystem::new(model);
    let cramer = match sys.regime().cramer_alpha() {
        Some(a) => Some((a, sys.cramer_constant()?)),
        None => None,
    };
    let plan = BatchPlan::new(per_batch(spec.paths, spec.batches), spec.batches, config.seed)
        .with_ladder(spec.u.clone())
        .with_workers(workers);
    let mut table = Table::new(
        "ruin",
        &["u", "analytic", "mc_estimate", "mc_std_error", "cramer_approx", "method", "n_paths", "n_events", "verdict"],
    );
    let mut failures = Vec::new();
    for &u in &spec.u {
        let analytic = sys.ruin_probability(u);
        let r = run_ruin_probability(model, u, &plan, spec.method)?
            .with_tolerance(Tolerance { target: analytic, n_se: spec.n_se });
        if r.verdict == Some(Verdict::Fail) {
            failures.push(format!(
                "ruin at u = {u}: estimate {} ± {} vs analytic {analytic}",
                r.estimate, r.std_error
            ));
        }
        let approx = cramer.map(|(a, c)| c * (-a * u).exp()).unwrap_or(f64::NAN);
        table.push(vec![
            u.into(),
            analytic.into(),
            r.estimate.into(),
            r.std_error.into(),
            approx.into(),
            r.method.as_str().into(),
            (r.n_paths as f64).into(),
            (r.n_events as f64).into(),
            verdict_cell(r.verdict),
        ]);
    }
    Ok(Report {
        command: "ruin".into(),
        formulas: vec!["pollaczek-khinchine", "cramer-lundberg-asymptotic"],
        tables: vec![table],
        failures,
    })
}

fn grid(config: &ExperimentConfig, alpha: f64) -> Vec<f64> {
    let max = config.output.grid_max.unwrap_or(10.0 / alpha);
    let step = config.output.grid_step.unwrap_or(max / 400.0);
    let n = (max / step).round() as usize;
    (0..=n).map(|i| (i as f64 * step).min(max)).collect()
}

fn law_table(name: &str, law: &LimitLaw, xs: &[f64]) -> Table {
    let mut t = Table::new(name, &["x", "density", "cdf"]);
    for &x in xs {
        t.push(vec![x.into(), law.density(x).into(), law.cdf_interpolated(x).into()]);
    }
    t
}

/// Density grids of the overshoot and undershoot limits, the passage-delay
/// limit on time cells, the joint density on a product grid and a mass report.
pub fn cmd_limits(config: &ExperimentConfig, spec: &LimitsSpec, workers: usize) -> Result<Report> {
    let model = &config.model;
    let sys = LadderSystem::new(model);
    let alpha = alpha_of(&sys)?;
    let regime = sys.regime().regime;
    let xs = grid(config, alpha);
    let laws = [
        ("overshoot", overshoot_limit(&sys, regime)?),
        ("undershoot_max", undershoot_max_limit(&sys, regime)?),
        ("undershoot", undershoot_limit(&sys, regime)?),
    ];
    let q_mass = q_infinity_mass(&sys)?;
    let mut tables: Vec<Table> = laws.iter().map(|(name, law)| law_table(name, law, &xs)).collect();

    let t_end = *spec.time_edges.last().unwrap();
    let samples = run_streams(config.seed, 0, spec.ladder_samples, workers, |s| simulate_descending_ladder(model, t_end, s))?;
    let time = time_marginal_limit(&sys, &samples, &spec.time_edges)?;
    let mut t = Table::new("passage_delay", &["t_lo", "t_hi", "mass", "std_error", "ladder_part"]);
    for i in 0..time.mass.len() {
        t.push(vec![
            spec.time_edges[i].into(),
            spec.time_edges[i + 1].into(),
            time.mass[i].into(),
            time.std_error[i].into(),
            time.ladder_part[i].into(),
        ]);
    }
    t.push(vec![t_end.into(), f64::INFINITY.into(), time.beyond.0.into(), time.beyond.1.into(), f64::NAN.into()]);
    tables.push(t);

    let quint = quintuple_limit_density(&sys)?;
    let k = spec.quintuple_points;
    let axis: Vec<f64> = (0..k).map(|i| xs[xs.len() - 1] * i as f64 / (k - 1) as f64).collect();
    let mut t = Table::new("quintuple", &["y", "x", "v", "density"]);
    for &y in &axis {
        for &x in &axis {
            for &v in &axis {
                t.push(vec![y.into(), x.into(), v.into(), quint.density(y, x, v).into()]);
            }
        }
    }
    tables.push(t);

    let mut t = Table::new("mass_report", &["law", "convergence_mode", "total_mass", "mass_error", "expected_mass"]);
    for (name, law) in &laws {
        let expected = if law.mode == crate::limit_laws::ConvergenceMode::Vague { q_mass } else { 1.0 };
        t.push(vec![(*name).into(), law.mode.as_str().into(), law.total_mass.into(), law.mass_error.into(), expected.into()]);
    }
    t.push(vec!["quintuple".into(), quint.mode.as_str().into(), quint.total_mass().into(), f64::NAN.into(), q_mass.into()]);
    t.push(vec!["passage_delay".into(), time.mode.as_str().into(), time.total_mass.into(), f64::NAN.into(), 1.0.into()]);
    tables.push(t);

    let mut formulas = vec!["overshoot-limit", "undershoot-limits", "joint-passage-density", "passage-delay-limit"];
    if regime == Regime::ConvolutionEquivalent {
        formulas.push("mass-defect");
    }
    Ok(Report { command: "limits".into(), formulas, tables, failures: Vec::new() })
}

/// Limits of the expected discounted penalty over the parameter grid, with a
/// Monte Carlo cross-check at a finite reserve.
///
/// Under the Cramér condition the penalty is `exp(λ_p·y + η·x − δ·t)`; under
/// convolution equivalence `λ_p` must be zero and `η` plays the role of `β`
/// in `exp(β·x − δ·t)`.
pub fn cmd_edpf(config: &ExperimentConfig, spec: &EdpfSpec, workers: usize) -> Result<Report> {
    let model = &config.model;
    let sys = LadderSystem::new(model);
    let alpha = alpha_of(&sys)?;
    let regime = sys.regime().regime;
    if regime == Regime::ConvolutionEquivalent && spec.lambda_p.iter().any(|l| *l != 0.0) {
        return Err(Error::InvalidArgument("λ_p must be 0 under convolution equivalence".into()));
    }
    let mut points = Vec::new();
    for &lp in &spec.lambda_p {
        for &eta in &spec.eta {
            for &delta in &spec.delta {
                let limit = match regime {
                    Regime::CramerLundberg => edpf_limit_cramer(&sys, lp, eta, delta)?,
                    _ => edpf_limit_convolution(&sys, eta, delta)?,
                };
                points.push((lp, eta, delta, limit));
            }
        }
    }

    let u = spec.mc_u.unwrap_or(15.0 / alpha);
    let sample = if spec.mc_paths > 0 {
        // the ladder sampler has no time coordinate
        let method = if regime == Regime::ConvolutionEquivalent && spec.delta.iter().all(|d| *d == 0.0) {
            Method::Ladder
        } else {
            Method::Tilted
        };
        let plan = BatchPlan::new(per_batch(spec.mc_paths, spec.batches), spec.batches, config.seed).with_workers(workers);
        Some(simulate_passages(model, u, &plan, method)?)
    } else {
        None
    };

    let second = if regime == Regime::CramerLundberg { "eta" } else { "beta" };
    let mut table = Table::new(
        "edpf",
        &["lambda_p", second, "delta", "limit", "mc_estimate", "mc_std_error", "mc_u", "verdict"],
    );
    let mut failures = Vec::new();
    for (lp, eta, delta, limit) in points {
        let (est, se, verdict) = match &sample {
            Some(s) => {
                let f = |r: &crate::path_sim::FirstPassageRecord| {
                    let t = if delta == 0.0 { 0.0 } else { delta * r.passage_delay };
                    let y = if lp == 0.0 { 0.0 } else { lp * r.undershoot_max };
                    (y + eta * r.overshoot - t).exp()
                };
                let r = conditional_estimate(s, f)?.with_tolerance(Tolerance { target: limit, n_se: spec.n_se });
                if r.verdict == Some(Verdict::Fail) {
                    failures.push(format!(
                        "edpf at (λ_p, {second}, δ) = ({lp}, {eta}, {delta}): estimate {} ± {} at u = {u} vs limit {limit}",
                        r.estimate, r.std_error
                    ));
                }
                (r.estimate, r.std_error, verdict_cell(r.verdict))
            }
            None => (f64::NAN, f64::NAN, "".into()),
        };
        table.push(vec![
            lp.into(),
            eta.into(),
            delta.into(),
            limit.into(),
            est.into(),
            se.into(),
            (if sample.is_some() { u } else { f64::NAN }).into(),
            verdict,
        ]);
    }
    let formulas = match regime {
        Regime::CramerLundberg => vec!["edpf-cramer-limit"],
        _ => vec!["edpf-convolution-equivalent-limit"],
    };
    Ok(Report { command: "edpf".into(), formulas, tables: vec![table], failures })
}
