//! Statistics on simulated first passages: batched ratio estimators, ruin
//! probabilities, distances to limit laws and convergence in `u`.
//!
//! Paths are drawn in batches. Batch `b` at ladder level `j` owns a fixed,
//! disjoint range of random streams, so a plan reproduces the same numbers
//! bit for bit whatever the worker count.

mod compare;

pub use compare::{compare_to_limit, sample_limit_law, CompareOptions, Distances};

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path_sim::{run_streams, FirstPassageRecord, LadderStepSampler, Simulator, TiltedSimulator};
use crate::risk_model::{Regime, RiskModel};

/// Normal quantile for the 95% level used throughout.
pub const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Paths under the original law, censored once safely below the barrier.
    Plain,
    /// Paths under the Esscher transform by `α`, reweighted by the likelihood ratio.
    Tilted,
    /// Ladder steps with conditional passage; spatial quantities only.
    Ladder,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::Tilted => "tilted",
            Method::Ladder => "ladder",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Method::Plain),
            "tilted" => Ok(Method::Tilted),
            "ladder" => Ok(Method::Ladder),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}` (plain, tilted or ladder)"))),
        }
    }
}

/// How many paths to draw, where, and from which streams.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchPlan {
    pub paths_per_batch: u64,
    pub batches: u64,
    /// Reserve levels for convergence studies.
    pub u_ladder: Vec<f64>,
    pub master_seed: u64,
    pub first_stream: u64,
    pub workers: usize,
    /// Time horizon for plain paths; tilted paths always pass.
    pub horizon: f64,
}

impl BatchPlan {
    pub fn new(paths_per_batch: u64, batches: u64, master_seed: u64) -> Self {
        BatchPlan {
            paths_per_batch,
            batches,
            u_ladder: Vec::new(),
            master_seed,
            first_stream: 0,
            workers: 1,
            horizon: 1e6,
        }
    }

    pub fn with_ladder(mut self, u_ladder: Vec<f64>) -> Self {
        self.u_ladder = u_ladder;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn total_paths(&self) -> u64 {
        self.paths_per_batch * self.batches
    }

    /// First stream of batch `batch` at ladder level `level`.
    pub fn stream_start(&self, level: usize, batch: u64) -> u64 {
        self.first_stream + (level as u64 * self.batches + batch) * self.paths_per_batch
    }

    /// Ladder position of `u`, or 0 when `u` is not on the ladder.
    pub fn level_of(&self, u: f64) -> usize {
        self.u_ladder.iter().position(|&v| v == u).unwrap_or(0)
    }

    fn validate(&self) -> Result<()> {
        if self.paths_per_batch == 0 || self.batches == 0 {
            return Err(Error::InvalidArgument("batch plan needs at least one path and one batch".into()));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        Ok(())
    }
}

/// Streams used by one estimate, `[first_stream, end_stream)` of `master_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedProvenance {
    pub master_seed: u64,
    pub first_stream: u64,
    pub end_stream: u64,
}

/// Declared bound: pass when `|estimate − target| ≤ n_se · std_error`, up to
/// rounding in the last few bits of the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub target: f64,
    pub n_se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        }
    }
}

impl Tolerance {
    pub fn judge(&self, estimate: f64, std_error: f64) -> Verdict {
        let rounding = 8.0 * f64::EPSILON * self.target.abs().max(1.0);
        if (estimate - self.target).abs() <= self.n_se * std_error + rounding {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorResult {
    pub u: f64,
    pub method: Method,
    pub estimate: f64,
    pub std_error: f64,
    /// Ruined paths for plain sampling, `(Σw)²/Σw²` for tilted.
    pub n_effective: f64,
    pub n_paths: u64,
    pub n_events: u64,
    pub batches: u64,
    pub seeds: SeedProvenance,
    pub tolerance: Option<Tolerance>,
    pub verdict: Option<Verdict>,
}

impl EstimatorResult {
    pub fn with_tolerance(mut self, tolerance: Tolerance) -> Self {
        self.verdict = Some(tolerance.judge(self.estimate, self.std_error));
        self.tolerance = Some(tolerance);
        self
    }

    /// Verdict recomputed from the stored fields.
    pub fn recompute_verdict(&self) -> Option<Verdict> {
        self.tolerance.map(|t| t.judge(self.estimate, self.std_error))
    }

    /// Half-width of the 95% interval.
    pub fn half_width(&self) -> f64 {
        Z95 * self.std_error
    }
}

/// First-passage records at one level, grouped by batch.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageSample {
    pub u: f64,
    pub method: Method,
    pub batches: Vec<Vec<FirstPassageRecord>>,
    pub seeds: SeedProvenance,
}

impl PassageSample {
    pub fn n_paths(&self) -> u64 {
        self.batches.iter().map(|b| b.len() as u64).sum()
    }

    pub fn n_events(&self) -> u64 {
        self.records().filter(|r| r.ruined).count() as u64
    }

    pub fn records(&self) -> impl Iterator<Item = &FirstPassageRecord> {
        self.batches.iter().flatten()
    }

    /// `(value, weight)` of each ruined path, for comparison with a limit law.
    pub fn weighted_values<F: Fn(&FirstPassageRecord) -> f64>(&self, f: F) -> Vec<(f64, f64)> {
        self.records().filter(|r| r.ruined).map(|r| (f(r), r.weight)).collect()
    }

    fn result(&self, estimate: f64, std_error: f64, n_effective: f64) -> EstimatorResult {
        EstimatorResult {
            u: self.u,
            method: self.method,
            estimate,
            std_error,
            n_effective,
            n_paths: self.n_paths(),
            n_events: self.n_events(),
            batches: self.batches.len() as u64,
            seeds: self.seeds,
            tolerance: None,
            verdict: None,
        }
    }
}

/// Tilt used by [`Method::Tilted`]: the Lundberg exponent under Cramér, the
/// convolution-equivalence index otherwise. The tilted drift must be positive.
/// Under convolution equivalence the passing claim is sampled conditionally,
/// see [`TiltedSimulator::first_passage_conditional`].
fn tilted_simulator(model: &RiskModel) -> Result<(TiltedSimulator, bool)> {
    let class = model.classify_regime();
    if class.regime == Regime::Neither {
        return Err(Error::RegimeMismatch("tilted sampling needs an exponential index α".into()));
    }
    let sim = TiltedSimulator::new(model, class.alpha)
        .map_err(|e| Error::RegimeMismatch(format!("tilting by α = {} is not usable: {e}", class.alpha)))?;
    Ok((sim, class.regime == Regime::ConvolutionEquivalent))
}

/// Simulates the plan's batches at reserve `u`.
pub fn simulate_passages(model: &RiskModel, u: f64, plan: &BatchPlan, method: Method) -> Result<PassageSample> {
    simulate_level(model, u, plan.level_of(u), plan, method)
}

fn simulate_level(model: &RiskModel, u: f64, level: usize, plan: &BatchPlan, method: Method) -> Result<PassageSample> {
    plan.validate()?;
    let n = plan.paths_per_batch;
    let mut batches = Vec::with_capacity(plan.batches as usize);
    match method {
        Method::Plain => {
            let sim = Simulator::new(model);
            for b in 0..plan.batches {
                let start = plan.stream_start(level, b);
                batches.push(run_streams(plan.master_seed, start, n, plan.workers, |s| {
                    sim.first_passage(u, plan.horizon, s)
                })?);
            }
        }
        Method::Tilted => {
            let (sim, conditional) = tilted_simulator(model)?;
            let draw = |s| if conditional { sim.first_passage_conditional(u, s) } else { sim.first_passage(u, s) };
            for b in 0..plan.batches {
                let start = plan.stream_start(level, b);
                batches.push(run_streams(plan.master_seed, start, n, plan.workers, draw)?);
            }
        }
        Method::Ladder => {
            let sim = LadderStepSampler::new(model)?;
            for b in 0..plan.batches {
                let start = plan.stream_start(level, b);
                batches.push(run_streams(plan.master_seed, start, n, plan.workers, |s| sim.first_passage(u, s))?);
            }
        }
    }
    let seeds = SeedProvenance {
        master_seed: plan.master_seed,
        first_stream: plan.stream_start(level, 0),
        end_stream: plan.stream_start(level, plan.batches),
    };
    Ok(PassageSample { u, method, batches, seeds })
}

/// Sums over one batch: `Σ w·F`, `Σ w`, `Σ w²` on ruined paths.
#[derive(Debug, Clone, Copy, Default)]
struct BatchSums {
    wf: f64,
    w: f64,
    w2: f64,
}

fn batch_sums<F: Fn(&FirstPassageRecord) -> f64>(batch: &[FirstPassageRecord], f: &F) -> BatchSums {
    let mut s = BatchSums::default();
    for r in batch.iter().filter(|r| r.ruined) {
        s.wf += r.weight * f(r);
        s.w += r.weight;
        s.w2 += r.weight * r.weight;
    }
    s
}

/// `E⁽ᵘ⁾F = E[F; τ(u) < ∞] / P(τ(u) < ∞)` from a simulated sample.
///
/// Plain: ratio of sample means with delta-method standard error, which is
/// `√Σ(Fᵢ − R)²` over ruined paths divided by their count. Tilted: weighted
/// ratio with a leave-one-batch-out jackknife standard error.
pub fn conditional_estimate<F>(sample: &PassageSample, f: F) -> Result<EstimatorResult>
where
    F: Fn(&FirstPassageRecord) -> f64,
{
    let n_events = sample.n_events();
    if n_events == 0 {
        return Err(Error::NoRuinEvents { paths: sample.n_paths() });
    }
    let sums: Vec<BatchSums> = sample.batches.iter().map(|b| batch_sums(b, &f)).collect();
    let total = sums.iter().fold(BatchSums::default(), |a, s| BatchSums { wf: a.wf + s.wf, w: a.w + s.w, w2: a.w2 + s.w2 });
    let ratio = total.wf / total.w;
    match sample.method {
        Method::Plain => {
            let ss: f64 = sample.records().filter(|r| r.ruined).map(|r| (f(r) - ratio).powi(2)).sum();
            let se = ss.sqrt() / n_events as f64;
            Ok(sample.result(ratio, se, n_events as f64))
        }
        Method::Tilted | Method::Ladder => {
            let b = sums.len();
            if b < 2 {
                return Err(Error::InsufficientSamples("the jackknife needs at least two batches".into()));
            }
            let loo: Vec<f64> = sums.iter().map(|s| (total.wf - s.wf) / (total.w - s.w)).collect();
            let mean = loo.iter().sum::<f64>() / b as f64;
            let var = (b as f64 - 1.0) / b as f64 * loo.iter().map(|r| (r - mean).powi(2)).sum::<f64>();
            Ok(sample.result(ratio, var.sqrt(), total.w * total.w / total.w2))
        }
    }
}

/// Simulates and estimates `E⁽ᵘ⁾F`.
pub fn run_conditional_estimate<F>(model: &RiskModel, u: f64, f: F, plan: &BatchPlan, method: Method) -> Result<EstimatorResult>
where
    F: Fn(&FirstPassageRecord) -> f64,
{
    conditional_estimate(&simulate_passages(model, u, plan, method)?, f)
}

/// `P(τ(u) < ∞)`: the mean of `w·1(ruined)`, with batch-mean standard error
/// when there are at least two batches and the per-path one otherwise.
pub fn ruin_probability_estimate(sample: &PassageSample) -> EstimatorResult {
    let per_path: Vec<f64> = sample.records().map(|r| if r.ruined { r.weight } else { 0.0 }).collect();
    let (mean, se) = if sample.batches.len() >= 2 {
        let means: Vec<f64> = sample
            .batches
            .iter()
            .map(|b| b.iter().map(|r| if r.ruined { r.weight } else { 0.0 }).sum::<f64>() / b.len() as f64)
            .collect();
        let all = per_path.iter().sum::<f64>() / per_path.len() as f64;
        (all, mean_and_se(&means).1)
    } else {
        mean_and_se(&per_path)
    };
    let s1: f64 = per_path.iter().sum();
    let s2: f64 = per_path.iter().map(|w| w * w).sum();
    let n_eff = if s2 > 0.0 { s1 * s1 / s2 } else { 0.0 };
    sample.result(mean, se, n_eff)
}

pub fn run_ruin_probability(model: &RiskModel, u: f64, plan: &BatchPlan, method: Method) -> Result<EstimatorResult> {
    Ok(ruin_probability_estimate(&simulate_passages(model, u, plan, method)?))
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Estimates along the plan's `u`-ladder with trend diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<EstimatorResult>,
    /// `estimate[j+1] − estimate[j]`.
    pub differences: Vec<f64>,
    /// Standard errors of the differences (levels are independent).
    pub difference_se: Vec<f64>,
    /// All differences of one sign.
    pub monotone: bool,
    /// `|differences|` non-increasing.
    pub differences_shrink: bool,
    /// First level from which every later difference is within
    /// `PLATEAU_N_SE` standard errors of zero.
    pub plateau_from: Option<f64>,
}

/// Standard errors allowed for a step inside a plateau.
pub const PLATEAU_N_SE: f64 = 3.0;

impl ConvergenceTable {
    fn from_rows(rows: Vec<EstimatorResult>) -> Self {
        let differences: Vec<f64> = rows.windows(2).map(|w| w[1].estimate - w[0].estimate).collect();
        let difference_se: Vec<f64> = rows.windows(2).map(|w| w[0].std_error.hypot(w[1].std_error)).collect();
        let monotone = differences.iter().all(|d| *d >= 0.0) || differences.iter().all(|d| *d <= 0.0);
        let differences_shrink = differences.windows(2).all(|w| w[1].abs() <= w[0].abs());
        let flat: Vec<bool> = differences.iter().zip(&difference_se).map(|(d, s)| d.abs() <= PLATEAU_N_SE * s).collect();
        let plateau_from = if rows.is_empty() {
            None
        } else {
            let mut start = flat.len();
            while start > 0 && flat[start - 1] {
                start -= 1;
            }
            Some(rows[start].u)
        };
        ConvergenceTable { rows, differences, difference_se, monotone, differences_shrink, plateau_from }
    }
}

/// Runs [`run_conditional_estimate`] at every level of the plan's ladder.
/// Level `j` uses its own stream range.
pub fn convergence_ladder<F>(model: &RiskModel, f: F, plan: &BatchPlan, method: Method) -> Result<ConvergenceTable>
where
    F: Fn(&FirstPassageRecord) -> f64,
{
    let mut rows = Vec::with_capacity(plan.u_ladder.len());
    for (j, &u) in plan.u_ladder.iter().enumerate() {
        let sample = simulate_level(model, u, j, plan, method)?;
        rows.push(conditional_estimate(&sample, &f)?);
    }
    Ok(ConvergenceTable::from_rows(rows))
}

const CSV_HEADER: [&str; 15] = [
    "u",
    "method",
    "estimate",
    "std_error",
    "n_effective",
    "n_paths",
    "n_events",
    "batches",
    "master_seed",
    "first_stream",
    "end_stream",
    "target",
    "n_se",
    "verdict",
    "half_width_95",
];

/// One row per result; empty `target`, `n_se` and `verdict` when no bound is declared.
pub fn write_results_csv<W: Write>(out: W, results: &[EstimatorResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(CSV_HEADER).map_err(fmt)?;
    for r in results {
        let (target, n_se) = r.tolerance.map_or((String::new(), String::new()), |t| (t.target.to_string(), t.n_se.to_string()));
        w.write_record([
            r.u.to_string(),
            r.method.as_str().to_string(),
            r.estimate.to_string(),
            r.std_error.to_string(),
            r.n_effective.to_string(),
            r.n_paths.to_string(),
            r.n_events.to_string(),
            r.batches.to_string(),
            r.seeds.master_seed.to_string(),
            r.seeds.first_stream.to_string(),
            r.seeds.end_stream.to_string(),
            target,
            n_se,
            r.verdict.map_or("", |v| v.as_str()).to_string(),
            r.half_width().to_string(),
        ])
        .map_err(fmt)?;
    }
    w.flush()?;
    Ok(())
}

pub fn results_to_json(results: &[EstimatorResult]) -> Result<String> {
    serde_json::to_string_pretty(results).map_err(|e| Error::Format(e.to_string()))
}
