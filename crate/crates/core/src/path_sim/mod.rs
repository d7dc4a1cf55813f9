//! Exact event-driven simulation of the claim-surplus process.
//!
//! Between claims the path decreases linearly at rate `c`; claims arrive at
//! the jump times of a Poisson process. Passage above a level can only happen
//! at a claim instant, so every path functional recorded here is exact.
//!
//! A path that has not passed the barrier is declared "never ruined" once it
//! sits more than the safe depth below the barrier (see [`safe_depth`]).

mod io;
mod ladder;
mod occupation;
mod records;

pub use io::{read_binary, read_csv, write_binary, write_csv, BINARY_MAGIC, BINARY_VERSION};
pub use ladder::LadderStepSampler;
pub use occupation::{occupation_histogram, OccupationHistogram};
pub use records::{ExcursionRecord, FirstPassageRecord, LadderSample, LadderSegment};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::risk_model::{ClaimDistribution, Regime, RiskModel};
use crate::rng::StreamSeed;

/// Ruin probability budget for declaring a path safe in the Cramér regime.
pub const SAFE_DEPTH_PROBABILITY: f64 = 1e-12;
/// Safe depth, in units of the claims' characteristic scale, when no
/// exponential bound is available.
pub const DEFAULT_SAFE_DEPTH_SCALES: f64 = 60.0;

/// Depth `D` below the barrier past which a path is treated as never ruined.
///
/// Cramér: `ρ·e^{−αD} = 1e−12`. Otherwise a configured multiple of the claim scale.
pub fn safe_depth(model: &RiskModel) -> f64 {
    let floor = 10.0 * model.claims().characteristic_scale();
    let class = model.classify_regime();
    match class.regime {
        Regime::CramerLundberg => {
            let d = (model.load_ratio() / SAFE_DEPTH_PROBABILITY).ln() / class.alpha;
            d.max(floor)
        }
        _ => DEFAULT_SAFE_DEPTH_SCALES * model.claims().characteristic_scale(),
    }
}

/// Exact simulator for one model; caches the safe depth and exponential clock.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: RiskModel,
    safe_depth: f64,
    clock: Exp<f64>,
}

/// `(x0 + d)` decomposition of a claim `ξ` into undershoot `d` and overshoot
/// `o` with `o + d == ξ` exactly in floating point.
fn split_claim(claim: f64, undershoot: f64) -> (f64, f64) {
    let overshoot = claim - undershoot;
    if undershoot >= 0.5 * claim {
        // Sterbenz: the subtraction above was exact
        (undershoot, overshoot)
    } else {
        // overshoot ≥ claim/2, so this subtraction is exact
        (claim - overshoot, overshoot)
    }
}

/// `(g, tau − g)` with `g + (tau − g) == tau` exactly.
fn split_time(tau: f64, g: f64) -> (f64, f64) {
    let delay = tau - g;
    if g >= 0.5 * tau {
        (g, delay)
    } else {
        (tau - delay, delay)
    }
}

impl Simulator {
    pub fn new(model: &RiskModel) -> Self {
        Self::with_safe_depth(model, safe_depth(model))
    }

    pub fn with_safe_depth(model: &RiskModel, safe_depth: f64) -> Self {
        Simulator {
            model: model.clone(),
            safe_depth,
            clock: Exp::new(model.claim_intensity()).expect("positive intensity"),
        }
    }

    pub fn model(&self) -> &RiskModel {
        &self.model
    }

    pub fn safe_depth(&self) -> f64 {
        self.safe_depth
    }

    /// First passage above `u`. With `censor` unset the path runs until it
    /// passes (used under a tilted law where passage is certain).
    fn run_passage<R: Rng>(&self, u: f64, horizon: f64, censor: bool, rng: &mut R) -> Result<FirstPassageRecord> {
        let c = self.model.premium_rate();
        let floor = u - self.safe_depth;
        let (mut t, mut x) = (0.0f64, 0.0f64);
        let (mut running_max, mut g) = (0.0f64, 0.0f64);
        loop {
            let dt = self.clock.sample(rng);
            let t_claim = t + dt;
            if t_claim > horizon {
                let level = x - c * (horizon - t);
                if censor && level < floor {
                    return Ok(FirstPassageRecord::survived());
                }
                return Err(Error::HorizonAmbiguous { horizon, level, barrier: u });
            }
            let before = x - c * dt;
            t = t_claim;
            if censor && before < floor {
                return Ok(FirstPassageRecord::survived());
            }
            let claim = self.model.claims().sample(rng);
            let after = before + claim;
            if after > u {
                let (undershoot_path, overshoot) = split_claim(claim, u - before);
                let (last_max_time, passage_delay) = split_time(t, g);
                return Ok(FirstPassageRecord {
                    ruined: true,
                    tau: t,
                    last_max_time,
                    passage_delay,
                    undershoot_max: (u - running_max).min(undershoot_path),
                    undershoot_path,
                    overshoot,
                    weight: 1.0,
                    last_claim: claim,
                });
            }
            if after > running_max {
                running_max = after;
                g = t;
            }
            x = after;
        }
    }

    /// Plain simulation of the first passage above `u`.
    pub fn first_passage(&self, u: f64, horizon: f64, seed: StreamSeed) -> Result<FirstPassageRecord> {
        check_nonnegative("u", u)?;
        check_positive("horizon", horizon)?;
        self.run_passage(u, horizon, true, &mut seed.rng())
    }

    /// Excursion from zero until `τ(0)`, censored below the safe depth.
    pub fn excursion(&self, horizon: f64, seed: StreamSeed, keep_path: bool) -> Result<ExcursionRecord> {
        check_positive("horizon", horizon)?;
        let mut rng = seed.rng();
        let c = self.model.premium_rate();
        let floor = -self.safe_depth;
        let (mut t, mut x) = (0.0f64, 0.0f64);
        let mut events = Vec::new();
        loop {
            let dt = self.clock.sample(&mut rng);
            let t_claim = t + dt;
            if t_claim > horizon {
                let level = x - c * (horizon - t);
                if level < floor {
                    return Ok(ExcursionRecord::censored(horizon, events));
                }
                return Err(Error::HorizonAmbiguous { horizon, level, barrier: 0.0 });
            }
            let before = x - c * dt;
            t = t_claim;
            if before < floor {
                return Ok(ExcursionRecord::censored(horizon, events));
            }
            let claim = self.model.claims().sample(&mut rng);
            let after = before + claim;
            if keep_path {
                events.push((t, after));
            }
            if after > 0.0 {
                let (pre_terminal, terminal) = split_claim(claim, -before);
                return Ok(ExcursionRecord {
                    completed: true,
                    duration: t,
                    terminal,
                    pre_terminal,
                    path_events: events,
                    discounted_mark: (-t).exp(),
                });
            }
            x = after;
        }
    }

    /// Strict new-minimum segments up to `horizon`.
    pub fn descending_ladder(&self, horizon: f64, seed: StreamSeed) -> Result<LadderSample> {
        check_positive("horizon", horizon)?;
        let mut rng = seed.rng();
        let c = self.model.premium_rate();
        let (mut t, mut x, mut min) = (0.0f64, 0.0f64, 0.0f64);
        let mut segments = Vec::new();
        loop {
            let dt = self.clock.sample(&mut rng);
            let end = (t + dt).min(horizon);
            let before = x - c * (end - t);
            if before < min {
                let start_time = t + (x - min) / c;
                segments.push(LadderSegment {
                    start_time,
                    start_depth: -min,
                    end_time: end,
                    end_depth: -before,
                });
                min = before;
            }
            if t + dt >= horizon {
                return Ok(LadderSample { segments, horizon, truncation_depth: -min });
            }
            t = end;
            x = before + self.model.claims().sample(&mut rng);
        }
    }
}

/// Simulator under the Esscher transform by `θ`, for importance sampling.
///
/// Passage is certain when the tilted drift `ψ'(θ)` is positive. The
/// likelihood ratio on `{τ(u) < ∞}` is `e^{−θX_{τ(u)} + ψ(θ)τ(u)}`; in the
/// Cramér case with `θ = α` this is `e^{−α(u + overshoot)}`.
#[derive(Debug, Clone)]
pub struct TiltedSimulator {
    theta: f64,
    psi_theta: f64,
    original: ClaimDistribution,
    /// `λ/λ_θ = 1/M(θ)`
    arrival_ratio: f64,
    inner: Simulator,
}

impl TiltedSimulator {
    pub fn new(model: &RiskModel, theta: f64) -> Result<Self> {
        let tilted = model.esscher_transform(theta)?;
        if !(tilted.mean_drift() > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tilt {theta} leaves non-positive drift {}; passage is not certain",
                tilted.mean_drift()
            )));
        }
        Ok(TiltedSimulator {
            theta,
            psi_theta: model.laplace_exponent(theta),
            original: model.claims().clone(),
            arrival_ratio: model.claim_intensity() / tilted.claim_intensity(),
            inner: Simulator::with_safe_depth(&tilted, f64::INFINITY),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tilted_model(&self) -> &RiskModel {
        self.inner.model()
    }

    pub fn first_passage(&self, u: f64, seed: StreamSeed) -> Result<FirstPassageRecord> {
        check_nonnegative("u", u)?;
        let mut rec = self.inner.run_passage(u, f64::INFINITY, false, &mut seed.rng())?;
        let level = u + rec.overshoot;
        rec.weight = (-self.theta * level + self.psi_theta * rec.tau).exp();
        Ok(rec)
    }

    /// First passage by conditioning on the passing claim.
    ///
    /// The path runs under the tilted law until it passes `u`. At the `j`-th
    /// claim instant `T_j`, with gap `d_j = u − X_{T_j−}`, the original-law
    /// chance of passing with that claim, times the likelihood ratio of the
    /// history up to and including the arrival at `T_j`, is
    /// `w_j = M(θ)⁻¹·e^{−θu + ψ(θ)T_j}·e^{θd_j}F̄(d_j)`. One instant is chosen with
    /// probability `w_j/Σw`, its passing claim is drawn from `F` conditioned
    /// to exceed `d_j`, and the record carries weight `Σw`.
    ///
    /// Each term is bounded by `e^{−θu}·sup e^{θd}F̄(d)`, so the weights stay
    /// bounded when `ψ(θ) < 0`, where the plain likelihood ratio
    /// `e^{−θX_τ + ψ(θ)τ}` concentrates on rare early passages.
    pub fn first_passage_conditional(&self, u: f64, seed: StreamSeed) -> Result<FirstPassageRecord> {
        check_nonnegative("u", u)?;
        let mut rng = seed.rng();
        let model = self.inner.model();
        let c = model.premium_rate();
        let (mut t, mut x) = (0.0f64, 0.0f64);
        let (mut running_max, mut g) = (0.0f64, 0.0f64);
        let mut total = 0.0;
        // (time, gap, running max, time of the running max)
        let mut chosen = None;
        loop {
            let dt = self.inner.clock.sample(&mut rng);
            t += dt;
            let before = x - c * dt;
            let gap = u - before;
            let w = (self.psi_theta * t).exp() * self.original.exp_weighted_tail(self.theta, gap);
            if w > 0.0 {
                total += w;
                if rng.random::<f64>() * total < w {
                    chosen = Some((t, gap, running_max, g));
                }
            }
            let after = before + model.claims().sample(&mut rng);
            if after > u {
                break;
            }
            if after > running_max {
                running_max = after;
                g = t;
            }
            x = after;
        }
        let (tau, gap, max_before, g) = chosen.ok_or_else(|| {
            Error::InvalidArgument("no claim instant with positive passage probability; claims are bounded".into())
        })?;
        let claim = gap + self.original.sample_excess(gap, &mut rng);
        let (undershoot_path, overshoot) = split_claim(claim, gap);
        let (last_max_time, passage_delay) = split_time(tau, g);
        Ok(FirstPassageRecord {
            ruined: true,
            tau,
            last_max_time,
            passage_delay,
            undershoot_max: (u - max_before).min(undershoot_path),
            undershoot_path,
            overshoot,
            weight: self.arrival_ratio * (-self.theta * u).exp() * total,
            last_claim: claim,
        })
    }
}

fn check_nonnegative(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{name} must be nonnegative, got {v}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) {
        return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

pub fn simulate_first_passage(model: &RiskModel, u: f64, horizon: f64, seed: StreamSeed) -> Result<FirstPassageRecord> {
    Simulator::new(model).first_passage(u, horizon, seed)
}

pub fn simulate_first_passage_tilted(model: &RiskModel, u: f64, alpha: f64, seed: StreamSeed) -> Result<FirstPassageRecord> {
    TiltedSimulator::new(model, alpha)?.first_passage(u, seed)
}

pub fn simulate_excursion(model: &RiskModel, horizon: f64, seed: StreamSeed) -> Result<ExcursionRecord> {
    Simulator::new(model).excursion(horizon, seed, false)
}

pub fn simulate_descending_ladder(model: &RiskModel, horizon: f64, seed: StreamSeed) -> Result<LadderSample> {
    Simulator::new(model).descending_ladder(horizon, seed)
}

/// Runs `f` on streams `first .. first + n` of `master_seed` on a pool of
/// `workers` threads. Output order follows the stream index, so the result
/// does not depend on the worker count.
pub fn run_streams<T, F>(master_seed: u64, first: u64, n: u64, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(StreamSeed) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| f(StreamSeed::new(master_seed, first + i)))
            .collect()
    })
}
