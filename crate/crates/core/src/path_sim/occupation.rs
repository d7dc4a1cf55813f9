use rand_distr::Distribution;
use serde::Serialize;

use super::{run_streams, Simulator};
use crate::error::{Error, Result};
use crate::risk_model::RiskModel;
use crate::rng::StreamSeed;

/// Mean time per unit depth spent in each cell before `τ(0)`,
/// `∫₀^∞ P(X_t ∈ −dz, τ(0) > t) dt / dz`, with per-cell standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationHistogram {
    pub edges: Vec<f64>,
    pub density: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Mean time spent deeper than the last edge.
    pub overflow: f64,
    pub n_paths: u64,
    /// Mean of `e^{−τ(0)}; τ(0) < ∞` and its standard error.
    pub discounted_mark: f64,
    pub discounted_mark_se: f64,
}

impl OccupationHistogram {
    /// Local-time scale `p` under the `e^{−t}` normalization, `1/(1 − E e^{−τ(0)})`.
    pub fn local_time_scale(&self) -> f64 {
        1.0 / (1.0 - self.discounted_mark)
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

/// One excursion's occupation. Returns per-cell time, overflow time and the
/// discounted mark.
fn one_path(sim: &Simulator, edges: &[f64], seed: StreamSeed) -> (Vec<f64>, f64, f64) {
    let model = sim.model();
    let c = model.premium_rate();
    let z_max = *edges.last().unwrap();
    let floor = -(sim.safe_depth() + z_max);
    let clock = rand_distr::Exp::new(model.claim_intensity()).unwrap();
    let mut rng = seed.rng();
    let mut cells = vec![0.0; edges.len() - 1];
    let mut overflow = 0.0;
    let (mut t, mut x) = (0.0f64, 0.0f64);
    loop {
        let dt: f64 = clock.sample(&mut rng);
        // a censored path stops at the floor
        let before = (x - c * dt).max(floor);
        let (top, bottom) = (-x, -before);
        for (i, w) in edges.windows(2).enumerate() {
            cells[i] += overlap(top, bottom, w[0], w[1]) / c;
        }
        overflow += overlap(top, bottom, z_max, f64::INFINITY) / c;
        if before <= floor {
            return (cells, overflow, 0.0);
        }
        t += dt;
        x = before + model.claims().sample(&mut rng);
        if x > 0.0 {
            return (cells, overflow, (-t).exp());
        }
    }
}

/// Occupation density of the path killed at `τ(0)`, from `n_paths`
/// excursions on streams `seed, seed+1, …`.
pub fn occupation_histogram(
    model: &RiskModel,
    edges: &[f64],
    n_paths: u64,
    seed: StreamSeed,
    workers: usize,
) -> Result<OccupationHistogram> {
    if edges.len() < 2 || edges[0] != 0.0 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("depth grid must start at 0 and increase strictly".into()));
    }
    if n_paths < 2 {
        return Err(Error::InsufficientSamples(format!("{n_paths} paths")));
    }
    let sim = Simulator::new(model);
    let paths = run_streams(seed.master_seed, seed.stream_index, n_paths, workers, |s| {
        Ok(one_path(&sim, edges, s))
    })?;
    let n = n_paths as f64;
    let k = edges.len() - 1;
    let (mut s1, mut s2) = (vec![0.0; k], vec![0.0; k]);
    let (mut overflow, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (cells, over, mark) in &paths {
        for i in 0..k {
            s1[i] += cells[i];
            s2[i] += cells[i] * cells[i];
        }
        overflow += over;
        m1 += mark;
        m2 += mark * mark;
    }
    let se = |a: f64, b: f64| ((b / n - (a / n).powi(2)).max(0.0) / (n - 1.0)).sqrt();
    let width: Vec<f64> = edges.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(OccupationHistogram {
        edges: edges.to_vec(),
        density: (0..k).map(|i| s1[i] / n / width[i]).collect(),
        std_error: (0..k).map(|i| se(s1[i], s2[i]) / width[i]).collect(),
        overflow: overflow / n,
        n_paths,
        discounted_mark: m1 / n,
        discounted_mark_se: se(m1, m2),
    })
}
