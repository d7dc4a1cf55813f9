use serde::Serialize;

use crate::error::{Error, Result};
use crate::path_sim::LadderSample;
use crate::risk_model::RiskModel;

/// Fewest ladder points a time cell may hold.
pub const MIN_POINTS_PER_CELL: usize = 100;

/// Cell masses of `Π_{L⁻¹,H}(dt, dx) = ∫ V̂(dt, dv) Π_X(v + dx)` with
/// standard errors over the ladder samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BivariateLadderMeasure {
    pub time_edges: Vec<f64>,
    pub space_edges: Vec<f64>,
    /// `mass[i][j]` for time cell `i`, space cell `j`.
    pub mass: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
    pub spatial_marginal: Vec<f64>,
    pub spatial_marginal_se: Vec<f64>,
    pub total_mass: f64,
    pub total_mass_se: f64,
    pub points_per_time_cell: Vec<usize>,
    pub n_samples: usize,
}

pub(crate) fn check_edges(name: &str, e: &[f64]) -> Result<()> {
    if e.len() < 2 || e[0] < 0.0 || e.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(format!("{name} edges must be nonnegative and increase strictly")));
    }
    Ok(())
}

struct Moments {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Moments { s1: vec![0.0; n], s2: vec![0.0; n] }
    }
    fn add(&mut self, i: usize, v: f64) {
        self.s1[i] += v;
        self.s2[i] += v * v;
    }
    fn mean_se(&self, i: usize, n: f64) -> (f64, f64) {
        let m = self.s1[i] / n;
        let var = (self.s2[i] / n - m * m).max(0.0) * n / (n - 1.0);
        (m, (var / n).sqrt())
    }
}

/// Estimates `V̂(dt, dv) = (1/c)·P(T̂_v ∈ dt)·dv` from descending-ladder samples
/// and convolves it with `Π_X`.
///
/// `T̂_v ∈ (t_a, t_b]` exactly when `v ∈ (m(t_a), m(t_b)]`, with `m` the running
/// minimum depth, so each sample's cell mass is a difference of integrated
/// claim tails; no discretization in `v`. The last space edge may be `∞`.
pub fn bivariate_ladder_measure(
    model: &RiskModel,
    samples: &[LadderSample],
    time_edges: &[f64],
    space_edges: &[f64],
) -> Result<BivariateLadderMeasure> {
    check_edges("time", time_edges)?;
    check_edges("space", space_edges)?;
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(format!("{} ladder samples", samples.len())));
    }
    let t_end = *time_edges.last().unwrap();
    if let Some(s) = samples.iter().find(|s| s.horizon < t_end) {
        return Err(Error::InvalidArgument(format!("sample horizon {} ends before the time grid ({t_end})", s.horizon)));
    }
    let nt = time_edges.len() - 1;
    let nx = space_edges.len() - 1;
    let mut points = vec![0usize; nt];
    for s in samples {
        for seg in &s.segments {
            let t = seg.end_time;
            if t > time_edges[0] && t <= t_end {
                points[time_edges.partition_point(|e| *e < t) - 1] += 1;
            }
        }
    }
    if let Some(i) = points.iter().position(|&p| p < MIN_POINTS_PER_CELL) {
        return Err(Error::InsufficientSamples(format!(
            "time cell [{}, {}] holds {} ladder points (< {MIN_POINTS_PER_CELL})",
            time_edges[i],
            time_edges[i + 1],
            points[i]
        )));
    }

    let claims = model.claims();
    let factor = model.claim_intensity() / model.premium_rate();
    let itail = |x: f64| if x.is_infinite() { 0.0 } else { claims.integrated_tail(x) };
    let mut cells = Moments::new(nt * nx);
    let mut marginal = Moments::new(nx);
    let mut total = Moments::new(1);
    let mut row = vec![0.0; nx];
    for s in samples {
        let depths: Vec<f64> = time_edges.iter().map(|&t| s.depth_at(t)).collect();
        row.iter_mut().for_each(|r| *r = 0.0);
        for i in 0..nt {
            let (ma, mb) = (depths[i], depths[i + 1]);
            for j in 0..nx {
                let (xa, xb) = (space_edges[j], space_edges[j + 1]);
                let v = if mb > ma {
                    // ∫_{ma}^{mb} (F̄(v + xa) − F̄(v + xb)) dv
                    factor * ((itail(ma + xa) - itail(mb + xa)) - (itail(ma + xb) - itail(mb + xb)))
                } else {
                    0.0
                };
                cells.add(i * nx + j, v);
                row[j] += v;
            }
        }
        for (j, v) in row.iter().enumerate() {
            marginal.add(j, *v);
        }
        total.add(0, row.iter().sum());
    }
    let n = samples.len() as f64;
    let mut mass = vec![vec![0.0; nx]; nt];
    let mut se = vec![vec![0.0; nx]; nt];
    for i in 0..nt {
        for j in 0..nx {
            (mass[i][j], se[i][j]) = cells.mean_se(i * nx + j, n);
        }
    }
    let (spatial_marginal, spatial_marginal_se) = (0..nx).map(|j| marginal.mean_se(j, n)).unzip();
    let (total_mass, total_mass_se) = total.mean_se(0, n);
    Ok(BivariateLadderMeasure {
        time_edges: time_edges.to_vec(),
        space_edges: space_edges.to_vec(),
        mass,
        std_error: se,
        spatial_marginal,
        spatial_marginal_se,
        total_mass,
        total_mass_se,
        points_per_time_cell: points,
        n_samples: samples.len(),
    })
}

/// Probability that an excursion below the maximum ends in the box
/// `duration ∈ (t₀, t₁]`, `pre-jump depth ∈ (z₀, z₁]`, `height ∈ (x₀, x₁]`,
/// `∫∫ V̂(dt, dz) Π_X(z + dx)` over the box, with its standard error over the
/// ladder samples. Depth and height ends may be `∞`.
pub fn excursion_cell_probability(
    model: &RiskModel,
    samples: &[LadderSample],
    t: (f64, f64),
    z: (f64, f64),
    x: (f64, f64),
) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(format!("{} ladder samples", samples.len())));
    }
    if let Some(s) = samples.iter().find(|s| s.horizon < t.1) {
        return Err(Error::InvalidArgument(format!("sample horizon {} ends before t = {}", s.horizon, t.1)));
    }
    let claims = model.claims();
    let factor = model.claim_intensity() / model.premium_rate();
    let itail = |v: f64| if v.is_infinite() { 0.0 } else { claims.integrated_tail(v) };
    let mut m = Moments::new(1);
    for s in samples {
        let lo = s.depth_at(t.0).max(z.0);
        let hi = s.depth_at(t.1).min(z.1);
        let v = if hi > lo { factor * ((itail(lo + x.0) - itail(hi + x.0)) - (itail(lo + x.1) - itail(hi + x.1))) } else { 0.0 };
        m.add(0, v);
    }
    Ok(m.mean_se(0, samples.len() as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_sim::LadderSegment;

    #[test]
    fn running_minimum_interpolates_segments() {
        let s = LadderSample {
            segments: vec![
                LadderSegment { start_time: 0.0, start_depth: 0.0, end_time: 1.0, end_depth: 2.0 },
                LadderSegment { start_time: 3.0, start_depth: 2.0, end_time: 4.0, end_depth: 4.0 },
            ],
            horizon: 10.0,
            truncation_depth: 4.0,
        };
        assert_eq!(s.depth_at(0.5), 1.0);
        assert_eq!(s.depth_at(2.0), 2.0);
        assert_eq!(s.depth_at(3.5), 3.0);
        assert_eq!(s.depth_at(9.0), 4.0);
    }

    #[test]
    fn excursion_cells_add_up_to_the_bivariate_measure() {
        let model = crate::risk_model::reference::m1();
        let samples = crate::path_sim::run_streams(5, 0, 400, 2, |s| crate::path_sim::simulate_descending_ladder(&model, 20.0, s)).unwrap();
        let (t, x) = ([0.0, 1.0, 20.0], [0.0, 0.5, f64::INFINITY]);
        let b = bivariate_ladder_measure(&model, &samples, &t, &x);
        let z = [0.0, 0.3, 1.0, f64::INFINITY];
        for i in 0..2 {
            for j in 0..2 {
                let sum: f64 = z
                    .windows(2)
                    .map(|w| excursion_cell_probability(&model, &samples, (t[i], t[i + 1]), (w[0], w[1]), (x[j], x[j + 1])).unwrap().0)
                    .sum();
                if let Ok(b) = &b {
                    assert!((sum - b.mass[i][j]).abs() < 1e-12);
                }
                assert!(sum > 0.0);
            }
        }
        let all = excursion_cell_probability(&model, &samples, (0.0, 20.0), (0.0, f64::INFINITY), (0.0, f64::INFINITY)).unwrap().0;
        // P(τ(0) < ∞) = ρ, less what completes after the horizon
        assert!(all < 0.5 && all > 0.45, "{all}");
    }
}
