use serde::Serialize;

use super::quintuple::mean_and_se;
use super::{ConvergenceMode, LimitConstants};
use crate::error::{Error, Result};
use crate::ladder_calculus::{check_edges, LadderSystem, MIN_POINTS_PER_CELL};
use crate::path_sim::LadderSample;
use crate::risk_model::Regime;

/// Limit law of `τ(u) − G_{τ(u)−}` on a time grid,
/// `q⁻¹(K(dt) − ψ(α)·∫e^{−αv}V̂(dt, dv))` with
/// `K(dt) = ∫(e^{αz} − 1) Π_{L⁻¹,H}(dt, dz)`; the second term is present only
/// under convolution equivalence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeMarginalLimit {
    pub regime: Regime,
    pub mode: ConvergenceMode,
    pub time_edges: Vec<f64>,
    pub mass: Vec<f64>,
    pub std_error: Vec<f64>,
    /// The `K(dt)/q` part of each cell.
    pub ladder_part: Vec<f64>,
    /// Mass before the first edge and after the last, with standard errors.
    pub below: (f64, f64),
    pub beyond: (f64, f64),
    /// Total over all times; exact, since every depth is hit at some time.
    pub total_mass: f64,
    pub points_per_time_cell: Vec<usize>,
    pub n_samples: usize,
}

/// Estimates the time marginal from descending-ladder samples.
///
/// For each sample the time cell `(t_a, t_b]` collects the depths
/// `v ∈ (m(t_a), m(t_b)]`, over which both terms integrate in closed form.
pub fn time_marginal_limit(
    system: &LadderSystem,
    samples: &[LadderSample],
    time_edges: &[f64],
) -> Result<TimeMarginalLimit> {
    let k = LimitConstants::new(system)?;
    check_edges("time", time_edges)?;
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(format!("{} ladder samples", samples.len())));
    }
    let t_end = *time_edges.last().unwrap();
    if let Some(s) = samples.iter().find(|s| s.horizon < t_end) {
        return Err(Error::InvalidArgument(format!("sample horizon {} ends before the time grid ({t_end})", s.horizon)));
    }
    let nt = time_edges.len() - 1;
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

    let a = k.alpha;
    let ladder_factor = k.pi_factor / k.q;
    // −ψ(α)·(k/c)/q, times ∫e^{−αv}dv
    let ce_factor = match k.regime {
        Regime::ConvolutionEquivalent => -system.psi(a) * system.hat_v_density() / k.q,
        _ => 0.0,
    };
    let cell = |ma: f64, mb: f64| {
        let ladder = ladder_factor * (k.w_integral(mb) - k.w_integral(ma));
        let dual = if ce_factor > 0.0 { ce_factor * ((-a * ma).exp() - (-a * mb).exp()) / a } else { 0.0 };
        (ladder, dual)
    };

    // per sample: cells, then below and beyond
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(samples.len()); nt + 2];
    let mut ladder_cols: Vec<Vec<f64>> = vec![Vec::with_capacity(samples.len()); nt];
    for s in samples {
        let depths: Vec<f64> = time_edges.iter().map(|&t| s.depth_at(t)).collect();
        for i in 0..nt {
            let (l, d) = cell(depths[i], depths[i + 1]);
            cols[i].push(l + d);
            ladder_cols[i].push(l);
        }
        let (l, d) = cell(0.0, depths[0]);
        cols[nt].push(l + d);
        let (l, d) = cell(depths[nt], f64::INFINITY);
        cols[nt + 1].push(l + d);
    }
    let stats: Vec<(f64, f64)> = cols.iter().map(|c| mean_and_se(c)).collect();
    let (l_all, d_all) = cell(0.0, f64::INFINITY);
    Ok(TimeMarginalLimit {
        regime: k.regime,
        mode: ConvergenceMode::Weak,
        time_edges: time_edges.to_vec(),
        mass: stats[..nt].iter().map(|s| s.0).collect(),
        std_error: stats[..nt].iter().map(|s| s.1).collect(),
        ladder_part: ladder_cols.iter().map(|c| mean_and_se(c).0).collect(),
        below: stats[nt],
        beyond: stats[nt + 1],
        total_mass: k.atom + l_all + d_all,
        points_per_time_cell: points,
        n_samples: samples.len(),
    })
}
