use std::io::Write;

use serde::Serialize;

use super::{exp_times, ConvergenceMode, LimitConstants, QUAD_ABS, QUAD_REL};
use crate::error::{Error, Result};
use crate::ladder_calculus::LadderSystem;
use crate::numerics::{integrate, integrate_from};
use crate::path_sim::LadderSample;
use crate::risk_model::Regime;

/// Joint limit density of `(y, x, v)` at passage,
/// `(α/q)·e^{αy}·1(v ≥ y)·(k/c)·λf(v + x)`, with the time coordinate carried
/// by `V̂(dt, dv − y)` and estimated from descending-ladder samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuintupleDensity {
    pub regime: Regime,
    pub mode: ConvergenceMode,
    pub alpha: f64,
    pub q: f64,
    #[serde(skip)]
    constants: LimitConstants,
}

/// Joint limit law of the undershoots and the overshoot. Under convolution
/// equivalence the same formula holds as a vague limit.
pub fn quintuple_limit_density(system: &LadderSystem) -> Result<QuintupleDensity> {
    let k = LimitConstants::new(system)?;
    let mode = match k.regime {
        Regime::CramerLundberg => ConvergenceMode::Weak,
        _ => ConvergenceMode::Vague,
    };
    Ok(QuintupleDensity { regime: k.regime, mode, alpha: k.alpha, q: k.q, constants: k })
}

impl QuintupleDensity {
    pub fn density(&self, y: f64, x: f64, v: f64) -> f64 {
        if !(y >= 0.0 && x >= 0.0 && v >= y) {
            return 0.0;
        }
        let k = &self.constants;
        k.alpha / k.q * k.pi_factor * exp_times(k.alpha * y, k.claims.density(v + x))
    }

    /// `y`-range of the box for fixed `v`: `y ∈ Y`, `y ≤ v`, `v − y ∈ (z₀, z₁]`.
    fn y_range(v: f64, y: (f64, f64), z: (f64, f64)) -> Option<(f64, f64)> {
        let lo = y.0.max(v - z.1).max(0.0);
        let hi = y.1.min(v - z.0).min(v);
        (hi > lo).then_some((lo, hi))
    }

    fn box_integral(&self, y: (f64, f64), x: (f64, f64), v: (f64, f64), z: (f64, f64)) -> f64 {
        let k = &self.constants;
        let (a, claims) = (k.alpha, &k.claims);
        // e^{αh}·F̄(s) for h ≤ s, without overflow
        let weighted = |h: f64, s: f64| {
            if s.is_infinite() {
                0.0
            } else {
                (a * (h - s)).exp() * claims.exp_weighted_tail(a, s)
            }
        };
        // x integrated analytically, then y over (lo, hi], leaving v
        let g = |w: f64| match Self::y_range(w, y, z) {
            Some((lo, hi)) => {
                -(a * (lo - hi)).exp_m1() * (weighted(hi, w + x.0) - weighted(hi, w + x.1))
            }
            None => 0.0,
        };
        let lo = v.0.max(y.0).max(0.0);
        let body = if v.1.is_infinite() {
            integrate_from(g, lo, 20.0 * claims.characteristic_scale(), QUAD_ABS, QUAD_REL).value
        } else if v.1 > lo {
            integrate(g, lo, v.1, QUAD_ABS, QUAD_REL).value
        } else {
            0.0
        };
        k.pi_factor / k.q * body
    }

    /// Mass of the box `(y₀, y₁] × (x₀, x₁] × (v₀, v₁]`; ends may be `∞`.
    pub fn cell_mass(&self, y: (f64, f64), x: (f64, f64), v: (f64, f64)) -> f64 {
        self.box_integral(y, x, v, (0.0, f64::INFINITY))
    }

    /// Total mass: one under Cramér, `1 − κ(0, −α)/q` under convolution equivalence.
    pub fn total_mass(&self) -> f64 {
        let inf = (0.0, f64::INFINITY);
        self.cell_mass(inf, inf, inf) + self.constants.atom
    }

    /// Mass of a box with the time coordinate in `(t₀, t₁]`, with standard
    /// error over the samples. `T̂_z ∈ (t₀, t₁]` exactly when
    /// `z ∈ (m(t₀), m(t₁)]`, `m` the running minimum depth.
    pub fn cell_mass_with_time(
        &self,
        samples: &[LadderSample],
        y: (f64, f64),
        x: (f64, f64),
        v: (f64, f64),
        t: (f64, f64),
    ) -> Result<(f64, f64)> {
        if samples.len() < 2 {
            return Err(Error::InsufficientSamples(format!("{} ladder samples", samples.len())));
        }
        if let Some(s) = samples.iter().find(|s| s.horizon < t.1) {
            return Err(Error::InvalidArgument(format!("sample horizon {} ends before t = {}", s.horizon, t.1)));
        }
        let values: Vec<f64> = samples
            .iter()
            .map(|s| self.box_integral(y, x, v, (s.depth_at(t.0), s.depth_at(t.1))))
            .collect();
        Ok(mean_and_se(&values))
    }

    /// Columns `y, x, v, density` over the product grid.
    pub fn write_csv<W: Write>(&self, out: W, ys: &[f64], xs: &[f64], vs: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["y", "x", "v", "density"]).map_err(fmt)?;
        for &yy in ys {
            for &xx in xs {
                for &vv in vs {
                    w.serialize((yy, xx, vv, self.density(yy, xx, vv))).map_err(fmt)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
