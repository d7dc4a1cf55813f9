//! Renewal function of the ascending ladder height.
//!
//! `V = (q + |Π_H|)⁻¹ Σ_n r^n G^{*n}` with `r = |Π_H|/(q + |Π_H|)` and `G` the
//! normalized ladder jump law. The ruin function `ψ(u) = q·V̄(u)` solves
//! `ψ = r·Ḡ + r·(g ∗ ψ)`, which is discretized by the trapezoid rule and
//! refined by Richardson extrapolation over steps `h`, `h/2` and `h/4`.

use serde::Serialize;

use super::grid::{GridMeasure, TailClosure};
use crate::error::{Error, Result};

/// Extrapolation error above which the step is halved again.
pub const RENEWAL_TOLERANCE: f64 = 1e-9;
const MAX_REFINEMENTS: u32 = 2;

/// `ψ(u) = q·V̄(u)` tabulated on `[0, x_max]` plus a tail closure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalFunction {
    pub step: f64,
    pub ruin: Vec<f64>,
    /// Killing rate `q` of the system that produced it; `V̄ = ψ/q`.
    pub q: f64,
    /// Richardson error estimate, max over the grid.
    pub error_estimate: f64,
    /// Extra step halvings beyond `h/4`.
    pub refinements: u32,
    pub closure: TailClosure,
}

/// Trapezoid solution of `ψ = r·Ḡ + r·(g ∗ ψ)` on `0, h, …, n·h`.
fn solve(r: f64, g: &[f64], gbar: &[f64], h: f64) -> Vec<f64> {
    let n = g.len();
    let mut psi = vec![0.0; n];
    psi[0] = r * gbar[0];
    let denom = 1.0 - 0.5 * r * h * g[0];
    for i in 1..n {
        let mut conv = 0.5 * g[i] * psi[0];
        for j in 1..i {
            conv += g[j] * psi[i - j];
        }
        psi[i] = (r * gbar[i] + r * h * conv) / denom;
    }
    psi
}

/// Tabulates `ψ` with Richardson refinement.
///
/// Solves at `h`, `h/2` and `h/4`; the error estimate is the gap between the
/// two extrapolations, and the finer one is returned. When the gap exceeds
/// [`RENEWAL_TOLERANCE`] the step is halved again (at most three times).
/// `g` and `gbar` are the density and tail of the normalized ladder jump law;
/// `closure_for(u_end, ψ(u_end))` supplies the continuation past the grid.
pub(crate) fn tabulate(
    r: f64,
    q: f64,
    g: impl Fn(f64) -> f64,
    gbar: impl Fn(f64) -> f64,
    h: f64,
    x_max: f64,
    closure_for: impl Fn(f64, f64) -> TailClosure,
) -> Result<RenewalFunction> {
    if !(h > 0.0 && x_max > h) {
        return Err(Error::InvalidArgument(format!("renewal grid needs 0 < h < x_max, got h={h}, x_max={x_max}")));
    }
    let n = (x_max / h).ceil() as usize;
    let level = |k: u32| {
        let step = h / f64::from(1u32 << k);
        let m = n << k;
        let gs: Vec<f64> = (0..=m).map(|i| g(i as f64 * step)).collect();
        let gb: Vec<f64> = (0..=m).map(|i| gbar(i as f64 * step)).collect();
        solve(r, &gs, &gb, step)
    };
    // Richardson value at coarse point i from levels k and k+1
    let extrapolate = |lv: &[Vec<f64>], k: usize, i: usize| {
        let s = 1usize << k;
        (4.0 * lv[k + 1][2 * i * s] - lv[k][i * s]) / 3.0
    };
    let mut levels = vec![level(0), level(1)];
    let mut refinements = 0;
    loop {
        levels.push(level(levels.len() as u32));
        let k = levels.len() - 3;
        let mut err: f64 = 0.0;
        let mut ruin = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let (r1, r2) = (extrapolate(&levels, k, i), extrapolate(&levels, k + 1, i));
            err = err.max((r2 - r1).abs());
            ruin.push(r2);
        }
        if err <= RENEWAL_TOLERANCE || refinements == MAX_REFINEMENTS {
            for i in 1..ruin.len() {
                // extrapolation can break monotonicity by rounding far out
                ruin[i] = ruin[i].min(ruin[i - 1]).max(0.0);
            }
            let end = n as f64 * h;
            let closure = closure_for(end, ruin[n]);
            return Ok(RenewalFunction { step: h, ruin, q, error_estimate: err, refinements, closure });
        }
        refinements += 1;
        // coarse levels are no longer needed
        levels[k] = Vec::new();
    }
}

impl RenewalFunction {
    pub fn grid_end(&self) -> f64 {
        (self.ruin.len() - 1) as f64 * self.step
    }

    /// `P(τ(u) < ∞) = q·V̄(u)`; cubic interpolation on the grid.
    pub fn ruin_probability(&self, u: f64) -> f64 {
        if u < 0.0 {
            return 1.0;
        }
        if u >= self.grid_end() {
            return self.closure.tail(u);
        }
        let s = u / self.step;
        let i = (s.floor() as usize).min(self.ruin.len() - 2);
        let t = s - i as f64;
        if t == 0.0 {
            return self.ruin[i];
        }
        // four-point Lagrange, shifted at the ends
        let last = self.ruin.len() - 1;
        let j0 = i.saturating_sub(1).min(last.saturating_sub(3));
        let xs = s - j0 as f64;
        let mut acc = 0.0;
        for a in 0..4 {
            let mut w = 1.0;
            for b in 0..4 {
                if a != b {
                    w *= (xs - b as f64) / (a as f64 - b as f64);
                }
            }
            acc += w * self.ruin[j0 + a];
        }
        acc
    }

    /// `V̄(u) = V(∞) − V(u)`.
    pub fn tail(&self, u: f64) -> f64 {
        self.ruin_probability(u) / self.q
    }

    /// `V(u)`; `V(∞) = 1/q`.
    pub fn value(&self, u: f64) -> f64 {
        (1.0 - self.ruin_probability(u)) / self.q
    }

    /// Lebesgue density of `V` on `(0, ∞)`, `−ψ'(u)/q`.
    pub fn density(&self, u: f64) -> f64 {
        let h = self.step;
        if u >= self.grid_end() {
            return self.closure.density(u) / self.q;
        }
        let lo = (u - h).max(0.0);
        let hi = u + h;
        (self.ruin_probability(lo) - self.ruin_probability(hi)) / (hi - lo) / self.q
    }

    /// `V*(x) = ∫_{[0,x]} e^{αy} V(dy)`, by the trapezoid rule on the grid.
    pub fn tilted(&self, alpha: f64, x: f64) -> f64 {
        let atom = (1.0 - self.ruin[0]) / self.q;
        let n = ((x / self.step).round() as usize).min(self.ruin.len() - 1);
        let mut acc = 0.0;
        for i in 0..n {
            // exact V-mass of the cell times e^{α·midpoint}
            let mass = (self.ruin[i] - self.ruin[i + 1]) / self.q;
            acc += mass * (alpha * (i as f64 + 0.5) * self.step).exp();
        }
        atom + acc
    }

    /// `V` as a grid measure: atom `V(0)`, density and tail `V̄`.
    pub fn to_grid_measure(&self) -> Result<GridMeasure> {
        let x: Vec<f64> = (0..self.ruin.len()).map(|i| i as f64 * self.step).collect();
        let density = x.iter().map(|&u| self.density(u).max(0.0)).collect();
        let tail = self.ruin.iter().map(|p| p / self.q).collect();
        let closure = self.closure.scaled(1.0 / self.q);
        GridMeasure::new(x, (1.0 - self.ruin[0]) / self.q, density, tail, closure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_jumps_give_exponential_ruin() {
        // G = Exp(1), r = 0.5: ψ(u) = 0.5·e^{−0.5u}
        let f = tabulate(0.5, 0.5, |x| (-x).exp(), |x| (-x).exp(), 0.02, 25.0, |_, _| TailClosure::Zero).unwrap();
        for i in 0..=20 {
            let u = i as f64;
            assert!((f.ruin_probability(u) - 0.5 * (-0.5 * u).exp()).abs() < 1e-9);
        }
        assert!(f.error_estimate < RENEWAL_TOLERANCE && f.refinements == 0);
        assert!((f.ruin_probability(3.333) - 0.5 * (-0.5 * 3.333f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(tabulate(0.5, 0.5, |x| (-x).exp(), |x| (-x).exp(), 0.0, 1.0, |_, _| TailClosure::Zero).is_err());
    }
}
