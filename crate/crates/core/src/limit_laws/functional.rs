use serde::Serialize;

use super::quintuple::mean_and_se;
use crate::error::{Error, Result};
use crate::ladder_calculus::LadderSystem;
use crate::numerics::integrate;
use crate::path_sim::ExcursionRecord;

/// Fewest completed excursions accepted.
pub const MIN_COMPLETED_EXCURSIONS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_completed: usize,
    pub n_excursions: usize,
}

/// Limit of `E⁽ᵘ⁾ G(Y_u, X_{τ(u)} − u)` from excursions of `X` below zero,
///
/// `(α|Π_H|/q)·E[∫_0^{X_{τ(0)}} e^{αy} G(ε, X_{τ(0)} − y) dy | τ(0) < ∞]`.
///
/// The conditional expectation is an average over completed excursions; the
/// inner integral is computed per excursion by quadrature. `g(ε, x)` must be
/// bounded by a multiple of `e^{αx}`.
pub fn functional_limit_irregular<G>(system: &LadderSystem, excursions: &[ExcursionRecord], g: G) -> Result<FunctionalEstimate>
where
    G: Fn(&ExcursionRecord, f64) -> f64,
{
    let alpha = system
        .alpha()
        .ok_or_else(|| Error::RegimeMismatch("functional limit needs the Cramér or convolution-equivalent regime".into()))?;
    let completed: Vec<&ExcursionRecord> = excursions.iter().filter(|e| e.completed).collect();
    if completed.len() < MIN_COMPLETED_EXCURSIONS {
        return Err(Error::InsufficientSamples(format!(
            "{} completed excursions (< {MIN_COMPLETED_EXCURSIONS})",
            completed.len()
        )));
    }
    let values: Vec<f64> = completed
        .iter()
        .map(|e| {
            let t = e.terminal;
            // substituting x = T − y: e^{αT}∫_0^T e^{−αx} G(ε, x) dx
            let inner = integrate(|x| (-alpha * x).exp() * g(e, x), 0.0, t, 1e-14, 1e-11).value;
            (alpha * t).exp() * inner
        })
        .collect();
    let (mean, se) = mean_and_se(&values);
    let factor = alpha * system.pi_h_mass() / system.q();
    Ok(FunctionalEstimate {
        value: factor * mean,
        std_error: factor * se,
        n_completed: completed.len(),
        n_excursions: excursions.len(),
    })
}
