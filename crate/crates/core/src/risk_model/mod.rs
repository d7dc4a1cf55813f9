//! The claim-surplus process `X_t = Σ_{i≤N_t} ξ_i − c·t` and its exponential
//! moment structure.
//!
//! Everything downstream works with the Laplace exponent
//! `ψ(θ) = log E e^{θX₁} = λ(M(θ) − 1) − cθ`, where `M` is the claim moment
//! generating function. Claims are positive and the drift between claims is
//! `−c`, so the process is compound Poisson, spectrally positive and
//! irregular upwards: it can only pass a level by a jump.

mod claims;
pub mod config;

pub use claims::{density_mass, ClaimDistribution, TiltedPareto};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::brent;

/// Gap kept below the abscissa of convergence of `M` when bracketing roots.
pub const THETA_MAX_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskModel {
    premium_rate: f64,
    claim_intensity: f64,
    claims: ClaimDistribution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Regime {
    /// `ψ(α) = 0` with `ψ'(α) < ∞`.
    CramerLundberg,
    /// `ψ(α) < 0` and `M(θ) = ∞` for every `θ > α`.
    ConvolutionEquivalent,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeClassification {
    pub regime: Regime,
    /// Lundberg exponent or convolution-equivalence index; `NaN` for `Neither`.
    pub alpha: f64,
}

impl RegimeClassification {
    pub fn cramer_alpha(&self) -> Option<f64> {
        (self.regime == Regime::CramerLundberg).then_some(self.alpha)
    }
}

impl RiskModel {
    /// Validated model with strictly negative mean drift, so that `X_t → −∞`.
    pub fn new(premium_rate: f64, claim_intensity: f64, claims: ClaimDistribution) -> Result<Self> {
        let model = Self::from_parts(premium_rate, claim_intensity, claims)?;
        let drift = model.mean_drift();
        if !(drift < 0.0) {
            return Err(Error::InvalidModel(format!(
                "mean drift λ·E[ξ] − c = {drift} must be negative (premium does not cover expected claims)"
            )));
        }
        Ok(model)
    }

    /// Model without the drift check; tilted models drift upwards.
    pub(crate) fn from_parts(premium_rate: f64, claim_intensity: f64, claims: ClaimDistribution) -> Result<Self> {
        if !(premium_rate > 0.0 && premium_rate.is_finite()) {
            return Err(Error::InvalidModel(format!("premium_rate must be > 0, got {premium_rate}")));
        }
        if !(claim_intensity > 0.0 && claim_intensity.is_finite()) {
            return Err(Error::InvalidModel(format!("claim_intensity must be > 0, got {claim_intensity}")));
        }
        Ok(RiskModel { premium_rate, claim_intensity, claims })
    }

    pub fn premium_rate(&self) -> f64 {
        self.premium_rate
    }

    pub fn claim_intensity(&self) -> f64 {
        self.claim_intensity
    }

    pub fn claims(&self) -> &ClaimDistribution {
        &self.claims
    }

    /// `λ·E[ξ] − c`.
    pub fn mean_drift(&self) -> f64 {
        self.claim_intensity * self.claims.mean() - self.premium_rate
    }

    /// `ρ = λ·E[ξ]/c`, the ruin probability from zero reserve.
    pub fn load_ratio(&self) -> f64 {
        self.claim_intensity * self.claims.mean() / self.premium_rate
    }

    /// Largest `θ` used when bracketing: the abscissa of convergence of `M`
    /// less [`THETA_MAX_GAP`].
    pub fn theta_max(&self) -> f64 {
        self.claims.mgf_radius().0 - THETA_MAX_GAP
    }

    /// `ψ(θ) = log E e^{θX₁}`; `+∞` where the claim mgf diverges.
    pub fn laplace_exponent(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return 0.0;
        }
        let m = self.claims.mgf(theta);
        if !m.is_finite() {
            return f64::INFINITY;
        }
        self.claim_intensity * (m - 1.0) - self.premium_rate * theta
    }

    /// `ψ'(θ) = λ·E[ξe^{θξ}] − c`.
    pub fn laplace_exponent_derivative(&self, theta: f64) -> f64 {
        let m1 = self.claims.tilted_moment(theta, 1);
        if !m1.is_finite() {
            return f64::INFINITY;
        }
        self.claim_intensity * m1 - self.premium_rate
    }

    /// Positive root `α` of `ψ`, bracketed on `(0, θ_max)`.
    pub fn lundberg_root(&self) -> Result<f64> {
        let theta_max = self.theta_max();
        let top = self.laplace_exponent(theta_max);
        if !(top > 0.0) {
            return Err(Error::NoPositiveRoot { theta_max });
        }
        // ψ'(0) < 0, so ψ is negative just right of the origin
        let mut lo = 0.5 * theta_max;
        while self.laplace_exponent(lo) >= 0.0 {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::RootBracketFailure("ψ not negative near the origin".into()));
            }
        }
        let psi = |t: f64| self.laplace_exponent(t);
        let alpha = brent(psi, lo, theta_max, 1e-16, 500)?;
        let scale = 1f64.max(self.premium_rate * alpha);
        if self.laplace_exponent(alpha).abs() >= 1e-12 * scale {
            return Err(Error::RootBracketFailure(format!(
                "|ψ({alpha})| = {} exceeds tolerance",
                self.laplace_exponent(alpha).abs()
            )));
        }
        Ok(alpha)
    }

    pub fn classify_regime(&self) -> RegimeClassification {
        if let Ok(alpha) = self.lundberg_root() {
            if self.laplace_exponent_derivative(alpha).is_finite() {
                return RegimeClassification { regime: Regime::CramerLundberg, alpha };
            }
        }
        if let ClaimDistribution::TiltedPareto(tp) = &self.claims {
            if tp.tilt > 0.0 && tp.power > 1.0 && self.laplace_exponent(tp.tilt) < 0.0 {
                return RegimeClassification { regime: Regime::ConvolutionEquivalent, alpha: tp.tilt };
            }
        }
        RegimeClassification { regime: Regime::Neither, alpha: f64::NAN }
    }

    /// Esscher transform by `θ`: intensity `λM(θ)`, claims tilted by `e^{θx}`,
    /// same premium rate. The result's Laplace exponent is `ψ(θ + ·) − ψ(θ)`.
    pub fn esscher_transform(&self, theta: f64) -> Result<RiskModel> {
        if theta == 0.0 {
            return Ok(self.clone());
        }
        let m = self.claims.mgf(theta);
        if !m.is_finite() {
            return Err(Error::InfiniteTilt { theta });
        }
        let claims = self.claims.tilt(theta)?;
        RiskModel::from_parts(self.premium_rate, self.claim_intensity * m, claims)
    }

    /// Whether `E|X₁|^order · e^{θX₁} < ∞`.
    ///
    /// For compound Poisson with drift this only depends on the large-jump
    /// behaviour, i.e. on `E ξ^order e^{θξ}`.
    pub fn moment_condition_check(&self, theta: f64, order: u32) -> bool {
        if theta <= 0.0 {
            return true;
        }
        self.claims.moment_finite(theta, order)
    }

    /// Short stable identifier of the parameters, for provenance headers.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("model serializes");
        let digest = Sha256::digest(json.as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Reference models used throughout the tests and the validation command.
pub mod reference {
    use super::*;

    /// `λ = 1, c = 2`, Exp(1) claims: `α = 0.5`, `ρ = 0.5`.
    pub fn m1() -> RiskModel {
        RiskModel::new(2.0, 1.0, ClaimDistribution::exponential(1.0).unwrap()).unwrap()
    }

    /// `λ = 1, c = 0.5`, tilted Pareto claims with tilt 1, power 3, scale 0.5.
    pub fn m2() -> RiskModel {
        RiskModel::new(0.5, 1.0, ClaimDistribution::tilted_pareto(1.0, 3.0, 0.5).unwrap()).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::reference::{m1, m2};
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn laplace_exponent_examples() {
        assert_eq!(m1().laplace_exponent(0.0), 0.0);
        // λθ/(μ−θ) − cθ at θ = 0.5
        assert!(m1().laplace_exponent(0.5).abs() < 1e-15);
        let m2_tp1 = RiskModel::new(0.5, 1.0, ClaimDistribution::tilted_pareto(1.0, 3.0, 1.0).unwrap()).unwrap();
        assert_eq!(m2_tp1.laplace_exponent(1.5), f64::INFINITY);
        assert_eq!(m2().laplace_exponent(1.5), f64::INFINITY);
    }

    #[test]
    fn lundberg_root_examples() {
        let a = m1().lundberg_root().unwrap();
        assert!((a - 0.5).abs() < 1e-12);
        let m = RiskModel::new(2.0, 1.0, ClaimDistribution::exponential(2.0).unwrap()).unwrap();
        assert!((m.lundberg_root().unwrap() - 1.5).abs() < 1e-12);
        assert!(matches!(m2().lundberg_root(), Err(Error::NoPositiveRoot { .. })));
    }

    #[test]
    fn classify_examples() {
        let c = m1().classify_regime();
        assert_eq!(c.regime, Regime::CramerLundberg);
        assert!((c.alpha - 0.5).abs() < 1e-12);
        let c = m2().classify_regime();
        assert_eq!(c.regime, Regime::ConvolutionEquivalent);
        assert_eq!(c.alpha, 1.0);
        assert!(m2().laplace_exponent(1.0) < 0.0);
        let bad = RiskModel::new(0.2, 1.0, ClaimDistribution::tilted_pareto(1.0, 3.0, 0.5).unwrap());
        assert!(matches!(bad, Err(Error::InvalidModel(_))));
    }

    #[test]
    fn m2_constants_by_independent_quadrature() {
        use crate::numerics::integrate_semi_infinite;
        // unnormalized density e^{-x}(1 + 2x)^{-3}
        let g = |x: f64| (-x).exp() * (1.0 + 2.0 * x).powi(-3);
        let z = integrate_semi_infinite(g, 0.0, 1e-15, 1e-13).value;
        let mean = integrate_semi_infinite(|x| x * g(x), 0.0, 1e-15, 1e-13).value / z;
        let m_alpha = integrate_semi_infinite(|x| (1.0 + 2.0 * x).powi(-3), 0.0, 1e-15, 1e-13).value / z;
        let model = m2();
        assert!((model.claims().mean() - mean).abs() < 1e-11);
        assert!((model.laplace_exponent(1.0) - (m_alpha - 1.0 - 0.5)).abs() < 1e-11);
    }

    #[test]
    fn esscher_examples() {
        let t = m1().esscher_transform(0.5).unwrap();
        assert!((t.claim_intensity() - 2.0).abs() < 1e-15);
        assert_eq!(t.premium_rate(), 2.0);
        assert_eq!(t.claims(), &ClaimDistribution::Exponential { rate: 0.5 });
        assert!(t.mean_drift() > 0.0);
        assert!((t.mean_drift() - m1().laplace_exponent_derivative(0.5)).abs() < 1e-12);
        assert_eq!(m1().esscher_transform(0.0).unwrap(), m1());
        assert!(matches!(m2().esscher_transform(1.5), Err(Error::InfiniteTilt { .. })));
    }

    #[test]
    fn moment_condition_examples() {
        assert!(m1().moment_condition_check(0.9, 2));
        let tp1 = RiskModel::new(0.5, 1.0, ClaimDistribution::tilted_pareto(1.0, 3.0, 1.0).unwrap()).unwrap();
        assert!(tp1.moment_condition_check(1.0, 0));
        assert!(!tp1.moment_condition_check(1.0, 2));
    }

    #[test]
    fn psi_convex_with_negative_slope_at_zero() {
        for model in [m1(), m2()] {
            let h = 1e-4;
            let d0 = (model.laplace_exponent(h) - model.laplace_exponent(-h)) / (2.0 * h);
            assert!((d0 - model.mean_drift()).abs() < 1e-6, "{d0} vs {}", model.mean_drift());
            let top = model.theta_max().min(0.9);
            for i in 0..6 {
                let t = -0.5 + (top + 0.5 - 2.0 * h) * i as f64 / 5.0;
                let second = model.laplace_exponent(t + h) - 2.0 * model.laplace_exponent(t) + model.laplace_exponent(t - h);
                assert!(second > -1e-10, "not convex at {t}");
            }
        }
    }

    #[test]
    fn regimes_are_exclusive() {
        let models = [
            m1(),
            m2(),
            RiskModel::new(0.5, 1.0, ClaimDistribution::tilted_pareto(1.0, 3.0, 1.0).unwrap()).unwrap(),
            RiskModel::new(3.0, 1.0, ClaimDistribution::gamma(2.0, 1.0).unwrap()).unwrap(),
        ];
        for m in models {
            let c = m.classify_regime();
            match c.regime {
                Regime::CramerLundberg => {
                    assert!(m.laplace_exponent(c.alpha).abs() < 1e-12 * (1f64).max(m.premium_rate() * c.alpha));
                    assert!(m.laplace_exponent_derivative(c.alpha).is_finite());
                }
                Regime::ConvolutionEquivalent => {
                    assert!(m.laplace_exponent(c.alpha) < 0.0);
                    assert_eq!(m.laplace_exponent(c.alpha + 1e-6), f64::INFINITY);
                }
                Regime::Neither => {}
            }
        }
    }

    proptest! {
        #[test]
        fn esscher_round_trip_preserves_psi(rate in 0.5f64..4.0, lam in 0.1f64..2.0, frac in 0.05f64..0.9, tilt in 0.0f64..1.0) {
            let c = lam / rate * 1.5;
            let m = RiskModel::new(c, lam, ClaimDistribution::exponential(rate).unwrap()).unwrap();
            let theta = tilt * frac * rate;
            let back = m.esscher_transform(theta).unwrap().esscher_transform(-theta).unwrap();
            for i in 0..10 {
                let t = -1.0 + i as f64 * 0.9 * rate / 10.0;
                prop_assert!((back.laplace_exponent(t) - m.laplace_exponent(t)).abs() < 1e-10);
            }
        }

        #[test]
        fn tilted_pareto_round_trip(theta in 0.05f64..0.95) {
            let m = m2();
            let back = m.esscher_transform(theta).unwrap().esscher_transform(-theta).unwrap();
            for t in [-0.5, 0.0, 0.3, 0.7, 0.95] {
                prop_assert!((back.laplace_exponent(t) - m.laplace_exponent(t)).abs() < 1e-10);
            }
        }
    }
}
