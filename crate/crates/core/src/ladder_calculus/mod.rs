//! Ladder processes of the claim-surplus process.
//!
//! The local time at the maximum is normalized so that the descending ladder
//! height renewal measure is `V̂(dv) = dv/c`. Then `Π_H` has density
//! `(λ/c)·F̄(x)`, the killing rate is `q = 1 − ρ` and `κ(0, −θ) = −ψ(θ)/(cθ)`.
//! A [`LadderSystem`] can carry any other normalization `k > 0`, which scales
//! `q`, `Π_H` and `κ` by `k`; every probability it exports is unchanged.

mod bivariate;
mod grid;
mod renewal;

pub(crate) use bivariate::check_edges;
pub use bivariate::{bivariate_ladder_measure, excursion_cell_probability, BivariateLadderMeasure, MIN_POINTS_PER_CELL};
pub use grid::{GridMeasure, TailClosure};
pub use renewal::{RenewalFunction, RENEWAL_TOLERANCE};

use std::fmt::Write as _;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numerics::{brent, integrate_from};
use crate::risk_model::{Regime, RegimeClassification, RiskModel};

const QUAD_ABS: f64 = 1e-15;
const QUAD_REL: f64 = 1e-13;

/// Nonnegative root `Φ̂(a)` of `ψ(−θ) = a`, the right inverse of the
/// Laplace exponent of the dual (spectrally negative) process.
pub fn dual_root(model: &RiskModel, a: f64) -> Result<f64> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("a must be >= 0, got {a}")));
    }
    if a == 0.0 {
        // the dual drifts to +∞, so Φ̂(0) = 0
        return Ok(0.0);
    }
    let c = model.premium_rate();
    let hi = (a + model.claim_intensity()) / c;
    let f = |t: f64| model.laplace_exponent(-t) - a;
    if !(f(hi) >= 0.0) {
        return Err(Error::RootBracketFailure(format!("ψ(−θ) − a does not change sign on [0, {hi}]")));
    }
    brent(f, 0.0, hi, 1e-16, 500)
}

/// `κ̂(a, z) = c·(z + Φ̂(a))`, the dual ladder exponent under `V̂(dv) = dv/c`.
pub fn dual_kappa(model: &RiskModel, a: f64, z: f64) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::InvalidArgument(format!("z must be >= 0, got {z}")));
    }
    Ok(model.premium_rate() * (z + dual_root(model, a)?))
}

/// `(M(z) − M(w))/(z − w)`, switching to a Taylor expansion when `z ≈ w`.
fn mgf_divided_difference(model: &RiskModel, z: f64, w: f64) -> f64 {
    let claims = model.claims();
    let d = z - w;
    if d.abs() > 1e-5 * (1.0 + w.abs()) {
        (claims.mgf(z) - claims.mgf(w)) / d
    } else {
        let m1 = claims.tilted_moment(w, 1);
        let m2 = claims.tilted_moment(w, 2);
        let m3 = claims.tilted_moment(w, 3);
        m1 + 0.5 * d * m2 + d * d * m3 / 6.0
    }
}

/// Regime, ladder constants and renewal function of a model under the
/// normalization `k·(dv/c)`.
#[derive(Debug, Clone)]
pub struct LadderSystem {
    model: RiskModel,
    k: f64,
    regime: RegimeClassification,
    q: f64,
    pi_h_mass: f64,
    p: Option<f64>,
    renewal: OnceLock<RenewalFunction>,
}

impl LadderSystem {
    pub fn new(model: &RiskModel) -> Self {
        Self::with_normalization(model, 1.0).expect("k = 1 is valid")
    }

    pub fn with_normalization(model: &RiskModel, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidArgument(format!("normalization must be positive, got {k}")));
        }
        let rho = model.load_ratio();
        Ok(LadderSystem {
            model: model.clone(),
            k,
            regime: model.classify_regime(),
            q: k * (1.0 - rho),
            pi_h_mass: k * rho,
            p: None,
            renewal: OnceLock::new(),
        })
    }

    /// Attaches an excursion-rate estimate `p` (e.g. from simulation).
    pub fn with_excursion_rate(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }

    pub fn model(&self) -> &RiskModel {
        &self.model
    }

    pub fn normalization(&self) -> f64 {
        self.k
    }

    pub fn regime(&self) -> &RegimeClassification {
        &self.regime
    }

    /// Exponential rate `α` of the Cramér or convolution-equivalent regime.
    pub fn alpha(&self) -> Option<f64> {
        match self.regime.regime {
            Regime::Neither => None,
            _ => Some(self.regime.alpha),
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Drift of the ascending ladder height; zero since `X` jumps over levels.
    pub fn d_h(&self) -> f64 {
        0.0
    }

    /// Drift of the inverse local time; zero since `0` is irregular upward.
    pub fn d_linv(&self) -> f64 {
        0.0
    }

    pub fn pi_h_mass(&self) -> f64 {
        self.pi_h_mass
    }

    pub fn excursion_rate(&self) -> Option<f64> {
        self.p
    }

    /// Lebesgue density of `V̂(dv)`.
    pub fn hat_v_density(&self) -> f64 {
        self.k / self.model.premium_rate()
    }

    fn pi_h_factor(&self) -> f64 {
        self.k * self.model.claim_intensity() / self.model.premium_rate()
    }

    /// Density of `Π_H` at `x > 0`.
    pub fn pi_h_density(&self, x: f64) -> f64 {
        self.pi_h_factor() * self.model.claims().tail(x)
    }

    /// `Π_H((x, ∞))`.
    pub fn pi_h_tail(&self, x: f64) -> f64 {
        self.pi_h_factor() * self.model.claims().integrated_tail(x)
    }

    /// `e^{θx}` times the density of `Π_H` at `x`.
    pub fn pi_h_weighted_density(&self, theta: f64, x: f64) -> f64 {
        self.pi_h_factor() * self.model.claims().exp_weighted_tail(theta, x)
    }

    /// Whether `∫ e^{θx} Π_H(dx) < ∞`.
    fn weighted_mass_finite(&self, theta: f64) -> bool {
        theta <= 0.0 || self.model.claims().mgf(theta).is_finite()
    }

    fn quad_width(&self) -> f64 {
        10.0 * self.model.claims().characteristic_scale()
    }

    /// `∫ x^j e^{θx} Π_H(dx)` by quadrature.
    fn weighted_moment(&self, theta: f64, j: i32) -> f64 {
        integrate_from(|x| x.powi(j) * self.pi_h_weighted_density(theta, x), 0.0, self.quad_width(), QUAD_ABS, QUAD_REL)
            .value
    }

    /// Bivariate ladder exponent `κ(a, b) = −log E[e^{−a L⁻¹₁ − b H₁}; 1 < L_∞]`.
    ///
    /// `a = 0`: `q + ∫(1 − e^{−bx}) Π_H(dx)` by quadrature. `a > 0`: the
    /// Wiener–Hopf quotient `(a − ψ(−b))/κ̂(a, −b)`.
    pub fn kappa(&self, a: f64, b: f64) -> Result<f64> {
        if !(a >= 0.0) {
            return Err(Error::InvalidArgument(format!("a must be >= 0, got {a}")));
        }
        let theta = -b;
        if !self.weighted_mass_finite(theta) {
            return Err(Error::DivergentIntegral { a, b });
        }
        if a == 0.0 {
            if b == 0.0 {
                return Ok(self.q);
            }
            return Ok(self.q + self.pi_h_mass - self.weighted_moment(theta, 0));
        }
        let phi = dual_root(&self.model, a)?;
        let lc = self.model.claim_intensity() / self.model.premium_rate();
        // (a − ψ(z))/(c(z + Φ̂)) with the removable singularity at z = −Φ̂ resolved
        Ok(self.k * (1.0 - lc * mgf_divided_difference(&self.model, theta, -phi)))
    }

    /// Dual exponent in this system's normalization, `κ̂(a, z)/k`.
    pub fn dual_kappa(&self, a: f64, z: f64) -> Result<f64> {
        Ok(dual_kappa(&self.model, a, z)? / self.k)
    }

    /// `ψ(θ)` of the underlying model.
    pub fn psi(&self, theta: f64) -> f64 {
        self.model.laplace_exponent(theta)
    }

    /// `m* = d_H + ∫ x e^{αx} Π_H(dx)`.
    pub fn m_star(&self) -> Result<f64> {
        let alpha = self.cramer_alpha()?;
        if !self.model.claims().moment_finite(alpha, 2) {
            return Err(Error::DivergentIntegral { a: 0.0, b: -alpha });
        }
        Ok(self.d_h() + self.weighted_moment(alpha, 1))
    }

    fn cramer_alpha(&self) -> Result<f64> {
        self.regime
            .cramer_alpha()
            .ok_or_else(|| Error::RegimeMismatch(format!("model is {:?}, not Cramér–Lundberg", self.regime.regime)))
    }

    /// `lim e^{αu} P(τ(u) < ∞) = q/(α·m*)`.
    pub fn cramer_constant(&self) -> Result<f64> {
        Ok(self.q / (self.cramer_alpha()? * self.m_star()?))
    }

    /// Default renewal grid: step `min(scale, 1/α)/50`, ending at `30/α`
    /// under Cramér (the exponential closure is then exact to rounding) and
    /// `50/α` otherwise.
    pub fn default_renewal_grid(&self) -> (f64, f64) {
        let scale = self.model.claims().characteristic_scale();
        match (self.regime.regime, self.alpha()) {
            (Regime::CramerLundberg, Some(alpha)) => (scale.min(1.0 / alpha) / 50.0, 30.0 / alpha),
            (_, Some(alpha)) => (scale.min(1.0 / alpha) / 50.0, 50.0 / alpha),
            _ => (scale / 50.0, 200.0 * scale),
        }
    }

    /// Tabulates `V` with step `h` on `[0, x_max]`.
    pub fn renewal_function(&self, h: f64, x_max: f64) -> Result<RenewalFunction> {
        let claims = self.model.claims().clone();
        let mean = claims.mean();
        let r = self.pi_h_mass / (self.q + self.pi_h_mass);
        let cramer = self.regime.cramer_alpha();
        renewal::tabulate(
            r,
            self.q,
            |x| claims.tail(x) / mean,
            |x| claims.integrated_tail(x) / mean,
            h,
            x_max,
            |end, psi_end| match cramer {
                Some(alpha) => TailClosure::Exponential { rate: alpha, coefficient: psi_end * (alpha * end).exp() },
                None => TailClosure::IntegratedClaimTail {
                    factor: psi_end / claims.integrated_tail(end),
                    claims: claims.clone(),
                },
            },
        )
    }

    /// Renewal function on the default grid, computed once.
    pub fn renewal(&self) -> &RenewalFunction {
        self.renewal.get_or_init(|| {
            let (h, x_max) = self.default_renewal_grid();
            self.renewal_function(h, x_max).expect("default grid is valid")
        })
    }

    /// `P(τ(u) < ∞) = q·V̄(u)`.
    pub fn ruin_probability(&self, u: f64) -> f64 {
        self.q * self.renewal().tail(u)
    }

    /// One line per exported quantity: name, formula, value.
    pub fn provenance_table(&self) -> String {
        let m = &self.model;
        let mut rows: Vec<(&str, String, String)> = vec![
            ("model", "premium c, intensity λ, claims".into(), format!("c={} λ={} {:?}", m.premium_rate(), m.claim_intensity(), m.claims())),
            ("normalization", "V̂(dv) = k·dv/c".into(), format!("k={}", self.k)),
            ("regime", "root of ψ / tilted-Pareto tail".into(), format!("{:?}", self.regime.regime)),
            ("alpha", "ψ(α)=0 or tail decay rate".into(), format!("{:?}", self.alpha())),
            ("q", "k(1 − λEξ/c)".into(), format!("{}", self.q)),
            ("|Π_H|", "k·λEξ/c".into(), format!("{}", self.pi_h_mass)),
            ("Π_H density", "k(λ/c)·F̄(x)".into(), "closed form".into()),
            ("κ(0,b)", "q + ∫(1−e^{−bx})Π_H(dx), quadrature".into(), "on demand".into()),
            ("κ(a,b), a>0", "(a−ψ(−b))/κ̂(a,−b)".into(), "on demand".into()),
            ("κ̂(a,z)", "c(z + Φ̂(a))/k, ψ(−Φ̂)=a by Brent".into(), "on demand".into()),
            ("V̄(u)", "compound geometric, trapezoid + Richardson".into(), format!("h={} end={}", self.default_renewal_grid().0, self.default_renewal_grid().1)),
            ("P(τ(u)<∞)", "q·V̄(u)".into(), format!("u=0: {}", self.q * self.renewal().tail(0.0))),
        ];
        if let Ok(ms) = self.m_star() {
            rows.push(("m*", "d_H + ∫x e^{αx}Π_H(dx)".into(), format!("{ms}")));
            rows.push(("Cramér constant", "q/(α m*)".into(), format!("{}", self.q / (self.regime.alpha * ms))));
        }
        if let Some(p) = self.p {
            rows.push(("p", "1/(1 − E e^{−τ(0)}), simulated".into(), format!("{p}")));
        }
        let mut out = String::new();
        for (name, formula, value) in rows {
            let _ = writeln!(out, "{name:<16} | {formula:<44} | {value}");
        }
        out
    }
}

/// `Π_H` on `grid` from `∫ V̂(dv) Π_X(v + dx)`: the density at each point is
/// `(λ/c)·∫₀^∞ f(v + x) dv` by quadrature.
pub fn vigon_ladder_measure(model: &RiskModel, grid: &[f64]) -> Result<GridMeasure> {
    let lc = model.claim_intensity() / model.premium_rate();
    let claims = model.claims();
    let width = 10.0 * claims.characteristic_scale();
    let density = grid
        .iter()
        .map(|&x| lc * integrate_from(|v| claims.density(v + x), 0.0, width, QUAD_ABS, QUAD_REL).value)
        .collect();
    let tail = grid.iter().map(|&x| lc * claims.integrated_tail(x)).collect();
    GridMeasure::new(
        grid.to_vec(),
        0.0,
        density,
        tail,
        TailClosure::IntegratedClaimTail { factor: lc, claims: claims.clone() },
    )
}
