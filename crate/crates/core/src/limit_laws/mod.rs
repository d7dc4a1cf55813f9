//! Limits of the process conditioned on ruin, `P⁽ᵘ⁾ = P(· | τ(u) < ∞)`, as `u → ∞`.
//!
//! At passage over `u` the variables are `y = u − X̄_{τ(u)−}` (undershoot of
//! the maximum), `x = X_{τ(u)} − u` (overshoot), `v = u − X_{τ(u)−}`
//! (undershoot) and `t = τ(u) − G_{τ(u)−}` (time since the last maximum).
//! Under the Cramér condition all of them converge weakly. Under convolution
//! equivalence the overshoot and `t` still converge weakly, but the
//! undershoots only vaguely: their limits have mass `1 − κ(0, −α)/q`.
//!
//! The ascending ladder height has no drift (`d_H = 0`), so the limits carry
//! no atom at zero; the atom term is kept in the formulas for completeness.

mod functional;
mod quintuple;
mod time;

pub use functional::{functional_limit_irregular, FunctionalEstimate, MIN_COMPLETED_EXCURSIONS};
pub use quintuple::{quintuple_limit_density, QuintupleDensity};
pub use time::{time_marginal_limit, TimeMarginalLimit};

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ladder_calculus::{GridMeasure, LadderSystem, TailClosure};
use crate::numerics::{central_difference, integrate, integrate_from};
use crate::risk_model::{ClaimDistribution, Regime};

const QUAD_ABS: f64 = 1e-13;
const QUAD_REL: f64 = 1e-12;
/// Step of the central difference at the removable singularity of the EDPF.
pub const EDPF_DIFFERENCE_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    Weak,
    Vague,
}

impl ConvergenceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConvergenceMode::Weak => "weak",
            ConvergenceMode::Vague => "vague",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitVariable {
    /// `X_{τ(u)} − u`.
    Overshoot,
    /// `u − X̄_{τ(u)−}`.
    UndershootMax,
    /// `u − X_{τ(u)−}`.
    Undershoot,
}

/// Constants shared by the limit densities, in the system's normalization.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LimitConstants {
    pub alpha: f64,
    pub q: f64,
    /// Density factor of `Π_H`, `k·λ/c`.
    pub pi_factor: f64,
    pub atom: f64,
    /// `α·κ(0, −α)/q`: weight of the `e^{−αx}` overshoot term, zero under Cramér.
    pub ce_overshoot: f64,
    pub regime: Regime,
    pub claims: ClaimDistribution,
}

impl LimitConstants {
    pub fn new(system: &LadderSystem) -> Result<Self> {
        let regime = system.regime().regime;
        let alpha = system
            .alpha()
            .ok_or_else(|| Error::RegimeMismatch("limit laws need the Cramér or convolution-equivalent regime".into()))?;
        let q = system.q();
        let ce_overshoot = match regime {
            Regime::ConvolutionEquivalent => alpha * system.kappa(0.0, -alpha)? / q,
            _ => 0.0,
        };
        let model = system.model();
        Ok(LimitConstants {
            alpha,
            q,
            pi_factor: system.normalization() * model.claim_intensity() / model.premium_rate(),
            atom: system.d_h() * alpha / q,
            ce_overshoot,
            regime,
            claims: model.claims().clone(),
        })
    }

    /// `w(v) = ∫_{z>0} (e^{αz} − 1) F(v + dz) = e^{−αv}∫_v^∞ e^{αs}F(ds) − F̄(v)`.
    pub fn w(&self, v: f64) -> f64 {
        let a = self.alpha;
        let head = if v == 0.0 { self.claims.mgf(a) } else { (-a * v).exp() * self.claims.partial_mgf(a, v) };
        (head - self.claims.tail(v)).max(0.0)
    }

    /// `∫_0^m w(v) dv` in closed form.
    pub fn w_integral(&self, m: f64) -> f64 {
        let a = self.alpha;
        let c = &self.claims;
        if m <= 0.0 {
            return 0.0;
        }
        let far = if m.is_infinite() { 0.0 } else { (-a * m).exp() * c.partial_mgf(a, m) - c.tail(m) };
        let itail = if m.is_infinite() { 0.0 } else { c.integrated_tail(m) };
        ((c.mgf(a) - 1.0 - far) / a - c.mean() + itail).max(0.0)
    }

    fn scale(&self) -> f64 {
        self.claims.characteristic_scale().max(1.0 / self.alpha)
    }

    fn density(&self, variable: LimitVariable, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let a = self.alpha;
        let f = self.pi_factor / self.q;
        match variable {
            // (α/q)∫_0^∞ e^{αy} π_H(y + x) dy, plus the convolution-equivalent term
            LimitVariable::Overshoot => f * self.w(x) + self.ce_overshoot * (-a * x).exp(),
            LimitVariable::UndershootMax => {
                a * f * self.claims.exp_weighted_integrated_tail(a, x)
            }
            // (α/q) e^{αx} Π̄_X(x) ∫_0^x e^{−αv} V̂(dv)
            LimitVariable::Undershoot => {
                f * (self.claims.exp_weighted_tail(a, x) - self.claims.tail(x)).max(0.0)
            }
        }
    }
}

/// `e^{a}·b` without forming `∞·0` where `b` has underflowed.
pub(crate) fn exp_times(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        (a + b.ln()).exp()
    } else {
        0.0
    }
}

/// Limit law of one passage variable: an atom at zero plus a density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitLaw {
    pub variable: LimitVariable,
    pub regime: Regime,
    pub mode: ConvergenceMode,
    pub atom_at_zero: f64,
    /// Atom plus the integral of the density, by quadrature.
    pub total_mass: f64,
    /// Quadrature error bound on `total_mass`.
    pub mass_error: f64,
    /// Density and tail on a grid, continued by a fitted closure.
    pub measure: GridMeasure,
    #[serde(skip)]
    constants: LimitConstants,
}

impl LimitLaw {
    fn build(system: &LadderSystem, regime: Regime, variable: LimitVariable) -> Result<Self> {
        let actual = system.regime().regime;
        if actual != regime {
            return Err(Error::RegimeMismatch(format!("system is {actual:?}, requested {regime:?}")));
        }
        let k = LimitConstants::new(system)?;
        let mode = match (regime, variable) {
            (Regime::ConvolutionEquivalent, LimitVariable::UndershootMax | LimitVariable::Undershoot) => {
                ConvergenceMode::Vague
            }
            _ => ConvergenceMode::Weak,
        };
        let scale = k.scale();
        let dens = |x: f64| k.density(variable, x);
        let body = integrate_from(dens, 0.0, 20.0 * scale, QUAD_ABS, QUAD_REL);

        let h = scale / 20.0;
        let n = 800;
        let x: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
        let density: Vec<f64> = x.iter().map(|&v| dens(v)).collect();
        let mut tail = vec![0.0; n + 1];
        tail[n] = integrate_from(dens, x[n], 20.0 * scale, QUAD_ABS, QUAD_REL).value;
        for i in (0..n).rev() {
            tail[i] = tail[i + 1] + integrate(dens, x[i], x[i + 1], QUAD_ABS, QUAD_REL).value;
        }
        let closure = TailClosure::fit(regime == Regime::CramerLundberg, x[n], tail[n], density[n]);
        let measure = GridMeasure::new(x, k.atom, density, tail, closure)?;
        Ok(LimitLaw {
            variable,
            regime,
            mode,
            atom_at_zero: k.atom,
            total_mass: k.atom + body.value,
            mass_error: body.abs_error,
            measure,
            constants: k,
        })
    }

    /// Exact density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        self.constants.density(self.variable, x)
    }

    /// Mass of `(a, b]` by quadrature of the exact density.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(0.0);
        let atom = if a < 0.0 && b >= 0.0 { self.atom_at_zero } else { 0.0 };
        if b <= lo {
            return atom;
        }
        let d = |x: f64| self.density(x);
        let body = if b.is_infinite() {
            integrate_from(d, lo, 20.0 * self.constants.scale(), QUAD_ABS, QUAD_REL)
        } else {
            integrate(d, lo, b, QUAD_ABS, QUAD_REL)
        };
        atom + body.value
    }

    /// Mass of `[0, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.atom_at_zero + self.mass_between(0.0, x)
    }

    /// Mass of `(x, ∞)`.
    pub fn tail(&self, x: f64) -> f64 {
        self.mass_between(x, f64::INFINITY)
    }

    /// `cdf` by cubic Hermite interpolation of the tabulated tail, whose
    /// derivative is minus the tabulated density; quadrature past the grid.
    pub fn cdf_interpolated(&self, x: f64) -> f64 {
        let m = &self.measure;
        if x < 0.0 {
            return 0.0;
        }
        if x >= m.grid_end() {
            return self.cdf(x);
        }
        let h = m.x[1] - m.x[0];
        let i = ((x / h) as usize).min(m.x.len() - 2);
        let t = (x - m.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let tail = (2.0 * t3 - 3.0 * t2 + 1.0) * m.tail[i] - (t3 - 2.0 * t2 + t) * h * m.density[i]
            + (3.0 * t2 - 2.0 * t3) * m.tail[i + 1]
            - (t3 - t2) * h * m.density[i + 1];
        self.atom_at_zero + m.tail[0] - tail
    }

    /// Smallest `x` with `cdf(x) ≥ p`, for `0 ≤ p < total_mass`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p >= 0.0 && p < self.total_mass) {
            return Err(Error::InvalidArgument(format!("quantile level {p} outside [0, {})", self.total_mass)));
        }
        if p <= self.atom_at_zero {
            return Ok(0.0);
        }
        let mut hi = self.constants.scale();
        while self.cdf_interpolated(hi) < p {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.cdf_interpolated(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    /// `∫ e^{βx}` against the law, for `β` below the decay rate of its tail.
    pub fn mgf(&self, beta: f64) -> f64 {
        let d = |x: f64| exp_times(beta * x, self.density(x));
        self.atom_at_zero + integrate_from(d, 0.0, 20.0 * self.constants.scale(), QUAD_ABS, QUAD_REL).value
    }

    /// Columns `x, density, tail, atom, total_mass, convergence_mode`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["x", "density", "tail", "atom", "total_mass", "convergence_mode"]).map_err(fmt)?;
        let m = &self.measure;
        for i in 0..m.x.len() {
            let atom = if i == 0 { self.atom_at_zero } else { 0.0 };
            w.serialize((m.x[i], m.density[i], m.tail[i], atom, self.total_mass, self.mode.as_str())).map_err(fmt)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Limit of the overshoot `X_{τ(u)} − u`; mass one in both regimes.
pub fn overshoot_limit(system: &LadderSystem, regime: Regime) -> Result<LimitLaw> {
    LimitLaw::build(system, regime, LimitVariable::Overshoot)
}

/// Limit of `u − X̄_{τ(u)−}`, density `(α/q)e^{αy}Π̄_H(y)`.
pub fn undershoot_max_limit(system: &LadderSystem, regime: Regime) -> Result<LimitLaw> {
    LimitLaw::build(system, regime, LimitVariable::UndershootMax)
}

/// Limit of `u − X_{τ(u)−}`, density `(kλ/(qc))·F̄(x)(e^{αx} − 1)`.
pub fn undershoot_limit(system: &LadderSystem, regime: Regime) -> Result<LimitLaw> {
    LimitLaw::build(system, regime, LimitVariable::Undershoot)
}

/// `|Q^{(∞)}| = 1 − κ(0, −α)/q`; exactly one under Cramér.
pub fn q_infinity_mass(system: &LadderSystem) -> Result<f64> {
    let alpha = system
        .alpha()
        .ok_or_else(|| Error::RegimeMismatch("no exponential rate in the Neither regime".into()))?;
    if system.regime().regime == Regime::CramerLundberg {
        return Ok(1.0);
    }
    Ok(1.0 - system.kappa(0.0, -alpha)? / system.q())
}

/// Limit of `E⁽ᵘ⁾ exp(λ_p·y + η·x − δ·t)` under Cramér,
/// `α(κ(δ, −(λ_p + α)) − κ(δ, −η))/(q(η − λ_p − α))`.
///
/// At `η = λ_p + α` the quotient is replaced by its limit `−α·∂_sκ(δ, −s)/q`.
pub fn edpf_limit_cramer(system: &LadderSystem, lambda_p: f64, eta: f64, delta: f64) -> Result<f64> {
    let alpha = system
        .regime()
        .cramer_alpha()
        .ok_or_else(|| Error::RegimeMismatch("EDPF limit needs the Cramér regime".into()))?;
    if !(lambda_p <= 0.0 && eta <= alpha && delta >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need λ_p ≤ 0, η ≤ α = {alpha}, δ ≥ 0; got ({lambda_p}, {eta}, {delta})"
        )));
    }
    let q = system.q();
    let s = lambda_p + alpha;
    if (eta - s).abs() > 1e-6 * (1.0 + s.abs()) {
        return Ok(alpha * (system.kappa(delta, -s)? - system.kappa(delta, -eta)?) / (q * (eta - s)));
    }
    let h = EDPF_DIFFERENCE_STEP;
    let f = |x: f64| system.kappa(delta, -x);
    let slope = match f(eta + h) {
        Ok(_) => {
            central_difference(|x| f(x).unwrap_or(f64::NAN), eta, h)
        }
        // κ(δ, −s) is not defined past the abscissa of convergence: one-sided
        Err(_) => (3.0 * f(eta)? - 4.0 * f(eta - h)? + f(eta - 2.0 * h)?) / (2.0 * h),
    };
    Ok(-alpha * slope / q)
}

/// Limit of `E⁽ᵘ⁾ exp(β·x − δ·t)` under convolution equivalence,
/// `−αψ(α)/(q(α − β)κ̂(δ, α)) + α(κ(δ, −β) − κ(δ, −α))/(q(α − β))`.
pub fn edpf_limit_convolution(system: &LadderSystem, beta: f64, delta: f64) -> Result<f64> {
    if system.regime().regime != Regime::ConvolutionEquivalent {
        return Err(Error::RegimeMismatch("EDPF limit needs the convolution-equivalent regime".into()));
    }
    let alpha = system.regime().alpha;
    if !(beta < alpha && delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("need β < α = {alpha}, δ ≥ 0; got ({beta}, {delta})")));
    }
    let q = system.q();
    let psi = system.psi(alpha);
    let first = -alpha * psi / (q * (alpha - beta) * system.dual_kappa(delta, alpha)?);
    let second = alpha * (system.kappa(delta, -beta)? - system.kappa(delta, -alpha)?) / (q * (alpha - beta));
    Ok(first + second)
}
