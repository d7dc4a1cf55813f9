use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};
use serde::Serialize;
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Regularized upper incomplete gamma, total on `[0, ∞]`.
fn upper_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else {
        gamma_ur(a, x)
    }
}

use crate::error::{Error, Result};
use crate::numerics::{integrate, integrate_from, QuadResult};

const QUAD_ABS: f64 = 1e-15;
const QUAD_REL: f64 = 1e-12;

/// Claim size law on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClaimDistribution {
    Exponential { rate: f64 },
    Gamma { shape: f64, rate: f64 },
    MixedExponential { weights: Vec<f64>, rates: Vec<f64> },
    TiltedPareto(TiltedPareto),
}

/// Density `C·e^{-tilt·x}·(1 + x/scale)^{-power}` on `(0, ∞)`.
///
/// The tail behaves like `e^{-tilt·x}·x^{-power}`; with `tilt > 0` and
/// `power > 1` this is the usual example of a convolution equivalent law.
/// `tilt = 0` is the Lomax (Pareto II) law with shape `power - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedPareto {
    pub tilt: f64,
    pub power: f64,
    pub scale: f64,
    /// normalizing constant `C`, fixed at construction
    #[serde(skip)]
    norm: f64,
}

impl TiltedPareto {
    pub fn new(tilt: f64, power: f64, scale: f64) -> Result<Self> {
        if !(tilt >= 0.0 && tilt.is_finite()) {
            return Err(Error::InvalidModel(format!("tilted_pareto tilt must be >= 0, got {tilt}")));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidModel(format!("tilted_pareto power must be > 0, got {power}")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidModel(format!("tilted_pareto scale must be > 0, got {scale}")));
        }
        if tilt == 0.0 && power <= 1.0 {
            return Err(Error::InvalidModel("tilted_pareto with tilt 0 needs power > 1".into()));
        }
        let mut tp = TiltedPareto { tilt, power, scale, norm: 1.0 };
        tp.norm = if tilt == 0.0 {
            (power - 1.0) / scale
        } else {
            1.0 / tp.unnormalized_integral(0.0, 0.0, 0).value
        };
        Ok(tp)
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    fn kernel(&self, w: f64) -> f64 {
        (1.0 + w / self.scale).powf(-self.power)
    }

    /// `∫_x^∞ (w - x)^k e^{-(tilt-θ)(w-x)} (1 + w/s)^{-p} dw`, the exponential
    /// factor at `x` pulled out.
    fn unnormalized_integral(&self, x: f64, theta: f64, k: i32) -> QuadResult {
        let b = self.tilt - theta;
        let width = if b > 0.0 { (40.0 / b).min(1e3 * self.scale).max(self.scale) } else { 100.0 * self.scale };
        integrate_from(
            |t| {
                let e = if b > 0.0 { (-b * t).exp() } else { 1.0 };
                if e == 0.0 {
                    return 0.0;
                }
                t.powi(k) * e * self.kernel(x + t)
            },
            0.0,
            width,
            QUAD_ABS,
            QUAD_REL,
        )
    }

    /// `e^{tilt·x}·F̄(x)`; stays representable where `F̄` itself underflows.
    pub fn scaled_tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        if self.tilt == 0.0 {
            return self.kernel(x).powf((self.power - 1.0) / self.power);
        }
        self.norm * self.unnormalized_integral(x, 0.0, 0).value
    }
}

fn check_weights(weights: &[f64], rates: &[f64]) -> Result<()> {
    if weights.is_empty() || weights.len() != rates.len() {
        return Err(Error::InvalidModel("mixed_exponential needs equally many weights and rates (at least one)".into()));
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) || rates.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidModel("mixed_exponential weights and rates must be positive".into()));
    }
    Ok(())
}

impl ClaimDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidModel(format!("exponential rate must be > 0, got {rate}")));
        }
        Ok(ClaimDistribution::Exponential { rate })
    }

    pub fn gamma(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidModel(format!("gamma shape and rate must be > 0, got ({shape}, {rate})")));
        }
        Ok(ClaimDistribution::Gamma { shape, rate })
    }

    /// Weights are normalized to sum to one.
    pub fn mixed_exponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        check_weights(&weights, &rates)?;
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(ClaimDistribution::MixedExponential { weights, rates })
    }

    pub fn tilted_pareto(tilt: f64, power: f64, scale: f64) -> Result<Self> {
        Ok(ClaimDistribution::TiltedPareto(TiltedPareto::new(tilt, power, scale)?))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ClaimDistribution::Exponential { .. } => "exponential",
            ClaimDistribution::Gamma { .. } => "gamma",
            ClaimDistribution::MixedExponential { .. } => "mixed_exponential",
            ClaimDistribution::TiltedPareto(_) => "tilted_pareto",
        }
    }

    /// Abscissa of convergence of the moment generating function and whether
    /// `M` is still finite there.
    pub fn mgf_radius(&self) -> (f64, bool) {
        match self {
            ClaimDistribution::Exponential { rate } => (*rate, false),
            ClaimDistribution::Gamma { rate, .. } => (*rate, false),
            ClaimDistribution::MixedExponential { rates, .. } => (rates.iter().cloned().fold(f64::INFINITY, f64::min), false),
            ClaimDistribution::TiltedPareto(tp) => (tp.tilt, tp.power > 1.0),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            ClaimDistribution::Exponential { rate } => rate * (-rate * x).exp(),
            ClaimDistribution::Gamma { shape, rate } => {
                if x == 0.0 {
                    return if *shape < 1.0 {
                        f64::INFINITY
                    } else if *shape == 1.0 {
                        *rate
                    } else {
                        0.0
                    };
                }
                (shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(*shape)).exp()
            }
            ClaimDistribution::MixedExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * r * (-r * x).exp()).sum()
            }
            ClaimDistribution::TiltedPareto(tp) => tp.norm * (-tp.tilt * x).exp() * tp.kernel(x),
        }
    }

    /// `F̄(x) = P(ξ > x)`.
    pub fn tail(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            ClaimDistribution::Exponential { rate } => (-rate * x).exp(),
            ClaimDistribution::Gamma { shape, rate } => upper_gamma(*shape, rate * x),
            ClaimDistribution::MixedExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * (-r * x).exp()).sum()
            }
            ClaimDistribution::TiltedPareto(tp) => (-tp.tilt * x).exp() * tp.scaled_tail(x),
        }
    }

    /// `e^{θx}·F̄(x)`, computed without overflow where `F̄` underflows.
    pub fn exp_weighted_tail(&self, theta: f64, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self {
            ClaimDistribution::Exponential { rate } => (-(rate - theta) * x).exp(),
            ClaimDistribution::MixedExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * (-(r - theta) * x).exp()).sum()
            }
            ClaimDistribution::TiltedPareto(tp) => (-(tp.tilt - theta) * x).exp() * tp.scaled_tail(x),
            ClaimDistribution::Gamma { .. } => {
                let t = self.tail(x);
                if t == 0.0 {
                    0.0
                } else {
                    (theta * x + t.ln()).exp()
                }
            }
        }
    }

    /// `e^{θx}·∫_x^∞ F̄(w) dw`, representable where the integral underflows.
    pub fn exp_weighted_integrated_tail(&self, theta: f64, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            ClaimDistribution::Exponential { rate } => (-(rate - theta) * x).exp() / rate,
            ClaimDistribution::MixedExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * (-(r - theta) * x).exp() / r).sum()
            }
            ClaimDistribution::TiltedPareto(tp) if tp.tilt > 0.0 => {
                tp.norm * (-(tp.tilt - theta) * x).exp() * tp.unnormalized_integral(x, 0.0, 1).value
            }
            _ => {
                let t = self.integrated_tail(x);
                if t > 0.0 && t.is_finite() {
                    (theta * x + t.ln()).exp()
                } else {
                    t
                }
            }
        }
    }

    /// `∫_x^∞ F̄(w) dw`.
    pub fn integrated_tail(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self {
            ClaimDistribution::Exponential { rate } => (-rate * x).exp() / rate,
            ClaimDistribution::Gamma { shape, rate } => {
                shape / rate * upper_gamma(shape + 1.0, rate * x) - x * upper_gamma(*shape, rate * x)
            }
            ClaimDistribution::MixedExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * (-r * x).exp() / r).sum()
            }
            ClaimDistribution::TiltedPareto(tp) => {
                if tp.tilt == 0.0 {
                    if tp.power <= 2.0 {
                        return f64::INFINITY;
                    }
                    return tp.scale / (tp.power - 2.0) * tp.kernel(x).powf((tp.power - 2.0) / tp.power);
                }
                tp.norm * (-tp.tilt * x).exp() * tp.unnormalized_integral(x, 0.0, 1).value
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.integrated_tail(0.0)
    }

    /// `∫_x^∞ e^{θw} F(dw)`; `+∞` beyond the abscissa of convergence.
    pub fn partial_mgf(&self, theta: f64, x: f64) -> f64 {
        let x = x.max(0.0);
        let (radius, finite_at_radius) = self.mgf_radius();
        if theta > radius || (theta == radius && !finite_at_radius) {
            return f64::INFINITY;
        }
        match self {
            ClaimDistribution::Exponential { rate } => rate / (rate - theta) * (-(rate - theta) * x).exp(),
            ClaimDistribution::Gamma { shape, rate } => {
                (rate / (rate - theta)).powf(*shape) * upper_gamma(*shape, (rate - theta) * x)
            }
            ClaimDistribution::MixedExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * r / (r - theta) * (-(r - theta) * x).exp())
                .sum(),
            ClaimDistribution::TiltedPareto(tp) => {
                let b = tp.tilt - theta;
                if b == 0.0 {
                    return tp.norm * tp.scale / (tp.power - 1.0) * tp.kernel(x).powf((tp.power - 1.0) / tp.power);
                }
                tp.norm * (-b * x).exp() * tp.unnormalized_integral(x, theta, 0).value
            }
        }
    }

    /// Moment generating function `M(θ) = E e^{θξ}`.
    pub fn mgf(&self, theta: f64) -> f64 {
        if theta == 0.0 {
            return 1.0;
        }
        self.partial_mgf(theta, 0.0)
    }

    /// `E ξ^k e^{θξ}`; `+∞` when it diverges.
    pub fn tilted_moment(&self, theta: f64, k: u32) -> f64 {
        if k == 0 {
            return self.mgf(theta);
        }
        let (radius, _) = self.mgf_radius();
        if theta > radius || (theta == radius && !self.moment_finite(theta, k)) {
            return f64::INFINITY;
        }
        let kf = k as f64;
        match self {
            ClaimDistribution::Exponential { rate } => {
                rate * factorial(k) / (rate - theta).powi(k as i32 + 1)
            }
            ClaimDistribution::Gamma { shape, rate } => {
                (shape * rate.ln() + ln_gamma(shape + kf) - ln_gamma(*shape) - (shape + kf) * (rate - theta).ln()).exp()
            }
            ClaimDistribution::MixedExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * r * factorial(k) / (r - theta).powi(k as i32 + 1))
                .sum(),
            ClaimDistribution::TiltedPareto(tp) => tp.norm * tp.unnormalized_integral(0.0, theta, k as i32).value,
        }
    }

    /// Whether `E ξ^k e^{θξ} < ∞`, decided from the parametric form.
    pub fn moment_finite(&self, theta: f64, k: u32) -> bool {
        let (radius, _) = self.mgf_radius();
        if theta < radius {
            return true;
        }
        if theta > radius {
            return false;
        }
        match self {
            ClaimDistribution::TiltedPareto(tp) => tp.power - k as f64 > 1.0,
            _ => false,
        }
    }

    /// The Esscher-tilted law `e^{θx} F(dx) / M(θ)`.
    pub fn tilt(&self, theta: f64) -> Result<Self> {
        if theta == 0.0 {
            return Ok(self.clone());
        }
        let m = self.mgf(theta);
        if !m.is_finite() {
            return Err(Error::InfiniteTilt { theta });
        }
        match self {
            ClaimDistribution::Exponential { rate } => ClaimDistribution::exponential(rate - theta),
            ClaimDistribution::Gamma { shape, rate } => ClaimDistribution::gamma(*shape, rate - theta),
            ClaimDistribution::MixedExponential { weights, rates } => {
                let w = weights.iter().zip(rates).map(|(w, r)| w * r / (r - theta) / m).collect();
                let r = rates.iter().map(|r| r - theta).collect();
                ClaimDistribution::mixed_exponential(w, r)
            }
            ClaimDistribution::TiltedPareto(tp) => {
                ClaimDistribution::tilted_pareto((tp.tilt - theta).max(0.0), tp.power, tp.scale)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ClaimDistribution::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            ClaimDistribution::Gamma { shape, rate } => {
                Gamma::new(*shape, 1.0 / rate).expect("validated gamma").sample(rng)
            }
            ClaimDistribution::MixedExponential { weights, rates } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut idx = rates.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                Exp::new(rates[idx]).expect("validated rate").sample(rng)
            }
            ClaimDistribution::TiltedPareto(tp) => {
                if tp.tilt == 0.0 {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    return tp.scale * (u.powf(-1.0 / (tp.power - 1.0)) - 1.0);
                }
                // rejection from Exp(tilt); acceptance probability (1 + x/s)^{-p}
                let proposal = Exp::new(tp.tilt).expect("positive tilt");
                loop {
                    let x = proposal.sample(rng);
                    let u: f64 = rng.random();
                    if u < tp.kernel(x) {
                        return x;
                    }
                }
            }
        }
    }

    /// Draw of the excess `ξ − d` given `ξ > d`.
    pub fn sample_excess<R: Rng + ?Sized>(&self, d: f64, rng: &mut R) -> f64 {
        if d <= 0.0 {
            return self.sample(rng) - d.max(0.0);
        }
        match self {
            ClaimDistribution::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            ClaimDistribution::MixedExponential { weights, rates } => {
                // the excess is again a mixture, with weights w·e^{−r·d}
                let r_min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
                let post: Vec<f64> = weights.iter().zip(rates).map(|(w, r)| w * (-(r - r_min) * d).exp()).collect();
                let total: f64 = post.iter().sum();
                let u: f64 = rng.random::<f64>() * total;
                let mut acc = 0.0;
                let mut idx = rates.len() - 1;
                for (i, w) in post.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                Exp::new(rates[idx]).expect("validated rate").sample(rng)
            }
            ClaimDistribution::TiltedPareto(tp) if tp.tilt > 0.0 => {
                // rejection from Exp(tilt); acceptance ((1 + (d+o)/s)/(1 + d/s))^{-p}
                let proposal = Exp::new(tp.tilt).expect("positive tilt");
                let base = tp.scale + d;
                loop {
                    let o = proposal.sample(rng);
                    let u: f64 = rng.random();
                    if u < (1.0 + o / base).powf(-tp.power) {
                        return o;
                    }
                }
            }
            ClaimDistribution::TiltedPareto(tp) => {
                // Lomax: the excess over d is Lomax with scale s + d
                let u: f64 = 1.0 - rng.random::<f64>();
                (tp.scale + d) * (u.powf(-1.0 / (tp.power - 1.0)) - 1.0)
            }
            ClaimDistribution::Gamma { rate, .. } => {
                let log_tail_d = self.tail(d).ln();
                let exp_rate = Exp::new(*rate).expect("validated rate");
                if !log_tail_d.is_finite() {
                    // far in the tail the excess is Exp(rate) to within O(1/d)
                    return exp_rate.sample(rng);
                }
                let log_u = (1.0 - rng.random::<f64>()).ln();
                let h = |o: f64| self.tail(d + o).ln() - log_tail_d - log_u;
                let mut hi = 1.0 / rate;
                while h(hi) > 0.0 {
                    hi *= 2.0;
                }
                crate::numerics::brent(h, 0.0, hi, 1e-13 * hi.max(1.0), 200).unwrap_or(hi)
            }
        }
    }

    /// Draw from the size-biased law `w·f(r + w)/∫v·f(r + v)dv` on `w > 0`.
    /// With `r = 0` this is the size-biased claim law `y·f(y)/Eξ`.
    pub fn sample_size_biased_excess<R: Rng + ?Sized>(&self, r: f64, rng: &mut R) -> f64 {
        let r = r.max(0.0);
        match self {
            ClaimDistribution::Exponential { rate } => Gamma::new(2.0, 1.0 / rate).expect("validated rate").sample(rng),
            ClaimDistribution::MixedExponential { weights, rates } => {
                // components Gamma(2, rᵢ) with weights wᵢ·e^{−rᵢ·r}/rᵢ
                let r_min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
                let post: Vec<f64> =
                    weights.iter().zip(rates).map(|(w, q)| w * (-(q - r_min) * r).exp() / q).collect();
                let u: f64 = rng.random::<f64>() * post.iter().sum::<f64>();
                let mut acc = 0.0;
                let mut idx = rates.len() - 1;
                for (i, w) in post.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        idx = i;
                        break;
                    }
                }
                Gamma::new(2.0, 1.0 / rates[idx]).expect("validated rate").sample(rng)
            }
            ClaimDistribution::TiltedPareto(tp) if tp.tilt > 0.0 => {
                let proposal = Gamma::new(2.0, 1.0 / tp.tilt).expect("positive tilt");
                let base = tp.scale + r;
                loop {
                    let w = proposal.sample(rng);
                    let u: f64 = rng.random();
                    if u < (1.0 + w / base).powf(-tp.power) {
                        return w;
                    }
                }
            }
            ClaimDistribution::TiltedPareto(tp) => {
                // w/(b + w) is Beta(2, p − 2) with b = s + r
                let b = tp.scale + r;
                let v = rand_distr::Beta::new(2.0, tp.power - 2.0).expect("finite mean needs power > 2").sample(rng);
                b * v / (1.0 - v)
            }
            ClaimDistribution::Gamma { shape, rate } => {
                // (r + w) from Gamma(shape + 1) beyond r, thinned by w/(r + w)
                let lifted = ClaimDistribution::Gamma { shape: shape + 1.0, rate: *rate };
                loop {
                    let w = if r == 0.0 { lifted.sample(rng) } else { lifted.sample_excess(r, rng) };
                    let u: f64 = rng.random();
                    if u * (r + w) < w {
                        return w;
                    }
                }
            }
        }
    }

    /// Finite window holding all but a negligible part of the mass; used to
    /// size quadrature and grids.
    pub fn characteristic_scale(&self) -> f64 {
        match self {
            ClaimDistribution::Exponential { rate } => 1.0 / rate,
            ClaimDistribution::Gamma { shape, rate } => shape.max(1.0) / rate,
            ClaimDistribution::MixedExponential { rates, .. } => {
                1.0 / rates.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            ClaimDistribution::TiltedPareto(tp) => {
                if tp.tilt > 0.0 {
                    (1.0 / tp.tilt).max(tp.scale)
                } else {
                    tp.scale
                }
            }
        }
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// Plain quadrature of the density over `[a, b]`, independent of the closed forms.
pub fn density_mass(claims: &ClaimDistribution, a: f64, b: f64) -> QuadResult {
    integrate(|x| claims.density(x), a, b, 1e-14, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate_semi_infinite;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_kinds() -> Vec<ClaimDistribution> {
        vec![
            ClaimDistribution::exponential(1.0).unwrap(),
            ClaimDistribution::gamma(2.5, 1.5).unwrap(),
            ClaimDistribution::mixed_exponential(vec![0.3, 0.7], vec![0.5, 3.0]).unwrap(),
            ClaimDistribution::tilted_pareto(1.0, 3.0, 0.5).unwrap(),
            ClaimDistribution::tilted_pareto(1.0, 3.0, 1.0).unwrap(),
            ClaimDistribution::tilted_pareto(0.0, 3.5, 1.0).unwrap(),
        ]
    }

    #[test]
    fn densities_integrate_to_one() {
        for d in all_kinds() {
            let r = integrate_semi_infinite(|x| d.density(x), 0.0, 1e-14, 1e-13);
            assert!((r.value - 1.0).abs() < 1e-10, "{} mass {}", d.kind_name(), r.value);
        }
    }

    #[test]
    fn tail_matches_density_quadrature() {
        for d in all_kinds() {
            for &x in &[0.0, 0.3, 1.0, 2.7, 6.0] {
                let q = integrate_semi_infinite(|w| d.density(w), x, 1e-15, 1e-13).value;
                assert!((d.tail(x) - q).abs() < 1e-10, "{} x={x}: {} vs {q}", d.kind_name(), d.tail(x));
            }
            assert_eq!(d.tail(0.0), 1.0);
            let mut prev = 1.0;
            for i in 1..200 {
                let t = d.tail(i as f64 * 0.1);
                assert!(t <= prev + 1e-15);
                prev = t;
            }
        }
    }

    #[test]
    fn exp_weighted_integrated_tail_survives_underflow() {
        let tp = ClaimDistribution::tilted_pareto(1.0, 3.0, 0.5).unwrap();
        for c in [tp.clone(), ClaimDistribution::exponential(2.0).unwrap(), ClaimDistribution::gamma(2.0, 1.5).unwrap()] {
            let x: f64 = 7.0;
            let want = (0.8 * x).exp() * c.integrated_tail(x);
            assert!((c.exp_weighted_integrated_tail(0.8, x) - want).abs() < 1e-10 * want);
        }
        // at x = 1000 the plain integral underflows; the weighted one is ≈ norm·s³/((1+x/s)³)·...
        assert_eq!(tp.integrated_tail(1000.0), 0.0);
        let far = tp.exp_weighted_integrated_tail(1.0, 1000.0);
        let near = tp.exp_weighted_integrated_tail(1.0, 500.0);
        // power decay x^{−3}: ratio ≈ 2³
        assert!(far > 0.0 && (near / far - 8.0).abs() < 0.1, "{}", near / far);
    }

    #[test]
    fn integrated_tail_and_mgf_match_quadrature() {
        for d in all_kinds() {
            let it = integrate_semi_infinite(|w| d.tail(w), 0.7, 1e-14, 1e-12).value;
            assert!((d.integrated_tail(0.7) - it).abs() < 1e-9, "{}", d.kind_name());
            let theta = 0.4 * d.mgf_radius().0;
            // e^{θw} overflows where the density has already underflowed
            let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
            let m = integrate_semi_infinite(|w| finite((theta * w).exp() * d.density(w)), 0.0, 1e-14, 1e-12).value;
            assert!((d.mgf(theta) - m).abs() < 1e-9, "{}", d.kind_name());
            let m1 = integrate_semi_infinite(|w| finite(w * (theta * w).exp() * d.density(w)), 0.0, 1e-14, 1e-12).value;
            assert!((d.tilted_moment(theta, 1) - m1).abs() < 1e-8, "{}", d.kind_name());
            let pm = integrate_semi_infinite(|w| (-0.3 * w).exp() * d.density(w), 1.3, 1e-15, 1e-12).value;
            assert!((d.partial_mgf(-0.3, 1.3) - pm).abs() < 1e-10, "{}", d.kind_name());
        }
    }

    #[test]
    fn tilted_pareto_tail_has_power_exponential_shape() {
        // F̄(x)·x^p·e^{αx} → C·s^p/α; the first-order correction is
        // (1 + s/x)^{-p}(1 - p/(αx)), so the 1% band is reached only far out.
        let ClaimDistribution::TiltedPareto(tp) = ClaimDistribution::tilted_pareto(1.0, 3.0, 0.5).unwrap() else {
            unreachable!()
        };
        let limit = tp.norm() * tp.scale.powf(tp.power) / tp.tilt;
        let ratio = |x: f64| tp.scaled_tail(x) * x.powf(tp.power) / limit;
        assert!((ratio(2000.0 * tp.scale) - 1.0).abs() < 0.01);
        assert!((ratio(50.0 * tp.scale) - 1.0).abs() < 0.2);
        assert!(ratio(50.0 * tp.scale) < ratio(200.0 * tp.scale));
    }

    #[test]
    fn tilting_is_closed_and_invertible() {
        for d in all_kinds() {
            let radius = d.mgf_radius().0;
            let theta = if radius > 0.0 { 0.3 * radius } else { -0.15 };
            let t = d.tilt(theta).unwrap();
            for &x in &[0.1, 1.0, 3.0] {
                let expect = (theta * x).exp() * d.density(x) / d.mgf(theta);
                assert!((t.density(x) - expect).abs() < 1e-10 * expect.max(1.0), "{}", d.kind_name());
            }
            let back = t.tilt(-theta).unwrap();
            assert!((back.density(0.8) - d.density(0.8)).abs() < 1e-10);
        }
        let tp = ClaimDistribution::tilted_pareto(1.0, 3.0, 1.0).unwrap();
        assert!(matches!(tp.tilt(1.5), Err(Error::InfiniteTilt { .. })));
        assert!(matches!(
            ClaimDistribution::exponential(1.0).unwrap().tilt(1.0),
            Err(Error::InfiniteTilt { .. })
        ));
    }

    #[test]
    fn samplers_match_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in all_kinds() {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| d.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - d.mean()).abs() < 4.0 * se, "{} {mean} vs {}", d.kind_name(), d.mean());
        }
    }

    #[test]
    fn moment_conditions_at_the_boundary() {
        let tp = ClaimDistribution::tilted_pareto(1.0, 3.0, 1.0).unwrap();
        assert!(tp.moment_finite(1.0, 0));
        assert!(tp.moment_finite(1.0, 1));
        assert!(!tp.moment_finite(1.0, 2));
        assert!(!tp.moment_finite(1.1, 0));
        let e = ClaimDistribution::exponential(1.0).unwrap();
        assert!(e.moment_finite(0.9, 2));
        assert!(!e.moment_finite(1.0, 0));
    }

    #[test]
    fn excess_draws_follow_the_residual_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 40_000;
        for c in all_kinds() {
            let d = 2.0;
            let draws: Vec<f64> = (0..n).map(|_| c.sample_excess(d, &mut rng)).collect();
            assert!(draws.iter().all(|o| *o >= 0.0));
            for &t in &[0.3, 1.2] {
                let p = c.tail(d + t) / c.tail(d);
                let hat = draws.iter().filter(|o| **o > t).count() as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt();
                assert!((hat - p).abs() < 4.0 * se, "{} t={t}: {hat} vs {p}", c.kind_name());
            }
        }
    }

    #[test]
    fn size_biased_excess_draws_match_their_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 40_000;
        for c in all_kinds() {
            for &r in &[0.0, 2.0] {
                let draws: Vec<f64> = (0..n).map(|_| c.sample_size_biased_excess(r, &mut rng)).collect();
                let dens = |w: f64| w * c.density(r + w);
                let norm = integrate_semi_infinite(dens, 0.0, 1e-14, 1e-11).value;
                for &t in &[0.4, 1.5] {
                    let p = integrate_semi_infinite(dens, t, 1e-14, 1e-11).value / norm;
                    let hat = draws.iter().filter(|w| **w > t).count() as f64 / n as f64;
                    let se = (p * (1.0 - p) / n as f64).sqrt();
                    assert!((hat - p).abs() < 4.0 * se, "{} r={r} t={t}: {hat} vs {p}", c.kind_name());
                }
            }
        }
    }
}
