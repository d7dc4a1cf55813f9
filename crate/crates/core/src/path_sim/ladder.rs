use rand::Rng;

use super::{check_nonnegative, split_claim, FirstPassageRecord};
use crate::error::{Error, Result};
use crate::risk_model::{ClaimDistribution, Regime, RiskModel};
use crate::rng::StreamSeed;

/// Importance sampler for the spatial quantities at first passage, run on
/// the ascending ladder heights rather than the path.
///
/// The running maximum of `X` moves by i.i.d. ladder steps: a step exists
/// with probability `ρ = λEξ/c`, its height has density `g(z) = F̄(z)/Eξ`,
/// and the claim `ξ` that makes it left the path `D` below the old maximum,
/// with `(D, Z)` jointly proportional to `f(D + Z)`. Passage over `u` from
/// running maximum `u − r` therefore has probability `ρḠ(r)`, and given it
/// `ξ − r` is size-biased `w·f(r + w)` with the overshoot uniform on `(0, ξ − r)`.
///
/// Non-passing steps are drawn from the tilted sub-density `ρe^{αz}g(z)` on
/// `(0, r)`, so the likelihood ratio at level `ℓ` is `e^{−αℓ}` and the passage
/// term there is `e^{−αu}·ρe^{αr}Ḡ(r)`, bounded in `r` in both regimes.
/// Under convolution equivalence the tilted ladder is still defective and a
/// path stops after a few steps. The terms are summed and one level is chosen
/// in proportion to its term; the record carries the sum as its weight.
///
/// Time is not simulated: `tau`, `last_max_time` and `passage_delay` are NaN.
#[derive(Debug, Clone)]
pub struct LadderStepSampler {
    claims: ClaimDistribution,
    tilted_claims: ClaimDistribution,
    alpha: f64,
    mean: f64,
    rho: f64,
    mgf_alpha: f64,
}

impl LadderStepSampler {
    pub fn new(model: &RiskModel) -> Result<Self> {
        let class = model.classify_regime();
        if class.regime == Regime::Neither {
            return Err(Error::RegimeMismatch("ladder sampling needs an exponential index α".into()));
        }
        let claims = model.claims().clone();
        let mean = claims.mean();
        Ok(LadderStepSampler {
            tilted_claims: claims.tilt(class.alpha)?,
            alpha: class.alpha,
            rho: model.claim_intensity() * mean / model.premium_rate(),
            mgf_alpha: claims.mgf(class.alpha),
            mean,
            claims,
        })
    }

    /// `ρ∫_0^r e^{αz}g(z)dz`, the chance that the tilted ladder takes a step below `r`.
    fn step_probability(&self, r: f64) -> f64 {
        let a = self.alpha;
        let inner = self.claims.exp_weighted_tail(a, r) - 1.0 + self.mgf_alpha - self.claims.partial_mgf(a, r);
        (self.rho * inner / (a * self.mean)).clamp(0.0, 1.0)
    }

    /// Height with density `∝ e^{αz}F̄(z)` on `(0, r)`: a claim `x` from the
    /// tilted law kept with probability `(e^{α·min(x, r)} − 1)e^{−αx}`, then
    /// `z ∝ e^{αz}` on `(0, min(x, r))`.
    fn sample_step<R: Rng>(&self, r: f64, rng: &mut R) -> f64 {
        let a = self.alpha;
        loop {
            let x = self.tilted_claims.sample(rng);
            let m = x.min(r);
            let keep = (a * m).exp_m1() * (-a * x).exp();
            if rng.random::<f64>() < keep {
                let v: f64 = rng.random();
                return ((v * (a * m).exp_m1()).ln_1p() / a).min(m);
            }
        }
    }

    /// One weighted passage record over `u`.
    pub fn first_passage(&self, u: f64, seed: StreamSeed) -> Result<FirstPassageRecord> {
        check_nonnegative("u", u)?;
        let mut rng = seed.rng();
        let a = self.alpha;
        let mut level = 0.0f64;
        // terms without the common factor e^{−αu}
        let mut total = 0.0;
        let mut chosen = u;
        loop {
            let r = u - level;
            let term = self.rho * self.claims.exp_weighted_integrated_tail(a, r) / self.mean;
            if term > 0.0 {
                total += term;
                if rng.random::<f64>() * total < term {
                    chosen = r;
                }
            }
            if rng.random::<f64>() >= self.step_probability(r) {
                break;
            }
            level += self.sample_step(r, &mut rng);
        }
        let r = chosen;
        let w = self.claims.sample_size_biased_excess(r, &mut rng);
        let overshoot = rng.random::<f64>() * w;
        let claim = r + w;
        let (undershoot_path, overshoot) = split_claim(claim, claim - overshoot);
        Ok(FirstPassageRecord {
            ruined: true,
            tau: f64::NAN,
            last_max_time: f64::NAN,
            passage_delay: f64::NAN,
            undershoot_max: r.min(undershoot_path),
            undershoot_path,
            overshoot,
            weight: (-a * u).exp() * total,
            last_claim: claim,
        })
    }
}
