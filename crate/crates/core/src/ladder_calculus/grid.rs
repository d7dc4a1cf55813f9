use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::risk_model::ClaimDistribution;

/// How a measure's tail is continued past the last grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailClosure {
    /// `tail(x) = coefficient·e^{−rate·x}`.
    Exponential { rate: f64, coefficient: f64 },
    /// `tail(x) = factor·∫_x^∞ F̄`, density `factor·F̄(x)`.
    IntegratedClaimTail { factor: f64, claims: ClaimDistribution },
    /// `tail(x) = coefficient·x^{−exponent}`.
    PowerLaw { exponent: f64, coefficient: f64 },
    /// No mass past the grid.
    Zero,
}

impl TailClosure {
    pub fn tail(&self, x: f64) -> f64 {
        match self {
            TailClosure::Exponential { rate, coefficient } => coefficient * (-rate * x).exp(),
            TailClosure::IntegratedClaimTail { factor, claims } => factor * claims.integrated_tail(x),
            TailClosure::PowerLaw { exponent, coefficient } => coefficient * x.powf(-exponent),
            TailClosure::Zero => 0.0,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            TailClosure::Exponential { rate, coefficient } => rate * coefficient * (-rate * x).exp(),
            TailClosure::IntegratedClaimTail { factor, claims } => factor * claims.tail(x),
            TailClosure::PowerLaw { exponent, coefficient } => exponent * coefficient * x.powf(-exponent - 1.0),
            TailClosure::Zero => 0.0,
        }
    }

    /// Closure matching tail and density at `x > 0`: exponential when
    /// `exponential` is set, a power law otherwise.
    pub fn fit(exponential: bool, x: f64, tail: f64, density: f64) -> Self {
        if !(tail > 0.0 && density > 0.0) {
            return TailClosure::Zero;
        }
        if exponential {
            let rate = density / tail;
            TailClosure::Exponential { rate, coefficient: tail * (rate * x).exp() }
        } else {
            let exponent = x * density / tail;
            TailClosure::PowerLaw { exponent, coefficient: tail * x.powf(exponent) }
        }
    }

    /// Same closure with its mass multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            TailClosure::Exponential { rate, coefficient } => TailClosure::Exponential { rate: *rate, coefficient: coefficient * s },
            TailClosure::IntegratedClaimTail { factor, claims } => {
                TailClosure::IntegratedClaimTail { factor: factor * s, claims: claims.clone() }
            }
            TailClosure::PowerLaw { exponent, coefficient } => {
                TailClosure::PowerLaw { exponent: *exponent, coefficient: coefficient * s }
            }
            TailClosure::Zero => TailClosure::Zero,
        }
    }
}

/// Measure on `[0, ∞)`: an atom at zero plus a density tabulated on a grid
/// starting at zero, with `tail[i]` the mass of `(x[i], ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeasure {
    pub x: Vec<f64>,
    pub atom_at_zero: f64,
    pub density: Vec<f64>,
    pub tail: Vec<f64>,
    pub closure: TailClosure,
}

/// Index `i` with `x[i] ≤ v < x[i+1]`, for `x[0] ≤ v < x[last]`.
fn cell(x: &[f64], v: f64) -> usize {
    x.partition_point(|g| *g <= v).saturating_sub(1).min(x.len() - 2)
}

fn lerp(x: &[f64], y: &[f64], v: f64) -> f64 {
    let i = cell(x, v);
    let w = (v - x[i]) / (x[i + 1] - x[i]);
    y[i] + w * (y[i + 1] - y[i])
}

impl GridMeasure {
    pub fn new(x: Vec<f64>, atom_at_zero: f64, density: Vec<f64>, tail: Vec<f64>, closure: TailClosure) -> Result<Self> {
        if x.len() < 2 || x[0] != 0.0 || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("grid must start at 0 and increase strictly".into()));
        }
        if density.len() != x.len() || tail.len() != x.len() {
            return Err(Error::InvalidArgument("density and tail must match the grid".into()));
        }
        if atom_at_zero < 0.0 || density.iter().chain(&tail).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("measure values must be nonnegative".into()));
        }
        Ok(GridMeasure { x, atom_at_zero, density, tail, closure })
    }

    pub fn total_mass(&self) -> f64 {
        self.atom_at_zero + self.tail[0]
    }

    pub fn grid_end(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// Mass of `(v, ∞)`; linear between grid points, the closure beyond.
    pub fn tail_at(&self, v: f64) -> f64 {
        if v < 0.0 {
            self.total_mass()
        } else if v >= self.grid_end() {
            self.closure.tail(v)
        } else {
            lerp(&self.x, &self.tail, v)
        }
    }

    pub fn density_at(&self, v: f64) -> f64 {
        if v < 0.0 {
            0.0
        } else if v >= self.grid_end() {
            self.closure.density(v)
        } else {
            lerp(&self.x, &self.density, v)
        }
    }

    /// Mass of `(a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        (self.tail_at(a) - self.tail_at(b)).max(0.0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "atom", "density", "tail"]).map_err(|e| Error::Format(e.to_string()))?;
        for i in 0..self.x.len() {
            let atom = if i == 0 { self.atom_at_zero } else { 0.0 };
            w.serialize((self.x[i], atom, self.density[i], self.tail[i]))
                .map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_measure() -> GridMeasure {
        let x: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let density = x.iter().map(|v| 0.5 * (-v).exp()).collect();
        let tail = x.iter().map(|v| 0.5 * (-v).exp()).collect();
        GridMeasure::new(x, 0.25, density, tail, TailClosure::Exponential { rate: 1.0, coefficient: 0.5 }).unwrap()
    }

    #[test]
    fn mass_and_closure() {
        let m = exp_measure();
        assert_eq!(m.total_mass(), 0.75);
        assert!((m.tail_at(12.0) - 0.5 * (-12.0f64).exp()).abs() < 1e-18);
        // linear interpolation error h²f''/8 ≈ 6e−4
        assert!((m.tail_at(0.05) - 0.5 * (-0.05f64).exp()).abs() < 7e-4);
        assert_eq!(m.tail_at(-1.0), 0.75);
        assert!((m.mass_between(1.0, 2.0) - 0.5 * ((-1.0f64).exp() - (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn fitted_closures_match_at_the_join() {
        let e = TailClosure::fit(true, 3.0, 0.2, 0.1);
        assert!((e.tail(3.0) - 0.2).abs() < 1e-15 && (e.density(3.0) - 0.1).abs() < 1e-15);
        let p = TailClosure::fit(false, 3.0, 0.2, 0.1);
        assert!((p.tail(3.0) - 0.2).abs() < 1e-15 && (p.density(3.0) - 0.1).abs() < 1e-15);
        assert_eq!(TailClosure::fit(true, 3.0, 0.0, 0.1), TailClosure::Zero);
        assert!((p.scaled(2.0).tail(5.0) - 2.0 * p.tail(5.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        let z = TailClosure::Zero;
        assert!(GridMeasure::new(vec![0.1, 0.2], 0.0, vec![0.0; 2], vec![0.0; 2], z.clone()).is_err());
        assert!(GridMeasure::new(vec![0.0, 0.0], 0.0, vec![0.0; 2], vec![0.0; 2], z.clone()).is_err());
        assert!(GridMeasure::new(vec![0.0, 1.0], 0.0, vec![-1.0, 0.0], vec![0.0; 2], z).is_err());
    }

    #[test]
    fn csv_has_expected_columns() {
        let mut buf = Vec::new();
        exp_measure().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,atom,density,tail"));
        assert_eq!(lines.next(), Some("0.0,0.25,0.5,0.5"));
        assert_eq!(text.lines().count(), 102);
        assert!(exp_measure().to_json().unwrap().contains("\"closure\""));
    }
}
