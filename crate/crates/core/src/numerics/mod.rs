//! Numerical building blocks shared by the analytic modules.

mod quadrature;
mod roots;

pub use quadrature::{integrate, integrate_from, integrate_semi_infinite, QuadResult};
pub use roots::brent;

/// Central difference of `f` at `x` with step `h`.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
