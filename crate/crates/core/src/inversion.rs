//! Fixed-Talbot numerical inversion of Laplace transforms.
//!
//! The contour `s(θ) = rθ(cot θ + i)`, `θ ∈ (−π, π)`, with `r = 2M/(5t)`
//! encloses the negative real axis. Every singularity of the transform must
//! lie in `Re s ≤ 0`; callers shift the transform when it does not.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionParams {
    /// Number of contour nodes `M`.
    pub nodes: usize,
}

impl Default for InversionParams {
    fn default() -> Self {
        Self { nodes: 30 }
    }
}

impl InversionParams {
    /// Node count aiming at `digits` correct significant digits. Double
    /// precision caps the useful value at about 12.
    pub fn for_digits(digits: u32) -> Self {
        let nodes = ((1.7 * digits as f64).ceil() as usize).clamp(8, 40);
        Self { nodes }
    }
}

/// Invert `transform` at `t > 0`.
pub fn fixed_talbot<F>(transform: F, t: f64, params: InversionParams) -> Result<f64>
where
    F: Fn(Complex64) -> Complex64,
{
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("Talbot inversion needs t > 0, got {t}")));
    }
    let m = params.nodes;
    if m < 2 {
        return Err(Error::Input("Talbot inversion needs at least 2 nodes".into()));
    }
    let r = 2.0 * m as f64 / (5.0 * t);
    let f0 = transform(Complex64::new(r, 0.0));
    let mut acc = 0.5 * (f0 * (r * t).exp()).re;
    for k in 1..m {
        let theta = k as f64 * PI / m as f64;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * transform(s) * Complex64::new(1.0, sigma);
        acc += term.re;
    }
    let v = r / m as f64 * acc;
    if !v.is_finite() {
        return Err(Error::Numeric(format!("Talbot inversion produced a non-finite value at t = {t} with {m} nodes")));
    }
    Ok(v)
}
