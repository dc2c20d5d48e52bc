//! Spectrally negative Lévy models, their Laplace exponent and its right inverse.
//!
//! A model is `X_t = σ B_t + γ t − J_t` where `J` is an optional compound
//! Poisson process with rate `λ` and exponentially distributed jumps of mean
//! `1/ρ`. The jump part has finite activity, so no compensator or small-jump
//! cutoff is involved: `γ` is the true linear coefficient of the path and
//!
//! ```text
//! ψ(θ) = σ²θ²/2 + γθ + λ(ρ/(ρ+θ) − 1),   θ ≥ 0.
//! ```
//!
//! In particular `E[X_1] = ψ'(0) = γ − λ/ρ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance of [`phi_inverse`].
pub const PHI_TOL: f64 = 1e-12;

const MAX_BRACKET_DOUBLINGS: usize = 2000;
const MAX_NEWTON_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Jumps {
    None,
    /// Compound Poisson jumps of rate `rate` with `Exp` sizes of mean `mean_jump`.
    CompoundPoissonExp {
        rate: f64,
        mean_jump: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyModel {
    sigma: f64,
    gamma: f64,
    jumps: Jumps,
}

impl LevyModel {
    pub fn new(sigma: f64, gamma: f64, jumps: Jumps) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidModel(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if !gamma.is_finite() {
            return Err(Error::InvalidModel(format!("gamma must be finite, got {gamma}")));
        }
        match jumps {
            Jumps::None => {
                if sigma <= 0.0 {
                    return Err(Error::InvalidModel("a model without jumps needs sigma > 0".into()));
                }
            }
            Jumps::CompoundPoissonExp { rate, mean_jump } => {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(Error::InvalidModel(format!("jump rate must be > 0, got {rate}")));
                }
                if !(mean_jump.is_finite() && mean_jump > 0.0) {
                    return Err(Error::InvalidModel(format!("mean jump size must be > 0, got {mean_jump}")));
                }
                if sigma == 0.0 && gamma <= 0.0 {
                    return Err(Error::InvalidModel(
                        "sigma = 0 with gamma <= 0 is the negative of a subordinator".into(),
                    ));
                }
            }
        }
        Ok(Self { sigma, gamma, jumps })
    }

    /// Standard Brownian motion `X = B`.
    pub fn brownian() -> Self {
        Self { sigma: 1.0, gamma: 0.0, jumps: Jumps::None }
    }

    /// Brownian motion with drift `X_t = μt + B_t`.
    pub fn linear_brownian(mu: f64) -> Result<Self> {
        Self::new(1.0, mu, Jumps::None)
    }

    pub fn with_exp_jumps(sigma: f64, gamma: f64, rate: f64, mean_jump: f64) -> Result<Self> {
        Self::new(sigma, gamma, Jumps::CompoundPoissonExp { rate, mean_jump })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn jumps(&self) -> Jumps {
        self.jumps
    }

    /// `W(0) = 0` holds exactly when the Gaussian part is present.
    pub fn has_unbounded_variation(&self) -> bool {
        self.sigma > 0.0
    }

    pub fn require_unbounded_variation(&self) -> Result<()> {
        if self.has_unbounded_variation() {
            Ok(())
        } else {
            Err(Error::InvalidModel("local-time laws need paths of unbounded variation (sigma > 0)".into()))
        }
    }

    /// `(λ, ρ)` of the jump part, if any.
    pub(crate) fn jump_params(&self) -> Option<(f64, f64)> {
        match self.jumps {
            Jumps::None => None,
            Jumps::CompoundPoissonExp { rate, mean_jump } => Some((rate, 1.0 / mean_jump)),
        }
    }

    /// ψ(θ) without domain checks; valid for every real θ > −ρ.
    pub(crate) fn psi(&self, theta: f64) -> f64 {
        let mut v = 0.5 * self.sigma * self.sigma * theta * theta + self.gamma * theta;
        if let Some((lambda, rho)) = self.jump_params() {
            v += lambda * (rho / (rho + theta) - 1.0);
        }
        v
    }

    pub(crate) fn psi_prime(&self, theta: f64) -> f64 {
        let mut v = self.sigma * self.sigma * theta + self.gamma;
        if let Some((lambda, rho)) = self.jump_params() {
            v -= lambda * rho / ((rho + theta) * (rho + theta));
        }
        v
    }

    /// Analytic continuation of ψ to the complex half-plane `Re s > −ρ`.
    pub fn psi_complex(&self, s: Complex64) -> Complex64 {
        let mut v = 0.5 * self.sigma * self.sigma * s * s + self.gamma * s;
        if let Some((lambda, rho)) = self.jump_params() {
            v += lambda * (rho / (rho + s) - 1.0);
        }
        v
    }

    /// Parse the flat key/value model format.
    ///
    /// Accepts either a JSON object or `key = value` lines (`#` starts a
    /// comment). Keys: `sigma`, `gamma`, `jump_kind` (`none` or `exp`),
    /// `jump_rate`, `jump_mean`.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        let map = crate::kv::parse_kv_text(text)?;
        Self::from_kv(&map)
    }

    pub fn from_kv(map: &crate::kv::KvMap) -> Result<Self> {
        let known = ["sigma", "gamma", "jump_kind", "jump_rate", "jump_mean"];
        if let Some(k) = map.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Error::Input(format!("unknown model key '{k}'")));
        }
        let sigma = crate::kv::get_f64(map, "sigma")?.unwrap_or(1.0);
        let gamma = crate::kv::get_f64(map, "gamma")?.unwrap_or(0.0);
        let kind = map.get("jump_kind").map(|s| s.as_str()).unwrap_or("none");
        let jumps = match kind {
            "none" => Jumps::None,
            "exp" | "compound_poisson_exp" => Jumps::CompoundPoissonExp {
                rate: crate::kv::require_f64(map, "jump_rate")?,
                mean_jump: crate::kv::require_f64(map, "jump_mean")?,
            },
            other => return Err(Error::Input(format!("unknown jump_kind '{other}'"))),
        };
        Self::new(sigma, gamma, jumps)
    }

    /// Serialize to the flat JSON form read by [`LevyModel::from_kv_text`].
    pub fn to_kv_json(&self) -> String {
        let (kind, rate, mean) = match self.jumps {
            Jumps::None => ("none", 0.0, 0.0),
            Jumps::CompoundPoissonExp { rate, mean_jump } => ("exp", rate, mean_jump),
        };
        format!(
            "{{\"sigma\": {}, \"gamma\": {}, \"jump_kind\": \"{}\", \"jump_rate\": {}, \"jump_mean\": {}}}",
            self.sigma, self.gamma, kind, rate, mean
        )
    }
}

/// Laplace exponent `ψ(θ)` for `θ ≥ 0`.
pub fn laplace_exponent(model: &LevyModel, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("laplace_exponent needs theta >= 0, got {theta}")));
    }
    Ok(model.psi(theta))
}

/// `Φ'(q)`, with the `+∞` convention for `q = 0` when `ψ'(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhiPrime {
    Finite(f64),
    Infinite,
}

impl PhiPrime {
    pub fn finite(self) -> Option<f64> {
        match self {
            PhiPrime::Finite(v) => Some(v),
            PhiPrime::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PhiPrime::Infinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiSolve {
    pub q: f64,
    pub phi: f64,
    pub phi_prime: PhiPrime,
    /// `ψ(Φ(q)) − q`.
    pub residual: f64,
}

/// Largest root of `ψ(s) = q`.
pub fn phi_inverse(model: &LevyModel, q: f64, tol: f64) -> Result<PhiSolve> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::Domain(format!("phi_inverse needs q >= 0, got {q}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let slope0 = model.psi_prime(0.0);
    let slope_scale = model.gamma.abs() + model.jump_params().map_or(0.0, |(l, r)| l / r) + 1.0;
    let flat_at_zero = slope0.abs() <= 1e-14 * slope_scale;

    // ψ is convex; on [lo, ∞) it is increasing and ψ(lo) ≤ 0 ≤ q.
    let lo = if slope0 >= 0.0 || flat_at_zero { 0.0 } else { argmin_psi(model)? };

    if q == 0.0 && lo == 0.0 {
        let phi_prime = if flat_at_zero { PhiPrime::Infinite } else { PhiPrime::Finite(1.0 / slope0) };
        return Ok(PhiSolve { q, phi: 0.0, phi_prime, residual: 0.0 });
    }

    let mut hi = if lo > 0.0 { 2.0 * lo } else { 1.0 };
    let mut doublings = 0;
    while model.psi(hi) <= q {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Solver { what: format!("Phi({q}) bracket"), lo, hi });
        }
    }

    let scale = q.abs().max(1.0);
    let (mut a, mut b) = (lo, hi);
    let mut s = hi;
    for _ in 0..MAX_NEWTON_ITERS {
        let f = model.psi(s) - q;
        if f.abs() <= tol * scale {
            return Ok(finish(model, q, s, f, flat_at_zero));
        }
        if f > 0.0 {
            b = s;
        } else {
            a = s;
        }
        let d = model.psi_prime(s);
        let mut next = if d > 0.0 { s - f / d } else { f64::NAN };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (b - a) <= 4.0 * f64::EPSILON * b.abs().max(1e-300) {
            let f_next = model.psi(next) - q;
            return Ok(finish(model, q, next, f_next, flat_at_zero));
        }
        s = next;
    }
    Err(Error::Solver { what: format!("Phi({q})"), lo: a, hi: b })
}

fn finish(model: &LevyModel, q: f64, phi: f64, residual: f64, flat_at_zero: bool) -> PhiSolve {
    let d = model.psi_prime(phi);
    let phi_prime = if q == 0.0 && flat_at_zero && phi == 0.0 { PhiPrime::Infinite } else { PhiPrime::Finite(1.0 / d) };
    PhiSolve { q, phi, phi_prime, residual }
}

/// Minimiser of ψ on `[0, ∞)` when `ψ'(0) < 0`.
fn argmin_psi(model: &LevyModel) -> Result<f64> {
    let mut hi = 1.0;
    let mut n = 0;
    while model.psi_prime(hi) <= 0.0 {
        hi *= 2.0;
        n += 1;
        if n > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Solver { what: "argmin psi".into(), lo: 0.0, hi });
        }
    }
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if model.psi_prime(m) > 0.0 {
            b = m;
        } else {
            a = m;
        }
        if b - a <= 4.0 * f64::EPSILON * b {
            break;
        }
    }
    Ok(0.5 * (a + b))
}
