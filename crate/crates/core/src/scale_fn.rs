//! q-scale functions `W^(q)`, `Z^(q)` and `∂_q W^(q)`.
//!
//! Every evaluation goes through the exponentially tilted functions
//! `Ŵ(x) = e^{−Φ(q)x} W^(q)(x)`, `Ẑ(x) = e^{−Φ(q)x} Z^(q)(x)`, which stay
//! bounded (`Ŵ → Φ'(q)`). The plain values are recovered by multiplying
//! back, with an explicit overflow error once the result leaves `f64`.
//!
//! Only models with a Gaussian part are accepted, so `W(0) = 0` throughout.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::inversion::{fixed_talbot, InversionParams};
use crate::levy_model::{phi_inverse, Jumps, LevyModel, PhiPrime, PhiSolve, PHI_TOL};
use crate::quad::{integrate, QuadTol};

const LN_MAX: f64 = 709.0;
const CACHE_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `σB_t + γt`.
    Brownian,
    /// Brownian part plus compound Poisson jumps with exponential sizes.
    CompoundPoissonExp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    ClosedForm(Family),
    NumericInversion(InversionParams),
}

/// Whether a scale-function evaluation is tilted by `e^{−Φ(q)·}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tilt {
    Plain,
    Scaled,
}

#[derive(Debug, Clone)]
enum Repr {
    Brownian {
        s2: f64,
        delta: f64,
    },
    Cpe {
        a: f64,
        rho: f64,
        /// Roots of `ψ(s) = q`, `roots[0] = Φ(q)`, decreasing.
        roots: [f64; 3],
        /// Residues of `1/(ψ(s) − q)` when the roots are well separated.
        residues: Option<[f64; 3]>,
    },
    Inversion(InversionParams),
}

#[derive(Debug)]
pub struct ScaleContext {
    model: LevyModel,
    q: f64,
    phi: PhiSolve,
    method: Method,
    repr: Repr,
    cache: Mutex<HashMap<u64, f64>>,
}

impl Clone for ScaleContext {
    fn clone(&self) -> Self {
        Self {
            model: self.model,
            q: self.q,
            phi: self.phi,
            method: self.method,
            repr: self.repr.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl ScaleContext {
    /// Context using the closed form matching the model's family.
    pub fn new(model: LevyModel, q: f64) -> Result<Self> {
        let family = match model.jumps() {
            Jumps::None => Family::Brownian,
            Jumps::CompoundPoissonExp { .. } => Family::CompoundPoissonExp,
        };
        Self::with_method(model, q, Method::ClosedForm(family))
    }

    pub fn with_inversion(model: LevyModel, q: f64, params: InversionParams) -> Result<Self> {
        Self::with_method(model, q, Method::NumericInversion(params))
    }

    pub fn with_method(model: LevyModel, q: f64, method: Method) -> Result<Self> {
        model.require_unbounded_variation()?;
        let phi = phi_inverse(&model, q, PHI_TOL)?;
        let repr = match method {
            Method::ClosedForm(Family::Brownian) => {
                if model.jumps() != Jumps::None {
                    return Err(Error::UnsupportedModel(
                        "Brownian closed form requested for a model with jumps".into(),
                    ));
                }
                let s2 = model.sigma() * model.sigma();
                let g = model.gamma();
                let delta = (g * g + 2.0 * s2 * q).sqrt() / s2;
                Repr::Brownian { s2, delta }
            }
            Method::ClosedForm(Family::CompoundPoissonExp) => {
                let Some((lambda, rho)) = model.jump_params() else {
                    return Err(Error::UnsupportedModel(
                        "exponential-jump closed form requested for a model without jumps".into(),
                    ));
                };
                cpe_repr(&model, q, phi.phi, lambda, rho)?
            }
            Method::NumericInversion(p) => {
                if p.nodes < 2 {
                    return Err(Error::Input("inversion needs at least 2 nodes".into()));
                }
                Repr::Inversion(p)
            }
        };
        Ok(Self { model, q, phi, method, repr, cache: Mutex::new(HashMap::new()) })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn phi_solve(&self) -> &PhiSolve {
        &self.phi
    }

    pub fn phi(&self) -> f64 {
        self.phi.phi
    }

    pub fn phi_prime(&self) -> PhiPrime {
        self.phi.phi_prime
    }

    /// `q/Φ(q)`, read as `ψ'(0)` when `q = Φ(q) = 0`.
    pub fn q_over_phi(&self) -> f64 {
        if self.phi.phi > 0.0 {
            self.q / self.phi.phi
        } else {
            self.model.psi_prime(0.0).max(0.0)
        }
    }

    /// `e^{−Φ(q)x} W^(q)(x)`.
    pub fn scaled_w(&self, x: f64) -> Result<f64> {
        check_arg(x)?;
        if x <= 0.0 {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::Brownian { s2, delta } => Ok(brownian_sw(*s2, *delta, x)),
            Repr::Cpe { a, rho, roots, .. } => Ok(cpe_sw(*a, *rho, roots, x)),
            Repr::Inversion(p) => self.inverted_sw(x, *p),
        }
    }

    /// `e^{−Φ(q)x} Z^(q)(x)`, equal to `e^{−Φ(q)x}` for `x ≤ 0`.
    pub fn scaled_z(&self, x: f64) -> Result<f64> {
        check_arg(x)?;
        let phi = self.phi.phi;
        if x <= 0.0 || self.q == 0.0 {
            return Ok((-phi * x).exp());
        }
        let q = self.q;
        match &self.repr {
            Repr::Brownian { s2, delta } => {
                // ∫₀ˣ W = [(e^{r₊x}−1)/r₊ − (e^{r₋x}−1)/r₋]/(σ²δ), r₊ = Φ, r₋ = −δ−κ.
                let kappa = self.model.gamma() / s2;
                let r_minus = -delta - kappa;
                let up = -(-phi * x).exp_m1() / phi;
                let down = ((-2.0 * delta * x).exp() - (-phi * x).exp()) / r_minus;
                Ok((-phi * x).exp() + q / (s2 * delta) * (up - down))
            }
            Repr::Cpe { roots, residues: Some(c), .. } => {
                let mut acc = 0.0;
                for i in 0..3 {
                    let r = roots[i];
                    let diff = if (r * x).abs() < 1.0 {
                        (-phi * x).exp() * (r * x).exp_m1()
                    } else {
                        ((r - phi) * x).exp() - (-phi * x).exp()
                    };
                    acc += c[i] * diff / r;
                }
                Ok((-phi * x).exp() + q * acc)
            }
            Repr::Cpe { .. } => {
                // Confluent roots only occur at q = 0, handled above.
                Err(Error::Numeric("confluent roots with q > 0".into()))
            }
            Repr::Inversion(p) => {
                let (model, q) = (self.model, self.q);
                let f = move |s: Complex64| {
                    let k = shifted_kernel(&model, phi, s);
                    1.0 / (s + phi) + q / ((s + phi) * s * k)
                };
                fixed_talbot(f, x, *p)
            }
        }
    }

    /// `e^{−Φ(q)x} ∂_q W^(q)(x)`.
    pub fn scaled_w_dq(&self, x: f64) -> Result<f64> {
        check_arg(x)?;
        if x <= 0.0 {
            return Ok(0.0);
        }
        match &self.repr {
            Repr::Brownian { s2, delta } => Ok(2.0 / (s2 * s2) * brownian_dq_core(*delta, x)),
            Repr::Cpe { roots, residues: Some(c), .. } => {
                let phi = roots[0];
                let mut acc = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        acc += c[i] * c[j] * exp_dd(roots[i] - phi, roots[j] - phi, x);
                    }
                }
                Ok(acc)
            }
            _ => self.convolved_dq(x),
        }
    }

    /// `∂_q W^(q)(x)` as the self-convolution `∫₀ˣ W(x−y)W(y) dy`, computed
    /// by adaptive quadrature whatever the method.
    pub fn convolved_dq(&self, x: f64) -> Result<f64> {
        check_arg(x)?;
        if x <= 0.0 {
            return Ok(0.0);
        }
        integrate(|y| Ok(self.scaled_w(x - y)? * self.scaled_w(y)?), 0.0, x, QuadTol { abs: 1e-14, rel: 1e-12 })
    }

    pub fn w(&self, x: f64) -> Result<f64> {
        self.unscale(self.scaled_w(x)?, x, "W")
    }

    pub fn z(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            check_arg(x)?;
            return Ok(1.0);
        }
        self.unscale(self.scaled_z(x)?, x, "Z")
    }

    pub fn w_dq(&self, x: f64) -> Result<f64> {
        self.unscale(self.scaled_w_dq(x)?, x, "dW/dq")
    }

    /// `ln W^(q)(x)`, `−∞` for `x ≤ 0`.
    pub fn log_w(&self, x: f64) -> Result<f64> {
        let s = self.scaled_w(x)?;
        if s <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.phi.phi * x + s.ln())
    }

    pub fn w_tilted(&self, x: f64, tilt: Tilt) -> Result<f64> {
        match tilt {
            Tilt::Plain => self.w(x),
            Tilt::Scaled => self.scaled_w(x),
        }
    }

    pub fn z_tilted(&self, x: f64, tilt: Tilt) -> Result<f64> {
        match tilt {
            Tilt::Plain => self.z(x),
            Tilt::Scaled => self.scaled_z(x),
        }
    }

    /// `e^{Φ(q)x}` under `Tilt::Scaled`, 1 otherwise: the factor that turns a
    /// tilted quantity of total displacement `x` back into a plain one.
    pub fn untilt_factor(&self, x: f64, tilt: Tilt) -> f64 {
        match tilt {
            Tilt::Plain => 1.0,
            Tilt::Scaled => (self.phi.phi * x).exp(),
        }
    }

    fn unscale(&self, scaled: f64, x: f64, what: &'static str) -> Result<f64> {
        if x <= 0.0 || scaled == 0.0 {
            return Ok(scaled);
        }
        let e = self.phi.phi * x;
        if e + scaled.abs().ln() > LN_MAX {
            return Err(Error::Overflow { what, x });
        }
        Ok(scaled * e.exp())
    }

    fn inverted_sw(&self, x: f64, p: InversionParams) -> Result<f64> {
        let key = x.to_bits();
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let (model, phi) = (self.model, self.phi.phi);
        let v = fixed_talbot(|s| 1.0 / (s * shifted_kernel(&model, phi, s)), x, p)?;
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, v);
        Ok(v)
    }
}

fn check_arg(x: f64) -> Result<()> {
    if x.is_nan() {
        return Err(Error::Domain("scale function argument is NaN".into()));
    }
    Ok(())
}

/// `(ψ(Φ+s) − q)/s`, written so that no cancellation occurs near `s = 0`.
fn shifted_kernel(model: &LevyModel, phi: f64, s: Complex64) -> Complex64 {
    let s2 = model.sigma() * model.sigma();
    let mut k = s2 * (phi + 0.5 * s) + model.gamma();
    if let Some((lambda, rho)) = model.jump_params() {
        k -= lambda * rho / ((rho + phi) * (rho + phi + s));
    }
    k
}

/// `(1 − e^{−z})/z`, equal to 1 at 0.
fn one_minus_exp_over(z: f64) -> f64 {
    if z.abs() < 1e-300 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

fn brownian_sw(s2: f64, delta: f64, x: f64) -> f64 {
    2.0 * x / s2 * one_minus_exp_over(2.0 * delta * x)
}

/// `e^{−δx} ∂_δ[sinh(δx)/δ] / δ`.
fn brownian_dq_core(delta: f64, x: f64) -> f64 {
    let t = delta * x;
    if t < 0.05 {
        let t2 = t * t;
        (-t).exp() * x.powi(3) * (1.0 / 3.0 + t2 / 30.0 + t2 * t2 / 840.0 + t2 * t2 * t2 / 45360.0)
    } else {
        let e = (-2.0 * t).exp();
        (t * (1.0 + e) + (-2.0 * t).exp_m1()) / (2.0 * delta.powi(3))
    }
}

/// Divided difference `(e^{ux} − e^{vx})/(u − v)`, with its limit `x e^{ux}`.
fn exp_dd(u: f64, v: f64, x: f64) -> f64 {
    if u == v {
        return x * (u * x).exp();
    }
    let (hi, lo) = if u > v { (u, v) } else { (v, u) };
    if (hi - lo) * x > 1.0 {
        return ((hi * x).exp() - (lo * x).exp()) / (hi - lo);
    }
    (lo * x).exp() * ((hi - lo) * x).exp_m1() / (hi - lo)
}

/// Ŵ(x) as the second divided difference of `(ρ+s)e^{(s−Φ)x}` over the roots.
fn cpe_sw(a: f64, rho: f64, r: &[f64; 3], x: f64) -> f64 {
    let phi = r[0];
    let e01 = exp_dd(r[0] - phi, r[1] - phi, x);
    let e12 = exp_dd(r[1] - phi, r[2] - phi, x);
    let e012 = (e01 - e12) / (r[0] - r[2]);
    ((rho + r[0]) * e012 + e12) / a
}

fn cpe_repr(model: &LevyModel, q: f64, phi: f64, lambda: f64, rho: f64) -> Result<Repr> {
    let s2 = model.sigma() * model.sigma();
    let g = model.gamma();
    // P(s) = (ψ(s) − q)(ρ + s) = A s³ + B₀ s² + C₀ s − qρ.
    let a = 0.5 * s2;
    let b0 = 0.5 * s2 * rho + g;
    let c0 = g * rho - lambda - q;
    let p = |s: f64| ((a * s + b0) * s + c0) * s - q * rho;
    let dp = |s: f64| (3.0 * a * s + 2.0 * b0) * s + c0;

    // Deflate by the known root Φ.
    let b = b0 + a * phi;
    let c = c0 + b * phi;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Err(Error::Numeric(format!("complex roots of the scale-function denominator (discriminant {disc:e})")));
    }
    let t = -0.5 * (b + b.signum() * disc.sqrt());
    let (mut r1, mut r2) = if t == 0.0 { (0.0, -b / a) } else { (t / a, c / t) };
    if r1 < r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    for r in [&mut r1, &mut r2] {
        for _ in 0..3 {
            let d = dp(*r);
            if d != 0.0 {
                let next = *r - p(*r) / d;
                if next.is_finite() {
                    *r = next;
                }
            }
        }
    }
    if q == 0.0 {
        // 0 is an exact root; snap whichever computed root approximates it.
        if phi > 0.0 {
            r1 = 0.0;
        }
    }
    let roots = [phi, r1.min(phi), r2];
    let sep = |u: f64, v: f64| (u - v).abs() > 1e-7 * (1.0 + u.abs().max(v.abs()));
    let residues = if sep(roots[0], roots[1]) && sep(roots[1], roots[2]) {
        let mut c = [0.0; 3];
        for i in 0..3 {
            let mut den = a;
            for j in 0..3 {
                if j != i {
                    den *= roots[i] - roots[j];
                }
            }
            c[i] = (rho + roots[i]) / den;
        }
        Some(c)
    } else {
        None
    };
    Ok(Repr::Cpe { a, rho, roots, residues })
}

/// `W^(q)(x)`.
pub fn w_scale(ctx: &ScaleContext, x: f64) -> Result<f64> {
    ctx.w(x)
}

/// `Z^(q)(x)`.
pub fn z_scale(ctx: &ScaleContext, x: f64) -> Result<f64> {
    ctx.z(x)
}

/// `∂_q W^(q)(x)`.
pub fn w_scale_dq(ctx: &ScaleContext, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("w_scale_dq needs x >= 0, got {x}")));
    }
    ctx.w_dq(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRow {
    pub x: f64,
    pub w: f64,
    pub z: f64,
    pub dwdq: f64,
}

pub fn tabulate(ctx: &ScaleContext, xs: &[f64]) -> Result<Vec<ScaleRow>> {
    xs.iter()
        .map(|&x| Ok(ScaleRow { x, w: ctx.w(x)?, z: ctx.z(x)?, dwdq: if x <= 0.0 { 0.0 } else { ctx.w_dq(x)? } }))
        .collect()
}

/// CSV with header `x,W,Z,dWdq`.
pub fn rows_to_csv(rows: &[ScaleRow]) -> String {
    let mut out = String::from("x,W,Z,dWdq\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.12e},{:.12e},{:.12e}", r.x, r.w, r.z, r.dwdq);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bm(q: f64) -> ScaleContext {
        ScaleContext::new(LevyModel::brownian(), q).unwrap()
    }

    #[test]
    fn brownian_values() {
        let c = bm(0.5);
        assert!((c.w(1.0).unwrap() - 2.0 * 1f64.sinh()).abs() < 1e-13);
        assert!((c.z(1.0).unwrap() - 1f64.cosh()).abs() < 1e-13);
        assert_eq!(bm(1.0).w(-0.3).unwrap(), 0.0);
        assert_eq!(bm(3.0).z(0.0).unwrap(), 1.0);
        assert_eq!(bm(0.0).z(5.0).unwrap(), 1.0);
        let lin = ScaleContext::new(LevyModel::linear_brownian(1.0).unwrap(), 0.0).unwrap();
        assert!((lin.w(1.0).unwrap() - (1.0 - (-2f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn brownian_dq() {
        assert!((bm(0.0).w_dq(1.0).unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert_eq!(bm(0.3).w_dq(0.0).unwrap(), 0.0);
        // d/dq √(2/q) sinh(√(2q)x) at q = 0.5, x = 1.
        let (q, x) = (0.5f64, 1.0f64);
        let r = (2.0 * q).sqrt();
        let exact = -(2.0f64).sqrt() / 2.0 * q.powf(-1.5) * (r * x).sinh() + (2.0 / q).sqrt() * (r * x).cosh() * x / r;
        assert!((bm(q).w_dq(x).unwrap() - exact).abs() < 1e-12);
        let conv = bm(q).convolved_dq(x).unwrap() * (r * x).exp();
        assert!((conv - exact).abs() < 1e-10, "{conv} vs {exact}");
    }

    #[test]
    fn overflow_is_reported() {
        let c = bm(2.0);
        assert!(matches!(c.w(400.0), Err(Error::Overflow { .. })));
        assert!(c.log_w(400.0).unwrap() > 700.0);
    }

    #[test]
    fn cpe_closed_form_matches_inversion() {
        let m = LevyModel::with_exp_jumps(1.0, 0.5, 1.0, 0.5).unwrap();
        for &q in &[0.0, 0.2, 1.5] {
            let cf = ScaleContext::new(m, q).unwrap();
            let inv = ScaleContext::with_inversion(m, q, InversionParams::default()).unwrap();
            for &x in &[0.01, 0.3, 1.0, 4.0] {
                let (a, b) = (cf.scaled_w(x).unwrap(), inv.scaled_w(x).unwrap());
                assert!((a - b).abs() < 1e-9 * a.max(1.0), "q={q} x={x}: {a} vs {b}");
                let (a, b) = (cf.scaled_z(x).unwrap(), inv.scaled_z(x).unwrap());
                assert!((a - b).abs() < 1e-9 * a.max(1.0), "Z q={q} x={x}: {a} vs {b}");
                let (a, b) = (cf.scaled_w_dq(x).unwrap(), inv.scaled_w_dq(x).unwrap());
                assert!((a - b).abs() < 1e-8 * a.max(1.0), "dq q={q} x={x}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn cpe_martingale_case_has_confluent_roots() {
        // ψ'(0) = γ − λ/ρ = 0.
        let m = LevyModel::with_exp_jumps(1.0, 0.5, 1.0, 0.5).unwrap();
        let cf = ScaleContext::new(m, 0.0).unwrap();
        assert!(cf.phi_prime().is_infinite());
        let inv = ScaleContext::with_inversion(m, 0.0, InversionParams::default()).unwrap();
        for &x in &[0.2, 1.0, 3.0] {
            let (a, b) = (cf.w(x).unwrap(), inv.w(x).unwrap());
            assert!((a - b).abs() < 1e-9 * a, "x={x}: {a} vs {b}");
        }
        assert!((cf.w_dq(1.0).unwrap() - inv.w_dq(1.0).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn inversion_round_trip_brownian() {
        let inv = ScaleContext::with_inversion(LevyModel::brownian(), 0.5, InversionParams::default()).unwrap();
        let cf = bm(0.5);
        for i in 1..=100 {
            let x = 0.1 * i as f64;
            let (a, b) = (cf.w(x).unwrap(), inv.w(x).unwrap());
            assert!((a - b).abs() <= 1e-8 * a, "x={x}: {a} vs {b}");
        }
    }

    #[test]
    fn family_mismatch_is_rejected() {
        let m = LevyModel::with_exp_jumps(1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(ScaleContext::with_method(m, 0.1, Method::ClosedForm(Family::Brownian)).is_err());
        assert!(ScaleContext::with_method(LevyModel::brownian(), 0.1, Method::ClosedForm(Family::CompoundPoissonExp))
            .is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let rows = tabulate(&bm(0.0), &[0.0, 1.0]).unwrap();
        assert_eq!(rows[0].w, 0.0);
        assert_eq!(rows[0].z, 1.0);
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with("x,W,Z,dWdq\n"));
        assert_eq!(csv.lines().count(), 3);
    }

    fn model_strategy() -> impl Strategy<Value = LevyModel> {
        prop_oneof![
            (0.3f64..2.0, -1.5f64..1.5).prop_map(|(s, g)| LevyModel::new(s, g, Jumps::None).unwrap()),
            (0.3f64..2.0, -1.0f64..2.0, 0.1f64..3.0, 0.1f64..2.0)
                .prop_map(|(s, g, l, m)| LevyModel::with_exp_jumps(s, g, l, m).unwrap()),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn w_nonnegative_and_nondecreasing(m in model_strategy(), q in 0.0f64..2.0) {
            let c = ScaleContext::new(m, q).unwrap();
            let mut prev = 0.0;
            for i in 0..=40 {
                let x = 0.1 * i as f64;
                let v = c.w(x).unwrap();
                prop_assert!(v >= prev - 1e-12 * v.abs());
                prev = v;
            }
        }

        #[test]
        fn scaled_w_tends_to_phi_prime(m in model_strategy(), q in 0.05f64..2.0) {
            let c = ScaleContext::new(m, q).unwrap();
            let lim = c.phi_prime().finite().unwrap();
            prop_assert!((c.scaled_w(60.0).unwrap() - lim).abs() < 1e-6 * lim.max(1.0));
            let ratio = c.scaled_z(60.0).unwrap() / c.scaled_w(60.0).unwrap();
            prop_assert!((ratio - c.q_over_phi()).abs() < 1e-6 * ratio.max(1.0));
        }

        #[test]
        fn z_matches_integral_of_w(m in model_strategy(), q in 0.0f64..2.0, x in 0.0f64..3.0) {
            let c = ScaleContext::new(m, q).unwrap();
            let int = integrate(|y| c.w(y), 0.0, x, QuadTol::default()).unwrap();
            let z = c.z(x).unwrap();
            prop_assert!((z - 1.0 - q * int).abs() < 1e-9 * z);
        }

        #[test]
        fn dq_matches_self_convolution(m in model_strategy(), q in 0.0f64..2.0, x in 0.01f64..3.0) {
            let c = ScaleContext::new(m, q).unwrap();
            let a = c.scaled_w_dq(x).unwrap();
            let b = c.convolved_dq(x).unwrap();
            prop_assert!((a - b).abs() < 1e-9 * a.max(1e-3));
        }
    }
}
