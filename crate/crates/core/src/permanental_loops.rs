//! Potential densities of the killed process, permanental Laplace transforms
//! and the loop-soup identities.
//!
//! `Y` is `X` killed on leaving `[c, b]` or at an independent `Exp(q)`
//! time; its potential density with respect to Lebesgue measure on `(c, b)`
//! is `g(x,y) = W(x−c)W(b−y)/W(b−c) − W(x−y)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gen_scale::{gen_w_tilted, LevelWeights};
use crate::levy_model::LevyModel;
use crate::quad::{integrate, QuadTol};
use crate::scale_fn::{ScaleContext, Tilt};

/// Permanental index used throughout.
pub const BETA: f64 = 2.0;
const LOOP_SOUP_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PotentialKernel {
    ctx: ScaleContext,
    c: f64,
    b: f64,
}

impl PotentialKernel {
    pub fn new(ctx: &ScaleContext, c: f64, b: f64) -> Result<Self> {
        if !(c < b) {
            return Err(Error::DegenerateInterval(format!("need c < b, got c = {c}, b = {b}")));
        }
        Ok(Self { ctx: ctx.clone(), c, b })
    }

    pub fn ctx(&self) -> &ScaleContext {
        &self.ctx
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    fn inside(&self, v: f64) -> bool {
        v > self.c && v < self.b
    }

    /// `g(x, y)` for `x, y ∈ (c, b)`.
    pub fn g(&self, x: f64, y: f64) -> Result<f64> {
        if !(self.inside(x) && self.inside(y)) {
            return Err(Error::Domain(format!(
                "potential density needs x, y in ({}, {}), got ({x}, {y})",
                self.c, self.b
            )));
        }
        let s = |u: f64| self.ctx.scaled_w(u);
        let inner = s(x - self.c)? * s(self.b - y)? / s(self.b - self.c)? - s(x - y)?;
        if inner == 0.0 {
            return Ok(0.0);
        }
        let e = self.ctx.phi() * (x - y);
        if e > 709.0 {
            return Err(Error::Overflow { what: "potential density", x });
        }
        Ok(e.exp() * inner)
    }

    /// `G = (g(a_i, a_j))`.
    pub fn matrix(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let n = points.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] = self.g(points[i], points[j])?;
            }
        }
        Ok(g)
    }

    fn check_levels(&self, lw: &LevelWeights) -> Result<()> {
        if lw.levels().iter().any(|&a| !self.inside(a)) {
            return Err(Error::Domain(format!("levels must lie in ({}, {})", self.c, self.b)));
        }
        Ok(())
    }

    /// `I + ΛG`.
    fn i_plus_lambda_g(&self, lw: &LevelWeights) -> Result<DMatrix<f64>> {
        self.check_levels(lw)?;
        let mut m = self.matrix(lw.levels())?;
        for (i, &p) in lw.weights().iter().enumerate() {
            for j in 0..m.ncols() {
                m[(i, j)] *= p;
            }
            m[(i, i)] += 1.0;
        }
        Ok(m)
    }
}

/// `g(x, y)` for the model killed outside `[c, b]` and at rate `q`.
pub fn potential_density(model: &LevyModel, q: f64, b: f64, c: f64, x: f64, y: f64) -> Result<f64> {
    let ctx = ScaleContext::new(*model, q)?;
    PotentialKernel::new(&ctx, c, b)?.g(x, y)
}

/// `det(I + ΛG)`.
pub fn det_i_plus_lambda_g(kernel: &PotentialKernel, lw: &LevelWeights) -> Result<f64> {
    Ok(kernel.i_plus_lambda_g(lw)?.lu().determinant())
}

/// `det(I + ΛG)^{−1/β}`.
pub fn permanental_laplace_beta(kernel: &PotentialKernel, lw: &LevelWeights, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Input(format!("index must be positive, got {beta}")));
    }
    let det = det_i_plus_lambda_g(kernel, lw)?;
    if !(det > 0.0) {
        return Err(Error::Existence { det });
    }
    Ok(det.powf(-1.0 / beta))
}

/// `det(I + ΛG)^{−1/2}`.
pub fn permanental_laplace(kernel: &PotentialKernel, lw: &LevelWeights) -> Result<f64> {
    permanental_laplace_beta(kernel, lw, BETA)
}

/// Determinant of `((g(a,a), g(a,a_j)ᵀ), (Λ g(a_i,a), I + ΛG))`, by one
/// step of block elimination: `det(I+ΛG)·(g(a,a) − g(a,·)ᵀ(I+ΛG)⁻¹Λg(·,a))`.
pub fn bordered_det(kernel: &PotentialKernel, a: f64, lw: &LevelWeights) -> Result<f64> {
    let m = kernel.i_plus_lambda_g(lw)?;
    let n = lw.len();
    let gaa = kernel.g(a, a)?;
    let row = DVector::from_iterator(n, lw.levels().iter().map(|&aj| kernel.g(a, aj)).collect::<Result<Vec<_>>>()?);
    let col = DVector::from_iterator(
        n,
        lw.levels()
            .iter()
            .zip(lw.weights())
            .map(|(&ai, &p)| kernel.g(ai, a).map(|v| p * v))
            .collect::<Result<Vec<_>>>()?,
    );
    let lu = m.lu();
    let det = lu.determinant();
    let solved = lu.solve(&col).ok_or(Error::Existence { det })?;
    Ok(det * (gaa - row.dot(&solved)))
}

/// `Ẽ_a(exp(−Σ p_j l(a_j, ∞)))` for the process conditioned to die at its
/// last exit from `a`, as `𝖶(b,a)𝖶(a,c)/(𝖶(b,c)·g(a,a))`.
pub fn tilted_lt_transform(kernel: &PotentialKernel, a: f64, lw: &LevelWeights) -> Result<f64> {
    kernel.check_levels(lw)?;
    let gaa = kernel.g(a, a)?;
    if !(gaa > 0.0) {
        return Err(Error::DegenerateInterval(format!("g(a, a) = {gaa}")));
    }
    let (ctx, b, c) = (kernel.ctx(), kernel.b, kernel.c);
    let s = Tilt::Scaled;
    let num = gen_w_tilted(lw, ctx, b, a, s)? * gen_w_tilted(lw, ctx, a, c, s)?;
    Ok(num / gen_w_tilted(lw, ctx, b, c, s)? / gaa)
}

/// The same transform through the bordered determinant:
/// `bordered / (det(I+ΛG)·g(a,a))`.
pub fn tilted_lt_transform_det(kernel: &PotentialKernel, a: f64, lw: &LevelWeights) -> Result<f64> {
    let gaa = kernel.g(a, a)?;
    if !(gaa > 0.0) {
        return Err(Error::DegenerateInterval(format!("g(a, a) = {gaa}")));
    }
    Ok(bordered_det(kernel, a, lw)? / (det_i_plus_lambda_g(kernel, lw)? * gaa))
}

/// Both sides of the two determinant identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsomorphismCheck {
    /// `𝖶(b,c)/W(b−c)`.
    pub lhs_total: f64,
    /// `det(I + ΛG)`.
    pub rhs_total: f64,
    /// `𝖶(b,a)𝖶(a,c)/W(b−c)`.
    pub lhs_bordered: f64,
    /// Bordered determinant.
    pub rhs_bordered: f64,
    /// Largest absolute discrepancy.
    pub abs_gap: f64,
    /// Largest discrepancy relative to the size of the two sides.
    pub rel_gap: f64,
}

pub fn isomorphism_check(kernel: &PotentialKernel, a: f64, lw: &LevelWeights) -> Result<IsomorphismCheck> {
    kernel.check_levels(lw)?;
    let (ctx, b, c) = (kernel.ctx(), kernel.b, kernel.c);
    let s = Tilt::Scaled;
    let sbc = ctx.scaled_w(b - c)?;
    let lhs_total = gen_w_tilted(lw, ctx, b, c, s)? / sbc;
    let rhs_total = det_i_plus_lambda_g(kernel, lw)?;
    let lhs_bordered = gen_w_tilted(lw, ctx, b, a, s)? * gen_w_tilted(lw, ctx, a, c, s)? / sbc;
    let rhs_bordered = bordered_det(kernel, a, lw)?;
    let gap1 = (lhs_total - rhs_total).abs();
    let gap2 = (lhs_bordered - rhs_bordered).abs();
    let rel = |g: f64, u: f64, v: f64| g / u.abs().max(v.abs()).max(f64::MIN_POSITIVE);
    Ok(IsomorphismCheck {
        lhs_total,
        rhs_total,
        lhs_bordered,
        rhs_bordered,
        abs_gap: gap1.max(gap2),
        rel_gap: rel(gap1, lhs_total, rhs_total).max(rel(gap2, lhs_bordered, rhs_bordered)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopSoup {
    /// `ln det(I + ΛG)`.
    pub det_route: f64,
    /// `ln(𝖶(b,c)/W(b−c))`.
    pub scale_route: f64,
    pub gap: f64,
}

impl LoopSoup {
    pub fn value(&self) -> f64 {
        self.scale_route
    }
}

/// `μ(1 − e^{−Σ p_j l(a_j, ∞)})` of the loop soup, by both routes.
pub fn loop_soup_functional(kernel: &PotentialKernel, lw: &LevelWeights) -> Result<LoopSoup> {
    kernel.check_levels(lw)?;
    let (ctx, b, c) = (kernel.ctx(), kernel.b, kernel.c);
    let det = det_i_plus_lambda_g(kernel, lw)?;
    if !(det > 0.0) {
        return Err(Error::Existence { det });
    }
    let det_route = det.ln();
    let scale_route = (gen_w_tilted(lw, ctx, b, c, Tilt::Scaled)? / ctx.scaled_w(b - c)?).ln();
    let gap = (det_route - scale_route).abs();
    if gap > LOOP_SOUP_TOL * scale_route.abs().max(1.0) {
        return Err(Error::Consistency { what: "loop-soup routes".into(), gap });
    }
    Ok(LoopSoup { det_route, scale_route, gap })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDerivCheck {
    /// `∫_c^b W(b−a)W(a−c)/W(b−c) da`.
    pub lhs: f64,
    /// `∂_q ln W^(q)(b−c)`.
    pub rhs: f64,
    pub gap: f64,
}

/// Compare the integral of the diagonal `g(a,a)` over the corridor with the
/// `q`-derivative of `ln W^(q)(b−c)`.
pub fn logderiv_identity_check(ctx: &ScaleContext, b: f64, c: f64) -> Result<LogDerivCheck> {
    if !(b > c) {
        return Err(Error::DegenerateInterval(format!("need c < b, got c = {c}, b = {b}")));
    }
    let sbc = ctx.scaled_w(b - c)?;
    let lhs =
        integrate(|a| Ok(ctx.scaled_w(b - a)? * ctx.scaled_w(a - c)? / sbc), c, b, QuadTol { abs: 1e-14, rel: 1e-12 })?;
    let rhs = ctx.scaled_w_dq(b - c)? / sbc;
    Ok(LogDerivCheck { lhs, rhs, gap: (lhs - rhs).abs() })
}
