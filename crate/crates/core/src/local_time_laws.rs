//! Local-time fluctuation identities in terms of scale functions.
//!
//! All laws are evaluated through tilted scale functions (see
//! [`Tilt::Scaled`]); each ratio is arranged so that the tilts cancel or
//! leave a factor `e^{Φ(q)·d}` with `d ≤ 0` whenever possible. The killing
//! rate `q` is the one of the [`ScaleContext`].

use crate::error::{Error, Result};
use crate::gen_scale::{gen_w_tilted, gen_z_tilted, LevelWeights};
use crate::levy_model::PhiPrime;
use crate::omega_scale::OmegaGrid;
use crate::quad::{integrate_with_splits, QuadTol};
use crate::scale_fn::{ScaleContext, Tilt};

const LN_MAX: f64 = 709.0;

/// Geometry of a local-time law: `c < a < b`, start `x ∈ [c, b]`, local-time
/// weight `p` at `a`, and optional extra levels for joint laws.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub c: f64,
    pub a: f64,
    pub b: f64,
    pub x: f64,
    pub p: f64,
    pub levels: Option<LevelWeights>,
}

impl Corridor {
    pub fn new(c: f64, a: f64, b: f64, x: f64, p: f64) -> Result<Self> {
        if ![c, a, b, x, p].iter().all(|v| v.is_finite()) {
            return Err(Error::Input("corridor values must be finite".into()));
        }
        if !(c < a && a < b) {
            return Err(Error::Ordering(format!("need c < a < b, got c = {c}, a = {a}, b = {b}")));
        }
        if !(x >= c && x <= b) {
            return Err(Error::Domain(format!("start {x} outside [{c}, {b}]")));
        }
        if p < 0.0 {
            return Err(Error::Input(format!("local-time weight must be >= 0, got {p}")));
        }
        Ok(Self { c, a, b, x, p, levels: None })
    }

    /// Start at the observation level.
    pub fn at_level(c: f64, a: f64, b: f64, p: f64) -> Result<Self> {
        Self::new(c, a, b, a, p)
    }

    pub fn with_levels(mut self, lw: LevelWeights) -> Result<Self> {
        let (lo, hi) = (lw.levels()[0], lw.levels()[lw.len() - 1]);
        if !(lo > self.c && hi < self.b) {
            return Err(Error::Ordering(format!("levels must lie in ({}, {}), got [{lo}, {hi}]", self.c, self.b)));
        }
        self.levels = Some(lw);
        Ok(self)
    }

    pub fn starting_at(&self, x: f64) -> Result<Self> {
        let mut c = Self::new(self.c, self.a, self.b, x, self.p)?;
        c.levels = self.levels.clone();
        Ok(c)
    }

    fn single(&self) -> LevelWeights {
        LevelWeights::single(self.a, self.p).expect("validated corridor")
    }

    fn joint(&self) -> Result<&LevelWeights> {
        self.levels.as_ref().ok_or_else(|| Error::Input("this law needs a level set".into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomExpLaw {
    /// `P_x(l(a, τ_b⁺) = 0 | τ_b⁺ < τ_c⁻)`.
    pub atom: f64,
    /// Rate of the exponential part.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpJoint {
    /// `P_a(X_{e_q} ∈ dy, e_q < τ_b⁺ ∧ τ_c⁻)/dy`.
    pub space_density: f64,
    /// Rate of the exponential law of `l(a, e_q)` on the same event.
    pub time_rate: f64,
}

/// Value of a limit display together with the `Φ'(q) = ∞` flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitValue {
    pub value: f64,
    /// Set when the value comes from the `Φ'(0) = ∞` convention.
    pub infinite_phi_prime: bool,
}

/// The three parts of `E_a(e^{−p l(a, e_q ∧ τ_b⁺ ∧ τ_c⁻)})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KilledDecomposition {
    /// Exit above `b` first.
    pub up: f64,
    /// Exit below `c` first.
    pub down: f64,
    /// Killed by the clock inside `(c, b)`.
    pub inside: f64,
}

impl KilledDecomposition {
    pub fn total(&self) -> f64 {
        self.up + self.down + self.inside
    }
}

fn exp_checked(e: f64, what: &'static str, x: f64) -> Result<f64> {
    if e > LN_MAX {
        return Err(Error::Overflow { what, x });
    }
    Ok(e.exp())
}

fn sw(ctx: &ScaleContext, u: f64) -> Result<f64> {
    ctx.scaled_w(u)
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::DegenerateInterval(format!("{what} = {v}")))
    }
}

// ---- generalized-scale laws (single level or level set) ----

fn exit_up_with(ctx: &ScaleContext, lw: &LevelWeights, c: f64, b: f64, x: f64) -> Result<f64> {
    let s = Tilt::Scaled;
    let den = positive(gen_w_tilted(lw, ctx, b, c, s)?, "generalized W(b, c)")?;
    Ok((-ctx.phi() * (b - x)).exp() * gen_w_tilted(lw, ctx, x, c, s)? / den)
}

fn exit_down_with(ctx: &ScaleContext, lw: &LevelWeights, c: f64, b: f64, x: f64) -> Result<f64> {
    let s = Tilt::Scaled;
    let den = positive(gen_w_tilted(lw, ctx, b, c, s)?, "generalized W(b, c)")?;
    let inner =
        gen_z_tilted(lw, ctx, x, c, s)? - gen_w_tilted(lw, ctx, x, c, s)? * gen_z_tilted(lw, ctx, b, c, s)? / den;
    if inner == 0.0 {
        return Ok(0.0);
    }
    Ok(exp_checked(ctx.phi() * (x - c), "exit-down transform", x)? * inner)
}

fn resolvent_with(ctx: &ScaleContext, lw: &LevelWeights, c: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    if !(y > c && y < b) {
        return Err(Error::Domain(format!("y = {y} outside ({c}, {b})")));
    }
    let s = Tilt::Scaled;
    let den = positive(gen_w_tilted(lw, ctx, b, c, s)?, "generalized W(b, c)")?;
    let inner =
        gen_w_tilted(lw, ctx, x, c, s)? * gen_w_tilted(lw, ctx, b, y, s)? / den - gen_w_tilted(lw, ctx, x, y, s)?;
    if inner == 0.0 {
        return Ok(0.0);
    }
    Ok(exp_checked(ctx.phi() * (x - y), "resolvent density", x)? * inner)
}

/// `E_x(e^{−qτ_b⁺ − p l(a, τ_b⁺)}; τ_b⁺ < τ_c⁻)`.
pub fn lt_exit_up(ctx: &ScaleContext, cor: &Corridor) -> Result<f64> {
    exit_up_with(ctx, &cor.single(), cor.c, cor.b, cor.x)
}

/// `E_x(e^{−qτ_c⁻ − p l(a, τ_c⁻)}; τ_c⁻ < τ_b⁺)`.
pub fn lt_exit_down(ctx: &ScaleContext, cor: &Corridor) -> Result<f64> {
    exit_down_with(ctx, &cor.single(), cor.c, cor.b, cor.x)
}

/// Density at `y` of `∫₀^∞ E_x(e^{−qt − p l(a,t)}; X_t ∈ dy, t < τ_b⁺ ∧ τ_c⁻) dt`.
pub fn lt_resolvent(ctx: &ScaleContext, cor: &Corridor, y: f64) -> Result<f64> {
    resolvent_with(ctx, &cor.single(), cor.c, cor.b, cor.x, y)
}

/// Joint-level version of [`lt_exit_up`]: weights `p_j` at every level.
pub fn joint_lt_exit_up(ctx: &ScaleContext, cor: &Corridor) -> Result<f64> {
    exit_up_with(ctx, cor.joint()?, cor.c, cor.b, cor.x)
}

pub fn joint_lt_exit_down(ctx: &ScaleContext, cor: &Corridor) -> Result<f64> {
    exit_down_with(ctx, cor.joint()?, cor.c, cor.b, cor.x)
}

pub fn joint_lt_resolvent(ctx: &ScaleContext, cor: &Corridor, y: f64) -> Result<f64> {
    resolvent_with(ctx, cor.joint()?, cor.c, cor.b, cor.x, y)
}

// ---- single-level laws through W and Z only ----

/// `W(b−c)/(W(b−a)W(a−c))`: exponential rate of `l(a, ·)` up to exit or
/// killing, started from `a`.
pub fn local_time_rate(ctx: &ScaleContext, c: f64, a: f64, b: f64) -> Result<f64> {
    let den = positive(sw(ctx, b - a)? * sw(ctx, a - c)?, "W(b−a)W(a−c)")?;
    Ok(sw(ctx, b - c)? / den)
}

/// Law of `l(a, τ_b⁺)` given `τ_b⁺ < τ_c⁻`: an atom at 0 plus an exponential
/// part. Needs `q = 0`.
pub fn lt_atom_exp(ctx: &ScaleContext, cor: &Corridor) -> Result<AtomExpLaw> {
    if ctx.q() != 0.0 {
        return Err(Error::Input(format!("lt_atom_exp needs q = 0, got {}", ctx.q())));
    }
    let (c, a, b, x) = (cor.c, cor.a, cor.b, cor.x);
    let wxc = positive(sw(ctx, x - c)?, "W(x−c)")?;
    let atom = sw(ctx, x - a)? * sw(ctx, b - c)? / (wxc * positive(sw(ctx, b - a)?, "W(b−a)")?);
    Ok(AtomExpLaw { atom, rate: local_time_rate(ctx, c, a, b)? })
}

/// `E_x(e^{−qτ^{a}}; τ^{a} < τ_b⁺ ∧ τ_c⁻)` for the first hitting time of `a`.
pub fn hitting_transform(ctx: &ScaleContext, cor: &Corridor) -> Result<f64> {
    let (c, a, b, x) = (cor.c, cor.a, cor.b, cor.x);
    let wac = positive(sw(ctx, a - c)?, "W(a−c)")?;
    let inner = sw(ctx, x - c)? / wac - sw(ctx, x - a)? * sw(ctx, b - c)? / (sw(ctx, b - a)? * wac);
    if inner == 0.0 {
        return Ok(0.0);
    }
    Ok(exp_checked(ctx.phi() * (x - a), "hitting transform", x)? * inner)
}

/// Turn a functional `v = E_a(·)` of the local time at `a` into the same
/// functional under `P_x`, by the strong Markov property at `τ^{a}`: paths
/// that never reach `a` carry no local time there.
pub fn compose_from_level(ctx: &ScaleContext, cor: &Corridor, value_at_a: f64) -> Result<f64> {
    let h = hitting_transform(ctx, cor)?;
    Ok(1.0 - h + h * value_at_a)
}

/// `E_x(e^{−p l(a, e_q ∧ τ_b⁺ ∧ τ_c⁻)})`; from `a` this is
/// `W(b−c)/(W(b−c) + pW(b−a)W(a−c))`.
pub fn lt_exp_killed_transform(ctx: &ScaleContext, cor: &Corridor) -> Result<f64> {
    let (c, a, b) = (cor.c, cor.a, cor.b);
    let wbc = sw(ctx, b - c)?;
    let at_a = wbc / positive(wbc + cor.p * sw(ctx, b - a)? * sw(ctx, a - c)?, "denominator")?;
    if cor.x == a {
        Ok(at_a)
    } else {
        compose_from_level(ctx, cor, at_a)
    }
}

/// The three exit modes of [`lt_exp_killed_transform`] started from `a`.
/// The up and down parts come from the generalized-scale exit laws; the
/// inside part integrates `q` times the resolvent density over `(c, b)`.
pub fn lt_exp_killed_decomposition(ctx: &ScaleContext, cor: &Corridor) -> Result<KilledDecomposition> {
    let at_a = cor.starting_at(cor.a)?;
    let up = lt_exit_up(ctx, &at_a)?;
    let down = lt_exit_down(ctx, &at_a)?;
    let q = ctx.q();
    let inside = if q == 0.0 {
        0.0
    } else {
        let lw = at_a.single();
        q * integrate_with_splits(
            |y| {
                if y <= at_a.c || y >= at_a.b {
                    Ok(0.0)
                } else {
                    resolvent_with(ctx, &lw, at_a.c, at_a.b, at_a.a, y)
                }
            },
            at_a.c,
            at_a.b,
            &[at_a.a],
            QuadTol { abs: 1e-15, rel: 1e-13 },
        )?
    };
    Ok(KilledDecomposition { up, down, inside })
}

/// `[W(a−c)(Z(b−c)−1) − W(b−c)(Z(a−c)−1)]/(W(b−a)W(a−c))`: the factor in
/// front of `e^{−rt}` in the density of `l(a, e_q)` on `{e_q < τ_b⁺ ∧ τ_c⁻}`.
pub fn lt_exp_inside_prefactor(ctx: &ScaleContext, cor: &Corridor) -> Result<f64> {
    let (c, a, b) = (cor.c, cor.a, cor.b);
    let (wac, wbc, wba) = (ctx.w(a - c)?, ctx.w(b - c)?, ctx.w(b - a)?);
    let (zac, zbc) = (ctx.z(a - c)?, ctx.z(b - c)?);
    let den = positive(wba * wac, "W(b−a)W(a−c)")?;
    Ok((wac * (zbc - 1.0) - wbc * (zac - 1.0)) / den)
}

/// Space density (including the factor `q`) of `X_{e_q}` and the rate of
/// `l(a, e_q)` on `{e_q < τ_b⁺ ∧ τ_c⁻}`, started from `a`.
pub fn lt_exp_joint(ctx: &ScaleContext, cor: &Corridor, y: f64) -> Result<ExpJoint> {
    let (c, a, b) = (cor.c, cor.a, cor.b);
    if !(y > c && y < b) {
        return Err(Error::Domain(format!("y = {y} outside ({c}, {b})")));
    }
    let wbc = positive(sw(ctx, b - c)?, "W(b−c)")?;
    let inner = sw(ctx, a - c)? * sw(ctx, b - y)? / wbc - sw(ctx, a - y)?;
    let space_density =
        if inner == 0.0 { 0.0 } else { ctx.q() * exp_checked(ctx.phi() * (a - y), "space density", y)? * inner };
    Ok(ExpJoint { space_density, time_rate: local_time_rate(ctx, c, a, b)? })
}

/// `E_a(e^{−qτ_b⁺ − p l(a, τ_b⁺)}; τ_b⁺ < ∞) = 1/(e^{Φ(q)(b−a)} + pW(b−a))`.
pub fn lt_limit_up(ctx: &ScaleContext, a: f64, b: f64, p: f64) -> Result<f64> {
    if !(b > a) {
        return Err(Error::Ordering(format!("need a < b, got a = {a}, b = {b}")));
    }
    Ok((-ctx.phi() * (b - a)).exp() / (1.0 + p * sw(ctx, b - a)?))
}

/// `E_a(e^{−qτ_c⁻ − p l(a, τ_c⁻)}; τ_c⁻ < ∞)
///  = (Z(a−c) − (q/Φ(q))W(a−c))/(1 + p e^{Φ(q)(c−a)} W(a−c))`.
pub fn lt_limit_down(ctx: &ScaleContext, a: f64, c: f64, p: f64) -> Result<f64> {
    if !(a > c) {
        return Err(Error::Ordering(format!("need c < a, got c = {c}, a = {a}")));
    }
    let u = a - c;
    let num = ctx.z(u)? - ctx.q_over_phi() * ctx.w(u)?;
    Ok(num / (1.0 + p * sw(ctx, u)?))
}

/// `E_a(e^{−p l(a, e_q)}) = 1/(1 + pΦ'(q))`, or 0 under `Φ'(q) = ∞` (flagged).
pub fn lt_limit_global(ctx: &ScaleContext, p: f64) -> LimitValue {
    match ctx.phi_prime() {
        PhiPrime::Finite(d) => LimitValue { value: 1.0 / (1.0 + p * d), infinite_phi_prime: false },
        PhiPrime::Infinite => LimitValue { value: if p > 0.0 { 0.0 } else { 1.0 }, infinite_phi_prime: true },
    }
}

/// Inverse local time at `a`: every one of the equal probabilities
/// `P_a(l^{−1}(a,t) < τ_b⁺ ∧ τ_c⁻ ∧ e_q)`, `P_a(l(a, τ_b⁺) > t | τ_b⁺ < e_q ∧ τ_c⁻)`,
/// and their counterparts conditioned on the other exits, equals `e^{−rt}`
/// with the rate of [`local_time_rate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvLtSurvival {
    pub value: f64,
    pub rate: f64,
}

pub fn inv_lt_survival(ctx: &ScaleContext, cor: &Corridor, t: f64) -> Result<InvLtSurvival> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    let rate = local_time_rate(ctx, cor.c, cor.a, cor.b)?;
    Ok(InvLtSurvival { value: (-rate * t).exp(), rate })
}

/// `𝖶(b,c)/(𝖶(b,a)𝖶(a,c))` for the corridor's level set.
pub fn inv_lt_joint_exponent(ctx: &ScaleContext, cor: &Corridor) -> Result<f64> {
    let lw = cor.joint()?;
    let s = Tilt::Scaled;
    let (c, a, b) = (cor.c, cor.a, cor.b);
    let den = positive(gen_w_tilted(lw, ctx, b, a, s)? * gen_w_tilted(lw, ctx, a, c, s)?, "denominator")?;
    Ok(gen_w_tilted(lw, ctx, b, c, s)? / den)
}

/// `E_a(exp(−Σ p_j l(a_j, l^{−1}(a,t))); l^{−1}(a,t) < τ_b⁺ ∧ τ_c⁻ ∧ e_q)`.
pub fn inv_lt_joint_transform(ctx: &ScaleContext, cor: &Corridor, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    Ok((-t * inv_lt_joint_exponent(ctx, cor)?).exp())
}

/// `E_a(e^{−L(l^{−1}(a,t))}; l^{−1}(a,t) < τ_b⁺ ∧ τ_c⁻)` with `L` the
/// ω-weighted occupation time, from a solved [`OmegaGrid`].
pub fn occu_inv_lt_transform(grid: &OmegaGrid, a: f64, b: f64, c: f64, t: f64) -> Result<f64> {
    if !(c < a && a < b) {
        return Err(Error::Ordering(format!("need c < a < b, got c = {c}, a = {a}, b = {b}")));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("t must be >= 0, got {t}")));
    }
    let den = positive(grid.w(b, a)? * grid.w(a, c)?, "W^(ω)(b,a)W^(ω)(a,c)")?;
    Ok((-t * grid.w(b, c)? / den).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::LevyModel;

    fn bm(q: f64) -> ScaleContext {
        ScaleContext::new(LevyModel::brownian(), q).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn exit_up_hand_value() {
        let cor = Corridor::new(0.0, 1.0, 2.0, 1.5, 1.0).unwrap();
        assert!(close(lt_exit_up(&bm(0.0), &cor).unwrap(), 0.625, 1e-15));
        let at_b = cor.starting_at(2.0).unwrap();
        assert!(close(lt_exit_up(&bm(0.3), &at_b).unwrap(), 1.0, 1e-15));
        assert!(close(lt_exit_down(&bm(0.3), &at_b).unwrap(), 0.0, 1e-14));
        let free = Corridor::new(0.0, 1.0, 2.0, 1.5, 0.0).unwrap();
        assert!(close(lt_exit_down(&bm(0.0), &free).unwrap(), 0.25, 1e-15));
    }

    #[test]
    fn atom_and_rate() {
        let c = bm(0.0);
        let law = lt_atom_exp(&c, &Corridor::new(0.0, 1.0, 2.0, 1.5, 0.0).unwrap()).unwrap();
        assert!(close(law.atom, 2.0 / 3.0, 1e-15) && close(law.rate, 1.0, 1e-15));
        let law = lt_atom_exp(&c, &Corridor::new(0.0, 1.0, 2.0, 0.5, 0.0).unwrap()).unwrap();
        assert_eq!(law.atom, 0.0);
        assert!(lt_atom_exp(&bm(0.1), &Corridor::new(0.0, 1.0, 2.0, 1.5, 0.0).unwrap()).is_err());
        let lin = ScaleContext::new(LevyModel::linear_brownian(1.0).unwrap(), 0.0).unwrap();
        let r = lt_atom_exp(&lin, &Corridor::new(0.0, 1.0, 2.0, 1.5, 0.0).unwrap()).unwrap().rate;
        let sinh_form = 0.5 * 2f64.sinh() / (1f64.sinh() * 1f64.sinh());
        assert!(close(r, sinh_form, 1e-12));
        assert!(close(r, 1.313035, 1e-6));
    }

    #[test]
    fn hitting_values() {
        let c = bm(0.0);
        let cor = Corridor::new(0.0, 1.0, 2.0, 1.5, 0.0).unwrap();
        assert!(close(hitting_transform(&c, &cor).unwrap(), 0.5, 1e-15));
        assert!(close(hitting_transform(&c, &cor.starting_at(1.0).unwrap()).unwrap(), 1.0, 1e-15));
        assert!(close(hitting_transform(&bm(0.4), &cor.starting_at(2.0).unwrap()).unwrap(), 0.0, 1e-14));
    }

    #[test]
    fn killed_transform_and_decomposition() {
        let c = bm(0.5);
        let cor = Corridor::at_level(0.0, 1.0, 2.0, 1.0).unwrap();
        let w1 = 2.0 * 1f64.sinh();
        let w2 = 2.0 * 2f64.sinh();
        let v = lt_exp_killed_transform(&c, &cor).unwrap();
        assert!(close(v, w2 / (w2 + w1 * w1), 1e-14));
        assert!(close(v, 0.567668, 1e-6));
        let d = lt_exp_killed_decomposition(&c, &cor).unwrap();
        assert!(close(d.total(), v, 1e-12));
        let zero = Corridor::at_level(0.0, 1.0, 2.0, 0.0).unwrap();
        assert!(close(lt_exp_killed_transform(&c, &zero).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn exp_joint_values() {
        let c = bm(0.5);
        let cor = Corridor::at_level(0.0, 1.0, 2.0, 0.0).unwrap();
        let j = lt_exp_joint(&c, &cor, 1.0).unwrap();
        let w1 = 2.0 * 1f64.sinh();
        let w2 = 2.0 * 2f64.sinh();
        assert!(close(j.space_density, 0.5 * (w1 * w1 / w2), 1e-14));
        assert!(close(j.space_density, 0.380797, 1e-6));
        assert!(close(j.time_rate, 1.313035, 1e-6));
        assert!(lt_exp_joint(&c, &cor, 2.0).is_err());
    }

    #[test]
    fn limits() {
        let c = bm(0.5);
        let g = lt_limit_global(&c, 1.0);
        assert!(!g.infinite_phi_prime && close(g.value, 0.5, 1e-15));
        assert!(close(lt_limit_up(&c, 1.0, 2.5, 0.0).unwrap(), (-1.5f64).exp(), 1e-15));
        let g0 = lt_limit_global(&bm(0.0), 1.0);
        assert!(g0.infinite_phi_prime && g0.value == 0.0);
        let far = Corridor::new(-1e3, 1.0, 2.5, 1.0, 0.7).unwrap();
        assert!(close(lt_exit_up(&c, &far).unwrap(), lt_limit_up(&c, 1.0, 2.5, 0.7).unwrap(), 1e-8));
    }

    #[test]
    fn inverse_local_time() {
        let c = bm(0.0);
        let cor = Corridor::at_level(0.0, 1.0, 2.0, 0.0).unwrap();
        assert_eq!(inv_lt_survival(&c, &cor, 0.0).unwrap().value, 1.0);
        assert!(close(inv_lt_survival(&c, &cor, 1.0).unwrap().value, (-1f64).exp(), 1e-15));
        // Levels v = −1 (weight 1), u = 1 (weight 1) around a = 0.
        let lw = LevelWeights::new(vec![-1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let cor = Corridor::at_level(-2.0, 0.0, 2.0, 0.0).unwrap().with_levels(lw).unwrap();
        assert!(close(inv_lt_joint_exponent(&c, &cor).unwrap(), 0.75, 1e-14));
        assert!(close(inv_lt_joint_transform(&c, &cor, 1.0).unwrap(), (-0.75f64).exp(), 1e-14));
    }

    #[test]
    fn joint_two_levels() {
        let lw = LevelWeights::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let cor = Corridor::new(0.0, 1.0, 3.0, 2.5, 1.0).unwrap().with_levels(lw).unwrap();
        assert!(close(joint_lt_exit_up(&bm(0.0), &cor).unwrap(), 19.0 / 30.0, 1e-15));
        let one = LevelWeights::single(1.0, 1.0).unwrap();
        let cor1 = Corridor::new(0.0, 1.0, 3.0, 2.5, 1.0).unwrap().with_levels(one).unwrap();
        let c = bm(0.4);
        assert!(close(joint_lt_exit_up(&c, &cor1).unwrap(), lt_exit_up(&c, &cor1).unwrap(), 1e-15));
        assert!(close(joint_lt_exit_down(&c, &cor1).unwrap(), lt_exit_down(&c, &cor1).unwrap(), 1e-15));
    }

    #[test]
    fn resolvent_monotone_in_p() {
        let c = bm(0.5);
        let mut prev = f64::INFINITY;
        for &p in &[0.0, 1.0, 10.0, 1e3, 1e6] {
            let cor = Corridor::new(0.0, 1.0, 2.0, 1.5, p).unwrap();
            let v = lt_resolvent(&c, &cor, 1.0).unwrap();
            assert!(v <= prev && v >= 0.0);
            prev = v;
        }
        assert!(prev < 1e-5);
        let at_c = Corridor::new(0.0, 1.0, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(lt_resolvent(&c, &at_c, 1.0).unwrap(), 0.0);
        assert!(lt_resolvent(&c, &at_c, 2.5).is_err());
    }

    #[test]
    fn corridor_validation() {
        assert!(Corridor::new(0.0, 0.0, 1.0, 0.5, 0.0).is_err());
        assert!(Corridor::new(0.0, 0.5, 1.0, 1.5, 0.0).is_err());
        assert!(Corridor::new(0.0, 0.5, 1.0, 0.5, -1.0).is_err());
        let lw = LevelWeights::single(1.0, 1.0).unwrap();
        assert!(Corridor::new(0.0, 0.5, 1.0, 0.5, 0.0).unwrap().with_levels(lw).is_err());
    }
}
