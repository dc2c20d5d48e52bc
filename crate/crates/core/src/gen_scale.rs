//! Generalized scale functions `𝖶^(q;p₁..pₙ)_(a₁..aₙ)` and `𝖹^(q;p₁..pₙ)_(a₁..aₙ)`.
//!
//! Three routes are provided: the level-by-level recursion, the
//! unit-lower-triangular linear system (canonical), and the bordered
//! determinant. `q` is carried by the [`ScaleContext`]; a [`LevelWeights`]
//! only holds the levels and their weights.
//!
//! Every function has a `_tilted` form. With [`Tilt::Scaled`] all scale
//! functions are replaced by `e^{−Φ(q)u}`-tilted ones, which yields
//! `e^{−Φ(q)(x−y)} 𝖶(x,y)` and `e^{−Φ(q)(x−c)} 𝖹(x,c)` without overflow.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scale_fn::{ScaleContext, Tilt};

pub const MAX_LEVELS: usize = 64;
const LEVEL_GAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelWeights {
    levels: Vec<f64>,
    weights: Vec<f64>,
}

impl LevelWeights {
    pub fn new(levels: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::Input("at least one level is required".into()));
        }
        if levels.len() > MAX_LEVELS {
            return Err(Error::Input(format!("at most {MAX_LEVELS} levels are supported")));
        }
        if levels.len() != weights.len() {
            return Err(Error::Input(format!("{} levels but {} weights", levels.len(), weights.len())));
        }
        if levels.iter().any(|a| !a.is_finite()) {
            return Err(Error::Input("levels must be finite".into()));
        }
        for w in levels.windows(2) {
            if !(w[1] - w[0] > LEVEL_GAP * w[0].abs().max(w[1].abs()).max(1.0)) {
                return Err(Error::Ordering(format!("levels must be strictly increasing, got {} then {}", w[0], w[1])));
            }
        }
        if weights.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Input("weights must be finite and >= 0".into()));
        }
        Ok(Self { levels, weights })
    }

    pub fn single(a: f64, p: f64) -> Result<Self> {
        Self::new(vec![a], vec![p])
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Same levels with every weight set to zero.
    pub fn zeroed(&self) -> Self {
        Self { levels: self.levels.clone(), weights: vec![0.0; self.levels.len()] }
    }
}

/// `Σ = (W(a_i − a_j))`, `α(x) = (W(x − a_i))`, `β(y) = (W(a_i − y))`,
/// `γ(c) = (Z(a_i − c))`, `Λ = diag(p)`.
#[derive(Debug, Clone)]
pub struct GenScaleMatrices {
    pub sigma: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl GenScaleMatrices {
    /// `x`, `y`, `c` are optional; missing vectors are left empty.
    pub fn build(
        lw: &LevelWeights,
        ctx: &ScaleContext,
        x: Option<f64>,
        y: Option<f64>,
        c: Option<f64>,
        tilt: Tilt,
    ) -> Result<Self> {
        let a = lw.levels();
        let n = a.len();
        let sigma = sigma_matrix(lw, ctx, tilt)?;
        let alpha = match x {
            Some(x) => a.iter().map(|&ai| ctx.w_tilted(x - ai, tilt)).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let beta = match y {
            Some(y) => a.iter().map(|&ai| ctx.w_tilted(ai - y, tilt)).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let gamma = match c {
            Some(c) => a.iter().map(|&ai| ctx.z_tilted(ai - c, tilt)).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        debug_assert_eq!(sigma.nrows(), n);
        Ok(Self { sigma, alpha, beta, gamma, lambda: lw.weights().to_vec() })
    }
}

fn sigma_matrix(lw: &LevelWeights, ctx: &ScaleContext, tilt: Tilt) -> Result<DMatrix<f64>> {
    let a = lw.levels();
    let n = a.len();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            s[(i, j)] = ctx.w_tilted(a[i] - a[j], tilt)?;
        }
    }
    Ok(s)
}

fn check_z_order(lw: &LevelWeights, c: f64) -> Result<()> {
    if !(lw.levels()[0] > c) {
        return Err(Error::Ordering(format!("the lowest level {} must lie above c = {c}", lw.levels()[0])));
    }
    Ok(())
}

/// Run the level recursion with seed `seed(u)` evaluated at `u = pt` for
/// every point in `a₁..aₙ, x`, returning the value at `x`.
fn recursion<F>(lw: &LevelWeights, ctx: &ScaleContext, x: f64, seed: F, tilt: Tilt) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let a = lw.levels();
    let p = lw.weights();
    let n = a.len();
    // vals[i] for point a_i (i < n) and x (i = n), at the current depth k.
    let mut vals: Vec<f64> = a.iter().chain(std::iter::once(&x)).map(|&u| seed(u)).collect::<Result<_>>()?;
    for k in 0..n {
        let at_level = vals[k];
        if p[k] == 0.0 {
            continue;
        }
        for (i, v) in vals.iter_mut().enumerate() {
            let pt = if i < n { a[i] } else { x };
            let wk = ctx.w_tilted(pt - a[k], tilt)?;
            if wk != 0.0 {
                *v += p[k] * wk * at_level;
            }
        }
    }
    Ok(vals[n])
}

pub fn gen_w_recursive(lw: &LevelWeights, ctx: &ScaleContext, x: f64, y: f64) -> Result<f64> {
    gen_w_recursive_tilted(lw, ctx, x, y, Tilt::Plain)
}

pub fn gen_w_recursive_tilted(lw: &LevelWeights, ctx: &ScaleContext, x: f64, y: f64, tilt: Tilt) -> Result<f64> {
    recursion(lw, ctx, x, |u| ctx.w_tilted(u - y, tilt), tilt)
}

pub fn gen_z_recursive(lw: &LevelWeights, ctx: &ScaleContext, x: f64, c: f64) -> Result<f64> {
    gen_z_recursive_tilted(lw, ctx, x, c, Tilt::Plain)
}

pub fn gen_z_recursive_tilted(lw: &LevelWeights, ctx: &ScaleContext, x: f64, c: f64, tilt: Tilt) -> Result<f64> {
    check_z_order(lw, c)?;
    recursion(lw, ctx, x, |u| ctx.z_tilted(u - c, tilt), tilt)
}

/// Solve `(I − ΛΣ) v = rhs` by forward substitution; `v_i` is the
/// generalized function evaluated at `a_i`.
fn forward_substitute(sigma: &DMatrix<f64>, p: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut v = vec![0.0; n];
    for i in 0..n {
        let mut acc = rhs[i];
        for k in 0..i {
            acc += sigma[(i, k)] * p[k] * v[k];
        }
        v[i] = acc;
    }
    v
}

/// `(𝖶(a_i, y))_i` from the linear system.
pub fn gen_w_linear_system(lw: &LevelWeights, ctx: &ScaleContext, y: f64) -> Result<Vec<f64>> {
    gen_w_linear_system_tilted(lw, ctx, y, Tilt::Plain)
}

pub fn gen_w_linear_system_tilted(lw: &LevelWeights, ctx: &ScaleContext, y: f64, tilt: Tilt) -> Result<Vec<f64>> {
    let m = GenScaleMatrices::build(lw, ctx, None, Some(y), None, tilt)?;
    Ok(forward_substitute(&m.sigma, &m.lambda, &m.beta))
}

/// `(𝖹(a_i, c))_i` from the linear system.
pub fn gen_z_linear_system_tilted(lw: &LevelWeights, ctx: &ScaleContext, c: f64, tilt: Tilt) -> Result<Vec<f64>> {
    check_z_order(lw, c)?;
    let m = GenScaleMatrices::build(lw, ctx, None, None, Some(c), tilt)?;
    Ok(forward_substitute(&m.sigma, &m.lambda, &m.gamma))
}

/// Canonical evaluation of `𝖶(x, y)` through the linear system.
pub fn gen_w(lw: &LevelWeights, ctx: &ScaleContext, x: f64, y: f64) -> Result<f64> {
    gen_w_tilted(lw, ctx, x, y, Tilt::Plain)
}

pub fn gen_w_tilted(lw: &LevelWeights, ctx: &ScaleContext, x: f64, y: f64, tilt: Tilt) -> Result<f64> {
    let v = gen_w_linear_system_tilted(lw, ctx, y, tilt)?;
    let mut acc = ctx.w_tilted(x - y, tilt)?;
    for (k, (&a, &p)) in lw.levels().iter().zip(lw.weights()).enumerate() {
        if p != 0.0 && v[k] != 0.0 {
            acc += ctx.w_tilted(x - a, tilt)? * p * v[k];
        }
    }
    Ok(acc)
}

/// Canonical evaluation of `𝖹(x, c)` through the linear system.
pub fn gen_z(lw: &LevelWeights, ctx: &ScaleContext, x: f64, c: f64) -> Result<f64> {
    gen_z_tilted(lw, ctx, x, c, Tilt::Plain)
}

pub fn gen_z_tilted(lw: &LevelWeights, ctx: &ScaleContext, x: f64, c: f64, tilt: Tilt) -> Result<f64> {
    let v = gen_z_linear_system_tilted(lw, ctx, c, tilt)?;
    let mut acc = ctx.z_tilted(x - c, tilt)?;
    for (k, (&a, &p)) in lw.levels().iter().zip(lw.weights()).enumerate() {
        if p != 0.0 {
            acc += ctx.w_tilted(x - a, tilt)? * p * v[k];
        }
    }
    Ok(acc)
}

fn bordered_det(corner: f64, alpha: &[f64], col: &[f64], m: &GenScaleMatrices) -> f64 {
    let n = alpha.len();
    let mut mat = DMatrix::zeros(n + 1, n + 1);
    mat[(0, 0)] = corner;
    for i in 0..n {
        mat[(0, i + 1)] = alpha[i];
        mat[(i + 1, 0)] = -m.lambda[i] * col[i];
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            mat[(i + 1, j + 1)] = id - m.lambda[i] * m.sigma[(i, j)];
        }
    }
    mat.lu().determinant()
}

/// `𝖶(x, y)` as the determinant of `((W(x−y), αᵀ), (−Λβ, I−ΛΣ))`.
pub fn gen_w_det(lw: &LevelWeights, ctx: &ScaleContext, x: f64, y: f64) -> Result<f64> {
    gen_w_det_tilted(lw, ctx, x, y, Tilt::Plain)
}

pub fn gen_w_det_tilted(lw: &LevelWeights, ctx: &ScaleContext, x: f64, y: f64, tilt: Tilt) -> Result<f64> {
    let m = GenScaleMatrices::build(lw, ctx, Some(x), Some(y), None, tilt)?;
    Ok(bordered_det(ctx.w_tilted(x - y, tilt)?, &m.alpha, &m.beta, &m))
}

/// `𝖹(x, c)` as the determinant of `((Z(x−c), αᵀ), (−Λγ, I−ΛΣ))`.
pub fn gen_z_det(lw: &LevelWeights, ctx: &ScaleContext, x: f64, c: f64) -> Result<f64> {
    gen_z_det_tilted(lw, ctx, x, c, Tilt::Plain)
}

pub fn gen_z_det_tilted(lw: &LevelWeights, ctx: &ScaleContext, x: f64, c: f64, tilt: Tilt) -> Result<f64> {
    check_z_order(lw, c)?;
    let m = GenScaleMatrices::build(lw, ctx, Some(x), None, Some(c), tilt)?;
    Ok(bordered_det(ctx.z_tilted(x - c, tilt)?, &m.alpha, &m.gamma, &m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy_model::LevyModel;
    use proptest::prelude::*;

    fn bm(q: f64) -> ScaleContext {
        ScaleContext::new(LevyModel::brownian(), q).unwrap()
    }

    #[test]
    fn one_level_hand_value() {
        let lw = LevelWeights::single(1.0, 1.0).unwrap();
        let c = bm(0.0);
        assert_eq!(gen_w_recursive(&lw, &c, 1.5, 0.0).unwrap(), 5.0);
        assert!((gen_w_det(&lw, &c, 1.5, 0.0).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(gen_w(&lw, &c, 1.5, 0.0).unwrap(), 5.0);
        assert_eq!(gen_w_linear_system(&lw, &c, 0.0).unwrap(), vec![2.0]);
    }

    #[test]
    fn two_level_hand_values() {
        let lw = LevelWeights::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let c = bm(0.0);
        assert_eq!(gen_w_recursive(&lw, &c, 3.0, 0.0).unwrap(), 30.0);
        assert!((gen_w_det(&lw, &c, 3.0, 0.0).unwrap() - 30.0).abs() < 1e-13);
        assert_eq!(gen_w_linear_system(&lw, &c, 0.0).unwrap(), vec![2.0, 8.0]);
        assert_eq!(gen_w_linear_system(&lw, &c, 2.5).unwrap(), vec![0.0, 0.0]);
        // Checked by hand as a 3×3 cofactor expansion.
        let m = DMatrix::<f64>::from_row_slice(3, 3, &[6.0, 4.0, 2.0, -2.0, 1.0, 0.0, -4.0, -2.0, 1.0]);
        assert!((m.determinant() - 30.0).abs() < 1e-13);
    }

    #[test]
    fn z_hand_value_is_e_squared() {
        let lw = LevelWeights::single(1.0, 1.0).unwrap();
        let c = bm(0.5);
        let v = gen_z_recursive(&lw, &c, 2.0, 0.0).unwrap();
        assert!((v - 2f64.exp()).abs() < 1e-12);
        assert!((gen_z_det(&lw, &c, 2.0, 0.0).unwrap() - v).abs() < 1e-12);
        assert!((gen_z(&lw, &c, 2.0, 0.0).unwrap() - v).abs() < 1e-12);
        let lw = LevelWeights::single(0.5, 1.0).unwrap();
        assert_eq!(gen_z_recursive(&lw, &c, 0.3, 0.0).unwrap(), c.z(0.3).unwrap());
        assert_eq!(gen_z_recursive(&lw, &c, -1.0, 0.0).unwrap(), 1.0);
        assert!(matches!(gen_z_recursive(&lw, &c, 1.0, 0.5), Err(Error::Ordering(_))));
    }

    #[test]
    fn zero_weights_collapse() {
        let lw = LevelWeights::new(vec![0.2, 0.9, 1.4], vec![0.0; 3]).unwrap();
        let c = bm(0.7);
        let w = c.w(1.7).unwrap();
        assert_eq!(gen_w_recursive(&lw, &c, 1.8, 0.1).unwrap(), w);
        assert!((gen_w_det(&lw, &c, 1.8, 0.1).unwrap() - w).abs() < 1e-14 * w);
        assert_eq!(gen_z_recursive(&lw, &c, 1.8, 0.1).unwrap(), c.z(1.7).unwrap());
    }

    #[test]
    fn level_validation() {
        assert!(LevelWeights::new(vec![], vec![]).is_err());
        assert!(matches!(LevelWeights::new(vec![1.0, 1.0], vec![1.0, 1.0]), Err(Error::Ordering(_))));
        assert!(LevelWeights::new(vec![1.0, 1.0 + 1e-13], vec![1.0, 1.0]).is_err());
        assert!(LevelWeights::new(vec![1.0], vec![-1.0]).is_err());
        assert!(LevelWeights::new(vec![0.0; 65].iter().enumerate().map(|(i, _)| i as f64).collect(), vec![0.0; 65])
            .is_err());
    }

    #[test]
    fn tilted_forms_agree() {
        let lw = LevelWeights::new(vec![0.4, 1.1], vec![0.7, 2.0]).unwrap();
        let c = bm(0.8);
        let (x, y) = (1.9, -0.2);
        let plain = gen_w(&lw, &c, x, y).unwrap();
        let scaled = gen_w_tilted(&lw, &c, x, y, Tilt::Scaled).unwrap();
        assert!((scaled * (c.phi() * (x - y)).exp() - plain).abs() < 1e-12 * plain);
        let plain = gen_z(&lw, &c, x, y).unwrap();
        let scaled = gen_z_tilted(&lw, &c, x, y, Tilt::Scaled).unwrap();
        assert!((scaled * (c.phi() * (x - y)).exp() - plain).abs() < 1e-12 * plain);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64, f64, f64)> {
        (1usize..=6).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.05f64..0.6, n),
                proptest::collection::vec(0.0f64..3.0, n),
                0.0f64..2.0,
                -0.5f64..0.5,
                0.0f64..1.0,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn routes_agree((gaps, p, q, y, extra) in instance()) {
            let mut a = Vec::new();
            let mut acc = y;
            for g in &gaps { acc += g; a.push(acc); }
            let x = acc + extra;
            let lw = LevelWeights::new(a, p).unwrap();
            let c = bm(q);
            let r = gen_w_recursive(&lw, &c, x, y).unwrap();
            let d = gen_w_det(&lw, &c, x, y).unwrap();
            let l = gen_w(&lw, &c, x, y).unwrap();
            prop_assert!((r - d).abs() <= 1e-10 * r);
            prop_assert!((r - l).abs() <= 1e-10 * r);
            let r = gen_z_recursive(&lw, &c, x, y - 0.01).unwrap();
            let d = gen_z_det(&lw, &c, x, y - 0.01).unwrap();
            prop_assert!((r - d).abs() <= 1e-10 * r);
        }

        #[test]
        fn monotone_in_weights((gaps, p, q, y, extra) in instance(), bump in 0.0f64..1.0) {
            let mut a = Vec::new();
            let mut acc = y;
            for g in &gaps { acc += g; a.push(acc); }
            let x = acc + extra;
            let c = bm(q);
            let base = gen_w(&LevelWeights::new(a.clone(), p.clone()).unwrap(), &c, x, y).unwrap();
            prop_assert!(base >= c.w(x - y).unwrap() * (1.0 - 1e-12));
            let mut p2 = p.clone();
            p2[0] += bump;
            let more = gen_w(&LevelWeights::new(a, p2).unwrap(), &c, x, y).unwrap();
            prop_assert!(more >= base * (1.0 - 1e-12));
        }
    }
}
