//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

const MAX_INTERVALS: usize = 2000;

#[derive(Debug, Clone, Copy)]
pub struct QuadTol {
    pub abs: f64,
    pub rel: f64,
}

impl Default for QuadTol {
    fn default() -> Self {
        Self { abs: 1e-13, rel: 1e-11 }
    }
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<Piece>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x)? + f(c + x)?;
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    if !value.is_finite() {
        return Err(Error::Numeric(format!("non-finite integrand on [{a}, {b}]")));
    }
    Ok(Piece { a, b, value, err })
}

/// Integrate `f` over `[a, b]`. Breakpoints in `splits` (inside `(a, b)`)
/// start the subdivision, which helps with kinks at known locations.
pub fn integrate_with_splits<F>(mut f: F, a: f64, b: f64, splits: &[f64], tol: QuadTol) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate_with_splits(f, b, a, splits, tol).map(|v| -v);
    }
    let mut edges = vec![a];
    let mut inner: Vec<f64> = splits.iter().copied().filter(|&s| s > a && s < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    edges.extend(inner);
    edges.push(b);

    let mut pieces = Vec::new();
    for w in edges.windows(2) {
        pieces.push(gk15(&mut f, w[0], w[1])?);
    }
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.err).sum();
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::Numeric(format!(
                "quadrature on [{a}, {b}] did not converge: estimate {total}, error {err:e}"
            )));
        }
        let (worst, _) =
            pieces.iter().enumerate().max_by(|x, y| x.1.err.total_cmp(&y.1.err)).expect("at least one piece");
        let p = pieces.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            // Interval can no longer be split in floating point.
            return Ok(total);
        }
        pieces.push(gk15(&mut f, p.a, m)?);
        pieces.push(gk15(&mut f, m, p.b)?);
    }
}

pub fn integrate<F>(f: F, a: f64, b: f64, tol: QuadTol) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_with_splits(f, a, b, &[], tol)
}
