//! ω-scale functions: solutions of the Volterra equations
//!
//! ```text
//! W^(ω)(x,y) = W(x−y) + ∫_y^x W(x−z) ω(z) W^(ω)(z,y) dz
//! Z^(ω)(x,y) = 1      + ∫_y^x W(x−z) ω(z) Z^(ω)(z,y) dz
//! ```
//!
//! on a mesh of `[c, b]`. The kernel may be any `W^(q₀)`, in which case the
//! solution is `W^(q₀+ω)` and the `Z` seed becomes `Z^(q₀)(x−y)`.
//!
//! The integrand is replaced by its piecewise-linear interpolant on the mesh
//! while ω is integrated exactly against the hat functions (product
//! trapezoid). Because `W(0) = 0` both end-point terms vanish and the march
//! in `x` is explicit.

use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::scale_fn::ScaleContext;

/// Sampled weights are integrated against hat functions with this many
/// Simpson panels per cell.
const SIMPSON_PANELS: usize = 4;
const CONTRACTION_LIMIT: f64 = 0.5;
const NODE_SNAP: f64 = 1e-9;

/// A nonnegative, locally bounded weight ω.
#[derive(Clone)]
pub enum WeightFunction {
    Constant(f64),
    /// `heights[k]` on `(levels[k−1], levels[k])`, with `heights[0]` below the
    /// first level and `heights[n]` above the last.
    Step {
        levels: Vec<f64>,
        heights: Vec<f64>,
    },
    /// `(p/2ε)·1{|x−a| ≤ ε}`.
    DeltaApprox {
        a: f64,
        p: f64,
        eps: f64,
    },
    Sum(Vec<WeightFunction>),
    /// Arbitrary evaluator; integrated by Simpson's rule per cell.
    Sampled {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl WeightFunction {
    pub fn constant(q: f64) -> Result<Self> {
        let w = WeightFunction::Constant(q);
        w.validate()?;
        Ok(w)
    }

    pub fn step(levels: Vec<f64>, heights: Vec<f64>) -> Result<Self> {
        let w = WeightFunction::Step { levels, heights };
        w.validate()?;
        Ok(w)
    }

    pub fn delta_approx(a: f64, p: f64, eps: f64) -> Result<Self> {
        let w = WeightFunction::DeltaApprox { a, p, eps };
        w.validate()?;
        Ok(w)
    }

    pub fn sampled<F>(name: &str, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        WeightFunction::Sampled { name: name.to_string(), f: Arc::new(f) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WeightFunction::Constant(q) => {
                if !(q.is_finite() && *q >= 0.0) {
                    return Err(Error::Input(format!("constant weight must be >= 0, got {q}")));
                }
            }
            WeightFunction::Step { levels, heights } => {
                if heights.len() != levels.len() + 1 {
                    return Err(Error::Input(format!(
                        "step weight needs {} heights for {} levels, got {}",
                        levels.len() + 1,
                        levels.len(),
                        heights.len()
                    )));
                }
                if levels.windows(2).any(|w| !(w[0] < w[1])) || levels.iter().any(|l| !l.is_finite()) {
                    return Err(Error::Ordering("step levels must be finite and increasing".into()));
                }
                if heights.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
                    return Err(Error::Input("step heights must be finite and >= 0".into()));
                }
            }
            WeightFunction::DeltaApprox { a, p, eps } => {
                if !(eps.is_finite() && *eps > 0.0) {
                    return Err(Error::Input(format!("delta approximation needs eps > 0, got {eps}")));
                }
                if !(p.is_finite() && *p >= 0.0) || !a.is_finite() {
                    return Err(Error::Input("delta approximation needs finite a and p >= 0".into()));
                }
            }
            WeightFunction::Sum(parts) => {
                for part in parts {
                    part.validate()?;
                }
            }
            WeightFunction::Sampled { .. } => {}
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            WeightFunction::Constant(q) => *q,
            WeightFunction::Step { levels, heights } => {
                let k = levels.partition_point(|&l| l < x);
                heights[k]
            }
            WeightFunction::DeltaApprox { a, p, eps } => {
                if (x - a).abs() <= *eps {
                    p / (2.0 * eps)
                } else {
                    0.0
                }
            }
            WeightFunction::Sum(parts) => parts.iter().map(|w| w.eval(x)).sum(),
            WeightFunction::Sampled { f, .. } => f(x),
        }
    }

    /// Points where ω may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            WeightFunction::Constant(_) | WeightFunction::Sampled { .. } => Vec::new(),
            WeightFunction::Step { levels, .. } => levels.clone(),
            WeightFunction::DeltaApprox { a, eps, .. } => vec![a - eps, a + eps],
            WeightFunction::Sum(parts) => parts.iter().flat_map(|w| w.breakpoints()).collect(),
        }
    }

    fn is_piecewise_constant(&self) -> bool {
        match self {
            WeightFunction::Sampled { .. } => false,
            WeightFunction::Sum(parts) => parts.iter().all(|w| w.is_piecewise_constant()),
            _ => true,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            WeightFunction::Constant(q) => format!("constant({q})"),
            WeightFunction::Step { levels, heights } => {
                format!("step(levels={levels:?}, heights={heights:?})")
            }
            WeightFunction::DeltaApprox { a, p, eps } => format!("delta(a={a}, p={p}, eps={eps})"),
            WeightFunction::Sum(parts) => {
                let inner: Vec<String> = parts.iter().map(|w| w.describe()).collect();
                format!("sum({})", inner.join(", "))
            }
            WeightFunction::Sampled { name, .. } => format!("sampled({name})"),
        }
    }

    /// `(∫ω(z)(x₁−z)dz, ∫ω(z)(z−x₀)dz) / (x₁−x₀)` over the cell `[x₀, x₁]`:
    /// the parts of the cell weight carried by its left and right nodes.
    pub fn cell_moments(&self, x0: f64, x1: f64) -> Result<(f64, f64)> {
        let h = x1 - x0;
        if self.is_piecewise_constant() {
            let mut cuts: Vec<f64> = self.breakpoints().into_iter().filter(|&t| t > x0 && t < x1).collect();
            cuts.sort_by(f64::total_cmp);
            let mut edges = vec![x0];
            edges.extend(cuts);
            edges.push(x1);
            let (mut left, mut right) = (0.0, 0.0);
            for e in edges.windows(2) {
                let (u, v) = (e[0], e[1]);
                let w = self.eval(0.5 * (u + v));
                // ∫_u^v (x1 − z) dz and ∫_u^v (z − x0) dz.
                left += w * (v - u) * (x1 - 0.5 * (u + v));
                right += w * (v - u) * (0.5 * (u + v) - x0);
            }
            return Ok((left / h, right / h));
        }
        let n = 2 * SIMPSON_PANELS;
        let dz = h / n as f64;
        let (mut left, mut right) = (0.0, 0.0);
        for k in 0..=n {
            let z = x0 + k as f64 * dz;
            let w = self.eval(z);
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Input(format!("weight at {z} is {w}; must be finite and >= 0")));
            }
            let s = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            left += s * w * (x1 - z);
            right += s * w * (z - x0);
        }
        Ok((left * dz / 3.0 / h, right * dz / 3.0 / h))
    }
}

/// Which columns `W^(ω)(·, y)` to solve for.
#[derive(Debug, Clone, Default)]
pub enum Columns {
    #[default]
    All,
    At(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct OmegaOptions {
    /// Points forced into the mesh (levels, start points, query points).
    pub points: Vec<f64>,
    pub columns: Columns,
    pub with_w: bool,
    pub with_z: bool,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        Self { points: Vec::new(), columns: Columns::All, with_w: true, with_z: true }
    }
}

/// Solved ω-scale functions on a mesh of `[c, b]`.
#[derive(Debug, Clone)]
pub struct OmegaGrid {
    mesh: Vec<f64>,
    /// `wcols[j][i − j] = W^(ω)(x_i, x_j)` for solved columns.
    wcols: Vec<Option<Vec<f64>>>,
    /// `Z^(ω)(x_i, c)`.
    zvals: Option<Vec<f64>>,
    model: LevyModel,
    base_q: f64,
    omega: WeightFunction,
    h: f64,
    warnings: Vec<String>,
}

/// Mesh of `[c, b]` with uniform step `h` plus the given points.
pub fn build_mesh(c: f64, b: f64, h: f64, points: &[f64]) -> Result<Vec<f64>> {
    if !(c < b) || !c.is_finite() || !b.is_finite() {
        return Err(Error::DegenerateInterval(format!("need c < b, got c = {c}, b = {b}")));
    }
    if !(h > 0.0) {
        return Err(Error::Input(format!("mesh step must be positive, got {h}")));
    }
    let ratio = (b - c) / h;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::Input(format!("step h = {h} does not divide b − c = {}", b - c)));
    }
    let n = n as usize;
    let mut mesh: Vec<f64> = (0..=n).map(|k| c + (b - c) * k as f64 / n as f64).collect();
    let snap = NODE_SNAP * (b - c);
    for &p in points {
        if !(p > c && p < b) {
            continue;
        }
        let k = mesh.partition_point(|&m| m < p);
        if (mesh[k] - p).abs() <= snap {
            if k != 0 && k != mesh.len() - 1 {
                mesh[k] = p;
            }
        } else if (mesh[k - 1] - p).abs() <= snap {
            if k - 1 != 0 {
                mesh[k - 1] = p;
            }
        } else {
            mesh.insert(k, p);
        }
    }
    Ok(mesh)
}

/// Solve on `[c, b]` with kernel `W^(q₀)` taken from `ctx`.
pub fn solve_omega(
    ctx: &ScaleContext,
    omega: &WeightFunction,
    c: f64,
    b: f64,
    h: f64,
    opts: &OmegaOptions,
) -> Result<OmegaGrid> {
    omega.validate()?;
    let mut forced = opts.points.clone();
    forced.extend(omega.breakpoints());
    if let Columns::At(ys) = &opts.columns {
        forced.extend(ys.iter().copied());
    }
    let mesh = build_mesh(c, b, h, &forced)?;
    let n = mesh.len();

    let cells: Vec<(f64, f64)> = mesh.windows(2).map(|w| omega.cell_moments(w[0], w[1])).collect::<Result<_>>()?;
    // mu[k]: full hat moment of interior node k; mu_start[k]: right half only.
    let mut mu = vec![0.0; n];
    let mut mu_start = vec![0.0; n];
    for k in 0..n {
        let from_left = if k > 0 { cells[k - 1].1 } else { 0.0 };
        let from_right = if k + 1 < n { cells[k].0 } else { 0.0 };
        mu[k] = from_left + from_right;
        mu_start[k] = from_right;
    }

    // kernel[i][k] = W(x_i − x_k), k < i.
    let kernel: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..i).map(|k| ctx.w(mesh[i] - mesh[k])).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let max_cell = mesh.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let w_cell = ctx.w(2.0 * max_cell)?;
    let worst = mu.iter().fold(0.0f64, |m, &v| m.max(v)) * w_cell;
    if worst > CONTRACTION_LIMIT {
        warnings.push(format!(
            "mesh too coarse for this weight: max node weight times W(2h) is {worst:.3} (> {CONTRACTION_LIMIT})"
        ));
    }

    let wanted: Vec<bool> = match &opts.columns {
        Columns::All => vec![opts.with_w; n],
        Columns::At(ys) => {
            let mut v = vec![false; n];
            if opts.with_w {
                for &y in ys {
                    v[locate(&mesh, y)?] = true;
                }
            }
            v
        }
    };

    let wcols: Vec<Option<Vec<f64>>> =
        (0..n).into_par_iter().map(|j| if wanted[j] { Some(solve_column(&kernel, &mu, j)) } else { None }).collect();

    let zvals = if opts.with_z {
        let mut z = vec![0.0; n];
        let mut v = vec![0.0; n];
        for i in 0..n {
            let seed = ctx.z(mesh[i] - mesh[0])?;
            let acc: f64 = kernel[i].iter().zip(&v[..i]).map(|(k, v)| k * v).sum();
            z[i] = seed + acc;
            let m = if i == 0 { mu_start[0] } else { mu[i] };
            v[i] = m * z[i];
        }
        Some(z)
    } else {
        None
    };

    let grid =
        OmegaGrid { mesh, wcols, zvals, model: *ctx.model(), base_q: ctx.q(), omega: omega.clone(), h, warnings };
    grid.check_finite()?;
    Ok(grid)
}

fn solve_column(kernel: &[Vec<f64>], mu: &[f64], j: usize) -> Vec<f64> {
    let n = kernel.len();
    let mut col = vec![0.0; n - j];
    // v[k] = mu[k] · W^(ω)(x_k, x_j) for j < k.
    let mut v = vec![0.0; n];
    for i in j + 1..n {
        let row = &kernel[i];
        let acc: f64 = row[j + 1..i].iter().zip(&v[j + 1..i]).map(|(k, v)| k * v).sum();
        let w = row[j] + acc;
        col[i - j] = w;
        v[i] = mu[i] * w;
    }
    col
}

fn locate(mesh: &[f64], x: f64) -> Result<usize> {
    let span = mesh[mesh.len() - 1] - mesh[0];
    let tol = 1e-12 * span.max(1.0);
    let k = mesh.partition_point(|&m| m < x - tol);
    if k < mesh.len() && (mesh[k] - x).abs() <= tol {
        Ok(k)
    } else {
        Err(Error::OffGrid { x, y: f64::NAN })
    }
}

/// `W^(ω)(·,·)` with the kernel `W^(0)` of `model` over `[c, b]`.
pub fn solve_w_omega(model: LevyModel, omega: &WeightFunction, c: f64, b: f64, h: f64) -> Result<OmegaGrid> {
    let ctx = ScaleContext::new(model, 0.0)?;
    solve_omega(&ctx, omega, c, b, h, &OmegaOptions { with_z: false, ..OmegaOptions::default() })
}

/// `Z^(ω)(·, c)` with the kernel `W^(0)` of `model` over `[c, b]`.
pub fn solve_z_omega(model: LevyModel, omega: &WeightFunction, c: f64, b: f64, h: f64) -> Result<OmegaGrid> {
    let ctx = ScaleContext::new(model, 0.0)?;
    solve_omega(&ctx, omega, c, b, h, &OmegaOptions { with_w: false, ..OmegaOptions::default() })
}

impl OmegaGrid {
    pub fn mesh(&self) -> &[f64] {
        &self.mesh
    }

    pub fn c(&self) -> f64 {
        self.mesh[0]
    }

    pub fn b(&self) -> f64 {
        self.mesh[self.mesh.len() - 1]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn base_q(&self) -> f64 {
        self.base_q
    }

    pub fn omega(&self) -> &WeightFunction {
        &self.omega
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn index_of(&self, x: f64) -> Result<usize> {
        locate(&self.mesh, x)
    }

    pub fn has_column(&self, j: usize) -> bool {
        self.wcols.get(j).is_some_and(|c| c.is_some())
    }

    /// `W^(ω)(x_i, x_j)` by node index; zero for `i ≤ j`.
    pub fn w_at(&self, i: usize, j: usize) -> Result<f64> {
        if i <= j {
            return Ok(0.0);
        }
        match self.wcols.get(j) {
            Some(Some(col)) => Ok(col[i - j]),
            _ => Err(Error::OffGrid { x: self.mesh[i], y: self.mesh[j] }),
        }
    }

    /// `W^(ω)(x, y)` at mesh points.
    pub fn w(&self, x: f64, y: f64) -> Result<f64> {
        if x <= y {
            return Ok(0.0);
        }
        let i = locate(&self.mesh, x).map_err(|_| Error::OffGrid { x, y })?;
        let j = locate(&self.mesh, y).map_err(|_| Error::OffGrid { x, y })?;
        self.w_at(i, j)
    }

    /// `Z^(ω)(x, c)` at mesh points; 1 for `x ≤ c`.
    pub fn z(&self, x: f64) -> Result<f64> {
        if x <= self.c() {
            return Ok(1.0);
        }
        let zv = self.zvals.as_ref().ok_or_else(|| Error::Input("grid was solved without Z values".into()))?;
        let i = locate(&self.mesh, x).map_err(|_| Error::OffGrid { x, y: self.c() })?;
        Ok(zv[i])
    }

    pub fn z_values(&self) -> Option<&[f64]> {
        self.zvals.as_deref()
    }

    fn check_finite(&self) -> Result<()> {
        let bad_w = self.wcols.iter().flatten().any(|c| c.iter().any(|v| !v.is_finite()));
        let bad_z = self.zvals.as_ref().is_some_and(|z| z.iter().any(|v| !v.is_finite()));
        if bad_w || bad_z {
            return Err(Error::Numeric("non-finite value in the ω-scale solution".into()));
        }
        Ok(())
    }

    /// CSV of `x_i, x_j, W^(ω)(x_i, x_j)` for solved columns, preceded by a
    /// commented header with the model, the weight and the step.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# model={}", self.model.to_kv_json());
        let _ = writeln!(out, "# base_q={}", self.base_q);
        let _ = writeln!(out, "# omega={}", self.omega.describe());
        let _ = writeln!(out, "# h={}", self.h);
        out.push_str("x_i,x_j,W\n");
        for (j, col) in self.wcols.iter().enumerate() {
            if let Some(col) = col {
                for (off, w) in col.iter().enumerate() {
                    let _ = writeln!(out, "{},{},{:.12e}", self.mesh[j + off], self.mesh[j], w);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitLaws {
    pub up: f64,
    pub down: f64,
}

/// `E_x(e^{−L(τ_b⁺)}; τ_b⁺<τ_c⁻)` and `E_x(e^{−L(τ_c⁻)}; τ_c⁻<τ_b⁺)`.
pub fn omega_exit_laws(grid: &OmegaGrid, x: f64) -> Result<ExitLaws> {
    let (c, b) = (grid.c(), grid.b());
    if !(x >= c && x <= b) {
        return Err(Error::Domain(format!("start {x} outside [{c}, {b}]")));
    }
    let wbc = grid.w(b, c)?;
    if !(wbc > 0.0) {
        return Err(Error::DegenerateInterval(format!("W^(ω)(b, c) = {wbc}")));
    }
    let up = grid.w(x, c)? / wbc;
    let down = grid.z(x)? - up * grid.z(b)?;
    Ok(ExitLaws { up, down })
}

/// Density of the ω-resolvent of the process killed on exiting `[c, b]`.
pub fn omega_resolvent(grid: &OmegaGrid, x: f64, y: f64) -> Result<f64> {
    let (c, b) = (grid.c(), grid.b());
    if !(x >= c && x <= b && y >= c && y <= b) {
        return Err(Error::Domain(format!("({x}, {y}) outside [{c}, {b}]²")));
    }
    let wbc = grid.w(b, c)?;
    if !(wbc > 0.0) {
        return Err(Error::DegenerateInterval(format!("W^(ω)(b, c) = {wbc}")));
    }
    Ok(grid.w(x, c)? / wbc * grid.w(b, y)? - grid.w(x, y)?)
}
