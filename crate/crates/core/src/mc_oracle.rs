//! Monte Carlo oracle for the corridor laws.
//!
//! Paths are simulated on a time grid with exact Gaussian increments and
//! exact drift. Compound Poisson jumps fall at exact exponential times, and
//! the exponential clock is honoured exactly. Between grid points the
//! process is a Brownian bridge, so crossings of `b` and `c` are drawn from
//! the bridge extrema and local time from the bridge local-time law
//! `P(L ≥ ℓ | x, y) = exp(−((|a−x| + |y−a| + ℓ)² − (y−x)²)/(2σ²h))`
//! (in units where σ = 1). The shrinking-window estimator is available too.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::local_time_laws::Corridor;
use crate::omega_scale::WeightFunction;

/// Environment variable that fixes the number of simulation threads.
pub const THREADS_ENV: &str = "SNLP_THREADS";
/// Bridge events with probability below `e^{−SKIP_EXPONENT}` are not drawn.
const SKIP_EXPONENT: f64 = 60.0;
const CAPPED_WARN_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtEstimator {
    /// `(1/2ε)·Σ h·1{|X − a| ≤ ε}` over grid points.
    Window,
    /// Exact draw of the bridge local time on each step.
    BridgeExact,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub epsilon_lt: f64,
    pub t_max: f64,
    pub estimator: LtEstimator,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            n_paths: 100_000,
            seed: 20_240_601,
            epsilon_lt: 5e-3,
            t_max: 100.0,
            estimator: LtEstimator::BridgeExact,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Input(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths < 100 {
            return Err(Error::Input(format!("n_paths must be >= 100, got {}", self.n_paths)));
        }
        if !(self.epsilon_lt > 0.0) {
            return Err(Error::Input(format!("epsilon_lt must be positive, got {}", self.epsilon_lt)));
        }
        if !(self.t_max > 0.0) {
            return Err(Error::Input(format!("t_max must be positive, got {}", self.t_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExitKind {
    Up,
    Down,
    Killed,
    HorizonCapped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub exit_kind: ExitKind,
    pub exit_time: f64,
    /// One estimate per requested level, in request order.
    pub local_times: Vec<f64>,
    pub weighted_occupation: f64,
    /// Position at the end of the path (after the exit jump, if any).
    pub final_position: f64,
}

/// All records of one run together with what produced them.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub records: Vec<PathRecord>,
    pub levels: Vec<f64>,
    pub q: f64,
    pub cfg: McConfig,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    fn from_samples(xs: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for x in xs {
            n += 1;
            let d = x - mean;
            mean += d / n as f64;
            m2 += d * (x - mean);
        }
        let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
        Self { mean, stderr: (var / n.max(1) as f64).sqrt(), n }
    }

    /// `(mean − target)/stderr`.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr > 0.0 {
            (self.mean - target) / self.stderr
        } else if self.mean == target {
            0.0
        } else {
            f64::INFINITY.copysign(self.mean - target)
        }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        self.z_score(target).abs() <= k
    }
}

struct Dynamics {
    sigma: f64,
    gamma: f64,
    jumps: Option<(f64, f64)>,
}

struct Geometry<'a> {
    c: f64,
    b: f64,
    levels: &'a [f64],
    omega: Option<&'a WeightFunction>,
    q: f64,
}

/// Simulate from `cor.x`, recording local time at `cor.a` and at any extra
/// levels of the corridor.
pub fn simulate_corridor(model: &LevyModel, q: f64, cor: &Corridor, cfg: &McConfig) -> Result<Ensemble> {
    let mut levels = vec![cor.a];
    if let Some(lw) = &cor.levels {
        levels.extend(lw.levels().iter().copied().filter(|&l| l != cor.a));
    }
    simulate_corridor_with(model, q, cor, &levels, None, cfg)
}

/// Full-control variant: arbitrary levels and an optional occupation weight.
pub fn simulate_corridor_with(
    model: &LevyModel,
    q: f64,
    cor: &Corridor,
    levels: &[f64],
    omega: Option<&WeightFunction>,
    cfg: &McConfig,
) -> Result<Ensemble> {
    if !(model.sigma() > 0.0) {
        return Err(Error::UnsupportedModel("simulation needs a Gaussian part (sigma > 0)".into()));
    }
    cfg.validate()?;
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!("q must be finite and >= 0, got {q}")));
    }
    if let Some(w) = omega {
        w.validate()?;
    }
    let dynamics = Dynamics { sigma: model.sigma(), gamma: model.gamma(), jumps: model.jump_params() };
    let geo = Geometry { c: cor.c, b: cor.b, levels, omega, q };
    let run = || -> Vec<PathRecord> {
        (0..cfg.n_paths).into_par_iter().map(|i| simulate_path(&dynamics, &geo, cor.x, cfg, i as u64)).collect()
    };
    let records = match thread_override()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Input(format!("cannot build thread pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut warnings = Vec::new();
    let capped = records.iter().filter(|r| r.exit_kind == ExitKind::HorizonCapped).count();
    if capped as f64 > CAPPED_WARN_FRACTION * records.len() as f64 {
        warnings.push(format!(
            "{capped} of {} paths reached t_max = {}; estimates are biased",
            records.len(),
            cfg.t_max
        ));
    }
    if cfg.estimator == LtEstimator::Window && model.sigma().powi(2) * cfg.dt > cfg.epsilon_lt.powi(2) {
        warnings.push(format!(
            "window half-width {} is below the step scale sigma*sqrt(dt) = {}",
            cfg.epsilon_lt,
            model.sigma() * cfg.dt.sqrt()
        ));
    }
    Ok(Ensemble { records, levels: levels.to_vec(), q, cfg: *cfg, warnings })
}

fn thread_override() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Input(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
        Err(_) => Ok(None),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum StepEnd {
    Grid,
    Jump,
    Clock,
    Horizon,
}

fn simulate_path(dy: &Dynamics, geo: &Geometry, x0: f64, cfg: &McConfig, index: u64) -> PathRecord {
    let mut lt = vec![0.0; geo.levels.len()];
    let finish = |kind, t, lt, occ, x| PathRecord {
        exit_kind: kind,
        exit_time: t,
        local_times: lt,
        weighted_occupation: occ,
        final_position: x,
    };
    if x0 >= geo.b {
        return finish(ExitKind::Up, 0.0, lt, 0.0, x0);
    }
    if x0 <= geo.c {
        return finish(ExitKind::Down, 0.0, lt, 0.0, x0);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let kill = if geo.q > 0.0 { rng.sample::<f64, _>(Exp1) / geo.q } else { f64::INFINITY };
    let mut next_jump = match dy.jumps {
        Some((lambda, _)) if lambda > 0.0 => rng.sample::<f64, _>(Exp1) / lambda,
        _ => f64::INFINITY,
    };
    let (sigma, s2) = (dy.sigma, dy.sigma * dy.sigma);
    let (mut t, mut x, mut occ) = (0.0f64, x0, 0.0f64);

    loop {
        let mut h = cfg.dt;
        let mut end = StepEnd::Grid;
        for (limit, kind) in [(next_jump, StepEnd::Jump), (kill, StepEnd::Clock), (cfg.t_max, StepEnd::Horizon)] {
            if limit - t <= h {
                h = limit - t;
                end = kind;
            }
        }
        let h = h.max(0.0);
        let z: f64 = rng.sample(StandardNormal);
        let y = x + dy.gamma * h + sigma * h.sqrt() * z;
        let t1 = t + h;

        if y >= geo.b || bridge_crosses(&mut rng, geo.b - x, geo.b - y, s2 * h) {
            return finish(ExitKind::Up, t1, lt, occ, geo.b);
        }
        if y <= geo.c || bridge_crosses(&mut rng, x - geo.c, y - geo.c, s2 * h) {
            return finish(ExitKind::Down, t1, lt, occ, y.min(geo.c));
        }

        match cfg.estimator {
            LtEstimator::BridgeExact => {
                for (acc, &a) in lt.iter_mut().zip(geo.levels) {
                    *acc +=
                        bridge_local_time(&mut rng, (a - x).abs() / sigma, (y - a).abs() / sigma, (y - x) / sigma, h)
                            / sigma;
                }
            }
            LtEstimator::Window => {
                let w = h / (2.0 * cfg.epsilon_lt);
                for (acc, &a) in lt.iter_mut().zip(geo.levels) {
                    if (x - a).abs() <= cfg.epsilon_lt {
                        *acc += w;
                    }
                }
            }
        }
        if let Some(om) = geo.omega {
            occ += 0.5 * h * (om.eval(x) + om.eval(y));
        }
        t = t1;
        x = y;

        match end {
            StepEnd::Grid => {}
            StepEnd::Jump => {
                let (lambda, rho) = dy.jumps.expect("jump step without jumps");
                x -= rng.sample::<f64, _>(Exp1) / rho;
                next_jump = t + rng.sample::<f64, _>(Exp1) / lambda;
                if x <= geo.c {
                    return finish(ExitKind::Down, t, lt, occ, x);
                }
            }
            StepEnd::Clock => return finish(ExitKind::Killed, t, lt, occ, x),
            StepEnd::Horizon => return finish(ExitKind::HorizonCapped, t, lt, occ, x),
        }
    }
}

/// Whether a bridge with endpoint distances `u, v > 0` from a barrier, over
/// variance `var`, touches it.
fn bridge_crosses(rng: &mut ChaCha8Rng, u: f64, v: f64, var: f64) -> bool {
    let e = 2.0 * u * v / var;
    e < SKIP_EXPONENT && rng.random::<f64>() < (-e).exp()
}

/// Local time at a level of a standard Brownian bridge over time `h`, with
/// endpoint distances `u, v` from the level and displacement `d`.
fn bridge_local_time(rng: &mut ChaCha8Rng, u: f64, v: f64, d: f64, h: f64) -> f64 {
    let s = u + v;
    if (s * s - d * d) / (2.0 * h) >= SKIP_EXPONENT {
        return 0.0;
    }
    let uni: f64 = 1.0 - rng.random::<f64>();
    ((d * d - 2.0 * h * uni.ln()).sqrt() - s).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Any,
    Exit(ExitKind),
}

impl Selector {
    pub fn accepts(&self, r: &PathRecord) -> bool {
        match self {
            Selector::Any => true,
            Selector::Exit(k) => r.exit_kind == *k,
        }
    }
}

/// `E[exp(−q·T − Σ p_j l_j − L); event]`, with `L` the weighted occupation
/// when `use_occupation` is set.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    pub selector: Selector,
    pub q: f64,
    /// Weights for the first `p.len()` recorded levels.
    pub p: Vec<f64>,
    pub use_occupation: bool,
}

impl Functional {
    pub fn new(selector: Selector) -> Self {
        Self { selector, q: 0.0, p: Vec::new(), use_occupation: false }
    }

    pub fn with_weights(mut self, p: Vec<f64>) -> Self {
        self.p = p;
        self
    }

    pub fn with_discount(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn with_occupation(mut self) -> Self {
        self.use_occupation = true;
        self
    }
}

pub fn empirical_transform(ens: &Ensemble, f: &Functional) -> Result<Estimate> {
    if ens.records.len() < 100 {
        return Err(Error::Estimation(format!("need at least 100 records, got {}", ens.records.len())));
    }
    if f.p.len() > ens.levels.len() {
        return Err(Error::Input(format!("{} weights given for {} recorded levels", f.p.len(), ens.levels.len())));
    }
    if !ens.records.iter().any(|r| f.selector.accepts(r)) {
        return Err(Error::Estimation(format!("no path in the selected event {:?}", f.selector)));
    }
    Ok(Estimate::from_samples(ens.records.iter().map(|r| {
        if !f.selector.accepts(r) {
            return 0.0;
        }
        let mut e = f.q * r.exit_time;
        e += f.p.iter().zip(&r.local_times).map(|(p, l)| p * l).sum::<f64>();
        if f.use_occupation {
            e += r.weighted_occupation;
        }
        (-e).exp()
    })))
}

/// `P(event | condition)` with its binomial standard error.
pub fn conditional_probability(
    ens: &Ensemble,
    event: impl Fn(&PathRecord) -> bool,
    condition: impl Fn(&PathRecord) -> bool,
) -> Result<Estimate> {
    let (mut n, mut k) = (0usize, 0usize);
    for r in ens.records.iter().filter(|r| condition(r)) {
        n += 1;
        if event(r) {
            k += 1;
        }
    }
    if n == 0 {
        return Err(Error::Estimation("conditioning event is empty".into()));
    }
    let p = k as f64 / n as f64;
    Ok(Estimate { mean: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), n })
}

/// Sample mean of `value` over records satisfying `condition`.
pub fn conditional_mean(
    ens: &Ensemble,
    value: impl Fn(&PathRecord) -> f64,
    condition: impl Fn(&PathRecord) -> bool,
) -> Result<Estimate> {
    let est = Estimate::from_samples(ens.records.iter().filter(|r| condition(r)).map(value));
    if est.n == 0 {
        return Err(Error::Estimation("conditioning event is empty".into()));
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RichardsonReport {
    pub mean_coarse: f64,
    pub mean_fine: f64,
    /// `2·m(ε/2) − m(ε)`.
    pub extrapolated: f64,
    /// First-order bias of the fine run, `m(ε/2) − m(ε)`.
    pub bias: f64,
    /// Standard error of the extrapolated mean (paired across paths).
    pub stderr: f64,
    pub flagged: bool,
}

/// Richardson step in the window half-width for the mean local time at
/// level `level` of two runs sharing seeds and paths.
pub fn richardson_epsilon(coarse: &Ensemble, fine: &Ensemble, level: usize) -> Result<RichardsonReport> {
    let (a, b) = (&coarse.cfg, &fine.cfg);
    let same = a.seed == b.seed
        && a.n_paths == b.n_paths
        && a.dt == b.dt
        && a.t_max == b.t_max
        && coarse.q == fine.q
        && coarse.levels == fine.levels;
    if !same {
        return Err(Error::Comparability("runs differ in seed, paths, step, horizon, q or levels".into()));
    }
    if a.estimator != LtEstimator::Window || b.estimator != LtEstimator::Window {
        return Err(Error::Comparability("Richardson extrapolation needs window estimates".into()));
    }
    if ((a.epsilon_lt - 2.0 * b.epsilon_lt) / a.epsilon_lt).abs() > 1e-12 {
        return Err(Error::Comparability(format!(
            "fine half-width must be half the coarse one, got {} and {}",
            a.epsilon_lt, b.epsilon_lt
        )));
    }
    if level >= coarse.levels.len() {
        return Err(Error::Input(format!("level index {level} out of range")));
    }
    let m_c = Estimate::from_samples(coarse.records.iter().map(|r| r.local_times[level]));
    let m_f = Estimate::from_samples(fine.records.iter().map(|r| r.local_times[level]));
    let ext = Estimate::from_samples(
        coarse.records.iter().zip(&fine.records).map(|(rc, rf)| 2.0 * rf.local_times[level] - rc.local_times[level]),
    );
    let diff = Estimate::from_samples(
        coarse.records.iter().zip(&fine.records).map(|(rc, rf)| rf.local_times[level] - rc.local_times[level]),
    );
    Ok(RichardsonReport {
        mean_coarse: m_c.mean,
        mean_fine: m_f.mean,
        extrapolated: ext.mean,
        bias: diff.mean,
        stderr: ext.stderr,
        flagged: diff.mean.abs() > diff.stderr,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov–Smirnov test against `Exp(rate)`.
pub fn ks_exponential(samples: &[f64], rate: f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Estimation("no samples".into()));
    }
    if !(rate > 0.0) {
        return Err(Error::Input(format!("rate must be positive, got {rate}")));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = 1.0 - (-rate * x.max(0.0)).exp();
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    });
    Ok(KsResult { statistic: d, p_value: kolmogorov_survival(d, n), n: xs.len() })
}

/// `P(D_n > d)` from the Kolmogorov limit with the Stephens correction.
fn kolmogorov_survival(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    if lam < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lam * lam).exp();
        s += if k as i64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Pearson correlation.
pub fn correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Estimation("correlation needs two equal samples of size >= 2".into()));
    }
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Estimation("zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square test that several groups share one success probability.
/// Each group is `(successes, trials)`.
pub fn chi_square_homogeneity(groups: &[(usize, usize)]) -> Result<ChiSquareResult> {
    if groups.len() < 2 || groups.iter().any(|&(k, n)| n == 0 || k > n) {
        return Err(Error::Estimation("need at least two non-empty groups".into()));
    }
    let (ks, ns) = groups.iter().fold((0usize, 0usize), |(a, b), &(k, n)| (a + k, b + n));
    let p = ks as f64 / ns as f64;
    if p == 0.0 || p == 1.0 {
        return Ok(ChiSquareResult { statistic: 0.0, dof: groups.len() - 1, p_value: 1.0 });
    }
    let stat = groups
        .iter()
        .map(|&(k, n)| {
            let e = n as f64 * p;
            let (o1, o0) = (k as f64, (n - k) as f64);
            (o1 - e).powi(2) / e + (o0 - (n as f64 - e)).powi(2) / (n as f64 - e)
        })
        .sum::<f64>();
    let dof = groups.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    Ok(ChiSquareResult { statistic: stat, dof, p_value: 1.0 - dist.cdf(stat) })
}
