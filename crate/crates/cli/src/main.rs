//! `snlp`: scale functions, local-time laws and their verification suites.
//!
//! Exit codes: 0 success, 1 computation error, 2 bad invocation or inputs
//! outside a law's domain, 3 a verification gate failed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod conformance;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use snlp_core::kv::{apply_overrides, get_f64, get_list, parse_kv_text, require_f64, KvMap};
use snlp_core::laws;
use snlp_core::mc_oracle::{LtEstimator, McConfig};
use snlp_core::omega_scale::{omega_exit_laws, solve_omega, Columns, OmegaOptions, WeightFunction};
use snlp_core::permanental_loops::{loop_soup_functional, PotentialKernel};
use snlp_core::scale_fn::tabulate;
use snlp_core::{Error, InversionParams, LevyModel, Method, ScaleContext};

use table::{Cell, Format, Table};

#[derive(Parser)]
#[command(name = "snlp", version, about = "Scale functions and local-time laws of spectrally negative Lévy processes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model file (key = value lines or a flat JSON object). Default: standard Brownian motion.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the table here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Parameter overrides, `key=value`.
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate W, Z and dW/dq.
    ///
    /// Keys: q (default 0); x, or x_min, x_max, n; method = closed | inversion; nodes.
    /// Columns: x,W,Z,dWdq.
    Scale(Common),
    /// Solve the omega-scale Volterra equations on [c, b].
    ///
    /// Keys: c (default 0), b, h, q0 (kernel rate, default 0);
    /// omega = const (value) | step (levels, heights) | delta (a, p, eps, base);
    /// what = w (columns x,y,W) | z (columns x,Z) | exit (columns x,up,down);
    /// columns = list of y values to solve (what = w only).
    Omega(Common),
    /// Evaluate a law by id. Columns: law, the inputs given, then the law's outputs.
    Law {
        /// Law id; see --list.
        #[arg(long, required_unless_present = "list")]
        id: Option<String>,
        /// List the available laws with their inputs and outputs.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Both routes of the loop-soup functional.
    ///
    /// Keys: q (default 0), b, c, levels, weights. Columns: det_route,scale_route,gap.
    Loopsoup(Common),
    /// Compare a law with the Monte Carlo oracle.
    ///
    /// Columns: law,quantity,analytic,mc_mean,mc_stderr,z_score. Exits 3 when |z| > 3.
    /// SNLP_THREADS fixes the number of worker threads.
    McVerify {
        #[arg(long)]
        id: String,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run the recursion / determinant / Monte Carlo conformance suite.
    ///
    /// Columns: gate,measured,tolerance,status. Exits 3 if any gate fails.
    Conformance {
        /// Smaller instance counts and ensembles.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 1e-4)]
    dt: f64,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    /// Window half-width of the local-time estimator.
    #[arg(long, default_value_t = 5e-3)]
    eps: f64,
    #[arg(long, default_value_t = 100.0)]
    t_max: f64,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Bridge)]
    estimator: EstimatorArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Bridge,
    Window,
}

enum Failure {
    Compute(String),
    Usage(String),
    Gate(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Input(_)
            | Error::InvalidModel(_)
            | Error::Ordering(_)
            | Error::Domain(_)
            | Error::DegenerateInterval(_)
            | Error::OffGrid { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Compute(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Gate(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(3)
        }
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Scale(common) => {
            let (model, map) = load(&common)?;
            emit(&common.out, common.format, &scale_table(model, &map)?)
        }
        Command::Omega(common) => {
            let (model, map) = load(&common)?;
            emit(&common.out, common.format, &omega_table(model, &map)?)
        }
        Command::Law { id, list, common } => {
            if list {
                return emit(&common.out, common.format, &law_list());
            }
            let (model, map) = load(&common)?;
            let id = id.expect("clap enforces --id");
            let out = laws::evaluate(&id, &model, &map)?;
            let mut header = vec!["law".to_string()];
            header.extend(out.inputs.iter().map(|(k, _)| k.clone()));
            header.extend(out.outputs.iter().map(|(k, _)| k.to_string()));
            let mut t = Table::new(&header);
            let mut row: Vec<Cell> = vec![out.id.into()];
            row.extend(out.inputs.iter().map(|(_, v)| Cell::Text(v.clone())));
            row.extend(out.outputs.iter().map(|&(_, v)| Cell::Num(v)));
            t.push(row);
            emit(&common.out, common.format, &t)
        }
        Command::Loopsoup(common) => {
            let (model, map) = load(&common)?;
            let ctx = ScaleContext::new(model, get_f64(&map, "q")?.unwrap_or(0.0))?;
            let kernel = PotentialKernel::new(&ctx, require_f64(&map, "c")?, require_f64(&map, "b")?)?;
            let lw = snlp_core::gen_scale::LevelWeights::new(list(&map, "levels")?, list(&map, "weights")?)?;
            let r = loop_soup_functional(&kernel, &lw)?;
            let mut t = Table::new(&["det_route", "scale_route", "gap"]);
            t.push(vec![r.det_route.into(), r.scale_route.into(), r.gap.into()]);
            emit(&common.out, common.format, &t)
        }
        Command::McVerify { id, mc, common } => {
            let (model, map) = load(&common)?;
            let cfg = McConfig {
                dt: mc.dt,
                n_paths: mc.paths,
                seed: mc.seed,
                epsilon_lt: mc.eps,
                t_max: mc.t_max,
                estimator: match mc.estimator {
                    EstimatorArg::Bridge => LtEstimator::BridgeExact,
                    EstimatorArg::Window => LtEstimator::Window,
                },
            };
            let rows = laws::mc_compare(&id, &model, &map, &cfg)?;
            let mut t = Table::new(&["law", "quantity", "analytic", "mc_mean", "mc_stderr", "z_score"]);
            for r in &rows {
                t.push(vec![
                    r.id.clone().into(),
                    r.quantity.into(),
                    r.analytic.into(),
                    r.estimate.mean.into(),
                    r.estimate.stderr.into(),
                    r.z_score().into(),
                ]);
            }
            emit(&common.out, common.format, &t)?;
            let worst = rows.iter().map(|r| r.z_score().abs()).fold(0.0, f64::max);
            if worst > 3.0 {
                return Err(Failure::Gate(format!("|z| = {worst:.3} exceeds 3")));
            }
            Ok(())
        }
        Command::Conformance { quick, seed, out, format } => {
            let gates = conformance::run(quick, seed);
            let mut t = Table::new(&["gate", "measured", "tolerance", "status"]);
            for g in &gates {
                t.push(vec![
                    g.name.clone().into(),
                    g.measured.into(),
                    g.tolerance.into(),
                    if g.pass { "pass" } else { "FAIL" }.into(),
                ]);
            }
            emit(&out, format, &t)?;
            let failed: Vec<&str> = gates.iter().filter(|g| !g.pass).map(|g| g.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Gate(failed.join(", ")))
            }
        }
    }
}

fn load(common: &Common) -> CliResult<(LevyModel, KvMap)> {
    let model = match &common.model {
        None => LevyModel::brownian(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read model file {}: {e}", path.display())))?;
            LevyModel::from_kv(&parse_kv_text(&text)?)?
        }
    };
    let mut map = KvMap::new();
    apply_overrides(&mut map, &common.params)?;
    Ok((model, map))
}

fn emit(out: &Option<PathBuf>, format: Format, table: &Table) -> CliResult<()> {
    let text = table.render(format);
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))
        }
    }
}

fn list(map: &KvMap, key: &str) -> CliResult<Vec<f64>> {
    get_list(map, key)?.ok_or_else(|| Failure::Usage(format!("missing key '{key}'")))
}

fn check_keys(map: &KvMap, known: &[&str]) -> CliResult<()> {
    match map.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(Failure::Usage(format!("unknown key '{k}' (known: {})", known.join(", ")))),
        None => Ok(()),
    }
}

fn scale_table(model: LevyModel, map: &KvMap) -> CliResult<Table> {
    check_keys(map, &["q", "x", "x_min", "x_max", "n", "method", "nodes"])?;
    let q = get_f64(map, "q")?.unwrap_or(0.0);
    let nodes = get_f64(map, "nodes")?.map(|n| n as usize).unwrap_or(InversionParams::default().nodes);
    let ctx = match map.get("method").map(String::as_str) {
        None | Some("closed") => ScaleContext::new(model, q)?,
        Some("inversion") => ScaleContext::with_method(model, q, Method::NumericInversion(InversionParams { nodes }))?,
        Some(other) => return Err(Failure::Usage(format!("method must be closed or inversion, got '{other}'"))),
    };
    let xs = match get_f64(map, "x")? {
        Some(x) => vec![x],
        None => {
            let (lo, hi) = (require_f64(map, "x_min")?, require_f64(map, "x_max")?);
            let n = get_f64(map, "n")?.unwrap_or(11.0);
            if !(n >= 2.0 && n.fract() == 0.0) || !(hi > lo) {
                return Err(Failure::Usage("need an integer n >= 2 and x_max > x_min".into()));
            }
            let n = n as usize;
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        }
    };
    let mut t = Table::new(&["x", "W", "Z", "dWdq"]);
    for r in tabulate(&ctx, &xs)? {
        t.push(vec![r.x.into(), r.w.into(), r.z.into(), r.dwdq.into()]);
    }
    Ok(t)
}

fn weight_from(map: &KvMap) -> CliResult<WeightFunction> {
    let kind = map.get("omega").map(String::as_str).unwrap_or("const");
    Ok(match kind {
        "const" => WeightFunction::constant(require_f64(map, "value")?)?,
        "step" => WeightFunction::step(list(map, "levels")?, list(map, "heights")?)?,
        "delta" => {
            let d =
                WeightFunction::delta_approx(require_f64(map, "a")?, require_f64(map, "p")?, require_f64(map, "eps")?)?;
            match get_f64(map, "base")? {
                Some(base) => WeightFunction::Sum(vec![WeightFunction::constant(base)?, d]),
                None => d,
            }
        }
        other => return Err(Failure::Usage(format!("omega must be const, step or delta, got '{other}'"))),
    })
}

fn omega_table(model: LevyModel, map: &KvMap) -> CliResult<Table> {
    check_keys(
        map,
        &["c", "b", "h", "q0", "omega", "value", "levels", "heights", "a", "p", "eps", "base", "what", "columns"],
    )?;
    let omega = weight_from(map)?;
    let (c, b, h) = (get_f64(map, "c")?.unwrap_or(0.0), require_f64(map, "b")?, require_f64(map, "h")?);
    let ctx = ScaleContext::new(model, get_f64(map, "q0")?.unwrap_or(0.0))?;
    let what = map.get("what").map(String::as_str).unwrap_or("w");
    let mut opts = OmegaOptions::default();
    match what {
        "w" => {
            opts.with_z = false;
            if let Some(cols) = get_list(map, "columns")? {
                opts.points = cols.clone();
                opts.columns = Columns::At(cols);
            }
        }
        "z" => opts.with_w = false,
        "exit" => {}
        other => return Err(Failure::Usage(format!("what must be w, z or exit, got '{other}'"))),
    }
    let grid = solve_omega(&ctx, &omega, c, b, h, &opts)?;
    for w in grid.warnings() {
        eprintln!("warning: {w}");
    }
    let mesh = grid.mesh();
    Ok(match what {
        "w" => {
            let mut t = Table::new(&["x", "y", "W"]);
            for j in (0..mesh.len()).filter(|&j| grid.has_column(j)) {
                for i in j..mesh.len() {
                    t.push(vec![mesh[i].into(), mesh[j].into(), grid.w_at(i, j)?.into()]);
                }
            }
            t
        }
        "z" => {
            let mut t = Table::new(&["x", "Z"]);
            for &x in mesh {
                t.push(vec![x.into(), grid.z(x)?.into()]);
            }
            t
        }
        _ => {
            let mut t = Table::new(&["x", "up", "down"]);
            for &x in mesh {
                let e = omega_exit_laws(&grid, x)?;
                t.push(vec![x.into(), e.up.into(), e.down.into()]);
            }
            t
        }
    })
}

fn law_list() -> Table {
    let mut t = Table::new(&["law", "inputs", "outputs", "mc_verify", "summary"]);
    for l in laws::LAWS {
        t.push(vec![
            l.id.into(),
            l.inputs.join(" ").into(),
            l.outputs.join(" ").into(),
            if laws::MC_LAWS.contains(&l.id) { "yes" } else { "no" }.into(),
            l.summary.into(),
        ]);
    }
    t
}
