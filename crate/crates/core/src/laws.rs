//! Flat law-id registry over the local-time and permanental identities.
//!
//! Each law reads its inputs from a [`KvMap`] and returns named output
//! columns. Common keys: `q` (default 0), `a`, `b`, `c`, `x` (default `a`),
//! `p` (default 1), `levels`/`weights` (lists), `y`, `t`.

use crate::error::{Error, Result};
use crate::gen_scale::LevelWeights;
use crate::kv::{get_f64, get_list, require_f64, KvMap};
use crate::levy_model::LevyModel;
use crate::local_time_laws::{self as lt, Corridor};
use crate::mc_oracle::{
    conditional_probability, empirical_transform, simulate_corridor, Estimate, ExitKind, Functional, McConfig, Selector,
};
use crate::permanental_loops as pl;
use crate::scale_fn::ScaleContext;

#[derive(Debug, Clone, Copy)]
pub struct LawInfo {
    pub id: &'static str,
    pub inputs: &'static [&'static str],
    pub outputs: &'static [&'static str],
    pub summary: &'static str,
}

const COR: &[&str] = &["q", "a", "b", "c", "x", "p"];
const JOINT: &[&str] = &["q", "a", "b", "c", "x", "levels", "weights"];
const KERNEL: &[&str] = &["q", "b", "c", "levels", "weights"];

pub const LAWS: &[LawInfo] = &[
    LawInfo {
        id: "lt_exit_up",
        inputs: COR,
        outputs: &["value"],
        summary: "E_x(e^{-q tau_b - p l(a,tau_b)}; tau_b < tau_c)",
    },
    LawInfo {
        id: "lt_exit_down",
        inputs: COR,
        outputs: &["value"],
        summary: "E_x(e^{-q tau_c - p l(a,tau_c)}; tau_c < tau_b)",
    },
    LawInfo {
        id: "lt_resolvent",
        inputs: &["q", "a", "b", "c", "x", "p", "y"],
        outputs: &["value"],
        summary: "resolvent density at y weighted by e^{-p l(a,t)}",
    },
    LawInfo {
        id: "joint_lt_exit_up",
        inputs: JOINT,
        outputs: &["value"],
        summary: "up-exit transform with weights at several levels",
    },
    LawInfo {
        id: "joint_lt_exit_down",
        inputs: JOINT,
        outputs: &["value"],
        summary: "down-exit transform with weights at several levels",
    },
    LawInfo {
        id: "joint_lt_resolvent",
        inputs: &["q", "a", "b", "c", "x", "levels", "weights", "y"],
        outputs: &["value"],
        summary: "resolvent density with weights at several levels",
    },
    LawInfo {
        id: "local_time_rate",
        inputs: &["q", "a", "b", "c"],
        outputs: &["rate"],
        summary: "W(b-c)/(W(b-a)W(a-c))",
    },
    LawInfo {
        id: "lt_atom_exp",
        inputs: &["a", "b", "c", "x"],
        outputs: &["atom", "rate"],
        summary: "law of l(a,tau_b) given up-exit, q = 0",
    },
    LawInfo {
        id: "hitting_transform",
        inputs: &["q", "a", "b", "c", "x"],
        outputs: &["value"],
        summary: "E_x(e^{-q tau_a}; tau_a < tau_b ^ tau_c)",
    },
    LawInfo {
        id: "lt_exp_killed_transform",
        inputs: COR,
        outputs: &["value"],
        summary: "E_x(e^{-p l(a, e_q ^ tau_b ^ tau_c)})",
    },
    LawInfo {
        id: "lt_exp_killed_decomposition",
        inputs: &["q", "a", "b", "c", "p"],
        outputs: &["up", "down", "inside", "total"],
        summary: "exit-mode split of the killed transform from a",
    },
    LawInfo {
        id: "lt_exp_inside_prefactor",
        inputs: &["q", "a", "b", "c"],
        outputs: &["value"],
        summary: "prefactor of e^{-rt} in the density of l(a,e_q) on the inside event",
    },
    LawInfo {
        id: "lt_exp_joint",
        inputs: &["q", "a", "b", "c", "y"],
        outputs: &["space_density", "time_rate"],
        summary: "joint law of X_{e_q} and l(a,e_q) on the inside event",
    },
    LawInfo {
        id: "lt_limit_up",
        inputs: &["q", "a", "b", "p"],
        outputs: &["value"],
        summary: "E_a(e^{-q tau_b - p l(a,tau_b)}; tau_b < inf)",
    },
    LawInfo {
        id: "lt_limit_down",
        inputs: &["q", "a", "c", "p"],
        outputs: &["value"],
        summary: "E_a(e^{-q tau_c - p l(a,tau_c)}; tau_c < inf)",
    },
    LawInfo {
        id: "lt_limit_global",
        inputs: &["q", "p"],
        outputs: &["value", "infinite_phi_prime"],
        summary: "E_a(e^{-p l(a,e_q)}) = 1/(1 + p Phi'(q))",
    },
    LawInfo {
        id: "inv_lt_survival",
        inputs: &["q", "a", "b", "c", "t"],
        outputs: &["value", "rate"],
        summary: "P_a(l^{-1}(a,t) < e_q ^ tau_b ^ tau_c)",
    },
    LawInfo {
        id: "inv_lt_joint_exponent",
        inputs: &["q", "a", "b", "c", "levels", "weights"],
        outputs: &["value"],
        summary: "exponent of the joint inverse-local-time transform",
    },
    LawInfo {
        id: "inv_lt_joint_transform",
        inputs: &["q", "a", "b", "c", "levels", "weights", "t"],
        outputs: &["value"],
        summary: "E_a(e^{-sum p_j l(a_j, l^{-1}(a,t))}; l^{-1}(a,t) < e_q ^ tau_b ^ tau_c)",
    },
    LawInfo {
        id: "potential_density",
        inputs: &["q", "b", "c", "x", "y"],
        outputs: &["value"],
        summary: "g(x,y) of the killed process",
    },
    LawInfo {
        id: "permanental_laplace",
        inputs: KERNEL,
        outputs: &["value", "det"],
        summary: "det(I + Lambda G)^{-1/2}",
    },
    LawInfo {
        id: "tilted_lt_transform",
        inputs: &["q", "a", "b", "c", "levels", "weights"],
        outputs: &["value", "det_route"],
        summary: "transform under the law conditioned to die at its last exit from a",
    },
    LawInfo {
        id: "loop_soup",
        inputs: KERNEL,
        outputs: &["det_route", "scale_route"],
        summary: "ln det(I + Lambda G) against ln(W_gen(b,c)/W(b-c))",
    },
    LawInfo {
        id: "logderiv_identity",
        inputs: &["q", "b", "c"],
        outputs: &["lhs", "rhs"],
        summary: "integral of g(a,a) against d/dq ln W(b-c)",
    },
];

pub fn find(id: &str) -> Result<&'static LawInfo> {
    LAWS.iter().find(|l| l.id == id).ok_or_else(|| Error::Input(format!("unknown law '{id}'; see `law --list`")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LawOutput {
    pub id: &'static str,
    /// Inputs actually used, in the order of [`LawInfo::inputs`].
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<(&'static str, f64)>,
}

struct Params<'a> {
    info: &'static LawInfo,
    map: &'a KvMap,
}

impl Params<'_> {
    fn check_known(&self) -> Result<()> {
        if let Some(k) = self.map.keys().find(|k| !self.info.inputs.contains(&k.as_str())) {
            return Err(Error::Input(format!(
                "law '{}' does not take '{k}' (inputs: {})",
                self.info.id,
                self.info.inputs.join(", ")
            )));
        }
        Ok(())
    }

    fn f(&self, key: &str) -> Result<f64> {
        require_f64(self.map, key)
    }

    fn f_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(get_f64(self.map, key)?.unwrap_or(default))
    }

    fn corridor(&self) -> Result<Corridor> {
        let a = self.f("a")?;
        Corridor::new(self.f("c")?, a, self.f("b")?, self.f_or("x", a)?, self.f_or("p", 1.0)?)
    }

    fn level_weights(&self) -> Result<LevelWeights> {
        let levels = get_list(self.map, "levels")?.ok_or_else(|| Error::Input("missing key 'levels'".into()))?;
        let weights = get_list(self.map, "weights")?.ok_or_else(|| Error::Input("missing key 'weights'".into()))?;
        LevelWeights::new(levels, weights)
    }

    fn joint_corridor(&self) -> Result<Corridor> {
        let a = self.f("a")?;
        Corridor::new(self.f("c")?, a, self.f("b")?, self.f_or("x", a)?, 0.0)?.with_levels(self.level_weights()?)
    }

    fn kernel(&self, ctx: &ScaleContext) -> Result<pl::PotentialKernel> {
        pl::PotentialKernel::new(ctx, self.f("c")?, self.f("b")?)
    }
}

/// Evaluate law `id` for `model` with inputs from `map`.
pub fn evaluate(id: &str, model: &LevyModel, map: &KvMap) -> Result<LawOutput> {
    let info = find(id)?;
    let p = Params { info, map };
    p.check_known()?;
    let ctx = ScaleContext::new(*model, p.f_or("q", 0.0)?)?;
    let values: Vec<f64> = match id {
        "lt_exit_up" => vec![lt::lt_exit_up(&ctx, &p.corridor()?)?],
        "lt_exit_down" => vec![lt::lt_exit_down(&ctx, &p.corridor()?)?],
        "lt_resolvent" => vec![lt::lt_resolvent(&ctx, &p.corridor()?, p.f("y")?)?],
        "joint_lt_exit_up" => vec![lt::joint_lt_exit_up(&ctx, &p.joint_corridor()?)?],
        "joint_lt_exit_down" => vec![lt::joint_lt_exit_down(&ctx, &p.joint_corridor()?)?],
        "joint_lt_resolvent" => vec![lt::joint_lt_resolvent(&ctx, &p.joint_corridor()?, p.f("y")?)?],
        "local_time_rate" => vec![lt::local_time_rate(&ctx, p.f("c")?, p.f("a")?, p.f("b")?)?],
        "lt_atom_exp" => {
            let r = lt::lt_atom_exp(&ctx, &p.corridor()?)?;
            vec![r.atom, r.rate]
        }
        "hitting_transform" => vec![lt::hitting_transform(&ctx, &p.corridor()?)?],
        "lt_exp_killed_transform" => vec![lt::lt_exp_killed_transform(&ctx, &p.corridor()?)?],
        "lt_exp_killed_decomposition" => {
            let a = p.f("a")?;
            let cor = Corridor::new(p.f("c")?, a, p.f("b")?, a, p.f_or("p", 1.0)?)?;
            let d = lt::lt_exp_killed_decomposition(&ctx, &cor)?;
            vec![d.up, d.down, d.inside, d.total()]
        }
        "lt_exp_inside_prefactor" => {
            let cor = Corridor::at_level(p.f("c")?, p.f("a")?, p.f("b")?, 0.0)?;
            vec![lt::lt_exp_inside_prefactor(&ctx, &cor)?]
        }
        "lt_exp_joint" => {
            let cor = Corridor::at_level(p.f("c")?, p.f("a")?, p.f("b")?, 0.0)?;
            let j = lt::lt_exp_joint(&ctx, &cor, p.f("y")?)?;
            vec![j.space_density, j.time_rate]
        }
        "lt_limit_up" => vec![lt::lt_limit_up(&ctx, p.f("a")?, p.f("b")?, p.f_or("p", 1.0)?)?],
        "lt_limit_down" => vec![lt::lt_limit_down(&ctx, p.f("a")?, p.f("c")?, p.f_or("p", 1.0)?)?],
        "lt_limit_global" => {
            let v = lt::lt_limit_global(&ctx, p.f_or("p", 1.0)?);
            vec![v.value, if v.infinite_phi_prime { 1.0 } else { 0.0 }]
        }
        "inv_lt_survival" => {
            let cor = Corridor::at_level(p.f("c")?, p.f("a")?, p.f("b")?, 0.0)?;
            let s = lt::inv_lt_survival(&ctx, &cor, p.f("t")?)?;
            vec![s.value, s.rate]
        }
        "inv_lt_joint_exponent" => vec![lt::inv_lt_joint_exponent(&ctx, &p.joint_corridor()?)?],
        "inv_lt_joint_transform" => vec![lt::inv_lt_joint_transform(&ctx, &p.joint_corridor()?, p.f("t")?)?],
        "potential_density" => vec![p.kernel(&ctx)?.g(p.f("x")?, p.f("y")?)?],
        "permanental_laplace" => {
            let (k, lw) = (p.kernel(&ctx)?, p.level_weights()?);
            vec![pl::permanental_laplace(&k, &lw)?, pl::det_i_plus_lambda_g(&k, &lw)?]
        }
        "tilted_lt_transform" => {
            let (k, lw, a) = (p.kernel(&ctx)?, p.level_weights()?, p.f("a")?);
            vec![pl::tilted_lt_transform(&k, a, &lw)?, pl::tilted_lt_transform_det(&k, a, &lw)?]
        }
        "loop_soup" => {
            let r = pl::loop_soup_functional(&p.kernel(&ctx)?, &p.level_weights()?)?;
            vec![r.det_route, r.scale_route]
        }
        "logderiv_identity" => {
            let r = pl::logderiv_identity_check(&ctx, p.f("b")?, p.f("c")?)?;
            vec![r.lhs, r.rhs]
        }
        _ => unreachable!("registry and dispatch out of sync for '{id}'"),
    };
    let inputs = info.inputs.iter().filter_map(|&k| map.get(k).map(|v| (k.to_string(), v.clone()))).collect();
    Ok(LawOutput { id: info.id, inputs, outputs: info.outputs.iter().copied().zip(values).collect() })
}

/// One analytic value against its Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct McComparison {
    pub id: String,
    pub quantity: &'static str,
    pub analytic: f64,
    pub estimate: Estimate,
}

impl McComparison {
    pub fn z_score(&self) -> f64 {
        self.estimate.z_score(self.analytic)
    }
}

/// Laws that [`mc_compare`] can check by simulation.
pub const MC_LAWS: &[&str] =
    &["lt_exit_up", "lt_exit_down", "lt_exp_killed_transform", "lt_atom_exp", "inv_lt_survival"];

/// Simulate the corridor of law `id` and compare with the analytic value.
pub fn mc_compare(id: &str, model: &LevyModel, map: &KvMap, cfg: &McConfig) -> Result<Vec<McComparison>> {
    if !MC_LAWS.contains(&id) {
        return Err(Error::Input(format!("no Monte Carlo check for '{id}' (available: {})", MC_LAWS.join(", "))));
    }
    let analytic = evaluate(id, model, map)?;
    let p = Params { info: find(id)?, map };
    let q = p.f_or("q", 0.0)?;
    let cor = match id {
        "inv_lt_survival" => Corridor::at_level(p.f("c")?, p.f("a")?, p.f("b")?, 0.0)?,
        _ => p.corridor()?,
    };
    let ens = simulate_corridor(model, q, &cor, cfg)?;
    let weight = vec![cor.p];
    let transform =
        |sel| empirical_transform(&ens, &Functional::new(sel).with_weights(weight.clone()).with_discount(q));
    let row = |quantity, analytic, estimate| McComparison { id: id.to_string(), quantity, analytic, estimate };
    let out = &analytic.outputs;
    Ok(match id {
        "lt_exit_up" => vec![row("value", out[0].1, transform(Selector::Exit(ExitKind::Up))?)],
        "lt_exit_down" => vec![row("value", out[0].1, transform(Selector::Exit(ExitKind::Down))?)],
        "lt_exp_killed_transform" => {
            // Discounting is already carried by the exponential clock.
            let e = empirical_transform(&ens, &Functional::new(Selector::Any).with_weights(weight.clone()))?;
            vec![row("value", out[0].1, e)]
        }
        "lt_atom_exp" => {
            let up = |r: &crate::mc_oracle::PathRecord| r.exit_kind == ExitKind::Up;
            let atom = conditional_probability(&ens, |r| r.local_times[0] == 0.0, up)?;
            let mean =
                crate::mc_oracle::conditional_mean(&ens, |r| r.local_times[0], |r| up(r) && r.local_times[0] > 0.0)?;
            vec![row("atom", out[0].1, atom), row("mean_given_positive", 1.0 / out[1].1, mean)]
        }
        "inv_lt_survival" => {
            let t = p.f("t")?;
            let s = conditional_probability(&ens, |r| r.local_times[0] > t, |_| true)?;
            vec![row("value", out[0].1, s)]
        }
        _ => unreachable!(),
    })
}
