use std::fmt::Write as _;
use std::path::Path;
use std::rc::Rc;
use std::sync::Arc;

use grain_core::bayes::{BayesPolicy, BayesState, ThompsonActor, ThompsonPolicy};
use grain_core::experiments::{
    concentration_run, dogmatic_run, fixed_pennies, opponent_class, pd_models, pd_run, pennies_opponent_models,
    thompson_run, ConcentrationConfig, DogmaticConfig, PdConfig, PdPattern, ThompsonConfig,
};
use grain_core::machine::{eval_truncated, Bits, Registry};
use grain_core::multiagent::{
    gap_in_env, informed_equilibrium, make_iterated_pd, make_matching_pennies, pd_grim_policy, play_with,
    subjective_env, Agent, AnyPolicy, AnyPolicyState, CompletedPolicy, JointHistory, TabularGame, DEFAULT_TREE_BUDGET,
};
use grain_core::oracle::{completed_bounds, PartialOracle};
use grain_core::rational::{rat, show, to_f64, Rational};
use grain_core::rl::{Action, Discount, History, TabularPolicy, TieRule};
use grain_core::search::{search, SearchError, SearchStatus};
use num::Signed;
use serde_json::{json, Value};

use crate::config::Config;
use crate::{CliError, EXIT_BUDGET, EXIT_INVALID_RUN, EXIT_OK};

const TRACE_FILE: &str = "trace.jsonl";
const ORACLE_FILE: &str = "oracle.txt";

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> CliError {
    CliError::InvalidRun(e.to_string())
}

fn load_registry(cfg: &Config, required: bool) -> Result<Registry, CliError> {
    let Some(path) = cfg.path("registry") else {
        return if required { Err(config_err("missing `registry`")) } else { Ok(Registry::new()) };
    };
    let text =
        std::fs::read_to_string(&path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Registry::from_manifest(&text, base).map_err(config_err)
}

/// Identification stamped on every output.
struct Stamp {
    config_hash: String,
    registry: String,
}

impl Stamp {
    fn new(cfg: &Config, command: &str, reg: &Registry) -> Stamp {
        Stamp { config_hash: cfg.hash(command), registry: reg.fingerprint().0 }
    }

    fn csv_header(&self) -> String {
        format!("# config_hash={} registry={}\n", self.config_hash, self.registry)
    }
}

fn write_out(cfg: &Config, name: &str, body: &str) -> Result<(), CliError> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join(name), body)?;
    Ok(())
}

fn csv(stamp: &Stamp, columns: &str, rows: &[String]) -> String {
    let mut s = stamp.csv_header();
    s.push_str(columns);
    s.push('\n');
    for r in rows {
        s.push_str(r);
        s.push('\n');
    }
    s
}

fn action_code(a: Action) -> char {
    match a {
        Action::Alpha => 'a',
        Action::Beta => 'b',
    }
}

pub fn build_oracle(cfg: &Config) -> Result<u8, CliError> {
    let reg = load_registry(cfg, true)?;
    let max_level: u32 = cfg.num("max_level", 5)?;
    let budget: u64 = cfg.num("budget", u64::MAX)?;
    let stamp = Stamp::new(cfg, "build-oracle", &reg);
    let trace = search(&reg, max_level, budget).map_err(|e| match e {
        SearchError::BadMaxLevel => config_err(e),
        other => run_err(other),
    })?;
    let mut out = String::new();
    let header = json!({
        "record": "header",
        "config_hash": stamp.config_hash,
        "registry": stamp.registry,
        "machines": reg.len(),
        "max_level": max_level,
        "budget": budget,
    });
    writeln!(out, "{header}").unwrap();
    for e in &trace.emissions {
        let level = e.oracle.level();
        let values: Vec<String> = (1..=level as u64).map(|i| show(&e.oracle.value(i).unwrap())).collect();
        let rec = json!({
            "record": "node",
            "id": e.id,
            "parent": e.parent,
            "level": level,
            "values": values,
            "numerators": e.oracle.numerators(),
            "backtracks": e.backtracks,
            "chain": trace.chain.contains(&e.id),
        });
        writeln!(out, "{rec}").unwrap();
    }
    let complete = trace.status == SearchStatus::Complete;
    let summary = json!({
        "record": "summary",
        "status": if complete { "complete" } else { "budget_exhausted" },
        "reached_level": trace.reached_level(),
        "emitted": trace.emissions.len(),
        "backtracks": trace.backtracks,
        "evaluations": trace.evaluations,
    });
    writeln!(out, "{summary}").unwrap();
    write_out(cfg, TRACE_FILE, &out)?;
    if let Some(po) = trace.final_oracle() {
        write_out(cfg, ORACLE_FILE, &format!("# config_hash={}\n{}", stamp.config_hash, po.to_text()))?;
    }
    println!("{summary}");
    Ok(if complete { EXIT_OK } else { EXIT_BUDGET })
}

/// The chain oracle at level `k` from a trace written by `build-oracle`.
fn oracle_from_trace(path: &Path, reg: &Registry, k: u32) -> Result<PartialOracle, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("missing oracle trace {}: {e}", path.display())))?;
    let fp = reg.fingerprint().0;
    let mut found = None;
    for line in text.lines() {
        let rec: Value = serde_json::from_str(line).map_err(|e| config_err(format!("malformed trace: {e}")))?;
        match rec["record"].as_str() {
            Some("header") if rec["registry"].as_str() != Some(fp.as_str()) => {
                return Err(config_err("trace was built for a different registry"));
            }
            Some("node") if rec["chain"] == true && rec["level"] == k => {
                let nums: Option<Vec<u64>> =
                    rec["numerators"].as_array().map(|a| a.iter().filter_map(Value::as_u64).collect());
                found = nums;
            }
            _ => {}
        }
    }
    let nums = found.ok_or_else(|| config_err(format!("trace has no chain oracle at level {k}")))?;
    PartialOracle::for_registry(reg, k, nums).map_err(config_err)
}

pub fn eval(cfg: &Config) -> Result<u8, CliError> {
    let reg = load_registry(cfg, true)?;
    let k: u32 = cfg.num("max_level", 0)?;
    if k == 0 {
        return Err(config_err("missing `--level`"));
    }
    let machine: usize = cfg.require("machine")?.parse().map_err(|_| config_err("`machine` must be an index"))?;
    let input: Bits = cfg.get("input").unwrap_or("").parse().map_err(config_err)?;
    let po = oracle_from_trace(&cfg.out_dir().join(TRACE_FILE), &reg, k)?;
    let d = eval_truncated(&reg, machine, &input, &po).map_err(config_err)?;
    let b = completed_bounds(&po, &reg, machine, &input).map_err(config_err)?;
    let stamp = Stamp::new(cfg, "eval", &reg);
    let rec = json!({
        "config_hash": stamp.config_hash,
        "registry": stamp.registry,
        "machine": machine,
        "input": input.to_string(),
        "level": k,
        "p1": show(&d.p1),
        "p0": show(&d.p0),
        "lo": show(b.lo()),
        "hi": show(b.hi()),
    });
    println!("{rec}");
    Ok(EXIT_OK)
}

pub fn enumerate_queries(cfg: &Config) -> Result<u8, CliError> {
    let reg = load_registry(cfg, true)?;
    let n: usize = cfg.num("count", 10)?;
    let stamp = Stamp::new(cfg, "enumerate-queries", &reg);
    let rows: Vec<String> = grain_core::machine::enumerate_queries(&reg, n)
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{},{},{},{}", i + 1, q.machine, q.input, show(&q.threshold)))
        .collect();
    print!("{}", csv(&stamp, "i,machine,input,threshold", &rows));
    Ok(EXIT_OK)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum GameKind {
    Pennies,
    Pd,
    Custom,
}

fn load_game(cfg: &Config) -> Result<(TabularGame, GameKind), CliError> {
    match cfg.require("game")? {
        "pennies" => Ok((make_matching_pennies(), GameKind::Pennies)),
        "pd" => Ok((make_iterated_pd(), GameKind::Pd)),
        _ => {
            let path = cfg.path("game").unwrap();
            let text = std::fs::read_to_string(&path)
                .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            Ok((TabularGame::from_text(&text).map_err(config_err)?, GameKind::Custom))
        }
    }
}

/// Opponent models behind the learning agents of the built-in games.
fn models(kind: GameKind, max_deadline: u64) -> Result<Vec<(String, TabularPolicy)>, CliError> {
    match kind {
        GameKind::Pennies => Ok(pennies_opponent_models().into_iter().map(|(n, p)| (n.to_string(), p)).collect()),
        GameKind::Pd => Ok(pd_models(max_deadline)),
        GameKind::Custom => Err(config_err("learning agents need a built-in game")),
    }
}

struct GameParams {
    discount: Discount,
    eps_plan: Rational,
    eps_resample: Rational,
    tie_level: u32,
    max_deadline: u64,
}

/// Agent `i` from its description: `fixed <a|b sequence>`, `uniform`, `grim <t|inf>`, `bayes` or `thompson`.
fn build_agent(
    spec: &str,
    game: &TabularGame,
    kind: GameKind,
    i: usize,
    p: &GameParams,
    seed: u64,
) -> Result<Agent, CliError> {
    let n = game.space(i).len();
    let words: Vec<&str> = spec.split_whitespace().collect();
    let bad = || config_err(format!("agent{}: bad agent `{spec}`", i + 1));
    let learner_class = || {
        let m = models(kind, p.max_deadline)?;
        let named: Vec<(&str, TabularPolicy)> = m.iter().map(|(s, q)| (s.as_str(), q.clone())).collect();
        let class = Arc::new(opponent_class(game, i, &named).map_err(config_err)?);
        let prior = vec![rat(1, class.len() as i64); class.len()];
        BayesState::new(class, &prior).map_err(config_err)
    };
    Ok(match words.as_slice() {
        ["fixed", seq] => {
            let acts: Option<Vec<Action>> = seq.chars().map(|c| Action::parse(&c.to_string())).collect();
            Agent::from_policy(TabularPolicy::cyclic(&acts.ok_or_else(bad)?, n).map_err(config_err)?)
        }
        ["uniform"] => Agent::from_policy(TabularPolicy::uniform(n)),
        ["grim", t] if kind == GameKind::Pd => {
            let t = if *t == "inf" { None } else { Some(t.parse().map_err(|_| bad())?) };
            Agent::from_policy(pd_grim_policy(t))
        }
        ["bayes"] => {
            let state = learner_class()?;
            let bayes = BayesPolicy::new(&state, p.discount.clone(), p.eps_plan.clone(), TieRule::FixedAlpha)
                .map_err(config_err)?;
            Agent::from_policy(AnyPolicy::Completed(Rc::new(CompletedPolicy {
                primary: AnyPolicy::Bayes(Rc::new(bayes)),
                fallback: TabularPolicy::uniform(n),
            })))
        }
        ["thompson"] => {
            let state = learner_class()?;
            let tie = TieRule::oracle_mediated(p.tie_level).map_err(config_err)?;
            let policy =
                ThompsonPolicy::new(&state, p.discount.clone(), p.eps_plan.clone(), p.eps_resample.clone(), tie)
                    .map_err(config_err)?;
            let actor_seed = seed.wrapping_mul(2).wrapping_add(i as u64 + 1);
            Agent::thompson(ThompsonActor::new(Rc::new(policy), actor_seed))
        }
        _ => return Err(bad()),
    })
}

fn posterior(agent: &Agent) -> Option<&[Rational]> {
    match agent {
        Agent::Thompson(t) => Some(&t.belief().weights),
        Agent::Policy { state: AnyPolicyState::Completed(Some(s), _), .. } => match s.as_ref() {
            AnyPolicyState::Bayes(b) => Some(&b.belief.weights),
            _ => None,
        },
        _ => None,
    }
}

fn trajectory_rows(game: &TabularGame, h: &JointHistory) -> Vec<String> {
    h.cycles
        .iter()
        .enumerate()
        .map(|(t, c)| {
            let mut row = format!("{},{}", t + 1, c.state);
            for a in &c.actions {
                write!(row, ",{}", action_code(*a)).unwrap();
            }
            for (i, e) in c.percepts.iter().enumerate() {
                write!(row, ",{}", game.space(i).defs()[e.0].observation).unwrap();
            }
            for (i, e) in c.percepts.iter().enumerate() {
                write!(row, ",{}", show(game.space(i).reward(*e))).unwrap();
            }
            row
        })
        .collect()
}

pub fn run_game(cfg: &Config) -> Result<u8, CliError> {
    let reg = load_registry(cfg, false)?;
    let stamp = Stamp::new(cfg, "run-game", &reg);
    let (game, kind) = load_game(cfg)?;
    if game.agents() != 2 {
        return Err(config_err("run-game supports two-agent games"));
    }
    let params = GameParams {
        discount: Discount::geometric(cfg.rational("gamma", rat(1, 2))?).map_err(config_err)?,
        eps_plan: cfg.rational("eps_plan", rat(1, 100))?,
        eps_resample: cfg.rational("eps_resample", rat(1, 10))?,
        tie_level: cfg.num("tie_level", 4)?,
        max_deadline: cfg.num("max_deadline", 15)?,
    };
    let steps: usize = cfg.num("steps", 100)?;
    let seed: u64 = cfg.num("seed", 0)?;
    let gap_every: usize = cfg.num("gap_every", 0)?;
    let eps_gap = cfg.rational("eps_gap", rat(1, 100))?;
    let mut agents = (0..2)
        .map(|i| build_agent(cfg.require(&format!("agent{}", i + 1))?, &game, kind, i, &params, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let marginals: Vec<AnyPolicy> = agents.iter().map(Agent::marginal_policy).collect();
    let envs =
        (0..2).map(|i| subjective_env(&game, &marginals, i)).collect::<Result<Vec<_>, _>>().map_err(config_err)?;

    let mut gap_rows = Vec::new();
    let mut post_rows = Vec::new();
    let mut too_wide = false;
    let mut measure = |h: &JointHistory, rows: &mut Vec<String>| -> Result<(), CliError> {
        for i in 0..2 {
            let r =
                gap_in_env(&envs[i], &marginals[i], &params.discount, &h.projection(i), &eps_gap).map_err(run_err)?;
            too_wide |= &r.gap.hi - &r.gap.lo > &eps_gap * rat(2, 1);
            rows.push(format!(
                "{},{},{},{},{}",
                h.len(),
                i + 1,
                show(&r.gap.lo),
                show(&r.gap.hi),
                r.is_best_response(&eps_gap)
            ));
        }
        Ok(())
    };
    let mut failure = None;
    let history = play_with(&game, &mut agents, steps, seed, |h, ags| {
        for (i, a) in ags.iter().enumerate() {
            if let Some(w) = posterior(a) {
                for (m, x) in w.iter().enumerate() {
                    post_rows.push(format!("{},{},{},{}", h.len(), i + 1, m + 1, show(x)));
                }
            }
        }
        if gap_every > 0 && h.len() % gap_every == 0 {
            if let Err(e) = measure(h, &mut gap_rows) {
                failure = Some(e);
            }
        }
        Ok(())
    })
    .map_err(run_err)?;
    if let Some(e) = failure {
        return Err(e);
    }
    if gap_every == 0 || history.len() % gap_every != 0 {
        measure(&history, &mut gap_rows)?;
    }

    write_out(
        cfg,
        "trajectory.csv",
        &csv(&stamp, "t,state,action1,action2,percept1,percept2,reward1,reward2", &trajectory_rows(&game, &history)),
    )?;
    write_out(cfg, "gaps.csv", &csv(&stamp, "t,agent,gap_lo,gap_hi,eps_best_response", &gap_rows))?;
    if !post_rows.is_empty() {
        write_out(cfg, "posteriors.csv", &csv(&stamp, "t,agent,member,weight", &post_rows))?;
    }
    if let Some(m) = cfg.get("equilibrium_depth") {
        let m: u32 = m.parse().map_err(|_| config_err("`equilibrium_depth` must be an integer"))?;
        let eq = informed_equilibrium(&game, &params.discount, m, &TieRule::FixedAlpha, DEFAULT_TREE_BUDGET)
            .map_err(run_err)?;
        let root = History::new();
        let rows: Vec<String> = (0..2)
            .map(|i| {
                let alpha = eq.policies[i].table.get(&root).unwrap_or(&eq.policies[i].default).alpha().clone();
                format!("{},{},{},{}", i + 1, show(&eq.values[i]), show(&eq.tail), show(&alpha))
            })
            .collect();
        write_out(cfg, "equilibrium.csv", &csv(&stamp, "agent,value,tail,root_alpha", &rows))?;
    }
    let summary = json!({
        "config_hash": stamp.config_hash,
        "registry": stamp.registry,
        "steps": history.len(),
        "average_reward": [show(&history.average_reward(&game, 0)), show(&history.average_reward(&game, 1))],
    });
    println!("{summary}");
    if too_wide {
        eprintln!("grain: a gap enclosure is wider than 2·eps_gap");
        return Ok(EXIT_INVALID_RUN);
    }
    Ok(EXIT_OK)
}

/// One seed's outcome: its CSV row and how many of its units meet the criterion.
struct SeedResult {
    row: String,
    met: usize,
}

type SeedFn = dyn Fn(u64) -> Result<SeedResult, String> + Sync;

struct Experiment {
    columns: &'static str,
    criterion: &'static str,
    /// Criterion units per seed (agents, or whole runs).
    units: usize,
    run: Box<SeedFn>,
}

fn decimal(r: &Rational) -> String {
    format!("{:.6}", to_f64(r))
}

fn experiment_spec(cfg: &Config) -> Result<Experiment, CliError> {
    let name = cfg.require("experiment")?;
    let gamma = |d: Rational| cfg.rational("gamma", d);
    Ok(match name {
        "pennies" => {
            let steps: usize = cfg.num("steps", 300)?;
            let tol = cfg.rational("eps", rat(1, 100))?;
            Experiment {
                columns: "seed,average1,average2",
                criterion: "averages_near_2/3_1/3",
                units: 1,
                run: Box::new(move |seed| {
                    let (_, avg) = fixed_pennies(steps, seed).map_err(|e| e.to_string())?;
                    let near = |x: &Rational, y: Rational| (x - y).abs() <= tol;
                    let ok = near(&avg[0], rat(2, 3)) && near(&avg[1], rat(1, 3));
                    Ok(SeedResult { row: format!("{seed},{},{}", show(&avg[0]), show(&avg[1])), met: ok as usize })
                }),
            }
        }
        "concentration" => {
            let c = ConcentrationConfig {
                steps: cfg.num("steps", 200)?,
                gamma: gamma(rat(1, 2))?,
                eps: cfg.rational("eps_gap", rat(1, 50))?,
            };
            Experiment {
                columns: "seed,posterior_truth,gap_lo,gap_hi",
                criterion: "posterior>=0.99_and_gap<0.05",
                units: 1,
                run: Box::new(move |seed| {
                    let o = concentration_run(&c, seed).map_err(|e| e.to_string())?;
                    let ok = o.posterior_truth >= rat(99, 100) && o.gap_bound() < rat(1, 20);
                    Ok(SeedResult {
                        row: format!(
                            "{seed},{},{},{}",
                            decimal(&o.posterior_truth),
                            decimal(&o.value_gap.lo),
                            decimal(&o.value_gap.hi)
                        ),
                        met: ok as usize,
                    })
                }),
            }
        }
        "dogmatic" => {
            let d = DogmaticConfig::default();
            let c = DogmaticConfig {
                steps: cfg.num("steps", d.steps)?,
                gamma: gamma(d.gamma)?,
                lambda: cfg.rational("lambda", d.lambda)?,
                eps_plan: cfg.rational("eps_plan", d.eps_plan)?,
                eps_gap: cfg.rational("eps_gap", d.eps_gap)?,
                check_every: cfg.num("gap_every", d.check_every)?.max(1),
            };
            let eps = cfg.rational("eps", rat(1, 5))?;
            Experiment {
                columns: "seed,followed1,followed2,min_gap_lo1,min_gap_lo2,checks",
                criterion: "followed_reference_and_gap>=eps",
                units: 2,
                run: Box::new(move |seed| {
                    let o = dogmatic_run(&c).map_err(|e| e.to_string())?;
                    let met = (0..2).filter(|&i| o.followed_reference[i] && o.min_gap_lower[i] >= eps).count();
                    Ok(SeedResult {
                        row: format!(
                            "{seed},{},{},{},{},{}",
                            o.followed_reference[0],
                            o.followed_reference[1],
                            decimal(&o.min_gap_lower[0]),
                            decimal(&o.min_gap_lower[1]),
                            o.checks
                        ),
                        met,
                    })
                }),
            }
        }
        "thompson" => {
            let d = ThompsonConfig::default();
            let c = ThompsonConfig {
                steps: cfg.num("steps", d.steps)?,
                gamma: gamma(d.gamma)?,
                eps: cfg.rational("eps", d.eps)?,
                eps_plan: cfg.rational("eps_plan", d.eps_plan)?,
                eps_resample: cfg.rational("eps_resample", d.eps_resample)?,
                tie_level: cfg.num("tie_level", d.tie_level)?,
            };
            Experiment {
                columns: "seed,gap_hi1,gap_hi2,best_response1,best_response2",
                criterion: "eps_best_response",
                units: 2,
                run: Box::new(move |seed| {
                    let o = thompson_run(&c, seed).map_err(|e| e.to_string())?;
                    Ok(SeedResult {
                        row: format!(
                            "{seed},{},{},{},{}",
                            decimal(&o.gaps[0].hi),
                            decimal(&o.gaps[1].hi),
                            o.best_response[0],
                            o.best_response[1]
                        ),
                        met: o.best_response.iter().filter(|b| **b).count(),
                    })
                }),
            }
        }
        "pd" => {
            let d = PdConfig::default();
            let c = PdConfig {
                steps: cfg.num("steps", d.steps)?,
                max_deadline: cfg.num("max_deadline", d.max_deadline)?,
                gamma: gamma(d.gamma)?,
                eps_plan: cfg.rational("eps_plan", d.eps_plan)?,
            };
            Experiment {
                columns: "seed,pattern",
                criterion: "cooperate_or_defect_forever",
                units: 1,
                run: Box::new(move |seed| {
                    let o = pd_run(&c, seed).map_err(|e| e.to_string())?;
                    Ok(SeedResult {
                        row: format!("{seed},{}", o.pattern),
                        met: (o.pattern != PdPattern::Other) as usize,
                    })
                }),
            }
        }
        other => return Err(config_err(format!("unknown experiment `{other}`"))),
    })
}

/// Runs every seed, fanning out over worker threads; results keep seed order.
fn run_seeds(exp: &Experiment, seeds: &[u64]) -> Vec<Result<SeedResult, String>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(seeds.len().max(1));
    let chunk = seeds.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> =
            seeds.chunks(chunk).map(|c| s.spawn(move || c.iter().map(|&x| (exp.run)(x)).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

pub fn experiment(cfg: &Config) -> Result<u8, CliError> {
    let reg = load_registry(cfg, false)?;
    let stamp = Stamp::new(cfg, "experiment", &reg);
    let exp = experiment_spec(cfg)?;
    let seeds = cfg.seeds()?;
    let results = run_seeds(&exp, &seeds);
    let mut rows = Vec::new();
    let mut met = 0;
    for r in results {
        let r = r.map_err(CliError::InvalidRun)?;
        met += r.met;
        rows.push(r.row);
    }
    let name = cfg.require("experiment")?;
    write_out(cfg, &format!("{name}_runs.csv"), &csv(&stamp, exp.columns, &rows))?;
    let total = exp.units * seeds.len();
    let fraction = if total == 0 { String::new() } else { show(&Rational::new(met.into(), total.into())) };
    let agg = format!("{name},{},{},{met},{total},{fraction}", seeds.len(), exp.criterion);
    write_out(cfg, "aggregate.csv", &csv(&stamp, "experiment,seeds,criterion,met,units,fraction", &[agg]))?;
    let summary = json!({
        "config_hash": stamp.config_hash,
        "registry": stamp.registry,
        "experiment": name,
        "seeds": seeds.len(),
        "met": met,
        "units": total,
    });
    println!("{summary}");
    Ok(EXIT_OK)
}
