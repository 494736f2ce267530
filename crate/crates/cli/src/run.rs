//! Executes configurations and produces result records.

use crate::config::{
    BlockFormula, CrossingPayload, GreenPayload, Payload, RunConfig, SimEvent, SimulatePayload, VerifyPayload,
    WallPayload,
};
use crate::record::{ResultRecord, TableRow, VERSION};
use asep_core::formulas::{
    block_crossing, cumulative_crossing_bernoulli, cumulative_crossing_bernoulli_inverted, cumulative_crossing_one_wall,
    cumulative_crossing_one_wall_det, cumulative_crossing_step, gamma_wall, r_asep_transition, rainbow_total_crossing,
    single_species_transition, tasep_block_crossing, two_tasep_crossing, two_tasep_green, CrossingQuery, Evaluation,
    FormulaOptions, GreenQuery, Method,
};
use asep_core::identities::{verify_all, IdentityReport, DEFAULT_SEED};
use asep_core::oracle::{empirical_distribution, estimate_event};
use asep_core::{Error, IntegerComposition, ParticleConfig, Result, StrictSignature};
use serde_json::{json, Value};
use std::time::Instant;

/// Settings shared by every run of one invocation.
#[derive(Debug, Clone, Default)]
pub struct RunSettings {
    pub seed: Option<u64>,
    /// Caps quadrature node evaluations and Monte Carlo samples.
    pub budget: Option<u64>,
    pub tol: Option<f64>,
    pub timing: bool,
}

/// What a run produced besides the record itself.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub record: ResultRecord,
    pub table: Option<Vec<TableRow>>,
    /// Verification outcome; `None` for evaluation commands.
    pub verified: Option<bool>,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Quadrature => "quadrature",
        Method::Laurent => "laurent",
        Method::Auto => "auto",
    }
}

fn options(cfg: &RunConfig, s: &RunSettings) -> FormulaOptions {
    let mut o = FormulaOptions::default();
    if let Some(q) = cfg.quadrature {
        if let Some(t) = q.tol {
            o.quad.tol = t;
        }
        if let Some(n) = q.start_nodes {
            o.quad.start_nodes = n;
        }
        if let Some(n) = q.max_nodes {
            o.quad.max_nodes = n;
        }
    }
    if let Some(t) = s.tol {
        o.quad.tol = t;
    }
    if let Some(b) = s.budget {
        o.quad.budget = b;
    }
    o
}

struct Outcome {
    eval: Evaluation,
    method: String,
    details: Option<Value>,
    table: Option<Vec<TableRow>>,
    verified: Option<bool>,
}

impl Outcome {
    fn of(eval: Evaluation) -> Self {
        Self { method: method_name(eval.method).into(), eval, details: None, table: None, verified: None }
    }
}

fn green(p: &GreenPayload, o: &FormulaOptions) -> Result<Outcome> {
    match p {
        GreenPayload::TwoSpecies { initial, target, t, method } => {
            let q = GreenQuery::new(initial.build()?, target.build()?, *t).with_method(*method);
            Ok(Outcome::of(two_tasep_green(&q, o)?))
        }
        GreenPayload::Rainbow { mu, nu, q, t } => {
            let e = r_asep_transition(&StrictSignature::new(mu.clone())?, &IntegerComposition::strict(nu.clone())?, *q, *t, o)?;
            Ok(Outcome::of(e))
        }
        GreenPayload::Table { initial, lo, hi, t } => {
            let init = initial.build()?;
            let rows = green_table(&init, *lo, *hi, *t, o)?;
            let total: f64 = rows.iter().map(|r| r.probability).sum();
            let evals = Evaluation { value: total, est_err: 0.0, method: Method::Auto, evaluations: rows.len() as u64 };
            let mut out = Outcome::of(evals);
            out.method = "table_sum".into();
            out.details = Some(json!({ "states": rows.len() }));
            out.table = Some(rows);
            Ok(out)
        }
    }
}

/// Transition probabilities into every two-species configuration inside `[lo, hi]`.
pub fn green_table(init: &ParticleConfig, lo: i64, hi: i64, t: f64, o: &FormulaOptions) -> Result<Vec<TableRow>> {
    if hi < lo {
        return Err(Error::InvalidInput(format!("empty window [{lo}, {hi}]")));
    }
    let n = init.n();
    let m = init.m();
    let width = (hi - lo + 1) as usize;
    if width > 64 || n > width {
        return Err(Error::ResourceLimit { what: format!("window of width {width}"), cap: 64 });
    }
    let mut rows = Vec::new();
    for pos in combinations(lo, hi, n) {
        for p in index_subsets(n, m) {
            let target = ParticleConfig::two_species(pos.clone(), &p)?;
            let v = two_tasep_green(&GreenQuery::new(init.clone(), target.clone(), t), o)?.value;
            rows.push(TableRow { positions: target.positions().to_vec(), species: target.species().to_vec(), probability: v });
        }
    }
    Ok(rows)
}

fn combinations(lo: i64, hi: i64, k: usize) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(x: i64, hi: i64, k: usize, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for y in x..=hi {
            cur.push(y);
            rec(y + 1, hi, k, cur, out);
            cur.pop();
        }
    }
    rec(lo, hi, k, &mut cur, &mut out);
    out
}

fn index_subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    combinations(1, n as i64, m).into_iter().map(|v| v.into_iter().map(|x| x as usize).collect()).collect()
}

fn crossing(p: &CrossingPayload, o: &FormulaOptions) -> Result<Outcome> {
    match p {
        CrossingPayload::Blocks { mu, lambda, q, t, formula } => {
            let cq = CrossingQuery::new(mu.clone(), lambda.clone(), *q, *t)?;
            let (e, name) = match formula {
                BlockFormula::Auto if *q == 0.0 => (tasep_block_crossing(&cq, o)?, "determinant"),
                BlockFormula::Auto | BlockFormula::Symmetric => (block_crossing(&cq, o)?, "symmetric"),
                BlockFormula::Determinant => (tasep_block_crossing(&cq, o)?, "determinant"),
                BlockFormula::SingleSpecies => {
                    if mu.len() != 1 {
                        return Err(Error::InvalidInput("the single-species formula needs exactly one block".into()));
                    }
                    (single_species_transition(&mu[0], &lambda[0], *q, *t, o)?, "single_species")
                }
            };
            let mut out = Outcome::of(e);
            out.details = Some(json!({ "formula": name }));
            Ok(out)
        }
        CrossingPayload::TwoTasep { mu, nu, m, t } => Ok(Outcome::of(two_tasep_crossing(mu, nu, *m, *t, o)?)),
        CrossingPayload::Rainbow { mu, nu, q, t } => Ok(Outcome::of(rainbow_total_crossing(mu, nu, *q, *t, o)?)),
    }
}

fn wall(p: &WallPayload, o: &FormulaOptions) -> Result<Outcome> {
    let (e, form) = match p {
        WallPayload::Auto(w) => {
            if w.s1 <= -(w.m as i64) {
                (cumulative_crossing_one_wall_det(w, o)?, "one_wall_det")
            } else {
                (cumulative_crossing_bernoulli(w, o)?, "bernoulli")
            }
        }
        WallPayload::Bernoulli(w) => (cumulative_crossing_bernoulli(w, o)?, "bernoulli"),
        WallPayload::Inverted(w) => (cumulative_crossing_bernoulli_inverted(w, o)?, "inverted"),
        WallPayload::OneWall(w) => (cumulative_crossing_one_wall(w, o)?, "one_wall"),
        WallPayload::OneWallDet(w) => (cumulative_crossing_one_wall_det(w, o)?, "one_wall_det"),
        WallPayload::Step { mu, m, s1, s2, t } => (cumulative_crossing_step(mu, *m, *s1, *s2, *t, o)?, "step"),
        WallPayload::Gamma { n, s, t } => {
            (Evaluation { value: gamma_wall(*n, *s, *t)?, est_err: 0.0, method: Method::Laurent, evaluations: 0 }, "gamma")
        }
    };
    let mut out = Outcome::of(e);
    out.details = Some(json!({ "form": form }));
    Ok(out)
}

/// The cumulative crossing event: type-1 particles in `[s1, s2)`, type-2 particles at or beyond `s2`.
pub fn wall_event(c: &ParticleConfig, s1: i64, s2: i64) -> bool {
    c.positions().iter().zip(c.species()).all(|(&x, &s)| if s == 2 { x >= s2 } else { x >= s1 && x < s2 })
}

fn simulate(p: &SimulatePayload, seed: u64, budget: Option<u64>) -> Result<Outcome> {
    if let Some(b) = budget {
        if p.samples > b {
            return Err(Error::ResourceLimit { what: format!("{} Monte Carlo samples", p.samples), cap: b });
        }
    }
    let spec = p.spec(seed)?;
    let mk = |est: f64, se: f64| Evaluation { value: est, est_err: se, method: Method::Auto, evaluations: p.samples };
    match &p.event {
        Some(ev) => {
            let e = match ev {
                SimEvent::Config(c) => {
                    let target = c.build()?;
                    estimate_event(&spec, |x| *x == target)?
                }
                SimEvent::Wall { s1, s2 } => {
                    let (s1, s2) = (*s1, *s2);
                    estimate_event(&spec, move |x| wall_event(x, s1, s2))?
                }
            };
            let mut out = Outcome::of(mk(e.estimate, e.stderr));
            out.method = "monte_carlo".into();
            out.details = Some(json!({ "hits": e.hits, "samples": e.samples }));
            Ok(out)
        }
        None => {
            let dist = empirical_distribution(&spec)?;
            let n = p.samples as f64;
            let rows: Vec<TableRow> = dist
                .iter()
                .map(|(c, k)| TableRow { positions: c.positions().to_vec(), species: c.species().to_vec(), probability: *k as f64 / n })
                .collect();
            let mut out = Outcome::of(mk(1.0, 0.0));
            out.method = "monte_carlo".into();
            out.details = Some(json!({ "distinct": rows.len(), "samples": p.samples }));
            out.table = Some(rows);
            Ok(out)
        }
    }
}

/// Identity names that may be selected individually.
pub fn verify_names() -> Vec<&'static str> {
    vec![
        "free_evolution",
        "boundary_two_then_one",
        "boundary_one_then_two",
        "boundary_same_type",
        "u_factorization",
        "removable_poles",
        "nested_geometric",
        "symmetrization",
        "symmetrization_crossing",
        "symmetrization_bernoulli",
        "bernoulli_geometric",
        "initial_condition",
        "sum_to_unity",
        "f_anti_dominant",
        "block_factorization",
        "shift_stability",
        "f_to_symmetric",
        "determinant_at_q0",
        "orthogonality",
        "cauchy_truncated",
    ]
}

fn verify(p: &VerifyPayload, seed: u64) -> Result<Outcome> {
    if p.select.is_empty() {
        return Err(Error::InvalidInput("empty identity selection".into()));
    }
    let all = p.select.iter().any(|s| s == "all");
    let known = verify_names();
    for s in &p.select {
        if s != "all" && !known.contains(&s.as_str()) {
            return Err(Error::InvalidInput(format!("unknown identity {s:?}")));
        }
    }
    let summary = verify_all(&p.suite(seed))?;
    let chosen: Vec<&IdentityReport> = summary.reports.iter().filter(|r| all || p.select.contains(&r.name)).collect();
    let ok = chosen.iter().all(|r| r.pass) && !summary.negative_control.pass;
    let worst = chosen.iter().map(|r| r.max_rel_err / r.threshold).fold(0.0, f64::max);
    let samples: usize = chosen.iter().map(|r| r.samples).sum();
    let mut out = Outcome::of(Evaluation { value: if ok { 1.0 } else { 0.0 }, est_err: worst, method: Method::Auto, evaluations: samples as u64 });
    out.method = "identities".into();
    out.details = Some(json!({ "reports": chosen, "negative_control": summary.negative_control }));
    out.verified = Some(ok);
    Ok(out)
}

/// Run one configuration.
pub fn execute(cfg: &RunConfig, s: &RunSettings) -> Result<RunOutput> {
    let o = options(cfg, s);
    let seed = s.seed.or(cfg.seed);
    let start = Instant::now();
    let (outcome, used_seed) = match &cfg.payload {
        Payload::Green(p) => (green(p, &o)?, None),
        Payload::Crossing(p) => (crossing(p, &o)?, None),
        Payload::Wall(p) => (wall(p, &o)?, None),
        Payload::Simulate(p) => {
            let sd = seed.or(p.seed).unwrap_or(DEFAULT_SEED);
            (simulate(p, sd, s.budget)?, Some(sd))
        }
        Payload::Verify(p) => {
            let sd = seed.or(p.seed).unwrap_or(DEFAULT_SEED);
            (verify(p, sd)?, Some(sd))
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let input = match &cfg.payload {
        Payload::Green(p) => serde_json::to_value(p),
        Payload::Crossing(p) => serde_json::to_value(p),
        Payload::Wall(p) => serde_json::to_value(p),
        Payload::Simulate(p) => serde_json::to_value(p),
        Payload::Verify(p) => serde_json::to_value(p),
    }
    .map_err(|e| Error::InvalidInput(format!("echo: {e}")))?;
    let record = ResultRecord {
        command: cfg.payload.command().into(),
        input,
        value: outcome.eval.value,
        est_err: outcome.eval.est_err,
        method: outcome.method,
        evaluations: outcome.eval.evaluations,
        wall_clock_s: s.timing.then_some(elapsed),
        version: VERSION.into(),
        seed: used_seed,
        details: outcome.details,
    };
    Ok(RunOutput { record, table: outcome.table, verified: outcome.verified })
}

/// Run `f` on a pool with `threads` workers (or the global pool).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidInput("thread count must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
