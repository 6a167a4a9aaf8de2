use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::config::{profile, ConfigError, ExperimentConfig, Pattern, Task, Tier};
use super::generators::generate;
use super::instances::{route_tokens, routing_requests, sort_tokens};
use crate::decomposition::{build_hierarchy, validate_hierarchy};
use crate::equivalence::{dedup_bound, route_via_sort, sort_via_route, SortMode, ROUTE_VIA_SORT_CALLS};
use crate::graph::Graph;
use crate::routing::{prepared_engine, GeneralRouter, RouteError, Task3Report};
use crate::shuffler::{build_shufflers, decays, mixed, potential_f64, Shuffler};
use crate::sim::PhaseMetrics;
use crate::sorting::{loads, Engine, Key, Scope, SortError, Token};

/// One enabled assertion and its outcome.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Potential sequence of one shuffler.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialTrace {
    pub node: usize,
    pub t: usize,
    pub lambda: usize,
    pub lambda_max: u64,
    /// `Π(0), …, Π(λ)` as exact rationals.
    pub values: Vec<String>,
    pub approx: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryRecord {
    pub tokens: usize,
    pub rounds: u64,
    pub messages: u64,
    /// Opposite-primitive calls for the reductions, 0 otherwise.
    pub calls: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub name: String,
    pub config: String,
    pub phases: Vec<PhaseMetrics>,
    pub potentials: Vec<PotentialTrace>,
    pub queries: Vec<QueryRecord>,
    pub checks: Vec<Check>,
    pub oracle_column: bool,
    pub trace: Vec<String>,
    /// Excluded from every emitted file so that reruns are byte-identical.
    pub wall_ms: u128,
}

impl MetricsRecord {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            name: cfg.name.clone(),
            config: cfg.render(),
            phases: Vec::new(),
            potentials: Vec::new(),
            queries: Vec::new(),
            checks: Vec::new(),
            oracle_column: cfg.oracle_column,
            trace: Vec::new(),
            wall_ms: 0,
        }
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn take_engine(&mut self, e: &mut Engine) {
        self.phases = e.net.metrics().phases().to_vec();
        self.trace = e.net.take_trace();
    }

    fn phase_total(&self, prefix: &str) -> (u64, u64, u64, u64) {
        self.phases.iter().filter(|p| p.label.starts_with(prefix)).fold((0, 0, 0, 0), |a, p| {
            (a.0.saturating_add(p.rounds), a.1.saturating_add(p.modeled_rounds), a.2.saturating_add(p.messages), a.3.saturating_add(p.oracle_rounds))
        })
    }

    /// Machine-readable summary.
    pub fn summary(&self) -> Value {
        let totals = |p: &str| {
            let (r, m, msg, o) = self.phase_total(p);
            json!({ "rounds": r, "modeled_rounds": m, "messages": msg, "oracle_rounds": o })
        };
        let queries: Vec<Value> =
            self.queries.iter().map(|q| json!({ "tokens": q.tokens, "rounds": q.rounds, "messages": q.messages, "calls": q.calls })).collect();
        let checks: BTreeMap<&str, Value> =
            self.checks.iter().map(|c| (c.name.as_str(), json!({ "passed": c.passed, "detail": c.detail }))).collect();
        let pots: Vec<Value> = self
            .potentials
            .iter()
            .map(|p| json!({ "node": p.node, "t": p.t, "lambda": p.lambda, "lambda_max": p.lambda_max, "final": format!("{:.6e}", p.approx.last().copied().unwrap_or(0.0)) }))
            .collect();
        json!({
            "name": self.name,
            "passed": self.passed(),
            "preprocess": totals("preprocess"),
            "query": totals("query"),
            "queries": queries,
            "checks": checks,
            "shufflers": pots,
        })
    }

    /// One structured-text record per phase, then the checks.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for p in &self.phases {
            let _ = write!(s, "phase={} rounds={} modeled_rounds={} messages={} max_edge_load={} runs={}", p.label, p.rounds, p.modeled_rounds, p.messages, p.max_edge_load, p.runs);
            if self.oracle_column {
                let _ = write!(s, " oracle_rounds={} oracle_calls={}", p.oracle_rounds, p.oracle_calls);
            }
            s.push('\n');
        }
        for c in &self.checks {
            let _ = writeln!(s, "check={} result={} detail={}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
        }
        s
    }

    pub fn potential_text(&self) -> String {
        let mut s = String::new();
        for p in &self.potentials {
            for (i, v) in p.values.iter().enumerate() {
                let _ = writeln!(s, "node={} t={} i={} pi~{:.6e} pi={}", p.node, p.t, i, p.approx[i], v);
            }
        }
        s
    }

    /// `DIR/NAME/{config.txt, phases.txt, potentials.txt, summary.json, trace.txt}`.
    pub fn write_outputs(&self, dir: &Path) -> std::io::Result<()> {
        let d = dir.join(&self.name);
        std::fs::create_dir_all(&d)?;
        std::fs::write(d.join("config.txt"), &self.config)?;
        std::fs::write(d.join("phases.txt"), self.render())?;
        std::fs::write(d.join("potentials.txt"), self.potential_text())?;
        let mut js = serde_json::to_string_pretty(&self.summary()).expect("json");
        js.push('\n');
        std::fs::write(d.join("summary.json"), js)?;
        if !self.trace.is_empty() {
            std::fs::write(d.join("trace.txt"), self.trace.join("\n") + "\n")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentError {
    pub phase: String,
    pub message: String,
    pub partial: Box<MetricsRecord>,
}

impl std::fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.phase, self.message)
    }
}

impl std::error::Error for ExperimentError {}

fn fail(rec: &MetricsRecord, phase: &str, msg: impl std::fmt::Display) -> ExperimentError {
    ExperimentError { phase: phase.into(), message: msg.to_string(), partial: Box::new(rec.clone()) }
}

fn is_cap(e: &RouteError) -> bool {
    matches!(e, RouteError::Sort(SortError::RoundCap { .. }))
}

fn potentials(sh: &BTreeMap<usize, Shuffler>) -> Vec<PotentialTrace> {
    sh.values()
        .map(|s| PotentialTrace { node: s.node, t: s.t, lambda: s.lambda(), lambda_max: s.lambda_max, values: s.potentials.iter().map(|p| p.to_string()).collect(), approx: s.potentials.iter().map(potential_f64).collect() })
        .collect()
}

fn shuffler_checks(rec: &mut MetricsRecord, sh: &BTreeMap<usize, Shuffler>) {
    for s in sh.values() {
        let start = s.potentials[0] == crate::Rational::from_integer((s.t as i64 - 1).into());
        let decay = s.iterations.iter().filter(|it| it.saturated).all(|it| decays(&it.pi_before, &it.pi_after));
        let done = mixed(s.final_potential(), s.n) && s.lambda() as u64 <= s.lambda_max;
        rec.check(format!("shuffler[{}]:start", s.node), start, format!("pi0={}", s.potentials[0]));
        rec.check(format!("shuffler[{}]:decay", s.node), decay, format!("iterations={}", s.lambda()));
        rec.check(format!("shuffler[{}]:mixed", s.node), done, format!("lambda={} lambda_max={}", s.lambda(), s.lambda_max));
    }
}

fn disperse_checks(rec: &mut MetricsRecord, e: &Engine, reports: &[Task3Report], tier: Tier) {
    let (mut parts, mut vertex, mut sandwich, mut window, mut dominated) = (true, true, 0usize, true, true);
    let mut seen = std::collections::HashSet::new();
    for r in reports {
        let sh = &e.shufflers[&r.node];
        let size = e.hierarchy.node(r.node).vertices.len();
        for (d, l) in [(&r.reals, r.l), (&r.dummies, 2 * r.l * r.multiplier)] {
            if !seen.insert((d, l)) {
                continue;
            }
            parts &= d.part_bound_holds();
            vertex &= d.vertex_bound_holds(l);
            sandwich += d.sandwich_violations(sh);
            window &= d.window_holds(size);
        }
        dominated &= r.dominated;
    }
    let n = reports.len();
    rec.check("disperse:part-bound", parts, format!("runs={n}"));
    rec.check("disperse:vertex-bound", vertex, format!("runs={n}"));
    rec.check("disperse:sandwich", sandwich == 0, format!("violations={sandwich}"));
    if tier == Tier::PaperRegime {
        rec.check("disperse:window", window, format!("runs={n}"));
        rec.check("disperse:domination", dominated, format!("runs={n}"));
    }
}

/// Slots grouped by vertex: keys on a smaller-ID vertex never exceed keys on a larger one.
pub fn sorted_by_vertex(g: &Graph, tokens: &[Token]) -> bool {
    let mut v: Vec<(u64, Key, i128)> = tokens.iter().map(|z| (g.id(z.at), z.key, z.tag)).collect();
    v.sort();
    let mut hi: Option<(Key, i128)> = None;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j].0 == v[i].0 {
            j += 1;
        }
        let lo = v[i..j].iter().map(|x| (x.1, x.2)).min().unwrap();
        if hi.is_some_and(|h| h > lo) {
            return false;
        }
        hi = v[i..j].iter().map(|x| (x.1, x.2)).max();
        i = j;
    }
    true
}

fn multiset(tokens: &[Token]) -> Vec<(u64, Key, i128, i64)> {
    let mut v: Vec<_> = tokens.iter().map(|z| (z.id, z.key, z.tag, z.value)).collect();
    v.sort();
    v
}

fn delivered(g: &Graph, tokens: &[Token]) -> usize {
    tokens.iter().filter(|z| g.id(z.at) != z.dst).count()
}

fn max_of(tokens: &[Token], slots: usize) -> usize {
    loads(tokens, slots).into_iter().max().unwrap_or(0)
}

fn rng_for(cfg: &ExperimentConfig, q: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(q as u64 + 1))
}

/// Preprocesses once, then runs `cfg.queries` instances of the task.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsRecord, ExperimentError> {
    let t0 = Instant::now();
    let mut rec = MetricsRecord::new(cfg);
    let g = generate(&cfg.family, cfg.n, cfg.seed).map_err(|e| fail(&rec, "generate", e))?;
    let mut ep = cfg.engine_params();
    ep.keep_reports = true;
    let mut runner = if cfg.task == Task::Task1General {
        let r = GeneralRouter::build(&g, &cfg.build_params(), &cfg.shuffler_params(), ep).map_err(|e| fail(&rec, "preprocess", e))?;
        rec.potentials = potentials(&r.engine.shufflers);
        Runner::General(Box::new(r))
    } else {
        let h = build_hierarchy(&g, &cfg.build_params()).map_err(|e| fail(&rec, "decompose", e))?;
        let v = validate_hierarchy(&h, &g);
        rec.check("hierarchy:valid", v.is_clean(), format!("checks={} violations={}", v.checks, v.violations.len()));
        let sh = build_shufflers(&h, &cfg.shuffler_params()).map_err(|e| fail(&rec, "shuffle", e))?;
        shuffler_checks(&mut rec, &sh);
        rec.potentials = potentials(&sh);
        Runner::Plain(Box::new(prepared_engine(g.clone(), h, sh, ep).map_err(|e| fail(&rec, "preprocess", e))?))
    };
    let e = runner.engine();
    e.net.set_trace(cfg.trace);
    let before = e.net.metrics().sum_prefix("preprocess");
    let labels = e.net.metrics().phases().iter().filter(|p| p.label.starts_with("preprocess")).count();
    let mut reports = Vec::new();

    for q in 0..cfg.queries {
        let mut rng = rng_for(cfg, q);
        runner.engine().begin_query();
        let sent = runner.engine().net.metrics().sum_prefix("query").messages;
        let out = match &mut runner {
            Runner::General(r) => query_general(r, &g, cfg, &mut rng, &mut rec),
            Runner::Plain(e) => query(e, &g, cfg, &mut rng, &mut rec),
        };
        let e = runner.engine();
        reports.extend(e.take_task3_reports());
        match out {
            Ok(qr) => {
                let messages = e.net.metrics().sum_prefix("query").messages - sent;
                rec.queries.push(QueryRecord { rounds: e.query_rounds(), messages, ..qr })
            }
            Err(err) => {
                rec.take_engine(e);
                rec.wall_ms = t0.elapsed().as_millis();
                let phase = if is_cap(&err) { "timeout" } else { "query" };
                return Err(fail(&rec, phase, format!("query {q}: {err}")));
            }
        }
    }

    let e = runner.engine();
    let after = e.net.metrics().sum_prefix("preprocess");
    let labels_after = e.net.metrics().phases().iter().filter(|p| p.label.starts_with("preprocess")).count();
    rec.check(
        "separation:no-preprocess-in-queries",
        before == after && labels == labels_after,
        format!("preprocess_labels={labels} queries={}", cfg.queries),
    );
    if !reports.is_empty() {
        disperse_checks(&mut rec, e, &reports, cfg.tier);
    }
    rec.take_engine(e);
    rec.wall_ms = t0.elapsed().as_millis();
    Ok(rec)
}

enum Runner {
    Plain(Box<Engine>),
    General(Box<GeneralRouter>),
}

impl Runner {
    fn engine(&mut self) -> &mut Engine {
        match self {
            Runner::Plain(e) => e,
            Runner::General(r) => &mut r.engine,
        }
    }
}

fn query(e: &mut Engine, g: &Graph, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, rec: &mut MetricsRecord) -> Result<QueryRecord, RouteError> {
    let l = cfg.l;
    let slots = e.slots();
    match cfg.task {
        Task::Task1 | Task::RouteViaSort | Task::RouteViaSortBlackBox => {
            let req = routing_requests(g, cfg.pattern, &|_| l, rng);
            let mut toks = route_tokens(g, &req);
            let (name, calls) = match cfg.task {
                Task::Task1 => {
                    e.task1(&mut toks, l)?;
                    ("task1", 0)
                }
                Task::RouteViaSort => {
                    let b = route_via_sort(e, &mut toks, l, SortMode::Comparison)?;
                    rec.check(format!("route-via-sort[{}]:calls", rec.queries.len()), b.calls == ROUTE_VIA_SORT_CALLS, format!("sorts={} expected={ROUTE_VIA_SORT_CALLS}", b.calls));
                    ("route-via-sort", b.calls)
                }
                _ => {
                    let b = route_via_sort(e, &mut toks, l, SortMode::BlackBox)?;
                    let bound = dedup_bound(g.n(), l);
                    rec.check(format!("route-via-sort-blackbox[{}]:dedup", rec.queries.len()), b.dedup_iterations <= bound, format!("iterations={} bound={bound}", b.dedup_iterations));
                    ("route-via-sort-blackbox", b.calls)
                }
            };
            let q = rec.queries.len();
            rec.check(format!("{name}[{q}]:delivered"), delivered(g, &toks) == 0, format!("undelivered={}", delivered(g, &toks)));
            let m = max_of(&toks, slots);
            rec.check(format!("{name}[{q}]:load"), m <= l, format!("max_load={m} L={l}"));
            Ok(QueryRecord { tokens: toks.len(), rounds: 0, messages: 0, calls })
        }
        Task::Sort | Task::SortViaRoute => {
            let pattern = if cfg.pattern == Pattern::Duplicates { Pattern::Duplicates } else { Pattern::Distinct };
            let mut toks = sort_tokens(g, pattern, l, rng);
            let want = multiset(&toks);
            let q = rec.queries.len();
            let (name, calls) = if cfg.task == Task::Sort {
                e.expander_sort(Scope::Whole, &mut toks, l)?;
                ("sort", 0)
            } else {
                let b = sort_via_route(e, &mut toks, l, |e, t, l| e.task1(t, l).map(|_| ()))?;
                let ok = b.calls <= 2 * b.layers as u64 && b.rank_calls <= 2 * b.layers as u64 + 1;
                rec.check(format!("sort-via-route[{q}]:calls"), ok, format!("calls={} rank_calls={} depth={}", b.calls, b.rank_calls, b.layers));
                ("sort-via-route", b.calls)
            };
            rec.check(format!("{name}[{q}]:conserved"), multiset(&toks) == want, format!("tokens={}", toks.len()));
            rec.check(format!("{name}[{q}]:ordered"), sorted_by_vertex(g, &toks), String::new());
            let m = max_of(&toks, slots);
            rec.check(format!("{name}[{q}]:load"), m <= l, format!("max_load={m} L={l}"));
            Ok(QueryRecord { tokens: toks.len(), rounds: 0, messages: 0, calls })
        }
        Task::Task1General => unreachable!(),
    }
}

fn query_general(r: &mut GeneralRouter, g: &Graph, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng, rec: &mut MetricsRecord) -> Result<QueryRecord, RouteError> {
    let l = cfg.l;
    let req: Vec<(u64, u64)> = routing_requests(g, cfg.pattern, &|v| g.degree(v) as usize * l, rng).into_iter().map(|(s, d)| (g.id(s), d)).collect();
    let out = r.route(&req, Some(l))?;
    let q = rec.queries.len();
    let bad = req.iter().zip(&out.finals).filter(|((_, d), f)| d != *f).count();
    rec.check(format!("task1-general[{q}]:delivered"), bad == 0, format!("undelivered={bad} attempts={}", out.attempts.len()));
    let mut per = vec![0usize; g.slots()];
    for &f in &out.finals {
        per[g.slot_of(f).unwrap()] += 1;
    }
    let over = g.members().iter().filter(|&&v| per[v] > g.degree(v) as usize * l).count();
    rec.check(format!("task1-general[{q}]:load"), over == 0, format!("overloaded={over}"));
    let m = loads(&out.gadget.iter().map(|&s| Token { at: s, ..Default::default() }).collect::<Vec<_>>(), r.engine.slots()).into_iter().max().unwrap_or(0);
    rec.check(format!("task1-general[{q}]:gadget-load"), m <= out.report.l, format!("max_load={m} L'={}", out.report.l));
    Ok(QueryRecord { tokens: req.len(), rounds: 0, messages: 0, calls: 0 })
}

/// Runs every config of the profile; returns the table and whether all passed.
pub fn bench_suite(name: &str, out: Option<&Path>) -> Result<(String, bool), ConfigError> {
    let cfgs = profile(name)?;
    let results: Mutex<Vec<Option<Result<MetricsRecord, ExperimentError>>>> = Mutex::new(vec![None; cfgs.len()]);
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(cfgs.len()).max(1);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= cfgs.len() {
                    break;
                }
                let r = run_experiment(&cfgs[i]);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut table = String::new();
    let _ = writeln!(table, "{:<34} {:>6} {:>7} {:>22} {:>8} {:>9}", "experiment", "result", "checks", "query_rounds", "failed", "wall_ms");
    let mut all = true;
    for r in results.into_inner().unwrap().into_iter().map(Option::unwrap) {
        let (rec, err) = match r {
            Ok(rec) => (rec, None),
            Err(e) => (*e.partial.clone(), Some(e)),
        };
        let ok = err.is_none() && rec.passed();
        all &= ok;
        let qr: u64 = rec.queries.iter().fold(0u64, |a, q| a.saturating_add(q.rounds));
        let failed = rec.failures().len() + err.is_some() as usize;
        let _ = writeln!(table, "{:<34} {:>6} {:>7} {:>22} {:>8} {:>9}", rec.name, if ok { "pass" } else { "FAIL" }, rec.checks.len(), qr, failed, rec.wall_ms);
        if let Some(e) = &err {
            let _ = writeln!(table, "  error: {e}");
        }
        for c in rec.failures() {
            let _ = writeln!(table, "  failed: {} {}", c.name, c.detail);
        }
        if let Some(dir) = out {
            let _ = rec.write_outputs(dir);
        }
    }
    Ok((table, all))
}
