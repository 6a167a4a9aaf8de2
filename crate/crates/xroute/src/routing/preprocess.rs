use std::collections::BTreeMap;
use std::sync::Arc;

use super::disperse::Schedule;
use super::task1::Delegation;
use super::RouteError;
use crate::decomposition::{Hierarchy, NodeKind};
use crate::graph::Graph;
use crate::shuffler::Shuffler;
use crate::sorting::{max_load, Engine, EngineParams, Phase, RouteTable, Scope, ScopeData, Token};

/// Engine with every scope, schedule and delegation route prepared.
pub fn prepared_engine(g: Graph, h: Hierarchy, shufflers: BTreeMap<usize, Shuffler>, params: EngineParams) -> Result<Engine, RouteError> {
    let mut e = Engine::new(g, h, shufflers, params);
    prepare(&mut e)?;
    Ok(e)
}

/// Order-preserving all-to-best route of a scope hosted by an internal node:
/// one token per vertex sent by Task 2 to `best[rank / ρ]`.
pub fn build_order_preserving_route(e: &mut Engine, sd: &ScopeData) -> Result<RouteTable, RouteError> {
    let target: Vec<usize> = (0..sd.len()).map(|r| r / sd.rho).collect();
    let entry: std::collections::HashMap<usize, usize> = sd.attach.iter().copied().collect();
    let mut tokens: Vec<Token> = sd
        .vertices
        .iter()
        .zip(&target)
        .enumerate()
        .map(|(r, (&v, &b))| Token { id: r as u64, tag: r as i128, dest_mark: b, at: entry.get(&v).copied().unwrap_or(v), ..Default::default() })
        .collect();
    let slots = e.slots();
    let l = max_load(&tokens, slots).max(sd.rho.div_ceil(e.rho_best_ceil()));
    let (r, rounds, messages) = e.measure(|e| e.with_ctx("route", |e| e.task2(sd.host, &mut tokens, l)));
    r?;
    for (z, &b) in tokens.iter().zip(&target) {
        if z.at != sd.best[b] {
            return Err(RouteError::Undelivered { token: z.id, at: e.graph.id(z.at), want: e.graph.id(sd.best[b]) });
        }
    }
    Ok(RouteTable { target, rounds, messages, paths: None })
}

fn install(e: &mut Engine, scope: Scope) -> Result<(), RouteError> {
    let mut sd = e.scope_geometry(scope)?;
    if sd.route.is_none() {
        sd.route = Some(build_order_preserving_route(e, &sd)?);
    }
    e.install_scope(sd)?;
    Ok(())
}

/// Preprocessing: schedules, sort scopes bottom-up, then the delegation routes.
pub fn prepare(e: &mut Engine) -> Result<(), RouteError> {
    let prev = e.phase();
    e.set_phase(Phase::Preprocess);
    let r = prepare_inner(e);
    e.set_phase(prev);
    r
}

fn prepare_inner(e: &mut Engine) -> Result<(), RouteError> {
    let mut schedules = Vec::new();
    for (&x, sh) in &e.shufflers {
        schedules.push((x, Arc::new(Schedule::from_shuffler(&e.hierarchy, sh))));
    }
    e.routing.schedules.extend(schedules);

    // vertices learn their identifier rank by a BFS-tree in-order count
    let d = e.diameter();
    let n = e.graph.n() as u64;
    e.charge("sort:bootstrap", 2 * d, 2 * n);

    let mut order = e.hierarchy.good_nodes();
    order.sort_by_key(|&x| std::cmp::Reverse(e.hierarchy.nodes[x].level));
    for x in order {
        let node = &e.hierarchy.nodes[x];
        if node.kind == NodeKind::GoodTerminal {
            install(e, Scope::Node(x))?;
        } else {
            if !e.routing.schedules.contains_key(&x) {
                return Err(RouteError::Prepare(format!("node {x} has no shuffler")));
            }
            for i in 0..node.parts.len() {
                install(e, Scope::Part(x, i))?;
            }
        }
    }
    install(e, Scope::Whole)?;

    // one token per vertex, sent to the best vertex that will serve it
    let root = e.hierarchy.root;
    let best = e.hierarchy.nodes[root].best.clone();
    let ordered = e.graph.by_id_order(e.graph.members());
    let mut vertex_rank = vec![u32::MAX; e.slots()];
    for (r, &v) in ordered.iter().enumerate() {
        vertex_rank[v] = r as u32;
    }
    let mut tokens: Vec<Token> = ordered
        .iter()
        .enumerate()
        .map(|(r, &v)| Token { id: r as u64, tag: r as i128, dest_mark: r % best.len(), at: v, ..Default::default() })
        .collect();
    let (r, rounds, messages) = e.measure(|e| {
        e.with_ctx("delegate", |e| {
            e.hop_to_root(&mut tokens);
            let per = ordered.len().div_ceil(best.len());
            let l = max_load(&tokens, e.slots()).max(per.div_ceil(e.rho_best_ceil()));
            e.task2(root, &mut tokens, l)
        })
    });
    r?;
    e.routing.delegation = Some(Arc::new(Delegation { best, vertex_rank, rounds, messages }));
    Ok(())
}
