use super::task1::Task1Report;
use super::RouteError;
use crate::decomposition::{build_hierarchy, BuildParams};
use crate::graph::{expander_split, Graph, SplitMap};
use crate::shuffler::{build_shufflers, ShufflerParams};
use crate::sorting::{Engine, EngineParams, Key, Scope, SortError, Token};

use super::preprocess::prepared_engine;

/// Routing on arbitrary connected graphs through their expander split.
#[derive(Clone, Debug)]
pub struct GeneralRouter {
    pub original: Graph,
    pub map: SplitMap,
    pub engine: Engine,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralOutcome {
    /// Final vertex id in the original graph, per request.
    pub finals: Vec<u64>,
    /// Final gadget slot in the split graph.
    pub gadget: Vec<usize>,
    /// `(L', succeeded)` per attempt.
    pub attempts: Vec<(usize, bool)>,
    pub report: Task1Report,
}

fn halts(e: &RouteError) -> bool {
    matches!(
        e,
        RouteError::SourceOverload { .. }
            | RouteError::DestinationOverload { .. }
            | RouteError::MarkerOverload { .. }
            | RouteError::PartOverload { .. }
            | RouteError::DummyShortfall { .. }
            | RouteError::Sort(SortError::RoundCap { .. })
            | RouteError::Sort(SortError::Overload { .. })
    )
}

impl GeneralRouter {
    pub fn build(g: &Graph, bp: &BuildParams, sp: &ShufflerParams, ep: EngineParams) -> Result<Self, RouteError> {
        let (split, map) = expander_split(g)?;
        let h = build_hierarchy(&split, bp)?;
        let sh = build_shufflers(&h, sp)?;
        let engine = prepared_engine(split, h, sh, ep)?;
        Ok(Self { original: g.clone(), map, engine })
    }

    /// Routes `(source id, destination id)` requests with every vertex the
    /// source and the destination of at most `deg(v)·L` tokens. With `l`
    /// unknown, `L' = 1, 2, 4, …` is tried until a run completes.
    pub fn route(&mut self, requests: &[(u64, u64)], l: Option<usize>) -> Result<GeneralOutcome, RouteError> {
        let g = &self.original;
        let mut src = Vec::with_capacity(requests.len());
        for &(a, b) in requests {
            let s = g.slot_of(a).ok_or(RouteError::UnknownDestination(a))?;
            g.slot_of(b).ok_or(RouteError::UnknownDestination(b))?;
            src.push(s);
        }
        let mut attempts = Vec::new();
        let mut lp = l.unwrap_or(1).max(1);
        loop {
            match self.attempt(requests, &src, lp) {
                Ok((gadget, report)) => {
                    attempts.push((lp, true));
                    let finals = gadget.iter().map(|&s| self.original.id(self.map.origin[s].0)).collect();
                    return Ok(GeneralOutcome { finals, gadget, attempts, report });
                }
                Err(e) if l.is_none() && halts(&e) && lp < requests.len().max(1) => {
                    attempts.push((lp, false));
                    lp *= 2;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn attempt(&mut self, requests: &[(u64, u64)], src: &[usize], l: usize) -> Result<(Vec<usize>, Task1Report), RouteError> {
        let g = &self.original;
        let mut per_src = vec![0usize; g.slots()];
        let mut per_dst = vec![0usize; g.slots()];
        let mut tokens = Vec::with_capacity(requests.len());
        for (k, (&(_, b), &s)) in requests.iter().zip(src).enumerate() {
            let d = g.slot_of(b).unwrap();
            per_src[s] += 1;
            per_dst[d] += 1;
            if per_src[s] > g.degree(s) as usize * l {
                return Err(RouteError::SourceOverload { vertex: g.id(s), load: per_src[s], cap: g.degree(s) as usize * l });
            }
            if per_dst[d] > g.degree(d) as usize * l {
                return Err(RouteError::DestinationOverload { dst: b, count: per_dst[d], cap: g.degree(d) as usize * l });
            }
            let at = self.map.gadget[s][(per_src[s] - 1) % self.map.gadget[s].len()];
            tokens.push(Token { id: k as u64, key: Key::one(b as i64), tag: k as i128, dst: b, at, ..Default::default() });
        }
        let e = &mut self.engine;
        e.begin_query();
        let slots = e.slots();
        let lw = crate::sorting::max_load(&tokens, slots) + 1;
        // every token learns deg(dst), then its serial among tokens to dst
        let n = tokens.len();
        let mut work = tokens.clone();
        for &v in g.members() {
            let at = self.map.gadget[v][0];
            work.push(Token {
                id: u64::MAX,
                key: Key::one(g.id(v) as i64),
                tag: -crate::sorting::SYNTHETIC_TAG + g.id(v) as i128,
                value: g.degree(v) as i64,
                at,
                dummy: true,
                ..Default::default()
            });
        }
        e.with_ctx("label", |e| e.local_propagation(Scope::Whole, &mut work, lw))?;
        let degs: Vec<u64> = work[..n].iter().map(|z| z.value as u64).collect();
        e.with_ctx("label", |e| e.local_serialization(Scope::Whole, &mut tokens, lw - 1))?;
        for (z, &deg) in tokens.iter_mut().zip(&degs) {
            let d = g.slot_of(z.dst).unwrap();
            let i = (z.serial % deg) as u32 + 1;
            z.dst = e.graph.id(self.map.split_slot(d, i));
        }
        let report = e.task1(&mut tokens, l)?;
        Ok((tokens.iter().map(|z| z.at).collect(), report))
    }
}
