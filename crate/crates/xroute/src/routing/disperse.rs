use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

use super::RouteError;
use crate::decomposition::Hierarchy;
use crate::graph::Graph;
use crate::shuffler::Shuffler;
use crate::sorting::{loads, max_load, Engine, Key, Scope, Token, SYNTHETIC_TAG};

/// One shuffler matching with its embedding in `H_X`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShuffleStep {
    pub pairs: Vec<(usize, usize)>,
    pub paths: Vec<Vec<usize>>,
    /// `c_ij` of the natural fractional matching.
    pub counts: BTreeMap<(usize, usize), u64>,
}

/// The shuffler of a node in the form the dispersal consumes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub node: usize,
    pub t: usize,
    pub part_of: Vec<usize>,
    pub part_sizes: Vec<usize>,
    pub steps: Vec<ShuffleStep>,
    /// `m_ij / 2 = c_ij · num / den`.
    pub num: u64,
    pub den: u64,
}

impl Schedule {
    pub fn from_shuffler(h: &Hierarchy, sh: &Shuffler) -> Self {
        let steps = sh
            .iterations
            .iter()
            .map(|it| ShuffleStep { pairs: it.matching.clone(), paths: it.embedding.paths.clone(), counts: it.fractional.counts.clone() })
            .collect();
        // x/2 = c / (2n'), n' = a/b
        let half = BigRational::new(BigInt::from(1), BigInt::from(2)) / &sh.n_prime;
        Self {
            node: sh.node,
            t: sh.t,
            part_of: h.part_of(sh.node),
            part_sizes: h.part_sets(sh.node).iter().map(|s| s.len()).collect(),
            steps,
            num: half.numer().to_u64().unwrap(),
            den: half.denom().to_u64().unwrap(),
        }
    }

    pub fn lambda(&self) -> usize {
        self.steps.len()
    }

    /// `⌊(m_ij/2)·size⌋` for `m_ij = c / n'`.
    pub fn send(&self, c: u64, size: u64) -> u64 {
        (c as u128 * size as u128 * self.num as u128 / self.den as u128) as u64
    }
}

/// Portals of part `i` for one shuffler iteration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PortalPlan {
    pub part: usize,
    /// Destination part `j` → `P_{i,j}` in identifier order as
    /// (portal, partner in `X*_j`, pair index).
    pub groups: BTreeMap<usize, Vec<(usize, usize, usize)>>,
}

impl PortalPlan {
    pub fn build(g: &Graph, sched: &Schedule, q: usize, i: usize) -> Self {
        let mut groups: BTreeMap<usize, Vec<(usize, usize, usize)>> = BTreeMap::new();
        for (k, &(a, b)) in sched.steps[q].pairs.iter().enumerate() {
            let (pa, pb) = (sched.part_of[a], sched.part_of[b]);
            if pa == pb {
                continue;
            }
            if pa == i {
                groups.entry(pb).or_default().push((a, b, k));
            } else if pb == i {
                groups.entry(pa).or_default().push((b, a, k));
            }
        }
        for v in groups.values_mut() {
            v.sort_by_key(|e| g.id(e.0));
        }
        Self { part: i, groups }
    }

    /// `|P_{i,j}|`, equal to `c_ij`.
    pub fn size(&self, j: usize) -> usize {
        self.groups.get(&j).map(|v| v.len()).unwrap_or(0)
    }
}

/// Per-iteration record of a dispersal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DisperseReport {
    pub node: usize,
    pub t: usize,
    /// `T^q[i][l]`: tokens of mark `l` in part `i`, for `q = 0..=λ`.
    pub counts: Vec<Vec<Vec<u64>>>,
    /// Largest vertex load, for `q = 0..=λ`.
    pub max_load: Vec<usize>,
    /// Tokens crossing between parts in each iteration.
    pub moved: Vec<u64>,
}

impl DisperseReport {
    pub fn lambda(&self) -> usize {
        self.counts.len() - 1
    }

    /// `N_i^q`.
    pub fn part_totals(&self, q: usize) -> Vec<u64> {
        self.counts[q].iter().map(|r| r.iter().sum()).collect()
    }

    /// `N_l`, tokens of each mark.
    pub fn mark_totals(&self) -> Vec<u64> {
        (0..self.t).map(|l| self.counts[0].iter().map(|r| r[l]).sum()).collect()
    }

    /// `N_i^q ≤ N_max + t²q` for all `i, q`.
    pub fn part_bound_holds(&self) -> bool {
        let n_max = self.part_totals(0).into_iter().max().unwrap_or(0);
        let t2 = (self.t * self.t) as u64;
        (0..self.counts.len()).all(|q| self.part_totals(q).iter().all(|&n| n <= n_max + t2 * q as u64))
    }

    /// Vertex loads never exceed `19λL`.
    pub fn vertex_bound_holds(&self, l: usize) -> bool {
        let cap = 19 * self.lambda().max(1) * l;
        self.max_load.iter().all(|&m| m <= cap)
    }

    /// Dispersed-configuration window
    /// `0.9·N_j/t − 0.1·|X|/t² ≤ |T_{i,j}| ≤ 1.1·N_j/t + 0.1·|X|/t²`, exactly.
    pub fn window_holds(&self, x_size: usize) -> bool {
        let t = self.t as i128;
        let x = x_size as i128;
        let last = self.counts.last().unwrap();
        self.mark_totals().iter().enumerate().all(|(j, &nj)| {
            let nj = nj as i128;
            last.iter().all(|row| {
                let c = 10 * t * t * row[j] as i128;
                9 * nj * t - x <= c && c <= 11 * nj * t + x
            })
        })
    }
}

/// Dummies dispersed from their home parts, reused across queries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DummyDispersal {
    pub node: usize,
    pub per_vertex: usize,
    pub tokens: Vec<Token>,
    pub homes: Vec<usize>,
    pub report: DisperseReport,
    pub rounds: u64,
    pub messages: u64,
}

/// Tags of dispersal dummies, above every fresh engine tag.
pub(crate) fn dummy_tag(copy: usize, slot: usize, slots: usize) -> i128 {
    2 * SYNTHETIC_TAG + (copy * slots + slot) as i128
}

fn count_matrix(tokens: &[Token], part_of: &[usize], t: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; t]; t];
    for z in tokens {
        m[part_of[z.at]][z.part_mark] += 1;
    }
    m
}

impl Engine {
    pub fn schedule(&self, x: usize) -> Result<Arc<Schedule>, RouteError> {
        self.routing.schedules.get(&x).cloned().ok_or(RouteError::NotInternal(x))
    }

    /// Moves the selected tokens of one part to their portals. Returns, per
    /// token, its new slot and, when it is to cross, `(j, pair index)`.
    pub fn route_to_portals(&mut self, x: usize, plan: &PortalPlan, sched: &Schedule, tokens: &[Token]) -> Result<Vec<(usize, Option<(usize, usize)>)>, RouteError> {
        let scope = Scope::Part(x, plan.part);
        let mut out: Vec<(usize, Option<(usize, usize)>)> = tokens.iter().map(|z| (z.at, None)).collect();
        if tokens.is_empty() || plan.groups.is_empty() {
            return Ok(out);
        }
        let slots = self.slots();
        let mut work: Vec<Token> = tokens.to_vec();
        for z in work.iter_mut() {
            z.key = Key::one(z.part_mark as i64);
        }
        let l = max_load(&work, slots);
        self.local_aggregation(scope, &mut work, l)?;
        self.local_serialization(scope, &mut work, l)?;

        let mut movers: Vec<usize> = Vec::new();
        let mut group: Vec<usize> = Vec::new();
        for (k, z) in work.iter().enumerate() {
            let mut off = 0u64;
            for (&j, ports) in &plan.groups {
                let s = sched.send(ports.len() as u64, z.count);
                if z.serial >= off && z.serial < off + s {
                    movers.push(k);
                    group.push(j);
                    break;
                }
                off += s;
            }
        }
        if movers.is_empty() {
            return Ok(out);
        }
        let mut sub: Vec<Token> = movers
            .iter()
            .zip(&group)
            .map(|(&k, &j)| {
                let mut z = work[k].clone();
                z.key = Key::one(j as i64);
                z
            })
            .collect();
        let l = max_load(&sub, slots);
        self.local_serialization(scope, &mut sub, l)?;
        let chi: Vec<(usize, usize)> = sub
            .iter()
            .zip(&group)
            .map(|(z, &j)| {
                let p = plan.size(j) as u64;
                ((z.serial % p) as usize, (z.serial / p) as usize)
            })
            .collect();

        // one marker per portal learns how many tokens it will receive
        let mut agg: Vec<Token> = sub
            .iter()
            .zip(&group)
            .zip(&chi)
            .map(|((z, &j), &(c, _))| Token { key: Key::pair(j as i64, c as i64), ..z.clone() })
            .collect();
        let mut marker_of = Vec::new();
        for (&j, ports) in &plan.groups {
            for (s, &(v, _, _)) in ports.iter().enumerate() {
                marker_of.push((j, s, agg.len()));
                let tag = self.fresh_tag();
                agg.push(Token { key: Key::pair(j as i64, s as i64), tag, at: v, dummy: true, ..Default::default() });
            }
        }
        let l = max_load(&agg, slots);
        self.local_aggregation(scope, &mut agg, l)?;

        let mut reals: Vec<Token> =
            sub.iter().zip(&group).zip(&chi).map(|((z, &j), &(c, i))| Token { key: Key::triple(j as i64, c as i64, i as i64), ..z.clone() }).collect();
        let mut dummies = Vec::new();
        for &(j, s, m) in &marker_of {
            let sigma = agg[m].count - 1;
            let v = plan.groups[&j][s].0;
            for a in 0..sigma {
                let tag = self.fresh_tag();
                dummies.push(Token { key: Key::triple(j as i64, s as i64, a as i64), tag, at: v, dummy: true, ..Default::default() });
            }
        }
        if dummies.len() != reals.len() {
            return Err(RouteError::Prepare(format!("part {}: {} portal slots for {} tokens", plan.part, dummies.len(), reals.len())));
        }
        let l = max_load(&reals, slots).max(max_load(&dummies, slots));
        let _ = self.expander_sort(scope, &mut reals, l)?;
        let dtr = self.expander_sort(scope, &mut dummies, l)?;
        let by_key: HashMap<Key, usize> = dummies.iter().enumerate().map(|(i, d)| (d.key, i)).collect();
        for (mi, r) in reals.iter().enumerate() {
            let d = by_key[&r.key];
            if dummies[d].at != r.at {
                return Err(RouteError::Prepare(format!("token {} not co-located with its dummy", r.id)));
            }
            let j = group[mi];
            let Key::Fin(_, s, _) = r.key else { unreachable!() };
            let (portal, _, pair) = plan.groups[&j][s as usize];
            debug_assert_eq!(dtr.initial_at[d], portal);
            out[movers[mi]] = (portal, Some((j, pair)));
        }
        // the dummies' reversed routes carry the real tokens
        let sd = self.scope(scope)?;
        let (r, m) = self.sort_cost(&sd, l);
        self.charge("sort:revert", r, m);
        Ok(out)
    }

    /// Runs the shuffler's matchings over `tokens` by their part marks.
    pub fn disperse(&mut self, x: usize, tokens: &mut [Token]) -> Result<DisperseReport, RouteError> {
        let sched = self.schedule(x)?;
        let t = sched.t;
        let slots = self.slots();
        for z in tokens.iter() {
            if sched.part_of.get(z.at).is_none_or(|&p| p == usize::MAX) {
                return Err(crate::sorting::SortError::OutsideScope { token: z.id, slot: z.at }.into());
            }
            if z.part_mark >= t {
                return Err(crate::sorting::SortError::Contract(format!("token {} has part mark {} of {t}", z.id, z.part_mark)).into());
            }
        }
        let mut counts = vec![count_matrix(tokens, &sched.part_of, t)];
        let mut max_loads = vec![max_load(tokens, slots)];
        let mut moved = Vec::new();
        for q in 0..sched.lambda() {
            let plans: Vec<PortalPlan> = (0..t).map(|i| PortalPlan::build(&self.graph, &sched, q, i)).collect();
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); t];
            for (k, z) in tokens.iter().enumerate() {
                members[sched.part_of[z.at]].push(k);
            }
            let results = self.parallel(t, |e, i| {
                let part: Vec<Token> = members[i].iter().map(|&k| tokens[k].clone()).collect();
                e.route_to_portals(x, &plans[i], &sched, &part)
            })?;
            let mut per_pair = vec![0u64; sched.steps[q].pairs.len()];
            let mut crossing = 0;
            for (i, res) in results.into_iter().enumerate() {
                for (&k, (at, go)) in members[i].iter().zip(res) {
                    tokens[k].at = at;
                    if let Some((j, pair)) = go {
                        let (a, b) = sched.steps[q].pairs[pair];
                        tokens[k].at = if at == a { b } else { a };
                        debug_assert_eq!(sched.part_of[tokens[k].at], j);
                        per_pair[pair] += 1;
                        crossing += 1;
                    }
                }
            }
            let paths: Vec<&[usize]> = sched.steps[q].paths.iter().map(|p| p.as_slice()).collect();
            let (r, m) = self.weighted_batch_cost(Some(x), &paths, &per_pair);
            self.charge("disperse:cross", r, m);
            counts.push(count_matrix(tokens, &sched.part_of, t));
            max_loads.push(loads(tokens, slots).into_iter().max().unwrap_or(0));
            moved.push(crossing);
            self.check_cap()?;
        }
        Ok(DisperseReport { node: x, t, counts, max_load: max_loads, moved })
    }

    /// `per_vertex` dummies on every vertex of every part, marked with their
    /// home part and dispersed. Computed once per `(x, per_vertex)`.
    pub fn dummy_dispersal(&mut self, x: usize, per_vertex: usize) -> Result<Arc<DummyDispersal>, RouteError> {
        if let Some(d) = self.routing.dummies.get(&(x, per_vertex)) {
            return Ok(d.clone());
        }
        let slots = self.slots();
        let sets = self.hierarchy.part_sets(x);
        let mut tokens = Vec::new();
        for a in 0..per_vertex {
            for (j, s) in sets.iter().enumerate() {
                for &v in s {
                    tokens.push(Token { id: u64::MAX - tokens.len() as u64, tag: dummy_tag(a, v, slots), part_mark: j, at: v, dummy: true, ..Default::default() });
                }
            }
        }
        let homes: Vec<usize> = tokens.iter().map(|z| z.at).collect();
        let (report, rounds, messages) = self.measure_silent(|e| e.with_ctx("disperse", |e| e.disperse(x, &mut tokens)));
        let d = Arc::new(DummyDispersal { node: x, per_vertex, tokens, homes, report: report?, rounds, messages });
        self.routing.dummies.insert((x, per_vertex), d.clone());
        Ok(d)
    }
}

impl DisperseReport {
    /// Entries outside `R_{M^q}·T^{q−1} ± t` over all iterations, exactly.
    /// With `n' = a/b`, `2a·R_ij = c_ij·b` off the diagonal, so everything
    /// is compared after scaling by `2a`.
    pub fn sandwich_violations(&self, sh: &Shuffler) -> usize {
        let t = self.t;
        let mut bad = 0;
        for (q, it) in sh.iterations.iter().enumerate().take(self.lambda()) {
            let m = &it.fractional;
            let two_a = m.n_prime.numer() * 2;
            let b = m.n_prime.denom();
            let (prev, next) = (&self.counts[q], &self.counts[q + 1]);
            let slack = &two_a * BigInt::from(t);
            for i in 0..t {
                let w: Vec<BigInt> = (0..t).map(|j| if j == i { BigInt::from(0) } else { b * BigInt::from(m.count(i, j)) }).collect();
                let diag = &two_a - w.iter().sum::<BigInt>();
                for l in 0..t {
                    let mut want = &diag * BigInt::from(prev[i][l]);
                    for j in 0..t {
                        if j != i && prev[j][l] != 0 {
                            want += &w[j] * BigInt::from(prev[j][l]);
                        }
                    }
                    let got = &two_a * BigInt::from(next[i][l]);
                    if got < &want - &slack || got > &want + &slack {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }
}
