//! Shufflers by the cut-matching game on the cluster graph.

mod assignment;
mod cut_player;
mod walk;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::decomposition::{embed_matching, CutCertificate, DecompError, Hierarchy, HopPolicy, MatchingOutcome, NodeKind};
use crate::graph::{Embedding, PathSet};
use crate::numeric::{ln, rational_to, Scalar};

pub use assignment::min_assignment;
pub use cut_player::{rst_select, CandidateSource, CutChoice, CutPlayer, RstCheck, RstRecord, RstSelection};
pub use walk::{potential, walk_matrix, FractionalMatching, ScaledProduct, WalkMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShufflerError {
    #[error("node {0} is not a good internal node")]
    NotInternal(usize),
    #[error("fractional degree of part {part} exceeds 1")]
    Degree { part: usize },
    #[error("walk matrix is not doubly stochastic")]
    NotDoublyStochastic,
    #[error("iteration {iteration}: no cut candidate passed verification ({tried} checked, potential {})", rational_to::<f64>(.pi))]
    CutPlayer { iteration: usize, pi: BigRational, tried: usize },
    #[error("iteration {iteration}: matching player found a sparse cut in H_X")]
    MatchingCut { iteration: usize, cert: Box<CutCertificate> },
    #[error("iteration {iteration}: potential decay below the guaranteed fraction")]
    Decay { iteration: usize, before: BigRational, after: BigRational },
    #[error("no mixing after {} iterations", .trace.len().saturating_sub(1))]
    NonMixing { trace: Vec<BigRational> },
    #[error(transparent)]
    Decomp(#[from] DecompError),
}

/// Denominator of the guaranteed per-iteration decay fraction.
pub const DECAY_DEN: u64 = 36 * 720;

/// `λ_max = ⌈4 · 36 · 720 · ln n⌉`.
pub fn lambda_max(n: usize) -> u64 {
    (4.0 * DECAY_DEN as f64 * ln(n as u64)).ceil() as u64
}

/// `Π ≤ 1/(9n³)`.
pub fn mixed(pi: &BigRational, n: usize) -> bool {
    let n = BigInt::from(n as u64);
    pi * BigRational::from_integer(BigInt::from(9) * &n * &n * &n) <= BigRational::one()
}

/// `after ≤ (1 − 1/25920) · before`.
pub fn decays(before: &BigRational, after: &BigRational) -> bool {
    let den = BigRational::from_integer(BigInt::from(DECAY_DEN));
    after * &den <= before * (&den - BigRational::one())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShufflerParams {
    pub directions: usize,
    pub seed: u64,
    pub exhaustive_cap: usize,
    /// ψ for the matching player; defaults to half the hierarchy's ψ.
    pub match_psi: Option<BigRational>,
    /// Overrides `λ_max`.
    pub max_iterations: Option<u64>,
}

impl Default for ShufflerParams {
    fn default() -> Self {
        Self { directions: 64, seed: 7, exhaustive_cap: 12, match_psi: None, max_iterations: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShuffleIteration {
    /// 1-based.
    pub index: usize,
    pub s: Vec<usize>,
    pub s_prime: Vec<usize>,
    pub s_x: usize,
    pub s_prime_x: usize,
    /// `M^q_X` as (vertex of `S_X`, vertex of `S'_X`).
    pub matching: Vec<(usize, usize)>,
    /// `f_{M^q_X}` into `H_X`.
    pub embedding: Embedding,
    pub fractional: FractionalMatching,
    pub pi_before: BigRational,
    pub pi_after: BigRational,
    pub saturated: bool,
    pub source: CandidateSource,
    /// `Σ_{y∈S} min_{y'∈S'} ‖R[y] − R[y']‖² / Π(i−1)`.
    pub bound: BigRational,
    /// Same ratio at the optimal injective assignment.
    pub assignment_bound: Option<BigRational>,
    pub candidates: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shuffler {
    pub node: usize,
    pub t: usize,
    pub n: usize,
    pub n_prime: BigRational,
    pub iterations: Vec<ShuffleIteration>,
    /// `Π(0), …, Π(λ)`.
    pub potentials: Vec<BigRational>,
    pub rst: Vec<RstRecord>,
    pub lambda_max: u64,
    /// Surrogate cost as (label, rounds).
    pub charges: Vec<(String, u64)>,
}

impl Shuffler {
    pub fn lambda(&self) -> usize {
        self.iterations.len()
    }

    pub fn final_potential(&self) -> &BigRational {
        self.potentials.last().unwrap()
    }

    /// Union of all matching images in `H_X`.
    pub fn path_set(&self) -> PathSet {
        PathSet::new(self.iterations.iter().flat_map(|it| it.embedding.paths.iter().cloned()).collect())
    }

    pub fn quality(&self) -> u64 {
        self.path_set().quality()
    }

    /// `R_{M^q}` for iteration `q` (1-based).
    pub fn walk(&self, q: usize) -> Result<WalkMatrix, ShufflerError> {
        walk_matrix(&self.iterations[q - 1].fractional)
    }

    /// One line per iteration.
    pub fn trace_text(&self) -> String {
        let mut s = String::new();
        for it in &self.iterations {
            writeln!(
                s,
                "iteration={} pi_before={:.6e} pi_after={:.6e} s={} s_prime={} s_x={} s_prime_x={} matching={} congestion={} dilation={} saturated={} bound={:.6} source={}",
                it.index,
                rational_to::<f64>(&it.pi_before),
                rational_to::<f64>(&it.pi_after),
                it.s.len(),
                it.s_prime.len(),
                it.s_x,
                it.s_prime_x,
                it.matching.len(),
                it.embedding.congestion(),
                it.embedding.dilation(),
                it.saturated,
                rational_to::<f64>(&it.bound),
                it.source.label()
            )
            .unwrap();
        }
        s
    }
}

/// Matches `S_X` into `S'_X` inside `H_X`. Returns the pairs, their embedding and whether `S_X` is saturated.
pub fn matching_player(
    h: &Hierarchy,
    x: usize,
    s_x: &[usize],
    s_prime_x: &[usize],
    psi: &BigRational,
    iteration: usize,
) -> Result<(Vec<(usize, usize)>, Embedding, bool), ShufflerError> {
    let hx = h.nodes[x].virtual_graph.as_ref().ok_or(ShufflerError::NotInternal(x))?;
    if s_x.is_empty() {
        return Ok((Vec::new(), Embedding::empty(), true));
    }
    match embed_matching(hx, s_x, s_prime_x, psi, HopPolicy::Doubling) {
        MatchingOutcome::Matched(r) => {
            let saturated = r.unmatched.is_empty();
            let emb = Embedding::new(r.pairs.clone(), r.paths).map_err(DecompError::from)?;
            Ok((r.pairs, emb, saturated))
        }
        MatchingOutcome::Cut(c) => Err(ShufflerError::MatchingCut { iteration, cert: Box::new(c) }),
    }
}

pub fn build_shuffler(h: &Hierarchy, x: usize, params: &ShufflerParams) -> Result<Shuffler, ShufflerError> {
    build_shuffler_with::<f64>(h, x, params)
}

/// Runs the cut-matching game on node `x` with projections computed in `S`.
pub fn build_shuffler_with<S: Scalar>(h: &Hierarchy, x: usize, params: &ShufflerParams) -> Result<Shuffler, ShufflerError> {
    let node = &h.nodes[x];
    if node.kind != NodeKind::GoodInternal {
        return Err(ShufflerError::NotInternal(x));
    }
    let t = node.t();
    let n = h.n;
    let m = node.vertices.len();
    let n_prime = BigRational::new(BigInt::from(6 * m as u64), BigInt::from(h.k));
    let sets = h.part_sets(x);
    let sizes: Vec<usize> = sets.iter().map(|s| s.len()).collect();
    let part_of = h.part_of(x);
    let psi = params.match_psi.clone().unwrap_or_else(|| &h.psi / BigRational::from_integer(BigInt::from(2)));
    let cap = params.max_iterations.unwrap_or_else(|| lambda_max(n));
    let mut player = CutPlayer::<S>::new(params.directions, params.seed ^ x as u64);
    player.exhaustive_cap = params.exhaustive_cap;

    let hx = node.virtual_graph.as_ref().unwrap();
    let flat_q = node.flat.as_ref().map(|f| f.quality()).unwrap_or(1).max(1);
    let gather = (2 * hx.diameter().unwrap_or(0) as u64 + (t * t) as u64) * flat_q;

    let mut prod = ScaledProduct::identity(t);
    let mut potentials = vec![prod.potential()];
    let mut iterations = Vec::new();
    let mut rst = Vec::new();
    let mut charges: BTreeMap<String, u64> = BTreeMap::new();
    while !mixed(potentials.last().unwrap(), n) {
        let q = iterations.len() + 1;
        if q as u64 > cap {
            return Err(ShufflerError::NonMixing { trace: potentials });
        }
        *charges.entry("preprocess:shuffler:cut".into()).or_default() += gather;
        let choice = player.choose(&prod, &sizes, q, &mut rst)?;
        let s_x: Vec<usize> = choice.s.iter().flat_map(|&y| sets[y].iter().copied()).collect();
        let sp_x: Vec<usize> = choice.s_prime.iter().flat_map(|&y| sets[y].iter().copied()).collect();
        let (pairs, emb, saturated) = matching_player(h, x, &s_x, &sp_x, &psi, q)?;
        let qe = emb.quality();
        *charges.entry("preprocess:shuffler:match".into()).or_default() += qe * qe;
        let frac = FractionalMatching::natural(&pairs, &part_of, t, n_prime.clone());
        let before = potentials.last().unwrap().clone();
        prod.apply(&frac)?;
        if !prod.is_doubly_stochastic() {
            return Err(ShufflerError::NotDoublyStochastic);
        }
        let after = prod.potential();
        if saturated && !decays(&before, &after) {
            return Err(ShufflerError::Decay { iteration: q, before, after });
        }
        let tt = BigInt::from((t * t) as u64);
        let bound = BigRational::new(&choice.rowmin * &tt, choice.pi_scaled.clone());
        let assignment_bound = choice.assignment.as_ref().map(|a| BigRational::new(a * &tt, choice.pi_scaled.clone()));
        potentials.push(after.clone());
        iterations.push(ShuffleIteration {
            index: q,
            s_x: s_x.len(),
            s_prime_x: sp_x.len(),
            s: choice.s,
            s_prime: choice.s_prime,
            matching: pairs,
            embedding: emb,
            fractional: frac,
            pi_before: before,
            pi_after: after,
            saturated,
            source: choice.source,
            bound,
            assignment_bound,
            candidates: choice.candidates,
        });
    }
    Ok(Shuffler {
        node: x,
        t,
        n,
        n_prime,
        iterations,
        potentials,
        rst,
        lambda_max: cap,
        charges: charges.into_iter().collect(),
    })
}

/// Shufflers for every good internal node, keyed by node index.
pub fn build_shufflers(h: &Hierarchy, params: &ShufflerParams) -> Result<BTreeMap<usize, Shuffler>, ShufflerError> {
    let mut out = BTreeMap::new();
    for x in h.good_nodes() {
        if h.nodes[x].kind == NodeKind::GoodInternal {
            out.insert(x, build_shuffler(h, x, params)?);
        }
    }
    Ok(out)
}

/// `Π` as a float, for reports.
pub fn potential_f64(pi: &BigRational) -> f64 {
    if pi.is_zero() {
        0.0
    } else {
        rational_to::<f64>(pi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{build_hierarchy, BuildParams};
    use crate::graph::Graph;
    use crate::numeric::rat;

    fn ring_of_cliques(c: usize, s: usize) -> Graph {
        let mut g = Graph::new((1..=(c * s) as u64).collect()).unwrap();
        for q in 0..c {
            for i in 0..s {
                for j in i + 1..s {
                    g.add_edge(q * s + i, q * s + j).unwrap();
                }
            }
            g.add_edge(q * s + s - 1, ((q + 1) % c) * s).unwrap();
            g.add_edge(q * s + s - 2, ((q + 1) % c) * s + 1).unwrap();
        }
        g
    }

    #[test]
    fn lambda_max_constant() {
        assert_eq!(lambda_max(64), (103680.0 * (64f64).ln()).ceil() as u64);
    }

    #[test]
    fn two_part_shuffler_mixes() {
        let g = ring_of_cliques(4, 8);
        let p = BuildParams { k: Some(2), leaf_threshold: Some(8), psi: rat(1, 16), ..Default::default() };
        let h = build_hierarchy(&g, &p).unwrap();
        let sh = build_shuffler(&h, h.root, &ShufflerParams::default()).unwrap();
        assert_eq!(sh.t, 2);
        assert_eq!(sh.potentials[0], rat(1, 1));
        assert!(mixed(sh.final_potential(), 32));
        assert!(sh.lambda() >= 1 && sh.lambda() < 100);
        for it in &sh.iterations {
            assert!(it.saturated);
            assert!(decays(&it.pi_before, &it.pi_after));
            assert!(&it.bound * rat(720, 1) >= rat(1, 1));
        }
        assert_eq!(sh.trace_text().lines().count(), sh.lambda());
    }

    #[test]
    fn leaf_has_no_shuffler() {
        let g = Graph::complete(5);
        let h = build_hierarchy(&g, &BuildParams::default()).unwrap();
        assert!(matches!(build_shuffler(&h, h.root, &ShufflerParams::default()), Err(ShufflerError::NotInternal(_))));
    }

    #[test]
    fn decay_helper() {
        assert!(decays(&rat(1, 1), &rat(1, 2)));
        assert!(!decays(&rat(1, 1), &rat(1, 1)));
        assert!(mixed(&rat(0, 1), 10));
        assert!(!mixed(&rat(1, 8999), 10));
        assert!(mixed(&rat(1, 9000), 10));
    }
}
