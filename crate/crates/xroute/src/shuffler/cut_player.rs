use std::marker::PhantomData;

use num_bigint::BigInt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::assignment::min_assignment;
use super::walk::ScaledProduct;
use super::ShufflerError;
use crate::numeric::{random_unit_orthogonal, ratio_to, Scalar};

/// Where a chosen cut came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateSource {
    Rst { direction: usize },
    Sweep { direction: usize },
    Exhaustive,
}

impl CandidateSource {
    pub fn label(&self) -> String {
        match self {
            CandidateSource::Rst { direction } => format!("rst:{direction}"),
            CandidateSource::Sweep { direction } => format!("sweep:{direction}"),
            CandidateSource::Exhaustive => "exhaustive".into(),
        }
    }
}

/// Separation of a projection `μ` into a small far side `A^l` and a large side `A^r`.
#[derive(Clone, Debug, PartialEq)]
pub struct RstSelection {
    pub size: usize,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub gamma: f64,
    pub mean: f64,
    /// `Σ_{A^l} (μ − μ̄)²`.
    pub left_mass: f64,
    /// `Σ_A (μ − μ̄)²`.
    pub total_mass: f64,
    /// `A^l` lies below `γ`.
    pub left_below: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RstCheck {
    pub left_size: bool,
    pub right_size: bool,
    pub separated: bool,
    pub far_from_gamma: bool,
    pub mass: bool,
}

impl RstCheck {
    pub fn all(&self) -> bool {
        self.left_size && self.right_size && self.separated && self.far_from_gamma && self.mass
    }
}

const EPS: f64 = 1e-12;

impl RstSelection {
    /// Re-derives every property from `μ` alone.
    pub fn check(&self, mu: &[f64]) -> RstCheck {
        let a = self.size;
        let mean = mu.iter().sum::<f64>() / a as f64;
        let total: f64 = mu.iter().map(|m| (m - mean).powi(2)).sum();
        let left: f64 = self.left.iter().map(|&v| (mu[v] - mean).powi(2)).sum();
        let g = self.gamma;
        let (lmax, lmin) = self.left.iter().fold((f64::MIN, f64::MAX), |(hi, lo), &v| (hi.max(mu[v]), lo.min(mu[v])));
        let (rmax, rmin) = self.right.iter().fold((f64::MIN, f64::MAX), |(hi, lo), &v| (hi.max(mu[v]), lo.min(mu[v])));
        let separated = if self.left_below { lmax <= g + EPS && g <= rmin + EPS } else { rmax <= g + EPS && g <= lmin + EPS };
        RstCheck {
            left_size: 8 * self.left.len() <= a,
            right_size: 2 * self.right.len() >= a,
            separated,
            far_from_gamma: self.left.iter().all(|&v| 3.0 * (mu[v] - g).abs() + EPS >= (mu[v] - mean).abs()),
            mass: 80.0 * left + EPS * (1.0 + total) >= total,
        }
    }
}

/// Best separation for one orientation: `γ` sits at the `⌈a/2⌉`-th element from the far end,
/// so `A^r` has at least half the elements, and `A^l` takes the `⌊a/8⌋` heaviest eligible ones.
fn rst_side(mu: &[f64], below: bool) -> RstSelection {
    let a = mu.len();
    let mean = mu.iter().sum::<f64>() / a as f64;
    let mut order: Vec<usize> = (0..a).collect();
    order.sort_by(|&x, &y| mu[x].total_cmp(&mu[y]).then(x.cmp(&y)));
    if !below {
        order.reverse();
    }
    let half = a.div_ceil(2);
    // A^r: the `half` elements on the far side of gamma
    let right: Vec<usize> = order[a - half..].to_vec();
    let gamma = mu[right[0]];
    let mut eligible: Vec<usize> = order[..a - half]
        .iter()
        .copied()
        .filter(|&v| 3.0 * (mu[v] - gamma).abs() >= (mu[v] - mean).abs())
        .collect();
    eligible.sort_by(|&x, &y| (mu[y] - mean).abs().total_cmp(&(mu[x] - mean).abs()).then(x.cmp(&y)));
    eligible.truncate(a / 8);
    eligible.sort_unstable();
    let mut right = right;
    right.sort_unstable();
    RstSelection {
        size: a,
        left_mass: eligible.iter().map(|&v| (mu[v] - mean).powi(2)).sum(),
        total_mass: mu.iter().map(|m| (m - mean).powi(2)).sum(),
        left: eligible,
        right,
        gamma,
        mean,
        left_below: below,
    }
}

/// Separation with the heavier `A^l` among both orientations. `None` when `|A| < 8`,
/// where `|A^l| ≤ |A|/8` forces an empty far side.
pub fn rst_select(mu: &[f64]) -> Option<RstSelection> {
    if mu.len() < 8 {
        return None;
    }
    let lo = rst_side(mu, true);
    let hi = rst_side(mu, false);
    Some(if hi.left_mass > lo.left_mass { hi } else { lo })
}

/// One recorded RST invocation.
#[derive(Clone, Debug, PartialEq)]
pub struct RstRecord {
    pub iteration: usize,
    pub direction: usize,
    pub mu: Vec<f64>,
    pub selection: RstSelection,
    pub check: RstCheck,
}

/// The cut player's verified answer.
#[derive(Clone, Debug, PartialEq)]
pub struct CutChoice {
    pub s: Vec<usize>,
    pub s_prime: Vec<usize>,
    pub source: CandidateSource,
    /// `Σ_{y∈S} min_{y'∈S'} ‖A_y − A_{y'}‖²`: the bound over every mapping `S → S'`.
    pub rowmin: BigInt,
    /// Optimal injective assignment cost, when `|S| ≤ |S'|`.
    pub assignment: Option<BigInt>,
    /// `Σ (tA − D)²`.
    pub pi_scaled: BigInt,
    pub candidates: usize,
    pub verified: usize,
}

impl CutChoice {
    /// `Σ min ‖R_y − R_{y'}‖² / Π` as a float, for logs.
    pub fn ratio(&self, t: usize) -> f64 {
        let t = BigInt::from(t as u64);
        ratio_to::<f64>(&(&self.rowmin * &t * &t), &self.pi_scaled)
    }
}

/// Deterministic cut player: projection candidates in `S`, exact verification in integers.
#[derive(Clone, Debug)]
pub struct CutPlayer<S: Scalar> {
    pub directions: usize,
    pub seed: u64,
    /// Exhaustive fallback only when `t` is at most this.
    pub exhaustive_cap: usize,
    _s: PhantomData<S>,
}

impl<S: Scalar> Default for CutPlayer<S> {
    fn default() -> Self {
        Self::new(64, 7)
    }
}

struct Candidate {
    s: Vec<usize>,
    sp: Vec<usize>,
    source: CandidateSource,
    score: S64,
}

type S64 = f64;

impl<S: Scalar> CutPlayer<S> {
    pub fn new(directions: usize, seed: u64) -> Self {
        Self { directions, seed, exhaustive_cap: 12, _s: PhantomData }
    }

    /// Exact check of `720 · t² · Σ min ‖ΔA‖² ≥ Σ (tA − D)²`.
    pub fn verify(prod: &ScaledProduct, dist: &[Vec<BigInt>], s: &[usize], sp: &[usize]) -> (bool, BigInt, BigInt) {
        let t = BigInt::from(prod.t as u64);
        let rowmin: BigInt = s.iter().map(|&y| sp.iter().map(|&z| &dist[y][z]).min().cloned().unwrap_or_default()).sum();
        let pi = prod.potential_scaled();
        let ok = BigInt::from(720) * &t * &t * &rowmin >= pi;
        (ok, rowmin, pi)
    }

    /// Optimal injective assignment cost `S → S'`.
    pub fn assignment_cost(dist: &[Vec<BigInt>], s: &[usize], sp: &[usize]) -> Option<BigInt> {
        if s.len() > sp.len() {
            return None;
        }
        let cost: Vec<Vec<BigInt>> = s.iter().map(|&y| sp.iter().map(|&z| dist[y][z].clone()).collect()).collect();
        Some(min_assignment(&cost).0)
    }

    pub fn choose(&self, prod: &ScaledProduct, sizes: &[usize], iteration: usize, rst_log: &mut Vec<RstRecord>) -> Result<CutChoice, ShufflerError> {
        let t = prod.t;
        let dist = prod.row_distances();
        let d2 = &prod.d * &prod.d;
        let fdist: Vec<Vec<f64>> = dist.iter().map(|r| r.iter().map(|x| ratio_to::<f64>(x, &d2)).collect()).collect();
        let rf: Vec<Vec<S>> = (0..t).map(|i| (0..t).map(|j| ratio_to::<S>(prod.entry(i, j), &prod.d)).collect()).collect();
        let size_ok = |s: &[usize], sp: &[usize]| {
            !s.is_empty() && s.iter().map(|&y| sizes[y]).sum::<usize>() <= sp.iter().map(|&y| sizes[y]).sum::<usize>()
        };
        let score = |s: &[usize], sp: &[usize]| -> f64 {
            s.iter().map(|&y| sp.iter().map(|&z| fdist[y][z]).fold(f64::INFINITY, f64::min)).sum()
        };
        let mut cands: Vec<Candidate> = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (iteration as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        for dir in 0..self.directions {
            let r: Vec<S> = random_unit_orthogonal(&mut rng, t);
            let mu: Vec<f64> = rf.iter().map(|row| row.iter().zip(&r).fold(S::zero(), |acc, (a, b)| acc + *a * *b).to_f64().unwrap()).collect();
            if let Some(sel) = rst_select(&mu) {
                let check = sel.check(&mu);
                if size_ok(&sel.left, &sel.right) {
                    let sc = score(&sel.left, &sel.right);
                    cands.push(Candidate { s: sel.left.clone(), sp: sel.right.clone(), source: CandidateSource::Rst { direction: dir }, score: sc });
                }
                rst_log.push(RstRecord { iteration, direction: dir, mu: mu.clone(), selection: sel, check });
            }
            let mut order: Vec<usize> = (0..t).collect();
            order.sort_by(|&x, &y| mu[x].total_cmp(&mu[y]).then(x.cmp(&y)));
            for flip in [false, true] {
                if flip {
                    order.reverse();
                }
                for j in 1..t {
                    let s: Vec<usize> = order[..j].to_vec();
                    let need: usize = s.iter().map(|&y| sizes[y]).sum();
                    let mut got = 0;
                    let mut sp = Vec::new();
                    for &z in order[j..].iter().rev() {
                        if got >= need {
                            break;
                        }
                        got += sizes[z];
                        sp.push(z);
                    }
                    if got < need {
                        break;
                    }
                    let sc = score(&s, &sp);
                    cands.push(Candidate { s, sp, source: CandidateSource::Sweep { direction: dir }, score: sc });
                }
            }
        }
        let total = cands.len();
        let mut verified = 0;
        if let Some(c) = self.verify_best(prod, &dist, cands, &mut verified)? {
            return Ok(CutChoice { candidates: total, verified, ..c });
        }
        if t <= self.exhaustive_cap {
            let mut ex = Vec::new();
            let mut assign = vec![0u8; t];
            loop {
                let s: Vec<usize> = (0..t).filter(|&i| assign[i] == 1).collect();
                let sp: Vec<usize> = (0..t).filter(|&i| assign[i] == 2).collect();
                if !sp.is_empty() && size_ok(&s, &sp) {
                    let sc = score(&s, &sp);
                    ex.push(Candidate { s, sp, source: CandidateSource::Exhaustive, score: sc });
                }
                let mut i = 0;
                while i < t && assign[i] == 2 {
                    assign[i] = 0;
                    i += 1;
                }
                if i == t {
                    break;
                }
                assign[i] += 1;
            }
            let n_ex = ex.len();
            if let Some(c) = self.verify_best(prod, &dist, ex, &mut verified)? {
                return Ok(CutChoice { candidates: total + n_ex, verified, ..c });
            }
        }
        Err(ShufflerError::CutPlayer { iteration, pi: prod.potential(), tried: verified })
    }

    /// Verifies candidates in descending float score until one passes exactly.
    fn verify_best(&self, prod: &ScaledProduct, dist: &[Vec<BigInt>], mut cands: Vec<Candidate>, verified: &mut usize) -> Result<Option<CutChoice>, ShufflerError> {
        // stable: ties keep generation order
        cands.sort_by(|a, b| b.score.total_cmp(&a.score));
        let mut last_score = None;
        for c in cands {
            // identical sets from different directions need only one check
            if last_score == Some(c.score) {
                continue;
            }
            last_score = Some(c.score);
            *verified += 1;
            let (ok, rowmin, pi) = Self::verify(prod, dist, &c.s, &c.sp);
            if ok {
                let assignment = Self::assignment_cost(dist, &c.s, &c.sp);
                if let Some(a) = &assignment {
                    // any injective mapping is a mapping, so it cannot beat the row minima
                    assert!(*a >= rowmin);
                }
                return Ok(Some(CutChoice { s: c.s, s_prime: c.sp, source: c.source, rowmin, assignment, pi_scaled: pi, candidates: 0, verified: 0 }));
            }
            if *verified > 256 {
                break;
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shuffler::walk::FractionalMatching;
    use num_rational::BigRational;
    use proptest::prelude::*;

    #[test]
    fn two_parts_identity() {
        let prod = ScaledProduct::identity(2);
        let mut log = Vec::new();
        let c = CutPlayer::<f64>::default().choose(&prod, &[5, 6], 1, &mut log).unwrap();
        // the smaller part goes first
        assert_eq!(c.s, vec![0]);
        assert_eq!(c.s_prime, vec![1]);
        assert!(log.is_empty());
        // ({1}, {0}) violates the size condition, leaving this split as the only one
        let dist = prod.row_distances();
        assert!(CutPlayer::<f64>::verify(&prod, &dist, &[0], &[1]).0);
    }

    #[test]
    fn eight_parts_after_mixing_step() {
        let mut prod = ScaledProduct::identity(8);
        let m = FractionalMatching { t: 8, counts: [((0, 4), 3), ((1, 5), 2), ((2, 6), 4)].into_iter().collect(), n_prime: BigRational::from_integer(6.into()) };
        prod.apply(&m).unwrap();
        let mut log = Vec::new();
        let c = CutPlayer::<f64>::default().choose(&prod, &[4; 8], 1, &mut log).unwrap();
        let dist = prod.row_distances();
        let a = CutPlayer::<f64>::assignment_cost(&dist, &c.s, &c.s_prime).unwrap();
        let t = BigInt::from(8);
        assert!(BigInt::from(720) * &t * &t * a >= prod.potential_scaled());
        assert_eq!(log.len(), 64);
        assert!(log.iter().all(|r| r.check.all()), "{:?}", log.iter().find(|r| !r.check.all()));
    }

    #[test]
    fn f32_player_agrees_on_validity() {
        let prod = ScaledProduct::identity(9);
        let mut log = Vec::new();
        let c = CutPlayer::<f32>::default().choose(&prod, &[3; 9], 2, &mut log).unwrap();
        assert!(CutPlayer::<f32>::verify(&prod, &prod.row_distances(), &c.s, &c.s_prime).0);
    }

    proptest! {
        #[test]
        fn rst_selection_bounds(mu in prop::collection::vec(-10.0f64..10.0, 8..40)) {
            let sel = rst_select(&mu).unwrap();
            let chk = sel.check(&mu);
            prop_assert!(chk.all(), "{:?} {:?}", chk, sel);
        }
    }
}
