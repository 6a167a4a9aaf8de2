use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::ShufflerError;

/// Fractional matching on the cluster graph: `x_uv = c_uv / n'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FractionalMatching {
    pub t: usize,
    /// Matched-pair counts per unordered part pair `u < v`.
    pub counts: BTreeMap<(usize, usize), u64>,
    pub n_prime: BigRational,
}

impl FractionalMatching {
    pub fn empty(t: usize, n_prime: BigRational) -> Self {
        Self { t, counts: BTreeMap::new(), n_prime }
    }

    /// Natural fractional matching of `pairs` given the part index of every vertex.
    pub fn natural(pairs: &[(usize, usize)], part_of: &[usize], t: usize, n_prime: BigRational) -> Self {
        let mut counts = BTreeMap::new();
        for &(a, b) in pairs {
            let (pa, pb) = (part_of[a], part_of[b]);
            if pa != pb {
                *counts.entry((pa.min(pb), pa.max(pb))).or_insert(0) += 1;
            }
        }
        Self { t, counts, n_prime }
    }

    pub fn count(&self, u: usize, v: usize) -> u64 {
        self.counts.get(&(u.min(v), u.max(v))).copied().unwrap_or(0)
    }

    pub fn x(&self, u: usize, v: usize) -> BigRational {
        BigRational::from_integer(BigInt::from(self.count(u, v))) / &self.n_prime
    }

    pub fn degree(&self, u: usize) -> BigRational {
        let c: u64 = self.counts.iter().filter(|((a, b), _)| *a == u || *b == u).map(|(_, c)| c).sum();
        BigRational::from_integer(BigInt::from(c)) / &self.n_prime
    }

    pub fn check(&self) -> Result<(), ShufflerError> {
        for u in 0..self.t {
            if self.degree(u) > BigRational::one() {
                return Err(ShufflerError::Degree { part: u });
            }
        }
        Ok(())
    }

    /// `(E, f)` with `x_uv / 2 = c_uv · f / E` in lowest terms.
    fn scale(&self) -> (BigInt, BigInt) {
        let half = BigRational::new(BigInt::one(), BigInt::from(2)) / &self.n_prime;
        (half.denom().clone(), half.numer().clone())
    }
}

/// Dense `t × t` rational matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkMatrix {
    pub t: usize,
    pub entries: Vec<BigRational>,
}

impl WalkMatrix {
    pub fn identity(t: usize) -> Self {
        let mut entries = vec![BigRational::zero(); t * t];
        for i in 0..t {
            entries[i * t + i] = BigRational::one();
        }
        Self { t, entries }
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.entries[i * self.t + j]
    }

    pub fn row(&self, i: usize) -> &[BigRational] {
        &self.entries[i * self.t..(i + 1) * self.t]
    }

    pub fn mul(&self, other: &WalkMatrix) -> WalkMatrix {
        let t = self.t;
        let mut entries = vec![BigRational::zero(); t * t];
        for i in 0..t {
            for k in 0..t {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..t {
                    entries[i * t + j] += a * other.get(k, j);
                }
            }
        }
        WalkMatrix { t, entries }
    }

    pub fn is_doubly_stochastic(&self) -> bool {
        let t = self.t;
        if self.entries.iter().any(|e| e.is_negative()) {
            return false;
        }
        (0..t).all(|i| {
            let r: BigRational = (0..t).map(|j| self.get(i, j).clone()).sum();
            let c: BigRational = (0..t).map(|j| self.get(j, i).clone()).sum();
            r.is_one() && c.is_one()
        })
    }
}

/// `R_M` for a fractional matching.
pub fn walk_matrix(m: &FractionalMatching) -> Result<WalkMatrix, ShufflerError> {
    m.check()?;
    let t = m.t;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut r = WalkMatrix { t, entries: vec![BigRational::zero(); t * t] };
    for i in 0..t {
        let mut off = BigRational::zero();
        for j in 0..t {
            if i != j {
                let x = m.x(i, j);
                r.entries[i * t + j] = &half * &x;
                off += x;
            }
        }
        r.entries[i * t + i] = &half + &half * (BigRational::one() - off);
    }
    if !r.is_doubly_stochastic() {
        return Err(ShufflerError::NotDoublyStochastic);
    }
    Ok(r)
}

/// `Π = Σ_y ‖R[y] − 1/t‖²`.
pub fn potential(r: &WalkMatrix) -> BigRational {
    let u = BigRational::new(BigInt::one(), BigInt::from(r.t as u64));
    r.entries.iter().map(|e| {
        let d = e - &u;
        &d * &d
    }).sum()
}

/// Running product `R_i = A / D` kept in integers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScaledProduct {
    pub t: usize,
    pub a: Vec<BigInt>,
    pub d: BigInt,
}

impl ScaledProduct {
    pub fn identity(t: usize) -> Self {
        let mut a = vec![BigInt::zero(); t * t];
        for i in 0..t {
            a[i * t + i] = BigInt::one();
        }
        Self { t, a, d: BigInt::one() }
    }

    pub fn entry(&self, i: usize, j: usize) -> &BigInt {
        &self.a[i * self.t + j]
    }

    /// `R ← R_M · R`.
    pub fn apply(&mut self, m: &FractionalMatching) -> Result<(), ShufflerError> {
        m.check()?;
        let t = self.t;
        let (e, f) = m.scale();
        let mut b = vec![BigInt::zero(); t * t];
        for i in 0..t {
            let mut off = BigInt::zero();
            for j in 0..t {
                if i != j {
                    let v = &f * BigInt::from(m.count(i, j));
                    off += &v;
                    b[i * t + j] = v;
                }
            }
            b[i * t + i] = &e - off;
        }
        let mut next = vec![BigInt::zero(); t * t];
        for i in 0..t {
            for k in 0..t {
                let bik = &b[i * t + k];
                if bik.is_zero() {
                    continue;
                }
                for j in 0..t {
                    next[i * t + j] += bik * &self.a[k * t + j];
                }
            }
        }
        self.a = next;
        self.d *= e;
        Ok(())
    }

    pub fn to_matrix(&self) -> WalkMatrix {
        WalkMatrix {
            t: self.t,
            entries: self.a.iter().map(|x| BigRational::new(x.clone(), self.d.clone())).collect(),
        }
    }

    /// Row and column sums equal `D`, entries non-negative.
    pub fn is_doubly_stochastic(&self) -> bool {
        let t = self.t;
        !self.a.iter().any(|x| x.is_negative())
            && (0..t).all(|i| {
                let r: BigInt = (0..t).map(|j| self.entry(i, j)).sum();
                let c: BigInt = (0..t).map(|j| self.entry(j, i)).sum();
                r == self.d && c == self.d
            })
    }

    /// `Σ (tA − D)²`, so that `Π = scaled / (t² D²)`.
    pub fn potential_scaled(&self) -> BigInt {
        let t = BigInt::from(self.t as u64);
        self.a.iter().map(|x| {
            let d = &t * x - &self.d;
            &d * &d
        }).sum()
    }

    pub fn potential(&self) -> BigRational {
        let t = BigInt::from(self.t as u64);
        BigRational::new(self.potential_scaled(), &t * &t * &self.d * &self.d)
    }

    /// `‖A_y − A_z‖²` for all row pairs.
    pub fn row_distances(&self) -> Vec<Vec<BigInt>> {
        let t = self.t;
        let mut out = vec![vec![BigInt::zero(); t]; t];
        for y in 0..t {
            for z in y + 1..t {
                let s: BigInt = (0..t).map(|j| {
                    let d = self.entry(y, j) - self.entry(z, j);
                    &d * &d
                }).sum();
                out[y][z] = s.clone();
                out[z][y] = s;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rat;

    fn fm(t: usize, np: i64, pairs: &[((usize, usize), u64)]) -> FractionalMatching {
        FractionalMatching { t, counts: pairs.iter().copied().collect(), n_prime: rat(np, 1) }
    }

    #[test]
    fn empty_matching_is_identity() {
        let r = walk_matrix(&fm(3, 4, &[])).unwrap();
        assert_eq!(r, WalkMatrix::identity(3));
    }

    #[test]
    fn perfect_matching_blocks() {
        let r = walk_matrix(&fm(4, 2, &[((0, 1), 2), ((2, 3), 2)])).unwrap();
        assert_eq!(*r.get(0, 1), rat(1, 2));
        assert_eq!(*r.get(0, 0), rat(1, 2));
        assert_eq!(*r.get(0, 2), rat(0, 1));
        // each row is (1/2,1/2,0,0) vs 1/4: distance² = 2/16 + 2/16
        assert_eq!(potential(&r), rat(1, 1));
    }

    #[test]
    fn half_edge_three_parts() {
        let r = walk_matrix(&fm(3, 2, &[((0, 1), 1)])).unwrap();
        assert_eq!(r.row(0), &[rat(3, 4), rat(1, 4), rat(0, 1)]);
        assert_eq!(r.row(2), &[rat(0, 1), rat(0, 1), rat(1, 1)]);
    }

    #[test]
    fn identity_potential_is_t_minus_one() {
        for t in 1..9 {
            assert_eq!(potential(&WalkMatrix::identity(t)), rat(t as i64 - 1, 1));
            assert_eq!(ScaledProduct::identity(t).potential(), rat(t as i64 - 1, 1));
        }
    }

    #[test]
    fn uniform_rows_zero_potential() {
        let t = 4;
        let m = WalkMatrix { t, entries: vec![rat(1, 4); 16] };
        assert_eq!(potential(&m), rat(0, 1));
    }

    #[test]
    fn overfull_degree_rejected() {
        assert!(walk_matrix(&fm(3, 2, &[((0, 1), 2), ((0, 2), 1)])).is_err());
    }

    #[test]
    fn scaled_product_matches_rational_product() {
        let np = BigRational::new(BigInt::from(48), BigInt::from(5));
        let ms = [
            FractionalMatching { t: 4, counts: [((0, 1), 3), ((2, 3), 5)].into_iter().collect(), n_prime: np.clone() },
            FractionalMatching { t: 4, counts: [((0, 2), 7), ((1, 3), 2), ((0, 3), 1)].into_iter().collect(), n_prime: np.clone() },
        ];
        let mut sp = ScaledProduct::identity(4);
        let mut r = WalkMatrix::identity(4);
        for m in &ms {
            sp.apply(m).unwrap();
            r = walk_matrix(m).unwrap().mul(&r);
            assert_eq!(sp.to_matrix(), r);
            assert!(sp.is_doubly_stochastic());
            assert_eq!(sp.potential(), potential(&r));
        }
    }
}
