//! Scalar abstraction for the heuristic numerics.
//!
//! Exact quantities (cuts, walk matrices, potentials) always use big
//! rationals. Only candidate generation and spectral estimates are generic.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, NumAssign, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;

pub trait Scalar: Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Default + Send + Sync + 'static {}

impl<T> Scalar for T where T: Float + FromPrimitive + ToPrimitive + NumAssign + Debug + Default + Send + Sync + 'static {}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Lossy conversion of a big ratio `num/den` to a float.
pub fn ratio_to<S: Scalar>(num: &BigInt, den: &BigInt) -> S {
    let shift = den.bits().max(num.bits()).saturating_sub(60);
    let n = (num >> shift as usize).to_f64().unwrap_or(0.0);
    let d = (den >> shift as usize).to_f64().unwrap_or(1.0);
    if d == 0.0 {
        return S::zero();
    }
    S::from_f64(n / d).unwrap_or_else(S::zero)
}

pub fn rational_to<S: Scalar>(r: &BigRational) -> S {
    ratio_to(r.numer(), r.denom())
}

/// `⌈log₂ x⌉` for `x ≥ 1`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Smallest integer `k` with `k ≥ n^(p/q)`, computed exactly.
pub fn ceil_root_power(n: u64, p: u64, q: u64) -> u64 {
    assert!(q > 0);
    if p == 0 {
        return 1;
    }
    // k ≥ n^(p/q)  iff  k^q ≥ n^p
    let target = BigInt::from(n).pow(p as u32);
    let mut lo = 1u64;
    let mut hi = n.max(1);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if BigInt::from(mid).pow(q as u32) >= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Natural log of `n` as used by the termination constants.
pub fn ln(n: u64) -> f64 {
    (n as f64).ln()
}

pub fn is_nonneg(r: &BigRational) -> bool {
    !r.is_negative()
}

pub fn one() -> BigRational {
    BigRational::one()
}

pub fn zero() -> BigRational {
    BigRational::zero()
}

/// Deterministic unit vector orthogonal to the all-ones vector.
pub fn random_unit_orthogonal<S: Scalar>(rng: &mut ChaCha8Rng, t: usize) -> Vec<S> {
    loop {
        let mut v: Vec<f64> = (0..t).map(|_| gaussian(rng)).collect();
        let mean = v.iter().sum::<f64>() / t as f64;
        for x in v.iter_mut() {
            *x -= mean;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.iter().map(|x| S::from_f64(x / norm).unwrap()).collect();
        }
        if t < 2 {
            return vec![S::zero(); t];
        }
    }
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Monte-Carlo estimate of `E[(v·r)²]` over random unit vectors `r`.
pub fn projection_energy<S: Scalar>(v: &[S], samples: usize, rng: &mut ChaCha8Rng) -> S {
    let t = v.len();
    let mut acc = S::zero();
    for _ in 0..samples {
        let r: Vec<f64> = (0..t).map(|_| gaussian(rng)).collect();
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut dot = S::zero();
        for (a, b) in v.iter().zip(r.iter()) {
            dot += *a * S::from_f64(b / norm).unwrap();
        }
        acc += dot * dot;
    }
    acc / S::from_usize(samples).unwrap()
}

/// Spectral gap of the normalized lazy walk, by power iteration.
#[derive(Clone, Debug)]
pub struct SpectralEstimate<S: Scalar> {
    pub gap: S,
    pub min_degree: u64,
    /// Cheeger-style lower estimate `d_min · gap / 2` of the sparsity.
    pub sparsity_estimate: S,
    pub iterations: usize,
}

impl<S: Scalar> SpectralEstimate<S> {
    pub fn of(g: &Graph, vertices: &[usize], iterations: usize, seed: u64) -> Self {
        use rand::SeedableRng;
        let m = vertices.len();
        let mut local = vec![usize::MAX; g.slots()];
        for (i, &v) in vertices.iter().enumerate() {
            local[v] = i;
        }
        let deg: Vec<S> = vertices
            .iter()
            .map(|&v| S::from_u64(g.degree(v)).unwrap())
            .collect();
        let min_degree = vertices.iter().map(|&v| g.degree(v)).min().unwrap_or(0);
        if m < 2 || min_degree == 0 {
            return Self { gap: S::zero(), min_degree, sparsity_estimate: S::zero(), iterations: 0 };
        }
        // Symmetric lazy operator N = (I + D^{-1/2} A D^{-1/2}) / 2; top eigenvector is sqrt(d).
        let sq: Vec<S> = deg.iter().map(|d| d.sqrt()).collect();
        let total: S = deg.iter().fold(S::zero(), |a, b| a + *b);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x: Vec<S> = (0..m).map(|_| S::from_f64(gaussian(&mut rng)).unwrap()).collect();
        let project = |x: &mut Vec<S>| {
            let dot = x.iter().zip(sq.iter()).fold(S::zero(), |a, (p, q)| a + *p * *q);
            for (xi, si) in x.iter_mut().zip(sq.iter()) {
                *xi -= dot * *si / total;
            }
        };
        let normalize = |x: &mut Vec<S>| -> S {
            let n = x.iter().fold(S::zero(), |a, b| a + *b * *b).sqrt();
            if n > S::zero() {
                for xi in x.iter_mut() {
                    *xi /= n;
                }
            }
            n
        };
        project(&mut x);
        normalize(&mut x);
        let mut lambda = S::zero();
        let half = S::from_f64(0.5).unwrap();
        for _ in 0..iterations {
            let mut y = vec![S::zero(); m];
            for (i, &v) in vertices.iter().enumerate() {
                let mut acc = S::zero();
                for (&u, &mu) in g.neighbors(v).iter().zip(g.multiplicities(v)) {
                    let j = local[u];
                    if j == usize::MAX {
                        continue;
                    }
                    acc += S::from_u32(mu).unwrap() * x[j] / (sq[i] * sq[j]);
                }
                y[i] = half * x[i] + half * acc;
            }
            project(&mut y);
            lambda = normalize(&mut y);
            x = y;
        }
        let gap = (S::one() - lambda).max(S::zero()) * S::from_f64(2.0).unwrap();
        let sparsity_estimate = S::from_u64(min_degree).unwrap() * gap / S::from_f64(2.0).unwrap();
        Self { gap, min_degree, sparsity_estimate, iterations }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_root_power_exact() {
        assert_eq!(ceil_root_power(256, 1, 2), 16);
        assert_eq!(ceil_root_power(257, 1, 2), 17);
        assert_eq!(ceil_root_power(64, 1, 6), 2);
        assert_eq!(ceil_root_power(128, 1, 2), 12);
        assert_eq!(ceil_root_power(1, 1, 2), 1);
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(8), 3);
        assert_eq!(ceil_log2(9), 4);
    }

    #[test]
    fn projection_energy_matches_norm_over_t() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = [1.0f64, -2.0, 0.5, 0.0, 1.5, -1.0];
        let l2: f64 = v.iter().map(|x| x * x).sum();
        let est: f64 = projection_energy(&v, 100_000, &mut rng);
        let expect = l2 / v.len() as f64;
        assert!((est - expect).abs() / expect < 0.05, "{est} vs {expect}");
        let v32: Vec<f32> = v.iter().map(|&x| x as f32).collect();
        let est32: f32 = projection_energy(&v32, 100_000, &mut rng);
        assert!(((est32 as f64) - expect).abs() / expect < 0.05);
    }

    #[test]
    fn ratio_to_handles_huge_values() {
        let big = BigInt::from(3) << 5000usize;
        let den = BigInt::from(4) << 5000usize;
        let x: f64 = ratio_to(&big, &den);
        assert!((x - 0.75).abs() < 1e-12);
    }
}
