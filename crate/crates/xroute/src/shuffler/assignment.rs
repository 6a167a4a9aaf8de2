use std::ops::{Add, Sub};

use num_traits::Zero;

/// Minimum-cost injective assignment of rows into columns (`rows <= cols`).
///
/// Returns the optimal cost and the column chosen for each row.
pub fn min_assignment<T>(cost: &[Vec<T>]) -> (T, Vec<usize>)
where
    T: Clone + Ord + Zero + Add<Output = T> + Sub<Output = T>,
{
    let n = cost.len();
    if n == 0 {
        return (T::zero(), Vec::new());
    }
    let m = cost[0].len();
    assert!(n <= m, "assignment needs rows <= cols");
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv: Vec<Option<T>> = vec![None; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta: Option<T> = None;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1].clone() - u[i0].clone() - v[j].clone();
                if minv[j].as_ref().is_none_or(|mv| cur < *mv) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].as_ref().unwrap();
                if delta.as_ref().is_none_or(|d| mj < d) {
                    delta = Some(mj.clone());
                    j1 = j;
                }
            }
            let delta = delta.expect("columns exhausted");
            for j in 0..=m {
                if used[j] {
                    let r = p[j];
                    u[r] = u[r].clone() + delta.clone();
                    v[j] = v[j].clone() - delta.clone();
                } else if let Some(mv) = minv[j].take() {
                    minv[j] = Some(mv - delta.clone());
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            col[p[j] - 1] = j - 1;
        }
    }
    let total = col.iter().enumerate().fold(T::zero(), |acc, (i, &j)| acc + cost[i][j].clone());
    (total, col)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(cost: &[Vec<i64>]) -> i64 {
        fn go(cost: &[Vec<i64>], row: usize, used: &mut Vec<bool>) -> i64 {
            if row == cost.len() {
                return 0;
            }
            let mut best = i64::MAX;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[row][j] + go(cost, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(cost, 0, &mut vec![false; cost[0].len()])
    }

    #[test]
    fn small_square() {
        let c = vec![vec![4, 1, 3], vec![2, 0, 5], vec![3, 2, 2]];
        let (v, col) = min_assignment(&c);
        assert_eq!(v, 5);
        assert_eq!(col, vec![1, 0, 2]);
    }

    #[test]
    fn empty_rows() {
        let c: Vec<Vec<i64>> = vec![];
        assert_eq!(min_assignment(&c).0, 0);
    }

    proptest! {
        #[test]
        fn matches_permutation_brute_force(n in 1usize..5, extra in 0usize..3, seed in prop::collection::vec(-20i64..50, 40)) {
            let m = n + extra;
            let c: Vec<Vec<i64>> = (0..n).map(|i| (0..m).map(|j| seed[(i * m + j) % seed.len()] + (i * j) as i64 % 7).collect()).collect();
            let (v, col) = min_assignment(&c);
            prop_assert_eq!(v, brute(&c));
            let mut seen = col.clone();
            seen.sort_unstable();
            seen.dedup();
            prop_assert_eq!(seen.len(), n);
        }
    }
}
