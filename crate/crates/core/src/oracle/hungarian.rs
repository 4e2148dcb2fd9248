use crate::{Error, Result};

/// Minimum-cost perfect matching of a square cost table by the Hungarian
/// method with potentials, `O(n^3)`. Returns the task of every robot and
/// the total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    if n == 0 || cost.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("cost table must be square and nonempty".into()));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Parameter("cost table must be finite".into()));
    }
    // 1-based arrays with a sentinel column 0
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[matched[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, j)| cost[i][*j]).sum();
    Ok((assignment, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], i: usize, used: &mut Vec<bool>) -> f64 {
            if i == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..cost.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[i][j] + rec(cost, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost.len()])
    }

    #[test]
    fn two_by_two() {
        let (a, c) = hungarian(&[vec![1.0, 2.0], vec![3.0, 1.0]]).unwrap();
        assert_eq!(a, vec![0, 1]);
        assert_eq!(c, 2.0);
    }

    #[test]
    fn rejects_ragged() {
        assert!(hungarian(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..6, data in prop::collection::vec(-5.0f64..5.0, 25)) {
            let cost: Vec<Vec<f64>> = (0..n).map(|i| data[i * 5..i * 5 + n].to_vec()).collect();
            let (a, c) = hungarian(&cost).unwrap();
            let mut seen = a.clone();
            seen.sort();
            prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
            prop_assert!((c - brute(&cost)).abs() < 1e-9);
        }
    }
}
