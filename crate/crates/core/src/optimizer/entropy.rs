use crate::circle::ExpandingMap;
use crate::error::{Error, Result};
use crate::optimizer::LevelSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub depth: usize,
    pub cylinder_count: u64,
    /// `log(N_n) / n`.
    pub bound: f64,
}

/// Counts words `w_1 … w_n` whose cylinders `[w_{j+1} … w_n]` all meet the
/// level set, for `j = 0, …, n−1`.
///
/// Cylinders are grown by prepending a symbol, `[i u] = τ_i([u])`, so a
/// failing suffix prunes its whole subtree.
pub fn entropy_upper_bound(map: &ExpandingMap, lset: &LevelSet, n: usize) -> Result<EntropyEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    let mut stack: Vec<(usize, f64, f64)> = vec![(0, 0.0, 1.0)];
    let mut count: u64 = 0;
    while let Some((depth, a, b)) = stack.pop() {
        if depth == n {
            count += 1;
            continue;
        }
        for i in (0..map.degree()).rev() {
            let a1 = map.inverse_branch(i, a)?;
            let b1 = map.inverse_branch(i, b)?;
            if lset.meets(a1, b1) {
                stack.push((depth + 1, a1, b1));
            }
        }
    }
    let bound = if count == 0 { 0.0 } else { (count as f64).ln() / n as f64 };
    Ok(EntropyEstimate {
        depth: n,
        cylinder_count: count,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::Potential;
    use crate::optimizer::{lax_oleinik, level_set, LoOptions};

    #[test]
    fn whole_circle_gives_log_d() {
        for d in [2, 3] {
            let m = ExpandingMap::linear(d).unwrap();
            let e = entropy_upper_bound(&m, &LevelSet::whole(), 6).unwrap();
            assert_eq!(e.cylinder_count, (d as u64).pow(6));
            assert!((e.bound - (d as f64).ln()).abs() < 1e-12);
        }
    }

    /// Brute-force oracle: enumerate every word and test each suffix cylinder.
    fn brute_count(m: &ExpandingMap, l: &LevelSet, n: usize) -> u64 {
        let d = m.degree() as u64;
        let mut count = 0;
        for code in 0..d.pow(n as u32) {
            let mut c = code;
            let w: Vec<u32> = (0..n)
                .map(|_| {
                    let r = (c % d) as u32;
                    c /= d;
                    r
                })
                .collect();
            let ok = (0..n).all(|j| {
                let suffix: Vec<u32> = w[j..].iter().rev().copied().collect();
                let a = m.tau_word(&suffix, 0.0).unwrap();
                let b = m.tau_word(&suffix, 1.0).unwrap();
                l.meets(a, b)
            });
            count += ok as u64;
        }
        count
    }

    #[test]
    fn matches_brute_force() {
        let l = LevelSet {
            epsilon: 1.0,
            intervals: vec![(0.0, 0.05), (0.3, 0.37), (0.6, 0.72), (0.97, 1.0)],
        };
        for m in [
            ExpandingMap::linear(2).unwrap(),
            ExpandingMap::new(2, crate::trig::TrigPoly::sine(1, 0.05)).unwrap(),
        ] {
            for n in [1, 4, 9] {
                assert_eq!(entropy_upper_bound(&m, &l, n).unwrap().cylinder_count, brute_count(&m, &l, n));
            }
        }
    }

    #[test]
    fn cosine_doubling_small() {
        let m = ExpandingMap::linear(2).unwrap();
        let s = lax_oleinik(&m, &Potential::cosine(0.0), &LoOptions::default()).unwrap();
        let l = level_set(&s, 1e-3).unwrap();
        let e = entropy_upper_bound(&m, &l, 12).unwrap();
        assert!(e.bound <= 0.15, "{e:?}");
        assert!(e.bound <= 2f64.ln());
    }
}
