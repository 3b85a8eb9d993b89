use rayon::prelude::*;

use crate::circle::{birkhoff_sum, ExpandingMap, Potential};
use crate::error::{Error, Result};
use crate::trig::reduce;

pub const DEFAULT_ORBIT_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub word: Vec<u32>,
    /// Fixed point of `τ_{w,p}`, reduced to `[0, 1)`.
    pub point: f64,
    /// Forward orbit `point, T(point), …, T^{p−1}(point)`.
    pub orbit: Vec<f64>,
    pub average: f64,
}

impl PeriodicOrbit {
    pub fn period(&self) -> usize {
        self.word.len()
    }
}

/// Unique fixed point of the contraction `x ↦ τ_{w,p}(x)`, unreduced.
pub fn periodic_point(map: &ExpandingMap, word: &[u32]) -> Result<f64> {
    if word.is_empty() {
        return Err(Error::InvalidArgument("periodic word must be non-empty".into()));
    }
    // Newton on τ_w(x) − x; the slope τ_w' − 1 lies in (−1, 0)
    let mut x = 0.5;
    for _ in 0..100 {
        let (y, dy) = map.tau_word_with_deriv(word, x)?;
        let step = (y - x) / (1.0 - dy);
        x += step;
        if step.abs() <= f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    let x = map.tau_word(word, x)?;
    let r = (map.tau_word(word, x)? - x).abs();
    if r < DEFAULT_ORBIT_TOL {
        Ok(x)
    } else {
        Err(Error::NoConvergence(format!("periodic point of {word:?}: residual {r:e}")))
    }
}

/// The orbit coded by `word`, with the Birkhoff mean of `f`.
pub fn periodic_orbit(map: &ExpandingMap, f: &Potential, word: &[u32]) -> Result<PeriodicOrbit> {
    let x = periodic_point(map, word)?;
    // y_j = τ_{i_j}(y_{j−1}) walks the orbit backwards: T(y_j) = y_{j−1}
    let mut back = Vec::with_capacity(word.len());
    let mut y = x;
    back.push(reduce(y));
    for &i in &word[..word.len() - 1] {
        y = map.inverse_branch(i, y)?;
        back.push(reduce(y));
    }
    let mut orbit = vec![back[0]];
    orbit.extend(back[1..].iter().rev());
    let average = orbit.iter().map(|&z| f.eval(z)).sum::<f64>() / orbit.len() as f64;
    Ok(PeriodicOrbit {
        word: word.to_vec(),
        point: orbit[0],
        orbit,
        average,
    })
}

/// All Lyndon words over `{0,…,alphabet−1}` of length `1..=max_len`, in
/// lexicographic order. Each primitive periodic orbit has exactly one.
pub fn lyndon_words(alphabet: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    if alphabet == 0 || max_len == 0 {
        return out;
    }
    let mut w: Vec<i64> = vec![-1];
    while let Some(last) = w.last_mut() {
        *last += 1;
        out.push(w.iter().map(|&c| c as u32).collect());
        let m = w.len();
        while w.len() < max_len {
            w.push(w[w.len() - m]);
        }
        while w.last() == Some(&(alphabet as i64 - 1)) {
            w.pop();
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct BetaResult {
    pub beta: f64,
    pub argmax: PeriodicOrbit,
    /// Smallest periodic average seen; `beta − min_average` is the spread.
    pub min_average: f64,
    pub orbits_examined: usize,
    pub orbits: Vec<PeriodicOrbit>,
}

fn better(a: &PeriodicOrbit, b: &PeriodicOrbit) -> bool {
    if a.average > b.average + TIE_TOL {
        return true;
    }
    if a.average < b.average - TIE_TOL {
        return false;
    }
    (a.period(), a.point, &a.word) < (b.period(), b.point, &b.word)
}

/// Maximum periodic Birkhoff average over primitive orbits of period `≤ p_max`.
pub fn beta_periodic(map: &ExpandingMap, f: &Potential, p_max: usize) -> Result<BetaResult> {
    if p_max == 0 {
        return Err(Error::InvalidArgument("p_max must be at least 1".into()));
    }
    let words = lyndon_words(map.degree(), p_max);
    let orbits: Vec<PeriodicOrbit> = words
        .par_iter()
        .map(|w| periodic_orbit(map, f, w))
        .collect::<Result<_>>()?;
    let mut best = &orbits[0];
    let mut min_average = f64::INFINITY;
    for o in &orbits {
        min_average = min_average.min(o.average);
        if better(o, best) {
            best = o;
        }
    }
    Ok(BetaResult {
        beta: best.average,
        argmax: best.clone(),
        min_average,
        orbits_examined: orbits.len(),
        orbits: orbits.clone(),
    })
}

/// `α(f) = −β(−f)`.
pub fn alpha_value(map: &ExpandingMap, f: &Potential, p_max: usize) -> Result<f64> {
    Ok(-beta_periodic(map, &f.negated(), p_max)?.beta)
}

/// `sign · log T̂'`.
pub fn lyapunov_potential(map: &ExpandingMap, sign: f64) -> Potential {
    Potential::log_derivative(sign, map)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateCheck {
    pub k: usize,
    /// `β(T^k, 𝒮_k f)` from orbits of `T^k`.
    pub beta_iterate: f64,
    /// `k · β(T, f)` from orbits of `T`.
    pub k_beta: f64,
    pub residual: f64,
}

/// Compares `β(T^k, 𝒮_k f)` with `k·β(T, f)`.
///
/// Orbits of `T^k` are enumerated over the alphabet `{0,…,d^k−1}`; a letter
/// `J = j_1 + j_2 d + ⋯ + j_k d^{k−1}` is the branch `T̂^{-k}(x+J) = τ_{j_k}∘⋯∘τ_{j_1}(x)`.
/// Averages of `𝒮_k f` come from forward Birkhoff sums.
pub fn iterate_equivalence(map: &ExpandingMap, f: &Potential, k: usize, p_max: usize) -> Result<IterateCheck> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let k_beta = k as f64 * beta_periodic(map, f, p_max)?.beta;
    if k == 1 {
        return Ok(IterateCheck {
            k,
            beta_iterate: k_beta,
            k_beta,
            residual: 0.0,
        });
    }
    let d = map.degree();
    let alphabet = d
        .checked_pow(k as u32)
        .ok_or_else(|| Error::InvalidArgument("d^k overflows".into()))?;
    let p_iter = (p_max / k).max(1);
    let words = lyndon_words(alphabet, p_iter);
    let averages: Vec<f64> = words
        .par_iter()
        .map(|w| {
            let digits: Vec<u32> = w
                .iter()
                .flat_map(|&letter| {
                    let mut j = letter;
                    (0..k).map(move |_| {
                        let r = j % d;
                        j /= d;
                        r
                    })
                })
                .collect();
            let x = periodic_point(map, &digits)?;
            Ok(birkhoff_sum(map, f, k * w.len(), reduce(x)) / w.len() as f64)
        })
        .collect::<Result<_>>()?;
    let beta_iterate = averages.into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(IterateCheck {
        k,
        beta_iterate,
        k_beta,
        residual: (beta_iterate - k_beta).abs(),
    })
}
