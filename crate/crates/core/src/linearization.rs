//! The linearizing conjugacy `Θ∘T̂ = d·Θ`, inverse-limit coordinates
//! `ξ_m(k, x) = (x + k_1 + k_2 d + ⋯ + k_m d^{m−1}) / d^m`, the measure `μ`
//! on `Σ_d × [0,1)` with its shift `m_d`, the functions
//! `𝓗^s(k, x) = H_k(x+s) − H_k(x)` and Monte Carlo estimates of
//! `c^s_{m,q} = ∫ 𝓗^s · conj(E_{m,q}) dμ`.

use std::f64::consts::TAU;

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_integer::Integer;
use rand::RngExt;
use rayon::prelude::*;

use crate::circle::ExpandingMap;
use crate::dadic::DadicInt;
use crate::error::{Error, Result};
use crate::hfamily::HFamily;
use crate::rng;

pub const DEFAULT_CONJ_TOL: f64 = 1e-12;
const CACHE_NODES: usize = 1 << 12;
const SAMPLE_CHUNK: usize = 4096;

/// `T̂^n(x)/d^n`, evaluated as `x + Σ_{k<n} P(T^k x)/d^{k+1}`.
///
/// Consecutive depths differ by at most `sup|P|/d^{n+1}`, so the limit is
/// within `sup|P| / (d^n (d−1))` of the depth-`n` value.
pub fn theta_eval(map: &ExpandingMap, x: f64, n: usize) -> f64 {
    let p = map.perturbation();
    let d = map.degree() as f64;
    let mut y = x;
    let mut acc = x;
    let mut scale = 1.0 / d;
    for _ in 0..n {
        acc += p.eval(y) * scale;
        y = map.apply(y);
        scale /= d;
    }
    acc
}

#[derive(Debug, Clone)]
pub struct Conjugacy {
    map: ExpandingMap,
    depth: usize,
    conj_tol: f64,
    back_steps: usize,
    nodes: Vec<f64>,
}

impl Conjugacy {
    pub fn new(map: &ExpandingMap, conj_tol: f64) -> Result<Self> {
        if !(conj_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("conj_tol must be positive, got {conj_tol}")));
        }
        let d = map.degree() as f64;
        let sup_p = map.perturbation().sup_bound();
        let mut depth = 0;
        if !map.is_linear() {
            while sup_p / (d.powi(depth as i32) * (d - 1.0)) >= 0.25 * conj_tol {
                depth += 1;
            }
        }
        let nodes = (0..=CACHE_NODES)
            .into_par_iter()
            .map(|j| theta_eval(map, j as f64 / CACHE_NODES as f64, depth))
            .collect();
        let seed_err = sup_p / (d - 1.0);
        let mut back_steps = 0;
        if !map.is_linear() {
            while seed_err * map.contraction_bound(back_steps) >= 1e-4 * conj_tol {
                back_steps += 1;
            }
        }
        Ok(Self {
            map: map.clone(),
            depth,
            conj_tol,
            back_steps,
            nodes,
        })
    }

    pub fn map(&self) -> &ExpandingMap {
        &self.map
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn conj_tol(&self) -> f64 {
        self.conj_tol
    }

    pub fn theta(&self, x: f64) -> f64 {
        theta_eval(&self.map, x, self.depth)
    }

    /// Cached node value `Θ(j / 2^12)`, `j ∈ [0, 2^12]`.
    pub fn node(&self, j: usize) -> f64 {
        self.nodes[j]
    }

    /// Interpolated `Θ` between cached nodes (monotone, for plotting).
    pub fn theta_interp(&self, x: f64) -> f64 {
        let fl = x.floor();
        let t = (x - fl) * CACHE_NODES as f64;
        let j = (t as usize).min(CACHE_NODES - 1);
        let w = t - j as f64;
        fl + self.nodes[j] * (1.0 - w) + self.nodes[j + 1] * w
    }

    /// `Θ^{-1}(y)` from `Θ^{-1}(y) = τ_k(Θ^{-1}(dy − k))`, unrolled until the
    /// contracted error of the seed `Θ^{-1}(y_n) ≈ y_n` is negligible.
    pub fn theta_inverse(&self, y: f64) -> Result<f64> {
        if self.depth == 0 {
            return Ok(y);
        }
        let fl = y.floor();
        let target = y - fl;
        let d = self.map.degree();
        let mut digits = Vec::with_capacity(self.back_steps);
        let mut t = target;
        for _ in 0..self.back_steps {
            let dt = d as f64 * t;
            let k = (dt.floor().max(0.0) as u32).min(d - 1);
            digits.push(k);
            t = dt - k as f64;
        }
        let mut u = t;
        for &k in digits.iter().rev() {
            u = self.map.inverse_branch(k, u)?;
        }
        let r = (self.theta(u) - target).abs();
        if r < self.conj_tol {
            Ok(fl + u)
        } else {
            Err(Error::NoConvergence(format!("theta inverse at {y}: residual {r:e}")))
        }
    }

    /// `max |Θ(T̂x) − d·Θ(x)|` over the points.
    pub fn residual(&self, points: &[f64]) -> f64 {
        let d = self.map.degree() as f64;
        points
            .par_iter()
            .map(|&x| (self.theta(self.map.lift(x)) - d * self.theta(x)).abs())
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// `ξ_m(k, x)`; `ξ_0(k, x) = x`.
pub fn xi(word: &DadicInt, m: usize, x: f64) -> Result<f64> {
    if m > word.depth() {
        return Err(Error::IndexBeyondDepth { m, depth: word.depth() });
    }
    let d = word.base() as f64;
    Ok(word.digits()[..m].iter().fold(x, |acc, &k| (acc + k as f64) / d))
}

/// A point of `Σ_d × [0,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MuSample {
    pub digits: DadicInt,
    pub x: f64,
}

/// `m_d(k, x) = (k_0 k, d x − k_0)` with `k_0 = ⌊d x⌋`.
pub fn md_apply(k: &DadicInt, x: f64) -> Result<(DadicInt, f64)> {
    if !(0.0..1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("m_d needs x in [0,1), got {x}")));
    }
    let dx = k.base() as f64 * x;
    let k0 = (dx.floor() as u32).min(k.base() - 1);
    Ok((k.prepend(k0)?, dx - k0 as f64))
}

/// `n` draws from `μ`: i.i.d. uniform digits and an independent uniform `x`.
pub fn mu_samples(base: u32, depth: usize, n: usize, seed: u64) -> Vec<MuSample> {
    let chunks = n.div_ceil(SAMPLE_CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut r = rng::stream(seed, "mu", c as u64);
            let len = SAMPLE_CHUNK.min(n - c * SAMPLE_CHUNK);
            (0..len)
                .map(|_| {
                    let digits = (0..depth).map(|_| r.random_range(0..base)).collect();
                    MuSample {
                        digits: DadicInt::new(base, digits).expect("digits drawn below base"),
                        x: r.random::<f64>(),
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// One-sided Kolmogorov–Smirnov statistic against the uniform law on `[0,1)`.
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |acc, (i, &x)| {
        let lo = x - i as f64 / n;
        let hi = (i + 1) as f64 / n - x;
        acc.max(lo).max(hi)
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let t = a[i].min(b[j]);
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Critical value at `α = 0.01` for the one-sample test.
pub fn ks_critical(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Critical value at `α = 0.01` for the two-sample test.
pub fn ks_critical_two(n: usize, m: usize) -> f64 {
    1.63 * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierCoeff {
    pub s: i64,
    pub m: usize,
    pub q: i64,
    pub estimate: Complex64,
    pub std_error: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionCheck {
    /// `c^{ds}_{m+1,q}`.
    pub shifted: FourierCoeff,
    /// `c^s_{m,q}`.
    pub base: FourierCoeff,
    pub discrepancy: f64,
    pub threshold: f64,
}

impl RecursionCheck {
    pub fn pass(&self) -> bool {
        self.discrepancy <= self.threshold
    }
}

/// `h_k ∘ Θ^{-1}` machinery for one `(map, f, λ)`.
#[derive(Debug, Clone)]
pub struct Linearization {
    hfam: HFamily,
    conj: Conjugacy,
    tol: f64,
}

impl Linearization {
    pub fn new(hfam: HFamily, conj_tol: f64, tol: f64) -> Result<Self> {
        let conj = Conjugacy::new(hfam.map(), conj_tol)?;
        Ok(Self { hfam, conj, tol })
    }

    pub fn hfamily(&self) -> &HFamily {
        &self.hfam
    }

    pub fn conjugacy(&self) -> &Conjugacy {
        &self.conj
    }

    fn degree(&self) -> u32 {
        self.hfam.map().degree()
    }

    /// `H_k(x) = h_k(Θ^{-1}(x))`.
    pub fn big_h(&self, k: &DadicInt, x: f64) -> Result<Complex64> {
        let u = self.conj.theta_inverse(x)?;
        Ok(self.hfam.eval(k, u, self.tol)?.value)
    }

    /// `𝓗^s(k, x) = H_k(x+s) − H_k(x)`; since `Θ^{-1}(x+s) = Θ^{-1}(x)+s` this
    /// is one series between `u` and `u+s`.
    pub fn script_h(&self, s: i64, k: &DadicInt, x: f64) -> Result<Complex64> {
        if s == 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let u = self.conj.theta_inverse(x)?;
        self.script_h_pulled(s, k, u)
    }

    fn script_h_pulled(&self, s: i64, k: &DadicInt, u: f64) -> Result<Complex64> {
        if s == 0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        Ok(self.hfam.eval_between(k, u, u + s as f64, self.tol)?.value)
    }

    /// `max |𝓗^{ds}(m_d ω) − λ 𝓗^s(ω)|` over the samples.
    pub fn check_calhd(&self, s: i64, samples: &[MuSample]) -> Result<f64> {
        let d = self.degree() as i64;
        let lambda = self.hfam.lambda();
        let vals: Vec<f64> = samples
            .par_iter()
            .map(|w| {
                let (k1, x1) = md_apply(&w.digits, w.x)?;
                let lhs = self.script_h(d * s, &k1, x1)?;
                let rhs = lambda * self.script_h(s, &w.digits, w.x)?;
                Ok((lhs - rhs).norm())
            })
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    }

    /// Values of `𝓗^s` at each sample.
    pub fn script_h_samples(&self, s: i64, samples: &[MuSample]) -> Result<Vec<Complex64>> {
        samples.par_iter().map(|w| self.script_h(s, &w.digits, w.x)).collect()
    }

    /// Monte Carlo estimate of `c^s_{m,q}` from `n_samples` draws of `μ`.
    pub fn fourier_c(&self, s: i64, m: usize, q: i64, n_samples: usize, seed: u64) -> Result<FourierCoeff> {
        let samples = mu_samples(self.degree(), crate::dadic::DEFAULT_DEPTH, n_samples, seed);
        let values = self.script_h_samples(s, &samples)?;
        coefficient(s, m, q, &samples, &values)
    }

    /// Paired estimates of `c^{ds}_{m+1,q}` (integrand evaluated at `m_d ω`) and
    /// `λ c^s_{m,q}` (at `ω`) over the same draws.
    pub fn check_cmrec(&self, s: i64, m: usize, q: i64, n_samples: usize, seed: u64) -> Result<RecursionCheck> {
        let paired = PairedSamples::draw(self, s, n_samples, seed)?;
        paired.check(m, q)
    }
}

/// `𝓗^{ds}∘m_d` and `𝓗^s` at the same draws, reusable across `(m, q)`.
#[derive(Debug, Clone)]
pub struct PairedSamples {
    s: i64,
    d: i64,
    lambda: Complex64,
    base: Vec<MuSample>,
    mapped: Vec<MuSample>,
    h_base: Vec<Complex64>,
    h_mapped: Vec<Complex64>,
}

impl PairedSamples {
    pub fn draw(lin: &Linearization, s: i64, n_samples: usize, seed: u64) -> Result<Self> {
        let d = lin.degree() as i64;
        let base = mu_samples(lin.degree(), crate::dadic::DEFAULT_DEPTH, n_samples, seed);
        let mapped = base
            .iter()
            .map(|w| md_apply(&w.digits, w.x).map(|(digits, x)| MuSample { digits, x }))
            .collect::<Result<Vec<_>>>()?;
        let (h_base, h_mapped): (Vec<_>, Vec<_>) = base
            .par_iter()
            .zip(mapped.par_iter())
            .map(|(w, w1)| {
                let u1 = lin.conj.theta_inverse(w1.x)?;
                let u = lin.hfam.map().inverse_branch(w1.digits.digit(0), u1)?;
                Ok((
                    lin.script_h_pulled(s, &w.digits, u)?,
                    lin.script_h_pulled(d * s, &w1.digits, u1)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(Self {
            s,
            d,
            lambda: lin.hfam.lambda(),
            base,
            mapped,
            h_base,
            h_mapped,
        })
    }

    pub fn check(&self, m: usize, q: i64) -> Result<RecursionCheck> {
        let shifted = coefficient(self.d * self.s, m + 1, q, &self.mapped, &self.h_mapped)?;
        let base = coefficient(self.s, m, q, &self.base, &self.h_base)?;
        let discrepancy = (shifted.estimate - self.lambda * base.estimate).norm();
        let threshold = 3.0 * (shifted.std_error + self.lambda.norm() * base.std_error);
        Ok(RecursionCheck {
            shifted,
            base,
            discrepancy,
            threshold,
        })
    }
}

fn coefficient(s: i64, m: usize, q: i64, samples: &[MuSample], values: &[Complex64]) -> Result<FourierCoeff> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let terms = samples
        .iter()
        .zip(values)
        .map(|(w, &h)| {
            let phase = -TAU * xi(&w.digits, m, w.x)? * q as f64;
            Ok(h * Complex64::from_polar(1.0, phase))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = terms.iter().sum::<Complex64>() / n as f64;
    let var = terms.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1) as f64;
    Ok(FourierCoeff {
        s,
        m,
        q,
        estimate: mean,
        std_error: (var / n as f64).sqrt(),
        n_samples: n,
    })
}

/// Smallest `m_*` with `q·z_{m'} ∉ ℤ` for every `m_* ≤ m' ≤ K`, where
/// `z_m = (i_1 + ⋯ + i_m d^{m−1}) / d^m`. Exact integer arithmetic.
pub fn zm_nonvanish(word: &DadicInt, q: i64) -> Result<usize> {
    if q == 0 {
        return Err(Error::InvalidArgument("q must be nonzero".into()));
    }
    if word.is_zero() {
        return Err(Error::ZeroWord(word.depth()));
    }
    let q = BigInt::from(q);
    let d = BigUint::from(word.base());
    let nonzero = |m: usize| {
        let modulus = BigInt::from(d.pow(m as u32));
        let v = BigInt::from(word.value_mod(m));
        !(&q * v).mod_floor(&modulus).eq(&BigInt::from(0))
    };
    let k = word.depth();
    if !nonzero(k) {
        return Err(Error::NotWithinDepth(k));
    }
    let mut m_star = k;
    while m_star > 1 && nonzero(m_star - 1) {
        m_star -= 1;
    }
    Ok(m_star)
}
