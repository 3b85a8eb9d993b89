//! Certified evaluation of
//! `h_i(x) = Σ_{n≥1} λ^n (f̂∘τ_{i,n}(x) − f̂∘τ_{i,n}(0))`
//! and the checks built on it: shift and functional identities, the
//! transversality scan, and the coboundary solver.

use num_complex::Complex64;
use rand::{Rng, RngExt};
use rayon::prelude::*;

use crate::circle::{ExpandingMap, Potential};
use crate::dadic::DadicInt;
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_AGREE_TOL: f64 = 1e-8;
pub const DEFAULT_SEP_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HValue {
    pub value: Complex64,
    pub truncation_n: usize,
    pub tail_bound: f64,
}

/// The family `{h_i}` for a fixed map, potential and `λ`.
#[derive(Debug, Clone)]
pub struct HFamily {
    map: ExpandingMap,
    f: Potential,
    lambda: Complex64,
    ratio: f64,
    lip_c: f64,
}

impl HFamily {
    /// Requires `0 < |λ| < lambda1` of the map.
    pub fn new(map: &ExpandingMap, f: &Potential, lambda: Complex64) -> Result<Self> {
        let modulus = lambda.norm();
        let lambda1 = map.constants().lambda1;
        if modulus == 0.0 || !modulus.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be nonzero, got {lambda}")));
        }
        if modulus >= lambda1 {
            return Err(Error::LambdaTooLarge { modulus, lambda1 });
        }
        Ok(Self {
            map: map.clone(),
            f: f.clone(),
            lambda,
            ratio: modulus / lambda1,
            lip_c: f.lipschitz_bound() * map.constants().contraction_c,
        })
    }

    pub fn real(map: &ExpandingMap, f: &Potential, lambda: f64) -> Result<Self> {
        Self::new(map, f, Complex64::new(lambda, 0.0))
    }

    pub fn map(&self) -> &ExpandingMap {
        &self.map
    }

    pub fn potential(&self) -> &Potential {
        &self.f
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    /// Geometric bound on `Σ_{n>N}` of the summands for a displacement of size `scale`.
    pub fn tail_bound(&self, n: usize, scale: f64) -> f64 {
        let r = self.ratio;
        self.lip_c * scale.max(1.0) * r.powi(n as i32 + 1) / (1.0 - r)
    }

    /// Smallest truncation whose tail bound is below `tol`.
    pub fn truncation_for(&self, tol: f64, scale: f64) -> usize {
        let mut n = 0;
        while self.tail_bound(n, scale) >= tol {
            n += 1;
            if n > 100_000 {
                break;
            }
        }
        n
    }

    /// `Σ λ^n (f̂∘τ_{i,n}(y) − f̂∘τ_{i,n}(x))`, i.e. `h_i(y) − h_i(x)`.
    pub fn eval_between(&self, word: &DadicInt, x: f64, y: f64, tol: f64) -> Result<HValue> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
        }
        if word.base() != self.map.degree() {
            return Err(Error::InvalidArgument(format!(
                "word base {} does not match map degree {}",
                word.base(),
                self.map.degree()
            )));
        }
        let scale = (y - x).abs();
        let n = self.truncation_for(tol, scale);
        if n > word.depth() {
            return Err(Error::DepthInsufficient {
                tol,
                depth: word.depth(),
                needed: n,
            });
        }
        let mut value = Complex64::new(0.0, 0.0);
        if x != y {
            let (mut u, mut v) = (x, y);
            let mut pow = Complex64::new(1.0, 0.0);
            for &digit in &word.digits()[..n] {
                u = self.map.inverse_branch(digit, u)?;
                v = self.map.inverse_branch(digit, v)?;
                pow *= self.lambda;
                value += pow * (self.f.eval(v) - self.f.eval(u));
            }
        }
        Ok(HValue {
            value,
            truncation_n: n,
            tail_bound: self.tail_bound(n, scale),
        })
    }

    /// `h_i(x)` to within `tol`.
    pub fn eval(&self, word: &DadicInt, x: f64, tol: f64) -> Result<HValue> {
        self.eval_between(word, 0.0, x, tol)
    }

    /// `max_x |(h_i(x+m) − h_i(m)) − h_{i+ι(m)}(x)|` over the grid.
    ///
    /// Every `h_j` vanishes at 0, so the shifted function is compared after
    /// re-basing at `m`; the two sides then differ only by truncation.
    pub fn shift_identity_check(&self, word: &DadicInt, m: u64, grid: &[f64], tol: f64) -> Result<f64> {
        let shifted = word.add(&DadicInt::iota(m, word.base(), word.depth()))?;
        max_over(grid, |x| {
            let lhs = self.eval_between(word, m as f64, x + m as f64, tol)?.value;
            let rhs = self.eval(&shifted, x, tol)?.value;
            Ok((lhs - rhs).norm())
        })
    }

    /// `max_x |h_𝟎(T̂x) − λ(f̂(x) − f̂(0) + h_𝟎(x))|` over the grid.
    pub fn functional_equation_check(&self, grid: &[f64], tol: f64, depth: usize) -> Result<f64> {
        let zero = DadicInt::zero(self.map.degree(), depth);
        let f0 = self.f.eval(0.0);
        max_over(grid, |x| {
            let lhs = self.eval(&zero, self.map.lift(x), tol)?.value;
            let rhs = self.lambda * (self.f.eval(x) - f0 + self.eval(&zero, x, tol)?.value);
            Ok((lhs - rhs).norm())
        })
    }

    /// Tabulates `h_i` on the grid.
    pub fn table(&self, word: &DadicInt, grid: &[f64], tol: f64) -> Result<Vec<Complex64>> {
        grid.par_iter()
            .map(|&x| self.eval(word, x, tol).map(|h| h.value))
            .collect()
    }

    pub fn transversality_scan(&self, words: &[DadicInt], grid: &[f64], opts: &ScanOptions) -> Result<DichotomyVerdict> {
        if words.len() < 2 {
            return Err(Error::InvalidArgument("transversality scan needs at least two words".into()));
        }
        if !(opts.agree_tol < opts.sep_margin) {
            return Err(Error::InvalidArgument("agree_tol must be below sep_margin".into()));
        }
        let tables = words
            .iter()
            .map(|w| self.table(w, grid, opts.tol))
            .collect::<Result<Vec<_>>>()?;
        let mut pairs = Vec::new();
        for a in 0..words.len() {
            for b in a + 1..words.len() {
                let (mut max_dev, mut argmax_x) = (0.0, grid.first().copied().unwrap_or(0.0));
                for (k, &x) in grid.iter().enumerate() {
                    let dev = (tables[a][k] - tables[b][k]).norm();
                    if dev > max_dev {
                        max_dev = dev;
                        argmax_x = x;
                    }
                }
                pairs.push(PairDeviation {
                    word_i: words[a].clone(),
                    word_j: words[b].clone(),
                    max_dev,
                    argmax_x,
                });
            }
        }
        let outcome = if pairs.iter().all(|p| p.max_dev < opts.agree_tol) {
            Outcome::Degenerate
        } else if pairs.iter().all(|p| p.max_dev > opts.sep_margin) {
            Outcome::Transversal
        } else {
            Outcome::Inconclusive
        };
        let margin = pairs.iter().map(|p| p.max_dev).fold(f64::INFINITY, f64::min);
        Ok(DichotomyVerdict {
            outcome,
            witness_pairs: pairs,
            margin,
        })
    }

    /// Compares `h_𝟎(x+1)` with `h_𝟎(x)` on the grid.
    pub fn periodicity_test(&self, grid: &[f64], agree_tol: f64, tol: f64, depth: usize) -> Result<PeriodicityReport> {
        let zero = DadicInt::zero(self.map.degree(), depth);
        let devs: Vec<Complex64> = grid
            .par_iter()
            .map(|&x| self.eval_between(&zero, x, x + 1.0, tol).map(|h| h.value))
            .collect::<Result<_>>()?;
        let max_deviation = devs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let first = devs.first().copied().unwrap_or_default();
        let spread = devs.iter().map(|z| (z - first).norm()).fold(0.0, f64::max);
        Ok(PeriodicityReport {
            periodic: max_deviation < agree_tol,
            max_deviation,
            deviation_at_first: first,
            constant: spread < agree_tol,
            spread,
        })
    }

    /// Returns `φ = h_𝟎` on the grid and `c = f̂(0)` when `h_𝟎` is periodic,
    /// so that `f = λ^{-1}·φ∘T − φ + c`.
    pub fn cohomology_solve(&self, grid: &[f64], agree_tol: f64, tol: f64, depth: usize) -> Result<Cohomology> {
        let report = self.periodicity_test(grid, agree_tol, tol, depth)?;
        if !report.periodic {
            return Ok(Cohomology::NotCohomologous { certificate: report });
        }
        let zero = DadicInt::zero(self.map.degree(), depth);
        let c = self.f.eval(0.0);
        let rows: Vec<(Complex64, f64)> = grid
            .par_iter()
            .map(|&x| {
                let phi = self.eval(&zero, x, tol)?.value;
                let phi_t = self.eval(&zero, self.map.lift(x), tol)?.value;
                let rebuilt = phi_t / self.lambda - phi + c;
                Ok((phi, (self.f.eval(x) - rebuilt).norm()))
            })
            .collect::<Result<_>>()?;
        let residual = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        Ok(Cohomology::Cohomologous {
            grid: grid.to_vec(),
            phi: rows.into_iter().map(|r| r.0).collect(),
            c,
            residual,
        })
    }
}

fn max_over(grid: &[f64], g: impl Fn(f64) -> Result<f64> + Sync) -> Result<f64> {
    let vals: Vec<f64> = grid.par_iter().map(|&x| g(x)).collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub agree_tol: f64,
    pub sep_margin: f64,
    pub tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            agree_tol: DEFAULT_AGREE_TOL,
            sep_margin: DEFAULT_SEP_MARGIN,
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Degenerate,
    Transversal,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Degenerate => "degenerate",
            Outcome::Transversal => "transversal",
            Outcome::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDeviation {
    pub word_i: DadicInt,
    pub word_j: DadicInt,
    pub max_dev: f64,
    pub argmax_x: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DichotomyVerdict {
    pub outcome: Outcome,
    pub witness_pairs: Vec<PairDeviation>,
    /// Smallest pairwise deviation.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicityReport {
    pub periodic: bool,
    pub max_deviation: f64,
    /// `h_𝟎(x_0+1) − h_𝟎(x_0)` at the first grid point.
    pub deviation_at_first: Complex64,
    /// Whether `x ↦ h_𝟎(x+1) − h_𝟎(x)` is constant on the grid.
    pub constant: bool,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cohomology {
    Cohomologous {
        grid: Vec<f64>,
        phi: Vec<Complex64>,
        c: f64,
        residual: f64,
    },
    NotCohomologous {
        certificate: PeriodicityReport,
    },
}

/// `{ι(0), …, ι(2d−1)}` followed by `n_random` uniformly random words.
pub fn default_words<R: Rng + ?Sized>(base: u32, depth: usize, n_random: usize, rng: &mut R) -> Vec<DadicInt> {
    let mut words: Vec<DadicInt> = (0..2 * base as u64).map(|m| DadicInt::iota(m, base, depth)).collect();
    for _ in 0..n_random {
        let digits = (0..depth).map(|_| rng.random_range(0..base)).collect();
        words.push(DadicInt::new(base, digits).expect("digits drawn below base"));
    }
    words
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::uniform_grid;
    use crate::dadic::DEFAULT_DEPTH;
    use crate::trig::TrigPoly;
    use std::f64::consts::TAU;

    fn doubling() -> ExpandingMap {
        ExpandingMap::linear(2).unwrap()
    }

    fn iota(m: u64) -> DadicInt {
        DadicInt::iota(m, 2, DEFAULT_DEPTH)
    }

    /// Direct partial sums on the doubling map: `τ_{i,n}(x) = (x + v_n)/2^n`.
    fn oracle_doubling(m: u64, x: f64, terms: u32) -> f64 {
        (1..=terms)
            .map(|n| {
                let p = 2f64.powi(n as i32);
                let v = (m % (1u64 << n.min(63))) as f64;
                (TAU * (x + v) / p).cos() - (TAU * v / p).cos()
            })
            .sum()
    }

    #[test]
    fn zero_at_origin() {
        let h = HFamily::real(&doubling(), &Potential::cosine(0.0), 1.0).unwrap();
        for m in [0, 1, 5] {
            assert_eq!(h.eval(&iota(m), 0.0, 1e-10).unwrap().value, Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn doubling_cosine_matches_partial_sums() {
        let h = HFamily::real(&doubling(), &Potential::cosine(0.0), 1.0).unwrap();
        let v = h.eval(&iota(0), 0.5, 1e-10).unwrap();
        let oracle = oracle_doubling(0, 0.5, 60);
        assert!((oracle - (-1.3946498021251648)).abs() < 1e-12);
        assert!((v.value.re - oracle).abs() < 1e-10, "{v:?}");
        assert!(v.tail_bound < 1e-10);
        let v3 = h.eval(&iota(3), 0.3, 1e-10).unwrap();
        assert!((v3.value.re - oracle_doubling(3, 0.3, 60)).abs() < 1e-10);
    }

    #[test]
    fn coboundary_h_is_phi_minus_phi0() {
        let m = doubling();
        let phi = TrigPoly::cosine(1, 1.0, 0.0);
        let f = Potential::coboundary(phi.clone(), 1.0, 0.0, &m).unwrap();
        let h = HFamily::real(&m, &f, 1.0).unwrap();
        for word in [iota(0), iota(1), iota(6)] {
            for &x in &[0.1, 0.5, 0.9] {
                let v = h.eval(&word, x, 1e-10).unwrap().value.re;
                assert!((v - (phi.eval(x) - 1.0)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn halving_tol_moves_value_within_tail() {
        let m = ExpandingMap::new(2, TrigPoly::sine(1, 0.05)).unwrap();
        let h = HFamily::real(&m, &Potential::cosine(0.2), 0.9).unwrap();
        let mut tol = 1e-4;
        let mut prev = h.eval(&iota(5), 0.7, tol).unwrap();
        for _ in 0..10 {
            tol /= 2.0;
            let next = h.eval(&iota(5), 0.7, tol).unwrap();
            assert!((next.value - prev.value).norm() <= prev.tail_bound + 1e-15);
            prev = next;
        }
    }

    #[test]
    fn depth_too_shallow_errors() {
        let h = HFamily::real(&doubling(), &Potential::cosine(0.0), 1.0).unwrap();
        let short = DadicInt::iota(0, 2, 8);
        assert!(matches!(h.eval(&short, 0.5, 1e-10), Err(Error::DepthInsufficient { .. })));
        assert!(h.eval(&short, 0.5, 1e-1).is_ok());
    }

    #[test]
    fn lambda_guard() {
        let m = doubling();
        let f = Potential::cosine(0.0);
        assert!(matches!(HFamily::real(&m, &f, 1.95), Err(Error::LambdaTooLarge { .. })));
        assert!(HFamily::real(&m, &f, 0.0).is_err());
        assert!(HFamily::new(&m, &f, Complex64::new(0.6, 0.8)).is_ok());
    }

    #[test]
    fn unbased_shift_differs_by_constant() {
        let h = HFamily::real(&doubling(), &Potential::cosine(0.0), 1.0).unwrap();
        let h01 = h.eval(&iota(0), 1.0, 1e-10).unwrap().value.re;
        for &x in &[0.2, 0.6] {
            let lhs = h.eval(&iota(0), x + 1.0, 1e-10).unwrap().value.re;
            let rhs = h.eval(&iota(1), x, 1e-10).unwrap().value.re;
            assert!((lhs - rhs - h01).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_identity_examples() {
        let grid = uniform_grid(64);
        let h = HFamily::real(&doubling(), &Potential::cosine(0.0), 1.0).unwrap();
        assert_eq!(h.shift_identity_check(&iota(0), 0, &grid, 1e-10).unwrap(), 0.0);
        assert!(h.shift_identity_check(&iota(0), 1, &grid, 1e-10).unwrap() <= 2e-10);
        let m3 = ExpandingMap::new(3, TrigPoly::sine(1, 0.05)).unwrap();
        let h3 = HFamily::real(&m3, &Potential::cosine(0.0), 0.8).unwrap();
        let w = DadicInt::iota(5, 3, DEFAULT_DEPTH);
        assert!(h3.shift_identity_check(&w, 2, &grid, 1e-10).unwrap() <= 2e-10);
    }

    #[test]
    fn functional_equation_examples() {
        let grid = uniform_grid(128);
        for lambda in [1.0, 0.5] {
            let h = HFamily::real(&doubling(), &Potential::cosine(0.0), lambda).unwrap();
            assert!(h.functional_equation_check(&grid, 1e-10, DEFAULT_DEPTH).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn scan_identical_words_has_zero_deviation() {
        let h = HFamily::real(&doubling(), &Potential::cosine(0.0), 1.0).unwrap();
        let v = h
            .transversality_scan(&[iota(3), iota(3)], &uniform_grid(16), &ScanOptions::default())
            .unwrap();
        assert_eq!(v.witness_pairs[0].max_dev, 0.0);
        assert_eq!(v.outcome, Outcome::Degenerate);
        assert!(h.transversality_scan(&[iota(3)], &uniform_grid(16), &ScanOptions::default()).is_err());
    }

    #[test]
    fn scan_doubling_cosine_transversal() {
        let h = HFamily::real(&doubling(), &Potential::cosine(0.0), 1.0).unwrap();
        let words: Vec<_> = (0..4).map(iota).collect();
        let v = h.transversality_scan(&words, &uniform_grid(256), &ScanOptions::default()).unwrap();
        assert_eq!(v.outcome, Outcome::Transversal);
        assert!(v.margin > 1e-3);
        // h_{ι(0)} − h_{ι(1)} at 0.5 from the partial-sum oracle
        let gap = oracle_doubling(0, 0.5, 60) - oracle_doubling(1, 0.5, 60);
        assert!((gap - (-1.2388496624808223)).abs() < 1e-9);
        let hv = h.eval(&iota(0), 0.5, 1e-10).unwrap().value.re - h.eval(&iota(1), 0.5, 1e-10).unwrap().value.re;
        assert!((hv - gap).abs() < 1e-9);
    }

    #[test]
    fn periodicity_and_solver() {
        let m = doubling();
        let grid = uniform_grid(32);
        let h = HFamily::real(&m, &Potential::cosine(0.0), 1.0).unwrap();
        let rep = h.periodicity_test(&grid, 1e-8, 1e-10, DEFAULT_DEPTH).unwrap();
        assert!(!rep.periodic);
        // h_𝟎(1) = Σ (cos(2π/2^n) − 1)
        assert!((rep.deviation_at_first.re - oracle_doubling(0, 1.0, 60)).abs() < 1e-9);
        assert!((rep.deviation_at_first.re - (-3.3946498021251648)).abs() < 1e-9);
        assert!(matches!(
            h.cohomology_solve(&grid, 1e-8, 1e-10, DEFAULT_DEPTH).unwrap(),
            Cohomology::NotCohomologous { .. }
        ));

        let konst = Potential::trig(TrigPoly::constant(0.7));
        let hc = HFamily::real(&m, &konst, 1.0).unwrap();
        match hc.cohomology_solve(&grid, 1e-8, 1e-10, DEFAULT_DEPTH).unwrap() {
            Cohomology::Cohomologous { phi, c, residual, .. } => {
                assert!(phi.iter().all(|z| z.norm() == 0.0));
                assert_eq!(c, 0.7);
                assert!(residual < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn solver_recovers_coboundary() {
        let m = ExpandingMap::new(2, TrigPoly::sine(1, 0.05)).unwrap();
        let phi = TrigPoly::cosine(1, 1.0, 0.1);
        let (lambda, cstar) = (0.5, 0.3);
        let f = Potential::coboundary(phi.clone(), lambda, cstar, &m).unwrap();
        let h = HFamily::real(&m, &f, lambda).unwrap();
        let grid = uniform_grid(64);
        match h.cohomology_solve(&grid, 1e-8, 1e-10, DEFAULT_DEPTH).unwrap() {
            Cohomology::Cohomologous { phi: table, c, residual, .. } => {
                assert!(residual < 1e-8);
                let p0 = phi.eval(0.0);
                assert!((c - (p0 / lambda - p0 + cstar)).abs() < 1e-12);
                for (x, z) in grid.iter().zip(&table) {
                    assert!((z.re - (phi.eval(*x) - p0)).abs() < 1e-9);
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn complex_lambda_functional_equation() {
        let m = ExpandingMap::new(3, TrigPoly::sine(2, 0.03)).unwrap();
        let h = HFamily::new(&m, &Potential::cosine(0.4), Complex64::new(0.3, 0.9)).unwrap();
        let r = h.functional_equation_check(&uniform_grid(32), 1e-10, DEFAULT_DEPTH).unwrap();
        assert!(r <= (1.0 + h.lambda().norm()) * 2e-10);
    }
}
