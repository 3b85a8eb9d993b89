//! Analytic expanding circle maps `T̂(x) = d·x + P(x)` and the potentials
//! evaluated over them.

use crate::error::{Error, Result};
use crate::trig::{reduce, TrigPoly};

/// Points in the grid used to certify `T̂' ≥ lambda_min`.
pub const CERT_GRID: usize = 1 << 14;
pub const DEFAULT_BRANCH_TOL: f64 = 1e-13;
pub const DEFAULT_SAFETY: f64 = 0.95;
pub const DEFAULT_N_MAX: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub n_max: usize,
    /// `lambda1 = safety · lambda0`.
    pub safety: f64,
    pub branch_tol: f64,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            safety: DEFAULT_SAFETY,
            branch_tol: DEFAULT_BRANCH_TOL,
        }
    }
}

/// Expansion data: `sup |τ'_{i,n}| ≤ C · lambda1^{-n}` for every `n ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionConstants {
    pub lambda0: f64,
    pub lambda1: f64,
    pub contraction_c: f64,
    /// The `n` at which `min |(T̂^n)'|^{1/n}` peaked.
    pub argmax_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpandingMap {
    degree: u32,
    perturbation: TrigPoly,
    dpert: TrigPoly,
    lambda_min: f64,
    sup_deriv: f64,
    consts: ExpansionConstants,
    options: MapOptions,
}

impl ExpandingMap {
    pub fn new(degree: u32, perturbation: TrigPoly) -> Result<Self> {
        Self::with_options(degree, perturbation, MapOptions::default())
    }

    pub fn linear(degree: u32) -> Result<Self> {
        Self::new(degree, TrigPoly::zero())
    }

    pub fn with_options(degree: u32, perturbation: TrigPoly, options: MapOptions) -> Result<Self> {
        if degree < 2 {
            return Err(Error::BadDegree(degree));
        }
        if options.n_max == 0 || !(options.safety > 0.0 && options.safety < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "n_max must be >= 1 and safety in (0,1), got {} and {}",
                options.n_max, options.safety
            )));
        }
        let p0 = perturbation.eval(0.0);
        if p0.abs() > 1e-14 {
            return Err(Error::PerturbationNotPinned(p0));
        }
        let dpert = perturbation.derivative();
        let d = degree as f64;
        // grid floor minus the worst drift of T̂' between nodes
        let h = 1.0 / CERT_GRID as f64;
        let lip2 = dpert.lipschitz_bound();
        let mut grid_min = f64::INFINITY;
        let mut grid_max = f64::NEG_INFINITY;
        for j in 0..CERT_GRID {
            let v = d + dpert.eval(j as f64 * h);
            grid_min = grid_min.min(v);
            grid_max = grid_max.max(v);
        }
        let lambda_min = grid_min - 0.5 * h * lip2;
        if lambda_min <= 1.0 {
            return Err(Error::NotExpanding { lambda_min });
        }
        let sup_deriv = grid_max + 0.5 * h * lip2;
        let mut map = Self {
            degree,
            perturbation,
            dpert,
            lambda_min,
            sup_deriv,
            consts: ExpansionConstants {
                lambda0: lambda_min,
                lambda1: lambda_min,
                contraction_c: 1.0,
                argmax_n: 1,
            },
            options,
        };
        map.consts = map.expansion_constants(options.n_max, options.safety);
        Ok(map)
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn perturbation(&self) -> &TrigPoly {
        &self.perturbation
    }

    pub fn is_linear(&self) -> bool {
        self.perturbation.is_zero()
    }

    /// Certified lower bound on `T̂'`.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// Certified upper bound on `T̂'`.
    pub fn sup_derivative(&self) -> f64 {
        self.sup_deriv
    }

    pub fn constants(&self) -> ExpansionConstants {
        self.consts
    }

    pub fn options(&self) -> MapOptions {
        self.options
    }

    pub fn branch_tol(&self) -> f64 {
        self.options.branch_tol
    }

    pub fn lift(&self, x: f64) -> f64 {
        self.degree as f64 * x + self.perturbation.eval(x)
    }

    pub fn lift_deriv(&self, x: f64) -> f64 {
        self.degree as f64 + self.dpert.eval(x)
    }

    /// `T̂''`, used by the log-derivative potential.
    pub fn lift_second_deriv(&self, x: f64) -> f64 {
        self.dpert.deriv(x)
    }

    /// Lipschitz bound on `T̂'`.
    pub fn second_deriv_bound(&self) -> f64 {
        self.dpert.lipschitz_bound()
    }

    /// The circle map `T(x) = T̂(x) mod 1`, result in `[0, 1)`.
    pub fn apply(&self, x: f64) -> f64 {
        reduce(self.lift(x))
    }

    /// `τ_i(x) = T̂^{-1}(x + i)`.
    pub fn inverse_branch(&self, i: u32, x: f64) -> Result<f64> {
        if i >= self.degree {
            return Err(Error::BranchOutOfRange {
                index: i,
                degree: self.degree,
            });
        }
        let target = x + i as f64;
        let d = self.degree as f64;
        if self.is_linear() {
            return Ok(target / d);
        }
        let spread = self.perturbation.sup_bound() / d + 1e-12;
        let mut lo = target / d - spread;
        let mut hi = target / d + spread;
        let mut y = target / d;
        let floor = 4.0 * f64::EPSILON * target.abs().max(1.0);
        for _ in 0..100 {
            let r = self.lift(y) - target;
            if r.abs() <= floor {
                return Ok(y);
            }
            if r > 0.0 {
                hi = hi.min(y);
            } else {
                lo = lo.max(y);
            }
            let step = r / self.lift_deriv(y);
            let mut next = y - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let moved = (next - y).abs();
            y = next;
            if moved <= 2.0 * f64::EPSILON * y.abs().max(1.0) {
                break;
            }
        }
        let r = self.lift(y) - target;
        if r.abs() < self.options.branch_tol {
            Ok(y)
        } else {
            Err(Error::NoConvergence(format!(
                "inverse branch {i} at x={x}: residual {r:e}"
            )))
        }
    }

    /// `τ_{i_n} ∘ ⋯ ∘ τ_{i_1}(x)`, with `i_1` applied first.
    pub fn tau_word(&self, word: &[u32], x: f64) -> Result<f64> {
        word.iter().try_fold(x, |y, &i| self.inverse_branch(i, y))
    }

    /// Computes `lambda0`, `lambda1` and `C` from `min |(T̂^n)'|` over the
    /// certification grid for `n ≤ n_max`.
    ///
    /// For `n = 1` the certified `lambda_min` is used. Beyond `n_max` the bound
    /// extends through `m_{a+b} ≥ m_a m_b` applied at the peak index.
    pub fn expansion_constants(&self, n_max: usize, safety: f64) -> ExpansionConstants {
        let n_max = n_max.max(1);
        let d = self.degree as f64;
        if self.is_linear() {
            let lambda1 = safety * d;
            return ExpansionConstants {
                lambda0: d,
                lambda1,
                contraction_c: 1.0,
                argmax_n: 1,
            };
        }
        let h = 1.0 / CERT_GRID as f64;
        let mut mins = vec![f64::INFINITY; n_max];
        for j in 0..CERT_GRID {
            let mut x = j as f64 * h;
            let mut prod = 1.0;
            for m in mins.iter_mut() {
                prod *= self.lift_deriv(x);
                *m = m.min(prod);
                x = self.apply(x);
            }
        }
        mins[0] = mins[0].min(self.lambda_min);
        let (mut lambda0, mut argmax_n) = (self.lambda_min, 1);
        for (k, &m) in mins.iter().enumerate() {
            let r = m.powf(1.0 / (k + 1) as f64);
            if r > lambda0 {
                lambda0 = r;
                argmax_n = k + 1;
            }
        }
        let lambda1 = safety * lambda0;
        let contraction_c = mins
            .iter()
            .enumerate()
            .map(|(k, &m)| lambda1.powi(k as i32 + 1) / m)
            .fold(1.0_f64, f64::max);
        ExpansionConstants {
            lambda0,
            lambda1,
            contraction_c,
            argmax_n,
        }
    }

    /// `τ_{w}(x)` together with its derivative in `x`.
    pub fn tau_word_with_deriv(&self, word: &[u32], x: f64) -> Result<(f64, f64)> {
        word.iter().try_fold((x, 1.0), |(y, dy), &i| {
            let z = self.inverse_branch(i, y)?;
            Ok((z, dy / self.lift_deriv(z)))
        })
    }

    /// `sup |τ'_{i,n}|` bound: `C · lambda1^{-n}`.
    pub fn contraction_bound(&self, n: usize) -> f64 {
        self.consts.contraction_c * self.consts.lambda1.powi(-(n as i32))
    }
}

/// Potentials `f: ℝ/ℤ → ℝ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Trig(TrigPoly),
    /// `λ^{-1}·φ∘T − φ + c`.
    Coboundary {
        phi: TrigPoly,
        lambda: f64,
        c: f64,
        map: Box<ExpandingMap>,
    },
    /// `sign · log T̂'`.
    LogDerivative { sign: f64, map: Box<ExpandingMap> },
}

impl Potential {
    pub fn trig(p: TrigPoly) -> Self {
        Potential::Trig(p)
    }

    /// `cos(2π(x − θ))`.
    pub fn cosine(theta: f64) -> Self {
        Potential::Trig(TrigPoly::cosine(1, 1.0, theta))
    }

    pub fn coboundary(phi: TrigPoly, lambda: f64, c: f64, map: &ExpandingMap) -> Result<Self> {
        if lambda == 0.0 || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("coboundary lambda must be nonzero, got {lambda}")));
        }
        Ok(Potential::Coboundary {
            phi,
            lambda,
            c,
            map: Box::new(map.clone()),
        })
    }

    pub fn log_derivative(sign: f64, map: &ExpandingMap) -> Self {
        Potential::LogDerivative {
            sign: sign.signum(),
            map: Box::new(map.clone()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Trig(p) => p.eval(x),
            Potential::Coboundary { phi, lambda, c, map } => {
                let x = reduce(x);
                phi.eval(map.lift(x)) / lambda - phi.eval(x) + c
            }
            Potential::LogDerivative { sign, map } => sign * map.lift_deriv(reduce(x)).ln(),
        }
    }

    pub fn lipschitz_bound(&self) -> f64 {
        match self {
            Potential::Trig(p) => p.lipschitz_bound(),
            Potential::Coboundary { phi, lambda, map, .. } => {
                let l = phi.lipschitz_bound();
                l * map.sup_derivative() / lambda.abs() + l
            }
            Potential::LogDerivative { map, .. } => map.second_deriv_bound() / map.lambda_min(),
        }
    }

    pub fn negated(&self) -> Potential {
        match self {
            Potential::Trig(p) => Potential::Trig(p.scaled(-1.0)),
            Potential::Coboundary { phi, lambda, c, map } => Potential::Coboundary {
                phi: phi.scaled(-1.0),
                lambda: *lambda,
                c: -c,
                map: map.clone(),
            },
            Potential::LogDerivative { sign, map } => Potential::LogDerivative {
                sign: -sign,
                map: map.clone(),
            },
        }
    }
}

/// `f + f∘T + ⋯ + f∘T^{k-1}` at `x`.
pub fn birkhoff_sum(map: &ExpandingMap, f: &Potential, k: usize, x: f64) -> f64 {
    let mut y = x;
    let mut acc = 0.0;
    for _ in 0..k {
        acc += f.eval(y);
        y = map.apply(y);
    }
    acc
}

/// `n` equally spaced points `j/n` on `[0, 1)`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn perturbed() -> ExpandingMap {
        ExpandingMap::new(2, TrigPoly::sine(1, 0.05)).unwrap()
    }

    #[test]
    fn lift_examples() {
        let m = ExpandingMap::linear(2).unwrap();
        assert!((m.lift(0.3) - 0.6).abs() < 1e-15);
        assert!((m.lift(1.3) - (m.lift(0.3) + 2.0)).abs() < 1e-14);
        assert!((perturbed().lift(0.25) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn lift_periodicity_on_grid() {
        let m = ExpandingMap::new(3, TrigPoly::new(0.0, vec![(0.02, 0.05), (-0.02, 0.01)])).unwrap();
        for j in 0..10_000 {
            let x = j as f64 / 10_000.0;
            assert!((m.lift(x + 1.0) - m.lift(x) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_branch_examples() {
        let m = ExpandingMap::linear(2).unwrap();
        assert_eq!(m.inverse_branch(0, 0.5).unwrap(), 0.25);
        assert_eq!(m.inverse_branch(1, 0.5).unwrap(), 0.75);
        let p = perturbed();
        assert!((p.inverse_branch(0, 0.55).unwrap() - 0.25).abs() < 1e-13);
        assert!(matches!(m.inverse_branch(2, 0.1), Err(Error::BranchOutOfRange { .. })));
    }

    #[test]
    fn inverse_branch_residual_and_monotone() {
        let p = perturbed();
        for i in 0..2 {
            let mut prev = f64::NEG_INFINITY;
            for j in 0..500 {
                let x = j as f64 / 500.0;
                let y = p.inverse_branch(i, x).unwrap();
                assert!((p.lift(y) - (x + i as f64)).abs() < p.branch_tol());
                assert!(y > prev);
                prev = y;
            }
        }
    }

    #[test]
    fn tau_word_examples() {
        let m2 = ExpandingMap::linear(2).unwrap();
        assert_eq!(m2.tau_word(&[0, 0, 0], 0.0).unwrap(), 0.0);
        assert_eq!(m2.tau_word(&[1, 0], 0.0).unwrap(), 0.25);
        let m3 = ExpandingMap::linear(3).unwrap();
        assert!((m3.tau_word(&[2, 1], 0.5).unwrap() - 11.0 / 18.0).abs() < 1e-15);
    }

    #[test]
    fn tau_word_is_nested_branches() {
        let p = perturbed();
        let word = [1, 0, 1, 1, 0];
        let mut y = 0.37;
        for &i in &word {
            y = p.inverse_branch(i, y).unwrap();
        }
        assert_eq!(p.tau_word(&word, 0.37).unwrap(), y);
    }

    #[test]
    fn rejects_non_expanding() {
        let err = ExpandingMap::new(2, TrigPoly::sine(1, 0.2)).unwrap_err();
        assert!(matches!(err, Error::NotExpanding { .. }));
        assert!(err.to_string().contains("lambda_min"));
        assert!(matches!(
            ExpandingMap::new(2, TrigPoly::new(0.0, vec![(0.05, 0.0)])),
            Err(Error::PerturbationNotPinned(_))
        ));
        assert!(matches!(ExpandingMap::linear(1), Err(Error::BadDegree(1))));
    }

    #[test]
    fn expansion_constants_linear() {
        let c = ExpandingMap::linear(2).unwrap().constants();
        assert_eq!(c.lambda0, 2.0);
        assert_eq!(c.contraction_c, 1.0);
        assert!(c.lambda1 < 2.0);
    }

    #[test]
    fn expansion_constants_perturbed_bracket() {
        let p = perturbed();
        let c = p.constants();
        let floor = 2.0 - 0.1 * PI;
        assert!(c.lambda0 >= floor - 1e-9 && c.lambda0 <= 2.0, "{c:?}");
        assert!(c.lambda1 < c.lambda0 && c.lambda1 > 1.0);
        assert!(p.lambda_min() <= floor + 1e-12 && p.lambda_min() > floor - 1e-3);
    }

    #[test]
    fn birkhoff_examples() {
        let m = ExpandingMap::linear(2).unwrap();
        let f = Potential::cosine(0.0);
        assert_eq!(birkhoff_sum(&m, &f, 1, 0.37), f.eval(0.37));
        assert!((birkhoff_sum(&m, &f, 2, 0.0) - 2.0).abs() < 1e-15);
        let expected = (TAU / 3.0).cos() + (2.0 * TAU / 3.0).cos();
        assert!((birkhoff_sum(&m, &f, 2, 1.0 / 3.0) - expected).abs() < 1e-12);
        assert!((expected + 1.0).abs() < 1e-12);
    }

    #[test]
    fn potential_lipschitz_spot_check() {
        let p = perturbed();
        let pots = [
            Potential::cosine(0.3),
            Potential::coboundary(TrigPoly::cosine(1, 1.0, 0.0), 0.5, 0.3, &p).unwrap(),
            Potential::log_derivative(1.0, &p),
        ];
        for f in &pots {
            let lip = f.lipschitz_bound();
            for j in 0..400 {
                let x = j as f64 / 400.0;
                let y = x + 1e-3;
                assert!((f.eval(y) - f.eval(x)).abs() <= lip * 1e-3 * (1.0 + 1e-9));
                assert!((f.eval(x + 1.0) - f.eval(x)).abs() < 1e-12);
            }
        }
    }
}
