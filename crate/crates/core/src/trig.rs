//! Finite trigonometric polynomials in units of one circle turn.

use std::f64::consts::TAU;

/// `constant + Σ_k (a_k cos(2πkx) + b_k sin(2πkx))` for `k = 1..=K`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigPoly {
    pub constant: f64,
    /// `(cos, sin)` coefficient pairs; index 0 is frequency 1.
    pub harmonics: Vec<(f64, f64)>,
}

impl TrigPoly {
    pub fn new(constant: f64, harmonics: Vec<(f64, f64)>) -> Self {
        Self { constant, harmonics }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, Vec::new())
    }

    /// `amp · cos(2πk(x − shift))`.
    pub fn cosine(k: usize, amp: f64, shift: f64) -> Self {
        assert!(k >= 1);
        let mut h = vec![(0.0, 0.0); k];
        let phase = TAU * k as f64 * shift;
        h[k - 1] = (amp * phase.cos(), amp * phase.sin());
        Self::new(0.0, h)
    }

    /// `amp · sin(2πkx)`.
    pub fn sine(k: usize, amp: f64) -> Self {
        assert!(k >= 1);
        let mut h = vec![(0.0, 0.0); k];
        h[k - 1] = (0.0, amp);
        Self::new(0.0, h)
    }

    pub fn degree(&self) -> usize {
        self.harmonics.len()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.harmonics.iter().all(|&(a, b)| a == 0.0 && b == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = reduce(x);
        let mut acc = self.constant;
        for (k, &(a, b)) in self.harmonics.iter().enumerate() {
            let (s, c) = (TAU * (k + 1) as f64 * x).sin_cos();
            acc += a * c + b * s;
        }
        acc
    }

    /// First derivative in x.
    pub fn deriv(&self, x: f64) -> f64 {
        self.derivative().eval(x)
    }

    pub fn derivative(&self) -> TrigPoly {
        let harmonics = self
            .harmonics
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let w = TAU * (k + 1) as f64;
                (w * b, -w * a)
            })
            .collect();
        TrigPoly::new(0.0, harmonics)
    }

    /// Sum of coefficient moduli: an upper bound on `sup |self - constant|`.
    pub fn harmonic_l1(&self) -> f64 {
        self.harmonics.iter().map(|&(a, b)| a.hypot(b)).sum()
    }

    /// Upper bound on `sup |self|`.
    pub fn sup_bound(&self) -> f64 {
        self.constant.abs() + self.harmonic_l1()
    }

    /// Upper bound on the Lipschitz constant, `Σ 2πk·|(a_k, b_k)|`.
    pub fn lipschitz_bound(&self) -> f64 {
        self.derivative().harmonic_l1()
    }

    pub fn scaled(&self, s: f64) -> TrigPoly {
        TrigPoly::new(
            self.constant * s,
            self.harmonics.iter().map(|&(a, b)| (a * s, b * s)).collect(),
        )
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let n = self.degree().max(other.degree());
        let get = |p: &TrigPoly, k: usize| p.harmonics.get(k).copied().unwrap_or((0.0, 0.0));
        let harmonics = (0..n)
            .map(|k| {
                let (a1, b1) = get(self, k);
                let (a2, b2) = get(other, k);
                (a1 + a2, b1 + b2)
            })
            .collect();
        TrigPoly::new(self.constant + other.constant, harmonics)
    }
}

/// Reduce to `[0, 1)`. Keeps periodic evaluation exact for large arguments.
pub fn reduce(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}
