//! Truncated elements of `Σ_d = {0,…,d−1}^ℕ` with carry addition.
//!
//! A depth-`K` element is the class of a d-adic integer modulo `d^K`. All
//! arithmetic is exact on small integer digits.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;

use crate::error::{Error, Result};

pub const DEFAULT_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DadicInt {
    base: u32,
    digits: Vec<u32>,
}

impl DadicInt {
    pub fn new(base: u32, digits: Vec<u32>) -> Result<Self> {
        if base < 2 {
            return Err(Error::BadDegree(base));
        }
        if let Some(&digit) = digits.iter().find(|&&x| x >= base) {
            return Err(Error::BadDigit { digit, base });
        }
        Ok(Self { base, digits })
    }

    pub fn zero(base: u32, depth: usize) -> Self {
        Self {
            base,
            digits: vec![0; depth],
        }
    }

    /// `ι(m)`: base-`d` digits of `m`, least significant first, truncated to `depth`.
    pub fn iota(m: u64, base: u32, depth: usize) -> Self {
        let mut digits = Vec::with_capacity(depth);
        let mut r = m;
        for _ in 0..depth {
            digits.push((r % base as u64) as u32);
            r /= base as u64;
        }
        Self { base, digits }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn depth(&self) -> usize {
        self.digits.len()
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn digit(&self, n: usize) -> u32 {
        self.digits.get(n).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.digits.iter().all(|&x| x == 0)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.base != other.base || self.depth() != other.depth() {
            return Err(Error::GroupMismatch(self.base, self.depth(), other.base, other.depth()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut carry = 0u64;
        let b = self.base as u64;
        let digits = self
            .digits
            .iter()
            .zip(&other.digits)
            .map(|(&x, &y)| {
                let s = x as u64 + y as u64 + carry;
                carry = s / b;
                (s % b) as u32
            })
            .collect();
        Ok(Self {
            base: self.base,
            digits,
        })
    }

    /// Additive inverse modulo `d^K`.
    pub fn neg(&self) -> Self {
        // −a = (d^K − 1 − a) + 1, digit-wise complement then increment
        let complement = Self {
            base: self.base,
            digits: self.digits.iter().map(|&x| self.base - 1 - x).collect(),
        };
        complement.adding_machine()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// `a + ι(1)`.
    pub fn adding_machine(&self) -> Self {
        let mut digits = self.digits.clone();
        for x in digits.iter_mut() {
            if *x + 1 == self.base {
                *x = 0;
            } else {
                *x += 1;
                break;
            }
        }
        Self {
            base: self.base,
            digits,
        }
    }

    /// `(k0, a_1, …, a_{K−1})`: shift right, dropping the last digit.
    pub fn prepend(&self, k0: u32) -> Result<Self> {
        if k0 >= self.base {
            return Err(Error::BadDigit {
                digit: k0,
                base: self.base,
            });
        }
        let mut digits = Vec::with_capacity(self.depth());
        if self.depth() > 0 {
            digits.push(k0);
            digits.extend_from_slice(&self.digits[..self.depth() - 1]);
        }
        Ok(Self {
            base: self.base,
            digits,
        })
    }

    /// `i_1 + i_2 d + ⋯ + i_n d^{n−1}` for the first `n` digits.
    pub fn value_mod(&self, n: usize) -> BigUint {
        let b = BigUint::from(self.base);
        self.digits[..n.min(self.depth())]
            .iter()
            .rev()
            .fold(BigUint::from(0u32), |acc, &x| acc * &b + BigUint::from(x))
    }

    /// Integer value of the first `n` digits, when it fits in `u128`.
    pub fn prefix_value(&self, n: usize) -> Option<u128> {
        let mut acc: u128 = 0;
        for &x in self.digits[..n.min(self.depth())].iter().rev() {
            acc = acc.checked_mul(self.base as u128)?.checked_add(x as u128)?;
        }
        Some(acc)
    }
}

impl fmt::Display for DadicInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:", self.base, self.depth())?;
        for (j, x) in self.digits.iter().enumerate() {
            if j > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

impl FromStr for DadicInt {
    type Err = Error;

    /// Parses `d:K:i1,i2,…`; missing trailing digits are zero.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("bad d-adic literal {s:?}: {msg}"));
        let mut parts = s.trim().splitn(3, ':');
        let base: u32 = parts
            .next()
            .and_then(|x| x.trim().parse().ok())
            .ok_or_else(|| bad("base"))?;
        let depth: usize = parts
            .next()
            .and_then(|x| x.trim().parse().ok())
            .ok_or_else(|| bad("depth"))?;
        let body = parts.next().unwrap_or("").trim();
        let mut digits = Vec::with_capacity(depth);
        if !body.is_empty() {
            for tok in body.split(',') {
                digits.push(tok.trim().parse::<u32>().map_err(|_| bad("digit"))?);
            }
        }
        if digits.len() > depth {
            return Err(bad("more digits than depth"));
        }
        digits.resize(depth, 0);
        DadicInt::new(base, digits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(base: u32, digits: &[u32]) -> DadicInt {
        DadicInt::new(base, digits.to_vec()).unwrap()
    }

    #[test]
    fn add_examples() {
        let k = 8;
        assert_eq!(
            DadicInt::iota(1, 2, k).add(&DadicInt::iota(1, 2, k)).unwrap(),
            DadicInt::iota(2, 2, k)
        );
        assert_eq!(DadicInt::iota(2, 2, 4).digits(), &[0, 1, 0, 0]);
        let s = DadicInt::iota(7, 10, k).add(&DadicInt::iota(5, 10, k)).unwrap();
        assert_eq!(&s.digits()[..3], &[2, 1, 0]);
        assert_eq!(w(2, &[1, 1, 1, 1]).add(&DadicInt::iota(1, 2, 4)).unwrap(), DadicInt::zero(2, 4));
    }

    #[test]
    fn add_mismatch() {
        assert!(matches!(
            DadicInt::iota(1, 2, 4).add(&DadicInt::iota(1, 3, 4)),
            Err(Error::GroupMismatch(..))
        ));
        assert!(DadicInt::iota(1, 2, 4).add(&DadicInt::iota(1, 2, 5)).is_err());
    }

    #[test]
    fn neg_examples() {
        assert_eq!(DadicInt::zero(2, 4).neg(), DadicInt::zero(2, 4));
        assert_eq!(DadicInt::iota(1, 2, 4).neg(), w(2, &[1, 1, 1, 1]));
        assert_eq!(DadicInt::iota(5, 3, 3).neg(), DadicInt::iota(22, 3, 3));
    }

    #[test]
    fn iota_examples() {
        assert!(DadicInt::iota(0, 7, 5).is_zero());
        assert_eq!(&DadicInt::iota(6, 2, 6).digits()[..4], &[0, 1, 1, 0]);
        assert_eq!(DadicInt::iota(137, 5, 3).digits(), &[2, 2, 0]);
    }

    #[test]
    fn adding_machine_examples() {
        assert_eq!(DadicInt::zero(3, 5).adding_machine(), DadicInt::iota(1, 3, 5));
        assert_eq!(w(2, &[1, 0, 1, 0]).adding_machine(), w(2, &[0, 1, 1, 0]));
    }

    #[test]
    fn adding_machine_single_cycle() {
        let start = DadicInt::zero(2, 6);
        let mut seen = std::collections::HashSet::new();
        let mut a = start.clone();
        loop {
            assert!(seen.insert(a.clone()));
            a = a.adding_machine();
            if a == start {
                break;
            }
        }
        assert_eq!(seen.len(), 64);
    }

    #[test]
    fn prepend_examples() {
        assert_eq!(DadicInt::zero(2, 6).prepend(0).unwrap(), DadicInt::zero(2, 6));
        assert_eq!(DadicInt::iota(1, 2, 6).prepend(1).unwrap(), DadicInt::iota(3, 2, 6));
        assert_eq!(DadicInt::iota(4, 3, 6).prepend(2).unwrap(), DadicInt::iota(14, 3, 6));
        assert!(DadicInt::iota(4, 3, 6).prepend(3).is_err());
    }

    #[test]
    fn value_mod_matches_prefix() {
        let a = DadicInt::iota(137, 5, 6);
        assert_eq!(a.value_mod(3), BigUint::from(12u32));
        assert_eq!(a.prefix_value(6), Some(137));
    }

    #[test]
    fn text_round_trip() {
        let a = w(3, &[2, 1, 0, 2]);
        assert_eq!(a.to_string(), "3:4:2,1,0,2");
        assert_eq!("3:4:2,1,0,2".parse::<DadicInt>().unwrap(), a);
        assert_eq!("2:4:1".parse::<DadicInt>().unwrap(), DadicInt::iota(1, 2, 4));
        assert!("2:2:1,1,1".parse::<DadicInt>().is_err());
        assert!("2:3:2".parse::<DadicInt>().is_err());
    }
}
