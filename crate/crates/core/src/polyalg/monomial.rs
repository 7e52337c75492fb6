use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Exponent vector of a monomial in `n` variables.
///
/// The total order is graded: lower total degree first, and within one degree
/// the monomial with the larger leading exponent comes first, so that sorting
/// `[x2, x1, x1*x2, x1^2]` yields `[x1, x2, x1^2, x1*x2]`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Monomial(SmallVec<[u32; 4]>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(SmallVec::from_elem(0, nvars))
    }

    pub fn from_exponents(exps: &[u32]) -> Self {
        Monomial(SmallVec::from_slice(exps))
    }

    /// The monomial `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut m = Self::one(nvars);
        m.0[i] = 1;
        m
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.nvars(), other.nvars());
        Monomial(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }

    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    /// `other / self`, if `self` divides `other`.
    pub fn quotient_of(&self, other: &Monomial) -> Option<Monomial> {
        if !self.divides(other) {
            return None;
        }
        Some(Monomial(
            other.0.iter().zip(self.0.iter()).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .filter(|(e, _)| **e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    /// Partial derivative with respect to `x_i`: returns the multiplier and the new monomial.
    pub fn derivative(&self, i: usize) -> Option<(f64, Monomial)> {
        let e = self.0[i];
        if e == 0 {
            return None;
        }
        let mut m = self.clone();
        m.0[i] -= 1;
        Some((e as f64, m))
    }

    /// All monomials in `nvars` variables with total degree in `[dmin, dmax]`, sorted.
    pub fn all_up_to(nvars: usize, dmin: u32, dmax: u32) -> Vec<Monomial> {
        let mut out = Vec::new();
        for d in dmin..=dmax {
            let mut cur = vec![0u32; nvars];
            of_degree(nvars, d, 0, &mut cur, &mut out);
        }
        out.sort();
        out
    }

    /// Parse `1`, `x2`, `x1^2*x3`.
    pub fn parse(s: &str, nvars: usize) -> Result<Monomial> {
        let s = s.trim();
        let mut m = Monomial::one(nvars);
        if s == "1" {
            return Ok(m);
        }
        for factor in s.split('*') {
            let factor = factor.trim();
            let (var, pow) = match factor.split_once('^') {
                Some((v, p)) => (
                    v,
                    p.parse::<u32>()
                        .map_err(|_| Error::Format(format!("bad exponent in '{factor}'")))?,
                ),
                None => (factor, 1),
            };
            let idx = var
                .strip_prefix('x')
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1 && k <= nvars)
                .ok_or_else(|| Error::Format(format!("unknown variable '{var}'")))?;
            m.0[idx - 1] += pow;
        }
        Ok(m)
    }
}

fn of_degree(nvars: usize, left: u32, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if pos + 1 == nvars {
        cur[pos] = left;
        out.push(Monomial::from_exponents(cur));
        cur[pos] = 0;
        return;
    }
    if nvars == 0 {
        if left == 0 {
            out.push(Monomial::from_exponents(&[]));
        }
        return;
    }
    for e in 0..=left {
        cur[pos] = e;
        of_degree(nvars, left - e, pos + 1, cur, out);
    }
    cur[pos] = 0;
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_order_puts_leading_variable_first() {
        let ms = Monomial::all_up_to(2, 1, 2);
        let names: Vec<String> = ms.iter().map(|m| m.to_string()).collect();
        assert_eq!(names, ["x1", "x2", "x1^2", "x1*x2", "x2^2"]);
    }

    #[test]
    fn parse_roundtrip() {
        let m = Monomial::parse("x1^2*x3", 3).unwrap();
        assert_eq!(m.exponents(), &[2, 0, 1]);
        assert_eq!(Monomial::parse(&m.to_string(), 3).unwrap(), m);
        assert!(Monomial::parse("x4", 3).is_err());
        assert!(Monomial::parse("1", 2).unwrap().is_one());
    }

    #[test]
    fn quotient() {
        let a = Monomial::from_exponents(&[1, 2]);
        let b = Monomial::from_exponents(&[0, 1]);
        assert_eq!(b.quotient_of(&a).unwrap().exponents(), &[1, 1]);
        assert!(a.quotient_of(&b).is_none());
    }
}
