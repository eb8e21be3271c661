//! Exact Fourier expansions of mean functions.
//!
//! Polynomials live over `{-1,+1}^n` with the encoding `x̂_i = 2 x_i - 1`, so
//! bit 0 maps to `-1` and bit 1 to `+1`. Under this encoding the factor
//! `(1 - x̂_r)/2` selects the 0-child of a decision node and `(1 + x̂_r)/2`
//! the 1-child.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{fraction_string, half, parse_rational_at, Rational};
use crate::tree::{Restriction, Tree};

/// A set of variable indices, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(vars: impl IntoIterator<Item = u32>) -> Self {
        let mut v: Vec<u32> = vars.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn vars(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    /// Multiplies by `x̂_var`, using `x̂_var^2 = 1`.
    fn toggle(&self, var: u32) -> Self {
        let mut v = self.0.clone();
        match v.binary_search(&var) {
            Ok(i) => {
                v.remove(i);
            }
            Err(i) => v.insert(i, var),
        }
        Self(v)
    }

    /// `prod_{i in S} x̂_i` at the bit vector `x`.
    fn sign_at(&self, x: &[bool]) -> Result<bool> {
        let mut negative = false;
        for &v in &self.0 {
            let bit = x
                .get(v as usize - 1)
                .copied()
                .ok_or(Error::UnassignedVariable(v))?;
            negative ^= !bit;
        }
        Ok(negative)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("∅");
        }
        let items: Vec<String> = self.0.iter().map(u32::to_string).collect();
        f.write_str(&items.join(","))
    }
}

/// A multilinear polynomial `sum_S p̂(S) prod_{i in S} x̂_i` with no stored
/// zero coefficients, so equality is structural.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparsePoly {
    coeffs: BTreeMap<Monomial, Rational>,
}

impl SparsePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(Monomial::empty(), c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        let entry = self.coeffs.entry(m);
        match entry {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.coeffs.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Largest variable index appearing in a nonzero term.
    pub fn num_vars(&self) -> u32 {
        self.coeffs
            .keys()
            .filter_map(|m| m.vars().last().copied())
            .max()
            .unwrap_or(0)
    }

    fn scaled(&self, k: &Rational) -> Self {
        Self::from_terms(self.coeffs.iter().map(|(m, c)| (m.clone(), c * k)))
    }

    fn times_var(&self, var: u32) -> Self {
        Self::from_terms(self.coeffs.iter().map(|(m, c)| (m.toggle(var), c.clone())))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    /// Coefficient-wise `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.coeffs {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    /// `E[p] = p̂(∅)`.
    pub fn expectation(&self) -> Rational {
        self.coefficient(&Monomial::empty())
    }

    /// `sum_S p̂(S)^2`, which by Parseval equals `E_x[p(x̂)^2]`.
    pub fn norm2(&self) -> Rational {
        self.coeffs.values().map(|c| c * c).sum()
    }

    /// `sum_S |p̂(S)|`.
    pub fn l1_norm(&self) -> Rational {
        self.coeffs.values().map(|c| c.abs()).sum()
    }

    /// Evaluates at the `±1` image of the bit vector `x`.
    pub fn eval(&self, x: &[bool]) -> Result<Rational> {
        let mut acc = Rational::zero();
        for (m, c) in &self.coeffs {
            if m.sign_at(x)? {
                acc -= c;
            } else {
                acc += c;
            }
        }
        Ok(acc)
    }

    /// Substitutes `x̂_i = ±1` for every variable fixed by `pi`.
    pub fn restrict(&self, pi: &Restriction) -> Self {
        if pi.is_empty() {
            return self.clone();
        }
        let mut out = Self::zero();
        for (m, c) in &self.coeffs {
            let mut negative = false;
            let mut kept = Vec::with_capacity(m.degree());
            for &v in m.vars() {
                match pi.get(v) {
                    Some(bit) => negative ^= !bit,
                    None => kept.push(v),
                }
            }
            let c = if negative { -c.clone() } else { c.clone() };
            out.add_term(Monomial(kept), c);
        }
        out
    }

    /// `E[p | x agrees with pi]`, without building the restricted polynomial.
    pub fn mean_under(&self, pi: &Restriction) -> Rational {
        let mut acc = Rational::zero();
        for (m, c) in &self.coeffs {
            let mut negative = false;
            let mut all_fixed = true;
            for &v in m.vars() {
                match pi.get(v) {
                    Some(bit) => negative ^= !bit,
                    None => {
                        all_fixed = false;
                        break;
                    }
                }
            }
            if all_fixed {
                if negative {
                    acc -= c;
                } else {
                    acc += c;
                }
            }
        }
        acc
    }

    /// `Var[p] = sum_{S != ∅} p̂(S)^2`.
    pub fn variance(&self) -> Rational {
        let e = self.expectation();
        self.norm2() - &e * &e
    }

    /// Parses lines of the form `S : a/b` where `S` is `∅` (or `{}`) or a
    /// comma-separated list of variable indices. `#` comments, blank lines and
    /// an `n=<INT>` header line are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Self::zero();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let body = line.split('#').next().unwrap_or("");
            let trimmed = body.trim();
            let line_start = offset;
            offset += line.len();
            if trimmed.is_empty() || trimmed.starts_with("n=") {
                continue;
            }
            let (lhs, rhs) = trimmed.split_once(':').ok_or_else(|| Error::Syntax {
                pos: line_start,
                msg: "expected 'S : coefficient'".into(),
            })?;
            let lhs = lhs.trim();
            let mono = if lhs == "∅" || lhs == "{}" || lhs.is_empty() {
                Monomial::empty()
            } else {
                let mut vars = Vec::new();
                for item in lhs.trim_matches(|c| c == '{' || c == '}').split(',') {
                    let item = item.trim();
                    let item = item.strip_prefix('x').unwrap_or(item);
                    let v: i64 = item.parse().map_err(|_| Error::Syntax {
                        pos: line_start,
                        msg: format!("bad variable {item:?}"),
                    })?;
                    if v < 1 || v > u32::MAX as i64 {
                        return Err(Error::BadVariable(v));
                    }
                    vars.push(v as u32);
                }
                let m = Monomial::new(vars.iter().copied());
                if m.degree() != vars.len() {
                    return Err(Error::Syntax {
                        pos: line_start,
                        msg: "repeated variable in monomial".into(),
                    });
                }
                m
            };
            let rhs = rhs.trim();
            let pos = line_start + line.find(rhs).unwrap_or(0);
            let c = parse_rational_at(rhs, pos)?;
            p.add_term(mono, c);
        }
        Ok(p)
    }
}

impl fmt::Display for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (m, c) in &self.coeffs {
            writeln!(f, "{m} : {}", fraction_string(c))?;
        }
        Ok(())
    }
}

/// The Fourier expansion of `mu_t`, by the three-case recursion over the
/// tree: decision nodes contribute `((1 - x̂_r)/2)·p_0 + ((1 + x̂_r)/2)·p_1`,
/// stochastic nodes `(p_0 + p_1)/2`, leaves their constant.
pub fn a_fourier(t: &Tree) -> SparsePoly {
    match t {
        Tree::Leaf(v) => SparsePoly::constant(v.clone()),
        Tree::Decision { var, zero, one } => {
            let p0 = a_fourier(zero);
            let p1 = a_fourier(one);
            let h = half();
            let left = p0.scaled(&h).sub(&p0.times_var(*var).scaled(&h));
            let right = p1.scaled(&h).add(&p1.times_var(*var).scaled(&h));
            left.add(&right)
        }
        Tree::Stochastic { zero, one } => a_fourier(zero).add(&a_fourier(one)).scaled(&half()),
    }
}

/// `E_x[(mu_d(x) - mu_r(x))^2]` via Parseval on the coefficient difference.
pub fn l2_distance(r: &Tree, d: &Tree) -> Rational {
    a_fourier(d).sub(&a_fourier(r)).norm2()
}

pub fn variance(r: &Tree) -> Rational {
    a_fourier(r).variance()
}

/// `p(x̂) in [0,1]` for all `x` in `{0,1}^n`, by enumeration.
pub fn is_bounded(p: &SparsePoly, n: usize) -> Result<bool> {
    if n > 24 {
        return Err(Error::TooLarge {
            what: "n",
            value: n,
            limit: 24,
        });
    }
    for idx in 0..(1u64 << n) {
        let v = p.eval(&crate::tree::assignment(idx, n))?;
        if v.is_negative() || v > Rational::one() {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};
    use crate::tree::{assignment, parse_tree};

    const SAMPLE: &str = "(x1 (x2 0.9 0.1) ($ (x3 0.2 0.3) 0.5))";

    fn poly(s: &str) -> SparsePoly {
        a_fourier(&parse_tree(s).unwrap())
    }

    #[test]
    fn small_expansions() {
        assert_eq!(poly("0.3"), SparsePoly::constant(rat(3, 10)));
        let x1 = poly("(x1 0 1)");
        assert_eq!(x1.coefficient(&Monomial::empty()), rat(1, 2));
        assert_eq!(x1.coefficient(&Monomial::new([1])), rat(1, 2));
        assert_eq!(x1.num_terms(), 2);
        assert_eq!(poly("($ 0 1)"), SparsePoly::constant(rat(1, 2)));
    }

    #[test]
    fn encoding_selects_children() {
        // bit 0 is x̂ = -1 and must pick the 0-child
        let p = poly("(x1 0.25 0.75)");
        assert_eq!(p.eval(&[false]).unwrap(), rat(1, 4));
        assert_eq!(p.eval(&[true]).unwrap(), rat(3, 4));
    }

    #[test]
    fn expectation_and_norm() {
        assert_eq!(poly(SAMPLE).expectation(), rat(7, 16));
        assert_eq!(SparsePoly::constant(rat(2, 5)).expectation(), rat(2, 5));
        let parity = SparsePoly::from_terms([(Monomial::new([1]), rat(1, 2))]);
        assert_eq!(parity.expectation(), int(0));
        assert_eq!(poly("(x1 0 1)").norm2(), rat(1, 2));
        assert_eq!(SparsePoly::zero().norm2(), int(0));
    }

    #[test]
    fn subtraction_and_restriction() {
        let p = poly(SAMPLE);
        assert!(p.sub(&p).is_zero());
        let x1 = poly("(x1 0 1)");
        let pi = Restriction::new().with(1, true);
        assert_eq!(x1.restrict(&pi), SparsePoly::constant(int(1)));
        assert_eq!(x1.mean_under(&pi), int(1));
    }

    #[test]
    fn distances() {
        let r = parse_tree(SAMPLE).unwrap();
        assert_eq!(l2_distance(&r, &Tree::Leaf(rat(7, 16))), rat(539, 6400));
        assert_eq!(l2_distance(&r, &r), int(0));
        let coin = parse_tree("($ 0 1)").unwrap();
        assert_eq!(l2_distance(&coin, &Tree::Leaf(rat(1, 2))), int(0));
        assert_eq!(variance(&r), rat(539, 6400));
        assert_eq!(variance(&Tree::Leaf(rat(1, 3))), int(0));
        assert_eq!(variance(&parse_tree("(x1 0 1)").unwrap()), rat(1, 4));
    }

    #[test]
    fn sample_matches_mean_function() {
        let r = parse_tree(SAMPLE).unwrap();
        let p = a_fourier(&r);
        for idx in 0..8 {
            let x = assignment(idx, 3);
            assert_eq!(p.eval(&x).unwrap(), r.mu_eval(&x).unwrap());
        }
        assert!(p.degree() <= 2);
    }

    #[test]
    fn text_format() {
        let p = poly(SAMPLE);
        let text = p.to_string();
        assert_eq!(SparsePoly::parse(&text).unwrap(), p);
        let q = SparsePoly::parse("n=2\n∅ : 1/2\n1,2 : -1/4 # c\n").unwrap();
        assert_eq!(q.coefficient(&Monomial::new([1, 2])), rat(-1, 4));
        assert!(SparsePoly::parse("1 1/2").is_err());
        assert!(SparsePoly::parse("1,1 : 1/2").is_err());
    }

    #[test]
    fn boundedness_check() {
        assert!(is_bounded(&poly(SAMPLE), 3).unwrap());
        let bad = SparsePoly::from_terms([(Monomial::new([1]), int(1))]);
        assert!(!is_bounded(&bad, 1).unwrap());
    }
}
