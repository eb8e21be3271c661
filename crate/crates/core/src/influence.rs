//! Influence of variables on the mean function of a tree, the OSSS
//! inequality for randomized trees, and a path-counting surrogate for the
//! influence of a root query.
//!
//! `Inf_i(f) = E_x[|f(x) - f(x with bit i flipped)|]`.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::fourier;
use crate::rational::{half, int, pow2_inv, Rational};
use crate::tree::{Restriction, Tree};

/// Most relevant variables a mean-function table will enumerate.
pub const MAX_TABLE_VARS: usize = 24;

/// `mu` tabulated over every assignment to the variables a tree queries.
/// Entry `j` holds the value at the assignment whose bit `k` is the value of
/// `vars[k]`. Values are stored as integers over one common denominator when
/// that fits in 128 bits.
#[derive(Clone, Debug)]
pub struct MuTable {
    vars: Vec<u32>,
    values: Values,
}

#[derive(Clone, Debug)]
enum Values {
    Scaled { num: Vec<i128>, den: BigInt },
    Exact(Vec<Rational>),
}

impl MuTable {
    pub fn new(t: &Tree) -> Result<Self> {
        let vars: Vec<u32> = t.decision_vars().into_iter().collect();
        if vars.len() > MAX_TABLE_VARS {
            return Err(Error::TooLarge {
                what: "queried variables",
                value: vars.len(),
                limit: MAX_TABLE_VARS,
            });
        }
        let max_var = vars.last().copied().unwrap_or(0) as usize;
        let mut pos = vec![usize::MAX; max_var + 1];
        for (k, &v) in vars.iter().enumerate() {
            pos[v as usize] = k;
        }
        let size = 1usize << vars.len();
        let m = t.stats().m;
        let leaf_den = crate::rational::common_denominator(leaves(t));
        let den: BigInt = leaf_den << m;
        let values = if den.bits() <= 100 {
            let int_tree = IntTree::new(t, &den);
            Values::Scaled {
                num: (0..size).map(|j| int_tree.eval(j, &pos)).collect(),
                den,
            }
        } else {
            Values::Exact((0..size).map(|j| eval_exact(t, j, &pos)).collect())
        };
        Ok(Self { vars, values })
    }

    pub fn vars(&self) -> &[u32] {
        &self.vars
    }

    fn len(&self) -> usize {
        1 << self.vars.len()
    }

    pub fn value(&self, j: usize) -> Rational {
        match &self.values {
            Values::Scaled { num, den } => Rational::new(num[j].into(), den.clone()),
            Values::Exact(v) => v[j].clone(),
        }
    }

    pub fn mean(&self) -> Rational {
        match &self.values {
            Values::Scaled { num, den } => {
                let sum: i128 = num.iter().sum();
                Rational::new(sum.into(), den << self.vars.len())
            }
            Values::Exact(v) => v.iter().sum::<Rational>() * pow2_inv(self.vars.len()),
        }
    }

    pub fn variance(&self) -> Rational {
        match &self.values {
            Values::Scaled { num, den } => {
                let k = self.vars.len();
                let sum: BigInt = num.iter().map(|&v| BigInt::from(v)).sum();
                let sq: BigInt = num.iter().map(|&v| BigInt::from(v) * v).sum();
                // E[v^2] - E[v]^2 = (2^k sq - sum^2) / (2^2k den^2)
                let top = (sq << k) - &sum * &sum;
                Rational::new(top, (den * den) << (2 * k))
            }
            Values::Exact(v) => {
                let w = pow2_inv(self.vars.len());
                let mean: Rational = v.iter().sum::<Rational>() * &w;
                let sq: Rational = v.iter().map(|a| a * a).sum::<Rational>() * &w;
                sq - &mean * &mean
            }
        }
    }

    /// Influence of `vars[k]`.
    fn influence_at(&self, k: usize) -> Rational {
        let bit = 1usize << k;
        match &self.values {
            Values::Scaled { num, den } => {
                let mut total: i128 = 0;
                for j in (0..self.len()).filter(|j| j & bit == 0) {
                    total += (num[j] - num[j | bit]).abs();
                }
                // each unordered pair is counted once, hence 2^(k-1)
                Rational::new(total.into(), den << (self.vars.len() - 1))
            }
            Values::Exact(v) => {
                let mut total = Rational::zero();
                for j in (0..self.len()).filter(|j| j & bit == 0) {
                    total += (&v[j] - &v[j | bit]).abs();
                }
                total * pow2_inv(self.vars.len() - 1)
            }
        }
    }

    /// `Inf_var`; zero for variables the tree never queries.
    pub fn influence(&self, var: u32) -> Rational {
        match self.vars.binary_search(&var) {
            Ok(k) => self.influence_at(k),
            Err(_) => Rational::zero(),
        }
    }

    /// `(var, Inf_var)` for every queried variable, in index order.
    pub fn influences(&self) -> Vec<(u32, Rational)> {
        (0..self.vars.len())
            .map(|k| (self.vars[k], self.influence_at(k)))
            .collect()
    }
}

fn leaves(t: &Tree) -> Vec<&Rational> {
    fn walk<'a>(t: &'a Tree, out: &mut Vec<&'a Rational>) {
        match t {
            Tree::Leaf(v) => out.push(v),
            Tree::Decision { zero, one, .. } | Tree::Stochastic { zero, one } => {
                walk(zero, out);
                walk(one, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(t, &mut out);
    out
}

/// A tree with leaves scaled to integers by `L 2^m`. A node with at most `s`
/// coins below it holds a multiple of `2^(m-s)`, so every stochastic
/// average is an exact integer division.
enum IntTree {
    Leaf(i128),
    Decision(u32, Box<IntTree>, Box<IntTree>),
    Coin(Box<IntTree>, Box<IntTree>),
}

impl IntTree {
    fn new(t: &Tree, den: &BigInt) -> Self {
        match t {
            Tree::Leaf(v) => {
                let scaled = v.numer() * (den / v.denom());
                IntTree::Leaf(scaled.to_i128().expect("scale checked"))
            }
            Tree::Decision { var, zero, one } => IntTree::Decision(
                *var,
                Box::new(Self::new(zero, den)),
                Box::new(Self::new(one, den)),
            ),
            Tree::Stochastic { zero, one } => IntTree::Coin(
                Box::new(Self::new(zero, den)),
                Box::new(Self::new(one, den)),
            ),
        }
    }

    fn eval(&self, j: usize, pos: &[usize]) -> i128 {
        match self {
            IntTree::Leaf(v) => *v,
            IntTree::Decision(var, zero, one) => {
                if (j >> pos[*var as usize]) & 1 == 1 {
                    one.eval(j, pos)
                } else {
                    zero.eval(j, pos)
                }
            }
            IntTree::Coin(zero, one) => (zero.eval(j, pos) + one.eval(j, pos)) / 2,
        }
    }
}

fn eval_exact(t: &Tree, j: usize, pos: &[usize]) -> Rational {
    match t {
        Tree::Leaf(v) => v.clone(),
        Tree::Decision { var, zero, one } => {
            if (j >> pos[*var as usize]) & 1 == 1 {
                eval_exact(one, j, pos)
            } else {
                eval_exact(zero, j, pos)
            }
        }
        Tree::Stochastic { zero, one } => {
            (eval_exact(zero, j, pos) + eval_exact(one, j, pos)) * half()
        }
    }
}

/// Exact `Inf_i(mu_r)`: restrict `r` at `x_i = 0` and `x_i = 1` and average
/// the gap over every assignment to the variables either side queries.
pub fn influence(r: &Tree, i: u32) -> Result<Rational> {
    let t0 = r.restrict(&Restriction::from_pairs([(i, false)])?);
    let t1 = r.restrict(&Restriction::from_pairs([(i, true)])?);
    let vars: BTreeSet<u32> = t0
        .decision_vars()
        .union(&t1.decision_vars())
        .copied()
        .collect();
    if vars.len() > MAX_TABLE_VARS {
        return Err(Error::TooLarge {
            what: "queried variables",
            value: vars.len(),
            limit: MAX_TABLE_VARS,
        });
    }
    let vars: Vec<u32> = vars.into_iter().collect();
    let width = vars.last().copied().unwrap_or(0) as usize;
    let mut total = Rational::zero();
    let mut x = vec![false; width];
    for j in 0..1u64 << vars.len() {
        for (k, &v) in vars.iter().enumerate() {
            x[v as usize - 1] = (j >> k) & 1 == 1;
        }
        total += (t1.mu_eval(&x)? - t0.mu_eval(&x)?).abs();
    }
    Ok(total * pow2_inv(vars.len()))
}

/// `Inf_i` for `i = 1..=n`, where `n` is the largest of `n` and the largest
/// queried index.
pub fn influences(r: &Tree, n: u32) -> Result<Vec<Rational>> {
    let table = MuTable::new(r)?;
    let n = n.max(r.stats().num_vars);
    Ok((1..=n).map(|i| table.influence(i)).collect())
}

pub fn total_influence(r: &Tree) -> Result<Rational> {
    let table = MuTable::new(r)?;
    Ok(table.influences().into_iter().map(|(_, v)| v).sum())
}

/// Result of [`most_influential`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Influential {
    Var(u32, Rational),
    /// Every influence is zero: the restricted mean function is constant.
    Constant,
}

/// The variable of largest influence on `mu` of `r` restricted by `pi`,
/// lowest index on ties.
pub fn most_influential(r: &Tree, pi: &Restriction) -> Result<Influential> {
    let table = MuTable::new(&r.restrict(pi))?;
    Ok(argmax(&table))
}

pub(crate) fn argmax(table: &MuTable) -> Influential {
    let mut best: Option<(u32, Rational)> = None;
    for (v, inf) in table.influences() {
        if inf.is_positive() && best.as_ref().is_none_or(|(_, b)| inf > *b) {
            best = Some((v, inf));
        }
    }
    match best {
        Some((v, inf)) => Influential::Var(v, inf),
        None => Influential::Constant,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InfluenceReport {
    /// `(i, Inf_i)` for `i = 1..=n`.
    pub influences: Vec<(u32, Rational)>,
    pub total: Rational,
    /// `(i, delta_i)` for `i = 1..=n`.
    pub query_probs: Vec<(u32, Rational)>,
    pub variance: Rational,
    /// `sum_i delta_i Inf_i`.
    pub osss_rhs: Rational,
    pub q: usize,
    /// `Var <= sum_i delta_i Inf_i`.
    pub holds: bool,
    /// `total <= q`.
    pub total_within_q: bool,
    /// Lowest-index variable of largest influence, if any.
    pub witness: Option<(u32, Rational)>,
    /// `Inf_witness >= Var / q` (or `Var = 0` when `q = 0`).
    pub witness_ok: bool,
}

/// Checks `Var[mu_r] <= sum_i delta_i(r) Inf_i(mu_r)` and its consequences
/// exactly. `r` must be reduced.
pub fn osss_check(r: &Tree) -> Result<InfluenceReport> {
    let stats = r.stats();
    let n = stats.num_vars;
    let table = MuTable::new(r)?;
    let mut influences = Vec::with_capacity(n as usize);
    let mut query_probs = Vec::with_capacity(n as usize);
    let mut rhs = Rational::zero();
    for i in 1..=n {
        let inf = table.influence(i);
        let delta = r.query_prob(i)?;
        rhs += &inf * &delta;
        influences.push((i, inf));
        query_probs.push((i, delta));
    }
    let total: Rational = influences.iter().map(|(_, v)| v).sum();
    let variance = fourier::variance(r);
    let witness = match argmax(&table) {
        Influential::Var(v, inf) => Some((v, inf)),
        Influential::Constant => None,
    };
    let witness_ok = match (&witness, stats.q) {
        (_, 0) => variance.is_zero(),
        (Some((_, inf)), q) => *inf >= &variance / int(q as i64),
        (None, _) => variance.is_zero(),
    };
    Ok(InfluenceReport {
        holds: variance <= rhs,
        total_within_q: total <= int(stats.q as i64),
        influences,
        total,
        query_probs,
        variance,
        osss_rhs: rhs,
        q: stats.q,
        witness,
        witness_ok,
    })
}

/// Root-to-leaf paths as (restriction from decision nodes, weight
/// `2^-length`, leaf value), length counting every internal node.
fn paths(t: &Tree) -> Vec<(Restriction, Rational, Rational)> {
    fn walk(
        t: &Tree,
        pi: &Restriction,
        depth: usize,
        out: &mut Vec<(Restriction, Rational, Rational)>,
    ) {
        match t {
            Tree::Leaf(v) => out.push((pi.clone(), pow2_inv(depth), v.clone())),
            Tree::Decision { var, zero, one } => {
                walk(zero, &pi.with(*var, false), depth + 1, out);
                walk(one, &pi.with(*var, true), depth + 1, out);
            }
            Tree::Stochastic { zero, one } => {
                walk(zero, pi, depth + 1, out);
                walk(one, pi, depth + 1, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(t, &Restriction::new(), 0, &mut out);
    out
}

/// Path-counting influence of the root query: for every path `p` of the
/// 0-subtree, the weighted average of `|leaf(s) - leaf(p)|` over the paths
/// `s` of the 1-subtree restricted by `p`, averaged with weights `2^-|p|`.
///
/// This is `E|L - R|` with the coins of the two subtrees drawn
/// independently, which equals the influence of the root variable on
/// deterministic trees but only bounds it from above in general: on
/// `(x1 0.4 ($ 0 1))` it gives 1/2 where the influence is 1/10.
pub fn root_influence_paper(t: &Tree) -> Result<Rational> {
    let Tree::Decision { zero, one, .. } = t else {
        return Err(Error::RootNotDecision);
    };
    let mut total = Rational::zero();
    for (pi, w, leaf) in paths(zero) {
        let mut inner = Rational::zero();
        for (_, ws, leaf_s) in paths(&one.restrict(&pi)) {
            inner += ws * (leaf_s - &leaf).abs();
        }
        total += w * inner;
    }
    Ok(total)
}

/// `sum_T 2^-depth(T) * root_influence_paper(T)` over the subtrees `T`
/// rooted at a query to `x_i`. `r` must be reduced.
pub fn influence_paper(r: &Tree, i: u32) -> Result<Rational> {
    if let Some(v) = r.repeated_variable() {
        return Err(Error::NotReduced(v));
    }
    fn walk(t: &Tree, i: u32, depth: usize, acc: &mut Rational) -> Result<()> {
        match t {
            Tree::Leaf(_) => Ok(()),
            Tree::Decision { var, zero, one } => {
                if *var == i {
                    *acc += pow2_inv(depth) * root_influence_paper(t)?;
                    Ok(())
                } else {
                    walk(zero, i, depth + 1, acc)?;
                    walk(one, i, depth + 1, acc)
                }
            }
            Tree::Stochastic { zero, one } => {
                walk(zero, i, depth + 1, acc)?;
                walk(one, i, depth + 1, acc)
            }
        }
    }
    let mut acc = Rational::zero();
    walk(r, i, 0, &mut acc)?;
    Ok(acc)
}

/// Whether every table entry lies in `[0, 1]`; used as a sanity check.
pub fn table_in_unit_interval(table: &MuTable) -> bool {
    (0..table.len()).all(|j| {
        let v = table.value(j);
        !v.is_negative() && v <= Rational::one()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::tree::parse_tree;

    const SAMPLE: &str = "(x1 (x2 0.9 0.1) ($ (x3 0.2 0.3) 0.5))";

    fn t(s: &str) -> Tree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn sample_influences() {
        let r = t(SAMPLE);
        let want = [rat(2, 5), rat(2, 5), rat(1, 40)];
        for (i, w) in (1..=3).zip(&want) {
            assert_eq!(influence(&r, i).unwrap(), *w);
            assert_eq!(influence_paper(&r, i).unwrap(), *w);
        }
        assert_eq!(influences(&r, 3).unwrap(), want.to_vec());
        assert_eq!(total_influence(&r).unwrap(), rat(33, 40));
        assert_eq!(influence(&r, 4).unwrap(), rat(0, 1));
    }

    #[test]
    fn single_query() {
        let r = t("(x1 0.25 0.75)");
        assert_eq!(influence(&r, 1).unwrap(), rat(1, 2));
        assert_eq!(influence(&r, 2).unwrap(), rat(0, 1));
    }

    #[test]
    fn osss_sample() {
        let rep = osss_check(&t(SAMPLE)).unwrap();
        assert_eq!(rep.variance, rat(539, 6400));
        assert_eq!(rep.osss_rhs, rat(3880, 6400));
        assert!(rep.holds && rep.total_within_q && rep.witness_ok);
        assert_eq!(rep.witness, Some((1, rat(2, 5))));
        let c = osss_check(&t("($ 0.5 0.5)")).unwrap();
        assert!(c.holds && c.witness_ok);
        assert_eq!(c.variance, rat(0, 1));
        assert!(osss_check(&t("(x1 0 (x1 0 1))")).is_err());
    }

    #[test]
    fn most_influential_examples() {
        let r = t(SAMPLE);
        assert_eq!(
            most_influential(&r, &Restriction::new()).unwrap(),
            Influential::Var(1, rat(2, 5))
        );
        assert_eq!(
            most_influential(&r, &Restriction::parse("x1=0").unwrap()).unwrap(),
            Influential::Var(2, rat(4, 5))
        );
        assert_eq!(
            most_influential(&t("($ 0.3 0.3)"), &Restriction::new()).unwrap(),
            Influential::Constant
        );
    }

    #[test]
    fn straddle_divergence() {
        let r = t("(x1 0.4 ($ 0 1))");
        assert_eq!(influence(&r, 1).unwrap(), rat(1, 10));
        assert_eq!(root_influence_paper(&r).unwrap(), rat(1, 2));
        assert_eq!(influence_paper(&r, 1).unwrap(), rat(1, 2));
        assert_eq!(root_influence_paper(&t("0")), Err(Error::RootNotDecision));
    }

    #[test]
    fn table_moments() {
        let r = t(SAMPLE);
        let table = MuTable::new(&r).unwrap();
        assert_eq!(table.mean(), rat(7, 16));
        assert_eq!(table.variance(), rat(539, 6400));
        assert!(table_in_unit_interval(&table));
    }
}
