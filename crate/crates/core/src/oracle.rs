//! Brute-force reference computations and instance generators.
//!
//! The functions here work from the definitions by full enumeration over
//! inputs and coin strings and share no code with the fast paths, so
//! agreement between the two is evidence for both.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance_opt::{ErrorMetric, MetricKind, Source};
use crate::rational::{half, int, is_bit, pow2_inv, rat, Rational};
use crate::tree::{assignment, Tree};

/// Largest input or coin length enumerated.
pub const MAX_BRUTE_BITS: usize = 20;

fn check_bits(what: &'static str, value: usize) -> Result<()> {
    if value > MAX_BRUTE_BITS {
        return Err(Error::TooLarge {
            what,
            value,
            limit: MAX_BRUTE_BITS,
        });
    }
    Ok(())
}

fn universe(trees: &[&Tree], n: u32) -> usize {
    trees.iter().map(|t| t.stats().num_vars).fold(n, u32::max) as usize
}

/// `mu_r(x)` as the average of `R(x, rnd)` over every coin string.
pub fn brute_mu(r: &Tree, x: &[bool]) -> Result<Rational> {
    let m = r.stats().m;
    check_bits("coins", m)?;
    let mut total = Rational::zero();
    for s in 0..1u64 << m {
        total += r.eval_rdt(x, &assignment(s, m))?;
    }
    Ok(total * pow2_inv(m))
}

fn mu_table(r: &Tree, n: usize) -> Result<Vec<Rational>> {
    check_bits("n", n)?;
    (0..1u64 << n)
        .map(|i| brute_mu(r, &assignment(i, n)))
        .collect()
}

fn average(values: impl Iterator<Item = Rational>, n: usize) -> Rational {
    values.sum::<Rational>() * pow2_inv(n)
}

/// `2^-n sum_x (mu_r(x) - mu_d(x))^2`.
pub fn brute_l2(r: &Tree, d: &Tree, n: u32) -> Result<Rational> {
    let n = universe(&[r, d], n);
    let a = mu_table(r, n)?;
    let b = mu_table(d, n)?;
    Ok(average(a.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)), n))
}

/// `2^-n sum_x |mu_r(x) - mu_r(x ^ e_i)|`.
pub fn brute_influence(r: &Tree, i: u32, n: u32) -> Result<Rational> {
    let n = universe(&[r], n).max(i as usize);
    let t = mu_table(r, n)?;
    let bit = 1usize << (i - 1);
    Ok(average(
        (0..t.len()).map(|j| (&t[j] - &t[j ^ bit]).abs()),
        n,
    ))
}

pub fn brute_mean(r: &Tree, n: u32) -> Result<Rational> {
    let n = universe(&[r], n);
    Ok(average(mu_table(r, n)?.into_iter(), n))
}

pub fn brute_variance(r: &Tree, n: u32) -> Result<Rational> {
    let n = universe(&[r], n);
    let t = mu_table(r, n)?;
    let mean = average(t.iter().cloned(), n);
    Ok(average(t.iter().map(|v| (v - &mean) * (v - &mean)), n))
}

/// `Pr_{x,rnd}[r queries x_i]`, following the realised path for every input
/// and coin string.
pub fn brute_query_prob(r: &Tree, i: u32, n: u32) -> Result<Rational> {
    let n = universe(&[r], n);
    let m = r.stats().m;
    check_bits("n + coins", n + m)?;
    fn queries(t: &Tree, i: u32, x: &[bool], rnd: &[bool]) -> bool {
        match t {
            Tree::Leaf(_) => false,
            Tree::Decision { var, zero, one } => {
                *var == i || queries(if x[*var as usize - 1] { one } else { zero }, i, x, rnd)
            }
            Tree::Stochastic { zero, one } => {
                queries(if rnd[0] { one } else { zero }, i, x, &rnd[1..])
            }
        }
    }
    let mut hits = 0u64;
    for xi in 0..1u64 << n {
        let x = assignment(xi, n);
        for s in 0..1u64 << m {
            if queries(r, i, &x, &assignment(s, m)) {
                hits += 1;
            }
        }
    }
    Ok(Rational::from_integer(hits.into()) * pow2_inv(n + m))
}

/// Pointwise values of the metric's source over `{0,1}^n`.
fn source_table(metric: &ErrorMetric, n: usize) -> Result<Vec<Rational>> {
    match metric.source() {
        Source::Tree(t) => mu_table(t, n),
        Source::Poly => {
            check_bits("n", n)?;
            (0..1u64 << n)
                .map(|i| metric.poly().eval(&assignment(i, n)))
                .collect()
        }
    }
}

/// Best constant and its error on the inputs `cube`, straight from values.
fn leaf_optimum(kind: MetricKind, values: &[Rational], cube: &[usize]) -> (Rational, Rational) {
    let k = cube.len() as i64;
    let mean: Rational = cube.iter().map(|&j| values[j].clone()).sum::<Rational>() / int(k);
    match kind {
        MetricKind::L2 => {
            let err = cube
                .iter()
                .map(|&j| (&values[j] - &mean) * (&values[j] - &mean))
                .sum::<Rational>()
                / int(k);
            (mean, err)
        }
        _ => {
            let e0: Rational = cube.iter().map(|&j| values[j].abs()).sum::<Rational>() / int(k);
            let e1: Rational = cube
                .iter()
                .map(|&j| (Rational::one() - &values[j]).abs())
                .sum::<Rational>()
                / int(k);
            if e0 <= e1 {
                (Rational::zero(), e0)
            } else {
                (Rational::one(), e1)
            }
        }
    }
}

/// Limits for [`brute_optimal_ddt`].
pub const MAX_OPT_VARS: u32 = 4;
pub const MAX_OPT_BUDGET: usize = 3;

/// The least error over every reduced deterministic tree of depth at most
/// `budget` on `n` variables, by listing all tree shapes and giving each
/// leaf its best constant. Returns the first optimum in listing order
/// (leaf first, then roots by index).
pub fn brute_optimal_ddt(metric: &ErrorMetric, budget: usize) -> Result<(Rational, Tree)> {
    let n = metric.num_vars();
    if n > MAX_OPT_VARS {
        return Err(Error::TooLarge {
            what: "n",
            value: n as usize,
            limit: MAX_OPT_VARS as usize,
        });
    }
    if budget > MAX_OPT_BUDGET {
        return Err(Error::TooLarge {
            what: "budget",
            value: budget,
            limit: MAX_OPT_BUDGET,
        });
    }
    let values = source_table(metric, n as usize)?;
    let all: Vec<usize> = (0..values.len()).collect();
    let shapes = all_trees(metric.kind(), &values, &all, n, 0, budget);
    let mut best: Option<(Rational, Tree)> = None;
    for (err, tree) in shapes {
        if best.as_ref().is_none_or(|(b, _)| err < *b) {
            best = Some((err, tree));
        }
    }
    Ok(best.expect("the constant tree is always listed"))
}

/// Every tree on the subcube `cube` (variables in `used` already fixed) of
/// depth at most `budget`, with its error on that subcube.
fn all_trees(
    kind: MetricKind,
    values: &[Rational],
    cube: &[usize],
    n: u32,
    used: u32,
    budget: usize,
) -> Vec<(Rational, Tree)> {
    let (c, err) = leaf_optimum(kind, values, cube);
    let mut out = vec![(err, Tree::Leaf(c))];
    if budget == 0 {
        return out;
    }
    for v in 1..=n {
        let bit = 1u32 << (v - 1);
        if used & bit != 0 {
            continue;
        }
        let (c0, c1): (Vec<usize>, Vec<usize>) = cube.iter().partition(|&&j| j & bit as usize == 0);
        let left = all_trees(kind, values, &c0, n, used | bit, budget - 1);
        let right = all_trees(kind, values, &c1, n, used | bit, budget - 1);
        for (e0, t0) in &left {
            for (e1, t1) in &right {
                out.push((
                    (e0 + e1) * half(),
                    Tree::decision(v, t0.clone(), t1.clone()),
                ));
            }
        }
    }
    out
}

/// Least depth of a deterministic tree computing `f(x) = [mu_r(x) >= 2/3]`
/// on `{0,1}^n`, by memoised recursion over subcubes.
pub fn minimal_exact_depth(r: &Tree, n: u32) -> Result<usize> {
    let n = universe(&[r], n);
    check_bits("n", n)?;
    let two_thirds = rat(2, 3);
    let f: Vec<bool> = mu_table(r, n)?
        .into_iter()
        .map(|v| v >= two_thirds)
        .collect();
    let mut memo = HashMap::new();
    Ok(depth(&f, n, 0, 0, &mut memo))
}

fn depth(
    f: &[bool],
    n: usize,
    fixed: u32,
    vals: u32,
    memo: &mut HashMap<(u32, u32), usize>,
) -> usize {
    if let Some(&d) = memo.get(&(fixed, vals)) {
        return d;
    }
    let mut inside = (0..f.len()).filter(|&j| j as u32 & fixed == vals);
    let first = inside.next().map(|j| f[j]);
    let constant = inside.all(|j| Some(f[j]) == first);
    let d = if constant {
        0
    } else {
        (0..n)
            .filter(|k| fixed & (1 << k) == 0)
            .map(|k| {
                let b = 1u32 << k;
                1 + depth(f, n, fixed | b, vals, memo).max(depth(f, n, fixed | b, vals | b, memo))
            })
            .min()
            .expect("a non-constant subcube has a free variable")
    };
    memo.insert((fixed, vals), d);
    d
}

/// Parameters for [`gen_random_rdt`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenSpec {
    pub n: u32,
    pub max_q: usize,
    pub max_m: usize,
    /// Leaves are drawn from `{0, 1/den, ..., 1}`.
    pub leaf_den: u32,
    pub seed: u64,
    /// Let a variable be queried twice on one path.
    pub allow_repeats: bool,
    pub max_nodes: usize,
}

impl GenSpec {
    pub fn new(n: u32, max_q: usize, max_m: usize, seed: u64) -> Self {
        Self {
            n,
            max_q,
            max_m,
            leaf_den: 8,
            seed,
            allow_repeats: false,
            max_nodes: 200,
        }
    }

    pub fn boolean(mut self) -> Self {
        self.leaf_den = 1;
        self
    }
}

/// A random tree under the caps in `spec`; the same spec always gives the
/// same tree.
pub fn gen_random_rdt(spec: &GenSpec) -> Result<Tree> {
    if spec.leaf_den == 0 {
        return Err(Error::ParamRange {
            name: "leaf_den",
            value: "0".into(),
            range: "[1, 2^32)",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut budget = spec.max_nodes.max(1);
    Ok(gen_node(
        spec,
        &mut rng,
        spec.max_q,
        spec.max_m,
        &mut Vec::new(),
        &mut budget,
    ))
}

fn gen_node(
    spec: &GenSpec,
    rng: &mut ChaCha8Rng,
    q_left: usize,
    m_left: usize,
    path: &mut Vec<u32>,
    nodes_left: &mut usize,
) -> Tree {
    let free: Vec<u32> = (1..=spec.n)
        .filter(|v| spec.allow_repeats || !path.contains(v))
        .collect();
    let can_query = q_left > 0 && !free.is_empty();
    let can_flip = m_left > 0;
    // an internal node plus its two children must fit
    let room = *nodes_left >= 3;
    let kind = match (room, rng.gen_range(0..4u8)) {
        (false, _) | (_, 0) => Kind::Leaf,
        (_, 1 | 2) if can_query => Kind::Query,
        (_, 3) if can_flip => Kind::Coin,
        _ if can_query => Kind::Query,
        _ if can_flip => Kind::Coin,
        _ => Kind::Leaf,
    };
    *nodes_left -= 1;
    match kind {
        Kind::Leaf => Tree::Leaf(rat(
            rng.gen_range(0..=spec.leaf_den) as i64,
            spec.leaf_den as i64,
        )),
        Kind::Query => {
            let var = free[rng.gen_range(0..free.len())];
            path.push(var);
            // keep one node for the second child
            *nodes_left -= 1;
            let zero = gen_node(spec, rng, q_left - 1, m_left, path, nodes_left);
            *nodes_left += 1;
            let one = gen_node(spec, rng, q_left - 1, m_left, path, nodes_left);
            path.pop();
            Tree::decision(var, zero, one)
        }
        Kind::Coin => {
            *nodes_left -= 1;
            let zero = gen_node(spec, rng, q_left, m_left - 1, path, nodes_left);
            *nodes_left += 1;
            let one = gen_node(spec, rng, q_left, m_left - 1, path, nodes_left);
            Tree::coin(zero, one)
        }
    }
}

enum Kind {
    Leaf,
    Query,
    Coin,
}

/// Picks a uniform `i` in `[n]` with `log2 n` coins and outputs `x_i`, so
/// `mu(x) = |x| / n`.
pub fn index_rdt(n: u32) -> Result<Tree> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::ParamRange {
            name: "n",
            value: n.to_string(),
            range: "a power of two",
        });
    }
    fn build(lo: u32, len: u32) -> Tree {
        if len == 1 {
            Tree::decision(
                lo,
                Tree::Leaf(Rational::zero()),
                Tree::Leaf(Rational::one()),
            )
        } else {
            Tree::coin(build(lo, len / 2), build(lo + len / 2, len / 2))
        }
    }
    Ok(build(1, n))
}

/// Picks a uniform block of `q` consecutive variables and outputs its
/// parity. The number of blocks `n / q` must be a power of two.
pub fn parity_blocks_rdt(n: u32, q: u32) -> Result<Tree> {
    if q == 0 || !n.is_multiple_of(q) || !(n / q).is_power_of_two() {
        return Err(Error::ParamRange {
            name: "n/q",
            value: format!("{n}/{q}"),
            range: "q divides n and n/q is a power of two",
        });
    }
    fn parity(vars: &[u32], acc: bool) -> Tree {
        match vars.split_first() {
            None => Tree::Leaf(if acc {
                Rational::one()
            } else {
                Rational::zero()
            }),
            Some((&v, rest)) => Tree::decision(v, parity(rest, acc), parity(rest, !acc)),
        }
    }
    fn select(first_block: u32, blocks: u32, q: u32) -> Tree {
        if blocks == 1 {
            let vars: Vec<u32> = (0..q).map(|k| first_block * q + k + 1).collect();
            parity(&vars, false)
        } else {
            Tree::coin(
                select(first_block, blocks / 2, q),
                select(first_block + blocks / 2, blocks / 2, q),
            )
        }
    }
    Ok(select(0, n / q, q))
}

/// Binary digits kept when a flip probability is not dyadic.
pub const FLIP_BITS: usize = 8;

/// The flip probability actually realised by [`noisy_rdt`]: `flip` itself
/// when its denominator is a power of two of at most `2^FLIP_BITS`,
/// otherwise `flip` rounded down to `FLIP_BITS` binary digits.
pub fn effective_flip(flip: &Rational) -> Rational {
    let scale = int(1 << FLIP_BITS);
    (flip * &scale).floor() / scale
}

/// Replaces each leaf `b` of the `{0,1}` deterministic tree `f` by a coin
/// gadget that outputs `b` with probability `1 - flip`.
pub fn noisy_rdt(f: &Tree, flip: &Rational) -> Result<Tree> {
    if !f.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    if let Some(v) = f.first_non_bit_leaf() {
        return Err(Error::NotBoolean(v.clone()));
    }
    if flip.is_negative() || *flip >= half() {
        return Err(Error::ParamRange {
            name: "flip",
            value: crate::rational::fraction_string(flip),
            range: "[0, 1/2)",
        });
    }
    let p = effective_flip(flip);
    fn gadget(p: &Rational, b: bool) -> Tree {
        let bit = |v: bool| Tree::Leaf(if v { Rational::one() } else { Rational::zero() });
        if p.is_zero() {
            bit(b)
        } else if p.is_one() {
            bit(!b)
        } else if *p < half() {
            Tree::coin(bit(b), gadget(&(p * int(2)), b))
        } else {
            Tree::coin(gadget(&(p * int(2) - Rational::one()), b), bit(!b))
        }
    }
    fn walk(t: &Tree, p: &Rational) -> Tree {
        match t {
            Tree::Leaf(v) => gadget(p, is_bit(v) && v.is_one()),
            Tree::Decision { var, zero, one } => Tree::decision(*var, walk(zero, p), walk(one, p)),
            Tree::Stochastic { .. } => unreachable!("checked deterministic"),
        }
    }
    Ok(walk(f, &p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_tree;

    const SAMPLE: &str = "(x1 (x2 0.9 0.1) ($ (x3 0.2 0.3) 0.5))";

    fn t(s: &str) -> Tree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn sample_oracles() {
        let r = t(SAMPLE);
        assert_eq!(brute_l2(&r, &t("7/16"), 3).unwrap(), rat(539, 6400));
        assert_eq!(brute_influence(&r, 3, 3).unwrap(), rat(1, 40));
        assert_eq!(brute_variance(&r, 3).unwrap(), rat(539, 6400));
        assert_eq!(brute_mean(&r, 3).unwrap(), rat(7, 16));
        assert_eq!(brute_query_prob(&r, 3, 3).unwrap(), rat(1, 4));
        assert_eq!(brute_mu(&r, &[true, false, true]).unwrap(), rat(2, 5));
    }

    #[test]
    fn optimal_and() {
        let m = ErrorMetric::l2(&t("(x1 0 (x2 0 1))"), 2);
        assert_eq!(brute_optimal_ddt(&m, 0).unwrap().0, rat(3, 16));
        assert_eq!(brute_optimal_ddt(&m, 1).unwrap().0, rat(1, 8));
        assert_eq!(brute_optimal_ddt(&m, 2).unwrap().0, rat(0, 1));
        let big = ErrorMetric::l2(&t("(x5 0 1)"), 5);
        assert!(brute_optimal_ddt(&big, 1).is_err());
    }

    #[test]
    fn fixtures() {
        let r = index_rdt(4).unwrap();
        assert_eq!(r.mu_eval(&[true, false, true, false]).unwrap(), rat(1, 2));
        assert_eq!(brute_variance(&r, 4).unwrap(), rat(1, 16));
        for i in 1..=4 {
            assert_eq!(brute_influence(&r, i, 4).unwrap(), rat(1, 4));
        }
        assert!(index_rdt(6).is_err());

        let p = parity_blocks_rdt(4, 2).unwrap();
        let st = p.stats();
        assert_eq!((st.q, st.m), (2, 1));
        for idx in 0..16 {
            let x = assignment(idx, 4);
            let want = rat((x[0] ^ x[1]) as i64 + (x[2] ^ x[3]) as i64, 2);
            assert_eq!(p.mu_eval(&x).unwrap(), want);
        }
        assert!(parity_blocks_rdt(6, 2).is_err());
    }

    #[test]
    fn noisy_gadgets() {
        let r = noisy_rdt(&t("(x1 0 1)"), &rat(1, 4)).unwrap();
        assert_eq!(r.to_string(), "(x1 ($ 0 ($ 0 1)) ($ 1 ($ 1 0)))");
        assert_eq!(r.mu_eval(&[true]).unwrap(), rat(3, 4));
        let s = noisy_rdt(&t("(x1 0 1)"), &rat(1, 6)).unwrap();
        assert_eq!(s.mu_eval(&[false]).unwrap(), rat(42, 256));
        assert_eq!(effective_flip(&rat(3, 8)), rat(3, 8));
        assert!(noisy_rdt(&t("(x1 0 1)"), &rat(1, 2)).is_err());
        assert!(noisy_rdt(&t("($ 0 1)"), &rat(1, 4)).is_err());
    }

    #[test]
    fn exact_depth() {
        assert_eq!(minimal_exact_depth(&t("(x1 0 (x2 0 1))"), 2).unwrap(), 2);
        assert_eq!(minimal_exact_depth(&t("(x1 (x2 0 0) 1)"), 3).unwrap(), 1);
        assert_eq!(minimal_exact_depth(&t("1"), 3).unwrap(), 0);
    }

    #[test]
    fn generator_is_deterministic_and_capped() {
        for seed in 0..50 {
            let spec = GenSpec::new(6, 4, 3, seed);
            let a = gen_random_rdt(&spec).unwrap();
            assert_eq!(a, gen_random_rdt(&spec).unwrap());
            let st = a.stats();
            assert!(st.q <= 4 && st.m <= 3 && st.num_vars <= 6);
            assert!(st.size <= spec.max_nodes);
            assert!(a.is_reduced());
        }
        let tiny = GenSpec {
            max_nodes: 5,
            ..GenSpec::new(8, 8, 8, 3)
        };
        for seed in 0..20 {
            let st = gen_random_rdt(&GenSpec { seed, ..tiny }).unwrap().stats();
            assert!(st.size <= 5);
        }
        let b = gen_random_rdt(&GenSpec::new(4, 3, 0, 9).boolean()).unwrap();
        assert!(b.is_boolean() && b.is_deterministic());
    }
}
