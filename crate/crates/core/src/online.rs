//! Greedy derandomization by repeatedly querying the most influential
//! variable of the restricted mean function.
//!
//! [`build_top_down_dt`] grows the whole tree; [`online_eval`] walks only the
//! branch a given input follows, so the two agree on every input.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::influence::{argmax, Influential, MuTable};
use crate::rational::{ceil, ceil_log2, fraction_string, int, pow2_inv, sqrt_floor, Rational};
use crate::tree::{assignment, Restriction, Tree};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OnlineResult {
    /// `E[mu | queried bits]`.
    pub output: Rational,
    /// Variables read, in order.
    pub queried: Vec<u32>,
    /// Loop iterations run, counting the one that detected a constant.
    pub iterations: usize,
    /// True when the loop stopped because the restricted mean function was
    /// constant rather than because the bound was reached.
    pub early_exit: bool,
    pub bound: usize,
}

fn check_params(eps: &Rational, delta: &Rational) -> Result<()> {
    if !eps.is_positive() || *eps >= Rational::new(1.into(), 2.into()) {
        return Err(Error::ParamRange {
            name: "eps",
            value: fraction_string(eps),
            range: "(0, 1/2)",
        });
    }
    if !delta.is_positive() || *delta >= Rational::one() {
        return Err(Error::ParamRange {
            name: "delta",
            value: fraction_string(delta),
            range: "(0, 1)",
        });
    }
    Ok(())
}

/// `ceil(q^2 / (eps^2 delta^2))`, saturating at `usize::MAX`.
pub fn loop_bound(q: usize, eps: &Rational, delta: &Rational) -> usize {
    let q = int(q as i64);
    let b: BigInt = ceil(&(&q * &q / (eps * eps * delta * delta)));
    b.to_usize().unwrap_or(usize::MAX)
}

/// The tree that queries, at each leaf, the most influential variable of the
/// restricted mean function, to depth `loop_bound`. Leaves carry the
/// conditional mean; a branch whose mean function is constant stops early.
/// Over uniform `x`, `Pr[|D(x) - mu_r(x)| >= eps] <= 2 delta`.
pub fn build_top_down_dt(r: &Tree, eps: &Rational, delta: &Rational) -> Result<Tree> {
    check_params(eps, delta)?;
    let bound = loop_bound(r.stats().q, eps, delta);
    grow(r, &Restriction::new(), bound)
}

fn grow(r: &Tree, pi: &Restriction, left: usize) -> Result<Tree> {
    let table = MuTable::new(&r.restrict(pi))?;
    if left == 0 {
        return Ok(Tree::Leaf(table.mean()));
    }
    match argmax(&table) {
        Influential::Constant => Ok(Tree::Leaf(table.mean())),
        Influential::Var(v, _) => Ok(Tree::decision(
            v,
            grow(r, &pi.with(v, false), left - 1)?,
            grow(r, &pi.with(v, true), left - 1)?,
        )),
    }
}

/// Runs the greedy loop on the input `x`, reading only the bits it queries.
pub fn online_eval(r: &Tree, eps: &Rational, delta: &Rational, x: &[bool]) -> Result<OnlineResult> {
    check_params(eps, delta)?;
    let bound = loop_bound(r.stats().q, eps, delta);
    let mut pi = Restriction::new();
    let mut queried = Vec::new();
    let mut iterations = 0;
    let mut early_exit = false;
    let mut table = MuTable::new(r)?;
    while queried.len() < bound {
        iterations += 1;
        let Influential::Var(v, _) = argmax(&table) else {
            early_exit = true;
            break;
        };
        let bit = *x.get(v as usize - 1).ok_or(Error::UnassignedVariable(v))?;
        pi = pi.with(v, bit);
        queried.push(v);
        table = MuTable::new(&r.restrict(&pi))?;
    }
    assert!(queried.len() <= bound);
    Ok(OnlineResult {
        output: table.mean(),
        queried,
        iterations,
        early_exit,
        bound,
    })
}

/// True iff `online_eval` and the full tree agree on every `x` in
/// `{0,1}^n`.
pub fn path_consistency_check(r: &Tree, eps: &Rational, delta: &Rational, n: u32) -> Result<bool> {
    let n = n.max(r.stats().num_vars);
    if n > 20 {
        return Err(Error::TooLarge {
            what: "n",
            value: n as usize,
            limit: 20,
        });
    }
    let d = build_top_down_dt(r, eps, delta)?;
    for idx in 0..1u64 << n {
        let x = assignment(idx, n as usize);
        if online_eval(r, eps, delta, &x)?.output != d.mu_eval(&x)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `Pr_x[|d(x) - mu_r(x)| >= eps]` over `x` in `{0,1}^n`.
pub fn failure_probability(r: &Tree, d: &Tree, eps: &Rational, n: u32) -> Result<Rational> {
    let n = n.max(r.stats().num_vars).max(d.stats().num_vars);
    if n > 20 {
        return Err(Error::TooLarge {
            what: "n",
            value: n as usize,
            limit: 20,
        });
    }
    let mut bad = 0u64;
    for idx in 0..1u64 << n {
        let x = assignment(idx, n as usize);
        if (d.mu_eval(&x)? - r.mu_eval(&x)?).abs() >= *eps {
            bad += 1;
        }
    }
    Ok(Rational::from_integer(bad.into()) * pow2_inv(n as usize))
}

/// Parameters for mean-square error `eps`: `a` is the largest dyadic with
/// `a^2 <= eps/2` and `delta = eps/4`. Outputs are in `[0,1]`, so
/// `E[(A - mu)^2] <= a^2 + Pr[|A - mu| >= a] <= eps/2 + 2 delta = eps`, and
/// the loop bound is `O(q^2 / eps^3)`.
pub fn mean_square_params(eps: &Rational) -> Result<(Rational, Rational)> {
    if !eps.is_positive() || *eps >= Rational::one() {
        return Err(Error::ParamRange {
            name: "eps",
            value: fraction_string(eps),
            range: "(0, 1)",
        });
    }
    let bits = ceil_log2(&(int(4) / eps)) as usize + 8;
    let a = sqrt_floor(&(eps / int(2)), bits);
    debug_assert!(!a.is_zero());
    Ok((a, eps / int(4)))
}

/// `online_eval` tuned for `E_x[(output - mu_r(x))^2] <= eps`.
pub fn online_eval_mean_square(r: &Tree, eps: &Rational, x: &[bool]) -> Result<OnlineResult> {
    let (a, delta) = mean_square_params(eps)?;
    online_eval(r, &a, &delta, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::l2_distance;
    use crate::rational::rat;
    use crate::tree::parse_tree;

    const SAMPLE: &str = "(x1 (x2 0.9 0.1) ($ (x3 0.2 0.3) 0.5))";

    fn t(s: &str) -> Tree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn sample_trace() {
        let r = t(SAMPLE);
        let q = rat(1, 4);
        let out = online_eval(&r, &q, &q, &[false, false, false]).unwrap();
        assert_eq!(out.queried, vec![1, 2]);
        assert_eq!(out.output, rat(9, 10));
        assert!(out.early_exit);
        assert_eq!(out.bound, 1024);
        assert!(path_consistency_check(&r, &q, &q, 3).unwrap());
        let d = build_top_down_dt(&r, &q, &q).unwrap();
        assert!(failure_probability(&r, &d, &q, 3).unwrap() <= rat(1, 2));
    }

    #[test]
    fn constant_tree() {
        let r = t("($ 0.25 0.25)");
        let q = rat(1, 4);
        assert_eq!(
            build_top_down_dt(&r, &q, &q).unwrap(),
            Tree::Leaf(rat(1, 4))
        );
        let out = online_eval(&r, &q, &q, &[]).unwrap();
        assert_eq!((out.output, out.queried.len()), (rat(1, 4), 0));
    }

    #[test]
    fn ddt_is_recovered() {
        let d = t("(x2 (x1 0 1) (x3 0.5 (x1 1 0)))");
        let q = rat(1, 4);
        for idx in 0..8 {
            let x = assignment(idx, 3);
            assert_eq!(
                online_eval(&d, &q, &q, &x).unwrap().output,
                d.mu_eval(&x).unwrap()
            );
        }
    }

    #[test]
    fn mean_square_wrapper() {
        let eps = rat(1, 8);
        let (a, delta) = mean_square_params(&eps).unwrap();
        assert!(&a * &a <= rat(1, 16));
        assert_eq!(delta, rat(1, 32));
        let r = t(SAMPLE);
        let d = build_top_down_dt(&r, &a, &delta).unwrap();
        assert!(l2_distance(&r, &d) <= eps);
        let out = online_eval_mean_square(&r, &eps, &[true, false, true]).unwrap();
        assert_eq!(out.output, d.mu_eval(&[true, false, true]).unwrap());
    }

    #[test]
    fn rejects_params() {
        let r = t(SAMPLE);
        assert!(online_eval(&r, &rat(1, 2), &rat(1, 4), &[]).is_err());
        assert!(build_top_down_dt(&r, &rat(1, 4), &rat(1, 1)).is_err());
        assert!(matches!(
            online_eval(&r, &rat(1, 4), &rat(1, 4), &[]),
            Err(Error::UnassignedVariable(1))
        ));
    }
}
