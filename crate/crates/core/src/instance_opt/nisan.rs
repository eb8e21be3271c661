use num_traits::One;

use crate::error::{Error, Result};
use crate::rational::{int, rat, Rational};
use crate::tree::{assignment, assignment_string, Restriction, Tree};

use super::find::{FindResult, Finder};
use super::metric::ErrorMetric;

/// Largest universe the exhaustive checks will enumerate.
pub const MAX_ENUM_VARS: u32 = 24;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NisanResult {
    pub result: FindResult,
    /// Least Bayes error over all deterministic trees, as found in phase 1.
    pub eps_r: Rational,
    pub phase1_budget: usize,
    /// Set when phase 1 ran below the full budget `n`, where the minimum is
    /// not guaranteed.
    pub potentially_unsound: bool,
}

fn check_enum(n: u32) -> Result<()> {
    if n > MAX_ENUM_VARS {
        return Err(Error::TooLarge {
            what: "n",
            value: n as usize,
            limit: MAX_ENUM_VARS as usize,
        });
    }
    Ok(())
}

/// Checks that `r` has `{0,1}` leaves and that `mu_r(x)` lies in
/// `[0,1/3] ∪ [2/3,1]` for every `x` in `{0,1}^n`.
pub fn check_bounded_error(r: &Tree, n: u32) -> Result<()> {
    if let Some(v) = r.first_non_bit_leaf() {
        return Err(Error::NotBoolean(v.clone()));
    }
    let n = n.max(r.stats().num_vars);
    check_enum(n)?;
    let (lo, hi) = (rat(1, 3), rat(2, 3));
    for idx in 0..1u64 << n {
        let x = assignment(idx, n as usize);
        let mu = r.mu_eval(&x)?;
        if mu > lo && mu < hi {
            return Err(Error::NotBoundedError {
                x: assignment_string(&x),
                mu,
            });
        }
    }
    Ok(())
}

/// Builds a deterministic tree computing the function `r` decides, using
/// only `r`. Phase 1 finds the least Bayes error `eps_r` at budget
/// `min(cap, n)`; phase 2 returns the least-budget tree reaching `eps_r`.
/// Any tree that errs on some input has Bayes error above `eps_r`, so the
/// output is exact.
pub fn nisan(r: &Tree, n: u32, budget_cap: Option<usize>) -> Result<NisanResult> {
    check_bounded_error(r, n)?;
    let metric = ErrorMetric::bayes(r, n)?;
    let n = metric.num_vars() as usize;
    let phase1_budget = budget_cap.map_or(n, |c| c.min(n));
    let mut finder = Finder::new(&metric);
    let empty = Restriction::new();
    let eps_r = finder.find(phase1_budget, &empty).error;
    let result = finder.instance_opt(&eps_r, &empty)?;
    Ok(NisanResult {
        result,
        eps_r,
        phase1_budget,
        potentially_unsound: phase1_budget < n,
    })
}

/// True iff `d(x) = 1` exactly when `mu_r(x) >= 2/3`, for every `x`.
pub fn verify_exact(r: &Tree, d: &Tree, n: u32) -> Result<bool> {
    check_bounded_error(r, n)?;
    if !d.is_deterministic() {
        return Err(Error::NotDeterministic);
    }
    if let Some(v) = d.first_non_bit_leaf() {
        return Err(Error::NotBoolean(v.clone()));
    }
    let n = n.max(r.stats().num_vars).max(d.stats().num_vars);
    check_enum(n)?;
    let hi = rat(2, 3);
    for idx in 0..1u64 << n {
        let x = assignment(idx, n as usize);
        let want = r.mu_eval(&x)? >= hi;
        let got = d.mu_eval(&x)? == Rational::one();
        if want != got {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `Pr_{x,r}[R(x,r) != f(x)]` for the function `f` that `r` decides.
pub fn bayes_error_of_target(r: &Tree, n: u32) -> Result<Rational> {
    check_bounded_error(r, n)?;
    let n = n.max(r.stats().num_vars);
    let mut total = Rational::from_integer(0.into());
    for idx in 0..1u64 << n {
        let mu = r.mu_eval(&assignment(idx, n as usize))?;
        let flip = Rational::one() - &mu;
        total += mu.min(flip);
    }
    Ok(total / int(1i64 << n))
}
