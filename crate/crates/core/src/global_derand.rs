//! Global derandomization: shrink the coins, list averaged candidates, keep
//! the one closest to `mu_r` in squared L2 distance, and stack it into a
//! single deterministic tree.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_traits::Zero;
use rayon::prelude::*;

use crate::error::Result;
use crate::fourier::{a_fourier, l2_distance, Monomial, SparsePoly};
use crate::prg::{check_eps, coin_bank, reduce_randomness, CandidatePlan};
use crate::rational::{common_denominator, int, Rational};
use crate::tree::{Candidate, Tree};

/// Which guarantee the caller wants from the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Run with the given `eps`; the output is within `4 eps`.
    Raw,
    /// Run with `eps / 4`; the output is within `eps`.
    Adjusted,
}

/// Counters describing the work done by one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WorkCounters {
    pub candidates_scored: u64,
    pub coin_strings: u64,
    pub fourier_terms: usize,
    pub wide_arithmetic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerandReport {
    pub tree: Tree,
    /// `E_x[(D(x) - mu_r(x))^2]`, exact.
    pub error: Rational,
    /// The accuracy parameter the pipeline ran with.
    pub eps: Rational,
    /// Error the pipeline guarantees: `4 eps` for the pipeline's `eps`.
    pub guarantee: Rational,
    pub mode: Mode,
    pub candidates: u64,
    /// Members per candidate, `ceil(1/eps)`; 1 for deterministic input.
    pub members: usize,
    /// `members * q`, the stacking bound on the output's query complexity.
    pub query_bound: usize,
    pub query_complexity: usize,
    pub input_coins: usize,
    pub reduced_coins: usize,
    pub chosen_seed: Option<u64>,
    pub work: WorkCounters,
}

/// Runs the pipeline with `eps` itself: the output `D` satisfies
/// `E_x[(D(x) - mu_r(x))^2] <= 4 eps` and makes at most `ceil(1/eps) * q`
/// queries.
pub fn derandomize(r: &Tree, eps: &Rational) -> Result<DerandReport> {
    run(r, eps, Mode::Raw)
}

/// Runs the pipeline with `eps / 4`, so the output is within `eps`.
pub fn derandomize_adjusted(r: &Tree, eps: &Rational) -> Result<DerandReport> {
    check_eps(eps)?;
    run(r, &(eps / int(4)), Mode::Adjusted)
}

pub fn derandomize_with(r: &Tree, eps: &Rational, mode: Mode) -> Result<DerandReport> {
    match mode {
        Mode::Raw => derandomize(r, eps),
        Mode::Adjusted => derandomize_adjusted(r, eps),
    }
}

fn run(r: &Tree, eps: &Rational, mode: Mode) -> Result<DerandReport> {
    check_eps(eps)?;
    let stats = r.stats();
    let guarantee = int(4) * eps;
    if stats.m == 0 {
        let tree = r.reduce();
        let q = tree.stats().q;
        return Ok(DerandReport {
            tree,
            error: Rational::zero(),
            eps: eps.clone(),
            guarantee,
            mode,
            candidates: 1,
            members: 1,
            query_bound: stats.q,
            query_complexity: q,
            input_coins: 0,
            reduced_coins: 0,
            chosen_seed: None,
            work: WorkCounters::default(),
        });
    }

    let reduced = reduce_randomness(r, eps)?;
    let coins = reduced.stats().m as u32;
    let plan = CandidatePlan::new(coins, eps)?;
    let bank = coin_bank(&reduced, coins)?;
    let bank_polys: Vec<SparsePoly> = bank.par_iter().map(a_fourier).collect();
    let target = a_fourier(r);

    let scorer = Scorer::new(&bank_polys, &target, plan.sampler.count());
    let (seed, wide) = scorer.best_seed(&plan);

    let members: Vec<Tree> = plan
        .strings(seed)
        .into_iter()
        .map(|s| bank[s as usize].clone())
        .collect();
    let candidate = Candidate::new(members)?;
    let tree = candidate.materialize();
    let error = l2_distance(r, &tree);
    debug_assert_eq!(error, scorer.score(&plan, seed));

    Ok(DerandReport {
        query_complexity: tree.stats().q,
        tree,
        error,
        eps: eps.clone(),
        guarantee,
        mode,
        candidates: plan.num_seeds(),
        members: candidate.len(),
        query_bound: candidate.len() * stats.q,
        input_coins: stats.m,
        reduced_coins: coins as usize,
        chosen_seed: Some(seed),
        work: WorkCounters {
            candidates_scored: plan.num_seeds(),
            coin_strings: bank.len() as u64,
            fourier_terms: scorer.keys,
            wide_arithmetic: wide,
        },
    })
}

/// Scores candidates in unmaterialised form. The Fourier expansion of an
/// average is the average of expansions, so with every coefficient scaled to
/// the common denominator `den` a candidate's distance is
/// `sum_S (sum_j A[s_j][S] - c P[S])^2 / (c den)^2`, and only the integer
/// numerator needs comparing.
struct Scorer {
    bank: Vec<Vec<BigInt>>,
    target: Vec<BigInt>,
    count: u64,
    den: BigInt,
    keys: usize,
}

impl Scorer {
    fn new(bank: &[SparsePoly], target: &SparsePoly, count: u64) -> Self {
        let mut index: BTreeMap<&Monomial, usize> = BTreeMap::new();
        for p in bank.iter().chain(std::iter::once(target)) {
            for (m, _) in p.terms() {
                let next = index.len();
                index.entry(m).or_insert(next);
            }
        }
        let den = common_denominator(
            bank.iter()
                .chain(std::iter::once(target))
                .flat_map(|p| p.terms().map(|(_, c)| c)),
        );
        let dense = |p: &SparsePoly| {
            let mut v = vec![BigInt::zero(); index.len()];
            for (m, c) in p.terms() {
                v[index[m]] = c.numer() * (&den / c.denom());
            }
            v
        };
        let c = BigInt::from(count);
        Self {
            bank: bank.iter().map(dense).collect(),
            target: dense(target).into_iter().map(|t| t * &c).collect(),
            count,
            den,
            keys: index.len(),
        }
    }

    /// Whether `keys * (2 c max|coeff|)^2` stays below `2^126`.
    fn fits_i128(&self) -> bool {
        let max = self
            .bank
            .iter()
            .flatten()
            .chain(&self.target)
            .map(|v| v.magnitude().clone())
            .max()
            .unwrap_or_default();
        let per = BigInt::from(max) * BigInt::from(2 * self.count);
        let bound = &per * &per * BigInt::from(self.keys.max(1));
        bound.bits() < 126
    }

    fn best_seed(&self, plan: &CandidatePlan) -> (u64, bool) {
        if self.fits_i128() {
            let narrow = |v: &Vec<BigInt>| -> Vec<i128> {
                v.iter()
                    .map(|x| i128::try_from(x).expect("bounded"))
                    .collect()
            };
            let bank: Vec<Vec<i128>> = self.bank.iter().map(narrow).collect();
            let target = narrow(&self.target);
            (argmin(&bank, &target, plan), false)
        } else {
            (argmin(&self.bank, &self.target, plan), true)
        }
    }

    fn score(&self, plan: &CandidatePlan, seed: u64) -> Rational {
        let num = numerator(&self.bank, &self.target, &plan.strings(seed));
        let scale = BigInt::from(self.count) * &self.den;
        Rational::new(num, &scale * &scale)
    }
}

fn numerator<T>(bank: &[Vec<T>], target: &[T], strings: &[u64]) -> T
where
    T: Clone + Zero + for<'a> Add<&'a T, Output = T> + Sub<Output = T>,
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    let mut acc: Vec<T> = target.iter().map(|t| T::zero() - t.clone()).collect();
    for &s in strings {
        for (a, b) in acc.iter_mut().zip(&bank[s as usize]) {
            *a = a.clone() + b;
        }
    }
    acc.iter().fold(T::zero(), |sum, a| sum + &(a * a))
}

/// Lowest score, ties to the earliest seed; independent of scheduling.
fn argmin<T>(bank: &[Vec<T>], target: &[T], plan: &CandidatePlan) -> u64
where
    T: Clone + Zero + Ord + Send + Sync + for<'a> Add<&'a T, Output = T> + Sub<Output = T>,
    for<'a> &'a T: Mul<&'a T, Output = T>,
{
    (0..plan.num_seeds())
        .into_par_iter()
        .map(|seed| (numerator(bank, target, &plan.strings(seed)), seed))
        .min()
        .map(|(_, seed)| seed)
        .expect("at least one seed")
}

impl DerandReport {
    pub fn within_guarantee(&self) -> bool {
        self.error <= self.guarantee
    }
}
