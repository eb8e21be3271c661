//! Field arithmetic, a small-bias generator, a pairwise independent sampler,
//! and the two derandomization steps built on them: shrinking the number of
//! coins a tree uses, and listing averaged candidate trees.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::rational::{ceil, ceil_log2, half, int, Rational};
use crate::tree::{Candidate, Tree};

/// Reduction polynomials for GF(2^k), k = 1..=32, as bit masks including the
/// leading term. Each is the first irreducible trinomial `x^k + x^a + 1`
/// (smallest `a`), or failing that the first irreducible pentanomial.
pub const IRREDUCIBLE: [u64; 33] = [
    0,
    0x3,
    0x7,
    0xb,
    0x13,
    0x25,
    0x43,
    0x83,
    0x11b,
    0x203,
    0x409,
    0x805,
    0x1009,
    0x201b,
    0x4021,
    0x8003,
    0x1002b,
    0x20009,
    0x40009,
    0x80027,
    0x100009,
    0x200005,
    0x400003,
    0x800021,
    0x100001b,
    0x2000009,
    0x400001b,
    0x8000027,
    0x10000003,
    0x20000005,
    0x40000003,
    0x80000009,
    0x10000008d,
];

/// Largest seed length (in coins) the coin-reduction step will materialise.
pub const MAX_SEED_BITS: u32 = 26;

fn check_field(k: u32) -> Result<()> {
    if (1..=32).contains(&k) {
        Ok(())
    } else {
        Err(Error::FieldSize(k))
    }
}

fn check_element(a: u64, k: u32) -> Result<()> {
    if a >> k == 0 {
        Ok(())
    } else {
        Err(Error::ParamRange {
            name: "field element",
            value: a.to_string(),
            range: "[0, 2^k)",
        })
    }
}

/// Product in GF(2^k) modulo `IRREDUCIBLE[k]`.
pub fn gf2k_mul(a: u64, b: u64, k: u32) -> Result<u64> {
    check_field(k)?;
    check_element(a, k)?;
    check_element(b, k)?;
    Ok(mul_unchecked(a, b, k))
}

fn mul_unchecked(mut a: u64, mut b: u64, k: u32) -> u64 {
    let modulus = IRREDUCIBLE[k as usize];
    let mut acc = 0u64;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if (a >> k) & 1 == 1 {
            a ^= modulus;
        }
    }
    acc
}

/// Renders a reduction polynomial, e.g. `x^4 + x + 1`.
pub fn format_poly(mask: u64) -> String {
    let terms: Vec<String> = (0..64)
        .rev()
        .filter(|i| (mask >> i) & 1 == 1)
        .map(|i| match i {
            0 => "1".to_string(),
            1 => "x".to_string(),
            _ => format!("x^{i}"),
        })
        .collect();
    terms.join(" + ")
}

/// The `len` low bits of `word`, least significant first.
pub fn word_bits(word: u64, len: usize) -> Vec<bool> {
    (0..len).map(|j| (word >> j) & 1 == 1).collect()
}

/// The powering small-bias generator over GF(2^k): seed `(x, y)`, output bit
/// `i` is the GF(2) inner product of `x^i` and `y` for `i = 0..m`. Over a
/// uniform seed every nonempty parity of the output has bias at most
/// `(m - 1) / 2^k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BiasedGenerator {
    k: u32,
    m: usize,
}

impl BiasedGenerator {
    pub fn new(k: u32, m: usize) -> Result<Self> {
        check_field(k)?;
        Ok(Self { k, m })
    }

    /// Field size giving bias at most `eps / size` for `m` output bits:
    /// `k = ceil(log2(m * size / eps)) + 1`.
    pub fn field_bits_for(m: usize, size: usize, eps: &Rational) -> u32 {
        ceil_log2(&(int(m as i64) * int(size as i64) / eps)) + 1
    }

    pub fn field_bits(&self) -> u32 {
        self.k
    }

    pub fn output_len(&self) -> usize {
        self.m
    }

    pub fn seed_bits(&self) -> u32 {
        2 * self.k
    }

    pub fn bias_bound(&self) -> Rational {
        if self.m == 0 {
            return Rational::zero();
        }
        int(self.m as i64 - 1) / int(1i64 << self.k)
    }

    pub fn bits(&self, x: u64, y: u64) -> Result<Vec<bool>> {
        aghp_bits((x, y), self.m, self.k)
    }
}

pub fn aghp_bits(seed: (u64, u64), m: usize, k: u32) -> Result<Vec<bool>> {
    check_field(k)?;
    let (x, y) = seed;
    check_element(x, k)?;
    check_element(y, k)?;
    let mut power = 1u64;
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        out.push((power & y).count_ones() % 2 == 1);
        power = mul_unchecked(power, x, k);
    }
    Ok(out)
}

/// Pairwise independent strings `a * g_i + b` over GF(2^k), where `g_i` is
/// the field element encoded by the integer `i - 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairwiseSampler {
    k: u32,
    count: u64,
}

impl PairwiseSampler {
    pub fn new(k: u32, count: u64) -> Result<Self> {
        check_field(k)?;
        if count > 1u64 << k {
            return Err(Error::TooManyPoints { count, k });
        }
        Ok(Self { k, count })
    }

    pub fn field_bits(&self) -> u32 {
        self.k
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn num_seeds(&self) -> u64 {
        1u64 << (2 * self.k)
    }

    /// Seed number `s` in canonical order is `(a, b) = (s >> k, s mod 2^k)`.
    pub fn seed(&self, index: u64) -> (u64, u64) {
        (index >> self.k, index & ((1u64 << self.k) - 1))
    }

    pub fn strings(&self, seed: (u64, u64)) -> Result<Vec<u64>> {
        pairwise_strings(seed, self.count, self.k)
    }
}

pub fn pairwise_strings(seed: (u64, u64), count: u64, k: u32) -> Result<Vec<u64>> {
    check_field(k)?;
    if count > 1u64 << k {
        return Err(Error::TooManyPoints { count, k });
    }
    let (a, b) = seed;
    check_element(a, k)?;
    check_element(b, k)?;
    Ok((0..count).map(|g| mul_unchecked(a, g, k) ^ b).collect())
}

pub(crate) fn check_eps(eps: &Rational) -> Result<()> {
    if eps.is_zero() || *eps < Rational::zero() || *eps >= half() {
        return Err(Error::ParamRange {
            name: "eps",
            value: crate::rational::fraction_string(eps),
            range: "(0, 1/2)",
        });
    }
    Ok(())
}

/// Replaces the coins of `r` by the output of the small-bias generator with
/// bias budget `eps / N`, so that `|mu_r(x) - mu_out(x)| <= eps` for every
/// `x`. Returns `r` unchanged when it is deterministic or already uses no
/// more coins than the generator's seed.
pub fn reduce_randomness(r: &Tree, eps: &Rational) -> Result<Tree> {
    check_eps(eps)?;
    let stats = r.stats();
    if stats.m == 0 {
        return Ok(r.clone());
    }
    let k = BiasedGenerator::field_bits_for(stats.m, stats.size, eps);
    if stats.m as u64 <= 2 * k as u64 {
        return Ok(r.clone());
    }
    reduce_randomness_with_field(r, k)
}

/// Builds `R~(x, s) = R(x, G(s))` for the generator over GF(2^k): a balanced
/// stochastic tree of depth `2k` whose leaves are the deterministic trees
/// `R_{G(s)}`. The coin at depth `j` is bit `j` of the seed word; the low `k`
/// bits are `x`, the high `k` bits `y`.
pub fn reduce_randomness_with_field(r: &Tree, k: u32) -> Result<Tree> {
    check_field(k)?;
    if 2 * k > MAX_SEED_BITS {
        return Err(Error::TooLarge {
            what: "seed bits",
            value: 2 * k as usize,
            limit: MAX_SEED_BITS as usize,
        });
    }
    let gen = BiasedGenerator::new(k, r.stats().m)?;
    let mask = (1u64 << k) - 1;
    fn build(
        level: u32,
        seed: u64,
        depth: u32,
        leaf: &dyn Fn(u64) -> Result<Tree>,
    ) -> Result<Tree> {
        if level == depth {
            return leaf(seed);
        }
        Ok(Tree::coin(
            build(level + 1, seed, depth, leaf)?,
            build(level + 1, seed | (1 << level), depth, leaf)?,
        ))
    }
    let leaf = |seed: u64| -> Result<Tree> {
        let bits = gen.bits(seed & mask, seed >> k)?;
        r.fix_coins(&bits)
    };
    build(0, 0, 2 * k, &leaf)
}

/// How the candidate list is drawn: `count = ceil(1/eps)` strings of
/// `coin_bits` bits from a pairwise sampler over GF(2^field_bits). The field
/// is widened to hold `count` distinct points when the tree uses few coins;
/// strings are then truncated to their low `coin_bits` bits, which keeps
/// them uniform and pairwise independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CandidatePlan {
    pub coin_bits: u32,
    pub sampler: PairwiseSampler,
}

impl CandidatePlan {
    pub fn new(coin_bits: u32, eps: &Rational) -> Result<Self> {
        check_eps(eps)?;
        let count: u64 =
            ceil(&(Rational::one() / eps))
                .try_into()
                .map_err(|_| Error::ParamRange {
                    name: "eps",
                    value: crate::rational::fraction_string(eps),
                    range: "1/eps < 2^64",
                })?;
        let needed = ceil_log2(&int(count as i64));
        let k = coin_bits.max(needed).max(1);
        if 2 * k > MAX_SEED_BITS {
            return Err(Error::TooLarge {
                what: "sampler seed bits",
                value: 2 * k as usize,
                limit: MAX_SEED_BITS as usize,
            });
        }
        Ok(Self {
            coin_bits,
            sampler: PairwiseSampler::new(k, count)?,
        })
    }

    pub fn num_seeds(&self) -> u64 {
        self.sampler.num_seeds()
    }

    /// Coin strings for seed number `index`, each as a `coin_bits`-bit word.
    pub fn strings(&self, index: u64) -> Vec<u64> {
        let mask = if self.coin_bits >= 64 {
            u64::MAX
        } else {
            (1u64 << self.coin_bits) - 1
        };
        self.sampler
            .strings(self.sampler.seed(index))
            .expect("seed within field")
            .into_iter()
            .map(|s| s & mask)
            .collect()
    }
}

/// The deterministic trees `r_s` for every coin string `s` of
/// `coin_bits` bits, indexed by `s`.
pub(crate) fn coin_bank(r: &Tree, coin_bits: u32) -> Result<Vec<Tree>> {
    (0..1u64 << coin_bits)
        .map(|s| r.fix_coins(&word_bits(s, coin_bits as usize)))
        .collect()
}

/// One candidate per sampler seed, in ascending seed order. Each candidate
/// averages the deterministic trees `r_{s_1}, ..., r_{s_c}` for the seed's
/// strings. At least one candidate is within `eps/4` of `mu_r` in squared
/// L2 distance.
pub fn generate_candidates(r: &Tree, eps: &Rational) -> Result<Vec<Candidate>> {
    check_eps(eps)?;
    let m = r.stats().m as u32;
    if m == 0 {
        return Ok(vec![Candidate::new(vec![r.clone()])?]);
    }
    let plan = CandidatePlan::new(m, eps)?;
    let bank = coin_bank(r, m)?;
    (0..plan.num_seeds())
        .map(|i| {
            let members = plan
                .strings(i)
                .into_iter()
                .map(|s| bank[s as usize].clone())
                .collect();
            Candidate::new(members)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::tree::{assignment, parse_tree};
    use num_traits::Signed;

    fn is_irreducible(p: u64) -> bool {
        let deg = 63 - p.leading_zeros();
        let rem = |mut a: u64, m: u64| {
            let dm = 63 - m.leading_zeros();
            while a != 0 && 63 - a.leading_zeros() >= dm {
                a ^= m << (63 - a.leading_zeros() - dm);
            }
            a
        };
        (2u64..1 << (deg / 2 + 1)).all(|q| rem(p, q) != 0)
    }

    #[test]
    fn table_is_irreducible() {
        for (k, &p) in IRREDUCIBLE.iter().enumerate().skip(1) {
            assert_eq!(63 - p.leading_zeros(), k as u32, "degree of entry {k}");
            if k <= 24 {
                assert!(is_irreducible(p), "entry {k} = {}", format_poly(p));
            }
        }
    }

    #[test]
    fn multiplication() {
        for k in [1u32, 2, 5, 8, 32] {
            let mask = if k == 32 {
                u32::MAX as u64
            } else {
                (1 << k) - 1
            };
            let a = 0x9e3779b9 & mask;
            assert_eq!(gf2k_mul(a, 1, k).unwrap(), a);
            assert_eq!(gf2k_mul(a, 0, k).unwrap(), 0);
        }
        assert_eq!(gf2k_mul(0b10, 0b10, 2).unwrap(), 0b11);
        assert_eq!(gf2k_mul(1, 1, 0), Err(Error::FieldSize(0)));
        assert_eq!(gf2k_mul(1, 1, 33), Err(Error::FieldSize(33)));
        assert!(gf2k_mul(4, 1, 2).is_err());
    }

    #[test]
    fn field_is_a_field() {
        for k in 1..=6u32 {
            for a in 1..1u64 << k {
                let inverses = (1..1u64 << k)
                    .filter(|&b| gf2k_mul(a, b, k).unwrap() == 1)
                    .count();
                assert_eq!(inverses, 1, "k={k} a={a}");
            }
        }
    }

    #[test]
    fn aghp_outputs() {
        for x in 0..16 {
            assert_eq!(aghp_bits((x, 0), 5, 4).unwrap(), vec![false; 5]);
            assert_eq!(aghp_bits((x, 3), 7, 4).unwrap().len(), 7);
        }
    }

    fn max_bias(k: u32, m: usize) -> Rational {
        let mut worst = Rational::zero();
        let total = 1u64 << (2 * k);
        for subset in 1u64..1 << m {
            let mut sum = 0i64;
            for seed in 0..total {
                let bits = aghp_bits((seed & ((1 << k) - 1), seed >> k), m, k).unwrap();
                let parity = (0..m)
                    .filter(|&i| (subset >> i) & 1 == 1 && bits[i])
                    .count()
                    % 2;
                sum += if parity == 1 { -1 } else { 1 };
            }
            let b = rat(sum.abs(), total as i64);
            if b > worst {
                worst = b;
            }
        }
        worst
    }

    #[test]
    fn small_bias_exhaustive() {
        assert!(max_bias(4, 4) <= rat(3, 16));
        for k in 1..=4u32 {
            for m in 1..=5usize {
                let g = BiasedGenerator::new(k, m).unwrap();
                assert!(max_bias(k, m) <= g.bias_bound(), "k={k} m={m}");
            }
        }
    }

    #[test]
    fn pairwise_examples() {
        assert_eq!(pairwise_strings((1, 0), 2, 1).unwrap(), vec![0, 1]);
        assert_eq!(pairwise_strings((0, 5), 4, 3).unwrap(), vec![5; 4]);
        assert_eq!(
            pairwise_strings((1, 0), 3, 1),
            Err(Error::TooManyPoints { count: 3, k: 1 })
        );
    }

    #[test]
    fn pairwise_independence_exhaustive() {
        let (k, c) = (3u32, 4u64);
        let s = PairwiseSampler::new(k, c).unwrap();
        let size = 1usize << k;
        let mut pairs = vec![vec![0u32; size * size]; (c * c) as usize];
        let mut marg = vec![vec![0u32; size]; c as usize];
        for idx in 0..s.num_seeds() {
            let strings = s.strings(s.seed(idx)).unwrap();
            for i in 0..c as usize {
                marg[i][strings[i] as usize] += 1;
                for j in 0..c as usize {
                    pairs[i * c as usize + j][strings[i] as usize * size + strings[j] as usize] +=
                        1;
                }
            }
        }
        for m in &marg {
            assert!(m.iter().all(|&n| n == size as u32));
        }
        for i in 0..c as usize {
            for j in 0..c as usize {
                if i != j {
                    assert!(pairs[i * c as usize + j].iter().all(|&n| n == 1));
                }
            }
        }
    }

    #[test]
    fn reduction_is_identity_when_it_cannot_help() {
        let d = parse_tree("(x1 0 1)").unwrap();
        assert_eq!(reduce_randomness(&d, &rat(1, 8)).unwrap(), d);
        let coin = parse_tree("($ 0 1)").unwrap();
        let out = reduce_randomness(&coin, &rat(1, 8)).unwrap();
        let e = crate::fourier::a_fourier(&out).expectation();
        assert!((e - rat(1, 2)).abs() <= rat(1, 8));
        assert!(reduce_randomness(&coin, &rat(1, 2)).is_err());
        assert!(reduce_randomness(&coin, &rat(0, 1)).is_err());
    }

    #[test]
    fn forced_reduction_respects_bias_bound() {
        let r =
            parse_tree("($ ($ (x1 0 ($ 1 0.5)) ($ 1 (x2 0.25 0))) ($ ($ 0 1) (x1 ($ 1 0) 0.75)))")
                .unwrap();
        let st = r.stats();
        let k = 4;
        let reduced = reduce_randomness_with_field(&r, k).unwrap();
        assert_eq!(reduced.stats().m, 2 * k as usize);
        assert_eq!(reduced.stats().q, st.q);
        let bound = int(st.size as i64) * BiasedGenerator::new(k, st.m).unwrap().bias_bound();
        for idx in 0..4 {
            let x = assignment(idx, 2);
            let gap = (r.mu_eval(&x).unwrap() - reduced.mu_eval(&x).unwrap()).abs();
            assert!(gap <= bound);
        }
    }

    #[test]
    fn candidates_for_deterministic_and_coin() {
        let d = parse_tree("(x1 0 1)").unwrap();
        let c = generate_candidates(&d, &rat(1, 8)).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members(), std::slice::from_ref(&d));

        let coin = parse_tree("($ 0 1)").unwrap();
        let eps = rat(1, 8);
        let cands = generate_candidates(&coin, &eps).unwrap();
        // count = 8 points need GF(2^3): 64 seeds
        assert_eq!(cands.len(), 64);
        let best = cands
            .iter()
            .map(|c| crate::fourier::l2_distance(&coin, &c.materialize()))
            .min()
            .unwrap();
        assert!(best <= int(4) * eps);
    }
}
