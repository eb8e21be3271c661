use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fourier::{a_fourier, SparsePoly};
use crate::rational::{half, is_bit, Rational};
use crate::tree::{Restriction, Tree};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    /// `E_x[(mu(x) - D(x))^2]`.
    L2,
    /// `Pr_{x,r}[R(x,r) != D(x)]` for a `{0,1}`-valued source.
    BayesError,
    /// `E_x[|p(x̂) - D(x)|]` for a polynomial with range in `[0,1]`.
    PolyAbs,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::L2 => "l2",
            MetricKind::BayesError => "bayes",
            MetricKind::PolyAbs => "poly",
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(MetricKind::L2),
            "bayes" => Ok(MetricKind::BayesError),
            "poly" => Ok(MetricKind::PolyAbs),
            _ => Err(Error::ParamRange {
                name: "metric",
                value: s.to_string(),
                range: "l2 | bayes | poly",
            }),
        }
    }
}

/// What the error is measured against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Source {
    /// A tree, stored reduced, together with its Fourier expansion.
    Tree(Tree),
    Poly,
}

/// A natural error metric `E(R, D) = E_x[d(mu_R(x), D(x))]` bound to its
/// source. Every quantity is taken over the subcube selected by a
/// restriction, with the free variables uniform.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ErrorMetric {
    kind: MetricKind,
    source: Source,
    poly: SparsePoly,
    n: u32,
}

impl ErrorMetric {
    /// `n` is the variable universe; it is raised to cover every variable
    /// the source mentions.
    pub fn l2(r: &Tree, n: u32) -> Self {
        Self::from_tree(MetricKind::L2, r, n)
    }

    pub fn bayes(r: &Tree, n: u32) -> Result<Self> {
        if let Some(v) = r.first_non_bit_leaf() {
            return Err(Error::NotBoolean(v.clone()));
        }
        Ok(Self::from_tree(MetricKind::BayesError, r, n))
    }

    pub fn poly_abs(p: SparsePoly, n: u32) -> Self {
        let n = n.max(p.num_vars());
        Self {
            kind: MetricKind::PolyAbs,
            source: Source::Poly,
            poly: p,
            n,
        }
    }

    /// Builds a metric of the given kind over a tree source. For `PolyAbs`
    /// the tree's Fourier expansion is used as the polynomial.
    pub fn new(kind: MetricKind, r: &Tree, n: u32) -> Result<Self> {
        match kind {
            MetricKind::L2 => Ok(Self::l2(r, n)),
            MetricKind::BayesError => Self::bayes(r, n),
            MetricKind::PolyAbs => Ok(Self::poly_abs(a_fourier(r), n.max(r.stats().num_vars))),
        }
    }

    fn from_tree(kind: MetricKind, r: &Tree, n: u32) -> Self {
        let tree = r.reduce();
        let poly = a_fourier(&tree);
        Self {
            kind,
            n: n.max(tree.stats().num_vars),
            source: Source::Tree(tree),
            poly,
        }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    /// Fourier expansion of the source's mean function.
    pub fn poly(&self) -> &SparsePoly {
        &self.poly
    }

    pub fn num_vars(&self) -> u32 {
        self.n
    }

    /// `E[mu | pi]`.
    pub fn mean(&self, pi: &Restriction) -> Rational {
        self.poly.mean_under(pi)
    }

    /// `E[mu^2 | pi]`, by Parseval on the restricted expansion.
    pub fn second_moment(&self, pi: &Restriction) -> Rational {
        self.poly.restrict(pi).norm2()
    }

    fn check_leaf(&self, c: &Rational) -> Result<()> {
        if self.kind != MetricKind::L2 && !is_bit(c) {
            return Err(Error::MetricMismatch(format!(
                "{} metric needs {{0,1}} leaves, found {}",
                self.kind,
                crate::rational::format_rational(c)
            )));
        }
        Ok(())
    }

    /// Error of the constant `c` on the subcube of `pi`.
    pub fn constant_error(&self, pi: &Restriction, c: &Rational) -> Result<Rational> {
        self.check_leaf(c)?;
        let mean = self.mean(pi);
        Ok(match self.kind {
            MetricKind::L2 => self.second_moment(pi) - (c + c) * &mean + c * c,
            _ if c.is_zero() => mean,
            _ => Rational::one() - mean,
        })
    }

    /// The constant minimising the error on the subcube of `pi`, and that
    /// error. For L2 this is the conditional mean; for the other metrics it
    /// is the better of 0 and 1, ties going to 0.
    pub fn best_constant(&self, pi: &Restriction) -> (Rational, Rational) {
        let mean = self.mean(pi);
        match self.kind {
            MetricKind::L2 => {
                let err = self.second_moment(pi) - &mean * &mean;
                (mean, err)
            }
            _ => {
                let flip = Rational::one() - &mean;
                if mean <= flip {
                    (Rational::zero(), mean)
                } else {
                    (Rational::one(), flip)
                }
            }
        }
    }

    /// Error of the deterministic tree `d` against the source restricted by
    /// `pi`. L2 goes through Fourier expansions; the other metrics sum
    /// `2^-depth * |E[mu | leaf] - label|` over the leaves of `d`.
    pub fn eval(&self, pi: &Restriction, d: &Tree) -> Result<Rational> {
        if !d.is_deterministic() {
            return Err(Error::NotDeterministic);
        }
        match self.kind {
            MetricKind::L2 => {
                let dp = a_fourier(&d.restrict(pi));
                Ok(dp.sub(&self.poly.restrict(pi)).norm2())
            }
            _ => self.eval_leaves(pi, d),
        }
    }

    fn eval_leaves(&self, pi: &Restriction, d: &Tree) -> Result<Rational> {
        match d {
            Tree::Leaf(c) => self.constant_error(pi, c),
            Tree::Decision { var, zero, one } => match pi.get(*var) {
                Some(false) => self.eval_leaves(pi, zero),
                Some(true) => self.eval_leaves(pi, one),
                None => {
                    let z = self.eval_leaves(&pi.with(*var, false), zero)?;
                    let o = self.eval_leaves(&pi.with(*var, true), one)?;
                    Ok((z + o) * half())
                }
            },
            Tree::Stochastic { .. } => Err(Error::NotDeterministic),
        }
    }
}

/// `metric.eval(pi, d)`.
pub fn metric_eval(metric: &ErrorMetric, pi: &Restriction, d: &Tree) -> Result<Rational> {
    metric.eval(pi, d)
}

/// `metric.best_constant(pi)`.
pub fn metric_best_constant(metric: &ErrorMetric, pi: &Restriction) -> (Rational, Rational) {
    metric.best_constant(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::tree::parse_tree;

    const SAMPLE: &str = "(x1 (x2 0.9 0.1) ($ (x3 0.2 0.3) 0.5))";
    const NOISY_X1: &str = "(x1 ($ 0 ($ 0 1)) ($ 1 ($ 1 0)))";

    fn t(s: &str) -> Tree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn l2_values() {
        let m = ErrorMetric::l2(&t(SAMPLE), 3);
        let pi = Restriction::new();
        assert_eq!(m.eval(&pi, &t("7/16")).unwrap(), rat(539, 6400));
        assert_eq!(m.best_constant(&pi), (rat(7, 16), rat(539, 6400)));
        let coin = ErrorMetric::l2(&t("($ 0 1)"), 0);
        assert_eq!(coin.best_constant(&pi), (rat(1, 2), rat(0, 1)));
    }

    #[test]
    fn bayes_values() {
        let m = ErrorMetric::bayes(&t(NOISY_X1), 1).unwrap();
        let pi = Restriction::new();
        assert_eq!(m.eval(&pi, &t("(x1 0 1)")).unwrap(), rat(1, 4));
        assert_eq!(m.best_constant(&pi), (rat(0, 1), rat(1, 2)));
        let f = t("(x1 0 (x2 1 0))");
        let exact = ErrorMetric::bayes(&f, 2).unwrap();
        assert_eq!(exact.eval(&pi, &f).unwrap(), rat(0, 1));
        assert!(matches!(
            m.eval(&pi, &t("1/2")),
            Err(Error::MetricMismatch(_))
        ));
        assert!(ErrorMetric::bayes(&t(SAMPLE), 3).is_err());
    }

    #[test]
    fn poly_matches_bayes_on_tree_sources() {
        let r = t(NOISY_X1);
        let b = ErrorMetric::bayes(&r, 2).unwrap();
        let p = ErrorMetric::new(MetricKind::PolyAbs, &r, 2).unwrap();
        for d in ["0", "1", "(x1 0 1)", "(x2 1 (x1 0 1))"] {
            for pi in [Restriction::new(), Restriction::parse("x1=1").unwrap()] {
                assert_eq!(b.eval(&pi, &t(d)).unwrap(), p.eval(&pi, &t(d)).unwrap());
            }
        }
    }

    #[test]
    fn restricted_eval() {
        let m = ErrorMetric::l2(&t(SAMPLE), 3);
        let pi = Restriction::parse("x1=0").unwrap();
        assert_eq!(m.best_constant(&pi).0, rat(1, 2));
        assert_eq!(m.eval(&pi, &t("(x2 0.9 0.1)")).unwrap(), rat(0, 1));
        assert_eq!(
            m.eval(&pi, &t("(x1 0 (x2 0.9 0.1))")).unwrap(),
            rat(41, 100)
        );
    }

    #[test]
    fn parse_kind() {
        assert_eq!(
            "bayes".parse::<MetricKind>().unwrap(),
            MetricKind::BayesError
        );
        assert!("l1".parse::<MetricKind>().is_err());
    }
}
