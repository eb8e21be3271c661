use std::collections::HashMap;

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::rational::{half, Rational};
use crate::tree::{Restriction, Tree};

use super::metric::ErrorMetric;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FindResult {
    pub tree: Tree,
    pub error: Rational,
    /// The budget asked for (for `instance_opt`, the smallest one that met
    /// the target).
    pub budget: usize,
    pub query_complexity: usize,
    /// Subproblems solved, i.e. memo misses.
    pub nodes_explored: u64,
    pub memo_hits: u64,
}

#[derive(Clone, Debug)]
struct Entry {
    error: Rational,
    depth: usize,
    /// `None` for the best constant leaf.
    root: Option<u32>,
}

/// Memoised search for the best tree of bounded depth over subcubes of a
/// fixed metric. Subproblems are keyed by `(restriction, budget)`, where
/// the budget is capped at the number of free variables, so one `Finder`
/// can answer many budgets and restrictions.
pub struct Finder<'a> {
    metric: &'a ErrorMetric,
    memo: HashMap<(Restriction, usize), Entry>,
    explored: u64,
    hits: u64,
}

impl<'a> Finder<'a> {
    pub fn new(metric: &'a ErrorMetric) -> Self {
        Self {
            metric,
            memo: HashMap::new(),
            explored: 0,
            hits: 0,
        }
    }

    pub fn metric(&self) -> &ErrorMetric {
        self.metric
    }

    fn free_vars(&self, pi: &Restriction) -> Vec<u32> {
        (1..=self.metric.num_vars())
            .filter(|&v| !pi.contains(v))
            .collect()
    }

    fn key(&self, pi: &Restriction, budget: usize) -> (Restriction, usize) {
        let n = self.metric.num_vars();
        let fixed = pi.iter().filter(|&(v, _)| v <= n).count();
        (pi.clone(), budget.min(n as usize - fixed))
    }

    fn solve(&mut self, pi: &Restriction, budget: usize) -> (Rational, usize) {
        let key = self.key(pi, budget);
        if let Some(e) = self.memo.get(&key) {
            self.hits += 1;
            return (e.error.clone(), e.depth);
        }
        self.explored += 1;
        let budget = key.1;
        let (_, leaf_err) = self.metric.best_constant(pi);
        let mut best = Entry {
            error: leaf_err,
            depth: 0,
            root: None,
        };
        // A zero-error leaf cannot be beaten and is the shallowest option.
        if budget > 0 && best.error.is_positive() {
            for v in self.free_vars(pi) {
                let (e0, d0) = self.solve(&pi.with(v, false), budget - 1);
                let (e1, d1) = self.solve(&pi.with(v, true), budget - 1);
                let error = (e0 + e1) * half();
                let depth = 1 + d0.max(d1);
                // Lower error wins, then the shallower tree, then the lower
                // variable index (the loop order).
                if (&error, depth) < (&best.error, best.depth) {
                    best = Entry {
                        error,
                        depth,
                        root: Some(v),
                    };
                }
            }
        }
        let out = (best.error.clone(), best.depth);
        self.memo.insert(key, best);
        out
    }

    fn build(&self, pi: &Restriction, budget: usize) -> Tree {
        let key = self.key(pi, budget);
        let entry = &self.memo[&key];
        match entry.root {
            None => Tree::Leaf(self.metric.best_constant(pi).0),
            Some(v) => Tree::decision(
                v,
                self.build(&pi.with(v, false), key.1 - 1),
                self.build(&pi.with(v, true), key.1 - 1),
            ),
        }
    }

    /// The best tree of depth at most `budget` on the subcube of `pi`.
    pub fn find(&mut self, budget: usize, pi: &Restriction) -> FindResult {
        let (error, _) = self.solve(pi, budget);
        let tree = self.build(pi, budget);
        FindResult {
            query_complexity: tree.stats().q,
            tree,
            error,
            budget,
            nodes_explored: self.explored,
            memo_hits: self.hits,
        }
    }

    /// Raises the budget from 0 until the error drops to `eps`.
    pub fn instance_opt(&mut self, eps: &Rational, pi: &Restriction) -> Result<FindResult> {
        let n = self.free_vars(pi).len();
        let mut last = None;
        for budget in 0..=n {
            let res = self.find(budget, pi);
            if res.error <= *eps {
                return Ok(res);
            }
            last = Some(res.error);
        }
        Err(Error::Unachievable {
            eps: Box::new(eps.clone()),
            budget: n,
            best: Box::new(last.expect("loop runs at least once")),
        })
    }
}

/// A tree of query complexity at most `budget` minimising the metric's error
/// against the source restricted by `pi`, among all such trees.
pub fn find(metric: &ErrorMetric, budget: usize, pi: &Restriction) -> FindResult {
    Finder::new(metric).find(budget, pi)
}

/// The least-budget tree whose error is at most `eps`.
pub fn instance_opt(metric: &ErrorMetric, eps: &Rational) -> Result<FindResult> {
    if eps.is_negative() {
        return Err(Error::ParamRange {
            name: "eps",
            value: crate::rational::fraction_string(eps),
            range: "[0, inf)",
        });
    }
    Finder::new(metric).instance_opt(eps, &Restriction::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::tree::parse_tree;

    const AND: &str = "(x1 0 (x2 0 1))";

    fn l2(s: &str, n: u32) -> ErrorMetric {
        ErrorMetric::l2(&parse_tree(s).unwrap(), n)
    }

    #[test]
    fn and_budgets() {
        let m = l2(AND, 2);
        let empty = Restriction::new();
        let errs: Vec<Rational> = (0..=3).map(|b| find(&m, b, &empty).error).collect();
        assert_eq!(errs, vec![rat(3, 16), rat(1, 8), rat(0, 1), rat(0, 1)]);
        let r0 = find(&m, 0, &empty);
        assert_eq!(r0.tree, Tree::Leaf(rat(1, 4)));
        let r2 = find(&m, 2, &empty);
        assert_eq!(r2.tree.to_string(), AND);
        for b in 0..=3 {
            let r = find(&m, b, &empty);
            assert_eq!(m.eval(&empty, &r.tree).unwrap(), r.error);
            assert!(r.query_complexity <= b);
        }
    }

    #[test]
    fn coin_budget_zero() {
        let m = l2("($ 0 1)", 0);
        let r = find(&m, 0, &Restriction::new());
        assert_eq!(r.tree, Tree::Leaf(rat(1, 2)));
        assert_eq!(r.error, rat(0, 1));
    }

    #[test]
    fn instance_opt_and() {
        let m = l2(AND, 2);
        let r = instance_opt(&m, &rat(3, 16)).unwrap();
        assert_eq!((r.budget, r.tree.clone()), (0, Tree::Leaf(rat(1, 4))));
        assert_eq!(instance_opt(&m, &rat(1, 8)).unwrap().budget, 1);
        // 1/10 < 1/8, so one query is not enough
        assert_eq!(instance_opt(&m, &rat(1, 10)).unwrap().budget, 2);
        let exact = instance_opt(&m, &rat(0, 1)).unwrap();
        assert_eq!(exact.budget, 2);
        assert_eq!(exact.error, rat(0, 1));
    }

    #[test]
    fn unachievable() {
        let m = ErrorMetric::bayes(&parse_tree("(x1 ($ 0 ($ 0 1)) ($ 1 ($ 1 0)))").unwrap(), 1)
            .unwrap();
        assert_eq!(
            instance_opt(&m, &rat(1, 8)),
            Err(Error::Unachievable {
                eps: Box::new(rat(1, 8)),
                budget: 1,
                best: Box::new(rat(1, 4))
            })
        );
        assert!(matches!(
            instance_opt(&m, &rat(-1, 2)),
            Err(Error::ParamRange { .. })
        ));
    }

    #[test]
    fn respects_restriction_and_memo() {
        let m = l2("(x1 (x2 0.9 0.1) ($ (x3 0.2 0.3) 0.5))", 3);
        let pi = Restriction::parse("x1=0").unwrap();
        let r = find(&m, 1, &pi);
        assert_eq!(r.tree.to_string(), "(x2 0.9 0.1)");
        assert_eq!(r.error, rat(0, 1));
        let mut f = Finder::new(&m);
        let a = f.find(3, &Restriction::new());
        let b = f.find(3, &Restriction::new());
        assert_eq!(a.tree, b.tree);
        assert!(b.memo_hits > a.memo_hits);
    }
}
