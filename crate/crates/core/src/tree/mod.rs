//! Randomized and deterministic decision trees.
//!
//! A [`Tree`] has three node kinds: decision nodes branching on an input bit
//! `x_i` (1-based), stochastic nodes branching on a fair coin, and leaves
//! carrying an exact rational in `[0,1]`. Children are always ordered
//! 0-branch first. A tree without stochastic nodes is a deterministic tree.
//!
//! Inputs are bit slices with `x[i - 1]` holding `x_i`.

mod candidate;
mod format;
mod restriction;

use std::collections::BTreeSet;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{half, in_unit_interval, is_bit, pow2_inv, Rational};

pub use candidate::Candidate;
pub use format::{parse_document, parse_tree, TreeDoc};
pub use restriction::Restriction;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tree {
    Leaf(Rational),
    Decision {
        var: u32,
        zero: Box<Tree>,
        one: Box<Tree>,
    },
    Stochastic {
        zero: Box<Tree>,
        one: Box<Tree>,
    },
}

/// Size measures of a tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeStats {
    /// Query complexity: most decision nodes on a root-to-leaf path.
    pub q: usize,
    /// Randomness complexity: most stochastic nodes on a root-to-leaf path.
    pub m: usize,
    /// Description length: total node count.
    pub size: usize,
    /// Largest variable index present (0 if none).
    pub num_vars: u32,
}

/// The assignment whose bit `i - 1` is `x_i`, for enumerating `{0,1}^n`.
pub fn assignment(index: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| (index >> i) & 1 == 1).collect()
}

/// Renders an assignment as `x_1 x_2 ... x_n`, e.g. `"010"`.
pub fn assignment_string(x: &[bool]) -> String {
    x.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn parse_assignment(text: &str) -> Result<Vec<bool>> {
    text.trim()
        .chars()
        .enumerate()
        .map(|(pos, c)| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(Error::Syntax {
                pos,
                msg: format!("expected 0 or 1, found {c:?}"),
            }),
        })
        .collect()
}

fn read_bit(x: &[bool], var: u32) -> Result<bool> {
    x.get(var as usize - 1)
        .copied()
        .ok_or(Error::UnassignedVariable(var))
}

impl Tree {
    pub fn leaf(value: Rational) -> Self {
        Tree::Leaf(value)
    }

    pub fn decision(var: u32, zero: Tree, one: Tree) -> Self {
        Tree::Decision {
            var,
            zero: Box::new(zero),
            one: Box::new(one),
        }
    }

    pub fn coin(zero: Tree, one: Tree) -> Self {
        Tree::Stochastic {
            zero: Box::new(zero),
            one: Box::new(one),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Tree::Leaf(_))
    }

    /// Checks leaf range and variable indices.
    pub fn validate(&self) -> Result<()> {
        match self {
            Tree::Leaf(v) if !in_unit_interval(v) => Err(Error::LeafOutOfRange(v.clone())),
            Tree::Leaf(_) => Ok(()),
            Tree::Decision { var: 0, .. } => Err(Error::BadVariable(0)),
            Tree::Decision { zero, one, .. } | Tree::Stochastic { zero, one } => {
                zero.validate()?;
                one.validate()
            }
        }
    }

    pub fn stats(&self) -> TreeStats {
        match self {
            Tree::Leaf(_) => TreeStats {
                q: 0,
                m: 0,
                size: 1,
                num_vars: 0,
            },
            Tree::Decision { var, zero, one } => {
                let (a, b) = (zero.stats(), one.stats());
                TreeStats {
                    q: 1 + a.q.max(b.q),
                    m: a.m.max(b.m),
                    size: 1 + a.size + b.size,
                    num_vars: (*var).max(a.num_vars).max(b.num_vars),
                }
            }
            Tree::Stochastic { zero, one } => {
                let (a, b) = (zero.stats(), one.stats());
                TreeStats {
                    q: a.q.max(b.q),
                    m: 1 + a.m.max(b.m),
                    size: 1 + a.size + b.size,
                    num_vars: a.num_vars.max(b.num_vars),
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Tree::Leaf(_) => 0,
            Tree::Decision { zero, one, .. } | Tree::Stochastic { zero, one } => {
                1 + zero.depth().max(one.depth())
            }
        }
    }

    pub fn is_deterministic(&self) -> bool {
        match self {
            Tree::Leaf(_) => true,
            Tree::Decision { zero, one, .. } => zero.is_deterministic() && one.is_deterministic(),
            Tree::Stochastic { .. } => false,
        }
    }

    /// True if every leaf is 0 or 1.
    pub fn is_boolean(&self) -> bool {
        self.first_non_bit_leaf().is_none()
    }

    pub(crate) fn first_non_bit_leaf(&self) -> Option<&Rational> {
        match self {
            Tree::Leaf(v) => (!is_bit(v)).then_some(v),
            Tree::Decision { zero, one, .. } | Tree::Stochastic { zero, one } => zero
                .first_non_bit_leaf()
                .or_else(|| one.first_non_bit_leaf()),
        }
    }

    /// Returns the first variable repeated on some path, if any.
    pub fn repeated_variable(&self) -> Option<u32> {
        fn walk(t: &Tree, path: &mut Vec<u32>) -> Option<u32> {
            match t {
                Tree::Leaf(_) => None,
                Tree::Decision { var, zero, one } => {
                    if path.contains(var) {
                        return Some(*var);
                    }
                    path.push(*var);
                    let r = walk(zero, path).or_else(|| walk(one, path));
                    path.pop();
                    r
                }
                Tree::Stochastic { zero, one } => walk(zero, path).or_else(|| walk(one, path)),
            }
        }
        walk(self, &mut Vec::new())
    }

    pub fn is_reduced(&self) -> bool {
        self.repeated_variable().is_none()
    }

    pub fn decision_vars(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<u32>) {
        match self {
            Tree::Leaf(_) => {}
            Tree::Decision { var, zero, one } => {
                out.insert(*var);
                zero.collect_vars(out);
                one.collect_vars(out);
            }
            Tree::Stochastic { zero, one } => {
                zero.collect_vars(out);
                one.collect_vars(out);
            }
        }
    }

    /// `mu_R(x)`: the output averaged over the coins.
    pub fn mu_eval(&self, x: &[bool]) -> Result<Rational> {
        match self {
            Tree::Leaf(v) => Ok(v.clone()),
            Tree::Decision { var, zero, one } => {
                if read_bit(x, *var)? {
                    one.mu_eval(x)
                } else {
                    zero.mu_eval(x)
                }
            }
            Tree::Stochastic { zero, one } => Ok((zero.mu_eval(x)? + one.mu_eval(x)?) * half()),
        }
    }

    /// `R(x, rnd)`: stochastic nodes on the realised path consume `rnd` in order.
    pub fn eval_rdt(&self, x: &[bool], rnd: &[bool]) -> Result<Rational> {
        let mut node = self;
        let mut used = 0;
        loop {
            match node {
                Tree::Leaf(v) => return Ok(v.clone()),
                Tree::Decision { var, zero, one } => {
                    node = if read_bit(x, *var)? { one } else { zero };
                }
                Tree::Stochastic { zero, one } => {
                    let bit = *rnd.get(used).ok_or(Error::RandomnessExhausted(used))?;
                    used += 1;
                    node = if bit { one } else { zero };
                }
            }
        }
    }

    /// Replaces every decision node on a variable fixed by `pi` with the child
    /// `pi` selects.
    pub fn restrict(&self, pi: &Restriction) -> Tree {
        if pi.is_empty() {
            return self.clone();
        }
        match self {
            Tree::Leaf(v) => Tree::Leaf(v.clone()),
            Tree::Decision { var, zero, one } => match pi.get(*var) {
                Some(false) => zero.restrict(pi),
                Some(true) => one.restrict(pi),
                None => Tree::decision(*var, zero.restrict(pi), one.restrict(pi)),
            },
            Tree::Stochastic { zero, one } => Tree::coin(zero.restrict(pi), one.restrict(pi)),
        }
    }

    /// Resolves repeated queries on a path to the branch already taken.
    pub fn reduce(&self) -> Tree {
        fn walk(t: &Tree, path: &mut Vec<(u32, bool)>) -> Tree {
            match t {
                Tree::Leaf(v) => Tree::Leaf(v.clone()),
                Tree::Decision { var, zero, one } => {
                    if let Some(&(_, b)) = path.iter().find(|(v, _)| v == var) {
                        return walk(if b { one } else { zero }, path);
                    }
                    path.push((*var, false));
                    let z = walk(zero, path);
                    path.last_mut().unwrap().1 = true;
                    let o = walk(one, path);
                    path.pop();
                    Tree::decision(*var, z, o)
                }
                Tree::Stochastic { zero, one } => Tree::coin(walk(zero, path), walk(one, path)),
            }
        }
        walk(self, &mut Vec::new())
    }

    /// `delta_i`: probability that `x_i` is queried on a uniform input and
    /// uniform coins.
    pub fn query_prob(&self, var: u32) -> Result<Rational> {
        if let Some(v) = self.repeated_variable() {
            return Err(Error::NotReduced(v));
        }
        fn walk(t: &Tree, var: u32, depth: usize, acc: &mut Rational) {
            match t {
                Tree::Leaf(_) => {}
                Tree::Decision { var: v, zero, one } => {
                    if *v == var {
                        *acc += pow2_inv(depth);
                    }
                    walk(zero, var, depth + 1, acc);
                    walk(one, var, depth + 1, acc);
                }
                Tree::Stochastic { zero, one } => {
                    walk(zero, var, depth + 1, acc);
                    walk(one, var, depth + 1, acc);
                }
            }
        }
        let mut acc = Rational::zero();
        walk(self, var, 0, &mut acc);
        Ok(acc)
    }

    /// `E_x[mu(x)]` over uniform `x`.
    pub fn mean(&self) -> Rational {
        self.mean_under(&Restriction::new())
    }

    /// `E[mu(x) | x agrees with pi]`. Repeated queries are resolved on the fly,
    /// so this is exact on unreduced trees as well.
    pub fn mean_under(&self, pi: &Restriction) -> Rational {
        fn walk(t: &Tree, pi: &Restriction, path: &mut Vec<(u32, bool)>) -> Rational {
            match t {
                Tree::Leaf(v) => v.clone(),
                Tree::Decision { var, zero, one } => {
                    let fixed = pi
                        .get(*var)
                        .or_else(|| path.iter().find(|(v, _)| v == var).map(|&(_, b)| b));
                    match fixed {
                        Some(b) => walk(if b { one } else { zero }, pi, path),
                        None => {
                            path.push((*var, false));
                            let z = walk(zero, pi, path);
                            path.last_mut().unwrap().1 = true;
                            let o = walk(one, pi, path);
                            path.pop();
                            (z + o) * half()
                        }
                    }
                }
                Tree::Stochastic { zero, one } => {
                    (walk(zero, pi, path) + walk(one, pi, path)) * half()
                }
            }
        }
        walk(self, pi, &mut Vec::new())
    }

    /// The deterministic tree `R_rnd`: the j-th stochastic node on every path
    /// takes branch `rnd[j]`.
    pub fn fix_coins(&self, rnd: &[bool]) -> Result<Tree> {
        fn walk(t: &Tree, rnd: &[bool], used: usize) -> Result<Tree> {
            match t {
                Tree::Leaf(v) => Ok(Tree::Leaf(v.clone())),
                Tree::Decision { var, zero, one } => Ok(Tree::decision(
                    *var,
                    walk(zero, rnd, used)?,
                    walk(one, rnd, used)?,
                )),
                Tree::Stochastic { zero, one } => {
                    let bit = *rnd.get(used).ok_or(Error::RandomnessExhausted(used))?;
                    walk(if bit { one } else { zero }, rnd, used + 1)
                }
            }
        }
        walk(self, rnd, 0)
    }
}
