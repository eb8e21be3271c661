use num_traits::Zero;

use crate::error::{Error, Result};
use crate::rational::{int, Rational};

use super::Tree;

/// An averaged list of deterministic trees. Its value at `x` is the mean of
/// the members' values; [`Candidate::materialize`] runs the members one after
/// another to produce a single equivalent tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    members: Vec<Tree>,
}

impl Candidate {
    pub fn new(members: Vec<Tree>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyCandidate);
        }
        if members.iter().any(|t| !t.is_deterministic()) {
            return Err(Error::NotDeterministic);
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Tree] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Sum of member query complexities, a bound on the stacked tree's.
    pub fn query_complexity(&self) -> usize {
        self.members.iter().map(|t| t.stats().q).sum()
    }

    pub fn eval(&self, x: &[bool]) -> Result<Rational> {
        let mut sum = Rational::zero();
        for t in &self.members {
            sum += t.mu_eval(x)?;
        }
        Ok(sum / int(self.members.len() as i64))
    }

    /// Builds the stacked tree. Every path concatenates one path from each
    /// member, skipping queries to variables already fixed on the path, so the
    /// result is reduced.
    pub fn materialize(&self) -> Tree {
        let mut path = Vec::new();
        stack(
            &self.members,
            0,
            &self.members[0],
            &mut path,
            Rational::zero(),
        )
    }
}

fn stack(
    members: &[Tree],
    idx: usize,
    node: &Tree,
    path: &mut Vec<(u32, bool)>,
    acc: Rational,
) -> Tree {
    match node {
        Tree::Leaf(v) => {
            let acc = acc + v;
            if idx + 1 == members.len() {
                Tree::Leaf(acc / int(members.len() as i64))
            } else {
                stack(members, idx + 1, &members[idx + 1], path, acc)
            }
        }
        Tree::Decision { var, zero, one } => {
            if let Some(&(_, b)) = path.iter().find(|(v, _)| v == var) {
                return stack(members, idx, if b { one } else { zero }, path, acc);
            }
            path.push((*var, false));
            let z = stack(members, idx, zero, path, acc.clone());
            path.last_mut().unwrap().1 = true;
            let o = stack(members, idx, one, path, acc);
            path.pop();
            Tree::decision(*var, z, o)
        }
        Tree::Stochastic { .. } => unreachable!("candidate members are deterministic"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use crate::tree::{assignment, parse_tree};

    fn t(s: &str) -> Tree {
        parse_tree(s).unwrap()
    }

    #[test]
    fn constant_members_average() {
        let c = Candidate::new(vec![t("0"), t("1")]).unwrap();
        assert_eq!(c.eval(&[false]).unwrap(), rat(1, 2));
        assert_eq!(c.materialize(), Tree::Leaf(rat(1, 2)));
        let c = Candidate::new(vec![t("1/4"), t("1/2")]).unwrap();
        assert_eq!(c.materialize(), Tree::Leaf(rat(3, 8)));
    }

    #[test]
    fn identical_members() {
        let c = Candidate::new(vec![t("(x1 0 1)"); 3]).unwrap();
        assert_eq!(c.materialize().to_string(), "(x1 0 1)");
        assert_eq!(c.query_complexity(), 3);
    }

    #[test]
    fn opposite_members_cancel_pointwise() {
        let c = Candidate::new(vec![t("(x1 0 1)"), t("(x1 1 0)")]).unwrap();
        let d = c.materialize();
        assert_eq!(d.to_string(), "(x1 0.5 0.5)");
        assert!(d.is_reduced());
        for i in 0..2 {
            let x = assignment(i, 1);
            assert_eq!(d.mu_eval(&x).unwrap(), rat(1, 2));
        }
    }

    #[test]
    fn rejects_bad_members() {
        assert_eq!(Candidate::new(vec![]), Err(Error::EmptyCandidate));
        assert_eq!(
            Candidate::new(vec![t("($ 0 1)")]),
            Err(Error::NotDeterministic)
        );
    }
}
