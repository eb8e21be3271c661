//! Text format for trees.
//!
//! ```text
//! tree  := leaf | "(" "x" INT tree tree ")" | "(" "$" tree tree ")"
//! leaf  := "0" | "1" | "3/4" | "0.25"
//! ```
//!
//! An optional first line `n=<INT>` declares the variable universe. `#`
//! starts a comment running to the end of the line.

use std::fmt;

use crate::error::{Error, Result};
use crate::rational::{format_rational, in_unit_interval, parse_rational_at};

use super::Tree;

/// A parsed tree file: the tree plus the declared universe, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeDoc {
    pub universe: Option<u32>,
    pub tree: Tree,
}

impl TreeDoc {
    /// Declared universe, or the largest variable index present.
    pub fn num_vars(&self) -> u32 {
        self.universe.unwrap_or(0).max(self.tree.stats().num_vars)
    }
}

pub fn parse_tree(text: &str) -> Result<Tree> {
    parse_document(text).map(|d| d.tree)
}

pub fn parse_document(text: &str) -> Result<TreeDoc> {
    let mut p = Parser { src: text, pos: 0 };
    p.skip_ws();
    let universe = p.header()?;
    let tree = p.tree()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.err("trailing input after tree"));
    }
    Ok(TreeDoc { universe, tree })
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::Syntax {
            pos: self.pos,
            msg: msg.to_string(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        loop {
            let rest = self.rest();
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if trimmed.starts_with('#') {
                self.pos += trimmed.find('\n').unwrap_or(trimmed.len());
            } else {
                break;
            }
        }
    }

    fn header(&mut self) -> Result<Option<u32>> {
        let Some(after) = self.rest().strip_prefix("n=") else {
            return Ok(None);
        };
        let digits = after.bytes().take_while(u8::is_ascii_digit).count();
        self.pos += 2;
        if digits == 0 {
            return Err(self.err("expected integer after n="));
        }
        let n = after[..digits]
            .parse::<u32>()
            .map_err(|_| self.err("universe too large"))?;
        self.pos += digits;
        self.skip_ws();
        Ok(Some(n))
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.err(&format!("expected {c:?}")))
        }
    }

    fn tree(&mut self) -> Result<Tree> {
        self.skip_ws();
        let rest = self.rest();
        if rest.is_empty() {
            return Err(self.err("unexpected end of input"));
        }
        if !rest.starts_with('(') {
            return self.leaf();
        }
        self.pos += 1;
        self.skip_ws();
        let node = if self.rest().starts_with('$') {
            self.pos += 1;
            let zero = self.tree()?;
            let one = self.tree()?;
            Tree::coin(zero, one)
        } else if self.rest().starts_with('x') {
            self.pos += 1;
            let start = self.pos;
            let digits = self.rest().bytes().take_while(u8::is_ascii_digit).count();
            if digits == 0 {
                return Err(self.err("expected variable index after 'x'"));
            }
            let text = &self.src[start..start + digits];
            let var: i64 = text.parse().unwrap_or(i64::MAX);
            if var < 1 || var > u32::MAX as i64 {
                return Err(Error::BadVariable(var));
            }
            self.pos += digits;
            let zero = self.tree()?;
            let one = self.tree()?;
            Tree::decision(var as u32, zero, one)
        } else {
            return Err(self.err("expected 'x<INT>' or '$' after '('"));
        };
        self.expect(')')?;
        Ok(node)
    }

    fn leaf(&mut self) -> Result<Tree> {
        let start = self.pos;
        let len = self
            .rest()
            .find(|c: char| c.is_whitespace() || c == '(' || c == ')' || c == '#')
            .unwrap_or(self.rest().len());
        if len == 0 {
            return Err(self.err("expected a leaf value"));
        }
        let value = parse_rational_at(&self.src[start..start + len], start)?;
        if !in_unit_interval(&value) {
            return Err(Error::LeafOutOfRange(value));
        }
        self.pos += len;
        Ok(Tree::Leaf(value))
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(v) => f.write_str(&format_rational(v)),
            Tree::Decision { var, zero, one } => write!(f, "(x{var} {zero} {one})"),
            Tree::Stochastic { zero, one } => write!(f, "($ {zero} {one})"),
        }
    }
}

impl fmt::Display for TreeDoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.universe {
            writeln!(f, "n={n}")?;
        }
        write!(f, "{}", self.tree)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    const SAMPLE: &str = "(x1 (x2 0.9 0.1) ($ (x3 0.2 0.3) 0.5))";

    #[test]
    fn sample_round_trips_verbatim() {
        let t = parse_tree(SAMPLE).unwrap();
        assert_eq!(t.to_string(), SAMPLE);
        let spaced = "(x1\n  (x2 0.9 0.1)   # left\n  ($ (x3 0.2 0.3) 0.5))";
        assert_eq!(parse_tree(spaced).unwrap(), t);
    }

    #[test]
    fn leaves() {
        assert_eq!(parse_tree("0.5").unwrap(), Tree::Leaf(rat(1, 2)));
        assert_eq!(Tree::Leaf(rat(1, 3)).to_string(), "1/3");
        assert_eq!(parse_tree("1/3").unwrap(), Tree::Leaf(rat(1, 3)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            parse_tree("(x1 2 0)"),
            Err(Error::LeafOutOfRange(_))
        ));
        assert!(matches!(parse_tree("(x0 0 1)"), Err(Error::BadVariable(0))));
        assert!(matches!(parse_tree("(x1 0 1"), Err(Error::Syntax { .. })));
        assert!(matches!(
            parse_tree("(y1 0 1)"),
            Err(Error::Syntax { pos: 1, .. })
        ));
        assert!(matches!(
            parse_tree("(x1 0 1) 0"),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(parse_tree(""), Err(Error::Syntax { .. })));
        assert!(matches!(parse_tree("-0.5"), Err(Error::LeafOutOfRange(_))));
    }

    #[test]
    fn header_declares_universe() {
        let d = parse_document("n=5\n(x1 0 1)").unwrap();
        assert_eq!(d.universe, Some(5));
        assert_eq!(d.num_vars(), 5);
        assert_eq!(d.to_string(), "n=5\n(x1 0 1)");
        assert_eq!(parse_document("# c\n(x2 0 1)").unwrap().num_vars(), 2);
    }
}
