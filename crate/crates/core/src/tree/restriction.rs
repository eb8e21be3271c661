use std::fmt;

use crate::error::{Error, Result};

/// A partial assignment of variables to bits, kept sorted by variable index.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Restriction(Vec<(u32, bool)>);

impl Restriction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, bool)>) -> Result<Self> {
        let mut out = Self::new();
        for (var, bit) in pairs {
            if var == 0 {
                return Err(Error::BadVariable(0));
            }
            if out.get(var).is_some() {
                return Err(Error::ParamRange {
                    name: "restriction",
                    value: format!("x{var} assigned twice"),
                    range: "distinct variables",
                });
            }
            out.insert(var, bit);
        }
        Ok(out)
    }

    /// Parses `"x1=0,x3=1"` (the `x` is optional, whitespace ignored).
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (pos, part) in text.split(',').enumerate() {
            let part = part.trim();
            if part.is_empty() {
                continue;
            }
            let bad = || Error::Syntax {
                pos,
                msg: format!("bad restriction item {part:?}"),
            };
            let (lhs, rhs) = part.split_once('=').ok_or_else(bad)?;
            let lhs = lhs.trim();
            let lhs = lhs.strip_prefix('x').unwrap_or(lhs);
            let var: i64 = lhs.trim().parse().map_err(|_| bad())?;
            if var < 1 || var > u32::MAX as i64 {
                return Err(Error::BadVariable(var));
            }
            let bit = match rhs.trim() {
                "0" => false,
                "1" => true,
                _ => return Err(bad()),
            };
            pairs.push((var as u32, bit));
        }
        Self::from_pairs(pairs)
    }

    pub fn get(&self, var: u32) -> Option<bool> {
        self.0
            .binary_search_by_key(&var, |&(v, _)| v)
            .ok()
            .map(|i| self.0[i].1)
    }

    pub fn contains(&self, var: u32) -> bool {
        self.get(var).is_some()
    }

    /// `self ∪ {x_var <- bit}`. Overwrites an existing assignment.
    pub fn with(&self, var: u32, bit: bool) -> Self {
        let mut out = self.clone();
        out.insert(var, bit);
        out
    }

    fn insert(&mut self, var: u32, bit: bool) {
        match self.0.binary_search_by_key(&var, |&(v, _)| v) {
            Ok(i) => self.0[i].1 = bit,
            Err(i) => self.0.insert(i, (var, bit)),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, bool)> + '_ {
        self.0.iter().copied()
    }

    /// True if `x` agrees with every assignment.
    pub fn admits(&self, x: &[bool]) -> bool {
        self.iter()
            .all(|(v, b)| x.get(v as usize - 1).copied() == Some(b))
    }
}

impl fmt::Display for Restriction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .iter()
            .map(|(v, b)| format!("x{v}={}", b as u8))
            .collect();
        f.write_str(&items.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order() {
        let a = Restriction::new().with(3, true).with(1, false);
        let b = Restriction::parse("x1=0, x3=1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "x1=0,x3=1");
        assert_eq!(a.get(3), Some(true));
        assert_eq!(a.get(2), None);
    }

    #[test]
    fn rejects_repeats_and_zero() {
        assert!(Restriction::parse("x1=0,x1=1").is_err());
        assert!(Restriction::parse("x0=1").is_err());
        assert!(Restriction::parse("x2=3").is_err());
        assert!(Restriction::parse("").unwrap().is_empty());
    }
}
