use crate::rational::Rational;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("leaf value {0} outside [0,1]")]
    LeafOutOfRange(Rational),

    #[error("variable index {0} is invalid (indices are 1-based)")]
    BadVariable(i64),

    #[error("input does not assign variable x{0}")]
    UnassignedVariable(u32),

    #[error("random string exhausted after {0} bits")]
    RandomnessExhausted(usize),

    #[error("tree is not reduced: x{0} is queried twice on one path")]
    NotReduced(u32),

    #[error("tree is not deterministic (contains a stochastic node)")]
    NotDeterministic,

    #[error("tree leaf {0} is not in {{0,1}}")]
    NotBoolean(Rational),

    #[error("candidate has no members")]
    EmptyCandidate,

    #[error("field size k = {0} outside 1..=32")]
    FieldSize(u32),

    #[error("requested {count} sampler points but GF(2^{k}) has only 2^{k}")]
    TooManyPoints { count: u64, k: u32 },

    #[error("parameter {name} = {value}: expected {range}")]
    ParamRange {
        name: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("metric mismatch: {0}")]
    MetricMismatch(String),

    #[error("error target {eps} unreachable: best error at budget {budget} is {best}")]
    Unachievable {
        eps: Box<Rational>,
        budget: usize,
        best: Box<Rational>,
    },

    #[error("not a bounded-error decision tree: mu(x={x}) = {mu}")]
    NotBoundedError { x: String, mu: Rational },

    #[error("instance too large for enumeration: {what} = {value} > {limit}")]
    TooLarge {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("root of tree is not a decision node")]
    RootNotDecision,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
